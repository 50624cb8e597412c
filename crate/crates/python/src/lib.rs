//! Python bindings for the evshift toolkit.
//!
//! Event streams cross the boundary as four parallel NumPy arrays
//! (`x: u16`, `y: u16`, `t: u64` microseconds, `p: i8` in {-1, +1});
//! representations and feature matrices as float64 arrays. All functions
//! validate their inputs and raise `ValueError` on contract violations.

use numpy::ndarray::{Array1, Array2, Array3, Array4};
use numpy::{IntoPyArray, PyArray1, PyArray2, PyArray3, PyArray4};
use numpy::{PyReadonlyArray1, PyReadonlyArray2, PyReadonlyArray3};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use std::path::PathBuf;

use evshift_core::codec::{self, EventFormat};
use evshift_core::datasets::ReprChoice;
use evshift_core::diag::{run_diag, DiagConfig, ShiftStats};
use evshift_core::events::{self, Event, EventStream};
use evshift_core::metrics::{self, FeatureMatrix, KernelSpec, PoolMode, ProbMatrix};
use evshift_core::repr::{self, EstKernel, HatsConfig, Rotation, ViewSet};
use evshift_core::simulator::{self, FrameSequence, IntensityFrame, SaccadePattern, SimulatorConfig, ThresholdMode};
use evshift_core::tensor::Tensor;

fn value_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn io_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyIOError::new_err(e.to_string())
}

type EventArrays<'py> = (
    Bound<'py, PyArray1<u16>>,
    Bound<'py, PyArray1<u16>>,
    Bound<'py, PyArray1<u64>>,
    Bound<'py, PyArray1<i8>>,
);

fn build_stream(
    x: PyReadonlyArray1<u16>,
    y: PyReadonlyArray1<u16>,
    t: PyReadonlyArray1<u64>,
    p: PyReadonlyArray1<i8>,
    width: u16,
    height: u16,
) -> PyResult<EventStream> {
    let (x, y, t, p) = (x.as_array(), y.as_array(), t.as_array(), p.as_array());
    let n = x.len();
    if y.len() != n || t.len() != n || p.len() != n {
        return Err(PyValueError::new_err("x, y, t, p must have equal length"));
    }
    let events = (0..n)
        .map(|i| Event { x: x[i], y: y[i], t: t[i], p: p[i] })
        .collect();
    let stream = EventStream::from_events(width, height, events);
    let report = events::validate_stream(&stream);
    if !report.is_empty() {
        return Err(PyValueError::new_err(format!("invalid event stream: {report}")));
    }
    Ok(stream)
}

fn stream_to_arrays<'py>(py: Python<'py>, stream: &EventStream) -> EventArrays<'py> {
    let n = stream.len();
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut t = Vec::with_capacity(n);
    let mut p = Vec::with_capacity(n);
    for e in &stream.events {
        x.push(e.x);
        y.push(e.y);
        t.push(e.t);
        p.push(e.p);
    }
    (
        x.into_pyarray(py),
        y.into_pyarray(py),
        t.into_pyarray(py),
        p.into_pyarray(py),
    )
}

fn tensor_to_array3<'py>(py: Python<'py>, t: Tensor) -> PyResult<Bound<'py, PyArray3<f64>>> {
    let dims = t.dims().to_vec();
    let arr = Array3::from_shape_vec((dims[0], dims[1], dims[2]), t.data().to_vec())
        .map_err(value_err)?;
    Ok(arr.into_pyarray(py))
}

fn array3_to_tensor(arr: PyReadonlyArray3<f64>) -> PyResult<Tensor> {
    let view = arr.as_array();
    let dims = view.shape().to_vec();
    let data: Vec<f64> = view.iter().copied().collect();
    Tensor::from_vec(dims, data).map_err(value_err)
}

fn matrix_from_array(arr: PyReadonlyArray2<f64>) -> PyResult<FeatureMatrix> {
    let view = arr.as_array();
    let (n, d) = (view.nrows(), view.ncols());
    FeatureMatrix::new(n, d, view.iter().copied().collect()).map_err(value_err)
}

fn parse_format(format: &str) -> PyResult<EventFormat> {
    format.parse::<EventFormat>().map_err(value_err)
}

fn parse_rotation(theta: u32) -> PyResult<Rotation> {
    Rotation::from_degrees(theta).map_err(value_err)
}

fn threshold_mode(c_mode: &str, c: f64, c_lo: f64, c_hi: f64) -> PyResult<ThresholdMode> {
    match c_mode {
        "fixed" => Ok(ThresholdMode::Fixed(c)),
        "uniform" => Ok(ThresholdMode::Uniform { lo: c_lo, hi: c_hi }),
        "perpixel" => Ok(ThresholdMode::PerPixelUniform { lo: c_lo, hi: c_hi }),
        other => Err(PyValueError::new_err(format!("unknown c_mode '{other}'"))),
    }
}

/// Simulate an event stream from an intensity-frame stack.
#[pyfunction]
#[pyo3(signature = (frames, timestamps_us, *, c_mode="fixed", c=0.06, c_lo=0.05, c_hi=0.5,
                    refractory_us=0, log_eps=1e-3, noise_rate=0.0, seed=0))]
#[allow(clippy::too_many_arguments)]
fn simulate<'py>(
    py: Python<'py>,
    frames: PyReadonlyArray3<f64>,
    timestamps_us: PyReadonlyArray1<u64>,
    c_mode: &str,
    c: f64,
    c_lo: f64,
    c_hi: f64,
    refractory_us: u64,
    log_eps: f64,
    noise_rate: f64,
    seed: u64,
) -> PyResult<EventArrays<'py>> {
    let view = frames.as_array();
    let shape = view.shape().to_vec();
    let (k, h, w) = (shape[0], shape[1], shape[2]);
    if w > u16::MAX as usize || h > u16::MAX as usize {
        return Err(PyValueError::new_err("frame geometry exceeds u16"));
    }
    let mut grids = Vec::with_capacity(k);
    for frame in view.outer_iter() {
        grids.push(frame.iter().copied().collect::<Vec<f64>>());
    }
    let ts = timestamps_us.as_array().to_vec();
    let sequence =
        FrameSequence::new(w as u16, h as u16, ts, grids).map_err(value_err)?;
    let config = SimulatorConfig {
        threshold_mode: threshold_mode(c_mode, c, c_lo, c_hi)?,
        refractory_us,
        log_eps,
        noise_rate,
        seed,
    };
    let stream = simulator::simulate(&sequence, &config).map_err(value_err)?;
    Ok(stream_to_arrays(py, &stream))
}

/// Translate a still image along a saccade path into a frame stack.
#[pyfunction]
#[pyo3(signature = (image, *, segments=None, frames_per_segment=11, canvas_width=None,
                    canvas_height=None, frame_period_us=10_000))]
#[allow(clippy::type_complexity)]
fn saccade_frames<'py>(
    py: Python<'py>,
    image: PyReadonlyArray2<f64>,
    segments: Option<Vec<(f64, f64)>>,
    frames_per_segment: usize,
    canvas_width: Option<u16>,
    canvas_height: Option<u16>,
    frame_period_us: u64,
) -> PyResult<(Bound<'py, PyArray3<f64>>, Bound<'py, PyArray1<u64>>)> {
    let view = image.as_array();
    let (h, w) = (view.nrows() as u16, view.ncols() as u16);
    let frame =
        IntensityFrame::new(w, h, view.iter().copied().collect()).map_err(value_err)?;
    let pattern = match segments {
        Some(segs) => SaccadePattern::new(segs, frames_per_segment).map_err(value_err)?,
        None => {
            let mut p = SaccadePattern::default_triangle();
            p.frames_per_segment = frames_per_segment.max(2);
            p
        }
    };
    let canvas = (
        canvas_width.unwrap_or_else(|| w.saturating_add(16)),
        canvas_height.unwrap_or_else(|| h.saturating_add(16)),
    );
    let seq = simulator::saccade_frames(&frame, &pattern, canvas, frame_period_us)
        .map_err(value_err)?;
    let k = seq.frames.len();
    let flat: Vec<f64> = seq.frames.concat();
    let arr = Array3::from_shape_vec((k, seq.height as usize, seq.width as usize), flat)
        .map_err(value_err)?;
    Ok((arr.into_pyarray(py), Array1::from_vec(seq.timestamps).into_pyarray(py)))
}

/// Voxel-grid representation, shape [H, W, B].
#[pyfunction]
#[pyo3(signature = (x, y, t, p, *, width, height, bins=9))]
#[allow(clippy::too_many_arguments)]
fn voxel_grid<'py>(
    py: Python<'py>,
    x: PyReadonlyArray1<u16>,
    y: PyReadonlyArray1<u16>,
    t: PyReadonlyArray1<u64>,
    p: PyReadonlyArray1<i8>,
    width: u16,
    height: u16,
    bins: usize,
) -> PyResult<Bound<'py, PyArray3<f64>>> {
    let stream = build_stream(x, y, t, p, width, height)?;
    tensor_to_array3(py, repr::voxel_grid(&stream, bins).map_err(value_err)?)
}

/// HATS representation, shape [H_c*(2*rho+1), W_c*(2*rho+1), 2].
#[pyfunction]
#[pyo3(signature = (x, y, t, p, *, width, height, cell_size=8, rho=3, tau_us=100_000.0,
                    delta_t_us=None))]
#[allow(clippy::too_many_arguments)]
fn hats<'py>(
    py: Python<'py>,
    x: PyReadonlyArray1<u16>,
    y: PyReadonlyArray1<u16>,
    t: PyReadonlyArray1<u64>,
    p: PyReadonlyArray1<i8>,
    width: u16,
    height: u16,
    cell_size: usize,
    rho: usize,
    tau_us: f64,
    delta_t_us: Option<f64>,
) -> PyResult<Bound<'py, PyArray3<f64>>> {
    let stream = build_stream(x, y, t, p, width, height)?;
    let cfg = HatsConfig {
        cell_size,
        rho,
        tau_us,
        delta_t_us: delta_t_us.unwrap_or(f64::INFINITY),
    };
    tensor_to_array3(py, repr::hats(&stream, &cfg).map_err(value_err)?)
}

/// EST representation with a fixed kernel, shape [H, W, 2B].
#[pyfunction]
#[pyo3(signature = (x, y, t, p, *, width, height, bins=9, kernel="trilinear", alpha=1.0))]
#[allow(clippy::too_many_arguments)]
fn est<'py>(
    py: Python<'py>,
    x: PyReadonlyArray1<u16>,
    y: PyReadonlyArray1<u16>,
    t: PyReadonlyArray1<u64>,
    p: PyReadonlyArray1<i8>,
    width: u16,
    height: u16,
    bins: usize,
    kernel: &str,
    alpha: f64,
) -> PyResult<Bound<'py, PyArray3<f64>>> {
    let stream = build_stream(x, y, t, p, width, height)?;
    let kernel = match kernel {
        "trilinear" => EstKernel::Trilinear,
        "exp" => EstKernel::Exponential { alpha },
        other => return Err(PyValueError::new_err(format!("unknown kernel '{other}'"))),
    };
    tensor_to_array3(py, repr::est(&stream, bins, &kernel).map_err(value_err)?)
}

/// Group [H, W, F] channels into views; returns ([V, H, W, 3], pad_channels).
#[pyfunction]
fn group_views<'py>(
    py: Python<'py>,
    tensor: PyReadonlyArray3<f64>,
) -> PyResult<(Bound<'py, PyArray4<f64>>, usize)> {
    let t = array3_to_tensor(tensor)?;
    let views = repr::group_views(&t).map_err(value_err)?;
    let dims = views.views().dims().to_vec();
    let arr = Array4::from_shape_vec(
        (dims[0], dims[1], dims[2], dims[3]),
        views.views().data().to_vec(),
    )
    .map_err(value_err)?;
    Ok((arr.into_pyarray(py), views.pad_channels()))
}

/// Inverse of `group_views`.
#[pyfunction]
fn ungroup_views<'py>(
    py: Python<'py>,
    views: numpy::PyReadonlyArray4<'py, f64>,
    pad_channels: usize,
) -> PyResult<Bound<'py, PyArray3<f64>>> {
    let view = views.as_array();
    let dims = view.shape().to_vec();
    let t = Tensor::from_vec(dims, view.iter().copied().collect()).map_err(value_err)?;
    let set = ViewSet::from_tensor(t, pad_channels).map_err(value_err)?;
    tensor_to_array3(py, repr::ungroup_views(&set))
}

/// Counterclockwise right-angle rotation of an [H, W, F] tensor.
#[pyfunction]
fn rotate<'py>(
    py: Python<'py>,
    tensor: PyReadonlyArray3<f64>,
    theta: u32,
) -> PyResult<Bound<'py, PyArray3<f64>>> {
    let t = array3_to_tensor(tensor)?;
    tensor_to_array3(py, repr::rotate(&t, parse_rotation(theta)?))
}

/// Per-view pooled features of a [V, H, W, 3] stack; mode "mean" or
/// "channel-stats".
#[pyfunction]
#[pyo3(signature = (views, *, pad_channels=0, mode="channel-stats"))]
fn spatial_pool<'py>(
    py: Python<'py>,
    views: numpy::PyReadonlyArray4<'py, f64>,
    pad_channels: usize,
    mode: &str,
) -> PyResult<Bound<'py, PyArray2<f64>>> {
    let view = views.as_array();
    let dims = view.shape().to_vec();
    let t = Tensor::from_vec(dims, view.iter().copied().collect()).map_err(value_err)?;
    let set = ViewSet::from_tensor(t, pad_channels).map_err(value_err)?;
    let mode = match mode {
        "mean" => PoolMode::Mean,
        "channel-stats" | "channel_stats" => PoolMode::ChannelStats,
        other => return Err(PyValueError::new_err(format!("unknown pool mode '{other}'"))),
    };
    let m = metrics::spatial_pool(&set, mode);
    let arr = Array2::from_shape_vec((m.n(), m.d()), m.data().to_vec()).map_err(value_err)?;
    Ok(arr.into_pyarray(py))
}

/// Average view features into one descriptor.
#[pyfunction]
fn mvp_pool<'py>(
    py: Python<'py>,
    view_features: PyReadonlyArray2<f64>,
) -> PyResult<Bound<'py, PyArray1<f64>>> {
    let m = matrix_from_array(view_features)?;
    Ok(metrics::mvp_pool(&m).into_pyarray(py))
}

/// Biased squared MMD with Gaussian kernels. `sigmas` fixes the bandwidths;
/// otherwise the median heuristic scaled by `multipliers` applies.
#[pyfunction]
#[pyo3(signature = (source, target, *, sigmas=None, multipliers=vec![0.5, 1.0, 2.0]))]
fn mmd2(
    source: PyReadonlyArray2<f64>,
    target: PyReadonlyArray2<f64>,
    sigmas: Option<Vec<f64>>,
    multipliers: Vec<f64>,
) -> PyResult<f64> {
    let s = matrix_from_array(source)?;
    let t = matrix_from_array(target)?;
    let spec = match sigmas {
        Some(v) => KernelSpec::Bandwidths(v),
        None => KernelSpec::MedianHeuristic { multipliers },
    };
    metrics::mmd2(&s, &t, &spec).map_err(value_err)
}

/// Median-heuristic Gaussian bandwidth over the pooled rows.
#[pyfunction]
fn median_heuristic_sigma(
    source: PyReadonlyArray2<f64>,
    target: PyReadonlyArray2<f64>,
) -> PyResult<f64> {
    Ok(metrics::median_heuristic_sigma(
        &matrix_from_array(source)?,
        &matrix_from_array(target)?,
    ))
}

/// Mean L2 row norm.
#[pyfunction]
fn mean_feature_norm(features: PyReadonlyArray2<f64>) -> PyResult<f64> {
    Ok(metrics::mean_feature_norm(&matrix_from_array(features)?))
}

/// Absolute difference of the mean feature norms.
#[pyfunction]
fn mmfnd(source: PyReadonlyArray2<f64>, target: PyReadonlyArray2<f64>) -> PyResult<f64> {
    Ok(metrics::mmfnd(&matrix_from_array(source)?, &matrix_from_array(target)?))
}

/// Mean Shannon entropy of probability rows (natural log).
#[pyfunction]
fn entropy(probs: PyReadonlyArray2<f64>) -> PyResult<f64> {
    let view = probs.as_array();
    let p = ProbMatrix::new(view.nrows(), view.ncols(), view.iter().copied().collect())
        .map_err(value_err)?;
    Ok(metrics::entropy(&p))
}

/// Absolute-rotation pretext label: theta / 90.
#[pyfunction]
fn rotation_label(theta: u32) -> PyResult<u8> {
    Ok(metrics::rotation_label(parse_rotation(theta)?))
}

/// Relative-rotation pretext label: ((a - b) mod 360) / 90.
#[pyfunction]
fn relative_rotation_label(theta_a: u32, theta_b: u32) -> PyResult<u8> {
    Ok(metrics::relative_rotation_label(
        parse_rotation(theta_a)?,
        parse_rotation(theta_b)?,
    ))
}

/// Scale timestamps into [0, bins-1].
#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn normalize_timestamps<'py>(
    py: Python<'py>,
    x: PyReadonlyArray1<u16>,
    y: PyReadonlyArray1<u16>,
    t: PyReadonlyArray1<u64>,
    p: PyReadonlyArray1<i8>,
    width: u16,
    height: u16,
    bins: usize,
) -> PyResult<Bound<'py, PyArray1<f64>>> {
    let stream = build_stream(x, y, t, p, width, height)?;
    let ts = events::normalize_timestamps(&stream, bins).map_err(value_err)?;
    Ok(ts.into_pyarray(py))
}

/// Stream statistics as a dict.
#[pyfunction]
fn stream_stats<'py>(
    py: Python<'py>,
    x: PyReadonlyArray1<u16>,
    y: PyReadonlyArray1<u16>,
    t: PyReadonlyArray1<u64>,
    p: PyReadonlyArray1<i8>,
    width: u16,
    height: u16,
) -> PyResult<Bound<'py, PyDict>> {
    let stream = build_stream(x, y, t, p, width, height)?;
    let st = events::stream_stats(&stream);
    let d = PyDict::new(py);
    d.set_item("count", st.count)?;
    d.set_item("duration_us", st.duration_us)?;
    d.set_item("mean_rate_hz", st.mean_rate_hz)?;
    d.set_item("positive_fraction", st.positive_fraction)?;
    Ok(d)
}

/// Read an event file; returns (x, y, t, p, width, height).
#[pyfunction]
#[pyo3(signature = (path, *, format="evt1", width=None, height=None))]
#[allow(clippy::type_complexity)]
fn read_events<'py>(
    py: Python<'py>,
    path: PathBuf,
    format: &str,
    width: Option<u16>,
    height: Option<u16>,
) -> PyResult<(
    Bound<'py, PyArray1<u16>>,
    Bound<'py, PyArray1<u16>>,
    Bound<'py, PyArray1<u64>>,
    Bound<'py, PyArray1<i8>>,
    u16,
    u16,
)> {
    let format = parse_format(format)?;
    let geometry = match (width, height) {
        (Some(w), Some(h)) => Some((w, h)),
        _ => None,
    };
    let stream = codec::read_events(&path, format, geometry).map_err(io_err)?;
    let (x, y, t, p) = stream_to_arrays(py, &stream);
    Ok((x, y, t, p, stream.width, stream.height))
}

/// Write an event file; returns the byte count.
#[pyfunction]
#[pyo3(signature = (path, x, y, t, p, *, width, height, format="evt1"))]
#[allow(clippy::too_many_arguments)]
fn write_events(
    path: PathBuf,
    x: PyReadonlyArray1<u16>,
    y: PyReadonlyArray1<u16>,
    t: PyReadonlyArray1<u64>,
    p: PyReadonlyArray1<i8>,
    width: u16,
    height: u16,
    format: &str,
) -> PyResult<u64> {
    let stream = build_stream(x, y, t, p, width, height)?;
    codec::write_events(&stream, &path, parse_format(format)?).map_err(io_err)
}

fn shift_dict<'py>(py: Python<'py>, s: &ShiftStats) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("n_source", s.n_source)?;
    d.set_item("n_target", s.n_target)?;
    d.set_item("mmd2", s.mmd2)?;
    d.set_item("mmfnd", s.mmfnd)?;
    d.set_item("mean_norm_source", s.mean_norm_source)?;
    d.set_item("mean_norm_target", s.mean_norm_target)?;
    Ok(d)
}

/// Source-vs-target shift diagnostic over two class trees of event files.
/// Returns {"overall": {...}, "classes": {name: {...}}}.
#[pyfunction]
#[pyo3(signature = (source_dir, target_dir, *, repr="voxel", bins=9, format="evt1",
                    width=None, height=None, pool="channel-stats"))]
#[allow(clippy::too_many_arguments)]
fn diag<'py>(
    py: Python<'py>,
    source_dir: PathBuf,
    target_dir: PathBuf,
    repr: &str,
    bins: usize,
    format: &str,
    width: Option<u16>,
    height: Option<u16>,
    pool: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let format = parse_format(format)?;
    let repr = match repr {
        "voxel" => ReprChoice::Voxel { bins },
        "hats" => ReprChoice::Hats(HatsConfig::default()),
        "est" => ReprChoice::Est { bins, kernel: EstKernel::Trilinear },
        other => return Err(PyValueError::new_err(format!("unknown representation '{other}'"))),
    };
    let cfg = DiagConfig {
        repr,
        pool: match pool {
            "mean" => PoolMode::Mean,
            _ => PoolMode::ChannelStats,
        },
        kernel: KernelSpec::default(),
        format,
        geometry: match (width, height) {
            (Some(w), Some(h)) => Some((w, h)),
            _ => None,
        },
    };
    let report = run_diag(&source_dir, &target_dir, &cfg, None, None).map_err(value_err)?;
    let out = PyDict::new(py);
    out.set_item("overall", shift_dict(py, &report.overall)?)?;
    let classes = PyDict::new(py);
    for (name, stats) in &report.per_class {
        classes.set_item(name, shift_dict(py, stats)?)?;
    }
    out.set_item("classes", classes)?;
    Ok(out)
}

#[pymodule]
fn evshift(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(saccade_frames, m)?)?;
    m.add_function(wrap_pyfunction!(voxel_grid, m)?)?;
    m.add_function(wrap_pyfunction!(hats, m)?)?;
    m.add_function(wrap_pyfunction!(est, m)?)?;
    m.add_function(wrap_pyfunction!(group_views, m)?)?;
    m.add_function(wrap_pyfunction!(ungroup_views, m)?)?;
    m.add_function(wrap_pyfunction!(rotate, m)?)?;
    m.add_function(wrap_pyfunction!(spatial_pool, m)?)?;
    m.add_function(wrap_pyfunction!(mvp_pool, m)?)?;
    m.add_function(wrap_pyfunction!(mmd2, m)?)?;
    m.add_function(wrap_pyfunction!(median_heuristic_sigma, m)?)?;
    m.add_function(wrap_pyfunction!(mean_feature_norm, m)?)?;
    m.add_function(wrap_pyfunction!(mmfnd, m)?)?;
    m.add_function(wrap_pyfunction!(entropy, m)?)?;
    m.add_function(wrap_pyfunction!(rotation_label, m)?)?;
    m.add_function(wrap_pyfunction!(relative_rotation_label, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_timestamps, m)?)?;
    m.add_function(wrap_pyfunction!(stream_stats, m)?)?;
    m.add_function(wrap_pyfunction!(read_events, m)?)?;
    m.add_function(wrap_pyfunction!(write_events, m)?)?;
    m.add_function(wrap_pyfunction!(diag, m)?)?;
    Ok(())
}
