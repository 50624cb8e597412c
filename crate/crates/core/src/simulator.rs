//! Contrast-threshold event simulation from intensity-frame sequences.
//!
//! The generator follows the standard crossing model: per pixel, the
//! log-intensity signal is interpolated linearly between consecutive frames
//! and an event is emitted whenever the signal crosses a level a multiple of
//! the contrast threshold C away from that pixel's reference level. The
//! reference resets to the crossed level on each *emitted* event; crossings
//! swallowed by the refractory period are lost and leave the reference
//! untouched, which reproduces the texture inconsistencies real pixels show.
//!
//! Because the reference only ever moves onto crossed levels, all candidate
//! levels for a pixel live on the fixed lattice `L0 + n*C` anchored at the
//! pixel's initial log intensity. Crossings are therefore enumerated with
//! integer lattice indices, which keeps the level arithmetic exact.

use std::fs;
use std::path::Path;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::Deserialize;
use thiserror::Error;

use crate::events::{Event, EventStream};

/// Tolerance, in lattice units, when deciding whether a crossing boundary
/// was reached. Absorbs float noise when a ramp ends exactly on a level.
const GRID_EPS: f64 = 1e-9;

/// How the contrast threshold C is chosen for a simulation run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdMode {
    /// One constant C.
    Fixed(f64),
    /// One global C drawn uniformly from `[lo, hi)` per sequence.
    Uniform { lo: f64, hi: f64 },
    /// An independent C per pixel, each uniform in `[lo, hi)`.
    PerPixelUniform { lo: f64, hi: f64 },
}

/// A threshold draw: either one global C or a per-pixel field.
#[derive(Debug, Clone, PartialEq)]
pub enum ThresholdField {
    Global(f64),
    PerPixel(Vec<f64>),
}

impl ThresholdField {
    fn at(&self, pixel: usize) -> f64 {
        match self {
            ThresholdField::Global(c) => *c,
            ThresholdField::PerPixel(v) => v[pixel],
        }
    }
}

/// Simulator configuration: threshold regime plus the non-idealities
/// (refractory period, background noise) that plain simulators omit.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatorConfig {
    pub threshold_mode: ThresholdMode,
    /// Pixel dead time after an emitted event, microseconds.
    pub refractory_us: u64,
    /// Offset added before taking the log, keeps log intensity finite at 0.
    pub log_eps: f64,
    /// Spurious events per pixel per second, Poisson distributed.
    pub noise_rate: f64,
    pub seed: u64,
}

impl Default for SimulatorConfig {
    fn default() -> Self {
        Self {
            threshold_mode: ThresholdMode::Fixed(0.06),
            refractory_us: 0,
            log_eps: 1e-3,
            noise_rate: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("invalid frame sequence: {0}")]
    InvalidFrames(String),
    #[error("image {iw}x{ih} larger than canvas {cw}x{ch}")]
    ImageLargerThanCanvas { iw: u16, ih: u16, cw: u16, ch: u16 },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
}

impl SimulatorConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        match self.threshold_mode {
            ThresholdMode::Fixed(c) => {
                if !c.is_finite() || c <= 0.0 {
                    return Err(SimError::InvalidConfig(format!("fixed C must be > 0, got {c}")));
                }
            }
            ThresholdMode::Uniform { lo, hi } | ThresholdMode::PerPixelUniform { lo, hi } => {
                if !hi.is_finite() || lo <= 0.0 || lo >= hi {
                    return Err(SimError::InvalidConfig(format!(
                        "uniform C bounds must satisfy 0 < lo < hi, got [{lo}, {hi})"
                    )));
                }
            }
        }
        if !self.log_eps.is_finite() || self.log_eps <= 0.0 {
            return Err(SimError::InvalidConfig(format!(
                "log_eps must be a small positive value, got {}",
                self.log_eps
            )));
        }
        if !self.noise_rate.is_finite() || self.noise_rate < 0.0 {
            return Err(SimError::InvalidConfig(format!(
                "noise_rate must be >= 0, got {}",
                self.noise_rate
            )));
        }
        Ok(())
    }

    /// Parse the `[simulator]` table of a TOML config file.
    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        let file: ConfigFile = toml::from_str(text)
            .map_err(|e| SimError::InvalidConfig(format!("config parse error: {e}")))?;
        let raw = file.simulator.unwrap_or_default();
        let defaults = SimulatorConfig::default();
        let mode = match raw.threshold_mode.as_deref() {
            None | Some("fixed") => ThresholdMode::Fixed(raw.c.unwrap_or(0.06)),
            Some("uniform") => ThresholdMode::Uniform {
                lo: raw.c_lo.unwrap_or(0.05),
                hi: raw.c_hi.unwrap_or(0.5),
            },
            Some("perpixel") => ThresholdMode::PerPixelUniform {
                lo: raw.c_lo.unwrap_or(0.05),
                hi: raw.c_hi.unwrap_or(0.5),
            },
            Some(other) => {
                return Err(SimError::InvalidConfig(format!("unknown threshold_mode '{other}'")))
            }
        };
        let cfg = SimulatorConfig {
            threshold_mode: mode,
            refractory_us: raw.refractory_us.unwrap_or(defaults.refractory_us),
            log_eps: raw.log_eps.unwrap_or(defaults.log_eps),
            noise_rate: raw.noise_rate.unwrap_or(defaults.noise_rate),
            seed: raw.seed.unwrap_or(defaults.seed),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_file(path: &Path) -> Result<Self, SimError> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }
}

#[derive(Debug, Default, Deserialize)]
struct ConfigFile {
    simulator: Option<RawSimulator>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSimulator {
    threshold_mode: Option<String>,
    c: Option<f64>,
    c_lo: Option<f64>,
    c_hi: Option<f64>,
    refractory_us: Option<u64>,
    log_eps: Option<f64>,
    noise_rate: Option<f64>,
    seed: Option<u64>,
}

/// A single grayscale intensity grid with values in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityFrame {
    pub width: u16,
    pub height: u16,
    pub data: Vec<f64>,
}

impl IntensityFrame {
    pub fn new(width: u16, height: u16, data: Vec<f64>) -> Result<Self, SimError> {
        if data.len() != width as usize * height as usize {
            return Err(SimError::InvalidFrames(format!(
                "frame data length {} does not match {width}x{height}",
                data.len()
            )));
        }
        if !data.iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)) {
            return Err(SimError::InvalidFrames("intensities must be finite in [0, 1]".into()));
        }
        Ok(Self { width, height, data })
    }

    /// Load any grayscale-convertible image (PNG, PGM, JPEG, ...) as
    /// intensities in `[0, 1]`.
    pub fn from_image_file(path: &Path) -> Result<Self, SimError> {
        let img = image::open(path)?.to_luma8();
        let (w, h) = (img.width() as u16, img.height() as u16);
        let data = img.pixels().map(|p| p.0[0] as f64 / 255.0).collect();
        IntensityFrame::new(w, h, data)
    }

    /// Write as an 8-bit binary PGM (P5).
    pub fn write_pgm(&self, path: &Path) -> Result<(), SimError> {
        let buf: Vec<u8> =
            self.data.iter().map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8).collect();
        let img = image::GrayImage::from_raw(self.width as u32, self.height as u32, buf)
            .expect("buffer length checked at construction");
        img.save_with_format(path, image::ImageFormat::Pnm)?;
        Ok(())
    }
}

/// Timestamped sequence of intensity frames feeding the simulator.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    pub width: u16,
    pub height: u16,
    /// Strictly increasing, microseconds.
    pub timestamps: Vec<u64>,
    /// One `width*height` grid per timestamp, values in `[0, 1]`.
    pub frames: Vec<Vec<f64>>,
}

impl FrameSequence {
    pub fn new(
        width: u16,
        height: u16,
        timestamps: Vec<u64>,
        frames: Vec<Vec<f64>>,
    ) -> Result<Self, SimError> {
        if timestamps.len() != frames.len() || frames.len() < 2 {
            return Err(SimError::InvalidFrames(format!(
                "need matching timestamps/frames with at least 2 entries, got {}/{}",
                timestamps.len(),
                frames.len()
            )));
        }
        if !timestamps.windows(2).all(|w| w[0] < w[1]) {
            return Err(SimError::InvalidFrames("timestamps must be strictly increasing".into()));
        }
        let n = width as usize * height as usize;
        for (k, f) in frames.iter().enumerate() {
            if f.len() != n {
                return Err(SimError::InvalidFrames(format!(
                    "frame {k} has {} pixels, expected {n}",
                    f.len()
                )));
            }
            if !f.iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)) {
                return Err(SimError::InvalidFrames(format!(
                    "frame {k} has intensities outside [0, 1]"
                )));
            }
        }
        Ok(Self { width, height, timestamps, frames })
    }

    /// Load a directory of PGM frames (sorted by filename) plus a
    /// `timestamps.txt` of one microsecond value per line.
    pub fn from_dir(dir: &Path) -> Result<Self, SimError> {
        let ts_path = dir.join("timestamps.txt");
        let ts_text = fs::read_to_string(&ts_path)?;
        let timestamps: Vec<u64> = ts_text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(|l| {
                l.parse::<u64>().map_err(|_| {
                    SimError::InvalidFrames(format!("bad timestamp line '{l}' in timestamps.txt"))
                })
            })
            .collect::<Result<_, _>>()?;
        let mut paths: Vec<_> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.extension().and_then(|e| e.to_str()).map(|e| e.eq_ignore_ascii_case("pgm"))
                    == Some(true)
            })
            .collect();
        paths.sort();
        if paths.len() != timestamps.len() {
            return Err(SimError::InvalidFrames(format!(
                "{} PGM frames but {} timestamps",
                paths.len(),
                timestamps.len()
            )));
        }
        let mut width = 0u16;
        let mut height = 0u16;
        let mut frames = Vec::with_capacity(paths.len());
        for (k, p) in paths.iter().enumerate() {
            let f = IntensityFrame::from_image_file(p)?;
            if k == 0 {
                width = f.width;
                height = f.height;
            } else if (f.width, f.height) != (width, height) {
                return Err(SimError::InvalidFrames(format!(
                    "frame {} geometry {}x{} differs from {}x{}",
                    p.display(),
                    f.width,
                    f.height,
                    width,
                    height
                )));
            }
            frames.push(f.data);
        }
        FrameSequence::new(width, height, timestamps, frames)
    }

    /// Write all frames as zero-padded PGM files plus `timestamps.txt`.
    pub fn write_dir(&self, dir: &Path) -> Result<(), SimError> {
        fs::create_dir_all(dir)?;
        let mut ts = String::new();
        for (k, (frame, t)) in self.frames.iter().zip(&self.timestamps).enumerate() {
            let f = IntensityFrame {
                width: self.width,
                height: self.height,
                data: frame.clone(),
            };
            f.write_pgm(&dir.join(format!("frame_{k:05}.pgm")))?;
            ts.push_str(&format!("{t}\n"));
        }
        fs::write(dir.join("timestamps.txt"), ts)?;
        Ok(())
    }
}

/// Saccade-style motion: straight translation segments traversed at constant
/// velocity, mimicking how still images are recorded with an event camera
/// moving in front of a monitor.
#[derive(Debug, Clone, PartialEq)]
pub struct SaccadePattern {
    /// Per-segment pixel displacement (dx, dy).
    pub segments: Vec<(f64, f64)>,
    /// Frames per segment, including both endpoints; >= 2.
    pub frames_per_segment: usize,
}

impl SaccadePattern {
    pub fn new(segments: Vec<(f64, f64)>, frames_per_segment: usize) -> Result<Self, SimError> {
        if segments.is_empty() {
            return Err(SimError::InvalidConfig("saccade needs at least one segment".into()));
        }
        if frames_per_segment < 2 {
            return Err(SimError::InvalidConfig("frames_per_segment must be >= 2".into()));
        }
        Ok(Self { segments, frames_per_segment })
    }

    /// Three-segment closed triangle, the N-Caltech recording convention.
    /// With a 10 ms frame period each segment spans 100 ms.
    pub fn default_triangle() -> Self {
        Self { segments: vec![(8.0, 6.0), (8.0, -6.0), (-16.0, 0.0)], frames_per_segment: 11 }
    }
}

/// Per-pixel log intensity `ln(I + log_eps)`, finite everywhere on `[0, 1]`.
pub fn log_intensity(frame: &[f64], log_eps: f64) -> Vec<f64> {
    frame.iter().map(|&v| (v + log_eps).ln()).collect()
}

/// Draw the contrast threshold(s) for one sequence. Fixed mode consumes no
/// randomness; the uniform modes draw from `[lo, hi)`.
pub fn sample_threshold<R: RngExt>(
    mode: ThresholdMode,
    rng: &mut R,
    n_pixels: usize,
) -> ThresholdField {
    match mode {
        ThresholdMode::Fixed(c) => ThresholdField::Global(c),
        ThresholdMode::Uniform { lo, hi } => ThresholdField::Global(rng.random_range(lo..hi)),
        ThresholdMode::PerPixelUniform { lo, hi } => {
            ThresholdField::PerPixel((0..n_pixels).map(|_| rng.random_range(lo..hi)).collect())
        }
    }
}

/// Generate the event stream for a frame sequence under `config`.
///
/// Output events are sorted by `(t, y, x, p)` and all timestamps lie within
/// the frame time span. Identical inputs and seed give identical streams
/// regardless of thread count.
pub fn simulate(frames: &FrameSequence, config: &SimulatorConfig) -> Result<EventStream, SimError> {
    config.validate()?;
    let w = frames.width as usize;
    let h = frames.height as usize;
    let n_px = w * h;

    let mut threshold_rng = ChaCha8Rng::seed_from_u64(config.seed);
    threshold_rng.set_stream(0);
    let thresholds = sample_threshold(config.threshold_mode, &mut threshold_rng, n_px);

    let log_frames: Vec<Vec<f64>> =
        frames.frames.iter().map(|f| log_intensity(f, config.log_eps)).collect();
    let times: Vec<f64> = frames.timestamps.iter().map(|&t| t as f64).collect();
    let refractory = config.refractory_us as f64;

    let mut events: Vec<Event> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut row_events = Vec::new();
            for x in 0..w {
                let px = y * w + x;
                let c = thresholds.at(px);
                simulate_pixel(
                    x as u16,
                    y as u16,
                    px,
                    c,
                    refractory,
                    &log_frames,
                    &times,
                    &mut row_events,
                );
            }
            row_events
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();

    if config.noise_rate > 0.0 {
        let mut noise_rng = ChaCha8Rng::seed_from_u64(config.seed);
        noise_rng.set_stream(1);
        let t_first = frames.timestamps[0];
        let t_last = *frames.timestamps.last().unwrap();
        let duration_s = (t_last - t_first) as f64 / 1e6;
        let lambda = config.noise_rate * n_px as f64 * duration_s;
        if lambda > 0.0 {
            let n_noise = Poisson::new(lambda)
                .map_err(|e| SimError::InvalidConfig(format!("noise rate: {e}")))?
                .sample(&mut noise_rng) as u64;
            for _ in 0..n_noise {
                events.push(Event {
                    x: noise_rng.random_range(0..frames.width),
                    y: noise_rng.random_range(0..frames.height),
                    t: noise_rng.random_range(t_first..=t_last),
                    p: if noise_rng.random_bool(0.5) { 1 } else { -1 },
                });
            }
        }
    }

    events.sort_by_key(|e| (e.t, e.y, e.x, e.p));
    Ok(EventStream { width: frames.width, height: frames.height, events })
}

/// Walk one pixel's piecewise-linear log signal and emit lattice crossings.
#[allow(clippy::too_many_arguments)]
fn simulate_pixel(
    x: u16,
    y: u16,
    px: usize,
    c: f64,
    refractory: f64,
    log_frames: &[Vec<f64>],
    times: &[f64],
    out: &mut Vec<Event>,
) {
    let anchor = log_frames[0][px];
    // Reference level as a lattice index: level = anchor + ref_n * c.
    let mut ref_n: i64 = 0;
    let mut last_emit: Option<f64> = None;

    for k in 0..log_frames.len() - 1 {
        let la = log_frames[k][px];
        let lb = log_frames[k + 1][px];
        if la == lb {
            continue;
        }
        let (ta, tb) = (times[k], times[k + 1]);
        let ga = (la - anchor) / c;
        let gb = (lb - anchor) / c;
        if lb > la {
            let n_lo = (ga + GRID_EPS).floor() as i64 + 1;
            let n_hi = (gb + GRID_EPS).floor() as i64;
            for n in n_lo..=n_hi {
                if n == ref_n {
                    continue;
                }
                let level = anchor + n as f64 * c;
                let tc = ta + (level - la) / (lb - la) * (tb - ta);
                if last_emit.is_none_or(|le| tc - le >= refractory) {
                    out.push(Event { x, y, t: tc.round() as u64, p: 1 });
                    ref_n = n;
                    last_emit = Some(tc);
                }
            }
        } else {
            let n_hi = (ga - GRID_EPS).ceil() as i64 - 1;
            let n_lo = (gb - GRID_EPS).ceil() as i64;
            for n in (n_lo..=n_hi).rev() {
                if n == ref_n {
                    continue;
                }
                let level = anchor + n as f64 * c;
                let tc = ta + (level - la) / (lb - la) * (tb - ta);
                if last_emit.is_none_or(|le| tc - le >= refractory) {
                    out.push(Event { x, y, t: tc.round() as u64, p: -1 });
                    ref_n = n;
                    last_emit = Some(tc);
                }
            }
        }
    }
}

/// Synthesize a frame sequence by translating a still image over a black
/// canvas along the saccade pattern, bilinear resampling at fractional
/// offsets. Frame `k` is stamped `k * frame_period_us`; consecutive segments
/// share their endpoint frame.
pub fn saccade_frames(
    image: &IntensityFrame,
    pattern: &SaccadePattern,
    canvas: (u16, u16),
    frame_period_us: u64,
) -> Result<FrameSequence, SimError> {
    let (cw, ch) = canvas;
    if image.width > cw || image.height > ch {
        return Err(SimError::ImageLargerThanCanvas {
            iw: image.width,
            ih: image.height,
            cw,
            ch,
        });
    }
    if frame_period_us == 0 {
        return Err(SimError::InvalidConfig("frame_period_us must be > 0".into()));
    }
    let mut ox = (cw - image.width) as f64 / 2.0;
    let mut oy = (ch - image.height) as f64 / 2.0;
    let steps = pattern.frames_per_segment - 1;

    let mut frames = vec![render_at(image, cw, ch, ox, oy)];
    for &(dx, dy) in &pattern.segments {
        for j in 1..=steps {
            let f = j as f64 / steps as f64;
            frames.push(render_at(image, cw, ch, ox + dx * f, oy + dy * f));
        }
        ox += dx;
        oy += dy;
    }
    let timestamps = (0..frames.len() as u64).map(|k| k * frame_period_us).collect();
    FrameSequence::new(cw, ch, timestamps, frames)
}

fn render_at(image: &IntensityFrame, cw: u16, ch: u16, ox: f64, oy: f64) -> Vec<f64> {
    let (iw, ih) = (image.width as i64, image.height as i64);
    let tap = |sx: i64, sy: i64| -> f64 {
        if sx < 0 || sy < 0 || sx >= iw || sy >= ih {
            0.0
        } else {
            image.data[(sy * iw + sx) as usize]
        }
    };
    let mut out = vec![0.0; cw as usize * ch as usize];
    for yy in 0..ch as usize {
        for xx in 0..cw as usize {
            let sx = xx as f64 - ox;
            let sy = yy as f64 - oy;
            // Skip pixels with no image support under any bilinear tap.
            if sx <= -1.0 || sy <= -1.0 || sx >= iw as f64 || sy >= ih as f64 {
                continue;
            }
            let x0 = sx.floor();
            let y0 = sy.floor();
            let fx = sx - x0;
            let fy = sy - y0;
            let (x0, y0) = (x0 as i64, y0 as i64);
            let v = tap(x0, y0) * (1.0 - fx) * (1.0 - fy)
                + tap(x0 + 1, y0) * fx * (1.0 - fy)
                + tap(x0, y0 + 1) * (1.0 - fx) * fy
                + tap(x0 + 1, y0 + 1) * fx * fy;
            out[yy * cw as usize + xx] = v;
        }
    }
    out
}
