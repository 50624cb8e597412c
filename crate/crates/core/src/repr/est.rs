//! Event Spike Tensor with fixed kernels.
//!
//! Per pixel and polarity, events vote into B temporal bins weighted by
//! their normalized timestamp `t̂ = t / t_N` (t_N the last stream timestamp)
//! and a kernel evaluated at `t̂ - b/(B-1)`:
//!
//! `R(x, y, b, p) = sum_{e in E^(x,y,p)} t̂ * K(t̂ - b/(B-1))`
//!
//! Channels interleave bin-major, polarity-minor: `[b0+, b0-, b1+, ...]`.

use crate::events::EventStream;
use crate::repr::ReprError;
use crate::tensor::Tensor;

/// Fixed EST kernels. The trilinear kernel mirrors the voxel-grid triangle;
/// the exponential variant is `exp(-alpha * |a|)`; `Table` interpolates
/// samples spread uniformly over `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub enum EstKernel {
    Trilinear,
    Exponential { alpha: f64 },
    Table { samples: Vec<f64> },
}

impl EstKernel {
    pub fn validate(&self) -> Result<(), ReprError> {
        match self {
            EstKernel::Trilinear => Ok(()),
            EstKernel::Exponential { alpha } => {
                if !(alpha.is_finite() && *alpha > 0.0) {
                    return Err(ReprError::InvalidConfig(format!(
                        "exponential kernel alpha must be > 0, got {alpha}"
                    )));
                }
                Ok(())
            }
            EstKernel::Table { samples } => {
                if samples.len() < 2 {
                    return Err(ReprError::InvalidConfig(
                        "table kernel needs at least 2 samples".into(),
                    ));
                }
                if !samples.iter().all(|v| v.is_finite()) {
                    return Err(ReprError::InvalidConfig(
                        "table kernel samples must be finite".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Evaluate the kernel at `a`; arguments outside `[-1, 1]` map to 0.
    pub fn eval(&self, a: f64) -> f64 {
        match self {
            EstKernel::Trilinear => (1.0 - a.abs()).max(0.0),
            EstKernel::Exponential { alpha } => {
                if a.abs() > 1.0 {
                    0.0
                } else {
                    (-alpha * a.abs()).exp()
                }
            }
            EstKernel::Table { samples } => {
                if !(-1.0..=1.0).contains(&a) {
                    return 0.0;
                }
                let pos = (a + 1.0) / 2.0 * (samples.len() - 1) as f64;
                let i0 = pos.floor() as usize;
                let i1 = (i0 + 1).min(samples.len() - 1);
                let frac = pos - i0 as f64;
                samples[i0] * (1.0 - frac) + samples[i1] * frac
            }
        }
    }
}

/// Build the EST tensor of shape `[H, W, 2B]`.
pub fn est(stream: &EventStream, bins: usize, kernel: &EstKernel) -> Result<Tensor, ReprError> {
    assert!(bins >= 2, "EST needs at least 2 bins");
    kernel.validate()?;
    if stream.is_empty() {
        return Err(ReprError::EmptyStream);
    }
    let t_n = stream.t_max().unwrap();
    if t_n == 0 {
        return Err(ReprError::ZeroLastTimestamp);
    }
    let (h, w) = (stream.height as usize, stream.width as usize);
    let channels = 2 * bins;
    let mut out = Tensor::zeros(&[h, w, channels]);
    let t_n = t_n as f64;
    let denom = (bins - 1) as f64;
    for e in &stream.events {
        let t_hat = e.t as f64 / t_n;
        let pol = if e.p == 1 { 0 } else { 1 };
        let base = (e.y as usize * w + e.x as usize) * channels;
        for b in 0..bins {
            let v = t_hat * kernel.eval(t_hat - b as f64 / denom);
            out.data_mut()[base + 2 * b + pol] += v;
        }
    }
    Ok(out)
}
