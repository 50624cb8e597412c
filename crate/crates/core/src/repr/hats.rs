//! Histograms of Averaged Time Surfaces.
//!
//! The sensor is divided into K x K cells. For each cell and polarity, the
//! local time surfaces of its events (exponentially decayed timestamps of
//! same-cell, same-polarity events inside a (2*rho+1)^2 neighborhood and a
//! trailing memory window) are summed and normalized by the event count,
//! then tiled by cell position into two channels, one per polarity. The
//! whole temporal window collapses into a single frame.

use crate::events::EventStream;
use crate::repr::ReprError;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HatsConfig {
    /// Cell edge K in pixels.
    pub cell_size: usize,
    /// Neighborhood radius rho; the histogram is (2*rho+1) x (2*rho+1).
    pub rho: usize,
    /// Exponential decay constant, microseconds.
    pub tau_us: f64,
    /// Memory window: only events within `delta_t_us` before the anchor
    /// contribute. Defaults to infinity (whole history).
    pub delta_t_us: f64,
}

impl Default for HatsConfig {
    fn default() -> Self {
        Self { cell_size: 8, rho: 3, tau_us: 100_000.0, delta_t_us: f64::INFINITY }
    }
}

impl HatsConfig {
    pub fn validate(&self) -> Result<(), ReprError> {
        let window = 2 * self.rho + 1;
        if self.cell_size < window {
            return Err(ReprError::InvalidConfig(format!(
                "cell_size {} must be >= 2*rho+1 = {window}",
                self.cell_size
            )));
        }
        if !self.tau_us.is_finite() || self.tau_us <= 0.0 {
            return Err(ReprError::InvalidConfig(format!("tau must be > 0, got {}", self.tau_us)));
        }
        if self.delta_t_us.is_nan() || self.delta_t_us <= 0.0 {
            return Err(ReprError::InvalidConfig(format!(
                "delta_t must be > 0, got {}",
                self.delta_t_us
            )));
        }
        Ok(())
    }
}

/// Build the HATS tensor of shape `[H_c*(2*rho+1), W_c*(2*rho+1), 2]` where
/// `H_c = ceil(H / K)` and `W_c = ceil(W / K)`. Channel 0 holds ON
/// histograms, channel 1 OFF.
pub fn hats(stream: &EventStream, config: &HatsConfig) -> Result<Tensor, ReprError> {
    config.validate()?;
    if stream.is_empty() {
        return Err(ReprError::EmptyStream);
    }
    let k = config.cell_size;
    let win = 2 * config.rho + 1;
    let rho = config.rho as i64;
    let w_c = (stream.width as usize).div_ceil(k);
    let h_c = (stream.height as usize).div_ceil(k);

    // Bucket events per (cell, polarity); stream order keeps them sorted.
    let mut cells: Vec<Vec<(i64, i64, f64)>> = vec![Vec::new(); w_c * h_c * 2];
    for e in &stream.events {
        let cx = e.x as usize / k;
        let cy = e.y as usize / k;
        let pol = if e.p == 1 { 0 } else { 1 };
        cells[(cy * w_c + cx) * 2 + pol].push((e.x as i64, e.y as i64, e.t as f64));
    }

    let mut out = Tensor::zeros(&[h_c * win, w_c * win, 2]);
    let mut hist = vec![0.0f64; win * win];
    for cy in 0..h_c {
        for cx in 0..w_c {
            for pol in 0..2usize {
                let evs = &cells[(cy * w_c + cx) * 2 + pol];
                if evs.is_empty() {
                    continue;
                }
                hist.iter_mut().for_each(|v| *v = 0.0);
                for &(xi, yi, ti) in evs {
                    for &(xj, yj, tj) in evs {
                        if tj > ti || ti - tj > config.delta_t_us {
                            continue;
                        }
                        let dx = xj - xi;
                        let dy = yj - yi;
                        if dx.abs() > rho || dy.abs() > rho {
                            continue;
                        }
                        let u = (dx + rho) as usize;
                        let v = (dy + rho) as usize;
                        hist[v * win + u] += (-(ti - tj) / config.tau_us).exp();
                    }
                }
                let norm = evs.len().max(1) as f64;
                for v in 0..win {
                    for u in 0..win {
                        out.set(
                            &[cy * win + v, cx * win + u, pol],
                            hist[v * win + u] / norm,
                        );
                    }
                }
            }
        }
    }
    Ok(out)
}
