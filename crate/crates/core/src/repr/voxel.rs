//! Voxel-grid (event volume) representation.

use crate::events::{normalize_timestamps, EventError, EventStream};
use crate::repr::ReprError;
use crate::tensor::Tensor;

/// Accumulate polarity-signed events into an `[H, W, B]` volume:
/// `R(x, y, b) = sum_i p_i * k(x - x_i) * k(y - y_i) * k(b - t*_i)` with the
/// triangular kernel `k(a) = max(0, 1 - |a|)` and timestamps scaled into
/// `[0, B-1]`.
///
/// Event coordinates are integral, so the spatial kernels reduce to an
/// exact-pixel indicator and each event splits its polarity between the two
/// bins bracketing `t*`.
pub fn voxel_grid(stream: &EventStream, bins: usize) -> Result<Tensor, ReprError> {
    assert!(bins >= 1, "bin count must be >= 1");
    let t_star = normalize_timestamps(stream, bins).map_err(|e| match e {
        EventError::EmptyStream => ReprError::EmptyStream,
        other => ReprError::InvalidConfig(other.to_string()),
    })?;
    let (h, w) = (stream.height as usize, stream.width as usize);
    let mut grid = Tensor::zeros(&[h, w, bins]);
    for (e, ts) in stream.events.iter().zip(&t_star) {
        let p = e.p as f64;
        let b0 = ts.floor();
        let frac = ts - b0;
        let b0 = b0 as usize;
        let base = (e.y as usize * w + e.x as usize) * bins;
        grid.data_mut()[base + b0] += p * (1.0 - frac);
        if frac > 0.0 && b0 + 1 < bins {
            grid.data_mut()[base + b0 + 1] += p * frac;
        }
    }
    Ok(grid)
}
