//! Shared test helpers: independent brute-force oracles and random input
//! generators. The oracles re-derive every formula from scratch and must not
//! call into the code paths they check.

#![allow(dead_code)]

use evshift_core::events::{Event, EventStream};
use evshift_core::metrics::FeatureMatrix;
use evshift_core::repr::{EstKernel, HatsConfig};
use evshift_core::simulator::IntensityFrame;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random valid stream: sorted timestamps (duplicates allowed), coordinates
/// inside the geometry, polarity +/-1.
pub fn random_stream(
    rng: &mut ChaCha8Rng,
    width: u16,
    height: u16,
    max_events: usize,
    max_t: u64,
) -> EventStream {
    let n = rng.random_range(1..=max_events);
    let mut ts: Vec<u64> = (0..n).map(|_| rng.random_range(0..=max_t)).collect();
    ts.sort_unstable();
    let events = ts
        .into_iter()
        .map(|t| Event {
            x: rng.random_range(0..width),
            y: rng.random_range(0..height),
            t,
            p: if rng.random_bool(0.5) { 1 } else { -1 },
        })
        .collect();
    EventStream::from_events(width, height, events)
}

/// Random stream whose events stay strictly inside the spatial bounds.
pub fn random_interior_stream(
    rng: &mut ChaCha8Rng,
    width: u16,
    height: u16,
    max_events: usize,
    max_t: u64,
) -> EventStream {
    let mut s = random_stream(rng, width, height, max_events, max_t);
    for e in &mut s.events {
        e.x = e.x.clamp(1, width - 2);
        e.y = e.y.clamp(1, height - 2);
    }
    s
}

fn tri(a: f64) -> f64 {
    (1.0 - a.abs()).max(0.0)
}

/// Voxel-grid oracle: full triple loop over every voxel and every event,
/// evaluating all three triangular kernels. Timestamp scaling is re-derived
/// here rather than taken from the library.
pub fn voxel_oracle(stream: &EventStream, bins: usize) -> Vec<f64> {
    let (h, w) = (stream.height as usize, stream.width as usize);
    let t_min = stream.events.iter().map(|e| e.t).min().unwrap();
    let t_max = stream.events.iter().map(|e| e.t).max().unwrap();
    let t_star: Vec<f64> = stream
        .events
        .iter()
        .map(|e| {
            if t_max == t_min {
                0.0
            } else {
                (e.t - t_min) as f64 * (bins - 1) as f64 / (t_max - t_min) as f64
            }
        })
        .collect();
    let mut out = vec![0.0; h * w * bins];
    for y in 0..h {
        for x in 0..w {
            for b in 0..bins {
                let mut acc = 0.0;
                for (e, ts) in stream.events.iter().zip(&t_star) {
                    acc += e.p as f64
                        * tri(x as f64 - e.x as f64)
                        * tri(y as f64 - e.y as f64)
                        * tri(b as f64 - ts);
                }
                out[(y * w + x) * bins + b] = acc;
            }
        }
    }
    out
}

/// HATS oracle: plain double loop over event pairs per the definition,
/// tiled into `[H_c*(2r+1), W_c*(2r+1), 2]` with ON on channel 0.
pub fn hats_oracle(stream: &EventStream, cfg: &HatsConfig) -> Vec<f64> {
    let k = cfg.cell_size;
    let win = 2 * cfg.rho + 1;
    let w_c = (stream.width as usize).div_ceil(k);
    let h_c = (stream.height as usize).div_ceil(k);
    let rows = h_c * win;
    let cols = w_c * win;
    let mut out = vec![0.0; rows * cols * 2];
    for cy in 0..h_c {
        for cx in 0..w_c {
            for (pol_idx, pol) in [1i8, -1].iter().enumerate() {
                let members: Vec<&Event> = stream
                    .events
                    .iter()
                    .filter(|e| {
                        e.p == *pol
                            && e.x as usize / k == cx
                            && e.y as usize / k == cy
                    })
                    .collect();
                if members.is_empty() {
                    continue;
                }
                let mut hist = vec![0.0; win * win];
                for ei in &members {
                    for ej in &members {
                        let ti = ei.t as f64;
                        let tj = ej.t as f64;
                        if tj > ti || ti - tj > cfg.delta_t_us {
                            continue;
                        }
                        let dx = ej.x as i64 - ei.x as i64;
                        let dy = ej.y as i64 - ei.y as i64;
                        if dx.abs() > cfg.rho as i64 || dy.abs() > cfg.rho as i64 {
                            continue;
                        }
                        let u = (dx + cfg.rho as i64) as usize;
                        let v = (dy + cfg.rho as i64) as usize;
                        hist[v * win + u] += (-(ti - tj) / cfg.tau_us).exp();
                    }
                }
                let norm = members.len() as f64;
                for v in 0..win {
                    for u in 0..win {
                        let r = cy * win + v;
                        let c = cx * win + u;
                        out[(r * cols + c) * 2 + pol_idx] = hist[v * win + u] / norm;
                    }
                }
            }
        }
    }
    out
}

fn est_kernel_value(kernel: &EstKernel, a: f64) -> f64 {
    match kernel {
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

/// EST oracle: loop over every output cell and every event.
pub fn est_oracle(stream: &EventStream, bins: usize, kernel: &EstKernel) -> Vec<f64> {
    let (h, w) = (stream.height as usize, stream.width as usize);
    let t_n = stream.events.iter().map(|e| e.t).max().unwrap() as f64;
    let channels = 2 * bins;
    let mut out = vec![0.0; h * w * channels];
    for y in 0..h {
        for x in 0..w {
            for b in 0..bins {
                for (pol_idx, pol) in [1i8, -1].iter().enumerate() {
                    let mut acc = 0.0;
                    for e in &stream.events {
                        if e.x as usize == x && e.y as usize == y && e.p == *pol {
                            let t_hat = e.t as f64 / t_n;
                            acc += t_hat
                                * est_kernel_value(kernel, t_hat - b as f64 / (bins - 1) as f64);
                        }
                    }
                    out[(y * w + x) * channels + 2 * b + pol_idx] = acc;
                }
            }
        }
    }
    out
}

/// Naive biased MMD^2 with explicit Gaussian evaluations, averaged over the
/// bandwidth list.
pub fn mmd2_oracle(s: &FeatureMatrix, t: &FeatureMatrix, sigmas: &[f64]) -> f64 {
    let gauss = |a: &[f64], b: &[f64], sigma: f64| {
        let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        (-d2 / (2.0 * sigma * sigma)).exp()
    };
    let mut total = 0.0;
    for &sigma in sigmas {
        let mut kss = 0.0;
        for i in 0..s.n() {
            for j in 0..s.n() {
                kss += gauss(s.row(i), s.row(j), sigma);
            }
        }
        let mut ktt = 0.0;
        for i in 0..t.n() {
            for j in 0..t.n() {
                ktt += gauss(t.row(i), t.row(j), sigma);
            }
        }
        let mut kst = 0.0;
        for i in 0..s.n() {
            for j in 0..t.n() {
                kst += gauss(s.row(i), t.row(j), sigma);
            }
        }
        let ns = s.n() as f64;
        let nt = t.n() as f64;
        total += kss / (ns * ns) + ktt / (nt * nt) - 2.0 * kst / (ns * nt);
    }
    total / sigmas.len() as f64
}

/// Smooth random test image: blended gradients and a bright blob, values
/// in [0, 1].
pub fn synthetic_image(rng: &mut ChaCha8Rng, width: u16, height: u16) -> IntensityFrame {
    let (w, h) = (width as usize, height as usize);
    let gx: f64 = rng.random_range(-0.5..0.5);
    let gy: f64 = rng.random_range(-0.5..0.5);
    let cx: f64 = rng.random_range(0.2..0.8) * w as f64;
    let cy: f64 = rng.random_range(0.2..0.8) * h as f64;
    let radius: f64 = rng.random_range(0.15..0.35) * w.min(h) as f64;
    let base: f64 = rng.random_range(0.2..0.5);
    let mut data = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let fx = x as f64 / w as f64 - 0.5;
            let fy = y as f64 / h as f64 - 0.5;
            let d = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt();
            let blob = if d < radius { 0.45 * (1.0 - d / radius) } else { 0.0 };
            data[y * w + x] = (base + gx * fx + gy * fy + blob).clamp(0.0, 1.0);
        }
    }
    IntensityFrame::new(width, height, data).unwrap()
}
