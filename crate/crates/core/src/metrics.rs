//! Closed-form domain-discrepancy quantities on feature matrices: kernel
//! MMD, mean-feature-norm discrepancy (the AFN diagnostic), prediction
//! entropy, rotation pretext labels, and the pooling operators that turn
//! multi-view representation tensors into per-sample feature vectors.

use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::repr::{Rotation, ViewSet};
use crate::tensor::{Tensor, TensorError};

/// Row-sum tolerance for probability matrices; rows within it are
/// renormalized, rows beyond it rejected.
const PROB_ROW_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
    #[error("tensor error: {0}")]
    Tensor(#[from] TensorError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Which domain a feature matrix came from, for bookkeeping only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DomainTag {
    Source,
    Target,
    #[default]
    Untagged,
}

/// An `n x d` matrix of per-sample feature vectors, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n: usize,
    d: usize,
    data: Vec<f64>,
    pub domain_tag: DomainTag,
}

impl FeatureMatrix {
    pub fn new(n: usize, d: usize, data: Vec<f64>) -> Result<Self, MetricError> {
        if n == 0 || d == 0 {
            return Err(MetricError::InvalidMatrix(format!(
                "need n >= 1 and d >= 1, got {n} x {d}"
            )));
        }
        if data.len() != n * d {
            return Err(MetricError::InvalidMatrix(format!(
                "data length {} does not match {n} x {d}",
                data.len()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(MetricError::InvalidMatrix("features must be finite".into()));
        }
        Ok(Self { n, d, data, domain_tag: DomainTag::Untagged })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, MetricError> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(MetricError::InvalidMatrix("ragged rows".into()));
        }
        Self::new(n, d, rows.concat())
    }

    pub fn with_tag(mut self, tag: DomainTag) -> Self {
        self.domain_tag = tag;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d)
    }

    /// Load from a TEN1 file (ndim = 2) or a CSV with header `f0,f1,...`,
    /// chosen by extension.
    pub fn read(path: &Path) -> Result<Self, MetricError> {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => Self::read_csv(path),
            _ => {
                let t = Tensor::read_ten1(path)?;
                Self::from_tensor(&t)
            }
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), MetricError> {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => self.write_csv(path),
            _ => {
                self.to_tensor().write_ten1(path)?;
                Ok(())
            }
        }
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self, MetricError> {
        if t.ndim() != 2 {
            return Err(MetricError::InvalidMatrix(format!(
                "feature tensor must be 2-D, got {:?}",
                t.dims()
            )));
        }
        Self::new(t.dims()[0], t.dims()[1], t.data().to_vec())
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::from_vec(vec![self.n, self.d], self.data.clone()).expect("matrix data is finite")
    }

    pub fn read_csv(path: &Path) -> Result<Self, MetricError> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| MetricError::InvalidMatrix("empty CSV file".into()))?;
        let d = header.split(',').count();
        let mut data = Vec::new();
        let mut n = 0;
        for line in lines {
            let row: Result<Vec<f64>, _> = line.split(',').map(|f| f.trim().parse()).collect();
            let row =
                row.map_err(|_| MetricError::InvalidMatrix(format!("bad CSV row '{line}'")))?;
            if row.len() != d {
                return Err(MetricError::InvalidMatrix(format!(
                    "row has {} fields, header has {d}",
                    row.len()
                )));
            }
            data.extend(row);
            n += 1;
        }
        Self::new(n, d, data)
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), MetricError> {
        let mut out = String::new();
        let header: Vec<String> = (0..self.d).map(|i| format!("f{i}")).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for row in self.rows() {
            let fields: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// An `n x K` matrix of class probabilities. Construction renormalizes rows
/// whose sum is within 1e-6 of 1 and rejects anything else.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMatrix {
    n: usize,
    k: usize,
    data: Vec<f64>,
}

impl ProbMatrix {
    pub fn new(n: usize, k: usize, mut data: Vec<f64>) -> Result<Self, MetricError> {
        if n == 0 || k == 0 || data.len() != n * k {
            return Err(MetricError::InvalidDistribution(format!(
                "need an n x K matrix with n, K >= 1; got {n} x {k} with {} values",
                data.len()
            )));
        }
        for (i, row) in data.chunks_exact_mut(k).enumerate() {
            if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(MetricError::InvalidDistribution(format!(
                    "row {i} has negative or non-finite entries"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > PROB_ROW_TOL {
                return Err(MetricError::InvalidDistribution(format!(
                    "row {i} sums to {sum}, outside 1 +/- {PROB_ROW_TOL}"
                )));
            }
            row.iter_mut().for_each(|v| *v /= sum);
        }
        Ok(Self { n, k, data })
    }

    pub fn read(path: &Path) -> Result<Self, MetricError> {
        let m = FeatureMatrix::read(path)?;
        Self::new(m.n, m.d, m.data)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn classes(&self) -> usize {
        self.k
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.k)
    }
}

/// Gaussian RBF bandwidths for [`mmd2`]: either given explicitly or derived
/// from the median heuristic scaled by each multiplier.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    Bandwidths(Vec<f64>),
    MedianHeuristic { multipliers: Vec<f64> },
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec::MedianHeuristic { multipliers: vec![0.5, 1.0, 2.0] }
    }
}

impl KernelSpec {
    pub fn validate(&self) -> Result<(), MetricError> {
        let values = match self {
            KernelSpec::Bandwidths(v) => v,
            KernelSpec::MedianHeuristic { multipliers } => multipliers,
        };
        if values.is_empty() || values.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(MetricError::InvalidMatrix(
                "kernel spec needs a nonempty list of positive values".into(),
            ));
        }
        Ok(())
    }

    fn resolve(&self, s: &FeatureMatrix, t: &FeatureMatrix) -> Vec<f64> {
        match self {
            KernelSpec::Bandwidths(v) => v.clone(),
            KernelSpec::MedianHeuristic { multipliers } => {
                let base = median_heuristic_sigma(s, t);
                multipliers.iter().map(|m| m * base).collect()
            }
        }
    }
}

fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Gaussian RBF kernel `exp(-||x - y||^2 / (2 sigma^2))`.
pub fn gaussian_kernel(x: &[f64], y: &[f64], sigma: f64) -> Result<f64, MetricError> {
    if x.len() != y.len() {
        return Err(MetricError::DimMismatch { left: x.len(), right: y.len() });
    }
    assert!(sigma > 0.0, "sigma must be > 0");
    Ok((-sq_dist(x, y) / (2.0 * sigma * sigma)).exp())
}

/// Median-heuristic bandwidth over the pooled sample set:
/// `sigma^2 = median of nonzero-index pairwise squared distances / 2`.
/// Falls back to 1 when there are no pairs or the median is zero, keeping
/// the bandwidth strictly positive.
pub fn median_heuristic_sigma(s: &FeatureMatrix, t: &FeatureMatrix) -> f64 {
    let pooled: Vec<&[f64]> = s.rows().chain(t.rows()).collect();
    let mut dists = Vec::with_capacity(pooled.len() * (pooled.len().saturating_sub(1)) / 2);
    for i in 0..pooled.len() {
        for j in i + 1..pooled.len() {
            if pooled[i].len() == pooled[j].len() {
                dists.push(sq_dist(pooled[i], pooled[j]));
            }
        }
    }
    if dists.is_empty() {
        return 1.0;
    }
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = dists.len() / 2;
    let median = if dists.len() % 2 == 0 {
        (dists[mid - 1] + dists[mid]) / 2.0
    } else {
        dists[mid]
    };
    if median <= 0.0 {
        return 1.0;
    }
    (median / 2.0).sqrt()
}

/// Squared maximum mean discrepancy, biased V-statistic, averaged over the
/// bandwidth set:
///
/// `(1/n_s^2) sum k(s,s') + (1/n_t^2) sum k(t,t') - (2/(n_s n_t)) sum k(s,t)`
///
/// The result is >= 0 up to ~1e-9 of float noise; identical inputs give 0.
/// Row sums are computed in parallel but reduced in a fixed order, so the
/// value is bit-stable across thread counts.
pub fn mmd2(s: &FeatureMatrix, t: &FeatureMatrix, spec: &KernelSpec) -> Result<f64, MetricError> {
    if s.d != t.d {
        return Err(MetricError::DimMismatch { left: s.d, right: t.d });
    }
    spec.validate()?;
    let sigmas = spec.resolve(s, t);
    let mut acc = 0.0;
    for &sigma in &sigmas {
        let inv = -1.0 / (2.0 * sigma * sigma);
        let kss = pair_sum(s, s, inv);
        let ktt = pair_sum(t, t, inv);
        let kst = pair_sum(s, t, inv);
        let ns = s.n as f64;
        let nt = t.n as f64;
        acc += kss / (ns * ns) + ktt / (nt * nt) - 2.0 * kst / (ns * nt);
    }
    Ok(acc / sigmas.len() as f64)
}

/// Sum of `exp(inv * ||a_i - b_j||^2)` over all row pairs; per-row partial
/// sums in parallel, final reduction sequential in row order.
fn pair_sum(a: &FeatureMatrix, b: &FeatureMatrix, inv: f64) -> f64 {
    let row_sums: Vec<f64> = (0..a.n)
        .into_par_iter()
        .map(|i| {
            let ra = a.row(i);
            let mut sum = 0.0;
            for rb in b.rows() {
                sum += (inv * sq_dist(ra, rb)).exp();
            }
            sum
        })
        .collect();
    row_sums.iter().sum()
}

/// Mean L2 norm of the rows: `(1/n) sum_i ||x_i||_2`.
pub fn mean_feature_norm(x: &FeatureMatrix) -> f64 {
    let sum: f64 = x.rows().map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt()).sum();
    sum / x.n as f64
}

/// Maximum mean feature norm discrepancy: the absolute difference of the
/// two mean L2 feature norms. Dimensions may differ since norms are scalar.
pub fn mmfnd(s: &FeatureMatrix, t: &FeatureMatrix) -> f64 {
    (mean_feature_norm(s) - mean_feature_norm(t)).abs()
}

/// Mean Shannon entropy of the rows, natural log, `0 ln 0 := 0`.
/// Result lies in `[0, ln K]`.
pub fn entropy(p: &ProbMatrix) -> f64 {
    let mut total = 0.0;
    for row in p.rows() {
        for &v in row {
            if v > 0.0 {
                total -= v * v.ln();
            }
        }
    }
    total / p.n as f64
}

/// Absolute-rotation pretext label: theta / 90.
pub fn rotation_label(rotation: Rotation) -> u8 {
    (rotation.degrees() / 90) as u8
}

/// Relative-rotation pretext label: `((theta_a - theta_b) mod 360) / 90`.
pub fn relative_rotation_label(a: Rotation, b: Rotation) -> u8 {
    let diff = (a.degrees() as i32 - b.degrees() as i32).rem_euclid(360);
    (diff / 90) as u8
}

/// Average the V per-view feature vectors into one descriptor.
pub fn mvp_pool(view_features: &FeatureMatrix) -> Vec<f64> {
    let mut out = vec![0.0; view_features.d];
    for row in view_features.rows() {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    let n = view_features.n as f64;
    out.iter_mut().for_each(|v| *v /= n);
    out
}

/// Hand-crafted per-view spatial pooling standing in for a trained feature
/// extractor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolMode {
    /// Per-channel spatial mean; 3 features per view.
    Mean,
    /// Per-channel mean, population std, positive fraction and absolute sum,
    /// channel-major; 12 features per view.
    ChannelStats,
}

impl PoolMode {
    pub fn features_per_view(self) -> usize {
        match self {
            PoolMode::Mean => 3,
            PoolMode::ChannelStats => 12,
        }
    }
}

/// Pool each view of a `[V, H, W, 3]` stack into a feature row, producing a
/// `V x F_out` matrix (`F_out` = 3 for mean, 12 for channel stats).
pub fn spatial_pool(set: &ViewSet, mode: PoolMode) -> FeatureMatrix {
    let views = set.views();
    let dims = views.dims();
    let (v, h, w) = (dims[0], dims[1], dims[2]);
    let area = (h * w) as f64;
    let mut rows = Vec::with_capacity(v);
    for vi in 0..v {
        let mut row = Vec::with_capacity(mode.features_per_view());
        for c in 0..3 {
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            let mut positives = 0usize;
            let mut abs_sum = 0.0;
            for y in 0..h {
                for x in 0..w {
                    let val = views.at(&[vi, y, x, c]);
                    sum += val;
                    sum_sq += val * val;
                    if val > 0.0 {
                        positives += 1;
                    }
                    abs_sum += val.abs();
                }
            }
            let mean = sum / area;
            match mode {
                PoolMode::Mean => row.push(mean),
                PoolMode::ChannelStats => {
                    let var = (sum_sq / area - mean * mean).max(0.0);
                    row.push(mean);
                    row.push(var.sqrt());
                    row.push(positives as f64 / area);
                    row.push(abs_sum);
                }
            }
        }
        rows.push(row);
    }
    FeatureMatrix::from_rows(&rows).expect("pooled rows are finite and rectangular")
}
