//! Source-vs-target shift diagnostic: convert both sides with one
//! representation config, pool per-sample features, and report the
//! closed-form discrepancy quantities per class and overall.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::codec::{read_events, CodecError, EventFormat};
use crate::datasets::{scan_dataset, DatasetError, Manifest, ReprChoice};
use crate::events::EventStream;
use crate::metrics::{
    entropy, mean_feature_norm, mmd2, mmfnd, mvp_pool, spatial_pool, FeatureMatrix, KernelSpec,
    MetricError, PoolMode, ProbMatrix,
};
use crate::repr::{group_views, ReprError};

#[derive(Debug, Error)]
pub enum DiagError {
    #[error("dataset error: {0}")]
    Dataset(#[from] DatasetError),
    #[error("metric error: {0}")]
    Metric(#[from] MetricError),
    #[error("sample {path}: {message}")]
    Sample { path: String, message: String },
}

/// Full configuration of a diagnostic run.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagConfig {
    pub repr: ReprChoice,
    pub pool: PoolMode,
    pub kernel: KernelSpec,
    pub format: EventFormat,
    pub geometry: Option<(u16, u16)>,
}

/// Discrepancy quantities for one source/target feature pairing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftStats {
    pub n_source: usize,
    pub n_target: usize,
    pub mmd2: f64,
    pub mmfnd: f64,
    pub mean_norm_source: f64,
    pub mean_norm_target: f64,
}

/// Per-class and overall shift quantities, plus optional per-side entropy
/// when probability files are supplied.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagReport {
    pub overall: ShiftStats,
    pub per_class: Vec<(String, ShiftStats)>,
    pub source_entropy: Option<f64>,
    pub target_entropy: Option<f64>,
}

impl DiagReport {
    /// Render as machine-readable `key=value` lines.
    pub fn to_key_value_lines(&self) -> String {
        let mut out = String::new();
        let mut stats = |prefix: &str, s: &ShiftStats| {
            writeln!(out, "{prefix}.n_source={}", s.n_source).unwrap();
            writeln!(out, "{prefix}.n_target={}", s.n_target).unwrap();
            writeln!(out, "{prefix}.mmd2={:.12e}", s.mmd2).unwrap();
            writeln!(out, "{prefix}.mmfnd={:.12e}", s.mmfnd).unwrap();
            writeln!(out, "{prefix}.mean_norm.source={:.12e}", s.mean_norm_source).unwrap();
            writeln!(out, "{prefix}.mean_norm.target={:.12e}", s.mean_norm_target).unwrap();
        };
        stats("overall", &self.overall);
        for (class, s) in &self.per_class {
            stats(&format!("class.{class}"), s);
        }
        if let Some(e) = self.source_entropy {
            writeln!(out, "entropy.source={e:.12e}").unwrap();
        }
        if let Some(e) = self.target_entropy {
            writeln!(out, "entropy.target={e:.12e}").unwrap();
        }
        out
    }
}

/// Feature vector of one event stream: representation, multi-view grouping,
/// per-view spatial pooling, then view-average pooling.
pub fn sample_features(
    stream: &EventStream,
    repr: &ReprChoice,
    pool: PoolMode,
) -> Result<Vec<f64>, ReprError> {
    let tensor = repr.apply(stream)?;
    let views = group_views(&tensor)?;
    let per_view = spatial_pool(&views, pool);
    Ok(mvp_pool(&per_view))
}

/// Extract `(class, features)` rows for every manifest entry; parallel over
/// entries with a deterministic, manifest-ordered result.
pub fn extract_features(
    manifest: &Manifest,
    cfg: &DiagConfig,
) -> Result<Vec<(String, Vec<f64>)>, DiagError> {
    let results: Vec<Result<(String, Vec<f64>), DiagError>> = manifest
        .entries
        .par_iter()
        .map(|entry| {
            let path = manifest.entry_path(entry);
            let stream = read_events(&path, entry.format, cfg.geometry)
                .map_err(|e: CodecError| DiagError::Sample {
                    path: entry.relative_path.clone(),
                    message: e.to_string(),
                })?;
            let features = sample_features(&stream, &cfg.repr, cfg.pool).map_err(|e| {
                DiagError::Sample { path: entry.relative_path.clone(), message: e.to_string() }
            })?;
            Ok((entry.class_name.clone(), features))
        })
        .collect();
    results.into_iter().collect()
}

fn shift_stats(
    source: &FeatureMatrix,
    target: &FeatureMatrix,
    kernel: &KernelSpec,
) -> Result<ShiftStats, MetricError> {
    Ok(ShiftStats {
        n_source: source.n(),
        n_target: target.n(),
        mmd2: mmd2(source, target, kernel)?,
        mmfnd: mmfnd(source, target),
        mean_norm_source: mean_feature_norm(source),
        mean_norm_target: mean_feature_norm(target),
    })
}

fn to_matrix(rows: &[&Vec<f64>]) -> Result<FeatureMatrix, MetricError> {
    let owned: Vec<Vec<f64>> = rows.iter().map(|r| (*r).clone()).collect();
    FeatureMatrix::from_rows(&owned)
}

/// Run the diagnostic over two scanned-and-converted dataset trees.
/// Per-class rows cover the classes present on both sides.
pub fn run_diag(
    source_root: &Path,
    target_root: &Path,
    cfg: &DiagConfig,
    source_probs: Option<&ProbMatrix>,
    target_probs: Option<&ProbMatrix>,
) -> Result<DiagReport, DiagError> {
    let source_manifest = scan_dataset(source_root, cfg.format)?;
    let target_manifest = scan_dataset(target_root, cfg.format)?;
    let source_rows = extract_features(&source_manifest, cfg)?;
    let target_rows = extract_features(&target_manifest, cfg)?;
    diag_from_features(&source_rows, &target_rows, &cfg.kernel, source_probs, target_probs)
}

/// Diagnostic core on already-extracted `(class, features)` rows.
pub fn diag_from_features(
    source_rows: &[(String, Vec<f64>)],
    target_rows: &[(String, Vec<f64>)],
    kernel: &KernelSpec,
    source_probs: Option<&ProbMatrix>,
    target_probs: Option<&ProbMatrix>,
) -> Result<DiagReport, DiagError> {
    let source_all = to_matrix(&source_rows.iter().map(|(_, f)| f).collect::<Vec<_>>())?;
    let target_all = to_matrix(&target_rows.iter().map(|(_, f)| f).collect::<Vec<_>>())?;
    let overall = shift_stats(&source_all, &target_all, kernel)?;

    let mut by_class_source: BTreeMap<&str, Vec<&Vec<f64>>> = BTreeMap::new();
    for (class, f) in source_rows {
        by_class_source.entry(class).or_default().push(f);
    }
    let mut by_class_target: BTreeMap<&str, Vec<&Vec<f64>>> = BTreeMap::new();
    for (class, f) in target_rows {
        by_class_target.entry(class).or_default().push(f);
    }
    let mut per_class = Vec::new();
    for (class, srows) in &by_class_source {
        if let Some(trows) = by_class_target.get(class) {
            let s = to_matrix(srows)?;
            let t = to_matrix(trows)?;
            per_class.push((class.to_string(), shift_stats(&s, &t, kernel)?));
        }
    }

    Ok(DiagReport {
        overall,
        per_class,
        source_entropy: source_probs.map(entropy),
        target_entropy: target_probs.map(entropy),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::write_events;
    use crate::events::Event;
    use crate::metrics::PoolMode;

    fn write_sample(dir: &Path, class: &str, id: &str, seed: u64) {
        let class_dir = dir.join(class);
        std::fs::create_dir_all(&class_dir).unwrap();
        let events: Vec<Event> = (0..20)
            .map(|i| {
                let v = seed.wrapping_mul(6364136223846793005).wrapping_add(i * 2654435761);
                Event {
                    x: (v % 8) as u16,
                    y: ((v >> 8) % 8) as u16,
                    t: i * 50,
                    p: if v & 0x10000 == 0 { 1 } else { -1 },
                }
            })
            .collect();
        let s = EventStream::from_events(8, 8, events);
        write_events(&s, &class_dir.join(format!("{id}.evt1")), EventFormat::Evt1).unwrap();
    }

    fn cfg() -> DiagConfig {
        DiagConfig {
            repr: ReprChoice::Voxel { bins: 6 },
            pool: PoolMode::ChannelStats,
            kernel: KernelSpec::default(),
            format: EventFormat::Evt1,
            geometry: None,
        }
    }

    #[test]
    fn identical_sides_have_zero_shift() {
        let dir = tempfile::tempdir().unwrap();
        for class in ["a", "b"] {
            for i in 0..3 {
                write_sample(dir.path(), class, &format!("s{i}"), i as u64 + 1);
            }
        }
        let report = run_diag(dir.path(), dir.path(), &cfg(), None, None).unwrap();
        assert!(report.overall.mmd2.abs() <= 1e-9);
        assert_eq!(report.overall.mmfnd, 0.0);
        assert_eq!(report.per_class.len(), 2);
        for (_, s) in &report.per_class {
            assert!(s.mmd2.abs() <= 1e-9);
        }
        let lines = report.to_key_value_lines();
        for line in lines.lines() {
            assert!(line.contains('='), "not key=value: {line}");
        }
    }

    #[test]
    fn empty_side_errors() {
        let dir = tempfile::tempdir().unwrap();
        write_sample(dir.path(), "a", "s0", 1);
        let empty = tempfile::tempdir().unwrap();
        assert!(matches!(
            run_diag(dir.path(), empty.path(), &cfg(), None, None),
            Err(DiagError::Dataset(DatasetError::EmptyDataset(_)))
        ));
    }

    #[test]
    fn entropy_reported_when_probs_supplied() {
        let dir = tempfile::tempdir().unwrap();
        write_sample(dir.path(), "a", "s0", 1);
        let probs = ProbMatrix::new(1, 4, vec![0.25; 4]).unwrap();
        let report = run_diag(dir.path(), dir.path(), &cfg(), Some(&probs), None).unwrap();
        assert!((report.source_entropy.unwrap() - 4.0f64.ln()).abs() < 1e-12);
        assert_eq!(report.target_entropy, None);
        assert!(report.to_key_value_lines().contains("entropy.source="));
    }
}
