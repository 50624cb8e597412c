//! Dataset manifests, reproducible splits, source/target pairing and the
//! batch conversion driver.
//!
//! Datasets follow the directory-per-class layout: `root/<class>/<sample>`.
//! Sample identity is the file stem, which simulated replicas share with
//! their real counterparts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::codec::{read_events, CodecError, EventFormat};
use crate::repr::{est, hats, voxel_grid, EstKernel, HatsConfig, ReprError};
use crate::tensor::{Tensor, TensorError};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{0} is not a directory")]
    NotADirectory(PathBuf),
    #[error("no samples found under {0}")]
    EmptyDataset(PathBuf),
    #[error("invalid split spec: {0}")]
    InvalidSplit(String),
    #[error("manifest parse error: {0}")]
    ManifestParse(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// One dataset sample: class, identity, location and on-disk format.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub class_name: String,
    pub sample_id: String,
    /// Path relative to the manifest root, unix-style separators.
    pub relative_path: String,
    pub format: EventFormat,
}

impl ManifestEntry {
    fn line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}",
            self.class_name, self.sample_id, self.relative_path, self.format
        )
    }
}

/// A scanned dataset tree: deterministic entry list plus a checksum of it.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
    /// SHA-256 (hex) of the serialized entry lines.
    pub checksum: String,
}

impl Manifest {
    pub fn from_entries(root: PathBuf, entries: Vec<ManifestEntry>) -> Self {
        let checksum = checksum_of(&entries);
        Self { root, entries, checksum }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Class names present, deduplicated, lexicographic.
    pub fn classes(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self.entries.iter().map(|e| e.class_name.as_str()).collect();
        out.dedup();
        out
    }

    pub fn entry_path(&self, entry: &ManifestEntry) -> PathBuf {
        self.root.join(&entry.relative_path)
    }

    /// Persist as line-delimited `class<TAB>id<TAB>relpath<TAB>format`.
    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&e.line());
            out.push('\n');
        }
        fs::write(path, out)?;
        Ok(())
    }

    /// Load a persisted manifest; the root is not stored in the file.
    pub fn load(path: &Path, root: PathBuf) -> Result<Self, DatasetError> {
        let text = fs::read_to_string(path)?;
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 4 {
                return Err(DatasetError::ManifestParse(format!(
                    "line {}: expected 4 tab-separated fields, got {}",
                    i + 1,
                    fields.len()
                )));
            }
            let format = fields[3]
                .parse::<EventFormat>()
                .map_err(|e| DatasetError::ManifestParse(format!("line {}: {e}", i + 1)))?;
            entries.push(ManifestEntry {
                class_name: fields[0].to_string(),
                sample_id: fields[1].to_string(),
                relative_path: fields[2].to_string(),
                format,
            });
        }
        Ok(Manifest::from_entries(root, entries))
    }
}

fn checksum_of(entries: &[ManifestEntry]) -> String {
    let mut hasher = Sha256::new();
    for e in entries {
        hasher.update(e.line().as_bytes());
        hasher.update(b"\n");
    }
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for b in digest {
        write!(hex, "{b:02x}").unwrap();
    }
    hex
}

/// Scan a class-per-subdirectory tree for samples of `format`, matching by
/// the format's conventional extension. Entries come out in lexicographic
/// (class, sample) order, so rescans of an unchanged tree are identical.
pub fn scan_dataset(root: &Path, format: EventFormat) -> Result<Manifest, DatasetError> {
    if !root.is_dir() {
        return Err(DatasetError::NotADirectory(root.to_path_buf()));
    }
    let mut classes: Vec<String> = fs::read_dir(root)?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .filter_map(|e| e.file_name().to_str().map(String::from))
        .collect();
    classes.sort();
    let mut entries = Vec::new();
    for class in &classes {
        let dir = root.join(class);
        let mut files: Vec<String> = fs::read_dir(&dir)?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_file())
            .filter_map(|e| e.file_name().to_str().map(String::from))
            .filter(|name| {
                Path::new(name)
                    .extension()
                    .and_then(|x| x.to_str())
                    .map(|x| x.eq_ignore_ascii_case(format.extension()))
                    == Some(true)
            })
            .collect();
        files.sort();
        for name in files {
            let stem = Path::new(&name)
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or(&name)
                .to_string();
            entries.push(ManifestEntry {
                class_name: class.clone(),
                sample_id: stem,
                relative_path: format!("{class}/{name}"),
                format,
            });
        }
    }
    if entries.is_empty() {
        return Err(DatasetError::EmptyDataset(root.to_path_buf()));
    }
    Ok(Manifest::from_entries(root.to_path_buf(), entries))
}

/// Train/val/test ratios plus the shuffle seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let ratios = [self.train, self.val, self.test];
        if ratios.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(DatasetError::InvalidSplit("ratios must be >= 0".into()));
        }
        let sum: f64 = ratios.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(DatasetError::InvalidSplit(format!("ratios sum to {sum}, expected 1")));
        }
        Ok(())
    }
}

/// Per-class stratified shuffle split. Sizes are the rounded val/test
/// ratios, capped to the class size; the remainder goes to train. Each
/// output is again a canonical (sorted, checksummed) manifest.
pub fn split_manifest(
    manifest: &Manifest,
    spec: &SplitSpec,
) -> Result<(Manifest, Manifest, Manifest), DatasetError> {
    spec.validate()?;
    let mut by_class: BTreeMap<&str, Vec<&ManifestEntry>> = BTreeMap::new();
    for e in &manifest.entries {
        by_class.entry(&e.class_name).or_default().push(e);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut train = Vec::new();
    let mut val = Vec::new();
    let mut test = Vec::new();
    for (_, mut entries) in by_class {
        entries.shuffle(&mut rng);
        let n = entries.len();
        let n_val = ((spec.val * n as f64).round() as usize).min(n);
        let n_test = ((spec.test * n as f64).round() as usize).min(n - n_val);
        let n_train = n - n_val - n_test;
        for (i, e) in entries.into_iter().enumerate() {
            if i < n_train {
                train.push(e.clone());
            } else if i < n_train + n_val {
                val.push(e.clone());
            } else {
                test.push(e.clone());
            }
        }
    }
    let canonical = |mut v: Vec<ManifestEntry>| {
        v.sort_by(|a, b| (&a.class_name, &a.sample_id).cmp(&(&b.class_name, &b.sample_id)));
        Manifest::from_entries(manifest.root.clone(), v)
    };
    Ok((canonical(train), canonical(val), canonical(test)))
}

/// Source/target samples matched on `(class, sample_id)`, plus whatever was
/// left unmatched on each side.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedManifest {
    pub pairs: Vec<(ManifestEntry, ManifestEntry)>,
    pub unmatched_source: Vec<ManifestEntry>,
    pub unmatched_target: Vec<ManifestEntry>,
}

/// Pair two manifests on shared `(class, sample_id)` keys, deterministic
/// (source) order.
pub fn pair_manifests(source: &Manifest, target: &Manifest) -> PairedManifest {
    let mut target_by_key: BTreeMap<(&str, &str), &ManifestEntry> = BTreeMap::new();
    for e in &target.entries {
        target_by_key.insert((&e.class_name, &e.sample_id), e);
    }
    let mut pairs = Vec::new();
    let mut unmatched_source = Vec::new();
    for e in &source.entries {
        match target_by_key.remove(&(e.class_name.as_str(), e.sample_id.as_str())) {
            Some(t) => pairs.push((e.clone(), t.clone())),
            None => unmatched_source.push(e.clone()),
        }
    }
    let unmatched_target = target_by_key.into_values().cloned().collect();
    PairedManifest { pairs, unmatched_source, unmatched_target }
}

/// Which representation the batch converter produces.
#[derive(Debug, Clone, PartialEq)]
pub enum ReprChoice {
    Voxel { bins: usize },
    Hats(HatsConfig),
    Est { bins: usize, kernel: EstKernel },
}

impl ReprChoice {
    pub fn apply(&self, stream: &crate::events::EventStream) -> Result<Tensor, ReprError> {
        match self {
            ReprChoice::Voxel { bins } => voxel_grid(stream, *bins),
            ReprChoice::Hats(cfg) => hats(stream, cfg),
            ReprChoice::Est { bins, kernel } => est(stream, *bins, kernel),
        }
    }
}

/// Batch conversion parameters: representation plus the sensor geometry to
/// assume for headerless input formats.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvertConfig {
    pub repr: ReprChoice,
    pub geometry: Option<(u16, u16)>,
}

/// Outcome of one entry in a conversion run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConversionStatus {
    Converted,
    Skipped,
    Failed(String),
}

/// Per-entry outcomes plus wall time; entry order follows the manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct ConversionReport {
    pub outcomes: Vec<(ManifestEntry, ConversionStatus)>,
    pub wall_ms: u64,
}

impl ConversionReport {
    pub fn converted(&self) -> usize {
        self.count(|s| matches!(s, ConversionStatus::Converted))
    }

    pub fn skipped(&self) -> usize {
        self.count(|s| matches!(s, ConversionStatus::Skipped))
    }

    pub fn failed(&self) -> usize {
        self.count(|s| matches!(s, ConversionStatus::Failed(_)))
    }

    fn count(&self, pred: impl Fn(&ConversionStatus) -> bool) -> usize {
        self.outcomes.iter().filter(|(_, s)| pred(s)).count()
    }

    /// Persist as manifest-style lines with a status column and a summary
    /// footer.
    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        let mut out = String::new();
        for (e, status) in &self.outcomes {
            let s = match status {
                ConversionStatus::Converted => "ok".to_string(),
                ConversionStatus::Skipped => "skipped".to_string(),
                ConversionStatus::Failed(msg) => format!("failed: {msg}"),
            };
            out.push_str(&format!("{}\t{}\n", e.line(), s));
        }
        out.push_str(&format!(
            "# converted={} skipped={} failed={} wall_ms={}\n",
            self.converted(),
            self.skipped(),
            self.failed(),
            self.wall_ms
        ));
        fs::write(path, out)?;
        Ok(())
    }
}

/// Convert every manifest entry into a TEN1 file mirroring the class tree
/// under `out_root`. Entries whose output is newer than the input are
/// skipped, making re-runs cheap. Per-entry failures are collected, never
/// fatal; entries convert in parallel but the report is ordered.
pub fn convert_dataset(
    manifest: &Manifest,
    config: &ConvertConfig,
    out_root: &Path,
) -> Result<ConversionReport, DatasetError> {
    let start = Instant::now();
    for class in manifest.classes() {
        fs::create_dir_all(out_root.join(class))?;
    }
    let outcomes: Vec<(ManifestEntry, ConversionStatus)> = manifest
        .entries
        .par_iter()
        .map(|entry| {
            let status = convert_entry(manifest, entry, config, out_root);
            (entry.clone(), status)
        })
        .collect();
    Ok(ConversionReport { outcomes, wall_ms: start.elapsed().as_millis() as u64 })
}

fn convert_entry(
    manifest: &Manifest,
    entry: &ManifestEntry,
    config: &ConvertConfig,
    out_root: &Path,
) -> ConversionStatus {
    let in_path = manifest.entry_path(entry);
    let out_path = out_root.join(&entry.class_name).join(format!("{}.ten1", entry.sample_id));
    if let (Ok(in_meta), Ok(out_meta)) = (fs::metadata(&in_path), fs::metadata(&out_path)) {
        if let (Ok(in_time), Ok(out_time)) = (in_meta.modified(), out_meta.modified()) {
            if out_time >= in_time {
                return ConversionStatus::Skipped;
            }
        }
    }
    let stream = match read_events(&in_path, entry.format, config.geometry) {
        Ok(s) => s,
        Err(e) => return ConversionStatus::Failed(codec_msg(e)),
    };
    let tensor = match config.repr.apply(&stream) {
        Ok(t) => t,
        Err(e) => return ConversionStatus::Failed(e.to_string()),
    };
    match tensor.write_ten1(&out_path) {
        Ok(_) => ConversionStatus::Converted,
        Err(e) => ConversionStatus::Failed(tensor_msg(e)),
    }
}

fn codec_msg(e: CodecError) -> String {
    e.to_string()
}

fn tensor_msg(e: TensorError) -> String {
    e.to_string()
}
