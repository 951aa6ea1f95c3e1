//! Multi-dataset benchmark: outer 10-fold cross-validated MSE of every library
//! member and of the whole super learner procedure, relative to the linear
//! model, summarized by geometric mean across datasets.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cv::{self, CvPredictionMatrix, DroppedLearner, Execution, SuperLearner, SL_LABEL};
use crate::data::{Dataset, Matrix};
use crate::error::{Error, Result};
use crate::folds::{make_folds, FoldAssignment};
use crate::learners::LearnerSpec;
use crate::meta::MetaSolver;
use crate::metrics::{cv_mse, geometric_mean, relative_mse};
use crate::rng::RngStream;

pub const OUTER_FOLDS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    pub csv_path: PathBuf,
    pub target_column: String,
    #[serde(default)]
    pub drop_columns: Vec<String>,
    #[serde(default)]
    pub expected_n: Option<usize>,
    #[serde(default)]
    pub expected_p: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::Config("manifest has no datasets".into()));
        }
        let mut ids = std::collections::HashSet::new();
        for e in &self.entries {
            if !ids.insert(e.id.as_str()) {
                return Err(Error::Config(format!("duplicate dataset id '{}'", e.id)));
            }
        }
        Ok(())
    }
}

/// Read a manifest: either `{"entries": [...]}`, a bare JSON array, or JSON
/// Lines with one entry per line. Relative CSV paths resolve against the
/// manifest's directory.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = std::fs::read_to_string(path)?;
    let trimmed = text.trim_start();
    let mut manifest = if trimmed.starts_with('[') {
        DatasetManifest { entries: serde_json::from_str(trimmed)? }
    } else if let Ok(m) = serde_json::from_str::<DatasetManifest>(trimmed) {
        m
    } else {
        let mut entries = Vec::new();
        for (k, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            entries
                .push(serde_json::from_str(line).map_err(|e| Error::Config(format!("manifest line {}: {e}", k + 1)))?);
        }
        DatasetManifest { entries }
    };
    let base = path.parent().unwrap_or(Path::new("."));
    for e in &mut manifest.entries {
        if e.csv_path.is_relative() {
            e.csv_path = base.join(&e.csv_path);
        }
    }
    manifest.validate()?;
    Ok(manifest)
}

fn is_missing(cell: &str) -> bool {
    matches!(cell.trim(), "" | "NA" | "N/A" | "na" | "NaN" | "nan" | "." | "?")
}

/// Header and raw cells of a CSV file with a header row.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::ParseError { row: 0, col: 0, msg: e.to_string() })?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::ParseError { row: r + 1, col: 0, msg: e.to_string() })?;
        rows.push(record.iter().map(str::to_string).collect());
    }
    Ok((headers, rows))
}

/// `row` and `col` are 1-based; rows count data lines after the header.
fn parse_cell(cells: &[String], row: usize, col: usize) -> Result<f64> {
    let s = cells.get(col - 1).map(String::as_str).unwrap_or("");
    if is_missing(s) {
        return Err(Error::MissingCell { row, col });
    }
    s.parse::<f64>().map_err(|e| Error::ParseError { row, col, msg: format!("'{s}': {e}") })
}

/// Parse a header-row CSV into a dataset: the target column becomes the
/// response and every column except the target and the drops becomes a
/// feature, in file order.
pub fn load_csv(path: &Path, target: &str, drop: &[String]) -> Result<Dataset> {
    let (headers, cells) = read_csv(path)?;
    let target_idx =
        headers.iter().position(|h| h == target).ok_or_else(|| Error::TargetMissing(target.to_string()))?;
    for d in drop {
        if !headers.contains(d) {
            return Err(Error::ColumnMismatch(format!("drop column '{d}' not in header")));
        }
    }
    let feature_idx: Vec<usize> =
        (0..headers.len()).filter(|&j| j != target_idx && !drop.contains(&headers[j])).collect();
    let mut x = Vec::with_capacity(cells.len() * feature_idx.len());
    let mut y = Vec::with_capacity(cells.len());
    for (r, row) in cells.iter().enumerate() {
        y.push(parse_cell(row, r + 1, target_idx + 1)?);
        for &j in &feature_idx {
            x.push(parse_cell(row, r + 1, j + 1)?);
        }
    }
    let names: Vec<String> = feature_idx.iter().map(|&j| headers[j].clone()).collect();
    Dataset::new(Matrix::from_vec(y.len(), names.len(), x)?, y, names)
}

/// Feature matrix with columns bound by name, in the order of `names`, plus
/// one identifier per row: the `id_column` cell, or the 1-based row number.
pub fn load_features(path: &Path, names: &[String], id_column: Option<&str>) -> Result<(Vec<String>, Matrix)> {
    let (headers, cells) = read_csv(path)?;
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::ColumnMismatch(format!("column '{name}' not found in {}", path.display())))
    };
    let idx = names.iter().map(|n| find(n)).collect::<Result<Vec<_>>>()?;
    let id_idx = id_column.map(find).transpose()?;
    let mut x = Vec::with_capacity(cells.len() * idx.len());
    let mut ids = Vec::with_capacity(cells.len());
    for (r, row) in cells.iter().enumerate() {
        ids.push(match id_idx {
            Some(j) => row.get(j).cloned().unwrap_or_default(),
            None => (r + 1).to_string(),
        });
        for &j in &idx {
            x.push(parse_cell(row, r + 1, j + 1)?);
        }
    }
    if ids.is_empty() {
        return Err(Error::Empty(format!("{} has no data rows", path.display())));
    }
    let m = Matrix::from_vec(ids.len(), idx.len(), x)?;
    if let Some((i, j, v)) = m.find_non_finite() {
        return Err(Error::NonFinite { value: v, row: i + 1, col: idx[j] + 1 });
    }
    Ok((ids, m))
}

pub fn load_dataset(entry: &ManifestEntry) -> Result<Dataset> {
    let d = load_csv(&entry.csv_path, &entry.target_column, &entry.drop_columns)?;
    if let Some(n) = entry.expected_n {
        if n != d.n() {
            return Err(Error::ShapeMismatch(format!("{}: expected n={n}, found {}", entry.id, d.n())));
        }
    }
    if let Some(p) = entry.expected_p {
        if p != d.p() {
            return Err(Error::ShapeMismatch(format!("{}: expected p={p}, found {}", entry.id, d.p())));
        }
    }
    Ok(d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub library: Vec<LearnerSpec>,
    #[serde(default = "default_v")]
    pub v_folds: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_reference")]
    pub reference: String,
    #[serde(default)]
    pub meta: MetaSolver,
    #[serde(default)]
    pub execution: Execution,
}

fn default_v() -> usize {
    cv::DEFAULT_FOLDS
}
fn default_reference() -> String {
    crate::library::REFERENCE_LABEL.to_string()
}

impl BenchConfig {
    pub fn new(library: Vec<LearnerSpec>) -> Self {
        BenchConfig {
            library,
            v_folds: default_v(),
            master_seed: 0,
            reference: default_reference(),
            meta: MetaSolver::SimplexExact,
            execution: Execution::Parallel,
        }
    }

    fn super_learner(&self) -> SuperLearner {
        SuperLearner::new(self.library.clone()).folds(self.v_folds).meta(self.meta).execution(self.execution)
    }
}

/// Outer cross-validated predictions for one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterCv {
    pub folds: FoldAssignment,
    pub base: CvPredictionMatrix,
    /// Super learner predictions; row i comes from a super learner trained
    /// (including its inner cross-validation) without i's outer fold.
    pub sl: Vec<f64>,
}

/// Run the library and the full super learner procedure under the outer folds.
pub fn outer_cv_predictions(config: &BenchConfig, data: &Dataset, rng: &RngStream) -> Result<OuterCv> {
    let folds = make_folds(data.n(), OUTER_FOLDS, &rng.child("outer_folds", 0))?;
    outer_cv_with_folds(config, data, &folds, rng)
}

pub fn outer_cv_with_folds(
    config: &BenchConfig,
    data: &Dataset,
    folds: &FoldAssignment,
    rng: &RngStream,
) -> Result<OuterCv> {
    let base = cv::cross_validated_predictions_with(
        &config.library,
        data,
        folds,
        &rng.child("base", 0),
        config.execution,
        None,
    )?;
    let sl_learner = config.super_learner();
    let run = |v: usize| -> Result<(Vec<usize>, Vec<f64>)> {
        let train = data.subset(&folds.training(v));
        let held_out = folds.validation(v);
        let model = sl_learner.fit(&train, &rng.child("sl", v as u64))?;
        Ok((held_out.clone(), model.predict(&data.x().select_rows(&held_out))?))
    };
    let parts: Vec<Result<(Vec<usize>, Vec<f64>)>> = match config.execution {
        Execution::Serial => (0..folds.v()).map(run).collect(),
        Execution::Parallel => (0..folds.v()).into_par_iter().map(run).collect(),
    };
    let mut sl = vec![0.0; data.n()];
    for part in parts {
        let (rows, pred) = part?;
        for (i, p) in rows.into_iter().zip(pred) {
            sl[i] = p;
        }
    }
    Ok(OuterCv { folds: folds.clone(), base, sl })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub algorithm: String,
    pub cvmse: f64,
    pub relative_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetResult {
    pub id: String,
    pub n: usize,
    pub p: usize,
    /// Library order, then the super learner.
    pub rows: Vec<BenchRow>,
    pub failed: Vec<DroppedLearner>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSummary {
    pub algorithm: String,
    pub geometric_mean: f64,
    /// Datasets on which the algorithm succeeded.
    pub n_datasets: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub reference: String,
    pub datasets: Vec<DatasetResult>,
    /// Ascending by geometric mean, ties by label.
    pub summary: Vec<AlgorithmSummary>,
}

/// Score one dataset already in memory.
pub fn bench_dataset(config: &BenchConfig, id: &str, data: &Dataset, rng: &RngStream) -> Result<DatasetResult> {
    let outer = outer_cv_predictions(config, data, rng)?;
    let y = data.y();
    let mut cvmse = BTreeMap::new();
    let mut order = Vec::new();
    for (k, label) in outer.base.labels.iter().enumerate() {
        cvmse.insert(label.clone(), cv_mse(&outer.base.z.column(k), y)?);
        order.push(label.clone());
    }
    cvmse.insert(SL_LABEL.to_string(), cv_mse(&outer.sl, y)?);
    order.push(SL_LABEL.to_string());
    if !cvmse.contains_key(&config.reference) {
        return Err(Error::MissingReference(format!("{} (failed on dataset {id})", config.reference)));
    }
    let rel = relative_mse(&cvmse, &config.reference)?;
    let rows = order.into_iter().map(|a| BenchRow { cvmse: cvmse[&a], relative_mse: rel[&a], algorithm: a }).collect();
    Ok(DatasetResult { id: id.to_string(), n: data.n(), p: data.p(), rows, failed: outer.base.dropped })
}

/// Benchmark datasets already in memory, as `(id, data)` pairs.
pub fn run_bench_datasets(config: &BenchConfig, datasets: &[(String, Dataset)]) -> Result<BenchResult> {
    cv::validate_library(&config.library)?;
    if !config.library.iter().any(|s| s.label == config.reference) {
        return Err(Error::MissingReference(config.reference.clone()));
    }
    if datasets.is_empty() {
        return Err(Error::Config("no datasets to benchmark".into()));
    }
    let root = RngStream::new(config.master_seed);
    let run =
        |(k, (id, d)): (usize, &(String, Dataset))| bench_dataset(config, id, d, &root.child("dataset", k as u64));
    let results: Vec<Result<DatasetResult>> = match config.execution {
        Execution::Serial => datasets.iter().enumerate().map(run).collect(),
        Execution::Parallel => datasets.par_iter().enumerate().map(run).collect(),
    };
    let datasets = results.into_iter().collect::<Result<Vec<_>>>()?;
    let summary = summarize_bench(&datasets)?;
    Ok(BenchResult { reference: config.reference.clone(), datasets, summary })
}

fn summarize_bench(datasets: &[DatasetResult]) -> Result<Vec<AlgorithmSummary>> {
    let mut by_algorithm: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for d in datasets {
        for r in &d.rows {
            by_algorithm.entry(&r.algorithm).or_default().push(r.relative_mse);
        }
    }
    let mut summary = by_algorithm
        .into_iter()
        .map(|(a, v)| {
            Ok(AlgorithmSummary { algorithm: a.to_string(), geometric_mean: geometric_mean(&v)?, n_datasets: v.len() })
        })
        .collect::<Result<Vec<_>>>()?;
    summary.sort_by(|a, b| a.geometric_mean.total_cmp(&b.geometric_mean).then_with(|| a.algorithm.cmp(&b.algorithm)));
    Ok(summary)
}

/// Load every manifest entry and benchmark it.
pub fn run_bench(manifest: &DatasetManifest, config: &BenchConfig) -> Result<BenchResult> {
    manifest.validate()?;
    let datasets =
        manifest.entries.iter().map(|e| load_dataset(e).map(|d| (e.id.clone(), d))).collect::<Result<Vec<_>>>()?;
    run_bench_datasets(config, &datasets)
}
