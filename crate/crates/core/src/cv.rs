//! The super learner: V-fold cross-validated level-0 predictions, convex
//! level-1 weights, and a full-sample refit of every surviving learner.

use std::collections::HashSet;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Matrix};
use crate::error::{Error, Result};
use crate::folds::{make_folds, FoldAssignment};
use crate::learners::{self, FittedLearner, LearnerSpec};
use crate::loss::{mean_loss, LossSpec};
use crate::meta::{self, MetaSolver, SimplexWeights};
use crate::rng::RngStream;

pub const DEFAULT_FOLDS: usize = 10;
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// How the (learner, fold) training grid is scheduled. Every task owns a
/// pre-assigned random stream; results are identical either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedLearner {
    pub label: String,
    pub reason: String,
}

/// Cross-validated predictions: entry (i, m) comes from learner m trained
/// without unit i's fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvPredictionMatrix {
    pub z: Matrix,
    pub labels: Vec<String>,
    /// Library positions of the surviving columns.
    pub library_index: Vec<usize>,
    pub folds: FoldAssignment,
    pub dropped: Vec<DroppedLearner>,
}

/// Per-learner count of completed training runs.
#[derive(Debug, Default)]
pub struct FitCounter {
    counts: Vec<AtomicUsize>,
}

impl FitCounter {
    pub fn new(m: usize) -> Self {
        Self { counts: (0..m).map(|_| AtomicUsize::new(0)).collect() }
    }

    fn bump(&self, m: usize) {
        self.counts[m].fetch_add(1, Ordering::Relaxed);
    }

    pub fn counts(&self) -> Vec<usize> {
        self.counts.iter().map(|c| c.load(Ordering::Relaxed)).collect()
    }

    pub fn total(&self) -> usize {
        self.counts().iter().sum()
    }
}

fn learner_stream(rng: &RngStream, m: usize) -> RngStream {
    rng.child("learner", m as u64)
}

/// Library must be nonempty, with unique labels and valid hyperparameters.
pub fn validate_library(library: &[LearnerSpec]) -> Result<()> {
    if library.is_empty() {
        return Err(Error::InvalidLibrary("library is empty".into()));
    }
    let mut seen = HashSet::new();
    for spec in library {
        spec.validate()?;
        if !seen.insert(spec.label.as_str()) {
            return Err(Error::InvalidLibrary(format!("duplicate label '{}'", spec.label)));
        }
    }
    Ok(())
}

fn fit_fold(
    spec: &LearnerSpec,
    data: &Dataset,
    folds: &FoldAssignment,
    v: usize,
    rng: &RngStream,
) -> Result<(Vec<usize>, Vec<f64>)> {
    let train = data.subset(&folds.training(v));
    let held_out = folds.validation(v);
    let fitted = learners::fit(spec, &train, rng)?;
    let pred = fitted.predict(&data.x().select_rows(&held_out))?;
    if let Some(k) = pred.iter().position(|p| !p.is_finite()) {
        return Err(Error::fit(spec.kind.as_str(), format!("non-finite prediction for row {}", held_out[k])));
    }
    Ok((held_out, pred))
}

pub fn cross_validated_predictions(
    library: &[LearnerSpec],
    data: &Dataset,
    folds: &FoldAssignment,
    rng: &RngStream,
) -> Result<CvPredictionMatrix> {
    cross_validated_predictions_with(library, data, folds, rng, Execution::Parallel, None)
}

pub fn cross_validated_predictions_with(
    library: &[LearnerSpec],
    data: &Dataset,
    folds: &FoldAssignment,
    rng: &RngStream,
    execution: Execution,
    counter: Option<&FitCounter>,
) -> Result<CvPredictionMatrix> {
    validate_library(library)?;
    if folds.n() != data.n() {
        return Err(Error::LengthMismatch(format!(
            "fold assignment covers {} units, dataset has {}",
            folds.n(),
            data.n()
        )));
    }
    let v_count = folds.v();
    let tasks: Vec<(usize, usize)> = (0..library.len()).flat_map(|m| (0..v_count).map(move |v| (m, v))).collect();
    let run = |&(m, v): &(usize, usize)| {
        let stream = learner_stream(rng, m).child("fold", v as u64);
        let out = fit_fold(&library[m], data, folds, v, &stream);
        if let (Ok(_), Some(c)) = (&out, counter) {
            c.bump(m);
        }
        out
    };
    let results: Vec<Result<(Vec<usize>, Vec<f64>)>> = match execution {
        Execution::Serial => tasks.iter().map(run).collect(),
        Execution::Parallel => tasks.par_iter().map(run).collect(),
    };

    let n = data.n();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::new();
    let mut library_index = Vec::new();
    let mut dropped = Vec::new();
    for (m, spec) in library.iter().enumerate() {
        let chunk = &results[m * v_count..(m + 1) * v_count];
        if let Some(Err(e)) = chunk.iter().find(|r| r.is_err()) {
            dropped.push(DroppedLearner { label: spec.label.clone(), reason: e.to_string() });
            continue;
        }
        let mut col = vec![0.0; n];
        for (rows, pred) in chunk.iter().map(|r| r.as_ref().unwrap()) {
            for (&i, &p) in rows.iter().zip(pred) {
                col[i] = p;
            }
        }
        columns.push(col);
        labels.push(spec.label.clone());
        library_index.push(m);
    }
    if columns.is_empty() {
        let reasons: Vec<String> = dropped.iter().map(|d| format!("{}: {}", d.label, d.reason)).collect();
        return Err(Error::AllLearnersFailed(reasons.join("; ")));
    }
    Ok(CvPredictionMatrix { z: Matrix::from_columns(&columns)?, labels, library_index, folds: folds.clone(), dropped })
}

/// Super learner configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperLearner {
    pub library: Vec<LearnerSpec>,
    pub v_folds: usize,
    pub loss: LossSpec,
    pub meta: MetaSolver,
    pub execution: Execution,
}

impl SuperLearner {
    pub fn new(library: Vec<LearnerSpec>) -> Self {
        Self {
            library,
            v_folds: DEFAULT_FOLDS,
            loss: LossSpec::SquaredError,
            meta: MetaSolver::SimplexExact,
            execution: Execution::Parallel,
        }
    }

    pub fn folds(mut self, v: usize) -> Self {
        self.v_folds = v;
        self
    }

    pub fn meta(mut self, meta: MetaSolver) -> Self {
        self.meta = meta;
        self
    }

    pub fn execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn fit(&self, data: &Dataset, rng: &RngStream) -> Result<SuperLearnerModel> {
        self.fit_counted(data, rng, &FitCounter::new(self.library.len()))
    }

    pub fn fit_counted(&self, data: &Dataset, rng: &RngStream, counter: &FitCounter) -> Result<SuperLearnerModel> {
        validate_library(&self.library)?;
        let folds = make_folds(data.n(), self.v_folds, &rng.child("folds", 0))?;
        self.fit_with_folds(data, &folds, rng, counter)
    }

    pub fn fit_with_folds(
        &self,
        data: &Dataset,
        folds: &FoldAssignment,
        rng: &RngStream,
        counter: &FitCounter,
    ) -> Result<SuperLearnerModel> {
        let mut cv = cross_validated_predictions_with(&self.library, data, folds, rng, self.execution, Some(counter))?;
        let refit = |&m: &usize| {
            let out = learners::fit(&self.library[m], data, &learner_stream(rng, m).child("full", 0));
            if out.is_ok() {
                counter.bump(m);
            }
            out
        };
        let full: Vec<Result<FittedLearner>> = match self.execution {
            Execution::Serial => cv.library_index.iter().map(refit).collect(),
            Execution::Parallel => cv.library_index.par_iter().map(refit).collect(),
        };
        // A learner that survived CV but fails on the full sample is dropped too.
        let keep: Vec<usize> = (0..full.len()).filter(|&k| full[k].is_ok()).collect();
        for (k, r) in full.iter().enumerate() {
            if let Err(e) = r {
                cv.dropped.push(DroppedLearner { label: cv.labels[k].clone(), reason: e.to_string() });
            }
        }
        if keep.is_empty() {
            return Err(Error::AllLearnersFailed("every learner failed on the full sample".into()));
        }
        if keep.len() < full.len() {
            cv.z = cv.z.select_columns(&keep);
            cv.labels = keep.iter().map(|&k| cv.labels[k].clone()).collect();
            cv.library_index = keep.iter().map(|&k| cv.library_index[k]).collect();
        }
        let fitted: Vec<FittedLearner> = full.into_iter().filter_map(Result::ok).collect();

        let y = data.y();
        let weights = meta::solve(self.meta, &cv.z, y)?.with_labels(cv.labels.clone());
        let cv_risks =
            (0..cv.z.ncols()).map(|m| mean_loss(self.loss, y, &cv.z.column(m))).collect::<Result<Vec<f64>>>()?;
        let sl_cv_risk = mean_loss(self.loss, y, &meta::combine(&weights, &cv.z)?)?;
        let counts = counter.counts();
        Ok(SuperLearnerModel {
            feature_names: data.feature_names().to_vec(),
            weights,
            training_counts: cv.library_index.iter().map(|&m| counts[m]).collect(),
            fitted,
            cv_risks,
            sl_cv_risk,
            folds_used: folds.v(),
            folds: folds.clone(),
            loss: self.loss,
            dropped: cv.dropped,
            n_train: data.n(),
        })
    }
}

/// Train with default meta solver and parallel execution.
pub fn super_learn(
    library: &[LearnerSpec],
    data: &Dataset,
    v: usize,
    loss: LossSpec,
    rng: &RngStream,
) -> Result<SuperLearnerModel> {
    let mut sl = SuperLearner::new(library.to_vec()).folds(v);
    sl.loss = loss;
    sl.fit(data, rng)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperLearnerModel {
    pub feature_names: Vec<String>,
    pub weights: SimplexWeights,
    /// Surviving learners refit on the full sample, in weight order.
    pub fitted: Vec<FittedLearner>,
    pub cv_risks: Vec<f64>,
    pub sl_cv_risk: f64,
    pub folds_used: usize,
    pub folds: FoldAssignment,
    pub loss: LossSpec,
    pub dropped: Vec<DroppedLearner>,
    /// Completed trainings per surviving learner (V + 1 each).
    pub training_counts: Vec<usize>,
    pub n_train: usize,
}

#[derive(Serialize, Deserialize)]
struct ModelEnvelope {
    format_version: u32,
    #[serde(flatten)]
    model: SuperLearnerModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskRow {
    pub label: String,
    pub cv_risk: f64,
    /// `None` for the super learner row.
    pub weight: Option<f64>,
}

pub const SL_LABEL: &str = "SL";

impl SuperLearnerModel {
    pub fn labels(&self) -> &[String] {
        &self.weights.labels
    }

    /// n × M matrix of full-sample learner predictions.
    pub fn library_predictions(&self, x_new: &Matrix) -> Result<Matrix> {
        let cols = self.fitted.iter().map(|f| f.predict(x_new)).collect::<Result<Vec<_>>>()?;
        Matrix::from_columns(&cols)
    }

    pub fn predict(&self, x_new: &Matrix) -> Result<Vec<f64>> {
        sl_predict(self, x_new)
    }

    pub fn cv_risk_table(&self) -> Vec<RiskRow> {
        cv_risk_table(self)
    }

    pub fn to_json(&self) -> Result<String> {
        let env = ModelEnvelope { format_version: MODEL_FORMAT_VERSION, model: self.clone() };
        Ok(serde_json::to_string(&env)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let env: ModelEnvelope = serde_json::from_str(s)?;
        if env.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Serialization(format!("unsupported model format_version {}", env.format_version)));
        }
        Ok(env.model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Level-1 prediction: weighted average of the full-sample learners.
pub fn sl_predict(model: &SuperLearnerModel, x_new: &Matrix) -> Result<Vec<f64>> {
    if x_new.ncols() != model.feature_names.len() {
        return Err(Error::DimensionMismatch { expected: model.feature_names.len(), actual: x_new.ncols() });
    }
    meta::combine(&model.weights, &model.library_predictions(x_new)?)
}

/// Learners and the super learner sorted by ascending CV risk (stable).
pub fn cv_risk_table(model: &SuperLearnerModel) -> Vec<RiskRow> {
    let mut rows: Vec<RiskRow> = model
        .labels()
        .iter()
        .zip(&model.cv_risks)
        .zip(&model.weights.alpha)
        .map(|((l, &r), &w)| RiskRow { label: l.clone(), cv_risk: r, weight: Some(w) })
        .collect();
    rows.push(RiskRow { label: SL_LABEL.to_string(), cv_risk: model.sl_cv_risk, weight: None });
    rows.sort_by(|a, b| a.cv_risk.total_cmp(&b.cv_risk));
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::LearnerKind;

    fn sample(n: usize, seed: u64) -> Dataset {
        use rand::Rng;
        let mut r = RngStream::new(seed).rng();
        let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![r.random_range(-3.0..3.0), r.random_range(0.0..1.0)]).collect();
        let y = rows.iter().map(|v| v[0].sin() + v[1] + r.random_range(-0.3..0.3)).collect();
        Dataset::unnamed(Matrix::from_rows(&rows).unwrap(), y).unwrap()
    }

    fn lib() -> Vec<LearnerSpec> {
        vec![
            LearnerSpec::new(LearnerKind::Ols, "ols"),
            LearnerSpec::new(LearnerKind::Knn, "knn").with("k", 5.0),
            LearnerSpec::new(LearnerKind::Tree, "tree"),
        ]
    }

    #[test]
    fn single_learner_gets_all_weight() {
        let d = sample(40, 1);
        let m = super_learn(&lib()[..1], &d, 5, LossSpec::SquaredError, &RngStream::new(2)).unwrap();
        assert_eq!(m.weights.alpha, vec![1.0]);
        assert_eq!(m.predict(d.x()).unwrap(), m.fitted[0].predict(d.x()).unwrap());
    }

    #[test]
    fn counts_v_plus_one_fits() {
        let d = sample(50, 3);
        let counter = FitCounter::new(3);
        let m = SuperLearner::new(lib()).fit_counted(&d, &RngStream::new(1), &counter).unwrap();
        assert_eq!(counter.total(), 33);
        assert_eq!(m.training_counts, vec![11, 11, 11]);
    }

    #[test]
    fn rejects_duplicate_labels_and_empty_library() {
        let d = sample(20, 3);
        let dup = vec![LearnerSpec::new(LearnerKind::Ols, "a"), LearnerSpec::new(LearnerKind::Tree, "a")];
        assert!(matches!(
            super_learn(&dup, &d, 5, LossSpec::SquaredError, &RngStream::new(0)),
            Err(Error::InvalidLibrary(_))
        ));
        assert!(matches!(
            super_learn(&[], &d, 5, LossSpec::SquaredError, &RngStream::new(0)),
            Err(Error::InvalidLibrary(_))
        ));
        assert!(matches!(
            super_learn(&lib(), &d, 1, LossSpec::SquaredError, &RngStream::new(0)),
            Err(Error::BadFoldCount { .. })
        ));
    }

    #[test]
    fn failing_learner_is_dropped() {
        // knn with k larger than any training fold always fails.
        let d = sample(20, 4);
        let library = vec![
            LearnerSpec::new(LearnerKind::Ols, "ols"),
            LearnerSpec::new(LearnerKind::Knn, "knn_big").with("k", 19.0),
        ];
        let m = super_learn(&library, &d, 5, LossSpec::SquaredError, &RngStream::new(0)).unwrap();
        assert_eq!(m.labels(), &["ols".to_string()]);
        assert_eq!(m.dropped.len(), 1);
        assert_eq!(m.dropped[0].label, "knn_big");

        let only_bad = &library[1..];
        assert!(matches!(
            super_learn(only_bad, &d, 5, LossSpec::SquaredError, &RngStream::new(0)),
            Err(Error::AllLearnersFailed(_))
        ));
    }

    #[test]
    fn risk_table_rows() {
        let d = sample(40, 5);
        let m = super_learn(&lib(), &d, 5, LossSpec::SquaredError, &RngStream::new(2)).unwrap();
        let t = cv_risk_table(&m);
        assert_eq!(t.len(), 4);
        assert!(t.windows(2).all(|w| w[0].cv_risk <= w[1].cv_risk));
        let total: f64 = t.iter().filter_map(|r| r.weight).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(t.iter().filter(|r| r.weight.is_none()).count(), 1);

        let one = super_learn(&lib()[..1], &d, 5, LossSpec::SquaredError, &RngStream::new(2)).unwrap();
        let t1 = cv_risk_table(&one);
        assert_eq!(t1.len(), 2);
        assert_eq!(t1[0].cv_risk, t1[1].cv_risk);
    }

    #[test]
    fn model_round_trip() {
        let d = sample(40, 6);
        let m = super_learn(&lib(), &d, 4, LossSpec::SquaredError, &RngStream::new(9)).unwrap();
        let back = SuperLearnerModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.predict(d.x()).unwrap(), m.predict(d.x()).unwrap());
        let bad = m.to_json().unwrap().replacen("\"format_version\":1", "\"format_version\":99", 1);
        assert!(SuperLearnerModel::from_json(&bad).is_err());
    }
}
