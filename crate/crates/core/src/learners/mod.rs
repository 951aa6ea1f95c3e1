//! Level-0 regression learners behind a uniform fit/predict contract.
//!
//! A [`LearnerSpec`] names an algorithm, a label and a flat map of numeric
//! hyperparameters. The map is validated against the kind's schema when the
//! learner is fitted (or eagerly through [`LearnerSpec::validate`]).

pub mod boosting;
pub mod ensemble;
pub mod knn;
pub mod linear;
pub mod loess;
pub mod nnet;
pub mod spline;
pub mod tree;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Matrix};
use crate::error::{Error, Result};
use crate::loss::{mean_loss, LossSpec};
use crate::rng::RngStream;

pub use linear::expand_interactions;
pub use spline::spline_basis;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    Ols,
    OlsInteractions,
    Ridge,
    Lasso,
    Stepwise,
    Tree,
    Bagging,
    RandomForest,
    Boosting,
    Knn,
    Loess,
    GamSpline,
    NeuralNet,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 13] = [
        LearnerKind::Ols,
        LearnerKind::OlsInteractions,
        LearnerKind::Ridge,
        LearnerKind::Lasso,
        LearnerKind::Stepwise,
        LearnerKind::Tree,
        LearnerKind::Bagging,
        LearnerKind::RandomForest,
        LearnerKind::Boosting,
        LearnerKind::Knn,
        LearnerKind::Loess,
        LearnerKind::GamSpline,
        LearnerKind::NeuralNet,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LearnerKind::Ols => "ols",
            LearnerKind::OlsInteractions => "ols_interactions",
            LearnerKind::Ridge => "ridge",
            LearnerKind::Lasso => "lasso",
            LearnerKind::Stepwise => "stepwise",
            LearnerKind::Tree => "tree",
            LearnerKind::Bagging => "bagging",
            LearnerKind::RandomForest => "random_forest",
            LearnerKind::Boosting => "boosting",
            LearnerKind::Knn => "knn",
            LearnerKind::Loess => "loess",
            LearnerKind::GamSpline => "gam_spline",
            LearnerKind::NeuralNet => "neural_net",
        }
    }

    /// Accepted hyperparameter keys.
    pub fn schema(self) -> &'static [&'static str] {
        match self {
            LearnerKind::Ols | LearnerKind::OlsInteractions | LearnerKind::Stepwise => &[],
            LearnerKind::Ridge => &["lambda"],
            LearnerKind::Lasso => &["lambda", "max_iter"],
            LearnerKind::Tree => &["min_split", "min_leaf", "max_depth", "cp"],
            LearnerKind::Bagging => &["n_trees", "min_split", "min_leaf", "max_depth", "cp"],
            LearnerKind::RandomForest => &["n_trees", "mtry", "min_split", "min_leaf", "max_depth", "bootstrap"],
            LearnerKind::Boosting => &["n_rounds", "learning_rate", "max_depth", "min_split", "min_leaf"],
            LearnerKind::Knn => &["k"],
            LearnerKind::Loess => &["span", "degree"],
            LearnerKind::GamSpline => &["df"],
            LearnerKind::NeuralNet => &["hidden", "max_iter", "weight_decay"],
        }
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Algorithm identity, label and hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerSpec {
    pub label: String,
    pub kind: LearnerKind,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl LearnerSpec {
    pub fn new(kind: LearnerKind, label: impl Into<String>) -> Self {
        Self { label: label.into(), kind, params: BTreeMap::new() }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.label.trim().is_empty() {
            return Err(Error::InvalidLibrary("learner label must be nonempty".into()));
        }
        self.resolve().map(|_| ())
    }

    pub(crate) fn resolve(&self) -> Result<Algorithm> {
        let h = Hyper { kind: self.kind, params: &self.params };
        h.check_keys()?;
        use LearnerKind as K;
        Ok(match self.kind {
            K::Ols => Algorithm::Ols,
            K::OlsInteractions => Algorithm::OlsInteractions,
            K::Stepwise => Algorithm::Stepwise,
            K::Ridge => Algorithm::Ridge { lambda: h.real("lambda", 1.0, 0.0, f64::INFINITY)? },
            K::Lasso => Algorithm::Lasso {
                lambda: h.real("lambda", 0.01, 0.0, f64::INFINITY)?,
                max_iter: h.int("max_iter", 10_000, 1, usize::MAX)?,
            },
            K::Tree => Algorithm::Tree(h.tree_params(20, 30, 0.01)?),
            K::Bagging => Algorithm::Bagging {
                n_trees: h.int("n_trees", 100, 1, usize::MAX)?,
                tree: h.tree_params(20, 30, 0.01)?,
            },
            K::RandomForest => Algorithm::RandomForest {
                n_trees: h.int("n_trees", 500, 1, usize::MAX)?,
                // 0 means floor(p/3), at least 1.
                mtry: h.int("mtry", 0, 0, usize::MAX)?,
                bootstrap: h.flag("bootstrap", true)?,
                tree: tree::TreeParams {
                    min_split: h.int("min_split", 5, 2, usize::MAX)?,
                    min_leaf: h.int("min_leaf", 1, 1, usize::MAX)?,
                    max_depth: h.int("max_depth", 1000, 0, usize::MAX)?,
                    cp: 0.0,
                    mtry: None,
                },
            },
            K::Boosting => Algorithm::Boosting(boosting::BoostingParams {
                n_rounds: h.int("n_rounds", 100, 1, usize::MAX)?,
                learning_rate: h.real("learning_rate", 0.1, f64::MIN_POSITIVE, 1.0)?,
                tree: tree::TreeParams {
                    min_split: h.int("min_split", 2, 2, usize::MAX)?,
                    min_leaf: h.int("min_leaf", 1, 1, usize::MAX)?,
                    max_depth: h.int("max_depth", 3, 0, usize::MAX)?,
                    cp: 0.0,
                    mtry: None,
                },
            }),
            K::Knn => Algorithm::Knn { k: h.int("k", 10, 1, usize::MAX)? },
            K::Loess => {
                let span = h.real("span", 0.75, f64::MIN_POSITIVE, 1.0)?;
                let degree = h.int("degree", 1, 1, 2)?;
                Algorithm::Loess { span, degree }
            }
            K::GamSpline => Algorithm::Gam { df: h.int("df", 2, 2, 4)? },
            K::NeuralNet => Algorithm::NeuralNet(nnet::NnetParams {
                hidden: h.int("hidden", 2, 1, 256)?,
                max_iter: h.int("max_iter", 500, 1, usize::MAX)?,
                weight_decay: h.real("weight_decay", 1e-3, 0.0, f64::INFINITY)?,
            }),
        })
    }
}

struct Hyper<'a> {
    kind: LearnerKind,
    params: &'a BTreeMap<String, f64>,
}

impl Hyper<'_> {
    fn check_keys(&self) -> Result<()> {
        let schema = self.kind.schema();
        for (key, value) in self.params {
            if !schema.contains(&key.as_str()) {
                return Err(Error::hyper(
                    self.kind.as_str(),
                    format!("unknown hyperparameter '{key}' (accepted: {schema:?})"),
                ));
            }
            if !value.is_finite() {
                return Err(Error::hyper(self.kind.as_str(), format!("'{key}' must be finite")));
            }
        }
        Ok(())
    }

    fn real(&self, key: &str, default: f64, lo: f64, hi: f64) -> Result<f64> {
        let v = self.params.get(key).copied().unwrap_or(default);
        if v < lo || v > hi {
            return Err(Error::hyper(self.kind.as_str(), format!("'{key}'={v} outside [{lo}, {hi}]")));
        }
        Ok(v)
    }

    fn int(&self, key: &str, default: usize, lo: usize, hi: usize) -> Result<usize> {
        let Some(&v) = self.params.get(key) else { return Ok(default) };
        if v.fract() != 0.0 || v < lo as f64 || v > hi as f64 {
            return Err(Error::hyper(self.kind.as_str(), format!("'{key}'={v} must be an integer in [{lo}, {hi}]")));
        }
        Ok(v as usize)
    }

    fn flag(&self, key: &str, default: bool) -> Result<bool> {
        match self.params.get(key) {
            None => Ok(default),
            Some(&0.0) => Ok(false),
            Some(&1.0) => Ok(true),
            Some(&v) => Err(Error::hyper(self.kind.as_str(), format!("'{key}'={v} must be 0 or 1"))),
        }
    }

    fn tree_params(&self, min_split: usize, max_depth: usize, cp: f64) -> Result<tree::TreeParams> {
        let min_split = self.int("min_split", min_split, 2, usize::MAX)?;
        // rpart-style default: minbucket = round(minsplit / 3).
        let default_leaf = ((min_split as f64 / 3.0).round() as usize).max(1);
        Ok(tree::TreeParams {
            min_split,
            min_leaf: self.int("min_leaf", default_leaf, 1, usize::MAX)?,
            max_depth: self.int("max_depth", max_depth, 0, usize::MAX)?,
            cp: self.real("cp", cp, 0.0, 1.0)?,
            mtry: None,
        })
    }
}

/// Hyperparameters after schema validation.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Algorithm {
    Ols,
    OlsInteractions,
    Ridge { lambda: f64 },
    Lasso { lambda: f64, max_iter: usize },
    Stepwise,
    Tree(tree::TreeParams),
    Bagging { n_trees: usize, tree: tree::TreeParams },
    RandomForest { n_trees: usize, mtry: usize, bootstrap: bool, tree: tree::TreeParams },
    Boosting(boosting::BoostingParams),
    Knn { k: usize },
    Loess { span: f64, degree: usize },
    Gam { df: usize },
    NeuralNet(nnet::NnetParams),
}

/// Trained parameters of one learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum LearnerParams {
    Linear(linear::LinearModel),
    Interactions(linear::InteractionModel),
    Tree(tree::RegressionTree),
    Forest(ensemble::Forest),
    Boosted(boosting::BoostedTrees),
    Knn(knn::KnnModel),
    Loess(loess::LoessModel),
    Gam(spline::GamModel),
    NeuralNet(nnet::NeuralNet),
}

impl LearnerParams {
    fn predict(&self, x: &Matrix) -> Vec<f64> {
        match self {
            LearnerParams::Linear(m) => m.predict(x),
            LearnerParams::Interactions(m) => m.predict(x),
            LearnerParams::Tree(m) => m.predict(x),
            LearnerParams::Forest(m) => m.predict(x),
            LearnerParams::Boosted(m) => m.predict(x),
            LearnerParams::Knn(m) => m.predict(x),
            LearnerParams::Loess(m) => m.predict(x),
            LearnerParams::Gam(m) => m.predict(x),
            LearnerParams::NeuralNet(m) => m.predict(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub n_train: usize,
    pub train_loss: f64,
    /// False when an iterative fit stopped at its iteration cap.
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedLearner {
    pub spec: LearnerSpec,
    pub n_features: usize,
    pub params: LearnerParams,
    pub train_summary: TrainSummary,
}

pub const LEARNER_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct LearnerEnvelope {
    format_version: u32,
    #[serde(flatten)]
    fitted: FittedLearner,
}

impl FittedLearner {
    pub fn label(&self) -> &str {
        &self.spec.label
    }

    pub fn predict(&self, x_new: &Matrix) -> Result<Vec<f64>> {
        predict(self, x_new)
    }

    /// JSON envelope `{format_version, spec, n_features, params, train_summary}`.
    pub fn to_json(&self) -> Result<String> {
        let env = LearnerEnvelope { format_version: LEARNER_FORMAT_VERSION, fitted: self.clone() };
        Ok(serde_json::to_string(&env)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let env: LearnerEnvelope = serde_json::from_str(s)?;
        if env.format_version != LEARNER_FORMAT_VERSION {
            return Err(Error::Serialization(format!("unsupported learner format_version {}", env.format_version)));
        }
        Ok(env.fitted)
    }
}

/// Train one learner on `data`.
pub fn fit(spec: &LearnerSpec, data: &Dataset, rng: &RngStream) -> Result<FittedLearner> {
    spec.validate()?;
    let algorithm = spec.resolve()?;
    let kind = spec.kind.as_str();
    let x = data.x();
    let y = data.y();
    let mut converged = true;
    let params = match algorithm {
        Algorithm::Ols => LearnerParams::Linear(linear::fit_ols(x, y)),
        Algorithm::OlsInteractions => LearnerParams::Interactions(linear::fit_interactions(x, y)),
        Algorithm::Ridge { lambda } => LearnerParams::Linear(linear::fit_ridge(x, y, lambda)),
        Algorithm::Lasso { lambda, max_iter } => {
            let (m, ok) = linear::fit_lasso(x, y, lambda, max_iter);
            converged = ok;
            LearnerParams::Linear(m)
        }
        Algorithm::Stepwise => LearnerParams::Linear(linear::fit_stepwise(x, y)),
        Algorithm::Tree(p) => LearnerParams::Tree(tree::RegressionTree::fit(x, y, &p, rng)),
        Algorithm::Bagging { n_trees, tree } => {
            LearnerParams::Forest(ensemble::Forest::fit(x, y, n_trees, true, &tree, rng))
        }
        Algorithm::RandomForest { n_trees, mtry, bootstrap, mut tree } => {
            let p = x.ncols();
            let m = if mtry == 0 { (p / 3).max(1) } else { mtry };
            if m > p {
                return Err(Error::hyper(kind, format!("mtry={m} exceeds p={p}")));
            }
            tree.mtry = Some(m);
            LearnerParams::Forest(ensemble::Forest::fit(x, y, n_trees, bootstrap, &tree, rng))
        }
        Algorithm::Boosting(p) => LearnerParams::Boosted(boosting::BoostedTrees::fit(x, y, &p)),
        Algorithm::Knn { k } => {
            if data.n() < k {
                return Err(Error::fit(kind, format!("k={k} exceeds n={}", data.n())));
            }
            LearnerParams::Knn(knn::KnnModel::fit(x, y, k))
        }
        Algorithm::Loess { span, degree } => LearnerParams::Loess(loess::LoessModel::fit(x, y, span, degree)),
        Algorithm::Gam { df } => LearnerParams::Gam(spline::GamModel::fit(x, y, df)),
        Algorithm::NeuralNet(p) => {
            let (m, ok) = nnet::NeuralNet::fit(x, y, &p, rng);
            converged = ok;
            LearnerParams::NeuralNet(m)
        }
    };
    let fitted_values = params.predict(x);
    if let Some(i) = fitted_values.iter().position(|v| !v.is_finite()) {
        return Err(Error::fit(kind, format!("non-finite fitted value at row {i}")));
    }
    let train_loss = mean_loss(LossSpec::SquaredError, y, &fitted_values)?;
    Ok(FittedLearner {
        spec: spec.clone(),
        n_features: data.p(),
        params,
        train_summary: TrainSummary { n_train: data.n(), train_loss, converged },
    })
}

/// Predict each row of `x_new` independently.
pub fn predict(fitted: &FittedLearner, x_new: &Matrix) -> Result<Vec<f64>> {
    if x_new.ncols() != fitted.n_features {
        return Err(Error::DimensionMismatch { expected: fitted.n_features, actual: x_new.ncols() });
    }
    if let Some((row, col, value)) = x_new.find_non_finite() {
        return Err(Error::NonFinite { value, row, col });
    }
    Ok(fitted.params.predict(x_new))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> Dataset {
        Dataset::unnamed(Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap(), vec![1.0, 3.0, 5.0]).unwrap()
    }

    #[test]
    fn rejects_unknown_hyperparameter() {
        let spec = LearnerSpec::new(LearnerKind::Tree, "t").with("depth", 3.0);
        assert!(matches!(spec.validate(), Err(Error::InvalidHyperparameter { .. })));
    }

    #[test]
    fn rejects_out_of_range_values() {
        let bad = [
            LearnerSpec::new(LearnerKind::Ridge, "r").with("lambda", -1.0),
            LearnerSpec::new(LearnerKind::Knn, "k").with("k", 0.0),
            LearnerSpec::new(LearnerKind::Knn, "k").with("k", 2.5),
            LearnerSpec::new(LearnerKind::GamSpline, "g").with("df", 5.0),
            LearnerSpec::new(LearnerKind::Loess, "l").with("span", 0.0),
            LearnerSpec::new(LearnerKind::RandomForest, "rf").with("bootstrap", 0.5),
            LearnerSpec::new(LearnerKind::Tree, "t").with("cp", f64::NAN),
        ];
        for s in bad {
            assert!(s.validate().is_err(), "{s:?}");
        }
        assert!(LearnerSpec::new(LearnerKind::Ols, " ").validate().is_err());
    }

    #[test]
    fn every_kind_fits_with_defaults() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64 / 10.0, ((i * 7) % 11) as f64]).collect();
        let y: Vec<f64> = rows.iter().map(|r| r[0].sin() + 0.1 * r[1]).collect();
        let d = Dataset::unnamed(Matrix::from_rows(&rows).unwrap(), y).unwrap();
        for kind in LearnerKind::ALL {
            let f = fit(&LearnerSpec::new(kind, kind.as_str()), &d, &RngStream::new(1)).unwrap();
            let p = f.predict(d.x()).unwrap();
            assert_eq!(p.len(), 40);
            assert!(p.iter().all(|v| v.is_finite()), "{kind}");
        }
    }

    #[test]
    fn ols_exact_line() {
        let f = fit(&LearnerSpec::new(LearnerKind::Ols, "ols"), &line(), &RngStream::new(0)).unwrap();
        let LearnerParams::Linear(m) = &f.params else { panic!() };
        assert!((m.intercept - 1.0).abs() < 1e-12 && (m.coef[0] - 2.0).abs() < 1e-12);
        let p = f.predict(&Matrix::from_rows(&[vec![3.0]]).unwrap()).unwrap();
        assert!((p[0] - 7.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let f = fit(&LearnerSpec::new(LearnerKind::Ols, "ols"), &line(), &RngStream::new(0)).unwrap();
        let err = f.predict(&Matrix::from_rows(&[vec![3.0, 1.0]]).unwrap()).unwrap_err();
        assert_eq!(err, Error::DimensionMismatch { expected: 1, actual: 2 });
    }

    #[test]
    fn knn_needs_enough_rows() {
        let spec = LearnerSpec::new(LearnerKind::Knn, "k").with("k", 5.0);
        assert!(matches!(fit(&spec, &line(), &RngStream::new(0)), Err(Error::FitFailure { .. })));
    }

    #[test]
    fn spec_json_shape() {
        let spec = LearnerSpec::new(LearnerKind::Bagging, "bag").with("cp", 0.1);
        let s = serde_json::to_string(&spec).unwrap();
        assert_eq!(s, r#"{"label":"bag","kind":"bagging","params":{"cp":0.1}}"#);
        let bad = r#"{"label":"bag","kind":"bagging","params":{},"extra":1}"#;
        assert!(serde_json::from_str::<LearnerSpec>(bad).is_err());
    }
}
