//! Simulation study: four one-dimensional regression problems with
//! x ~ U(−4, 4) and standard normal noise, evaluated by test-set R̂².

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cv::{Execution, SuperLearner, SL_LABEL};
use crate::data::{Dataset, Matrix};
use crate::error::{Error, Result};
use crate::learners::LearnerSpec;
use crate::meta::{self, MetaSolver};
use crate::metrics::{r_squared, MetricRow, MetricTable};
use crate::rng::RngStream;

pub const X_MIN: f64 = -4.0;
pub const X_MAX: f64 = 4.0;

fn ind(c: bool) -> f64 {
    if c {
        1.0
    } else {
        0.0
    }
}

/// E[y | x] for simulation `sim_id`.
pub fn conditional_mean(sim_id: u8, x: f64) -> Result<f64> {
    use std::f64::consts::PI;
    Ok(match sim_id {
        1 => -2.0 * ind(x < -3.0) + 2.55 * ind(x > -2.0) - 2.0 * ind(x > 0.0) + 4.0 * ind(x > 2.0) - ind(x > 3.0),
        2 => 6.0 + 0.4 * x - 0.36 * x * x + 0.005 * x * x * x,
        // Argument read as (π/2)·x.
        3 => 2.83 * (PI / 2.0 * x).sin(),
        4 => 4.0 * (3.0 * PI * x).sin() * ind(x > 0.0),
        other => return Err(Error::BadSimId(other)),
    })
}

/// Draw `n` units from simulation `sim_id`.
pub fn generate(sim_id: u8, n: usize, rng: &RngStream) -> Result<Dataset> {
    generate_with_noise(sim_id, n, rng, true)
}

/// As [`generate`]; with `noise = false` the response is exactly E[y | x]
/// and x is the same draw as the noisy version.
pub fn generate_with_noise(sim_id: u8, n: usize, rng: &RngStream, noise: bool) -> Result<Dataset> {
    conditional_mean(sim_id, 0.0)?;
    if n == 0 {
        return Err(Error::Empty("simulation sample size must be positive".into()));
    }
    let mut rx = rng.child("x", 0).rng();
    let mut re = rng.child("noise", 0).rng();
    let x: Vec<f64> = (0..n).map(|_| rx.random_range(X_MIN..=X_MAX)).collect();
    let y = x
        .iter()
        .map(|&xi| {
            let eps: f64 = if noise { re.sample(StandardNormal) } else { 0.0 };
            conditional_mean(sim_id, xi).map(|m| m + eps)
        })
        .collect::<Result<Vec<f64>>>()?;
    Dataset::new(Matrix::from_vec(n, 1, x)?, y, vec!["x".into()])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub sim_id: u8,
    #[serde(default = "default_n_train")]
    pub n_train: usize,
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default)]
    pub train_sizes: Option<Vec<usize>>,
    pub library: Vec<LearnerSpec>,
    #[serde(default = "default_v")]
    pub v_folds: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub meta: MetaSolver,
    #[serde(default)]
    pub execution: Execution,
}

fn default_n_train() -> usize {
    100
}
fn default_n_test() -> usize {
    10_000
}
fn default_reps() -> usize {
    100
}
fn default_v() -> usize {
    crate::cv::DEFAULT_FOLDS
}

impl SimConfig {
    pub fn new(sim_id: u8, library: Vec<LearnerSpec>) -> Self {
        SimConfig {
            sim_id,
            n_train: default_n_train(),
            n_test: default_n_test(),
            reps: default_reps(),
            train_sizes: None,
            library,
            v_folds: default_v(),
            master_seed: 0,
            meta: MetaSolver::SimplexExact,
            execution: Execution::Parallel,
        }
    }

    pub fn validate(&self) -> Result<()> {
        conditional_mean(self.sim_id, 0.0)?;
        if self.reps == 0 {
            return Err(Error::Config("reps must be at least 1".into()));
        }
        if self.n_test < 2 {
            return Err(Error::Config("n_test must be at least 2".into()));
        }
        for &n in self.train_sizes.as_deref().unwrap_or(&[self.n_train]) {
            if n < self.v_folds {
                return Err(Error::Config(format!("training size {n} smaller than V={}", self.v_folds)));
            }
        }
        if self.v_folds < 2 {
            return Err(Error::BadFoldCount { v: self.v_folds, n: self.n_train });
        }
        crate::cv::validate_library(&self.library)
    }

    /// Stream for one replication at one training size.
    pub fn rep_stream(&self, n_train: usize, rep: usize) -> RngStream {
        RngStream::new(self.master_seed)
            .child("sim", self.sim_id as u64)
            .child("n_train", n_train as u64)
            .child("rep", rep as u64)
    }
}

/// Group label used in metric tables: `sim{id}_n{size}`.
pub fn group_label(sim_id: u8, n_train: usize) -> String {
    format!("sim{sim_id}_n{n_train}")
}

fn run_rep(config: &SimConfig, n_train: usize, rep: usize) -> Result<Vec<MetricRow>> {
    let stream = config.rep_stream(n_train, rep);
    let train = generate(config.sim_id, n_train, &stream.child("train", 0))?;
    let test = generate(config.sim_id, config.n_test, &stream.child("test", 0))?;
    let sl =
        SuperLearner::new(config.library.clone()).folds(config.v_folds).meta(config.meta).execution(config.execution);
    let model = sl.fit(&train, &stream.child("fit", 0))?;
    let preds = model.library_predictions(test.x())?;
    let group = group_label(config.sim_id, n_train);
    let mut rows = Vec::with_capacity(config.library.len() + 1);
    for spec in &config.library {
        let value = match model.labels().iter().position(|l| *l == spec.label) {
            Some(k) => r_squared(test.y(), &preds.column(k))?,
            None => f64::NAN,
        };
        rows.push(MetricRow { group: group.clone(), algorithm: spec.label.clone(), value });
    }
    let sl_pred = meta::combine(&model.weights, &preds)?;
    rows.push(MetricRow { group, algorithm: SL_LABEL.to_string(), value: r_squared(test.y(), &sl_pred)? });
    Ok(rows)
}

fn run_size(config: &SimConfig, n_train: usize) -> Result<Vec<MetricRow>> {
    let reps: Vec<Result<Vec<MetricRow>>> = match config.execution {
        Execution::Serial => (0..config.reps).map(|r| run_rep(config, n_train, r)).collect(),
        Execution::Parallel => (0..config.reps).into_par_iter().map(|r| run_rep(config, n_train, r)).collect(),
    };
    let mut rows = Vec::new();
    for r in reps {
        rows.extend(r?);
    }
    Ok(rows)
}

/// Repeated train/test evaluation at `n_train`. Learners dropped in a
/// replication get an undefined (NaN) entry for it.
pub fn run_sim_study(config: &SimConfig) -> Result<MetricTable> {
    config.validate()?;
    Ok(MetricTable::new("r_squared", run_size(config, config.n_train)?))
}

/// [`run_sim_study`] once per entry of `train_sizes`.
pub fn run_sample_size_study(config: &SimConfig) -> Result<MetricTable> {
    config.validate()?;
    let sizes = config
        .train_sizes
        .as_ref()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| Error::Config("train_sizes must be a nonempty list".into()))?;
    let mut rows = Vec::new();
    for &n in sizes {
        rows.extend(run_size(config, n)?);
    }
    Ok(MetricTable::new("r_squared", rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::LearnerKind;

    #[test]
    fn closed_form_spot_values() {
        assert_eq!(conditional_mean(2, 0.0).unwrap(), 6.0);
        assert_eq!(conditional_mean(1, -3.5).unwrap(), -2.0);
        assert_eq!(conditional_mean(4, -1.0).unwrap(), 0.0);
        assert!((conditional_mean(3, 1.0).unwrap() - 2.83).abs() < 1e-12);
        assert_eq!(conditional_mean(5, 0.0), Err(Error::BadSimId(5)));
        assert!(matches!(generate(0, 10, &RngStream::new(0)), Err(Error::BadSimId(0))));
    }

    #[test]
    fn sim1_step_levels() {
        let expect = [(-3.5, -2.0), (-2.5, 0.0), (-1.0, 2.55), (1.0, 0.55), (2.5, 4.55), (3.5, 3.55)];
        for (x, m) in expect {
            assert!((conditional_mean(1, x).unwrap() - m).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn noiseless_mode_is_exact_and_in_range() {
        for sim in 1..=4 {
            let d = generate_with_noise(sim, 500, &RngStream::new(3), false).unwrap();
            for i in 0..d.n() {
                let x = d.x().get(i, 0);
                assert!((X_MIN..=X_MAX).contains(&x));
                assert_eq!(d.y()[i], conditional_mean(sim, x).unwrap());
            }
            let noisy = generate(sim, 500, &RngStream::new(3)).unwrap();
            assert_eq!(noisy.x(), d.x());
        }
    }

    #[test]
    fn reps_differ_and_replay() {
        let cfg = SimConfig::new(2, vec![LearnerSpec::new(LearnerKind::Ols, "ols")]);
        let a = generate(2, 50, &cfg.rep_stream(100, 0).child("train", 0)).unwrap();
        let b = generate(2, 50, &cfg.rep_stream(100, 1).child("train", 0)).unwrap();
        let a2 = generate(2, 50, &cfg.rep_stream(100, 0).child("train", 0)).unwrap();
        assert_ne!(a, b);
        assert_eq!(a, a2);
    }

    #[test]
    fn single_learner_study_rows() {
        let mut cfg = SimConfig::new(2, vec![LearnerSpec::new(LearnerKind::Ols, "ols")]);
        cfg.reps = 1;
        cfg.n_test = 500;
        let t = run_sim_study(&cfg).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.rows[0].value, t.rows[1].value);
        assert_eq!(t.rows[1].algorithm, SL_LABEL);
    }

    #[test]
    fn config_validation() {
        let mut cfg = SimConfig::new(2, vec![LearnerSpec::new(LearnerKind::Ols, "ols")]);
        cfg.reps = 0;
        assert!(run_sim_study(&cfg).is_err());
        cfg.reps = 1;
        cfg.n_train = 5;
        assert!(run_sim_study(&cfg).is_err());
        cfg.n_train = 100;
        assert!(run_sample_size_study(&cfg).is_err());
    }
}
