//! Evaluation metrics and distribution summaries.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::mean;
use crate::error::{Error, Result};
use crate::loss::{mean_loss, LossSpec};

/// Out-of-sample R̂² = 1 − Σ(y − ŷ)² / Σ(y − ȳ)². Not clipped: may be negative.
pub fn r_squared(y: &[f64], yhat: &[f64]) -> Result<f64> {
    if y.len() != yhat.len() {
        return Err(Error::LengthMismatch(format!("{} vs {}", y.len(), yhat.len())));
    }
    if y.len() < 2 {
        return Err(Error::Empty("R² needs at least two observations".into()));
    }
    let ybar = mean(y);
    let tss: f64 = y.iter().map(|v| (v - ybar) * (v - ybar)).sum();
    if tss == 0.0 {
        return Err(Error::DegenerateResponse);
    }
    let rss: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(1.0 - rss / tss)
}

/// Mean squared cross-validated residual.
pub fn cv_mse(z_col: &[f64], y: &[f64]) -> Result<f64> {
    mean_loss(LossSpec::SquaredError, y, z_col)
}

/// Divide each learner's CV-MSE by the reference learner's.
pub fn relative_mse(cvmse: &BTreeMap<String, f64>, reference: &str) -> Result<BTreeMap<String, f64>> {
    let r = *cvmse.get(reference).ok_or_else(|| Error::MissingReference(reference.to_string()))?;
    if r <= 0.0 || !r.is_finite() {
        return Err(Error::ZeroReference(reference.to_string()));
    }
    Ok(cvmse.iter().map(|(k, v)| (k.clone(), v / r)).collect())
}

/// exp(mean(ln v)).
pub fn geometric_mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("geometric mean of no values".into()));
    }
    if let Some(&v) = values.iter().find(|&&v| !v.is_finite() || v <= 0.0) {
        return Err(Error::NonPositive(v));
    }
    if values.iter().all(|&v| v == values[0]) {
        return Ok(values[0]);
    }
    let g = (values.iter().map(|v| v.ln()).sum::<f64>() / values.len() as f64).exp();
    // Keep the result inside [min, max] despite rounding in exp/ln.
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(g.clamp(lo, hi))
}

/// Type-7 quantile (linear interpolation between order statistics) of an
/// ascending slice.
pub fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "quantile of empty slice");
    let h = (n - 1) as f64 * prob.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = h - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub q25: f64,
    pub q75: f64,
}

pub fn summarize(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::Empty("summary of no values".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(Summary { mean: mean(values), q25: quantile_sorted(&sorted, 0.25), q75: quantile_sorted(&sorted, 0.75) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub group: String,
    pub algorithm: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub group: String,
    pub algorithm: String,
    pub count: usize,
    pub mean: f64,
    pub q25: f64,
    pub q75: f64,
    pub geometric_mean: Option<f64>,
}

/// Per-(group, algorithm) metric values with their summaries. Groups are
/// simulation ids, sample sizes or dataset ids depending on the study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    pub metric: String,
    pub rows: Vec<MetricRow>,
    pub summary: Vec<SummaryRow>,
}

impl MetricTable {
    /// Summaries in order of first appearance of each (group, algorithm).
    /// Non-finite values are kept in `rows` but excluded from summaries.
    pub fn new(metric: impl Into<String>, rows: Vec<MetricRow>) -> Self {
        let mut order: Vec<(String, String)> = Vec::new();
        let mut values: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
        for r in &rows {
            let key = (r.group.clone(), r.algorithm.clone());
            if !values.contains_key(&key) {
                order.push(key.clone());
            }
            let entry = values.entry(key).or_default();
            if r.value.is_finite() {
                entry.push(r.value);
            }
        }
        let summary = order
            .into_iter()
            .map(|key| {
                let v = &values[&key];
                let s = summarize(v).unwrap_or(Summary { mean: f64::NAN, q25: f64::NAN, q75: f64::NAN });
                SummaryRow {
                    group: key.0,
                    algorithm: key.1,
                    count: v.len(),
                    mean: s.mean,
                    q25: s.q25,
                    q75: s.q75,
                    geometric_mean: geometric_mean(v).ok(),
                }
            })
            .collect();
        MetricTable { metric: metric.into(), rows, summary }
    }

    pub fn summary_for(&self, group: &str, algorithm: &str) -> Option<&SummaryRow> {
        self.summary.iter().find(|s| s.group == group && s.algorithm == algorithm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn r_squared_examples() {
        let y = [1.0, 2.0, 4.0];
        assert_eq!(r_squared(&y, &y).unwrap(), 1.0);
        let m = mean(&y);
        assert_eq!(r_squared(&y, &[m; 3]).unwrap(), 0.0);
        assert_eq!(r_squared(&[0.0, 2.0], &[1.0, 1.0]).unwrap(), 0.0);
        assert!(r_squared(&[0.0, 2.0], &[2.0, 0.0]).unwrap() < 0.0);
        assert_eq!(r_squared(&[3.0, 3.0], &[1.0, 1.0]), Err(Error::DegenerateResponse));
    }

    #[test]
    fn cv_mse_examples() {
        assert_eq!(cv_mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(cv_mse(&[2.0, 3.0], &[1.0, 2.0]).unwrap(), 1.0);
        assert_eq!(cv_mse(&[0.0, 2.0], &[2.0, 0.0]).unwrap(), 4.0);
        assert!(matches!(cv_mse(&[0.0], &[2.0, 0.0]), Err(Error::LengthMismatch(_))));
    }

    #[test]
    fn relative_mse_examples() {
        let m: BTreeMap<String, f64> = [("glm".to_string(), 2.0), ("tree".to_string(), 1.0)].into();
        let r = relative_mse(&m, "glm").unwrap();
        assert_eq!(r["glm"], 1.0);
        assert_eq!(r["tree"], 0.5);
        assert_eq!(relative_mse(&m, "knn"), Err(Error::MissingReference("knn".into())));
        let z: BTreeMap<String, f64> = [("glm".to_string(), 0.0)].into();
        assert_eq!(relative_mse(&z, "glm"), Err(Error::ZeroReference("glm".into())));
    }

    #[test]
    fn geometric_mean_examples() {
        assert!((geometric_mean(&[1.0, 4.0]).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(geometric_mean(&[3.7]).unwrap(), 3.7);
        assert_eq!(geometric_mean(&[1.0; 5]).unwrap(), 1.0);
        assert_eq!(geometric_mean(&[1.0, 0.0]), Err(Error::NonPositive(0.0)));
    }

    #[test]
    fn summarize_examples() {
        let s = summarize(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!((s.mean, s.q25, s.q75), (3.0, 2.0, 4.0));
        let c = summarize(&[2.5; 4]).unwrap();
        assert_eq!((c.mean, c.q25, c.q75), (2.5, 2.5, 2.5));
        let t = summarize(&[0.0, 10.0]).unwrap();
        assert_eq!((t.mean, t.q25, t.q75), (5.0, 2.5, 7.5));
    }

    #[test]
    fn table_summaries_in_first_seen_order() {
        let row = |g: &str, a: &str, v| MetricRow { group: g.into(), algorithm: a.into(), value: v };
        let t = MetricTable::new(
            "r2",
            vec![row("1", "SL", 0.5), row("1", "ols", 0.4), row("1", "SL", 0.7), row("2", "SL", f64::NAN)],
        );
        assert_eq!(t.summary.len(), 3);
        assert_eq!(t.summary[0].algorithm, "SL");
        assert!((t.summary[0].mean - 0.6).abs() < 1e-15);
        assert_eq!(t.summary[2].count, 0);
    }

    proptest! {
        #[test]
        fn r_squared_affine_invariance(
            y in prop::collection::vec(-100.0f64..100.0, 3..30),
            noise in prop::collection::vec(-5.0f64..5.0, 30),
            a in prop::sample::select(vec![-3.5, -0.5, 0.25, 2.0, 7.0]),
            b in -50.0f64..50.0,
        ) {
            let yhat: Vec<f64> = y.iter().zip(&noise).map(|(v, e)| v + e).collect();
            prop_assume!(r_squared(&y, &yhat).is_ok());
            let r1 = r_squared(&y, &yhat).unwrap();
            let ty: Vec<f64> = y.iter().map(|v| a * v + b).collect();
            let th: Vec<f64> = yhat.iter().map(|v| a * v + b).collect();
            let r2 = r_squared(&ty, &th).unwrap();
            prop_assert!((r1 - r2).abs() <= 1e-12 * (1.0 + r1.abs()), "{} vs {}", r1, r2);
        }

        #[test]
        fn geometric_mean_bounds(v in prop::collection::vec(1e-3f64..1e3, 1..20), c in 0.01f64..100.0) {
            let g = geometric_mean(&v).unwrap();
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(g >= lo && g <= hi);
            let scaled: Vec<f64> = v.iter().map(|x| x * c).collect();
            let gs = geometric_mean(&scaled).unwrap();
            prop_assert!((gs - c * g).abs() <= 1e-10 * gs);
        }
    }
}
