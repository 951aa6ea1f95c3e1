//! Natural cubic regression splines and the additive model built from them.

use serde::{Deserialize, Serialize};

use crate::data::Matrix;
use crate::error::{Error, Result};
use crate::linalg::{lstsq, with_intercept};
use crate::metrics::quantile_sorted;

/// Natural cubic spline basis (no intercept column) with `df` columns and
/// `df + 1` knots at evenly spaced sample quantiles, the outer two being the
/// boundary knots. Beyond the boundary knots every column is linear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaturalSpline {
    /// Knots rescaled so the boundary knots are 0 and 1.
    knots: Vec<f64>,
    origin: f64,
    width: f64,
}

impl NaturalSpline {
    pub fn new(x: &[f64], df: usize) -> Result<Self> {
        if !(2..=4).contains(&df) {
            return Err(Error::hyper("gam_spline", format!("df={df} not in {{2, 3, 4}}")));
        }
        if let Some(v) = x.iter().find(|v| !v.is_finite()) {
            return Err(Error::DegenerateInput(format!("non-finite value {v}")));
        }
        let mut sorted = x.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut distinct = sorted.clone();
        distinct.dedup();
        if distinct.len() < df + 1 {
            return Err(Error::DegenerateInput(format!(
                "{} distinct values, need at least {} for df={df}",
                distinct.len(),
                df + 1
            )));
        }
        let raw: Vec<f64> = (0..=df).map(|k| quantile_sorted(&sorted, k as f64 / df as f64)).collect();
        if raw.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::DegenerateInput(format!("tied quantile knots {raw:?}")));
        }
        let origin = raw[0];
        let width = raw[df] - raw[0];
        let knots = raw.iter().map(|k| (k - origin) / width).collect();
        Ok(Self { knots, origin, width })
    }

    pub fn df(&self) -> usize {
        self.knots.len() - 1
    }

    pub fn knots(&self) -> Vec<f64> {
        self.knots.iter().map(|k| self.origin + k * self.width).collect()
    }

    /// Append the basis row for `x` to `out`.
    pub fn eval_into(&self, x: f64, out: &mut Vec<f64>) {
        let u = (x - self.origin) / self.width;
        let t = &self.knots;
        let last = t.len() - 1;
        let cube = |v: f64| if v > 0.0 { v * v * v } else { 0.0 };
        let d = |k: usize| (cube(u - t[k]) - cube(u - t[last])) / (t[last] - t[k]);
        out.push(u);
        let d_penult = d(last - 1);
        for k in 0..last - 1 {
            out.push(d(k) - d_penult);
        }
    }

    pub fn basis(&self, x: &[f64]) -> Matrix {
        let mut data = Vec::with_capacity(x.len() * self.df());
        for &v in x {
            self.eval_into(v, &mut data);
        }
        Matrix::from_vec(x.len(), self.df(), data).expect("shape")
    }
}

/// Natural cubic spline basis matrix for `x` with `df` columns.
pub fn spline_basis(x: &[f64], df: usize) -> Result<Matrix> {
    Ok(NaturalSpline::new(x, df)?.basis(x))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "term", rename_all = "snake_case")]
pub enum GamTerm {
    Linear,
    Spline(NaturalSpline),
}

impl GamTerm {
    fn width(&self) -> usize {
        match self {
            GamTerm::Linear => 1,
            GamTerm::Spline(s) => s.df(),
        }
    }
}

/// Additive model `y = a + Σ_j f_j(x_j)` with one natural spline per feature,
/// fitted by least squares. Features with too few distinct values for the
/// requested `df` enter linearly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GamModel {
    pub terms: Vec<GamTerm>,
    /// Intercept first, then the columns of each term in feature order.
    pub coef: Vec<f64>,
}

impl GamModel {
    pub fn fit(x: &Matrix, y: &[f64], df: usize) -> Self {
        let terms: Vec<GamTerm> = (0..x.ncols())
            .map(|j| match NaturalSpline::new(&x.column(j), df) {
                Ok(s) => GamTerm::Spline(s),
                Err(_) => GamTerm::Linear,
            })
            .collect();
        let design = Self::design(&terms, x);
        let coef = lstsq(&with_intercept(&design), y).coef;
        GamModel { terms, coef }
    }

    fn design(terms: &[GamTerm], x: &Matrix) -> Matrix {
        let width: usize = terms.iter().map(GamTerm::width).sum();
        let mut data = Vec::with_capacity(x.nrows() * width);
        for i in 0..x.nrows() {
            for (term, &v) in terms.iter().zip(x.row(i)) {
                match term {
                    GamTerm::Linear => data.push(v),
                    GamTerm::Spline(s) => s.eval_into(v, &mut data),
                }
            }
        }
        Matrix::from_vec(x.nrows(), width, data).expect("shape")
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        let d = Self::design(&self.terms, x);
        (0..d.nrows())
            .map(|i| self.coef[0] + d.row(i).iter().zip(&self.coef[1..]).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::mean;

    fn grid(n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn df_two_has_full_rank() {
        let x = grid(50, -4.0, 4.0);
        let b = spline_basis(&x, 2).unwrap();
        assert_eq!(b.ncols(), 2);
        let with_one = with_intercept(&b);
        assert_eq!(lstsq(&with_one, &x).rank, 3);
    }

    #[test]
    fn column_counts_match_df() {
        let x = grid(40, 0.0, 1.0);
        for df in 2..=4 {
            assert_eq!(spline_basis(&x, df).unwrap().ncols(), df);
        }
        assert!(spline_basis(&x, 5).is_err());
    }

    #[test]
    fn too_few_distinct_values() {
        let x = vec![1.0, 2.0, 1.0, 2.0, 3.0];
        assert!(matches!(spline_basis(&x, 3), Err(Error::DegenerateInput(_))));
        assert!(spline_basis(&x, 2).is_ok());
    }

    #[test]
    fn linear_beyond_boundary() {
        let x = grid(30, 0.0, 10.0);
        let s = NaturalSpline::new(&x, 4).unwrap();
        // Second differences vanish outside [0, 10].
        for start in [12.0, -7.0] {
            let b: Vec<Matrix> = (0..3).map(|k| s.basis(&[start + k as f64])).collect();
            for j in 0..4 {
                let sd = b[0].get(0, j) - 2.0 * b[1].get(0, j) + b[2].get(0, j);
                assert!(sd.abs() < 1e-9, "column {j}: {sd}");
            }
        }
    }

    #[test]
    fn fits_quadratic_closely() {
        let x = grid(200, -4.0, 4.0);
        let y: Vec<f64> = x.iter().map(|v| v * v).collect();
        let xm = Matrix::from_rows(&x.iter().map(|&v| vec![v]).collect::<Vec<_>>()).unwrap();
        let m = GamModel::fit(&xm, &y, 3);
        let f = m.predict(&xm);
        let mse = f.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / 200.0;
        let my = mean(&y);
        let var = y.iter().map(|v| (v - my) * (v - my)).sum::<f64>() / 200.0;
        assert!(mse <= 0.01 * var, "mse {mse} var {var}");
    }

    #[test]
    fn binary_feature_enters_linearly() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64, (i % 2) as f64]).collect();
        let y: Vec<f64> = rows.iter().map(|r| (r[0] / 5.0).sin() + 2.0 * r[1]).collect();
        let m = GamModel::fit(&Matrix::from_rows(&rows).unwrap(), &y, 3);
        assert!(matches!(m.terms[0], GamTerm::Spline(_)));
        assert_eq!(m.terms[1], GamTerm::Linear);
    }
}
