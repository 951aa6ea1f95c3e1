//! Linear learners: OLS, OLS with pairwise interactions, ridge, lasso and
//! forward stepwise selection.

use serde::{Deserialize, Serialize};

use crate::data::{mean, Dataset, Matrix};
use crate::error::Result;
use crate::linalg::{column_scaling, lstsq, with_intercept};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub coef: Vec<f64>,
}

impl LinearModel {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.intercept + self.coef.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        (0..x.nrows()).map(|i| self.predict_row(x.row(i))).collect()
    }
}

/// Least squares with intercept; aliased columns get a zero coefficient.
pub fn fit_ols(x: &Matrix, y: &[f64]) -> LinearModel {
    let sol = lstsq(&with_intercept(x), y);
    LinearModel { intercept: sol.coef[0], coef: sol.coef[1..].to_vec() }
}

fn pairwise_products(row: &[f64], out: &mut Vec<f64>) {
    out.extend_from_slice(row);
    for a in 0..row.len() {
        for b in a + 1..row.len() {
            out.push(row[a] * row[b]);
        }
    }
}

fn expand_matrix(x: &Matrix) -> Matrix {
    let p = x.ncols();
    let q = p + p * (p - 1) / 2;
    let mut data = Vec::with_capacity(x.nrows() * q);
    for i in 0..x.nrows() {
        pairwise_products(x.row(i), &mut data);
    }
    Matrix::from_vec(x.nrows(), q, data).expect("shape")
}

/// Append every pairwise product `xa·xb` (a < b) as a new column named `a:b`.
pub fn expand_interactions(data: &Dataset) -> Result<Dataset> {
    let names = data.feature_names();
    let mut expanded = names.to_vec();
    for a in 0..names.len() {
        for b in a + 1..names.len() {
            expanded.push(format!("{}:{}", names[a], names[b]));
        }
    }
    Dataset::new(expand_matrix(data.x()), data.y().to_vec(), expanded)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionModel {
    pub linear: LinearModel,
}

impl InteractionModel {
    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        let mut buf = Vec::new();
        (0..x.nrows())
            .map(|i| {
                buf.clear();
                pairwise_products(x.row(i), &mut buf);
                self.linear.predict_row(&buf)
            })
            .collect()
    }
}

pub fn fit_interactions(x: &Matrix, y: &[f64]) -> InteractionModel {
    InteractionModel { linear: fit_ols(&expand_matrix(x), y) }
}

/// Centered, scaled copy of `x` plus the scaling used.
fn standardized(x: &Matrix) -> (Matrix, Vec<f64>, Vec<f64>) {
    let (mu, sd) = column_scaling(x);
    (crate::linalg::standardize(x, &mu, &sd), mu, sd)
}

/// Map standardized-scale slopes back to the raw scale.
fn unstandardize(beta_std: &[f64], mu: &[f64], sd: &[f64], y_mean: f64) -> LinearModel {
    let coef: Vec<f64> = beta_std.iter().zip(sd).map(|(b, s)| b / s).collect();
    let intercept = y_mean - coef.iter().zip(mu).map(|(b, m)| b * m).sum::<f64>();
    LinearModel { intercept, coef }
}

/// Ridge regression on standardized features with an unpenalized intercept:
/// minimizes ‖yc − Zβ‖² + λ‖β‖², solved as an augmented least-squares problem.
pub fn fit_ridge(x: &Matrix, y: &[f64], lambda: f64) -> LinearModel {
    let (n, p) = (x.nrows(), x.ncols());
    let (z, mu, sd) = standardized(x);
    let y_mean = mean(y);
    let root = lambda.sqrt();
    let mut data = Vec::with_capacity((n + p) * p);
    data.extend_from_slice(z.as_slice());
    for j in 0..p {
        data.extend((0..p).map(|k| if k == j { root } else { 0.0 }));
    }
    let aug = Matrix::from_vec(n + p, p, data).expect("shape");
    let mut rhs: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    rhs.extend(std::iter::repeat_n(0.0, p));
    let sol = lstsq(&aug, &rhs);
    unstandardize(&sol.coef, &mu, &sd, y_mean)
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Lasso by cyclic coordinate descent on standardized features:
/// minimizes (2n)⁻¹‖yc − Zβ‖² + λ‖β‖₁. Returns the model and whether the
/// sweep converged before `max_iter`.
pub fn fit_lasso(x: &Matrix, y: &[f64], lambda: f64, max_iter: usize) -> (LinearModel, bool) {
    let (n, p) = (x.nrows(), x.ncols());
    let (z, mu, sd) = standardized(x);
    let y_mean = mean(y);
    let cols: Vec<Vec<f64>> = (0..p).map(|j| z.column(j)).collect();
    let sq: Vec<f64> = cols.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>() / n as f64).collect();
    let mut resid: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    let scale = resid.iter().map(|r| r * r).sum::<f64>().sqrt().max(1e-300);
    let mut beta = vec![0.0; p];
    let mut converged = false;
    for _ in 0..max_iter {
        let mut max_delta = 0.0f64;
        for j in 0..p {
            if sq[j] == 0.0 {
                continue;
            }
            let rho = cols[j].iter().zip(&resid).map(|(a, r)| a * r).sum::<f64>() / n as f64 + sq[j] * beta[j];
            let new = soft_threshold(rho, lambda) / sq[j];
            let delta = new - beta[j];
            if delta != 0.0 {
                for (r, a) in resid.iter_mut().zip(&cols[j]) {
                    *r -= delta * a;
                }
                beta[j] = new;
                max_delta = max_delta.max(delta.abs());
            }
        }
        if max_delta * (n as f64).sqrt() <= 1e-10 * scale {
            converged = true;
            break;
        }
    }
    (unstandardize(&beta, &mu, &sd, y_mean), converged)
}

fn aic(rss: f64, n: usize, n_params: usize) -> f64 {
    let n = n as f64;
    n * (rss / n).max(f64::MIN_POSITIVE).ln() + 2.0 * n_params as f64
}

fn rss_of(x: &Matrix, y: &[f64], cols: &[usize]) -> (LinearModel, f64) {
    let sub = x.select_columns(cols);
    let m = fit_ols(&sub, y);
    let rss = m.predict(&sub).iter().zip(y).map(|(f, v)| (v - f) * (v - f)).sum();
    (m, rss)
}

/// Forward selection over main terms, adding the term with the lowest AIC
/// while AIC strictly improves. Ties go to the lower feature index.
pub fn fit_stepwise(x: &Matrix, y: &[f64]) -> LinearModel {
    let (n, p) = (x.nrows(), x.ncols());
    let y_mean = mean(y);
    let rss0: f64 = y.iter().map(|v| (v - y_mean) * (v - y_mean)).sum();
    let mut selected: Vec<usize> = Vec::new();
    let mut best_aic = aic(rss0, n, 1);
    let mut best_model = LinearModel { intercept: y_mean, coef: Vec::new() };
    loop {
        let mut step: Option<(f64, usize, LinearModel)> = None;
        for j in (0..p).filter(|j| !selected.contains(j)) {
            let mut cols = selected.clone();
            cols.push(j);
            let (m, rss) = rss_of(x, y, &cols);
            let a = aic(rss, n, cols.len() + 1);
            if step.as_ref().is_none_or(|(b, _, _)| a < *b) {
                step = Some((a, j, m));
            }
        }
        match step {
            Some((a, j, m)) if a < best_aic => {
                best_aic = a;
                selected.push(j);
                best_model = m;
            }
            _ => break,
        }
    }
    let mut coef = vec![0.0; p];
    for (k, &j) in selected.iter().enumerate() {
        coef[j] = best_model.coef[k];
    }
    LinearModel { intercept: best_model.intercept, coef }
}
