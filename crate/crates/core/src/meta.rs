//! Level-1 combiner: least squares over the probability simplex.
//!
//! `solve_simplex_ls` is a primal active-set method. It starts from uniform
//! weights and repeatedly minimizes ‖Zα − y‖² over the face spanned by the
//! free weights (a least-squares problem on column differences), stepping back
//! to the boundary when the face minimizer leaves the simplex and releasing a
//! bound weight when its multiplier is negative. The reported `kkt_residual` is
//! the Frank–Wolfe gap `Σ αₘ gₘ − minₘ gₘ` of the gradient `g`, an upper bound on
//! the distance of the objective from its minimum.

use serde::{Deserialize, Serialize};

use crate::data::Matrix;
use crate::error::{Error, Result};
use crate::linalg::lstsq;

pub const MAX_ITERATIONS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetaSolver {
    /// Exact simplex-constrained least squares.
    #[default]
    SimplexExact,
    /// Non-negative least squares followed by rescaling to sum one.
    NnlsNormalize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub method: MetaSolver,
    pub iterations: usize,
    /// ‖Zα − y‖² at the returned weights.
    pub final_objective: f64,
    pub kkt_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexWeights {
    pub alpha: Vec<f64>,
    pub labels: Vec<String>,
    pub solve_report: SolveReport,
}

impl SimplexWeights {
    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        assert_eq!(labels.len(), self.alpha.len());
        self.labels = labels;
        self
    }

    /// Simplex weights putting all mass on one column.
    pub fn vertex(m: usize, index: usize) -> Self {
        let mut alpha = vec![0.0; m];
        alpha[index] = 1.0;
        SimplexWeights {
            alpha,
            labels: default_labels(m),
            solve_report: SolveReport {
                method: MetaSolver::SimplexExact,
                iterations: 0,
                final_objective: f64::NAN,
                kkt_residual: f64::NAN,
            },
        }
    }
}

fn default_labels(m: usize) -> Vec<String> {
    (1..=m).map(|j| format!("m{j}")).collect()
}

fn check_inputs(z: &Matrix, y: &[f64]) -> Result<()> {
    if z.nrows() != y.len() {
        return Err(Error::LengthMismatch(format!("Z has {} rows, y has {}", z.nrows(), y.len())));
    }
    if z.nrows() == 0 || z.ncols() == 0 {
        return Err(Error::Empty("level-1 design must have at least one row and column".into()));
    }
    if let Some((row, col, value)) = z.find_non_finite() {
        return Err(Error::NonFinite { value, row, col });
    }
    if let Some(row) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { value: y[row], row, col: z.ncols() });
    }
    Ok(())
}

fn residual(z: &Matrix, y: &[f64], alpha: &[f64]) -> Vec<f64> {
    z.mul_vec(alpha).iter().zip(y).map(|(f, v)| v - f).collect()
}

/// ‖Zα − y‖².
pub fn objective(z: &Matrix, y: &[f64], alpha: &[f64]) -> f64 {
    residual(z, y, alpha).iter().map(|r| r * r).sum()
}

/// Gradient 2Zᵀ(Zα − y).
fn gradient(z: &Matrix, res: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; z.ncols()];
    for (i, r) in res.iter().enumerate() {
        for (gj, zij) in g.iter_mut().zip(z.row(i)) {
            *gj -= 2.0 * zij * r;
        }
    }
    g
}

/// Frank–Wolfe gap of `alpha`, which bounds f(α) − min f.
pub fn simplex_gap(z: &Matrix, y: &[f64], alpha: &[f64]) -> f64 {
    let g = gradient(z, &residual(z, y, alpha));
    let dot: f64 = g.iter().zip(alpha).map(|(a, b)| a * b).sum();
    let min = g.iter().copied().fold(f64::INFINITY, f64::min);
    (dot - min).max(0.0)
}

fn renormalize(alpha: &mut [f64]) {
    for a in alpha.iter_mut() {
        if *a < 0.0 {
            *a = 0.0;
        }
    }
    let s: f64 = alpha.iter().sum();
    alpha.iter_mut().for_each(|a| *a /= s);
}

/// Weights α ≥ 0, Σα = 1 minimizing ‖Zα − y‖².
pub fn solve_simplex_ls(z: &Matrix, y: &[f64]) -> Result<SimplexWeights> {
    check_inputs(z, y)?;
    let m = z.ncols();
    let mut alpha = vec![1.0 / m as f64; m];
    let mut free = vec![true; m];
    let mut iterations = 0;
    if m > 1 {
        while iterations < MAX_ITERATIONS {
            iterations += 1;
            let face: Vec<usize> = (0..m).filter(|&j| free[j]).collect();
            let target = face_step(z, y, &alpha, &face);
            let blocked = face
                .iter()
                .filter(|&&j| target[j] < 0.0)
                .map(|&j| (alpha[j] / (alpha[j] - target[j]), j))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            match blocked {
                None => {
                    for &j in &face {
                        alpha[j] = target[j];
                    }
                    renormalize(&mut alpha);
                    let g = gradient(z, &residual(z, y, &alpha));
                    let level: f64 = face.iter().map(|&j| alpha[j] * g[j]).sum();
                    let scale = g.iter().fold(1.0f64, |s, v| s.max(v.abs()));
                    let release = (0..m)
                        .filter(|&j| !free[j] && g[j] - level < -1e-12 * scale)
                        .min_by(|&a, &b| g[a].total_cmp(&g[b]).then(a.cmp(&b)));
                    match release {
                        Some(j) => free[j] = true,
                        None => break,
                    }
                }
                Some((t, j_block)) => {
                    let t = t.clamp(0.0, 1.0);
                    for &j in &face {
                        alpha[j] += t * (target[j] - alpha[j]);
                    }
                    alpha[j_block] = 0.0;
                    free[j_block] = false;
                    for &j in &face {
                        if alpha[j] <= 0.0 {
                            alpha[j] = 0.0;
                            free[j] = false;
                        }
                    }
                    renormalize(&mut alpha);
                }
            }
        }
    }
    Ok(SimplexWeights {
        solve_report: SolveReport {
            method: MetaSolver::SimplexExact,
            iterations,
            final_objective: objective(z, y, &alpha),
            kkt_residual: simplex_gap(z, y, &alpha),
        },
        alpha,
        labels: default_labels(m),
    })
}

/// Minimizer of the objective over the affine hull of the face, found as the
/// smallest-support step from the current point. Entries outside the face are
/// zero.
fn face_step(z: &Matrix, y: &[f64], alpha: &[f64], face: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; alpha.len()];
    if face.len() == 1 {
        out[face[0]] = 1.0;
        return out;
    }
    let pivot = *face.last().unwrap();
    let others = &face[..face.len() - 1];
    let n = z.nrows();
    let mut data = Vec::with_capacity(n * others.len());
    for i in 0..n {
        let row = z.row(i);
        data.extend(others.iter().map(|&j| row[j] - row[pivot]));
    }
    let d = Matrix::from_vec(n, others.len(), data).expect("shape");
    let res = residual(z, y, alpha);
    let step = lstsq(&d, &res).coef;
    let mut moved = 0.0;
    for (k, &j) in others.iter().enumerate() {
        out[j] = alpha[j] + step[k];
        moved += step[k];
    }
    out[pivot] = alpha[pivot] - moved;
    out
}

/// Lawson–Hanson non-negative least squares, then rescale to the simplex.
/// An all-zero NNLS solution falls back to the best single column.
pub fn solve_nnls_normalize(z: &Matrix, y: &[f64]) -> Result<SimplexWeights> {
    check_inputs(z, y)?;
    let m = z.ncols();
    let (mut x, iterations) = nnls(z, y);
    let s: f64 = x.iter().sum();
    if s > 0.0 {
        x.iter_mut().for_each(|v| *v /= s);
    } else {
        x = vec![0.0; m];
        x[discrete_select(z, y)?] = 1.0;
    }
    Ok(SimplexWeights {
        solve_report: SolveReport {
            method: MetaSolver::NnlsNormalize,
            iterations,
            final_objective: objective(z, y, &x),
            kkt_residual: simplex_gap(z, y, &x),
        },
        alpha: x,
        labels: default_labels(m),
    })
}

pub fn solve(method: MetaSolver, z: &Matrix, y: &[f64]) -> Result<SimplexWeights> {
    match method {
        MetaSolver::SimplexExact => solve_simplex_ls(z, y),
        MetaSolver::NnlsNormalize => solve_nnls_normalize(z, y),
    }
}

fn nnls(z: &Matrix, y: &[f64]) -> (Vec<f64>, usize) {
    let m = z.ncols();
    let mut x = vec![0.0; m];
    let mut passive = vec![false; m];
    let scale = gradient(z, y).iter().fold(1.0f64, |s, v| s.max(v.abs()));
    let tol = 1e-12 * scale;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        // w = Zᵀ(y − Zx) = −g/2
        let w: Vec<f64> = gradient(z, &residual(z, y, &x)).iter().map(|g| -g / 2.0).collect();
        let Some(t) =
            (0..m).filter(|&j| !passive[j] && w[j] > tol).max_by(|&a, &b| w[a].total_cmp(&w[b]).then(b.cmp(&a)))
        else {
            break;
        };
        passive[t] = true;
        loop {
            iterations += 1;
            let cols: Vec<usize> = (0..m).filter(|&j| passive[j]).collect();
            let sol = lstsq(&z.select_columns(&cols), y).coef;
            let mut s = vec![0.0; m];
            for (k, &j) in cols.iter().enumerate() {
                s[j] = sol[k];
            }
            if cols.iter().all(|&j| s[j] > 0.0) {
                x = s;
                break;
            }
            let (step, blocking) = cols
                .iter()
                .filter(|&&j| s[j] <= 0.0)
                .map(|&j| (x[j] / (x[j] - s[j]), j))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                .expect("some passive coefficient is non-positive");
            for &j in &cols {
                x[j] += step * (s[j] - x[j]);
                if j == blocking || x[j] <= 0.0 {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
            if !cols.iter().any(|&j| passive[j]) {
                break;
            }
        }
    }
    (x, iterations)
}

/// Column with the smallest mean squared error against `y`; ties go to the
/// lowest index.
pub fn discrete_select(z: &Matrix, y: &[f64]) -> Result<usize> {
    check_inputs(z, y)?;
    let n = z.nrows() as f64;
    let mut best = (f64::INFINITY, 0);
    for j in 0..z.ncols() {
        let mse = (0..z.nrows()).map(|i| (z.get(i, j) - y[i]).powi(2)).sum::<f64>() / n;
        if mse < best.0 {
            best = (mse, j);
        }
    }
    Ok(best.1)
}

/// Row-wise weighted average `Ŷα`.
pub fn combine(weights: &SimplexWeights, yhat: &Matrix) -> Result<Vec<f64>> {
    if yhat.ncols() != weights.alpha.len() {
        return Err(Error::DimensionMismatch { expected: weights.alpha.len(), actual: yhat.ncols() });
    }
    Ok((0..yhat.nrows())
        .map(|i| {
            let row = yhat.row(i);
            let v: f64 = row.iter().zip(&weights.alpha).map(|(a, b)| a * b).sum();
            // Clamp rounding excursions so the convex-hull bound holds exactly.
            let lo = row.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            v.clamp(lo, hi)
        })
        .collect())
}
