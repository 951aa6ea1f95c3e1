//! Small dense least-squares kernels.

use crate::data::Matrix;

/// Relative tolerance below which a column is treated as aliased.
const ALIAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub(crate) struct Lstsq {
    pub coef: Vec<f64>,
    #[cfg_attr(not(test), allow(dead_code))]
    pub rank: usize,
}

/// Least squares by Householder QR, processing columns in order.
///
/// A column whose residual norm after projecting out the previously accepted
/// columns falls below `ALIAS_TOL` times its original norm is aliased: it is
/// skipped and its coefficient is exactly zero.
pub(crate) fn lstsq(a: &Matrix, b: &[f64]) -> Lstsq {
    let (m, n) = (a.nrows(), a.ncols());
    assert_eq!(m, b.len());
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.column(j)).collect();
    let orig: Vec<f64> = cols.iter().map(|c| norm(c)).collect();
    let mut rhs = b.to_vec();
    let mut accepted: Vec<usize> = Vec::new();
    let mut k = 0;
    for j in 0..n {
        if k == m {
            break;
        }
        let tail = norm(&cols[j][k..]);
        if orig[j] == 0.0 || tail <= ALIAS_TOL * orig[j] {
            continue;
        }
        // Reflector v with H = I - 2 v vᵀ / vᵀv mapping cols[j][k..] to ∓tail·e₁.
        let alpha = if cols[j][k] > 0.0 { -tail } else { tail };
        let mut v = cols[j][k..].to_vec();
        v[0] -= alpha;
        let vtv: f64 = v.iter().map(|x| x * x).sum();
        if vtv > 0.0 {
            for c in cols.iter_mut().skip(j) {
                reflect(&v, vtv, &mut c[k..]);
            }
            reflect(&v, vtv, &mut rhs[k..]);
        }
        accepted.push(j);
        k += 1;
    }
    // Back substitution on the accepted columns.
    let r = accepted.len();
    let mut beta = vec![0.0; r];
    for t in (0..r).rev() {
        let mut s = rhs[t];
        for u in t + 1..r {
            s -= cols[accepted[u]][t] * beta[u];
        }
        beta[t] = s / cols[accepted[t]][t];
    }
    let mut coef = vec![0.0; n];
    for (t, &j) in accepted.iter().enumerate() {
        coef[j] = beta[t];
    }
    Lstsq { coef, rank: r }
}

/// Weighted least squares; zero-weight rows are dropped.
pub(crate) fn weighted_lstsq(a: &Matrix, b: &[f64], w: &[f64]) -> Lstsq {
    let keep: Vec<usize> = (0..a.nrows()).filter(|&i| w[i] > 0.0).collect();
    let mut data = Vec::with_capacity(keep.len() * a.ncols());
    let mut rhs = Vec::with_capacity(keep.len());
    for &i in &keep {
        let s = w[i].sqrt();
        data.extend(a.row(i).iter().map(|v| v * s));
        rhs.push(b[i] * s);
    }
    let sub = Matrix::from_vec(keep.len(), a.ncols(), data).expect("shape");
    lstsq(&sub, &rhs)
}

fn reflect(v: &[f64], vtv: f64, x: &mut [f64]) {
    let dot: f64 = v.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
    let f = 2.0 * dot / vtv;
    for (xi, vi) in x.iter_mut().zip(v) {
        *xi -= f * vi;
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    // Scaled by the largest magnitude.
    let scale = v.iter().fold(0.0f64, |s, x| s.max(x.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    scale * v.iter().map(|x| (x / scale) * (x / scale)).sum::<f64>().sqrt()
}

/// Prepend a column of ones.
pub(crate) fn with_intercept(x: &Matrix) -> Matrix {
    let p = x.ncols();
    let mut data = Vec::with_capacity(x.nrows() * (p + 1));
    for i in 0..x.nrows() {
        data.push(1.0);
        data.extend_from_slice(x.row(i));
    }
    Matrix::from_vec(x.nrows(), p + 1, data).expect("shape")
}

/// Per-column mean and standard deviation (population); zero sd is reported as 1.
pub(crate) fn column_scaling(x: &Matrix) -> (Vec<f64>, Vec<f64>) {
    let n = x.nrows() as f64;
    let p = x.ncols();
    let mut mean = vec![0.0; p];
    for i in 0..x.nrows() {
        for (m, v) in mean.iter_mut().zip(x.row(i)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; p];
    for i in 0..x.nrows() {
        for ((s, v), m) in var.iter_mut().zip(x.row(i)).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let sd = var
        .into_iter()
        .map(|s| {
            let sd = (s / n).sqrt();
            if sd > 0.0 && sd.is_finite() {
                sd
            } else {
                1.0
            }
        })
        .collect();
    (mean, sd)
}

pub(crate) fn standardize(x: &Matrix, mean: &[f64], sd: &[f64]) -> Matrix {
    let mut out = x.clone();
    for i in 0..x.nrows() {
        for j in 0..x.ncols() {
            out.set(i, j, (x.get(i, j) - mean[j]) / sd[j]);
        }
    }
    out
}
