//! Local polynomial regression with tricube weights.
//!
//! For each query point the `span` fraction of nearest training rows (in
//! standardized coordinates) receive weight `(1 − (d/h)³)³`, where `h` is the
//! distance to the farthest of them, and a weighted least-squares polynomial
//! centred on the query is solved. The prediction is its intercept.

use serde::{Deserialize, Serialize};

use crate::data::Matrix;
use crate::linalg::{column_scaling, standardize, weighted_lstsq};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoessModel {
    pub span: f64,
    pub degree: usize,
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
    pub x: Matrix,
    pub y: Vec<f64>,
}

pub(crate) fn tricube(u: f64) -> f64 {
    if u >= 1.0 {
        0.0
    } else {
        let t = 1.0 - u * u * u;
        t * t * t
    }
}

fn local_terms(degree: usize, delta: &[f64], out: &mut Vec<f64>) {
    out.push(1.0);
    out.extend_from_slice(delta);
    if degree >= 2 {
        for a in 0..delta.len() {
            for b in a..delta.len() {
                out.push(delta[a] * delta[b]);
            }
        }
    }
}

impl LoessModel {
    pub fn fit(x: &Matrix, y: &[f64], span: f64, degree: usize) -> Self {
        let (center, scale) = column_scaling(x);
        LoessModel { span, degree, x: standardize(x, &center, &scale), center, scale, y: y.to_vec() }
    }

    fn n_terms(&self) -> usize {
        let p = self.x.ncols();
        if self.degree >= 2 {
            1 + p + p * (p + 1) / 2
        } else {
            1 + p
        }
    }

    /// Number of neighbours receiving nonzero weight.
    pub fn neighbourhood_size(&self) -> usize {
        let n = self.x.nrows();
        let q = (self.span * n as f64).floor() as usize;
        q.max(self.n_terms() + 1).min(n)
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        let qx = standardize(x, &self.center, &self.scale);
        let n = self.x.nrows();
        let p = self.x.ncols();
        let q = self.neighbourhood_size();
        let mut dist: Vec<(f64, usize)> = Vec::with_capacity(n);
        (0..qx.nrows())
            .map(|r| {
                let query = qx.row(r);
                dist.clear();
                dist.extend((0..n).map(|i| {
                    let d2: f64 = self.x.row(i).iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum();
                    (d2.sqrt(), i)
                }));
                let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
                if q < n {
                    dist.select_nth_unstable_by(q - 1, cmp);
                }
                let local = &dist[..q];
                let h = local.iter().fold(0.0f64, |m, &(d, _)| m.max(d));
                // Widen h slightly so the q-th neighbour keeps a positive weight.
                let h = h * (1.0 + 1e-8) + f64::MIN_POSITIVE;
                let mut design = Vec::with_capacity(q * self.n_terms());
                let mut w = Vec::with_capacity(q);
                let mut rhs = Vec::with_capacity(q);
                let mut delta = vec![0.0; p];
                for &(d, i) in local {
                    for (dj, (a, b)) in delta.iter_mut().zip(self.x.row(i).iter().zip(query)) {
                        *dj = a - b;
                    }
                    local_terms(self.degree, &delta, &mut design);
                    w.push(tricube(d / h));
                    rhs.push(self.y[i]);
                }
                let a = Matrix::from_vec(q, self.n_terms(), design).expect("shape");
                weighted_lstsq(&a, &rhs, &w).coef[0]
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_a_line_exactly() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64 / 3.0]).collect();
        let y: Vec<f64> = rows.iter().map(|r| 2.0 - 0.5 * r[0]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let m = LoessModel::fit(&x, &y, 0.3, 1);
        for (a, b) in m.predict(&x).iter().zip(&y) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn quadratic_degree_two_exact() {
        let rows: Vec<Vec<f64>> = (0..25).map(|i| vec![i as f64 / 5.0 - 2.5]).collect();
        let y: Vec<f64> = rows.iter().map(|r| r[0] * r[0]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let m = LoessModel::fit(&x, &y, 0.5, 2);
        for (a, b) in m.predict(&x).iter().zip(&y) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn neighbourhood_size_follows_span() {
        let x = Matrix::from_rows(&(0..100).map(|i| vec![i as f64]).collect::<Vec<_>>()).unwrap();
        let y = vec![0.0; 100];
        assert_eq!(LoessModel::fit(&x, &y, 0.25, 1).neighbourhood_size(), 25);
        assert_eq!(LoessModel::fit(&x, &y, 0.01, 1).neighbourhood_size(), 3);
        assert_eq!(LoessModel::fit(&x, &y, 1.0, 1).neighbourhood_size(), 100);
    }

    #[test]
    fn tricube_shape() {
        assert_eq!(tricube(0.0), 1.0);
        assert_eq!(tricube(1.0), 0.0);
        assert!((tricube(0.5) - (1.0f64 - 0.125).powi(3)).abs() < 1e-15);
    }
}
