//! k-nearest-neighbour regression on standardized features.

use serde::{Deserialize, Serialize};

use crate::data::Matrix;
use crate::linalg::{column_scaling, standardize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
    pub x: Matrix,
    pub y: Vec<f64>,
}

impl KnnModel {
    pub fn fit(x: &Matrix, y: &[f64], k: usize) -> Self {
        let (center, scale) = column_scaling(x);
        let xs = standardize(x, &center, &scale);
        KnnModel { k, center, scale, x: xs, y: y.to_vec() }
    }

    /// Mean response of the k closest training rows; distance ties go to the
    /// lower training index.
    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        let q = standardize(x, &self.center, &self.scale);
        let n = self.x.nrows();
        let mut dist: Vec<(f64, usize)> = Vec::with_capacity(n);
        (0..q.nrows())
            .map(|r| {
                let query = q.row(r);
                dist.clear();
                dist.extend((0..n).map(|i| {
                    let d: f64 = self.x.row(i).iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum();
                    (d, i)
                }));
                let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
                if self.k < n {
                    dist.select_nth_unstable_by(self.k - 1, cmp);
                }
                dist[..self.k].iter().map(|&(_, i)| self.y[i]).sum::<f64>() / self.k as f64
            })
            .collect()
    }
}
