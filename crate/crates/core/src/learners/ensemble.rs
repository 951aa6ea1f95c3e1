//! Bootstrap aggregation of regression trees, with optional per-split feature
//! sampling (random forest).

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tree::{RegressionTree, TreeParams};
use crate::data::Matrix;
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<RegressionTree>,
}

impl Forest {
    pub fn fit(x: &Matrix, y: &[f64], n_trees: usize, bootstrap: bool, params: &TreeParams, rng: &RngStream) -> Self {
        let n = x.nrows();
        let trees = (0..n_trees)
            .map(|t| {
                let stream = rng.child("tree", t as u64);
                let rows: Vec<usize> = if bootstrap {
                    let mut r = stream.child("bootstrap", 0).rng();
                    (0..n).map(|_| r.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                RegressionTree::fit_rows(x, y, &rows, params, &stream.child("split", 0))
            })
            .collect();
        Forest { trees }
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        let k = self.trees.len() as f64;
        (0..x.nrows()).map(|i| self.trees.iter().map(|t| t.predict_row(x.row(i))).sum::<f64>() / k).collect()
    }
}
