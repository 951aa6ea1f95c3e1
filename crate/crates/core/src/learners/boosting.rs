//! Gradient boosting on squared error: each round fits a depth-limited tree
//! to the current residuals and adds a shrunken copy of it.

use serde::{Deserialize, Serialize};

use super::tree::{RegressionTree, TreeParams};
use crate::data::{mean, Matrix};
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq)]
pub struct BoostingParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub tree: TreeParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedTrees {
    pub base: f64,
    pub learning_rate: f64,
    pub trees: Vec<RegressionTree>,
}

impl BoostedTrees {
    pub fn fit(x: &Matrix, y: &[f64], params: &BoostingParams) -> Self {
        let base = mean(y);
        let mut current = vec![base; y.len()];
        let mut trees = Vec::with_capacity(params.n_rounds);
        // Trees here never sample features, so the stream is unused.
        let unused = RngStream::new(0);
        for _ in 0..params.n_rounds {
            let resid: Vec<f64> = y.iter().zip(&current).map(|(a, b)| a - b).collect();
            let tree = RegressionTree::fit(x, &resid, &params.tree, &unused);
            for (i, c) in current.iter_mut().enumerate() {
                *c += params.learning_rate * tree.predict_row(x.row(i));
            }
            trees.push(tree);
        }
        BoostedTrees { base, learning_rate: params.learning_rate, trees }
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        (0..x.nrows())
            .map(|i| {
                let row = x.row(i);
                self.base + self.trees.iter().map(|t| self.learning_rate * t.predict_row(row)).sum::<f64>()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data() -> (Matrix, Vec<f64>) {
        let rows: Vec<Vec<f64>> =
            (0..60).map(|i| vec![(i as f64 * 0.71).cos() * 3.0, ((i * 13) % 17) as f64]).collect();
        let y = rows.iter().map(|r| r[0] * r[0] - 0.3 * r[1]).collect();
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn one_full_round_equals_lone_tree() {
        let (x, y) = data();
        let tree_params = TreeParams { min_split: 2, min_leaf: 1, max_depth: 3, cp: 0.0, mtry: None };
        let b =
            BoostedTrees::fit(&x, &y, &BoostingParams { n_rounds: 1, learning_rate: 1.0, tree: tree_params.clone() });
        let t = RegressionTree::fit(&x, &y, &tree_params, &RngStream::new(0));
        for (a, c) in b.predict(&x).iter().zip(t.predict(&x)) {
            assert!((a - c).abs() < 1e-10);
        }
    }

    #[test]
    fn training_loss_decreases_with_rounds() {
        let (x, y) = data();
        let tp = TreeParams { min_split: 2, min_leaf: 1, max_depth: 2, cp: 0.0, mtry: None };
        let mse = |rounds| {
            let b =
                BoostedTrees::fit(&x, &y, &BoostingParams { n_rounds: rounds, learning_rate: 0.1, tree: tp.clone() });
            b.predict(&x).iter().zip(&y).map(|(a, c)| (a - c) * (a - c)).sum::<f64>()
        };
        assert!(mse(50) < mse(10));
        assert!(mse(10) < mse(1));
    }
}
