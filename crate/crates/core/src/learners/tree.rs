//! CART regression tree grown by greedy variance reduction.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::data::Matrix;
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq)]
pub struct TreeParams {
    /// A node needs at least this many units to be considered for a split.
    pub min_split: usize,
    /// Each child must keep at least this many units.
    pub min_leaf: usize,
    /// Depth 0 is the root only.
    pub max_depth: usize,
    /// A split must remove at least `cp` times the root SSE.
    pub cp: f64,
    /// Features sampled per split; `None` uses all of them.
    pub mtry: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf { value: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a [f64],
    params: &'a TreeParams,
    min_gain: f64,
    rng: Option<rand_chacha::ChaCha8Rng>,
    nodes: Vec<Node>,
}

struct BestSplit {
    gain: f64,
    feature: usize,
    threshold: f64,
}

impl RegressionTree {
    pub fn fit(x: &Matrix, y: &[f64], params: &TreeParams, rng: &RngStream) -> Self {
        let idx: Vec<usize> = (0..x.nrows()).collect();
        Self::fit_rows(x, y, &idx, params, rng)
    }

    /// Grow on the listed rows; repeated indices act as case weights.
    pub fn fit_rows(x: &Matrix, y: &[f64], rows: &[usize], params: &TreeParams, rng: &RngStream) -> Self {
        let root_sse = sse(rows.iter().map(|&i| y[i]));
        let mut b = Builder {
            x,
            y,
            params,
            min_gain: params.cp * root_sse,
            rng: params.mtry.map(|_| rng.rng()),
            nodes: Vec::new(),
        };
        b.grow(rows.to_vec(), 0);
        RegressionTree { nodes: b.nodes }
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let mut k = 0;
        loop {
            match &self.nodes[k] {
                Node::Leaf { value } => return *value,
                Node::Split { feature, threshold, left, right } => {
                    k = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        (0..x.nrows()).map(|i| self.predict_row(x.row(i))).collect()
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

fn sse(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let (s, c) = values.clone().fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if c == 0 {
        return 0.0;
    }
    let m = s / c as f64;
    values.map(|v| (v - m) * (v - m)).sum()
}

impl Builder<'_> {
    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        let n = idx.len();
        let mean = idx.iter().map(|&i| self.y[i]).sum::<f64>() / n as f64;
        self.nodes.push(Node::Leaf { value: mean });
        let p = &self.params;
        if depth >= p.max_depth || n < p.min_split || n < 2 * p.min_leaf {
            return id;
        }
        let node_sse: f64 = idx.iter().map(|&i| (self.y[i] - mean) * (self.y[i] - mean)).sum();
        if node_sse <= 0.0 {
            return id;
        }
        let Some(best) = self.best_split(&idx, mean) else { return id };
        // Guard against splits whose gain is pure rounding.
        if best.gain <= 1e-12 * node_sse || best.gain < self.min_gain {
            return id;
        }
        let (left, right): (Vec<usize>, Vec<usize>) =
            idx.into_iter().partition(|&i| self.x.get(i, best.feature) <= best.threshold);
        let l = self.grow(left, depth + 1);
        let r = self.grow(right, depth + 1);
        self.nodes[id] = Node::Split { feature: best.feature, threshold: best.threshold, left: l, right: r };
        id
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let p = self.x.ncols();
        match (self.params.mtry, self.rng.as_mut()) {
            (Some(m), Some(rng)) if m < p => {
                let mut f = sample(rng, p, m).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..p).collect(),
        }
    }

    /// Highest-gain split; ties keep the lowest feature, then the lowest threshold.
    fn best_split(&mut self, idx: &[usize], mean: f64) -> Option<BestSplit> {
        let n = idx.len();
        let min_leaf = self.params.min_leaf;
        let total: f64 = idx.iter().map(|&i| self.y[i] - mean).sum();
        let base = total * total / n as f64;
        let mut best: Option<BestSplit> = None;
        let mut order: Vec<(f64, f64)> = Vec::with_capacity(n);
        for f in self.candidate_features() {
            order.clear();
            order.extend(idx.iter().map(|&i| (self.x.get(i, f), self.y[i] - mean)));
            order.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_sum = 0.0;
            for k in 1..n {
                left_sum += order[k - 1].1;
                if k < min_leaf || n - k < min_leaf {
                    continue;
                }
                let (lo, hi) = (order[k - 1].0, order[k].0);
                if lo >= hi {
                    continue;
                }
                let right_sum = total - left_sum;
                let gain = left_sum * left_sum / k as f64 + right_sum * right_sum / (n - k) as f64 - base;
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some(BestSplit { gain, feature: f, threshold });
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(max_depth: usize, cp: f64) -> TreeParams {
        TreeParams { min_split: 2, min_leaf: 1, max_depth, cp, mtry: None }
    }

    fn col(v: &[f64]) -> Matrix {
        Matrix::from_rows(&v.iter().map(|&a| vec![a]).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn root_only_predicts_mean() {
        let x = col(&[1.0, 2.0, 3.0, 4.0]);
        let y = [1.0, 2.0, 3.0, 10.0];
        let t = RegressionTree::fit(&x, &y, &params(0, 0.0), &RngStream::new(0));
        assert_eq!(t.nodes.len(), 1);
        assert!(t.predict(&col(&[-5.0, 100.0])).iter().all(|&v| v == 4.0));
    }

    #[test]
    fn finds_step() {
        let x = col(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let y = [0.0, 0.0, 0.0, 5.0, 5.0, 5.0];
        let t = RegressionTree::fit(&x, &y, &params(5, 0.0), &RngStream::new(0));
        assert_eq!(t.n_leaves(), 2);
        match &t.nodes[0] {
            Node::Split { feature, threshold, .. } => {
                assert_eq!(*feature, 0);
                assert_eq!(*threshold, 3.5);
            }
            _ => panic!("expected split"),
        }
        assert_eq!(t.predict(&col(&[3.0, 3.6])), vec![0.0, 5.0]);
    }

    #[test]
    fn tie_break_lowest_feature_then_threshold() {
        // Both features separate y identically.
        let x = Matrix::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0], vec![4.0, 4.0]]).unwrap();
        let y = [0.0, 0.0, 1.0, 1.0];
        let t = RegressionTree::fit(&x, &y, &params(1, 0.0), &RngStream::new(0));
        assert!(matches!(t.nodes[0], Node::Split { feature: 0, .. }));
        // Symmetric gains at 1.5 and 3.5 on y = (1,0,0,1): lowest threshold wins.
        let y2 = [1.0, 0.0, 0.0, 1.0];
        let t2 = RegressionTree::fit(&col(&[1.0, 2.0, 3.0, 4.0]), &y2, &params(1, 0.0), &RngStream::new(0));
        assert!(matches!(t2.nodes[0], Node::Split { threshold, .. } if threshold == 1.5));
    }

    #[test]
    fn cp_blocks_small_gains() {
        let x = col(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let y = [0.0, 0.1, 0.0, 0.1, 0.0, 5.0];
        let grown = RegressionTree::fit(&x, &y, &params(10, 0.0), &RngStream::new(0));
        let pruned = RegressionTree::fit(&x, &y, &params(10, 0.1), &RngStream::new(0));
        assert!(grown.n_leaves() > pruned.n_leaves());
        assert_eq!(pruned.n_leaves(), 2);
    }

    #[test]
    fn min_leaf_respected() {
        let x = col(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let y = [9.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let p = TreeParams { min_split: 2, min_leaf: 2, max_depth: 1, cp: 0.0, mtry: None };
        let t = RegressionTree::fit(&x, &y, &p, &RngStream::new(0));
        assert!(matches!(t.nodes[0], Node::Split { threshold, .. } if threshold == 2.5));
    }
}
