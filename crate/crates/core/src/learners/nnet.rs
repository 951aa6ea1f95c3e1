//! Single-hidden-layer tanh network with a linear output unit.
//!
//! Inputs and response are z-scored internally. Training minimizes
//! `(2n)⁻¹ Σ rᵢ² + (decay/2)·‖W‖²` (biases are not decayed) by full-batch
//! gradient descent with an Armijo backtracking line search.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{mean, Matrix};
use crate::linalg::{column_scaling, standardize};
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq)]
pub struct NnetParams {
    pub hidden: usize,
    pub max_iter: usize,
    pub weight_decay: f64,
}

const INIT_RANGE: f64 = 0.7;
const GRAD_TOL: f64 = 1e-6;
const ARMIJO: f64 = 1e-4;

/// Flat parameter layout: `W1` (hidden × p, row-major), `b1` (hidden),
/// `w2` (hidden), `b2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuralNet {
    pub hidden: usize,
    pub n_inputs: usize,
    pub weights: Vec<f64>,
    pub x_center: Vec<f64>,
    pub x_scale: Vec<f64>,
    pub y_center: f64,
    pub y_scale: f64,
}

pub fn n_weights(n_inputs: usize, hidden: usize) -> usize {
    hidden * n_inputs + 2 * hidden + 1
}

fn forward(w: &[f64], hidden: usize, row: &[f64], act: &mut [f64]) -> f64 {
    let p = row.len();
    let (w1, rest) = w.split_at(hidden * p);
    let (b1, rest) = rest.split_at(hidden);
    let (w2, b2) = rest.split_at(hidden);
    let mut out = b2[0];
    for h in 0..hidden {
        let z: f64 = b1[h] + w1[h * p..(h + 1) * p].iter().zip(row).map(|(a, b)| a * b).sum::<f64>();
        act[h] = z.tanh();
        out += w2[h] * act[h];
    }
    out
}

/// Training objective and its analytic gradient on already-standardized data.
pub fn loss_and_gradient(w: &[f64], hidden: usize, x: &Matrix, y: &[f64], decay: f64) -> (f64, Vec<f64>) {
    let (n, p) = (x.nrows(), x.ncols());
    let mut grad = vec![0.0; w.len()];
    let mut act = vec![0.0; hidden];
    let mut sse = 0.0;
    let o_b1 = hidden * p;
    let o_w2 = o_b1 + hidden;
    let o_b2 = o_w2 + hidden;
    for (i, &yi) in y.iter().enumerate() {
        let row = x.row(i);
        let r = forward(w, hidden, row, &mut act) - yi;
        sse += r * r;
        let g = r / n as f64;
        grad[o_b2] += g;
        for h in 0..hidden {
            grad[o_w2 + h] += g * act[h];
            let back = g * w[o_w2 + h] * (1.0 - act[h] * act[h]);
            grad[o_b1 + h] += back;
            for (gw, xv) in grad[h * p..(h + 1) * p].iter_mut().zip(row) {
                *gw += back * xv;
            }
        }
    }
    let mut penalty = 0.0;
    for k in (0..o_b1).chain(o_w2..o_b2) {
        penalty += w[k] * w[k];
        grad[k] += decay * w[k];
    }
    (sse / (2.0 * n as f64) + 0.5 * decay * penalty, grad)
}

impl NeuralNet {
    /// Returns the trained network and whether the gradient-norm criterion was
    /// met before `max_iter`; otherwise the last (best) iterate is kept.
    pub fn fit(x: &Matrix, y: &[f64], params: &NnetParams, rng: &RngStream) -> (Self, bool) {
        let (x_center, x_scale) = column_scaling(x);
        let xs = standardize(x, &x_center, &x_scale);
        let y_center = mean(y);
        let sd = (y.iter().map(|v| (v - y_center) * (v - y_center)).sum::<f64>() / y.len() as f64).sqrt();
        let y_scale = if sd > 0.0 { sd } else { 1.0 };
        let ys: Vec<f64> = y.iter().map(|v| (v - y_center) / y_scale).collect();

        let n_w = n_weights(x.ncols(), params.hidden);
        if sd == 0.0 {
            // Constant response: the zero network predicts it exactly.
            let net = NeuralNet {
                hidden: params.hidden,
                n_inputs: x.ncols(),
                weights: vec![0.0; n_w],
                x_center,
                x_scale,
                y_center,
                y_scale,
            };
            return (net, true);
        }
        let mut r = rng.child("init", 0).rng();
        let mut w: Vec<f64> = (0..n_w).map(|_| r.random_range(-INIT_RANGE..INIT_RANGE)).collect();
        let decay = params.weight_decay;
        let (mut loss, mut grad) = loss_and_gradient(&w, params.hidden, &xs, &ys, decay);
        let mut step: f64 = 1.0;
        let mut converged = false;
        let mut trial = vec![0.0; w.len()];
        for _ in 0..params.max_iter {
            let g2: f64 = grad.iter().map(|g| g * g).sum();
            if g2.sqrt() <= GRAD_TOL {
                converged = true;
                break;
            }
            step = (step * 2.0).min(1e3);
            let mut accepted = false;
            while step > 1e-16 {
                for ((t, a), g) in trial.iter_mut().zip(&w).zip(&grad) {
                    *t = a - step * g;
                }
                let (l, g) = loss_and_gradient(&trial, params.hidden, &xs, &ys, decay);
                if l <= loss - ARMIJO * step * g2 {
                    std::mem::swap(&mut w, &mut trial);
                    loss = l;
                    grad = g;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        let net =
            NeuralNet { hidden: params.hidden, n_inputs: x.ncols(), weights: w, x_center, x_scale, y_center, y_scale };
        (net, converged)
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        let xs = standardize(x, &self.x_center, &self.x_scale);
        let mut act = vec![0.0; self.hidden];
        (0..xs.nrows())
            .map(|i| self.y_center + self.y_scale * forward(&self.weights, self.hidden, xs.row(i), &mut act))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_matches_finite_differences() {
        let mut r = RngStream::new(3).rng();
        let rows: Vec<Vec<f64>> = (0..20).map(|_| vec![r.random_range(-2.0..2.0), r.random_range(-2.0..2.0)]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let y: Vec<f64> = rows.iter().map(|v| (v[0] * v[1]).sin()).collect();
        let w: Vec<f64> = (0..n_weights(2, 2)).map(|_| r.random_range(-1.0..1.0)).collect();
        let (_, g) = loss_and_gradient(&w, 2, &x, &y, 0.01);
        let h = 1e-5;
        for k in 0..w.len() {
            let mut up = w.clone();
            let mut dn = w.clone();
            up[k] += h;
            dn[k] -= h;
            let fd =
                (loss_and_gradient(&up, 2, &x, &y, 0.01).0 - loss_and_gradient(&dn, 2, &x, &y, 0.01).0) / (2.0 * h);
            let rel = (fd - g[k]).abs() / fd.abs().max(g[k].abs()).max(1e-8);
            assert!(rel <= 1e-4, "weight {k}: analytic {} fd {fd}", g[k]);
        }
    }

    #[test]
    fn learns_a_smooth_curve() {
        let rows: Vec<Vec<f64>> = (0..60).map(|i| vec![i as f64 / 10.0 - 3.0]).collect();
        let y: Vec<f64> = rows.iter().map(|v| v[0].tanh() * 2.0).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let p = NnetParams { hidden: 3, max_iter: 2000, weight_decay: 0.0 };
        let (net, _) = NeuralNet::fit(&x, &y, &p, &RngStream::new(1));
        let mse = net.predict(&x).iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / 60.0;
        assert!(mse < 0.05, "{mse}");
    }

    #[test]
    fn constant_response() {
        let x = Matrix::from_rows(&(0..10).map(|i| vec![i as f64]).collect::<Vec<_>>()).unwrap();
        let y = vec![4.0; 10];
        let (net, _) =
            NeuralNet::fit(&x, &y, &NnetParams { hidden: 2, max_iter: 50, weight_decay: 0.1 }, &RngStream::new(0));
        assert!(net.predict(&x).iter().all(|&v| v == 4.0));
    }
}
