//! Shared inputs for the criterion benchmarks.

use superlearner::{sim, Dataset, Matrix, RngStream};

/// Deterministic n × m prediction matrix with correlated columns and a response.
pub fn prediction_matrix(n: usize, m: usize, seed: u64) -> (Matrix, Vec<f64>) {
    let d = sim::generate(2, n, &RngStream::new(seed)).expect("simulation");
    let y = d.y().to_vec();
    let mut z = Matrix::zeros(n, m);
    for i in 0..n {
        let x = d.x().get(i, 0);
        for j in 0..m {
            let f = (j + 1) as f64;
            z.set(i, j, sim::conditional_mean(2, x).expect("sim 2") * (1.0 - 0.05 * f) + (f * x).sin());
        }
    }
    (z, y)
}

pub fn sim_data(sim_id: u8, n: usize, seed: u64) -> Dataset {
    sim::generate(sim_id, n, &RngStream::new(seed)).expect("simulation")
}
