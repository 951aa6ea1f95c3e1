//! Preset learner libraries.

use crate::learners::{LearnerKind as K, LearnerSpec};

/// Label of the main-terms linear model; the reference for relative MSE.
pub const REFERENCE_LABEL: &str = "ols";

fn spec(kind: K, label: &str) -> LearnerSpec {
    LearnerSpec::new(kind, label)
}

/// Compact library used by the simulation acceptance runs.
pub fn simulation_library() -> Vec<LearnerSpec> {
    vec![
        spec(K::Ols, "ols"),
        spec(K::OlsInteractions, "ols_intx"),
        spec(K::GamSpline, "gam_df2").with("df", 2.0),
        spec(K::GamSpline, "gam_df3").with("df", 3.0),
        spec(K::GamSpline, "gam_df4").with("df", 4.0),
        spec(K::Tree, "tree"),
        spec(K::Bagging, "bagging_cp0.01").with("cp", 0.01),
        spec(K::Bagging, "bagging_ms5").with("min_split", 5.0),
        spec(K::Boosting, "boosting"),
        spec(K::Knn, "knn"),
        spec(K::Loess, "loess_0.25").with("span", 0.25),
        spec(K::Loess, "loess_0.5").with("span", 0.5),
        spec(K::Loess, "loess_0.75").with("span", 0.75),
        spec(K::NeuralNet, "nnet_h2").with("hidden", 2.0),
    ]
}

/// Every variant of the simulation library that this crate implements:
/// bagging with cp ∈ {0, 0.01, 0.1} plus a min-split-5 variant, GAM with
/// df ∈ {2, 3, 4}, networks with 2–5 hidden units and loess spans
/// {0.75, 0.5, 0.25, 0.1}.
pub fn full_simulation_library() -> Vec<LearnerSpec> {
    let mut lib = vec![
        spec(K::Ols, "ols"),
        spec(K::OlsInteractions, "ols_intx"),
        spec(K::RandomForest, "rf"),
        spec(K::Bagging, "bagging_cp0").with("cp", 0.0),
        spec(K::Bagging, "bagging_cp0.01").with("cp", 0.01),
        spec(K::Bagging, "bagging_cp0.1").with("cp", 0.1),
        spec(K::Bagging, "bagging_ms5").with("min_split", 5.0),
    ];
    for df in [2.0, 3.0, 4.0] {
        lib.push(spec(K::GamSpline, &format!("gam_df{df}")).with("df", df));
    }
    lib.push(spec(K::Boosting, "boosting"));
    for h in [2.0, 3.0, 4.0, 5.0] {
        lib.push(spec(K::NeuralNet, &format!("nnet_h{h}")).with("hidden", h));
    }
    for span in [0.75, 0.5, 0.25, 0.1] {
        lib.push(spec(K::Loess, &format!("loess_{span}")).with("span", span));
    }
    lib
}

/// Multi-dataset benchmark library: the full simulation library plus
/// stepwise, ridge, lasso and k-nearest neighbours.
pub fn benchmark_library() -> Vec<LearnerSpec> {
    let mut lib = full_simulation_library();
    lib.extend([spec(K::Stepwise, "stepwise"), spec(K::Ridge, "ridge"), spec(K::Lasso, "lasso"), spec(K::Knn, "knn")]);
    lib
}
