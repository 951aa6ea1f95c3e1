//! Super learner regression.
//!
//! A library of level-0 regression learners is trained under V-fold
//! cross-validation; the resulting out-of-fold prediction matrix is combined by
//! convex weights that minimize cross-validated squared error, and every learner
//! is refit on the full sample for prediction.
//!
//! ```no_run
//! use superlearner::{library, Dataset, Matrix, RngStream, SuperLearner};
//!
//! let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]).unwrap();
//! let data = Dataset::unnamed(x, vec![0.1, 0.9, 2.1, 2.9]).unwrap();
//! let model = SuperLearner::new(library::simulation_library())
//!     .folds(2)
//!     .fit(&data, &RngStream::new(42))
//!     .unwrap();
//! println!("{:?}", model.cv_risk_table());
//! ```

pub mod benchmark;
pub mod cv;
pub mod data;
pub mod error;
pub mod folds;
pub mod learners;
pub mod library;
mod linalg;
pub mod loss;
pub mod meta;
pub mod metrics;
pub mod report;
pub mod rng;
pub mod sim;

pub use cv::{
    cross_validated_predictions, cv_risk_table, sl_predict, super_learn, CvPredictionMatrix, Execution, FitCounter,
    RiskRow, SuperLearner, SuperLearnerModel,
};
pub use data::{make_dataset, Dataset, Matrix};
pub use error::{Error, Result};
pub use folds::{make_folds, FoldAssignment};
pub use learners::{fit, predict, FittedLearner, LearnerKind, LearnerSpec};
pub use loss::{mean_loss, LossSpec};
pub use meta::{combine, discrete_select, solve_simplex_ls, MetaSolver, SimplexWeights};
pub use metrics::{MetricTable, Summary};
pub use rng::RngStream;
