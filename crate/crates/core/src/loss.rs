use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Loss used for cross-validated risk. Only squared error is supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossSpec {
    #[default]
    SquaredError,
}

/// N⁻¹ Σ (yᵢ − ŷᵢ)².
pub fn mean_loss(loss: LossSpec, y: &[f64], yhat: &[f64]) -> Result<f64> {
    if y.len() != yhat.len() {
        return Err(Error::LengthMismatch(format!("{} responses vs {} predictions", y.len(), yhat.len())));
    }
    if y.is_empty() {
        return Err(Error::Empty("loss over zero observations".into()));
    }
    match loss {
        LossSpec::SquaredError => {
            let sse: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
            Ok(sse / y.len() as f64)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SE: LossSpec = LossSpec::SquaredError;

    #[test]
    fn worked_examples() {
        assert_eq!(mean_loss(SE, &[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mean_loss(SE, &[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(mean_loss(SE, &[0.0, 2.0], &[1.0, 1.0]).unwrap(), 1.0);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(mean_loss(SE, &[1.0], &[1.0, 2.0]), Err(Error::LengthMismatch(_))));
    }

    proptest! {
        #[test]
        fn zero_iff_equal(y in prop::collection::vec(-1e3f64..1e3, 1..20), k in 0usize..20, d in 1e-3f64..10.0) {
            prop_assert_eq!(mean_loss(SE, &y, &y).unwrap(), 0.0);
            let mut yhat = y.clone();
            let k = k % y.len();
            yhat[k] += d;
            prop_assert!(mean_loss(SE, &y, &yhat).unwrap() > 0.0);
        }
    }
}
