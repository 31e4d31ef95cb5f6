//! Loss functions and their partial derivatives in the prediction argument.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Clamp bound for the binomial deviance: predictions are pinned to
/// [DEVIANCE_CLAMP, 1 - DEVIANCE_CLAMP] before taking logs.
pub const DEVIANCE_CLAMP: f64 = 1e-12;

/// Supported losses. All but `Misclassification` have a derivative
/// `d/db loss(a, b)` available.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    SquareError,
    AbsoluteError,
    BinomialDeviance,
    Misclassification,
}

impl std::fmt::Display for Loss {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Loss::SquareError => "square",
            Loss::AbsoluteError => "abs",
            Loss::BinomialDeviance => "deviance",
            Loss::Misclassification => "misclassification",
        };
        write!(f, "{s}")
    }
}

impl Loss {
    /// Evaluate the loss of prediction `b` against observed `a`.
    pub fn eval<F: Real>(self, a: F, b: F) -> F {
        match self {
            Loss::SquareError => {
                let d = a - b;
                d * d
            }
            Loss::AbsoluteError => (a - b).abs(),
            Loss::BinomialDeviance => {
                let b = clamp_unit(b);
                -(a * b.ln()) - (F::one() - a) * (F::one() - b).ln()
            }
            Loss::Misclassification => {
                if a == b {
                    F::zero()
                } else {
                    F::one()
                }
            }
        }
    }

    /// Partial derivative of the loss with respect to the prediction.
    ///
    /// `sign(0)` is taken as 0 for the absolute error, so the derivative is
    /// a bounded almost-everywhere choice at the kink.
    pub fn derivative<F: Real>(self, a: F, b: F) -> Result<F> {
        match self {
            Loss::SquareError => Ok(-(a - b) - (a - b)),
            Loss::AbsoluteError => Ok(-sign_zero(a - b)),
            Loss::BinomialDeviance => {
                let b = clamp_unit(b);
                Ok(-(a / b) + (F::one() - a) / (F::one() - b))
            }
            Loss::Misclassification => Err(Error::NonDifferentiableLoss(
                "misclassification loss has no derivative; use the classification \
                 influence variant instead"
                    .into(),
            )),
        }
    }

    /// True when OOB aggregation should threshold votes at 1/2 before the
    /// loss is evaluated (two-class majority vote).
    pub fn thresholds_votes(self) -> bool {
        matches!(self, Loss::Misclassification)
    }

    /// Check that values are valid for this loss before clamping is applied.
    pub fn validate_prediction<F: Real>(self, b: F) -> Result<()> {
        if self == Loss::BinomialDeviance && (b < F::zero() || b > F::one()) {
            return Err(Error::Input(format!(
                "binomial deviance needs predictions in [0, 1], got {b}"
            )));
        }
        Ok(())
    }
}

fn clamp_unit<F: Real>(b: F) -> F {
    let lo = F::from_f64_lossy(DEVIANCE_CLAMP);
    let hi = F::one() - lo;
    b.max(lo).min(hi)
}

fn sign_zero<F: Real>(x: F) -> F {
    if x > F::zero() {
        F::one()
    } else if x < F::zero() {
        -F::one()
    } else {
        F::zero()
    }
}
