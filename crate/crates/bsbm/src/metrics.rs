//! Loss computation and recovery classification.
//!
//! The loss between an estimate and the truth is twice the number of
//! disagreeing positions, minimized over a global sign flip: recovering the
//! negated label vector is as good as recovering the labels themselves.

use crate::model::{LabelVector, ModelError};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("alpha must lie in (0, 1) (got {0})")]
    AlphaRange(f64),
}

/// `r(eta, eta_hat) = min over nu in {-1, +1} of |eta_hat - nu eta|`: twice
/// the mismatch count after the optimal flip, an even integer in `[0, n1]`.
pub fn loss_r(eta: &LabelVector, eta_hat: &LabelVector) -> Result<usize, MetricsError> {
    let mismatches = eta.mismatches(eta_hat)?;
    Ok(2 * mismatches.min(eta.len() - mismatches))
}

/// Per-instance recovery summary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RecoveryClass {
    pub loss_r: usize,
    /// Misclassified fraction after the optimal flip, `loss_r / (2 n1)`,
    /// always in `[0, 1/2]`.
    pub fraction: f64,
    pub exact: bool,
}

pub fn recovery_class(
    eta: &LabelVector,
    eta_hat: &LabelVector,
) -> Result<RecoveryClass, MetricsError> {
    let loss = loss_r(eta, eta_hat)?;
    Ok(RecoveryClass {
        loss_r: loss,
        fraction: loss as f64 / (2.0 * eta.len() as f64),
        exact: loss == 0,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecoveryBand {
    Exact,
    WithinAlpha,
    AboveAlpha,
}

/// Classifies a loss value against the threshold fraction `alpha`.
pub fn classify(loss: usize, n1: usize, alpha: f64) -> Result<RecoveryBand, MetricsError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(MetricsError::AlphaRange(alpha));
    }
    if loss == 0 {
        return Ok(RecoveryBand::Exact);
    }
    if (loss as f64) < alpha * n1 as f64 {
        Ok(RecoveryBand::WithinAlpha)
    } else {
        Ok(RecoveryBand::AboveAlpha)
    }
}
