//! State features describing the labeled set at one iteration.

use crate::error::{Error, Result};
use crate::geometry::euclidean;

pub const STATE_DIM: usize = 5;

/// Version tag written to run metadata whenever the feature layout changes.
pub const STATE_FEATURES_VERSION: &str = "sac-state-v1";

/// `[cv ratio, progress, label mean, label std, mean nearest-neighbour distance]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector([f64; STATE_DIM]);

impl StateVector {
    pub fn new(values: [f64; STATE_DIM]) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64; STATE_DIM] {
        &self.0
    }

    pub fn cv_ratio(&self) -> f64 {
        self.0[0]
    }

    pub fn progress(&self) -> f64 {
        self.0[1]
    }
}

/// `labeled_features` is row-major with `p` columns.
pub fn build_state(
    cv_rmse_now: f64,
    cv_rmse_initial: f64,
    t: usize,
    horizon: usize,
    labeled_targets: &[f64],
    labeled_features: &[f64],
    p: usize,
) -> Result<StateVector> {
    if !(cv_rmse_initial > 0.0) || !cv_rmse_initial.is_finite() || !cv_rmse_now.is_finite() {
        return Err(Error::invalid(
            "CV RMSE values must be finite with a positive initial value",
        ));
    }
    if horizon == 0 || t > horizon {
        return Err(Error::invalid(format!(
            "iteration {t} outside horizon {horizon}"
        )));
    }
    let k = labeled_targets.len();
    if k < 2 {
        return Err(Error::invalid("state needs at least 2 labeled points"));
    }
    if p == 0 || labeled_features.len() != k * p {
        return Err(Error::DimensionMismatch {
            expected: k * p,
            got: labeled_features.len(),
        });
    }
    let mean = labeled_targets.iter().sum::<f64>() / k as f64;
    let var = labeled_targets
        .iter()
        .map(|y| (y - mean).powi(2))
        .sum::<f64>()
        / k as f64;
    let rows: Vec<&[f64]> = labeled_features.chunks(p).collect();
    let nn_total: f64 = rows
        .iter()
        .enumerate()
        .map(|(i, a)| {
            rows.iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, b)| euclidean(a, b))
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    Ok(StateVector([
        cv_rmse_now / cv_rmse_initial,
        t as f64 / horizon as f64,
        mean,
        var.sqrt(),
        nn_total / k as f64,
    ]))
}
