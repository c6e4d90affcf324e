use serde::{Deserialize, Serialize};

use super::DeformError;

/// Covariance used by the local step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotationFit {
    /// Spokes-and-rims edges only.
    #[default]
    EdgeOnly,
    /// Edges plus the Laplacian vector, weighted so the local step minimizes
    /// the full energy for fixed positions.
    Full,
}

/// How `H V' = C` is imposed in the global step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintMode {
    /// Eliminate constrained rows; refactor when the constrained set changes.
    #[default]
    Substitution,
    /// Regularized KKT with a fixed factorization and incremental `Q`.
    KktUpdating,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initialization {
    /// Rest positions with handles snapped to their targets.
    OriginalMesh,
    /// Constrained solve of `L V' = L V`.
    Poisson,
    /// Constrained solve of `L M^-1 L V' = L M^-1 L V`.
    #[default]
    BiLaplacian,
    /// Positions from an earlier solve, handles snapped.
    Previous,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeformParams {
    pub lambda: f64,
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Stop once the largest per-vertex move, divided by the rest bounding
    /// box diagonal, falls below this.
    pub tolerance: f64,
    pub rotation_fit: RotationFit,
    pub constraint_mode: ConstraintMode,
    pub init: Initialization,
}

impl Default for DeformParams {
    fn default() -> Self {
        Self {
            lambda: 0.95,
            epsilon: 1e-8,
            max_iterations: 1000,
            tolerance: 1e-4,
            rotation_fit: RotationFit::EdgeOnly,
            constraint_mode: ConstraintMode::Substitution,
            init: Initialization::BiLaplacian,
        }
    }
}

impl DeformParams {
    pub fn with_lambda(lambda: f64) -> Self {
        Self {
            lambda,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), DeformError> {
        if !(0.0..1.0).contains(&self.lambda) {
            return Err(DeformError::InvalidParams(format!(
                "lambda must lie in [0, 1), got {}",
                self.lambda
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(DeformError::InvalidParams(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(DeformError::InvalidParams(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        Ok(())
    }
}
