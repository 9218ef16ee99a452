//! Row-wise shrinkage-thresholding operators.
//!
//! Every operator sends a row `u_i` with `||u_i||_2 <= gamma` to zero and maps
//! the other rows to positive multiples of themselves.

use serde::{Deserialize, Serialize};

use crate::sparse::{norm_sq, DenseMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    /// Proximal map of `gamma ||.||_{2,1}` (group soft thresholding).
    Prox,
    /// Keeps rows whose norm exceeds `gamma` untouched.
    HardThreshold,
    /// Soft thresholding with vanishing shrinkage (empirical Wiener).
    Stvs,
}

impl OperatorKind {
    pub const ALL: [OperatorKind; 3] = [
        OperatorKind::Prox,
        OperatorKind::HardThreshold,
        OperatorKind::Stvs,
    ];

    /// Multiplier applied to a row of squared norm `n2`; zero means the row is killed.
    pub fn row_scale(self, gamma: f64, n2: f64) -> f64 {
        let n = n2.sqrt();
        if n <= gamma {
            return 0.0;
        }
        match self {
            OperatorKind::Prox => 1.0 - gamma / n,
            OperatorKind::HardThreshold => 1.0,
            OperatorKind::Stvs => (1.0 - gamma * gamma / n2).max(0.0),
        }
    }

    /// Applies the operator to one row in place; returns whether it survived.
    pub fn apply_row(self, gamma: f64, row: &mut [f64]) -> bool {
        let s = self.row_scale(gamma, norm_sq(row));
        if s == 0.0 {
            row.iter_mut().for_each(|v| *v = 0.0);
            false
        } else {
            row.iter_mut().for_each(|v| *v *= s);
            true
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            OperatorKind::Prox => "prox",
            OperatorKind::HardThreshold => "hard_threshold",
            OperatorKind::Stvs => "stvs",
        }
    }
}

pub fn apply_operator(kind: OperatorKind, gamma: f64, u: &DenseMatrix) -> DenseMatrix {
    assert!(gamma > 0.0, "threshold must be positive");
    let mut out = u.to_owned();
    for mut row in out.rows_mut() {
        let s = kind.row_scale(gamma, row.iter().map(|v| v * v).sum());
        row.mapv_inplace(|v| if s == 0.0 { 0.0 } else { v * s });
    }
    out
}

/// `1 + 2u / (1 + sqrt(1 + 4u))`: for an STVS output row `z`,
/// `stvs_g(gamma²/||z||²) z` is its preimage.
pub fn stvs_g(u: f64) -> f64 {
    1.0 + 2.0 * u / (1.0 + (1.0 + 4.0 * u).sqrt())
}

/// `1 / sqrt(1 + 4u)`, the derivative of [`stvs_g`].
pub fn stvs_gtilde(u: f64) -> f64 {
    1.0 / (1.0 + 4.0 * u).sqrt()
}

/// The non-convex penalty whose proximal map (with unit quadratic weight) is
/// the STVS operator.
pub fn stvs_penalty(gamma: f64, x: &[f64]) -> f64 {
    let s = (norm_sq(x).sqrt() / (2.0 * gamma)).asinh();
    gamma * gamma * (s - 0.5 * (-2.0 * s).exp())
}
