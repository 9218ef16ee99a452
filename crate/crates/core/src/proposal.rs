//! The shrinkage-thresholding Langevin proposal `Z = Psi(mu(x) + sigma Xi)`
//! and its density with respect to `nu`.
//!
//! Given the drifted point `mu`, rows of the candidate are independent: a row
//! is exactly zero with probability `p(mu_i)` and otherwise has a density on
//! `R^T \ {0}` obtained by inverting the operator on that row.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::atom::{atom_prob_norm_sq, AtomMethod};
use crate::error::{Error, Result};
use crate::operators::{stvs_g, stvs_gtilde, OperatorKind};
use crate::sparse::{norm_sq, DenseMatrix, SparseState};
use crate::target::TargetDensity;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProposalParams {
    pub sigma: f64,
    pub gamma: f64,
    pub kind: OperatorKind,
    /// Gradient truncation radius `D`; `None` means plain Langevin drift.
    pub truncation: Option<f64>,
    pub atom_method: AtomMethod,
}

impl ProposalParams {
    pub fn new(sigma: f64, gamma: f64, kind: OperatorKind) -> Result<Self> {
        let params = Self {
            sigma,
            gamma,
            kind,
            truncation: None,
            atom_method: AtomMethod::Exact,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_truncation(mut self, radius: f64) -> Result<Self> {
        self.truncation = Some(radius);
        self.validate()?;
        Ok(self)
    }

    pub fn with_atom_method(mut self, method: AtomMethod) -> Self {
        self.atom_method = method;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if let Some(d) = self.truncation {
            if !(d > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "truncation radius must be positive, got {d}"
                )));
            }
        }
        Ok(())
    }

    /// `ln p(c)` for a row with `||c||² = c_norm_sq`.
    pub fn log_atom(&self, c_norm_sq: f64, t: usize) -> f64 {
        atom_prob_norm_sq(c_norm_sq, t, self.sigma, self.gamma, self.atom_method).ln()
    }
}

/// `x - (sigma²/2) ∇g`, with `∇g` rescaled to norm at most `D` when truncating.
/// `x` and `grad` are the same rows of the state and of the gradient.
pub fn drift_from_grad(
    params: &ProposalParams,
    x: &DenseMatrix,
    grad: &DenseMatrix,
) -> DenseMatrix {
    let mut step = 0.5 * params.sigma * params.sigma;
    if let Some(d) = params.truncation {
        let gn = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
        step *= d / d.max(gn);
    }
    let mut mu = x.to_owned();
    mu.scaled_add(-step, grad);
    mu
}

pub fn drift<T: TargetDensity + ?Sized>(
    target: &T,
    params: &ProposalParams,
    x: &DenseMatrix,
) -> Result<DenseMatrix> {
    let grad = target.g_grad(x)?;
    Ok(drift_from_grad(params, x, &grad))
}

/// Drift restricted to `rows`, using the block gradient `(∇g(x))_{rows}`.
pub fn drift_rows<T: TargetDensity + ?Sized>(
    target: &T,
    params: &ProposalParams,
    x: &DenseMatrix,
    rows: &[usize],
) -> Result<DenseMatrix> {
    let grad = target.g_grad_rows(x, rows)?;
    let xb = x.select(ndarray::Axis(0), rows);
    Ok(drift_from_grad(params, &xb, &grad))
}

/// Log density of a nonzero proposed row `z` around the drifted row `c`.
/// Returns `-inf` outside the support (hard thresholding with `||z|| <= gamma`).
pub fn log_row_density(kind: OperatorKind, sigma: f64, gamma: f64, c: &[f64], z: &[f64]) -> f64 {
    let t = z.len() as f64;
    let s2 = sigma * sigma;
    let zn2 = norm_sq(z);
    let zn = zn2.sqrt();
    let log_norm = -0.5 * t * (2.0 * PI * s2).ln();
    let dist2 = |scale: f64| -> f64 {
        z.iter()
            .zip(c)
            .map(|(zi, ci)| {
                let d = scale * zi - ci;
                d * d
            })
            .sum()
    };
    match kind {
        OperatorKind::Prox => {
            let scale = 1.0 + gamma / zn;
            log_norm - dist2(scale) / (2.0 * s2) + (t - 1.0) * (gamma / zn).ln_1p()
        }
        OperatorKind::HardThreshold => {
            if zn > gamma {
                log_norm - dist2(1.0) / (2.0 * s2)
            } else {
                f64::NEG_INFINITY
            }
        }
        OperatorKind::Stvs => {
            let u = gamma * gamma / zn2;
            let scale = stvs_g(u);
            log_norm + t * scale.ln() + stvs_gtilde(u).ln() - dist2(scale) / (2.0 * s2)
        }
    }
}

/// Contribution of one row to `log q`: atom mass for a zero row, density otherwise.
pub fn log_row_term(params: &ProposalParams, c: &[f64], z: &[f64]) -> f64 {
    if z.iter().all(|&v| v == 0.0) {
        params.log_atom(norm_sq(c), c.len())
    } else {
        log_row_density(params.kind, params.sigma, params.gamma, c, z)
    }
}

/// `log q` over matching rows of `mu` (drifted rows) and `z` (proposed rows).
pub fn log_q_rows(params: &ProposalParams, mu: &DenseMatrix, z: &DenseMatrix) -> f64 {
    debug_assert_eq!(mu.dim(), z.dim());
    mu.rows()
        .into_iter()
        .zip(z.rows())
        .map(|(c, zr)| match (c.as_slice(), zr.as_slice()) {
            (Some(c), Some(zr)) => log_row_term(params, c, zr),
            _ => log_row_term(params, &c.to_vec(), &zr.to_vec()),
        })
        .sum()
}

/// `log q(x, z)` where `from_mu` is the drift at `x`.
pub fn log_q(params: &ProposalParams, from_mu: &DenseMatrix, z: &SparseState) -> Result<f64> {
    if from_mu.dim() != (z.p(), z.t()) {
        return Err(Error::Shape(format!(
            "drift is {}x{} but the candidate is {}x{}",
            from_mu.nrows(),
            from_mu.ncols(),
            z.p(),
            z.t()
        )));
    }
    Ok(log_q_rows(params, from_mu, &z.to_dense()))
}

/// `Psi(mu + sigma Xi)` with `Xi` i.i.d. standard normal, drawn row-major.
pub fn perturb_and_threshold<R: Rng + ?Sized>(
    params: &ProposalParams,
    mu: &DenseMatrix,
    rng: &mut R,
) -> DenseMatrix {
    let mut z = Array2::zeros(mu.dim());
    for (mut zr, mr) in z.rows_mut().into_iter().zip(mu.rows()) {
        for (zv, &mv) in zr.iter_mut().zip(mr.iter()) {
            let xi: f64 = rng.sample(StandardNormal);
            *zv = mv + params.sigma * xi;
        }
        let row = zr
            .as_slice_mut()
            .expect("rows of a standard layout matrix are contiguous");
        params.kind.apply_row(params.gamma, row);
    }
    z
}

/// Draws a candidate from `x`; also returns the drift at `x` for the acceptance ratio.
pub fn sample_candidate<T: TargetDensity + ?Sized, R: Rng + ?Sized>(
    target: &T,
    params: &ProposalParams,
    x: &SparseState,
    rng: &mut R,
) -> Result<(SparseState, DenseMatrix)> {
    let xd = x.to_dense();
    let mu = drift(target, params, &xd)?;
    let z = perturb_and_threshold(params, &mu, rng);
    Ok((SparseState::from_dense(&z), mu))
}
