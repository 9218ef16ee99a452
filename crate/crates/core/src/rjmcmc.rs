//! Reversible-jump baseline with add, delete, swap and stay moves.

use std::f64::consts::PI;

use ndarray::Array1;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::{accept, ChainState};
use crate::sparse::{mask_of, ModelMask};
use crate::target::TargetDensity;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RjParams {
    pub sigma_rj: f64,
}

impl RjParams {
    pub fn new(sigma_rj: f64) -> Result<Self> {
        let p = Self { sigma_rj };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_rj > 0.0 && self.sigma_rj.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma_rj must be positive, got {}",
                self.sigma_rj
            )));
        }
        Ok(())
    }

    /// `log N_T(u; 0, sigma_rj^2 I)`.
    pub fn log_q(&self, u: &[f64]) -> f64 {
        let s2 = self.sigma_rj * self.sigma_rj;
        let sq: f64 = u.iter().map(|v| v * v).sum();
        -0.5 * u.len() as f64 * (2.0 * PI * s2).ln() - sq / (2.0 * s2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Move {
    Add,
    Delete,
    Swap,
    Stay,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MoveProposal {
    pub kind: Move,
    pub removed: Option<usize>,
    pub added: Option<usize>,
    pub next: ModelMask,
}

fn pick<R: Rng + ?Sized>(v: &[usize], rng: &mut R) -> usize {
    v[rng.random_range(0..v.len())]
}

fn strategy_log_prob(k: usize, p: usize, kind: Move) -> f64 {
    if k == 0 {
        if kind == Move::Add {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    } else if k == p {
        if kind == Move::Delete {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    } else {
        -(4f64.ln())
    }
}

fn reachable(k: usize, p: usize, kind: Move) -> usize {
    match kind {
        Move::Add => p - k,
        Move::Delete => k,
        Move::Swap => k * (p - k),
        Move::Stay => 1,
    }
}

pub fn sample_move<R: Rng + ?Sized>(m: &ModelMask, rng: &mut R) -> MoveProposal {
    let (p, k) = (m.len(), m.count());
    let kind = if k == 0 {
        Move::Add
    } else if k == p {
        Move::Delete
    } else {
        [Move::Add, Move::Delete, Move::Swap, Move::Stay][rng.random_range(0..4)]
    };
    let mut next = m.clone();
    let (mut removed, mut added) = (None, None);
    if matches!(kind, Move::Delete | Move::Swap) {
        let i = pick(&m.active_indices(), rng);
        next.set(i, false);
        removed = Some(i);
    }
    if matches!(kind, Move::Add | Move::Swap) {
        let i = pick(&m.inactive_indices(), rng);
        next.set(i, true);
        added = Some(i);
    }
    MoveProposal {
        kind,
        removed,
        added,
        next,
    }
}

/// Classifies the one-step transition `m -> m_next`.
pub fn classify(m: &ModelMask, m_next: &ModelMask) -> Result<Move> {
    if m.len() != m_next.len() {
        return Err(Error::Shape(format!(
            "masks of length {} and {}",
            m.len(),
            m_next.len()
        )));
    }
    let gained = m
        .bits()
        .iter()
        .zip(m_next.bits())
        .filter(|(a, b)| !**a && **b)
        .count();
    let lost = m
        .bits()
        .iter()
        .zip(m_next.bits())
        .filter(|(a, b)| **a && !**b)
        .count();
    let kind = match (gained, lost) {
        (0, 0) => Move::Stay,
        (1, 0) => Move::Add,
        (0, 1) => Move::Delete,
        (1, 1) => Move::Swap,
        _ => return Err(unreachable(m, m_next)),
    };
    if strategy_log_prob(m.count(), m.len(), kind) == f64::NEG_INFINITY {
        return Err(unreachable(m, m_next));
    }
    Ok(kind)
}

fn unreachable(m: &ModelMask, m_next: &ModelMask) -> Error {
    Error::UnreachableMove {
        from: m.to_bitstring(),
        to: m_next.to_bitstring(),
    }
}

/// `log j(m, m_next)`.
pub fn log_j(m: &ModelMask, m_next: &ModelMask) -> Result<f64> {
    let kind = classify(m, m_next)?;
    let (k, p) = (m.count(), m.len());
    Ok(strategy_log_prob(k, p, kind) - (reachable(k, p, kind) as f64).ln())
}

#[derive(Clone, Debug, PartialEq)]
pub struct RjStep {
    pub accepted: bool,
    pub kind: Move,
}

fn draw_row<R: Rng + ?Sized>(params: &RjParams, t: usize, rng: &mut R) -> Array1<f64> {
    loop {
        let u: Array1<f64> = (0..t)
            .map(|_| params.sigma_rj * rng.sample::<f64, _>(StandardNormal))
            .collect();
        if u.iter().any(|&v| v != 0.0) {
            return u;
        }
    }
}

/// One reversible-jump iteration.
pub fn rjmcmc_step<T: TargetDensity + ?Sized, R: Rng + ?Sized>(
    target: &T,
    params: &RjParams,
    state: &mut ChainState,
    rng: &mut R,
) -> Result<RjStep> {
    let (_, t) = target.dims();
    let m = mask_of(state.x());
    let mv = sample_move(&m, rng);
    let mut x = state.x().clone();
    let mut log_q_terms = 0.0;
    if let Some(k) = mv.removed {
        let row = x.row(k).to_vec();
        log_q_terms += params.log_q(&row);
        x.row_mut(k).fill(0.0);
    }
    if let Some(l) = mv.added {
        let u = draw_row(params, t, rng);
        log_q_terms -= params.log_q(u.as_slice().expect("owned vector is contiguous"));
        x.row_mut(l).assign(&u);
    }
    if mv.kind == Move::Stay {
        for i in m.active_indices() {
            loop {
                let step = draw_row(params, t, rng);
                let moved = &x.row(i) + &step;
                if moved.iter().any(|&v| v != 0.0) {
                    x.row_mut(i).assign(&moved);
                    break;
                }
            }
        }
    }
    let lp_new = target.log_pi_dense(&x);
    let ratio = lp_new - state.log_pi() + log_j(&mv.next, &m)? - log_j(&m, &mv.next)? + log_q_terms;
    if ratio.is_nan() {
        return Err(Error::NanRatio);
    }
    let accepted = accept(ratio, rng);
    if accepted {
        state.replace(x, lp_new, None);
    }
    Ok(RjStep {
        accepted,
        kind: mv.kind,
    })
}
