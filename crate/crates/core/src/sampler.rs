//! STMALA chains: full updates, block updates, and the chain driver.

use ndarray::Axis;
use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::proposal::{
    drift, drift_rows, log_q, log_q_rows, perturb_and_threshold, ProposalParams,
};
use crate::rjmcmc::{rjmcmc_step, RjParams};
use crate::rng::stream_rng;
use crate::sparse::{DenseMatrix, SparseState};
use crate::target::TargetDensity;
use crate::trace::ChainTrace;

/// Current point of a chain with its cached `log pi` and (for full updates) drift.
#[derive(Clone, Debug)]
pub struct ChainState {
    x: DenseMatrix,
    log_pi: f64,
    drift: Option<DenseMatrix>,
}

impl ChainState {
    pub fn new<T: TargetDensity + ?Sized>(target: &T, x: DenseMatrix) -> Result<Self> {
        target.check_shape(&x)?;
        let log_pi = target.log_pi_dense(&x);
        Ok(Self {
            x,
            log_pi,
            drift: None,
        })
    }

    pub fn zeros<T: TargetDensity + ?Sized>(target: &T) -> Self {
        let (p, t) = target.dims();
        Self::new(target, DenseMatrix::zeros((p, t))).expect("zero matrix has the target's shape")
    }

    pub fn x(&self) -> &DenseMatrix {
        &self.x
    }

    pub fn log_pi(&self) -> f64 {
        self.log_pi
    }

    pub fn sparse(&self) -> SparseState {
        SparseState::from_dense(&self.x)
    }

    pub(crate) fn replace(&mut self, x: DenseMatrix, log_pi: f64, drift: Option<DenseMatrix>) {
        self.x = x;
        self.log_pi = log_pi;
        self.drift = drift;
    }
}

/// `log pi(z) + log q(z, x) - log pi(x) - log q(x, z)`, unclamped.
pub fn log_accept_ratio<T: TargetDensity + ?Sized>(
    target: &T,
    params: &ProposalParams,
    x: &SparseState,
    z: &SparseState,
    mu_x: &DenseMatrix,
    mu_z: &DenseMatrix,
) -> Result<f64> {
    let forward = log_q(params, mu_x, z)?;
    let reverse = log_q(params, mu_z, x)?;
    combine(
        target.log_pi_unnorm(z),
        target.log_pi_unnorm(x),
        forward,
        reverse,
    )
}

fn combine(lp_z: f64, lp_x: f64, forward: f64, reverse: f64) -> Result<f64> {
    if forward == f64::NEG_INFINITY {
        return Err(Error::DegenerateProposal);
    }
    let ratio = (lp_z - lp_x) + (reverse - forward);
    if ratio.is_nan() {
        return Err(Error::NanRatio);
    }
    Ok(ratio)
}

/// `log U < min(0, ratio)` with `U` uniform on the open interval `(0, 1)`.
pub(crate) fn accept<R: Rng + ?Sized>(log_ratio: f64, rng: &mut R) -> bool {
    let u: f64 = rng.random::<f64>();
    let u = if u == 0.0 { f64::MIN_POSITIVE } else { u };
    u.ln() < log_ratio.min(0.0)
}

/// One full-update STMALA iteration.
pub fn stmala_step<T: TargetDensity + ?Sized, R: Rng + ?Sized>(
    target: &T,
    params: &ProposalParams,
    state: &mut ChainState,
    rng: &mut R,
) -> Result<bool> {
    let mu_x = match state.drift.take() {
        Some(mu) => mu,
        None => drift(target, params, &state.x)?,
    };
    let z = perturb_and_threshold(params, &mu_x, rng);
    let forward = log_q_rows(params, &mu_x, &z);
    let lp_z = target.log_pi_dense(&z);
    let mu_z = drift(target, params, &z)?;
    let reverse = log_q_rows(params, &mu_z, &state.x);
    let ratio = combine(lp_z, state.log_pi, forward, reverse)?;
    if accept(ratio, rng) {
        state.replace(z, lp_z, Some(mu_z));
        Ok(true)
    } else {
        state.drift = Some(mu_x);
        Ok(false)
    }
}

/// Outcome of a block update.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockStep {
    pub accepted: bool,
    /// Updated rows, increasing.
    pub block: Vec<usize>,
}

/// Uniform `eta`-subset of `0..p` (partial Fisher-Yates), sorted.
pub fn sample_block<R: Rng + ?Sized>(p: usize, eta: usize, rng: &mut R) -> Vec<usize> {
    let mut b = index::sample(rng, p, eta).into_vec();
    b.sort_unstable();
    b
}

/// One block STMALA iteration updating `eta` uniformly chosen rows.
pub fn block_stmala_step<T: TargetDensity + ?Sized, R: Rng + ?Sized>(
    target: &T,
    params: &ProposalParams,
    eta: usize,
    state: &mut ChainState,
    rng: &mut R,
) -> Result<BlockStep> {
    let (p, _) = target.dims();
    if eta == 0 || eta > p {
        return Err(Error::InvalidParameter(format!(
            "block size {eta} outside 1..={p}"
        )));
    }
    let block = sample_block(p, eta, rng);
    let mu_b = drift_rows(target, params, &state.x, &block)?;
    let z_b = perturb_and_threshold(params, &mu_b, rng);
    let forward = log_q_rows(params, &mu_b, &z_b);
    let mut z = state.x.clone();
    for (k, &i) in block.iter().enumerate() {
        z.row_mut(i).assign(&z_b.row(k));
    }
    let lp_z = target.log_pi_dense(&z);
    let mu_zb = drift_rows(target, params, &z, &block)?;
    let x_b = state.x.select(Axis(0), &block);
    let reverse = log_q_rows(params, &mu_zb, &x_b);
    let ratio = combine(lp_z, state.log_pi, forward, reverse)?;
    let accepted = accept(ratio, rng);
    if accepted {
        state.replace(z, lp_z, None);
    }
    Ok(BlockStep { accepted, block })
}

/// Transition kernel driven by [`run_chain`].
#[derive(Clone, Debug, PartialEq)]
pub enum Kernel {
    /// `block_size == P` gives the full update.
    Stmala {
        params: ProposalParams,
        block_size: usize,
    },
    Rjmcmc(RjParams),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub stream: u64,
    pub kernel: Kernel,
    /// Starting point; `None` is the null regressor.
    pub initial: Option<DenseMatrix>,
}

impl ChainConfig {
    pub fn new(iterations: usize, kernel: Kernel) -> Self {
        Self {
            iterations,
            burn_in: 0,
            thin: 1,
            seed: 0,
            stream: 0,
            kernel,
            initial: None,
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidParameter(
                "iterations must be at least 1".into(),
            ));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::InvalidParameter(format!(
                "burn-in {} must be below the iteration count {}",
                self.burn_in, self.iterations
            )));
        }
        if self.thin == 0 {
            return Err(Error::InvalidParameter("thin must be positive".into()));
        }
        match &self.kernel {
            Kernel::Stmala { params, block_size } => {
                params.validate()?;
                if *block_size == 0 || *block_size > p {
                    return Err(Error::InvalidParameter(format!(
                        "block size {block_size} outside 1..={p}"
                    )));
                }
            }
            Kernel::Rjmcmc(rj) => rj.validate()?,
        }
        Ok(())
    }
}

/// Runs a chain on the stream `(config.seed, config.stream)`.
pub fn run_chain<T: TargetDensity + ?Sized>(
    target: &T,
    config: &ChainConfig,
) -> Result<ChainTrace> {
    let mut rng = stream_rng(config.seed, config.stream);
    run_chain_with_rng(target, config, &mut rng)
}

/// Records iterations `n` in `B+1..=N` with `(n - B) % thin == 0`.
pub fn run_chain_with_rng<T: TargetDensity + ?Sized, R: Rng + ?Sized>(
    target: &T,
    config: &ChainConfig,
    rng: &mut R,
) -> Result<ChainTrace> {
    let (p, t) = target.dims();
    config.validate(p)?;
    let mut state = match &config.initial {
        Some(x0) => ChainState::new(target, x0.clone())?,
        None => ChainState::zeros(target),
    };
    let mut trace = ChainTrace::new(p, t);
    for n in 1..=config.iterations {
        let accepted = match &config.kernel {
            Kernel::Stmala { params, block_size } if *block_size == p => {
                stmala_step(target, params, &mut state, rng)?
            }
            Kernel::Stmala { params, block_size } => {
                block_stmala_step(target, params, *block_size, &mut state, rng)?.accepted
            }
            Kernel::Rjmcmc(rj) => rjmcmc_step(target, rj, &mut state, rng)?.accepted,
        };
        trace.count_iteration(accepted);
        if n > config.burn_in && (n - config.burn_in).is_multiple_of(config.thin) {
            trace.push(n, accepted, state.log_pi, &state.x);
        }
    }
    Ok(trace)
}
