//! Shrinkage-thresholding Metropolis-adjusted Langevin samplers for sparse
//! regression, with a reversible-jump baseline and an exact model-posterior
//! oracle for small problems.

pub mod atom;
pub mod error;
pub mod operators;
pub mod oracle;
pub mod proposal;
pub mod quadrature;
pub mod rjmcmc;
pub mod rng;
pub mod sampler;
pub mod sparse;
pub mod target;
pub mod trace;

pub use error::{Error, Result};
pub use operators::OperatorKind;
pub use proposal::ProposalParams;
pub use sampler::{run_chain, ChainConfig, Kernel};
pub use sparse::{DenseMatrix, ModelMask, SparseState};
pub use target::{
    L21RegressionTarget, ModelPrior, RidgedExampleTarget, SpikeSlabTarget, TargetDensity,
};
pub use trace::ChainTrace;
