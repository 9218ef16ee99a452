//! Long chains on a two-component problem against the enumerated posterior.

use std::collections::HashMap;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use stmala_core::oracle::{enumerate_posterior, ModelPosterior, OracleOptions};
use stmala_core::rjmcmc::RjParams;
use stmala_core::{
    run_chain, ChainConfig, ChainTrace, Kernel, L21RegressionTarget, ModelPrior, OperatorKind,
    ProposalParams,
};

const TAU: f64 = 1.0;
const LAMBDA: f64 = 0.5;
const OMEGA: f64 = 0.3;

fn problem() -> (L21RegressionTarget, ModelPosterior) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 15;
    let g = Array2::from_shape_fn((n, 2), |_| StandardNormal.sample(&mut rng));
    let x = Array2::from_shape_vec((2, 1), vec![0.35, 0.0]).unwrap();
    let noise = Array2::from_shape_fn((n, 1), |_| -> f64 { StandardNormal.sample(&mut rng) });
    let y = g.dot(&x) + noise;
    let opts = OracleOptions {
        mc_samples: 2_000_000,
        seed: 3,
        prune_gap: 50.0,
    };
    let post =
        enumerate_posterior(&y, &g, TAU, LAMBDA, &ModelPrior::Bernoulli(OMEGA), &opts).unwrap();
    let target = L21RegressionTarget::new(y, g, TAU, LAMBDA, ModelPrior::Bernoulli(OMEGA)).unwrap();
    (target, post)
}

fn total_variation(trace: &ChainTrace, post: &ModelPosterior) -> f64 {
    let mut counts: HashMap<u64, usize> = HashMap::new();
    for r in trace.records() {
        *counts.entry(r.mask().code()).or_default() += 1;
    }
    let n = trace.len() as f64;
    0.5 * (0..post.len())
        .map(|i| {
            let f = counts.get(&(i as u64)).copied().unwrap_or(0) as f64 / n;
            (f - post.prob(&post.mask(i))).abs()
        })
        .sum::<f64>()
}

fn chain(kernel: Kernel, stream: u64) -> ChainConfig {
    ChainConfig {
        burn_in: 10_000,
        seed: 5,
        stream,
        ..ChainConfig::new(1_000_000, kernel)
    }
}

#[test]
fn posterior_is_not_degenerate() {
    let (_, post) = problem();
    let smallest = (0..post.len())
        .map(|i| post.prob(&post.mask(i)))
        .fold(f64::INFINITY, f64::min);
    assert!(
        smallest > 0.01,
        "every model should carry visible mass, smallest {smallest}"
    );
}

#[test]
fn stmala_model_frequencies_match_oracle() {
    let (target, post) = problem();
    for kind in [OperatorKind::Prox, OperatorKind::Stvs] {
        let params = ProposalParams::new(0.3, 0.25, kind).unwrap();
        let trace = run_chain(
            &target,
            &chain(
                Kernel::Stmala {
                    params,
                    block_size: 2,
                },
                1,
            ),
        )
        .unwrap();
        let tv = total_variation(&trace, &post);
        assert!(
            tv <= 0.02,
            "{kind:?}: total variation {tv}, acceptance {}",
            trace.acceptance_rate()
        );
    }
}

#[test]
fn single_row_blocks_match_oracle() {
    let (target, post) = problem();
    let params = ProposalParams::new(0.3, 0.25, OperatorKind::Stvs).unwrap();
    let trace = run_chain(
        &target,
        &chain(
            Kernel::Stmala {
                params,
                block_size: 1,
            },
            2,
        ),
    )
    .unwrap();
    let tv = total_variation(&trace, &post);
    assert!(
        tv <= 0.02,
        "total variation {tv}, acceptance {}",
        trace.acceptance_rate()
    );
}

#[test]
fn rjmcmc_model_frequencies_match_oracle() {
    let (target, post) = problem();
    let kernel = Kernel::Rjmcmc(RjParams::new(0.3).unwrap());
    let trace = run_chain(&target, &chain(kernel, 3)).unwrap();
    let tv = total_variation(&trace, &post);
    assert!(
        tv <= 0.02,
        "total variation {tv}, acceptance {}",
        trace.acceptance_rate()
    );
}

#[test]
fn hard_threshold_never_visits_short_rows() {
    let (target, _) = problem();
    let gamma = 0.25;
    let params = ProposalParams::new(0.3, gamma, OperatorKind::HardThreshold).unwrap();
    let mut cfg = chain(
        Kernel::Stmala {
            params,
            block_size: 2,
        },
        4,
    );
    cfg.iterations = 100_000;
    let trace = run_chain(&target, &cfg).unwrap();
    for r in trace.records() {
        let short = r.values().iter().filter(|v| v.abs() <= gamma).count();
        assert_eq!(
            short, 0,
            "iteration {} holds an active row inside the threshold",
            r.iter
        );
    }
}
