//! Acceptance criteria, one line per criterion. Exits nonzero when any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use stmala_core::oracle::activation_error;
use stmala_core::{run_chain, OperatorKind};
use stmala_harness::config::{ExperimentConfig, SamplerKind};
use stmala_harness::experiment::{
    build_dataset, build_target, chain_config, exact_activation, run_replicate,
};
use stmala_harness::validate::{
    atom_methods_suite, density_match_suite, gradient_suite, normalization_suite,
    proximal_identity_suite,
};

const SEED: u64 = 20_240_917;

struct Outcome {
    id: usize,
    passed: bool,
    detail: String,
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let v = f();
    (v, start.elapsed())
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml_str(text).expect("acceptance config parses")
}

const ORACLE_P6: &str = r#"
[model]
n = 40
p = 6
lambda = 0.0
omega = 0.1
[data]
s = 3
[sampler]
block_size = 2
sigma_rj = 0.1
[proposal]
operator = "stvs"
gamma = 0.1
[chain]
iterations = 500000
[experiment]
seed = 1
write_traces = false
"#;

const TOY_P16: &str = r#"
[model]
n = 100
p = 16
lambda = 1.0
omega = 0.1
[data]
s = 8
[sampler]
block_size = 4
sigma_rj = 0.02
[proposal]
operator = "stvs"
gamma = 0.07
[chain]
iterations = 300000
[experiment]
seed = 1
replicates = 20
write_traces = false
"#;

const BREIMAN: &str = r#"
[model]
kind = "spike_slab"
n = 100
p = 200
theta = 1.0
a = 2.0
k = 0.08
omega_star = 0.1
[data]
design = "correlated"
rho = 0.3
truth = "breiman"
n_test = 100
[sampler]
block_size = 20
[proposal]
operator = "stvs"
gamma = 0.35
[chain]
iterations = 100000
burn_in = 10000
[experiment]
seed = 1
replicates = 3
write_traces = false
"#;

fn criterion_1() -> Outcome {
    let (r, t) = timed(|| normalization_suite(1e-5));
    Outcome {
        id: 1,
        passed: r.passed && within(t, 10.0),
        detail: format!(
            "normalization worst {:.3e} (tol 1e-5), {:.2}s (limit 10s)",
            r.worst,
            t.as_secs_f64()
        ),
    }
}

fn criterion_2() -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for kind in [
        OperatorKind::Prox,
        OperatorKind::HardThreshold,
        OperatorKind::Stvs,
    ] {
        let (r, t) = timed(|| density_match_suite(kind, 1_000_000, SEED));
        passed &= r.passed && within(t, 30.0);
        parts.push(format!(
            "{kind:?} worst z {:.2} (tol {:.0}) {:.1}s",
            r.worst,
            r.tolerance,
            t.as_secs_f64()
        ));
    }
    Outcome {
        id: 2,
        passed,
        detail: format!("{} (limit 30s per kind)", parts.join("; ")),
    }
}

fn criterion_3() -> Outcome {
    let cfg = config(ORACLE_P6);
    let data = build_dataset(&cfg).expect("dataset");
    let target = build_target(&cfg, &data).expect("target");
    let exact = exact_activation(&cfg, &data)
        .expect("oracle")
        .expect("oracle applies");
    let mut passed = true;
    let mut parts = Vec::new();
    for kind in [SamplerKind::BlockStmala, SamplerKind::Rjmcmc] {
        let chain = chain_config(&cfg, target.as_ref(), kind, 0).expect("chain config");
        let (trace, t) = timed(|| run_chain(target.as_ref(), &chain).expect("chain runs"));
        let err = activation_error(&trace, &exact, 0).expect("activation error");
        passed &= err <= 0.1 && within(t, 120.0);
        parts.push(format!(
            "{} error {:.4} {:.1}s",
            kind.name(),
            err,
            t.as_secs_f64()
        ));
    }
    Outcome {
        id: 3,
        passed,
        detail: format!("{} (tol 0.1, limit 120s per sampler)", parts.join("; ")),
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Runs the toy comparison once and reports criteria 4 and 5 from it.
fn criteria_4_5() -> (Outcome, Outcome) {
    let cfg = config(TOY_P16);
    let ((block, rj), t) = timed(|| {
        let data = build_dataset(&cfg).expect("dataset");
        let target = build_target(&cfg, &data).expect("target");
        let exact = exact_activation(&cfg, &data)
            .expect("oracle")
            .expect("oracle applies");
        let run = |kind| {
            (0..cfg.experiment.replicates)
                .map(|r| {
                    run_replicate(&cfg, target.as_ref(), &data, Some(&exact), kind, r, None)
                        .expect("replicate")
                })
                .collect::<Vec<_>>()
        };
        (run(SamplerKind::BlockStmala), run(SamplerKind::Rjmcmc))
    });
    let errors = |rs: &[stmala_harness::experiment::ReplicateResult]| {
        rs.iter()
            .map(|r| r.final_error.expect("exact available"))
            .collect::<Vec<_>>()
    };
    let (mb, mr) = (median(errors(&block)), median(errors(&rj)));
    let rate = |rs: &[stmala_harness::experiment::ReplicateResult]| {
        rs.iter().map(|r| r.acceptance_rate).sum::<f64>() / rs.len() as f64
    };
    let c4 = Outcome {
        id: 4,
        passed: mb < mr && within(t, 600.0),
        detail: format!(
            "median error block_stmala {mb:.4} vs rjmcmc {mr:.4} over {} replicates (acceptance {:.3} vs {:.3}), {:.1}s (limit 600s)",
            block.len(),
            rate(&block),
            rate(&rj),
            t.as_secs_f64()
        ),
    };
    let (lo, hi) = block
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            (lo.min(r.acceptance_rate), hi.max(r.acceptance_rate))
        });
    let c5 = Outcome {
        id: 5,
        passed: lo >= 0.15 && hi <= 0.35,
        detail: format!("block_stmala acceptance in [{lo:.4}, {hi:.4}] (band [0.15, 0.35])"),
    };
    (c4, c5)
}

fn criterion_6() -> Outcome {
    let r = atom_methods_suite(2e-3);
    Outcome {
        id: 6,
        passed: r.passed,
        detail: format!(
            "max |exact - johnson| {:.3e} (tol 2e-3) {}",
            r.worst, r.detail
        ),
    }
}

fn criterion_7() -> Outcome {
    let (r, t) = timed(|| gradient_suite(100, 1e-5, SEED));
    Outcome {
        id: 7,
        passed: r.passed && within(t, 5.0),
        detail: format!(
            "worst relative error {:.3e} (tol 1e-5), {:.2}s (limit 5s)",
            r.worst,
            t.as_secs_f64()
        ),
    }
}

fn criterion_8() -> Outcome {
    let (r, t) = timed(|| proximal_identity_suite(60, 1e-4, SEED));
    Outcome {
        id: 8,
        passed: r.passed && within(t, 5.0),
        detail: format!(
            "worst gap {:.3e} (resolution 1e-4), {:.2}s (limit 5s)",
            r.worst,
            t.as_secs_f64()
        ),
    }
}

fn criterion_9() -> Outcome {
    let cfg = config(BREIMAN);
    let (means, t) = timed(|| {
        let data = build_dataset(&cfg).expect("dataset");
        let target = build_target(&cfg, &data).expect("target");
        let window_start = cfg.chain.burn_in + (cfg.chain.iterations - cfg.chain.burn_in) / 2;
        (0..cfg.experiment.replicates)
            .map(|r| {
                let chain = chain_config(&cfg, target.as_ref(), SamplerKind::BlockStmala, r)
                    .expect("chain config");
                let trace = run_chain(target.as_ref(), &chain).expect("chain runs");
                trace.mean_active(window_start).expect("non-empty window")
            })
            .collect::<Vec<_>>()
    });
    let passed = means.iter().all(|m| (10.0..=60.0).contains(m)) && within(t, 300.0);
    let shown = means
        .iter()
        .map(|m| format!("{m:.2}"))
        .collect::<Vec<_>>()
        .join(", ");
    Outcome {
        id: 9,
        passed,
        detail: format!(
            "trailing mean |m| [{shown}] (band [10, 60], truth 20), {:.1}s (limit 300s)",
            t.as_secs_f64()
        ),
    }
}

fn main() -> ExitCode {
    let mut outcomes = vec![criterion_1(), criterion_2(), criterion_3()];
    let (c4, c5) = criteria_4_5();
    outcomes.extend([
        c4,
        c5,
        criterion_6(),
        criterion_7(),
        criterion_8(),
        criterion_9(),
    ]);
    let mut failed = 0;
    for o in &outcomes {
        println!(
            "criterion {}: {} {}",
            o.id,
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += usize::from(!o.passed);
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        outcomes.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
