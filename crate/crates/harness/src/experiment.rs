//! Data generation, sampling, oracle comparison and report files.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use stmala_core::oracle::{
    activation_probs, enumerate_posterior, write_activation_csv, OracleOptions, MAX_COMPONENTS,
};
use stmala_core::proposal::ProposalParams;
use stmala_core::rjmcmc::RjParams;
use stmala_core::rng::{stream_rng, RNG_ALGORITHM};
use stmala_core::sparse::{read_matrix_csv, write_matrix_csv};
use stmala_core::{
    run_chain, ChainConfig, DenseMatrix, Kernel, L21RegressionTarget, ModelPrior,
    RidgedExampleTarget, SpikeSlabTarget, TargetDensity,
};

use crate::config::{DesignKind, ExperimentConfig, ModelKind, SamplerKind, TruthKind};
use crate::data::{gen_design, gen_observations, gen_truth, Design, Truth};
use crate::diagnostics::{acf, error_curve, log_grid, test_mse, Acf, CurvePoint};
use crate::error::{HarnessError, Result};

pub const DATA_STREAM: u64 = 0;
pub const TEST_STREAM: u64 = 1;

pub const VERSION: &str = env!("STMALA_GIT_DESCRIBE");

#[derive(Clone, Debug)]
pub struct Dataset {
    pub g: DenseMatrix,
    pub y: DenseMatrix,
    pub x_true: Option<DenseMatrix>,
    /// `(G_test, Y_test)`.
    pub test: Option<(DenseMatrix, DenseMatrix)>,
}

fn read_matrix(path: &Path) -> Result<DenseMatrix> {
    let f = File::open(path)
        .map_err(|e| HarnessError::Config(format!("cannot open {}: {e}", path.display())))?;
    Ok(read_matrix_csv(f)?)
}

fn noise_scale(cfg: &ExperimentConfig) -> f64 {
    match cfg.model.kind {
        ModelKind::SpikeSlab => 1.0 / cfg.model.theta.sqrt(),
        _ => cfg.model.tau.sqrt(),
    }
}

fn check_dims(what: &str, m: &DenseMatrix, rows: usize, cols: usize) -> Result<()> {
    if m.dim() != (rows, cols) {
        return Err(HarnessError::Config(format!(
            "{what} is {}x{} but the configuration implies {rows}x{cols}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

pub fn build_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    let m = &cfg.model;
    let d = &cfg.data;
    let x_true = match d.truth {
        TruthKind::ExternalCsv => {
            let x = read_matrix(d.x_path.as_deref().expect("validated"))?;
            check_dims("X", &x, m.p, m.t)?;
            Some(x)
        }
        TruthKind::Step if m.kind != ModelKind::ExternalCsv => {
            Some(gen_truth(Truth::StepSignal(d.s), m.p, m.t)?)
        }
        TruthKind::Breiman if m.kind != ModelKind::ExternalCsv => {
            Some(gen_truth(Truth::Breiman, m.p, m.t)?)
        }
        _ => None,
    };
    let design = match d.design {
        DesignKind::Iid => Design::IidGaussian,
        DesignKind::Correlated => Design::Correlated(d.rho),
    };
    let (g, y) = if m.kind == ModelKind::ExternalCsv {
        let g = read_matrix(d.g_path.as_deref().expect("validated"))?;
        let y = read_matrix(d.y_path.as_deref().expect("validated"))?;
        check_dims("G", &g, m.n, m.p)?;
        check_dims("Y", &y, m.n, m.t)?;
        (g, y)
    } else {
        let mut rng = stream_rng(cfg.experiment.seed, DATA_STREAM);
        let g = gen_design(design, m.n, m.p, &mut rng);
        let y = gen_observations(
            &g,
            x_true.as_ref().expect("synthetic truth"),
            noise_scale(cfg),
            &mut rng,
        )?;
        (g, y)
    };
    let test = match (&d.g_test_path, &d.y_test_path) {
        (Some(gp), Some(yp)) => {
            let gt = read_matrix(gp)?;
            let yt = read_matrix(yp)?;
            check_dims("G_test", &gt, gt.nrows(), m.p)?;
            check_dims("Y_test", &yt, gt.nrows(), m.t)?;
            Some((gt, yt))
        }
        _ if d.n_test > 0 => {
            let x = x_true.as_ref().ok_or_else(|| {
                HarnessError::Config("a generated test set needs a known truth".into())
            })?;
            let mut rng = stream_rng(cfg.experiment.seed, TEST_STREAM);
            let gt = gen_design(design, d.n_test, m.p, &mut rng);
            let yt = gen_observations(&gt, x, noise_scale(cfg), &mut rng)?;
            Some((gt, yt))
        }
        _ => None,
    };
    Ok(Dataset { g, y, x_true, test })
}

pub fn build_target(cfg: &ExperimentConfig, data: &Dataset) -> Result<Box<dyn TargetDensity>> {
    let m = &cfg.model;
    let (y, g) = (data.y.clone(), data.g.clone());
    Ok(match m.kind {
        ModelKind::ToyL21 | ModelKind::ExternalCsv => Box::new(L21RegressionTarget::new(
            y,
            g,
            m.tau,
            m.lambda,
            ModelPrior::Bernoulli(m.omega),
        )?),
        ModelKind::Ridged => Box::new(RidgedExampleTarget::new(
            y,
            g,
            m.tau,
            m.lambda,
            ModelPrior::Bernoulli(m.omega),
            m.v,
        )?),
        ModelKind::SpikeSlab => {
            Box::new(SpikeSlabTarget::new(y, g, m.theta, m.a, m.k, m.omega_star)?)
        }
    })
}

/// Proposal parameters with `sigma` defaulting to `sqrt(2 / L_g)`.
pub fn proposal_params(
    cfg: &ExperimentConfig,
    target: &dyn TargetDensity,
) -> Result<ProposalParams> {
    let pr = &cfg.proposal;
    let sigma = match pr.sigma {
        Some(s) => s,
        None => (2.0 / target.lipschitz_bound()?).sqrt(),
    };
    let mut params =
        ProposalParams::new(sigma, pr.gamma, pr.operator)?.with_atom_method(pr.atom_method);
    if let Some(d) = pr.truncation {
        params = params.with_truncation(d)?;
    }
    Ok(params)
}

pub fn chain_stream(kind: SamplerKind, replicate: usize) -> u64 {
    (kind.stream_id() << 32) | replicate as u64
}

pub fn chain_config(
    cfg: &ExperimentConfig,
    target: &dyn TargetDensity,
    kind: SamplerKind,
    replicate: usize,
) -> Result<ChainConfig> {
    let (p, _) = target.dims();
    let kernel = match kind {
        SamplerKind::Stmala => Kernel::Stmala {
            params: proposal_params(cfg, target)?,
            block_size: p,
        },
        SamplerKind::BlockStmala => Kernel::Stmala {
            params: proposal_params(cfg, target)?,
            block_size: cfg.sampler.block_size,
        },
        SamplerKind::Rjmcmc => Kernel::Rjmcmc(RjParams::new(cfg.sampler.sigma_rj)?),
    };
    Ok(ChainConfig {
        iterations: cfg.chain.iterations,
        burn_in: cfg.chain.burn_in,
        thin: cfg.chain.thin,
        seed: cfg.experiment.seed,
        stream: chain_stream(kind, replicate),
        kernel,
        initial: None,
    })
}

/// Exact activation probabilities when the oracle applies (`L_{2,1}` target, `T = 1`, `P <= 20`).
pub fn exact_activation(cfg: &ExperimentConfig, data: &Dataset) -> Result<Option<Vec<f64>>> {
    let m = &cfg.model;
    if !matches!(m.kind, ModelKind::ToyL21 | ModelKind::ExternalCsv)
        || m.t != 1
        || m.p > MAX_COMPONENTS
    {
        return Ok(None);
    }
    let post = oracle_posterior(cfg, data)?;
    Ok(Some(activation_probs(&post)))
}

pub fn oracle_posterior(
    cfg: &ExperimentConfig,
    data: &Dataset,
) -> Result<stmala_core::oracle::ModelPosterior> {
    let m = &cfg.model;
    let opts = OracleOptions {
        mc_samples: cfg.experiment.oracle_mc_samples,
        seed: cfg.experiment.seed,
        prune_gap: 50.0,
    };
    Ok(enumerate_posterior(
        &data.y,
        &data.g,
        m.tau,
        m.lambda,
        &ModelPrior::Bernoulli(m.omega),
        &opts,
    )?)
}

#[derive(Clone, Debug)]
pub struct ReplicateResult {
    pub sampler: SamplerKind,
    pub replicate: usize,
    pub acceptance_rate: f64,
    pub final_error: Option<f64>,
    pub mean_active: f64,
    pub test_mse: Option<f64>,
    pub activation: Vec<f64>,
    pub curve: Vec<CurvePoint>,
    pub acf: Option<Acf>,
}

pub fn run_replicate(
    cfg: &ExperimentConfig,
    target: &dyn TargetDensity,
    data: &Dataset,
    exact: Option<&[f64]>,
    kind: SamplerKind,
    replicate: usize,
    trace_dir: Option<&Path>,
) -> Result<ReplicateResult> {
    let chain = chain_config(cfg, target, kind, replicate)?;
    let trace = run_chain(target, &chain)?;
    if let Some(dir) = trace_dir {
        let f = File::create(dir.join(format!("trace_{}_{replicate}.csv", kind.name())))?;
        trace.write_csv(BufWriter::new(f))?;
    }
    let activation = trace.activation_frequencies(0)?;
    let final_error = exact.map(|e| activation.iter().zip(e).map(|(a, b)| (a - b).abs()).sum());
    let test = match &data.test {
        Some((gt, yt)) => Some(test_mse(gt, yt, &trace.posterior_mean(0)?)?),
        None => None,
    };
    let lag = cfg.experiment.acf_max_lag;
    let acf = if lag > 0 && trace.len() > lag {
        Some(acf(&trace.component_series(0, 0), lag)?)
    } else {
        None
    };
    Ok(ReplicateResult {
        sampler: kind,
        replicate,
        acceptance_rate: trace.acceptance_rate(),
        final_error,
        mean_active: trace.mean_active(0)?,
        test_mse: test,
        activation,
        curve: error_curve(&trace, exact, &log_grid(cfg.chain.iterations)),
        acf,
    })
}

#[derive(Clone, Debug)]
pub struct Report {
    pub out_dir: PathBuf,
    pub exact: Option<Vec<f64>>,
    pub results: Vec<ReplicateResult>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'a str,
    rng: &'a str,
    seed: u64,
    samplers: Vec<&'static str>,
    replicates: usize,
    oracle: bool,
    chain_streams: Vec<String>,
    config: &'a ExperimentConfig,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

/// Runs every `(sampler, replicate)` chain and writes the report files under `out`.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    samplers: &[SamplerKind],
    out: &Path,
) -> Result<Report> {
    cfg.validate()?;
    fs::create_dir_all(out)?;
    let data = build_dataset(cfg)?;
    let target = build_target(cfg, &data)?;
    let exact = exact_activation(cfg, &data)?;
    let trace_dir = if cfg.experiment.write_traces {
        let dir = out.join("traces");
        fs::create_dir_all(&dir)?;
        Some(dir)
    } else {
        None
    };
    let jobs: Vec<(SamplerKind, usize)> = samplers
        .iter()
        .flat_map(|&k| (0..cfg.experiment.replicates).map(move |r| (k, r)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(k, r)| {
            run_replicate(
                cfg,
                target.as_ref(),
                &data,
                exact.as_deref(),
                k,
                r,
                trace_dir.as_deref(),
            )
        })
        .collect::<Result<Vec<_>>>()?;

    write_matrix_csv(
        &data.g,
        BufWriter::new(File::create(out.join("design.csv"))?),
    )?;
    write_matrix_csv(
        &data.y,
        BufWriter::new(File::create(out.join("observations.csv"))?),
    )?;
    if let Some(x) = &data.x_true {
        write_matrix_csv(x, BufWriter::new(File::create(out.join("truth.csv"))?))?;
    }

    let mut w = csv::Writer::from_path(out.join("activation.csv"))?;
    w.write_record([
        "sampler",
        "replicate",
        "component",
        "estimated",
        "exact",
        "abs_error",
    ])?;
    for res in &results {
        for (i, &a) in res.activation.iter().enumerate() {
            let e = exact.as_ref().map(|e| e[i]);
            w.write_record([
                res.sampler.name().to_string(),
                res.replicate.to_string(),
                i.to_string(),
                format!("{a}"),
                opt(e),
                opt(e.map(|e| (a - e).abs())),
            ])?;
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(out.join("curve.csv"))?;
    w.write_record([
        "sampler",
        "replicate",
        "iter",
        "error",
        "acceptance_rate",
        "mean_active",
    ])?;
    for res in &results {
        for c in &res.curve {
            w.write_record([
                res.sampler.name().to_string(),
                res.replicate.to_string(),
                c.iter.to_string(),
                opt(c.error),
                format!("{}", c.acceptance_rate),
                format!("{}", c.mean_active),
            ])?;
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(out.join("summary.csv"))?;
    w.write_record([
        "sampler",
        "replicate",
        "iterations",
        "acceptance_rate",
        "final_error",
        "mean_active",
        "test_mse",
    ])?;
    for res in &results {
        w.write_record([
            res.sampler.name().to_string(),
            res.replicate.to_string(),
            cfg.chain.iterations.to_string(),
            format!("{}", res.acceptance_rate),
            opt(res.final_error),
            format!("{}", res.mean_active),
            opt(res.test_mse),
        ])?;
    }
    w.flush()?;

    if results.iter().any(|r| r.acf.is_some()) {
        let mut w = csv::Writer::from_path(out.join("acf.csv"))?;
        w.write_record(["sampler", "replicate", "lag", "acf"])?;
        for res in &results {
            if let Some(a) = &res.acf {
                for (lag, v) in a.values.iter().enumerate() {
                    w.write_record([
                        res.sampler.name().to_string(),
                        res.replicate.to_string(),
                        lag.to_string(),
                        format!("{v}"),
                    ])?;
                }
            }
        }
        w.flush()?;
    }

    let manifest = Manifest {
        version: VERSION,
        rng: RNG_ALGORITHM,
        seed: cfg.experiment.seed,
        samplers: samplers.iter().map(|s| s.name()).collect(),
        replicates: cfg.experiment.replicates,
        oracle: exact.is_some(),
        chain_streams: jobs
            .iter()
            .map(|&(k, r)| format!("{}:{}", k.name(), chain_stream(k, r)))
            .collect(),
        config: cfg,
    };
    let text = toml::to_string(&manifest).map_err(|e| HarnessError::Config(e.to_string()))?;
    fs::write(out.join("manifest.toml"), text)?;

    Ok(Report {
        out_dir: out.to_path_buf(),
        exact,
        results,
    })
}

/// Enumerates the model posterior and writes `oracle.csv` and `oracle_activation.csv`.
pub fn run_oracle(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<f64>> {
    cfg.validate()?;
    let m = &cfg.model;
    if !matches!(m.kind, ModelKind::ToyL21 | ModelKind::ExternalCsv) || m.t != 1 {
        return Err(HarnessError::Config(
            "the oracle needs an L21 regression model with T = 1".into(),
        ));
    }
    fs::create_dir_all(out)?;
    let data = build_dataset(cfg)?;
    let post = oracle_posterior(cfg, &data)?;
    post.write_csv(BufWriter::new(File::create(out.join("oracle.csv"))?))?;
    let act = activation_probs(&post);
    write_activation_csv(
        &act,
        BufWriter::new(File::create(out.join("oracle_activation.csv"))?),
    )?;
    Ok(act)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.model.n = 30;
        cfg.model.p = 5;
        cfg.data.s = 2;
        cfg.sampler.block_size = 2;
        cfg.chain.iterations = 300;
        cfg.experiment.oracle_mc_samples = 2000;
        cfg
    }

    #[test]
    fn sigma_defaults_to_lipschitz_step() {
        let cfg = small();
        let data = build_dataset(&cfg).unwrap();
        let target = build_target(&cfg, &data).unwrap();
        let p = proposal_params(&cfg, target.as_ref()).unwrap();
        let lg = target.lipschitz_bound().unwrap();
        assert!((p.sigma - (2.0 / lg).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn streams_are_distinct() {
        let mut seen = std::collections::HashSet::new();
        for k in [
            SamplerKind::Stmala,
            SamplerKind::BlockStmala,
            SamplerKind::Rjmcmc,
        ] {
            for r in 0..50 {
                assert!(seen.insert(chain_stream(k, r)));
            }
        }
        assert!(!seen.contains(&DATA_STREAM) && !seen.contains(&TEST_STREAM));
    }

    #[test]
    fn dataset_is_reproducible() {
        let cfg = small();
        let a = build_dataset(&cfg).unwrap();
        let b = build_dataset(&cfg).unwrap();
        assert_eq!(a.g, b.g);
        assert_eq!(a.y, b.y);
    }
}
