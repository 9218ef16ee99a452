//! Experiment configuration, read from a sectioned `key = value` file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stmala_core::atom::AtomMethod;
use stmala_core::OperatorKind;

use crate::error::{HarnessError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    ToyL21,
    SpikeSlab,
    Ridged,
    /// `L_{2,1}` regression target on data read from CSV.
    ExternalCsv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    Iid,
    Correlated,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthKind {
    Step,
    Breiman,
    ExternalCsv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    Stmala,
    BlockStmala,
    Rjmcmc,
}

impl SamplerKind {
    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::Stmala => "stmala",
            SamplerKind::BlockStmala => "block_stmala",
            SamplerKind::Rjmcmc => "rjmcmc",
        }
    }

    /// High half of the chain stream id.
    pub fn stream_id(self) -> u64 {
        match self {
            SamplerKind::Stmala => 1,
            SamplerKind::BlockStmala => 2,
            SamplerKind::Rjmcmc => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub kind: ModelKind,
    pub n: usize,
    pub p: usize,
    pub t: usize,
    pub tau: f64,
    pub lambda: f64,
    pub omega: f64,
    pub theta: f64,
    pub a: f64,
    pub k: f64,
    pub omega_star: f64,
    pub v: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            kind: ModelKind::ToyL21,
            n: 100,
            p: 16,
            t: 1,
            tau: 1.0,
            lambda: 1.0,
            omega: 0.1,
            theta: 1.0,
            a: 2.0,
            k: 0.08,
            omega_star: 0.1,
            v: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub design: DesignKind,
    pub rho: f64,
    pub truth: TruthKind,
    pub s: usize,
    /// Rows of an independent test set generated like the training data (0 = none).
    pub n_test: usize,
    pub g_path: Option<PathBuf>,
    pub y_path: Option<PathBuf>,
    pub x_path: Option<PathBuf>,
    pub g_test_path: Option<PathBuf>,
    pub y_test_path: Option<PathBuf>,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            design: DesignKind::Iid,
            rho: 0.0,
            truth: TruthKind::Step,
            s: 8,
            n_test: 0,
            g_path: None,
            y_path: None,
            x_path: None,
            g_test_path: None,
            y_test_path: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerSection {
    pub kind: SamplerKind,
    pub block_size: usize,
    pub sigma_rj: f64,
}

impl Default for SamplerSection {
    fn default() -> Self {
        Self {
            kind: SamplerKind::BlockStmala,
            block_size: 4,
            sigma_rj: 0.02,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProposalSection {
    pub operator: OperatorKind,
    pub gamma: f64,
    /// Defaults to `sqrt(2 / L_g)` of the instantiated target.
    pub sigma: Option<f64>,
    pub truncation: Option<f64>,
    pub atom_method: AtomMethod,
}

impl Default for ProposalSection {
    fn default() -> Self {
        Self {
            operator: OperatorKind::Stvs,
            gamma: 0.1,
            sigma: None,
            truncation: None,
            atom_method: AtomMethod::Exact,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainSection {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
}

impl Default for ChainSection {
    fn default() -> Self {
        Self {
            iterations: 10_000,
            burn_in: 0,
            thin: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub seed: u64,
    pub replicates: usize,
    pub out_dir: PathBuf,
    pub oracle_mc_samples: usize,
    pub write_traces: bool,
    /// Largest lag of the emitted autocorrelation of component 0 (0 = skip).
    pub acf_max_lag: usize,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            seed: 1,
            replicates: 1,
            out_dir: PathBuf::from("out"),
            oracle_mc_samples: 100_000,
            write_traces: true,
            acf_max_lag: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    pub data: DataSection,
    pub sampler: SamplerSection,
    pub proposal: ProposalSection,
    pub chain: ChainSection,
    pub experiment: ExperimentSection,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        let m = &self.model;
        if m.n == 0 || m.p == 0 || m.t == 0 {
            return bad(format!(
                "dimensions must be positive, got N={} P={} T={}",
                m.n, m.p, m.t
            ));
        }
        if !(self.data.rho > -1.0 && self.data.rho < 1.0) {
            return bad(format!("rho must lie in (-1, 1), got {}", self.data.rho));
        }
        if self.data.design == DesignKind::Iid && self.data.rho != 0.0 {
            return bad("rho is only used with design = \"correlated\"".into());
        }
        if m.kind == ModelKind::SpikeSlab && m.t != 1 {
            return bad("the spike-and-slab model needs T = 1".into());
        }
        if m.kind == ModelKind::ExternalCsv
            && (self.data.g_path.is_none() || self.data.y_path.is_none())
        {
            return bad("external_csv model needs data.g_path and data.y_path".into());
        }
        if self.data.truth == TruthKind::ExternalCsv && self.data.x_path.is_none() {
            return bad("external_csv truth needs data.x_path".into());
        }
        if self.data.truth == TruthKind::Step && self.data.s > m.p {
            return bad(format!("step signal S={} exceeds P={}", self.data.s, m.p));
        }
        if self.sampler.block_size == 0 || self.sampler.block_size > m.p {
            return bad(format!(
                "block_size {} outside 1..={}",
                self.sampler.block_size, m.p
            ));
        }
        if !(self.sampler.sigma_rj > 0.0) {
            return bad(format!(
                "sigma_rj must be positive, got {}",
                self.sampler.sigma_rj
            ));
        }
        if !(self.proposal.gamma >= 0.0) {
            return bad(format!(
                "gamma must be non-negative, got {}",
                self.proposal.gamma
            ));
        }
        if let Some(s) = self.proposal.sigma {
            if !(s > 0.0) {
                return bad(format!("sigma must be positive, got {s}"));
            }
        }
        let c = &self.chain;
        if c.iterations == 0 || c.burn_in >= c.iterations || c.thin == 0 {
            return bad(format!(
                "need iterations >= 1, burn_in < iterations and thin >= 1 (got {}, {}, {})",
                c.iterations, c.burn_in, c.thin
            ));
        }
        if self.experiment.replicates == 0 {
            return bad("replicates must be at least 1".into());
        }
        Ok(())
    }

    /// Paths in the `[data]` section resolved against `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        for p in [
            &mut self.data.g_path,
            &mut self.data.y_path,
            &mut self.data.x_path,
            &mut self.data.g_test_path,
            &mut self.data.y_test_path,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}
