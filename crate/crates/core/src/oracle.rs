//! Exact posterior over models for small `P` (with `T = 1`).
//!
//! Each model weight integrates the regression target over its stratum in
//! closed form; the `exp(-lambda ||x||_1)` factor becomes an expectation under
//! the Gaussian `N(xbar_m, tau (G_m'G_m)^{-1})`, estimated by Monte Carlo.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::atom::standard_normal_cdf;
use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::sparse::{DenseMatrix, ModelMask};
use crate::target::{log_c_lambda, ModelPrior};
use crate::trace::ChainTrace;

pub const MAX_COMPONENTS: usize = 20;
const SINGULAR_RATIO: f64 = 1e-10;
/// Monte Carlo for mask `c` uses stream `MC_STREAM_BASE | c` of the oracle seed.
pub const MC_STREAM_BASE: u64 = 1 << 63;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleOptions {
    pub mc_samples: usize,
    pub seed: u64,
    /// Masks whose weight is provably this many nats below the best lower
    /// bound skip Monte Carlo and take their Jensen lower bound.
    pub prune_gap: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            mc_samples: 100_000,
            seed: 0,
            prune_gap: 50.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelPosterior {
    p: usize,
    log_weights: Vec<f64>,
    rel_se: Vec<f64>,
    probs: Vec<f64>,
}

impl ModelPosterior {
    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of masks, `2^P`; index `i` is [`ModelMask::from_code`] of `i`.
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn mask(&self, index: usize) -> ModelMask {
        ModelMask::from_code(index as u64, self.p)
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, mask: &ModelMask) -> f64 {
        self.probs[mask.code() as usize]
    }

    /// Delta-method Monte Carlo standard errors of `probs`, treating the
    /// per-mask estimates as independent (all zero when `lambda = 0`).
    pub fn prob_std_errors(&self) -> Vec<f64> {
        let total: f64 = self
            .probs
            .iter()
            .zip(&self.rel_se)
            .map(|(p, r)| (p * r).powi(2))
            .sum();
        self.probs
            .iter()
            .zip(&self.rel_se)
            .map(|(p, r)| {
                let own = (p * r).powi(2);
                let var = p * p * ((1.0 - p).powi(2) * r * r + total - own);
                var.max(0.0).sqrt()
            })
            .collect()
    }

    /// CSV with header `mask,log_weight,prob`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["mask", "log_weight", "prob"])?;
        for i in 0..self.len() {
            out.write_record([
                self.mask(i).to_bitstring(),
                format!("{}", self.log_weights[i]),
                format!("{}", self.probs[i]),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

struct Terms {
    /// Log weight without the Monte Carlo factor (exact when `lambda = 0`).
    base: f64,
    /// `base - lambda E||x||_1`, a lower bound on the full log weight.
    jensen: f64,
    mean: Vec<f64>,
    /// Row-major lower Cholesky factor of `G_m'G_m`.
    chol: Vec<f64>,
}

fn mask_terms(
    gtg: &DMatrix<f64>,
    gty: &[f64],
    code: u64,
    p: usize,
    tau: f64,
    lambda: f64,
    prior: &ModelPrior,
) -> Result<Option<Terms>> {
    let idx: Vec<usize> = (0..p).filter(|i| (code >> i) & 1 == 1).collect();
    let k = idx.len();
    let prior_term = prior.log_weight(k, p) - k as f64 * log_c_lambda(1, lambda);
    if k == 0 {
        return Ok(Some(Terms {
            base: prior_term,
            jensen: prior_term,
            mean: vec![],
            chol: vec![],
        }));
    }
    let gram = DMatrix::from_fn(k, k, |a, b| gtg[(idx[a], idx[b])]);
    let eig = SymmetricEigen::new(gram.clone()).eigenvalues;
    let (lo, hi) = eig
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &e| {
            (l.min(e), h.max(e))
        });
    if !(hi > 0.0) || lo < SINGULAR_RATIO * hi {
        return Ok(None);
    }
    let chol = gram.cholesky().ok_or_else(|| {
        Error::Factorization(format!(
            "Gram matrix of mask {code:b} is not positive definite"
        ))
    })?;
    let l = chol.l();
    let b = nalgebra::DVector::from_iterator(k, idx.iter().map(|&i| gty[i]));
    let xbar = chol.solve(&b);
    let quad = b.dot(&xbar);
    let log_det: f64 = 2.0 * (0..k).map(|i| l[(i, i)].ln()).sum::<f64>();
    let base =
        prior_term + quad / (2.0 * tau) + 0.5 * k as f64 * (2.0 * PI * tau).ln() - 0.5 * log_det;
    let mut jensen = base;
    if lambda > 0.0 {
        let inv = chol.inverse();
        let e_abs: f64 = (0..k)
            .map(|i| {
                let s = (tau * inv[(i, i)]).sqrt();
                let mu = xbar[i];
                s * (2.0 / PI).sqrt() * (-0.5 * (mu / s).powi(2)).exp()
                    + mu * (1.0 - 2.0 * standard_normal_cdf(-mu / s))
            })
            .sum();
        jensen -= lambda * e_abs;
    }
    let chol_rows = (0..k)
        .flat_map(|i| (0..k).map(move |j| (i, j)))
        .map(|(i, j)| l[(i, j)])
        .collect();
    Ok(Some(Terms {
        base,
        jensen,
        mean: xbar.iter().copied().collect(),
        chol: chol_rows,
    }))
}

/// `(log E exp(-lambda ||x||_1), relative standard error)` under
/// `x = mean + sqrt(tau) L^{-T} eps`.
fn mc_expectation<R: Rng>(
    terms: &Terms,
    tau: f64,
    lambda: f64,
    samples: usize,
    rng: &mut R,
) -> (f64, f64) {
    let k = terms.mean.len();
    let l = &terms.chol;
    let st = tau.sqrt();
    let mut eps = vec![0.0; k];
    let mut v = vec![0.0; k];
    let mut logs = Vec::with_capacity(samples);
    for _ in 0..samples {
        for e in eps.iter_mut() {
            *e = rng.sample(StandardNormal);
        }
        // back substitution for L' v = eps
        for i in (0..k).rev() {
            let mut s = eps[i];
            for j in i + 1..k {
                s -= l[j * k + i] * v[j];
            }
            v[i] = s / l[i * k + i];
        }
        let l1: f64 = terms
            .mean
            .iter()
            .zip(&v)
            .map(|(m, d)| (m + st * d).abs())
            .sum();
        logs.push(-lambda * l1);
    }
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let n = samples as f64;
    let (s1, s2) = logs.iter().fold((0.0, 0.0), |(a, b), &x| {
        let w = (x - max).exp();
        (a + w, b + w * w)
    });
    let mean = s1 / n;
    let var = (s2 / n - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
    (max + mean.ln(), (var / n).sqrt() / mean)
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Posterior probabilities of all `2^P` models under the `L_{2,1}` regression target.
pub fn enumerate_posterior(
    y: &DenseMatrix,
    g: &DenseMatrix,
    tau: f64,
    lambda: f64,
    prior: &ModelPrior,
    options: &OracleOptions,
) -> Result<ModelPosterior> {
    let (n, p) = g.dim();
    if p > MAX_COMPONENTS {
        return Err(Error::TooManyComponents(p));
    }
    if y.dim() != (n, 1) {
        return Err(Error::Shape(format!(
            "the oracle needs an {n}x1 observation matrix, got {}x{}",
            y.nrows(),
            y.ncols()
        )));
    }
    if !(tau > 0.0) || !(lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need tau > 0 and lambda >= 0, got {tau} and {lambda}"
        )));
    }
    if lambda > 0.0 && options.mc_samples == 0 {
        return Err(Error::InvalidParameter(
            "mc_samples must be positive when lambda > 0".into(),
        ));
    }
    prior.validate(p)?;
    let gtg_nd = g.t().dot(g);
    let gtg = DMatrix::from_fn(p, p, |a, b| gtg_nd[[a, b]]);
    let gty: Vec<f64> = g.t().dot(&y.column(0)).to_vec();

    let codes = 0..(1u64 << p);
    let terms: Vec<Option<Terms>> = codes
        .clone()
        .into_par_iter()
        .map(|c| mask_terms(&gtg, &gty, c, p, tau, lambda, prior))
        .collect::<Result<_>>()?;
    let best_lower = terms
        .iter()
        .flatten()
        .map(|t| t.jensen)
        .fold(f64::NEG_INFINITY, f64::max);

    let (log_weights, rel_se): (Vec<f64>, Vec<f64>) = terms
        .par_iter()
        .enumerate()
        .map(|(code, t)| match t {
            None => (f64::NEG_INFINITY, 0.0),
            Some(t) if lambda == 0.0 || t.mean.is_empty() => (t.base, 0.0),
            Some(t) if t.base < best_lower - options.prune_gap => (t.jensen, 0.0),
            Some(t) => {
                let mut rng = stream_rng(options.seed, MC_STREAM_BASE | code as u64);
                let (log_e, rse) = mc_expectation(t, tau, lambda, options.mc_samples, &mut rng);
                (t.base + log_e, rse)
            }
        })
        .unzip();
    let lse = log_sum_exp(&log_weights);
    let probs = log_weights.iter().map(|w| (w - lse).exp()).collect();
    Ok(ModelPosterior {
        p,
        log_weights,
        rel_se,
        probs,
    })
}

/// `P(X_i != 0 | Y)` for each component.
pub fn activation_probs(post: &ModelPosterior) -> Vec<f64> {
    let mut out = vec![0.0; post.p];
    for (code, &pr) in post.probs.iter().enumerate() {
        for (i, o) in out.iter_mut().enumerate() {
            if (code >> i) & 1 == 1 {
                *o += pr;
            }
        }
    }
    out
}

/// L1 distance between exact activation probabilities and the chain's
/// activation frequencies over records with iteration `> burn_in`.
pub fn activation_error(trace: &ChainTrace, exact: &[f64], burn_in: usize) -> Result<f64> {
    if exact.len() != trace.p() {
        return Err(Error::Shape(format!(
            "{} exact probabilities for P = {}",
            exact.len(),
            trace.p()
        )));
    }
    let freq = trace.activation_frequencies(burn_in)?;
    Ok(freq.iter().zip(exact).map(|(f, e)| (f - e).abs()).sum())
}

/// CSV with header `component,prob`.
pub fn write_activation_csv<W: Write>(probs: &[f64], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["component", "prob"])?;
    for (i, p) in probs.iter().enumerate() {
        out.write_record([i.to_string(), format!("{p}")])?;
    }
    out.flush()?;
    Ok(())
}
