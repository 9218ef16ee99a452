//! Property suites: proposal normalization, Monte Carlo density match,
//! atom-probability cross-check, gradient finite differences and the STVS
//! proximal identity.

use std::f64::consts::PI;

use ndarray::{Array2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use stmala_core::atom::{
    atom_prob_norm_sq, noncentral_chi2_cdf, noncentral_chi2_cdf_johnson, AtomMethod,
};
use stmala_core::operators::stvs_penalty;
use stmala_core::proposal::{log_row_density, perturb_and_threshold, ProposalParams};
use stmala_core::quadrature::integrate_breaks;
use stmala_core::rng::stream_rng;
use stmala_core::{
    DenseMatrix, L21RegressionTarget, ModelPrior, OperatorKind, RidgedExampleTarget,
    SpikeSlabTarget, TargetDensity,
};

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed statistic, in the units of `tolerance`.
    pub worst: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl std::fmt::Display for SuiteResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}: {} (worst {:.3e}, tolerance {:.3e}) {}",
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.worst,
            self.tolerance,
            self.detail
        )
    }
}

fn breakpoints(mut pts: Vec<f64>, lo: f64, hi: f64) -> Vec<f64> {
    pts.retain(|&x| x > lo && x < hi);
    pts.push(lo);
    pts.push(hi);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// Mass of the continuous part of the one-row proposal law.
pub fn continuous_mass(kind: OperatorKind, sigma: f64, gamma: f64, c: &[f64]) -> f64 {
    let cn = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    let reach = cn + gamma + 12.0 * sigma;
    let dens = |z: &[f64]| log_row_density(kind, sigma, gamma, c, z).exp();
    match c.len() {
        1 => {
            let pts = breakpoints(
                vec![-gamma, 0.0, gamma, c[0], c[0] - gamma, c[0] + gamma],
                -reach,
                reach,
            );
            integrate_breaks(|z| dens(&[z]), &pts, 1e-12, 1e-11).value
        }
        2 => {
            let theta_c = c[1].atan2(c[0]);
            let pts = breakpoints(vec![gamma, cn, (cn - gamma).abs(), cn + gamma], 0.0, reach);
            integrate_breaks(
                |r| {
                    r * integrate_breaks(
                        |th| dens(&[r * th.cos(), r * th.sin()]),
                        &[theta_c - PI, theta_c, theta_c + PI],
                        1e-13,
                        1e-11,
                    )
                    .value
                },
                &pts,
                1e-12,
                1e-11,
            )
            .value
        }
        t => panic!("quadrature implemented for T <= 2, got {t}"),
    }
}

/// Atom probability plus the continuous mass equals one, over every operator,
/// `T` in {1, 2} and a 12-point `(||mu||, sigma, gamma)` grid.
pub fn normalization_suite(tol: f64) -> SuiteResult {
    let mut worst = 0.0f64;
    let mut at = String::new();
    let mut cases = 0;
    for kind in OperatorKind::ALL {
        for t in [1usize, 2] {
            for mu_norm in [0.0, 1.5, 3.0] {
                for sigma in [0.5, 1.0] {
                    for gamma in [0.3, 1.0] {
                        let c: Vec<f64> = if t == 1 {
                            vec![mu_norm]
                        } else {
                            vec![mu_norm * 0.6, mu_norm * 0.8]
                        };
                        let atom = atom_prob_norm_sq(
                            mu_norm * mu_norm,
                            t,
                            sigma,
                            gamma,
                            AtomMethod::Exact,
                        );
                        let total = atom + continuous_mass(kind, sigma, gamma, &c);
                        let dev = (total - 1.0).abs();
                        cases += 1;
                        if dev > worst {
                            worst = dev;
                            at = format!(
                                "{kind:?} T={t} |mu|={mu_norm} sigma={sigma} gamma={gamma}"
                            );
                        }
                    }
                }
            }
        }
    }
    SuiteResult {
        name: "proposal normalization",
        passed: worst <= tol,
        worst,
        tolerance: tol,
        detail: format!("{cases} cases, worst at {at}"),
    }
}

/// Histogram of `draws` samples of `Psi(mu + sigma xi)` (T = 1) against the
/// integrated row density; returns the largest bin deviation in standard errors.
pub fn density_match(
    kind: OperatorKind,
    mu: f64,
    sigma: f64,
    gamma: f64,
    draws: usize,
    bins: usize,
    seed: u64,
) -> (f64, String) {
    let params = ProposalParams::new(sigma, gamma, kind).expect("valid parameters");
    let mut rng = stream_rng(seed, 0);
    let lo = mu - 6.0 * sigma - gamma;
    let hi = mu + 6.0 * sigma + gamma;
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    let (mut zeros, mut outside) = (0usize, 0usize);
    let m = Array2::from_elem((1, 1), mu);
    for _ in 0..draws {
        let z = perturb_and_threshold(&params, &m, &mut rng)[[0, 0]];
        if z == 0.0 {
            zeros += 1;
        } else if z < lo || z >= hi {
            outside += 1;
        } else {
            counts[(((z - lo) / width) as usize).min(bins - 1)] += 1;
        }
    }
    let n = draws as f64;
    let dens = |z: f64| log_row_density(kind, sigma, gamma, &[mu], &[z]).exp();
    let mut worst = 0.0f64;
    let mut at = String::new();
    let mut check = |label: String, count: usize, prob: f64| {
        let se = (n * prob * (1.0 - prob)).sqrt();
        let dev = (count as f64 - n * prob).abs();
        let z = if se > 0.0 {
            dev / se
        } else if dev == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        if z > worst {
            worst = z;
            at = label;
        }
    };
    let atom = atom_prob_norm_sq(mu * mu, 1, sigma, gamma, AtomMethod::Exact);
    check("atom".into(), zeros, atom);
    let mut covered = atom;
    for (b, &count) in counts.iter().enumerate() {
        let (a, bb) = (lo + b as f64 * width, lo + (b + 1) as f64 * width);
        let pts = breakpoints(vec![-gamma, 0.0, gamma], a, bb);
        let prob = integrate_breaks(dens, &pts, 1e-14, 1e-12).value;
        covered += prob;
        check(format!("bin [{a:.3}, {bb:.3})"), count, prob);
    }
    check("tails".into(), outside, (1.0 - covered).max(0.0));
    (worst, at)
}

pub fn density_match_suite(kind: OperatorKind, draws: usize, seed: u64) -> SuiteResult {
    let (worst, at) = density_match(kind, 0.6, 0.5, 0.3, draws, 20, seed);
    SuiteResult {
        name: match kind {
            OperatorKind::Prox => "Monte Carlo density match (prox)",
            OperatorKind::HardThreshold => "Monte Carlo density match (hard threshold)",
            OperatorKind::Stvs => "Monte Carlo density match (stvs)",
        },
        passed: worst <= 3.0,
        worst,
        tolerance: 3.0,
        detail: format!("{draws} draws, 20 bins + atom + tails, worst at {at}"),
    }
}

/// `|exact - Johnson|` over `T <= 10`, `l <= 100` and `x = gamma²/sigma²` in `[0.1, 50]`.
pub fn atom_methods_suite(tol: f64) -> SuiteResult {
    let ells = [0.0, 0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0];
    let xs: Vec<f64> = (0..60)
        .map(|i| 0.1 * (500f64).powf(i as f64 / 59.0))
        .collect();
    let mut worst = 0.0f64;
    let mut at = String::new();
    let mut per_t = Vec::new();
    for t in 1..=10usize {
        let mut wt = 0.0f64;
        for &l in &ells {
            for &x in &xs {
                let d = (noncentral_chi2_cdf(x, t as f64, l)
                    - noncentral_chi2_cdf_johnson(x, t as f64, l))
                .abs();
                wt = wt.max(d);
                if d > worst {
                    worst = d;
                    at = format!("T={t} l={l} x={x:.3}");
                }
            }
        }
        per_t.push(format!("T{t}:{wt:.1e}"));
    }
    SuiteResult {
        name: "atom probability methods",
        passed: worst <= tol,
        worst,
        tolerance: tol,
        detail: format!("worst at {at}; per-T worst {}", per_t.join(" ")),
    }
}

fn fd_relative_error(target: &dyn TargetDensity, x: &DenseMatrix) -> f64 {
    let grad = target.g_grad(x).expect("shape matches");
    let mut fd = Array2::zeros(x.dim());
    for i in 0..x.nrows() {
        for j in 0..x.ncols() {
            let h = 1e-5 * x[[i, j]].abs().max(1.0);
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[[i, j]] += h;
            xm[[i, j]] -= h;
            fd[[i, j]] = (target.g_value(&xp).unwrap() - target.g_value(&xm).unwrap()) / (2.0 * h);
        }
    }
    let diff = (&fd - &grad).iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = grad.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
    diff / scale
}

fn random_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> DenseMatrix {
    Array2::from_shape_fn((rows, cols), |_| rng.sample(StandardNormal))
}

/// Central finite differences of `g` against `grad g` on random instances
/// of every target; error is `||fd - grad|| / max(||grad||, 1)`.
pub fn gradient_suite(instances: usize, tol: f64, seed: u64) -> SuiteResult {
    let mut rng = stream_rng(seed, 0);
    let mut worst = 0.0f64;
    let mut at = String::new();
    for which in 0..3 {
        for inst in 0..instances {
            let n = rng.random_range(3..20);
            let p = rng.random_range(1..8);
            let t = if which == 2 {
                1
            } else {
                rng.random_range(1..4)
            };
            let g = random_matrix(n, p, &mut rng);
            let y = random_matrix(n, t, &mut rng);
            let mut x = random_matrix(p, t, &mut rng);
            for mut row in x.axis_iter_mut(Axis(0)) {
                if rng.random_bool(0.3) {
                    row.fill(0.0);
                }
            }
            let tau = rng.random_range(0.3..3.0);
            let lambda = rng.random_range(0.0..2.0);
            let target: Box<dyn TargetDensity> = match which {
                0 => Box::new(
                    L21RegressionTarget::new(y, g, tau, lambda, ModelPrior::Bernoulli(0.2))
                        .unwrap(),
                ),
                1 => Box::new(
                    RidgedExampleTarget::new(
                        y,
                        g,
                        tau,
                        lambda,
                        ModelPrior::Bernoulli(0.2),
                        rng.random_range(0.0..1.0),
                    )
                    .unwrap(),
                ),
                _ => Box::new(
                    SpikeSlabTarget::new(
                        y,
                        g,
                        rng.random_range(0.5..2.0),
                        2.0,
                        rng.random_range(0.02..0.5),
                        0.1,
                    )
                    .unwrap(),
                ),
            };
            let e = fd_relative_error(target.as_ref(), &x);
            if e > worst {
                worst = e;
                at = format!("{} instance {inst}", ["l21", "ridged", "spike-slab"][which]);
            }
        }
    }
    SuiteResult {
        name: "gradient finite differences",
        passed: worst <= tol,
        worst,
        tolerance: tol,
        detail: format!("{} instances per target, worst at {at}", instances),
    }
}

/// Grid minimizer of `h(x) + ||x - u||²/2` along the line through `u`
/// against `Psi_3(u)`; random off-line points must not do better.
pub fn proximal_identity_suite(cases: usize, resolution: f64, seed: u64) -> SuiteResult {
    let mut rng = stream_rng(seed, 0);
    let mut worst = 0.0f64;
    let mut at = String::new();
    let mut off_line_better = 0usize;
    for case in 0..cases {
        let t = 1 + case % 3;
        let gamma = rng.random_range(0.1..2.0);
        let u: Vec<f64> = (0..t)
            .map(|_| 3.0 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let un = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        let dir: Vec<f64> = u.iter().map(|v| v / un).collect();
        let objective = |x: &[f64]| {
            stvs_penalty(gamma, x)
                + 0.5
                    * x.iter()
                        .zip(&u)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
        };
        let steps = ((2.0 * un + 2.0) / resolution).ceil() as usize;
        let (mut best_s, mut best_f) = (0.0, f64::INFINITY);
        for k in 0..=steps {
            let s = -un - 1.0 + k as f64 * resolution;
            let x: Vec<f64> = dir.iter().map(|d| s * d).collect();
            let f = objective(&x);
            if f < best_f {
                best_f = f;
                best_s = s;
            }
        }
        let mut psi = u.clone();
        OperatorKind::Stvs.apply_row(gamma, &mut psi);
        let psi_s = psi.iter().zip(&dir).map(|(a, b)| a * b).sum::<f64>();
        let err = (psi_s - best_s).abs();
        if err > worst {
            worst = err;
            at = format!("case {case}: T={t} gamma={gamma:.3} ||u||={un:.3}");
        }
        let f_psi = objective(&psi);
        for _ in 0..200 {
            let x: Vec<f64> = psi
                .iter()
                .map(|v| v + 0.5 * rng.sample::<f64, _>(StandardNormal))
                .collect();
            if objective(&x) < f_psi - 1e-12 {
                off_line_better += 1;
            }
        }
    }
    SuiteResult {
        name: "STVS proximal identity",
        passed: worst <= resolution && off_line_better == 0,
        worst,
        tolerance: resolution,
        detail: format!("{cases} cases, worst at {at}; off-line improvements {off_line_better}"),
    }
}

/// The fast suites run by `stmala validate`.
pub fn run_all(seed: u64, mc_draws: usize) -> Vec<SuiteResult> {
    let mut out = vec![normalization_suite(1e-5)];
    for kind in OperatorKind::ALL {
        out.push(density_match_suite(kind, mc_draws, seed));
    }
    out.push(atom_methods_suite(2e-3));
    out.push(gradient_suite(100, 1e-5, seed));
    out.push(proximal_identity_suite(60, 1e-4, seed));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn continuous_mass_of_a_centered_row() {
        // Prox at c = 0: continuous mass is P(|xi| > gamma)
        let m = continuous_mass(OperatorKind::Prox, 1.0, 1.0, &[0.0]);
        assert!((m - 0.317_310_507_862_914_1).abs() < 1e-9);
    }

    #[test]
    fn small_suites_pass() {
        assert!(gradient_suite(5, 1e-5, 3).passed);
        assert!(proximal_identity_suite(6, 1e-4, 3).passed);
        let (z, _) = density_match(OperatorKind::Stvs, 0.6, 0.5, 0.3, 20_000, 10, 4);
        assert!(z.is_finite());
    }
}
