//! Probability that a Gaussian row proposal lands inside the threshold ball,
//! `p(c) = P(||c + xi||_2 <= gamma)` with `xi ~ N(0, sigma² I_T)`.
//!
//! `||(c + xi)/sigma||²` is noncentral chi-squared with `T` degrees of freedom
//! and noncentrality `||c||²/sigma²`, so `p(c)` is its CDF at `gamma²/sigma²`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, ln_gamma};

const POISSON_TAIL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AtomMethod {
    /// Poisson mixture of central chi-squared CDFs.
    #[default]
    Exact,
    /// Closed-form normal approximation after a power transform.
    Johnson,
}

/// `P(X <= x)` for `X ~ chi'²_dof(nc)`, summed outward from the Poisson mode
/// until the neglected Poisson mass is below `1e-12`.
pub fn noncentral_chi2_cdf(x: f64, dof: f64, nc: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    let half_x = 0.5 * x;
    let a = 0.5 * dof;
    if nc <= 0.0 {
        return gamma_lr(a, half_x);
    }
    let h = 0.5 * nc;
    let mode = h.floor();
    let w_mode = (-h + mode * h.ln() - ln_gamma(mode + 1.0)).exp();

    let mut sum = 0.0;
    // upward from the mode, including it
    let mut j = mode;
    let mut w = w_mode;
    loop {
        let term_cdf = gamma_lr(a + j, half_x);
        sum += w * term_cdf;
        let w_next = w * h / (j + 1.0);
        let ratio = h / (j + 2.0);
        let tail = w_next / (1.0 - ratio);
        // the central CDFs decrease with j, so term_cdf bounds the rest
        if tail * term_cdf < POISSON_TAIL || w_next == 0.0 {
            break;
        }
        w = w_next;
        j += 1.0;
    }
    // downward
    let mut j = mode;
    let mut w = w_mode;
    while j > 0.0 {
        w *= j / h;
        j -= 1.0;
        sum += w * gamma_lr(a + j, half_x);
        let ratio = j / h;
        if j == 0.0 || w * ratio / (1.0 - ratio) < POISSON_TAIL {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// Closed-form approximation of the same CDF via a normal law on `X^u`.
pub fn noncentral_chi2_cdf_johnson(x: f64, dof: f64, nc: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let k = dof;
    let l = nc;
    let u = 1.0 - (2.0 / 3.0) * (k + l) * (k + 3.0 * l) / ((k + 2.0 * l) * (k + 2.0 * l));
    let v = (k + 2.0 * l) / ((k + l) * (k + l));
    let w = (u - 1.0) * (1.0 - 3.0 * u);
    let centre = 1.0 + u * v * (u - 1.0 - 0.5 * (2.0 - u) * w * v);
    let z = ((x / (k + l)).powf(u) - centre) / (u * (2.0 * v * (1.0 + w * v)).sqrt());
    standard_normal_cdf(z).clamp(0.0, 1.0)
}

pub fn standard_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// `p(c)` given `||c||²`.
pub fn atom_prob_norm_sq(
    c_norm_sq: f64,
    t: usize,
    sigma: f64,
    gamma: f64,
    method: AtomMethod,
) -> f64 {
    let s2 = sigma * sigma;
    let x = gamma * gamma / s2;
    let nc = c_norm_sq / s2;
    match method {
        AtomMethod::Exact => noncentral_chi2_cdf(x, t as f64, nc),
        AtomMethod::Johnson => noncentral_chi2_cdf_johnson(x, t as f64, nc),
    }
}

pub fn atom_prob(c: &[f64], sigma: f64, gamma: f64, method: AtomMethod) -> f64 {
    let n2 = c.iter().map(|v| v * v).sum();
    atom_prob_norm_sq(n2, c.len(), sigma, gamma, method)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn central_examples() {
        // 2 Phi(1) - 1
        assert_relative_eq!(
            atom_prob(&[0.0], 1.0, 1.0, AtomMethod::Exact),
            0.682_689_492_137_085_9,
            epsilon = 1e-13
        );
        let gamma = (2.0 * 2.0f64.ln()).sqrt();
        assert_relative_eq!(
            atom_prob(&[0.0, 0.0], 1.0, gamma, AtomMethod::Exact),
            0.5,
            epsilon = 1e-13
        );
        assert!(atom_prob(&[0.3, 0.1], 1.0, 1e-9, AtomMethod::Exact) < 1e-15);
        assert!(
            atom_prob(&[0.3, 0.1], 1.0, 1e-9, AtomMethod::Johnson)
                < atom_prob(&[0.3, 0.1], 1.0, 1.0, AtomMethod::Johnson)
        );
    }

    #[test]
    fn one_dimensional_noncentral_matches_normal_interval() {
        // T = 1: P(|c + xi| <= gamma) = Phi((gamma - c)/s) - Phi((-gamma - c)/s)
        for &(c, s, g) in &[
            (0.5, 1.0, 1.0),
            (2.0, 0.7, 0.4),
            (-3.0, 1.5, 2.5),
            (10.0, 1.0, 9.0),
        ] {
            let expected = standard_normal_cdf((g - c) / s) - standard_normal_cdf((-g - c) / s);
            let got = atom_prob(&[c], s, g, AtomMethod::Exact);
            assert!(
                (got - expected).abs() < 1e-12,
                "c={c} s={s} g={g}: {got} vs {expected}"
            );
        }
    }

    #[test]
    fn large_noncentrality_is_finite() {
        let p = noncentral_chi2_cdf(1e5, 3.0, 1e5);
        assert!((0.4..0.6).contains(&p), "{p}");
        assert_eq!(noncentral_chi2_cdf(1.0, 1.0, 1e4), 0.0);
    }

    #[test]
    fn johnson_is_close_on_a_typical_point() {
        let exact = noncentral_chi2_cdf(4.0, 3.0, 2.0);
        let approx = noncentral_chi2_cdf_johnson(4.0, 3.0, 2.0);
        assert!((exact - approx).abs() < 5e-3, "{exact} {approx}");
    }
}
