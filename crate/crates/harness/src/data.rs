//! Synthetic designs, regression vectors and observations.

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use stmala_core::DenseMatrix;

use crate::error::{HarnessError, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Design {
    IidGaussian,
    /// Stationary AR(1) across the `P` coordinates of each row.
    Correlated(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Truth {
    /// `X_j = 1` for `j < S`.
    StepSignal(usize),
    /// Four alternating-sign clusters of five adjacent variables.
    Breiman,
}

pub fn gen_design<R: Rng + ?Sized>(kind: Design, n: usize, p: usize, rng: &mut R) -> DenseMatrix {
    let mut g = Array2::zeros((n, p));
    match kind {
        Design::IidGaussian => g.mapv_inplace(|_: f64| rng.sample(StandardNormal)),
        Design::Correlated(rho) => {
            let innov = (1.0 - rho * rho).sqrt();
            for mut row in g.rows_mut() {
                let mut prev: f64 = rng.sample(StandardNormal);
                row[0] = prev;
                for j in 1..p {
                    let e: f64 = rng.sample(StandardNormal);
                    prev = rho * prev + innov * e;
                    row[j] = prev;
                }
            }
        }
    }
    g
}

/// `P x t` regression matrix with every column equal to the chosen signal.
pub fn gen_truth(kind: Truth, p: usize, t: usize) -> Result<DenseMatrix> {
    let mut x = Array2::zeros((p, t));
    match kind {
        Truth::StepSignal(s) => {
            if s > p {
                return Err(HarnessError::Config(format!(
                    "step signal S={s} exceeds P={p}"
                )));
            }
            x.slice_mut(ndarray::s![..s, ..]).fill(1.0);
        }
        Truth::Breiman => {
            if p < 155 {
                return Err(HarnessError::Config(format!(
                    "the Breiman signal needs P >= 155, got {p}"
                )));
            }
            for k in 1..=4i32 {
                for j in 1..=5usize {
                    let v = (-1f64).powi(k + 1) * (j as f64).powf(1.0 / k as f64);
                    x.row_mut(50 * (k as usize - 1) + j - 1).fill(v);
                }
            }
        }
    }
    Ok(x)
}

/// `Y = G X + noise_scale E` with `E` standard normal.
pub fn gen_observations<R: Rng + ?Sized>(
    g: &DenseMatrix,
    x: &DenseMatrix,
    noise_scale: f64,
    rng: &mut R,
) -> Result<DenseMatrix> {
    if g.ncols() != x.nrows() {
        return Err(HarnessError::Core(stmala_core::Error::Shape(format!(
            "G has {} columns but X has {} rows",
            g.ncols(),
            x.nrows()
        ))));
    }
    let mut y = g.dot(x);
    y.mapv_inplace(|v| {
        let e: f64 = rng.sample(StandardNormal);
        v + noise_scale * e
    });
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use stmala_core::rng::stream_rng;

    #[test]
    fn breiman_entries() {
        let x = gen_truth(Truth::Breiman, 200, 1).unwrap();
        assert_eq!(x[[2, 0]], 3.0);
        assert!((x[[53, 0]] + 2.0).abs() < 1e-15);
        assert_eq!(x.iter().filter(|&&v| v != 0.0).count(), 20);
        assert!(gen_truth(Truth::Breiman, 154, 1).is_err());
    }

    #[test]
    fn step_signal() {
        let x = gen_truth(Truth::StepSignal(8), 16, 1).unwrap();
        assert!(x.iter().take(8).all(|&v| v == 1.0));
        assert!(x.iter().skip(8).all(|&v| v == 0.0));
    }

    #[test]
    fn shapes_and_noise_free_observations() {
        let mut rng = stream_rng(1, 0);
        let g = gen_design(Design::Correlated(0.5), 7, 5, &mut rng);
        assert_eq!(g.dim(), (7, 5));
        let x = gen_truth(Truth::StepSignal(2), 5, 1).unwrap();
        assert_eq!(gen_observations(&g, &x, 0.0, &mut rng).unwrap(), g.dot(&x));
    }

    #[test]
    fn correlated_design_covariance() {
        let mut rng = stream_rng(2, 0);
        let n = 100_000;
        let g = gen_design(Design::Correlated(0.3), n, 4, &mut rng);
        for j in 0..4 {
            for k in 0..4 {
                let c = g.column(j).dot(&g.column(k)) / n as f64;
                let expected = 0.3f64.powi((j as i32 - k as i32).abs());
                assert!((c - expected).abs() < 0.02, "({j},{k}): {c} vs {expected}");
            }
        }
    }

    #[test]
    fn residual_variance_matches_noise() {
        let mut rng = stream_rng(3, 0);
        let n = 100_000;
        let g = Array2::from_elem((n, 1), 1.0);
        let x = Array2::from_elem((1, 1), 2.0);
        let tau: f64 = 0.7;
        let y = gen_observations(&g, &x, tau.sqrt(), &mut rng).unwrap();
        let r: Vec<f64> = y.iter().map(|v| v - 2.0).collect();
        let mean = r.iter().sum::<f64>() / n as f64;
        let var = r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        // sd of the sample variance of a Gaussian is tau sqrt(2/(n-1))
        assert!((var - tau).abs() < 3.0 * tau * (2.0 / (n as f64 - 1.0)).sqrt());
        assert!(mean.abs() < 3.0 * (tau / n as f64).sqrt());
    }
}
