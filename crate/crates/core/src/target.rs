//! Target densities `pi dnu` with `pi(x) ∝ exp(-g(x) - gbar(x))`.
//!
//! `g` is the continuously differentiable part used by the Langevin drift;
//! everything else (penalties, model prior, normalizing constants of the
//! per-row priors) is folded into `log_pi_unnorm`.

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::sparse::{DenseMatrix, SparseState};

const POWER_TOL: f64 = 1e-8;
const POWER_MAX_ITER: usize = 10_000;

pub trait TargetDensity: Sync {
    /// `(P, T)`.
    fn dims(&self) -> (usize, usize);

    fn g_value(&self, x: &DenseMatrix) -> Result<f64>;

    fn g_grad(&self, x: &DenseMatrix) -> Result<DenseMatrix>;

    /// Rows `rows` of `∇g(x)`, in the given order.
    fn g_grad_rows(&self, x: &DenseMatrix, rows: &[usize]) -> Result<DenseMatrix> {
        Ok(self.g_grad(x)?.select(Axis(0), rows))
    }

    /// Unnormalized `log pi` on the stratum of `s`, up to one additive
    /// constant fixed per target instance.
    fn log_pi_unnorm(&self, s: &SparseState) -> f64;

    /// Lipschitz constant of `∇g` (an upper bound for the spike-and-slab model).
    fn lipschitz_bound(&self) -> Result<f64>;

    fn log_pi_dense(&self, x: &DenseMatrix) -> f64 {
        self.log_pi_unnorm(&SparseState::from_dense(x))
    }

    fn check_shape(&self, x: &DenseMatrix) -> Result<()> {
        let (p, t) = self.dims();
        if x.dim() != (p, t) {
            return Err(Error::Shape(format!(
                "expected {p}x{t} matrix, got {}x{}",
                x.nrows(),
                x.ncols()
            )));
        }
        Ok(())
    }
}

/// Exchangeable prior on models: `log w_m` depends on `|m|` only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ModelPrior {
    /// `w_m = omega^{|m|} (1 - omega)^{P - |m|}`.
    Bernoulli(f64),
    /// `log w` tabulated for `|m| = 0..=P`.
    Table(Vec<f64>),
}

impl ModelPrior {
    pub fn log_weight(&self, k: usize, p: usize) -> f64 {
        match self {
            ModelPrior::Bernoulli(omega) => {
                k as f64 * omega.ln() + (p - k) as f64 * (-omega).ln_1p()
            }
            ModelPrior::Table(t) => t[k],
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        match self {
            ModelPrior::Bernoulli(omega) if !(*omega > 0.0 && *omega < 1.0) => {
                Err(Error::InvalidParameter(format!(
                    "prior weight omega must lie in (0,1), got {omega}"
                )))
            }
            ModelPrior::Table(t) if t.len() != p + 1 => Err(Error::InvalidParameter(format!(
                "prior table needs {} entries, got {}",
                p + 1,
                t.len()
            ))),
            _ => Ok(()),
        }
    }
}

/// `log c_lambda`, the per-row normalizing constant of `exp(-lambda ||x||_2)` on `R^T`.
pub fn log_c_lambda(t: usize, lambda: f64) -> f64 {
    assert!(t >= 1, "T must be positive");
    if lambda == 0.0 {
        return 0.0;
    }
    let tf = t as f64;
    std::f64::consts::LN_2 + 0.5 * tf * std::f64::consts::PI.ln() + ln_gamma(tf)
        - tf * lambda.ln()
        - ln_gamma(0.5 * tf)
}

pub fn c_lambda(t: usize, lambda: f64) -> f64 {
    log_c_lambda(t, lambda).exp()
}

/// Spectral norm of `GᵀG` (equivalently of `GGᵀ`) by power iteration.
pub fn gram_spectral_norm(g: &DenseMatrix) -> Result<f64> {
    let p = g.ncols();
    if p == 0 || g.nrows() == 0 {
        return Ok(0.0);
    }
    // Non-constant start vector so it is not orthogonal to structured eigenvectors.
    let mut v = ndarray::Array1::from_iter((0..p).map(|i| 1.0 + i as f64 / p as f64));
    let n0 = v.dot(&v).sqrt();
    v /= n0;
    let mut estimate = 0.0;
    for _ in 0..POWER_MAX_ITER {
        let w = g.t().dot(&g.dot(&v));
        let rayleigh = v.dot(&w);
        let wn = w.dot(&w).sqrt();
        if wn == 0.0 {
            return Ok(0.0);
        }
        v = w / wn;
        if (rayleigh - estimate).abs() <= POWER_TOL * rayleigh.abs() {
            return Ok(rayleigh);
        }
        estimate = rayleigh;
    }
    Err(Error::PowerIteration(POWER_MAX_ITER))
}

/// Shared linear-Gaussian likelihood pieces.
#[derive(Clone, Debug)]
struct LinearModel {
    y: DenseMatrix,
    g: DenseMatrix,
}

impl LinearModel {
    fn new(y: DenseMatrix, g: DenseMatrix) -> Result<Self> {
        if y.nrows() != g.nrows() {
            return Err(Error::Shape(format!(
                "Y has {} rows but G has {}",
                y.nrows(),
                g.nrows()
            )));
        }
        if g.ncols() == 0 || y.ncols() == 0 {
            return Err(Error::Shape("P and T must be positive".into()));
        }
        if y.iter().chain(g.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "non-finite entries in Y or G".into(),
            ));
        }
        Ok(Self { y, g })
    }

    fn dims(&self) -> (usize, usize) {
        (self.g.ncols(), self.y.ncols())
    }

    /// `Gx - Y`, skipping zero rows of `x`.
    fn residual(&self, x: &DenseMatrix) -> DenseMatrix {
        let mut r = -&self.y;
        for (i, row) in x.rows().into_iter().enumerate() {
            if row.iter().all(|&v| v == 0.0) {
                continue;
            }
            let col = self.g.column(i);
            for (mut r_row, &gij) in r.rows_mut().into_iter().zip(col.iter()) {
                r_row.scaled_add(gij, &row);
            }
        }
        r
    }

    fn residual_sparse(&self, s: &SparseState) -> DenseMatrix {
        let mut r = -&self.y;
        for (row, i) in s.mask().active_indices().into_iter().enumerate() {
            let xr = s.active().row(row);
            let col = self.g.column(i);
            for (mut r_row, &gij) in r.rows_mut().into_iter().zip(col.iter()) {
                r_row.scaled_add(gij, &xr);
            }
        }
        r
    }

    /// Rows `rows` of `Gᵀ r`.
    fn gt_rows(&self, r: &DenseMatrix, rows: &[usize]) -> DenseMatrix {
        let mut out = Array2::zeros((rows.len(), r.ncols()));
        for (k, &i) in rows.iter().enumerate() {
            out.row_mut(k).assign(&self.g.column(i).dot(r));
        }
        out
    }
}

fn sum_sq(a: &DenseMatrix) -> f64 {
    a.iter().map(|v| v * v).sum()
}

/// Multivariate regression with an `L_{2,1}` penalty:
/// `pi(x|Y) ∝ w_m c_lambda^{-|m|} exp(-||Y - Gx||²/(2 tau) - lambda ||x||_{2,1})`.
#[derive(Clone, Debug)]
pub struct L21RegressionTarget {
    model: LinearModel,
    tau: f64,
    lambda: f64,
    prior: ModelPrior,
    log_c_lambda: f64,
}

impl L21RegressionTarget {
    pub fn new(
        y: DenseMatrix,
        g: DenseMatrix,
        tau: f64,
        lambda: f64,
        prior: ModelPrior,
    ) -> Result<Self> {
        let model = LinearModel::new(y, g)?;
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "tau must be positive, got {tau}"
            )));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be nonnegative, got {lambda}"
            )));
        }
        let (p, t) = model.dims();
        prior.validate(p)?;
        Ok(Self {
            model,
            tau,
            lambda,
            prior,
            log_c_lambda: log_c_lambda(t, lambda),
        })
    }

    pub fn y(&self) -> &DenseMatrix {
        &self.model.y
    }

    pub fn g(&self) -> &DenseMatrix {
        &self.model.g
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn prior(&self) -> &ModelPrior {
        &self.prior
    }
}

impl TargetDensity for L21RegressionTarget {
    fn dims(&self) -> (usize, usize) {
        self.model.dims()
    }

    fn g_value(&self, x: &DenseMatrix) -> Result<f64> {
        self.check_shape(x)?;
        Ok(sum_sq(&self.model.residual(x)) / (2.0 * self.tau))
    }

    fn g_grad(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.check_shape(x)?;
        let r = self.model.residual(x);
        Ok(self.model.g.t().dot(&r) / self.tau)
    }

    fn g_grad_rows(&self, x: &DenseMatrix, rows: &[usize]) -> Result<DenseMatrix> {
        self.check_shape(x)?;
        let r = self.model.residual(x);
        Ok(self.model.gt_rows(&r, rows) / self.tau)
    }

    fn log_pi_unnorm(&self, s: &SparseState) -> f64 {
        let (p, _) = self.dims();
        let k = s.n_active();
        let r = self.model.residual_sparse(s);
        -sum_sq(&r) / (2.0 * self.tau) - self.lambda * s.l21_norm() + self.prior.log_weight(k, p)
            - k as f64 * self.log_c_lambda
    }

    fn lipschitz_bound(&self) -> Result<f64> {
        Ok(gram_spectral_norm(&self.model.g)? / self.tau)
    }
}

/// The `L_{2,1}` target with an extra ridge term `- v ||x||_2²` in the log density.
#[derive(Clone, Debug)]
pub struct RidgedExampleTarget {
    base: L21RegressionTarget,
    v: f64,
}

impl RidgedExampleTarget {
    pub fn new(
        y: DenseMatrix,
        g: DenseMatrix,
        tau: f64,
        lambda: f64,
        prior: ModelPrior,
        v: f64,
    ) -> Result<Self> {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "ridge coefficient must be positive, got {v}"
            )));
        }
        Ok(Self {
            base: L21RegressionTarget::new(y, g, tau, lambda, prior)?,
            v,
        })
    }

    pub fn base(&self) -> &L21RegressionTarget {
        &self.base
    }

    pub fn v(&self) -> f64 {
        self.v
    }
}

impl TargetDensity for RidgedExampleTarget {
    fn dims(&self) -> (usize, usize) {
        self.base.dims()
    }

    fn g_value(&self, x: &DenseMatrix) -> Result<f64> {
        self.base.g_value(x)
    }

    fn g_grad(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.base.g_grad(x)
    }

    fn g_grad_rows(&self, x: &DenseMatrix, rows: &[usize]) -> Result<DenseMatrix> {
        self.base.g_grad_rows(x, rows)
    }

    fn log_pi_unnorm(&self, s: &SparseState) -> f64 {
        self.base.log_pi_unnorm(s) - self.v * s.frobenius_sq()
    }

    fn lipschitz_bound(&self) -> Result<f64> {
        self.base.lipschitz_bound()
    }
}

/// Spike-and-slab regression with the slab precisions integrated out:
/// `pi(x, m|Y) ∝ exp(-theta/2 ||Y - Gx||²) omega*^{|m|} (1-omega*)^{P-|m|}
///  Π_{active} (1 + x_l²/(2aK))^{-(a+1/2)}`.
#[derive(Clone, Debug)]
pub struct SpikeSlabTarget {
    model: LinearModel,
    theta: f64,
    a: f64,
    k: f64,
    omega_star: f64,
}

impl SpikeSlabTarget {
    pub fn new(
        y: DenseMatrix,
        g: DenseMatrix,
        theta: f64,
        a: f64,
        k: f64,
        omega_star: f64,
    ) -> Result<Self> {
        let model = LinearModel::new(y, g)?;
        if model.dims().1 != 1 {
            return Err(Error::Shape(
                "spike-and-slab target needs a single response column".into(),
            ));
        }
        for (name, v) in [("theta", theta), ("a", a), ("K", k)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(omega_star > 0.0 && omega_star < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "omega* must lie in (0,1), got {omega_star}"
            )));
        }
        Ok(Self {
            model,
            theta,
            a,
            k,
            omega_star,
        })
    }

    pub fn y(&self) -> &DenseMatrix {
        &self.model.y
    }

    pub fn g(&self) -> &DenseMatrix {
        &self.model.g
    }

    fn slab_scale(&self) -> f64 {
        2.0 * self.a * self.k
    }

    fn slab_log_term(&self, v: f64) -> f64 {
        (self.a + 0.5) * (v * v / self.slab_scale()).ln_1p()
    }

    fn slab_grad(&self, v: f64) -> f64 {
        let s = self.slab_scale();
        (self.a + 0.5) * (2.0 * v / s) / (1.0 + v * v / s)
    }
}

impl TargetDensity for SpikeSlabTarget {
    fn dims(&self) -> (usize, usize) {
        self.model.dims()
    }

    fn g_value(&self, x: &DenseMatrix) -> Result<f64> {
        self.check_shape(x)?;
        let r = self.model.residual(x);
        let slab: f64 = x
            .iter()
            .filter(|&&v| v != 0.0)
            .map(|&v| self.slab_log_term(v))
            .sum();
        Ok(0.5 * self.theta * sum_sq(&r) + slab)
    }

    fn g_grad(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.check_shape(x)?;
        let r = self.model.residual(x);
        let mut grad = self.model.g.t().dot(&r) * self.theta;
        grad.zip_mut_with(x, |gv, &xv| *gv += self.slab_grad(xv));
        Ok(grad)
    }

    fn g_grad_rows(&self, x: &DenseMatrix, rows: &[usize]) -> Result<DenseMatrix> {
        self.check_shape(x)?;
        let r = self.model.residual(x);
        let mut grad = self.model.gt_rows(&r, rows) * self.theta;
        for (k, &i) in rows.iter().enumerate() {
            grad[[k, 0]] += self.slab_grad(x[[i, 0]]);
        }
        Ok(grad)
    }

    fn log_pi_unnorm(&self, s: &SparseState) -> f64 {
        let (p, _) = self.dims();
        let k = s.n_active();
        let r = self.model.residual_sparse(s);
        let slab: f64 = s.active().iter().map(|&v| self.slab_log_term(v)).sum();
        -0.5 * self.theta * sum_sq(&r) - slab
            + k as f64 * self.omega_star.ln()
            + (p - k) as f64 * (-self.omega_star).ln_1p()
    }

    fn lipschitz_bound(&self) -> Result<f64> {
        Ok(self.theta * gram_spectral_norm(&self.model.g)? + (self.a + 0.5) / (self.a * self.k))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::{embed, ModelMask};
    use approx::assert_relative_eq;
    use ndarray::array;

    fn scalar_target() -> L21RegressionTarget {
        L21RegressionTarget::new(
            array![[2.0]],
            array![[1.0]],
            1.0,
            0.0,
            ModelPrior::Bernoulli(0.5),
        )
        .unwrap()
    }

    #[test]
    fn g_value_examples() {
        let t = scalar_target();
        assert_eq!(t.g_value(&array![[1.0]]).unwrap(), 0.5);
        assert_eq!(t.g_value(&array![[0.0]]).unwrap(), 2.0);

        let ss = SpikeSlabTarget::new(
            array![[1.0], [2.0]],
            array![[1.0, 0.0], [0.0, 1.0]],
            3.0,
            2.0,
            0.08,
            0.1,
        )
        .unwrap();
        assert_relative_eq!(ss.g_value(&Array2::zeros((2, 1))).unwrap(), 1.5 * 5.0);
    }

    #[test]
    fn gradient_examples() {
        let t = scalar_target();
        assert_eq!(t.g_grad(&array![[1.0]]).unwrap(), array![[-1.0]]);
        assert_eq!(t.g_grad(&array![[2.0]]).unwrap(), array![[0.0]]);
        assert!(t.g_grad(&array![[1.0], [2.0]]).is_err());
    }

    #[test]
    fn log_pi_examples() {
        let y = array![[1.0], [-2.0], [0.5]];
        let g = array![[1.0, 0.2], [0.0, 1.0], [0.3, 0.3]];
        let prior = ModelPrior::Bernoulli(0.1);
        let t = L21RegressionTarget::new(y.clone(), g.clone(), 2.0, 0.0, prior.clone()).unwrap();
        let zero = SparseState::zeros(2, 1);
        let expected = -5.25 / 4.0 + prior.log_weight(0, 2);
        assert_relative_eq!(t.log_pi_unnorm(&zero), expected, epsilon = 1e-14);

        let ss = SpikeSlabTarget::new(y, g, 0.7, 2.0, 0.08, 0.5).unwrap();
        assert_relative_eq!(
            ss.log_pi_unnorm(&zero),
            -0.35 * 5.25 + 2.0 * 0.5f64.ln(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn c_lambda_examples() {
        for t in 1..6 {
            assert_eq!(c_lambda(t, 0.0), 1.0);
        }
        assert_relative_eq!(c_lambda(1, 1.0), 2.0, epsilon = 1e-14);
        assert_relative_eq!(c_lambda(2, 1.0), std::f64::consts::TAU, epsilon = 1e-14);
        // large T stays finite in log space
        assert!(log_c_lambda(400, 0.5).is_finite());
    }

    #[test]
    fn lipschitz_examples() {
        let id = L21RegressionTarget::new(
            Array2::zeros((2, 1)),
            Array2::eye(2),
            1.0,
            0.0,
            ModelPrior::Bernoulli(0.5),
        )
        .unwrap();
        assert_relative_eq!(id.lipschitz_bound().unwrap(), 1.0, epsilon = 1e-12);
        let d = L21RegressionTarget::new(
            array![[0.0]],
            array![[3.0]],
            0.5,
            0.0,
            ModelPrior::Bernoulli(0.5),
        )
        .unwrap();
        assert_relative_eq!(d.lipschitz_bound().unwrap(), 18.0, epsilon = 1e-12);
    }

    #[test]
    fn ridge_subtracts_squared_norm() {
        let y = array![[1.0, 0.0], [0.0, 2.0]];
        let g = array![[1.0, 0.5, 0.0], [0.0, 1.0, 1.0]];
        let prior = ModelPrior::Bernoulli(0.3);
        let base = L21RegressionTarget::new(y.clone(), g.clone(), 1.5, 0.7, prior.clone()).unwrap();
        let ridged = RidgedExampleTarget::new(y, g, 1.5, 0.7, prior, 0.25).unwrap();
        let s = embed(
            ModelMask::new(vec![true, false, true]),
            array![[1.0, 2.0], [-1.0, 0.5]],
        )
        .unwrap();
        assert_relative_eq!(
            base.log_pi_unnorm(&s) - ridged.log_pi_unnorm(&s),
            0.25 * (1.0 + 4.0 + 1.0 + 0.25),
            epsilon = 1e-12
        );
    }

    #[test]
    fn constructors_validate() {
        let y = array![[1.0]];
        let g = array![[1.0]];
        let p = ModelPrior::Bernoulli(0.5);
        assert!(L21RegressionTarget::new(y.clone(), g.clone(), 0.0, 0.0, p.clone()).is_err());
        assert!(L21RegressionTarget::new(y.clone(), g.clone(), 1.0, -1.0, p.clone()).is_err());
        assert!(
            L21RegressionTarget::new(y.clone(), array![[1.0], [2.0]], 1.0, 0.0, p.clone()).is_err()
        );
        assert!(L21RegressionTarget::new(
            y.clone(),
            g.clone(),
            1.0,
            0.0,
            ModelPrior::Bernoulli(1.0)
        )
        .is_err());
        assert!(RidgedExampleTarget::new(y.clone(), g.clone(), 1.0, 0.0, p, 0.0).is_err());
        assert!(SpikeSlabTarget::new(y.clone(), g.clone(), 1.0, 2.0, 0.08, 0.0).is_err());
        assert!(SpikeSlabTarget::new(array![[1.0, 2.0]], g, 1.0, 2.0, 0.08, 0.1).is_err());
    }
}
