//! Autocorrelation, test error and error-versus-iteration curves.

use stmala_core::trace::ChainTrace;
use stmala_core::DenseMatrix;

use crate::error::{HarnessError, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Acf {
    pub values: Vec<f64>,
    /// The series was constant; `values` is all ones by convention.
    pub degenerate: bool,
}

/// Biased autocovariance normalized by the lag-0 term.
pub fn acf(series: &[f64], max_lag: usize) -> Result<Acf> {
    let n = series.len();
    if n <= max_lag {
        return Err(HarnessError::Config(format!(
            "series of length {n} is too short for lag {max_lag}"
        )));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = series.iter().map(|v| v - mean).collect();
    let c0: f64 = centered.iter().map(|v| v * v).sum();
    if c0 == 0.0 {
        return Ok(Acf {
            values: vec![1.0; max_lag + 1],
            degenerate: true,
        });
    }
    let values = (0..=max_lag)
        .map(|k| {
            centered[..n - k]
                .iter()
                .zip(&centered[k..])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / c0
        })
        .collect();
    Ok(Acf {
        values,
        degenerate: false,
    })
}

/// `||G_test x_hat - Y_test||² / n_test`.
pub fn test_mse(g_test: &DenseMatrix, y_test: &DenseMatrix, x_hat: &DenseMatrix) -> Result<f64> {
    if g_test.ncols() != x_hat.nrows()
        || g_test.nrows() != y_test.nrows()
        || x_hat.ncols() != y_test.ncols()
    {
        return Err(HarnessError::Core(stmala_core::Error::Shape(
            "inconsistent test-set shapes".into(),
        )));
    }
    let r = g_test.dot(x_hat) - y_test;
    Ok(r.iter().map(|v| v * v).sum::<f64>() / g_test.nrows() as f64)
}

/// `round(10^{2 + k/4})` up to `n_it`, always ending at `n_it`.
pub fn log_grid(n_it: usize) -> Vec<usize> {
    let mut grid: Vec<usize> = (0..)
        .map(|k| 10f64.powf(2.0 + 0.25 * k as f64).round() as usize)
        .take_while(|&n| n <= n_it)
        .collect();
    if grid.last() != Some(&n_it) {
        grid.push(n_it);
    }
    grid
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurvePoint {
    pub iter: usize,
    /// Activation error of the running frequencies (when an oracle is available).
    pub error: Option<f64>,
    pub acceptance_rate: f64,
    pub mean_active: f64,
}

/// Running statistics of the records up to each grid iteration.
pub fn error_curve(trace: &ChainTrace, exact: Option<&[f64]>, grid: &[usize]) -> Vec<CurvePoint> {
    let p = trace.p();
    let mut counts = vec![0usize; p];
    let mut active_sum = 0usize;
    let mut used = 0usize;
    let mut next = 0usize;
    let mut out = Vec::with_capacity(grid.len());
    for &n in grid {
        while next < trace.len() && trace.record(next).iter <= n {
            let r = trace.record(next);
            for (i, c) in counts.iter_mut().enumerate() {
                if r.is_active(i) {
                    *c += 1;
                }
            }
            active_sum += r.n_active();
            used += 1;
            next += 1;
        }
        if used == 0 {
            continue;
        }
        let last = trace.record(next - 1);
        let error = exact.map(|e| {
            counts
                .iter()
                .zip(e)
                .map(|(&c, &pe)| (c as f64 / used as f64 - pe).abs())
                .sum()
        });
        out.push(CurvePoint {
            iter: n,
            error,
            acceptance_rate: last.cumulative_accepts() as f64 / last.iter as f64,
            mean_active: active_sum as f64 / used as f64,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng;
    use rand_distr::StandardNormal;
    use stmala_core::rng::stream_rng;

    #[test]
    fn acf_properties() {
        let mut rng = stream_rng(10, 0);
        let s: Vec<f64> = (0..100_000).map(|_| rng.sample(StandardNormal)).collect();
        let a = acf(&s, 10).unwrap();
        assert_eq!(a.values[0], 1.0);
        assert!(a.values[1..].iter().all(|v| v.abs() < 0.02));

        let alt: Vec<f64> = (0..1000)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        assert!((acf(&alt, 1).unwrap().values[1] + 1.0).abs() < 2e-3);

        let c = acf(&[2.0; 5], 3).unwrap();
        assert!(c.degenerate);
        assert_eq!(c.values, vec![1.0; 4]);
        assert!(acf(&[1.0, 2.0], 2).is_err());
    }

    #[test]
    fn mse_examples() {
        let g = array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let x = array![[1.0], [-1.0]];
        assert_eq!(test_mse(&g, &g.dot(&x), &x).unwrap(), 0.0);
        let g1 = array![[1.0], [-1.0], [1.0]];
        assert_eq!(
            test_mse(&g1, &array![[0.0], [0.0], [0.0]], &array![[1.0]]).unwrap(),
            1.0
        );

        let g = array![[0.3, -1.2], [2.0, 0.5], [-0.7, 0.1], [1.1, 1.9]];
        let y = array![[0.2], [-0.4], [1.5], [0.0]];
        let mut naive = 0.0;
        for i in 0..4 {
            let mut fit = 0.0;
            for j in 0..2 {
                fit += g[[i, j]] * x[[j, 0]];
            }
            naive += (fit - y[[i, 0]]) * (fit - y[[i, 0]]);
        }
        assert!((test_mse(&g, &y, &x).unwrap() - naive / 4.0).abs() < 1e-12);
    }

    #[test]
    fn grid_is_logarithmic() {
        assert_eq!(log_grid(1000), vec![100, 178, 316, 562, 1000]);
        assert_eq!(log_grid(150), vec![100, 150]);
        assert_eq!(log_grid(50), vec![50]);
    }

    #[test]
    fn curve_tracks_running_frequencies() {
        let mut tr = ChainTrace::new(2, 1);
        let xs = [
            array![[1.0], [0.0]],
            array![[0.0], [0.0]],
            array![[1.0], [2.0]],
            array![[1.0], [2.0]],
        ];
        for (n, x) in xs.iter().enumerate() {
            tr.count_iteration(n % 2 == 0);
            tr.push(n + 1, n % 2 == 0, 0.0, x);
        }
        let c = error_curve(&tr, Some(&[0.5, 0.5]), &[2, 4]);
        assert_eq!(c[0].error, Some(0.5));
        assert_eq!(c[1].error, Some(0.25));
        assert_eq!(c[1].acceptance_rate, 0.5);
        assert_eq!(c[1].mean_active, 1.25);
    }

    proptest::proptest! {
        #[test]
        fn log_grid_is_increasing_and_ends_at_n(n in 1usize..5_000_000) {
            let g = log_grid(n);
            proptest::prop_assert_eq!(*g.last().unwrap(), n);
            proptest::prop_assert!(g.windows(2).all(|w| w[0] < w[1]));
        }

        #[test]
        fn acf_is_bounded(series in proptest::collection::vec(-10f64..10.0, 20..60)) {
            let a = acf(&series, 10).unwrap();
            proptest::prop_assert_eq!(a.values[0], 1.0);
            proptest::prop_assert!(a.values.iter().all(|v| v.abs() <= 1.0 + 1e-12));
        }
    }
}
