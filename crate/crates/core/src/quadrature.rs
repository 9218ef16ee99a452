//! Adaptive Gauss-Kronrod (7/15) integration on finite intervals.

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
}

fn kronrod<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Quadrature {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    Quadrature {
        value: k * h,
        error: ((k - g) * h).abs(),
    }
}

/// Integrates `f` over `[a, b]` until the summed error estimate is below
/// `max(abs_tol, rel_tol |I|)` or `max_intervals` subintervals are in use.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Quadrature {
    integrate_breaks(&mut f, &[a, b], abs_tol, rel_tol)
}

/// As [`integrate`], with the initial partition at the given increasing points.
pub fn integrate_breaks<F: FnMut(f64) -> f64>(
    mut f: F,
    points: &[f64],
    abs_tol: f64,
    rel_tol: f64,
) -> Quadrature {
    const MAX_INTERVALS: usize = 2000;
    let mut parts: Vec<(f64, f64, Quadrature)> = points
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| (w[0], w[1], kronrod(&mut f, w[0], w[1])))
        .collect();
    loop {
        let value: f64 = parts.iter().map(|p| p.2.value).sum();
        let error: f64 = parts.iter().map(|p| p.2.error).sum();
        if error <= abs_tol.max(rel_tol * value.abs()) || parts.len() >= MAX_INTERVALS {
            return Quadrature { value, error };
        }
        let (worst, _) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2.error.total_cmp(&y.1 .2.error))
            .expect("at least one interval");
        let (a, b, _) = parts.swap_remove(worst);
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            return Quadrature { value, error };
        }
        parts.push((a, m, kronrod(&mut f, a, m)));
        parts.push((m, b, kronrod(&mut f, m, b)));
    }
}
