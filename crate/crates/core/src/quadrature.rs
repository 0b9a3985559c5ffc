//! Adaptive Gauss–Kronrod (7, 15) quadrature with interval bisection.

use crate::error::{Error, Result};

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

// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let hl = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for i in 0..7 {
        let dx = hl * XGK[i];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[i] * s;
        if i % 2 == 1 {
            gauss += WG[i / 2] * s;
        }
    }
    (kronrod * hl, ((kronrod - gauss) * hl).abs())
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Self {
            abs,
            rel,
            max_intervals: 20_000,
        }
    }
}

/// Integrates `f` over `[a, b]`, bisecting the worst interval until the
/// summed error estimate meets `max(abs, rel·|I|)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::Quadrature(format!("non-finite bounds [{a}, {b}]")));
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };

    // (left, right, value, err)
    let (v, e) = gk15(&f, lo, hi);
    let mut pieces = vec![(lo, hi, v, e)];
    loop {
        let total: f64 = pieces.iter().map(|p| p.2).sum();
        let err: f64 = pieces.iter().map(|p| p.3).sum();
        if !total.is_finite() {
            return Err(Error::Quadrature("integrand is not finite".into()));
        }
        if err <= tol.abs.max(tol.rel * total.abs()) {
            return Ok(sign * total);
        }
        if pieces.len() >= tol.max_intervals {
            return Err(Error::Quadrature(format!(
                "{} intervals exhausted, error estimate {err:e} on value {total:e}",
                pieces.len()
            )));
        }
        let worst = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .unwrap();
        let (l, r, _, _) = pieces.swap_remove(worst);
        let mid = 0.5 * (l + r);
        if mid <= l || mid >= r {
            return Err(Error::Quadrature(format!(
                "interval [{l}, {r}] cannot be bisected further"
            )));
        }
        let (v1, e1) = gk15(&f, l, mid);
        let (v2, e2) = gk15(&f, mid, r);
        pieces.push((l, mid, v1, e1));
        pieces.push((mid, r, v2, e2));
    }
}

/// Sum of [`integrate`] over consecutive breakpoints.
pub fn integrate_piecewise<F: Fn(f64) -> f64>(
    f: F,
    breakpoints: &[f64],
    tol: Tolerance,
) -> Result<f64> {
    let mut total = 0.0;
    for w in breakpoints.windows(2) {
        total += integrate(&f, w[0], w[1], tol)?;
    }
    Ok(total)
}
