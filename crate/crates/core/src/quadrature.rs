//! Globally adaptive Gauss–Kronrod (7/15) quadrature.

use crate::error::{Error, Result};
use crate::num::Scalar;

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
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Default cap on the number of subintervals.
pub const DEFAULT_BUDGET: usize = 4000;

#[derive(Clone, Copy, Debug)]
pub struct Estimate<T> {
    pub value: T,
    pub error: T,
    pub evaluations: usize,
}

/// One 15-point Kronrod rule on `[a, b]`, returning `(kronrod, gauss)`.
pub fn gk15<T: Scalar>(f: &impl Fn(T) -> T, a: T, b: T) -> (T, T) {
    let half = T::lit(0.5);
    let c = half * (a + b);
    let r = half * (b - a);
    let fc = f(c);
    let mut k = fc * T::lit(WGK[7]);
    let mut g = fc * T::lit(WG[3]);
    for j in 0..7 {
        let dx = r * T::lit(XGK[j]);
        let s = f(c - dx) + f(c + dx);
        k = k + T::lit(WGK[j]) * s;
        if j % 2 == 1 {
            g = g + T::lit(WG[j / 2]) * s;
        }
    }
    (k * r, g * r)
}

struct Segment<T> {
    a: T,
    b: T,
    value: T,
    error: T,
}

/// Integrates `f` over `[a, b]` until the summed error estimate is below
/// `max(abs_tol, rel_tol * |I|)`.
pub fn integrate<T: Scalar>(
    f: impl Fn(T) -> T,
    a: T,
    b: T,
    abs_tol: T,
    rel_tol: T,
    budget: usize,
) -> Result<Estimate<T>> {
    let eval = |a: T, b: T| {
        let (k, g) = gk15(&f, a, b);
        Segment {
            a,
            b,
            value: k,
            error: (k - g).abs(),
        }
    };
    let mut segments = vec![eval(a, b)];
    let floor = T::lit(50.0 * T::EPS);
    loop {
        let total: T = segments.iter().map(|s| s.value).sum();
        let err: T = segments.iter().map(|s| s.error).sum();
        if !total.is_finite() || !err.is_finite() {
            return Err(Error::NumericalFailure("non-finite integrand".into()));
        }
        let target = abs_tol.max(rel_tol * total.abs()).max(floor * total.abs());
        if err <= target {
            return Ok(Estimate {
                value: total,
                error: err,
                evaluations: 15 * segments.len(),
            });
        }
        if segments.len() >= budget {
            return Err(Error::QuadratureFailure {
                tol: target.as_f64(),
                budget,
                estimate: err.as_f64(),
            });
        }
        let (worst, _) = segments
            .iter()
            .enumerate()
            .fold((0, T::neg_infinity()), |acc, (i, s)| {
                if s.error > acc.1 {
                    (i, s.error)
                } else {
                    acc
                }
            });
        let s = segments.swap_remove(worst);
        let mid = T::lit(0.5) * (s.a + s.b);
        segments.push(eval(s.a, mid));
        segments.push(eval(mid, s.b));
    }
}
