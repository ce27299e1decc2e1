//! Scalar functionals of a sampled profile.
//!
//! Integrals use the composite trapezoid rule (the rectangle rule on a
//! periodic grid, which is the trapezoid rule for periodic integrands).
//! Pointwise derivatives are second-order central differences; on a clamped
//! grid the two end points use one-sided second-order stencils. The gradient
//! energy and the Fisher information are sums over cell faces, which makes
//! them the exact discrete energy and dissipation of the evolution scheme.

use crate::error::{Error, Result};
use crate::grid::{Boundary, Field, ModelParams};
use crate::num::{pow_pos, Scalar};

/// Relative support threshold used when the caller does not supply one.
pub const DEFAULT_SUPPORT_THRESHOLD: f64 = 1e-8;

pub(crate) fn trapezoid<T: Scalar>(values: &[T], dx: T, bc: Boundary) -> T {
    let n = values.len();
    if n == 0 {
        return T::zero();
    }
    let sum: T = values.iter().copied().sum();
    match bc {
        Boundary::Periodic => sum * dx,
        Boundary::Clamped => (sum - T::lit(0.5) * (values[0] + values[n - 1])) * dx,
    }
}

/// First derivative by central differences.
pub fn d1<T: Scalar>(v: &[T], dx: T, bc: Boundary) -> Vec<T> {
    let n = v.len();
    let inv = T::one() / (T::lit(2.0) * dx);
    let mut out = vec![T::zero(); n];
    for i in 1..n - 1 {
        out[i] = (v[i + 1] - v[i - 1]) * inv;
    }
    match bc {
        Boundary::Periodic => {
            out[0] = (v[1] - v[n - 1]) * inv;
            out[n - 1] = (v[0] - v[n - 2]) * inv;
        }
        Boundary::Clamped => {
            let (three, four) = (T::lit(3.0), T::lit(4.0));
            out[0] = (-three * v[0] + four * v[1] - v[2]) * inv;
            out[n - 1] = (three * v[n - 1] - four * v[n - 2] + v[n - 3]) * inv;
        }
    }
    out
}

/// Second derivative by central differences.
pub fn d2<T: Scalar>(v: &[T], dx: T, bc: Boundary) -> Vec<T> {
    let n = v.len();
    let inv = T::one() / (dx * dx);
    let two = T::lit(2.0);
    let mut out = vec![T::zero(); n];
    for i in 1..n - 1 {
        out[i] = (v[i + 1] - two * v[i] + v[i - 1]) * inv;
    }
    match bc {
        Boundary::Periodic => {
            out[0] = (v[1] - two * v[0] + v[n - 1]) * inv;
            out[n - 1] = (v[0] - two * v[n - 1] + v[n - 2]) * inv;
        }
        Boundary::Clamped => {
            let (four, five) = (T::lit(4.0), T::lit(5.0));
            out[0] = (two * v[0] - five * v[1] + four * v[2] - v[3]) * inv;
            out[n - 1] = (two * v[n - 1] - five * v[n - 2] + four * v[n - 3] - v[n - 4]) * inv;
        }
    }
    out
}

fn integrate_map<T: Scalar>(f: &Field<T>, g: impl Fn(T, T) -> T) -> T {
    let grid = f.grid();
    let vals: Vec<T> = f
        .values()
        .iter()
        .enumerate()
        .map(|(i, &u)| g(grid.x(i), u))
        .collect();
    trapezoid(&vals, grid.dx(), grid.boundary())
}

/// ∫u dx.
pub fn mass<T: Scalar>(f: &Field<T>) -> T {
    trapezoid(f.values(), f.grid().dx(), f.grid().boundary())
}

/// ∫|u|^p dx.
pub fn lp_integral<T: Scalar>(f: &Field<T>, p: T) -> T {
    integrate_map(f, |_, u| u.abs().powf(p))
}

/// (∫|u|^p dx)^{1/p}, `p >= 1`.
pub fn lp_norm<T: Scalar>(f: &Field<T>, p: T) -> T {
    assert!(p >= T::one(), "lp_norm requires p >= 1");
    pow_pos(lp_integral(f, p), T::one() / p)
}

/// Face differences `(u_{i+1} − u_i)/dx`: `n` faces on a periodic grid, `n − 1` when clamped.
pub(crate) fn face_diffs<T: Scalar>(v: &[T], dx: T, bc: Boundary) -> Vec<T> {
    let n = v.len();
    let mut out: Vec<T> = v.windows(2).map(|w| (w[1] - w[0]) / dx).collect();
    if bc == Boundary::Periodic {
        out.push((v[0] - v[n - 1]) / dx);
    }
    out
}

/// ∫(u_x)² dx as a midpoint sum over cell faces.
pub fn h1_seminorm_sq<T: Scalar>(f: &Field<T>) -> T {
    let g = f.grid();
    let du = face_diffs(f.values(), g.dx(), g.boundary());
    du.iter().map(|&d| d * d).sum::<T>() * g.dx()
}

/// F(u) = ½∫u_x² − ∫|u|^{m+1}/(m+1).
pub fn free_energy<T: Scalar>(f: &Field<T>, params: &ModelParams<T>) -> T {
    let mp1 = params.m() + T::one();
    T::lit(0.5) * h1_seminorm_sq(f) - lp_integral(f, mp1) / mp1
}

/// ∫x u dx.
pub fn first_moment<T: Scalar>(f: &Field<T>) -> T {
    integrate_map(f, |x, u| x * u)
}

/// ∫x² u dx.
pub fn second_moment<T: Scalar>(f: &Field<T>) -> T {
    integrate_map(f, |x, u| x * x * u)
}

/// ∫ u ((u_xx + u^m)_x)² dx, summed over faces with weight `max(ū, 0)`.
pub fn fisher_information<T: Scalar>(f: &Field<T>, params: &ModelParams<T>) -> T {
    let g = f.grid();
    let (dx, bc) = (g.dx(), g.boundary());
    let u = f.values();
    let n = u.len();
    let mu = chemical_potential(f, params);
    let dmu = face_diffs(mu.values(), dx, bc);
    let half = T::lit(0.5);
    dmu.iter()
        .enumerate()
        .map(|(i, &d)| {
            let ubar = half * (u[i] + u[(i + 1) % n]);
            ubar.max(T::zero()) * d * d
        })
        .sum::<T>()
        * dx
}

/// μ = −u_xx − u^m pointwise.
pub fn chemical_potential<T: Scalar>(f: &Field<T>, params: &ModelParams<T>) -> Field<T> {
    let g = f.grid();
    let uxx = d2(f.values(), g.dx(), g.boundary());
    let m = params.m();
    let mu = uxx
        .iter()
        .zip(f.values())
        .map(|(&a, &v)| -a - pow_pos(v, m))
        .collect();
    Field::new(g.clone(), mu, f.time()).expect("finite input gives finite potential")
}

/// `1e-8 * max(u)`.
pub fn default_support_threshold<T: Scalar>(f: &Field<T>) -> T {
    T::lit(DEFAULT_SUPPORT_THRESHOLD) * f.max().max(T::zero())
}

/// Maximal index runs `[start, end]` (inclusive) where `u > threshold`.
pub fn support_runs<T: Scalar>(f: &Field<T>, threshold: T) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start = None;
    for (i, &u) in f.values().iter().enumerate() {
        match (u > threshold, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push((s, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, f.len() - 1));
    }
    runs
}

/// Support components as coordinate intervals `[a_k, b_k]`.
pub fn support_components<T: Scalar>(f: &Field<T>, threshold: T) -> Vec<(T, T)> {
    let g = f.grid();
    support_runs(f, threshold)
        .into_iter()
        .map(|(a, b)| (g.x(a), g.x(b)))
        .collect()
}

/// Largest spread `max μ − min μ` over the support components, ignoring
/// the two points next to each component edge.
pub fn potential_constancy_residual<T: Scalar>(
    f: &Field<T>,
    params: &ModelParams<T>,
    threshold: T,
) -> Result<T> {
    let runs = support_runs(f, threshold);
    if runs.is_empty() {
        return Err(Error::EmptySupport);
    }
    let mu = chemical_potential(f, params);
    let mu = mu.values();
    let mut worst = T::zero();
    for (a, b) in runs {
        if b < a + 4 {
            continue;
        }
        let inner = &mu[a + 2..=b - 2];
        let hi = inner.iter().copied().fold(T::neg_infinity(), T::max);
        let lo = inner.iter().copied().fold(T::infinity(), T::min);
        worst = worst.max(hi - lo);
    }
    Ok(worst)
}
