//! The compactly supported, symmetric steady state with zero contact angle.
//!
//! On its support the profile solves `U'' + U^m = K`, `U'(0) = 0`,
//! `U(±L) = U'(±L) = 0`. Multiplying by `U'` and integrating from the contact
//! point gives the first integral
//!
//! ```text
//! (U')² = 2K·U − 2U^{m+1}/(m+1),    K = h^m/(m+1),   h = U(0),
//! ```
//!
//! so the inverse profile is `x(u) = ∫_u^h dv / sqrt(2Kv − 2v^{m+1}/(m+1))`.
//! With `v = h·sin²θ` both square-root endpoint singularities disappear and
//! every quantity of interest becomes a smooth integral over `θ ∈ [0, π/2]`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::functionals::{
    chemical_potential, default_support_threshold, h1_seminorm_sq, lp_integral, support_runs,
};
use crate::grid::{Boundary, Field, Grid, ModelParams};
use crate::num::Scalar;
use crate::quadrature::{integrate, DEFAULT_BUDGET};
use crate::sharp;

/// Number of points of the default sampling grid.
pub const DEFAULT_SAMPLES: usize = 1024;
/// Default sampling half-width in units of the support half-width.
pub const DEFAULT_MARGIN: f64 = 4.0;
/// Number of θ panels in the inverse-profile table.
const TABLE_PANELS: usize = 256;

/// Quadrature-level description of the steady profile of height `h`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SteadyIntegrals<T> {
    pub m: T,
    pub h: T,
    /// First-integral constant `h^m/(m+1)`; also the constant value of `U'' + U^m`.
    pub k: T,
    pub half_width: T,
    pub mass: T,
    /// ∫U^{m+1}.
    pub int_m1: T,
    /// ∫(U')².
    pub grad_sq: T,
}

struct Kernel<T> {
    m: T,
}

impl<T: Scalar> Kernel<T> {
    /// `(sin²θ, cos θ, 1 − sin^{2m}θ)`, the last one without cancellation near θ = π/2.
    #[inline]
    fn parts(&self, theta: T) -> (T, T, T) {
        let (s, c) = theta.sin_cos();
        let w = s * s;
        let one_minus_wm = -(self.m * (-(c * c)).ln_1p()).exp_m1();
        (w, c, one_minus_wm)
    }

    /// `sqrt((1 − w)/(1 − w^m))`, the smooth density of `x` in θ (up to `2·cx`).
    #[inline]
    fn g(&self, theta: T) -> T {
        let (_, c, d) = self.parts(theta);
        if d <= T::zero() {
            return T::one() / self.m.sqrt();
        }
        c / d.sqrt()
    }
}

fn check_inputs<T: Scalar>(m: T, h: T, tol: T) -> Result<()> {
    if !(m > T::zero() && m.is_finite()) {
        return Err(Error::InvalidParameter(format!("m must be > 0, got {m}")));
    }
    if !(h > T::zero() && h.is_finite()) {
        return Err(Error::InvalidParameter(format!("height must be > 0, got {h}")));
    }
    if !(tol > T::zero()) {
        return Err(Error::InvalidParameter("tolerance must be > 0".into()));
    }
    Ok(())
}

/// Length scale `cx = h^{(1−m)/2}·sqrt((m+1)/2)` so that `x = cx·∫ 2g dθ`.
fn x_scale<T: Scalar>(m: T, h: T) -> T {
    let one = T::one();
    let two = T::lit(2.0);
    h.powf((one - m) / two) * ((m + one) / two).sqrt()
}

/// Computes half-width, mass, ∫U^{m+1} and ∫(U')² by adaptive quadrature.
pub fn integrals<T: Scalar>(m: T, h: T, tol: T) -> Result<SteadyIntegrals<T>> {
    check_inputs(m, h, tol)?;
    let one = T::one();
    let two = T::lit(2.0);
    let kern = Kernel { m };
    let top = T::FRAC_PI_2();
    let zero = T::zero();
    let quad = |f: &dyn Fn(T) -> T| -> Result<T> {
        Ok(integrate(f, zero, top, tol * T::lit(1e-3), tol, DEFAULT_BUDGET)?.value)
    };

    let cx = x_scale(m, h);
    let i_len = quad(&|t| two * kern.g(t))?;
    let i_mass = quad(&|t| {
        let (w, _, _) = kern.parts(t);
        two * w * kern.g(t)
    })?;
    let i_pow = quad(&|t| {
        let (w, _, _) = kern.parts(t);
        two * w.powf(m + one) * kern.g(t)
    })?;
    let i_grad = quad(&|t| {
        let (w, c, d) = kern.parts(t);
        two * w * c * d.max(zero).sqrt()
    })?;

    Ok(SteadyIntegrals {
        m,
        h,
        k: h.powf(m) / (m + one),
        half_width: cx * i_len,
        mass: two * h * cx * i_mass,
        int_m1: two * h.powf(m + one) * cx * i_pow,
        grad_sq: two * (two / (m + one)).sqrt() * h.powf((m + T::lit(3.0)) / two) * i_grad,
    })
}

/// Inverse profile `θ ↦ x` tabulated on uniform θ panels of the unit-amplitude profile.
#[derive(Clone, Debug)]
struct InverseTable<T> {
    m: T,
    cx: T,
    dtheta: T,
    /// `x` at the panel boundaries `θ_j = j·dθ`, decreasing from `L` to 0.
    x: Vec<T>,
}

impl<T: Scalar> InverseTable<T> {
    fn build(m: T, h: T, tol: T) -> Result<Self> {
        let kern = Kernel { m };
        let cx = x_scale(m, h);
        let dtheta = T::FRAC_PI_2() / T::from_usize(TABLE_PANELS).unwrap();
        let two = T::lit(2.0);
        let mut x = vec![T::zero(); TABLE_PANELS + 1];
        for j in (0..TABLE_PANELS).rev() {
            let a = dtheta * T::from_usize(j).unwrap();
            let piece = integrate(
                |t| two * kern.g(t),
                a,
                a + dtheta,
                tol * T::lit(1e-4),
                tol * T::lit(1e-2),
                DEFAULT_BUDGET,
            )?
            .value;
            x[j] = x[j + 1] + cx * piece;
        }
        Ok(Self { m, cx, dtheta, x })
    }

    /// θ with `x(θ) = xq`, for `0 <= xq <= x[0]`.
    fn theta_of(&self, xq: T) -> T {
        let kern = Kernel { m: self.m };
        let two = T::lit(2.0);
        // x is decreasing in j; find panel with x[j] >= xq >= x[j+1].
        let j = match self
            .x
            .binary_search_by(|probe| xq.partial_cmp(probe).unwrap())
        {
            Ok(j) => return self.dtheta * T::from_usize(j).unwrap(),
            Err(j) => j.saturating_sub(1).min(TABLE_PANELS - 1),
        };
        let a = self.dtheta * T::from_usize(j).unwrap();
        let (xa, xb) = (self.x[j], self.x[j + 1]);
        let (mut lo, mut hi) = (a, a + self.dtheta);
        let mut theta = a + self.dtheta * (xa - xq) / (xa - xb);
        let phi = |t: T| {
            let (k, _) = crate::quadrature::gk15(&|s| two * kern.g(s), a, t);
            xa - self.cx * k - xq
        };
        for _ in 0..60 {
            let f = phi(theta);
            if f > T::zero() {
                lo = theta;
            } else {
                hi = theta;
            }
            let slope = -two * self.cx * kern.g(theta);
            let mut next = theta - f / slope;
            if !(next > lo && next < hi) {
                next = T::lit(0.5) * (lo + hi);
            }
            if (next - theta).abs() <= T::lit(4.0 * T::EPS) * (T::one() + theta.abs()) {
                return next;
            }
            theta = next;
        }
        theta
    }
}

/// Extremal steady state of a given height, with its integrals and a sampled copy.
///
/// Holds the profile `amp · V(x / stretch)` where `V` is the unit-coefficient
/// solution of height `h / amp`; `amp = stretch = 1` for freshly built profiles.
#[derive(Clone, Debug)]
pub struct SteadyProfile<T> {
    pub m: T,
    pub h: T,
    pub k: T,
    pub half_width: T,
    pub mass: T,
    pub norm_m1: T,
    pub int_m1: T,
    pub grad_sq: T,
    pub samples: Field<T>,
    base_h: T,
    amp: T,
    stretch: T,
    table: InverseTable<T>,
}

impl<T: Scalar> SteadyProfile<T> {
    /// `U(x)`, exactly zero outside `[-L, L]`.
    pub fn value_at(&self, x: T) -> T {
        let xb = x.abs() / self.stretch;
        if xb >= self.table.x[0] {
            return T::zero();
        }
        let s = self.table.theta_of(xb).sin();
        self.amp * self.base_h * s * s
    }

    /// Samples `U` on an arbitrary grid.
    pub fn sample(&self, grid: &Grid<T>) -> Field<T> {
        Field::from_fn(grid.clone(), |x| self.value_at(x)).expect("profile values are finite")
    }

    /// Samples the mass-preserving dilation `λ·U(λx)`.
    pub fn sample_dilated(&self, grid: &Grid<T>, lambda: T) -> Field<T> {
        Field::from_fn(grid.clone(), |x| lambda * self.value_at(lambda * x))
            .expect("profile values are finite")
    }

    /// Default sampling grid: `DEFAULT_SAMPLES` points on `[-4L, 4L]`.
    pub fn default_grid(&self) -> Grid<T> {
        Grid::centered(
            T::lit(DEFAULT_MARGIN) * self.half_width,
            DEFAULT_SAMPLES,
            Boundary::Periodic,
        )
        .expect("half-width is positive")
    }

    /// Replaces the stored samples, e.g. with a resampled or perturbed copy.
    pub fn with_samples(mut self, samples: Field<T>) -> Self {
        self.samples = samples;
        self
    }

    pub fn params(&self) -> Result<ModelParams<T>> {
        ModelParams::new(self.m, self.mass)
    }

    /// Slope magnitude at the numerically computed contact point, from the first integral.
    pub fn contact_slope(&self) -> T {
        let u = self.value_at(self.half_width * (T::one() - T::lit(4.0 * T::EPS)));
        let two = T::lit(2.0);
        let mp1 = self.m + T::one();
        let q = two * self.k * u - two * u.powf(mp1) / mp1;
        q.max(T::zero()).sqrt()
    }

    /// Constant `C̄ = (m+3)/(3(m+1)) · ∫U^{m+1} / M` taken by `U'' + U^m` on the support.
    pub fn potential_constant(&self) -> T {
        let three = T::lit(3.0);
        (self.m + three) / (three * (self.m + T::one())) * self.int_m1 / self.mass
    }
}

/// Builds the steady profile of height `h` to relative quadrature tolerance `tol`.
pub fn profile_from_height<T: Scalar>(m: T, h: T, tol: T) -> Result<SteadyProfile<T>> {
    let ints = integrals(m, h, tol)?;
    let table = InverseTable::build(m, h, tol)?;
    let mut profile = SteadyProfile {
        m,
        h,
        k: ints.k,
        half_width: ints.half_width,
        mass: ints.mass,
        norm_m1: ints.int_m1.powf(T::one() / (m + T::one())),
        int_m1: ints.int_m1,
        grad_sq: ints.grad_sq,
        samples: Field::zeros(Grid::centered(T::one(), 8, Boundary::Periodic)?),
        base_h: h,
        amp: T::one(),
        stretch: T::one(),
        table,
    };
    profile.samples = profile.sample(&profile.default_grid());
    Ok(profile)
}

/// Height whose profile carries mass `target`; `mass(h) ∝ h^{(3−m)/2}`.
pub fn height_for_mass<T: Scalar>(m: T, target: T, tol: T) -> Result<T> {
    if m == T::lit(3.0) {
        return Err(Error::MassCritical(
            "the mass of the steady profile does not depend on its height",
        ));
    }
    if !(target > T::zero() && target.is_finite()) {
        return Err(Error::InvalidParameter(format!("mass must be > 0, got {target}")));
    }
    let quad_tol = tol.min(T::lit(1e-12));
    let log_mismatch = |h: T| -> Result<T> { Ok((integrals(m, h, quad_tol)?.mass / target).ln()) };

    let (mut lo, mut hi) = (T::lit(1e-3), T::lit(1e3));
    let (mut f_lo, mut f_hi) = (log_mismatch(lo)?, log_mismatch(hi)?);
    let mut expansions = 0;
    while f_lo * f_hi > T::zero() {
        expansions += 1;
        if expansions > 40 {
            return Err(Error::BracketFailure(format!(
                "mass {target} not bracketed for m = {m} within h in [{lo:e}, {hi:e}]"
            )));
        }
        lo = lo * T::lit(1e-2);
        hi = hi * T::lit(1e2);
        f_lo = log_mismatch(lo)?;
        f_hi = log_mismatch(hi)?;
    }
    // Regula falsi in log h (Illinois variant); log mass is affine in log h.
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let (mut fa, mut fb) = (f_lo, f_hi);
    let mut side = 0i8;
    for _ in 0..200 {
        let c = (a * fb - b * fa) / (fb - fa);
        let fc = log_mismatch(c.exp())?;
        if fc.abs() <= tol || (b - a).abs() <= T::lit(4.0 * T::EPS) * c.abs().max(T::one()) {
            return Ok(c.exp());
        }
        if fc * fb > T::zero() {
            b = c;
            fb = fc;
            if side == -1 {
                fa = fa * T::lit(0.5);
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb = fb * T::lit(0.5);
            }
            side = 1;
        }
    }
    Err(Error::BracketFailure("mass matching did not converge".into()))
}

/// The unique steady state `U_*` of mass `M` (`m ≠ 3`).
pub fn solve_for_mass<T: Scalar>(m: T, mass: T, tol: T) -> Result<SteadyProfile<T>> {
    let h = height_for_mass(m, mass, tol)?;
    profile_from_height(m, h, tol.min(T::lit(1e-12)))
}

/// Member of the one-parameter `m = 3` family; every member has the critical mass.
pub fn family_member<T: Scalar>(h: T, tol: T) -> Result<SteadyProfile<T>> {
    profile_from_height(T::lit(3.0), h, tol)
}

/// `U(x) = V(x/μ)/λ`: mass scales by `μ/λ`, ∫U^{m+1} by `μ/λ^{m+1}`.
///
/// Only `μ = λ^{(m−1)/2}` maps a steady state to a steady state with unit
/// coefficients; other choices still solve the inequality's Euler–Lagrange
/// equation but with rescaled coefficients.
pub fn rescale<T: Scalar>(p: &SteadyProfile<T>, lambda: T, mu: T) -> Result<SteadyProfile<T>> {
    if !(lambda > T::zero() && mu > T::zero()) {
        return Err(Error::InvalidParameter("rescale factors must be > 0".into()));
    }
    let one = T::one();
    let mp1 = p.m + one;
    let h = p.h / lambda;
    let int_m1 = p.int_m1 * mu / lambda.powf(mp1);
    let mut out = SteadyProfile {
        m: p.m,
        h,
        k: h.powf(p.m) / mp1,
        half_width: p.half_width * mu,
        mass: p.mass * mu / lambda,
        norm_m1: int_m1.powf(one / mp1),
        int_m1,
        grad_sq: p.grad_sq / (lambda * lambda * mu),
        samples: p.samples.clone(),
        base_h: p.base_h,
        amp: p.amp / lambda,
        stretch: p.stretch * mu,
        table: p.table.clone(),
    };
    let g = p.samples.grid();
    let grid = Grid::new(g.x_min() * mu, g.x_max() * mu, g.len(), g.boundary())?;
    out.samples = out.sample(&grid);
    Ok(out)
}

/// Factors `(λ_*, μ_*)` taking any steady profile `V` to the one with mass `M`
/// and `L^{m+1}` norm `P_*`.
pub fn normalizing_factors<T: Scalar>(v: &SteadyProfile<T>, mass: T, p_star: T) -> (T, T) {
    let mp1 = v.m + T::one();
    let lambda = (mass / v.mass * v.int_m1 / p_star.powf(mp1)).powf(T::one() / v.m);
    let mu = lambda * mass / v.mass;
    (lambda, mu)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Check {
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn new(value: f64, tolerance: f64) -> Self {
        Self {
            value,
            tolerance,
            pass: value.is_finite() && value <= tolerance,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ValidationTolerances {
    pub quadrature: f64,
    pub sampled: f64,
    /// Contact slope bound in units of `h/L`.
    pub contact: f64,
}

impl Default for ValidationTolerances {
    fn default() -> Self {
        Self {
            quadrature: 1e-8,
            sampled: 1e-3,
            contact: 1e-6,
        }
    }
}

/// Residuals of the steady-state identities; quadrature-level checks use the
/// stored integrals, sampled checks use `samples`.
#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub m: f64,
    pub h: f64,
    pub mass: f64,
    pub half_width: f64,
    /// |∫U'² − 2m/(3(m+1))∫U^{m+1}| / ∫U'².
    pub pohozaev: Check,
    pub pohozaev_sampled: Check,
    /// max |μ + C̄| / C̄ over the sampled support interior.
    pub potential_sampled: Check,
    /// |U'(L)| / (h/L).
    pub contact_slope: Check,
    /// |Q(U) − C_*| / C_* with quadrature norms.
    pub nagy: Check,
    pub nagy_sampled: Check,
    pub pass: bool,
}

pub fn validate<T: Scalar>(p: &SteadyProfile<T>, tolerances: ValidationTolerances) -> Result<ValidationReport> {
    let params = ModelParams::new(p.m, p.mass)?;
    let m = p.m.as_f64();
    let poho_coef = 2.0 * m / (3.0 * (m + 1.0));
    let pohozaev = (p.grad_sq.as_f64() - poho_coef * p.int_m1.as_f64()).abs() / p.grad_sq.as_f64();

    let f = &p.samples;
    let h1 = h1_seminorm_sq(f).as_f64();
    let int_s = lp_integral(f, p.m + T::one()).as_f64();
    let pohozaev_sampled = (h1 - poho_coef * int_s).abs() / h1;

    // Both terms of μ are of size h^m on the support, so that is the scale.
    let c_bar = p.potential_constant().as_f64();
    let mu_scale = p.h.as_f64().powf(m);
    let mu = chemical_potential(f, &params);
    let mut potential = 0.0f64;
    for (a, b) in support_runs(f, default_support_threshold(f)) {
        if b < a + 4 {
            continue;
        }
        for &v in &mu.values()[a + 2..=b - 2] {
            potential = potential.max((v.as_f64() + c_bar).abs() / mu_scale);
        }
    }

    let slope = p.contact_slope().as_f64() / (p.h.as_f64() / p.half_width.as_f64());

    let c_star = sharp::sharp_constant(p.m)?.as_f64();
    let q_quad = sharp::nagy_quotient_from_integrals(p.m, p.mass, p.int_m1, p.grad_sq).as_f64();
    let q_samp = sharp::nagy_quotient(f, p.m)?.as_f64();

    let report = ValidationReport {
        m,
        h: p.h.as_f64(),
        mass: p.mass.as_f64(),
        half_width: p.half_width.as_f64(),
        pohozaev: Check::new(pohozaev, tolerances.quadrature),
        pohozaev_sampled: Check::new(pohozaev_sampled, tolerances.sampled),
        potential_sampled: Check::new(potential, tolerances.sampled),
        contact_slope: Check::new(slope, tolerances.contact),
        nagy: Check::new((q_quad - c_star).abs() / c_star, tolerances.quadrature.max(1e-6)),
        nagy_sampled: Check::new((q_samp - c_star).abs() / c_star, tolerances.sampled),
        pass: false,
    };
    let pass = [
        report.pohozaev,
        report.pohozaev_sampled,
        report.potential_sampled,
        report.contact_slope,
        report.nagy,
        report.nagy_sampled,
    ]
    .iter()
    .all(|c| c.pass);
    Ok(ValidationReport { pass, ..report })
}
