//! Sharp constant of the interpolation inequality
//! `‖f‖_{m+1}^{3(m+1)/m} ≤ C_* ‖f‖_1^{(m+3)/m} ‖f_x‖_2²` and the threshold
//! quantities derived from it.
//!
//! `C_*` is evaluated as the quotient at the extremal profile built in
//! [`crate::steady`], where equality holds. The quotient is invariant under
//! `f ↦ a·f(b·x)`, so any profile height gives the same value.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::functionals::{h1_seminorm_sq, lp_integral, mass};
use crate::grid::{alpha, Field};
use crate::num::Scalar;
use crate::steady;

/// Relative quadrature tolerance used for the constants.
pub const ORACLE_TOL: f64 = 1e-13;

fn require_positive<T: Scalar>(name: &str, v: T) -> Result<()> {
    if v > T::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")))
    }
}

/// `I^{3/m} / (M^{(m+3)/m} · G)` with `I = ∫f^{m+1}`, `M = ∫f`, `G = ∫f_x²`.
pub fn nagy_quotient_from_integrals<T: Scalar>(m: T, mass: T, int_m1: T, grad_sq: T) -> T {
    int_m1.powf(T::lit(3.0) / m) / (mass.powf(alpha(m)) * grad_sq)
}

/// Sharp constant evaluated at the profile of height `h`.
pub fn sharp_constant_at<T: Scalar>(m: T, h: T) -> Result<T> {
    require_positive("m", m)?;
    let ints = steady::integrals(m, h, T::lit(ORACLE_TOL))?;
    Ok(nagy_quotient_from_integrals(m, ints.mass, ints.int_m1, ints.grad_sq))
}

pub fn sharp_constant<T: Scalar>(m: T) -> Result<T> {
    sharp_constant_at(m, T::one())
}

/// Gamma-function closed form `Q(x, y) = (x+y)^{-(x+y)} Γ(x+y) / (x^{-x} y^{-y} Γ(x) Γ(y))`
/// at `x = 3/(2m)`, `y = 1/2`, compared against the quotient value.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GammaCrossCheck {
    pub m: f64,
    pub c_star: f64,
    pub q: f64,
    /// `(3/4 · Q)²`.
    pub literal_value: f64,
    /// `sqrt(C_*) / Q`, the prefactor that reconciles the closed form with the quotient.
    pub implied_prefactor: f64,
}

pub fn gamma_cross_check(m: f64) -> Result<GammaCrossCheck> {
    use libm::lgamma as ln_gamma;
    let c_star = sharp_constant(m)?;
    let x = 3.0 / (2.0 * m);
    let y = 0.5;
    let ln_q = -(x + y) * (x + y).ln() + ln_gamma(x + y) + x * x.ln() + y * y.ln()
        - ln_gamma(x)
        - ln_gamma(y);
    let q = ln_q.exp();
    Ok(GammaCrossCheck {
        m,
        c_star,
        q,
        literal_value: (0.75 * q).powi(2),
        implied_prefactor: c_star.sqrt() / q,
    })
}

/// `M_c = (2 / C_*(3))^{1/2}`.
pub fn critical_mass<T: Scalar>() -> Result<T> {
    Ok((T::lit(2.0) / sharp_constant(T::lit(3.0))?).sqrt())
}

fn p_star_with<T: Scalar>(m: T, mass: T, c_star: T) -> T {
    let one = T::one();
    let three = T::lit(3.0);
    let base = three * (m + one) / (T::lit(2.0) * m * c_star * mass.powf(alpha(m)));
    base.powf(m / ((m + one) * (m - three)))
}

/// Threshold norm `P_*(m, M)`; equals `‖U_*‖_{m+1}` for the mass-`M` steady state.
pub fn p_star<T: Scalar>(m: T, mass: T) -> Result<T> {
    require_positive("m", m)?;
    require_positive("mass", mass)?;
    if m == T::lit(3.0) {
        return Err(Error::MassCritical("P_* is undefined"));
    }
    Ok(p_star_with(m, mass, sharp_constant(m)?))
}

fn energy_from_p_star<T: Scalar>(m: T, p: T) -> T {
    let one = T::one();
    let three = T::lit(3.0);
    (m - three) / (three * (m + one)) * p.powf(m + one)
}

/// `F(U_*) = (m−3)/(3(m+1)) · P_*^{m+1}`.
pub fn steady_energy<T: Scalar>(m: T, mass: T) -> Result<T> {
    Ok(energy_from_p_star(m, p_star(m, mass)?))
}

/// Quotient of the inequality for a sampled profile; at most `C_*` up to discretization.
pub fn nagy_quotient<T: Scalar>(f: &Field<T>, m: T) -> Result<T> {
    let l1 = mass(&f.map(|v| v.abs())?);
    if l1 <= T::zero() {
        return Err(Error::DegenerateField("zero L1 norm"));
    }
    let grad = h1_seminorm_sq(f);
    if grad <= T::zero() {
        return Err(Error::DegenerateField("zero gradient"));
    }
    let int_m1 = lp_integral(f, m + T::one());
    Ok(nagy_quotient_from_integrals(m, l1, int_m1, grad))
}

/// All constants for one `(m, M)` pair.
#[derive(Clone, Copy, Debug)]
pub struct SharpConstants<T> {
    pub m: T,
    pub mass: Option<T>,
    pub alpha: T,
    pub c_star: T,
    pub m_c: Option<T>,
    pub p_star: Option<T>,
    pub f_star: Option<T>,
}

impl<T: Scalar> SharpConstants<T> {
    pub fn new(m: T, mass: Option<T>) -> Result<Self> {
        require_positive("m", m)?;
        if let Some(mass) = mass {
            require_positive("mass", mass)?;
        }
        let c_star = sharp_constant(m)?;
        let critical = m == T::lit(3.0);
        let m_c = critical.then(|| (T::lit(2.0) / c_star).sqrt());
        let p_star = match mass {
            Some(mass) if !critical => Some(p_star_with(m, mass, c_star)),
            _ => None,
        };
        Ok(Self {
            m,
            mass,
            alpha: alpha(m),
            c_star,
            m_c,
            p_star,
            f_star: p_star.map(|p| energy_from_p_star(m, p)),
        })
    }

    fn require_threshold(&self) -> Result<(T, T, T)> {
        match (self.mass, self.p_star, self.f_star) {
            (Some(mass), Some(p), Some(f)) => Ok((mass, p, f)),
            _ if self.m == T::lit(3.0) => Err(Error::MassCritical("P_* is undefined")),
            _ => Err(Error::InvalidParameter("a mass is required".into())),
        }
    }

    /// `g(x) = x^{α+2} / (2 C_* M^α) − x^{m+1}/(m+1)`, the lower bound of `F`
    /// over mass-`M` profiles with `‖u‖_{m+1} = x`.
    pub fn g_aux(&self, x: T) -> Result<T> {
        let mass = self
            .mass
            .ok_or_else(|| Error::InvalidParameter("a mass is required".into()))?;
        if x < T::zero() {
            return Err(Error::InvalidParameter(format!("g_aux needs x >= 0, got {x}")));
        }
        let two = T::lit(2.0);
        let mp1 = self.m + T::one();
        Ok(x.powf(self.alpha + two) / (two * self.c_star * mass.powf(self.alpha))
            - x.powf(mp1) / mp1)
    }

    /// Roots `μ1 < 1 < μ2` of `g(μ·P_*) = F0` for `m > 3`, `F0 < F(U_*)`.
    pub fn gap_certificates(&self, f0: T) -> Result<(T, T)> {
        if self.m <= T::lit(3.0) {
            return Err(Error::NotSupercritical(self.m.as_f64()));
        }
        let (_, p, f_star) = self.require_threshold()?;
        if !(f0 < f_star) {
            return Err(Error::EnergyTooHigh {
                f0: f0.as_f64(),
                f_star: f_star.as_f64(),
            });
        }
        let h = |mu: T| -> T { self.g_aux(mu * p).expect("mass present") - f0 };

        // g is increasing on (0, P_*) and decreasing on (P_*, ∞).
        let mu1 = if f0 <= T::zero() {
            T::zero()
        } else {
            bisect(&h, T::lit(1e-12), T::one())?
        };
        let mut upper = T::lit(2.0);
        let mut doublings = 0;
        while h(upper) > T::zero() {
            upper = upper * T::lit(2.0);
            doublings += 1;
            if doublings > 200 {
                return Err(Error::BracketFailure("upper gap root".into()));
            }
        }
        let mu2 = bisect(&h, T::one(), upper)?;
        Ok((mu1, mu2))
    }
}

/// Bisection to full precision for a sign change on `[a, b]`.
fn bisect<T: Scalar>(f: &impl Fn(T) -> T, mut a: T, mut b: T) -> Result<T> {
    let mut fa = f(a);
    let fb = f(b);
    if fa == T::zero() {
        return Ok(a);
    }
    if fb == T::zero() {
        return Ok(b);
    }
    if fa * fb > T::zero() {
        return Err(Error::BracketFailure(format!("no sign change on [{a}, {b}]")));
    }
    for _ in 0..400 {
        let mid = T::lit(0.5) * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let fm = f(mid);
        if fm == T::zero() {
            return Ok(mid);
        }
        if fa * fm < T::zero() {
            b = mid;
        } else {
            a = mid;
            fa = fm;
        }
    }
    Ok(T::lit(0.5) * (a + b))
}

pub fn g_aux<T: Scalar>(x: T, m: T, mass: T) -> Result<T> {
    SharpConstants::new(m, Some(mass))?.g_aux(x)
}

pub fn gap_certificates<T: Scalar>(f0: T, m: T, mass: T) -> Result<(T, T)> {
    if m <= T::lit(3.0) {
        return Err(Error::NotSupercritical(m.as_f64()));
    }
    SharpConstants::new(m, Some(mass))?.gap_certificates(f0)
}

/// `(2/(m−1), (4m−2)/(m−1))`: `λ^a u(λx, λ^b t)` solves the equation whenever `u` does.
pub fn scaling_exponents<T: Scalar>(m: T) -> Result<(T, T)> {
    let one = T::one();
    if m == one {
        return Err(Error::DegenerateScaling);
    }
    let two = T::lit(2.0);
    Ok((two / (m - one), (T::lit(4.0) * m - two) / (m - one)))
}

/// `(β_L, β_H)` with `L = T^{β_L}`, `H = T^{β_H}`.
pub fn similarity_exponents<T: Scalar>(m: T) -> Result<(T, T)> {
    let half = T::lit(0.5);
    if !(m > half) {
        return Err(Error::InvalidParameter(format!(
            "similarity exponents need m > 1/2, got {m}"
        )));
    }
    let one = T::one();
    let two = T::lit(2.0);
    Ok(((m - one) / (T::lit(4.0) * m - two), -one / (two * m - one)))
}

/// JSON payload of the `constants` command.
#[derive(Clone, Debug, Serialize)]
pub struct ConstantsReport {
    pub m: f64,
    pub alpha: f64,
    pub c_star: f64,
    pub m_c: Option<f64>,
    pub p_star: Option<f64>,
    pub f_star: Option<f64>,
    #[serde(rename = "beta_L")]
    pub beta_l: Option<f64>,
    #[serde(rename = "beta_H")]
    pub beta_h: Option<f64>,
}

impl<T: Scalar> SharpConstants<T> {
    pub fn report(&self) -> ConstantsReport {
        let sim = similarity_exponents(self.m).ok();
        ConstantsReport {
            m: self.m.as_f64(),
            alpha: self.alpha.as_f64(),
            c_star: self.c_star.as_f64(),
            m_c: self.m_c.map(Scalar::as_f64),
            p_star: self.p_star.map(Scalar::as_f64),
            f_star: self.f_star.map(Scalar::as_f64),
            beta_l: sim.map(|s| s.0.as_f64()),
            beta_h: sim.map(|s| s.1.as_f64()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Boundary, Grid, ModelParams};
    use std::f64::consts::PI;

    fn beta(a: f64, b: f64) -> f64 {
        (libm::lgamma(a) + libm::lgamma(b) - libm::lgamma(a + b)).exp()
    }

    // Quotient at h = 1 from the Beta-function closed forms of the steady integrals.
    fn c_star_oracle(m: f64) -> f64 {
        let c = ((m + 1.0) / 2.0).sqrt();
        let mass = 2.0 * c / m * beta(3.0 / (2.0 * m), 0.5);
        let pow = 2.0 * c / m * beta((2.0 * m + 3.0) / (2.0 * m), 0.5);
        let grad = 2.0 * (2.0 / (m + 1.0)).sqrt() / m * beta(3.0 / (2.0 * m), 1.5);
        pow.powf(3.0 / m) / (mass.powf((m + 3.0) / m) * grad)
    }

    const M_LIST: [f64; 8] = [1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 6.0];

    #[test]
    fn c_star_table() {
        let table = [
            0.170979497396445,
            0.1875,
            0.202344585657876,
            0.215765958154728,
            0.227972663195260,
            0.249393406839285,
            0.267638262371315,
            0.283418835518260,
        ];
        for (&m, &want) in M_LIST.iter().zip(&table) {
            let got: f64 = sharp_constant(m).unwrap();
            assert!((got - want).abs() < 1e-12, "m={m}: {got}");
            assert!((got - c_star_oracle(m)).abs() < 1e-12 * want);
        }
        let c3: f64 = sharp_constant(3.0).unwrap();
        assert!((c3 - 9.0 / (4.0 * PI * PI)).abs() < 1e-13);
    }

    #[test]
    fn c_star_is_height_invariant() {
        for &m in &[1.0, 1.5, 2.0, 2.5, 4.0, 5.0, 6.0] {
            let base: f64 = sharp_constant(m).unwrap();
            for &h in &[0.01, 0.3, 7.0, 150.0] {
                let c = sharp_constant_at(m, h).unwrap();
                assert!((c - base).abs() <= 1e-8 * base, "m={m} h={h}");
            }
        }
    }

    #[test]
    fn single_precision_agrees() {
        let c: f32 = sharp_constant(4.0f32).unwrap();
        assert!((c as f64 - 0.249393406839285).abs() < 1e-5);
    }

    #[test]
    fn gamma_prefactor_is_reconciled() {
        for &m in &M_LIST {
            let g = gamma_cross_check(m).unwrap();
            assert!((g.implied_prefactor - (m + 3.0) / 2.0).abs() < 1e-10, "{g:?}");
        }
        let g3 = gamma_cross_check(3.0).unwrap();
        assert!((g3.literal_value - g3.c_star).abs() > 0.1 * g3.c_star);
    }

    #[test]
    fn critical_mass_anchor() {
        let mc: f64 = critical_mass().unwrap();
        assert!((mc - 2.0 * 2f64.sqrt() * PI / 3.0).abs() < 1e-12);
        let c3: f64 = sharp_constant(3.0).unwrap();
        assert!((mc * mc * c3 - 2.0).abs() < 1e-13);
        for &h in &[0.5, 1.0, 4.0] {
            let p = steady::family_member(h, 1e-13).unwrap();
            assert!((p.mass - mc).abs() < 1e-10);
        }
    }

    #[test]
    fn p_star_matches_steady_norm() {
        assert!(matches!(p_star(3.0, 1.0), Err(Error::MassCritical(_))));
        assert!(matches!(steady_energy(3.0, 1.0), Err(Error::MassCritical(_))));
        for &(m, mass) in &[(4.0, 1.0), (2.0, 1.0), (5.0, 0.4), (1.5, 3.0)] {
            let p: f64 = p_star(m, mass).unwrap();
            let u = steady::solve_for_mass(m, mass, 1e-13).unwrap();
            assert!((p - u.norm_m1).abs() < 1e-8 * p, "m={m}: {p} vs {}", u.norm_m1);
            let c = c_star_oracle(m);
            let direct = (3.0 * (m + 1.0) / (2.0 * m * c * mass.powf((m + 3.0) / m)))
                .powf(m / ((m + 1.0) * (m - 3.0)));
            assert!((p - direct).abs() < 1e-10 * p);
            let f = steady_energy(m, mass).unwrap();
            assert_eq!(f, (m - 3.0) / (3.0 * (m + 1.0)) * p.powf(m + 1.0));
            assert_eq!(f > 0.0, m > 3.0);
        }
    }

    #[test]
    fn steady_energy_matches_sampled_profile() {
        for &m in &[2.0, 4.0] {
            let u = steady::solve_for_mass(m, 1.0, 1e-13).unwrap();
            let params = ModelParams::new(m, 1.0).unwrap();
            let fine = u.sample(&Grid::centered(1.2 * u.half_width, 8001, Boundary::Periodic).unwrap());
            let sampled = crate::functionals::free_energy(&fine, &params);
            let exact: f64 = steady_energy(m, 1.0).unwrap();
            assert!((sampled - exact).abs() < 1e-4 * exact.abs(), "m={m}: {sampled} vs {exact}");
        }
    }

    #[test]
    fn sampled_quotient_converges_to_c_star() {
        let u = steady::solve_for_mass(4.0, 1.0, 1e-13).unwrap();
        let c: f64 = sharp_constant(4.0).unwrap();
        let err = |n| {
            let f = u.sample(&Grid::centered(1.5 * u.half_width, n, Boundary::Periodic).unwrap());
            (nagy_quotient(&f, 4.0).unwrap() - c).abs()
        };
        let (e1, e2) = (err(301), err(601));
        assert!(e1 < 1e-3 * c && e2 < e1 / 3.0, "{e1} {e2}");
        let zero = Field::zeros(Grid::centered(1.0, 32, Boundary::Periodic).unwrap());
        assert!(matches!(nagy_quotient(&zero, 4.0), Err(Error::DegenerateField(_))));
    }

    #[test]
    fn g_aux_shape() {
        let s = SharpConstants::<f64>::new(4.0, Some(1.0)).unwrap();
        let (p, f) = (s.p_star.unwrap(), s.f_star.unwrap());
        assert_eq!(s.g_aux(0.0).unwrap(), 0.0);
        assert!((s.g_aux(p).unwrap() - f).abs() < 1e-12 * f);
        for &d in &[1e-3, 1e-2, 0.1] {
            assert!(s.g_aux(p * (1.0 + d)).unwrap() < f);
            assert!(s.g_aux(p * (1.0 - d)).unwrap() < f);
        }
        assert!(s.g_aux(-1.0).is_err());
    }

    #[test]
    fn gap_certificates_roots() {
        let s = SharpConstants::<f64>::new(4.0, Some(1.0)).unwrap();
        let (p, f) = (s.p_star.unwrap(), s.f_star.unwrap());
        let (mu1, mu2) = s.gap_certificates(0.0).unwrap();
        assert_eq!(mu1, 0.0);
        assert!((mu2 - (4.0f64 / 3.0).powf(0.8)).abs() < 1e-10);

        for &frac in &[-2.0, 0.1, 0.5, 0.9, 0.999999] {
            let f0 = frac * f;
            let (mu1, mu2) = s.gap_certificates(f0).unwrap();
            assert!((0.0..1.0).contains(&mu1) && mu2 > 1.0);
            if f0 > 0.0 {
                assert!((s.g_aux(mu1 * p).unwrap() - f0).abs() < 1e-10);
            }
            assert!((s.g_aux(mu2 * p).unwrap() - f0).abs() < 1e-10);
        }
        let (a, b) = s.gap_certificates(f * (1.0 - 1e-10)).unwrap();
        assert!((1.0 - a) < 1e-3 && (b - 1.0) < 1e-3);

        assert!(matches!(s.gap_certificates(f), Err(Error::EnergyTooHigh { .. })));
        assert!(matches!(gap_certificates(0.0, 2.0, 1.0), Err(Error::NotSupercritical(_))));
        assert!(matches!(gap_certificates(0.0, 3.0, 1.0), Err(Error::NotSupercritical(_))));
    }

    #[test]
    fn dilations_sit_on_g() {
        // F(λU(λx)) = g(‖λU(λx)‖_{m+1}) exactly, so the certificates are tight at t = 0.
        let m = 4.0f64;
        let s = SharpConstants::<f64>::new(m, Some(1.0)).unwrap();
        let p = s.p_star.unwrap();
        for &lam in &[0.8f64, 0.9, 1.1, 1.2] {
            let norm = p * lam.powf(m / (m + 1.0));
            let f = (lam.powi(3) * m / (3.0 * (m + 1.0)) - lam.powf(m) / (m + 1.0)) * p.powf(m + 1.0);
            assert!((s.g_aux(norm).unwrap() - f).abs() < 1e-12 * f.abs().max(1e-3));
        }
    }

    #[test]
    fn exponents() {
        assert_eq!(scaling_exponents(3.0).unwrap(), (1.0, 5.0));
        assert_eq!(scaling_exponents(5.0).unwrap(), (0.5, 4.5));
        assert!(matches!(scaling_exponents(1.0), Err(Error::DegenerateScaling)));
        assert_eq!(similarity_exponents(3.0).unwrap(), (0.2, -0.2));
        let (l, h) = similarity_exponents(4.0f64).unwrap();
        assert!((l - 3.0 / 14.0).abs() < 1e-15 && (h + 1.0 / 7.0).abs() < 1e-15);
        assert!(similarity_exponents(0.5).is_err());
        for &m in &[1.5f64, 2.0, 4.0, 6.0] {
            let (a, t) = scaling_exponents(m).unwrap();
            assert!((a * (m - 1.0) - 2.0).abs() < 1e-14);
            assert!((t * (m - 1.0) - (4.0 * m - 2.0)).abs() < 1e-13);
            let (bl, bh) = similarity_exponents(m).unwrap();
            assert!((bh + 2.0 / (m - 1.0) * bl).abs() < 1e-15);
        }
    }

    #[test]
    fn report_nulls() {
        let r = SharpConstants::<f64>::new(3.0, Some(1.0)).unwrap().report();
        let j = serde_json::to_value(&r).unwrap();
        assert!(j["p_star"].is_null() && j["f_star"].is_null());
        assert!(j["m_c"].as_f64().unwrap() > 2.96);
        assert!((j["beta_L"].as_f64().unwrap() - 0.2).abs() < 1e-15);
        let r = SharpConstants::<f64>::new(4.0, Some(1.0)).unwrap().report();
        let j = serde_json::to_value(&r).unwrap();
        assert!(j["m_c"].is_null() && j["p_star"].as_f64().is_some());
    }
}
