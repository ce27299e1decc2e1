//! Implicit time integration of the regularized equation
//!
//! ```text
//! u_t = −( √(u²+ε²) · (u_xxx + (u^m)_x) )_x
//! ```
//!
//! in conservative form. Face fluxes use the face average `ū` in the
//! mobility, `D³u` from four points and `D¹(u₊^m)` from two, so each step
//! changes `Σu` only through round-off. Steps are implicit Euler, solved by
//! damped Newton with the analytic pentadiagonal Jacobian.
//!
//! With [`Mobility::PositivePart`] (the default) the mobility is
//! `√(ū₊²+ε²)`; [`Mobility::Even`] uses `√(ū²+ε²)` literally. The even form
//! gives negative films the same mobility as positive ones, and those films
//! then carry a mass fraction that does not shrink with `ε` or `dx`.
//!
//! The flux equals `−√(ū²+ε²) · (μ_{i+1} − μ_i)/dx` with the discrete
//! potential `μ = −D²u − u₊^m`, so the scheme is a discrete gradient flow of
//! `½Σ((u_{i+1}−u_i)/dx)² dx − Σ u₊^{m+1}/(m+1) dx`, which is exactly what
//! [`free_energy`] evaluates.

use std::ops::Range;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::banded::{BandMatrix, CyclicBandMatrix};
use crate::error::{Error, Result};
use crate::functionals::{
    fisher_information, free_energy, h1_seminorm_sq, lp_integral, lp_norm, mass, second_moment,
};
use crate::grid::{Boundary, Field, Grid, ModelParams};
use crate::num::{pow_pos, Scalar};
use crate::steady;

/// Support-margin factor required by [`prepare_initial`].
pub const SUPPORT_MARGIN: f64 = 4.0;

/// A row is resolved while its rms width `√(m2/mass)` spans at least this many cells.
pub const RESOLVED_WIDTH_CELLS: f64 = 10.0;

/// Undershoots below `-UNDERSHOOT_FLAG · ε` are flagged in the run record.
pub const UNDERSHOOT_FLAG: f64 = 10.0;

/// Regularized mobility as a function of the face average `ū`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mobility {
    /// `√(max(ū, 0)² + ε²)`.
    #[default]
    PositivePart,
    /// `√(ū² + ε²)`.
    Even,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig<T> {
    /// Mobility regularization; `None` uses `1e-6 · max(u0)`.
    pub epsilon: Option<T>,
    pub mobility: Mobility,
    pub bc: Boundary,
    pub dt0: T,
    pub dt_min: T,
    pub dt_max: T,
    /// Newton stops once `max|δu| ≤ newton_tol · max|u|`.
    pub newton_tol: T,
    pub newton_max_iter: usize,
    pub growth_factor: T,
    /// Steps with relative change below this grow `dt`; above twice this are rejected.
    pub target_rel_change: T,
    pub blowup_grad_factor: T,
    pub blowup_height_factor: T,
    pub t_end: T,
    /// Snapshot spacing in time; `0` keeps only the first and last state.
    pub snapshot_every: T,
    /// Hard cap on accepted plus rejected steps.
    pub max_steps: usize,
}

impl<T: Scalar> Default for SolverConfig<T> {
    fn default() -> Self {
        let dt0 = T::lit(1e-9);
        Self {
            epsilon: None,
            mobility: Mobility::PositivePart,
            bc: Boundary::Periodic,
            dt0,
            dt_min: dt0 * T::lit(1e-12),
            dt_max: T::lit(1.0),
            newton_tol: T::lit(1e-10),
            newton_max_iter: 20,
            growth_factor: T::lit(1.2),
            target_rel_change: T::lit(2.5e-3),
            blowup_grad_factor: T::lit(10.0),
            blowup_height_factor: T::lit(5.0),
            t_end: T::one(),
            snapshot_every: T::zero(),
            max_steps: 2_000_000,
        }
    }
}

impl<T: Scalar> SolverConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        let pos = |v: T| v > T::zero() && v.is_finite();
        if !(pos(self.dt_min) && self.dt_min <= self.dt0 && self.dt0 <= self.dt_max && self.dt_max.is_finite()) {
            return bad("time steps must satisfy 0 < dt_min <= dt0 <= dt_max");
        }
        if let Some(eps) = self.epsilon {
            if !pos(eps) {
                return bad("epsilon must be > 0");
            }
        }
        if !pos(self.newton_tol) || !pos(self.target_rel_change) {
            return bad("tolerances must be > 0");
        }
        if self.newton_max_iter == 0 || self.max_steps == 0 {
            return bad("iteration limits must be >= 1");
        }
        if !(self.growth_factor > T::one() && self.growth_factor.is_finite()) {
            return bad("growth_factor must be > 1");
        }
        if !(self.blowup_grad_factor > T::one() && self.blowup_height_factor > T::one()) {
            return bad("blow-up factors must be > 1");
        }
        if !pos(self.t_end) {
            return bad("t_end must be > 0");
        }
        if !(self.snapshot_every >= T::zero()) {
            return bad("snapshot_every must be >= 0");
        }
        Ok(())
    }

    /// Regularization for initial data `u0`.
    pub fn epsilon_for(&self, u0: &Field<T>) -> T {
        self.epsilon.unwrap_or_else(|| {
            let top = u0.max();
            if top > T::zero() {
                T::lit(1e-6) * top
            } else {
                T::lit(1e-12)
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec<T> {
    /// `λ·U_*(λx)`; with `height` the profile of that height is dilated instead
    /// of the mass-matched one (required at `m = 3`).
    DilatedSteady { lambda: T, height: Option<T> },
    Gaussian { mass: T, sigma: T },
    FromFile { path: PathBuf },
}

fn check_margin<T: Scalar>(grid: &Grid<T>, support: T) -> Result<()> {
    let need = T::lit(SUPPORT_MARGIN) * support;
    let slack = T::one() - T::lit(1e-9);
    if grid.x_min() > -need * slack || grid.x_max() < need * slack {
        return Err(Error::GridTooSmall(format!(
            "support half-width {support} needs the grid to cover [-{need}, {need}], got [{}, {}]",
            grid.x_min(),
            grid.x_max()
        )));
    }
    Ok(())
}

/// Rescales samples so the trapezoid mass is exactly `target`.
fn normalize_mass<T: Scalar>(f: Field<T>, target: T) -> Result<Field<T>> {
    let have = mass(&f);
    if !(have > T::zero()) {
        return Err(Error::GridTooSmall("initial profile is not resolved by the grid".into()));
    }
    let s = target / have;
    f.map(|u| u * s)
}

/// Builds initial data on `grid`.
///
/// Analytic families are rescaled by `1 + O(dx²)` so that their discrete mass
/// equals the continuous one exactly. `FromFile` keeps the file's own grid and
/// only takes the boundary tag from `grid`.
pub fn prepare_initial<T: Scalar>(
    kind: &InitialSpec<T>,
    params: &ModelParams<T>,
    grid: &Grid<T>,
) -> Result<Field<T>> {
    let tol = T::lit(1e-12_f64.max(T::EPS * 100.0));
    match kind {
        InitialSpec::DilatedSteady { lambda, height } => {
            let lambda = *lambda;
            if !(lambda > T::zero() && lambda.is_finite()) {
                return Err(Error::InvalidParameter(format!("lambda must be > 0, got {lambda}")));
            }
            let profile = match height {
                Some(h) => steady::profile_from_height(params.m(), *h, tol)?,
                None => steady::solve_for_mass(params.m(), params.mass(), tol)?,
            };
            check_margin(grid, profile.half_width / lambda)?;
            normalize_mass(profile.sample_dilated(grid, lambda), profile.mass)
        }
        InitialSpec::Gaussian { mass: m0, sigma } => {
            if !(*sigma > T::zero() && *m0 > T::zero()) {
                return Err(Error::InvalidParameter("Gaussian needs mass > 0 and sigma > 0".into()));
            }
            let sigma = *sigma;
            check_margin(grid, T::lit(3.0) * sigma)?;
            let two = T::lit(2.0);
            let f = Field::from_fn(grid.clone(), |x| (-(x * x) / (two * sigma * sigma)).exp())?;
            normalize_mass(f, *m0)
        }
        InitialSpec::FromFile { path } => {
            let (f, _) = crate::io::read_snapshot(path, grid.boundary())?;
            Ok(f)
        }
    }
}

/// Sampled extremal profile `U_*` for `params`, normalized like [`prepare_initial`].
pub fn steady_initial<T: Scalar>(params: &ModelParams<T>, grid: &Grid<T>) -> Result<Field<T>> {
    prepare_initial(
        &InitialSpec::DilatedSteady {
            lambda: T::one(),
            height: None,
        },
        params,
        grid,
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StepDiagnostics<T> {
    pub newton_iterations: usize,
    /// Max-norm of the final residual.
    pub residual: T,
    /// `max|u_new − u| / max|u|`.
    pub rel_change: T,
}

/// Discrete operator for one grid.
struct Operator<T> {
    n: usize,
    dx: T,
    m: T,
    eps: T,
    bc: Boundary,
    mobility: Mobility,
}

impl<T: Scalar> Operator<T> {
    fn new(grid: &Grid<T>, m: T, eps: T, bc: Boundary, mobility: Mobility) -> Self {
        Self {
            n: grid.len(),
            dx: grid.dx(),
            m,
            eps,
            bc,
            mobility,
        }
    }

    #[inline]
    fn at(&self, u: &[T], i: isize) -> T {
        let n = self.n as isize;
        match self.bc {
            Boundary::Periodic => u[i.rem_euclid(n) as usize],
            Boundary::Clamped => {
                if i < 0 || i >= n {
                    T::zero()
                } else {
                    u[i as usize]
                }
            }
        }
    }

    #[inline]
    fn p(&self, v: T) -> T {
        pow_pos(v, self.m)
    }

    #[inline]
    fn dp(&self, v: T) -> T {
        if v > T::zero() {
            self.m * v.powf(self.m - T::one())
        } else {
            T::zero()
        }
    }

    /// Number of faces carrying flux; face `k` sits between points `k` and `k+1`.
    fn faces(&self) -> usize {
        match self.bc {
            Boundary::Periodic => self.n,
            Boundary::Clamped => self.n - 1,
        }
    }

    /// Face `k`: (flux, d/du_{k−1}, d/du_k, d/du_{k+1}, d/du_{k+2}).
    fn face(&self, u: &[T], k: usize) -> (T, [T; 4]) {
        let k = k as isize;
        let (a, b, c, d) = (self.at(u, k - 1), self.at(u, k), self.at(u, k + 1), self.at(u, k + 2));
        let dx = self.dx;
        let dx3 = dx * dx * dx;
        let three = T::lit(3.0);
        let half = T::lit(0.5);
        let ubar = match self.mobility {
            Mobility::PositivePart => (half * (b + c)).max(T::zero()),
            Mobility::Even => half * (b + c),
        };
        let mob = (ubar * ubar + self.eps * self.eps).sqrt();
        let g = (d - three * c + three * b - a) / dx3 + (self.p(c) - self.p(b)) / dx;
        let dmob = half * ubar / mob;
        (
            mob * g,
            [
                -mob / dx3,
                dmob * g + mob * (three / dx3 - self.dp(b) / dx),
                dmob * g + mob * (-three / dx3 + self.dp(c) / dx),
                mob / dx3,
            ],
        )
    }

    fn residual(&self, u: &[T], u_old: &[T], dt: T) -> Vec<T> {
        let r = dt / self.dx;
        let mut out: Vec<T> = u.iter().zip(u_old).map(|(&a, &b)| a - b).collect();
        for k in 0..self.faces() {
            let (f, _) = self.face(u, k);
            let right = (k + 1) % self.n;
            out[k] = out[k] + r * f;
            out[right] = out[right] - r * f;
        }
        out
    }

    /// Solves `J δ = rhs` for the Jacobian at `u`.
    fn newton_solve(&self, u: &[T], dt: T, rhs: &mut [T]) -> Result<()> {
        let n = self.n;
        let r = dt / self.dx;
        match self.bc {
            Boundary::Periodic => {
                let mut j = CyclicBandMatrix::zeros(n, 2);
                for i in 0..n {
                    j.add(i, i, T::one());
                }
                for k in 0..n {
                    let (_, dfs) = self.face(u, k);
                    let right = (k + 1) % n;
                    for (off, &dv) in dfs.iter().enumerate() {
                        let col = (k + n + off - 1) % n;
                        j.add(k, col, r * dv);
                        j.add(right, col, -r * dv);
                    }
                }
                j.factor()?.solve_in_place(rhs);
            }
            Boundary::Clamped => {
                let mut j = BandMatrix::zeros(n, 2, 2);
                for i in 0..n {
                    j.add(i, i, T::one());
                }
                for k in 0..n - 1 {
                    let (_, dfs) = self.face(u, k);
                    for (off, &dv) in dfs.iter().enumerate() {
                        let col = k as isize + off as isize - 1;
                        if col < 0 || col >= n as isize {
                            continue;
                        }
                        let col = col as usize;
                        j.add(k, col, r * dv);
                        j.add(k + 1, col, -r * dv);
                    }
                }
                j.factor()?.solve_in_place(rhs);
            }
        }
        Ok(())
    }
}

fn max_abs<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |a, &b| a.max(b.abs()))
}

fn step_with_eps<T: Scalar>(
    u: &Field<T>,
    params: &ModelParams<T>,
    config: &SolverConfig<T>,
    eps: T,
    dt: T,
) -> Result<(Field<T>, StepDiagnostics<T>)> {
    let grid = u.grid().with_boundary(config.bc);
    let op = Operator::new(&grid, params.m(), eps, config.bc, config.mobility);
    let old = u.values();
    let scale = max_abs(old).max(eps);
    let mut cur = old.to_vec();
    let mut res = op.residual(&cur, old, dt);
    let mut res_norm = max_abs(&res);
    for it in 1..=config.newton_max_iter {
        let mut delta: Vec<T> = res.iter().map(|&v| -v).collect();
        op.newton_solve(&cur, dt, &mut delta)?;
        let step_norm = max_abs(&delta);
        if !step_norm.is_finite() {
            break;
        }
        // Damping: halve until the residual does not grow.
        let mut theta = T::one();
        let mut accepted = None;
        for _ in 0..12 {
            let trial: Vec<T> = cur.iter().zip(&delta).map(|(&a, &d)| a + theta * d).collect();
            let r = op.residual(&trial, old, dt);
            let rn = max_abs(&r);
            if rn.is_finite() && (rn <= res_norm || theta == T::one() && step_norm <= config.newton_tol * scale) {
                accepted = Some((trial, r, rn));
                break;
            }
            theta = theta * T::lit(0.5);
        }
        let Some((trial, r, rn)) = accepted else {
            break;
        };
        cur = trial;
        res = r;
        res_norm = rn;
        if theta == T::one() && step_norm <= config.newton_tol * scale {
            let rel = cur
                .iter()
                .zip(old)
                .fold(T::zero(), |a, (&x, &y)| a.max((x - y).abs()));
            let denom = max_abs(old);
            let rel_change = if denom > T::zero() { rel / denom } else { T::zero() };
            let field = Field::new(grid, cur, u.time() + dt).map_err(|_| Error::NewtonDiverged {
                iterations: it,
                residual: res_norm.as_f64(),
            })?;
            return Ok((
                field,
                StepDiagnostics {
                    newton_iterations: it,
                    residual: res_norm,
                    rel_change,
                },
            ));
        }
    }
    Err(Error::NewtonDiverged {
        iterations: config.newton_max_iter,
        residual: res_norm.as_f64(),
    })
}

/// One implicit Euler step of size `dt`.
///
/// `NewtonDiverged` means the caller should retry with a smaller step.
pub fn step<T: Scalar>(
    u: &Field<T>,
    params: &ModelParams<T>,
    config: &SolverConfig<T>,
    dt: T,
) -> Result<(Field<T>, StepDiagnostics<T>)> {
    let eps = config.epsilon_for(u);
    step_with_eps(u, params, config, eps, dt)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    ReachedTEnd,
    BlowupIndicated,
    StepCollapse,
    NumericalFailure,
}

/// One row of the time series; `dt` is the step that produced the row (0 initially).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SeriesRow<T> {
    pub t: T,
    pub dt: T,
    pub mass: T,
    #[serde(rename = "F")]
    pub free_energy: T,
    pub m2: T,
    pub norm_m1: T,
    pub grad_l2: T,
    pub fisher: T,
    pub u_max: T,
    pub u_min: T,
}

impl<T: Scalar> SeriesRow<T> {
    pub fn of(f: &Field<T>, params: &ModelParams<T>, dt: T) -> Self {
        Self {
            t: f.time(),
            dt,
            mass: mass(f),
            free_energy: free_energy(f, params),
            m2: second_moment(f),
            norm_m1: lp_norm(f, params.m() + T::one()),
            grad_l2: h1_seminorm_sq(f).sqrt(),
            fisher: fisher_information(f, params),
            u_max: f.max(),
            u_min: f.min(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunRecord<T> {
    pub params: ModelParams<T>,
    /// The configuration as run, with `epsilon` resolved.
    pub config: SolverConfig<T>,
    pub series: Vec<SeriesRow<T>>,
    pub snapshots: Vec<Field<T>>,
    pub termination: Termination,
    pub t_w_estimate: Option<T>,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    /// Reason for `NumericalFailure`.
    pub failure: Option<String>,
    /// Most negative value seen.
    pub min_value: T,
    /// Whether `min_value < −10ε` ever happened.
    pub undershoot_flagged: bool,
    /// Largest `max(u_0, u_{n−1}) / max(u)` seen: boundary contamination.
    pub edge_ratio: T,
}

impl<T: Scalar> RunRecord<T> {
    pub fn final_state(&self) -> &Field<T> {
        self.snapshots.last().expect("runs keep the final state")
    }

    pub fn initial(&self) -> &SeriesRow<T> {
        &self.series[0]
    }
}

fn edge_ratio<T: Scalar>(f: &Field<T>) -> T {
    let v = f.values();
    let top = f.max();
    if top > T::zero() {
        v[0].abs().max(v[v.len() - 1].abs()) / top
    } else {
        T::zero()
    }
}

/// Threshold test of the blow-up indicator against the first row.
fn blowup_reached<T: Scalar>(first: &SeriesRow<T>, row: &SeriesRow<T>, config: &SolverConfig<T>) -> bool {
    row.grad_l2 >= config.blowup_grad_factor * first.grad_l2
        || row.u_max >= config.blowup_height_factor * first.u_max
}

/// Adaptive implicit integration from `u0` to `config.t_end`.
///
/// Non-finite states end the run with [`Termination::NumericalFailure`];
/// `Err` is returned only for invalid input.
pub fn evolve<T: Scalar>(u0: &Field<T>, params: &ModelParams<T>, config: &SolverConfig<T>) -> Result<RunRecord<T>> {
    evolve_observed(u0, params, config, |_, _| {})
}

/// [`evolve`] with a callback on every accepted state.
pub fn evolve_observed<T: Scalar>(
    u0: &Field<T>,
    params: &ModelParams<T>,
    config: &SolverConfig<T>,
    mut observe: impl FnMut(&Field<T>, &SeriesRow<T>),
) -> Result<RunRecord<T>> {
    config.validate()?;
    let eps = config.epsilon_for(u0);
    let mut config = config.clone();
    config.epsilon = Some(eps);
    let u0 = Field::new(u0.grid().with_boundary(config.bc), u0.values().to_vec(), u0.time())?;

    let t0 = u0.time();
    let t_end = t0 + config.t_end;
    let first = SeriesRow::of(&u0, params, T::zero());
    observe(&u0, &first);
    let mut rec = RunRecord {
        params: params.clone(),
        config: config.clone(),
        series: vec![first],
        snapshots: vec![u0.clone()],
        termination: Termination::ReachedTEnd,
        t_w_estimate: None,
        steps_accepted: 0,
        steps_rejected: 0,
        failure: None,
        min_value: u0.min(),
        undershoot_flagged: false,
        edge_ratio: edge_ratio(&u0),
    };
    let mut u = u0;
    let mut dt = config.dt0;
    let mut next_snap = t0 + config.snapshot_every;
    let finish_tol = t_end.abs().max(T::one()) * T::lit(T::EPS * 16.0);
    let mut steps = 0usize;

    loop {
        let t = u.time();
        if t_end - t <= finish_tol {
            rec.termination = Termination::ReachedTEnd;
            break;
        }
        if steps >= config.max_steps {
            rec.termination = Termination::NumericalFailure;
            rec.failure = Some(format!("step budget of {} exhausted at t = {t}", config.max_steps));
            break;
        }
        steps += 1;
        let dt_try = dt.min(t_end - t);
        let outcome = step_with_eps(&u, params, &config, eps, dt_try);
        let accepted = match outcome {
            Ok((next, diag)) if diag.rel_change <= T::lit(2.0) * config.target_rel_change => Some((next, diag)),
            Ok((_, diag)) => {
                let shrink = (T::lit(0.9) * config.target_rel_change / diag.rel_change).max(T::lit(0.25));
                dt = dt_try * shrink;
                None
            }
            Err(Error::NewtonDiverged { .. }) | Err(Error::SingularMatrix) => {
                dt = dt_try * T::lit(0.5);
                None
            }
            Err(e) => return Err(e),
        };
        let Some((next, diag)) = accepted else {
            rec.steps_rejected += 1;
            if dt < config.dt_min {
                rec.termination = Termination::StepCollapse;
                rec.t_w_estimate = Some(t);
                break;
            }
            continue;
        };

        rec.steps_accepted += 1;
        let row = SeriesRow::of(&next, params, dt_try);
        let finite = [row.mass, row.free_energy, row.m2, row.grad_l2, row.fisher]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            rec.termination = Termination::NumericalFailure;
            rec.failure = Some(format!("non-finite diagnostics at t = {}", next.time()));
            break;
        }
        rec.min_value = rec.min_value.min(row.u_min);
        if row.u_min < -T::lit(UNDERSHOOT_FLAG) * eps {
            rec.undershoot_flagged = true;
        }
        rec.edge_ratio = rec.edge_ratio.max(edge_ratio(&next));
        observe(&next, &row);
        rec.series.push(row);
        u = next;

        if config.snapshot_every > T::zero() && u.time() >= next_snap {
            rec.snapshots.push(u.clone());
            while next_snap <= u.time() {
                next_snap = next_snap + config.snapshot_every;
            }
        }
        if blowup_reached(&rec.series[0], &row, &config) {
            rec.termination = Termination::BlowupIndicated;
            rec.t_w_estimate = Some(u.time());
            break;
        }
        if diag.rel_change < config.target_rel_change && dt_try >= dt {
            dt = (dt_try * config.growth_factor).min(config.dt_max);
        }
    }
    if rec.snapshots.last().map(|s| s.time()) != Some(u.time()) {
        rec.snapshots.push(u);
    }
    Ok(rec)
}

/// True iff the series crossed a blow-up threshold or the step size collapsed.
pub fn blowup_indicator<T: Scalar>(record: &RunRecord<T>, config: &SolverConfig<T>) -> bool {
    if record.termination == Termination::StepCollapse {
        return true;
    }
    let Some(first) = record.series.first() else {
        return false;
    };
    record.series.iter().any(|row| blowup_reached(first, row, config))
}

/// `max_k [F(t_k) + Σ_{j≤k} dt_j·fisher_j − F(0)]₊`, with the dissipation at the
/// end of each step as in the implicit scheme.
pub fn dissipation_check<T: Scalar>(record: &RunRecord<T>, _params: &ModelParams<T>) -> T {
    let Some(first) = record.series.first() else {
        return T::zero();
    };
    let mut dissipated = T::zero();
    let mut worst = T::zero();
    for row in &record.series[1..] {
        dissipated = dissipated + row.dt * row.fisher;
        worst = worst.max(row.free_energy + dissipated - first.free_energy);
    }
    worst
}

/// `max_k [F(t_{k+1}) − F(t_k)]₊` over rows `range`.
pub fn max_energy_increase<T: Scalar>(series: &[SeriesRow<T>]) -> T {
    series
        .windows(2)
        .fold(T::zero(), |a, w| a.max(w[1].free_energy - w[0].free_energy))
}

/// `6F − 2(m−3)/(m+1)·∫u^{m+1}`, the exact rate of change of the second moment.
pub fn m2_rate<T: Scalar>(row: &SeriesRow<T>, params: &ModelParams<T>) -> T {
    let m = params.m();
    let mp1 = m + T::one();
    T::lit(6.0) * row.free_energy - T::lit(2.0) * (m - T::lit(3.0)) / mp1 * row.norm_m1.powf(mp1)
}

/// Max relative mismatch between the centered difference of `m2` and
/// [`m2_rate`] over the interior rows of `series`.
pub fn m2_identity_residual<T: Scalar>(series: &[SeriesRow<T>], params: &ModelParams<T>) -> T {
    let mut worst = T::zero();
    for w in series.windows(3) {
        let lhs = (w[2].m2 - w[0].m2) / (w[2].t - w[0].t);
        let rhs = m2_rate(&w[1], params);
        let scale = rhs.abs();
        if scale > T::zero() {
            worst = worst.max((lhs - rhs).abs() / scale);
        }
    }
    worst
}

/// Whether `row` is resolved on a grid of spacing `dx`, see [`RESOLVED_WIDTH_CELLS`].
pub fn is_resolved<T: Scalar>(row: &SeriesRow<T>, dx: T) -> bool {
    row.m2 > T::zero() && (row.m2 / row.mass).sqrt() >= T::lit(RESOLVED_WIDTH_CELLS) * dx
}

/// Longest contiguous range of resolved rows.
pub fn resolved_window<T: Scalar>(series: &[SeriesRow<T>], dx: T) -> Range<usize> {
    let mut best = 0..0;
    let mut start = None;
    for (k, row) in series.iter().enumerate() {
        match (is_resolved(row, dx), start) {
            (true, None) => start = Some(k),
            (false, Some(s)) => {
                if k - s > best.len() {
                    best = s..k;
                }
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        if series.len() - s > best.len() {
            best = s..series.len();
        }
    }
    best
}

/// Max over snapshots-free series of `|mass − mass(0)| / mass(0)`.
pub fn mass_drift<T: Scalar>(record: &RunRecord<T>) -> T {
    let m0 = record.series[0].mass;
    record
        .series
        .iter()
        .fold(T::zero(), |a, r| a.max((r.mass - m0).abs() / m0.abs()))
}

/// `∫u^{m+1}` of a field, re-exported for monitors.
pub fn power_integral<T: Scalar>(f: &Field<T>, params: &ModelParams<T>) -> T {
    lp_integral(f, params.m() + T::one())
}
