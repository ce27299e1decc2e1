//! Threshold dichotomy for `m > 3`, its confirmation by simulation, descriptive
//! monitors for data above the threshold energy, similarity fits and sweeps.
//!
//! Data with `F(u0) < F(U_*)` blow up when `‖u0‖_{m+1} > P_*` and spread
//! globally when `‖u0‖_{m+1} < P_*`. Along either branch the norm stays on its
//! side of the gap `(μ1·P_*, μ2·P_*)`, which is what confirmation checks.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::{self, blowup_indicator, evolve, prepare_initial, InitialSpec, RunRecord, SeriesRow, SolverConfig, Termination};
use crate::functionals::{free_energy, lp_norm};
use crate::grid::{Field, Grid, ModelParams};
use crate::num::Scalar;
use crate::sharp::SharpConstants;
use crate::steady;

/// Relative band around `F(U_*)` and `P_*` treated as equality.
pub const TIE_TOL: f64 = 1e-9;

/// Allowed crossing of the `μ1`/`μ2` bounds, in units of `P_*`.
pub const NORM_GAP_TOL: f64 = 1e-3;

/// Default caps of [`scenario_monitor`], as multiples of the initial values.
pub const MONITOR_CAP_FACTOR: f64 = 10.0;

/// Default trailing fraction of the time window used by [`fit_similarity`].
pub const SIMILARITY_WINDOW: f64 = 0.3;

/// Extra room beyond the spreading front when sizing grids for global runs.
pub const SPREADING_SLACK: f64 = 1.25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Prediction {
    Blowup,
    Global,
    Indeterminate,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThresholdVerdict<T> {
    pub prediction: Prediction,
    pub f0: T,
    pub f_star: T,
    pub norm0: T,
    pub p_star: T,
    pub mu1: Option<T>,
    pub mu2: Option<T>,
    /// `F(u0) < F(U_*)` together with `‖u0‖_{m+1} = P_*`, which exact data
    /// cannot satisfy; seen only through discretization error.
    pub contradiction: bool,
    pub outcome: Option<Termination>,
    pub agreement: Option<bool>,
    pub t_w_estimate: Option<T>,
}

/// Applies the dichotomy to the invariants `F(u0)` and `‖u0‖_{m+1}`.
pub fn predict_from<T: Scalar>(f0: T, norm0: T, params: &ModelParams<T>) -> Result<ThresholdVerdict<T>> {
    let m = params.m();
    if m <= T::lit(3.0) {
        return Err(Error::NotSupercritical(m.as_f64()));
    }
    if !(f0.is_finite() && norm0.is_finite()) {
        return Err(Error::InvalidParameter("initial invariants must be finite".into()));
    }
    let sc = SharpConstants::new(m, Some(params.mass()))?;
    let p_star = sc.p_star.expect("m > 3 with a mass");
    let f_star = sc.f_star.expect("m > 3 with a mass");
    let tie = T::lit(TIE_TOL);
    let mut verdict = ThresholdVerdict {
        prediction: Prediction::Indeterminate,
        f0,
        f_star,
        norm0,
        p_star,
        mu1: None,
        mu2: None,
        contradiction: false,
        outcome: None,
        agreement: None,
        t_w_estimate: None,
    };
    if f0 >= f_star - tie * f_star.abs() {
        return Ok(verdict);
    }
    let (mu1, mu2) = sc.gap_certificates(f0)?;
    verdict.mu1 = Some(mu1);
    verdict.mu2 = Some(mu2);
    if (norm0 - p_star).abs() <= tie * p_star {
        verdict.contradiction = true;
    } else if norm0 > p_star {
        verdict.prediction = Prediction::Blowup;
    } else {
        verdict.prediction = Prediction::Global;
    }
    Ok(verdict)
}

/// [`predict_from`] with the invariants of the sampled field.
pub fn predict<T: Scalar>(u0: &Field<T>, params: &ModelParams<T>) -> Result<ThresholdVerdict<T>> {
    if params.m() <= T::lit(3.0) {
        return Err(Error::NotSupercritical(params.m().as_f64()));
    }
    let norm0 = lp_norm(u0, params.m() + T::one());
    predict_from(free_energy(u0, params), norm0, params)
}

/// Exact `(F, ‖·‖_{m+1})` of the dilation `λ·U_*(λx)`.
pub fn dilation_invariants<T: Scalar>(params: &ModelParams<T>, lambda: T) -> Result<(T, T)> {
    if !(lambda > T::zero() && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda must be > 0, got {lambda}")));
    }
    let m = params.m();
    let sc = SharpConstants::new(m, Some(params.mass()))?;
    let p = sc.p_star.ok_or(Error::MassCritical("P_* is undefined"))?;
    let mp1 = m + T::one();
    let pm = p.powf(mp1);
    let f0 = (lambda.powi(3) * m / (T::lit(3.0) * mp1) - lambda.powf(m) / mp1) * pm;
    Ok((f0, lambda.powf(m / mp1) * p))
}

/// Prediction for `λ·U_*(λx)` from its exact invariants.
pub fn predict_dilation<T: Scalar>(params: &ModelParams<T>, lambda: T) -> Result<ThresholdVerdict<T>> {
    if params.m() <= T::lit(3.0) {
        return Err(Error::NotSupercritical(params.m().as_f64()));
    }
    let (f0, norm0) = dilation_invariants(params, lambda)?;
    predict_from(f0, norm0, params)
}

/// `max_k [‖u‖_{m+1} − μ1·P_*]₊` for a global verdict, `max_k [μ2·P_* − ‖u‖_{m+1}]₊`
/// for a blow-up verdict, zero otherwise.
pub fn norm_gap_excess<T: Scalar>(verdict: &ThresholdVerdict<T>, rows: &[SeriesRow<T>]) -> T {
    let p = verdict.p_star;
    let excess: Box<dyn Fn(&SeriesRow<T>) -> T> = match (verdict.prediction, verdict.mu1, verdict.mu2) {
        (Prediction::Global, Some(mu1), _) => Box::new(move |r| r.norm_m1 - mu1 * p),
        (Prediction::Blowup, _, Some(mu2)) => Box::new(move |r| mu2 * p - r.norm_m1),
        _ => return T::zero(),
    };
    rows.iter().fold(T::zero(), |a, r| a.max(excess(r)))
}

/// `2(1 − μ2)(m − 3)/(m + 1)·P_*^{m+1}`, an upper bound on `dm2/dt` on the blow-up branch.
pub fn blowup_m2_rate_bound<T: Scalar>(verdict: &ThresholdVerdict<T>, params: &ModelParams<T>) -> Option<T> {
    let mu2 = verdict.mu2?;
    let m = params.m();
    let mp1 = m + T::one();
    Some(T::lit(2.0) * (T::one() - mu2) * (m - T::lit(3.0)) / mp1 * verdict.p_star.powf(mp1))
}

/// Whether `m2` increases strictly over the second half of the time window.
pub fn m2_increasing_final_half<T: Scalar>(series: &[SeriesRow<T>]) -> bool {
    let (Some(first), Some(last)) = (series.first(), series.last()) else {
        return false;
    };
    let mid = first.t + T::lit(0.5) * (last.t - first.t);
    let tail: Vec<_> = series.iter().filter(|r| r.t >= mid).collect();
    tail.len() >= 2 && tail.windows(2).all(|w| w[1].m2 > w[0].m2)
}

/// `max_k [m2(t_k) − m2(0) − 6·F(u0)·(t_k − t_0)]₊`.
pub fn m2_linear_bound_excess<T: Scalar>(series: &[SeriesRow<T>]) -> T {
    let Some(first) = series.first() else {
        return T::zero();
    };
    let six = T::lit(6.0);
    series.iter().fold(T::zero(), |a, r| {
        a.max(r.m2 - first.m2 - six * first.free_energy * (r.t - first.t))
    })
}

/// Agreement of a finished run with the verdict; `None` for indeterminate verdicts.
pub fn agreement<T: Scalar>(verdict: &ThresholdVerdict<T>, record: &RunRecord<T>) -> Option<bool> {
    match verdict.prediction {
        Prediction::Blowup => Some(blowup_indicator(record, &record.config)),
        Prediction::Global => Some(
            record.termination == Termination::ReachedTEnd
                && m2_increasing_final_half(&record.series)
                && norm_gap_excess(verdict, &record.series) <= T::lit(NORM_GAP_TOL) * verdict.p_star,
        ),
        Prediction::Indeterminate => None,
    }
}

#[derive(Clone, Debug)]
pub struct Confirmation<T> {
    pub verdict: ThresholdVerdict<T>,
    pub record: RunRecord<T>,
}

/// Runs `u0` and attaches outcome and agreement to `verdict`.
pub fn confirm_verdict<T: Scalar>(
    mut verdict: ThresholdVerdict<T>,
    u0: &Field<T>,
    params: &ModelParams<T>,
    config: &SolverConfig<T>,
) -> Result<Confirmation<T>> {
    let record = evolve(u0, params, config)?;
    verdict.outcome = Some(record.termination);
    verdict.t_w_estimate = record.t_w_estimate;
    verdict.agreement = agreement(&verdict, &record);
    Ok(Confirmation { verdict, record })
}

/// [`predict`] followed by [`confirm_verdict`].
pub fn confirm<T: Scalar>(u0: &Field<T>, params: &ModelParams<T>, config: &SolverConfig<T>) -> Result<Confirmation<T>> {
    confirm_verdict(predict(u0, params)?, u0, params, config)
}

/// Front position `(112.5·M·t)^{1/5}` of the source-type solution of `u_t = −(u u_xxx)_x`.
pub fn spreading_front<T: Scalar>(mass: T, t: T) -> T {
    (T::lit(112.5) * mass * t).powf(T::lit(0.2))
}

/// Whether the dilation `λ·U_*(λx)` is expected to spread over the run.
/// `λ = 1` is the steady state itself and stays put.
pub fn expects_spreading<T: Scalar>(params: &ModelParams<T>, lambda: T) -> Result<bool> {
    let three = T::lit(3.0);
    if lambda == T::one() {
        Ok(false)
    } else if params.m() < three {
        Ok(true)
    } else if params.m() == three {
        Ok(false)
    } else {
        Ok(predict_dilation(params, lambda)?.prediction == Prediction::Global)
    }
}

/// Default half-width for a run of `λ·U_*(λx)` up to `t_end`: four support
/// half-widths, widened to hold the spreading front when the data spread.
pub fn auto_half_width<T: Scalar>(params: &ModelParams<T>, lambda: T, height: Option<T>, t_end: T) -> Result<T> {
    let tol = T::lit(1e-12_f64.max(T::EPS * 100.0));
    let profile = match height {
        Some(h) => steady::profile_from_height(params.m(), h, tol)?,
        None => steady::solve_for_mass(params.m(), params.mass(), tol)?,
    };
    let base = T::lit(evolve::SUPPORT_MARGIN) * profile.half_width / lambda;
    if height.is_none() && expects_spreading(params, lambda)? {
        Ok(base.max(T::lit(SPREADING_SLACK) * spreading_front(params.mass(), t_end)))
    } else {
        Ok(base)
    }
}

/// Grid and initial field for a dilation run.
pub fn dilation_initial<T: Scalar>(
    params: &ModelParams<T>,
    lambda: T,
    n: usize,
    half_width: Option<T>,
    config: &SolverConfig<T>,
) -> Result<Field<T>> {
    let x = match half_width {
        Some(x) => x,
        None => auto_half_width(params, lambda, None, config.t_end)?,
    };
    let grid = Grid::centered(x, n, config.bc)?;
    prepare_initial(&InitialSpec::DilatedSteady { lambda, height: None }, params, &grid)
}

/// Predicts from exact invariants, then confirms on `n` points.
pub fn confirm_dilation<T: Scalar>(
    params: &ModelParams<T>,
    lambda: T,
    n: usize,
    half_width: Option<T>,
    config: &SolverConfig<T>,
) -> Result<Confirmation<T>> {
    let verdict = predict_dilation(params, lambda)?;
    let u0 = dilation_initial(params, lambda, n, half_width, config)?;
    confirm_verdict(verdict, &u0, params, config)
}

/// Descriptive labels for the four combinations of the two monitors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Scenario {
    /// Bounded norm and second moment: candidates for approach to `U_*`.
    SteadyApproach,
    /// Bounded norm, growing second moment: mass escaping.
    MassEscape,
    /// Growing norm in a confined region: concentration.
    ConfinedConcentration,
    /// Both growing.
    ConcentrationAndDispersion,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MonitorCaps<T> {
    pub norm_factor: T,
    pub m2_factor: T,
}

impl<T: Scalar> Default for MonitorCaps<T> {
    fn default() -> Self {
        Self {
            norm_factor: T::lit(MONITOR_CAP_FACTOR),
            m2_factor: T::lit(MONITOR_CAP_FACTOR),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScenarioReport<T> {
    /// Norm stayed below its cap.
    pub p1: bool,
    /// Second moment stayed below its cap.
    pub p2: bool,
    pub scenario: Scenario,
    pub sup_norm: T,
    pub sup_m2: T,
}

/// [`scenario_monitor_with`] at the default caps.
pub fn scenario_monitor<T: Scalar>(record: &RunRecord<T>) -> ScenarioReport<T> {
    scenario_monitor_with(record, &MonitorCaps::default())
}

/// Sup of the norm and of `m2` against caps relative to the first row. A run
/// ended by the blow-up indicator never counts as having a bounded norm.
pub fn scenario_monitor_with<T: Scalar>(record: &RunRecord<T>, caps: &MonitorCaps<T>) -> ScenarioReport<T> {
    let first = record.initial();
    let sup_norm = record.series.iter().fold(T::zero(), |a, r| a.max(r.norm_m1));
    let sup_m2 = record.series.iter().fold(T::zero(), |a, r| a.max(r.m2));
    let blew_up = matches!(record.termination, Termination::BlowupIndicated | Termination::StepCollapse);
    let p1 = !blew_up && sup_norm < caps.norm_factor * first.norm_m1;
    let p2 = sup_m2 < caps.m2_factor * first.m2;
    let scenario = match (p1, p2) {
        (true, true) => Scenario::SteadyApproach,
        (true, false) => Scenario::MassEscape,
        (false, true) => Scenario::ConfinedConcentration,
        (false, false) => Scenario::ConcentrationAndDispersion,
    };
    ScenarioReport {
        p1,
        p2,
        scenario,
        sup_norm,
        sup_m2,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SimilarityFit<T> {
    /// Slope of `log u_max` against `log t`.
    pub beta_h: T,
    /// Slope of `log √(m2/mass)` against `log t`.
    pub beta_l: T,
    /// Smaller of the two coefficients of determination.
    pub r2: T,
}

/// Least squares `(slope, r²)` of `y` against `x`.
fn linear_fit<T: Scalar>(xs: &[T], ys: &[T]) -> (T, T) {
    let n = T::lit(xs.len() as f64);
    let mx = xs.iter().copied().sum::<T>() / n;
    let my = ys.iter().copied().sum::<T>() / n;
    let (mut sxx, mut sxy, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in xs.iter().zip(ys) {
        sxx = sxx + (x - mx) * (x - mx);
        sxy = sxy + (x - mx) * (y - my);
        syy = syy + (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let r2 = if syy > T::zero() { sxy * sxy / (sxx * syy) } else { T::one() };
    (slope, r2)
}

/// Power-law exponents of height and width over the trailing `window`
/// fraction of the run's time span.
pub fn fit_similarity<T: Scalar>(record: &RunRecord<T>, window: T) -> Result<SimilarityFit<T>> {
    if !(window > T::zero() && window <= T::one()) {
        return Err(Error::InvalidParameter(format!("window must lie in (0, 1], got {window}")));
    }
    let s = &record.series;
    let (t0, t1) = (s[0].t, s[s.len() - 1].t);
    let start = t1 - window * (t1 - t0);
    let rows: Vec<_> = s.iter().filter(|r| r.t >= start && r.t > T::zero()).collect();
    if rows.len() < 3 || rows.windows(2).any(|w| w[1].u_max > w[0].u_max) {
        return Err(Error::InsufficientDecay);
    }
    let lt: Vec<T> = rows.iter().map(|r| r.t.ln()).collect();
    let lh: Vec<T> = rows.iter().map(|r| r.u_max.ln()).collect();
    let lw: Vec<T> = rows.iter().map(|r| T::lit(0.5) * (r.m2 / r.mass).ln()).collect();
    let (beta_h, r2_h) = linear_fit(&lt, &lh);
    let (beta_l, r2_l) = linear_fit(&lt, &lw);
    Ok(SimilarityFit {
        beta_h,
        beta_l,
        r2: r2_h.min(r2_l),
    })
}

/// One classified case in the verdict JSON and sweep CSV layout.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerdictRow {
    pub m: f64,
    pub lambda: f64,
    pub prediction: Option<Prediction>,
    pub f0: Option<f64>,
    pub f_star: Option<f64>,
    pub norm0: Option<f64>,
    pub p_star: Option<f64>,
    pub mu1: Option<f64>,
    pub mu2: Option<f64>,
    pub outcome: Option<Termination>,
    pub agreement: Option<bool>,
    pub t_w_estimate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub const SWEEP_HEADER: &str = "m,lambda,prediction,f0,f_star,norm0,p_star,mu1,mu2,outcome,agreement,t_w_estimate,error";

impl VerdictRow {
    pub fn new<T: Scalar>(m: T, lambda: T, verdict: &ThresholdVerdict<T>) -> Self {
        Self {
            m: m.as_f64(),
            lambda: lambda.as_f64(),
            prediction: Some(verdict.prediction),
            f0: Some(verdict.f0.as_f64()),
            f_star: Some(verdict.f_star.as_f64()),
            norm0: Some(verdict.norm0.as_f64()),
            p_star: Some(verdict.p_star.as_f64()),
            mu1: verdict.mu1.map(Scalar::as_f64),
            mu2: verdict.mu2.map(Scalar::as_f64),
            outcome: verdict.outcome,
            agreement: verdict.agreement,
            t_w_estimate: verdict.t_w_estimate.map(Scalar::as_f64),
            error: None,
        }
    }

    pub fn failed(m: f64, lambda: f64, error: &Error) -> Self {
        Self {
            m,
            lambda,
            prediction: None,
            f0: None,
            f_star: None,
            norm0: None,
            p_star: None,
            mu1: None,
            mu2: None,
            outcome: None,
            agreement: None,
            t_w_estimate: None,
            error: Some(error.to_string()),
        }
    }

    /// One CSV line without the trailing newline; empty cells for `None`.
    pub fn csv_line(&self) -> String {
        fn opt<V: std::fmt::Display>(v: Option<V>) -> String {
            v.map(|v| v.to_string()).unwrap_or_default()
        }
        fn name<V: Serialize>(v: Option<V>) -> String {
            v.and_then(|v| serde_json::to_value(v).ok())
                .and_then(|v| v.as_str().map(str::to_owned))
                .unwrap_or_default()
        }
        let mut s = String::new();
        write!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},",
            self.m,
            self.lambda,
            name(self.prediction),
            opt(self.f0),
            opt(self.f_star),
            opt(self.norm0),
            opt(self.p_star),
            opt(self.mu1),
            opt(self.mu2),
            name(self.outcome),
            opt(self.agreement),
            opt(self.t_w_estimate),
        )
        .unwrap();
        if let Some(e) = &self.error {
            // Quote and double embedded quotes so commas survive.
            write!(s, "\"{}\"", e.replace('"', "\"\"")).unwrap();
        }
        s
    }
}

/// Grid of dilation experiments sharing one solver configuration.
#[derive(Clone, Debug)]
pub struct SweepPlan<T> {
    pub m_list: Vec<T>,
    pub lambda_list: Vec<T>,
    pub mass: T,
    pub n: usize,
    /// `None` picks [`auto_half_width`] per cell.
    pub half_width: Option<T>,
    pub config: SolverConfig<T>,
}

fn sweep_cell<T: Scalar>(plan: &SweepPlan<T>, m: T, lambda: T) -> VerdictRow {
    let run = || -> Result<VerdictRow> {
        let params = ModelParams::new(m, plan.mass)?;
        let c = confirm_dilation(&params, lambda, plan.n, plan.half_width, &plan.config)?;
        Ok(VerdictRow::new(m, lambda, &c.verdict))
    };
    run().unwrap_or_else(|e| VerdictRow::failed(m.as_f64(), lambda.as_f64(), &e))
}

/// Confirms every `(m, λ)` cell in parallel. Rows reach `sink` in cell order
/// (`m` outer, `λ` inner) as soon as all earlier cells are done, so an
/// interrupted sweep leaves a valid prefix. Cell failures are recorded in
/// the row; only a failing `sink` aborts the sweep.
pub fn sweep<T: Scalar>(
    plan: &SweepPlan<T>,
    mut sink: impl FnMut(&VerdictRow) -> Result<()> + Send,
) -> Result<Vec<VerdictRow>> {
    for &m in &plan.m_list {
        if m <= T::lit(3.0) {
            return Err(Error::NotSupercritical(m.as_f64()));
        }
    }
    let cells: Vec<(usize, T, T)> = plan
        .m_list
        .iter()
        .flat_map(|&m| plan.lambda_list.iter().map(move |&l| (m, l)))
        .enumerate()
        .map(|(k, (m, l))| (k, m, l))
        .collect();
    let total = cells.len();
    let abort = AtomicBool::new(false);
    let (tx, rx) = mpsc::channel::<(usize, VerdictRow)>();

    std::thread::scope(|scope| {
        let abort = &abort;
        let writer = scope.spawn(move || -> Result<Vec<VerdictRow>> {
            let mut pending = BTreeMap::new();
            let mut rows = Vec::with_capacity(total);
            for (k, row) in rx {
                pending.insert(k, row);
                while let Some(row) = pending.remove(&rows.len()) {
                    if let Err(e) = sink(&row) {
                        abort.store(true, Ordering::Relaxed);
                        return Err(e);
                    }
                    rows.push(row);
                }
            }
            Ok(rows)
        });
        cells.par_iter().for_each_with(tx, |tx, &(k, m, l)| {
            if abort.load(Ordering::Relaxed) {
                return;
            }
            let _ = tx.send((k, sweep_cell(plan, m, l)));
        });
        writer.join().expect("sweep writer panicked")
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::RunRecord;
    use crate::grid::Boundary;

    fn p4() -> ModelParams<f64> {
        ModelParams::new(4.0, 1.0).unwrap()
    }

    #[test]
    fn dilation_family_dichotomy() {
        let p = p4();
        for (lam, want) in [
            (0.8, Prediction::Global),
            (0.9, Prediction::Global),
            (1.1, Prediction::Blowup),
            (1.2, Prediction::Blowup),
            (1.0, Prediction::Indeterminate),
        ] {
            let v = predict_dilation(&p, lam).unwrap();
            assert_eq!(v.prediction, want, "lambda {lam}");
            assert!(!v.contradiction);
        }
        for m in [4.5, 5.0, 6.0] {
            let p = ModelParams::new(m, 1.3).unwrap();
            for lam in [0.5, 0.95, 1.05, 2.0] {
                let v = predict_dilation(&p, lam).unwrap();
                assert!(v.f0 < v.f_star);
                let want = if lam < 1.0 { Prediction::Global } else { Prediction::Blowup };
                assert_eq!(v.prediction, want);
            }
        }
    }

    #[test]
    fn verdict_invariants() {
        let p = p4();
        let sc = SharpConstants::new(4.0, Some(1.0)).unwrap();
        let (ps, fs) = (sc.p_star.unwrap(), sc.f_star.unwrap());
        let v = predict_from(fs * 1.01, ps * 0.5, &p).unwrap();
        assert_eq!(v.prediction, Prediction::Indeterminate);
        assert!(v.mu1.is_none() && v.mu2.is_none());
        let v = predict_from(0.5 * fs, ps, &p).unwrap();
        assert_eq!(v.prediction, Prediction::Indeterminate);
        assert!(v.contradiction);
        let v = predict_from(0.5 * fs, 1.2 * ps, &p).unwrap();
        assert_eq!(v.prediction, Prediction::Blowup);
        let (mu1, mu2) = (v.mu1.unwrap(), v.mu2.unwrap());
        assert!(mu1 < 1.0 && mu2 > 1.0);
    }

    #[test]
    fn subcritical_is_rejected() {
        for m in [2.0, 3.0] {
            let p = ModelParams::new(m, 1.0).unwrap();
            assert!(matches!(predict_dilation(&p, 1.1), Err(Error::NotSupercritical(_))));
            let g = Grid::centered(2.0, 64, Boundary::Periodic).unwrap();
            let u = Field::from_fn(g, |x: f64| (-x * x).exp()).unwrap();
            assert!(matches!(predict(&u, &p), Err(Error::NotSupercritical(_))));
        }
    }

    #[test]
    fn dilation_certificates_match_closed_form() {
        // F0 = 0 at λ^{m-3} = m/3; then μ1 = 0 and μ2 solves g = 0.
        let p = p4();
        let lam = 4.0f64 / 3.0;
        let (f0, norm0) = dilation_invariants(&p, lam).unwrap();
        let ps: f64 = SharpConstants::new(4.0, Some(1.0)).unwrap().p_star.unwrap();
        assert!(f0.abs() <= 1e-10 * ps.powi(5));
        assert!((norm0 / ps - lam.powf(0.8)).abs() < 1e-14);
        // Dilations lie on g, so μ2 for the blow-up side equals λ^{m/(m+1)}.
        for lam in [1.1, 1.2] {
            let v = predict_dilation(&p, lam).unwrap();
            assert!((v.mu2.unwrap() - lam.powf(0.8)).abs() < 1e-10);
        }
        for lam in [0.8, 0.9] {
            let v = predict_dilation(&p, lam).unwrap();
            assert!((v.mu1.unwrap() - lam.powf(0.8)).abs() < 1e-10);
        }
    }

    #[test]
    fn discrete_prediction_matches_exact_on_fixture() {
        let p = p4();
        let cfg = SolverConfig {
            t_end: 50.0,
            ..SolverConfig::default()
        };
        for lam in [0.8, 0.9, 1.1, 1.2] {
            let u = dilation_initial(&p, lam, 1024, None, &cfg).unwrap();
            let a = predict(&u, &p).unwrap();
            let b = predict_dilation(&p, lam).unwrap();
            assert_eq!(a.prediction, b.prediction, "lambda {lam}");
        }
    }

    #[test]
    fn auto_grid_widens_for_spreading() {
        let p = p4();
        let l = steady::solve_for_mass(4.0, 1.0, 1e-12).unwrap().half_width;
        let x = auto_half_width(&p, 1.1, None, 50.0).unwrap();
        assert!((x - 4.0 * l / 1.1).abs() < 1e-12);
        let x = auto_half_width(&p, 0.9, None, 50.0).unwrap();
        assert!((x - 1.25 * spreading_front(1.0, 50.0)).abs() < 1e-12);
        assert!(x > 50.0 * l);
    }

    fn synthetic(rows: Vec<SeriesRow<f64>>, termination: Termination) -> RunRecord<f64> {
        let g = Grid::centered(1.0, 16, Boundary::Periodic).unwrap();
        RunRecord {
            params: p4(),
            config: SolverConfig::default(),
            series: rows,
            snapshots: vec![Field::zeros(g)],
            termination,
            t_w_estimate: None,
            steps_accepted: 0,
            steps_rejected: 0,
            failure: None,
            min_value: 0.0,
            undershoot_flagged: false,
            edge_ratio: 0.0,
        }
    }

    fn row(t: f64, u_max: f64, m2: f64, norm: f64) -> SeriesRow<f64> {
        SeriesRow {
            t,
            dt: 0.0,
            mass: 1.0,
            free_energy: 0.0,
            m2,
            norm_m1: norm,
            grad_l2: 1.0,
            fisher: 0.0,
            u_max,
            u_min: 0.0,
        }
    }

    #[test]
    fn similarity_fit_recovers_exponents() {
        let (bh, bl) = (-1.0 / 7.0, 3.0 / 14.0);
        let rows: Vec<_> = (0..200)
            .map(|k| {
                let t = 0.01 * (1.05f64).powi(k);
                row(t, t.powf(bh), t.powf(2.0 * bl), 1.0)
            })
            .collect();
        let fit = fit_similarity(&synthetic(rows, Termination::ReachedTEnd), 0.3).unwrap();
        assert!((fit.beta_h - bh).abs() < 1e-10);
        assert!((fit.beta_l - bl).abs() < 1e-10);
        assert!(fit.r2 > 1.0 - 1e-10);
    }

    #[test]
    fn similarity_fit_rejects_growth() {
        let rows: Vec<_> = (1..50).map(|k| row(k as f64, k as f64, 1.0, 1.0)).collect();
        let rec = synthetic(rows, Termination::BlowupIndicated);
        assert!(matches!(fit_similarity(&rec, 0.3), Err(Error::InsufficientDecay)));
    }

    #[test]
    fn scenario_labels() {
        let steady: Vec<_> = (0..10).map(|k| row(k as f64, 1.0, 1.0, 1.0)).collect();
        let r = scenario_monitor(&synthetic(steady, Termination::ReachedTEnd));
        assert!(r.p1 && r.p2);
        assert_eq!(r.scenario, Scenario::SteadyApproach);
        let spread: Vec<_> = (0..10).map(|k| row(k as f64, 1.0, 1.0 + 10.0 * k as f64, 1.0)).collect();
        let r = scenario_monitor(&synthetic(spread, Termination::ReachedTEnd));
        assert_eq!((r.p1, r.p2), (true, false));
        let blow: Vec<_> = (0..10).map(|k| row(k as f64, 1.0, 1.0, 1.0 + 0.1 * k as f64)).collect();
        let r = scenario_monitor(&synthetic(blow, Termination::BlowupIndicated));
        assert!(!r.p1);
        assert_eq!(r.scenario, Scenario::ConfinedConcentration);
    }

    #[test]
    fn m2_monitors() {
        let up: Vec<_> = (0..10).map(|k| row(k as f64, 1.0, 1.0 + k as f64, 1.0)).collect();
        assert!(m2_increasing_final_half(&up));
        let mut flat = up.clone();
        flat[9].m2 = flat[8].m2;
        assert!(!m2_increasing_final_half(&flat));
        let mut lin = up;
        lin[0].free_energy = 1.0 / 6.0;
        assert_eq!(m2_linear_bound_excess(&lin), 0.0);
    }

    #[test]
    fn csv_rows() {
        let v = predict_dilation(&p4(), 1.1).unwrap();
        let row = VerdictRow::new(4.0, 1.1, &v);
        let line = row.csv_line();
        assert_eq!(line.split(',').count(), SWEEP_HEADER.split(',').count());
        assert!(line.starts_with("4,1.1,Blowup,"));
        let bad = VerdictRow::failed(4.0, 0.0, &Error::InvalidParameter("a, \"b\"".into()));
        assert!(bad.csv_line().ends_with("\"invalid parameter: a, \"\"b\"\"\""));
    }

    #[test]
    fn empty_sweep_is_empty() {
        let plan = SweepPlan {
            m_list: vec![4.0],
            lambda_list: vec![],
            mass: 1.0,
            n: 256,
            half_width: None,
            config: SolverConfig::default(),
        };
        let rows = sweep(&plan, |_| Ok(())).unwrap();
        assert!(rows.is_empty());
        let bad = SweepPlan {
            m_list: vec![3.0],
            ..plan
        };
        assert!(matches!(sweep(&bad, |_| Ok(())), Err(Error::NotSupercritical(_))));
    }

    #[test]
    fn sweep_records_cell_errors_in_order() {
        let plan = SweepPlan {
            m_list: vec![4.0, 5.0],
            lambda_list: vec![-1.0, 1.2],
            mass: 1.0,
            n: 256,
            half_width: None,
            config: SolverConfig::default(),
        };
        let mut seen = Vec::new();
        let rows = sweep(&plan, |r| {
            seen.push((r.m, r.lambda));
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, vec![(4.0, -1.0), (4.0, 1.2), (5.0, -1.0), (5.0, 1.2)]);
        assert!(rows[0].error.is_some() && rows[2].error.is_some());
        for r in [&rows[1], &rows[3]] {
            assert_eq!(r.prediction, Some(Prediction::Blowup));
            assert_eq!(r.agreement, Some(true));
        }
        let again = sweep(&plan, |_| Ok(())).unwrap();
        assert_eq!(rows, again);
    }
}
