//! Fixtures shared by the integration tests and the acceptance harness.
#![allow(dead_code)]

use thinfilm::evolve::{step, SolverConfig};
use thinfilm::{Boundary, Field, Grid, ModelParams};

/// `B(a, b)` from log-gamma.
pub fn beta(a: f64, b: f64) -> f64 {
    (libm::lgamma(a) + libm::lgamma(b) - libm::lgamma(a + b)).exp()
}

/// Closed forms of the height-`h` steady profile: `(L, mass, ∫U^{m+1}, ∫U'²)`.
///
/// Substituting `U = h·w` turns each integral into `∫_0^1 w^{a-1}(1-w^m)^{b-1} dw = B(a/m, b)/m`.
pub fn steady_oracle(m: f64, h: f64) -> (f64, f64, f64, f64) {
    let c = ((m + 1.0) / 2.0).sqrt();
    let len = h.powf((1.0 - m) / 2.0) * c / m * beta(1.0 / (2.0 * m), 0.5);
    let mass = 2.0 * h.powf((3.0 - m) / 2.0) * c / m * beta(3.0 / (2.0 * m), 0.5);
    let pow = 2.0 * h.powf((m + 3.0) / 2.0) * c / m * beta((2.0 * m + 3.0) / (2.0 * m), 0.5);
    let grad = 2.0 * (2.0 / (m + 1.0)).sqrt() * h.powf((m + 3.0) / 2.0) / m * beta(3.0 / (2.0 * m), 1.5);
    (len, mass, pow, grad)
}

/// `C_*(m)` as the quotient of the closed-form integrals.
pub fn c_star_oracle(m: f64) -> f64 {
    let (_, mass, pow, grad) = steady_oracle(m, 1.0);
    pow.powf(3.0 / m) / (mass.powf((m + 3.0) / m) * grad)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Sum of Gaussian bumps `(center, width, height)` sampled on `grid`.
pub fn bumps(grid: &Grid<f64>, parts: &[(f64, f64, f64)]) -> Field<f64> {
    Field::from_fn(grid.clone(), |x| {
        parts
            .iter()
            .map(|&(c, w, h)| h * (-(x - c) * (x - c) / (2.0 * w * w)).exp())
            .sum()
    })
    .unwrap()
}

/// Result of the scaling-compatibility study on successive refinements.
#[derive(Debug)]
pub struct ScalingStudy {
    pub dx: Vec<f64>,
    /// `max|v(x, t/λ^b) − λ^a u(λx, t)| / max|u|` per level.
    pub mismatch: Vec<f64>,
    /// Max difference of `u(T)` between consecutive levels on shared nodes.
    pub level_diffs: Vec<f64>,
    /// `log2` of the ratio of consecutive `level_diffs`.
    pub order: f64,
    /// `max|u(T) − u0| / max|u0|` on the finest level.
    pub movement: f64,
}

fn run_fixed(u0: &Field<f64>, params: &ModelParams<f64>, cfg: &SolverConfig<f64>, dt: f64, steps: usize) -> Field<f64> {
    let mut u = u0.clone();
    for _ in 0..steps {
        u = step(&u, params, cfg, dt).expect("fixed-step run").0;
    }
    u
}

/// Evolves a Gaussian `u0` and its rescaling `λ^a u0(λx)` with time steps
/// scaled by `λ^{-b}` and `ε` scaled by `λ^a`, on `levels` dyadic refinements.
pub fn scaling_study(m: f64, lambda: f64, n0: usize, levels: usize) -> ScalingStudy {
    let params = ModelParams::new(m, 1.0).unwrap();
    let (a, b) = thinfilm::sharp::scaling_exponents(m).unwrap();
    let half = 3.0;
    let (dt, steps) = (1e-4, 20);
    let eps = 1e-8;
    let mut grid = Grid::centered(half, n0, Boundary::Periodic).unwrap();
    let mut dxs = Vec::new();
    let mut mismatch = Vec::new();
    let mut finals: Vec<Field<f64>> = Vec::new();
    let mut movement = 0.0;
    for _ in 0..levels {
        let u0 = bumps(&grid, &[(0.0, 0.3, 1.0)]);
        let cfg_u = SolverConfig {
            epsilon: Some(eps),
            ..SolverConfig::default()
        };
        let u = run_fixed(&u0, &params, &cfg_u, dt, steps);
        movement = u
            .values()
            .iter()
            .zip(u0.values())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0f64, f64::max)
            / u0.max();

        let grid_v = Grid::centered(half / lambda, grid.len(), Boundary::Periodic).unwrap();
        let v0 = Field::new(
            grid_v.clone(),
            u0.values().iter().map(|&x| lambda.powf(a) * x).collect(),
            0.0,
        )
        .unwrap();
        let cfg_v = SolverConfig {
            epsilon: Some(eps * lambda.powf(a)),
            ..SolverConfig::default()
        };
        let v = run_fixed(&v0, &params, &cfg_v, dt / lambda.powf(b), steps);

        let top = u.max();
        let worst = u
            .values()
            .iter()
            .zip(v.values())
            .map(|(&x, &y)| (y - lambda.powf(a) * x).abs())
            .fold(0.0f64, f64::max);
        mismatch.push(worst / (lambda.powf(a) * top));
        dxs.push(grid.dx());
        finals.push(u);
        grid = grid.refined();
    }
    let level_diffs: Vec<f64> = finals
        .windows(2)
        .map(|w| {
            w[0].values()
                .iter()
                .enumerate()
                .map(|(i, &c)| (c - w[1].values()[2 * i]).abs())
                .fold(0.0f64, f64::max)
        })
        .collect();
    let order = if level_diffs.len() >= 2 {
        (level_diffs[level_diffs.len() - 2] / level_diffs[level_diffs.len() - 1]).log2()
    } else {
        f64::NAN
    };
    ScalingStudy {
        dx: dxs,
        mismatch,
        level_diffs,
        order,
        movement,
    }
}
