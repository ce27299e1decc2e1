//! Uniform 1D grids, sampled fields and model parameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Scalar;

/// Minimum number of grid points accepted by [`Grid::new`].
pub const MIN_POINTS: usize = 8;

/// How stencils treat the ends of the grid.
///
/// `Periodic` identifies the point after `x_max` with `x_min`, so the period
/// is `n * dx`. `Clamped` treats the outside as `u = 0` for the evolution and
/// switches diagnostics to one-sided second-order stencils at the ends.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Periodic,
    Clamped,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Grid<T> {
    x_min: T,
    x_max: T,
    n: usize,
    dx: T,
    boundary: Boundary,
}

impl<T: Scalar> Grid<T> {
    pub fn new(x_min: T, x_max: T, n: usize, boundary: Boundary) -> Result<Self> {
        if n < MIN_POINTS {
            return Err(Error::GridTooSmall(format!(
                "need at least {MIN_POINTS} points, got {n}"
            )));
        }
        if !(x_min.is_finite() && x_max.is_finite()) || x_max <= x_min {
            return Err(Error::InvalidParameter(format!(
                "grid endpoints must be finite with x_min < x_max (got [{x_min}, {x_max}])"
            )));
        }
        let dx = (x_max - x_min) / T::from_usize(n - 1).unwrap();
        Ok(Self {
            x_min,
            x_max,
            n,
            dx,
            boundary,
        })
    }

    /// Grid on `[-half_width, half_width]`.
    pub fn centered(half_width: T, n: usize, boundary: Boundary) -> Result<Self> {
        Self::new(-half_width, half_width, n, boundary)
    }

    #[inline]
    pub fn x_min(&self) -> T {
        self.x_min
    }
    #[inline]
    pub fn x_max(&self) -> T {
        self.x_max
    }
    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
    #[inline]
    pub fn dx(&self) -> T {
        self.dx
    }
    #[inline]
    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn with_boundary(&self, boundary: Boundary) -> Self {
        Self {
            boundary,
            ..self.clone()
        }
    }

    /// Coordinate of point `i`; the last point is `x_max` exactly, so a grid
    /// rebuilt from its first and last coordinates reproduces every point.
    #[inline]
    pub fn x(&self, i: usize) -> T {
        if i + 1 == self.n {
            self.x_max
        } else {
            self.x_min + T::from_usize(i).unwrap() * self.dx
        }
    }

    pub fn points(&self) -> impl Iterator<Item = T> + '_ {
        (0..self.n).map(move |i| self.x(i))
    }

    /// Same extent with `2n - 1` points, i.e. `dx` halved.
    pub fn refined(&self) -> Self {
        Self::new(self.x_min, self.x_max, 2 * self.n - 1, self.boundary)
            .expect("refining a valid grid")
    }
}

/// Nonnegative profile sampled on a [`Grid`] at a given time.
#[derive(Clone, Debug, PartialEq)]
pub struct Field<T> {
    grid: Grid<T>,
    values: Vec<T>,
    time: T,
}

impl<T: Scalar> Field<T> {
    pub fn new(grid: Grid<T>, values: Vec<T>, time: T) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "field has {} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure(format!("value at index {i} is not finite")));
        }
        Ok(Self { grid, values, time })
    }

    pub fn zeros(grid: Grid<T>) -> Self {
        let values = vec![T::zero(); grid.len()];
        Self {
            grid,
            values,
            time: T::zero(),
        }
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(grid: Grid<T>, f: impl Fn(T) -> T) -> Result<Self> {
        let values = grid.points().map(f).collect();
        Self::new(grid, values, T::zero())
    }

    #[inline]
    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }
    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }
    #[inline]
    pub fn time(&self) -> T {
        self.time
    }
    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn with_time(mut self, time: T) -> Self {
        self.time = time;
        self
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn min(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    /// Pointwise map keeping grid and time.
    pub fn map(&self, f: impl Fn(T) -> T) -> Result<Self> {
        Self::new(
            self.grid.clone(),
            self.values.iter().map(|&v| f(v)).collect(),
            self.time,
        )
    }
}

/// Exponent `m` and mass `M` of the problem.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams<T> {
    m: T,
    mass: T,
}

impl<T: Scalar> ModelParams<T> {
    pub fn new(m: T, mass: T) -> Result<Self> {
        if !(m.is_finite() && m > T::zero()) {
            return Err(Error::InvalidParameter(format!("exponent m must be > 0, got {m}")));
        }
        if !(mass.is_finite() && mass > T::zero()) {
            return Err(Error::InvalidParameter(format!("mass must be > 0, got {mass}")));
        }
        Ok(Self { m, mass })
    }

    #[inline]
    pub fn m(&self) -> T {
        self.m
    }
    #[inline]
    pub fn mass(&self) -> T {
        self.mass
    }

    /// `(m + 3) / m`.
    #[inline]
    pub fn alpha(&self) -> T {
        alpha(self.m)
    }

    #[inline]
    pub fn is_mass_critical(&self) -> bool {
        self.m == T::lit(3.0)
    }
}

#[inline]
pub fn alpha<T: Scalar>(m: T) -> T {
    (m + T::lit(3.0)) / m
}
