//! Schwarzschild radius and the tortoise (Regge-Wheeler) coordinate.
//!
//! The forward map `s(r) = r + 2M ln(r - 2M)` sends the exterior `(2M, inf)`
//! onto the whole real line. Near the horizon `r - 2M` is exponentially small
//! in `s`, so the inverse is solved for `y = ln(r - 2M)` and every point keeps
//! the horizon distance next to `r`. Forming `r - 2M` from `r` would lose all
//! significant digits once `s` drops below roughly `-70M`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::potentials;

/// Iteration cap of the safeguarded Newton solver.
pub const MAX_ITERATIONS: usize = 200;

/// Relative tolerance used when building grids.
pub const GRID_TOLERANCE: f64 = 1e-14;

/// Physical parameters of one Cauchy problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Black-hole mass `M`.
    pub mass: f64,
    /// Exponent of the nonlinearity `|v_t|^p`.
    pub p: f64,
    /// Data amplitude.
    pub epsilon: f64,
    /// Half-width of the data support in `s`.
    pub radius: f64,
    /// Set when `1 < p < 3/2`, a regime with no blow-up guarantee.
    pub exploratory: bool,
}

impl ModelParams {
    /// Parameters with `p` in `[3/2, 2]`.
    pub fn new(mass: f64, p: f64, epsilon: f64, radius: f64) -> Result<Self> {
        Self::build(mass, p, epsilon, radius, false)
    }

    /// Parameters that may also use `1 < p < 3/2`.
    pub fn exploratory(mass: f64, p: f64, epsilon: f64, radius: f64) -> Result<Self> {
        Self::build(mass, p, epsilon, radius, true)
    }

    fn build(mass: f64, p: f64, epsilon: f64, radius: f64, exploratory: bool) -> Result<Self> {
        positive("mass", mass)?;
        positive("epsilon", epsilon)?;
        positive("radius", radius)?;
        if !(p > 1.0 && p <= 2.0) {
            return Err(LabError::InvalidParameter(format!(
                "p = {p} must lie in (1, 2]"
            )));
        }
        if p < 1.5 && !exploratory {
            return Err(LabError::InvalidParameter(format!(
                "p = {p} < 3/2 requires the exploratory flag"
            )));
        }
        Ok(Self {
            mass,
            p,
            epsilon,
            radius,
            exploratory: p < 1.5,
        })
    }

    /// Decay rate `1/(2M)` of the multiplier in time.
    pub fn growth_rate(&self) -> f64 {
        0.5 / self.mass
    }
}

pub(crate) fn positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(LabError::InvalidParameter(format!(
            "{name} = {value} must be positive and finite"
        )))
    }
}

/// A point of the exterior carried as `r` together with `r - 2M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialPoint {
    pub r: f64,
    /// `r - 2M`; may underflow to zero for `s < -1400M`.
    pub excess: f64,
    /// `ln(r - 2M)`, always finite.
    pub ln_excess: f64,
}

impl RadialPoint {
    /// Point at a given distance from the horizon.
    pub fn from_excess(mass: f64, excess: f64) -> Result<Self> {
        if !(excess > 0.0) {
            return Err(LabError::InsideHorizon {
                r: 2.0 * mass + excess,
                horizon: 2.0 * mass,
            });
        }
        Ok(Self {
            r: 2.0 * mass + excess,
            excess,
            ln_excess: excess.ln(),
        })
    }

    fn from_ln_excess(mass: f64, ln_excess: f64) -> Self {
        let excess = ln_excess.exp();
        Self {
            r: 2.0 * mass + excess,
            excess,
            ln_excess,
        }
    }

    /// Tortoise coordinate of this point.
    pub fn tortoise(&self, mass: f64) -> f64 {
        self.r + 2.0 * mass * self.ln_excess
    }
}

/// `s(r) = r + 2M ln(r - 2M)`.
pub fn tortoise_from_radius(mass: f64, r: f64) -> Result<f64> {
    positive("mass", mass)?;
    if !(r > 2.0 * mass) {
        return Err(LabError::InsideHorizon {
            r,
            horizon: 2.0 * mass,
        });
    }
    Ok(r + 2.0 * mass * (r - 2.0 * mass).ln())
}

/// Same map evaluated from `x = r - 2M`, exact near the horizon.
pub fn tortoise_from_excess(mass: f64, excess: f64) -> Result<f64> {
    positive("mass", mass)?;
    if !(excess > 0.0) {
        return Err(LabError::InsideHorizon {
            r: 2.0 * mass + excess,
            horizon: 2.0 * mass,
        });
    }
    Ok(2.0 * mass + excess + 2.0 * mass * excess.ln())
}

/// Inverse of [`tortoise_from_radius`].
///
/// Solves `e^y + 2M y = s - 2M` for `y = ln(r - 2M)` by Newton iteration
/// inside a bracket that always contains the root; steps that leave the
/// bracket are replaced by bisection. Terminates when the residual in `s` is
/// below `tol * max(1, |s|)`.
pub fn radius_from_tortoise(mass: f64, s: f64, tol: f64) -> Result<RadialPoint> {
    positive("mass", mass)?;
    positive("tol", tol)?;
    if !s.is_finite() {
        return Err(LabError::InvalidParameter(format!(
            "s = {s} must be finite"
        )));
    }
    let two_m = 2.0 * mass;
    let c = s - two_m;
    let target = tol * s.abs().max(1.0);
    let residual = |y: f64| y.exp() + two_m * y - c;

    // e^y > 0 gives y* < c/2M; a nonnegative root also has e^y* <= c.
    let mut hi = c / two_m;
    if c > 0.0 {
        hi = hi.min(c.ln().max(0.0));
    }
    let mut lo = (c - hi.exp()) / two_m;
    if lo >= hi {
        lo = hi - 1.0;
    }

    let mut y = if c < -20.0 * mass {
        c / two_m
    } else {
        s.max(mass).ln()
    };
    if !(y > lo && y < hi) {
        y = 0.5 * (lo + hi);
    }

    for _ in 0..MAX_ITERATIONS {
        let g = residual(y);
        if g.abs() <= target {
            return Ok(RadialPoint::from_ln_excess(mass, y));
        }
        if g < 0.0 {
            lo = y;
        } else {
            hi = y;
        }
        let newton = y - g / (y.exp() + two_m);
        y = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(1.0) {
            return Ok(RadialPoint::from_ln_excess(mass, y));
        }
    }
    Err(LabError::NoConvergence {
        s,
        iterations: MAX_ITERATIONS,
    })
}

/// Which effective potential a grid carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PotentialMode {
    Schwarzschild,
    /// `W = 0`; control case for the multiplier and the linear solver.
    Flat,
}

/// Which nonlinear weight a grid carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightMode {
    Schwarzschild,
    /// `h = 0`; the linear problem.
    Off,
}

/// Uniform grid in the tortoise coordinate with cached coefficient tables.
#[derive(Debug, Clone)]
pub struct SpatialGrid {
    pub mass: f64,
    pub p: f64,
    pub s_min: f64,
    pub s_max: f64,
    pub n: usize,
    pub ds: f64,
    pub r_of_s: Vec<f64>,
    /// `r - 2M` at each node.
    pub excess: Vec<f64>,
    pub ln_excess: Vec<f64>,
    pub f_of_s: Vec<f64>,
    pub w_of_s: Vec<f64>,
    pub h_of_s: Vec<f64>,
    pub potential: PotentialMode,
    pub weight: WeightMode,
}

impl SpatialGrid {
    /// Builds the tables for `n` equally spaced nodes on `[s_min, s_max]`.
    pub fn build(params: &ModelParams, s_min: f64, s_max: f64, n: usize) -> Result<Self> {
        Self::build_raw(params.mass, params.p, s_min, s_max, n)
    }

    /// As [`SpatialGrid::build`] with just the mass and exponent.
    pub fn build_raw(mass: f64, p: f64, s_min: f64, s_max: f64, n: usize) -> Result<Self> {
        positive("mass", mass)?;
        if n < 3 {
            return Err(LabError::InvalidParameter(format!(
                "grid needs at least 3 nodes, got {n}"
            )));
        }
        if !(s_min < s_max) || !s_min.is_finite() || !s_max.is_finite() {
            return Err(LabError::InvalidParameter(format!(
                "grid bounds [{s_min}, {s_max}] are not an interval"
            )));
        }
        let ds = (s_max - s_min) / (n - 1) as f64;
        let points = (0..n)
            .into_par_iter()
            .map(|i| radius_from_tortoise(mass, s_min + i as f64 * ds, GRID_TOLERANCE))
            .collect::<Result<Vec<_>>>()?;

        let mut grid = Self {
            mass,
            p,
            s_min,
            s_max,
            n,
            ds,
            r_of_s: Vec::with_capacity(n),
            excess: Vec::with_capacity(n),
            ln_excess: Vec::with_capacity(n),
            f_of_s: Vec::with_capacity(n),
            w_of_s: Vec::with_capacity(n),
            h_of_s: Vec::with_capacity(n),
            potential: PotentialMode::Schwarzschild,
            weight: WeightMode::Schwarzschild,
        };
        for pt in &points {
            grid.r_of_s.push(pt.r);
            grid.excess.push(pt.excess);
            grid.ln_excess.push(pt.ln_excess);
            grid.f_of_s.push(potentials::lapse_at(pt));
            grid.w_of_s.push(potentials::potential_at(mass, pt));
            grid.h_of_s.push(potentials::weight_at(p, pt));
        }
        Ok(grid)
    }

    /// Node coordinate.
    pub fn s(&self, i: usize) -> f64 {
        self.s_min + i as f64 * self.ds
    }

    /// Index of the node closest to `s`, clamped to the grid.
    pub fn nearest(&self, s: f64) -> usize {
        let x = ((s - self.s_min) / self.ds).round();
        x.clamp(0.0, (self.n - 1) as f64) as usize
    }

    /// Copy with `W` set to zero.
    pub fn with_flat_potential(mut self) -> Self {
        self.w_of_s.iter_mut().for_each(|w| *w = 0.0);
        self.potential = PotentialMode::Flat;
        self
    }

    /// Copy with `h` set to zero.
    pub fn without_nonlinearity(mut self) -> Self {
        self.h_of_s.iter_mut().for_each(|h| *h = 0.0);
        self.weight = WeightMode::Off;
        self
    }

    /// Potential at an arbitrary coordinate, consistent with the grid's mode.
    pub fn potential_at_s(&self, s: f64) -> Result<f64> {
        match self.potential {
            PotentialMode::Flat => Ok(0.0),
            PotentialMode::Schwarzschild => potentials::potential_w(self.mass, s),
        }
    }

    /// Checks the table invariants; used by tests and after construction.
    pub fn check_invariants(&self) -> Result<()> {
        let bad = |msg: String| Err(LabError::InvalidParameter(msg));
        let n = self.n;
        for (name, len) in [
            ("r_of_s", self.r_of_s.len()),
            ("excess", self.excess.len()),
            ("f_of_s", self.f_of_s.len()),
            ("w_of_s", self.w_of_s.len()),
            ("h_of_s", self.h_of_s.len()),
        ] {
            if len != n {
                return bad(format!("{name} has length {len}, expected {n}"));
            }
        }
        for i in 0..n {
            if !self.ln_excess[i].is_finite() || self.excess[i] < 0.0 {
                return bad(format!("node {i}: r - 2M is not positive"));
            }
            if !(self.f_of_s[i] >= 0.0 && self.f_of_s[i] < 1.0) {
                return bad(format!("node {i}: lapse {} outside [0, 1)", self.f_of_s[i]));
            }
            if i > 0 && self.ln_excess[i] <= self.ln_excess[i - 1] {
                return bad(format!("node {i}: radius not increasing"));
            }
        }
        Ok(())
    }
}
