//! Lapse `F = 1 - 2M/r`, effective potential `W = 2M F / r^3` and the
//! nonlinear weight `h = F r^(1-p)`.
//!
//! Every near-horizon evaluation goes through `r - 2M` carried by
//! [`RadialPoint`]; all three quantities vanish like `r - 2M` there.

use std::f64::consts::E;

use serde::Serialize;

use crate::coordinates::{positive, radius_from_tortoise, RadialPoint, GRID_TOLERANCE};
use crate::error::{LabError, Result};

/// `1 - 2M/r` for a plain radius.
pub fn lapse(mass: f64, r: f64) -> Result<f64> {
    positive("mass", mass)?;
    if !(r > 2.0 * mass) {
        return Err(LabError::InsideHorizon {
            r,
            horizon: 2.0 * mass,
        });
    }
    Ok((r - 2.0 * mass) / r)
}

pub fn lapse_at(pt: &RadialPoint) -> f64 {
    pt.excess / pt.r
}

pub fn potential_at(mass: f64, pt: &RadialPoint) -> f64 {
    let r2 = pt.r * pt.r;
    2.0 * mass * pt.excess / (r2 * r2)
}

/// `(r - 2M) r^(-p)`, evaluated in logs so it degrades to zero only when the
/// true value is below the smallest double.
pub fn weight_at(p: f64, pt: &RadialPoint) -> f64 {
    (pt.ln_excess - p * pt.r.ln()).exp()
}

pub fn ln_weight_at(p: f64, pt: &RadialPoint) -> f64 {
    pt.ln_excess - p * pt.r.ln()
}

/// `W(s) = 2M F(s) / r(s)^3`.
pub fn potential_w(mass: f64, s: f64) -> Result<f64> {
    let pt = radius_from_tortoise(mass, s, GRID_TOLERANCE)?;
    Ok(potential_at(mass, &pt))
}

/// `h(s) = F(s) r(s)^(1-p)`.
pub fn nonlinear_weight_h(mass: f64, p: f64, s: f64) -> Result<f64> {
    let pt = radius_from_tortoise(mass, s, GRID_TOLERANCE)?;
    Ok(weight_at(p, &pt))
}

/// Coordinate where the two asymptotic regimes of `h` meet.
pub fn regime_split(mass: f64) -> f64 {
    4.0 * mass + E
}

/// Inclusive range of a sampled ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioRange {
    pub lower: f64,
    pub upper: f64,
}

impl RatioRange {
    fn of(values: impl Iterator<Item = f64>) -> Self {
        values.fold(
            Self {
                lower: f64::INFINITY,
                upper: f64::NEG_INFINITY,
            },
            |acc, v| Self {
                lower: acc.lower.min(v),
                upper: acc.upper.max(v),
            },
        )
    }

    pub fn is_bounded(&self) -> bool {
        self.lower > 0.0 && self.upper.is_finite() && self.lower <= self.upper
    }

    /// `upper / lower`.
    pub fn spread(&self) -> f64 {
        self.upper / self.lower
    }
}

/// Empirical constants of the two-regime equivalence for `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticBounds {
    pub mass: f64,
    pub p: f64,
    /// `h(s) s^(p-1)` over `[4M + e, s_max]`.
    pub far: RatioRange,
    /// `h(s) e^(-s/2M)` over `[s_min, 4M + e]`.
    pub near: RatioRange,
}

/// Samples both ratios on `samples` log-dense points per regime.
pub fn verify_h_asymptotics(
    mass: f64,
    p: f64,
    s_min: f64,
    s_max: f64,
    samples: usize,
) -> Result<AsymptoticBounds> {
    positive("mass", mass)?;
    if !(p >= 1.0) {
        return Err(LabError::InvalidParameter(format!("p = {p} must be >= 1")));
    }
    let split = regime_split(mass);
    if !(s_min < split && s_max > split) || samples < 2 {
        return Err(LabError::InvalidParameter(format!(
            "range [{s_min}, {s_max}] must straddle 4M + e = {split}"
        )));
    }

    // far regime: geometric spacing from the split outwards
    let far_ratio = (s_max / split).ln();
    let far = (0..samples)
        .map(|k| {
            let s = split * (far_ratio * k as f64 / (samples - 1) as f64).exp();
            let pt = radius_from_tortoise(mass, s, GRID_TOLERANCE)?;
            Ok((ln_weight_at(p, &pt) + (p - 1.0) * s.ln()).exp())
        })
        .collect::<Result<Vec<_>>>()?;

    // near regime: uniform in s, ratio built from logs
    let near = (0..samples)
        .map(|k| {
            let s = s_min + (split - s_min) * k as f64 / (samples - 1) as f64;
            let pt = radius_from_tortoise(mass, s, GRID_TOLERANCE)?;
            Ok((ln_weight_at(p, &pt) - s / (2.0 * mass)).exp())
        })
        .collect::<Result<Vec<_>>>()?;

    let bounds = AsymptoticBounds {
        mass,
        p,
        far: RatioRange::of(far.into_iter()),
        near: RatioRange::of(near.into_iter()),
    };
    if !bounds.far.is_bounded() {
        return Err(LabError::UnboundedRatio(format!(
            "far regime {:?}",
            bounds.far
        )));
    }
    if !bounds.near.is_bounded() {
        return Err(LabError::UnboundedRatio(format!(
            "near regime {:?}",
            bounds.near
        )));
    }
    Ok(bounds)
}
