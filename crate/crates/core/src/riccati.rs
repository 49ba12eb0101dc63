//! Comparison ODE `H' = C H^p / (t+R)^(p-1)`, `H(0) = N eps`.
//!
//! With `u = H^(1-p)` the equation is linear in `u`, giving
//!
//! - `p < 2`: `H = [(N eps)^(1-p) + C~ R^(2-p) - C~ (t+R)^(2-p)]^(-1/(p-1))`,
//!   `C~ = C (p-1)/(2-p)`;
//! - `p = 2`: `H = [(N eps)^(-1) - C ln((t+R)/R)]^(-1)`.
//!
//! Both blow up when the bracket vanishes.

use serde::Serialize;

use crate::coordinates::positive;
use crate::error::{LabError, Result};
use crate::functionals::MonitorSample;
use crate::pde_solver::{LifespanRecord, RunStatus};

/// Below this distance from 2 the logarithmic closed form is used.
pub const LOG_SWITCH: f64 = 1e-6;

/// Relative slack on the blow-up time ordering.
pub const BLOWUP_TIME_SLACK: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiccatiParams {
    pub p: f64,
    /// Data functional per unit amplitude.
    pub n: f64,
    pub epsilon: f64,
    pub c: f64,
    pub radius: f64,
}

impl RiccatiParams {
    pub fn new(p: f64, n: f64, epsilon: f64, c: f64, radius: f64) -> Result<Self> {
        positive("N", n)?;
        positive("epsilon", epsilon)?;
        positive("C", c)?;
        positive("R", radius)?;
        if !(p > 1.0 && p <= 2.0) {
            return Err(LabError::InvalidParameter(format!(
                "p = {p} must lie in (1, 2]"
            )));
        }
        Ok(Self {
            p,
            n,
            epsilon,
            c,
            radius,
        })
    }

    /// `H(0) = N eps`.
    pub fn initial(&self) -> f64 {
        self.n * self.epsilon
    }

    fn logarithmic(&self) -> bool {
        2.0 - self.p < LOG_SWITCH
    }

    /// `C (p-1) / (2-p)`; infinite in the logarithmic case.
    pub fn c_tilde(&self) -> f64 {
        if self.logarithmic() {
            f64::INFINITY
        } else {
            self.c * (self.p - 1.0) / (2.0 - self.p)
        }
    }

    /// Right-hand side of the ODE.
    pub fn rhs(&self, t: f64, h: f64) -> f64 {
        self.c * h.abs().powf(self.p) / (t + self.radius).powf(self.p - 1.0)
    }
}

/// Closed-form solution at time `t`.
pub fn h_closed_form(rp: &RiccatiParams, t: f64) -> Result<f64> {
    if t < 0.0 {
        return Err(LabError::InvalidParameter(format!("t = {t} must be >= 0")));
    }
    let blowup = h_blowup_time(rp);
    if t >= blowup {
        return Err(LabError::PastBlowup { t, blowup });
    }
    let h0 = rp.initial();
    let bracket = if rp.logarithmic() {
        1.0 / h0 - rp.c * (t / rp.radius).ln_1p()
    } else {
        let ct = rp.c_tilde();
        let q = 2.0 - rp.p;
        h0.powf(1.0 - rp.p) + ct * rp.radius.powf(q) - ct * (t + rp.radius).powf(q)
    };
    if !(bracket > 0.0) {
        return Err(LabError::PastBlowup { t, blowup });
    }
    Ok(bracket.powf(-1.0 / (rp.p - 1.0)))
}

/// Time at which the closed form blows up.
pub fn h_blowup_time(rp: &RiccatiParams) -> f64 {
    let h0 = rp.initial();
    if rp.logarithmic() {
        rp.radius * (1.0 / (rp.c * h0)).exp_m1()
    } else {
        let q = 2.0 - rp.p;
        (rp.radius.powf(q) + h0.powf(1.0 - rp.p) / rp.c_tilde()).powf(1.0 / q) - rp.radius
    }
}

/// Bound shape `C1 eps^(-(p-1)/(2-p))` for `p < 2`, `exp(C2 / eps)` for
/// `p = 2`.
pub fn lifespan_bound(p: f64, epsilon: f64, constant: f64) -> Result<f64> {
    if !(1.5..=2.0).contains(&p) {
        return Err(LabError::InvalidParameter(format!(
            "lifespan bounds hold for 3/2 <= p <= 2, got {p}"
        )));
    }
    positive("epsilon", epsilon)?;
    positive("constant", constant)?;
    if p == 2.0 {
        Ok((constant / epsilon).exp())
    } else {
        Ok(constant * epsilon.powf(-(p - 1.0) / (2.0 - p)))
    }
}

/// Exponent `-(p-1)/(2-p)` of the power-law bound.
pub fn target_slope(p: f64) -> f64 {
    -(p - 1.0) / (2.0 - p)
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub c: f64,
    pub h_blowup_time: f64,
    /// Smallest `F - H + tol` over the samples; negative means violated.
    pub min_margin: f64,
    pub min_margin_t: f64,
    pub pointwise_ok: bool,
    /// Blown-up runs must cross before `H` blows up; runs that reached
    /// `t_max` must not have outlived `H`.
    pub blowup_order_ok: bool,
    pub passed: bool,
}

/// Checks `F >= H` along a monitor series, with `H` built from `rp` (whose
/// `N eps` should equal `F(0)`), and the ordering of the blow-up times.
pub fn comparison_check(
    samples: &[MonitorSample],
    rp: &RiccatiParams,
    record: &LifespanRecord,
) -> ComparisonReport {
    let t_h = h_blowup_time(rp);
    let mut min_margin = f64::INFINITY;
    let mut min_margin_t = 0.0;
    for s in samples {
        let tol = 3.0 * s.f_quad_err + 1e-12 * s.f.abs();
        let margin = match h_closed_form(rp, s.t) {
            Ok(h) => s.f - h + tol,
            Err(_) => f64::NEG_INFINITY,
        };
        if margin < min_margin {
            min_margin = margin;
            min_margin_t = s.t;
        }
    }
    let pointwise_ok = min_margin >= 0.0;
    let blowup_order_ok = match record.status {
        RunStatus::BlewUp => record.t_num <= t_h * (1.0 + BLOWUP_TIME_SLACK),
        RunStatus::ReachedTmax => t_h >= record.t_num * (1.0 - BLOWUP_TIME_SLACK),
        RunStatus::BoundaryContact => false,
    };
    ComparisonReport {
        c: rp.c,
        h_blowup_time: t_h,
        min_margin: if min_margin.is_finite() {
            min_margin
        } else {
            -1.0
        },
        min_margin_t,
        pointwise_ok,
        blowup_order_ok,
        passed: pointwise_ok && blowup_order_ok,
    }
}
