//! Integrated quantities built from the multiplier `psi = e^(-t/2M) phi`.
//!
//! Along a run the monitor tracks
//!
//! - `L(t) = int psi v_t ds`,
//! - `J(t) = int_0^t int h psi |v_t|^p ds dtau`,
//! - `F(t) = J/2 + N eps` with `N eps = 1/2 int phi v_t(0) ds`,
//! - `G(t) = L - F`,
//!
//! and [`check_inequalities`] verifies that `G >= 0`, that `e^(t/M) G` does
//! not decrease, that `F <= L`, and that `F' (t+R)^(p-1) / F^p` stays above a
//! positive constant.

use serde::Serialize;

use crate::coordinates::{
    positive, radius_from_tortoise, ModelParams, SpatialGrid, GRID_TOLERANCE,
};
use crate::error::{LabError, Result};
use crate::pde_solver::{abs_pow, FieldState};
use crate::potentials::ln_weight_at;
use crate::quadrature::gauss_legendre;
use crate::test_function::TestFunctionTable;

/// Default additive slack of the inequality checks, relative to `|L|`.
pub const DEFAULT_TOLERANCE: f64 = 1e-6;

/// Fraction of the run, counted back from the threshold crossing, that is
/// treated as unresolved by the inequality checks.
pub const TAIL_EXCLUSION: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonitorSample {
    pub t: f64,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "G")]
    pub g: f64,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "Fprime")]
    pub fprime: f64,
    pub ratio_riccati: f64,
    /// Estimated time-quadrature error carried by `F`.
    pub f_quad_err: f64,
    pub max_abs_vt: f64,
}

impl MonitorSample {
    /// `e^(t/M) G(t)`.
    pub fn e_tm_g(&self, mass: f64) -> f64 {
        (self.t / mass).exp() * self.g
    }
}

/// `int psi v_t ds` by the trapezoid rule over the state's support.
pub fn linear_moment(state: &FieldState, table: &TestFunctionTable, mass: f64) -> f64 {
    let sum: f64 = (state.lo..=state.hi)
        .map(|i| table.psi(mass, state.t, i) * state.vt[i])
        .sum();
    sum * table.ds
}

/// `int h psi |v_t|^p ds` over the state's support.
pub fn nonlinear_density(
    state: &FieldState,
    grid: &SpatialGrid,
    table: &TestFunctionTable,
    mass: f64,
    p: f64,
) -> f64 {
    let sum: f64 = (state.lo..=state.hi)
        .map(|i| grid.h_of_s[i] * table.psi(mass, state.t, i) * abs_pow(state.vt[i], p))
        .sum();
    sum * grid.ds
}

/// One trapezoid step of the time integral: `J + dt (q_prev + q_new) / 2`.
pub fn accumulate_nonlinear(j: f64, q_prev: f64, q_new: f64, dt: f64) -> f64 {
    j + 0.5 * dt * (q_prev + q_new)
}

/// `N eps = 1/2 int phi v_t(0) ds` for an initial state.
pub fn data_functional(state: &FieldState, table: &TestFunctionTable, mass: f64) -> f64 {
    0.5 * linear_moment(state, table, mass)
}

/// Assembles a sample from the running integrals.
pub fn monitor(
    t: f64,
    l: f64,
    j: f64,
    fprime: f64,
    n_eps: f64,
    params: &ModelParams,
) -> MonitorSample {
    let f = 0.5 * j + n_eps;
    let ratio_riccati = if f > 0.0 {
        fprime * (t + params.radius).powf(params.p - 1.0) / f.powf(params.p)
    } else {
        0.0
    };
    MonitorSample {
        t,
        l,
        j,
        g: l - f,
        f,
        fprime,
        ratio_riccati,
        f_quad_err: 0.0,
        max_abs_vt: 0.0,
    }
}

/// Running accumulator fed with every level of a run.
pub struct Monitor<'a> {
    grid: &'a SpatialGrid,
    table: &'a TestFunctionTable,
    params: ModelParams,
    n_eps: f64,
    j: f64,
    j_err: f64,
    q_hist: [f64; 2],
    observed: usize,
    interval: f64,
    next_sample: f64,
    dense_above: f64,
    psi: Vec<f64>,
    samples: Vec<MonitorSample>,
}

impl<'a> Monitor<'a> {
    /// `threshold` is the blow-up level; every level is sampled once
    /// `max |v_t|` is within a decade of it.
    pub fn new(
        grid: &'a SpatialGrid,
        table: &'a TestFunctionTable,
        params: &ModelParams,
        initial: &FieldState,
        interval: f64,
        threshold: f64,
    ) -> Self {
        Self {
            grid,
            table,
            params: *params,
            n_eps: data_functional(initial, table, params.mass),
            j: 0.0,
            j_err: 0.0,
            q_hist: [0.0; 2],
            observed: 0,
            interval,
            next_sample: 0.0,
            dense_above: threshold / 10.0,
            psi: vec![0.0; grid.n],
            samples: Vec::new(),
        }
    }

    /// `N eps` of the run.
    pub fn n_eps(&self) -> f64 {
        self.n_eps
    }

    /// Folds in one level; `dt` is the spacing to the previous level.
    pub fn observe(&mut self, state: &FieldState, dt: f64) {
        let (lo, hi) = (state.lo, state.hi);
        self.table
            .fill_psi(self.params.mass, state.t, lo, hi, &mut self.psi);
        let p = self.params.p;
        let h = &self.grid.h_of_s;
        let q = self.grid.ds
            * (lo..=hi)
                .map(|i| h[i] * self.psi[i] * abs_pow(state.vt[i], p))
                .sum::<f64>();

        if self.observed > 0 {
            self.j = accumulate_nonlinear(self.j, self.q_hist[1], q, dt);
        }
        if self.observed > 1 {
            // local trapezoid error ~ dt^3 q''/12
            self.j_err += dt / 12.0 * (q - 2.0 * self.q_hist[1] + self.q_hist[0]).abs();
        }
        self.q_hist = [self.q_hist[1], q];
        self.observed += 1;

        let due = state.t >= self.next_sample - 1e-9 * self.interval;
        if due || state.max_abs_vt >= self.dense_above {
            self.push_sample(state, q);
            while self.next_sample <= state.t + 1e-9 * self.interval {
                self.next_sample += self.interval;
            }
        }
    }

    fn push_sample(&mut self, state: &FieldState, q: f64) {
        let l = self.grid.ds
            * (state.lo..=state.hi)
                .map(|i| self.psi[i] * state.vt[i])
                .sum::<f64>();
        let mut sample = monitor(state.t, l, self.j, 0.5 * q, self.n_eps, &self.params);
        sample.f_quad_err = 0.5 * self.j_err;
        sample.max_abs_vt = state.max_abs_vt;
        self.samples.push(sample);
    }

    /// Closes the series with the last observed level and returns it.
    pub fn finish(mut self, last: &FieldState) -> Vec<MonitorSample> {
        let have_last = self.samples.last().map(|s| s.t) == Some(last.t);
        if !have_last && self.observed > 0 {
            self.table
                .fill_psi(self.params.mass, last.t, last.lo, last.hi, &mut self.psi);
            self.push_sample(last, self.q_hist[1]);
        }
        self.samples
    }
}

/// Pass/fail of one inequality with its worst normalised margin.
#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    /// Smallest margin over the series, divided by `|L|` where applicable;
    /// negative means violated.
    pub worst_margin: f64,
    pub worst_t: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct InequalityReport {
    pub tol: f64,
    pub checks: Vec<CheckOutcome>,
    /// `min F' (t+R)^(p-1) / F^p`; `None` when `F` vanishes identically.
    pub c_emp: Option<f64>,
    pub passed: bool,
}

impl InequalityReport {
    pub fn check(&self, name: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct Worst {
    margin: f64,
    t: f64,
}

impl Worst {
    fn new() -> Self {
        Self {
            margin: f64::INFINITY,
            t: 0.0,
        }
    }

    fn update(&mut self, margin: f64, t: f64) {
        if margin < self.margin || margin.is_nan() {
            self.margin = margin;
            self.t = t;
        }
    }

    fn outcome(self, name: &'static str) -> CheckOutcome {
        CheckOutcome {
            name,
            passed: self.margin >= 0.0,
            worst_margin: if self.margin.is_finite() {
                self.margin
            } else {
                0.0
            },
            worst_t: self.t,
        }
    }
}

/// Checks the inequality chain on a monitor series.
///
/// `blowup_time` is the threshold crossing time of a blown-up run. Samples in
/// the last 2% before it are unresolved; they only enter the monotonicity of
/// `F`.
pub fn check_inequalities(
    samples: &[MonitorSample],
    mass: f64,
    tol: f64,
    blowup_time: Option<f64>,
) -> InequalityReport {
    let scale = |l: f64| l.abs().max(f64::MIN_POSITIVE);

    let mut g_sign = Worst::new();
    let mut g_growth = Worst::new();
    let mut f_below_l = Worst::new();
    let mut f_monotone = Worst::new();

    let cutoff = blowup_time.map(|t| (1.0 - TAIL_EXCLUSION) * t);
    for (k, s) in samples.iter().enumerate() {
        if k > 0 {
            f_monotone.update(s.f - samples[k - 1].f, s.t);
        }
        if cutoff.is_some_and(|c| s.t > c) {
            continue;
        }
        g_sign.update((s.g + tol * s.l.abs()) / scale(s.l), s.t);
        f_below_l.update((s.l + tol * s.l.abs() - s.f) / scale(s.l), s.t);
        if k > 0 {
            let prev = &samples[k - 1];
            let decay = (-(s.t - prev.t) / mass).exp();
            g_growth.update((s.g - decay * prev.g + tol * s.l.abs()) / scale(s.l), s.t);
        }
    }

    let eligible = samples
        .iter()
        .filter(|s| s.f > 0.0 && cutoff.is_none_or(|c| s.t <= c));
    let mut riccati = Worst::new();
    let mut any = false;
    for s in eligible {
        any = true;
        riccati.update(s.ratio_riccati, s.t);
    }
    let c_emp = any.then_some(riccati.margin);
    let riccati_outcome = CheckOutcome {
        name: "riccati_lower_bound",
        passed: c_emp.is_none_or(|c| c > 0.0 && c.is_finite()),
        worst_margin: c_emp.unwrap_or(0.0),
        worst_t: riccati.t,
    };

    let checks = vec![
        g_sign.outcome("G_nonnegative"),
        g_growth.outcome("exp_t_over_M_G_nondecreasing"),
        f_below_l.outcome("F_le_L"),
        riccati_outcome,
        f_monotone.outcome("F_nondecreasing"),
    ];
    let passed = checks.iter().all(|c| c.passed);
    InequalityReport {
        tol,
        checks,
        c_emp,
        passed,
    }
}

/// `int_0^(t+L) (1+s)^alpha e^(-beta (t-s)) ds / (t+L)^alpha`.
pub fn integral_bound_ratio(alpha: f64, beta: f64, shift: f64, t: f64) -> Result<f64> {
    if !(alpha >= 0.0) || t < 0.0 {
        return Err(LabError::InvalidParameter(format!(
            "need alpha >= 0 and t >= 0, got alpha = {alpha}, t = {t}"
        )));
    }
    positive("beta", beta)?;
    positive("L", shift)?;
    let end = t + shift;
    let panel = (0.25 / beta).min(0.5);
    let integral = gauss_legendre(0.0, end, panel, |s| {
        (alpha * (1.0 + s).ln() - beta * (t - s)).exp()
    });
    Ok(integral / end.powf(alpha))
}

/// `I(t) / (t+R)` with `I = int_{|s| <= t+R} h^(-1/(p-1)) e^((s-t)/2M) ds`,
/// using the exact weight.
pub fn hoelder_i_check(mass: f64, p: f64, radius: f64, t: f64) -> Result<f64> {
    positive("mass", mass)?;
    positive("radius", radius)?;
    if !(p > 1.0 && p <= 2.0) || t < 0.0 {
        return Err(LabError::InvalidParameter(format!(
            "need 1 < p <= 2 and t >= 0, got p = {p}, t = {t}"
        )));
    }
    let reach = t + radius;
    let inv = 1.0 / (p - 1.0);
    let two_m = 2.0 * mass;
    let mut failure = None;
    let integral =
        gauss_legendre(
            -reach,
            reach,
            0.25 * mass.min(1.0),
            |s| match radius_from_tortoise(mass, s, GRID_TOLERANCE) {
                Ok(pt) => (-inv * ln_weight_at(p, &pt) + (s - t) / two_m).exp(),
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            },
        );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(integral / reach)
}

#[derive(Debug, Clone, Serialize)]
pub struct HoelderScan {
    pub p: f64,
    pub points: Vec<(f64, f64)>,
    pub sup: f64,
    /// Ratio at the last time over the ratio at the middle of the scan.
    pub late_growth: f64,
    /// Set when the ratio keeps growing by more than a decade over the second
    /// half of the scan, the signature of `p < 3/2`.
    pub diverging: bool,
}

/// Evaluates [`hoelder_i_check`] over `times`.
pub fn hoelder_scan(mass: f64, p: f64, radius: f64, times: &[f64]) -> Result<HoelderScan> {
    if times.len() < 2 {
        return Err(LabError::InvalidParameter(
            "scan needs two or more times".into(),
        ));
    }
    let points = times
        .iter()
        .map(|&t| hoelder_i_check(mass, p, radius, t).map(|r| (t, r)))
        .collect::<Result<Vec<_>>>()?;
    let sup = points.iter().map(|x| x.1).fold(0.0, f64::max);
    let mid = points[points.len() / 2].1;
    let last = points[points.len() - 1].1;
    let late_growth = last / mid;
    Ok(HoelderScan {
        p,
        diverging: late_growth > 10.0,
        points,
        sup,
        late_growth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sample(t: f64, l: f64, j: f64, fprime: f64, n_eps: f64) -> MonitorSample {
        let params = ModelParams::new(1.0, 2.0, 0.1, 1.0).unwrap();
        monitor(t, l, j, fprime, n_eps, &params)
    }

    #[test]
    fn trapezoid_accumulation() {
        assert_eq!(accumulate_nonlinear(1.0, 2.0, 4.0, 0.5), 2.5);
        assert_eq!(accumulate_nonlinear(0.0, 0.0, 0.0, 0.5), 0.0);
    }

    #[test]
    fn sample_algebra() {
        let s = sample(0.0, 2.0, 0.0, 0.3, 1.0);
        assert_eq!(s.f, 1.0);
        assert_eq!(s.g, 1.0);
        let s = sample(3.0, 5.25, 1.5, 0.3, 1.0);
        assert_eq!(s.g + s.f, s.l);
        assert_relative_eq!(
            s.ratio_riccati,
            0.3 * 4.0 / (1.75 * 1.75),
            max_relative = 1e-14
        );
    }

    #[test]
    fn zero_series_passes() {
        let series: Vec<_> = (0..10)
            .map(|k| sample(k as f64 * 0.1, 0.0, 0.0, 0.0, 0.0))
            .collect();
        let report = check_inequalities(&series, 1.0, DEFAULT_TOLERANCE, None);
        assert!(report.passed);
        assert!(report.c_emp.is_none());
    }

    #[test]
    fn detects_negative_g() {
        let series = vec![
            sample(0.0, 2.0, 0.0, 0.1, 1.0),
            sample(0.1, 0.9, 0.0, 0.1, 1.0),
        ];
        let report = check_inequalities(&series, 1.0, DEFAULT_TOLERANCE, None);
        assert!(!report.passed);
        assert!(!report.check("G_nonnegative").unwrap().passed);
        assert!(!report.check("F_le_L").unwrap().passed);
    }

    #[test]
    fn integral_bound_closed_form_alpha_zero() {
        let got = integral_bound_ratio(0.0, 1.0, 1.0, 10.0).unwrap();
        let exact = (1f64.exp() - (-10f64).exp()) / 1.0;
        assert_relative_eq!(got, exact, max_relative = 1e-12);
        assert!(got <= std::f64::consts::E);
    }

    #[test]
    fn integral_bound_at_zero_time() {
        // int_0^1 (1+s) e^(s/2) ds = [2(1+s) e^(s/2) - 4 e^(s/2)]_0^1 = 2
        let got = integral_bound_ratio(1.0, 0.5, 1.0, 0.0).unwrap();
        assert_relative_eq!(got, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn integral_bound_rejects_bad_input() {
        assert!(integral_bound_ratio(-1.0, 1.0, 1.0, 0.0).is_err());
        assert!(integral_bound_ratio(1.0, 0.0, 1.0, 0.0).is_err());
        assert!(integral_bound_ratio(1.0, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn hoelder_ratio_bounded_for_p2() {
        let times: Vec<f64> = (0..=10).map(|k| 20.0 * k as f64).collect();
        let scan = hoelder_scan(1.0, 2.0, 1.0, &times).unwrap();
        assert!(scan.sup.is_finite() && scan.sup > 0.0);
        assert!(!scan.diverging);
    }

    #[test]
    fn hoelder_ratio_diverges_below_three_halves() {
        let times: Vec<f64> = (0..=10).map(|k| 20.0 * k as f64).collect();
        let scan = hoelder_scan(1.0, 1.4, 1.0, &times).unwrap();
        assert!(scan.diverging, "late growth {}", scan.late_growth);
    }
}
