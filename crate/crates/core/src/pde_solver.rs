//! Explicit three-level scheme for `v_tt - v_ss + W v = h |v_t|^p`.
//!
//! The linear part is the standard leapfrog stencil. The nonlinearity needs
//! `v_t` at the middle level, which the scheme only knows after the step, so
//! each node takes one predictor (backward difference) and one corrector
//! (centred difference through the predicted new value). Both passes are
//! pointwise, so a step is a single sweep over the active nodes.
//!
//! Compactly supported data stay exactly zero outside a numerical cone that
//! widens by one node per step; only that window is updated.

use serde::{Deserialize, Serialize};

use crate::coordinates::{positive, ModelParams, SpatialGrid};
use crate::error::{LabError, Result};
use crate::functionals::{Monitor, MonitorSample};
use crate::test_function::TestFunctionTable;

/// `(1 - (s/R)^2)^4` inside `|s| < R`, zero outside.
pub fn bump_profile(radius: f64, s: f64) -> f64 {
    let x = s / radius;
    if x.abs() >= 1.0 {
        0.0
    } else {
        let b = 1.0 - x * x;
        let b2 = b * b;
        b2 * b2
    }
}

/// Margin added on each side by the grid sizing rule, in units of `M`.
pub const SIZING_MARGIN: f64 = 5.0;

/// The multiplier needs `W(s_min)` negligible, which for every mass holds
/// once `s_min <= -60 M`.
pub const MIN_LEFT_EXTENT: f64 = 60.0;

/// Grid for a run up to `t_max`: `|s| <= R + t_max + 5M` (left end pushed to
/// at least `-60M`), spacing at most `ds`.
pub fn sized_grid(params: &ModelParams, t_max: f64, ds: f64) -> Result<SpatialGrid> {
    positive("t_max", t_max)?;
    positive("ds", ds)?;
    let half = params.radius + t_max + SIZING_MARGIN * params.mass;
    let left = half.max(MIN_LEFT_EXTENT * params.mass);
    let n = ((half + left) / ds).ceil() as usize + 1;
    SpatialGrid::build(params, -left, half, n)
}

/// Recommended time step for unit propagation speed.
pub fn cfl_dt(grid: &SpatialGrid, safety: f64) -> Result<f64> {
    if !(safety > 0.0 && safety < 1.0) {
        return Err(LabError::InvalidParameter(format!(
            "CFL safety factor {safety} must lie in (0, 1)"
        )));
    }
    Ok(safety * grid.ds)
}

/// Field samples at one time level.
#[derive(Debug, Clone)]
pub struct FieldState {
    pub t: f64,
    pub v: Vec<f64>,
    pub vt: Vec<f64>,
    pub max_abs_vt: f64,
    /// Inclusive node window outside which `v` and `vt` are exactly zero.
    pub lo: usize,
    pub hi: usize,
}

impl FieldState {
    /// `v = amplitude * f`, `v_t = amplitude * g` sampled on the grid.
    pub fn from_profiles<F, G>(grid: &SpatialGrid, amplitude: f64, f: F, g: G) -> Self
    where
        F: Fn(f64) -> f64,
        G: Fn(f64) -> f64,
    {
        let v: Vec<f64> = (0..grid.n).map(|i| amplitude * f(grid.s(i))).collect();
        let vt: Vec<f64> = (0..grid.n).map(|i| amplitude * g(grid.s(i))).collect();
        let nonzero = |i: &usize| v[*i] != 0.0 || vt[*i] != 0.0;
        let lo = (0..grid.n).find(nonzero);
        let hi = (0..grid.n).rev().find(nonzero);
        let (lo, hi) = match (lo, hi) {
            (Some(lo), Some(hi)) => (lo, hi),
            _ => (grid.n / 2, grid.n / 2),
        };
        let max_abs_vt = vt.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        Self {
            t: 0.0,
            v,
            vt,
            max_abs_vt,
            lo,
            hi,
        }
    }

    pub fn zero(grid: &SpatialGrid) -> Self {
        Self::from_profiles(grid, 0.0, |_| 0.0, |_| 0.0)
    }

    pub fn max_abs_v(&self) -> f64 {
        self.v[self.lo..=self.hi]
            .iter()
            .fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// Largest `|v|` outside `|s| <= R + t + 2 ds`, relative to `max |v|`.
    pub fn leakage_outside_cone(&self, grid: &SpatialGrid, radius: f64) -> f64 {
        let reach = radius + self.t + 2.0 * grid.ds;
        let outside = (self.lo..=self.hi)
            .filter(|&i| grid.s(i).abs() > reach)
            .fold(0.0_f64, |m, i| m.max(self.v[i].abs()));
        let scale = self.max_abs_v();
        if scale == 0.0 {
            outside
        } else {
            outside / scale
        }
    }
}

/// Default data `v = 0`, `v_t = epsilon * bump_R`, on a grid that must hold
/// the run up to `t_max`.
pub fn init_state(params: &ModelParams, grid: &SpatialGrid, t_max: f64) -> Result<FieldState> {
    let required = params.radius + t_max + SIZING_MARGIN * params.mass;
    let slack = 1e-9 * required;
    if grid.s_min > -required + slack || grid.s_max < required - slack {
        return Err(LabError::GridTooSmall {
            s_min: grid.s_min,
            s_max: grid.s_max,
            t_max,
            required,
        });
    }
    let radius = params.radius;
    Ok(FieldState::from_profiles(
        grid,
        params.epsilon,
        |_| 0.0,
        |s| bump_profile(radius, s),
    ))
}

/// Outcome of a completed run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    BlewUp,
    ReachedTmax,
    BoundaryContact,
}

impl RunStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunStatus::BlewUp => "blew_up",
            RunStatus::ReachedTmax => "reached_tmax",
            RunStatus::BoundaryContact => "boundary_contact",
        }
    }
}

/// One lifespan measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifespanRecord {
    pub epsilon: f64,
    pub p: f64,
    #[serde(rename = "M")]
    pub mass: f64,
    #[serde(rename = "R")]
    pub radius: f64,
    pub ds: f64,
    pub dt: f64,
    pub threshold: f64,
    /// Threshold crossing time when blown up, otherwise the time reached.
    #[serde(rename = "T_num")]
    pub t_num: f64,
    pub status: RunStatus,
}

/// Result of a single step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepStatus {
    Ok,
    NonFinite,
    BoundaryContact,
}

#[derive(Debug, Clone, Copy)]
enum Power {
    Square,
    ThreeHalves,
    General(f64),
}

impl Power {
    fn new(p: f64) -> Self {
        if p == 2.0 {
            Power::Square
        } else if p == 1.5 {
            Power::ThreeHalves
        } else {
            Power::General(p)
        }
    }

    #[inline]
    fn apply(self, x: f64) -> f64 {
        let a = x.abs();
        match self {
            Power::Square => a * a,
            Power::ThreeHalves => a * a.sqrt(),
            Power::General(p) => a.powf(p),
        }
    }
}

/// `|x|^p`, with the two common exponents special-cased.
pub fn abs_pow(x: f64, p: f64) -> f64 {
    Power::new(p).apply(x)
}

/// External source term `S(t, s)` added to the right-hand side.
pub type Forcing = Box<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Relative size below which values near the boundary count as silence.
pub const BOUNDARY_FLOOR: f64 = 1e-10;

/// Time stepper. [`WaveSolver::state`] is always a complete level `t_n` with
/// the centred `v_t`; the solver also holds `v` at `t_{n+1}`.
pub struct WaveSolver<'g> {
    grid: &'g SpatialGrid,
    power: Power,
    dt: f64,
    steps: usize,
    state: FieldState,
    ahead: Vec<f64>,
    ahead_lo: usize,
    ahead_hi: usize,
    scratch: Vec<f64>,
    forcing: Option<Forcing>,
    boundary_scale: f64,
}

impl<'g> WaveSolver<'g> {
    pub fn new(grid: &'g SpatialGrid, p: f64, dt: f64, state: FieldState) -> Result<Self> {
        Self::with_forcing(grid, p, dt, state, None)
    }

    pub fn with_forcing(
        grid: &'g SpatialGrid,
        p: f64,
        dt: f64,
        state: FieldState,
        forcing: Option<Forcing>,
    ) -> Result<Self> {
        if !(dt > 0.0 && dt <= grid.ds) {
            return Err(LabError::InvalidParameter(format!(
                "dt = {dt} violates the CFL limit ds = {}",
                grid.ds
            )));
        }
        if state.v.len() != grid.n || state.vt.len() != grid.n {
            return Err(LabError::InvalidParameter(
                "state does not match the grid".into(),
            ));
        }
        let power = Power::new(p);
        let n = grid.n;
        let (mut lo, mut hi) = (state.lo, state.hi);
        if forcing.is_some() {
            lo = 1;
            hi = n - 2;
        }
        let ahead_lo = lo.saturating_sub(1).max(1);
        let ahead_hi = (hi + 1).min(n - 2);

        // Taylor start: v^1 = v^0 + dt v_t + dt^2/2 v_tt, v_tt from the equation.
        let inv_ds2 = 1.0 / (grid.ds * grid.ds);
        let mut ahead = vec![0.0; n];
        for i in ahead_lo..=ahead_hi {
            let v = &state.v;
            let lap = (v[i + 1] - 2.0 * v[i] + v[i - 1]) * inv_ds2;
            let mut vtt = lap - grid.w_of_s[i] * v[i] + grid.h_of_s[i] * power.apply(state.vt[i]);
            if let Some(src) = &forcing {
                vtt += src(state.t, grid.s(i));
            }
            ahead[i] = v[i] + dt * state.vt[i] + 0.5 * dt * dt * vtt;
        }

        let boundary_scale = state.max_abs_vt.max(state.max_abs_v());
        Ok(Self {
            grid,
            power,
            dt,
            steps: 0,
            state: FieldState {
                lo: ahead_lo.min(state.lo),
                hi: ahead_hi.max(state.hi),
                ..state
            },
            ahead,
            ahead_lo,
            ahead_hi,
            scratch: vec![0.0; n],
            forcing,
            boundary_scale,
        })
    }

    pub fn state(&self) -> &FieldState {
        &self.state
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Advances one level.
    pub fn step(&mut self) -> StepStatus {
        let grid = self.grid;
        let n = grid.n;
        let dt = self.dt;
        let dt2 = dt * dt;
        let inv_2dt = 0.5 / dt;
        let inv_dt = 1.0 / dt;
        let inv_ds2 = 1.0 / (grid.ds * grid.ds);
        let power = self.power;
        let t_mid = self.state.t + dt;

        let lo = self.ahead_lo.saturating_sub(1).max(1);
        let hi = (self.ahead_hi + 1).min(n - 2);

        let prev = &self.state.v;
        let cur = &self.ahead;
        let next = &mut self.scratch;
        let vt = &mut self.state.vt;
        let mut max_vt = 0.0_f64;
        let mut finite = true;

        for i in lo..=hi {
            let c = cur[i];
            let lap = (cur[i + 1] - 2.0 * c + cur[i - 1]) * inv_ds2;
            let mut lin = lap - grid.w_of_s[i] * c;
            if let Some(src) = &self.forcing {
                lin += src(t_mid, grid.s(i));
            }
            let h = grid.h_of_s[i];
            let base = 2.0 * c - prev[i];
            let predicted_vt = (c - prev[i]) * inv_dt;
            let predicted = base + dt2 * (lin + h * power.apply(predicted_vt));
            let corrected_vt = (predicted - prev[i]) * inv_2dt;
            let new = base + dt2 * (lin + h * power.apply(corrected_vt));
            let centred = (new - prev[i]) * inv_2dt;
            next[i] = new;
            vt[i] = centred;
            finite &= new.is_finite() && centred.is_finite();
            max_vt = max_vt.max(centred.abs());
        }

        // rotate: level n+1 becomes current, v^{n+2} becomes ahead
        std::mem::swap(&mut self.state.v, &mut self.ahead);
        std::mem::swap(&mut self.ahead, &mut self.scratch);
        self.steps += 1;
        self.state.t = self.steps as f64 * dt;
        self.state.max_abs_vt = max_vt;
        self.state.lo = lo;
        self.state.hi = hi;
        self.ahead_lo = lo;
        self.ahead_hi = hi;

        if !finite {
            return StepStatus::NonFinite;
        }
        if self.touches_boundary() {
            return StepStatus::BoundaryContact;
        }
        StepStatus::Ok
    }

    fn touches_boundary(&self) -> bool {
        let n = self.grid.n;
        if self.forcing.is_some() || (self.ahead_lo > 2 && self.ahead_hi < n - 3) {
            return false;
        }
        let floor = BOUNDARY_FLOOR * self.boundary_scale.max(f64::MIN_POSITIVE);
        let loud = |i: usize| {
            self.ahead[i].abs() > floor
                || self.state.v[i].abs() > floor
                || self.state.vt[i].abs() > floor
        };
        (0..3).any(loud) || (n - 3..n).any(loud)
    }
}

/// Numerical settings of a single run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    /// Absolute blow-up threshold on `max |v_t|`.
    pub threshold: f64,
    pub t_max: f64,
    pub dt: f64,
    /// Spacing of regular monitor samples.
    pub sample_interval: f64,
}

/// Relative threshold used when none is given: `10^6 * max |v_t(0)|`.
pub const DEFAULT_THRESHOLD_FACTOR: f64 = 1e6;

/// `factor * max |v_t(0)|`, or `factor` for zero data.
pub fn threshold_for(state: &FieldState, factor: f64) -> f64 {
    if state.max_abs_vt > 0.0 {
        factor * state.max_abs_vt
    } else {
        factor
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub record: LifespanRecord,
    pub samples: Vec<MonitorSample>,
    pub final_state: FieldState,
}

/// Steps from the default data until blow-up, `t_max` or boundary contact.
/// `observer` sees every completed level.
pub fn run_until<O>(
    params: &ModelParams,
    grid: &SpatialGrid,
    table: &TestFunctionTable,
    config: &RunConfig,
    observer: O,
) -> Result<RunOutput>
where
    O: FnMut(&FieldState),
{
    let state = init_state(params, grid, config.t_max)?;
    run_from(params, grid, table, state, config, observer)
}

/// As [`run_until`] from an arbitrary initial state.
pub fn run_from<O>(
    params: &ModelParams,
    grid: &SpatialGrid,
    table: &TestFunctionTable,
    state: FieldState,
    config: &RunConfig,
    mut observer: O,
) -> Result<RunOutput>
where
    O: FnMut(&FieldState),
{
    positive("t_max", config.t_max)?;
    if !(config.threshold > state.max_abs_vt) {
        return Err(LabError::InvalidParameter(format!(
            "threshold {} must exceed the initial max |v_t| = {}",
            config.threshold, state.max_abs_vt
        )));
    }
    let mut monitor = Monitor::new(
        grid,
        table,
        params,
        &state,
        config.sample_interval,
        config.threshold,
    );
    let mut solver = WaveSolver::new(grid, params.p, config.dt, state)?;
    monitor.observe(solver.state(), config.dt);
    observer(solver.state());

    let end = config.t_max - 0.5 * config.dt;
    let status = loop {
        let st = solver.state();
        if st.max_abs_vt >= config.threshold {
            break RunStatus::BlewUp;
        }
        if st.t >= end {
            break RunStatus::ReachedTmax;
        }
        match solver.step() {
            StepStatus::Ok => {}
            StepStatus::NonFinite => break RunStatus::BlewUp,
            StepStatus::BoundaryContact => break RunStatus::BoundaryContact,
        }
        monitor.observe(solver.state(), config.dt);
        observer(solver.state());
    };

    let final_state = solver.state().clone();
    let samples = monitor.finish(&final_state);
    Ok(RunOutput {
        record: LifespanRecord {
            epsilon: params.epsilon,
            p: params.p,
            mass: params.mass,
            radius: params.radius,
            ds: grid.ds,
            dt: config.dt,
            threshold: config.threshold,
            t_num: final_state.t,
            status,
        },
        samples,
        final_state,
    })
}

/// `u = v / r` at every node.
pub fn physical_field_u(state: &FieldState, grid: &SpatialGrid) -> Vec<f64> {
    state
        .v
        .iter()
        .zip(&grid.r_of_s)
        .map(|(v, r)| v / r)
        .collect()
}
