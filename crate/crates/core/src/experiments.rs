//! Amplitude sweeps, scaling fits and report files.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::coordinates::ModelParams;
use crate::error::{LabError, Result};
use crate::functionals::{check_inequalities, InequalityReport, MonitorSample, DEFAULT_TOLERANCE};
use crate::pde_solver::{
    cfl_dt, init_state, run_from, sized_grid, threshold_for, LifespanRecord, RunConfig, RunStatus,
    DEFAULT_THRESHOLD_FACTOR,
};
use crate::riccati::{comparison_check, target_slope, ComparisonReport, RiccatiParams};
use crate::test_function::solve_phi;

/// Lower threshold factor whose crossing time is recorded alongside the
/// blow-up time, to measure how much `T_num` depends on the threshold.
pub const EARLY_THRESHOLD_FACTOR: f64 = 1e3;

/// Default cap on the number of time steps a single run may take before the
/// sweep warns about it.
pub const DEFAULT_STEP_BUDGET: f64 = 1e7;

/// Monitor spacing used by sweeps.
pub const SAMPLE_INTERVAL: f64 = 0.1;

/// Multiplier applied to the previous lifespan to size the next run.
pub const FORECAST_FACTOR: f64 = 4.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub mass: f64,
    pub p: f64,
    pub radius: f64,
    /// Strictly decreasing amplitudes.
    pub epsilons: Vec<f64>,
    pub ds: f64,
    pub cfl: f64,
    /// Blow-up threshold relative to `max |v_t(0)|`.
    pub threshold: f64,
    /// Horizon of the first run; later runs are sized from the previous
    /// lifespan.
    pub t_max: f64,
    pub out_dir: PathBuf,
    pub step_budget: f64,
    pub tol: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            mass: 1.0,
            p: 2.0,
            radius: 1.0,
            epsilons: Vec::new(),
            ds: 0.05,
            cfl: 0.9,
            threshold: DEFAULT_THRESHOLD_FACTOR,
            t_max: 100.0,
            out_dir: PathBuf::from("out"),
            step_budget: DEFAULT_STEP_BUDGET,
            tol: DEFAULT_TOLERANCE,
        }
    }
}

fn parse_number(key: &str, value: &str) -> Result<f64> {
    value
        .trim()
        .parse::<f64>()
        .map_err(|e| LabError::Config(format!("{key} = {value:?}: {e}")))
}

impl SweepConfig {
    /// Parses `key = value` lines; `#` starts a comment. Recognised keys:
    /// mass, p, radius, epsilons (comma separated), ds, cfl, threshold,
    /// tmax, outdir.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                LabError::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            let key = key.trim();
            cfg.set(key, value.trim())?;
            if seen.insert(key.to_string(), ()).is_some() {
                return Err(LabError::Config(format!("duplicate key {key}")));
            }
        }
        for required in ["mass", "p", "radius", "epsilons"] {
            if !seen.contains_key(required) {
                return Err(LabError::Config(format!("missing key {required}")));
            }
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    /// Sets one key, as from the config file or a command-line override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "mass" => self.mass = parse_number(key, value)?,
            "p" => self.p = parse_number(key, value)?,
            "radius" => self.radius = parse_number(key, value)?,
            "epsilons" => {
                self.epsilons = value
                    .split(',')
                    .filter(|v| !v.trim().is_empty())
                    .map(|v| parse_number(key, v))
                    .collect::<Result<_>>()?
            }
            "ds" => self.ds = parse_number(key, value)?,
            "cfl" => self.cfl = parse_number(key, value)?,
            "threshold" => self.threshold = parse_number(key, value)?,
            "tmax" => self.t_max = parse_number(key, value)?,
            "outdir" => self.out_dir = PathBuf::from(value),
            other => return Err(LabError::Config(format!("unknown key {other}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        ModelParams::new(self.mass, self.p, 1.0, self.radius)?;
        if self.epsilons.is_empty() {
            return Err(LabError::Config("epsilons is empty".into()));
        }
        if self.epsilons.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(LabError::Config("epsilons must be positive".into()));
        }
        for w in self.epsilons.windows(2) {
            if w[0] == w[1] {
                return Err(LabError::Config(format!("duplicate epsilon {}", w[0])));
            }
            if w[1] > w[0] {
                return Err(LabError::Config("epsilons must be decreasing".into()));
            }
        }
        let mut seen = self.epsilons.clone();
        seen.sort_by(f64::total_cmp);
        seen.dedup();
        if seen.len() != self.epsilons.len() {
            return Err(LabError::Config("duplicate epsilon".into()));
        }
        if !(self.ds > 0.0) || !(self.t_max > 0.0) || !(self.threshold > 1.0) {
            return Err(LabError::Config(
                "ds and tmax must be positive, threshold above 1".into(),
            ));
        }
        if !(self.cfl > 0.0 && self.cfl < 1.0) {
            return Err(LabError::Config("cfl must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Everything a single run of a sweep produced.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub record: LifespanRecord,
    pub t_max: f64,
    pub n_eps: f64,
    pub inequalities: InequalityReport,
    pub comparison: Option<ComparisonReport>,
    /// First time `max |v_t|` reached `EARLY_THRESHOLD_FACTOR` times its
    /// initial value.
    pub early_crossing: Option<f64>,
    #[serde(skip)]
    pub samples: Vec<MonitorSample>,
}

impl RunSummary {
    pub fn passed(&self) -> bool {
        self.inequalities.passed && self.comparison.as_ref().is_none_or(|c| c.passed)
    }

    /// `(T_num - T_early) / T_num` for blown-up runs.
    pub fn threshold_shift(&self) -> Option<f64> {
        if self.record.status != RunStatus::BlewUp {
            return None;
        }
        let t = self.record.t_num;
        self.early_crossing.map(|e| (t - e) / t)
    }
}

/// Runs one amplitude and verifies its monitor series.
pub fn run_single(
    params: &ModelParams,
    ds: f64,
    cfl: f64,
    threshold_factor: f64,
    t_max: f64,
    tol: f64,
) -> Result<RunSummary> {
    let grid = sized_grid(params, t_max, ds)?;
    let table = solve_phi(&grid, params.growth_rate())?;
    let dt = cfl_dt(&grid, cfl)?;
    let state = init_state(params, &grid, t_max)?;
    let config = RunConfig {
        threshold: threshold_for(&state, threshold_factor),
        t_max,
        dt,
        sample_interval: SAMPLE_INTERVAL,
    };
    let early = threshold_for(&state, EARLY_THRESHOLD_FACTOR.min(0.5 * threshold_factor));
    let mut early_crossing = None;
    let out = run_from(params, &grid, &table, state, &config, |st| {
        if early_crossing.is_none() && st.max_abs_vt >= early {
            early_crossing = Some(st.t);
        }
    })?;
    let mut summary = summarize(params, out.record, out.samples, t_max, tol)?;
    summary.early_crossing = early_crossing;
    Ok(summary)
}

/// Verification of a finished run.
pub fn summarize(
    params: &ModelParams,
    record: LifespanRecord,
    samples: Vec<MonitorSample>,
    t_max: f64,
    tol: f64,
) -> Result<RunSummary> {
    let blowup = (record.status == RunStatus::BlewUp).then_some(record.t_num);
    let inequalities = check_inequalities(&samples, params.mass, tol, blowup);
    let n_eps = samples.first().map_or(0.0, |s| s.f);
    let comparison = match inequalities.c_emp {
        Some(c) if c > 0.0 && n_eps > 0.0 => {
            let rp = RiccatiParams::new(
                params.p,
                n_eps / params.epsilon,
                params.epsilon,
                c,
                params.radius,
            )?;
            Some(comparison_check(&samples, &rp, &record))
        }
        _ => None,
    };
    Ok(RunSummary {
        record,
        t_max,
        n_eps,
        inequalities,
        comparison,
        early_crossing: None,
        samples,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepOutcome {
    pub runs: Vec<RunSummary>,
    /// Lifespans of blown-up runs strictly increase as epsilon decreases.
    pub monotone: bool,
    pub warnings: Vec<String>,
}

impl SweepOutcome {
    pub fn records(&self) -> Vec<LifespanRecord> {
        self.runs.iter().map(|r| r.record.clone()).collect()
    }

    pub fn all_blew_up(&self) -> bool {
        self.runs
            .iter()
            .all(|r| r.record.status == RunStatus::BlewUp)
    }

    pub fn verified(&self) -> bool {
        self.monotone && self.runs.iter().all(RunSummary::passed)
    }
}

/// One run per amplitude, in the configured order. Each run's horizon is
/// forecast from the previous lifespan, so runs of one sweep execute in
/// sequence; use [`sweep_many`] to run independent sweeps concurrently.
pub fn sweep(config: &SweepConfig) -> Result<SweepOutcome> {
    config.validate()?;
    let mut runs = Vec::with_capacity(config.epsilons.len());
    let mut warnings = Vec::new();
    let mut forecast = config.t_max;
    for &eps in &config.epsilons {
        let params = ModelParams::new(config.mass, config.p, eps, config.radius)?;
        let steps = forecast / (config.cfl * config.ds);
        if steps > config.step_budget {
            warnings.push(format!(
                "epsilon = {eps}: horizon {forecast:.1} needs ~{steps:.2e} steps, over the budget {:.1e}",
                config.step_budget
            ));
        }
        let run = run_single(
            &params,
            config.ds,
            config.cfl,
            config.threshold,
            forecast,
            config.tol,
        )?;
        if run.record.status == RunStatus::BoundaryContact {
            return Err(LabError::BoundaryContact {
                epsilon: eps,
                t: run.record.t_num,
            });
        }
        if run.record.status != RunStatus::BlewUp {
            warnings.push(format!(
                "epsilon = {eps}: no blow-up before t = {:.1}; excluded from fits",
                run.record.t_num
            ));
        }
        forecast = config.t_max.max(FORECAST_FACTOR * run.record.t_num);
        runs.push(run);
    }
    let blown: Vec<f64> = runs
        .iter()
        .filter(|r| r.record.status == RunStatus::BlewUp)
        .map(|r| r.record.t_num)
        .collect();
    let monotone = blown.windows(2).all(|w| w[1] > w[0]);
    if !monotone {
        warnings.push("lifespans do not increase as epsilon decreases; refine ds".into());
    }
    Ok(SweepOutcome {
        runs,
        monotone,
        warnings,
    })
}

/// Independent sweeps on a worker pool; results keep the input order.
pub fn sweep_many(configs: &[SweepConfig]) -> Vec<Result<SweepOutcome>> {
    configs.par_iter().map(sweep).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    /// `ln T = intercept + slope ln eps`
    PowerLaw,
    /// `ln T = intercept + slope / eps`
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitResult {
    pub model: FitModel,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

impl FitResult {
    /// Fitted lifespan at `eps`.
    pub fn predict(&self, eps: f64) -> f64 {
        let x = match self.model {
            FitModel::PowerLaw => eps.ln(),
            FitModel::Exponential => 1.0 / eps,
        };
        (self.intercept + self.slope * x).exp()
    }
}

fn least_squares(model: FitModel, points: &[(f64, f64)]) -> Result<FitResult> {
    let n = points.len();
    if n < 3 {
        return Err(LabError::InsufficientPoints(n));
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(LabError::InsufficientPoints(1));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let ss_res: f64 = points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    Ok(FitResult {
        model,
        slope,
        intercept,
        r_squared,
        n_points: n,
    })
}

fn blown_up(records: &[LifespanRecord]) -> impl Iterator<Item = &LifespanRecord> {
    records.iter().filter(|r| r.status == RunStatus::BlewUp)
}

/// Least squares on `(ln eps, ln T)`.
pub fn fit_power_law(records: &[LifespanRecord]) -> Result<FitResult> {
    if let Some(r) = records.iter().find(|r| r.p >= 2.0) {
        return Err(LabError::InvalidParameter(format!(
            "power-law fit needs p < 2, got {}",
            r.p
        )));
    }
    let pts: Vec<_> = blown_up(records)
        .map(|r| (r.epsilon.ln(), r.t_num.ln()))
        .collect();
    least_squares(FitModel::PowerLaw, &pts)
}

/// Least squares on `(1/eps, ln T)`.
pub fn fit_exponential(records: &[LifespanRecord]) -> Result<FitResult> {
    if let Some(r) = records.iter().find(|r| r.p != 2.0) {
        return Err(LabError::InvalidParameter(format!(
            "exponential fit needs p = 2, got {}",
            r.p
        )));
    }
    let pts: Vec<_> = blown_up(records)
        .map(|r| (1.0 / r.epsilon, r.t_num.ln()))
        .collect();
    least_squares(FitModel::Exponential, &pts)
}

/// Fit appropriate to the exponent of the records.
pub fn fit_records(records: &[LifespanRecord]) -> Result<FitResult> {
    match records.first() {
        Some(r) if r.p == 2.0 => fit_exponential(records),
        Some(_) => fit_power_law(records),
        None => Err(LabError::InsufficientPoints(0)),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct UpperBoundReport {
    pub slack: f64,
    /// `max T_num / fit(eps) - 1`.
    pub max_margin: f64,
    /// Amplitudes whose lifespan exceeds the fitted bound by more than the
    /// slack factor `1 + slack`.
    pub flagged: Vec<f64>,
    pub passed: bool,
}

/// Every blown-up record must satisfy `T_num <= fit(eps) (1 + slack)`.
pub fn upper_bound_check(
    records: &[LifespanRecord],
    fit: &FitResult,
    slack: f64,
) -> UpperBoundReport {
    let mut max_margin = f64::NEG_INFINITY;
    let mut flagged = Vec::new();
    for r in blown_up(records) {
        let ratio = r.t_num / fit.predict(r.epsilon);
        max_margin = max_margin.max(ratio - 1.0);
        if ratio > 1.0 + slack {
            flagged.push(r.epsilon);
        }
    }
    UpperBoundReport {
        slack,
        max_margin: if max_margin.is_finite() {
            max_margin
        } else {
            0.0
        },
        passed: flagged.is_empty(),
        flagged,
    }
}

/// Contents of `fit.json`.
#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub p: f64,
    pub fit: FitResult,
    /// `-(p-1)/(2-p)` for power laws; absent for `p = 2`, whose rate has
    /// no closed-form target.
    pub target_slope: Option<f64>,
    pub upper_bound: UpperBoundReport,
}

/// Upper-bound slack used by the command line tools.
pub const DEFAULT_SLACK: f64 = 1.5;

pub fn fit_report(records: &[LifespanRecord], slack: f64) -> Result<FitReport> {
    let fit = fit_records(records)?;
    let p = records[0].p;
    Ok(FitReport {
        p,
        target_slope: (fit.model == FitModel::PowerLaw).then(|| target_slope(p)),
        upper_bound: upper_bound_check(records, &fit, slack),
        fit,
    })
}

/// One [`fit_report`] per exponent present in `records`, in increasing `p`.
pub fn fit_reports_by_p(records: &[LifespanRecord], slack: f64) -> Result<Vec<FitReport>> {
    let mut groups: BTreeMap<u64, Vec<LifespanRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.p.to_bits()).or_default().push(r.clone());
    }
    groups.values().map(|g| fit_report(g, slack)).collect()
}

pub fn write_sweep_csv(path: &Path, records: &[LifespanRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sweep_csv(path: &Path) -> Result<Vec<LifespanRecord>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let records = rdr
        .deserialize()
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(records)
}

/// `monitor.csv`: t, L, J, G, F, Fprime, ratio_riccati, e_tM_G.
pub fn write_monitor_csv(path: &Path, samples: &[MonitorSample], mass: f64) -> Result<()> {
    let mut out = String::from("t,L,J,G,F,Fprime,ratio_riccati,e_tM_G\n");
    for s in samples {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            s.t,
            s.l,
            s.j,
            s.g,
            s.f,
            s.fprime,
            s.ratio_riccati,
            s.e_tm_g(mass)
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

fn write_two_column(
    path: &Path,
    header: &str,
    rows: impl Iterator<Item = (f64, f64)>,
) -> Result<()> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "{header}")?;
    for (x, y) in rows {
        writeln!(f, "{x},{y}")?;
    }
    Ok(())
}

/// Writes `sweep.csv`, `fit.json`, `plotdata_loglog.csv` and
/// `plotdata_exp.csv` into `out_dir`.
pub fn emit_outputs(records: &[LifespanRecord], fits: &[FitReport], out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    write_sweep_csv(&out_dir.join("sweep.csv"), records)?;
    let mut json = serde_json::to_string_pretty(fits)?;
    json.push('\n');
    fs::write(out_dir.join("fit.json"), json)?;
    write_two_column(
        &out_dir.join("plotdata_loglog.csv"),
        "log_epsilon,log_T_num",
        blown_up(records).map(|r| (r.epsilon.ln(), r.t_num.ln())),
    )?;
    write_two_column(
        &out_dir.join("plotdata_exp.csv"),
        "inv_epsilon,log_T_num",
        blown_up(records).map(|r| (1.0 / r.epsilon, r.t_num.ln())),
    )?;
    Ok(())
}
