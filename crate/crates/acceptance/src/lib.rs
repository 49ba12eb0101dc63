//! The acceptance criteria as functions returning an [`Outcome`]; the
//! `acceptance` test target runs them in order and prints the verdicts.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::time::{Duration, Instant};

use blowup_lab::coordinates::{radius_from_tortoise, tortoise_from_excess, GRID_TOLERANCE};
use blowup_lab::experiments::{
    fit_exponential, fit_power_law, run_single, sweep, upper_bound_check, RunSummary, SweepConfig,
    SweepOutcome, DEFAULT_SLACK,
};
use blowup_lab::functionals::{hoelder_scan, integral_bound_ratio, DEFAULT_TOLERANCE};
use blowup_lab::potentials::{nonlinear_weight_h, verify_h_asymptotics};
use blowup_lab::riccati::{h_blowup_time, target_slope, RiccatiParams};
use blowup_lab::test_function::solve_phi;
use blowup_lab::{ModelParams, SpatialGrid};
use common::{
    dalembert_error, manufactured_error, max_ode_residual, orders, random_riccati_params,
    riccati_blowup_by_quadrature,
};

pub struct Outcome {
    pub passed: bool,
    pub detail: String,
}

pub fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

pub struct Ledger {
    pub results: Vec<bool>,
}

impl Ledger {
    pub fn record(&mut self, id: usize, name: &str, budget: Duration, f: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let out = f();
        self.report(id, name, budget, start.elapsed(), out);
    }

    pub fn report(
        &mut self,
        id: usize,
        name: &str,
        budget: Duration,
        elapsed: Duration,
        out: Outcome,
    ) {
        let in_time = elapsed <= budget;
        let passed = out.passed && in_time;
        let timing = if in_time {
            format!("{:.1} s", elapsed.as_secs_f64())
        } else {
            format!(
                "{:.1} s, over the {} s budget",
                elapsed.as_secs_f64(),
                budget.as_secs()
            )
        };
        println!(
            "{} {id:>2} {name}: {} ({timing})",
            if passed { "PASS" } else { "FAIL" },
            out.detail
        );
        self.results.push(passed);
    }
}

pub fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

pub fn coordinate_round_trip() -> Outcome {
    let n = 1000;
    // log spacing of s + 51 over [1, 10051]
    let top = (1e4_f64 + 51.0).ln();
    let mut worst: f64 = 0.0;
    for &m in &[0.5, 1.0, 2.0] {
        for k in 0..n {
            let s = (top * k as f64 / (n - 1) as f64).exp() - 51.0;
            let pt = match radius_from_tortoise(m, s, GRID_TOLERANCE) {
                Ok(pt) => pt,
                Err(e) => return outcome(false, format!("M = {m}, s = {s}: {e}")),
            };
            let back = tortoise_from_excess(m, pt.excess).unwrap();
            worst = worst.max((back - s).abs() / s.abs().max(1.0));
        }
    }
    outcome(
        worst <= 1e-10,
        format!("max scaled error {worst:.2e} <= 1e-10"),
    )
}

pub fn weight_asymptotics() -> Outcome {
    let mut all_bounded = true;
    let mut widest: f64 = 0.0;
    for &m in &[0.5, 1.0, 2.0] {
        for &p in &[1.5, 1.75, 2.0] {
            match verify_h_asymptotics(m, p, -60.0 * m.max(1.0), 1e4, 400) {
                Ok(b) => {
                    all_bounded &= b.far.is_bounded() && b.near.is_bounded();
                    widest = widest.max(b.far.spread()).max(b.near.spread());
                }
                Err(_) => all_bounded = false,
            }
        }
    }
    let mut flat_variation: f64 = 0.0;
    for &m in &[0.5, 1.0, 2.0] {
        for &p in &[1.5, 1.75, 2.0] {
            let values: Vec<f64> = (0..=100)
                .map(|k| {
                    let s = 1e3 * 10f64.powf(k as f64 / 100.0);
                    nonlinear_weight_h(m, p, s).unwrap() * s.powf(p - 1.0)
                })
                .collect();
            let max = values.iter().cloned().fold(f64::MIN, f64::max);
            let min = values.iter().cloned().fold(f64::MAX, f64::min);
            flat_variation = flat_variation.max(max / min - 1.0);
        }
    }
    outcome(
        all_bounded && flat_variation < 0.1,
        format!(
            "ratios finite and positive: {all_bounded} (widest spread {widest:.1}); far-field variation {:.2}% < 10%",
            100.0 * flat_variation
        ),
    )
}

pub fn test_function() -> Outcome {
    let mut positive = true;
    for &m in &[0.5, 1.0, 2.0] {
        let params = ModelParams::new(m, 2.0, 1.0, 1.0).unwrap();
        let grid = blowup_lab::pde_solver::sized_grid(&params, 100.0, 0.05).unwrap();
        let table = solve_phi(&grid, params.growth_rate()).unwrap();
        positive &= (0..table.len()).all(|i| table.phi(i) > 0.0 && table.ln_phi[i].is_finite());
    }

    let flat = SpatialGrid::build_raw(1.0, 2.0, -40.0, 40.0, 8001)
        .unwrap()
        .with_flat_potential();
    let a = 0.5;
    let table = solve_phi(&flat, a).unwrap();
    let flat_dev = (0..table.len())
        .map(|i| {
            ((table.ln_phi[i] - table.ln_phi[0]) - a * (table.s(i) - flat.s_min))
                .exp_m1()
                .abs()
        })
        .fold(0.0, f64::max);

    let residual = |n: usize| {
        let g = SpatialGrid::build_raw(1.0, 2.0, -60.0, 60.0, n).unwrap();
        solve_phi(&g, 0.5).unwrap().max_relative_residual()
    };
    let order = (residual(4001) / residual(8001)).log2();
    outcome(
        positive && flat_dev <= 1e-8 && (1.8..=2.2).contains(&order),
        format!(
            "phi > 0: {positive}; flat control deviation {flat_dev:.1e}; residual order {order:.3}"
        ),
    )
}

pub fn solver_orders() -> Outcome {
    let steps = [0.1, 0.05, 0.025, 0.0125];
    let d: Vec<f64> = steps.iter().map(|&ds| dalembert_error(ds)).collect();
    let m: Vec<f64> = steps.iter().map(|&ds| manufactured_error(ds)).collect();
    let (qd, qm) = (orders(&d), orders(&m));
    let ok = qd.iter().chain(&qm).all(|q| (1.8..=2.2).contains(q));
    outcome(
        ok,
        format!("d'Alembert orders {qd:.3?}; manufactured orders {qm:.3?}"),
    )
}

/// Runs of the inequality-chain criterion at two resolutions.
pub struct ChainRuns {
    pub runs: Vec<(f64, f64, RunSummary, RunSummary)>,
}

pub fn chain_runs() -> ChainRuns {
    let mut runs = Vec::new();
    for &(p, t_max) in &[(1.5, 200.0), (2.0, 100.0)] {
        for &eps in &[0.5, 0.25] {
            let params = ModelParams::new(1.0, p, eps, 1.0).unwrap();
            let at = |ds: f64| run_single(&params, ds, 0.9, 1e6, t_max, DEFAULT_TOLERANCE).unwrap();
            runs.push((p, eps, at(0.05), at(0.025)));
        }
    }
    ChainRuns { runs }
}

pub fn inequality_chain(chain: &ChainRuns) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (p, eps, coarse, fine) in &chain.runs {
        let checks = coarse.inequalities.passed && fine.inequalities.passed;
        let (c0, c1) = (coarse.inequalities.c_emp, fine.inequalities.c_emp);
        let stable = match (c0, c1) {
            (Some(a), Some(b)) if a > 0.0 && b > 0.0 => (b / a - 1.0).abs() <= 0.2,
            _ => false,
        };
        ok &= checks && stable;
        parts.push(format!(
            "p = {p}, eps = {eps}: checks {}, C_emp {:.4} -> {:.4}",
            if checks { "ok" } else { "violated" },
            c0.unwrap_or(f64::NAN),
            c1.unwrap_or(f64::NAN)
        ));
    }
    outcome(ok, parts.join("; "))
}

pub fn comparison(chain: &ChainRuns) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (p, eps, coarse, fine) in &chain.runs {
        for run in [coarse, fine] {
            match &run.comparison {
                Some(c) => {
                    ok &= c.passed;
                    if run.record.ds == 0.05 {
                        parts.push(format!(
                            "p = {p}, eps = {eps}: T_num {:.1} vs T_H {:.3e}",
                            run.record.t_num, c.h_blowup_time
                        ));
                    }
                }
                None => {
                    ok = false;
                    parts.push(format!("p = {p}, eps = {eps}: no comparison"));
                }
            }
        }
    }
    outcome(ok, parts.join("; "))
}

pub fn sweep_config(p: f64, epsilons: &[f64], t_max: f64) -> SweepConfig {
    SweepConfig {
        p,
        epsilons: epsilons.to_vec(),
        t_max,
        ..SweepConfig::default()
    }
}

pub fn blowup_and_threshold(sweeps: &[(f64, SweepOutcome)]) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (p, outcome) in sweeps {
        let blew = outcome.all_blew_up();
        let worst = outcome
            .runs
            .iter()
            .map(|r| r.threshold_shift().unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max);
        ok &= blew && worst < 0.02;
        parts.push(format!(
            "p = {p}: all blew up {blew}, max shift {:.2}%",
            100.0 * worst
        ));
    }
    outcome(ok, format!("{} (bound 2%)", parts.join("; ")))
}

pub fn power_law_scaling(p15: &SweepOutcome, p175: &SweepOutcome) -> Outcome {
    let records = p15.records();
    let span = records.first().unwrap().epsilon / records.last().unwrap().epsilon;
    let fit = match fit_power_law(&records) {
        Ok(f) => f,
        Err(e) => return outcome(false, format!("p = 1.5 fit failed: {e}")),
    };
    let target = target_slope(1.5);
    let slope_ok = (fit.slope / target - 1.0).abs() <= 0.25;
    let bound = upper_bound_check(&records, &fit, DEFAULT_SLACK);
    let enough = records.len() >= 5 && span >= 8.0;

    let soft = fit_power_law(&p175.records());
    let soft_target = target_slope(1.75);
    let soft_ok = soft
        .as_ref()
        .is_ok_and(|f| (f.slope / soft_target - 1.0).abs() <= 0.35);
    outcome(
        enough && slope_ok && bound.passed && soft_ok,
        format!(
            "p = 1.5: {} runs over a {span:.0}x range, slope {:.3} (target {target}, +-25%), upper bound {}; p = 1.75: slope {} (target {soft_target}, +-35%)",
            records.len(),
            fit.slope,
            if bound.passed { "ok" } else { "violated" },
            soft.map_or_else(|e| e.to_string(), |f| format!("{:.3}", f.slope))
        ),
    )
}

pub fn exponential_scaling(p2: &SweepOutcome) -> Outcome {
    let records = p2.records();
    let fit = match fit_exponential(&records) {
        Ok(f) => f,
        Err(e) => return outcome(false, format!("fit failed: {e}")),
    };
    let bound = upper_bound_check(&records, &fit, DEFAULT_SLACK);
    outcome(
        records.len() >= 4 && fit.slope > 0.0 && fit.r_squared >= 0.9 && bound.passed,
        format!(
            "{} runs, slope {:.4} in 1/eps, r2 {:.4}, upper bound {}",
            records.len(),
            fit.slope,
            fit.r_squared,
            if bound.passed { "ok" } else { "violated" }
        ),
    )
}

pub fn riccati_forms() -> Outcome {
    let residual = [1.5, 2.0]
        .iter()
        .map(|&p| max_ode_residual(&RiccatiParams::new(p, 1.0, 0.1, 1.0, 1.0).unwrap(), 0.9))
        .fold(0.0, f64::max);
    let worst = random_riccati_params(20, 7)
        .iter()
        .map(|rp| {
            let closed = h_blowup_time(rp);
            (closed - riccati_blowup_by_quadrature(rp)).abs() / closed
        })
        .fold(0.0, f64::max);
    outcome(
        residual <= 1e-8 && worst <= 1e-3,
        format!("ODE residual {residual:.1e} <= 1e-8; blow-up time deviation {worst:.1e} <= 1e-3 over 20 draws"),
    )
}

pub fn integral_lemmas() -> Outcome {
    let times: Vec<f64> = (0..=200).map(|k| 0.5 * k as f64).collect();
    let mut bounded = true;
    let mut sup: f64 = 0.0;
    for &m in &[0.5, 1.0, 2.0] {
        for &alpha in &[0.0, 1.0, 2.0] {
            for &beta in &[0.5, 1.0 / (2.0 * m)] {
                let values: Vec<f64> = times
                    .iter()
                    .map(|&t| integral_bound_ratio(alpha, beta, 1.0, t).unwrap_or(f64::NAN))
                    .collect();
                let s = values.iter().cloned().fold(0.0, f64::max);
                bounded &= values.iter().all(|v| v.is_finite()) && s.is_finite();
                sup = sup.max(s);
            }
        }
    }

    let scan_times: Vec<f64> = (0..=10).map(|k| 20.0 * k as f64).collect();
    let mut parts = Vec::new();
    let mut holder_ok = true;
    for &p in &[1.5, 1.75, 2.0] {
        match hoelder_scan(1.0, p, 1.0, &scan_times) {
            Ok(s) => {
                holder_ok &= s.sup.is_finite() && !s.diverging;
                parts.push(format!("p = {p}: sup {:.3}", s.sup));
            }
            Err(_) => holder_ok = false,
        }
    }
    let growing = hoelder_scan(1.0, 1.4, 1.0, &scan_times)
        .map(|s| (s.diverging, s.late_growth))
        .unwrap_or((false, f64::NAN));
    outcome(
        bounded && holder_ok && growing.0,
        format!(
            "integral ratio sup {sup:.3}; {}; p = 1.4 grows {:.1e}x over the second half",
            parts.join(", "),
            growing.1
        ),
    )
}

/// Lifespan sweeps at p = 1.5, 1.75 and 2, with their wall-clock times.
pub struct ScalingSweeps {
    pub outcomes: Vec<(f64, SweepOutcome)>,
    pub slowest: Duration,
    pub total: Duration,
}

pub fn scaling_sweeps() -> ScalingSweeps {
    let mut outcomes = Vec::new();
    let mut slowest = Duration::ZERO;
    let mut total = Duration::ZERO;
    for (p, eps, t_max) in [
        (
            1.5,
            vec![0.125, 0.0625, 0.03125, 0.015625, 0.0078125],
            150.0,
        ),
        (1.75, vec![0.5, 0.35, 0.25, 0.18], 150.0),
        (2.0, vec![2.0, 1.5, 1.2, 1.0, 0.8], 60.0),
    ] {
        let start = Instant::now();
        let outcome = sweep(&sweep_config(p, &eps, t_max)).expect("sweep runs");
        let took = start.elapsed();
        for w in &outcome.warnings {
            println!("     p = {p}: {w}");
        }
        slowest = slowest.max(took);
        total += took;
        outcomes.push((p, outcome));
    }
    ScalingSweeps {
        outcomes,
        slowest,
        total,
    }
}
