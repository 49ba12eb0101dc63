mod common;

use blowup_lab::pde_solver::{
    cfl_dt, init_state, run_from, sized_grid, threshold_for, RunConfig, StepStatus,
};
use blowup_lab::test_function::solve_phi;
use blowup_lab::{FieldState, ModelParams, RunStatus, SpatialGrid, WaveSolver};
use common::{advance_to, dalembert_error, manufactured_error, orders};

#[test]
fn dalembert_splitting_converges_at_second_order() {
    let errors: Vec<f64> = [0.1, 0.05, 0.025, 0.0125]
        .iter()
        .map(|&ds| dalembert_error(ds))
        .collect();
    for q in orders(&errors) {
        assert!((1.8..=2.2).contains(&q), "errors {errors:?}");
    }
}

#[test]
fn manufactured_solution_converges_at_second_order() {
    let errors: Vec<f64> = [0.1, 0.05, 0.025, 0.0125]
        .iter()
        .map(|&ds| manufactured_error(ds))
        .collect();
    for q in orders(&errors) {
        assert!((1.8..=2.2).contains(&q), "errors {errors:?}");
    }
}

fn discrete_energy(state: &FieldState, grid: &SpatialGrid) -> f64 {
    let ds = grid.ds;
    let mut e = 0.0;
    for i in 0..grid.n - 1 {
        let vs = (state.v[i + 1] - state.v[i]) / ds;
        e += state.vt[i].powi(2) + vs * vs + grid.w_of_s[i] * state.v[i].powi(2);
    }
    e * ds
}

fn energy_drift(ds: f64) -> f64 {
    let params = ModelParams::new(1.0, 2.0, 1.0, 1.0).unwrap();
    let grid = sized_grid(&params, 100.0, ds)
        .unwrap()
        .without_nonlinearity();
    let state = init_state(&params, &grid, 100.0).unwrap();
    let e0 = discrete_energy(&state, &grid);
    let mut solver = WaveSolver::new(&grid, 2.0, cfl_dt(&grid, 0.9).unwrap(), state).unwrap();
    let mut worst: f64 = 0.0;
    while solver.state().t < 100.0 {
        assert_eq!(solver.step(), StepStatus::Ok);
        if solver.steps() % 20 == 0 {
            worst = worst.max(discrete_energy(solver.state(), &grid) / e0 - 1.0);
        }
    }
    worst
}

#[test]
fn linear_energy_does_not_grow() {
    let coarse = energy_drift(0.025);
    let fine = energy_drift(0.0125);
    assert!(coarse < 1e-3, "relative growth {coarse:e}");
    // drift is a discretisation effect
    assert!(fine < coarse / 3.0, "{coarse:e} -> {fine:e}");
}

fn linear_run(t_max: f64) -> (RunStatus, f64) {
    let params = ModelParams::new(1.0, 2.0, 1.0, 1.0).unwrap();
    let grid = sized_grid(&params, t_max, 0.05)
        .unwrap()
        .without_nonlinearity();
    let table = solve_phi(&grid, params.growth_rate()).unwrap();
    let state = init_state(&params, &grid, t_max).unwrap();
    let config = RunConfig {
        threshold: threshold_for(&state, 1e6),
        t_max,
        dt: cfl_dt(&grid, 0.9).unwrap(),
        sample_interval: 1.0,
    };
    let out = run_from(&params, &grid, &table, state, &config, |_| {}).unwrap();
    let near = (0..grid.n)
        .filter(|&i| grid.s(i).abs() <= 10.0)
        .map(|i| out.final_state.vt[i].abs().max(out.final_state.v[i].abs()))
        .fold(0.0, f64::max);
    (out.record.status, near)
}

#[test]
fn linear_problem_decays_locally() {
    let (status, near) = linear_run(200.0);
    assert_eq!(status, RunStatus::ReachedTmax);
    assert!(near < 1e-2, "local amplitude {near:e}");
}

fn lifespan(p: f64, eps: f64) -> (RunStatus, f64) {
    let params = ModelParams::new(1.0, p, eps, 1.0).unwrap();
    let t_max = 100.0;
    let grid = sized_grid(&params, t_max, 0.05).unwrap();
    let table = solve_phi(&grid, params.growth_rate()).unwrap();
    let state = init_state(&params, &grid, t_max).unwrap();
    let config = RunConfig {
        threshold: threshold_for(&state, 1e6),
        t_max,
        dt: cfl_dt(&grid, 0.9).unwrap(),
        sample_interval: 0.1,
    };
    let out = run_from(&params, &grid, &table, state, &config, |_| {}).unwrap();
    (out.record.status, out.record.t_num)
}

#[test]
fn large_data_blows_up_sooner_when_doubled() {
    let (s5, t5) = lifespan(2.0, 5.0);
    let (s10, t10) = lifespan(2.0, 10.0);
    assert_eq!(s5, RunStatus::BlewUp);
    assert_eq!(s10, RunStatus::BlewUp);
    assert!(t5 > 0.0 && t10 < t5, "T(5) = {t5}, T(10) = {t10}");
}

#[test]
fn zero_data_never_blows_up() {
    let params = ModelParams::new(1.0, 2.0, 0.5, 1.0).unwrap();
    let grid = sized_grid(&params, 20.0, 0.05).unwrap();
    let mut solver = WaveSolver::new(&grid, 2.0, 0.045, FieldState::zero(&grid)).unwrap();
    advance_to(&mut solver, 20.0);
    assert_eq!(solver.state().max_abs_vt, 0.0);
}

#[test]
fn lifespan_is_stable_under_refinement() {
    let run = |ds: f64| {
        let params = ModelParams::new(1.0, 1.5, 0.25, 1.0).unwrap();
        let grid = sized_grid(&params, 100.0, ds).unwrap();
        let table = solve_phi(&grid, params.growth_rate()).unwrap();
        let state = init_state(&params, &grid, 100.0).unwrap();
        let config = RunConfig {
            threshold: threshold_for(&state, 1e6),
            t_max: 100.0,
            dt: cfl_dt(&grid, 0.9).unwrap(),
            sample_interval: 0.1,
        };
        run_from(&params, &grid, &table, state, &config, |_| {})
            .unwrap()
            .record
            .t_num
    };
    let (a, b, c) = (run(0.05), run(0.025), run(0.0125));
    assert!(
        (a - b).abs() / b < 0.05 && (b - c).abs() / c < 0.05,
        "{a} {b} {c}"
    );
}
