use blowup_lab::functionals::{
    check_inequalities, data_functional, linear_moment, DEFAULT_TOLERANCE,
};
use blowup_lab::pde_solver::{
    cfl_dt, init_state, run_from, sized_grid, threshold_for, RunConfig, RunOutput,
};
use blowup_lab::test_function::solve_phi;
use blowup_lab::{FieldState, ModelParams, RunStatus, SpatialGrid};

/// `int phi bump ds` over [-1, 1] for M = 1, phi ~ e^(s/2) at the horizon;
/// adaptive ODE solve plus adaptive quadrature at 1e-13.
const PHI_BUMP_MOMENT: f64 = 0.861_267_751_711_515_3;

fn run(params: &ModelParams, grid: &SpatialGrid, t_max: f64) -> RunOutput {
    let table = solve_phi(grid, params.growth_rate()).unwrap();
    let state = init_state(params, grid, t_max).unwrap();
    let config = RunConfig {
        threshold: threshold_for(&state, 1e6),
        t_max,
        dt: cfl_dt(grid, 0.9).unwrap(),
        sample_interval: 0.1,
    };
    run_from(params, grid, &table, state, &config, |_| {}).unwrap()
}

#[test]
fn initial_moment_matches_quadrature_oracle() {
    let params = ModelParams::new(1.0, 2.0, 0.3, 1.0).unwrap();
    let mut errors = Vec::new();
    for &ds in &[0.05, 0.025] {
        let grid = sized_grid(&params, 10.0, ds).unwrap();
        let table = solve_phi(&grid, 0.5).unwrap();
        let state = init_state(&params, &grid, 10.0).unwrap();
        let l = linear_moment(&state, &table, 1.0);
        let n_eps = data_functional(&state, &table, 1.0);
        assert!((l - 2.0 * n_eps).abs() <= 1e-14 * l);
        errors.push((l / (0.3 * PHI_BUMP_MOMENT) - 1.0).abs());
    }
    assert!(errors[0] < 1e-6, "{errors:?}");
    assert!(errors[1] < errors[0] / 3.0, "{errors:?}");
}

#[test]
fn zero_state_has_zero_moments() {
    let params = ModelParams::new(1.0, 2.0, 0.3, 1.0).unwrap();
    let grid = sized_grid(&params, 10.0, 0.05).unwrap();
    let table = solve_phi(&grid, 0.5).unwrap();
    let zero = FieldState::zero(&grid);
    assert_eq!(linear_moment(&zero, &table, 1.0), 0.0);
    assert_eq!(data_functional(&zero, &table, 1.0), 0.0);
}

#[test]
fn monitor_algebra_holds_on_a_nonlinear_run() {
    let params = ModelParams::new(1.0, 2.0, 0.5, 1.0).unwrap();
    let grid = sized_grid(&params, 60.0, 0.05).unwrap();
    let out = run(&params, &grid, 60.0);
    let n_eps = out.samples[0].f;
    assert!((out.samples[0].g - n_eps).abs() <= 1e-14 * n_eps);
    for s in &out.samples {
        assert!(
            (s.g + s.f - s.l).abs() <= 1e-12 * s.l.abs().max(1.0),
            "t = {}",
            s.t
        );
        assert!((s.f - (0.5 * s.j + n_eps)).abs() <= 1e-12 * s.f);
    }
    let report = check_inequalities(&out.samples, 1.0, DEFAULT_TOLERANCE, None);
    assert!(report.passed, "{report:?}");
    assert!(report.c_emp.unwrap() > 0.0);
}

#[test]
fn linear_run_keeps_g_nonnegative() {
    let params = ModelParams::new(1.0, 2.0, 0.5, 1.0).unwrap();
    let grid = sized_grid(&params, 60.0, 0.05)
        .unwrap()
        .without_nonlinearity();
    let out = run(&params, &grid, 60.0);
    assert_eq!(out.record.status, RunStatus::ReachedTmax);
    assert!(out.samples.iter().all(|s| s.j == 0.0));
    let report = check_inequalities(&out.samples, 1.0, DEFAULT_TOLERANCE, None);
    for name in [
        "G_nonnegative",
        "exp_t_over_M_G_nondecreasing",
        "F_le_L",
        "F_nondecreasing",
    ] {
        assert!(report.check(name).unwrap().passed, "{name}: {report:?}");
    }
}

#[test]
fn zero_data_passes_trivially() {
    let params = ModelParams::new(1.0, 2.0, 0.5, 1.0).unwrap();
    let grid = sized_grid(&params, 10.0, 0.05).unwrap();
    let table = solve_phi(&grid, 0.5).unwrap();
    let state = FieldState::zero(&grid);
    let config = RunConfig {
        threshold: threshold_for(&state, 1e6),
        t_max: 10.0,
        dt: 0.045,
        sample_interval: 0.5,
    };
    let out = run_from(&params, &grid, &table, state, &config, |_| {}).unwrap();
    assert!(out
        .samples
        .iter()
        .all(|s| s.l == 0.0 && s.j == 0.0 && s.f == 0.0));
    let report = check_inequalities(&out.samples, 1.0, DEFAULT_TOLERANCE, None);
    assert!(report.passed);
    assert_eq!(report.c_emp, None);
}

#[test]
fn time_integral_converges_under_refinement() {
    let params = ModelParams::new(1.0, 2.0, 1.0, 1.0).unwrap();
    let j_at = |ds: f64| {
        // 9 is a whole number of steps at every resolution
        let grid = sized_grid(&params, 9.0, ds).unwrap();
        let out = run(&params, &grid, 9.0);
        assert!((out.final_state.t - 9.0).abs() < 1e-9);
        out.samples.last().unwrap().j
    };
    let (a, b, c) = (j_at(0.05), j_at(0.025), j_at(0.0125));
    let ratio = (a - b).abs() / (b - c).abs();
    assert!(ratio > 3.0 && ratio < 5.0, "{a} {b} {c}");
}
