#![allow(dead_code)]

use blowup_lab::pde_solver::{bump_profile, StepStatus};
use blowup_lab::riccati::{h_blowup_time, h_closed_form, RiccatiParams};
use blowup_lab::{FieldState, SpatialGrid, WaveSolver};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Observed orders between successive errors of a halving study.
pub fn orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

fn bump_second_derivative(radius: f64, s: f64) -> f64 {
    let x = s / radius;
    if x.abs() >= 1.0 {
        return 0.0;
    }
    let q = 1.0 - x * x;
    -8.0 / (radius * radius) * q * q * (1.0 - 7.0 * x * x)
}

fn max_error(state: &FieldState, grid: &SpatialGrid, exact: impl Fn(f64) -> f64) -> f64 {
    (0..grid.n)
        .map(|i| (state.v[i] - exact(grid.s(i))).abs())
        .fold(0.0, f64::max)
}

pub fn advance_to(solver: &mut WaveSolver, t_end: f64) {
    while solver.state().t < t_end - 1e-9 {
        assert_eq!(solver.step(), StepStatus::Ok);
    }
}

/// Max error against the flat d'Alembert solution with `v = bump`, `v_t = 0`.
pub fn dalembert_error(ds: f64) -> f64 {
    let half = 12.0;
    let n = (2.0 * half / ds).round() as usize + 1;
    let grid = SpatialGrid::build_raw(1.0, 2.0, -half, half, n)
        .unwrap()
        .with_flat_potential()
        .without_nonlinearity();
    let radius = 2.0;
    let state = FieldState::from_profiles(&grid, 1.0, |s| bump_profile(radius, s), |_| 0.0);
    let mut solver = WaveSolver::new(&grid, 2.0, 0.5 * ds, state).unwrap();
    let t_end = 4.0;
    advance_to(&mut solver, t_end);
    max_error(solver.state(), &grid, |s| {
        0.5 * (bump_profile(radius, s - t_end) + bump_profile(radius, s + t_end))
    })
}

/// Max error against `v* = e^-t bump(s)` on the full equation (p = 2) with
/// the matching source term.
pub fn manufactured_error(ds: f64) -> f64 {
    let half = 8.0;
    let n = (2.0 * half / ds).round() as usize + 1;
    let grid = SpatialGrid::build_raw(1.0, 2.0, -half, half, n).unwrap();
    let radius = 2.0;
    let (w, h) = (grid.w_of_s.clone(), grid.h_of_s.clone());
    let (s_min, step) = (grid.s_min, grid.ds);
    let forcing = Box::new(move |t: f64, s: f64| {
        let i = ((s - s_min) / step).round() as usize;
        let b = bump_profile(radius, s);
        let decay = (-t).exp();
        decay * (b - bump_second_derivative(radius, s) + w[i] * b) - h[i] * (decay * b).powi(2)
    });
    let state = FieldState::from_profiles(
        &grid,
        1.0,
        |s| bump_profile(radius, s),
        |s| -bump_profile(radius, s),
    );
    let mut solver = WaveSolver::with_forcing(&grid, 2.0, 0.5 * ds, state, Some(forcing)).unwrap();
    advance_to(&mut solver, 2.0);
    let t = solver.state().t;
    max_error(solver.state(), &grid, |s| {
        (-t).exp() * bump_profile(radius, s)
    })
}

/// Blow-up time of `H' = C H^p / (t+R)^(p-1)` by RK4 in `y = ln H`, where
/// `dt/dy = (t+R)^(p-1) e^(-(p-1) y) / C` decays and `t(y)` converges.
pub fn riccati_blowup_by_quadrature(rp: &RiccatiParams) -> f64 {
    let q = rp.p - 1.0;
    let f = |y: f64, t: f64| (t + rp.radius).powf(q) * (-q * y).exp() / rp.c;
    let y0 = rp.initial().ln();
    let span = 60.0 / q;
    let steps = 250_000;
    let dy = span / steps as f64;
    let mut t = 0.0;
    for k in 0..steps {
        let y = y0 + k as f64 * dy;
        let k1 = f(y, t);
        let k2 = f(y + 0.5 * dy, t + 0.5 * dy * k1);
        let k3 = f(y + 0.5 * dy, t + 0.5 * dy * k2);
        let k4 = f(y + dy, t + dy * k3);
        t += dy / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    t
}

/// Seeded parameter draws with blow-up times below `e^20 R`.
pub fn random_riccati_params(count: usize, seed: u64) -> Vec<RiccatiParams> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let p = if rng.gen_bool(0.25) {
            2.0
        } else {
            rng.gen_range(1.5..2.0)
        };
        let rp = RiccatiParams::new(
            p,
            rng.gen_range(0.1..2.0),
            rng.gen_range(0.05..1.0),
            rng.gen_range(0.05..2.0),
            rng.gen_range(0.5..3.0),
        )
        .unwrap();
        if rp.c * rp.initial() >= 0.05 {
            out.push(rp);
        }
    }
    out
}

/// Five-point derivative with step `delta`.
pub fn five_point(f: impl Fn(f64) -> f64, t: f64, delta: f64) -> f64 {
    (f(t - 2.0 * delta) - 8.0 * f(t - delta) + 8.0 * f(t + delta) - f(t + 2.0 * delta))
        / (12.0 * delta)
}

/// Largest `|H' - rhs(t, H)|` over `[0, upto T_H]`, with `H'` by finite
/// differences of the closed form.
pub fn max_ode_residual(rp: &RiccatiParams, upto: f64) -> f64 {
    let t_h = h_blowup_time(rp);
    let h = |t: f64| h_closed_form(rp, t).unwrap();
    let mut worst: f64 = 0.0;
    for k in 0..=400 {
        let t = upto * t_h * k as f64 / 400.0;
        let delta = 1e-3 * (t_h - t).min(t.max(t_h * 1e-3));
        // one-sided at t = 0 would need H(t < 0); start just inside
        let t = t.max(2.0 * delta);
        let lhs = five_point(h, t, delta);
        worst = worst.max((lhs - rp.rhs(t, h(t))).abs());
    }
    worst
}
