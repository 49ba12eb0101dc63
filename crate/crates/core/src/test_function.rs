//! Positive solution of `phi'' = (W + A^2) phi` growing like `e^(A s)`.
//!
//! The multiplier used by the functionals is `psi(t, s) = e^(-t/2M) phi(s)`
//! with `A = 1/(2M)`, which satisfies `psi_t = -psi/(2M)` and
//! `psi_ss - W psi = psi/(4M^2)`.
//!
//! `phi` is integrated from the left end of the grid, where `W` is negligible,
//! starting on the pure exponential mode. The samples span hundreds of
//! e-folds on long grids, so the table stores `ln phi` and `phi'/phi` and the
//! integrator renormalises whenever `phi` gets large.

use rayon::prelude::*;

use crate::coordinates::SpatialGrid;
use crate::error::{LabError, Result};

/// Renormalisation cap of the integrator.
const RENORM_CAP: f64 = 1e100;

/// Largest admissible `W(s_min) / A^2`.
pub const LEFT_POTENTIAL_RATIO: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct TestFunctionTable {
    pub growth_rate: f64,
    pub s_min: f64,
    pub ds: f64,
    /// `ln phi` at each node, normalised so that `phi(s) e^(-A s) -> 1` at the
    /// left end.
    pub ln_phi: Vec<f64>,
    /// `phi' / phi` at each node.
    pub dlog_phi: Vec<f64>,
    /// Potential samples the table was built against.
    w: Vec<f64>,
    /// `phi[i] / phi[i + 1]`.
    down_ratio: Vec<f64>,
}

/// Builds the table on `grid` for growth rate `a`.
pub fn solve_phi(grid: &SpatialGrid, a: f64) -> Result<TestFunctionTable> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(LabError::InvalidParameter(format!(
            "growth rate {a} must be positive"
        )));
    }
    let w0 = grid.w_of_s[0];
    if w0 > LEFT_POTENTIAL_RATIO * a * a {
        return Err(LabError::InvalidParameter(format!(
            "W(s_min) = {w0:e} is not negligible against A^2 = {:e}; extend the grid leftwards",
            a * a
        )));
    }

    let mid = (0..grid.n - 1)
        .into_par_iter()
        .map(|i| grid.potential_at_s(grid.s(i) + 0.5 * grid.ds))
        .collect::<Result<Vec<_>>>()?;

    let ds = grid.ds;
    let a2 = a * a;
    let n = grid.n;
    let mut ln_phi = Vec::with_capacity(n);
    let mut dlog_phi = Vec::with_capacity(n);

    let (mut phi, mut dphi) = (1.0_f64, a);
    let mut offset = 0.0;
    ln_phi.push(0.0);
    dlog_phi.push(a);

    for i in 0..n - 1 {
        let (w_left, w_mid, w_right) = (grid.w_of_s[i], mid[i], grid.w_of_s[i + 1]);
        let k1 = (dphi, (w_left + a2) * phi);
        let y2 = (phi + 0.5 * ds * k1.0, dphi + 0.5 * ds * k1.1);
        let k2 = (y2.1, (w_mid + a2) * y2.0);
        let y3 = (phi + 0.5 * ds * k2.0, dphi + 0.5 * ds * k2.1);
        let k3 = (y3.1, (w_mid + a2) * y3.0);
        let y4 = (phi + ds * k3.0, dphi + ds * k3.1);
        let k4 = (y4.1, (w_right + a2) * y4.0);
        phi += ds / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        dphi += ds / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);

        if !(phi > 0.0) {
            return Err(LabError::InvalidParameter(format!(
                "phi lost positivity at s = {}",
                grid.s(i + 1)
            )));
        }
        if phi > RENORM_CAP {
            offset += phi.ln();
            dphi /= phi;
            phi = 1.0;
        }
        ln_phi.push(phi.ln() + offset);
        dlog_phi.push(dphi / phi);
    }

    let shift = a * grid.s_min;
    ln_phi.iter_mut().for_each(|l| *l += shift);
    let down_ratio = ln_phi.windows(2).map(|w| (w[0] - w[1]).exp()).collect();

    Ok(TestFunctionTable {
        growth_rate: a,
        s_min: grid.s_min,
        ds,
        ln_phi,
        dlog_phi,
        w: grid.w_of_s.clone(),
        down_ratio,
    })
}

/// Time factor `e^(-t/2M)` of the multiplier.
pub fn psi_weight(mass: f64, t: f64) -> f64 {
    (-t / (2.0 * mass)).exp()
}

impl TestFunctionTable {
    pub fn len(&self) -> usize {
        self.ln_phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ln_phi.is_empty()
    }

    pub fn s(&self, i: usize) -> f64 {
        self.s_min + i as f64 * self.ds
    }

    pub fn phi(&self, i: usize) -> f64 {
        self.ln_phi[i].exp()
    }

    pub fn dphi(&self, i: usize) -> f64 {
        self.phi(i) * self.dlog_phi[i]
    }

    /// `e^(-A s) phi(s)`.
    pub fn scaled(&self, i: usize) -> f64 {
        (self.ln_phi[i] - self.growth_rate * self.s(i)).exp()
    }

    /// Relative discrete residual `(D2 phi - (W + A^2) phi) / phi` at interior
    /// nodes; zero at both ends.
    pub fn relative_residuals(&self) -> Vec<f64> {
        let n = self.len();
        let a2 = self.growth_rate * self.growth_rate;
        let inv_ds2 = 1.0 / (self.ds * self.ds);
        let mut out = vec![0.0; n];
        for i in 1..n - 1 {
            let up = (self.ln_phi[i + 1] - self.ln_phi[i]).exp_m1();
            let down = (self.ln_phi[i - 1] - self.ln_phi[i]).exp_m1();
            out[i] = (up + down) * inv_ds2 - (self.w[i] + a2);
        }
        out
    }

    pub fn max_relative_residual(&self) -> f64 {
        self.relative_residuals()
            .iter()
            .fold(0.0_f64, |m, r| m.max(r.abs()))
    }

    /// Writes `psi(t, s_i) = e^(-t/2M) phi(s_i)` for `i` in `lo..=hi` into
    /// `out[lo..=hi]`, stepping down from the largest sample so that only
    /// values genuinely below the double range underflow.
    pub fn fill_psi(&self, mass: f64, t: f64, lo: usize, hi: usize, out: &mut [f64]) {
        if lo > hi {
            return;
        }
        let mut value = (self.ln_phi[hi] - t / (2.0 * mass)).exp();
        out[hi] = value;
        for i in (lo..hi).rev() {
            value *= self.down_ratio[i];
            out[i] = value;
        }
    }

    /// `psi(t, s_i)` at a single node.
    pub fn psi(&self, mass: f64, t: f64, i: usize) -> f64 {
        (self.ln_phi[i] - t / (2.0 * mass)).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid(mass: f64, half: f64, n: usize) -> SpatialGrid {
        SpatialGrid::build_raw(mass, 2.0, -half, half, n).unwrap()
    }

    #[test]
    fn flat_potential_reproduces_exponential() {
        let g = SpatialGrid::build_raw(1.0, 2.0, -40.0, 40.0, 8001)
            .unwrap()
            .with_flat_potential();
        let a = 0.5;
        let table = solve_phi(&g, a).unwrap();
        let base = table.ln_phi[0];
        let worst = (0..table.len())
            .map(|i| {
                let exact = a * (table.s(i) - g.s_min);
                ((table.ln_phi[i] - base) - exact).exp_m1().abs()
            })
            .fold(0.0, f64::max);
        assert!(worst <= 1e-8, "relative deviation {worst:e}");
    }

    #[test]
    fn positive_and_exponential_at_right_end() {
        let g = grid(1.0, 60.0, 12001);
        let table = solve_phi(&g, 0.5).unwrap();
        assert!(table.ln_phi.iter().all(|l| l.is_finite()));
        let lo = g.nearest(30.0);
        let ratios: Vec<f64> = (lo..g.n).map(|i| table.scaled(i)).collect();
        let max = ratios.iter().cloned().fold(f64::MIN, f64::max);
        let min = ratios.iter().cloned().fold(f64::MAX, f64::min);
        assert!(max / min <= 1.1, "spread {}", max / min);
        // the left end starts on the pure mode
        assert_relative_eq!(table.scaled(0), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn residual_is_second_order() {
        let coarse = solve_phi(&grid(1.0, 60.0, 4001), 0.5).unwrap();
        let fine = solve_phi(&grid(1.0, 60.0, 8001), 0.5).unwrap();
        let ratio = coarse.max_relative_residual() / fine.max_relative_residual();
        let order = ratio.log2();
        assert!((1.8..=2.2).contains(&order), "observed order {order}");
    }

    #[test]
    fn rejects_short_left_end() {
        let g = grid(1.0, 5.0, 101);
        assert!(solve_phi(&g, 0.5).is_err());
        let g = grid(1.0, 60.0, 101);
        assert!(solve_phi(&g, 0.0).is_err());
    }

    #[test]
    fn psi_weight_examples() {
        assert_eq!(psi_weight(1.0, 0.0), 1.0);
        assert_relative_eq!(psi_weight(1.0, 2.0 * 2f64.ln()), 0.5, max_relative = 1e-15);
        assert_relative_eq!(psi_weight(0.5, 1.0), (-1f64).exp(), max_relative = 1e-15);
    }

    #[test]
    fn fill_psi_matches_direct() {
        let g = grid(1.0, 60.0, 2001);
        let table = solve_phi(&g, 0.5).unwrap();
        let mut out = vec![0.0; g.n];
        table.fill_psi(1.0, 7.5, 100, 1900, &mut out);
        for i in (100..=1900).step_by(37) {
            assert_relative_eq!(out[i], table.psi(1.0, 7.5, i), max_relative = 1e-12);
        }
        assert_eq!(out[99], 0.0);
    }

    #[test]
    fn positivity_across_masses() {
        for &m in &[0.5, 1.0, 2.0] {
            let g = grid(m, 60.0 * m.max(1.0), 6001);
            let table = solve_phi(&g, 0.5 / m).unwrap();
            assert!(table.ln_phi.iter().all(|l| l.is_finite()));
            assert!(table.dlog_phi.iter().all(|d| *d > 0.0));
        }
    }
}
