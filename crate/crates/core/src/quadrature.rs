//! Quadrature rules shared by the functionals and the integral lemmas.

/// Trapezoid rule on uniformly spaced samples.
pub fn trapezoid(ds: f64, values: &[f64]) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => ds * (0.5 * (values[0] + values[n - 1]) + values[1..n - 1].iter().sum::<f64>()),
    }
}

// 5-point Gauss-Legendre nodes and weights on [-1, 1].
const GL_NODES: [f64; 5] = [
    0.0,
    -0.538_469_310_105_683_1,
    0.538_469_310_105_683_1,
    -0.906_179_845_938_664,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
    0.236_926_885_056_189_1,
];

/// Composite 5-point Gauss-Legendre rule with panels no wider than `max_panel`.
pub fn gauss_legendre<F>(a: f64, b: f64, max_panel: f64, mut f: F) -> f64
where
    F: FnMut(f64) -> f64,
{
    if b <= a {
        return 0.0;
    }
    let panels = ((b - a) / max_panel).ceil().max(1.0) as usize;
    let width = (b - a) / panels as f64;
    let mut total = 0.0;
    for k in 0..panels {
        let mid = a + (k as f64 + 0.5) * width;
        let half = 0.5 * width;
        let panel: f64 = GL_NODES
            .iter()
            .zip(GL_WEIGHTS.iter())
            .map(|(x, w)| w * f(mid + half * x))
            .sum();
        total += half * panel;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn trapezoid_is_exact_for_lines() {
        let v: Vec<f64> = (0..11).map(|i| 2.0 + 0.5 * i as f64 * 0.1).collect();
        assert_relative_eq!(trapezoid(0.1, &v), 2.0 + 0.25, max_relative = 1e-14);
        assert_eq!(trapezoid(0.1, &[3.0]), 0.0);
    }

    #[test]
    fn gauss_legendre_exponential() {
        let got = gauss_legendre(0.0, 10.0, 0.5, |x| (-x).exp());
        assert_relative_eq!(got, 1.0 - (-10f64).exp(), max_relative = 1e-13);
    }
}
