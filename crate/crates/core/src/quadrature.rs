//! Gauss–Legendre and Gauss–Chebyshev rules.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
///
/// Roots of `P_n` are found by Newton iteration from the Chebyshev-like
/// initial guesses `cos(π(i − 1/4)/(n + 1/2))`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// First-kind Gauss–Chebyshev nodes `cos((2k − 1)π / 2n)`. Against the
/// normalized arcsine density every node carries weight `1/n`.
pub fn chebyshev_nodes(n: usize) -> Vec<f64> {
    (1..=n)
        .map(|k| ((2 * k - 1) as f64 * PI / (2 * n) as f64).cos())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        for n in [1usize, 2, 5, 16, 64, 512] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-12);
            // x^(2n-2) is the highest even power the rule integrates exactly
            let even = 2 * n - 2;
            let got: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(even as i32)).sum();
            assert!((got - 2.0 / (even as f64 + 1.0)).abs() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn legendre_nodes_sorted_and_symmetric() {
        let (x, w) = gauss_legendre(9);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
        for i in 0..9 {
            assert!((x[i] + x[8 - i]).abs() < 1e-15);
            assert!((w[i] - w[8 - i]).abs() < 1e-15);
        }
    }

    #[test]
    fn chebyshev_recovers_arcsine_moments() {
        let nodes = chebyshev_nodes(8);
        let m2: f64 = nodes.iter().map(|t| t * t).sum::<f64>() / 8.0;
        let m4: f64 = nodes.iter().map(|t| t.powi(4)).sum::<f64>() / 8.0;
        assert!((m2 - 0.5).abs() < 1e-15);
        assert!((m4 - 0.375).abs() < 1e-15);
    }
}
