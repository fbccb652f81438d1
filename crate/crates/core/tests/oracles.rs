//! Checks against independent references: closed forms, characteristic
//! polynomials and simulation.

use nalgebra::DMatrix;
use num_complex::Complex64;

use sepspec::clt::{Contour, LssModel, OUTER_SCALE};
use sepspec::func::{AnalyticFn, Polynomial};
use sepspec::lsd::{SpectralSystem, SupportEstimate};
use sepspec::model::*;
use sepspec::montecarlo::empirical_lss_moments;
use sepspec::spectra::{esd, esd_real, SpectralMeasure};
use sepspec::whitenoise::{null_parameters, plug_in_moments, Centering};

type C = Complex64;

/// Coefficients of det(λI − A), highest degree first, by Faddeev–LeVerrier.
fn characteristic_polynomial(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut coeffs = vec![1.0];
    let mut m = DMatrix::<f64>::zeros(n, n);
    for k in 1..=n {
        m = a * &m + DMatrix::identity(n, n) * coeffs[k - 1];
        coeffs.push(-(a * &m).trace() / k as f64);
    }
    coeffs
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().fold(0.0, |acc, &c| acc * x + c)
}

/// Real roots of a polynomial on `[lo, hi]` by a sign scan and bisection.
fn real_roots(coeffs: &[f64], lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    let mut roots = Vec::new();
    let h = (hi - lo) / steps as f64;
    for i in 0..steps {
        let (mut a, mut b) = (lo + i as f64 * h, lo + (i + 1) as f64 * h);
        let (mut fa, fb) = (horner(coeffs, a), horner(coeffs, b));
        if fa == 0.0 {
            roots.push(a);
            continue;
        }
        if fa * fb > 0.0 {
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            let fm = horner(coeffs, mid);
            if fm * fa <= 0.0 {
                b = mid;
            } else {
                a = mid;
                fa = fm;
            }
        }
        roots.push(0.5 * (a + b));
    }
    roots
}

#[test]
fn wishart_eigenvalues_match_characteristic_roots() {
    let model = SeparableModel::identity(5, 5, EntryLaw::real_gaussian()).unwrap();
    for seed in 0..5 {
        let x = model.sample_entries(seed).unwrap();
        let s = sample_covariance(&model, &x).unwrap();
        let real = s.map(|v| v.re);
        let eig = esd(&s).unwrap().eigenvalues;
        let upper = eig.last().unwrap() * 1.5 + 1.0;
        let roots = real_roots(&characteristic_polynomial(&real), -1e-3, upper, 200_000);
        assert_eq!(roots.len(), 5, "seed {seed}: {roots:?}");
        for (r, l) in roots.iter().zip(&eig) {
            assert!((r - l).abs() < 1e-8 * (1.0 + l.abs()), "seed {seed}: {r} vs {l}");
        }
    }
}

fn marchenko_pastur_density(c: f64, x: f64) -> f64 {
    let (a, b) = ((1.0 - c.sqrt()).powi(2), (1.0 + c.sqrt()).powi(2));
    if x <= a || x >= b {
        return 0.0;
    }
    ((b - x) * (x - a)).sqrt() / (2.0 * std::f64::consts::PI * c * x)
}

#[test]
fn marchenko_pastur_density_and_mass() {
    let c = 0.5;
    let system = SpectralSystem::new(SpectralMeasure::PointMass(1.0), SpectralMeasure::PointMass(1.0), c).unwrap();
    let (a, b) = ((1.0 - c.sqrt()).powi(2), (1.0 + c.sqrt()).powi(2));
    let grid: Vec<f64> = (0..=2000).map(|i| a - 0.05 + (b - a + 0.1) * i as f64 / 2000.0).collect();
    let density = system.density(&grid, 1e-5).unwrap();
    for &(x, d) in &density {
        let edge = (x - a).abs().min((x - b).abs());
        if edge > 0.01 {
            assert!((d - marchenko_pastur_density(c, x)).abs() < 1e-3, "x = {x}: {d}");
        }
    }
    let cdf = system.cdf(&grid, 1e-5).unwrap();
    let mass = cdf.last().unwrap().1;
    assert!((mass - 1.0).abs() < 2e-3, "mass {mass}");
}

#[test]
fn marchenko_pastur_atom_for_c_above_one() {
    // F has an atom of mass 1 − 1/c at zero, so −z m(z) → 1 − 1/c as z → 0
    let c = 2.0;
    let system = SpectralSystem::new(SpectralMeasure::PointMass(1.0), SpectralMeasure::PointMass(1.0), c).unwrap();
    let z = C::new(0.0, 1e-6);
    let t = system.solve(z, None).unwrap();
    assert!(((-z * t.m).re - 0.5).abs() < 1e-5, "{}", t.m);
}

#[test]
fn contour_doubling_changes_little() {
    let model = LssModel::new(SpectralMeasure::discrete(vec![(1.0, 0.5), (3.0, 0.5)]).unwrap(), SpectralMeasure::Arcsine, 0.5, 1.0, 0.0).unwrap();
    let f = Polynomial::new(vec![0.0, 0.0, 1.0]);
    let support = model.support().unwrap();
    let moments = |nodes: usize| {
        let a = Contour::around(&support, 0.5, nodes).unwrap();
        let b = a.scaled(OUTER_SCALE).unwrap();
        model.moments(&[&f as &dyn AnalyticFn], &a, &b).unwrap()
    };
    let (coarse, fine) = (moments(256), moments(512));
    assert!((coarse.mean[0] - fine.mean[0]).abs() < 1e-8 * fine.mean[0].abs());
    assert!((coarse.cov[0][0] - fine.cov[0][0]).abs() < 1e-8 * fine.cov[0][0].abs());
}

#[test]
fn complex_gaussian_entries_have_zero_pseudo_moments() {
    let x = generate_entries(&EntryLaw::complex_gaussian(), 500, 400, 5).unwrap();
    let n = x.len() as f64;
    let second: C = x.iter().map(|v| v * v).sum::<C>() / n;
    let abs2 = x.iter().map(|v| v.norm_sqr()).sum::<f64>() / n;
    let abs4 = x.iter().map(|v| v.norm_sqr().powi(2)).sum::<f64>() / n;
    assert!((abs2 - 1.0).abs() < 0.01);
    assert!(second.norm() < 0.01);
    // α = |E x²|² ≈ 0, κ = E|x|⁴ − α − 2 ≈ 0
    assert!((abs4 - 2.0).abs() < 0.03);
}

#[test]
fn moving_average_lag_one_cross_moment() {
    // x_t = e_t + 0.3 e_{t−1} + 0.1 e_{t−2}: E x_t x_{t−1} = 0.3 + 0.03 = 0.33
    let p = 20;
    let spec = LinearProcessSpec::from_sigma0(&RMatrix::identity(p, p), vec![1.0, 0.3, 0.1], EntryLaw::real_gaussian()).unwrap();
    let data = generate_linear_process(&spec, p, 10_000, 3).unwrap();
    let lag1 = lag_autocovariance(&data, 1).unwrap();
    let avg = lag1.diagonal().mean();
    assert!((avg - 0.33).abs() < 0.033, "{avg}");
    let lag3 = lag_autocovariance(&data, 3).unwrap();
    assert!(lag3.diagonal().mean().abs() < 0.02);
}

#[test]
fn plug_in_moments_recover_model_one() {
    let spec = LinearProcessSpec::model1(50).unwrap();
    let data = generate_linear_process(&spec, 50, 10_000, 17).unwrap();
    let (m1, m2) = plug_in_moments(&data).unwrap();
    assert!((m1 - 2.0).abs() < 0.04, "m1 {m1}");
    assert!((m2 - 5.0).abs() < 0.25, "m2 {m2}");
    let white = generate_linear_process(&LinearProcessSpec::from_sigma0(&RMatrix::identity(10, 10), vec![1.0], EntryLaw::real_gaussian()).unwrap(), 10, 20_000, 4).unwrap();
    let (w1, w2) = plug_in_moments(&white).unwrap();
    assert!((w1 - 1.0).abs() < 0.02 && (w2 - 1.0).abs() < 0.05, "{w1} {w2}");
}

#[test]
fn centerings_agree_when_c_is_exact() {
    for (p, n, tau) in [(100usize, 200usize, 1usize), (37, 91, 5), (500, 250, 2)] {
        let a = null_parameters(p, n, tau, 2.0, 5.0, 1.0, 0.0, Centering::FiniteN).unwrap();
        let b = null_parameters(p, n, tau, 2.0, 5.0, 1.0, 0.0, Centering::Asymptotic).unwrap();
        assert!((a.centering - b.centering).abs() < 1e-9 * a.centering.abs());
    }
}

#[test]
fn monte_carlo_matches_clt_for_model_one() {
    let (p, n) = (200, 400);
    let model = SeparableModel::white_noise(&alternating_diagonal(p), n, 1, EntryLaw::real_gaussian()).unwrap();
    let h1 = SpectralMeasure::discrete(vec![(1.0, 0.5), (3.0, 0.5)]).unwrap();
    let h2 = SpectralMeasure::from_eigenvalues(&shift_eigenvalues(n, 1).unwrap()).unwrap();
    let f = Polynomial::new(vec![0.0, 0.0, 1.0]);
    let est = empirical_lss_moments(&model, &f, 2000, &h1, &h2, p as f64 / n as f64, 99).unwrap();
    assert!((est.var_hat / 13.75 - 1.0).abs() < 0.10, "variance {}", est.var_hat);
    assert!((est.mean_hat - 1.25).abs() < 3.0 * est.se_mean, "mean {} (se {})", est.mean_hat, est.se_mean);
}

#[test]
fn complex_gaussian_lss_mean_is_zero() {
    let (p, n) = (60, 120);
    let model = SeparableModel::white_noise(&alternating_diagonal(p), n, 1, EntryLaw::complex_gaussian()).unwrap();
    let h1 = SpectralMeasure::discrete(vec![(1.0, 0.5), (3.0, 0.5)]).unwrap();
    let h2 = SpectralMeasure::from_eigenvalues(&shift_eigenvalues(n, 1).unwrap()).unwrap();
    let f = Polynomial::new(vec![0.0, 0.0, 1.0]);
    let est = empirical_lss_moments(&model, &f, 1000, &h1, &h2, 0.5, 7).unwrap();
    assert!(est.mean_hat.abs() < 3.0 * est.se_mean, "mean {} (se {})", est.mean_hat, est.se_mean);
}

#[test]
fn support_estimate_brackets_simulated_spectra() {
    for (p, n, tau) in [(100usize, 200usize, 1usize), (150, 100, 2), (80, 400, 1)] {
        let model = SeparableModel::white_noise(&alternating_diagonal(p), n, tau, EntryLaw::real_gaussian()).unwrap();
        let support = SupportEstimate::from_measures(&model.h1().unwrap(), &model.h2().unwrap(), p as f64 / n as f64).unwrap();
        for seed in 0..3 {
            let x = model.sample_entries(seed).unwrap();
            let eig = esd(&sample_covariance(&model, &x).unwrap()).unwrap().eigenvalues;
            assert!(support.contains(eig[0]) && support.contains(*eig.last().unwrap()), "{support:?} vs {} .. {}", eig[0], eig.last().unwrap());
        }
    }
    let s = esd_real(&shift_matrix(40, 3).unwrap()).unwrap();
    let mut closed = shift_eigenvalues(40, 3).unwrap();
    closed.sort_by(f64::total_cmp);
    assert!(s.eigenvalues.iter().zip(&closed).all(|(a, b)| (a - b).abs() < 1e-12));
}
