//! Property suites for the `sepspec` library, run as unit tests here and
//! again by the acceptance target. Each suite runs a proptest strategy for a
//! given number of cases with a fixed RNG, so failures reproduce.

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

use sepspec::clt::{Contour, LssModel};
use sepspec::func::{AnalyticFn, Polynomial};
use sepspec::lsd::{SpectralSystem, SupportEstimate};
use sepspec::model::*;
use sepspec::montecarlo::{run_plan, Cell, PlanMoments, ProcessTemplate, SimulationPlan};
use sepspec::quadrature::chebyshev_nodes;
use sepspec::spectra::{arcsine_log_rho, esd, SpectralMeasure};
use sepspec::whitenoise::{lambda_hat, lambda_hat_trace_form, run_test, Centering, MomentSource, TestConfig};

type C = Complex64;

pub struct Suite {
    pub name: &'static str,
    pub run: fn(u32) -> Result<(), String>,
}

fn runner(cases: u32) -> TestRunner {
    let config = Config { cases, failure_persistence: None, ..Config::default() };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn check<S: Strategy>(cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String> {
    runner(cases).run(&strategy, test).map_err(|e| e.to_string())
}

pub fn suites() -> Vec<Suite> {
    vec![
        Suite { name: "model: sample covariance is PSD for PSD T2", run: psd_sample_covariance },
        Suite { name: "model: shift matrix traces", run: shift_traces },
        Suite { name: "model: lag-zero autocovariance is symmetric PSD", run: lag_zero_psd },
        Suite { name: "model: generation is deterministic", run: determinism },
        Suite { name: "spectra: moment(H, 0) = 1", run: unit_mass },
        Suite { name: "spectra: resolvent at g = 0 gives moments", run: resolvent_at_zero },
        Suite { name: "spectra: arcsine quadrature is converged", run: arcsine_converged },
        Suite { name: "spectra: ESD of the identity", run: identity_esd },
        Suite { name: "lsd: residuals and admissibility", run: residuals_and_admissibility },
        Suite { name: "lsd: warm and cold starts agree", run: warm_cold },
        Suite { name: "lsd: g1 -> 0 forces g2 -> 0", run: g1_small_g2_small },
        Suite { name: "lsd: conjugate symmetry", run: conjugate_symmetry },
        Suite { name: "lsd: derivative identity", run: derivative_identity },
        Suite { name: "clt: mean vanishes when alpha = kappa = 0", run: complex_gaussian_mean },
        Suite { name: "clt: kappa enters the covariance linearly", run: kappa_linear },
        Suite { name: "clt: variance is nonnegative, integrals are real", run: variance_nonnegative },
        Suite { name: "clt: covariance symmetric under contour swap", run: covariance_symmetry },
        Suite { name: "clt: contour invariance", run: contour_invariance },
        Suite { name: "whitenoise: statistic is nonnegative", run: lambda_nonnegative },
        Suite { name: "whitenoise: data and trace forms agree", run: trace_form },
        Suite { name: "whitenoise: quartic homogeneity", run: quartic_homogeneity },
        Suite { name: "whitenoise: decisions are scale invariant", run: scale_invariance },
        Suite { name: "montecarlo: tables are deterministic", run: table_determinism },
        Suite { name: "montecarlo: replication halves agree", run: split_halves },
        Suite { name: "serde: JSON round trips", run: json_round_trip },
    ]
}

fn matrix(rows: usize, cols: usize, lo: f64, hi: f64) -> impl Strategy<Value = RMatrix> {
    prop::collection::vec(lo..hi, rows * cols).prop_map(move |v| RMatrix::from_vec(rows, cols, v))
}

fn sized_matrix(max_rows: usize, max_cols: usize) -> impl Strategy<Value = RMatrix> {
    (1..=max_rows, 1..=max_cols).prop_flat_map(|(r, c)| matrix(r, c, -3.0, 3.0))
}

/// Nonnegative discrete measure with 1..=atoms atoms in `[lo, hi]`.
pub fn discrete(atoms: usize, lo: f64, hi: f64) -> impl Strategy<Value = SpectralMeasure> {
    prop::collection::vec((lo..hi, 0.1f64..1.0), 1..=atoms).prop_map(|a| {
        let total: f64 = a.iter().map(|x| x.1).sum();
        SpectralMeasure::discrete(a.into_iter().map(|(x, w)| (x, w / total)).collect()).unwrap()
    })
}

fn min_eigenvalue(s: &RMatrix) -> f64 {
    SymmetricEigen::new(s.clone()).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

fn psd_sample_covariance(cases: u32) -> Result<(), String> {
    let strategy = (1usize..6, 1usize..8, any::<u64>()).prop_flat_map(|(p, n, seed)| {
        (matrix(p, p, -2.0, 2.0), matrix(n, n, -2.0, 2.0), Just(seed), prop_oneof![Just(true), Just(false)])
    });
    check(cases, strategy, |(t1, b, seed, real)| {
        let (p, n) = (t1.nrows(), b.nrows());
        let law = if real { EntryLaw::real_gaussian() } else { EntryLaw::complex_gaussian() };
        let model = SeparableModel::new(Dimensions::square(p, n).unwrap(), to_complex(&t1), to_complex(&(&b * b.transpose())), law).unwrap();
        let x = model.sample_entries(seed).unwrap();
        let s = sample_covariance(&model, &x).unwrap();
        let spectrum = esd(&s).unwrap();
        let norm = s.norm();
        prop_assert!(spectrum.eigenvalues[0] >= -1e-10 * norm.max(1e-300), "{:?}", spectrum.eigenvalues);
        Ok(())
    })
}

fn shift_traces(cases: u32) -> Result<(), String> {
    let strategy = (2usize..80).prop_flat_map(|n| (Just(n), 1..n));
    check(cases, strategy, |(n, tau)| {
        let t = shift_matrix(n, tau).unwrap();
        prop_assert_eq!(t.trace(), 0.0);
        prop_assert_eq!((&t * &t).trace(), (n - tau) as f64 / 2.0);
        prop_assert_eq!(&t, &t.transpose());
        Ok(())
    })
}

fn lag_zero_psd(cases: u32) -> Result<(), String> {
    check(cases, sized_matrix(8, 12), |data| {
        let s = lag_autocovariance(&data, 0).unwrap();
        let scale = s.norm().max(1e-300);
        prop_assert!((&s - s.transpose()).norm() <= 1e-14 * scale);
        prop_assert!(min_eigenvalue(&s) >= -1e-12 * scale);
        Ok(())
    })
}

fn determinism(cases: u32) -> Result<(), String> {
    let strategy = (any::<u64>(), 1usize..6, 1usize..10, prop::collection::vec(-1.0f64..1.0, 1..4));
    check(cases, strategy, |(seed, p, n, ma)| {
        for law in [EntryLaw::real_gaussian(), EntryLaw::complex_gaussian(), EntryLaw::rademacher()] {
            prop_assert_eq!(generate_entries(&law, p, n, seed).unwrap(), generate_entries(&law, p, n, seed).unwrap());
        }
        let spec = LinearProcessSpec::from_sigma0(
            &RMatrix::from_diagonal(&nalgebra::DVector::from_vec(alternating_diagonal(p))),
            ma,
            EntryLaw::real_gaussian(),
        )
        .unwrap();
        let a = generate_linear_process(&spec, p, n, seed).unwrap();
        let b = generate_linear_process(&spec, p, n, seed).unwrap();
        prop_assert!(a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
        Ok(())
    })
}

fn unit_mass(cases: u32) -> Result<(), String> {
    check(cases, discrete(8, -5.0, 5.0), |h| {
        prop_assert!((h.moment(0) - 1.0).abs() <= 1e-12);
        prop_assert_eq!(SpectralMeasure::Arcsine.moment(0), 1.0);
        prop_assert_eq!(SpectralMeasure::PointMass(3.0).moment(0), 1.0);
        Ok(())
    })
}

fn resolvent_at_zero(cases: u32) -> Result<(), String> {
    check(cases, (discrete(8, -5.0, 5.0), 0u32..6, 1u32..5), |(h, a, b)| {
        let zero = C::new(0.0, 0.0);
        let v = h.resolvent_integral(zero, b, a).unwrap();
        prop_assert_eq!(v, C::new(h.moment(a), 0.0));
        let arc = SpectralMeasure::Arcsine.resolvent_integral(zero, b, a).unwrap();
        prop_assert!((arc - SpectralMeasure::Arcsine.moment(a)).norm() < 1e-10);
        Ok(())
    })
}

/// Where the floating-point reference itself is well conditioned, compare
/// with Gauss–Chebyshev at well beyond the converged node count.
fn arcsine_converged(cases: u32) -> Result<(), String> {
    let strategy = (0.0f64..10.0, 1e-3f64..10.0, prop::bool::ANY, 0.0f64..std::f64::consts::TAU, 1u32..4, 0u32..4)
        .prop_map(|(r, im, neg, theta, b, a)| {
            let g = C::from_polar(r, theta);
            let im = if neg { -im } else { im };
            let g = C::new(g.re, im.signum() * g.im.abs().max(im.abs().min(10.0)));
            (if g.norm() > 10.0 { g * (10.0 / g.norm()) } else { g }, b, a)
        })
        .prop_filter("reference conditioning", |(g, _, _)| arcsine_log_rho(*g) > 2e-3);
    check(cases, strategy, |(g, b, a)| {
        let got = SpectralMeasure::Arcsine.resolvent_integral(g, b, a).unwrap();
        let n = ((60.0 / arcsine_log_rho(g)).ceil() as usize).clamp(8192, 1 << 17);
        let one = C::new(1.0, 0.0);
        let reference: C = chebyshev_nodes(n).into_iter().map(|t| one * t.powi(a as i32) / (one + g * t).powu(b)).sum::<C>() / n as f64;
        prop_assert!((got - reference).norm() < 1e-10 * (1.0 + reference.norm()), "g={} b={} a={}: {} vs {}", g, b, a, got, reference);
        Ok(())
    })
}

fn identity_esd(cases: u32) -> Result<(), String> {
    check(cases, 1usize..30, |p| {
        let spectrum = esd(&CMatrix::identity(p, p)).unwrap();
        prop_assert!(spectrum.eigenvalues.iter().all(|&l| (l - 1.0).abs() < 1e-14));
        let h = spectrum.to_measure().unwrap();
        prop_assert!((h.moment(1) - 1.0).abs() < 1e-14 && (h.moment(2) - 1.0).abs() < 1e-14);
        Ok(())
    })
}

/// Random nonnegative `(H1, H2, c)` and a point `z` with `Im z` in `[1e-5, 3]`.
fn system_and_point() -> impl Strategy<Value = (SpectralSystem, C)> {
    (discrete(4, 0.1, 5.0), discrete(4, 0.1, 5.0), 0.05f64..4.0, 0.0f64..1.0, -5.0f64..0.5)
        .prop_map(|(h1, h2, c, u, log_v)| {
            let s = SupportEstimate::from_measures(&h1, &h2, c).unwrap();
            let z = C::new(s.x_l + u * s.width(), 10f64.powf(log_v));
            (SpectralSystem::new(h1, h2, c).unwrap(), z)
        })
}

fn residuals_and_admissibility(cases: u32) -> Result<(), String> {
    check(cases, system_and_point(), |(system, z)| {
        let t = system.solve(z, None).map_err(|e| TestCaseError::fail(format!("{z}: {e}")))?;
        prop_assert!(t.residual < 1e-10, "residual {} at {}", t.residual, z);
        prop_assert!(t.admissible().is_ok(), "{:?}", t.admissible());
        prop_assert!(t.consistency(system.c) < 1e-10);
        Ok(())
    })
}

fn warm_cold(cases: u32) -> Result<(), String> {
    check(cases, (system_and_point(), -0.05f64..0.05, 0.8f64..1.25), |((system, z), dx, fy)| {
        let near = C::new(z.re + dx, z.im * fy);
        let warm = system.solve(near, None).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let a = system.solve(z, Some(&warm)).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let b = system.solve(z, None).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let scale = 1.0 + b.m.norm();
        prop_assert!((a.m - b.m).norm() < 1e-9 * scale, "{} vs {}", a.m, b.m);
        prop_assert!((a.g1 - b.g1).norm() < 1e-9 * (1.0 + b.g1.norm()));
        prop_assert!((a.g2 - b.g2).norm() < 1e-9 * (1.0 + b.g2.norm()));
        Ok(())
    })
}

fn g1_small_g2_small(cases: u32) -> Result<(), String> {
    let strategy = (discrete(4, 0.1, 5.0), discrete(4, 0.1, 5.0), 0.05f64..4.0, 2.0f64..6.0, -1.0f64..1.0);
    check(cases, strategy, |(h1, h2, c, k, re)| {
        let z = C::new(re * 10f64.powf(k), 10f64.powf(k));
        let bound = 2.0 * h2.moment(1) / (c * h1.moment(1));
        let system = SpectralSystem::new(h1, h2, c).unwrap();
        let t = system.solve(z, None).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert!(t.g1.norm() < 1e-1);
        prop_assert!(t.g2.norm() <= bound * t.g1.norm(), "|g1| = {}, |g2| = {}", t.g1.norm(), t.g2.norm());
        Ok(())
    })
}

fn conjugate_symmetry(cases: u32) -> Result<(), String> {
    check(cases, system_and_point(), |(system, z)| {
        let up = system.solve(z, None).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let down = system.solve_anywhere(z.conj(), None).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(down.m, up.m.conj());
        prop_assert_eq!(down.g1, up.g1.conj());
        prop_assert_eq!(down.g2, up.g2.conj());
        Ok(())
    })
}

/// Central difference of `g1` at `z` against the implicit-function formula.
pub fn derivative_defect(system: &SpectralSystem, z: C) -> Result<f64, String> {
    let t = system.solve(z, None).map_err(|e| e.to_string())?;
    let (dg1, _) = system.derivatives(&t).map_err(|e| e.to_string())?;
    let h = 1e-4 * z.norm().max(1.0);
    let plus = system.solve(z + h, Some(&t)).map_err(|e| e.to_string())?;
    let minus = system.solve(z - h, Some(&t)).map_err(|e| e.to_string())?;
    let plus2 = system.solve(z + 2.0 * h, Some(&t)).map_err(|e| e.to_string())?;
    let minus2 = system.solve(z - 2.0 * h, Some(&t)).map_err(|e| e.to_string())?;
    // fourth-order central difference
    let fd = (minus2.g1 - plus2.g1 + (plus.g1 - minus.g1) * 8.0) / (12.0 * h);
    Ok((fd - dg1).norm() / dg1.norm())
}

fn derivative_identity(cases: u32) -> Result<(), String> {
    let strategy = system_and_point().prop_map(|(s, z)| (s, C::new(z.re, 0.1 + 3.0 * z.im / 3.0)));
    check(cases, strategy, |(system, z)| {
        let defect = derivative_defect(&system, z).map_err(TestCaseError::fail)?;
        prop_assert!(defect < 1e-5, "relative defect {} at {}", defect, z);
        Ok(())
    })
}

/// Small CLT setups: discrete H1, and H2 either discrete or arcsine.
fn clt_setup() -> impl Strategy<Value = (SpectralMeasure, SpectralMeasure, f64)> {
    let h2 = prop_oneof![discrete(3, 0.2, 2.0), Just(SpectralMeasure::Arcsine)];
    (discrete(3, 0.3, 3.0), h2, 0.1f64..0.9)
}

fn poly() -> impl Strategy<Value = Polynomial> {
    prop::collection::vec(-2.0f64..2.0, 2..4).prop_map(|mut c| {
        let last = c.len() - 1;
        if c[last].abs() < 0.1 {
            c[last] = 1.0;
        }
        Polynomial::new(c)
    })
}

fn contours(model: &LssModel, v0: f64, margin: f64, nodes: usize) -> (Contour, Contour) {
    let s = SupportEstimate::from_measures(&model.system.h1, &model.system.h2, model.c()).unwrap();
    // undo the default margin, then apply the requested one
    let w = s.width() / (1.0 + 2.0 * sepspec::lsd::SUPPORT_MARGIN);
    let raw = SupportEstimate { x_l: s.midpoint() - w / 2.0, x_r: s.midpoint() + w / 2.0 };
    let inner = Contour::around(&raw.widen(margin), v0, nodes).unwrap();
    let outer = inner.scaled(sepspec::clt::OUTER_SCALE).unwrap();
    (inner, outer)
}

fn complex_gaussian_mean(cases: u32) -> Result<(), String> {
    check(cases, (clt_setup(), poly()), |((h1, h2, c), f)| {
        let model = LssModel::new(h1, h2, c, 0.0, 0.0).unwrap();
        let (inner, _) = contours(&model, 0.5, 0.05, 16);
        prop_assert_eq!(model.mean(&f, &inner).unwrap().value, 0.0);
        Ok(())
    })
}

fn kappa_linear(cases: u32) -> Result<(), String> {
    check(cases, (clt_setup(), poly(), 0.0f64..1.0), |((h1, h2, c), f, alpha)| {
        let cov = |kappa: f64| {
            let model = LssModel::new(h1.clone(), h2.clone(), c, alpha, kappa).unwrap();
            let (a, b) = contours(&model, 0.5, 0.05, 32);
            model.covariance(&f, &f, &a, &b).unwrap().value
        };
        let (c0, c1, c2) = (cov(0.0), cov(1.0), cov(2.0));
        prop_assert!(((c2 - c0) - 2.0 * (c1 - c0)).abs() < 1e-6 * (1.0 + c0.abs()), "{} {} {}", c0, c1, c2);
        Ok(())
    })
}

fn variance_nonnegative(cases: u32) -> Result<(), String> {
    // fourth moments force kappa >= -1 - alpha^2
    let strategy = (clt_setup(), poly(), 0.0f64..1.0, 0.0f64..1.0).prop_map(|(s, f, alpha, u)| {
        let lo = -1.0 - alpha * alpha;
        (s, f, alpha, lo + u * (2.0 - lo))
    });
    check(cases, strategy, |((h1, h2, c), f, alpha, kappa)| {
        let model = LssModel::new(h1, h2, c, alpha, kappa).unwrap();
        let (a, b) = contours(&model, 0.5, 0.05, 128);
        let m = model.moments(&[&f as &dyn AnalyticFn], &a, &b).unwrap();
        prop_assert!(m.cov[0][0] >= -1e-8, "variance {}", m.cov[0][0]);
        prop_assert!(m.max_imag < 1e-6, "imaginary part {}", m.max_imag);
        Ok(())
    })
}

fn covariance_symmetry(cases: u32) -> Result<(), String> {
    check(cases, (clt_setup(), poly(), poly()), |((h1, h2, c), f, g)| {
        let model = LssModel::new(h1, h2, c, 1.0, 0.0).unwrap();
        let (a, b) = contours(&model, 0.5, 0.05, 64);
        let fg = model.covariance(&f, &g, &a, &b).unwrap().value;
        let gf = model.covariance(&g, &f, &b, &a).unwrap().value;
        prop_assert!((fg - gf).abs() < 1e-6 * (1.0 + fg.abs()), "{} vs {}", fg, gf);
        Ok(())
    })
}

fn contour_invariance(cases: u32) -> Result<(), String> {
    let strategy = (clt_setup(), poly(), 0.3f64..1.0, 0.03f64..0.10);
    check(cases, strategy, |((h1, h2, c), f, v0, margin)| {
        let model = LssModel::new(h1, h2, c, 1.0, 0.0).unwrap();
        // the mean is a single integral and gets the finer contour
        let (m0, _) = contours(&model, 0.5, 0.05, 512);
        let (m1, _) = contours(&model, v0, margin, 512);
        let (a0, b0) = contours(&model, 0.5, 0.05, 160);
        let (a1, b1) = contours(&model, v0, margin, 160);
        let var0 = model.covariance(&f, &f, &a0, &b0).unwrap().value;
        let var1 = model.covariance(&f, &f, &a1, &b1).unwrap().value;
        prop_assert!((var1 - var0).abs() <= 1e-4 * var0.abs() + 1e-10, "variance {} vs {}", var1, var0);
        let mean0 = model.mean(&f, &m0).unwrap().value;
        let mean1 = model.mean(&f, &m1).unwrap().value;
        let tol = 1e-4 * mean0.abs() + 1e-7 * (1.0 + var0.abs().sqrt());
        prop_assert!((mean1 - mean0).abs() <= tol, "mean {} vs {}", mean1, mean0);
        Ok(())
    })
}

fn lambda_nonnegative(cases: u32) -> Result<(), String> {
    let strategy = sized_matrix(6, 12).prop_filter("need n >= 2", |d| d.ncols() >= 2).prop_flat_map(|d| {
        let n = d.ncols();
        (Just(d), 1..n)
    });
    check(cases, strategy, |(data, tau)| {
        let v = lambda_hat(&data, tau).unwrap();
        prop_assert!(v >= 0.0);
        let sigma = lag_autocovariance(&data, tau).unwrap();
        let xi_zero = (&sigma + sigma.transpose()).iter().all(|&x| x == 0.0);
        prop_assert_eq!(v == 0.0, xi_zero);
        Ok(())
    })
}

pub fn trace_form_instance() -> impl Strategy<Value = (RMatrix, RMatrix, usize)> {
    (1usize..=20, 2usize..=20).prop_flat_map(|(p, n)| (matrix(p, p, -2.0, 2.0), matrix(p, n, -3.0, 3.0), 1..n))
}

fn trace_form(cases: u32) -> Result<(), String> {
    check(cases, trace_form_instance(), |(gamma, x, tau)| {
        let direct = lambda_hat(&(&gamma * &x), tau).unwrap();
        let traced = lambda_hat_trace_form(&gamma, &x, tau).unwrap();
        prop_assert!((direct - traced).abs() <= 1e-8 * direct.abs().max(1e-300), "{} vs {}", direct, traced);
        Ok(())
    })
}

fn quartic_homogeneity(cases: u32) -> Result<(), String> {
    let strategy = (sized_matrix(6, 12).prop_filter("n >= 2", |d| d.ncols() >= 2), 0.1f64..10.0);
    check(cases, strategy, |(data, a)| {
        let base = lambda_hat(&data, 1).unwrap();
        let scaled = lambda_hat(&(&data * a), 1).unwrap();
        prop_assert!((scaled - a.powi(4) * base).abs() <= 1e-10 * scaled.abs().max(1e-300));
        Ok(())
    })
}

fn scale_invariance(cases: u32) -> Result<(), String> {
    let strategy = (2usize..10, 20usize..60, any::<u64>(), 0.2f64..5.0, 1usize..4);
    check(cases, strategy, |(p, n, seed, a, q)| {
        let spec = LinearProcessSpec::model1(p).unwrap();
        let data = generate_linear_process(&spec, p, n, seed).unwrap();
        let base = TestConfig::new(q, 0.05, MomentSource::Known { m1: 2.0, m2: 5.0 });
        let scaled_cfg = TestConfig::new(q, 0.05, MomentSource::Known { m1: 2.0 * a * a, m2: 5.0 * a.powi(4) });
        let r0 = run_test(&data, &base).unwrap();
        let r1 = run_test(&(&data * a), &scaled_cfg).unwrap();
        prop_assert_eq!(r0.decision, r1.decision);
        for (x, y) in r0.per_lag.iter().zip(&r1.per_lag) {
            prop_assert!((x.zscore - y.zscore).abs() < 1e-9 * (1.0 + x.zscore.abs()));
        }
        let plug0 = run_test(&data, &TestConfig::new(q, 0.05, MomentSource::PlugIn)).unwrap();
        let plug1 = run_test(&(&data * a), &TestConfig::new(q, 0.05, MomentSource::PlugIn)).unwrap();
        prop_assert!((plug0.per_lag[0].zscore - plug1.per_lag[0].zscore).abs() < 1e-8 * (1.0 + plug0.per_lag[0].zscore.abs()));
        Ok(())
    })
}

fn small_plan(seed: u64, replications: usize, model2: bool) -> SimulationPlan {
    SimulationPlan {
        cells: vec![Cell { p: 4, n: 16, q: 1 }, Cell { p: 6, n: 12, q: 2 }],
        process: if model2 { ProcessTemplate::model2() } else { ProcessTemplate::model1() },
        replications,
        level: 0.05,
        base_seed: seed,
        moments: PlanMoments::Known,
        centering: Centering::FiniteN,
    }
}

fn table_determinism(cases: u32) -> Result<(), String> {
    check(cases, (any::<u64>(), 1usize..20, prop::bool::ANY), |(seed, r, m2)| {
        let plan = small_plan(seed, r, m2);
        prop_assert_eq!(run_plan(&plan).unwrap(), run_plan(&plan).unwrap());
        Ok(())
    })
}

/// Two independent halves of a plan, run under different seeds, give rates
/// within four binomial standard errors of each other.
fn split_halves(cases: u32) -> Result<(), String> {
    check(cases, any::<u64>(), |seed| {
        let half = 200;
        let a = run_plan(&small_plan(seed, half, true)).unwrap();
        let b = run_plan(&small_plan(seed.wrapping_add(1), half, true)).unwrap();
        for (x, y) in a.rows.iter().zip(&b.rows) {
            let pooled = (x.rejection_rate + y.rejection_rate) / 2.0;
            let se = (2.0 * pooled * (1.0 - pooled) / half as f64).sqrt();
            prop_assert!((x.rejection_rate - y.rejection_rate).abs() <= 4.0 * se + 1e-12, "{} vs {}", x.rejection_rate, y.rejection_rate);
        }
        Ok(())
    })
}

fn json_round_trip(cases: u32) -> Result<(), String> {
    check(cases, (any::<u64>(), 2usize..6, 10usize..30, 1usize..3, prop::bool::ANY), |(seed, p, n, q, plug)| {
        let spec = LinearProcessSpec::model2(p).unwrap();
        let data = generate_linear_process(&spec, p, n, seed).unwrap();
        let src = if plug { MomentSource::PlugIn } else { MomentSource::Known { m1: 2.0, m2: 5.0 } };
        let report = run_test(&data, &TestConfig::new(q, 0.05, src)).unwrap();
        let back: sepspec::whitenoise::WhiteNoiseReport = serde_json::from_str(&serde_json::to_string(&report).unwrap()).unwrap();
        prop_assert_eq!(back, report);
        let table = run_plan(&small_plan(seed, 3, plug)).unwrap();
        let back: sepspec::montecarlo::SimulationTable = serde_json::from_str(&serde_json::to_string(&table).unwrap()).unwrap();
        prop_assert_eq!(back, table);
        let system = SpectralSystem::new(SpectralMeasure::PointMass(1.0), SpectralMeasure::Arcsine, 0.5).unwrap();
        let t = system.solve(C::new(0.3, 0.5 + (seed % 7) as f64 / 7.0), None).unwrap();
        let back: sepspec::lsd::StieltjesTriple = serde_json::from_str(&serde_json::to_string(&t).unwrap()).unwrap();
        prop_assert_eq!(back, t);
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const CASES: u32 = 256;

    fn run(name: &str) {
        let suite = suites().into_iter().find(|s| s.name == name).expect("suite exists");
        if let Err(e) = (suite.run)(CASES) {
            panic!("{name}: {e}");
        }
    }

    macro_rules! property_tests {
        ($($fn_name:ident => $suite:literal,)*) => {
            $(
                #[test]
                fn $fn_name() {
                    run($suite);
                }
            )*
        };
    }

    property_tests! {
        psd_sample_covariance => "model: sample covariance is PSD for PSD T2",
        shift_traces => "model: shift matrix traces",
        lag_zero_psd => "model: lag-zero autocovariance is symmetric PSD",
        determinism => "model: generation is deterministic",
        unit_mass => "spectra: moment(H, 0) = 1",
        resolvent_at_zero => "spectra: resolvent at g = 0 gives moments",
        arcsine_converged => "spectra: arcsine quadrature is converged",
        identity_esd => "spectra: ESD of the identity",
        residuals_and_admissibility => "lsd: residuals and admissibility",
        warm_cold => "lsd: warm and cold starts agree",
        g1_small_g2_small => "lsd: g1 -> 0 forces g2 -> 0",
        conjugate_symmetry => "lsd: conjugate symmetry",
        derivative_identity => "lsd: derivative identity",
        complex_gaussian_mean => "clt: mean vanishes when alpha = kappa = 0",
        kappa_linear => "clt: kappa enters the covariance linearly",
        variance_nonnegative => "clt: variance is nonnegative, integrals are real",
        covariance_symmetry => "clt: covariance symmetric under contour swap",
        contour_invariance => "clt: contour invariance",
        lambda_nonnegative => "whitenoise: statistic is nonnegative",
        trace_form => "whitenoise: data and trace forms agree",
        quartic_homogeneity => "whitenoise: quartic homogeneity",
        scale_invariance => "whitenoise: decisions are scale invariant",
        table_determinism => "montecarlo: tables are deterministic",
        split_halves => "montecarlo: replication halves agree",
        json_round_trip => "serde: JSON round trips",
    }

    #[test]
    fn every_suite_is_wired() {
        assert_eq!(suites().len(), 25);
    }
}
