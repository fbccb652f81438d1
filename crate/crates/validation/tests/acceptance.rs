//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any
//! blocking criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sepspec::clt::{clt_covariance, clt_mean, LssModel};
use sepspec::func::Polynomial;
use sepspec::lsd::{SpectralSystem, SupportEstimate};
use sepspec::model::*;
use sepspec::montecarlo::{mean_and_variance, run_plan, sample_zscores, Cell, ProcessTemplate, SimulationPlan};
use sepspec::spectra::{esd, kolmogorov_distance, SpectralMeasure};
use sepspec::whitenoise::{lambda_hat, lambda_hat_trace_form, Centering, MomentSource};

type C = Complex64;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn model1_h1() -> SpectralMeasure {
    SpectralMeasure::discrete(vec![(1.0, 0.5), (3.0, 0.5)]).unwrap()
}

fn rel(x: f64, target: f64) -> f64 {
    (x - target).abs() / target.abs()
}

/// Root of `c z m² + (z + c − 1) m + 1 = 0` in the upper half plane.
fn marchenko_pastur_stieltjes(c: f64, z: C) -> C {
    let a = z * c;
    let b = z + c - 1.0;
    let disc = (b * b - a * 4.0).sqrt();
    let r1 = (-b + disc) / (a * 2.0);
    let r2 = (-b - disc) / (a * 2.0);
    if r1.im > r2.im { r1 } else { r2 }
}

fn c1_marchenko_pastur() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for c in [0.25, 0.5, 1.0, 2.0] {
        let system = SpectralSystem::new(SpectralMeasure::PointMass(1.0), SpectralMeasure::PointMass(1.0), c).unwrap();
        let hi = (1.0 + c.sqrt()).powi(2) + 0.5;
        for _ in 0..25 {
            let z = C::new(rng.random_range(-0.5..hi), 10f64.powf(rng.random_range(-3.0..0.0)));
            match system.solve(z, None) {
                Ok(t) => worst = worst.max((t.m - marchenko_pastur_stieltjes(c, z)).norm()),
                Err(e) => failures.push(format!("c = {c}, z = {z}: {e}")),
            }
        }
    }
    outcome(failures.is_empty() && worst < 1e-8, format!("100 probes, max |m − m_MP| = {worst:.2e}{}", fmt_failures(&failures)))
}

fn fmt_failures(failures: &[String]) -> String {
    if failures.is_empty() {
        String::new()
    } else {
        format!("; {} solver failures, first: {}", failures.len(), failures[0])
    }
}

fn random_discrete(rng: &mut ChaCha8Rng) -> SpectralMeasure {
    let k = rng.random_range(1..=5);
    let atoms: Vec<(f64, f64)> = (0..k).map(|_| (rng.random_range(0.1..5.0), rng.random_range(0.1..1.0))).collect();
    let total: f64 = atoms.iter().map(|a| a.1).sum();
    SpectralMeasure::discrete(atoms.into_iter().map(|(x, w)| (x, w / total)).collect()).unwrap()
}

fn c2_system_residuals() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst, mut points) = (0.0f64, 0);
    let mut failures = Vec::new();
    for _ in 0..50 {
        let (h1, h2) = (random_discrete(&mut rng), random_discrete(&mut rng));
        let c = rng.random_range(0.05..4.0);
        let support = SupportEstimate::from_measures(&h1, &h2, c).unwrap().widen(0.2);
        let system = SpectralSystem::new(h1, h2, c).unwrap();
        for _ in 0..20 {
            let z = C::new(rng.random_range(support.x_l..support.x_r), 10f64.powf(rng.random_range(-4.0..0.5)));
            match system.solve(z, None) {
                Ok(t) => {
                    points += 1;
                    worst = worst.max(t.residual);
                    if let Err(e) = t.admissible() {
                        failures.push(format!("z = {z}: outside U ({e})"));
                    }
                }
                Err(e) => failures.push(format!("z = {z}: {e}")),
            }
        }
    }
    outcome(failures.is_empty() && worst < 1e-10, format!("50 instances, {points} points, max residual {worst:.2e}{}", fmt_failures(&failures)))
}

fn c3_clt_closed_form() -> Outcome {
    let (n, c) = (600, 0.5);
    let f = Polynomial::new(vec![0.0, 0.0, 1.0]);
    let h2n = SpectralMeasure::from_eigenvalues(&shift_eigenvalues(n, 1).unwrap()).unwrap();
    let model = LssModel::new(model1_h1(), h2n.clone(), c, 1.0, 0.0).unwrap();
    let (inner, outer) = model.default_contours().unwrap();
    let mean = clt_mean(&f, &model1_h1(), &h2n, c, 1.0, 0.0, &inner).unwrap().value;
    let var = clt_covariance(&f, &f, &model1_h1(), &h2n, c, 1.0, 0.0, &inner, &outer).unwrap().value;
    let (em, ev) = (rel(mean, 1.25), rel(var, 13.75));

    // diagnostics: the arcsine limit and the targets with ∫y² dH2n = (n−1)/(2n)
    let limit = LssModel::new(model1_h1(), SpectralMeasure::Arcsine, c, 1.0, 0.0).unwrap();
    let (a, b) = limit.default_contours().unwrap();
    let limit_mean = limit.mean(&f, &a).unwrap().value;
    let limit_var = limit.covariance(&f, &f, &a, &b).unwrap().value;
    let adjusted_mean = 1.25 * (n - 1) as f64 / n as f64;
    let detail = format!(
        "n = {n}: mu = {mean:.7} (rel {em:.1e}), sigma2 = {var:.6} (rel {ev:.1e}), tolerance 1e-3; \
         arcsine limit: mu = {limit_mean:.9}, sigma2 = {limit_var:.7}; finite-n mu target 1.25(n-1)/n = {adjusted_mean:.7} (rel {:.1e})",
        rel(mean, adjusted_mean)
    );
    outcome(em < 1e-3 && ev < 1e-3, detail)
}

fn c4_esd_to_lsd() -> Outcome {
    let (p, n) = (400, 800);
    let model = SeparableModel::white_noise(&alternating_diagonal(p), n, 1, EntryLaw::real_gaussian()).unwrap();
    let x = model.sample_entries(4).unwrap();
    let spectrum = esd(&sample_covariance(&model, &x).unwrap()).unwrap();
    let system = SpectralSystem::new(model1_h1(), SpectralMeasure::Arcsine, p as f64 / n as f64).unwrap();
    let support = SupportEstimate::from_measures(&system.h1, &system.h2, system.c).unwrap();
    let points = 4001;
    let grid: Vec<f64> = (0..points).map(|i| support.x_l + support.width() * i as f64 / (points - 1) as f64).collect();
    let cdf = match system.cdf(&grid, 1e-5) {
        Ok(v) => v,
        Err(e) => return outcome(false, format!("LSD cdf failed: {e}")),
    };
    let h = grid[1] - grid[0];
    let interp = |x: f64| {
        if x <= grid[0] {
            return 0.0;
        }
        let k = (((x - grid[0]) / h) as usize).min(points - 2);
        let t = (x - grid[k]) / h;
        cdf[k].1 + t.min(1.0) * (cdf[k + 1].1 - cdf[k].1)
    };
    let ks = kolmogorov_distance(&spectrum, interp);
    outcome(ks < 0.05, format!("KS = {ks:.4} (LSD mass {:.4})", cdf.last().unwrap().1))
}

fn table_plan(cells: &[(usize, usize, usize)], process: ProcessTemplate, replications: usize, seed: u64) -> SimulationPlan {
    SimulationPlan {
        cells: cells.iter().map(|&(p, n, q)| Cell { p, n, q }).collect(),
        process,
        replications,
        level: 0.05,
        base_seed: seed,
        moments: Default::default(),
        centering: Centering::FiniteN,
    }
}

/// Runs a plan and compares each cell to `(expected rate, tolerance)`.
fn compare_table(plan: &SimulationPlan, targets: &[(f64, f64)], floor_for_one: bool) -> Outcome {
    let table = match run_plan(plan) {
        Ok(t) => t,
        Err(e) => return outcome(false, e.to_string()),
    };
    let mut pass = true;
    let mut parts = Vec::new();
    for (row, &(expected, tol)) in table.rows.iter().zip(targets) {
        let mut ok = row.error.is_none() && (row.rejection_rate - expected).abs() <= tol;
        if floor_for_one && expected == 1.0 {
            ok &= row.rejection_rate >= 0.99;
        }
        pass &= ok;
        parts.push(format!("({},{},{}) {:.3} vs {:.3}{}", row.p, row.n, row.q, row.rejection_rate, expected, if ok { "" } else { " !" }));
    }
    outcome(pass, parts.join(", "))
}

fn binomial_tolerance(rate: f64, replications: usize) -> f64 {
    3.0 * (rate * (1.0 - rate) / replications as f64).sqrt()
}

fn c5_table1() -> Outcome {
    let cells = [(100, 200, 1), (300, 600, 1), (200, 1000, 1), (500, 250, 1)];
    let expected = [0.054, 0.050, 0.055, 0.047];
    let targets: Vec<(f64, f64)> = expected.iter().map(|&r| (r, binomial_tolerance(r, 1000))).collect();
    compare_table(&table_plan(&cells, ProcessTemplate::model1(), 1000, 20240101), &targets, false)
}

fn c6_table2() -> Outcome {
    let cells = [(20, 40, 1), (5, 50, 1), (50, 100, 1)];
    let targets = [(0.946, 0.05), (0.857, 0.05), (1.0, 0.05)];
    compare_table(&table_plan(&cells, ProcessTemplate::model2(), 500, 20240102), &targets, true)
}

fn c7_statistic_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (p, n) = (rng.random_range(1..=20), rng.random_range(2..=20));
        let tau = rng.random_range(1..n);
        let gamma = RMatrix::from_fn(p, p, |_, _| rng.random_range(-2.0..2.0));
        let x = RMatrix::from_fn(p, n, |_, _| rng.random_range(-3.0..3.0));
        let direct = lambda_hat(&(&gamma * &x), tau).unwrap();
        let traced = lambda_hat_trace_form(&gamma, &x, tau).unwrap();
        worst = worst.max((direct - traced).abs() / direct.abs().max(1e-300));
    }
    outcome(worst < 1e-8, format!("100 instances, max relative gap {worst:.2e}"))
}

fn c8_zscore_normality() -> Outcome {
    let z = match sample_zscores(&ProcessTemplate::model1(), 100, 200, 1, MomentSource::Known { m1: 2.0, m2: 5.0 }, 2000, 8) {
        Ok(z) => z,
        Err(e) => return outcome(false, e.to_string()),
    };
    let (mean, var) = mean_and_variance(&z);
    let mut sorted = z.clone();
    sorted.sort_by(f64::total_cmp);
    // linear interpolation between order statistics
    let pos = 0.95 * (sorted.len() - 1) as f64;
    let k = pos.floor() as usize;
    let q95 = sorted[k] + (pos - k as f64) * (sorted[k + 1] - sorted[k]);
    let pass = mean.abs() <= 0.1 && (0.85..=1.15).contains(&var) && (q95 - 1.645).abs() <= 0.15;
    outcome(pass, format!("mean {mean:.4}, variance {var:.4}, 95th percentile {q95:.4}"))
}

fn c9_derivative_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let systems = [
        SpectralSystem::new(SpectralMeasure::PointMass(1.0), SpectralMeasure::PointMass(1.0), 0.5).unwrap(),
        SpectralSystem::new(model1_h1(), SpectralMeasure::Arcsine, 0.5).unwrap(),
        SpectralSystem::new(random_discrete(&mut rng), random_discrete(&mut rng), 1.7).unwrap(),
        SpectralSystem::new(random_discrete(&mut rng), SpectralMeasure::PointMass(2.0), 0.3).unwrap(),
    ];
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for system in &systems {
        let support = SupportEstimate::from_measures(&system.h1, &system.h2, system.c).unwrap();
        for _ in 0..5 {
            let z = C::new(rng.random_range(support.x_l..support.x_r), rng.random_range(0.1..2.0));
            match sepspec_validation::derivative_defect(system, z) {
                Ok(d) => worst = worst.max(d),
                Err(e) => failures.push(format!("z = {z}: {e}")),
            }
        }
    }
    outcome(failures.is_empty() && worst < 1e-5, format!("20 probes, max relative defect {worst:.2e}{}", fmt_failures(&failures)))
}

fn c10_property_suites() -> Outcome {
    let mut failed = Vec::new();
    for suite in sepspec_validation::suites() {
        let start = Instant::now();
        let result = (suite.run)(200);
        println!("    {} {} ({:.1}s)", if result.is_ok() { "ok  " } else { "FAIL" }, suite.name, start.elapsed().as_secs_f64());
        if let Err(e) = result {
            failed.push(format!("{}: {}", suite.name, e.lines().next().unwrap_or("")));
        }
    }

    // q = 3 cells under a widened tolerance; reported, not blocking
    let size = compare_table(
        &table_plan(&[(100, 200, 3), (300, 600, 3), (200, 1000, 3), (500, 250, 3)], ProcessTemplate::model1(), 1000, 20240101),
        &[(0.061, 0.05), (0.056, 0.05), (0.056, 0.05), (0.045, 0.05)],
        false,
    );
    let power = compare_table(
        &table_plan(&[(20, 40, 3), (5, 50, 3)], ProcessTemplate::model2(), 500, 20240102),
        &[(0.908, 0.05), (0.741, 0.05)],
        false,
    );
    for (label, o) in [("size q = 3", &size), ("power q = 3", &power)] {
        println!("    {} {label}: {} (non-blocking)", if o.pass { "ok  " } else { "WARN" }, o.detail);
    }

    let count = sepspec_validation::suites().len();
    outcome(failed.is_empty(), format!("{count} suites at 200 cases, {} failed{}", failed.len(), fmt_failures(&failed)))
}

fn main() -> ExitCode {
    // `cargo test -- --list` and filtered runs expect no work from this target
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }

    let criteria = [
        Criterion { id: 1, name: "Marchenko–Pastur oracle", budget: Duration::from_secs(10), run: c1_marchenko_pastur },
        Criterion { id: 2, name: "system residuals", budget: Duration::from_secs(30), run: c2_system_residuals },
        Criterion { id: 3, name: "closed-form CLT cross-check", budget: Duration::from_secs(120), run: c3_clt_closed_form },
        Criterion { id: 4, name: "ESD to LSD convergence", budget: Duration::from_secs(60), run: c4_esd_to_lsd },
        Criterion { id: 5, name: "Table 1 size regression", budget: Duration::from_secs(1200), run: c5_table1 },
        Criterion { id: 6, name: "Table 2 power regression", budget: Duration::from_secs(600), run: c6_table2 },
        Criterion { id: 7, name: "statistic equivalence", budget: Duration::from_secs(5), run: c7_statistic_equivalence },
        Criterion { id: 8, name: "normality of z-scores", budget: Duration::from_secs(600), run: c8_zscore_normality },
        Criterion { id: 9, name: "derivative identity", budget: Duration::from_secs(10), run: c9_derivative_identity },
        Criterion { id: 10, name: "property suites", budget: Duration::from_secs(3600), run: c10_property_suites },
    ];

    let filter: Vec<u32> = args.iter().filter_map(|a| a.parse().ok()).collect();
    let mut failures = 0;
    for c in criteria.iter().filter(|c| filter.is_empty() || filter.contains(&c.id)) {
        let start = Instant::now();
        let result = (c.run)();
        let elapsed = start.elapsed();
        let status = if result.pass { "PASS" } else { "FAIL" };
        let over = if elapsed > c.budget { format!(" [over {}s budget]", c.budget.as_secs()) } else { String::new() };
        println!("criterion {:>2} {status}: {} ({:.1}s{over}) {}", c.id, c.name, elapsed.as_secs_f64(), result.detail);
        failures += usize::from(!result.pass);
    }
    println!("acceptance: {failures} criteria failed");
    if failures == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
