//! Seeded replication engine for size/power tables and for Monte Carlo
//! estimates of linear spectral statistic moments.
//!
//! Every replication draws from its own ChaCha stream seeded by
//! `derive_seed(base_seed, [cell, replication])`, so results do not depend
//! on how rayon schedules the work.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clt::{Contour, LssModel, DEFAULT_V0, NODES_PER_SIDE};
use crate::error::{Error, Result};
use crate::func::{AnalyticFn, Polynomial};
use crate::model::{alternating_diagonal, generate_linear_process, sample_covariance, EntryLaw, LinearProcessSpec, RMatrix, SeparableModel};
use crate::rng::derive_seed;
use crate::spectra::{esd, esd_real, SpectralMeasure};
use crate::whitenoise::{run_test, Centering, MomentSource, TestConfig};

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// Runs `replications` independent draws of `f`, the `r`-th seeded with
/// `derive_seed(base_seed, path ++ [r])`. Output order follows `r`.
pub fn replicate<T, F>(replications: usize, base_seed: u64, path: &[u64], f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    (0..replications)
        .into_par_iter()
        .map(|r| {
            let mut full = path.to_vec();
            full.push(r as u64);
            f(derive_seed(base_seed, &full))
        })
        .collect()
}

/// Wilson score interval at 95%.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let phat = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (phat + z2 / (2.0 * n)) / denom;
    let half = Z95 * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub p: usize,
    pub n: usize,
    pub q: usize,
}

/// A linear process family indexed by `p`: the diagonal of `Σ0` is `pattern`
/// repeated to length `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessTemplate {
    pub sigma_pattern: Vec<f64>,
    pub ma_coefficients: Vec<f64>,
    pub law: EntryLaw,
}

impl ProcessTemplate {
    /// Model 1: `Σ0 = diag(1, 3, 1, 3, …)`, white noise.
    pub fn model1() -> Self {
        Self { sigma_pattern: alternating_diagonal(2), ma_coefficients: vec![1.0], law: EntryLaw::real_gaussian() }
    }

    /// Model 2: Model 1 filtered by `1 + 0.3L + 0.1L²`.
    pub fn model2() -> Self {
        Self { ma_coefficients: vec![1.0, 0.3, 0.1], ..Self::model1() }
    }

    pub fn sigma_diagonal(&self, p: usize) -> Vec<f64> {
        self.sigma_pattern.iter().copied().cycle().take(p).collect()
    }

    pub fn spec(&self, p: usize) -> Result<LinearProcessSpec> {
        if self.sigma_pattern.is_empty() || self.sigma_pattern.iter().any(|&s| !(s >= 0.0) || !s.is_finite()) {
            return Err(Error::Config("sigma pattern must be non-empty and nonnegative".into()));
        }
        let diag = nalgebra::DVector::from_vec(self.sigma_diagonal(p));
        LinearProcessSpec::new(RMatrix::from_diagonal(&diag.map(f64::sqrt)), self.ma_coefficients.clone(), self.law)
    }

    /// `(∫x dH1, ∫x² dH1)` of `Σ0` at dimension `p`.
    pub fn sigma_moments(&self, p: usize) -> (f64, f64) {
        let d = self.sigma_diagonal(p);
        let pf = p as f64;
        (d.iter().sum::<f64>() / pf, d.iter().map(|x| x * x).sum::<f64>() / pf)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PlanMoments {
    /// Moments of the template's `Σ0`.
    #[default]
    Known,
    PlugIn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationPlan {
    pub cells: Vec<Cell>,
    pub process: ProcessTemplate,
    pub replications: usize,
    pub level: f64,
    pub base_seed: u64,
    #[serde(default)]
    pub moments: PlanMoments,
    #[serde(default)]
    pub centering: Centering,
}

impl SimulationPlan {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!("level {} must lie in (0, 1)", self.level)));
        }
        if self.cells.is_empty() {
            return Err(Error::Config("plan has no cells".into()));
        }
        for c in &self.cells {
            if c.p == 0 || c.q == 0 || c.q >= c.n {
                return Err(Error::Config(format!("invalid cell (p, n, q) = ({}, {}, {})", c.p, c.n, c.q)));
            }
        }
        self.process.spec(1)?;
        Ok(())
    }

    fn test_config(&self, p: usize, q: usize) -> TestConfig {
        let moment_source = match self.moments {
            PlanMoments::Known => {
                let (m1, m2) = self.process.sigma_moments(p);
                MomentSource::Known { m1, m2 }
            }
            PlanMoments::PlugIn => MomentSource::PlugIn,
        };
        TestConfig {
            q,
            level: self.level,
            moment_source,
            centering: self.centering,
            alpha_x: self.process.law.alpha_x,
            kappa_x: self.process.law.kappa_x,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRow {
    pub p: usize,
    pub n: usize,
    pub q: usize,
    pub rejections: usize,
    pub replications: usize,
    pub rejection_rate: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationTable {
    pub rows: Vec<SimulationRow>,
}

/// Rejection decision of one replication of one cell.
fn replicate_decision(plan: &SimulationPlan, spec: &LinearProcessSpec, cell: Cell, seed: u64) -> Result<bool> {
    let data = generate_linear_process(spec, cell.p, cell.n, seed)?;
    Ok(run_test(&data, &plan.test_config(cell.p, cell.q))?.decision)
}

pub fn run_cell(plan: &SimulationPlan, index: usize) -> SimulationRow {
    let cell = plan.cells[index];
    let outcome = plan.process.spec(cell.p).and_then(|spec| {
        replicate(plan.replications, plan.base_seed, &[index as u64], |seed| {
            replicate_decision(plan, &spec, cell, seed)
        })
    });
    match outcome {
        Ok(decisions) => {
            let rejections = decisions.iter().filter(|&&d| d).count();
            let (lo, hi) = wilson_interval(rejections, decisions.len());
            SimulationRow {
                p: cell.p,
                n: cell.n,
                q: cell.q,
                rejections,
                replications: decisions.len(),
                rejection_rate: rejections as f64 / decisions.len() as f64,
                wilson_lo: lo,
                wilson_hi: hi,
                error: None,
            }
        }
        Err(e) => SimulationRow {
            p: cell.p,
            n: cell.n,
            q: cell.q,
            rejections: 0,
            replications: 0,
            rejection_rate: 0.0,
            wilson_lo: 0.0,
            wilson_hi: 1.0,
            error: Some(e.to_string()),
        },
    }
}

pub fn run_plan(plan: &SimulationPlan) -> Result<SimulationTable> {
    plan.validate()?;
    Ok(SimulationTable { rows: (0..plan.cells.len()).map(|i| run_cell(plan, i)).collect() })
}

/// Lag-`tau` z-scores of the white-noise statistic over `replications` draws.
pub fn sample_zscores(
    process: &ProcessTemplate,
    p: usize,
    n: usize,
    tau: usize,
    moment_source: MomentSource,
    replications: usize,
    base_seed: u64,
) -> Result<Vec<f64>> {
    let spec = process.spec(p)?;
    let cfg = TestConfig {
        q: tau,
        level: 0.05,
        moment_source,
        centering: Centering::FiniteN,
        alpha_x: process.law.alpha_x,
        kappa_x: process.law.kappa_x,
    };
    replicate(replications, base_seed, &[], |seed| {
        let data = generate_linear_process(&spec, p, n, seed)?;
        Ok(run_test(&data, &cfg)?.per_lag[tau - 1].zscore)
    })
}

/// Sample mean and unbiased variance.
pub fn mean_and_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LssEstimate {
    pub mean_hat: f64,
    pub var_hat: f64,
    /// Standard error of `mean_hat`.
    pub se_mean: f64,
    /// `p ∫ f dF^{c_n, H1n, H2n}` subtracted from every replication.
    pub centering: f64,
    pub replications: usize,
}

/// `Σ_j f(λ_j)` for a Hermitian matrix given its trace and squared
/// Frobenius norm, or its eigenvalues when `f` has degree above two.
fn real_lss(f: &Polynomial, s: &RMatrix) -> Result<f64> {
    let k = f.coefficients();
    if f.degree() <= 2 {
        let get = |i: usize| k.get(i).copied().unwrap_or(0.0);
        return Ok(get(0) * s.nrows() as f64 + get(1) * s.trace() + get(2) * s.norm_squared());
    }
    Ok(esd_real(s)?.eigenvalues.iter().map(|&l| f.eval_real(l)).sum())
}

fn complex_lss(f: &Polynomial, s: &crate::model::CMatrix) -> Result<f64> {
    let k = f.coefficients();
    if f.degree() <= 2 {
        let get = |i: usize| k.get(i).copied().unwrap_or(0.0);
        let frob: f64 = s.iter().map(|v| v.norm_sqr()).sum();
        return Ok(get(0) * s.nrows() as f64 + get(1) * s.trace().re + get(2) * frob);
    }
    Ok(esd(s)?.eigenvalues.iter().map(|&l| f.eval_real(l)).sum())
}

/// Monte Carlo mean and variance of `p [∫ f dF^{S_n} − ∫ f dF^{c, H1, H2}]`.
pub fn empirical_lss_moments(
    model: &SeparableModel,
    f: &Polynomial,
    replications: usize,
    h1: &SpectralMeasure,
    h2: &SpectralMeasure,
    c: f64,
    base_seed: u64,
) -> Result<LssEstimate> {
    if replications < 2 {
        return Err(Error::Parameter("need at least two replications".into()));
    }
    let p = model.dims.p as f64;
    let lss = LssModel::new(h1.clone(), h2.clone(), c, model.law.alpha_x, model.law.kappa_x)?;
    let contour = Contour::around(&lss.support()?, DEFAULT_V0, NODES_PER_SIDE)?;
    let centering = p * lss.lsd_integral(f as &dyn AnalyticFn, &contour)?.value;

    let values = match model.real_operator() {
        Some(op) => replicate(replications, base_seed, &[], |seed| Ok(real_lss(f, &op.sample_covariance(seed)?)? - centering))?,
        None => replicate(replications, base_seed, &[], |seed| {
            let x = model.sample_entries(seed)?;
            Ok(complex_lss(f, &sample_covariance(model, &x)?)? - centering)
        })?,
    };
    let (mean_hat, var_hat) = mean_and_variance(&values);
    Ok(LssEstimate {
        mean_hat,
        var_hat,
        se_mean: (var_hat / replications as f64).sqrt(),
        centering,
        replications,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_brackets_rate() {
        let (lo, hi) = wilson_interval(50, 1000);
        assert!(lo < 0.05 && 0.05 < hi);
        assert!((lo - 0.0381).abs() < 1e-3 && (hi - 0.0653).abs() < 1e-3);
        let (lo, hi) = wilson_interval(0, 10);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.2);
        assert_eq!(wilson_interval(1, 1).1, 1.0);
    }

    #[test]
    fn replicate_is_ordered_and_deterministic() {
        let a = replicate(64, 7, &[3], Ok).unwrap();
        let b = replicate(64, 7, &[3], Ok).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[5], derive_seed(7, &[3, 5]));
    }

    #[test]
    fn variance_of_two() {
        let (m, v) = mean_and_variance(&[1.0, 4.0]);
        assert_eq!(m, 2.5);
        assert_eq!(v, 0.5 * 9.0);
    }

    #[test]
    fn template_moments() {
        let t = ProcessTemplate::model1();
        assert_eq!(t.sigma_moments(100), (2.0, 5.0));
        assert_eq!(t.sigma_diagonal(3), vec![1.0, 3.0, 1.0]);
    }

    #[test]
    fn single_replication_rates() {
        let plan = SimulationPlan {
            cells: vec![Cell { p: 5, n: 20, q: 1 }, Cell { p: 4, n: 12, q: 3 }],
            process: ProcessTemplate::model2(),
            replications: 1,
            level: 0.05,
            base_seed: 1,
            moments: PlanMoments::Known,
            centering: Centering::FiniteN,
        };
        let table = run_plan(&plan).unwrap();
        for row in &table.rows {
            assert!(row.error.is_none());
            assert!(row.rejection_rate == 0.0 || row.rejection_rate == 1.0);
        }
        assert_eq!(run_plan(&plan).unwrap(), table);
    }

    #[test]
    fn invalid_cells_are_rejected() {
        let plan = SimulationPlan {
            cells: vec![Cell { p: 5, n: 3, q: 3 }],
            process: ProcessTemplate::model1(),
            replications: 10,
            level: 0.05,
            base_seed: 1,
            moments: PlanMoments::Known,
            centering: Centering::FiniteN,
        };
        assert!(run_plan(&plan).is_err());
    }

    #[test]
    fn lss_of_small_matrices() {
        let s = RMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        // eigenvalues 1 and 3
        let f: Polynomial = "1 + x^2".parse().unwrap();
        assert!((real_lss(&f, &s).unwrap() - 12.0).abs() < 1e-12);
        let cubic = Polynomial::monomial(3);
        assert!((real_lss(&cubic, &s).unwrap() - 28.0).abs() < 1e-10);
        let sc = crate::model::to_complex(&s);
        assert!((complex_lss(&f, &sc).unwrap() - 12.0).abs() < 1e-12);
        assert!((complex_lss(&cubic, &sc).unwrap() - 28.0).abs() < 1e-10);
    }
}
