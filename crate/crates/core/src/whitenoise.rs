//! High-dimensional white-noise test based on symmetrized lag autocovariances.
//!
//! For lag `τ`, `Λ̂_τ = ‖Ξ_τ‖_F²` with `Ξ_τ = ½(Σ̂_τ + Σ̂_τ')`. Under the null of
//! white noise `Λ̂_τ − centering` is asymptotically `N(μ, σ²)`, where the three
//! constants depend on `c = p/n`, the first two spectral moments of the
//! population covariance and the entry law.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::model::{lag_autocovariance, shift_matrix, RMatrix};

/// Where the spectral moments `m1 = ∫x dH1`, `m2 = ∫x² dH1` come from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "source")]
pub enum MomentSource {
    Known { m1: f64, m2: f64 },
    PlugIn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Centering {
    #[default]
    FiniteN,
    Asymptotic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    /// Largest lag tested; lags `1..=q` are combined by Bonferroni.
    pub q: usize,
    pub level: f64,
    pub moment_source: MomentSource,
    pub centering: Centering,
    pub alpha_x: f64,
    pub kappa_x: f64,
}

impl TestConfig {
    /// Real Gaussian entries, finite-n centering.
    pub fn new(q: usize, level: f64, moment_source: MomentSource) -> Self {
        Self { q, level, moment_source, centering: Centering::FiniteN, alpha_x: 1.0, kappa_x: 0.0 }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.q == 0 {
            return Err(Error::Config("q must be at least 1".into()));
        }
        if self.q >= n {
            return Err(Error::InvalidLag { tau: self.q, n });
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!("level {} must lie in (0, 1)", self.level)));
        }
        if let MomentSource::Known { m1, m2 } = self.moment_source {
            if !(m1.is_finite() && m2 > 0.0 && m2.is_finite()) {
                return Err(Error::Config(format!("known moments m1 = {m1}, m2 = {m2} are invalid")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NullParameters {
    pub centering: f64,
    pub mu: f64,
    pub sigma2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LagResult {
    pub tau: usize,
    pub lambda_hat: f64,
    pub centering: f64,
    pub mu: f64,
    pub sigma2: f64,
    pub zscore: f64,
    pub pvalue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhiteNoiseReport {
    pub p: usize,
    pub n: usize,
    pub per_lag: Vec<LagResult>,
    pub decision: bool,
    pub level: f64,
    /// Per-lag threshold `level / q`.
    pub threshold: f64,
    pub m1: f64,
    pub m2: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl WhiteNoiseReport {
    pub fn min_pvalue(&self) -> f64 {
        self.per_lag.iter().map(|l| l.pvalue).fold(1.0, f64::min)
    }
}

/// `Λ̂_τ = Σ_jk Ξ_jk²`.
pub fn lambda_hat(data: &RMatrix, tau: usize) -> Result<f64> {
    if tau == 0 {
        return Err(Error::InvalidLag { tau, n: data.ncols() });
    }
    let sigma = lag_autocovariance(data, tau)?;
    let xi = (&sigma + sigma.transpose()) * 0.5;
    Ok(xi.norm_squared())
}

/// `n⁻² tr(A A*)` with `A = T1 X T2 X* T1*` and `T2` the symmetrized shift.
/// Equals [`lambda_hat`] of `T1 X`; kept as an independent route to the
/// statistic.
pub fn lambda_hat_trace_form(t1: &RMatrix, x: &RMatrix, tau: usize) -> Result<f64> {
    if t1.ncols() != x.nrows() {
        return Err(Error::Dimension(format!("T1 is {}x{} but X has {} rows", t1.nrows(), t1.ncols(), x.nrows())));
    }
    let n = x.ncols();
    let t2 = shift_matrix(n, tau)?;
    let y = t1 * x;
    let a = &y * t2 * y.transpose();
    Ok((&a * a.transpose()).trace() / (n as f64 * n as f64))
}

/// Null centering, mean and variance of `Λ̂_τ`.
#[allow(clippy::too_many_arguments)]
pub fn null_parameters(
    p: usize,
    n: usize,
    tau: usize,
    m1: f64,
    m2: f64,
    alpha_x: f64,
    kappa_x: f64,
    centering: Centering,
) -> Result<NullParameters> {
    if tau >= n {
        return Err(Error::InvalidLag { tau, n });
    }
    if !(m2 > 0.0) {
        return Err(Error::Parameter(format!("m2 = {m2} must be positive")));
    }
    let (pf, nf, tf) = (p as f64, n as f64, tau as f64);
    let c = pf / nf;
    let m1_sq = m1 * m1;
    let centering = match centering {
        Centering::FiniteN => (nf - tf) / (2.0 * nf) * pf * c * m1_sq,
        Centering::Asymptotic => (pf * c / 2.0 - tf * c * c / 2.0) * m1_sq,
    };
    let mu = c * (alpha_x + kappa_x) / 2.0 * m2;
    let sigma2 = c * c * (1.0 + alpha_x * alpha_x) / 2.0 * m2 * m2 + 1.5 * c.powi(3) * (kappa_x + 2.0) * m1_sq * m2;
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::Parameter(format!("null variance {sigma2} is not positive")));
    }
    Ok(NullParameters { centering, mu, sigma2 })
}

/// Estimates `(m1, m2)` from the lag-zero sample covariance, with the
/// Gaussian bias correction for `m2`.
pub fn plug_in_moments(data: &RMatrix) -> Result<(f64, f64)> {
    let (p, n) = data.shape();
    if n < 2 || p == 0 {
        return Err(Error::Dimension(format!("plug-in moments need n >= 2, got {p}x{n}")));
    }
    let nf = n as f64;
    // tr(Σ̂²) through whichever Gram matrix is smaller
    let gram: DMatrix<f64> = if p <= n { data * data.transpose() } else { data.transpose() * data };
    let tr = gram.trace() / nf;
    let tr_sq = gram.norm_squared() / (nf * nf);
    let m1 = tr / p as f64;
    let m2 = (tr_sq - tr * tr / nf) * nf * nf / ((nf - 1.0) * (nf + 2.0)) / p as f64;
    Ok((m1, m2))
}

/// Upper-tail standard normal probability.
pub fn upper_pvalue(z: f64) -> f64 {
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    normal.sf(z).clamp(0.0, 1.0)
}

pub fn run_test(data: &RMatrix, cfg: &TestConfig) -> Result<WhiteNoiseReport> {
    let (p, n) = data.shape();
    if p == 0 {
        return Err(Error::Dimension("data has no rows".into()));
    }
    cfg.validate(n)?;
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Dimension("data contains non-finite values".into()));
    }
    let mut warnings = Vec::new();
    let (m1, m2) = match cfg.moment_source {
        MomentSource::Known { m1, m2 } => (m1, m2),
        MomentSource::PlugIn => {
            if n <= p + 2 {
                warnings.push(format!("plug-in moments are ill-conditioned with n = {n} <= p + 2 = {}", p + 2));
            }
            plug_in_moments(data)?
        }
    };
    if !(m2 > 0.0) {
        return Err(Error::Parameter(format!("second spectral moment estimate {m2} is not positive")));
    }

    let threshold = cfg.level / cfg.q as f64;
    let mut per_lag = Vec::with_capacity(cfg.q);
    for tau in 1..=cfg.q {
        let lambda_hat = lambda_hat(data, tau)?;
        let np = null_parameters(p, n, tau, m1, m2, cfg.alpha_x, cfg.kappa_x, cfg.centering)?;
        let zscore = (lambda_hat - np.centering - np.mu) / np.sigma2.sqrt();
        per_lag.push(LagResult {
            tau,
            lambda_hat,
            centering: np.centering,
            mu: np.mu,
            sigma2: np.sigma2,
            zscore,
            pvalue: upper_pvalue(zscore),
        });
    }
    let decision = per_lag.iter().any(|l| l.pvalue < threshold);
    Ok(WhiteNoiseReport { p, n, per_lag, decision, level: cfg.level, threshold, m1, m2, warnings })
}
