//! TOML model and simulation-plan files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sepspec::model::{shift_matrix, EntryLaw, LawKind, RMatrix};
use sepspec::montecarlo::{Cell, PlanMoments, ProcessTemplate, SimulationPlan};
use sepspec::spectra::SpectralMeasure;
use sepspec::whitenoise::Centering;

use crate::error::CliError;
use crate::input::read_matrix;

/// One of the factors `T1`, `T2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FactorSpec {
    Identity,
    /// Diagonal entries, repeated to the required size.
    Diagonal { values: Vec<f64> },
    Shift { tau: usize },
    /// Dense matrix stored as CSV, relative to the config file.
    File { path: PathBuf },
    /// The limiting arcsine spectrum of the shift matrices (T2 only; no
    /// finite matrix, so only `lsd` and `clt-params` accept it).
    Arcsine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimensionsConfig {
    pub p: usize,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawConfig {
    pub kind: LawKind,
    #[serde(default)]
    pub alpha_x: Option<f64>,
    #[serde(default)]
    pub kappa_x: Option<f64>,
}

impl Default for LawConfig {
    fn default() -> Self {
        Self { kind: LawKind::RealGaussian, alpha_x: None, kappa_x: None }
    }
}

impl LawConfig {
    pub fn build(&self) -> Result<EntryLaw, CliError> {
        let law = match self.kind {
            LawKind::Custom => {
                let (Some(a), Some(k)) = (self.alpha_x, self.kappa_x) else {
                    return Err(CliError::usage("custom law needs alpha_x and kappa_x"));
                };
                EntryLaw::custom(a, k)?
            }
            kind => {
                if self.alpha_x.is_some() || self.kappa_x.is_some() {
                    return Err(CliError::usage("alpha_x and kappa_x may only be set for the custom law"));
                }
                EntryLaw::from_kind(kind)?
            }
        };
        Ok(law)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub dimensions: DimensionsConfig,
    pub t1: FactorSpec,
    pub t2: FactorSpec,
    #[serde(default)]
    pub law: LawConfig,
    /// Directory that `file` paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::usage(format!("malformed config {}: {e}", path.display())))
}

fn cycled(values: &[f64], len: usize) -> Result<Vec<f64>, CliError> {
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(CliError::usage("diagonal values must be non-empty and finite"));
    }
    Ok(values.iter().copied().cycle().take(len).collect())
}

/// Eigenvalues of the `n x n` lag-τ shift matrix: it splits into τ path
/// graphs, and a path of length `L` with weights ½ has spectrum
/// `cos(kπ/(L+1))`, `k = 1..=L`.
pub fn shift_eigenvalues(n: usize, tau: usize) -> Result<Vec<f64>, CliError> {
    if tau == 0 || tau >= n {
        return Err(CliError::usage(format!("shift lag tau = {tau} must lie in 1..{n}")));
    }
    Ok(sepspec::model::shift_eigenvalues(n, tau)?)
}

impl ModelConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let mut cfg: ModelConfig = read_toml(path)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let d = &self.dimensions;
        if d.p == 0 || d.n == 0 {
            return Err(CliError::usage("dimensions p and n must be positive"));
        }
        if matches!(self.t1, FactorSpec::Shift { .. } | FactorSpec::Arcsine) {
            return Err(CliError::usage("t1 must be identity, diagonal or file"));
        }
        self.law.build()?;
        Ok(())
    }

    pub fn c(&self) -> f64 {
        self.dimensions.p as f64 / self.dimensions.n as f64
    }

    fn load_matrix(&self, path: &Path) -> Result<RMatrix, CliError> {
        read_matrix(&self.base_dir.join(path), false, false)
    }

    fn factor_matrix(&self, spec: &FactorSpec, rows: usize, square: bool) -> Result<RMatrix, CliError> {
        Ok(match spec {
            FactorSpec::Identity => RMatrix::identity(rows, rows),
            FactorSpec::Diagonal { values } => RMatrix::from_diagonal(&nalgebra::DVector::from_vec(cycled(values, rows)?)),
            FactorSpec::Shift { tau } => shift_matrix(rows, *tau)?,
            FactorSpec::File { path } => {
                let m = self.load_matrix(path)?;
                if m.nrows() != rows || (square && !m.is_square()) {
                    return Err(CliError::usage(format!(
                        "matrix in {} is {}x{}, expected {rows} rows{}",
                        path.display(),
                        m.nrows(),
                        m.ncols(),
                        if square { " and a square shape" } else { "" }
                    )));
                }
                m
            }
            FactorSpec::Arcsine => {
                return Err(CliError::usage("the arcsine spectrum has no finite matrix; use shift for sampling"))
            }
        })
    }

    /// `H1`: the spectrum of `T1 T1*`.
    pub fn h1(&self) -> Result<SpectralMeasure, CliError> {
        let p = self.dimensions.p;
        let eig = match &self.t1 {
            FactorSpec::Identity => return Ok(SpectralMeasure::PointMass(1.0)),
            FactorSpec::Diagonal { values } => cycled(values, p)?.iter().map(|v| v * v).collect(),
            _ => {
                let t1 = self.factor_matrix(&self.t1, p, false)?;
                sepspec::spectra::esd_real(&(&t1 * t1.transpose()))?.eigenvalues
            }
        };
        Ok(SpectralMeasure::from_eigenvalues(&eig)?)
    }

    /// `H2`: the spectrum of `T2`.
    pub fn h2(&self) -> Result<SpectralMeasure, CliError> {
        let n = self.dimensions.n;
        let eig = match &self.t2 {
            FactorSpec::Identity => return Ok(SpectralMeasure::PointMass(1.0)),
            FactorSpec::Arcsine => return Ok(SpectralMeasure::Arcsine),
            FactorSpec::Diagonal { values } => cycled(values, n)?,
            FactorSpec::Shift { tau } => shift_eigenvalues(n, *tau)?,
            FactorSpec::File { .. } => {
                let t2 = self.factor_matrix(&self.t2, n, true)?;
                sepspec::spectra::esd_real(&t2)?.eigenvalues
            }
        };
        Ok(SpectralMeasure::from_eigenvalues(&eig)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessConfig {
    /// Diagonal of `Σ0`, repeated to length `p`.
    pub sigma_pattern: Vec<f64>,
    #[serde(default = "white")]
    pub ma_coefficients: Vec<f64>,
    #[serde(default)]
    pub law: LawConfig,
}

fn white() -> Vec<f64> {
    vec![1.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanConfig {
    /// `[p, n, q]` triples.
    pub cells: Vec<[usize; 3]>,
    pub process: ProcessConfig,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub level: Option<f64>,
    #[serde(default)]
    pub base_seed: Option<u64>,
    #[serde(default)]
    pub moments: PlanMoments,
    #[serde(default)]
    pub centering: Centering,
}

fn default_replications() -> usize {
    1000
}

impl PlanConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        read_toml(path)
    }

    /// Resolves the plan; command-line `seed` and `level` win over the file.
    pub fn build(&self, seed: Option<u64>, level: Option<f64>) -> Result<SimulationPlan, CliError> {
        let plan = SimulationPlan {
            cells: self.cells.iter().map(|&[p, n, q]| Cell { p, n, q }).collect(),
            process: ProcessTemplate {
                sigma_pattern: self.process.sigma_pattern.clone(),
                ma_coefficients: self.process.ma_coefficients.clone(),
                law: self.process.law.build()?,
            },
            replications: self.replications,
            level: level.or(self.level).unwrap_or(0.05),
            base_seed: seed.or(self.base_seed).unwrap_or(0),
            moments: self.moments,
            centering: self.centering,
        };
        plan.validate()?;
        Ok(plan)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shift_spectrum_matches_dense() {
        for (n, tau) in [(7, 1), (9, 2), (10, 3), (6, 5)] {
            let mut fast = shift_eigenvalues(n, tau).unwrap();
            fast.sort_by(f64::total_cmp);
            let dense = sepspec::spectra::esd_real(&shift_matrix(n, tau).unwrap()).unwrap().eigenvalues;
            assert_eq!(fast.len(), dense.len());
            for (a, b) in fast.iter().zip(&dense) {
                assert!((a - b).abs() < 1e-12, "n={n} tau={tau}: {a} vs {b}");
            }
        }
        assert!(shift_eigenvalues(5, 5).is_err());
    }

    #[test]
    fn parses_model_config() {
        let cfg: ModelConfig = toml::from_str(
            r#"
            [dimensions]
            p = 4
            n = 8
            [t1]
            kind = "diagonal"
            values = [1.0, 3.0]
            [t2]
            kind = "shift"
            tau = 1
            [law]
            kind = "real-gaussian"
            "#,
        )
        .unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.c(), 0.5);
        // Σ1 = T1², so atoms 1 and 9
        assert_eq!(cfg.h1().unwrap().moment(1), 5.0);
        assert!((cfg.h2().unwrap().moment(2) - 3.5 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_model_configs() {
        let bad = [
            "[dimensions]\np = 4\nn = 8\n[t1]\nkind = \"shift\"\ntau = 1\n[t2]\nkind = \"identity\"\n",
            "[dimensions]\np = 0\nn = 8\n[t1]\nkind = \"identity\"\n[t2]\nkind = \"identity\"\n",
            "[dimensions]\np = 4\nn = 8\n[t1]\nkind = \"identity\"\n[t2]\nkind = \"identity\"\n[law]\nkind = \"custom\"\n",
        ];
        for text in bad {
            let cfg: ModelConfig = toml::from_str(text).unwrap();
            assert!(cfg.validate().is_err(), "{text}");
        }
        assert!(toml::from_str::<ModelConfig>("[dimensions]\np = 4\n").is_err());
    }

    #[test]
    fn plan_overrides() {
        let cfg: PlanConfig = toml::from_str(
            r#"
            cells = [[10, 20, 1]]
            replications = 5
            level = 0.1
            base_seed = 3
            [process]
            sigma_pattern = [1.0, 3.0]
            "#,
        )
        .unwrap();
        let plan = cfg.build(None, None).unwrap();
        assert_eq!((plan.level, plan.base_seed), (0.1, 3));
        let plan = cfg.build(Some(9), Some(0.01)).unwrap();
        assert_eq!((plan.level, plan.base_seed), (0.01, 9));
        assert_eq!(plan.process.ma_coefficients, vec![1.0]);
    }
}
