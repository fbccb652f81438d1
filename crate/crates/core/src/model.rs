//! Separable covariance models, random entry laws, linear processes and the
//! matrices built from them.
//!
//! The central object is the separable sample covariance matrix
//! `S = (1/n) T1 X T2 X* T1*`, where `X` is an `m1 x m2` matrix of i.i.d.
//! standardized entries, `T1` is `p x m1` and `T2` is an `m2 x m2` Hermitian
//! matrix. The white-noise application uses `T1 = Σ0^{1/2}` and
//! `T2 = shift_matrix(n, τ)`, for which `S` is the symmetrized lag-τ sample
//! autocovariance.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::spectra::SpectralMeasure;

pub type CMatrix = DMatrix<Complex64>;
pub type RMatrix = DMatrix<f64>;

/// Relative tolerance used for Hermiticity checks.
pub const HERMITIAN_RTOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dimensions {
    pub p: usize,
    pub n: usize,
    pub m1: usize,
    pub m2: usize,
}

impl Dimensions {
    pub fn new(p: usize, n: usize, m1: usize, m2: usize) -> Result<Self> {
        if p == 0 || n == 0 {
            return Err(Error::Dimension(format!("p = {p} and n = {n} must be positive")));
        }
        if m1 < p || m2 < n {
            return Err(Error::Dimension(format!(
                "need m1 >= p and m2 >= n, got m1 = {m1}, p = {p}, m2 = {m2}, n = {n}"
            )));
        }
        Ok(Self { p, n, m1, m2 })
    }

    /// The common case `m1 = p`, `m2 = n`.
    pub fn square(p: usize, n: usize) -> Result<Self> {
        Self::new(p, n, p, n)
    }

    /// Dimension ratio `c_n = p / n`.
    pub fn c_n(&self) -> f64 {
        self.p as f64 / self.n as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LawKind {
    RealGaussian,
    ComplexGaussian,
    Rademacher,
    /// Only the moment parameters are known; no sampler is attached.
    Custom,
}

/// Distribution of the i.i.d. entries of `X`, with the fourth-moment
/// parameters `α_x = |E x²|²` and `κ_x = E|x|⁴ − α_x − 2` that enter the CLT.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntryLaw {
    pub kind: LawKind,
    pub alpha_x: f64,
    pub kappa_x: f64,
}

impl EntryLaw {
    pub fn real_gaussian() -> Self {
        Self { kind: LawKind::RealGaussian, alpha_x: 1.0, kappa_x: 0.0 }
    }

    pub fn complex_gaussian() -> Self {
        Self { kind: LawKind::ComplexGaussian, alpha_x: 0.0, kappa_x: 0.0 }
    }

    /// Symmetric ±1 entries: `E x⁴ = 1`, hence `κ_x = −2`.
    pub fn rademacher() -> Self {
        Self { kind: LawKind::Rademacher, alpha_x: 1.0, kappa_x: -2.0 }
    }

    pub fn custom(alpha_x: f64, kappa_x: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha_x) {
            return Err(Error::Parameter(format!("alpha_x = {alpha_x} must lie in [0, 1]")));
        }
        if !kappa_x.is_finite() || kappa_x < -2.0 {
            return Err(Error::Parameter(format!("kappa_x = {kappa_x} must be >= -2")));
        }
        Ok(Self { kind: LawKind::Custom, alpha_x, kappa_x })
    }

    pub fn from_kind(kind: LawKind) -> Result<Self> {
        match kind {
            LawKind::RealGaussian => Ok(Self::real_gaussian()),
            LawKind::ComplexGaussian => Ok(Self::complex_gaussian()),
            LawKind::Rademacher => Ok(Self::rademacher()),
            LawKind::Custom => Err(Error::Config(
                "custom law needs explicit alpha_x and kappa_x".into(),
            )),
        }
    }

    pub fn is_real(&self) -> bool {
        matches!(self.kind, LawKind::RealGaussian | LawKind::Rademacher)
    }

    fn draw_real<R: Rng>(&self, rng: &mut R) -> f64 {
        match self.kind {
            LawKind::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            _ => rng.sample(StandardNormal),
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> Complex64 {
        match self.kind {
            LawKind::ComplexGaussian => {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
            }
            _ => Complex64::new(self.draw_real(rng), 0.0),
        }
    }

    fn check_sampler(&self) -> Result<()> {
        if self.kind == LawKind::Custom {
            return Err(Error::Config("custom entry law has no sampler".into()));
        }
        Ok(())
    }
}

/// Draws a `rows x cols` matrix of i.i.d. entries (column-major draw order).
pub fn generate_entries(law: &EntryLaw, rows: usize, cols: usize, seed: u64) -> Result<CMatrix> {
    law.check_sampler()?;
    if rows == 0 || cols == 0 {
        return Err(Error::Dimension("entry matrix must be non-empty".into()));
    }
    let mut rng = rng::stream(seed);
    let data: Vec<Complex64> = (0..rows * cols).map(|_| law.draw(&mut rng)).collect();
    Ok(CMatrix::from_vec(rows, cols, data))
}

/// Real-valued counterpart of [`generate_entries`] for real laws.
pub fn generate_real_entries<R: Rng>(
    law: &EntryLaw,
    rows: usize,
    cols: usize,
    rng: &mut R,
) -> Result<RMatrix> {
    law.check_sampler()?;
    if !law.is_real() {
        return Err(Error::Config(format!("{:?} entries are not real", law.kind)));
    }
    let data: Vec<f64> = (0..rows * cols).map(|_| law.draw_real(rng)).collect();
    Ok(RMatrix::from_vec(rows, cols, data))
}

pub fn to_complex(a: &RMatrix) -> CMatrix {
    a.map(|v| Complex64::new(v, 0.0))
}

/// Frobenius norm of `A − A*`.
pub fn hermitian_defect(a: &CMatrix) -> f64 {
    (a - a.adjoint()).norm()
}

pub(crate) fn check_hermitian(a: &CMatrix) -> Result<()> {
    if !a.is_square() {
        return Err(Error::Dimension(format!("{}x{} matrix is not square", a.nrows(), a.ncols())));
    }
    let defect = hermitian_defect(a);
    let tolerance = HERMITIAN_RTOL * a.norm().max(f64::MIN_POSITIVE);
    if defect > tolerance {
        return Err(Error::NotHermitian { defect, tolerance });
    }
    Ok(())
}

/// The quadruple `(dims, T1, T2, law)` defining `S = (1/n) T1 X T2 X* T1*`.
#[derive(Debug, Clone)]
pub struct SeparableModel {
    pub dims: Dimensions,
    pub t1: CMatrix,
    pub t2: CMatrix,
    pub law: EntryLaw,
}

impl SeparableModel {
    pub fn new(dims: Dimensions, t1: CMatrix, t2: CMatrix, law: EntryLaw) -> Result<Self> {
        if t1.shape() != (dims.p, dims.m1) {
            return Err(Error::Dimension(format!(
                "T1 is {}x{}, expected {}x{}",
                t1.nrows(),
                t1.ncols(),
                dims.p,
                dims.m1
            )));
        }
        if t2.shape() != (dims.m2, dims.m2) {
            return Err(Error::Dimension(format!(
                "T2 is {}x{}, expected {}x{}",
                t2.nrows(),
                t2.ncols(),
                dims.m2,
                dims.m2
            )));
        }
        if !t1.iter().chain(t2.iter()).all(|v| v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::Parameter("T1 and T2 must have finite entries".into()));
        }
        check_hermitian(&t2)?;
        Ok(Self { dims, t1, t2, law })
    }

    /// `T1 = Σ0^{1/2}` (diagonal) and `T2 = shift_matrix(n, τ)`: the model
    /// behind the lag-τ white-noise statistic.
    pub fn white_noise(sigma0_diagonal: &[f64], n: usize, tau: usize, law: EntryLaw) -> Result<Self> {
        if sigma0_diagonal.iter().any(|&s| !(s >= 0.0)) {
            return Err(Error::Parameter("covariance diagonal must be nonnegative".into()));
        }
        let p = sigma0_diagonal.len();
        let dims = Dimensions::square(p, n)?;
        let t1 = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            p,
            sigma0_diagonal.iter().map(|s| Complex64::new(s.sqrt(), 0.0)),
        ));
        let t2 = to_complex(&shift_matrix(n, tau)?);
        Self::new(dims, t1, t2, law)
    }

    /// Ordinary sample covariance: `T1 = I_p`, `T2 = I_n`.
    pub fn identity(p: usize, n: usize, law: EntryLaw) -> Result<Self> {
        Self::new(Dimensions::square(p, n)?, CMatrix::identity(p, p), CMatrix::identity(n, n), law)
    }

    /// Spectral distribution `H_{1n}` of `Σ1 = T1 T1*`.
    pub fn h1(&self) -> Result<SpectralMeasure> {
        let sigma1 = &self.t1 * self.t1.adjoint();
        SpectralMeasure::from_eigenvalues(&crate::spectra::esd(&sigma1)?.eigenvalues)
    }

    /// Spectral distribution `H_{2n}` of `T2` (an `m2`-point measure).
    pub fn h2(&self) -> Result<SpectralMeasure> {
        SpectralMeasure::from_eigenvalues(&crate::spectra::esd(&self.t2)?.eigenvalues)
    }

    pub fn is_real(&self) -> bool {
        self.law.is_real()
            && self.t1.iter().chain(self.t2.iter()).all(|v| v.im == 0.0)
    }

    /// Draws the entry matrix `X` for this model.
    pub fn sample_entries(&self, seed: u64) -> Result<CMatrix> {
        generate_entries(&self.law, self.dims.m1, self.dims.m2, seed)
    }

    pub(crate) fn real_operator(&self) -> Option<RealSeparable> {
        if !self.is_real() {
            return None;
        }
        Some(RealSeparable {
            n: self.dims.n,
            t1: self.t1.map(|v| v.re),
            t2: RightFactor::new(self.t2.map(|v| v.re)),
            law: self.law,
        })
    }
}

/// `(1/n) T1 X T2 X* T1*`.
pub fn sample_covariance(model: &SeparableModel, x: &CMatrix) -> Result<CMatrix> {
    let d = model.dims;
    if x.shape() != (d.m1, d.m2) {
        return Err(Error::Dimension(format!(
            "X is {}x{}, model expects {}x{}",
            x.nrows(),
            x.ncols(),
            d.m1,
            d.m2
        )));
    }
    let y = &model.t1 * x;
    let s = (&y * &model.t2) * y.adjoint();
    Ok(s / Complex64::new(d.n as f64, 0.0))
}

/// `T2` as used on the right of `T1 X`; sparse storage pays off for the
/// shift matrices, which have only `2(n − τ)` nonzeros.
#[derive(Debug, Clone)]
pub(crate) enum RightFactor {
    Dense(RMatrix),
    Sparse { dim: usize, entries: Vec<(usize, usize, f64)> },
}

impl RightFactor {
    fn new(t2: RMatrix) -> Self {
        let entries: Vec<(usize, usize, f64)> = (0..t2.ncols())
            .flat_map(|j| (0..t2.nrows()).map(move |i| (i, j)))
            .filter_map(|(i, j)| {
                let v = t2[(i, j)];
                (v != 0.0).then_some((i, j, v))
            })
            .collect();
        if entries.len() * 8 < t2.len() {
            RightFactor::Sparse { dim: t2.nrows(), entries }
        } else {
            RightFactor::Dense(t2)
        }
    }

    fn right_multiply(&self, y: &RMatrix) -> RMatrix {
        match self {
            RightFactor::Dense(t2) => y * t2,
            RightFactor::Sparse { dim, entries } => {
                let mut out = RMatrix::zeros(y.nrows(), *dim);
                for &(i, j, v) in entries {
                    let mut col = out.column_mut(j);
                    col.axpy(v, &y.column(i), 1.0);
                }
                out
            }
        }
    }
}

/// Real-arithmetic fast path used by the Monte Carlo engine.
#[derive(Debug, Clone)]
pub(crate) struct RealSeparable {
    n: usize,
    t1: RMatrix,
    t2: RightFactor,
    law: EntryLaw,
}

impl RealSeparable {
    pub(crate) fn sample_covariance(&self, seed: u64) -> Result<RMatrix> {
        let mut rng = rng::stream(seed);
        let x = generate_real_entries(&self.law, self.t1.ncols(), self.n_cols(), &mut rng)?;
        let y = &self.t1 * x;
        let w = self.t2.right_multiply(&y);
        Ok((w * y.transpose()) / self.n as f64)
    }

    fn n_cols(&self) -> usize {
        match &self.t2 {
            RightFactor::Dense(t2) => t2.nrows(),
            RightFactor::Sparse { dim, .. } => *dim,
        }
    }
}

/// A p-dimensional linear process `ε_i = Σ0^{1/2} Σ_k b_k x_{i−k}` with
/// scalar moving-average weights `b_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProcessSpec {
    pub sigma0_sqrt: RMatrix,
    pub ma_coefficients: Vec<f64>,
    pub law: EntryLaw,
}

impl LinearProcessSpec {
    pub fn new(sigma0_sqrt: RMatrix, ma_coefficients: Vec<f64>, law: EntryLaw) -> Result<Self> {
        if !sigma0_sqrt.is_square() || sigma0_sqrt.nrows() == 0 {
            return Err(Error::Dimension("Σ0^{1/2} must be a non-empty square matrix".into()));
        }
        if ma_coefficients.is_empty() || ma_coefficients.iter().any(|b| !b.is_finite()) {
            return Err(Error::Parameter("moving-average coefficients must be non-empty and finite".into()));
        }
        law.check_sampler()?;
        if !law.is_real() {
            return Err(Error::Config("linear processes are generated with real entry laws".into()));
        }
        Ok(Self { sigma0_sqrt, ma_coefficients, law })
    }

    /// Builds the spec from `Σ0` itself. A diagonal `Σ0` gets the
    /// elementwise square root; otherwise the symmetric eigendecomposition
    /// square root is used.
    pub fn from_sigma0(sigma0: &RMatrix, ma_coefficients: Vec<f64>, law: EntryLaw) -> Result<Self> {
        Self::new(symmetric_sqrt(sigma0)?, ma_coefficients, law)
    }

    /// Model 1 of the simulation study: `Σ0 = diag(2 + (−1)^i)`, white noise.
    pub fn model1(p: usize) -> Result<Self> {
        Self::from_sigma0(
            &RMatrix::from_diagonal(&nalgebra::DVector::from_vec(alternating_diagonal(p))),
            vec![1.0],
            EntryLaw::real_gaussian(),
        )
    }

    /// Model 2: the same `Σ0` with the MA(2) filter `x_i + 0.3 x_{i−1} + 0.1 x_{i−2}`.
    pub fn model2(p: usize) -> Result<Self> {
        Self::from_sigma0(
            &RMatrix::from_diagonal(&nalgebra::DVector::from_vec(alternating_diagonal(p))),
            vec![1.0, 0.3, 0.1],
            EntryLaw::real_gaussian(),
        )
    }

    pub fn dim(&self) -> usize {
        self.sigma0_sqrt.nrows()
    }

    /// `Σ0 = Σ0^{1/2} (Σ0^{1/2})ᵀ`.
    pub fn sigma0(&self) -> RMatrix {
        &self.sigma0_sqrt * self.sigma0_sqrt.transpose()
    }
}

/// Diagonal `2 + (−1)^i`, `i = 1..=p`: `1, 3, 1, 3, …`.
pub fn alternating_diagonal(p: usize) -> Vec<f64> {
    (1..=p).map(|i| if i % 2 == 0 { 3.0 } else { 1.0 }).collect()
}

/// Principal square root of a symmetric positive semidefinite matrix.
pub fn symmetric_sqrt(a: &RMatrix) -> Result<RMatrix> {
    if !a.is_square() {
        return Err(Error::Dimension("matrix square root needs a square matrix".into()));
    }
    let scale = a.norm().max(f64::MIN_POSITIVE);
    if (a - a.transpose()).norm() > HERMITIAN_RTOL * scale {
        return Err(Error::Parameter("Σ0 must be symmetric".into()));
    }
    let off_diagonal = a
        .iter()
        .enumerate()
        .any(|(k, &v)| k % a.nrows() != k / a.nrows() && v != 0.0);
    if !off_diagonal {
        if a.diagonal().iter().any(|&d| d < 0.0) {
            return Err(Error::Parameter("Σ0 has a negative diagonal entry".into()));
        }
        return Ok(RMatrix::from_diagonal(&a.diagonal().map(f64::sqrt)));
    }
    let eig = SymmetricEigen::new(a.clone());
    if eig.eigenvalues.iter().any(|&l| l < -1e-10 * scale) {
        return Err(Error::Parameter("Σ0 is not positive semidefinite".into()));
    }
    let root = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    Ok(&eig.eigenvectors * RMatrix::from_diagonal(&root) * eig.eigenvectors.transpose())
}

/// Generates `ε_1, …, ε_n` as the columns of a `p x n` matrix. The
/// `len(b) − 1` presample innovations are drawn too, so `ε_1` already has the
/// stationary law.
pub fn generate_linear_process(spec: &LinearProcessSpec, p: usize, n: usize, seed: u64) -> Result<RMatrix> {
    if p != spec.dim() {
        return Err(Error::Dimension(format!("p = {p} but Σ0^{{1/2}} is {0}x{0}", spec.dim())));
    }
    if n == 0 {
        return Err(Error::Dimension("n must be positive".into()));
    }
    let lags = spec.ma_coefficients.len();
    let mut rng = rng::stream(seed);
    let x = generate_real_entries(&spec.law, p, n + lags - 1, &mut rng)?;

    let mut filtered = RMatrix::zeros(p, n);
    for (k, &b) in spec.ma_coefficients.iter().enumerate() {
        if b != 0.0 {
            // column i of the output uses innovation x_{i-k}, stored at i + lags - 1 - k
            filtered += x.columns(lags - 1 - k, n) * b;
        }
    }

    let diagonal = spec.sigma0_sqrt.is_square()
        && (0..p).all(|j| (0..p).all(|i| i == j || spec.sigma0_sqrt[(i, j)] == 0.0));
    if diagonal {
        for i in 0..p {
            let s = spec.sigma0_sqrt[(i, i)];
            filtered.row_mut(i).scale_mut(s);
        }
        Ok(filtered)
    } else {
        Ok(&spec.sigma0_sqrt * filtered)
    }
}

/// `Σ̂_(τ) = (1/n) Σ_{i=1}^{n−τ} ε_{i+τ} ε_iᵀ`; the divisor is `n` for every lag.
pub fn lag_autocovariance(data: &RMatrix, tau: usize) -> Result<RMatrix> {
    let n = data.ncols();
    if tau >= n {
        return Err(Error::InvalidLag { tau, n });
    }
    let len = n - tau;
    let lead = data.columns(tau, len);
    let lagged = data.columns(0, len);
    Ok(lead * lagged.transpose() / n as f64)
}

/// Symmetric `n x n` matrix with `1/2` on the `±τ` diagonals.
pub fn shift_matrix(n: usize, tau: usize) -> Result<RMatrix> {
    if tau == 0 || tau >= n {
        return Err(Error::InvalidLag { tau, n });
    }
    let mut t = RMatrix::zeros(n, n);
    for i in 0..n - tau {
        t[(i, i + tau)] = 0.5;
        t[(i + tau, i)] = 0.5;
    }
    Ok(t)
}

/// Eigenvalues of [`shift_matrix`] in closed form: the matrix splits into
/// `τ` paths, each with eigenvalues `cos(kπ/(L+1))`.
pub fn shift_eigenvalues(n: usize, tau: usize) -> Result<Vec<f64>> {
    if tau == 0 || tau >= n {
        return Err(Error::InvalidLag { tau, n });
    }
    let mut out = Vec::with_capacity(n);
    for start in 0..tau {
        let len = (n - 1 - start) / tau + 1;
        out.extend((1..=len).map(|k| (k as f64 * std::f64::consts::PI / (len as f64 + 1.0)).cos()));
    }
    Ok(out)
}
