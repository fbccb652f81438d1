//! Spectral measures and empirical spectral distributions.
//!
//! A [`SpectralMeasure`] is a probability law on the real line that answers
//! the moment and resolvent-integral queries `∫ xᵏ/(1 + g x)ʲ dH(x)` needed
//! by the limiting-spectrum solver and the CLT kernels. Discrete measures are
//! evaluated exactly; the arcsine law uses first-kind Gauss–Chebyshev
//! quadrature, whose weight function is exactly the arcsine density.

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{check_hermitian, CMatrix, RMatrix};
use crate::quadrature::chebyshev_nodes;

const WEIGHT_TOL: f64 = 1e-12;

/// Starting node count of the adaptive arcsine quadrature.
pub const ARCSINE_NODES: usize = 256;
/// Node count at which doubling stops.
pub const ARCSINE_MAX_NODES: usize = 4096;
const ARCSINE_RTOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SpectralMeasure {
    /// Atoms `(location, weight)`, sorted by location.
    Discrete(Vec<(f64, f64)>),
    /// Density `1/(π √(1 − t²))` on `(−1, 1)`.
    Arcsine,
    PointMass(f64),
}

impl SpectralMeasure {
    /// Validates weights (nonnegative, summing to one), sorts atoms and merges
    /// coincident locations.
    pub fn discrete(mut atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Parameter("discrete measure needs at least one atom".into()));
        }
        if atoms.iter().any(|&(x, w)| !x.is_finite() || !w.is_finite() || w < 0.0) {
            return Err(Error::Parameter("atoms must be finite with nonnegative weights".into()));
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::Parameter(format!("weights sum to {total}, not 1")));
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (x, w) in atoms {
            match merged.last_mut() {
                Some(last) if (x - last.0).abs() <= 1e-12 * x.abs().max(1.0) => last.1 += w,
                _ => merged.push((x, w)),
            }
        }
        merged.retain(|a| a.1 > 0.0);
        Ok(SpectralMeasure::Discrete(merged))
    }

    /// Uniform measure on the given values (an ESD).
    pub fn from_eigenvalues(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Parameter("empty eigenvalue list".into()));
        }
        let w = 1.0 / values.len() as f64;
        let mut atoms: Vec<(f64, f64)> = values.iter().map(|&x| (x, w)).collect();
        // rescale so the sum is 1 to the last bit
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        atoms.iter_mut().for_each(|a| a.1 /= total);
        Self::discrete(atoms)
    }

    pub fn support_lo(&self) -> f64 {
        match self {
            SpectralMeasure::Discrete(a) => a[0].0,
            SpectralMeasure::Arcsine => -1.0,
            SpectralMeasure::PointMass(x) => *x,
        }
    }

    pub fn support_hi(&self) -> f64 {
        match self {
            SpectralMeasure::Discrete(a) => a[a.len() - 1].0,
            SpectralMeasure::Arcsine => 1.0,
            SpectralMeasure::PointMass(x) => *x,
        }
    }

    /// `∫ xᵏ dH(x)`.
    pub fn moment(&self, k: u32) -> f64 {
        match self {
            SpectralMeasure::Discrete(a) => a.iter().map(|&(x, w)| w * x.powi(k as i32)).sum(),
            SpectralMeasure::PointMass(x) => x.powi(k as i32),
            SpectralMeasure::Arcsine => {
                if k % 2 == 1 {
                    0.0
                } else {
                    // C(k, k/2) / 2^k
                    let half = k / 2;
                    (1..=half).fold(1.0, |acc, j| acc * (half + j) as f64 / (4.0 * j as f64))
                }
            }
        }
    }

    /// `∫ x^numerator_power / (1 + g x)^power dH(x)`.
    pub fn resolvent_integral(&self, g: Complex64, power: u32, numerator_power: u32) -> Result<Complex64> {
        let term = |x: f64| -> Result<Complex64> {
            let denom = Complex64::new(1.0, 0.0) + g * x;
            if denom.norm() < 1e-14 {
                return Err(Error::SingularIntegral { g: format!("{g}") });
            }
            Ok(Complex64::new(x.powi(numerator_power as i32), 0.0) / denom.powu(power))
        };
        match self {
            SpectralMeasure::PointMass(x) => term(*x),
            SpectralMeasure::Discrete(atoms) => {
                let mut acc = Complex64::new(0.0, 0.0);
                for &(x, w) in atoms {
                    acc += term(x)? * w;
                }
                Ok(acc)
            }
            SpectralMeasure::Arcsine => {
                // 1 + g t vanishes inside (−1, 1) only for real g with |g| >= 1
                if g.im.abs() < 1e-12 * g.norm().max(1.0) && g.re.abs() >= 1.0 {
                    return Err(Error::SingularIntegral { g: format!("{g}") });
                }
                if g.norm() > 0.0 && power <= 3 && arcsine_log_rho(g) < CLOSED_FORM_LOG_RHO {
                    return Ok(arcsine_closed_form(g, power, numerator_power));
                }
                arcsine_adaptive(|t| {
                    Complex64::new(t.powi(numerator_power as i32), 0.0)
                        / (Complex64::new(1.0, 0.0) + g * t).powu(power)
                })
            }
        }
    }

    /// The resolvent integrals used by the solver and the CLT kernels,
    /// `∫ xᵃ/(1 + g x)ᵇ dH` for every `(a, b)` in `table`, in one pass.
    pub(crate) fn resolvent_table<const K: usize>(&self, g: Complex64, table: [(u32, u32); K]) -> Result<[Complex64; K]> {
        let one = Complex64::new(1.0, 0.0);
        let eval = |x: f64| -> Result<[Complex64; K]> {
            let denom = one + g * x;
            if denom.norm() < 1e-14 {
                return Err(Error::SingularIntegral { g: format!("{g}") });
            }
            let inv = one / denom;
            let mut out = [Complex64::new(0.0, 0.0); K];
            for (slot, &(num, pow)) in out.iter_mut().zip(table.iter()) {
                *slot = inv.powu(pow) * x.powi(num as i32);
            }
            Ok(out)
        };
        match self {
            SpectralMeasure::PointMass(x) => eval(*x),
            SpectralMeasure::Discrete(atoms) => {
                let mut acc = [Complex64::new(0.0, 0.0); K];
                for &(x, w) in atoms {
                    let v = eval(x)?;
                    for (a, b) in acc.iter_mut().zip(v) {
                        *a += b * w;
                    }
                }
                Ok(acc)
            }
            SpectralMeasure::Arcsine => {
                let mut out = [Complex64::new(0.0, 0.0); K];
                for (slot, &(num, pow)) in out.iter_mut().zip(table.iter()) {
                    *slot = self.resolvent_integral(g, pow, num)?;
                }
                Ok(out)
            }
        }
    }
}

/// Below this Bernstein parameter the pole is too close to `[−1, 1]` for
/// Gauss–Chebyshev with a few thousand nodes, and the closed form is used.
const CLOSED_FORM_LOG_RHO: f64 = 0.02;

/// `sqrt(w − 1) sqrt(w + 1)`: the branch of `sqrt(w² − 1)` cut along
/// `[−1, 1]` that behaves like `w` at infinity.
fn cut_sqrt(w: Complex64) -> Complex64 {
    (w - 1.0).sqrt() * (w + 1.0).sqrt()
}

/// `log ρ` of the Bernstein ellipse through the pole `−1/g` of the
/// integrand; Gauss–Chebyshev with `n` nodes has error of order `ρ^(−2n)`.
pub fn arcsine_log_rho(g: Complex64) -> f64 {
    if g.norm() == 0.0 {
        return f64::INFINITY;
    }
    let w = -1.0 / g;
    (w + cut_sqrt(w)).norm().ln().abs()
}

/// Exact `∫ tᵃ/(1 + g t)ᵇ dμ` for the arcsine law, `b ≤ 3`. With `w = −1/g`,
/// `1/(1 + g t) = w/(w − t)`, and `J_k = ∫ (w − t)^(−k) dμ` follows from
/// `J_1 = (w² − 1)^(−1/2)` by differentiation.
fn arcsine_closed_form(g: Complex64, power: u32, numerator_power: u32) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    let w = -one / g;
    let r = cut_sqrt(w);
    let j = |k: u32| -> Complex64 {
        match k {
            0 => one,
            1 => one / r,
            2 => w / (r * r * r),
            3 => (w * w * 2.0 + 1.0) / (r.powu(5) * 2.0),
            _ => unreachable!("powers above three use quadrature"),
        }
    };
    let binom = |n: u32, k: u32| (1..=k).fold(1.0, |acc, i| acc * (n + 1 - i) as f64 / i as f64);
    let (a, b) = (numerator_power, power);
    // tᵃ = Σ_i C(a, i) wᵃ⁻ⁱ (−1)ⁱ (w − t)ⁱ
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..=a {
        let coef = w.powu(a - i) * binom(a, i) * if i % 2 == 0 { 1.0 } else { -1.0 };
        let integral = if i <= b {
            j(b - i)
        } else {
            // ∫ (w − t)^m dμ with m = i − b, expanded into moments
            let m = i - b;
            (0..=m)
                .map(|l| {
                    let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
                    w.powu(m - l) * binom(m, l) * sign * SpectralMeasure::Arcsine.moment(l)
                })
                .sum()
        };
        acc += coef * integral;
    }
    acc * w.powu(b)
}

fn arcsine_rule(n: usize, f: &impl Fn(f64) -> Complex64) -> Complex64 {
    chebyshev_nodes(n).into_iter().map(f).sum::<Complex64>() / n as f64
}

/// Gauss–Chebyshev with node doubling from 256 up to 4096 nodes.
fn arcsine_adaptive(f: impl Fn(f64) -> Complex64) -> Result<Complex64> {
    let mut n = ARCSINE_NODES;
    let mut prev = arcsine_rule(n, &f);
    while n < ARCSINE_MAX_NODES {
        n *= 2;
        let next = arcsine_rule(n, &f);
        if (next - prev).norm() <= ARCSINE_RTOL * (1.0 + next.norm()) {
            return Ok(next);
        }
        prev = next;
    }
    Ok(prev)
}

/// Sorted eigenvalues of a Hermitian matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalSpectrum {
    pub eigenvalues: Vec<f64>,
}

impl EmpiricalSpectrum {
    pub fn new(mut eigenvalues: Vec<f64>) -> Self {
        eigenvalues.sort_by(f64::total_cmp);
        Self { eigenvalues }
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `F(x) = #{λ_j <= x} / p`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.eigenvalues.partition_point(|&l| l <= x) as f64 / self.len() as f64
    }

    pub fn to_measure(&self) -> Result<SpectralMeasure> {
        SpectralMeasure::from_eigenvalues(&self.eigenvalues)
    }
}

/// ESD of a Hermitian matrix.
pub fn esd(s: &CMatrix) -> Result<EmpiricalSpectrum> {
    check_hermitian(s)?;
    let eig = SymmetricEigen::new(s.clone());
    Ok(EmpiricalSpectrum::new(eig.eigenvalues.iter().copied().collect()))
}

/// ESD of a real symmetric matrix.
pub fn esd_real(s: &RMatrix) -> Result<EmpiricalSpectrum> {
    if !s.is_square() {
        return Err(Error::Dimension("ESD needs a square matrix".into()));
    }
    let defect = (s - s.transpose()).norm();
    let tolerance = crate::model::HERMITIAN_RTOL * s.norm().max(f64::MIN_POSITIVE);
    if defect > tolerance {
        return Err(Error::NotHermitian { defect, tolerance });
    }
    let eig = SymmetricEigen::new(s.clone());
    Ok(EmpiricalSpectrum::new(eig.eigenvalues.iter().copied().collect()))
}

/// `sup |F − G|` over the jump points of the ESD, taking both one-sided
/// limits at each jump.
pub fn kolmogorov_distance(f: &EmpiricalSpectrum, g: impl Fn(f64) -> f64) -> f64 {
    let p = f.len() as f64;
    let vals = &f.eigenvalues;
    let mut sup: f64 = 0.0;
    let mut i = 0;
    while i < vals.len() {
        let x = vals[i];
        let mut j = i;
        while j < vals.len() && vals[j] == x {
            j += 1;
        }
        let below = i as f64 / p;
        let at = j as f64 / p;
        let left = x - 1e-12 * x.abs().max(1.0);
        sup = sup.max((at - g(x)).abs()).max((below - g(left)).abs());
        i = j;
    }
    sup
}


#[cfg(test)]
impl SpectralMeasure {
    fn to_discrete(&self) -> SpectralMeasure {
        match self {
            SpectralMeasure::PointMass(x) => SpectralMeasure::Discrete(vec![(*x, 1.0)]),
            other => other.clone(),
        }
    }
}
