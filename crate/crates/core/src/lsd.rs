//! Limiting spectral distribution of separable sample covariance matrices.
//!
//! For `z` in the upper half plane the Stieltjes transform `m(z)` of the
//! limit `F^{c,H1,H2}` comes with two auxiliary functions `g1(z)`, `g2(z)`
//! solving
//!
//! ```text
//! z g1 = −c ∫ x/(1 + g2 x) dH1(x)
//! z g2 = −∫ y/(1 + g1 y) dH2(y)
//! m    = −z⁻¹ ∫ 1/(1 + g2 x) dH1(x)
//! ```
//!
//! and the triple is the unique solution with `Im m > 0`, `Im(z g1) > 0`,
//! `Im g2 > 0`. The solver runs the damped alternating fixed-point map from a
//! cold start, then polishes with Newton steps on the two-equation system
//! (its Jacobian determinant is `z² − c d3 d4`). Points close to the real
//! axis are reached by continuation in `Im z`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectra::SpectralMeasure;

type C = Complex64;

const ONE: C = C::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Weight of the new iterate in the damped fixed-point map.
    pub damping: f64,
    /// Stop when successive `(g1, g2)` differ by less than this (relative to `max(1, |g|)`).
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Fixed-point sweeps before switching to Newton on a cold start.
    pub fixed_point_sweeps: usize,
    /// Retries from perturbed starts after a spurious or failed solve.
    pub max_perturbations: usize,
    /// Geometric factor of the `Im z` continuation ladder.
    pub ladder_factor: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            damping: 0.5,
            tolerance: 1e-12,
            max_iterations: 10_000,
            fixed_point_sweeps: 200,
            max_perturbations: 5,
            ladder_factor: 0.7,
        }
    }
}

/// `(m(z), g1(z), g2(z))` at a point `z` of the upper half plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StieltjesTriple {
    pub z: C,
    pub m: C,
    pub g1: C,
    pub g2: C,
    /// Largest absolute defect among the three defining equations for `m`.
    pub residual: f64,
    pub iterations: usize,
}

impl StieltjesTriple {
    /// The triple at `z̄`; Stieltjes transforms of real measures satisfy
    /// `m(z̄) = conj(m(z))`, and likewise for `g1`, `g2`.
    pub fn conj(&self) -> Self {
        Self {
            z: self.z.conj(),
            m: self.m.conj(),
            g1: self.g1.conj(),
            g2: self.g2.conj(),
            ..*self
        }
    }

    /// Membership in the admissible set `Im m > 0, Im(z g1) > 0, Im g2 > 0`.
    pub fn admissible(&self) -> std::result::Result<(), String> {
        if !(self.m.im > 0.0) {
            return Err(format!("Im m = {:e}", self.m.im));
        }
        if !((self.z * self.g1).im > 0.0) {
            return Err(format!("Im(z g1) = {:e}", (self.z * self.g1).im));
        }
        if !(self.g2.im > 0.0) {
            return Err(format!("Im g2 = {:e}", self.g2.im));
        }
        Ok(())
    }

    /// The branch condition that survives indefinite `H2`: `Im m > 0` and
    /// `Im g1 > 0`. When `H2` has negative mass the true solution can leave
    /// the set checked by [`Self::admissible`].
    pub fn on_branch(&self) -> std::result::Result<(), String> {
        if !(self.m.im > 0.0) {
            return Err(format!("Im m = {:e}", self.m.im));
        }
        if !(self.g1.im > 0.0) {
            return Err(format!("Im g1 = {:e}", self.g1.im));
        }
        Ok(())
    }

    /// `|m + z⁻¹ + c⁻¹ g1 g2|`.
    pub fn consistency(&self, c: f64) -> f64 {
        (self.m + ONE / self.z + self.g1 * self.g2 / c).norm()
    }
}

/// The limiting-spectrum system for given `(H1, H2, c)`.
#[derive(Debug, Clone)]
pub struct SpectralSystem {
    pub h1: SpectralMeasure,
    pub h2: SpectralMeasure,
    pub c: f64,
    pub options: SolverOptions,
}

struct Eval {
    f1: C,
    f2: C,
    d3: C,
    d4: C,
}

impl SpectralSystem {
    pub fn new(h1: SpectralMeasure, h2: SpectralMeasure, c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::Parameter(format!("dimension ratio c = {c} must be positive")));
        }
        Ok(Self { h1, h2, c, options: SolverOptions::default() })
    }

    pub fn with_options(mut self, options: SolverOptions) -> Self {
        self.options = options;
        self
    }

    fn is_degenerate(&self) -> bool {
        let zero_mass = |h: &SpectralMeasure| match h {
            SpectralMeasure::PointMass(x) => *x == 0.0,
            SpectralMeasure::Discrete(a) => a.iter().all(|&(x, _)| x == 0.0),
            SpectralMeasure::Arcsine => false,
        };
        zero_mass(&self.h1) || zero_mass(&self.h2)
    }

    /// Whether both measures live on `[0, ∞)`, so the full admissible set applies.
    pub fn is_nonnegative(&self) -> bool {
        self.h1.support_lo() >= 0.0 && self.h2.support_lo() >= 0.0
    }

    /// `g2 ← −z⁻¹ ∫ y/(1 + g1 y) dH2`.
    fn map_g2(&self, z: C, g1: C) -> Result<C> {
        Ok(-self.h2.resolvent_integral(g1, 1, 1)? / z)
    }

    /// `g1 ← −c z⁻¹ ∫ x/(1 + g2 x) dH1`.
    fn map_g1(&self, z: C, g2: C) -> Result<C> {
        Ok(-self.h1.resolvent_integral(g2, 1, 1)? * self.c / z)
    }

    fn evaluate(&self, z: C, g1: C, g2: C) -> Result<Eval> {
        let [a, d3] = self.h1.resolvent_table(g2, [(1, 1), (2, 2)])?;
        let [b, d4] = self.h2.resolvent_table(g1, [(1, 1), (2, 2)])?;
        Ok(Eval { f1: z * g1 + a * self.c, f2: z * g2 + b, d3, d4 })
    }

    fn defect(e: &Eval) -> f64 {
        e.f1.norm().max(e.f2.norm())
    }

    /// Fixed-point sweeps then Newton from `(g1, g2)` at `z`.
    fn iterate(&self, z: C, mut g1: C, mut g2: C, sweeps: usize, trace: &mut Vec<f64>) -> Result<(C, C, usize)> {
        let opts = &self.options;
        let scale = |a: C, b: C| a.norm().max(b.norm()).max(1.0);
        let mut iterations = 0;

        for _ in 0..sweeps.min(opts.max_iterations) {
            iterations += 1;
            let new_g2 = self.map_g2(z, g1)?;
            let new_g1 = self.map_g1(z, new_g2)?;
            let next1 = g1 + (new_g1 - g1) * opts.damping;
            let next2 = g2 + (new_g2 - g2) * opts.damping;
            let change = (next1 - g1).norm().max((next2 - g2).norm());
            g1 = next1;
            g2 = next2;
            if !(g1.re.is_finite() && g1.im.is_finite() && g2.re.is_finite() && g2.im.is_finite()) {
                break;
            }
            if change < 1e-6 * scale(g1, g2) {
                break;
            }
        }

        let mut current = self.evaluate(z, g1, g2)?;
        let mut defect = Self::defect(&current);
        while iterations < opts.max_iterations {
            iterations += 1;
            trace.push(defect);
            let det = z * z - current.d3 * current.d4 * self.c;
            if det.norm() == 0.0 || !det.re.is_finite() {
                break;
            }
            let step1 = (z * current.f1 + current.d3 * current.f2 * self.c) / det;
            let step2 = (current.d4 * current.f1 + z * current.f2) / det;

            // backtracking on the defect keeps Newton from jumping branches
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..30 {
                let c1 = g1 - step1 * t;
                let c2 = g2 - step2 * t;
                if let Ok(e) = self.evaluate(z, c1, c2) {
                    let d = Self::defect(&e);
                    if d.is_finite() && (d < defect || d <= 1e-15 * scale(c1, c2)) {
                        accepted = Some((c1, c2, e, d));
                        break;
                    }
                }
                t *= 0.5;
            }
            let Some((c1, c2, e, d)) = accepted else {
                // no step improves a defect already at round-off level
                if defect <= 1e-13 * scale(g1, g2) {
                    return Ok((g1, g2, iterations));
                }
                break;
            };
            let change = (c1 - g1).norm().max((c2 - g2).norm());
            g1 = c1;
            g2 = c2;
            current = e;
            defect = d;
            if change <= opts.tolerance * scale(g1, g2) {
                return Ok((g1, g2, iterations));
            }
        }
        Err(Error::NonConvergence {
            z: format!("{z}"),
            iterations,
            residual: defect,
            trace: std::mem::take(trace),
        })
    }

    /// Assembles the triple from converged `(g1, g2)`: recovers `m` and the
    /// defects of the three equations it must satisfy.
    pub fn assemble(&self, z: C, g1: C, g2: C, iterations: usize) -> Result<StieltjesTriple> {
        let c = self.c;
        let inv_z = ONE / z;
        let via_h1 = -inv_z * self.h1.resolvent_integral(g2, 1, 0)?;
        let via_h2 = -inv_z * (1.0 - 1.0 / c) - inv_z / c * self.h2.resolvent_integral(g1, 1, 0)?;
        let via_product = -inv_z - g1 * g2 / c;
        let m = via_h1;
        let residual = (m - via_h2).norm().max((m - via_h1).norm()).max((m - via_product).norm());
        Ok(StieltjesTriple { z, m, g1, g2, residual, iterations })
    }

    fn attempt(&self, z: C, g1: C, g2: C, sweeps: usize, trace: &mut Vec<f64>) -> Result<StieltjesTriple> {
        let (g1, g2, it) = self.iterate(z, g1, g2, sweeps, trace)?;
        let triple = self.assemble(z, g1, g2, it)?;
        let check = if self.is_nonnegative() { triple.admissible() } else { triple.on_branch() };
        check.map_err(|reason| Error::SpuriousRoot { z: format!("{z}"), reason })?;
        Ok(triple)
    }

    /// Walks `Im z` down from `top` to `z.im`, warm-starting each rung. A rung
    /// that fails is retried with a shorter step.
    fn ladder(&self, z: C, start: (C, C), trace: &mut Vec<f64>) -> Result<StieltjesTriple> {
        const MAX_REFINEMENTS: i32 = 8;
        let top = z.im.max(1.0);
        let mut v = top;
        let mut current = self.attempt(C::new(z.re, v), start.0, start.1, self.options.fixed_point_sweeps, trace)?;
        let mut total = current.iterations;
        let mut level = 0;
        while v > z.im {
            let factor = self.options.ladder_factor.powf(0.5f64.powi(level));
            let next = (v * factor).max(z.im);
            match self.attempt(C::new(z.re, next), current.g1, current.g2, 0, trace) {
                Ok(t) => {
                    v = next;
                    total += t.iterations;
                    current = t;
                    level = (level - 1).max(0);
                }
                Err(e) if level >= MAX_REFINEMENTS => return Err(e),
                Err(_) => level += 1,
            }
        }
        current.iterations = total;
        Ok(current)
    }

    /// Solves for the triple at `z` (`Im z > 0`).
    pub fn solve(&self, z: C, warm_start: Option<&StieltjesTriple>) -> Result<StieltjesTriple> {
        if !(z.im > 0.0) || !z.re.is_finite() || !z.im.is_finite() {
            return Err(Error::Parameter(format!("z = {z} must lie in the upper half plane")));
        }
        if self.is_degenerate() {
            // F is the point mass at zero: m = −1/z and g1, g2 vanish to first order
            let g1 = self.map_g1(z, C::new(0.0, 0.0))?;
            return self.assemble(z, g1, C::new(0.0, 0.0), 0);
        }
        let mut trace = Vec::new();
        if let Some(w) = warm_start {
            if let Ok(t) = self.attempt(z, w.g1, w.g2, 0, &mut trace) {
                return Ok(t);
            }
        }
        let cold = -ONE / z;
        let mut last_err = match self.ladder(z, (cold, cold), &mut trace) {
            Ok(t) => return Ok(t),
            Err(e) => e,
        };
        for k in 0..self.options.max_perturbations {
            let angle = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / self.options.max_perturbations as f64;
            let kick = ONE + C::from_polar(0.25, angle);
            let top = C::new(z.re, z.im.max(1.0));
            let start = -kick / top;
            match self.ladder(z, (start, start * kick), &mut trace) {
                Ok(t) => return Ok(t),
                Err(e) => last_err = e,
            }
        }
        Err(last_err)
    }

    /// Solves anywhere off the real axis, using conjugate symmetry below it.
    pub fn solve_anywhere(&self, z: C, warm_start: Option<&StieltjesTriple>) -> Result<StieltjesTriple> {
        if z.im < 0.0 {
            let warm = warm_start.map(|w| if w.z.im < 0.0 { w.conj() } else { *w });
            Ok(self.solve(z.conj(), warm.as_ref())?.conj())
        } else {
            let warm = warm_start.map(|w| if w.z.im < 0.0 { w.conj() } else { *w });
            self.solve(z, warm.as_ref())
        }
    }

    /// `dg1/dz = c∫x/(1+xg2)² dH1 / (z² − c d3 d4)` and
    /// `dg2/dz = ∫y/(1+yg1)² dH2 / (z² − c d3 d4)`.
    pub fn derivatives(&self, t: &StieltjesTriple) -> Result<(C, C)> {
        let [x_sq, d3] = self.h1.resolvent_table(t.g2, [(1, 2), (2, 2)])?;
        let [y_sq, d4] = self.h2.resolvent_table(t.g1, [(1, 2), (2, 2)])?;
        let det = t.z * t.z - d3 * d4 * self.c;
        Ok((x_sq * self.c / det, y_sq / det))
    }

    /// Density `(1/π) Im m(x + i v_min)` on a grid, each point reached by a
    /// geometric ladder in `v` from 1 down to `v_min`.
    pub fn density(&self, grid: &[f64], v_min: f64) -> Result<Vec<(f64, f64)>> {
        if !(v_min > 0.0) {
            return Err(Error::Parameter(format!("v_min = {v_min} must be positive")));
        }
        if grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Parameter("density grid must be strictly increasing".into()));
        }
        grid.par_iter()
            .map(|&x| {
                self.solve(C::new(x, v_min), None)
                    .map(|t| (x, t.m.im / std::f64::consts::PI))
                    .map_err(|e| Error::AtGridPoint { x, source: Box::new(e) })
            })
            .collect()
    }

    /// Cumulative distribution on a grid, by trapezoid integration of
    /// [`Self::density`]. The grid should cover the support.
    pub fn cdf(&self, grid: &[f64], v_min: f64) -> Result<Vec<(f64, f64)>> {
        let dens = self.density(grid, v_min)?;
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(dens.len());
        out.push((dens[0].0, 0.0));
        for w in dens.windows(2) {
            acc += 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0);
            out.push((w[1].0, acc));
        }
        Ok(out)
    }
}

/// Solves at one point with default options.
pub fn solve_triple(
    h1: &SpectralMeasure,
    h2: &SpectralMeasure,
    c: f64,
    z: C,
    warm_start: Option<&StieltjesTriple>,
) -> Result<StieltjesTriple> {
    SpectralSystem::new(h1.clone(), h2.clone(), c)?.solve(z, warm_start)
}

pub fn lsd_density(
    h1: &SpectralMeasure,
    h2: &SpectralMeasure,
    c: f64,
    grid: &[f64],
    v_min: f64,
) -> Result<Vec<(f64, f64)>> {
    SpectralSystem::new(h1.clone(), h2.clone(), c)?.density(grid, v_min)
}

/// An interval `[x_l, x_r]` that contains the limiting support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportEstimate {
    pub x_l: f64,
    pub x_r: f64,
}

/// Fraction of the width added on each side of the raw support bound.
pub const SUPPORT_MARGIN: f64 = 0.05;

impl SupportEstimate {
    pub fn width(&self) -> f64 {
        self.x_r - self.x_l
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.x_l + self.x_r)
    }

    pub fn widen(&self, fraction: f64) -> Self {
        let pad = fraction * self.width();
        Self { x_l: self.x_l - pad, x_r: self.x_r + pad }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.x_l <= x && x <= self.x_r
    }

    /// Reads `s1, s_n` off `H2` and `λ_max, λ_min` off `H1`.
    pub fn from_measures(h1: &SpectralMeasure, h2: &SpectralMeasure, c: f64) -> Result<Self> {
        estimate_support(c, h2.support_hi(), h2.support_lo(), h1.support_hi(), h1.support_lo())
    }
}

/// Raw bound, before the margin:
/// `x_r = s1 λ_max (1 + √c)²`; `x_l = s_n λ_min (1 − √c)² 1(c < 1)` when
/// `s_n ≥ 0` and `x_l = s_n λ_max (1 + √c)²` when `s_n < 0`.
pub fn raw_support(c: f64, s1: f64, sn: f64, lam_max: f64, lam_min: f64) -> Result<SupportEstimate> {
    if !(s1 > 0.0) {
        return Err(Error::Parameter(format!("largest eigenvalue of T2 must be positive, got {s1}")));
    }
    if !(c > 0.0) || lam_max < 0.0 || lam_min < 0.0 {
        return Err(Error::Parameter("need c > 0 and a nonnegative H1 support".into()));
    }
    let upper = (1.0 + c.sqrt()).powi(2);
    let lower = (1.0 - c.sqrt()).powi(2);
    let x_r = s1 * lam_max * upper;
    let x_l = if sn < 0.0 {
        sn * lam_max * upper
    } else if c < 1.0 {
        sn * lam_min * lower
    } else {
        0.0
    };
    Ok(SupportEstimate { x_l, x_r })
}

/// [`raw_support`] widened by [`SUPPORT_MARGIN`] on each side.
pub fn estimate_support(c: f64, s1: f64, sn: f64, lam_max: f64, lam_min: f64) -> Result<SupportEstimate> {
    Ok(raw_support(c, s1, sn, lam_max, lam_min)?.widen(SUPPORT_MARGIN))
}
