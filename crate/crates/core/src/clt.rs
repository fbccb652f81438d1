//! Mean and covariance of linear spectral statistics by contour integration.
//!
//! For analytic `f`, `p ∫ f d(F^{S_n} − F^{c_n,H1n,H2n})` is asymptotically
//! Gaussian. Its mean is a single contour integral whose integrand is built
//! from the kernels `d3 … d6`, and its covariance is a double integral of
//! `∂²/∂z1∂z2 [−log(1 − d) − log(1 − α d) + κ d]`, `d = d(z1, z2)`, over two
//! nonoverlapping contours around the limiting support. The auxiliary
//! functions `g1`, `g2` are supplied on the contours by [`SpectralSystem`].

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::func::AnalyticFn;
use crate::lsd::{SpectralSystem, StieltjesTriple, SupportEstimate};
use crate::model::EntryLaw;
use crate::quadrature::gauss_legendre;
use crate::spectra::SpectralMeasure;

type C = Complex64;

const ONE: C = C::new(1.0, 0.0);
const TWO_PI_I: C = C::new(0.0, 2.0 * std::f64::consts::PI);

/// Default Gauss–Legendre nodes per rectangle side.
pub const NODES_PER_SIDE: usize = 512;
/// Default half-height of the rectangle.
pub const DEFAULT_V0: f64 = 0.5;
/// Scale of the outer contour relative to the inner one.
pub const OUTER_SCALE: f64 = 1.15;
/// Relative step of the central differences of `d(z1, z2)`.
pub const FD_STEP: f64 = 1e-4;

const SINGULAR_TOL: f64 = 1e-8;
const COINCIDENCE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ContourKind {
    Rectangle { x_l: f64, x_r: f64, v0: f64 },
    Circle { center: f64, radius: f64 },
}

/// A quadrature node on a contour: the point and its weighted `dz`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourNode {
    pub z: C,
    pub dz: C,
}

/// A closed, positively oriented contour discretized for quadrature.
#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    pub kind: ContourKind,
    pub nodes: Vec<ContourNode>,
}

impl Contour {
    /// Rectangle with corners `x_l ± i v0`, `x_r ± i v0`, Gauss–Legendre on
    /// each side, traversed counter-clockwise.
    pub fn rectangle(x_l: f64, x_r: f64, v0: f64, nodes_per_side: usize) -> Result<Self> {
        if !(x_l < x_r) || !(v0 > 0.0) || nodes_per_side == 0 {
            return Err(Error::Parameter(format!(
                "bad rectangle [{x_l}, {x_r}] x ±{v0} with {nodes_per_side} nodes per side"
            )));
        }
        let corners = [
            C::new(x_r, -v0),
            C::new(x_r, v0),
            C::new(x_l, v0),
            C::new(x_l, -v0),
        ];
        let (t, w) = gauss_legendre(nodes_per_side);
        let mut nodes = Vec::with_capacity(4 * nodes_per_side);
        for side in 0..4 {
            let a = corners[side];
            let b = corners[(side + 1) % 4];
            let half = (b - a) * 0.5;
            let mid = (a + b) * 0.5;
            for (ti, wi) in t.iter().zip(&w) {
                nodes.push(ContourNode { z: mid + half * *ti, dz: half * *wi });
            }
        }
        Ok(Self { kind: ContourKind::Rectangle { x_l, x_r, v0 }, nodes })
    }

    /// Circle discretized by the trapezoid rule (spectrally accurate for
    /// periodic integrands).
    pub fn circle(center: f64, radius: f64, nodes: usize) -> Result<Self> {
        if !(radius > 0.0) || nodes < 4 {
            return Err(Error::Parameter(format!("bad circle radius {radius} / {nodes} nodes")));
        }
        let step = 2.0 * std::f64::consts::PI / nodes as f64;
        // offset by half a step so that no node sits on the real axis
        let nodes = (0..nodes)
            .map(|k| {
                let e = C::from_polar(1.0, (k as f64 + 0.5) * step);
                ContourNode { z: C::new(center, 0.0) + e * radius, dz: C::new(0.0, radius * step) * e }
            })
            .collect();
        Ok(Self { kind: ContourKind::Circle { center, radius }, nodes })
    }

    /// Rectangle hugging a support estimate.
    pub fn around(support: &SupportEstimate, v0: f64, nodes_per_side: usize) -> Result<Self> {
        Self::rectangle(support.x_l, support.x_r, v0, nodes_per_side)
    }

    /// The same shape scaled by `factor` about the real midpoint.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        match self.kind {
            ContourKind::Rectangle { x_l, x_r, v0 } => {
                let mid = 0.5 * (x_l + x_r);
                let half = 0.5 * (x_r - x_l) * factor;
                Self::rectangle(mid - half, mid + half, v0 * factor, self.nodes.len() / 4)
            }
            ContourKind::Circle { center, radius } => Self::circle(center, radius * factor, self.nodes.len()),
        }
    }

    /// The same shape with twice the nodes.
    pub fn refined(&self) -> Result<Self> {
        match self.kind {
            ContourKind::Rectangle { x_l, x_r, v0 } => Self::rectangle(x_l, x_r, v0, self.nodes.len() / 2),
            ContourKind::Circle { center, radius } => Self::circle(center, radius, 2 * self.nodes.len()),
        }
    }

    /// Whether the closed curve winds once around the real interval `[lo, hi]`
    /// and stays off it.
    pub fn encloses(&self, lo: f64, hi: f64) -> bool {
        match self.kind {
            ContourKind::Rectangle { x_l, x_r, .. } => x_l < lo && hi < x_r,
            ContourKind::Circle { center, radius } => center - radius < lo && hi < center + radius,
        }
    }

    /// Smallest distance from a node to the real interval `[lo, hi]`.
    pub fn min_distance_to(&self, lo: f64, hi: f64) -> f64 {
        self.nodes
            .iter()
            .map(|n| {
                let x = n.z.re.clamp(lo, hi);
                (n.z - x).norm()
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// `∮ h(z) dz`.
    pub fn integrate(&self, h: impl Fn(C) -> C) -> C {
        self.nodes.iter().map(|n| h(n.z) * n.dz).sum()
    }
}

/// The kernels `d3 … d6` at one contour point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CltKernels {
    pub d3: C,
    pub d4: C,
    pub d5: C,
    pub d6: C,
}

/// A contour integral reduced to its real value, keeping the imaginary part
/// (zero in exact arithmetic) as a quadrature diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourValue {
    pub value: f64,
    pub imag: f64,
}

impl ContourValue {
    fn from_complex(v: C) -> Self {
        Self { value: v.re, imag: v.im }
    }
}

/// Means and covariance matrix for a list of test functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltMoments {
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
    /// Largest imaginary part seen among all the contour integrals.
    pub max_imag: f64,
}

/// `(H1, H2, c)` together with the entry-law parameters `α_x`, `κ_x`.
#[derive(Debug, Clone)]
pub struct LssModel {
    pub system: SpectralSystem,
    pub alpha_x: f64,
    pub kappa_x: f64,
}

/// `g1, g2` at `z − h`, `z`, `z + h` for one node of a covariance contour.
#[derive(Debug, Clone, Copy)]
struct Stencil {
    z: [C; 3],
    g1: [C; 3],
    g2: [C; 3],
    h: f64,
}

/// `d(z1, z2)` from the auxiliary functions at both points.
fn d_value(z1: C, g11: C, g21: C, z2: C, g12: C, g22: C) -> Result<C> {
    let dg1 = g11 - g12;
    let dg2 = g21 - g22;
    if dg1.norm() < COINCIDENCE_TOL {
        return Err(Error::CoincidenceLimit { what: "g1(z1) - g1(z2)".into(), value: dg1.norm() });
    }
    if dg2.norm() < COINCIDENCE_TOL {
        return Err(Error::CoincidenceLimit { what: "g2(z1) - g2(z2)".into(), value: dg2.norm() });
    }
    Ok((z1 * g11 - z2 * g12) / dg2 * (z1 * g21 - z2 * g22) / dg1 / (z1 * z2))
}

impl LssModel {
    pub fn new(h1: SpectralMeasure, h2: SpectralMeasure, c: f64, alpha_x: f64, kappa_x: f64) -> Result<Self> {
        if !alpha_x.is_finite() || !kappa_x.is_finite() {
            return Err(Error::Parameter("alpha_x and kappa_x must be finite".into()));
        }
        Ok(Self { system: SpectralSystem::new(h1, h2, c)?, alpha_x, kappa_x })
    }

    pub fn with_law(h1: SpectralMeasure, h2: SpectralMeasure, c: f64, law: &EntryLaw) -> Result<Self> {
        Self::new(h1, h2, c, law.alpha_x, law.kappa_x)
    }

    pub fn c(&self) -> f64 {
        self.system.c
    }

    /// Support bound with the default margin.
    pub fn support(&self) -> Result<SupportEstimate> {
        SupportEstimate::from_measures(&self.system.h1, &self.system.h2, self.system.c)
    }

    /// Inner rectangle around the support and its outward-scaled partner.
    pub fn default_contours(&self) -> Result<(Contour, Contour)> {
        let inner = Contour::around(&self.support()?, DEFAULT_V0, NODES_PER_SIDE)?;
        let outer = inner.scaled(OUTER_SCALE)?;
        Ok((inner, outer))
    }

    /// Solves at every node, warm-starting from the previous node.
    pub fn solve_on(&self, contour: &Contour) -> Result<Vec<StieltjesTriple>> {
        let mut out: Vec<StieltjesTriple> = Vec::with_capacity(contour.nodes.len());
        for node in &contour.nodes {
            if node.z.im == 0.0 {
                return Err(Error::Parameter(format!("contour node {} lies on the real axis", node.z)));
            }
            let t = self.system.solve_anywhere(node.z, out.last())?;
            out.push(t);
        }
        Ok(out)
    }

    pub fn kernels_at(&self, t: &StieltjesTriple) -> Result<CltKernels> {
        let h1 = &self.system.h1;
        let h2 = &self.system.h2;
        let [d3, x_sq, x_cube] = h1.resolvent_table(t.g2, [(2, 2), (1, 2), (3, 3)])?;
        let [d4, y_sq, y_cube] = h2.resolvent_table(t.g1, [(2, 2), (1, 2), (3, 3)])?;
        Ok(CltKernels { d3, d4, d5: d4 * x_cube * y_sq, d6: d3 * x_sq * y_cube })
    }

    /// Integrand of the mean, without `f(z)` and the `1/(2πi)`.
    fn mean_weight(&self, t: &StieltjesTriple) -> Result<C> {
        let c = self.c();
        let k = self.kernels_at(t)?;
        let z = t.z;
        let z2 = z * z;
        let prod = k.d3 * k.d4;
        let ratio = prod * c / z2;
        let denom = ONE - ratio;
        if denom.norm() < SINGULAR_TOL {
            return Err(Error::NearSingular { z: format!("{z}"), what: "|1 - c d3 d4 / z^2|".into(), value: denom.norm() });
        }
        let alpha_denom = ONE - ratio * self.alpha_x;
        if self.alpha_x != 0.0 && alpha_denom.norm() < SINGULAR_TOL {
            return Err(Error::NearSingular {
                z: format!("{z}"),
                what: "|1 - alpha c d3 d4 / z^2|".into(),
                value: alpha_denom.norm(),
            });
        }
        let prefactor = C::new(self.alpha_x, 0.0) / alpha_denom + self.kappa_x;
        let z3 = z2 * z;
        let z4 = z2 * z2;
        let z5 = z4 * z;
        let bracket = prod * c / z3 - prod * prod * (c * c) / z5 + k.d5 * c / z4 + k.d6 * (c * c) / z4;
        Ok(prefactor * bracket / denom)
    }

    /// `E X_f = (1/2πi) ∮ f(z) w(z) dz`.
    pub fn mean(&self, f: &dyn AnalyticFn, contour: &Contour) -> Result<ContourValue> {
        let triples = self.solve_on(contour)?;
        self.mean_from(f, contour, &triples)
    }

    fn mean_from(&self, f: &dyn AnalyticFn, contour: &Contour, triples: &[StieltjesTriple]) -> Result<ContourValue> {
        if self.alpha_x == 0.0 && self.kappa_x == 0.0 {
            return Ok(ContourValue { value: 0.0, imag: 0.0 });
        }
        let mut acc = C::new(0.0, 0.0);
        for (node, t) in contour.nodes.iter().zip(triples) {
            acc += f.eval(node.z) * self.mean_weight(t)? * node.dz;
        }
        Ok(ContourValue::from_complex(acc / TWO_PI_I))
    }

    fn stencils(&self, contour: &Contour) -> Result<Vec<Stencil>> {
        let centers = self.solve_on(contour)?;
        centers
            .par_iter()
            .map(|t| {
                let h = FD_STEP * t.z.norm();
                let lo = self.system.solve_anywhere(t.z - h, Some(t))?;
                let hi = self.system.solve_anywhere(t.z + h, Some(t))?;
                Ok(Stencil {
                    z: [lo.z, t.z, hi.z],
                    g1: [lo.g1, t.g1, hi.g1],
                    g2: [lo.g2, t.g2, hi.g2],
                    h,
                })
            })
            .collect()
    }

    /// `∂²/∂z1∂z2 [−log(1−d) − log(1−αd) + κd]` by central differences.
    fn covariance_kernel(&self, a: &Stencil, b: &Stencil) -> Result<C> {
        let d = |i: usize, j: usize| d_value(a.z[i], a.g1[i], a.g2[i], b.z[j], b.g1[j], b.g2[j]);
        let d0 = d(1, 1)?;
        let d1 = (d(2, 1)? - d(0, 1)?) / (2.0 * a.h);
        let d2 = (d(1, 2)? - d(1, 0)?) / (2.0 * b.h);
        let d12 = (d(2, 2)? - d(2, 0)? - d(0, 2)? + d(0, 0)?) / (4.0 * a.h * b.h);

        let one_minus = ONE - d0;
        if one_minus.norm() < SINGULAR_TOL {
            return Err(Error::NearSingular { z: format!("({}, {})", a.z[1], b.z[1]), what: "|1 - d|".into(), value: one_minus.norm() });
        }
        let mut k = d12 / one_minus + d1 * d2 / (one_minus * one_minus);
        if self.alpha_x != 0.0 {
            let alpha = self.alpha_x;
            let om = ONE - d0 * alpha;
            if om.norm() < SINGULAR_TOL {
                return Err(Error::NearSingular { z: format!("({}, {})", a.z[1], b.z[1]), what: "|1 - alpha d|".into(), value: om.norm() });
            }
            k += d12 * alpha / om + d1 * d2 * (alpha * alpha) / (om * om);
        }
        Ok(k + d12 * self.kappa_x)
    }

    /// `Cov(X_f, X_g) = −(1/4π²) ∮∮ f(z1) g(z2) K(z1, z2) dz1 dz2`.
    pub fn covariance(&self, f: &dyn AnalyticFn, g: &dyn AnalyticFn, contour1: &Contour, contour2: &Contour) -> Result<ContourValue> {
        let s1 = self.stencils(contour1)?;
        let s2 = self.stencils(contour2)?;
        let total = self.double_integral(f, g, contour1, &s1, contour2, &s2)?;
        Ok(ContourValue::from_complex(total))
    }

    fn double_integral(
        &self,
        f: &dyn AnalyticFn,
        g: &dyn AnalyticFn,
        contour1: &Contour,
        s1: &[Stencil],
        contour2: &Contour,
        s2: &[Stencil],
    ) -> Result<C> {
        let gw: Vec<C> = contour2.nodes.iter().map(|n| g.eval(n.z) * n.dz).collect();
        let partial: Result<Vec<C>> = contour1
            .nodes
            .par_iter()
            .zip(s1.par_iter())
            .map(|(n1, a)| {
                let mut inner = C::new(0.0, 0.0);
                for (b, w2) in s2.iter().zip(&gw) {
                    inner += self.covariance_kernel(a, b)? * *w2;
                }
                Ok(f.eval(n1.z) * n1.dz * inner)
            })
            .collect();
        let total: C = partial?.into_iter().sum();
        Ok(total / (TWO_PI_I * TWO_PI_I))
    }

    /// Means and the full covariance matrix of several statistics, reusing
    /// the contour solves.
    pub fn moments(&self, fs: &[&dyn AnalyticFn], contour1: &Contour, contour2: &Contour) -> Result<CltMoments> {
        let s1 = self.stencils(contour1)?;
        let s2 = self.stencils(contour2)?;
        let centers: Vec<StieltjesTriple> = s1
            .iter()
            .map(|s| self.system.assemble(s.z[1], s.g1[1], s.g2[1], 0))
            .collect::<Result<_>>()?;
        let mut max_imag: f64 = 0.0;
        let mut mean = Vec::with_capacity(fs.len());
        for f in fs {
            let v = self.mean_from(*f, contour1, &centers)?;
            max_imag = max_imag.max(v.imag.abs());
            mean.push(v.value);
        }
        let k = fs.len();
        let mut cov = vec![vec![0.0; k]; k];
        for i in 0..k {
            for j in i..k {
                let v = self.double_integral(fs[i], fs[j], contour1, &s1, contour2, &s2)?;
                max_imag = max_imag.max(v.im.abs());
                cov[i][j] = v.re;
                cov[j][i] = v.re;
            }
        }
        Ok(CltMoments { mean, cov, max_imag })
    }

    /// `∫ f dF^{c,H1,H2} = −(1/2πi) ∮ f(z) m(z) dz`.
    pub fn lsd_integral(&self, f: &dyn AnalyticFn, contour: &Contour) -> Result<ContourValue> {
        let triples = self.solve_on(contour)?;
        let acc: C = contour
            .nodes
            .iter()
            .zip(&triples)
            .map(|(n, t)| f.eval(n.z) * t.m * n.dz)
            .sum();
        Ok(ContourValue::from_complex(-acc / TWO_PI_I))
    }
}

pub fn kernels_at(h1: &SpectralMeasure, h2: &SpectralMeasure, c: f64, triple: &StieltjesTriple) -> Result<CltKernels> {
    LssModel::new(h1.clone(), h2.clone(), c, 0.0, 0.0)?.kernels_at(triple)
}

pub fn clt_mean(
    f: &dyn AnalyticFn,
    h1: &SpectralMeasure,
    h2: &SpectralMeasure,
    c: f64,
    alpha_x: f64,
    kappa_x: f64,
    contour: &Contour,
) -> Result<ContourValue> {
    LssModel::new(h1.clone(), h2.clone(), c, alpha_x, kappa_x)?.mean(f, contour)
}

#[allow(clippy::too_many_arguments)]
pub fn clt_covariance(
    f: &dyn AnalyticFn,
    g: &dyn AnalyticFn,
    h1: &SpectralMeasure,
    h2: &SpectralMeasure,
    c: f64,
    alpha_x: f64,
    kappa_x: f64,
    contour1: &Contour,
    contour2: &Contour,
) -> Result<ContourValue> {
    LssModel::new(h1.clone(), h2.clone(), c, alpha_x, kappa_x)?.covariance(f, g, contour1, contour2)
}
