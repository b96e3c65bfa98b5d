//! Limiting spectral distribution of the DCM: the coupled equations for the
//! Stieltjes transform, density reconstruction, and the support edge.
//!
//! For a model (c₁, c₂, H_x, H_y) the transform s(z) of the limit law solves
//!
//! ```text
//! s = (w·m − 1)/z
//! w = ∫ t·s + t·s/(1 + t·s·m/c₁) dH_x(t)
//! m = ∫ t   + t  /(1 + t·w/c₂)   dH_y(t)
//! ```
//!
//! with the branch pinned by Im s > 0, Im w > 0, Im m < 0 on the upper half
//! plane, where the solution is unique. The density follows from the
//! inversion formula as Im s(x + iε)/π at a small offset ε.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;

/// Deterministic input of every limit-law computation: the dimension ratios
/// and the two population spectral distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub c1: f64,
    pub c2: f64,
    pub hx: DiscreteMeasure,
    pub hy: DiscreteMeasure,
}

impl ModelSpec {
    pub fn new(c1: f64, c2: f64, hx: DiscreteMeasure, hy: DiscreteMeasure) -> Result<Self> {
        if !(c1 > 0.0 && c1.is_finite() && c2 > 0.0 && c2.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "dimension ratios must lie in (0, inf), got c1={c1} c2={c2}"
            )));
        }
        Ok(Self { c1, c2, hx, hy })
    }

    /// Identity-covariance model with equal ratios c₁ = c₂ = c.
    pub fn isotropic(c: f64) -> Result<Self> {
        let d1 = DiscreteMeasure::point_mass(1.0)?;
        Self::new(c, c, d1.clone(), d1)
    }

    /// First moment of the limit law, 4·∫t dH_x·∫t dH_y. Used as a point that
    /// is always inside the support when bracketing the edge.
    pub fn lsd_mean(&self) -> f64 {
        4.0 * self.hx.mean() * self.hy.mean()
    }
}

/// A solved point of the system with its branch/residual certificates.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StieltjesPoint {
    pub z: Complex64,
    pub s: Complex64,
    pub w: Complex64,
    pub m: Complex64,
    /// max of the three equation residuals at (s, w, m).
    pub residual: f64,
}

/// Residual tolerance at z: `RESIDUAL_TOL * (1 + |z|)`.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Slack allowed on the branch sign certificates (roundoff at points where an
/// imaginary part is structurally zero, e.g. far outside the support).
const BRANCH_SLACK: f64 = 1e-12;

const FIXED_POINT_DAMPING: f64 = 0.5;
const FIXED_POINT_TOL: f64 = 1e-12;
const FIXED_POINT_CAP: usize = 10_000;
const NEWTON_CAP: usize = 200;
const PERTURBED_RESTARTS: usize = 5;

struct System<'a> {
    model: &'a ModelSpec,
}

impl<'a> System<'a> {
    fn new(model: &'a ModelSpec) -> Self {
        Self { model }
    }

    fn m_of_w(&self, w: Complex64) -> Complex64 {
        let c2 = self.model.c2;
        self.model
            .hy
            .sum_over_complex(|t| t + t / (1.0 + t * w / c2))
    }

    fn w_of_sm(&self, s: Complex64, m: Complex64) -> Complex64 {
        let c1 = self.model.c1;
        self.model
            .hx
            .sum_over_complex(|t| t * s + t * s / (1.0 + t * s * m / c1))
    }

    fn residual(&self, z: Complex64, s: Complex64, w: Complex64, m: Complex64) -> f64 {
        let r1 = (s - (w * m - 1.0) / z).norm();
        let r2 = (w - self.w_of_sm(s, m)).norm();
        let r3 = (m - self.m_of_w(w)).norm();
        r1.max(r2).max(r3)
    }

    /// Far-field expansion: s ~ −1/z, w ~ 2s∫t dH_x, m ~ 2∫t dH_y.
    fn asymptotic_init(&self, z: Complex64) -> (Complex64, Complex64) {
        let s = -1.0 / z;
        let w = s * 2.0 * self.model.hx.mean();
        (w, Complex64::new(2.0 * self.model.hy.mean(), 0.0))
    }

    /// Newton iteration on the reduced complex system
    /// F₁(w,m) = w − W((wm−1)/z, m), F₂(w,m) = m − M(w).
    fn newton(&self, z: Complex64, mut w: Complex64, mut m: Complex64) -> (Complex64, Complex64) {
        let c1 = self.model.c1;
        let c2 = self.model.c2;
        for _ in 0..NEWTON_CAP {
            let s = (w * m - 1.0) / z;
            let f1 = w - self.w_of_sm(s, m);
            let f2 = m - self.m_of_w(w);

            let dh_ds = self
                .model
                .hx
                .sum_over_complex(|t| t + t / (1.0 + t * s * m / c1).powi(2));
            let dh_dm = self
                .model
                .hx
                .sum_over_complex(|t| -(t * s).powi(2) / c1 / (1.0 + t * s * m / c1).powi(2));
            let dmm_dw = self
                .model
                .hy
                .sum_over_complex(|t| -t * t / c2 / (1.0 + t * w / c2).powi(2));

            let a = 1.0 - dh_ds * m / z;
            let b = -(dh_ds * w / z + dh_dm);
            let c = -dmm_dw;
            let d = Complex64::new(1.0, 0.0);
            let det = a * d - b * c;
            if det.norm() < 1e-300 || !det.is_finite() {
                break;
            }
            let dw = (-f1 * d + f2 * b) / det;
            let dm = (-f2 * a + f1 * c) / det;
            let (w2, m2) = (w + dw, m + dm);
            if !w2.is_finite() || !m2.is_finite() {
                break;
            }
            w = w2;
            m = m2;
            if dw.norm() + dm.norm() < 1e-15 * (1.0 + w.norm() + m.norm()) {
                break;
            }
        }
        (w, m)
    }

    /// Damped fixed-point sweep m ← M(w), w ← W(s, m), s ← (wm−1)/z.
    fn fixed_point(
        &self,
        z: Complex64,
        mut s: Complex64,
        mut w: Complex64,
        mut m: Complex64,
    ) -> (Complex64, Complex64, Complex64) {
        let lambda = FIXED_POINT_DAMPING;
        for _ in 0..FIXED_POINT_CAP {
            let m2 = self.m_of_w(w);
            let w2 = self.w_of_sm(s, m);
            let s2 = (w2 * m2 - 1.0) / z;
            if !s2.is_finite() || !w2.is_finite() || !m2.is_finite() {
                break;
            }
            let step = (s - s2).norm() + (w - w2).norm() + (m - m2).norm();
            s = lambda * s + (1.0 - lambda) * s2;
            w = lambda * w + (1.0 - lambda) * w2;
            m = lambda * m + (1.0 - lambda) * m2;
            if step < FIXED_POINT_TOL * (1.0 + s.norm() + w.norm() + m.norm()) {
                break;
            }
        }
        (s, w, m)
    }

    fn certify(&self, z: Complex64, w: Complex64, m: Complex64) -> Result<StieltjesPoint> {
        let s = (w * m - 1.0) / z;
        if !s.is_finite() || !w.is_finite() || !m.is_finite() {
            return Err(Error::SolverFailed {
                z,
                best_residual: f64::INFINITY,
            });
        }
        let residual = self.residual(z, s, w, m);
        if residual > RESIDUAL_TOL * (1.0 + z.norm()) {
            return Err(Error::SolverFailed {
                z,
                best_residual: residual,
            });
        }
        let slack = BRANCH_SLACK * (1.0 + s.norm().max(w.norm()).max(m.norm()));
        if s.im < -slack || w.im < -slack || m.im > slack {
            return Err(Error::BranchViolation {
                z,
                detail: format!("Im s = {:.3e}, Im w = {:.3e}, Im m = {:.3e}", s.im, w.im, m.im),
            });
        }
        Ok(StieltjesPoint { z, s, w, m, residual })
    }

    fn try_from_init(&self, z: Complex64, w0: Complex64, m0: Complex64) -> Result<StieltjesPoint> {
        let (w, m) = self.newton(z, w0, m0);
        if let Ok(pt) = self.certify(z, w, m) {
            return Ok(pt);
        }
        // fall back to the globally gentler fixed point, then polish
        let s0 = (w0 * m0 - 1.0) / z;
        let (_, wf, mf) = self.fixed_point(z, s0, w0, m0);
        let (w, m) = self.newton(z, wf, mf);
        self.certify(z, w, m)
    }

    /// Continuation in the imaginary part: solve high above the real axis
    /// (where the far-field start converges) and walk down to the target.
    fn vertical_continuation(&self, z: Complex64) -> Result<StieltjesPoint> {
        let top = 10.0 * (1.0 + z.re.abs());
        let mut im = top;
        let mut levels = vec![im];
        while im > z.im {
            im = (im * 0.5).max(z.im);
            levels.push(im);
        }
        let (mut w, mut m) = self.asymptotic_init(Complex64::new(z.re, top));
        let mut point = None;
        for &v in &levels {
            let zi = Complex64::new(z.re, v);
            let pt = self.try_from_init(zi, w, m)?;
            w = pt.w;
            m = pt.m;
            point = Some(pt);
        }
        point.ok_or(Error::SolverFailed {
            z,
            best_residual: f64::INFINITY,
        })
    }
}

/// Solves the system at a point of the upper half plane.
///
/// Tries the warm start, then the far-field start, then imaginary-axis
/// continuation, then a handful of deterministically perturbed restarts.
/// The returned point satisfies all three equations to `1e-10·(1+|z|)` and
/// carries the branch signs of the uniqueness set.
pub fn solve_point(
    model: &ModelSpec,
    z: Complex64,
    warm_start: Option<&StieltjesPoint>,
) -> Result<StieltjesPoint> {
    if !(z.im > 0.0) {
        return Err(Error::Domain(format!(
            "solve_point needs Im z > 0, got z = {z}"
        )));
    }
    let sys = System::new(model);
    let mut best_residual = f64::INFINITY;

    let mut inits: Vec<(Complex64, Complex64)> = Vec::new();
    if let Some(p) = warm_start {
        inits.push((p.w, p.m));
    }
    inits.push(sys.asymptotic_init(z));

    for &(w0, m0) in &inits {
        match sys.try_from_init(z, w0, m0) {
            Ok(pt) => return Ok(pt),
            Err(Error::SolverFailed { best_residual: r, .. }) => best_residual = best_residual.min(r),
            Err(_) => {}
        }
    }

    match sys.vertical_continuation(z) {
        Ok(pt) => return Ok(pt),
        Err(Error::SolverFailed { best_residual: r, .. }) => best_residual = best_residual.min(r),
        Err(_) => {}
    }

    // deterministic perturbed restarts seeded by the bit pattern of z
    let mut state = z.re.to_bits() ^ z.im.to_bits().rotate_left(17);
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        0.5 + (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let (wa, ma) = sys.asymptotic_init(z);
    for _ in 0..PERTURBED_RESTARTS {
        let w0 = wa * Complex64::new(next(), 0.3 * (next() - 0.75));
        let m0 = ma * Complex64::new(next(), -0.3 * (next() - 0.75));
        match sys.try_from_init(z, w0, m0) {
            Ok(pt) => return Ok(pt),
            Err(Error::SolverFailed { best_residual: r, .. }) => best_residual = best_residual.min(r),
            Err(_) => {}
        }
    }

    Err(Error::SolverFailed { z, best_residual })
}

/// Density values along an increasing grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityGrid {
    pub xs: Vec<f64>,
    pub fs: Vec<f64>,
    pub eps: f64,
}

impl DensityGrid {
    /// Trapezoid mass of the grid.
    pub fn mass(&self) -> f64 {
        trapezoid(&self.xs, &self.fs)
    }

    /// Mean of the density over [lo, hi], by trapezoid on the stored grid.
    pub fn bin_average(&self, lo: f64, hi: f64) -> f64 {
        let xs: Vec<usize> = (0..self.xs.len())
            .filter(|&i| self.xs[i] >= lo && self.xs[i] <= hi)
            .collect();
        if xs.len() < 2 {
            return 0.0;
        }
        let x: Vec<f64> = xs.iter().map(|&i| self.xs[i]).collect();
        let f: Vec<f64> = xs.iter().map(|&i| self.fs[i]).collect();
        trapezoid(&x, &f) / (x.last().unwrap() - x[0])
    }
}

pub(crate) fn trapezoid(xs: &[f64], fs: &[f64]) -> f64 {
    xs.windows(2)
        .zip(fs.windows(2))
        .map(|(x, f)| 0.5 * (f[0] + f[1]) * (x[1] - x[0]))
        .sum()
}

/// Default imaginary offset of the density approximation f̂(x) = Im s(x+iε)/π.
pub const DENSITY_EPS: f64 = 1e-4;

/// Reconstructs the density on `xs` by sweeping the grid from the right with
/// warm starts (the system is stiffest near the left tail). Negative values
/// from roundoff are clipped to zero.
pub fn density(model: &ModelSpec, xs: &[f64], eps: f64) -> Result<DensityGrid> {
    if xs.is_empty() {
        return Err(Error::InvalidArgument("empty density grid".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    for pair in xs.windows(2) {
        if !(pair[1] > pair[0]) {
            return Err(Error::InvalidArgument(
                "density grid must be strictly increasing".into(),
            ));
        }
    }
    let mut fs = vec![0.0; xs.len()];
    let mut warm: Option<StieltjesPoint> = None;
    for (idx, &x) in xs.iter().enumerate().rev() {
        let z = Complex64::new(x, eps);
        let pt = solve_point(model, z, warm.as_ref()).map_err(|e| Error::GridPoint {
            index: idx,
            x,
            source: Box::new(e),
        })?;
        fs[idx] = (pt.s.im / std::f64::consts::PI).max(0.0);
        warm = Some(pt);
    }
    Ok(DensityGrid {
        xs: xs.to_vec(),
        fs,
        eps,
    })
}

/// Evenly spaced grid helper (inclusive endpoints).
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (count - 1) as f64;
    (0..count).map(|i| lo + step * i as f64).collect()
}

/// How a support edge was located.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeMethod {
    DensityThreshold,
    CubicDiscriminant,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EdgeInfo {
    pub lambda_plus: f64,
    pub method: EdgeMethod,
}

/// Density threshold used by [`support_edge`].
pub const EDGE_TAU: f64 = 1e-3;

/// Locates the right support edge as the density-threshold crossing: bisects
/// the indicator f̂(x) > τ between a point inside the support (the LSD mean)
/// and a point beyond it found by geometric expansion.
///
/// The threshold trades the ε-smoothing tail against resolution; for models
/// whose density decays into a long thin tail the crossing can sit inside the
/// true support (see `spike::bulk_edge` for the exact branch-point edge).
pub fn support_edge(model: &ModelSpec) -> Result<EdgeInfo> {
    support_edge_with(model, EDGE_TAU, DENSITY_EPS)
}

pub fn support_edge_with(model: &ModelSpec, tau: f64, eps: f64) -> Result<EdgeInfo> {
    let f = |x: f64| -> Result<f64> {
        let pt = solve_point(model, Complex64::new(x, eps), None)?;
        Ok((pt.s.im / std::f64::consts::PI).max(0.0))
    };
    let mut lo = model.lsd_mean();
    if f(lo)? <= tau {
        return Err(Error::Domain(format!(
            "density at the LSD mean {lo} is below the edge threshold {tau}"
        )));
    }
    let limit = 1e6 * model.hx.mean();
    let mut hi = 2.0 * lo;
    while f(hi)? > tau {
        hi *= 2.0;
        if hi > limit {
            return Err(Error::EdgeNotFound { limit });
        }
    }
    let tol = 1e-4 * model.lsd_mean();
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if f(mid)? > tau {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(EdgeInfo {
        lambda_plus: 0.5 * (lo + hi),
        method: EdgeMethod::DensityThreshold,
    })
}

/// Right support edge of the isotropic model c₁ = c₂ = c via the closed-form
/// cubic: the largest real x where the discriminant of the cubic in s
/// changes sign (three real roots outside the support, a complex pair
/// inside).
pub fn support_edge_cubic(c: f64) -> Result<EdgeInfo> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidArgument(format!("needs c > 0, got {c}")));
    }
    let disc = |x: f64| {
        let z = Complex64::new(x, 0.0);
        let [d, cc, b, a] = cubic_coefficients(c, z);
        let (a, b, cc, d) = (a.re, b.re, cc.re, d.re);
        18.0 * a * b * cc * d - 4.0 * b.powi(3) * d + b * b * cc * cc
            - 4.0 * a * cc.powi(3)
            - 27.0 * a * a * d * d
    };
    let mut lo = 4.0; // the LSD mean, always inside the support
    if disc(lo) >= 0.0 {
        return Err(Error::Domain(format!(
            "discriminant is nonnegative at the LSD mean for c = {c}"
        )));
    }
    let mut hi = 2.0 * lo;
    let limit = 1e6;
    while disc(hi) < 0.0 {
        hi *= 2.0;
        if hi > limit {
            return Err(Error::EdgeNotFound { limit });
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if disc(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 * hi {
            break;
        }
    }
    Ok(EdgeInfo {
        lambda_plus: 0.5 * (lo + hi),
        method: EdgeMethod::CubicDiscriminant,
    })
}

/// Coefficients of the closed-form cubic in s for the isotropic model
/// c₁ = c₂ = c, H_x = H_y = δ₁:
/// (z−z²)s³ + (1−2z+2cz)s² + (c²z−4c²+2c−1)s + c² = 0.
pub fn cubic_coefficients(c: f64, z: Complex64) -> [Complex64; 4] {
    [
        Complex64::new(c * c, 0.0),
        Complex64::new(-1.0 - 4.0 * c * c + 2.0 * c, 0.0) + c * c * z,
        Complex64::new(1.0, 0.0) + (2.0 * c - 2.0) * z,
        z - z * z,
    ]
}

/// Evaluates the cubic residual at s (coefficients ascending in degree).
pub fn cubic_residual(c: f64, z: Complex64, s: Complex64) -> f64 {
    let a = cubic_coefficients(c, z);
    (a[0] + s * (a[1] + s * (a[2] + s * a[3]))).norm()
}

/// Solves the closed-form cubic and returns the root on the Stieltjes
/// branch, the one in the upper half plane. Errors when no root lies there
/// (z on a branch cut).
///
/// Elimination introduces two spurious roots whose imaginary parts are
/// unconstrained, so "the" upper-half-plane root is identified by homotopy:
/// far above the real axis the branch root is the unique one near −1/z, and
/// it is tracked by proximity as Im z shrinks to the requested value.
pub fn cubic_reference(c: f64, z: Complex64) -> Result<Complex64> {
    if !(z.im > 0.0) {
        return Err(Error::Domain(format!(
            "cubic_reference needs Im z > 0, got {z}"
        )));
    }
    if !(c > 0.0) {
        return Err(Error::InvalidArgument(format!("needs c > 0, got {c}")));
    }
    let roots_at = |im: f64| {
        let zi = Complex64::new(z.re, im);
        let a = cubic_coefficients(c, zi);
        cubic_roots(a[3], a[2], a[1], a[0])
    };
    let closest = |roots: &[Complex64], target: Complex64| {
        roots
            .iter()
            .copied()
            .min_by(|a, b| {
                (a - target)
                    .norm()
                    .partial_cmp(&(b - target).norm())
                    .unwrap()
            })
            .expect("cubic always has roots")
    };

    let top = z.im.max(10.0 * (1.0 + z.re.abs()));
    let mut s = closest(&roots_at(top), -1.0 / Complex64::new(z.re, top));
    let mut im = top;
    while im > z.im {
        im = (im * 0.5).max(z.im);
        s = closest(&roots_at(im), s);
    }
    if s.im > 0.0 {
        return Ok(s);
    }
    // tracking drifted onto the axis; fall back to the best root above it
    let candidates: Vec<Complex64> = roots_at(z.im).into_iter().filter(|r| r.im > 0.0).collect();
    if candidates.is_empty() {
        return Err(Error::BranchViolation {
            z,
            detail: "no cubic root in the upper half plane".into(),
        });
    }
    Ok(closest(&candidates, s))
}

/// Roots of a·s³ + b·s² + c·s + d via Cardano with a Newton polish.
fn cubic_roots(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Vec<Complex64> {
    if a.norm() < 1e-300 {
        // degenerate quadratic
        let disc = (c * c - 4.0 * b * d).sqrt();
        return vec![(-c + disc) / (2.0 * b), (-c - disc) / (2.0 * b)];
    }
    let b1 = b / a;
    let c1 = c / a;
    let d1 = d / a;
    let p = c1 - b1 * b1 / 3.0;
    let q = 2.0 * b1 * b1 * b1 / 27.0 - b1 * c1 / 3.0 + d1;
    let disc = (q * q / 4.0 + p * p * p / 27.0).sqrt();
    let mut u3 = -q / 2.0 + disc;
    if u3.norm() < 1e-300 {
        u3 = -q / 2.0 - disc;
    }
    let u = u3.powf(1.0 / 3.0);
    let omega = Complex64::new(-0.5, 0.75f64.sqrt());
    let mut out = Vec::with_capacity(3);
    for k in 0..3 {
        let uk = u * omega.powu(k);
        let t = if uk.norm() > 1e-150 { uk - p / (3.0 * uk) } else { uk };
        let mut root = t - b1 / 3.0;
        // one Newton pass tightens Cardano roundoff
        for _ in 0..3 {
            let f = ((a * root + b) * root + c) * root + d;
            let df = (3.0 * a * root + 2.0 * b) * root + c;
            if df.norm() < 1e-300 {
                break;
            }
            root -= f / df;
        }
        out.push(root);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model1() -> ModelSpec {
        ModelSpec::isotropic(1.0).unwrap()
    }

    fn model2() -> ModelSpec {
        ModelSpec::new(
            2.0,
            1.0,
            DiscreteMeasure::new(vec![0.5, 1.0], vec![0.5, 0.5]).unwrap(),
            DiscreteMeasure::new(vec![0.25, 0.75], vec![0.5, 0.5]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn far_field_behaves_like_free_stieltjes() {
        for model in [model1(), model2()] {
            let z = Complex64::new(7.3e5, 4.0e5);
            let pt = solve_point(&model, z, None).unwrap();
            let rel = (pt.s + 1.0 / z).norm() / (1.0 / z).norm();
            assert!(rel < 1e-4, "relative gap {rel}");
        }
    }

    #[test]
    fn solution_satisfies_closed_form_cubic() {
        for c in [1.0f64, 3.0, 5.0] {
            let model = ModelSpec::isotropic(c).unwrap();
            let mut warm = None;
            for i in (1..=60).rev() {
                let x = 0.6 * i as f64;
                let z = Complex64::new(x, DENSITY_EPS);
                let pt = solve_point(&model, z, warm.as_ref()).unwrap();
                assert!(
                    cubic_residual(c, z, pt.s) < 1e-8,
                    "c={c} x={x}: residual {}",
                    cubic_residual(c, z, pt.s)
                );
                warm = Some(pt);
            }
        }
    }

    #[test]
    fn model1_reduces_to_quoted_single_equation() {
        // (z^2 - z) s^3 - s^2 + (3 - z) s - 1 = 0 at c = 1
        let model = model1();
        let z = Complex64::new(2.5, DENSITY_EPS);
        let s = solve_point(&model, z, None).unwrap().s;
        let val = (z * z - z) * s.powu(3) - s * s + (3.0 - z) * s - 1.0;
        assert!(val.norm() < 1e-8, "{val}");
    }

    #[test]
    fn branch_certificates_hold_along_grid() {
        let model = model2();
        let grid = linspace(0.05, 8.0, 120);
        let dg = density(&model, &grid, DENSITY_EPS).unwrap();
        assert!(dg.fs.iter().all(|&f| f >= 0.0));
        // spot-check certificates and the consistency relation
        let mut warm = None;
        for &x in grid.iter().rev().step_by(10) {
            let z = Complex64::new(x, DENSITY_EPS);
            let pt = solve_point(&model, z, warm.as_ref()).unwrap();
            assert!(pt.s.im > -1e-12 && pt.w.im > -1e-12 && pt.m.im < 1e-12);
            assert!((pt.s - (pt.w * pt.m - 1.0) / z).norm() <= RESIDUAL_TOL * (1.0 + z.norm()));
            warm = Some(pt);
        }
    }

    #[test]
    fn warm_and_cold_starts_agree() {
        let model = model2();
        let z = Complex64::new(3.7, DENSITY_EPS);
        let cold = solve_point(&model, z, None).unwrap();
        let neighbor = solve_point(&model, Complex64::new(3.9, DENSITY_EPS), None).unwrap();
        let warm = solve_point(&model, z, Some(&neighbor)).unwrap();
        assert!((cold.s - warm.s).norm() < 1e-8);
        assert!((cold.w - warm.w).norm() < 1e-8);
        assert!((cold.m - warm.m).norm() < 1e-8);
    }

    #[test]
    fn density_mass_is_one_for_model1() {
        let model = model1();
        let grid = linspace(1e-3, 20.0, 900);
        let dg = density(&model, &grid, DENSITY_EPS).unwrap();
        let mass = dg.mass();
        assert!((mass - 1.0).abs() < 0.02, "mass {mass}");
    }

    #[test]
    fn density_c3_is_unimodal_with_finite_edge() {
        let model = ModelSpec::isotropic(3.0).unwrap();
        let grid = linspace(0.1, 40.0, 500);
        let dg = density(&model, &grid, DENSITY_EPS).unwrap();
        let peak = dg
            .fs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        // rises to a single hump, then decays through the edge
        assert!(peak > 0 && peak < dg.fs.len() - 1);
        let above: Vec<usize> = (0..dg.fs.len()).filter(|&i| dg.fs[i] > 1e-3).collect();
        let (first, last) = (above[0], *above.last().unwrap());
        for i in first..peak {
            assert!(dg.fs[i] <= dg.fs[i + 1] + 1e-4);
        }
        for i in peak..last {
            assert!(dg.fs[i] + 1e-4 >= dg.fs[i + 1]);
        }
        assert!(dg.fs[dg.fs.len() - 1] < 1e-6);
    }

    #[test]
    fn density_rejects_bad_grids() {
        let model = model1();
        assert!(density(&model, &[], DENSITY_EPS).is_err());
        assert!(density(&model, &[1.0, 1.0], DENSITY_EPS).is_err());
        assert!(density(&model, &[1.0, 2.0], 0.0).is_err());
    }

    #[test]
    fn cubic_reference_matches_solver_at_c5() {
        let model = ModelSpec::isotropic(5.0).unwrap();
        let mut warm = None;
        let mut worst: f64 = 0.0;
        for i in (0..80).rev() {
            let x = 1.0 + 29.0 * i as f64 / 79.0;
            let z = Complex64::new(x, DENSITY_EPS);
            let pt = solve_point(&model, z, warm.as_ref()).unwrap();
            let root = cubic_reference(5.0, z).unwrap();
            worst = worst.max((pt.s - root).norm());
            warm = Some(pt);
        }
        assert!(worst < 1e-6, "max |delta s| = {worst}");
    }

    #[test]
    fn cubic_reference_far_field() {
        let z = Complex64::new(4.0e5, 3.0e5);
        let root = cubic_reference(2.0, z).unwrap();
        assert!((root + 1.0 / z).norm() < 1e-4 * (1.0 / z).norm() * 10.0);
    }

    #[test]
    fn cubic_c1_matches_model1_equation() {
        let z = Complex64::new(1.7, 1e-4);
        let s = cubic_reference(1.0, z).unwrap();
        let val = (z * z - z) * s.powu(3) - s * s + (3.0 - z) * s - 1.0;
        assert!(val.norm() < 1e-10, "{val}");
    }

    #[test]
    fn model4_edge_near_quoted_value() {
        let model = ModelSpec::isotropic(2.0).unwrap();
        let edge = support_edge(&model).unwrap();
        assert_eq!(edge.method, EdgeMethod::DensityThreshold);
        assert!((edge.lambda_plus - 9.95).abs() < 0.05, "{}", edge.lambda_plus);
    }

    #[test]
    fn discriminant_edge_agrees_with_branch_fold() {
        for c in [1.0f64, 2.0] {
            let by_cubic = support_edge_cubic(c).unwrap();
            assert_eq!(by_cubic.method, EdgeMethod::CubicDiscriminant);
            let by_fold = crate::spike::bulk_edge(&ModelSpec::isotropic(c).unwrap()).unwrap();
            assert!(
                (by_cubic.lambda_plus - by_fold.lambda_plus).abs() < 1e-3,
                "c={c}: {} vs {}",
                by_cubic.lambda_plus,
                by_fold.lambda_plus
            );
        }
    }

    #[test]
    fn real_imag_split_relations_hold_near_axis() {
        // the two closed-form expressions for s_v^2 obtained by separating
        // real and imaginary parts of the cubic at z = x + iv, v -> 0
        for c in [1.0f64, 2.0] {
            let model = ModelSpec::isotropic(c).unwrap();
            for x in [2.0f64, 4.0, 6.0] {
                let eps = 1e-9;
                let pt = solve_point(&model, Complex64::new(x, eps), None).unwrap();
                let (su, sv) = (pt.s.re, pt.s.im);
                let num1 = c * c - su + 2.0 * c * su - 4.0 * c * c * su + c * c * x * su
                    + su * su
                    - 2.0 * x * su * su
                    + 2.0 * c * x * su * su
                    + x * su.powi(3)
                    - x * x * su.powi(3);
                let den1 = 1.0 - 2.0 * x + 2.0 * c * x + 3.0 * x * su - 3.0 * x * x * su;
                let num2 = 1.0 - 2.0 * c + 4.0 * c * c
                    - c * c * x
                    - 2.0 * su
                    + 4.0 * x * su
                    - 4.0 * c * x * su
                    - 3.0 * x * su * su
                    + 3.0 * x * x * su * su;
                let den2 = -x + x * x;
                let e1 = num1 / den1;
                let e2 = num2 / den2;
                assert!((e1 - sv * sv).abs() < 1e-8 * (1.0 + sv * sv), "c={c} x={x}: {e1} vs {}", sv * sv);
                assert!((e2 - sv * sv).abs() < 1e-8 * (1.0 + sv * sv), "c={c} x={x}: {e2} vs {}", sv * sv);
            }
        }
    }

    #[test]
    fn model5_edge_is_finite_positive() {
        let d1 = DiscreteMeasure::point_mass(1.0).unwrap();
        let model = ModelSpec::new(0.1, 0.2, d1.clone(), d1).unwrap();
        let edge = support_edge(&model).unwrap();
        assert!(edge.lambda_plus > 0.0 && edge.lambda_plus.is_finite());
    }

    #[test]
    fn empirical_stieltjes_transform_approaches_limit() {
        use crate::dcm::build_dcm;
        use crate::synth::{gen_independent, InnovationLaw};

        let model = model1();
        let z = Complex64::new(0.5 * 13.68, 1.0);
        let limit = solve_point(&model, z, None).unwrap().s;
        let mut errs = Vec::new();
        for n in [200usize, 800] {
            let pair = gen_independent(
                (n, n, n),
                &model.hx,
                &model.hy,
                InnovationLaw::StandardNormal,
                77,
            )
            .unwrap();
            let eigs = build_dcm(&pair).unwrap().eigenvalues;
            let emp: Complex64 = eigs
                .iter()
                .map(|&l| 1.0 / (Complex64::new(l, 0.0) - z))
                .sum::<Complex64>()
                / n as f64;
            errs.push((emp - limit).norm());
        }
        assert!(
            errs[1] <= 0.5 * errs[0] + 1e-3,
            "n=200 err {:.2e}, n=800 err {:.2e}",
            errs[0],
            errs[1]
        );
    }
}
