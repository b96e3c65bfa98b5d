//! Real-axis extension of the system beyond the support edge: the function
//! g(λ), the phase-transition threshold θ₀, and the spike-location map.
//!
//! Outside the support the solution triple is real and can be parametrized
//! by the auxiliary variable w: m(w) is an explicit integral, s(w) tracks a
//! polynomial root continued from the w → 0⁻ asymptote, and
//! λ(w) = (w·m − 1)/s. As λ decreases toward the edge the branch folds
//! (dλ/dw = 0); the fold is exactly the right edge λ₊, which makes the
//! parametrization stable where λ-stepping continuation loses the branch.
//! The detection map is then
//!
//! ```text
//! g(λ) = −∫t dH_x · ∫ w(λ)/(c₂ + t·w(λ)) dH_y,   θ₀ = g(λ₊⁺)^{-1/2},
//! ```
//!
//! with a dependence strength θ > θ₀ producing an outlier at λ = g⁻¹(1/θ²).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lsd::ModelSpec;

/// Newton root-tracking of s along a geometric path in w. The cursor starts
/// on the asymptotic branch s ≈ w/(2∫t dH_x) near w = 0⁻ and must only be
/// advanced away from zero.
struct BranchCursor<'a> {
    model: &'a ModelSpec,
    w: f64,
    s: f64,
}

const W_START_FRACTION: f64 = 1e-12;
const W_STEP_RATIO: f64 = 1.05;

impl<'a> BranchCursor<'a> {
    fn start(model: &'a ModelSpec) -> Self {
        let w = -W_START_FRACTION * model.c2 / model.hy.max_atom();
        let s = w / (2.0 * model.hx.mean());
        let mut cur = Self { model, w, s };
        cur.refine();
        cur
    }

    fn m_of_w(model: &ModelSpec, w: f64) -> f64 {
        let c2 = model.c2;
        model.hy.sum_over(|t| t + t / (1.0 + t * w / c2))
    }

    /// One Newton solve of w = ∫ t·s + t·s/(1 + t·s·m/c₁) dH_x at fixed w.
    fn refine(&mut self) {
        let c1 = self.model.c1;
        let m = Self::m_of_w(self.model, self.w);
        let mut s = self.s;
        for _ in 0..200 {
            let f = self
                .model
                .hx
                .sum_over(|t| t * s + t * s / (1.0 + t * s * m / c1))
                - self.w;
            let df = self
                .model
                .hx
                .sum_over(|t| t + t / (1.0 + t * s * m / c1).powi(2));
            let step = f / df;
            s -= step;
            if step.abs() < 1e-16 * (1.0 + s.abs()) {
                break;
            }
        }
        self.s = s;
    }

    /// Moves the cursor to `w_target` (same sign, larger magnitude allowed in
    /// either direction), stepping geometrically so the root never jumps
    /// branches.
    fn advance_to(&mut self, w_target: f64) {
        debug_assert!(w_target < 0.0);
        if self.w == w_target {
            return;
        }
        let ratio = (w_target / self.w).abs().ln().abs();
        let steps = (ratio / W_STEP_RATIO.ln()).ceil() as usize + 1;
        let factor = (w_target / self.w).abs().powf(1.0 / steps as f64);
        for _ in 0..steps {
            self.w *= factor;
            self.refine();
        }
        self.w = w_target;
        self.refine();
    }

    fn lambda(&self) -> f64 {
        let m = Self::m_of_w(self.model, self.w);
        (self.w * m - 1.0) / self.s
    }

    fn triple(&self) -> (f64, f64, f64) {
        (self.s, self.w, Self::m_of_w(self.model, self.w))
    }
}

fn g_of_w(model: &ModelSpec, w: f64) -> f64 {
    let c2 = model.c2;
    -model.hx.mean() * model.hy.sum_over(|t| w / (c2 + t * w))
}

/// λ(w) evaluated by a fresh cursor walk; used by the fold search and the
/// w-bisections, which probe non-monotone sequences of w.
fn lambda_at(model: &ModelSpec, w: f64) -> f64 {
    let mut cur = BranchCursor::start(model);
    cur.advance_to(w);
    cur.lambda()
}

/// The exact right edge of the support: the branch-point of the real
/// solution path, with the auxiliary value w* and g₊ = g(λ₊⁺) at the fold.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BulkEdge {
    pub lambda_plus: f64,
    pub w_star: f64,
    pub g_plus: f64,
}

/// Locates the fold of λ(w) by geometric expansion from w → 0⁻ followed by a
/// golden-section refinement.
pub fn bulk_edge(model: &ModelSpec) -> Result<BulkEdge> {
    let w_pole = -model.c2 / model.hy.max_atom();
    let mut cur = BranchCursor::start(model);
    let mut w_hist = [cur.w; 3];
    let mut lam_prev = cur.lambda();
    let mut bracket = None;
    for _ in 0..20_000 {
        let w_next = cur.w * 1.02;
        if w_next <= w_pole * (1.0 - 1e-9) {
            break;
        }
        cur.advance_to(w_next);
        w_hist = [w_hist[1], w_hist[2], cur.w];
        let lam = cur.lambda();
        if lam > lam_prev {
            bracket = Some((w_hist[0], w_hist[2]));
            break;
        }
        lam_prev = lam;
    }
    let (a, b) = bracket.ok_or(Error::EdgeNotFound {
        limit: w_pole.abs(),
    })?;
    let (mut lo, mut hi) = (a.min(b), a.max(b));
    let phi = 0.5 * (5.0f64.sqrt() - 1.0);
    let mut c = hi - phi * (hi - lo);
    let mut d = lo + phi * (hi - lo);
    let mut fc = lambda_at(model, c);
    let mut fd = lambda_at(model, d);
    for _ in 0..300 {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - phi * (hi - lo);
            fc = lambda_at(model, c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + phi * (hi - lo);
            fd = lambda_at(model, d);
        }
        if hi - lo < 1e-13 * lo.abs() {
            break;
        }
    }
    let w_star = 0.5 * (lo + hi);
    Ok(BulkEdge {
        lambda_plus: lambda_at(model, w_star),
        w_star,
        g_plus: g_of_w(model, w_star),
    })
}

/// Real-branch solution (s, w, m) of the system at λ > λ₊.
///
/// Implemented as a bisection in w of the parametrized branch (λ(w) is
/// strictly increasing between the fold and 0⁻), which is continuation from
/// large λ in disguise but remains stable arbitrarily close to the edge.
pub fn solve_real(model: &ModelSpec, lambda: f64) -> Result<(f64, f64, f64)> {
    let edge = bulk_edge(model)?;
    solve_real_with_edge(model, lambda, &edge)
}

pub fn solve_real_with_edge(
    model: &ModelSpec,
    lambda: f64,
    edge: &BulkEdge,
) -> Result<(f64, f64, f64)> {
    if !(lambda > edge.lambda_plus) {
        return Err(Error::Domain(format!(
            "lambda = {lambda} is not beyond the support edge {:.6}",
            edge.lambda_plus
        )));
    }
    let mut lo = edge.w_star;
    let mut hi = -W_START_FRACTION * model.c2 / model.hy.max_atom();
    let mut cur = BranchCursor::start(model);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        cur.advance_to(mid);
        if cur.lambda() > lambda {
            hi = mid;
        } else {
            lo = mid;
        }
        if (hi - lo).abs() < 1e-15 * lo.abs() {
            break;
        }
    }
    cur.advance_to(0.5 * (lo + hi));
    let (s, w, m) = cur.triple();
    let resid = real_residual(model, lambda, s, w, m);
    if resid > 1e-10 * (1.0 + lambda.abs()) || !(s < 0.0) {
        return Err(Error::SolverFailed {
            z: num_complex::Complex64::new(lambda, 0.0),
            best_residual: resid,
        });
    }
    Ok((s, w, m))
}

fn real_residual(model: &ModelSpec, lambda: f64, s: f64, w: f64, m: f64) -> f64 {
    let c1 = model.c1;
    let c2 = model.c2;
    let r1 = (s - (w * m - 1.0) / lambda).abs();
    let r2 = (w - model.hx.sum_over(|t| t * s + t * s / (1.0 + t * s * m / c1))).abs();
    let r3 = (m - model.hy.sum_over(|t| t + t / (1.0 + t * w / c2))).abs();
    r1.max(r2).max(r3)
}

/// g(λ) = −∫t dH_x · ∫ w(λ)/(c₂ + t·w(λ)) dH_y for λ beyond the edge.
pub fn g_eval(model: &ModelSpec, lambda: f64) -> Result<f64> {
    let edge = bulk_edge(model)?;
    g_eval_with_edge(model, lambda, &edge)
}

pub fn g_eval_with_edge(model: &ModelSpec, lambda: f64, edge: &BulkEdge) -> Result<f64> {
    let (_, w, _) = solve_real_with_edge(model, lambda, edge)?;
    Ok(g_of_w(model, w))
}

/// Critical dependence strength θ₀ = lim_{λ↓λ₊} g(λ)^{-1/2}.
///
/// Evaluates θ(δ) = g(λ₊+δ)^{-1/2} on the shrinking sequence
/// δ_j = 2^{-j}·0.01·λ₊ and extrapolates in √δ (the edge behavior of g),
/// stopping when two successive extrapolants agree to 1e-3 relative.
pub fn theta_critical(model: &ModelSpec) -> Result<f64> {
    let edge = bulk_edge(model)?;
    theta_critical_with_edge(model, &edge)
}

pub fn theta_critical_with_edge(model: &ModelSpec, edge: &BulkEdge) -> Result<f64> {
    let ratio = std::f64::consts::SQRT_2;
    let mut thetas: Vec<f64> = Vec::new();
    let mut extrapolated: Vec<f64> = Vec::new();
    for j in 0..40 {
        let delta = 0.01 * edge.lambda_plus * 0.5f64.powi(j);
        let g = g_eval_with_edge(model, edge.lambda_plus + delta, edge)?;
        if !(g > 0.0) {
            return Err(Error::NonConvergent { sequence: thetas });
        }
        thetas.push(g.powf(-0.5));
        let k = thetas.len();
        if k >= 2 {
            extrapolated.push(thetas[k - 1] + (thetas[k - 1] - thetas[k - 2]) / (ratio - 1.0));
        }
        let e = extrapolated.len();
        if e >= 2 && (extrapolated[e - 1] - extrapolated[e - 2]).abs() < 1e-3 * extrapolated[e - 1].abs() {
            return Ok(extrapolated[e - 1]);
        }
    }
    Err(Error::NonConvergent { sequence: thetas })
}

/// Predicted location of a spiked eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "regime", content = "lambda")]
pub enum SpikeLocation {
    /// θ ≤ θ₀: the eigenvalue sticks to the bulk edge; no outlier predicted.
    Subcritical,
    /// θ > θ₀: the eigenvalue separates, converging to g⁻¹(1/θ²).
    Outlier(f64),
}

impl SpikeLocation {
    pub fn outlier(&self) -> Option<f64> {
        match *self {
            SpikeLocation::Outlier(l) => Some(l),
            SpikeLocation::Subcritical => None,
        }
    }
}

/// λ(θ) = g⁻¹(1/θ²) for supercritical θ, the subcritical marker otherwise.
pub fn spike_location(model: &ModelSpec, theta: f64) -> Result<SpikeLocation> {
    let edge = bulk_edge(model)?;
    spike_location_with_edge(model, theta, &edge)
}

pub fn spike_location_with_edge(
    model: &ModelSpec,
    theta: f64,
    edge: &BulkEdge,
) -> Result<SpikeLocation> {
    if !(theta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "theta must be positive, got {theta}"
        )));
    }
    let target = 1.0 / (theta * theta);
    if target >= edge.g_plus {
        return Ok(SpikeLocation::Subcritical);
    }
    // g is strictly decreasing in w on (w*, 0); bisect w, then map to lambda
    let mut lo = edge.w_star;
    let mut hi = -f64::MIN_POSITIVE;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g_of_w(model, mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo).abs() < 1e-9 * lo.abs() {
            break;
        }
    }
    let w = 0.5 * (lo + hi);
    Ok(SpikeLocation::Outlier(lambda_at(model, w)))
}

/// Sampled picture of the detection map beyond the edge.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpikeCurve {
    pub model: ModelSpec,
    pub lambda_plus: f64,
    pub theta0: f64,
    /// (λ, g(λ)) pairs, λ ascending from just beyond the edge.
    pub samples: Vec<(f64, f64)>,
}

impl SpikeCurve {
    /// Samples g along the branch from the edge out to `lambda_max`.
    pub fn build(model: &ModelSpec, lambda_max: f64, count: usize) -> Result<Self> {
        let edge = bulk_edge(model)?;
        let theta0 = theta_critical_with_edge(model, &edge)?;
        if !(lambda_max > edge.lambda_plus) || count < 2 {
            return Err(Error::InvalidArgument(
                "need lambda_max beyond the edge and at least two samples".into(),
            ));
        }
        let mut samples = Vec::with_capacity(count);
        let mut cur = BranchCursor::start(model);
        // geometric in w between near-zero and the fold, then report (lambda, g)
        let w0 = -W_START_FRACTION * model.c2 / model.hy.max_atom();
        for i in 0..count {
            let frac = i as f64 / (count - 1) as f64;
            let w = -(w0.abs().ln() * (1.0 - frac) + edge.w_star.abs().ln() * frac).exp();
            cur.advance_to(w);
            let lam = cur.lambda();
            if lam <= lambda_max || i == count - 1 {
                samples.push((lam, g_of_w(model, w)));
            }
        }
        samples.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        Ok(Self {
            model: model.clone(),
            lambda_plus: edge.lambda_plus,
            theta0,
            samples,
        })
    }
}

/// Model catalog of the simulation studies; dimension ratios and PSDs pinned.
pub mod models {
    use super::ModelSpec;
    use crate::measure::DiscreteMeasure;

    /// c₁ = c₂ = 1, both PSDs δ₁.
    pub fn model1() -> ModelSpec {
        ModelSpec::isotropic(1.0).expect("static model")
    }

    /// c₁ = 2, c₂ = 1, H_x = ½δ_{0.5}+½δ₁, H_y = ½δ_{0.25}+½δ_{0.75}.
    pub fn model2() -> ModelSpec {
        ModelSpec::new(
            2.0,
            1.0,
            DiscreteMeasure::new(vec![0.5, 1.0], vec![0.5, 0.5]).expect("static"),
            DiscreteMeasure::new(vec![0.25, 0.75], vec![0.5, 0.5]).expect("static"),
        )
        .expect("static model")
    }

    /// c₁ = c₂ = 2, both PSDs δ₁.
    pub fn model4() -> ModelSpec {
        ModelSpec::isotropic(2.0).expect("static model")
    }

    /// c₁ = 0.1, c₂ = 0.2, both PSDs δ₁.
    pub fn model5() -> ModelSpec {
        let d1 = DiscreteMeasure::point_mass(1.0).expect("static");
        ModelSpec::new(0.1, 0.2, d1.clone(), d1).expect("static model")
    }

    /// c₁ = 1, c₂ = 2, H_x = ½δ_{0.5}+½δ₁, H_y = ½δ₁+½δ_{1.5}.
    pub fn model6() -> ModelSpec {
        ModelSpec::new(
            1.0,
            2.0,
            DiscreteMeasure::new(vec![0.5, 1.0], vec![0.5, 0.5]).expect("static"),
            DiscreteMeasure::new(vec![1.0, 1.5], vec![0.5, 0.5]).expect("static"),
        )
        .expect("static model")
    }
}
