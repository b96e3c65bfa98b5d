//! Seeded generation of the independent-components data model and its
//! finite-rank dependent perturbation.
//!
//! The independent model is X = Σx^{1/2} W₁, Y = Σy^{1/2} W₂ with i.i.d.
//! standardized innovations; the dependent model replaces Y with
//! z_i = ε_i (Σ_k θ_k u_k v_kᵀ) x_i + y_i, where u_k, v_k are uniform on the
//! unit spheres and ε is a standardized scalar.

use faer::Mat;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::rng::{stream_rng, Stream};

/// Law of the i.i.d. innovations. Every variant has mean 0 and variance 1.
///
/// The limit theory additionally needs a finite moment of order ≥ 4 (> 5 for
/// the trace statistics); this is not checked at runtime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum InnovationLaw {
    StandardNormal,
    /// (χ²_df − df)/√(2·df).
    StandardizedChiSquare { df: u32 },
    /// ±1 with equal probability.
    Rademacher,
}

impl InnovationLaw {
    /// Standardized chi-square with the default df = 2.
    pub fn chi_square_default() -> Self {
        InnovationLaw::StandardizedChiSquare { df: 2 }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            InnovationLaw::StandardNormal => StandardNormal.sample(rng),
            InnovationLaw::StandardizedChiSquare { df } => {
                let v = df as f64;
                let x: f64 = ChiSquared::new(v).expect("df > 0").sample(rng);
                (x - v) / (2.0 * v).sqrt()
            }
            InnovationLaw::Rademacher => {
                if rng.gen::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            InnovationLaw::StandardizedChiSquare { df: 0 } => Err(Error::InvalidArgument(
                "chi-square df must be positive".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Finite-rank dependence specification: strengths θ₁ > … > θ_m > 0, the law
/// of the scalar ε, and an optional seed pinning the sphere directions across
/// replicates (None draws fresh directions from the replicate stream).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeSpec {
    pub thetas: Vec<f64>,
    pub epsilon_law: InnovationLaw,
    pub directions_seed: Option<u64>,
}

impl SpikeSpec {
    /// Rademacher ε, per-replicate directions.
    pub fn new(thetas: Vec<f64>) -> Result<Self> {
        let spec = Self {
            thetas,
            epsilon_law: InnovationLaw::Rademacher,
            directions_seed: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.epsilon_law.validate()?;
        for pair in self.thetas.windows(2) {
            if !(pair[0] > pair[1]) {
                return Err(Error::InvalidArgument(format!(
                    "thetas must be strictly decreasing, got {} then {}",
                    pair[0], pair[1]
                )));
            }
        }
        if self.thetas.iter().any(|&t| !(t >= 0.0) || !t.is_finite()) {
            return Err(Error::InvalidArgument(
                "thetas must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }

    pub fn rank(&self) -> usize {
        self.thetas.len()
    }
}

/// How a [`DataPair`] was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairLabel {
    Independent,
    Spiked,
}

/// An observed pair of data matrices: `x` is p×n, `y` is q×n (the latter is
/// the perturbed Z matrix when `label` is `Spiked`). Columns are samples.
#[derive(Debug, Clone)]
pub struct DataPair {
    pub x: Mat<f64>,
    pub y: Mat<f64>,
    pub label: PairLabel,
}

impl DataPair {
    pub fn new(x: Mat<f64>, y: Mat<f64>, label: PairLabel) -> Result<Self> {
        if x.ncols() != y.ncols() {
            return Err(Error::InvalidArgument(format!(
                "x has {} columns but y has {}",
                x.ncols(),
                y.ncols()
            )));
        }
        Ok(Self { x, y, label })
    }

    pub fn p(&self) -> usize {
        self.x.nrows()
    }

    pub fn q(&self) -> usize {
        self.y.nrows()
    }

    pub fn n(&self) -> usize {
        self.x.ncols()
    }
}

fn fill_component(
    mu: &DiscreteMeasure,
    rows: usize,
    cols: usize,
    law: InnovationLaw,
    rng: &mut ChaCha8Rng,
) -> Result<Mat<f64>> {
    let diag = mu.covariance_diagonal(rows)?;
    let scale: Vec<f64> = diag.iter().map(|d| d.sqrt()).collect();
    let mut out = Mat::<f64>::zeros(rows, cols);
    // column-major fill so the draw order matches the matrix layout
    for j in 0..cols {
        for i in 0..rows {
            out[(i, j)] = scale[i] * law.sample(rng);
        }
    }
    Ok(out)
}

/// Draws the independent pair X = Σx^{1/2} W₁, Y = Σy^{1/2} W₂.
///
/// Deterministic given the seed; the two innovation blocks live on disjoint
/// streams so a replicate index can be threaded through unchanged.
pub fn gen_independent(
    dims: (usize, usize, usize),
    hx: &DiscreteMeasure,
    hy: &DiscreteMeasure,
    law: InnovationLaw,
    seed: u64,
) -> Result<DataPair> {
    gen_independent_replicate(dims, hx, hy, law, seed, 0)
}

pub fn gen_independent_replicate(
    (p, q, n): (usize, usize, usize),
    hx: &DiscreteMeasure,
    hy: &DiscreteMeasure,
    law: InnovationLaw,
    seed: u64,
    replicate: u64,
) -> Result<DataPair> {
    if p < 2 || q < 2 || n < 2 {
        return Err(Error::InvalidArgument(format!(
            "dimensions must be at least 2, got p={p} q={q} n={n}"
        )));
    }
    law.validate()?;
    let mut rng1 = stream_rng(seed, Stream::W1, replicate);
    let mut rng2 = stream_rng(seed, Stream::W2, replicate);
    let x = fill_component(hx, p, n, law, &mut rng1)?;
    let y = fill_component(hy, q, n, law, &mut rng2)?;
    DataPair::new(x, y, PairLabel::Independent)
}

fn unit_sphere(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Draws the spiked pair (X, Z) with z_i = ε_i (Σ_k θ_k u_k v_kᵀ) x_i + y_i.
pub fn gen_spiked(
    dims: (usize, usize, usize),
    hx: &DiscreteMeasure,
    hy: &DiscreteMeasure,
    law: InnovationLaw,
    spec: &SpikeSpec,
    seed: u64,
) -> Result<DataPair> {
    gen_spiked_replicate(dims, hx, hy, law, spec, seed, 0)
}

pub fn gen_spiked_replicate(
    (p, q, n): (usize, usize, usize),
    hx: &DiscreteMeasure,
    hy: &DiscreteMeasure,
    law: InnovationLaw,
    spec: &SpikeSpec,
    seed: u64,
    replicate: u64,
) -> Result<DataPair> {
    spec.validate()?;
    let m = spec.rank();
    if m > p.min(q) {
        return Err(Error::InvalidArgument(format!(
            "spike rank {m} exceeds min(p, q) = {}",
            p.min(q)
        )));
    }
    let base = gen_independent_replicate((p, q, n), hx, hy, law, seed, replicate)?;
    let x = base.x;
    let mut z = base.y;

    let active: Vec<f64> = spec.thetas.iter().copied().filter(|&t| t > 0.0).collect();
    if !active.is_empty() {
        let mut dir_rng = match spec.directions_seed {
            Some(s) => stream_rng(s, Stream::Directions, 0),
            None => stream_rng(seed, Stream::Directions, replicate),
        };
        let mut eps_rng = stream_rng(seed, Stream::Epsilon, replicate);

        // gamma = sum_k theta_k u_k v_k', applied as gamma * X, columns scaled by eps
        let mut gamma_x = Mat::<f64>::zeros(q, n);
        for &theta in &active {
            let u = unit_sphere(q, &mut dir_rng);
            let v = unit_sphere(p, &mut dir_rng);
            // (u v') X = u (v' X)
            let mut vx = vec![0.0; n];
            for j in 0..n {
                let mut acc = 0.0;
                for i in 0..p {
                    acc += v[i] * x[(i, j)];
                }
                vx[j] = acc;
            }
            for j in 0..n {
                let s = theta * vx[j];
                for i in 0..q {
                    gamma_x[(i, j)] += s * u[i];
                }
            }
        }
        for j in 0..n {
            let eps = spec.epsilon_law.sample(&mut eps_rng);
            for i in 0..q {
                z[(i, j)] += eps * gamma_x[(i, j)];
            }
        }
    }

    DataPair::new(x, z, PairLabel::Spiked)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn delta1() -> DiscreteMeasure {
        DiscreteMeasure::point_mass(1.0).unwrap()
    }

    fn mat_eq(a: &Mat<f64>, b: &Mat<f64>) -> bool {
        a.nrows() == b.nrows()
            && a.ncols() == b.ncols()
            && (0..a.ncols()).all(|j| (0..a.nrows()).all(|i| a[(i, j)] == b[(i, j)]))
    }

    #[test]
    fn generation_is_deterministic() {
        let hx = delta1();
        let a = gen_independent((5, 4, 6), &hx, &hx, InnovationLaw::StandardNormal, 99).unwrap();
        let b = gen_independent((5, 4, 6), &hx, &hx, InnovationLaw::StandardNormal, 99).unwrap();
        assert!(mat_eq(&a.x, &b.x) && mat_eq(&a.y, &b.y));
        let c = gen_independent((5, 4, 6), &hx, &hx, InnovationLaw::StandardNormal, 100).unwrap();
        assert!(!mat_eq(&a.x, &c.x));
    }

    #[test]
    fn laws_are_standardized() {
        for law in [
            InnovationLaw::StandardNormal,
            InnovationLaw::chi_square_default(),
            InnovationLaw::Rademacher,
        ] {
            let mut rng = stream_rng(5, Stream::Misc, 0);
            let n = 200_000;
            let mut sum = 0.0;
            let mut sq = 0.0;
            for _ in 0..n {
                let x = law.sample(&mut rng);
                sum += x;
                sq += x * x;
            }
            let mean = sum / n as f64;
            let var = sq / n as f64 - mean * mean;
            assert!(mean.abs() < 0.02, "{law:?}: mean {mean}");
            assert!((var - 1.0).abs() < 0.03, "{law:?}: var {var}");
        }
    }

    #[test]
    fn unit_row_variance_under_identity_psd() {
        let hx = delta1();
        let n = 2000;
        let pair =
            gen_independent((20, 20, n), &hx, &hx, InnovationLaw::StandardNormal, 3).unwrap();
        for i in 0..20 {
            let mut sq = 0.0;
            for j in 0..n {
                sq += pair.x[(i, j)] * pair.x[(i, j)];
            }
            let var = sq / n as f64;
            assert!((var - 1.0).abs() < 3.0 / (n as f64).sqrt() * 3.0, "row {i}: {var}");
        }
    }

    #[test]
    fn row_variances_bimodal_for_two_atom_psd() {
        let hx = DiscreteMeasure::new(vec![0.5, 1.0], vec![0.5, 0.5]).unwrap();
        let (p, n) = (200, 2000);
        let pair = gen_independent(
            (p, 4, n),
            &hx,
            &delta1(),
            InnovationLaw::StandardNormal,
            17,
        )
        .unwrap();
        let mut clusters = [Vec::new(), Vec::new()];
        for i in 0..p {
            let mut sq = 0.0;
            for j in 0..n {
                sq += pair.x[(i, j)] * pair.x[(i, j)];
            }
            let var = sq / n as f64;
            let which = usize::from((var - 0.5).abs() > (var - 1.0).abs());
            clusters[which].push(var);
        }
        // two modes of equal size, each centered within 5% of its atom
        assert_eq!(clusters[0].len(), 100);
        assert_eq!(clusters[1].len(), 100);
        let mean0 = clusters[0].iter().sum::<f64>() / 100.0;
        let mean1 = clusters[1].iter().sum::<f64>() / 100.0;
        assert!((mean0 - 0.5).abs() < 0.05 * 0.5, "low mode at {mean0}");
        assert!((mean1 - 1.0).abs() < 0.05, "high mode at {mean1}");
    }

    #[test]
    fn empty_and_zero_spikes_leave_y_unchanged() {
        let hx = delta1();
        let dims = (6, 5, 8);
        let base = gen_independent(dims, &hx, &hx, InnovationLaw::StandardNormal, 42).unwrap();
        for thetas in [vec![], vec![0.0]] {
            let spec = SpikeSpec {
                thetas,
                epsilon_law: InnovationLaw::Rademacher,
                directions_seed: None,
            };
            let spiked =
                gen_spiked(dims, &hx, &hx, InnovationLaw::StandardNormal, &spec, 42).unwrap();
            assert!(mat_eq(&spiked.y, &base.y));
            assert_eq!(spiked.label, PairLabel::Spiked);
        }
    }

    #[test]
    fn spike_rank_cannot_exceed_dims() {
        let hx = delta1();
        let spec = SpikeSpec::new(vec![5.0, 4.0, 3.0]).unwrap();
        let err = gen_spiked((2, 5, 6), &hx, &hx, InnovationLaw::StandardNormal, &spec, 1);
        assert!(err.is_err());
    }

    #[test]
    fn rademacher_spike_is_uncorrelated_with_x() {
        // Remark-1 check: cross covariances vanish even though x and z are dependent
        let hx = delta1();
        let (p, q, n) = (100, 100, 5000);
        let spec = SpikeSpec::new(vec![2.0]).unwrap();
        let pair =
            gen_spiked((p, q, n), &hx, &hx, InnovationLaw::StandardNormal, &spec, 11).unwrap();
        let bound = 5.0 / (n as f64).sqrt();
        let mut worst = 0.0f64;
        for i in (0..p).step_by(7) {
            for k in (0..q).step_by(7) {
                let mut acc = 0.0;
                for j in 0..n {
                    acc += pair.x[(i, j)] * pair.y[(k, j)];
                }
                worst = worst.max((acc / n as f64).abs());
            }
        }
        assert!(worst < bound, "max |cross cov| = {worst}, bound {bound}");
    }

    #[test]
    fn second_moment_identity_of_spiked_norms() {
        // E||x||^2 E||z||^2 = (1/p)||theta||^2 E^2||x||^2 + E||x||^2 E||y||^2
        let hx = delta1();
        let (p, q, n) = (80, 60, 4000);
        let thetas = vec![2.0, 1.0];
        let spec = SpikeSpec::new(thetas.clone()).unwrap();
        let pair =
            gen_spiked((p, q, n), &hx, &hx, InnovationLaw::StandardNormal, &spec, 23).unwrap();
        let mean_sq = |m: &Mat<f64>| {
            let mut acc = 0.0;
            for j in 0..m.ncols() {
                for i in 0..m.nrows() {
                    acc += m[(i, j)] * m[(i, j)];
                }
            }
            acc / m.ncols() as f64
        };
        let ex = mean_sq(&pair.x); // ~ p
        let ez = mean_sq(&pair.y);
        let theta_sq: f64 = thetas.iter().map(|t| t * t).sum();
        let predicted = theta_sq / p as f64 * ex * ex + ex * q as f64;
        let got = ex * ez;
        assert!(
            (got - predicted).abs() / predicted < 0.05,
            "got {got}, predicted {predicted}"
        );
    }

    #[test]
    fn sphere_directions_are_normalized() {
        let mut rng = stream_rng(1, Stream::Directions, 0);
        for dim in [3usize, 50, 500] {
            let v = unit_sphere(dim, &mut rng);
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }
}
