//! Distance covariance matrices and the trace statistics built on them.
//!
//! For data matrices X (p×n) and Y (q×n) the DCM is
//! S = P D_x P D_y P with D_x = XᵀX/p + κ_x I, κ_x = (pn)⁻¹ Σ‖x_i‖²,
//! D_y analogous, and P = I − 𝟙𝟙ᵀ/n. Its nonzero spectrum coincides with the
//! spectrum of the symmetric PSD matrix G^{1/2} D_y G^{1/2}, G = P D_x P,
//! which is how eigenvalues are computed here: symmetric solvers are
//! backward-stable and the similarity argument guarantees equal nonzero
//! spectra. The squared sample distance covariance has the exact identity
//! V² = (√(pq)/n²)·tr(P V_x P V_y P) with V_x the √p-scaled distance matrix,
//! which doubles as a fast evaluation route; the triple-sum form stays
//! available as an independent oracle.

use faer::Mat;

use crate::error::{Error, Result};
use crate::linalg::{center_project, column_distance_matrix, frob_inner, sym_eigen, sym_eigenvalues, trace};
use crate::synth::DataPair;

/// A built DCM: the two D matrices, their κ constants, and the spectrum of
/// P D_x P D_y P in descending order.
#[derive(Debug, Clone)]
pub struct DcmBundle {
    pub dx: Mat<f64>,
    pub dy: Mat<f64>,
    pub kappa_x: f64,
    pub kappa_y: f64,
    /// Descending; the trailing value is the structural zero of the 𝟙 direction.
    pub eigenvalues: Vec<f64>,
}

impl DcmBundle {
    /// tr S = tr(P D_x P D_y P), evaluated from the stored matrices.
    pub fn trace_s(&self) -> f64 {
        let g = center_project(self.dx.as_ref());
        // tr(G Dy P) = tr(P G Dy) = tr(G Dy) since P G = G
        let gdy = &g * &self.dy;
        trace(gdy.as_ref())
    }

    /// Eigenvalues with the numerically-zero tail trimmed
    /// (threshold `1e-10·λ_max`), ready for ratio-based rank estimation.
    pub fn positive_eigenvalues(&self) -> Vec<f64> {
        let lead = self.eigenvalues.first().copied().unwrap_or(0.0);
        let floor = 1e-10 * lead.max(0.0);
        self.eigenvalues
            .iter()
            .copied()
            .take_while(|&v| v > floor)
            .collect()
    }
}

fn kappa(m: &Mat<f64>) -> f64 {
    let (rows, cols) = m.shape();
    let mut acc = 0.0;
    for j in 0..cols {
        for i in 0..rows {
            acc += m[(i, j)] * m[(i, j)];
        }
    }
    acc / (rows as f64 * cols as f64)
}

fn d_matrix(m: &Mat<f64>) -> (Mat<f64>, f64) {
    let (rows, n) = m.shape();
    let k = kappa(m);
    let mut d = m.transpose() * m;
    let inv = 1.0 / rows as f64;
    for j in 0..n {
        for i in 0..n {
            d[(i, j)] *= inv;
        }
        d[(j, j)] += k;
    }
    (d, k)
}

/// Builds the DCM bundle of a data pair.
pub fn build_dcm(data: &DataPair) -> Result<DcmBundle> {
    let n = data.n();
    if n < 2 {
        return Err(Error::Degenerate(
            "DCM needs n >= 2 (P_n is zero for n = 1)".into(),
        ));
    }
    let (dx, kappa_x) = d_matrix(&data.x);
    let (dy, kappa_y) = d_matrix(&data.y);

    // G = P Dx P, G^{1/2} = U sqrt(L) U'; the spectrum of G^{1/2} Dy G^{1/2}
    // equals that of sqrt(L) U' Dy U sqrt(L) by orthogonal similarity.
    let g = center_project(dx.as_ref());
    let (mut gl, gu) = sym_eigen(g.as_ref())?;
    for v in &mut gl {
        *v = v.max(0.0); // clip eigensolver noise; G is PSD by construction
    }
    let inner = gu.transpose() * &dy * &gu;
    let k = Mat::from_fn(n, n, |i, j| gl[i].sqrt() * inner[(i, j)] * gl[j].sqrt());
    let mut eigenvalues = sym_eigenvalues(k.as_ref())?;
    eigenvalues.reverse();

    Ok(DcmBundle {
        dx,
        dy,
        kappa_x,
        kappa_y,
        eigenvalues,
    })
}

/// Squared sample distance covariance V²_n via the exact trace identity
/// (√(pq)/n²)·tr(P V_x P V_y P).
pub fn sample_dcov_squared(data: &DataPair) -> Result<f64> {
    if data.n() < 2 {
        return Err(Error::Degenerate("need n >= 2".into()));
    }
    let vx = column_distance_matrix(data.x.as_ref());
    let vy = column_distance_matrix(data.y.as_ref());
    let cx = center_project(vx.as_ref());
    let cy = center_project(vy.as_ref());
    let n = data.n() as f64;
    let scale = (data.p() as f64 * data.q() as f64).sqrt() / (n * n);
    // tr(P Vx P Vy P) = <P Vx P, P Vy P> by idempotence and symmetry
    Ok(scale * frob_inner(cx.as_ref(), cy.as_ref()))
}

/// The S₁, S₂, S₃ sums of the defining formula, on unnormalized distances.
#[derive(Debug, Clone, Copy)]
pub struct DcovSums {
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
}

impl DcovSums {
    pub fn v_squared(&self) -> f64 {
        self.s1 + self.s2 - 2.0 * self.s3
    }
}

/// Direct triple-sum evaluation of V²_n = S₁ + S₂ − 2·S₃. O(n³) work in the
/// S₃ term written as a row-sum product; kept as the independent oracle for
/// the trace identity.
pub fn sample_dcov_sums(data: &DataPair) -> Result<DcovSums> {
    if data.n() < 2 {
        return Err(Error::Degenerate("need n >= 2".into()));
    }
    let n = data.n();
    let nf = n as f64;
    let sp = (data.p() as f64).sqrt();
    let sq = (data.q() as f64).sqrt();
    let ax = column_distance_matrix(data.x.as_ref());
    let ay = column_distance_matrix(data.y.as_ref());

    let mut s1 = 0.0;
    for k in 0..n {
        for l in 0..n {
            s1 += sp * ax[(k, l)] * sq * ay[(k, l)];
        }
    }
    s1 /= nf * nf;

    let sum_x: f64 = (0..n).map(|k| (0..n).map(|l| sp * ax[(k, l)]).sum::<f64>()).sum();
    let sum_y: f64 = (0..n).map(|k| (0..n).map(|l| sq * ay[(k, l)]).sum::<f64>()).sum();
    let s2 = (sum_x / (nf * nf)) * (sum_y / (nf * nf));

    let mut s3 = 0.0;
    for k in 0..n {
        let rx: f64 = (0..n).map(|l| sp * ax[(k, l)]).sum();
        let ry: f64 = (0..n).map(|m| sq * ay[(k, m)]).sum();
        s3 += rx * ry;
    }
    s3 /= nf * nf * nf;

    Ok(DcovSums { s1, s2, s3 })
}

/// The degeneracy statistic T_n = n·V²_n / S₂.
pub fn tn_statistic(data: &DataPair) -> Result<f64> {
    if data.n() < 3 {
        return Err(Error::Degenerate("T_n needs n >= 3".into()));
    }
    let sums = sample_dcov_sums(data)?;
    if sums.s2 == 0.0 {
        return Err(Error::Degenerate(
            "S_2 = 0: all points of a sample coincide".into(),
        ));
    }
    let v2 = sample_dcov_squared(data)?;
    Ok(data.n() as f64 * v2 / sums.s2)
}

/// Gap between V²_n and its normalized-trace approximation
/// (1/(2n²))·√(pq/(κ_x κ_y))·tr S, with the sample κ in place of the
/// population traces.
#[derive(Debug, Clone, Copy)]
pub struct TraceIdentityGap {
    pub gap: f64,
    pub v_squared: f64,
    pub trace_approx: f64,
    /// Set when a distance matrix is identically zero, in which case the
    /// asymptotic relation does not apply.
    pub degenerate: bool,
}

pub fn trace_identity_gap(data: &DataPair) -> Result<TraceIdentityGap> {
    let bundle = build_dcm(data)?;
    let v2 = sample_dcov_squared(data)?;
    let n = data.n() as f64;
    let ratio = (data.p() as f64 * data.q() as f64) / (bundle.kappa_x * bundle.kappa_y);
    let trace_approx = ratio.sqrt() / (2.0 * n * n) * bundle.trace_s();
    let degenerate = v2 == 0.0;
    Ok(TraceIdentityGap {
        gap: (v2 - trace_approx).abs(),
        v_squared: v2,
        trace_approx,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::DiscreteMeasure;
    use crate::rng::{stream_rng, Stream};
    use crate::synth::{gen_independent, InnovationLaw, PairLabel};
    use faer::Mat;
    use rand::Rng;

    fn random_pair(p: usize, q: usize, n: usize, seed: u64) -> DataPair {
        let mut rng = stream_rng(seed, Stream::Misc, 0);
        let x = Mat::from_fn(p, n, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
        let y = Mat::from_fn(q, n, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
        DataPair::new(x, y, PairLabel::Independent).unwrap()
    }

    #[test]
    fn n2_has_exactly_one_nonzero_eigenvalue() {
        let pair = random_pair(3, 4, 2, 1);
        let bundle = build_dcm(&pair).unwrap();
        assert_eq!(bundle.eigenvalues.len(), 2);
        assert!(bundle.eigenvalues[0] > 1e-12);
        assert!(bundle.eigenvalues[1].abs() < 1e-12 * bundle.eigenvalues[0]);
    }

    #[test]
    fn identical_x_columns_reduce_to_kappa_scaling() {
        // P Dx P = kappa_x P, so spec(S) = kappa_x * spec(P Dy P)
        let n = 6;
        let col: Vec<f64> = (0..4).map(|i| i as f64 + 1.0).collect();
        let x = Mat::from_fn(4, n, |i, _| col[i]);
        let mut rng = stream_rng(2, Stream::Misc, 0);
        let y = Mat::from_fn(3, n, |_, _| rng.gen::<f64>());
        let pair = DataPair::new(x, y, PairLabel::Independent).unwrap();
        let bundle = build_dcm(&pair).unwrap();

        let (dy, _) = d_matrix(&pair.y);
        let pdyp = center_project(dy.as_ref());
        let mut expect = sym_eigenvalues(pdyp.as_ref()).unwrap();
        expect.reverse();
        for (got, want) in bundle.eigenvalues.iter().zip(expect.iter()) {
            assert!(
                (got - bundle.kappa_x * want).abs() < 1e-9 * (1.0 + got.abs()),
                "{got} vs {}",
                bundle.kappa_x * want
            );
        }
    }

    #[test]
    fn spectrum_matches_general_eigensolver() {
        let pair = random_pair(4, 4, 4, 3);
        let bundle = build_dcm(&pair).unwrap();

        // brute-force: nonsymmetric eigenvalues of P Dx P Dy P
        let g = center_project(bundle.dx.as_ref());
        let pdyp = center_project(bundle.dy.as_ref());
        let s = &g * &pdyp; // P Dx P * P Dy P = P Dx P Dy P
        let mut brute: Vec<f64> = s
            .eigenvalues()
            .unwrap()
            .into_iter()
            .map(|c: num_complex::Complex<f64>| {
                assert!(c.im.abs() < 1e-9, "nonreal eigenvalue {c}");
                c.re
            })
            .collect();
        brute.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (a, b) in bundle.eigenvalues.iter().zip(&brute) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn eigenvalues_descending_nonnegative_with_structural_zero() {
        let pair = random_pair(6, 5, 9, 4);
        let bundle = build_dcm(&pair).unwrap();
        let scale = bundle.eigenvalues[0];
        for w in bundle.eigenvalues.windows(2) {
            assert!(w[0] >= w[1]);
        }
        assert!(bundle.eigenvalues.iter().all(|&v| v >= -1e-8 * scale));
        assert!(bundle.eigenvalues.last().unwrap().abs() <= 1e-10 * scale);
    }

    #[test]
    fn trace_equals_eigenvalue_sum() {
        let pair = random_pair(5, 7, 8, 5);
        let bundle = build_dcm(&pair).unwrap();
        let sum: f64 = bundle.eigenvalues.iter().sum();
        let tr = bundle.trace_s();
        assert!((sum - tr).abs() < 1e-8 * tr.abs().max(1.0), "{sum} vs {tr}");
    }

    #[test]
    fn dcov_identity_exact_on_random_input() {
        for seed in 0..8 {
            let pair = random_pair(5, 5, 5, 100 + seed);
            let direct = sample_dcov_sums(&pair).unwrap().v_squared();
            let traced = sample_dcov_squared(&pair).unwrap();
            assert!(
                (direct - traced).abs() <= 1e-12 * direct.abs().max(1e-300),
                "seed {seed}: {direct} vs {traced}"
            );
        }
    }

    #[test]
    fn dcov_zero_for_constant_x() {
        let n = 5;
        let x = Mat::from_fn(3, n, |i, _| i as f64);
        let mut rng = stream_rng(9, Stream::Misc, 0);
        let y = Mat::from_fn(3, n, |_, _| rng.gen::<f64>());
        let pair = DataPair::new(x, y, PairLabel::Independent).unwrap();
        assert_eq!(sample_dcov_squared(&pair).unwrap(), 0.0);
        let gap = trace_identity_gap(&pair).unwrap();
        assert!(gap.degenerate);
        assert!((gap.gap - gap.trace_approx.abs()).abs() < 1e-14);
    }

    #[test]
    fn tn_errors_on_coincident_points() {
        let x = Mat::from_fn(3, 4, |i, _| i as f64);
        let y = Mat::from_fn(3, 4, |i, _| -(i as f64));
        let pair = DataPair::new(x, y, PairLabel::Independent).unwrap();
        assert!(matches!(tn_statistic(&pair), Err(Error::Degenerate(_))));
    }

    #[test]
    fn dcov_concentrates_at_unit_value() {
        // V_n^2 -> 2 sqrt(c1 c2) = 1 for identity covariances at p = q = n/2
        let hx = DiscreteMeasure::point_mass(1.0).unwrap();
        let n = 800;
        let pair = gen_independent(
            (n / 2, n / 2, n),
            &hx,
            &hx,
            InnovationLaw::StandardNormal,
            31,
        )
        .unwrap();
        let v2 = sample_dcov_squared(&pair).unwrap();
        assert!((v2 - 1.0).abs() < 0.05, "V^2 = {v2}");
    }
}
