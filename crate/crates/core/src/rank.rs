//! Ratio estimator of the detectable dependence rank and the Monte Carlo
//! calibration of its tuning constant d_n.
//!
//! m̂₀ = (first j ≥ 1 with λ_{j+1}/λ_j > 1 − d_n) − 1, with
//! d_n = n^{-2/3}·|q_{n,p,q,0.5%}| calibrated from the null distribution of
//! n^{2/3}(ν₂/ν₁ − 1).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dcm::build_dcm;
use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::synth::{gen_independent_replicate, InnovationLaw};

/// Result of a single rank estimation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEstimate {
    pub m_hat: usize,
    pub d_n: f64,
    /// Adjacent ratios λ_{j+1}/λ_j actually scanned.
    pub ratios: Vec<f64>,
    /// True when no ratio crossed the threshold within the cap.
    pub capped: bool,
}

pub const DEFAULT_RATIO_CAP: usize = 20;

/// Scans the first `cap` adjacent eigenvalue ratios for the first crossing of
/// 1 − d_n. Input must be descending and strictly positive (the caller trims
/// the structural zero tail; see `DcmBundle::positive_eigenvalues`).
pub fn estimate_rank(eigs: &[f64], d_n: f64, cap: usize) -> Result<RankEstimate> {
    if !(d_n > 0.0 && d_n < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "d_n must lie in (0, 1), got {d_n}"
        )));
    }
    let positive = eigs.iter().take_while(|&&v| v > 0.0).count();
    if positive < 2 {
        return Err(Error::Degenerate(format!(
            "need at least 2 positive eigenvalues, got {positive}"
        )));
    }
    for pair in eigs[..positive].windows(2) {
        if pair[1] > pair[0] {
            return Err(Error::InvalidArgument(
                "eigenvalues must be descending".into(),
            ));
        }
    }
    let effective_cap = cap.min(positive - 1);
    let threshold = 1.0 - d_n;
    let mut ratios = Vec::with_capacity(effective_cap);
    let mut m_hat = None;
    for j in 1..=effective_cap {
        let ratio = eigs[j] / eigs[j - 1];
        ratios.push(ratio);
        if m_hat.is_none() && ratio > threshold {
            m_hat = Some(j - 1);
        }
    }
    Ok(RankEstimate {
        m_hat: m_hat.unwrap_or(effective_cap),
        d_n,
        ratios,
        capped: m_hat.is_none(),
    })
}

/// Null-calibration summary for one (n, p, q, PSD, law) design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTable {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    /// Empirical lower quantile of n^{2/3}(ν₂/ν₁ − 1); never positive.
    pub quantile: f64,
    pub d_n: f64,
    pub replicates: usize,
    /// Quantile level; the calibration described in the text uses 0.005.
    pub level: f64,
    pub seed: u64,
    pub hx: DiscreteMeasure,
    pub hy: DiscreteMeasure,
    pub law: InnovationLaw,
    pub skipped: usize,
}

pub const DEFAULT_CALIBRATION_REPLICATES: usize = 500;
pub const DEFAULT_QUANTILE_LEVEL: f64 = 0.005;

/// Simulates the null DCM and calibrates d_n = n^{-2/3}·|quantile|.
///
/// Replicates run on disjoint seed streams (order-independent); the quantile
/// is the ⌈level·R⌉-th order statistic of the replicate values. Degenerate
/// spectra are skipped and counted, failing the run above 5%.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_dn(
    n: usize,
    p: usize,
    q: usize,
    hx: &DiscreteMeasure,
    hy: &DiscreteMeasure,
    law: InnovationLaw,
    replicates: usize,
    level: f64,
    seed: u64,
) -> Result<CalibrationTable> {
    if replicates < 200 {
        return Err(Error::Calibration(format!(
            "need at least 200 replicates for a stable quantile, got {replicates}"
        )));
    }
    if !(level > 0.0 && level < 0.5) {
        return Err(Error::Calibration(format!(
            "quantile level must lie in (0, 0.5), got {level}"
        )));
    }
    let stats: Vec<Option<f64>> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let pair = gen_independent_replicate((p, q, n), hx, hy, law, seed, r).ok()?;
            let bundle = build_dcm(&pair).ok()?;
            let ev = &bundle.eigenvalues;
            if ev.len() < 2 || !(ev[0] > 0.0) {
                return None;
            }
            Some((n as f64).powf(2.0 / 3.0) * (ev[1] / ev[0] - 1.0))
        })
        .collect();

    let mut values: Vec<f64> = stats.iter().filter_map(|v| *v).collect();
    let skipped = replicates - values.len();
    if skipped * 20 > replicates {
        return Err(Error::TooManySkipped {
            skipped,
            total: replicates,
            detail: "degenerate null spectra".into(),
        });
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let index = ((level * values.len() as f64).ceil() as usize).max(1) - 1;
    let quantile = values[index];
    Ok(CalibrationTable {
        n,
        p,
        q,
        quantile,
        d_n: (n as f64).powf(-2.0 / 3.0) * quantile.abs(),
        replicates,
        level,
        seed,
        hx: hx.clone(),
        hy: hy.clone(),
        law,
        skipped,
    })
}

/// File-backed cache of calibration tables, keyed by the full input tuple.
/// Amortizes the Monte Carlo cost across experiments.
pub struct CalibrationCache {
    path: std::path::PathBuf,
}

impl CalibrationCache {
    pub fn new(path: impl Into<std::path::PathBuf>) -> Self {
        Self { path: path.into() }
    }

    fn load(&self) -> Vec<CalibrationTable> {
        std::fs::read_to_string(&self.path)
            .ok()
            .and_then(|text| serde_json::from_str(&text).ok())
            .unwrap_or_default()
    }

    #[allow(clippy::too_many_arguments)]
    pub fn get_or_compute(
        &self,
        n: usize,
        p: usize,
        q: usize,
        hx: &DiscreteMeasure,
        hy: &DiscreteMeasure,
        law: InnovationLaw,
        replicates: usize,
        level: f64,
        seed: u64,
    ) -> Result<CalibrationTable> {
        let entries = self.load();
        for e in &entries {
            if e.n == n
                && e.p == p
                && e.q == q
                && e.replicates == replicates
                && e.level == level
                && e.seed == seed
                && &e.hx == hx
                && &e.hy == hy
                && e.law == law
            {
                return Ok(e.clone());
            }
        }
        let table = calibrate_dn(n, p, q, hx, hy, law, replicates, level, seed)?;
        let mut entries = entries;
        entries.push(table.clone());
        if let Some(dir) = self.path.parent() {
            let _ = std::fs::create_dir_all(dir);
        }
        let text = serde_json::to_string_pretty(&entries)
            .map_err(|e| Error::Calibration(format!("cache serialization: {e}")))?;
        std::fs::write(&self.path, text)
            .map_err(|e| Error::Calibration(format!("cache write: {e}")))?;
        Ok(table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_evaluated_example() {
        let eigs = [10.0, 5.0, 1.01, 1.00, 0.99];
        let est = estimate_rank(&eigs, 0.05, DEFAULT_RATIO_CAP).unwrap();
        assert_eq!(est.m_hat, 2);
        assert!(!est.capped);
        let expect = [0.5, 0.202, 1.00 / 1.01, 0.99];
        for (got, want) in est.ratios.iter().zip(expect) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn equal_eigenvalues_give_rank_zero() {
        let est = estimate_rank(&[3.0, 3.0, 3.0, 3.0], 0.1, 20).unwrap();
        assert_eq!(est.m_hat, 0);
    }

    #[test]
    fn no_crossing_caps_out() {
        let eigs: Vec<f64> = (0..8).map(|i| 2.0f64.powi(-(i as i32))).collect();
        let est = estimate_rank(&eigs, 0.2, 4).unwrap();
        assert!(est.capped);
        assert_eq!(est.m_hat, 4);
    }

    #[test]
    fn scale_invariance() {
        let eigs = [8.0, 7.5, 2.0, 1.9, 1.8, 1.7];
        let a = estimate_rank(&eigs, 0.08, 20).unwrap();
        let scaled: Vec<f64> = eigs.iter().map(|v| v * 137.0).collect();
        let b = estimate_rank(&scaled, 0.08, 20).unwrap();
        assert_eq!(a.m_hat, b.m_hat);
        for (x, y) in a.ratios.iter().zip(&b.ratios) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn monotone_in_dn() {
        let eigs = [10.0, 6.0, 5.6, 5.5, 5.45, 5.44, 5.43];
        let mut last = usize::MAX;
        for d_n in [0.02, 0.05, 0.1, 0.2, 0.4, 0.8] {
            let est = estimate_rank(&eigs, d_n, 20).unwrap();
            assert!(est.m_hat <= last, "d_n {d_n}: {} > {last}", est.m_hat);
            last = est.m_hat;
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(estimate_rank(&[1.0], 0.1, 20).is_err());
        assert!(estimate_rank(&[0.0, 0.0], 0.1, 20).is_err());
        assert!(estimate_rank(&[1.0, 2.0], 0.1, 20).is_err());
        assert!(estimate_rank(&[2.0, 1.0], 0.0, 20).is_err());
        assert!(estimate_rank(&[2.0, 1.0], 1.0, 20).is_err());
    }

    #[test]
    fn calibration_is_deterministic_and_shrinks_with_n() {
        let d1 = DiscreteMeasure::point_mass(1.0).unwrap();
        let a = calibrate_dn(60, 12, 18, &d1, &d1, InnovationLaw::StandardNormal, 200, 0.005, 5)
            .unwrap();
        let b = calibrate_dn(60, 12, 18, &d1, &d1, InnovationLaw::StandardNormal, 200, 0.005, 5)
            .unwrap();
        assert_eq!(a, b);
        assert!(a.quantile <= 0.0);
        assert!(a.d_n > 0.0);

        let c = calibrate_dn(120, 24, 36, &d1, &d1, InnovationLaw::StandardNormal, 200, 0.005, 5)
            .unwrap();
        let shrink = c.d_n / a.d_n;
        assert!(
            shrink > 0.35 && shrink < 0.95,
            "doubling n changed d_n by {shrink}"
        );
    }

    #[test]
    fn calibration_rejects_tiny_runs() {
        let d1 = DiscreteMeasure::point_mass(1.0).unwrap();
        assert!(
            calibrate_dn(40, 8, 12, &d1, &d1, InnovationLaw::StandardNormal, 50, 0.005, 1).is_err()
        );
    }

    #[test]
    fn cache_round_trip() {
        let dir = std::env::temp_dir().join(format!("dcov-cal-{}", std::process::id()));
        let path = dir.join("calibrations.json");
        let cache = CalibrationCache::new(&path);
        let d1 = DiscreteMeasure::point_mass(1.0).unwrap();
        let a = cache
            .get_or_compute(60, 12, 18, &d1, &d1, InnovationLaw::StandardNormal, 200, 0.005, 9)
            .unwrap();
        let b = cache
            .get_or_compute(60, 12, 18, &d1, &d1, InnovationLaw::StandardNormal, 200, 0.005, 9)
            .unwrap();
        assert_eq!(a, b);
        assert!(path.exists());
        let _ = std::fs::remove_dir_all(dir);
    }
}
