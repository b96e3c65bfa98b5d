//! Named experiment scenarios: replicated DCM simulations with theoretical
//! overlays, plus the CCA/TCCA detection baselines.

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dcm::{build_dcm, tn_statistic};
use crate::error::{Error, Result};
use crate::lsd::{self, DensityGrid, ModelSpec};
use crate::rank::{estimate_rank, RankEstimate, DEFAULT_RATIO_CAP};
use crate::spike::{self, models, SpikeLocation};
use crate::synth::{
    gen_independent_replicate, gen_spiked_replicate, DataPair, InnovationLaw, SpikeSpec,
};

/// The studied designs, with dimension ratios and PSDs pinned per name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "name")]
pub enum ScenarioKind {
    Model1,
    Model2,
    Model4,
    Model5,
    Model6,
    /// The degeneracy table design: p = q = n/2, independent Gaussian data.
    TnTable,
    Custom { model: ModelSpec },
}

impl ScenarioKind {
    pub fn model(&self) -> ModelSpec {
        match self {
            ScenarioKind::Model1 => models::model1(),
            ScenarioKind::Model2 => models::model2(),
            ScenarioKind::Model4 => models::model4(),
            ScenarioKind::Model5 => models::model5(),
            ScenarioKind::Model6 => models::model6(),
            ScenarioKind::TnTable => ModelSpec::isotropic(0.5).expect("static"),
            ScenarioKind::Custom { model } => model.clone(),
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "model1" => Some(ScenarioKind::Model1),
            "model2" => Some(ScenarioKind::Model2),
            "model4" => Some(ScenarioKind::Model4),
            "model5" => Some(ScenarioKind::Model5),
            "model6" => Some(ScenarioKind::Model6),
            "tn-table" => Some(ScenarioKind::TnTable),
            _ => None,
        }
    }
}

/// A concrete experiment: scenario kind, dimensions, replicate count,
/// optional spike strengths, innovation law, and the master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: ScenarioKind,
    /// (p, q, n).
    pub dims: (usize, usize, usize),
    pub replicates: usize,
    /// Empty for the independent/null design.
    pub thetas: Vec<f64>,
    pub law: InnovationLaw,
    pub seed: u64,
    /// How many leading eigenvalues to record per replicate.
    pub top_k: usize,
    /// When set, a rank estimate m̂₀ is produced per replicate with this d_n.
    pub d_n: Option<f64>,
    /// Whether to compute T_n per replicate.
    pub compute_tn: bool,
    /// Histogram bin count; None uses the Freedman–Diaconis rule.
    pub bins: Option<usize>,
}

impl Scenario {
    /// Scenario with dimensions derived from n through the model's ratios.
    pub fn with_n(kind: ScenarioKind, n: usize, replicates: usize, seed: u64) -> Self {
        let model = kind.model();
        let p = ((model.c1 * n as f64).round() as usize).max(2);
        let q = ((model.c2 * n as f64).round() as usize).max(2);
        Self {
            kind,
            dims: (p, q, n),
            replicates,
            thetas: Vec::new(),
            law: InnovationLaw::StandardNormal,
            seed,
            top_k: 8,
            d_n: None,
            compute_tn: false,
            bins: None,
        }
    }
}

/// Everything recorded for one replicate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplicateRow {
    pub replicate: u64,
    pub top_eigenvalues: Vec<f64>,
    pub tn: Option<f64>,
    pub m_hat: Option<usize>,
    pub capped: Option<bool>,
}

/// Per-scenario aggregates, recomputable from the rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Aggregates {
    pub replicates: usize,
    /// Mean/sd of the k-th largest eigenvalue, k = 1..top_k.
    pub eigenvalue_mean: Vec<f64>,
    pub eigenvalue_sd: Vec<f64>,
    pub tn_mean: Option<f64>,
    pub tn_sd: Option<f64>,
    /// (m̂₀ value, relative frequency), ascending in m̂₀.
    pub m_hat_frequencies: Vec<(usize, f64)>,
}

/// Pooled-eigenvalue histogram (density normalized).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub densities: Vec<f64>,
}

/// Theoretical overlays attached to a scenario run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Predictions {
    pub lambda_plus: Option<f64>,
    pub theta0: Option<f64>,
    /// (θ, predicted λ or null when subcritical) per requested strength.
    pub spikes: Vec<(f64, Option<f64>)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub scenario: Scenario,
    pub rows: Vec<ReplicateRow>,
    pub aggregates: Aggregates,
    pub histogram: Histogram,
    pub overlay_density: Option<DensityGrid>,
    pub predictions: Predictions,
}

fn make_pair(sc: &Scenario, replicate: u64, model: &ModelSpec) -> Result<DataPair> {
    if sc.thetas.is_empty() {
        gen_independent_replicate(sc.dims, &model.hx, &model.hy, sc.law, sc.seed, replicate)
    } else {
        let spec = SpikeSpec::new(sc.thetas.clone())?;
        gen_spiked_replicate(
            sc.dims,
            &model.hx,
            &model.hy,
            sc.law,
            &spec,
            sc.seed,
            replicate,
        )
    }
}

/// Runs a scenario: replicates on disjoint seed streams (concurrently, but
/// order-independently), followed by a deterministic sequential reduce and
/// the theoretical overlays.
pub fn run_scenario(sc: &Scenario) -> Result<ScenarioResult> {
    if sc.replicates == 0 {
        return Err(Error::InvalidArgument("zero replicates".into()));
    }
    let model = sc.kind.model();

    let outcomes: Vec<Result<(ReplicateRow, Vec<f64>)>> = (0..sc.replicates as u64)
        .into_par_iter()
        .map(|r| run_replicate(sc, r, &model))
        .collect();

    let mut rows = Vec::with_capacity(sc.replicates);
    let mut pooled: Vec<f64> = Vec::new();
    let mut failures = 0usize;
    let mut last_error = None;
    for outcome in outcomes {
        match outcome {
            Ok((row, eigs)) => {
                rows.push(row);
                pooled.extend(eigs);
            }
            Err(e) => {
                failures += 1;
                last_error = Some(e);
            }
        }
    }
    if failures * 20 > sc.replicates {
        return Err(Error::TooManySkipped {
            skipped: failures,
            total: sc.replicates,
            detail: last_error.map(|e| e.to_string()).unwrap_or_default(),
        });
    }

    let aggregates = aggregate(sc, &rows);
    let histogram = histogram(&pooled, sc.bins);
    let predictions = predictions(sc, &model);
    let overlay_density = overlay(&model, &histogram);

    Ok(ScenarioResult {
        scenario: sc.clone(),
        rows,
        aggregates,
        histogram,
        overlay_density,
        predictions,
    })
}

fn run_replicate(sc: &Scenario, r: u64, model: &ModelSpec) -> Result<(ReplicateRow, Vec<f64>)> {
    let pair = make_pair(sc, r, model)?;
    let bundle = build_dcm(&pair)?;
    let top: Vec<f64> = bundle
        .eigenvalues
        .iter()
        .copied()
        .take(sc.top_k)
        .collect();
    let tn = if sc.compute_tn {
        Some(tn_statistic(&pair)?)
    } else {
        None
    };
    let (m_hat, capped) = match sc.d_n {
        Some(d_n) => {
            let positive = bundle.positive_eigenvalues();
            let est: RankEstimate = estimate_rank(&positive, d_n, DEFAULT_RATIO_CAP)?;
            (Some(est.m_hat), Some(est.capped))
        }
        None => (None, None),
    };
    Ok((
        ReplicateRow {
            replicate: r,
            top_eigenvalues: top,
            tn,
            m_hat,
            capped,
        },
        bundle.eigenvalues,
    ))
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn aggregate(sc: &Scenario, rows: &[ReplicateRow]) -> Aggregates {
    let k = sc.top_k.min(
        rows.iter()
            .map(|r| r.top_eigenvalues.len())
            .min()
            .unwrap_or(0),
    );
    let mut eigenvalue_mean = Vec::with_capacity(k);
    let mut eigenvalue_sd = Vec::with_capacity(k);
    for j in 0..k {
        let col: Vec<f64> = rows.iter().map(|r| r.top_eigenvalues[j]).collect();
        let (m, s) = mean_sd(&col);
        eigenvalue_mean.push(m);
        eigenvalue_sd.push(s);
    }
    let tns: Vec<f64> = rows.iter().filter_map(|r| r.tn).collect();
    let (tn_mean, tn_sd) = if tns.is_empty() {
        (None, None)
    } else {
        let (m, s) = mean_sd(&tns);
        (Some(m), Some(s))
    };
    let mut freq: std::collections::BTreeMap<usize, usize> = Default::default();
    let mut total = 0usize;
    for row in rows {
        if let Some(m) = row.m_hat {
            *freq.entry(m).or_default() += 1;
            total += 1;
        }
    }
    let m_hat_frequencies = freq
        .into_iter()
        .map(|(m, c)| (m, c as f64 / total.max(1) as f64))
        .collect();
    Aggregates {
        replicates: rows.len(),
        eigenvalue_mean,
        eigenvalue_sd,
        tn_mean,
        tn_sd,
        m_hat_frequencies,
    }
}

/// Density-normalized histogram; bin count by Freedman–Diaconis when not set.
pub fn histogram(values: &[f64], bins: Option<usize>) -> Histogram {
    if values.is_empty() {
        return Histogram {
            edges: vec![0.0, 1.0],
            counts: vec![0],
            densities: vec![0.0],
        };
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lo = sorted[0];
    let hi = *sorted.last().unwrap();
    let span = (hi - lo).max(1e-12);
    let count = bins.unwrap_or_else(|| {
        let n = sorted.len();
        let q1 = sorted[n / 4];
        let q3 = sorted[3 * n / 4];
        let iqr = (q3 - q1).max(1e-12);
        let width = 2.0 * iqr / (n as f64).cbrt();
        ((span / width).ceil() as usize).clamp(10, 400)
    });
    let width = span / count as f64;
    let mut counts = vec![0u64; count];
    for &v in &sorted {
        let idx = (((v - lo) / width) as usize).min(count - 1);
        counts[idx] += 1;
    }
    let norm = 1.0 / (values.len() as f64 * width);
    let densities = counts.iter().map(|&c| c as f64 * norm).collect();
    let edges = (0..=count).map(|i| lo + width * i as f64).collect();
    Histogram {
        edges,
        counts,
        densities,
    }
}

fn predictions(sc: &Scenario, model: &ModelSpec) -> Predictions {
    let edge = spike::bulk_edge(model).ok();
    let theta0 = edge
        .as_ref()
        .and_then(|e| spike::theta_critical_with_edge(model, e).ok());
    let spikes = match edge.as_ref() {
        Some(e) => sc
            .thetas
            .iter()
            .map(|&t| {
                let loc = spike::spike_location_with_edge(model, t, e).ok();
                (
                    t,
                    loc.and_then(|l| match l {
                        SpikeLocation::Outlier(v) => Some(v),
                        SpikeLocation::Subcritical => None,
                    }),
                )
            })
            .collect(),
        None => Vec::new(),
    };
    Predictions {
        lambda_plus: edge.map(|e| e.lambda_plus),
        theta0,
        spikes,
    }
}

fn overlay(model: &ModelSpec, hist: &Histogram) -> Option<DensityGrid> {
    let hi = *hist.edges.last()?;
    let lo = hist.edges[0].max(1e-4);
    if hi <= lo {
        return None;
    }
    let grid = lsd::linspace(lo, hi, 400);
    lsd::density(model, &grid, lsd::DENSITY_EPS).ok()
}

/// Top-k squared sample canonical correlations of the column-centered data,
/// via the orthogonal (QR + SVD) route.
pub fn cca_top_eigs(data: &DataPair, k: usize) -> Result<Vec<f64>> {
    let n = data.n();
    let take = k.min(data.p()).min(data.q());
    let qx = centered_thin_q(&data.x)?;
    let qy = centered_thin_q(&data.y)?;
    let cross = qx.transpose() * &qy;
    let svd = cross
        .thin_svd()
        .map_err(|e| Error::Eigen(format!("svd: {e:?}")))?;
    let mut out: Vec<f64> = svd
        .S()
        .column_vector()
        .iter()
        .take(take)
        .map(|&s| s * s)
        .collect();
    out.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let _ = n;
    Ok(out)
}

/// Centered thin Q factor of Mᵀ (samples as rows); errors when the centered
/// Gram block is numerically singular.
fn centered_thin_q(m: &Mat<f64>) -> Result<Mat<f64>> {
    let (vars, n) = m.shape();
    let mut centered = Mat::<f64>::zeros(n, vars);
    for i in 0..vars {
        let mut mean = 0.0;
        for j in 0..n {
            mean += m[(i, j)];
        }
        mean /= n as f64;
        for j in 0..n {
            centered[(j, i)] = m[(i, j)] - mean;
        }
    }
    let qr = centered.qr();
    let r = qr.thin_R();
    let scale = (0..vars).map(|i| r[(i, i)].abs()).fold(0.0f64, f64::max);
    for i in 0..vars {
        if r[(i, i)].abs() <= 1e-12 * scale.max(1e-300) {
            return Err(Error::Degenerate(
                "singular Gram block in CCA; regularized variants are out of scope".into(),
            ));
        }
    }
    Ok(qr.compute_thin_Q())
}

/// Exponential-transform CCA: applies x ↦ eˣ entrywise first. Entries above
/// 700 would overflow and are reported instead of clipped.
pub fn tcca_top_eigs(data: &DataPair, k: usize) -> Result<Vec<f64>> {
    const EXP_LIMIT: f64 = 700.0;
    let transform = |m: &Mat<f64>, name: &str| -> Result<Mat<f64>> {
        let mut out = Mat::<f64>::zeros(m.nrows(), m.ncols());
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                let v = m[(i, j)];
                if v > EXP_LIMIT {
                    return Err(Error::Overflow(format!(
                        "{name}[{i},{j}] = {v} exceeds exp limit {EXP_LIMIT}; rescale the data"
                    )));
                }
                out[(i, j)] = v.exp();
            }
        }
        Ok(out)
    };
    let tx = transform(&data.x, "x")?;
    let ty = transform(&data.y, "y")?;
    let pair = DataPair::new(tx, ty, data.label)?;
    cca_top_eigs(&pair, k)
}

/// First k adjacent eigenvalue ratios λ_{i+1}/λ_i.
pub fn ratio_profile(eigs: &[f64], k: usize) -> Result<Vec<f64>> {
    let positive = eigs.iter().take_while(|&&v| v > 0.0).count();
    if positive < k + 1 {
        return Err(Error::InvalidArgument(format!(
            "need {} positive leading eigenvalues, got {positive}",
            k + 1
        )));
    }
    Ok((1..=k).map(|i| eigs[i] / eigs[i - 1]).collect())
}

/// Two-sample Kolmogorov distance between pooled samples.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|u, v| u.partial_cmp(v).unwrap());
    ys.sort_by(|u, v| u.partial_cmp(v).unwrap());
    let (mut i, mut j) = (0usize, 0usize);
    let mut worst = 0.0f64;
    while i < xs.len() && j < ys.len() {
        // advance past a whole tie block before comparing the cdfs
        let v = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] == v {
            i += 1;
        }
        while j < ys.len() && ys[j] == v {
            j += 1;
        }
        let fa = i as f64 / xs.len() as f64;
        let fb = j as f64 / ys.len() as f64;
        worst = worst.max((fa - fb).abs());
    }
    worst
}
