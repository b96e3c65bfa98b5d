//! Subcommand implementations and error-to-exit-code mapping.

use serde_json::json;

use dcov::bench::{self, Scenario, ScenarioKind};
use dcov::lsd::{self, EdgeMethod};
use dcov::rank::CalibrationCache;
use dcov::spike;
use dcov::synth::{gen_spiked_replicate, InnovationLaw, SpikeSpec};
use dcov::ModelSpec;

use crate::model_args::{ArgError, ModelArgs};
use crate::output::{fmt_f64, OutDir};
use crate::{Cli, Command};

enum RunError {
    Usage(String),
    Numeric(String),
    Io(String),
}

impl RunError {
    fn code(&self) -> i32 {
        match self {
            RunError::Usage(_) => 2,
            RunError::Numeric(_) => 3,
            RunError::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            RunError::Usage(m) | RunError::Numeric(m) | RunError::Io(m) => m,
        }
    }
}

impl From<ArgError> for RunError {
    fn from(e: ArgError) -> Self {
        match e {
            ArgError::Usage(m) => RunError::Usage(m),
            ArgError::Io(m) => RunError::Io(m),
        }
    }
}

impl From<dcov::Error> for RunError {
    fn from(e: dcov::Error) -> Self {
        match e {
            dcov::Error::InvalidArgument(_) | dcov::Error::InvalidMeasure(_) => {
                RunError::Usage(e.to_string())
            }
            _ => RunError::Numeric(e.to_string()),
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e.to_string())
    }
}

pub fn dispatch(cli: &Cli) -> i32 {
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}

fn parse_law(name: &str) -> Result<InnovationLaw, RunError> {
    match name {
        "normal" => Ok(InnovationLaw::StandardNormal),
        "chi2" => Ok(InnovationLaw::chi_square_default()),
        "rademacher" => Ok(InnovationLaw::Rademacher),
        other => Err(RunError::Usage(format!(
            "unknown innovation law '{other}' (normal | chi2 | rademacher)"
        ))),
    }
}

/// lo:hi:count evenly spaced grid.
fn parse_grid(text: &str) -> Result<Vec<f64>, RunError> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(RunError::Usage(format!("grid '{text}' is not lo:hi:count")));
    }
    let lo: f64 = parts[0]
        .parse()
        .map_err(|e| RunError::Usage(format!("grid lo: {e}")))?;
    let hi: f64 = parts[1]
        .parse()
        .map_err(|e| RunError::Usage(format!("grid hi: {e}")))?;
    let count: usize = parts[2]
        .parse()
        .map_err(|e| RunError::Usage(format!("grid count: {e}")))?;
    if count == 0 || !(hi > lo) {
        return Err(RunError::Usage(format!(
            "grid '{text}' must have hi > lo and a positive count"
        )));
    }
    Ok(lsd::linspace(lo, hi, count))
}

/// lo:step:hi arithmetic grid.
fn parse_step_grid(text: &str) -> Result<Vec<f64>, RunError> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(RunError::Usage(format!(
            "theta grid '{text}' is not lo:step:hi"
        )));
    }
    let lo: f64 = parts[0].parse().map_err(|e| RunError::Usage(format!("{e}")))?;
    let step: f64 = parts[1].parse().map_err(|e| RunError::Usage(format!("{e}")))?;
    let hi: f64 = parts[2].parse().map_err(|e| RunError::Usage(format!("{e}")))?;
    if !(step > 0.0) || !(hi >= lo) {
        return Err(RunError::Usage(format!("bad theta grid '{text}'")));
    }
    let count = ((hi - lo) / step).round() as usize + 1;
    Ok((0..count).map(|i| lo + step * i as f64).collect())
}

fn effective_config(cli: &Cli, out: &OutDir, command: serde_json::Value) -> Result<(), RunError> {
    let config = json!({
        "seed": cli.seed,
        "reps": cli.reps,
        "threads": cli.threads,
        "format": cli.format,
        "out": cli.out.display().to_string(),
        "command": command,
    });
    out.write_json("effective-config.json", &config)?;
    Ok(())
}

fn run(cli: &Cli) -> Result<(), RunError> {
    let out = OutDir::create(&cli.out)?;
    match &cli.command {
        Command::Density { model, grid, eps } => {
            let spec = model.resolve()?;
            let xs = parse_grid(grid)?;
            effective_config(
                cli,
                &out,
                json!({"name": "density", "model": spec, "grid": grid, "eps": eps}),
            )?;
            let dg = lsd::density(&spec, &xs, *eps)?;
            let rows: Vec<Vec<String>> = dg
                .xs
                .iter()
                .zip(&dg.fs)
                .map(|(x, f)| vec![fmt_f64(*x), fmt_f64(*f)])
                .collect();
            let path = out.write_table("density", &cli.format, &["x", "f"], &rows)?;
            println!("wrote {} ({} rows)", path.display(), rows.len());
            Ok(())
        }
        Command::Edge { model, method } => {
            let spec = model.resolve()?;
            effective_config(
                cli,
                &out,
                json!({"name": "edge", "model": spec, "method": method}),
            )?;
            let info = match method.as_str() {
                "density-threshold" => lsd::support_edge(&spec)?,
                "cubic-discriminant" => {
                    if spec.c1 != spec.c2 || spec.hx.atoms() != [1.0] || spec.hy.atoms() != [1.0] {
                        return Err(RunError::Usage(
                            "cubic-discriminant needs c1 = c2 and both PSDs at the point mass 1"
                                .into(),
                        ));
                    }
                    lsd::support_edge_cubic(spec.c1)?
                }
                other => {
                    return Err(RunError::Usage(format!(
                        "unknown edge method '{other}'"
                    )))
                }
            };
            let payload = json!({
                "lambda_plus": info.lambda_plus,
                "method": match info.method {
                    EdgeMethod::DensityThreshold => "density-threshold",
                    EdgeMethod::CubicDiscriminant => "cubic-discriminant",
                },
                "tol": 1e-4 * spec.lsd_mean(),
            });
            let path = out.write_json("edge.json", &payload)?;
            println!("lambda_plus = {}", info.lambda_plus);
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Theta0 { model } => {
            let spec = model.resolve()?;
            effective_config(cli, &out, json!({"name": "theta0", "model": spec}))?;
            let edge = spike::bulk_edge(&spec)?;
            let theta0 = spike::theta_critical_with_edge(&spec, &edge)?;
            let payload = json!({"theta0": theta0, "lambda_plus": edge.lambda_plus});
            let path = out.write_json("theta0.json", &payload)?;
            println!("theta0 = {theta0}");
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::SpikeMap { model, theta_grid } => {
            let spec = model.resolve()?;
            let thetas = parse_step_grid(theta_grid)?;
            effective_config(
                cli,
                &out,
                json!({"name": "spike-map", "model": spec, "theta_grid": theta_grid}),
            )?;
            let edge = spike::bulk_edge(&spec)?;
            let theta0 = spike::theta_critical_with_edge(&spec, &edge)?;
            out.write_json(
                "theta0.json",
                &json!({"theta0": theta0, "lambda_plus": edge.lambda_plus}),
            )?;
            let mut rows = Vec::with_capacity(thetas.len());
            for &theta in &thetas {
                if theta <= 0.0 {
                    rows.push(vec![fmt_f64(theta), String::new(), "false".into()]);
                    continue;
                }
                let loc = spike::spike_location_with_edge(&spec, theta, &edge)?;
                match loc.outlier() {
                    Some(lambda) => {
                        rows.push(vec![fmt_f64(theta), fmt_f64(lambda), "true".into()])
                    }
                    None => rows.push(vec![fmt_f64(theta), String::new(), "false".into()]),
                }
            }
            let path = out.write_table(
                "spikemap",
                &cli.format,
                &["theta", "lambda_predicted", "supercritical"],
                &rows,
            )?;
            println!("theta0 = {theta0}");
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Simulate {
            model,
            n,
            thetas,
            law,
            top_k,
        } => {
            let kind = scenario_kind_for(model)?;
            let mut sc = Scenario::with_n(kind, *n, cli.reps_or(100), cli.seed);
            sc.thetas = thetas.clone();
            sc.law = parse_law(law)?;
            sc.top_k = *top_k;
            effective_config(cli, &out, json!({"name": "simulate", "scenario": sc}))?;
            let result = bench::run_scenario(&sc)?;
            write_scenario_outputs(&out, &cli.format, &result)?;
            println!(
                "ran {} replicates; top eigenvalue mean = {}",
                result.aggregates.replicates,
                result
                    .aggregates
                    .eigenvalue_mean
                    .first()
                    .copied()
                    .unwrap_or(f64::NAN)
            );
            Ok(())
        }
        Command::Tn { p } => {
            let mut sc = Scenario::with_n(ScenarioKind::TnTable, 2 * p, cli.reps_or(200), cli.seed);
            sc.compute_tn = true;
            sc.top_k = 2;
            effective_config(cli, &out, json!({"name": "tn", "scenario": sc}))?;
            let result = bench::run_scenario(&sc)?;
            write_scenario_outputs(&out, &cli.format, &result)?;
            println!(
                "T_n mean = {} sd = {}",
                result.aggregates.tn_mean.unwrap_or(f64::NAN),
                result.aggregates.tn_sd.unwrap_or(f64::NAN)
            );
            Ok(())
        }
        Command::EstimateRank {
            model,
            n,
            thetas,
            law,
            dn,
            cal_reps,
            level,
        } => {
            let kind = scenario_kind_for(model)?;
            let spec = kind.model();
            let law = parse_law(law)?;
            let mut sc = Scenario::with_n(kind, *n, cli.reps_or(200), cli.seed);
            sc.thetas = thetas.clone();
            sc.law = law;
            let d_n = match dn {
                Some(d) => *d,
                None => {
                    let cache = CalibrationCache::new(out.path("calibration-cache.json"));
                    let (p, q, _) = (sc.dims.0, sc.dims.1, sc.dims.2);
                    let table = cache
                        .get_or_compute(
                            *n,
                            p,
                            q,
                            &spec.hx,
                            &spec.hy,
                            law,
                            *cal_reps,
                            *level,
                            cli.seed ^ 0xca11_b8a7e,
                        )
                        .map_err(RunError::from)?;
                    out.write_json("calibration.json", &table)?;
                    table.d_n
                }
            };
            sc.d_n = Some(d_n);
            effective_config(
                cli,
                &out,
                json!({"name": "estimate-rank", "scenario": sc, "d_n": d_n}),
            )?;
            let result = bench::run_scenario(&sc)?;
            write_scenario_outputs(&out, &cli.format, &result)?;
            let rows: Vec<Vec<String>> = result
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.replicate.to_string(),
                        r.m_hat.map(|m| m.to_string()).unwrap_or_default(),
                        fmt_f64(d_n),
                        r.capped.map(|c| c.to_string()).unwrap_or_default(),
                    ]
                })
                .collect();
            out.write_table(
                "rank_estimates",
                &cli.format,
                &["replicate", "m_hat", "d_n", "capped"],
                &rows,
            )?;
            println!("d_n = {d_n}");
            for (m, f) in &result.aggregates.m_hat_frequencies {
                println!("m_hat = {m}: frequency {f:.3}");
            }
            Ok(())
        }
        Command::Calibrate { n, p, q, law, level } => {
            let law = parse_law(law)?;
            let d1 = dcov::DiscreteMeasure::point_mass(1.0).map_err(RunError::from)?;
            effective_config(
                cli,
                &out,
                json!({"name": "calibrate", "n": n, "p": p, "q": q, "level": level}),
            )?;
            let table = dcov::rank::calibrate_dn(
                *n,
                *p,
                *q,
                &d1,
                &d1,
                law,
                cli.reps_or(500),
                *level,
                cli.seed,
            )?;
            let path = out.write_json("calibration.json", &table)?;
            println!("d_n = {}", table.d_n);
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::CompareCca {
            model,
            n,
            thetas,
            k,
        } => {
            let kind = scenario_kind_for(model)?;
            let spec = kind.model();
            let reps = cli.reps_or(100);
            effective_config(
                cli,
                &out,
                json!({"name": "compare-cca", "model": spec, "n": n, "thetas": thetas, "k": k}),
            )?;
            let p = ((spec.c1 * *n as f64).round() as usize).max(2);
            let q = ((spec.c2 * *n as f64).round() as usize).max(2);
            let spike_spec =
                SpikeSpec::new(thetas.clone()).map_err(RunError::from)?;
            let mut rows = Vec::new();
            for r in 0..reps as u64 {
                let pair = gen_spiked_replicate(
                    (p, q, *n),
                    &spec.hx,
                    &spec.hy,
                    InnovationLaw::StandardNormal,
                    &spike_spec,
                    cli.seed,
                    r,
                )?;
                let bundle = dcov::dcm::build_dcm(&pair)?;
                let dcm_eigs: Vec<f64> =
                    bundle.eigenvalues.iter().copied().take(*k).collect();
                let cca = bench::cca_top_eigs(&pair, *k)?;
                let tcca = bench::tcca_top_eigs(&pair, *k)?;
                let mut row = vec![r.to_string()];
                for list in [&dcm_eigs, &cca, &tcca] {
                    for i in 0..*k {
                        row.push(fmt_f64(list.get(i).copied().unwrap_or(f64::NAN)));
                    }
                }
                rows.push(row);
            }
            let mut header: Vec<String> = vec!["replicate".into()];
            for prefix in ["dcm", "cca", "tcca"] {
                for i in 1..=*k {
                    header.push(format!("{prefix}_{i}"));
                }
            }
            let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
            let path = out.write_table("compare", &cli.format, &header_refs, &rows)?;
            println!("wrote {}", path.display());
            Ok(())
        }
    }
}

/// simulate/estimate-rank accept only named scenarios or custom full models.
fn scenario_kind_for(model: &ModelArgs) -> Result<ScenarioKind, RunError> {
    if let Some(kind) = model.scenario_kind()? {
        return Ok(kind);
    }
    let spec: ModelSpec = model.resolve()?;
    Ok(ScenarioKind::Custom { model: spec })
}

fn write_scenario_outputs(
    out: &OutDir,
    format: &str,
    result: &bench::ScenarioResult,
) -> Result<(), RunError> {
    // replicates table
    let k = result
        .rows
        .iter()
        .map(|r| r.top_eigenvalues.len())
        .max()
        .unwrap_or(0);
    let mut header: Vec<String> = vec!["replicate".into()];
    for i in 1..=k {
        header.push(format!("eig_{i}"));
    }
    header.push("tn".into());
    header.push("m_hat".into());
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let rows: Vec<Vec<String>> = result
        .rows
        .iter()
        .map(|r| {
            let mut row = vec![r.replicate.to_string()];
            for i in 0..k {
                row.push(
                    r.top_eigenvalues
                        .get(i)
                        .map(|v| fmt_f64(*v))
                        .unwrap_or_default(),
                );
            }
            row.push(r.tn.map(fmt_f64).unwrap_or_default());
            row.push(r.m_hat.map(|m| m.to_string()).unwrap_or_default());
            row
        })
        .collect();
    out.write_table("replicates", format, &header_refs, &rows)?;

    out.write_json("aggregates.json", &result.aggregates)?;
    out.write_json("predictions.json", &result.predictions)?;

    let hist_rows: Vec<Vec<String>> = (0..result.histogram.counts.len())
        .map(|i| {
            vec![
                fmt_f64(result.histogram.edges[i]),
                fmt_f64(result.histogram.edges[i + 1]),
                result.histogram.counts[i].to_string(),
                fmt_f64(result.histogram.densities[i]),
            ]
        })
        .collect();
    out.write_table(
        "histogram",
        format,
        &["bin_lo", "bin_hi", "count", "density"],
        &hist_rows,
    )?;

    if let Some(overlay) = &result.overlay_density {
        let rows: Vec<Vec<String>> = overlay
            .xs
            .iter()
            .zip(&overlay.fs)
            .map(|(x, f)| vec![fmt_f64(*x), fmt_f64(*f)])
            .collect();
        out.write_table("overlay_density", format, &["x", "f"], &rows)?;
    }
    Ok(())
}
