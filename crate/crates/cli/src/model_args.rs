//! Model selection shared by the subcommands: a named scenario, an inline
//! (c1, c2, hx, hy) tuple, or a JSON file.

use clap::Args;
use dcov::bench::ScenarioKind;
use dcov::{DiscreteMeasure, ModelSpec};

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Named scenario: model1 | model2 | model4 | model5 | model6.
    #[arg(long)]
    pub scenario: Option<String>,

    /// Dimension ratio p/n (with --hx/--hy).
    #[arg(long)]
    pub c1: Option<f64>,

    /// Dimension ratio q/n.
    #[arg(long)]
    pub c2: Option<f64>,

    /// Spectral distribution of Σx as "atom:weight,atom:weight".
    #[arg(long)]
    pub hx: Option<String>,

    /// Spectral distribution of Σy, same syntax.
    #[arg(long)]
    pub hy: Option<String>,

    /// JSON file holding {"c1":..,"c2":..,"hx":{..},"hy":{..}}.
    #[arg(long)]
    pub model: Option<std::path::PathBuf>,
}

#[derive(Debug)]
pub enum ArgError {
    Usage(String),
    Io(String),
}

pub fn parse_measure(text: &str) -> Result<DiscreteMeasure, ArgError> {
    let mut atoms = Vec::new();
    let mut weights = Vec::new();
    for part in text.split(',') {
        let (a, w) = part.split_once(':').ok_or_else(|| {
            ArgError::Usage(format!("measure entry '{part}' is not atom:weight"))
        })?;
        atoms.push(
            a.trim()
                .parse::<f64>()
                .map_err(|e| ArgError::Usage(format!("atom '{a}': {e}")))?,
        );
        weights.push(
            w.trim()
                .parse::<f64>()
                .map_err(|e| ArgError::Usage(format!("weight '{w}': {e}")))?,
        );
    }
    DiscreteMeasure::new(atoms, weights).map_err(|e| ArgError::Usage(e.to_string()))
}

impl ModelArgs {
    pub fn scenario_kind(&self) -> Result<Option<ScenarioKind>, ArgError> {
        match &self.scenario {
            None => Ok(None),
            Some(name) => ScenarioKind::parse(name)
                .map(Some)
                .ok_or_else(|| ArgError::Usage(format!("unknown scenario '{name}'"))),
        }
    }

    pub fn resolve(&self) -> Result<ModelSpec, ArgError> {
        if let Some(kind) = self.scenario_kind()? {
            return Ok(kind.model());
        }
        if let Some(path) = &self.model {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ArgError::Io(format!("{}: {e}", path.display())))?;
            return serde_json::from_str::<ModelSpec>(&text).map_err(|e| {
                ArgError::Usage(format!(
                    "{}: invalid model JSON at line {}, column {}: {e}",
                    path.display(),
                    e.line(),
                    e.column()
                ))
            });
        }
        match (self.c1, self.c2, &self.hx, &self.hy) {
            (Some(c1), Some(c2), Some(hx), Some(hy)) => {
                let hx = parse_measure(hx)?;
                let hy = parse_measure(hy)?;
                ModelSpec::new(c1, c2, hx, hy).map_err(|e| ArgError::Usage(e.to_string()))
            }
            _ => Err(ArgError::Usage(
                "provide --scenario, --model FILE, or all of --c1 --c2 --hx --hy".into(),
            )),
        }
    }
}
