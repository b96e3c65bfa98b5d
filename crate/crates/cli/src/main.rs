//! Command-line front end: wires model/scenario configuration to the library
//! with reproducible seeding and machine-readable outputs.
//!
//! Every run writes `effective-config.json` (all defaults expanded) next to
//! its outputs, so a directory is sufficient to reproduce the run bit for
//! bit. Exit codes: 0 success, 2 usage, 3 numeric failure, 4 I/O failure.

mod model_args;
mod output;
mod runs;

use clap::{Parser, Subcommand};

use crate::model_args::ModelArgs;

#[derive(Parser, Debug)]
#[command(name = "dcov", version, about = "Distance covariance matrix spectra: limit laws, spiked eigenvalues, and dependence-rank detection")]
struct Cli {
    /// Master seed; all replicate streams derive from it.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,

    /// Number of Monte Carlo replicates (command-specific default otherwise).
    #[arg(long, global = true)]
    reps: Option<usize>,

    /// Worker threads for replicate-level parallelism (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Output format for tabular files.
    #[arg(long, global = true, value_parser = ["csv", "json"], default_value = "csv")]
    format: String,

    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "dcov-out")]
    out: std::path::PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the limiting density on a grid and write x,f rows.
    Density {
        #[command(flatten)]
        model: ModelArgs,
        /// Grid as lo:hi:count.
        #[arg(long)]
        grid: String,
        /// Imaginary offset of the inversion approximation.
        #[arg(long, default_value_t = 1e-4)]
        eps: f64,
    },
    /// Locate the right support edge.
    Edge {
        #[command(flatten)]
        model: ModelArgs,
        /// density-threshold (any model) or cubic-discriminant (isotropic).
        #[arg(long, default_value = "density-threshold")]
        method: String,
    },
    /// Compute the critical dependence strength θ₀.
    Theta0 {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Map dependence strengths to predicted outlier locations.
    SpikeMap {
        #[command(flatten)]
        model: ModelArgs,
        /// θ grid as lo:step:hi.
        #[arg(long, default_value = "0:0.1:4")]
        theta_grid: String,
    },
    /// Replicated DCM simulation with theoretical overlays.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        /// Sample size n; p and q derive from the model ratios.
        #[arg(long)]
        n: usize,
        /// Spike strengths (comma separated); empty = independent data.
        #[arg(long, value_delimiter = ',')]
        thetas: Vec<f64>,
        /// Innovation law: normal | chi2 | rademacher.
        #[arg(long, default_value = "normal")]
        law: String,
        /// Leading eigenvalues recorded per replicate.
        #[arg(long, default_value_t = 8)]
        top_k: usize,
    },
    /// Degeneracy study of the T_n statistic (p = q = n/2 design).
    Tn {
        /// Dimension p; the sample size is n = 2p.
        #[arg(long)]
        p: usize,
    },
    /// Estimate the detectable dependence rank over replicates.
    EstimateRank {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        n: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        thetas: Vec<f64>,
        #[arg(long, default_value = "normal")]
        law: String,
        /// Threshold d_n; calibrated from the null when omitted.
        #[arg(long)]
        dn: Option<f64>,
        /// Null replicates used by the calibration.
        #[arg(long, default_value_t = 500)]
        cal_reps: usize,
        /// Lower-quantile level of the calibration.
        #[arg(long, default_value_t = 0.005)]
        level: f64,
    },
    /// Calibrate d_n from the null model.
    Calibrate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: usize,
        #[arg(long)]
        q: usize,
        #[arg(long, default_value = "normal")]
        law: String,
        #[arg(long, default_value_t = 0.005)]
        level: f64,
    },
    /// Contrast DCM spike detection with the CCA and TCCA baselines.
    CompareCca {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        n: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        thetas: Vec<f64>,
        /// Eigenvalues per method.
        #[arg(long, default_value_t = 6)]
        k: usize,
    },
}

impl Cli {
    fn reps_or(&self, default: usize) -> usize {
        self.reps.unwrap_or(default)
    }
}

fn main() {
    let cli = Cli::parse();
    dcov::pin_sequential_linalg();
    let threads = if cli.threads == 0 {
        std::thread::available_parallelism()
            .map(|v| v.get())
            .unwrap_or(1)
    } else {
        cli.threads
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: building worker pool: {e}");
            std::process::exit(3);
        }
    };
    let code = pool.install(|| runs::dispatch(&cli));
    std::process::exit(code);
}
