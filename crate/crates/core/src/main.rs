use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use isogeo::cli::config::{BodySection, Budgets, ConfigFile, Thresholds};
use isogeo::cli::{emit_report, run_in_pool, Experiment, ExperimentConfig, Overrides};
use isogeo::Error;

#[derive(Parser)]
#[command(
    name = "isogeo",
    version,
    about = "Random polytopes and marginal tails of isotropic convex bodies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mean width of random polytopes against sqrt(ln N) L_K.
    MeanWidth(RunArgs),
    /// Lower Gaussian-rate band of the averaged marginal tail.
    Supergaussian(RunArgs),
    /// Upper Gaussian-rate band of the averaged marginal tail.
    Subgaussian(RunArgs),
    /// Fraction of directions with near-Gaussian marginal density.
    Clt(RunArgs),
    /// Both sides of the Orlicz sphere-average representation.
    OrliczVerify(RunArgs),
    /// Per-direction subgaussian / supergaussian classification.
    Classify(RunArgs),
    /// Draw and dump uniform samples.
    Sample(RunArgs),
    /// Summarize a finished run directory.
    Report { dir: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker count; falls back to ISOGEO_THREADS.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// cube, ball, cross-polytope, simplex or lp (with --p).
    #[arg(long)]
    body: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    /// Comma-separated grid: N values, t values, or s values in units of L_K.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    directions: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    theta_samples: Option<usize>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    sampler: Option<String>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    band: Option<f64>,
    #[arg(long)]
    q_band: Option<f64>,
    #[arg(long)]
    min_fraction: Option<f64>,
    #[arg(long)]
    cap: Option<f64>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    c2_super: Option<f64>,
    #[arg(long)]
    c2_sub: Option<f64>,
}

impl RunArgs {
    fn overrides(self) -> Result<Overrides, Error> {
        let threads =
            match self.threads {
                Some(t) => Some(t),
                None => match std::env::var("ISOGEO_THREADS") {
                    Ok(v) => Some(v.trim().parse().map_err(|_| {
                        Error::Config(format!("ISOGEO_THREADS={v:?} is not a count"))
                    })?),
                    Err(_) => None,
                },
            };
        Ok(Overrides {
            seed: self.seed,
            threads,
            out: self.out,
            body: BodySection {
                kind: self.body,
                dim: self.dim,
                p: self.p,
            },
            budgets: Budgets {
                samples: self.samples,
                trials: self.trials,
                directions: self.directions,
                m: self.m,
                theta_samples: self.theta_samples,
                bins: self.bins,
                sampler: self.sampler,
                burn_in: self.burn_in,
                thin: self.thin,
            },
            grid: self.grid,
            thresholds: Thresholds {
                epsilon: self.eps,
                r: self.r,
                band: self.band,
                q_band: self.q_band,
                min_fraction: self.min_fraction,
                cap: self.cap,
                t_max: self.t_max,
                c2_super: self.c2_super,
                c2_sub: self.c2_sub,
            },
        })
    }
}

fn execute(experiment: Experiment, args: RunArgs) -> Result<i32, Error> {
    let file = match &args.config {
        Some(path) => ExperimentConfig::load_file(path)?,
        None => ConfigFile::default(),
    };
    let config = ExperimentConfig::resolve(experiment, file, args.overrides()?)?;
    let outcome = run_in_pool(&config)?;
    for a in &outcome.manifest.assertions {
        let verdict = if a.passed { "PASS" } else { "FAIL" };
        println!("[{verdict}] {}: {}", a.name, a.detail);
    }
    println!("outputs written to {}", outcome.out_dir.display());
    for a in outcome.failed_assertions() {
        eprintln!("assertion failed: {}", a.name);
    }
    Ok(outcome.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Report { dir } => emit_report(&dir).map(|text| {
            print!("{text}");
            0
        }),
        Command::MeanWidth(a) => execute(Experiment::MeanWidth, a),
        Command::Supergaussian(a) => execute(Experiment::Supergaussian, a),
        Command::Subgaussian(a) => execute(Experiment::Subgaussian, a),
        Command::Clt(a) => execute(Experiment::Clt, a),
        Command::OrliczVerify(a) => execute(Experiment::OrliczVerify, a),
        Command::Classify(a) => execute(Experiment::Classify, a),
        Command::Sample(a) => execute(Experiment::Sample, a),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
