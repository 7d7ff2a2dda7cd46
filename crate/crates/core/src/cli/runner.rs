use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{Experiment, ExperimentConfig};
use crate::bodies::Body;
use crate::error::{Error, Result};
use crate::gaussref::clt_fraction;
use crate::marginals::{averaged_tail, classify_directions, gaussian_rate, TailCurve};
use crate::orlicz::{representation_csv, verify_representation};
use crate::polytope::width_scaling_curve;
use crate::sampling::{
    hit_and_run, sample_sphere, sample_uniform, write_batch, HitAndRunParams, StreamSpec,
};
use crate::stats::MeanAccumulator;

pub const MANIFEST_FILE: &str = "manifest.toml";

/// Agreement slack, in standard errors, for every statistical assertion.
const SLACK_SE: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Assertion {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Assertion {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryEntry {
    pub name: String,
    pub value: String,
}

/// Contents of `manifest.toml` in a run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub toolkit_version: String,
    pub experiment: String,
    pub seed: u64,
    pub threads: usize,
    pub wall_clock_seconds: f64,
    pub log_base: String,
    pub passed: bool,
    pub body: String,
    pub config: toml::Value,
    pub outputs: Vec<OutputEntry>,
    pub summary: Vec<SummaryEntry>,
    pub assertions: Vec<Assertion>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub manifest: RunManifest,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.manifest.passed
    }

    pub fn failed_assertions(&self) -> Vec<&Assertion> {
        self.manifest
            .assertions
            .iter()
            .filter(|a| !a.passed)
            .collect()
    }

    /// Process exit status: 0 when every assertion passed, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }
}

/// Collected products of one experiment before they are written.
#[derive(Default)]
struct Products {
    files: Vec<(String, Vec<u8>)>,
    summary: Vec<SummaryEntry>,
    assertions: Vec<Assertion>,
}

impl Products {
    fn file(&mut self, name: &str, bytes: impl Into<Vec<u8>>) {
        self.files.push((name.to_string(), bytes.into()));
    }

    fn note(&mut self, name: impl Into<String>, value: impl ToString) {
        self.summary.push(SummaryEntry {
            name: name.into(),
            value: value.to_string(),
        });
    }

    fn check(&mut self, name: &str, passed: bool, detail: String) {
        self.assertions.push(Assertion::new(name, passed, detail));
    }
}

fn pm(value: f64, se: f64) -> String {
    format!("{value:.6} ± {se:.2e}")
}

/// Run the experiment in a dedicated worker pool of `config.threads` workers
/// (rayon's default when unset).
pub fn run_in_pool(config: &ExperimentConfig) -> Result<RunOutcome> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = config.threads {
        if t == 0 {
            return Err(Error::Config("threads must be >= 1".into()));
        }
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    pool.install(|| run(config))
}

/// Run the experiment on the current rayon pool and write all outputs plus
/// the manifest into `config.out_dir`.
pub fn run(config: &ExperimentConfig) -> Result<RunOutcome> {
    let start = Instant::now();
    let body = config.make_body()?;
    let stream = StreamSpec::new(config.seed);
    let products = match config.experiment {
        Experiment::MeanWidth => mean_width(config, &body, &stream)?,
        Experiment::Supergaussian => gaussian_band(config, &body, &stream, true)?,
        Experiment::Subgaussian => gaussian_band(config, &body, &stream, false)?,
        Experiment::Clt => clt(config, &body, &stream)?,
        Experiment::OrliczVerify => orlicz_verify(config, &body, &stream)?,
        Experiment::Classify => classify(config, &body, &stream)?,
        Experiment::Sample => sample(config, &body, &stream)?,
    };

    fs::create_dir_all(&config.out_dir)?;
    let mut outputs = Vec::new();
    for (name, bytes) in &products.files {
        fs::write(config.out_dir.join(name), bytes)?;
        outputs.push(OutputEntry {
            file: name.clone(),
            sha256: hex::encode(Sha256::digest(bytes)),
            bytes: bytes.len() as u64,
        });
    }
    let config_echo = toml::Value::try_from(config)
        .map_err(|e| Error::Config(format!("cannot serialize config: {e}")))?;
    let manifest = RunManifest {
        toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
        experiment: config.experiment.name().to_string(),
        seed: config.seed,
        threads: rayon::current_num_threads(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        log_base: "e".to_string(),
        passed: products.assertions.iter().all(|a| a.passed),
        body: body.descriptor(),
        config: config_echo,
        outputs,
        summary: products.summary,
        assertions: products.assertions,
    };
    let text = toml::to_string(&manifest)
        .map_err(|e| Error::Config(format!("cannot serialize manifest: {e}")))?;
    fs::write(config.out_dir.join(MANIFEST_FILE), text)?;
    Ok(RunOutcome {
        out_dir: config.out_dir.clone(),
        manifest,
    })
}

pub fn read_manifest(run_dir: &Path) -> Result<RunManifest> {
    let path = run_dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path)
        .map_err(|_| Error::Usage(format!("no manifest found at {}", path.display())))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn mean_width(config: &ExperimentConfig, body: &Body, stream: &StreamSpec) -> Result<Products> {
    let curve = width_scaling_curve(body, &config.n_grid, config.trials, config.m, stream)?;
    let mut p = Products::default();
    p.file("width_curve.csv", curve.to_csv());
    let mut dat = String::from("# N ratio ratio_se\n");
    for r in &curve.rows {
        let norm = (r.n_vertices as f64).ln().sqrt() * body.lk;
        dat.push_str(&format!(
            "{} {} {}\n",
            r.n_vertices,
            r.ratio,
            r.width.std_error / norm
        ));
        p.note(
            format!("width N={}", r.n_vertices),
            pm(r.width.value, r.width.std_error),
        );
        p.note(
            format!("ratio N={}", r.n_vertices),
            format!("{:.6}", r.ratio),
        );
    }
    p.file("width_curve.dat", dat);
    let band = curve.band();
    p.note("max/min ratio", format!("{band:.6}"));
    p.check(
        "ratio-band",
        band <= config.band,
        format!("max/min ratio {band:.4} <= {}", config.band),
    );
    p.check(
        "width-monotone",
        curve.is_monotone_within(SLACK_SE),
        format!("widths nondecreasing within {SLACK_SE} SE"),
    );
    Ok(p)
}

fn tail_dat(curve: &TailCurve) -> String {
    let mut dat = String::from("# t value se\n");
    for i in 0..curve.t_grid.len() {
        dat.push_str(&format!(
            "{} {} {}\n",
            curve.t_grid[i], curve.values[i], curve.std_errors[i]
        ));
    }
    dat
}

fn gaussian_band(
    config: &ExperimentConfig,
    body: &Body,
    stream: &StreamSpec,
    lower: bool,
) -> Result<Products> {
    let batch = sample_uniform(body, config.samples, &stream.child(0))?;
    let curve = averaged_tail(body, &config.t_grid, &batch.points)?;
    drop(batch);
    let mut p = Products::default();
    p.file("tail_curve.csv", curve.to_csv());
    p.file("tail_curve.dat", tail_dat(&curve));
    for i in 0..curve.t_grid.len() {
        p.note(
            format!("F(t={:.4})", curve.t_grid[i]),
            pm(curve.values[i], curve.std_errors[i]),
        );
    }
    let t_lo = config.t_grid[0];
    let t_hi = *config.t_grid.last().expect("validated non-empty");
    let fit = gaussian_rate(&curve, t_lo, t_hi);
    let mut rate_csv = String::from("t,q\n");
    match fit {
        Ok(fit) => {
            for (t, q) in &fit.q_values {
                rate_csv.push_str(&format!("{t},{q}\n"));
            }
            p.note("q_min", format!("{:.6}", fit.q_min));
            p.note("q_max", format!("{:.6}", fit.q_max));
            if !fit.flagged.is_empty() {
                let list: Vec<String> = fit.flagged.iter().map(|t| format!("{t:.4}")).collect();
                p.note("flagged (zero estimate)", list.join(" "));
            }
            if lower {
                p.check(
                    "q-finite",
                    fit.q_max.is_finite(),
                    format!("q_max = {:.6} is finite", fit.q_max),
                );
                p.check(
                    "q-band",
                    fit.band() <= config.q_band,
                    format!("q_max/q_min = {:.4} <= {}", fit.band(), config.q_band),
                );
                if let Some(c2) = config.c2_super {
                    p.check(
                        "supergaussian-bound",
                        fit.supergaussian_holds(c2),
                        format!("q_max = {:.6} <= c² = {c2}", fit.q_max),
                    );
                }
            } else {
                p.check(
                    "q-positive",
                    fit.q_min > 0.0,
                    format!("q_min = {:.6} > 0 at every resolvable point", fit.q_min),
                );
                if let Some(c2) = config.c2_sub {
                    p.check(
                        "subgaussian-bound",
                        fit.subgaussian_holds(c2),
                        format!("q_min = {:.6} >= c² = {c2}", fit.q_min),
                    );
                }
            }
        }
        Err(Error::InsufficientSamples(msg)) => {
            p.note("rate fit", format!("unresolved: {msg}"));
            p.check("rate-resolved", false, msg);
        }
        Err(e) => return Err(e),
    }
    p.file("rate.csv", rate_csv);
    Ok(p)
}

fn clt(config: &ExperimentConfig, body: &Body, stream: &StreamSpec) -> Result<Products> {
    let report = clt_fraction(
        body,
        config.directions,
        config.epsilon,
        config.t_max,
        config.bins,
        config.samples,
        stream,
    )?;
    let mut p = Products::default();
    p.file("clt.csv", report.to_csv());
    let mut dat = String::from("# direction_index sup_ratio\n");
    for r in &report.rows {
        dat.push_str(&format!("{} {}\n", r.direction_index, r.sup_ratio));
    }
    p.file("clt.dat", dat);
    p.note(
        "passing_fraction",
        format!("{:.4}", report.passing_fraction),
    );
    let worst = report.rows.iter().map(|r| r.sup_ratio).fold(0.0, f64::max);
    p.note("worst sup_ratio", format!("{worst:.6}"));
    if let Some(f) = config.min_fraction {
        p.check(
            "clt-fraction",
            report.passing_fraction >= f,
            format!(
                "passing_fraction {:.4} >= {f} at ε = {}",
                report.passing_fraction, config.epsilon
            ),
        );
    }
    Ok(p)
}

fn orlicz_verify(config: &ExperimentConfig, body: &Body, stream: &StreamSpec) -> Result<Products> {
    let x = sample_uniform(body, config.samples, &stream.child(0))?;
    let theta = sample_sphere(body.dim, config.theta_samples, &stream.child(1))?;
    let s_values: Vec<f64> = config.s_grid.iter().map(|s| s * body.lk).collect();
    let rows = verify_representation(body, &s_values, &x.points, &theta)?;
    let mut p = Products::default();
    p.file("representation.csv", representation_csv(&rows, SLACK_SE));
    let mut dat = String::from("# s lhs rhs combined_se\n");
    for r in &rows {
        dat.push_str(&format!(
            "{} {} {} {}\n",
            r.s,
            r.lhs.value,
            r.rhs.value,
            r.lhs.combined_se(&r.rhs)
        ));
        p.note(
            format!("lhs s={:.6}", r.s),
            pm(r.lhs.value, r.lhs.std_error),
        );
        p.note(
            format!("rhs s={:.6}", r.s),
            pm(r.rhs.value, r.rhs.std_error),
        );
    }
    p.file("representation.dat", dat);
    for r in &rows {
        p.check(
            &format!("representation s={:.6}", r.s),
            r.passes(SLACK_SE),
            format!(
                "|lhs - rhs| = {:.3e} <= {SLACK_SE} × {:.3e}",
                (r.lhs.value - r.rhs.value).abs(),
                r.lhs.combined_se(&r.rhs)
            ),
        );
    }
    Ok(p)
}

fn classify(config: &ExperimentConfig, body: &Body, stream: &StreamSpec) -> Result<Products> {
    let directions = sample_sphere(body.dim, config.directions, &stream.child(0))?;
    let c = classify_directions(
        body,
        &directions,
        config.r,
        &config.t_grid,
        config.samples,
        &stream.child(1),
    )?;
    let mut p = Products::default();
    p.file("classification.csv", c.to_csv());
    let mut dat = String::from("# direction_index worst_t\n");
    for d in &c.directions {
        dat.push_str(&format!("{} {}\n", d.index, d.worst_t));
    }
    p.file("classification.dat", dat);
    let show = |f: Option<f64>| f.map_or("na".to_string(), |v| format!("{v:.4}"));
    p.note("subgaussian_fraction", show(c.subgaussian_fraction));
    p.note("supergaussian_fraction", show(c.supergaussian_fraction));
    p.note("slack_se", c.slack_se);
    if let Some(f) = config.min_fraction {
        let got = c.subgaussian_fraction;
        p.check(
            "subgaussian-fraction",
            got.is_some_and(|v| v >= f),
            format!("subgaussian_fraction {} >= {f}", show(got)),
        );
    }
    Ok(p)
}

fn sample(config: &ExperimentConfig, body: &Body, stream: &StreamSpec) -> Result<Products> {
    let batch = match config.sampler.as_str() {
        "direct" => sample_uniform(body, config.samples, stream)?,
        _ => {
            let mut params = HitAndRunParams::default_for(body.dim);
            if let Some(b) = config.burn_in {
                params.burn_in = b;
            }
            if let Some(t) = config.thin {
                params.thin = t;
            }
            let start = vec![0.0; body.dim];
            hit_and_run(body, &start, params, config.samples, stream)?
        }
    };
    let n = body.dim;
    let mut first = vec![MeanAccumulator::new(); n];
    let mut second = vec![MeanAccumulator::new(); n];
    let mut outside = 0usize;
    for row in batch.points.rows() {
        if !body.contains(row) {
            outside += 1;
        }
        for (j, &v) in row.iter().enumerate() {
            first[j].push(v);
            second[j].push(v * v);
        }
    }
    let mut csv = String::from("coordinate,mean,mean_se,second_moment,second_moment_se\n");
    let mut dat = String::from("# coordinate second_moment se\n");
    for j in 0..n {
        let (a, b) = (first[j].estimate(), second[j].estimate());
        csv.push_str(&format!(
            "{j},{},{},{},{}\n",
            a.value, a.std_error, b.value, b.std_error
        ));
        dat.push_str(&format!("{j} {} {}\n", b.value, b.std_error));
    }
    let mut bin = Vec::new();
    write_batch(&batch, &mut bin)?;
    let mut p = Products::default();
    p.file("samples.bin", bin);
    p.file("moments.csv", csv);
    p.file("moments.dat", dat);
    p.note("sampler", batch.sampler.name());
    p.note("lk²", format!("{:.6}", body.lk * body.lk));
    p.check(
        "membership",
        outside == 0,
        format!("{outside} of {} points outside the body", batch.len()),
    );
    Ok(p)
}
