use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bodies::{Body, BodyKind};
use crate::error::{Error, Result};
use crate::gaussref::{DEFAULT_BINS, DEFAULT_T_MAX};
use crate::marginals::geometric_grid;
use crate::polytope::{DEFAULT_DIRECTIONS, DEFAULT_TRIALS};

/// Ratio of consecutive points in default `t` grids.
pub const T_GRID_RATIO: f64 = 1.15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    MeanWidth,
    Supergaussian,
    Subgaussian,
    Clt,
    OrliczVerify,
    Classify,
    Sample,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::MeanWidth,
        Experiment::Supergaussian,
        Experiment::Subgaussian,
        Experiment::Clt,
        Experiment::OrliczVerify,
        Experiment::Classify,
        Experiment::Sample,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::MeanWidth => "mean-width",
            Experiment::Supergaussian => "supergaussian",
            Experiment::Subgaussian => "subgaussian",
            Experiment::Clt => "clt",
            Experiment::OrliczVerify => "orlicz-verify",
            Experiment::Classify => "classify",
            Experiment::Sample => "sample",
        }
    }

    fn default_body(&self) -> (&'static str, usize) {
        match self {
            Experiment::Supergaussian => ("ball", 64),
            Experiment::Subgaussian => ("cube", 64),
            Experiment::Clt => ("cube", 100),
            Experiment::Classify => ("cube", 32),
            Experiment::MeanWidth | Experiment::OrliczVerify => ("cube", 20),
            Experiment::Sample => ("cube", 5),
        }
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment {s:?}")))
    }
}

/// Raw configuration file. Every field is optional; command-line flags win.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub experiment: Option<Experiment>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub body: BodySection,
    #[serde(default)]
    pub budgets: Budgets,
    #[serde(default)]
    pub grids: Grids,
    #[serde(default)]
    pub thresholds: Thresholds,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodySection {
    pub kind: Option<String>,
    pub dim: Option<usize>,
    pub p: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budgets {
    pub samples: Option<usize>,
    pub trials: Option<usize>,
    pub directions: Option<usize>,
    pub m: Option<usize>,
    pub theta_samples: Option<usize>,
    pub bins: Option<usize>,
    pub sampler: Option<String>,
    pub burn_in: Option<usize>,
    pub thin: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grids {
    pub n_grid: Option<Vec<usize>>,
    pub t_grid: Option<Vec<f64>>,
    /// Orlicz levels in units of `L_K`.
    pub s_grid: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    pub epsilon: Option<f64>,
    pub r: Option<f64>,
    pub band: Option<f64>,
    pub q_band: Option<f64>,
    pub min_fraction: Option<f64>,
    pub cap: Option<f64>,
    pub t_max: Option<f64>,
    pub c2_super: Option<f64>,
    pub c2_sub: Option<f64>,
}

/// Command-line overrides, applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub body: BodySection,
    pub budgets: Budgets,
    pub grid: Option<String>,
    pub thresholds: Thresholds,
}

macro_rules! overlay {
    ($dst:expr, $src:expr, $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

/// Fully resolved experiment settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    #[serde(skip)]
    pub threads: Option<usize>,
    pub out_dir: PathBuf,
    pub body: BodySection,
    pub samples: usize,
    pub trials: usize,
    pub directions: usize,
    pub m: usize,
    pub theta_samples: usize,
    pub bins: usize,
    pub sampler: String,
    pub burn_in: Option<usize>,
    pub thin: Option<usize>,
    pub n_grid: Vec<usize>,
    pub t_grid: Vec<f64>,
    pub s_grid: Vec<f64>,
    pub epsilon: f64,
    pub r: f64,
    pub band: f64,
    pub q_band: f64,
    pub min_fraction: Option<f64>,
    pub cap: f64,
    pub t_max: f64,
    pub c2_super: Option<f64>,
    pub c2_sub: Option<f64>,
}

fn parse_list<T: FromStr>(text: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    text.split(',')
        .map(|v| {
            v.trim()
                .parse::<T>()
                .map_err(|e| Error::Config(format!("bad grid value {v:?}: {e}")))
        })
        .collect()
}

impl ExperimentConfig {
    pub fn load_file(path: &Path) -> Result<ConfigFile> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Merge file values, overrides and per-experiment defaults, then validate.
    pub fn resolve(experiment: Experiment, file: ConfigFile, over: Overrides) -> Result<Self> {
        if let Some(e) = file.experiment {
            if e != experiment {
                return Err(Error::Config(format!(
                    "config file is for {} but {} was requested",
                    e.name(),
                    experiment.name()
                )));
            }
        }
        let mut body = file.body;
        overlay!(body, over.body, kind, dim, p);
        let mut b = file.budgets;
        overlay!(
            b,
            over.budgets,
            samples,
            trials,
            directions,
            m,
            theta_samples,
            bins,
            sampler,
            burn_in,
            thin
        );
        let mut th = file.thresholds;
        overlay!(
            th,
            over.thresholds,
            epsilon,
            r,
            band,
            q_band,
            min_fraction,
            cap,
            t_max,
            c2_super,
            c2_sub
        );
        let mut grids = file.grids;
        if let Some(g) = &over.grid {
            match experiment {
                Experiment::MeanWidth => grids.n_grid = Some(parse_list(g)?),
                Experiment::OrliczVerify => grids.s_grid = Some(parse_list(g)?),
                _ => grids.t_grid = Some(parse_list(g)?),
            }
        }

        let (kind, dim) = experiment.default_body();
        if body.kind.is_none() {
            body.kind = Some(kind.to_string());
        }
        if body.dim.is_none() {
            body.dim = Some(dim);
        }
        let n = body.dim.expect("set above");
        let nf = n as f64;

        let default_t_grid = match experiment {
            Experiment::Supergaussian => geometric_grid(1.0, nf.sqrt().min(4.0), T_GRID_RATIO),
            _ => geometric_grid(1.0, nf.powf(0.25), T_GRID_RATIO),
        };
        let samples_default = match experiment {
            Experiment::Clt => 1_000_000,
            Experiment::Classify => 20_000,
            Experiment::Sample => 10_000,
            _ => 200_000,
        };
        let config = ExperimentConfig {
            experiment,
            seed: over.seed.or(file.seed).unwrap_or(0),
            threads: over.threads.or(file.threads),
            out_dir: over
                .out
                .or(file.out)
                .unwrap_or_else(|| PathBuf::from("isogeo-out").join(experiment.name())),
            samples: b.samples.unwrap_or(samples_default),
            trials: b.trials.unwrap_or(DEFAULT_TRIALS),
            directions: b.directions.unwrap_or(match experiment {
                Experiment::Clt => 20,
                _ => 256,
            }),
            m: b.m.unwrap_or(DEFAULT_DIRECTIONS),
            theta_samples: b.theta_samples.unwrap_or(1000),
            bins: b.bins.unwrap_or(DEFAULT_BINS),
            sampler: b.sampler.unwrap_or_else(|| "direct".to_string()),
            burn_in: b.burn_in,
            thin: b.thin,
            n_grid: grids
                .n_grid
                .unwrap_or_else(|| (0..5).map(|k| n * 4usize.pow(k)).collect()),
            t_grid: grids.t_grid.unwrap_or(default_t_grid),
            s_grid: grids.s_grid.unwrap_or_else(|| vec![0.5, 1.0, 2.0]),
            epsilon: th.epsilon.unwrap_or(0.2),
            r: th.r.unwrap_or(3.0),
            band: th.band.unwrap_or(2.0),
            q_band: th.q_band.unwrap_or(4.0),
            min_fraction: th.min_fraction.or(match experiment {
                Experiment::Clt => Some(0.9),
                _ => None,
            }),
            cap: th.cap.unwrap_or(2.0),
            t_max: th.t_max.unwrap_or(DEFAULT_T_MAX),
            c2_super: th.c2_super,
            c2_sub: th.c2_sub,
            body,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn make_body(&self) -> Result<Body> {
        let kind = BodyKind::from_parts(self.body.kind.as_deref().unwrap_or("cube"), self.body.p)?;
        Body::new(kind, self.body.dim.unwrap_or(2))
    }

    fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        let body = self.make_body()?;
        let nf = body.dim as f64;
        for (name, v) in [
            ("samples", self.samples),
            ("trials", self.trials),
            ("directions", self.directions),
            ("m", self.m),
            ("theta_samples", self.theta_samples),
            ("bins", self.bins),
        ] {
            if v == 0 {
                return fail(format!("budget {name} must be positive"));
            }
        }
        let increasing_t = |g: &[f64]| !g.is_empty() && g.windows(2).all(|w| w[1] > w[0]);
        match self.experiment {
            Experiment::MeanWidth => {
                if !body.is_symmetric() {
                    return fail(format!(
                        "mean-width needs a symmetric body, got {}",
                        body.id()
                    ));
                }
                if self.n_grid.is_empty() || self.n_grid.iter().any(|&v| v < 3) {
                    return fail("every N in the grid must be >= 3".into());
                }
                if self.n_grid.windows(2).any(|w| w[1] <= w[0]) {
                    return fail("N grid must be strictly increasing".into());
                }
            }
            Experiment::Supergaussian | Experiment::Subgaussian => {
                if !body.is_symmetric() {
                    return fail(format!("{} needs a symmetric body", self.experiment.name()));
                }
                if !increasing_t(&self.t_grid) || self.t_grid[0] < 1.0 {
                    return fail("t grid must be increasing and start at >= 1".into());
                }
                let limit = match self.experiment {
                    Experiment::Supergaussian => nf.sqrt(),
                    _ if body.is_small_diameter(self.cap) => nf.sqrt(),
                    _ => nf.powf(0.25),
                };
                if let Some(t) = self.t_grid.iter().find(|&&t| t > limit * (1.0 + 1e-12)) {
                    return fail(format!(
                        "t = {t} exceeds the admissible range [1, {limit}] for {}",
                        self.experiment.name()
                    ));
                }
            }
            Experiment::Classify => {
                if !increasing_t(&self.t_grid) || self.t_grid[0] < 1.0 {
                    return fail("t grid must be increasing and start at >= 1".into());
                }
                let limit = (self.r * nf.sqrt()).max(nf.sqrt() / self.r);
                if self.t_grid.iter().any(|&t| t > limit) {
                    return fail(format!("t grid exceeds max(r√n, √n/r) = {limit}"));
                }
                if !(self.r > 0.0) {
                    return fail("r must be positive".into());
                }
            }
            Experiment::Clt => {
                if self.samples < 100_000 {
                    return fail("clt needs samples >= 1e5".into());
                }
                if self.bins < 8 {
                    return fail("clt needs bins >= 8".into());
                }
                if !(self.t_max > 0.0) {
                    return fail("t_max must be positive".into());
                }
            }
            Experiment::OrliczVerify => {
                if self.s_grid.is_empty() || self.s_grid.iter().any(|&s| !(s > 0.0)) {
                    return fail("s grid values must be positive".into());
                }
                if self.samples < 2 || self.theta_samples < 2 {
                    return fail("orlicz-verify needs at least two x and θ samples".into());
                }
            }
            Experiment::Sample => {
                if !matches!(
                    self.sampler.as_str(),
                    "direct" | "hit_and_run" | "hit-and-run"
                ) {
                    return fail(format!("unknown sampler {:?}", self.sampler));
                }
                if self.burn_in == Some(0) || self.thin == Some(0) {
                    return fail("burn_in and thin must be >= 1".into());
                }
            }
        }
        if let Some(f) = self.min_fraction {
            if !(0.0..=1.0).contains(&f) {
                return fail("min_fraction must lie in [0, 1]".into());
            }
        }
        Ok(())
    }
}
