//! Directional and sphere-averaged marginal tails.
//!
//! `F(t) = ∫ |{x ∈ K : |⟨x,θ⟩| ≥ t L_K}| dσ(θ)` is estimated by conditioning
//! on `x`: given `‖x‖`, the inner probability over `θ` is exactly
//! `P(|θ_1| ≥ t L_K / ‖x‖)`, so each sample point contributes a smooth
//! conditional tail instead of an indicator.

use rayon::prelude::*;
use statrs::function::beta::beta_reg;

use crate::bodies::Body;
use crate::error::{check_dim, usage, Error, Result};
use crate::sampling::{map_uniform_blocks, Points, StreamSpec, BLOCK};
use crate::stats::{merge_all, proportion, EstimateWithError, MeanAccumulator};

/// `P(|θ_1| ≥ u)` for `θ` uniform on `S^{n-1}`, i.e. the regularized
/// incomplete beta value `I_{1-u²}((n-1)/2, 1/2)`.
pub fn sphere_tail(n: usize, u: f64) -> f64 {
    if u <= 0.0 {
        1.0
    } else if u >= 1.0 {
        0.0
    } else {
        let x = (1.0 - u) * (1.0 + u);
        beta_reg(0.5 * (n as f64 - 1.0), 0.5, x)
    }
}

/// Geometric grid `start · ratio^k` up to `end`, with `end` appended when the
/// last geometric point falls short of it.
pub fn geometric_grid(start: f64, end: f64, ratio: f64) -> Vec<f64> {
    let mut grid = Vec::new();
    let mut t = start;
    while t <= end * (1.0 + 1e-12) {
        grid.push(t);
        t *= ratio;
    }
    if let Some(&last) = grid.last() {
        if last < end * (1.0 - 1e-9) {
            grid.push(end);
        }
    }
    grid
}

#[derive(Debug, Clone, PartialEq)]
pub enum TailKind {
    Directional(Vec<f64>),
    SphereAveraged,
}

impl TailKind {
    pub fn name(&self) -> &'static str {
        match self {
            TailKind::Directional(_) => "directional",
            TailKind::SphereAveraged => "sphere_averaged",
        }
    }
}

/// Tail estimates on a grid of `t` values measured in units of `L_K`.
#[derive(Debug, Clone, PartialEq)]
pub struct TailCurve {
    pub t_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub kind: TailKind,
}

impl TailCurve {
    pub fn estimate(&self, i: usize) -> EstimateWithError {
        EstimateWithError {
            value: self.values[i],
            std_error: self.std_errors[i],
            samples: 0,
        }
    }

    /// No value rises by more than `k` combined standard errors.
    pub fn is_nonincreasing_within(&self, k: f64) -> bool {
        (1..self.values.len()).all(|i| {
            let se = self.std_errors[i - 1].hypot(self.std_errors[i]);
            self.values[i] <= self.values[i - 1] + k * se
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,value,se,kind\n");
        for i in 0..self.t_grid.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.t_grid[i],
                self.values[i],
                self.std_errors[i],
                self.kind.name()
            ));
        }
        out
    }
}

fn validate_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(usage("t grid is empty"));
    }
    if t_grid.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        return Err(usage("t grid values must be positive and finite"));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(usage("t grid must be strictly increasing"));
    }
    Ok(())
}

/// Fraction of sample points with `|⟨x,θ⟩| ≥ t · lk`, binomial standard error.
pub fn directional_tail(
    samples: &Points,
    theta: &[f64],
    t: f64,
    lk: f64,
) -> Result<EstimateWithError> {
    if samples.is_empty() {
        return Err(usage("directional tail of an empty sample"));
    }
    check_dim(samples.dim(), theta.len(), "direction")?;
    if !(t > 0.0) {
        return Err(usage("t must be positive"));
    }
    let level = t * lk;
    let hits = samples
        .rows()
        .filter(|x| crate::dot(x, theta).abs() >= level)
        .count();
    Ok(proportion(hits, samples.len()))
}

/// Directional tail curve on a grid.
pub fn directional_curve(
    samples: &Points,
    theta: &[f64],
    t_grid: &[f64],
    lk: f64,
) -> Result<TailCurve> {
    validate_grid(t_grid)?;
    let mut values = Vec::with_capacity(t_grid.len());
    let mut std_errors = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let e = directional_tail(samples, theta, t, lk)?;
        values.push(e.value);
        std_errors.push(e.std_error);
    }
    Ok(TailCurve {
        t_grid: t_grid.to_vec(),
        values,
        std_errors,
        kind: TailKind::Directional(theta.to_vec()),
    })
}

/// Sphere-averaged tail `F(t)` by conditional (Rao-Blackwellized) averaging:
/// each point `x` contributes `sphere_tail(n, t L_K / ‖x‖)`.
pub fn averaged_tail(body: &Body, t_grid: &[f64], x_samples: &Points) -> Result<TailCurve> {
    validate_grid(t_grid)?;
    check_dim(body.dim, x_samples.dim(), "samples")?;
    if x_samples.is_empty() {
        return Err(usage("averaged tail of an empty sample"));
    }
    let n = body.dim;
    let parts = x_samples.par_blocks(BLOCK, |block| {
        let mut accs = vec![MeanAccumulator::new(); t_grid.len()];
        for x in block.chunks_exact(n) {
            let r = crate::norm(x);
            for (acc, &t) in accs.iter_mut().zip(t_grid) {
                let u = if r > 0.0 {
                    t * body.lk / r
                } else {
                    f64::INFINITY
                };
                acc.push(sphere_tail(n, u));
            }
        }
        accs
    });
    Ok(collect_curve(t_grid, &parts, TailKind::SphereAveraged))
}

fn collect_curve(t_grid: &[f64], parts: &[Vec<MeanAccumulator>], kind: TailKind) -> TailCurve {
    let mut values = Vec::with_capacity(t_grid.len());
    let mut std_errors = Vec::with_capacity(t_grid.len());
    for j in 0..t_grid.len() {
        let e = merge_all(parts.iter().map(|p| &p[j])).estimate();
        values.push(e.value);
        std_errors.push(e.std_error);
    }
    TailCurve {
        t_grid: t_grid.to_vec(),
        values,
        std_errors,
        kind,
    }
}

/// Naive pair estimator of `F(t)`: one uniform direction per sample point and
/// an indicator. Kept as an independent cross-check of [`averaged_tail`].
pub fn averaged_tail_naive(
    body: &Body,
    t_grid: &[f64],
    x_samples: &Points,
    stream: &StreamSpec,
) -> Result<TailCurve> {
    validate_grid(t_grid)?;
    check_dim(body.dim, x_samples.dim(), "samples")?;
    let n = body.dim;
    let dirs = crate::sampling::sample_sphere(n, x_samples.len(), stream)?;
    let parts: Vec<Vec<MeanAccumulator>> = x_samples
        .as_slice()
        .par_chunks(BLOCK * n)
        .zip(dirs.as_slice().par_chunks(BLOCK * n))
        .map(|(xb, db)| {
            let mut accs = vec![MeanAccumulator::new(); t_grid.len()];
            for (x, theta) in xb.chunks_exact(n).zip(db.chunks_exact(n)) {
                let y = crate::dot(x, theta).abs();
                for (acc, &t) in accs.iter_mut().zip(t_grid) {
                    acc.push(if y >= t * body.lk { 1.0 } else { 0.0 });
                }
            }
            accs
        })
        .collect();
    Ok(collect_curve(t_grid, &parts, TailKind::SphereAveraged))
}

/// Fraction of sample points with `‖x‖ > level`.
pub fn radial_tail(samples: &Points, level: f64) -> EstimateWithError {
    let hits = samples.rows().filter(|x| crate::norm(x) > level).count();
    proportion(hits, samples.len())
}

/// Empirical Gaussian decay rates `q(t) = -ln F(t) / t²` on a subgrid.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianRateFit {
    /// `(t, q(t))` for every resolvable point of the subgrid.
    pub q_values: Vec<(f64, f64)>,
    pub q_min: f64,
    pub q_max: f64,
    pub t_range: (f64, f64),
    /// Grid points whose estimate was exactly zero (below Monte Carlo
    /// resolution); excluded from the fit.
    pub flagged: Vec<f64>,
}

impl GaussianRateFit {
    /// Lower Gaussian bound `F(t) >= e^{-c² t²}` holds on the fit range.
    pub fn supergaussian_holds(&self, c2_target: f64) -> bool {
        self.q_max <= c2_target
    }

    /// Upper Gaussian bound `F(t) <= e^{-c² t²}` holds on the fit range.
    pub fn subgaussian_holds(&self, c2_target: f64) -> bool {
        self.q_min >= c2_target
    }

    /// `q_max / q_min`.
    pub fn band(&self) -> f64 {
        self.q_max / self.q_min
    }
}

pub fn gaussian_rate(curve: &TailCurve, t_min: f64, t_max: f64) -> Result<GaussianRateFit> {
    let mut q_values = Vec::new();
    let mut flagged = Vec::new();
    for (&t, &v) in curve.t_grid.iter().zip(&curve.values) {
        if t < t_min || t > t_max {
            continue;
        }
        if !(0.0..=1.0).contains(&v) {
            return Err(usage(format!("tail value {v} at t={t} outside [0, 1]")));
        }
        if v == 0.0 {
            flagged.push(t);
            continue;
        }
        // -ln 1 = 0 exactly
        q_values.push((t, -v.ln() / (t * t)));
    }
    if q_values.is_empty() {
        if flagged.is_empty() {
            return Err(usage(format!("no grid points in [{t_min}, {t_max}]")));
        }
        return Err(Error::InsufficientSamples(format!(
            "every tail estimate in [{t_min}, {t_max}] is zero"
        )));
    }
    let q_min = q_values.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let q_max = q_values
        .iter()
        .map(|p| p.1)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(GaussianRateFit {
        q_values,
        q_min,
        q_max,
        t_range: (t_min, t_max),
        flagged,
    })
}

/// Per-direction outcome. `None` means no grid point lies in that test's
/// admissible range.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionClass {
    pub index: usize,
    pub subgaussian: Option<bool>,
    pub supergaussian: Option<bool>,
    /// Grid point where the tail comes closest to the subgaussian bound
    /// (largest tail / bound ratio).
    pub worst_t: f64,
    pub tails: Vec<EstimateWithError>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub r: f64,
    pub t_grid: Vec<f64>,
    pub slack_se: f64,
    pub directions: Vec<DirectionClass>,
    pub subgaussian_fraction: Option<f64>,
    pub supergaussian_fraction: Option<f64>,
}

impl Classification {
    pub fn to_csv(&self) -> String {
        let show = |v: Option<bool>| v.map_or("na".to_string(), |b| b.to_string());
        let mut out = String::from("direction_index,subgaussian,supergaussian,worst_t\n");
        for d in &self.directions {
            out.push_str(&format!(
                "{},{},{},{}\n",
                d.index,
                show(d.subgaussian),
                show(d.supergaussian),
                d.worst_t
            ));
        }
        out
    }
}

/// Slack, in standard errors, applied to every tail comparison.
pub const CLASSIFY_SLACK_SE: f64 = 3.0;

/// Classify each direction as subgaussian (`tail ≤ e^{-t²/r²}` for
/// `1 ≤ t ≤ r√n`) and supergaussian (`tail ≥ e^{-r²t²}` for `1 ≤ t ≤ √n/r`)
/// on the grid points inside each range, with ±3 SE slack. Each direction gets
/// its own `samples_per_direction` fresh points from `stream.child(index)`.
pub fn classify_directions(
    body: &Body,
    directions: &Points,
    r: f64,
    t_grid: &[f64],
    samples_per_direction: usize,
    stream: &StreamSpec,
) -> Result<Classification> {
    if directions.is_empty() {
        return Err(usage("direction set is empty"));
    }
    check_dim(body.dim, directions.dim(), "directions")?;
    if !(r > 0.0 && r.is_finite()) {
        return Err(usage("r must be positive and finite"));
    }
    if samples_per_direction == 0 {
        return Err(usage("samples_per_direction must be >= 1"));
    }
    validate_grid(t_grid)?;
    let sqrt_n = (body.dim as f64).sqrt();
    let sub_max = r * sqrt_n;
    let super_max = sqrt_n / r;
    if let Some(&t) = t_grid
        .iter()
        .find(|&&t| t < 1.0 || t > sub_max.max(super_max))
    {
        return Err(usage(format!(
            "t = {t} lies outside both admissible ranges [1, r√n = {sub_max}] and [1, √n/r = {super_max}]"
        )));
    }
    let n = body.dim;
    let levels: Vec<f64> = t_grid.iter().map(|t| t * body.lk).collect();
    let rows: Vec<DirectionClass> = directions
        .rows()
        .enumerate()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(index, theta)| {
            let counts = map_uniform_blocks(
                body,
                samples_per_direction,
                &stream.child(index as u64),
                |block| {
                    let mut c = vec![0usize; levels.len()];
                    for x in block.chunks_exact(n) {
                        let y = crate::dot(x, theta).abs();
                        for (cj, &l) in c.iter_mut().zip(&levels) {
                            if y >= l {
                                *cj += 1;
                            }
                        }
                    }
                    c
                },
            );
            let tails: Vec<EstimateWithError> = (0..levels.len())
                .map(|j| proportion(counts.iter().map(|c| c[j]).sum(), samples_per_direction))
                .collect();
            classify_one(index, &tails, t_grid, r, sub_max, super_max)
        })
        .collect();
    let fraction = |f: fn(&DirectionClass) -> Option<bool>| {
        let votes: Vec<bool> = rows.iter().filter_map(f).collect();
        (!votes.is_empty())
            .then(|| votes.iter().filter(|&&b| b).count() as f64 / votes.len() as f64)
    };
    Ok(Classification {
        r,
        t_grid: t_grid.to_vec(),
        slack_se: CLASSIFY_SLACK_SE,
        subgaussian_fraction: fraction(|d| d.subgaussian),
        supergaussian_fraction: fraction(|d| d.supergaussian),
        directions: rows,
    })
}

fn classify_one(
    index: usize,
    tails: &[EstimateWithError],
    t_grid: &[f64],
    r: f64,
    sub_max: f64,
    super_max: f64,
) -> DirectionClass {
    let k = CLASSIFY_SLACK_SE;
    let mut sub = None;
    let mut sup = None;
    let mut worst = (f64::NEG_INFINITY, t_grid[0]);
    for (e, &t) in tails.iter().zip(t_grid) {
        if t <= sub_max {
            let bound = (-(t * t) / (r * r)).exp();
            let ok = e.value <= bound + k * e.std_error;
            sub = Some(sub.unwrap_or(true) && ok);
            let ratio = e.value / bound;
            if ratio > worst.0 {
                worst = (ratio, t);
            }
        }
        if t <= super_max {
            let bound = (-(r * r) * (t * t)).exp();
            let ok = e.value >= bound - k * e.std_error;
            sup = Some(sup.unwrap_or(true) && ok);
        }
    }
    DirectionClass {
        index,
        subgaussian: sub,
        supergaussian: sup,
        worst_t: worst.1,
        tails: tails.to_vec(),
    }
}
