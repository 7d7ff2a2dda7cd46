//! Standard Gaussian reference functions, Mills-ratio bounds, and histogram
//! comparisons of body marginals against the Gaussian density.

use std::f64::consts::{PI, SQRT_2};

use libm::erfc;
use rayon::prelude::*;
use serde::Serialize;

use crate::bodies::Body;
use crate::error::{check_dim, usage, Error, Result};
use crate::sampling::{map_uniform_blocks, sample_sphere, Points, StreamSpec};

/// Exponent κ of the CLT window `|t| < c n^κ` for symmetric bodies.
pub const KAPPA: f64 = 1.0 / 24.0;

/// Default half-width of the density-comparison window.
pub const DEFAULT_T_MAX: f64 = 1.2;

/// Default number of histogram bins on `[-t_max, t_max]`.
pub const DEFAULT_BINS: usize = 24;

/// `γ(t) = e^{-t²/2} / √(2π)`.
pub fn density(t: f64) -> f64 {
    (-0.5 * t * t).exp() / (2.0 * PI).sqrt()
}

/// Upper tail `∫_t^∞ γ(s) ds`.
pub fn gaussian_tail(t: f64) -> f64 {
    0.5 * erfc(t / SQRT_2)
}

/// Gaussian probability of `[a, b]`, computed from whichever tail keeps
/// precision.
pub fn interval_mass(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        gaussian_tail(a) - gaussian_tail(b)
    } else if b <= 0.0 {
        gaussian_tail(-b) - gaussian_tail(-a)
    } else {
        1.0 - gaussian_tail(-a) - gaussian_tail(b)
    }
}

/// `n^κ`.
pub fn clt_window(n: usize) -> f64 {
    (n as f64).powf(KAPPA)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MillsPoint {
    pub t: f64,
    /// `γ(t) / 2t`.
    pub lower: f64,
    pub tail: f64,
    /// `2γ(t) / t`.
    pub upper: f64,
    pub pass: bool,
}

/// Evaluate `γ(t)/2t ≤ ∫_t^∞ γ ≤ 2γ(t)/t` at every grid point (`t ≥ 1`).
pub fn mills_check(t_grid: &[f64]) -> Result<Vec<MillsPoint>> {
    if let Some(t) = t_grid.iter().find(|&&t| !(t >= 1.0)) {
        return Err(usage(format!("Mills bounds need t >= 1, got {t}")));
    }
    Ok(t_grid
        .iter()
        .map(|&t| {
            let g = density(t);
            let (lower, tail, upper) = (g / (2.0 * t), gaussian_tail(t), 2.0 * g / t);
            MillsPoint {
                t,
                lower,
                tail,
                upper,
                pass: lower <= tail && tail <= upper,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BinRatio {
    pub center: f64,
    /// Empirical bin probability over Gaussian bin probability.
    pub ratio: f64,
    /// Binomial standard error of `ratio`.
    pub uncertainty: f64,
}

/// Histogram comparison of the marginal `⟨X,θ⟩ / L_K` with `γ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityRatio {
    pub t_max: f64,
    pub samples: usize,
    pub bins: Vec<BinRatio>,
    /// `max_j |ratio_j − 1|`.
    pub sup_ratio: f64,
}

/// Gaussian masses of `bins` equal bins on `[-t_max, t_max]`.
pub fn gaussian_bin_masses(t_max: f64, bins: usize) -> Vec<f64> {
    let width = 2.0 * t_max / bins as f64;
    (0..bins)
        .map(|j| {
            let a = -t_max + j as f64 * width;
            interval_mass(a, a + width)
        })
        .collect()
}

fn validate_histogram(t_max: f64, bins: usize, samples: usize) -> Result<Vec<f64>> {
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(usage("t_max must be positive"));
    }
    if bins < 8 {
        return Err(usage(format!("need at least 8 bins, got {bins}")));
    }
    if samples < 100_000 {
        return Err(usage(format!("need at least 1e5 samples, got {samples}")));
    }
    let masses = gaussian_bin_masses(t_max, bins);
    if let Some(p) = masses.iter().find(|&&p| p * (samples as f64) < 1.0) {
        return Err(Error::Resolution(format!(
            "a bin has expected count {} < 1 under γ; reduce t_max or raise samples",
            p * samples as f64
        )));
    }
    Ok(masses)
}

fn ratio_from_counts(counts: &[usize], masses: &[f64], t_max: f64, samples: usize) -> DensityRatio {
    let width = 2.0 * t_max / masses.len() as f64;
    let m = samples as f64;
    let bins: Vec<BinRatio> = counts
        .iter()
        .zip(masses)
        .enumerate()
        .map(|(j, (&c, &p))| {
            let q = c as f64 / m;
            BinRatio {
                center: -t_max + (j as f64 + 0.5) * width,
                ratio: q / p,
                uncertainty: (q * (1.0 - q) / m).sqrt() / p,
            }
        })
        .collect();
    let sup_ratio = bins
        .iter()
        .map(|b| (b.ratio - 1.0).abs())
        .fold(0.0, f64::max);
    DensityRatio {
        t_max,
        samples,
        bins,
        sup_ratio,
    }
}

/// Bin counts of `⟨x,θ⟩/L_K` for several directions from one stream of body
/// samples.
fn histogram_counts(
    body: &Body,
    directions: &Points,
    t_max: f64,
    bins: usize,
    samples: usize,
    stream: &StreamSpec,
) -> Vec<Vec<usize>> {
    let n = body.dim;
    let k = directions.len();
    let inv_width = bins as f64 / (2.0 * t_max);
    let inv_lk = 1.0 / body.lk;
    let parts = map_uniform_blocks(body, samples, stream, |block| {
        let mut counts = vec![0usize; k * bins];
        for x in block.chunks_exact(n) {
            for (d, theta) in directions.rows().enumerate() {
                let y = crate::dot(x, theta) * inv_lk;
                if y.abs() < t_max {
                    let j = (((y + t_max) * inv_width) as usize).min(bins - 1);
                    counts[d * bins + j] += 1;
                }
            }
        }
        counts
    });
    let mut total = vec![0usize; k * bins];
    for p in &parts {
        for (t, c) in total.iter_mut().zip(p) {
            *t += c;
        }
    }
    total.chunks_exact(bins).map(<[usize]>::to_vec).collect()
}

/// Histogram estimate of `f_θ / γ` on `[-t_max, t_max]` from `samples` fresh
/// body points.
pub fn marginal_density_ratio(
    body: &Body,
    theta: &[f64],
    t_max: f64,
    bins: usize,
    samples: usize,
    stream: &StreamSpec,
) -> Result<DensityRatio> {
    check_dim(body.dim, theta.len(), "direction")?;
    let masses = validate_histogram(t_max, bins, samples)?;
    let dirs = Points::new(body.dim, theta.to_vec())?;
    let counts = histogram_counts(body, &dirs, t_max, bins, samples, stream);
    Ok(ratio_from_counts(&counts[0], &masses, t_max, samples))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CltRow {
    pub direction_index: usize,
    pub sup_ratio: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CltReport {
    pub epsilon: f64,
    pub t_max: f64,
    pub bins: usize,
    pub samples: usize,
    pub rows: Vec<CltRow>,
    pub passing_fraction: f64,
}

impl CltReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("direction_index,sup_ratio,pass\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{}\n",
                r.direction_index, r.sup_ratio, r.pass
            ));
        }
        out
    }
}

/// Fraction of uniformly random directions whose density sup-ratio is at most
/// `epsilon`. Directions come from `stream.child(0)`; all directions share one
/// body sample of size `samples` from `stream.child(1)`.
pub fn clt_fraction(
    body: &Body,
    direction_count: usize,
    epsilon: f64,
    t_max: f64,
    bins: usize,
    samples: usize,
    stream: &StreamSpec,
) -> Result<CltReport> {
    if direction_count == 0 {
        return Err(usage("direction_count must be >= 1"));
    }
    let masses = validate_histogram(t_max, bins, samples)?;
    let dirs = sample_sphere(body.dim, direction_count, &stream.child(0))?;
    let counts = histogram_counts(body, &dirs, t_max, bins, samples, &stream.child(1));
    let rows: Vec<CltRow> = counts
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let r = ratio_from_counts(c, &masses, t_max, samples);
            CltRow {
                direction_index: i,
                sup_ratio: r.sup_ratio,
                pass: r.sup_ratio <= epsilon,
            }
        })
        .collect();
    let passing = rows.iter().filter(|r| r.pass).count();
    Ok(CltReport {
        epsilon,
        t_max,
        bins,
        samples,
        passing_fraction: passing as f64 / rows.len() as f64,
        rows,
    })
}
