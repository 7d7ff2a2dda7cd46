//! Random symmetric polytopes `conv{±X_1, …, ±X_N}` and their mean width.

use rayon::prelude::*;

use crate::bodies::Body;
use crate::error::{check_dim, usage, Result};
use crate::sampling::{map_sphere_blocks, sample_sphere, sample_uniform, Points, StreamSpec};
use crate::stats::{merge_all, EstimateWithError, MeanAccumulator};

/// Default number of independent polytopes per expected-width estimate.
pub const DEFAULT_TRIALS: usize = 32;
/// Default number of sphere directions per mean-width estimate.
pub const DEFAULT_DIRECTIONS: usize = 2048;

/// `conv{±X_1, …, ±X_N}`, stored by its generators `X_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomPolytope {
    vertices: Points,
    pub body: Option<Body>,
    pub seed: Option<u64>,
}

impl RandomPolytope {
    pub fn from_vertices(vertices: Points) -> Result<Self> {
        if vertices.is_empty() {
            return Err(usage("polytope needs at least one vertex"));
        }
        Ok(Self {
            vertices,
            body: None,
            seed: None,
        })
    }

    /// `N` i.i.d. uniform points of `body` as generators.
    pub fn sample(body: &Body, n_vertices: usize, stream: &StreamSpec) -> Result<Self> {
        let batch = sample_uniform(body, n_vertices, stream)?;
        Ok(Self {
            vertices: batch.points,
            body: Some(*body),
            seed: Some(stream.master_seed),
        })
    }

    pub fn dim(&self) -> usize {
        self.vertices.dim()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &Points {
        &self.vertices
    }

    /// A copy with one more generator.
    pub fn with_vertex(&self, v: &[f64]) -> Result<Self> {
        check_dim(self.dim(), v.len(), "vertex")?;
        let mut data = self.vertices.as_slice().to_vec();
        data.extend_from_slice(v);
        Ok(Self {
            vertices: Points::new(self.dim(), data)?,
            ..self.clone()
        })
    }

    /// `h(θ) = max_i |⟨X_i, θ⟩|`.
    pub fn support(&self, theta: &[f64]) -> Result<f64> {
        check_dim(self.dim(), theta.len(), "direction")?;
        Ok(self.support_unchecked(theta))
    }

    #[inline]
    pub(crate) fn support_unchecked(&self, theta: &[f64]) -> f64 {
        self.vertices
            .rows()
            .map(|v| crate::dot(v, theta).abs())
            .fold(0.0, f64::max)
    }
}

/// Average of the support function over the given directions.
pub fn mean_width_over(
    polytope: &RandomPolytope,
    directions: &Points,
) -> Result<EstimateWithError> {
    check_dim(polytope.dim(), directions.dim(), "directions")?;
    let parts = directions.par_blocks(crate::sampling::BLOCK, |block| {
        block
            .chunks_exact(polytope.dim())
            .map(|t| polytope.support_unchecked(t))
            .collect::<MeanAccumulator>()
    });
    Ok(merge_all(&parts).estimate())
}

/// Monte Carlo mean width `∫ h dσ` from `m` uniform directions.
pub fn mean_width(
    polytope: &RandomPolytope,
    m: usize,
    stream: &StreamSpec,
) -> Result<EstimateWithError> {
    if m == 0 {
        return Err(usage("mean width needs at least one direction"));
    }
    let n = polytope.dim();
    let parts = map_sphere_blocks(n, m, stream, |block| {
        block
            .chunks_exact(n)
            .map(|t| polytope.support_unchecked(t))
            .collect::<MeanAccumulator>()
    });
    Ok(merge_all(&parts).estimate())
}

/// Per-trial mean widths of nested polytopes `K_{N_1} ⊆ K_{N_2} ⊆ …`
/// built from prefixes of one vertex sample, sharing one direction set.
fn coupled_trial(body: &Body, grid: &[usize], m: usize, trial: &StreamSpec) -> Result<Vec<f64>> {
    let n_max = *grid.last().expect("nonempty grid");
    let poly = RandomPolytope::sample(body, n_max, &trial.child(0))?;
    let dirs = sample_sphere(body.dim, m, &trial.child(1))?;
    let mut accs = vec![MeanAccumulator::new(); grid.len()];
    for theta in dirs.rows() {
        let mut best = 0.0f64;
        let mut g = 0;
        for (i, v) in poly.vertices.rows().enumerate() {
            best = best.max(crate::dot(v, theta).abs());
            while g < grid.len() && grid[g] == i + 1 {
                accs[g].push(best);
                g += 1;
            }
        }
    }
    Ok(accs.iter().map(MeanAccumulator::mean).collect())
}

/// `E w(K_N)`: outer average over `trials` independent polytopes. The
/// standard error is the spread of per-trial widths, which already contains
/// the inner direction-sampling noise.
pub fn expected_mean_width(
    body: &Body,
    n_vertices: usize,
    trials: usize,
    m: usize,
    stream: &StreamSpec,
) -> Result<EstimateWithError> {
    if n_vertices == 0 || trials == 0 || m == 0 {
        return Err(usage("expected mean width needs N, trials, M >= 1"));
    }
    let widths: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|t| coupled_trial(body, &[n_vertices], m, &stream.child(t)).map(|w| w[0]))
        .collect::<Result<_>>()?;
    Ok(widths.into_iter().collect::<MeanAccumulator>().estimate())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WidthRow {
    pub n_vertices: usize,
    pub width: EstimateWithError,
    /// `width / (sqrt(ln N) · L_K)`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WidthCurve {
    pub body: Body,
    pub rows: Vec<WidthRow>,
}

impl WidthCurve {
    /// `max ratio / min ratio`.
    pub fn band(&self) -> f64 {
        let max = self.rows.iter().map(|r| r.ratio).fold(f64::MIN, f64::max);
        let min = self.rows.iter().map(|r| r.ratio).fold(f64::MAX, f64::min);
        max / min
    }

    /// Consecutive widths never drop by more than `k` combined standard errors.
    pub fn is_monotone_within(&self, k: f64) -> bool {
        self.rows.windows(2).all(|w| {
            let se = w[0].width.combined_se(&w[1].width);
            w[1].width.value >= w[0].width.value - k * se
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("N,width,width_se,ratio\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.n_vertices, r.width.value, r.width.std_error, r.ratio
            ));
        }
        out
    }
}

/// Mean width of `K_N` for every `N` in `n_grid`, normalized by
/// `sqrt(ln N) L_K`. Trials couple the grid: each trial draws `max N` points
/// and one direction set, so row `N` equals
/// [`expected_mean_width`]`(body, N, …)` for the same stream.
pub fn width_scaling_curve(
    body: &Body,
    n_grid: &[usize],
    trials: usize,
    m: usize,
    stream: &StreamSpec,
) -> Result<WidthCurve> {
    if !body.is_symmetric() {
        return Err(usage(format!(
            "{} is not origin-symmetric; the width scaling applies to symmetric bodies",
            body.id()
        )));
    }
    if n_grid.is_empty() {
        return Err(usage("N grid is empty"));
    }
    if n_grid.iter().any(|&n| n < 3) {
        return Err(usage("every N in the grid must be >= 3"));
    }
    if n_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(usage("N grid must be strictly increasing"));
    }
    if trials == 0 || m == 0 {
        return Err(usage("trials and M must be >= 1"));
    }
    let per_trial: Vec<Vec<f64>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| coupled_trial(body, n_grid, m, &stream.child(t)))
        .collect::<Result<_>>()?;
    let rows = n_grid
        .iter()
        .enumerate()
        .map(|(g, &nv)| {
            let width = per_trial
                .iter()
                .map(|w| w[g])
                .collect::<MeanAccumulator>()
                .estimate();
            WidthRow {
                n_vertices: nv,
                width,
                ratio: width.value / ((nv as f64).ln().sqrt() * body.lk),
            }
        })
        .collect();
    Ok(WidthCurve { body: *body, rows })
}
