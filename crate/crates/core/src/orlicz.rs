//! The Orlicz function `M_θ` of a marginal and the support levels it induces.
//!
//! With `Y = ⟨X,θ⟩`, `M_θ(1/s) = ∫_0^{1/s} E[|Y| 1{|Y| ≥ 1/t}] dt`.
//! Integrating the indicator in `t` over `[1/|Y|, 1/s]` gives the pointwise
//! form `E[(|Y|/s − 1)₊]`, which is exact on an empirical measure and is the
//! evaluator used throughout.

use std::f64::consts::PI;

use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::bodies::Body;
use crate::error::{check_dim, usage, Result};
use crate::quad::integrate;
use crate::sampling::{Points, BLOCK};
use crate::stats::{merge_all, EstimateWithError, MeanAccumulator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OrliczMethod {
    DefinitionQuadrature,
    SampleClosedForm,
    SphereClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrliczEvaluation {
    pub s: f64,
    pub value: f64,
    pub method: OrliczMethod,
    /// Standard error for sample evaluations, quadrature error estimate
    /// otherwise.
    pub error: f64,
}

#[inline]
fn excess(abs_y: f64, s: f64) -> f64 {
    if abs_y >= s {
        abs_y / s - 1.0
    } else {
        0.0
    }
}

/// `M_θ(1/s)` of the empirical measure of `samples`.
pub fn orlicz_sample(samples: &Points, theta: &[f64], s: f64) -> Result<OrliczEvaluation> {
    check_dim(samples.dim(), theta.len(), "direction")?;
    if !(s > 0.0) {
        return Err(usage("Orlicz level s must be positive"));
    }
    if samples.is_empty() {
        return Err(usage("Orlicz evaluation of an empty sample"));
    }
    let est = samples
        .rows()
        .map(|x| excess(crate::dot(x, theta).abs(), s))
        .collect::<MeanAccumulator>()
        .estimate();
    Ok(OrliczEvaluation {
        s,
        value: est.value,
        method: OrliczMethod::SampleClosedForm,
        error: if est.std_error.is_nan() {
            0.0
        } else {
            est.std_error
        },
    })
}

/// `M_θ(1/s)` straight from the double-integral definition for a symmetric
/// marginal density supported on `[-support, support]`: the inner truncated
/// first moment `2∫_u^a y f(y) dy` and the outer `t`-integral are both done by
/// adaptive quadrature.
pub fn orlicz_definition_quadrature<F>(
    density: F,
    support: f64,
    s: f64,
    rel_tol: f64,
) -> OrliczEvaluation
where
    F: Fn(f64) -> f64,
{
    let truncated_moment = |u: f64| {
        if u >= support {
            0.0
        } else {
            2.0 * integrate(|y| y * density(y), u, support, rel_tol * 1e-2, 0.0).value
        }
    };
    // the integrand vanishes for t < 1/support
    let (lo, hi) = (1.0 / support, 1.0 / s);
    let q = if hi <= lo {
        crate::quad::Quadrature {
            value: 0.0,
            error: 0.0,
            converged: true,
        }
    } else {
        integrate(|t| truncated_moment(1.0 / t), lo, hi, rel_tol, 0.0)
    };
    OrliczEvaluation {
        s,
        value: q.value,
        method: OrliczMethod::DefinitionQuadrature,
        error: q.error,
    }
}

/// `ln(|B_2^{n-1}| / |B_2^n|)`.
fn ln_ball_volume_ratio(n: usize) -> f64 {
    let n = n as f64;
    -0.5 * PI.ln() + ln_gamma(0.5 * n + 1.0) - ln_gamma(0.5 * (n + 1.0))
}

/// `M_{⟨θ,e_1⟩}(‖x‖/s)` for `θ` uniform on `S^{n-1}`:
/// `(2 w_{n-1} / (n w_n)) ∫_0^{arccos(s/‖x‖)} sin^n y / cos² y dy`,
/// zero when `s ≥ ‖x‖`.
pub fn orlicz_sphere_formula(n: usize, norm_x: f64, s: f64) -> f64 {
    sphere_formula_eval(n, norm_x, s).value
}

pub fn sphere_formula_eval(n: usize, norm_x: f64, s: f64) -> OrliczEvaluation {
    let zero = OrliczEvaluation {
        s,
        value: 0.0,
        method: OrliczMethod::SphereClosedForm,
        error: 0.0,
    };
    if s >= norm_x {
        return zero;
    }
    let constant = 2.0 * ln_ball_volume_ratio(n).exp() / n as f64;
    let upper = (s / norm_x).acos();
    let q = integrate(
        |y: f64| {
            let c = y.cos();
            y.sin().powi(n as i32) / (c * c)
        },
        0.0,
        upper,
        1e-10,
        0.0,
    );
    OrliczEvaluation {
        value: constant * q.value,
        error: constant * q.error,
        ..zero
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RepresentationRow {
    pub s: f64,
    /// Direction average of the sample Orlicz values.
    pub lhs: EstimateWithError,
    /// Body average of the sphere formula at `‖x‖`.
    pub rhs: EstimateWithError,
}

impl RepresentationRow {
    pub fn passes(&self, k: f64) -> bool {
        self.lhs.agrees_with(&self.rhs, k)
    }
}

/// Both sides of `∫ M_θ(1/s) dσ(θ) = ∫_K M_{⟨θ,e_1⟩}(‖x‖/s) dx` for each `s`.
///
/// The left side is a crossed design over `x` and `θ`; its variance is taken
/// as `var_θ(row means)/k + var_x(column means)/m`.
pub fn verify_representation(
    body: &Body,
    s_values: &[f64],
    x_samples: &Points,
    theta_samples: &Points,
) -> Result<Vec<RepresentationRow>> {
    check_dim(body.dim, x_samples.dim(), "x samples")?;
    check_dim(body.dim, theta_samples.dim(), "theta samples")?;
    if x_samples.len() < 2 || theta_samples.len() < 2 {
        return Err(usage(
            "representation check needs at least two x and two θ samples",
        ));
    }
    if s_values.iter().any(|&s| !(s > 0.0)) {
        return Err(usage("Orlicz level s must be positive"));
    }
    let n = body.dim;
    let ns = s_values.len();
    let k = theta_samples.len();
    let m = x_samples.len();

    struct Part {
        x_means: Vec<MeanAccumulator>,
        theta_sums: Vec<f64>,
        rhs: Vec<MeanAccumulator>,
    }
    let parts = x_samples.par_blocks(BLOCK, |block| {
        let rows = block.len() / n;
        let mut per_x = vec![0.0; rows * ns];
        let mut theta_sums = vec![0.0; k * ns];
        let mut proj = vec![0.0; rows];
        for (ti, theta) in theta_samples.rows().enumerate() {
            for (p, x) in proj.iter_mut().zip(block.chunks_exact(n)) {
                *p = crate::dot(x, theta).abs();
            }
            for (si, &s) in s_values.iter().enumerate() {
                let mut sum = 0.0;
                for (xi, &y) in proj.iter().enumerate() {
                    let g = excess(y, s);
                    per_x[xi * ns + si] += g;
                    sum += g;
                }
                theta_sums[ti * ns + si] += sum;
            }
        }
        let mut x_means = vec![MeanAccumulator::new(); ns];
        let mut rhs = vec![MeanAccumulator::new(); ns];
        for (xi, x) in block.chunks_exact(n).enumerate() {
            let r = crate::norm(x);
            for si in 0..ns {
                x_means[si].push(per_x[xi * ns + si] / k as f64);
                rhs[si].push(orlicz_sphere_formula(n, r, s_values[si]));
            }
        }
        Part {
            x_means,
            theta_sums,
            rhs,
        }
    });

    let mut theta_sums = vec![0.0; k * ns];
    for p in &parts {
        for (acc, v) in theta_sums.iter_mut().zip(&p.theta_sums) {
            *acc += v;
        }
    }
    let rows = (0..ns)
        .map(|si| {
            let x_acc = merge_all(parts.iter().map(|p| &p.x_means[si]));
            let theta_acc: MeanAccumulator = (0..k)
                .map(|ti| theta_sums[ti * ns + si] / m as f64)
                .collect();
            let var = theta_acc.variance() / k as f64 + x_acc.variance() / m as f64;
            let lhs = EstimateWithError {
                value: x_acc.mean(),
                std_error: var.sqrt(),
                samples: m * k,
            };
            let rhs = merge_all(parts.iter().map(|p| &p.rhs[si])).estimate();
            RepresentationRow {
                s: s_values[si],
                lhs,
                rhs,
            }
        })
        .collect();
    Ok(rows)
}

pub fn representation_csv(rows: &[RepresentationRow], k: f64) -> String {
    let mut out = String::from("s,lhs,lhs_se,rhs,rhs_se,pass\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.s,
            r.lhs.value,
            r.lhs.std_error,
            r.rhs.value,
            r.rhs.std_error,
            r.passes(k)
        ));
    }
    out
}

/// Empirical `M_θ(1/s)` with O(log m) evaluation: sorted `|Y|` plus prefix
/// sums.
#[derive(Debug, Clone)]
pub struct SortedMarginal {
    /// `|Y_i|` in decreasing order.
    abs_desc: Vec<f64>,
    prefix: Vec<f64>,
}

impl SortedMarginal {
    pub fn new(samples: &Points, theta: &[f64]) -> Result<Self> {
        check_dim(samples.dim(), theta.len(), "direction")?;
        if samples.is_empty() {
            return Err(usage("empty sample"));
        }
        let abs: Vec<f64> = samples.rows().map(|x| crate::dot(x, theta).abs()).collect();
        Ok(Self::from_abs(abs))
    }

    pub fn from_abs(mut abs: Vec<f64>) -> Self {
        abs.sort_unstable_by(|a, b| b.total_cmp(a));
        let mut prefix = Vec::with_capacity(abs.len() + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for &v in &abs {
            acc += v;
            prefix.push(acc);
        }
        Self {
            abs_desc: abs,
            prefix,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.abs_desc[0]
    }

    /// `M_θ(1/s) = (1/m) Σ_{|Y_i| ≥ s} (|Y_i|/s − 1)`.
    pub fn orlicz(&self, s: f64) -> f64 {
        let k = self.abs_desc.partition_point(|&v| v >= s);
        (self.prefix[k] / s - k as f64) / self.abs_desc.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupportLevel {
    pub s0: f64,
    /// The Orlicz value was already `<= 1/N` at the smallest bracket.
    pub flagged: bool,
}

/// Smallest bracket as a fraction of `max |Y|`.
const LEVEL_BRACKET_FLOOR: f64 = 1e-12;

/// `inf{s > 0 : M_θ(1/s) ≤ 1/N}` for the empirical marginal, by bisection to
/// 1e-10 relative width.
pub fn implied_support_level(
    samples: &Points,
    theta: &[f64],
    n_vertices: usize,
) -> Result<SupportLevel> {
    if n_vertices < 2 {
        return Err(usage("implied support level needs N >= 2"));
    }
    let marginal = SortedMarginal::new(samples, theta)?;
    Ok(support_level_of(&marginal, n_vertices))
}

pub fn support_level_of(marginal: &SortedMarginal, n_vertices: usize) -> SupportLevel {
    let target = 1.0 / n_vertices as f64;
    let mut hi = marginal.max_abs();
    let mut lo = hi * LEVEL_BRACKET_FLOOR;
    if !(hi > 0.0) || marginal.orlicz(lo) <= target {
        return SupportLevel {
            s0: lo,
            flagged: true,
        };
    }
    // invariant: M(lo) > target >= M(hi)
    for _ in 0..200 {
        if hi - lo <= 1e-10 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if marginal.orlicz(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    SupportLevel {
        s0: 0.5 * (lo + hi),
        flagged: false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailBoundCheck {
    pub m_value: EstimateWithError,
    /// `½ P(|Y| ≥ 2s)`.
    pub half_tail: EstimateWithError,
}

impl TailBoundCheck {
    /// `M_θ(1/s) ≥ ½ P(|Y| ≥ 2s) − k · combined SE`.
    pub fn holds(&self, k: f64) -> bool {
        self.m_value.value >= self.half_tail.value - k * self.m_value.combined_se(&self.half_tail)
    }
}

/// Both sides of `M_θ(1/s) ≥ ½ |{x : |⟨x,θ⟩| ≥ 2s}|`.
pub fn tail_bound_check(samples: &Points, theta: &[f64], s: f64) -> Result<TailBoundCheck> {
    let m = orlicz_sample(samples, theta, s)?;
    let hits = samples
        .rows()
        .filter(|x| crate::dot(x, theta).abs() >= 2.0 * s)
        .count();
    let tail = crate::stats::proportion(hits, samples.len());
    Ok(TailBoundCheck {
        m_value: EstimateWithError {
            value: m.value,
            std_error: m.error,
            samples: samples.len(),
        },
        half_tail: EstimateWithError {
            value: 0.5 * tail.value,
            std_error: 0.5 * tail.std_error,
            samples: tail.samples,
        },
    })
}
