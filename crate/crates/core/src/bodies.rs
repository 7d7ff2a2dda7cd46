//! Catalog of isotropic convex bodies.
//!
//! Every body is scaled to volume one and centered at the origin. The
//! isotropic constant `lk` and the circumradius are computed from closed
//! forms (log-Gamma ratios), so they carry no Monte Carlo noise.

use std::f64::consts::PI;
use std::fmt;

use statrs::function::gamma::ln_gamma;

use crate::error::{check_dim, Error, Result};

/// Relative slack for boundary-inclusive membership.
const BOUNDARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BodyKind {
    /// `[-1/2, 1/2]^n`.
    Cube,
    /// Euclidean ball of volume one.
    Ball,
    /// `B_1^n` rescaled to volume one.
    CrossPolytope,
    /// Regular simplex, translated so the barycenter is the origin.
    Simplex,
    /// `B_p^n = {x : sum |x_i|^p <= 1}` rescaled to volume one, `1 <= p < inf`.
    LpBall { p: f64 },
}

impl BodyKind {
    /// Parse a kind name plus optional exponent, as found in configs and on the
    /// command line.
    pub fn from_parts(name: &str, p: Option<f64>) -> Result<Self> {
        let kind = match (name, p) {
            ("cube", None) => BodyKind::Cube,
            ("ball", None) => BodyKind::Ball,
            ("cross_polytope" | "cross-polytope", None) => BodyKind::CrossPolytope,
            ("simplex", None) => BodyKind::Simplex,
            ("lp" | "lp_ball" | "lp-ball", Some(p)) => BodyKind::LpBall { p },
            ("lp" | "lp_ball" | "lp-ball", None) => {
                return Err(Error::Config("lp_ball requires an exponent p".into()))
            }
            ("cube" | "ball" | "cross_polytope" | "cross-polytope" | "simplex", Some(_)) => {
                return Err(Error::Config(format!(
                    "body kind {name} does not take an exponent p"
                )))
            }
            _ => return Err(Error::Config(format!("unknown body kind {name:?}"))),
        };
        if let BodyKind::LpBall { p } = kind {
            if !(p.is_finite() && p >= 1.0) {
                return Err(Error::Config(format!(
                    "lp_ball exponent must be finite and >= 1, got {p}"
                )));
            }
        }
        Ok(kind)
    }

    pub fn name(&self) -> &'static str {
        match self {
            BodyKind::Cube => "cube",
            BodyKind::Ball => "ball",
            BodyKind::CrossPolytope => "cross_polytope",
            BodyKind::Simplex => "simplex",
            BodyKind::LpBall { .. } => "lp_ball",
        }
    }

    /// Exponent of the `ℓ_p` ball this kind belongs to, if any.
    pub fn exponent(&self) -> Option<f64> {
        match *self {
            BodyKind::Cube => Some(f64::INFINITY),
            BodyKind::Ball => Some(2.0),
            BodyKind::CrossPolytope => Some(1.0),
            BodyKind::LpBall { p } => Some(p),
            BodyKind::Simplex => None,
        }
    }
}

/// A volume-one, centered convex body from the catalog.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Body {
    pub kind: BodyKind,
    pub dim: usize,
    /// Homothety factor applied to the base body (`[-1/2,1/2]^n`, `B_2^n`,
    /// `B_p^n`, or the edge-√2 regular simplex).
    pub scale: f64,
    /// Isotropic constant: standard deviation of every 1-D marginal.
    pub lk: f64,
    pub circumradius: f64,
}

/// `ln |B_2^n|`.
pub fn ln_unit_ball_volume(n: usize) -> f64 {
    let n = n as f64;
    0.5 * n * PI.ln() - ln_gamma(0.5 * n + 1.0)
}

/// `ln |B_p^n|` for finite `p >= 1`.
pub fn ln_lp_ball_volume(n: usize, p: f64) -> f64 {
    let nf = n as f64;
    nf * (2.0f64.ln() + ln_gamma(1.0 + 1.0 / p)) - ln_gamma(1.0 + nf / p)
}

/// `E x_1^2` for `x` uniform in `B_p^n`.
fn lp_second_moment(n: usize, p: f64) -> f64 {
    let nf = n as f64;
    (ln_gamma(3.0 / p) + ln_gamma(1.0 + nf / p)
        - ln_gamma(1.0 / p)
        - ln_gamma(1.0 + (nf + 2.0) / p))
    .exp()
}

impl Body {
    pub fn new(kind: BodyKind, dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Config(format!("dimension must be >= 2, got {dim}")));
        }
        let n = dim as f64;
        let body = match kind {
            BodyKind::Cube => Body {
                kind,
                dim,
                scale: 1.0,
                lk: (1.0f64 / 12.0).sqrt(),
                circumradius: 0.5 * n.sqrt(),
            },
            BodyKind::Ball => {
                let r = (-ln_unit_ball_volume(dim) / n).exp();
                Body {
                    kind,
                    dim,
                    scale: r,
                    lk: r / (n + 2.0).sqrt(),
                    circumradius: r,
                }
            }
            BodyKind::CrossPolytope => Self::lp(kind, dim, 1.0),
            BodyKind::LpBall { p } => {
                BodyKind::from_parts("lp_ball", Some(p))?;
                Self::lp(kind, dim, p)
            }
            BodyKind::Simplex => {
                // the edge-√2 simplex has volume sqrt(n+1)/n!
                let s = ((ln_gamma(n + 1.0) - 0.5 * (n + 1.0).ln()) / n).exp();
                Body {
                    kind,
                    dim,
                    scale: s,
                    lk: s / ((n + 1.0) * (n + 2.0)).sqrt(),
                    circumradius: s * (n / (n + 1.0)).sqrt(),
                }
            }
        };
        Ok(body)
    }

    fn lp(kind: BodyKind, dim: usize, p: f64) -> Self {
        let n = dim as f64;
        let scale = (-ln_lp_ball_volume(dim, p) / n).exp();
        Body {
            kind,
            dim,
            scale,
            lk: scale * lp_second_moment(dim, p).sqrt(),
            circumradius: scale * n.powf(0.5 - 1.0 / p).max(1.0),
        }
    }

    pub fn cube(dim: usize) -> Result<Self> {
        Self::new(BodyKind::Cube, dim)
    }

    pub fn ball(dim: usize) -> Result<Self> {
        Self::new(BodyKind::Ball, dim)
    }

    pub fn is_symmetric(&self) -> bool {
        !matches!(self.kind, BodyKind::Simplex)
    }

    /// `R(K) <= cap * sqrt(n) * L_K`, with a 1e-12 relative slack so that the
    /// cube's exact ratio √3 compares equal.
    pub fn is_small_diameter(&self, cap: f64) -> bool {
        self.circumradius <= cap * (self.dim as f64).sqrt() * self.lk * (1.0 + 1e-12)
    }

    /// `R(K) / (sqrt(n) L_K)`.
    pub fn diameter_ratio(&self) -> f64 {
        self.circumradius / ((self.dim as f64).sqrt() * self.lk)
    }

    /// Boundary-inclusive membership test.
    pub fn membership(&self, x: &[f64]) -> Result<bool> {
        check_dim(self.dim, x.len(), "point")?;
        Ok(self.contains(x))
    }

    /// Membership without the dimension check. Panics on short input.
    pub fn contains(&self, x: &[f64]) -> bool {
        let s = self.scale;
        match self.kind {
            BodyKind::Cube => x.iter().all(|v| v.abs() <= 0.5 * (1.0 + BOUNDARY_TOL)),
            BodyKind::Ball => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                r2 <= s * s * (1.0 + 2.0 * BOUNDARY_TOL)
            }
            BodyKind::CrossPolytope => {
                x.iter().map(|v| v.abs()).sum::<f64>() <= s * (1.0 + BOUNDARY_TOL)
            }
            BodyKind::LpBall { p } => {
                let sum: f64 = x.iter().map(|v| (v.abs() / s).powf(p)).sum();
                sum <= 1.0 + p * BOUNDARY_TOL
            }
            BodyKind::Simplex => {
                let tol = BOUNDARY_TOL / (self.dim as f64 + 1.0);
                simplex_barycentric(x, s).iter().all(|&y| y >= -tol)
            }
        }
    }

    /// Short identifier, e.g. `cube-n20` or `lp_ball-p1.5-n20`.
    pub fn id(&self) -> String {
        match self.kind {
            BodyKind::LpBall { p } => format!("lp_ball-p{p}-n{}", self.dim),
            k => format!("{}-n{}", k.name(), self.dim),
        }
    }

    /// Plain-text `key = value` descriptor used in run manifests.
    pub fn descriptor(&self) -> String {
        let p = match self.kind {
            BodyKind::Simplex => "none".to_string(),
            BodyKind::Cube => "inf".to_string(),
            k => format!("{}", k.exponent().expect("lp family")),
        };
        format!(
            "kind = {}\nn = {}\np = {}\nscale = {}\nlk = {}\ncircumradius = {}\n",
            self.kind.name(),
            self.dim,
            p,
            self.scale,
            self.lk,
            self.circumradius
        )
    }

    /// Rebuild a body from [`Body::descriptor`] output. Derived fields are
    /// recomputed and must match the stored ones.
    pub fn from_descriptor(text: &str) -> Result<Self> {
        let mut kind = None;
        let mut n = None;
        let mut p = None;
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("malformed descriptor line {line:?}")))?;
            let v = v.trim();
            match k.trim() {
                "kind" => kind = Some(v.to_string()),
                "n" => {
                    n = Some(
                        v.parse::<usize>()
                            .map_err(|e| Error::Config(format!("n: {e}")))?,
                    )
                }
                "p" => p = Some(v.to_string()),
                "scale" | "lk" | "circumradius" => {}
                other => return Err(Error::Config(format!("unknown descriptor key {other:?}"))),
            }
        }
        let kind = kind.ok_or_else(|| Error::Config("descriptor missing kind".into()))?;
        let n = n.ok_or_else(|| Error::Config("descriptor missing n".into()))?;
        let p = match (kind.as_str(), p.as_deref()) {
            ("lp_ball", Some(v)) => Some(
                v.parse::<f64>()
                    .map_err(|e| Error::Config(format!("p: {e}")))?,
            ),
            _ => None,
        };
        Body::new(BodyKind::from_parts(&kind, p)?, n)
    }
}

impl fmt::Display for Body {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

/// Barycentric coordinates of `x` with respect to the scaled regular simplex.
///
/// Coordinates live in the Helmert basis `u_k = (1,…,1,−k,0,…)/sqrt(k(k+1))`
/// of the hyperplane `sum y = 0` in `R^{n+1}`.
pub(crate) fn simplex_barycentric(x: &[f64], scale: f64) -> Vec<f64> {
    let n = x.len();
    let mut y = vec![1.0 / (n as f64 + 1.0); n + 1];
    // suffix[i] = sum_{k > i} x_{k-1} / sqrt(k(k+1))
    let mut suffix = 0.0;
    for i in (0..=n).rev() {
        y[i] += suffix;
        if i >= 1 {
            let k = i as f64;
            let xi = x[i - 1] / scale;
            let norm = (k * (k + 1.0)).sqrt();
            y[i] -= k * xi / norm;
            suffix += xi / norm;
        }
    }
    y
}

/// Inverse of [`simplex_barycentric`]: map a point of the probability simplex
/// in `R^{n+1}` to body coordinates.
pub(crate) fn simplex_from_barycentric(y: &[f64], scale: f64, out: &mut [f64]) {
    let n = out.len();
    debug_assert_eq!(y.len(), n + 1);
    let mut prefix = 0.0;
    for k in 1..=n {
        prefix += y[k - 1];
        let kf = k as f64;
        out[k - 1] = scale * (prefix - kf * y[k]) / (kf * (kf + 1.0)).sqrt();
    }
}
