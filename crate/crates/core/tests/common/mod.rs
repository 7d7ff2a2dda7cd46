//! Reference values computed without the library's special-function code.
#![allow(dead_code)]

use statrs::function::gamma::ln_gamma;

/// Nodes and weights of the `order`-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(order: usize) -> Vec<(f64, f64)> {
    let m = order as f64;
    (0..order)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=order {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                dp = m * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// Composite 20-point Gauss-Legendre quadrature over `panels` equal panels.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, panels: usize) -> f64 {
    thread_local! {
        static RULE: Vec<(f64, f64)> = gauss_legendre(20);
    }
    RULE.with(|rule| {
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|i| {
                let mid = a + (i as f64 + 0.5) * h;
                rule.iter()
                    .map(|&(x, w)| w * f(mid + 0.5 * h * x))
                    .sum::<f64>()
                    * 0.5
                    * h
            })
            .sum()
    })
}

/// `Γ(n/2) / (√π Γ((n-1)/2))`, the density constant of one coordinate of a
/// uniform point on `S^{n-1}`.
pub fn sphere_coordinate_constant(n: usize) -> f64 {
    let nf = n as f64;
    (ln_gamma(nf / 2.0) - ln_gamma((nf - 1.0) / 2.0)).exp() / std::f64::consts::PI.sqrt()
}

/// `P(|θ_1| ≥ u)` for uniform `θ` on `S^{n-1}`, via `θ_1 = cos φ`.
pub fn sphere_tail_oracle(n: usize, u: f64) -> f64 {
    if u <= 0.0 {
        return 1.0;
    }
    if u >= 1.0 {
        return 0.0;
    }
    let k = (n - 2) as i32;
    2.0 * sphere_coordinate_constant(n)
        * integrate(&|phi: f64| phi.sin().powi(k), 0.0, u.acos(), 64)
}

/// Averaged tail `F(t)` of the volume-1 ball: radial density `n ρ^{n-1}/r^n`
/// against the sphere marginal tail at `t·lk/ρ`.
pub fn ball_averaged_tail(n: usize, radius: f64, lk: f64, t: f64) -> f64 {
    let level = t * lk;
    if level >= radius {
        return 0.0;
    }
    let nf = n as f64;
    let lo = level / radius;
    integrate(
        &|v: f64| nf * v.powi(n as i32 - 1) * sphere_tail_oracle(n, lo / v),
        lo,
        1.0,
        64,
    )
}

/// Density of `⟨X, θ⟩` for `X` uniform in the ball of radius `r` in `R^n`.
pub fn ball_marginal_density(n: usize, radius: f64, y: f64) -> f64 {
    let z = y / radius;
    if z.abs() >= 1.0 {
        return 0.0;
    }
    let nf = n as f64;
    let c = (ln_gamma(nf / 2.0 + 1.0) - ln_gamma((nf + 1.0) / 2.0)).exp()
        / (std::f64::consts::PI.sqrt() * radius);
    c * (1.0 - z * z).powf((nf - 1.0) / 2.0)
}

/// `P(|⟨X,θ⟩| ≥ level)` for the ball, by quadrature of the marginal density.
pub fn ball_directional_tail(n: usize, radius: f64, level: f64) -> f64 {
    if level >= radius {
        return 0.0;
    }
    2.0 * integrate(
        &|y: f64| ball_marginal_density(n, radius, y),
        level.max(0.0),
        radius,
        64,
    )
}

/// Standard normal density.
pub fn gauss(t: f64) -> f64 {
    (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `E(|Y|/s - 1)_+` for `|Y| = ρ|θ_1|`, `θ` uniform on `S^{n-1}`, written in
/// closed form through the coordinate density: with `u = s/ρ`,
/// `(ρ/s)·2c_n/(n-1)·(1-u²)^{(n-1)/2} - P(|θ_1| ≥ u)`.
pub fn sphere_orlicz_closed(n: usize, rho: f64, s: f64) -> f64 {
    if s >= rho {
        return 0.0;
    }
    let u = s / rho;
    let nf = n as f64;
    let first = (rho / s) * 2.0 * sphere_coordinate_constant(n) / (nf - 1.0)
        * (1.0 - u * u).powf((nf - 1.0) / 2.0);
    first - sphere_tail_oracle(n, u)
}

/// Random unit vector from an independent generator.
pub fn random_unit(n: usize, rng: &mut impl rand::Rng) -> Vec<f64> {
    use rand_distr::{Distribution, StandardNormal};
    loop {
        let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Frozen high-precision upper Gaussian tails `Q(t)` (50-digit evaluation).
pub const GAUSSIAN_TAIL_REFERENCE: [(f64, f64); 4] = [
    (1.0, 0.15865525393145705),
    (2.0, 0.02275013194817921),
    (10.0, 7.619853024160525e-24),
    (12.0, 1.776482112077679e-33),
];

/// Frozen values of `E(|θ_1|/s - 1)_+` for `θ` uniform on `S^{n-1}` (50-digit
/// evaluation of the angular integral).
pub const SPHERE_ORLICZ_REFERENCE: [(usize, f64, f64); 6] = [
    (10, 0.2, 0.520945642139059),
    (10, 0.5, 0.0244634843799369),
    (10, 0.8, 1.48319897111127e-4),
    (50, 0.2, 0.0491790301756919),
    (50, 0.5, 1.00235200615052e-5),
    (50, 0.8, 2.04235214443479e-14),
];
