mod common;

use isogeo::bodies::Body;
use isogeo::gaussref::{
    clt_fraction, density, gaussian_bin_masses, gaussian_tail, interval_mass,
    marginal_density_ratio, mills_check,
};
use isogeo::{Error, StreamSpec};

#[test]
fn tail_matches_references_and_quadrature() {
    for (t, q) in common::GAUSSIAN_TAIL_REFERENCE {
        assert!((gaussian_tail(t) - q).abs() <= 1e-13 * q, "t={t}");
    }
    for t in [0.0, 0.3, 1.0, 2.5, 4.0] {
        let quad = 0.5 - common::integrate(&common::gauss, 0.0, t, 32);
        assert!(
            (gaussian_tail(t) - quad).abs() <= 1e-13,
            "t={t}: {} vs {quad}",
            gaussian_tail(t)
        );
        assert!((density(t) - common::gauss(t)).abs() <= 1e-16);
    }
    assert_eq!(gaussian_tail(0.0), 0.5);
    assert!((interval_mass(-1.0, 1.0) - (1.0 - 2.0 * gaussian_tail(1.0))).abs() < 1e-15);
}

#[test]
fn mills_sweep() {
    let grid: Vec<f64> = (1..=10).map(f64::from).collect();
    assert!(mills_check(&grid).unwrap().iter().all(|p| p.pass));
    assert!(matches!(mills_check(&[0.5, 1.0]), Err(Error::Usage(_))));
}

/// Exact sup-ratio for the ball from quadrature of its marginal density.
fn ball_sup_ratio(body: &Body, t_max: f64, bins: usize) -> f64 {
    let width = 2.0 * t_max / bins as f64;
    gaussian_bin_masses(t_max, bins)
        .iter()
        .enumerate()
        .map(|(j, g)| {
            let a = (-t_max + j as f64 * width) * body.lk;
            let mass = common::integrate(
                &|y: f64| common::ball_marginal_density(body.dim, body.circumradius, y),
                a,
                a + width * body.lk,
                8,
            );
            (mass / g - 1.0).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn ball_density_ratio_matches_closed_form() {
    let ball = Body::ball(50).unwrap();
    let mut theta = vec![0.0; 50];
    theta[7] = 1.0;
    let est =
        marginal_density_ratio(&ball, &theta, 1.2, 24, 1_000_000, &StreamSpec::new(1)).unwrap();
    let exact = ball_sup_ratio(&ball, 1.2, 24);
    let worst_se = est.bins.iter().map(|b| b.uncertainty).fold(0.0, f64::max);
    assert!(
        (est.sup_ratio - exact).abs() <= 3.0 * worst_se,
        "{} vs {exact} (se {worst_se})",
        est.sup_ratio
    );
}

#[test]
fn uniform_marginal_ratio_matches_direct_computation() {
    // θ = e₁ in the cube: Y = x₁/lk is uniform on [-√3, √3].
    let cube = Body::cube(4).unwrap();
    let theta = [1.0, 0.0, 0.0, 0.0];
    let (t_max, bins) = (1.2, 24);
    let est =
        marginal_density_ratio(&cube, &theta, t_max, bins, 1_000_000, &StreamSpec::new(2)).unwrap();
    let width = 2.0 * t_max / bins as f64;
    let uniform_mass = width / (2.0 * 3f64.sqrt());
    let exact = gaussian_bin_masses(t_max, bins)
        .iter()
        .map(|g| (uniform_mass / g - 1.0).abs())
        .fold(0.0, f64::max);
    let worst_se = est.bins.iter().map(|b| b.uncertainty).fold(0.0, f64::max);
    assert!(
        (est.sup_ratio - exact).abs() <= 3.0 * worst_se,
        "{} vs {exact}",
        est.sup_ratio
    );
    assert!(exact > 0.35);
}

#[test]
fn diagonal_cube_direction_is_near_gaussian() {
    let cube = Body::cube(100).unwrap();
    let theta = vec![0.1; 100];
    let est =
        marginal_density_ratio(&cube, &theta, 1.2, 24, 1_000_000, &StreamSpec::new(3)).unwrap();
    assert!(est.sup_ratio <= 0.2, "{}", est.sup_ratio);
}

#[test]
fn clt_fraction_examples() {
    let cube = Body::cube(100).unwrap();
    let report = clt_fraction(&cube, 20, 0.2, 1.2, 24, 1_000_000, &StreamSpec::new(4)).unwrap();
    assert!(
        report.passing_fraction >= 0.9,
        "{}",
        report.passing_fraction
    );
    let report = clt_fraction(
        &Body::cube(3).unwrap(),
        5,
        10.0,
        1.2,
        24,
        100_000,
        &StreamSpec::new(5),
    )
    .unwrap();
    assert_eq!(report.passing_fraction, 1.0);
}

#[test]
fn histogram_resolution_errors() {
    let cube = Body::cube(4).unwrap();
    let theta = [1.0, 0.0, 0.0, 0.0];
    let r = marginal_density_ratio(&cube, &theta, 12.0, 24, 100_000, &StreamSpec::new(6));
    assert!(matches!(r, Err(Error::Resolution(_))));
    let r = marginal_density_ratio(&cube, &theta, 1.2, 4, 100_000, &StreamSpec::new(6));
    assert!(matches!(r, Err(Error::Usage(_))));
}
