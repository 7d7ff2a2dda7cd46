//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

mod common;

use std::process::Command;
use std::time::{Duration, Instant};

use isogeo::bodies::Body;
use isogeo::gaussref::{
    clt_fraction, gaussian_bin_masses, gaussian_tail, marginal_density_ratio, mills_check,
};
use isogeo::marginals::{
    averaged_tail, classify_directions, gaussian_rate, geometric_grid, TailCurve, TailKind,
};
use isogeo::orlicz::{
    implied_support_level, orlicz_definition_quadrature, orlicz_sample, orlicz_sphere_formula,
    tail_bound_check, verify_representation,
};
use isogeo::polytope::{width_scaling_curve, RandomPolytope};
use isogeo::sampling::{map_sphere_blocks, sample_sphere, sample_uniform};
use isogeo::stats::{merge_all, MeanAccumulator};
use isogeo::StreamSpec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn e1(n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[0] = 1.0;
    v
}

fn mills() -> Check {
    let grid: Vec<f64> = (0..=1100).map(|k| 1.0 + 0.01 * k as f64).collect();
    let points = mills_check(&grid).map_err(|e| e.to_string())?;
    let failed: Vec<f64> = points.iter().filter(|p| !p.pass).map(|p| p.t).collect();
    ensure(failed.is_empty(), format!("bound fails at t = {failed:?}"))?;
    let mut worst = 0.0f64;
    for (t, q) in common::GAUSSIAN_TAIL_REFERENCE {
        worst = worst.max((gaussian_tail(t) - q).abs() / q);
    }
    ensure(
        worst <= 1e-10,
        format!("tail relative error {worst:.2e} > 1e-10"),
    )?;
    Ok(format!(
        "{} grid points pass; tail relative error {worst:.1e}",
        points.len()
    ))
}

fn orlicz_triple() -> Check {
    let (a, s) = (0.5f64, 0.25f64);
    let closed = (a - s) * (a - s) / (2.0 * a * s);
    let quad = orlicz_definition_quadrature(
        |y: f64| if y.abs() <= a { 1.0 / (2.0 * a) } else { 0.0 },
        a,
        s,
        1e-10,
    );
    ensure(
        (quad.value - closed).abs() <= 1e-6,
        format!("quadrature {} vs {closed}", quad.value),
    )?;
    let cube = Body::cube(2).map_err(|e| e.to_string())?;
    let x = sample_uniform(&cube, 1_000_000, &StreamSpec::new(2002)).map_err(|e| e.to_string())?;
    let mc = orlicz_sample(&x.points, &e1(2), s).map_err(|e| e.to_string())?;
    ensure(
        (mc.value - closed).abs() <= 3.0 * mc.error,
        format!("sample {} ± {} vs {closed}", mc.value, mc.error),
    )?;
    Ok(format!(
        "closed {closed}, quadrature {:.10}, sample {:.5} ± {:.1e}",
        quad.value, mc.value, mc.error
    ))
}

fn representation() -> Check {
    let cube = Body::cube(20).map_err(|e| e.to_string())?;
    let x = sample_uniform(&cube, 1_000_000, &StreamSpec::new(2003)).map_err(|e| e.to_string())?;
    let theta = sample_sphere(20, 1000, &StreamSpec::new(2004)).map_err(|e| e.to_string())?;
    let s = [0.5 * cube.lk, cube.lk, 2.0 * cube.lk];
    let rows = verify_representation(&cube, &s, &x.points, &theta).map_err(|e| e.to_string())?;
    let mut detail = Vec::new();
    for r in &rows {
        let z = (r.lhs.value - r.rhs.value).abs() / r.lhs.combined_se(&r.rhs);
        ensure(
            r.passes(3.0),
            format!("s = {}: |lhs - rhs| = {z:.2} SE", r.s),
        )?;
        detail.push(format!("{z:.2}"));
    }
    Ok(format!("|lhs - rhs| in SE units: {}", detail.join(", ")))
}

fn sphere_formula() -> Check {
    let m = 10_000_000;
    let s_values = [0.2, 0.5, 0.8];
    let mut detail = Vec::new();
    for (k, n) in [3usize, 10, 50].into_iter().enumerate() {
        let parts = map_sphere_blocks(n, m, &StreamSpec::new(2005).child(k as u64), |block| {
            let mut accs = vec![MeanAccumulator::new(); s_values.len()];
            let mut hits = vec![0usize; s_values.len()];
            for theta in block.chunks_exact(n) {
                let y = theta[0].abs();
                for (i, &s) in s_values.iter().enumerate() {
                    let v = (y / s - 1.0).max(0.0);
                    if v > 0.0 {
                        hits[i] += 1;
                    }
                    accs[i].push(v);
                }
            }
            (accs, hits)
        });
        for (i, &s) in s_values.iter().enumerate() {
            let acc = merge_all(parts.iter().map(|(a, _)| &a[i]));
            let hits: usize = parts.iter().map(|(_, h)| h[i]).sum();
            let mc = acc.estimate();
            let q = orlicz_sphere_formula(n, 1.0, s);
            // With no positive draws the estimate only resolves values below
            // 3·max(Y/s - 1)/m (rule of three).
            let se = if hits == 0 {
                (1.0 / s - 1.0) / m as f64
            } else {
                mc.std_error
            };
            ensure(
                (mc.value - q).abs() <= 3.0 * se,
                format!(
                    "n={n} s={s}: quadrature {q:e} vs MC {:e} ± {se:e}",
                    mc.value
                ),
            )?;
            if n == 3 {
                let archimedes = (1.0 - s) * (1.0 - s) / (2.0 * s);
                ensure(
                    (q - archimedes).abs() <= 1e-6,
                    format!("n=3 s={s}: {q} vs {archimedes}"),
                )?;
            }
            let z = if se > 0.0 {
                (mc.value - q).abs() / se
            } else {
                0.0
            };
            detail.push(format!(
                "n{n}/s{s}:{z:.1}{}",
                if hits == 0 { "*" } else { "" }
            ));
        }
    }
    Ok(format!(
        "deviation in SE: {} (* = zero hits, resolution bound)",
        detail.join(" ")
    ))
}

fn mean_width() -> Check {
    let cube = Body::cube(20).map_err(|e| e.to_string())?;
    let curve = width_scaling_curve(
        &cube,
        &[20, 80, 320, 1280, 5120],
        32,
        2048,
        &StreamSpec::new(2006),
    )
    .map_err(|e| e.to_string())?;
    let band = curve.band();
    ensure(band <= 2.0, format!("ratio max/min = {band}"))?;
    ensure(curve.is_monotone_within(3.0), "widths decrease beyond 3 SE")?;
    let ratios: Vec<String> = curve
        .rows
        .iter()
        .map(|r| format!("{:.4}", r.ratio))
        .collect();
    Ok(format!(
        "ratios [{}], max/min {band:.4}, monotone",
        ratios.join(", ")
    ))
}

fn supergaussian() -> Check {
    let n = 64;
    let ball = Body::ball(n).map_err(|e| e.to_string())?;
    let grid = geometric_grid(1.0, 4.0, 1.15);
    let x = sample_uniform(&ball, 1_000_000, &StreamSpec::new(2007)).map_err(|e| e.to_string())?;
    let curve = averaged_tail(&ball, &grid, &x.points).map_err(|e| e.to_string())?;
    drop(x);
    let oracle: Vec<f64> = grid
        .iter()
        .map(|&t| common::ball_averaged_tail(n, ball.circumradius, ball.lk, t))
        .collect();
    let mut worst = 0.0f64;
    for (i, &t) in grid.iter().enumerate() {
        let z = (curve.values[i] - oracle[i]).abs() / curve.std_errors[i];
        worst = worst.max(z);
        ensure(
            z <= 3.0,
            format!(
                "t = {t}: {} vs oracle {} ({z:.2} SE)",
                curve.values[i], oracle[i]
            ),
        )?;
    }
    let exact = TailCurve {
        t_grid: grid.clone(),
        values: oracle,
        std_errors: vec![0.0; grid.len()],
        kind: TailKind::SphereAveraged,
    };
    let fit = gaussian_rate(&exact, 1.0, 4.0).map_err(|e| e.to_string())?;
    ensure(fit.q_max.is_finite(), "q_max not finite")?;
    ensure(fit.band() <= 4.0, format!("q_max/q_min = {}", fit.band()))?;
    Ok(format!(
        "{} points within {worst:.2} SE of quadrature; q in [{:.4}, {:.4}], ratio {:.3}",
        grid.len(),
        fit.q_min,
        fit.q_max,
        fit.band()
    ))
}

fn subgaussian() -> Check {
    let n = 64;
    let cube = Body::cube(n).map_err(|e| e.to_string())?;
    ensure(
        cube.is_small_diameter(3f64.sqrt()),
        "cube should have diameter ratio √3",
    )?;
    let grid = geometric_grid(1.0, 4.0, 1.15);
    ensure(*grid.last().unwrap() <= (n as f64).sqrt(), "grid beyond √n")?;
    let x = sample_uniform(&cube, 500_000, &StreamSpec::new(2008)).map_err(|e| e.to_string())?;
    let curve = averaged_tail(&cube, &grid, &x.points).map_err(|e| e.to_string())?;
    let fit = gaussian_rate(&curve, 1.0, 4.0).map_err(|e| e.to_string())?;
    ensure(
        fit.q_values.iter().all(|&(_, q)| q > 0.0),
        format!("nonpositive rate in {:?}", fit.q_values),
    )?;
    Ok(format!(
        "{} resolvable points, q_min {:.4}, {} flagged",
        fit.q_values.len(),
        fit.q_min,
        fit.flagged.len()
    ))
}

fn classification() -> Check {
    let r = 3.0;
    let n = 32;
    let grid = geometric_grid(1.0, (n as f64).powf(0.25), 1.15);
    let ball = Body::ball(n).map_err(|e| e.to_string())?;
    let dirs = sample_sphere(n, 64, &StreamSpec::new(2009)).map_err(|e| e.to_string())?;
    let c = classify_directions(&ball, &dirs, r, &grid, 20_000, &StreamSpec::new(2010))
        .map_err(|e| e.to_string())?;
    let nf = n as f64;
    let tail = |t: f64| common::ball_directional_tail(n, ball.circumradius, t * ball.lk);
    let sub = grid
        .iter()
        .filter(|&&t| t <= r * nf.sqrt())
        .all(|&t| tail(t) <= (-t * t / (r * r)).exp());
    let sup = grid
        .iter()
        .filter(|&&t| t <= nf.sqrt() / r)
        .all(|&t| tail(t) >= (-r * r * t * t).exp());
    for d in &c.directions {
        ensure(
            d.subgaussian == Some(sub) && d.supergaussian == Some(sup),
            format!(
                "ball direction {} classified {:?}/{:?}, oracle {sub}/{sup}",
                d.index, d.subgaussian, d.supergaussian
            ),
        )?;
    }
    let cube = Body::cube(n).map_err(|e| e.to_string())?;
    let dirs = sample_sphere(n, 256, &StreamSpec::new(2011)).map_err(|e| e.to_string())?;
    let c = classify_directions(&cube, &dirs, r, &grid, 20_000, &StreamSpec::new(2012))
        .map_err(|e| e.to_string())?;
    let f = c.subgaussian_fraction.ok_or("no subgaussian range")?;
    ensure(f >= 0.95, format!("cube subgaussian_fraction {f}"))?;
    Ok(format!(
        "ball: 64/64 match oracle (sub {sub}, super {sup}); cube subgaussian_fraction {f:.4}"
    ))
}

fn clt() -> Check {
    let cube = Body::cube(100).map_err(|e| e.to_string())?;
    let report = clt_fraction(&cube, 20, 0.2, 1.2, 24, 1_000_000, &StreamSpec::new(2013))
        .map_err(|e| e.to_string())?;
    ensure(
        report.passing_fraction >= 0.9,
        format!("passing_fraction {}", report.passing_fraction),
    )?;

    let ball = Body::ball(50).map_err(|e| e.to_string())?;
    let est = marginal_density_ratio(&ball, &e1(50), 1.2, 24, 1_000_000, &StreamSpec::new(2014))
        .map_err(|e| e.to_string())?;
    let width = 2.4 / 24.0;
    let exact = gaussian_bin_masses(1.2, 24)
        .iter()
        .enumerate()
        .map(|(j, g)| {
            let a = (-1.2 + j as f64 * width) * ball.lk;
            let mass = common::integrate(
                &|y: f64| common::ball_marginal_density(50, ball.circumradius, y),
                a,
                a + width * ball.lk,
                8,
            );
            (mass / g - 1.0).abs()
        })
        .fold(0.0, f64::max);
    let se = est.bins.iter().map(|b| b.uncertainty).fold(0.0, f64::max);
    ensure(
        (est.sup_ratio - exact).abs() <= 3.0 * se,
        format!(
            "ball sup-ratio {} vs closed form {exact} (se {se})",
            est.sup_ratio
        ),
    )?;
    Ok(format!(
        "cube passing_fraction {:.2}; ball sup-ratio {:.4} vs {exact:.4}",
        report.passing_fraction, est.sup_ratio
    ))
}

fn mechanism() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2015);
    let mut checks = 0;
    for n in [8usize, 32] {
        for body in [Body::cube(n), Body::ball(n)] {
            let body = body.map_err(|e| e.to_string())?;
            let x = sample_uniform(&body, 100_000, &StreamSpec::new(2016).child(n as u64))
                .map_err(|e| e.to_string())?;
            for _ in 0..10 {
                let theta = common::random_unit(n, &mut rng);
                for s in [0.5 * body.lk, body.lk, 2.0 * body.lk] {
                    let c = tail_bound_check(&x.points, &theta, s).map_err(|e| e.to_string())?;
                    ensure(
                        c.holds(3.0),
                        format!(
                            "{} s={s}: M={:?} half-tail={:?}",
                            body.id(),
                            c.m_value,
                            c.half_tail
                        ),
                    )?;
                    checks += 1;
                }
            }
        }
    }

    let cube = Body::cube(16).map_err(|e| e.to_string())?;
    let x = sample_uniform(&cube, 200_000, &StreamSpec::new(2017)).map_err(|e| e.to_string())?;
    let mut ratios = Vec::new();
    for k in 0..5u64 {
        let theta = common::random_unit(16, &mut rng);
        let s0 = implied_support_level(&x.points, &theta, 256)
            .map_err(|e| e.to_string())?
            .s0;
        let trials = 400;
        let mut acc = MeanAccumulator::new();
        for t in 0..trials {
            let poly = RandomPolytope::sample(&cube, 256, &StreamSpec::new(2018).child(k).child(t))
                .map_err(|e| e.to_string())?;
            acc.push(poly.support(&theta).map_err(|e| e.to_string())?);
        }
        let ratio = s0 / acc.mean();
        ensure((0.125..=8.0).contains(&ratio), format!("s0/E h = {ratio}"))?;
        ratios.push(format!("{ratio:.3}"));
    }
    Ok(format!(
        "{checks} tail-bound checks hold; s0 / E h_K_N ratios [{}]",
        ratios.join(", ")
    ))
}

fn determinism() -> Check {
    let tmp = std::env::temp_dir().join(format!("isogeo-acceptance-{}", std::process::id()));
    let runs: [&[&str]; 7] = [
        &["mean-width", "--dim", "20", "--trials", "8"],
        &[
            "supergaussian",
            "--body",
            "ball",
            "--dim",
            "25",
            "--samples",
            "50000",
        ],
        &[
            "subgaussian",
            "--body",
            "cross-polytope",
            "--dim",
            "16",
            "--samples",
            "50000",
        ],
        &[
            "clt",
            "--dim",
            "30",
            "--directions",
            "5",
            "--samples",
            "100000",
        ],
        &[
            "orlicz-verify",
            "--dim",
            "10",
            "--samples",
            "50000",
            "--theta-samples",
            "200",
        ],
        &[
            "classify",
            "--dim",
            "16",
            "--directions",
            "32",
            "--samples",
            "5000",
        ],
        &[
            "sample",
            "--body",
            "simplex",
            "--dim",
            "6",
            "--sampler",
            "hit_and_run",
            "--samples",
            "2000",
        ],
    ];
    let mut compared = 0;
    for args in runs {
        let mut outputs = Vec::new();
        for threads in ["1", "8"] {
            let out = tmp.join(format!("{}-{threads}", args[0]));
            let status = Command::new(env!("CARGO_BIN_EXE_isogeo"))
                .args(args)
                .args(["--seed", "11", "--threads", threads, "--out"])
                .arg(&out)
                .output()
                .map_err(|e| e.to_string())?;
            ensure(
                status.status.code() == Some(0),
                format!("{} exited {:?}", args[0], status.status.code()),
            )?;
            let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(&out)
                .map_err(|e| e.to_string())?
                .filter_map(|e| e.ok())
                .map(|e| e.file_name().to_string_lossy().into_owned())
                .filter(|name| name != "manifest.toml")
                .map(|name| {
                    let bytes = std::fs::read(out.join(&name)).unwrap_or_default();
                    (name, bytes)
                })
                .collect();
            files.sort();
            outputs.push(files);
        }
        ensure(
            outputs[0] == outputs[1],
            format!("{} outputs differ between 1 and 8 workers", args[0]),
        )?;
        compared += outputs[0].len();
    }
    let _ = std::fs::remove_dir_all(&tmp);
    Ok(format!(
        "7 experiments, {compared} output files byte-identical with 1 and 8 workers"
    ))
}

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Option<Duration>,
    run: fn() -> Check,
}

fn main() {
    let secs = |s: u64| Some(Duration::from_secs(s));
    let criteria = [
        Criterion {
            id: 1,
            name: "Mills bounds on [1, 12]",
            limit: secs(1),
            run: mills,
        },
        Criterion {
            id: 2,
            name: "Orlicz identity, three routes",
            limit: secs(10),
            run: orlicz_triple,
        },
        Criterion {
            id: 3,
            name: "sphere-average representation",
            limit: secs(120),
            run: representation,
        },
        Criterion {
            id: 4,
            name: "sphere formula vs direction MC",
            limit: secs(60),
            run: sphere_formula,
        },
        Criterion {
            id: 5,
            name: "mean-width scaling band",
            limit: secs(300),
            run: mean_width,
        },
        Criterion {
            id: 6,
            name: "supergaussian band, ball n=64",
            limit: secs(120),
            run: supergaussian,
        },
        Criterion {
            id: 7,
            name: "subgaussian band, cube n=64",
            limit: secs(120),
            run: subgaussian,
        },
        Criterion {
            id: 8,
            name: "direction classification",
            limit: secs(300),
            run: classification,
        },
        Criterion {
            id: 9,
            name: "CLT passing fraction",
            limit: secs(300),
            run: clt,
        },
        Criterion {
            id: 10,
            name: "tail bound and support level",
            limit: secs(180),
            run: mechanism,
        },
        Criterion {
            id: 11,
            name: "determinism across worker counts",
            limit: None,
            run: determinism,
        },
    ];
    let mut failures = 0;
    for c in &criteria {
        let start = Instant::now();
        let result = (c.run)();
        let elapsed = start.elapsed();
        let result = match (result, c.limit) {
            (Ok(_), Some(limit)) if elapsed > limit => {
                Err(format!("took {elapsed:.1?}, limit {limit:?}"))
            }
            (r, _) => r,
        };
        match result {
            Ok(detail) => println!(
                "PASS [{:>2}] {}: {detail} ({:.2} s)",
                c.id,
                c.name,
                elapsed.as_secs_f64()
            ),
            Err(detail) => {
                failures += 1;
                println!(
                    "FAIL [{:>2}] {}: {detail} ({:.2} s)",
                    c.id,
                    c.name,
                    elapsed.as_secs_f64()
                );
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
