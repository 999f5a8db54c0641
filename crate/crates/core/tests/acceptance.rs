//! Acceptance suite. Each criterion prints one `criterion N: PASS|FAIL` line
//! to stderr (not captured by the test harness) and the test fails if any
//! criterion fails.

use std::f64::consts::{LN_2, TAU};
use std::io::Write;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use hypdim::hyperdim::geometric_scales;
use hypdim::ifs::{EnumerationOptions, DEFAULT_WORD_CAP};
use hypdim::serial::write_points_csv;
use hypdim::*;

struct Outcome {
    pass: bool,
    detail: String,
    /// CSV bytes of whatever the criterion produced, for the rerun check.
    artifact: Vec<u8>,
}

fn report(n: usize, o: &Outcome, elapsed: Duration) {
    let verdict = if o.pass { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    let _ = writeln!(
        err,
        "criterion {n}: {verdict} {} [{:.2} s]",
        o.detail,
        elapsed.as_secs_f64()
    );
}

fn csv_bytes(tag: &str, points: &[SpherePoint]) -> Vec<u8> {
    let mut out = Vec::new();
    write_points_csv(&mut out, &[tag.to_string()], points).unwrap();
    out
}

fn cantor() -> ConformalIFS {
    let v = SphericalDisk::from_euclidean(Complex64::new(0.5, 0.0), 0.6).unwrap();
    let third = Complex64::new(1.0 / 3.0, 0.0);
    ConformalIFS::new(
        v,
        vec![
            IfsMap::Similarity {
                a: third,
                b: Complex64::new(0.0, 0.0),
            },
            IfsMap::Similarity {
                a: third,
                b: Complex64::new(2.0 / 3.0, 0.0),
            },
        ],
        MetricMode::PlanarEuclidean,
    )
    .unwrap()
}

fn random_in_disk(disk: &SphericalDisk, rng: &mut ChaCha8Rng) -> SpherePoint {
    let u: f64 = rng.random();
    let r = (1.0 - u * (1.0 - disk.radius.cos())).acos();
    disk.point_at(r, rng.random::<f64>() * TAU)
}

fn criterion_1() -> Outcome {
    let timed = |ratios: &[f64]| {
        let start = Instant::now();
        let t = moran_solve(ratios).unwrap();
        (t, start.elapsed())
    };
    let (a, ta) = timed(&[1.0 / 3.0, 1.0 / 3.0]);
    let (b, tb) = timed(&[0.5, 0.5]);
    let (c, tc) = timed(&[0.4]);
    let slowest = ta.max(tb).max(tc);
    let pass = (a - LN_2 / 3f64.ln()).abs() <= 1e-9
        && (b - 1.0).abs() <= 1e-12
        && c == 0.0
        && slowest < Duration::from_millis(1);
    Outcome {
        pass,
        detail: format!(
            "thirds {:.3e} off ln2/ln3, halves {:.3e} off 1, single {c}, slowest {:.1} µs",
            (a - LN_2 / 3f64.ln()).abs(),
            (b - 1.0).abs(),
            slowest.as_secs_f64() * 1e6
        ),
        artifact: format!("{a:e},{b:e},{c:e}\n").into_bytes(),
    }
}

fn criterion_2() -> Outcome {
    let ifs = cantor();
    let opts = EnumerationOptions::default();
    let mut worst: f64 = 0.0;
    let mut rows = String::new();
    for n in [1, 5, 10] {
        for t in [0.0, 0.5, LN_2 / 3f64.ln(), 1.0] {
            let p = pressure(&ifs, t, n, &ifs.ambient.center, &opts)
                .unwrap()
                .value;
            let exact = (2.0 * 3f64.powf(-t)).ln();
            worst = worst.max((p - exact).abs());
            rows.push_str(&format!("{n},{t:e},{p:e}\n"));
        }
    }
    let root = pressure_root(&ifs, &[10], 1e-12).unwrap().t;
    let moran = moran_solve(&[1.0 / 3.0, 1.0 / 3.0]).unwrap();
    Outcome {
        pass: worst <= 1e-10 && (root - moran).abs() <= 1e-9,
        detail: format!(
            "max |Pₙ(t) − log(2·3⁻ᵗ)| = {worst:.2e}, |root − Moran| = {:.2e}",
            (root - moran).abs()
        ),
        artifact: rows.into_bytes(),
    }
}

fn criterion_3() -> Outcome {
    let ifs = ConformalIFS::squaring_arc(4, 0.7).unwrap();
    let half = ifs.ambient.scaled(0.5);
    let k: f64 = koebe_distortion(0.5).unwrap();
    let opts = EnumerationOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pairs: Vec<(SpherePoint, SpherePoint)> = (0..20)
        .map(|_| {
            (
                random_in_disk(&half, &mut rng),
                random_in_disk(&half, &mut rng),
            )
        })
        .collect();
    let ts = [0.25, 0.5, 1.0, 1.5];
    let mut worst_ratio: f64 = 0.0;
    let mut points = Vec::new();
    for (z0, z1) in &pairs {
        let s0 = ifs::PressureSurface::build(&ifs, 6, z0, &opts).unwrap();
        let s1 = ifs::PressureSurface::build(&ifs, 6, z1, &opts).unwrap();
        for t in ts {
            let gap = (s0.value(t) - s1.value(t)).abs();
            worst_ratio = worst_ratio.max(gap / (t / 6.0 * k.ln()));
        }
        points.extend([*z0, *z1]);
    }
    Outcome {
        pass: worst_ratio <= 1.0 && k == 81.0,
        detail: format!(
            "{} words, 20 pairs, t ∈ {ts:?}: largest gap is {:.3} of (t/6)·log {k}",
            ifs.len().pow(6),
            worst_ratio
        ),
        artifact: csv_bytes("base points", &points),
    }
}

fn criterion_4() -> Outcome {
    let f = HolomorphicMap::quadratic(Complex64::new(0.0, 0.0));
    let cert = detect_radial(&f, &SpherePoint::unit(1.0), 0.3, 10).unwrap();
    let times = cert.times();
    let thetas: Vec<f64> = cert.good_times.iter().map(|(_, b)| b.theta).collect();
    let within = cert
        .good_times
        .iter()
        .map(|(n, b)| (b.theta / 2f64.powi(*n as i32)).ln().abs())
        .fold(0.0, f64::max);
    let monotone = thetas.windows(2).all(|w| w[1] > w[0]);
    let at_zero = detect_radial(&f, &SpherePoint::zero(), 0.3, 10).unwrap();
    let all = times == (1..=10).collect::<Vec<_>>();
    Outcome {
        pass: all && within <= 81f64.ln() && monotone && at_zero.good_times.is_empty(),
        detail: format!(
            "e^i certified {}/10, max |log(θ/2ⁿ)| = {within:.3} (log 81 = {:.3}), monotone {monotone}; 0 certified {}",
            times.len(),
            81f64.ln(),
            at_zero.good_times.len()
        ),
        artifact: csv_bytes("orbit of e^i", &cert.orbit),
    }
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let sets: Vec<Vec<(SpherePoint, f64)>> = (0..1000)
        .map(|_| {
            let size = rng.random_range(1..=200);
            (0..size)
                .map(|_| {
                    let z: f64 = rng.random_range(-1.0..1.0);
                    let phi: f64 = rng.random_range(0.0..TAU);
                    let s = (1.0 - z * z).sqrt();
                    let c = SpherePoint::from_unit_vector([s * phi.cos(), s * phi.sin(), z]);
                    (c, rng.random_range(0.001..0.3))
                })
                .collect()
        })
        .collect();
    let selections: Vec<_> = sets.par_iter().map(|b| five_r_cover(b)).collect();
    let failures = selections
        .iter()
        .filter(|s| !(s.verify() && s.expansion == 5.0))
        .count();
    let mut table = String::new();
    for s in &selections {
        table.push_str(&format!("{},{}\n", s.input_balls.len(), s.selected.len()));
    }
    Outcome {
        pass: failures == 0,
        detail: format!(
            "{} ball sets, {failures} selections fail disjointness or 5× cover",
            sets.len()
        ),
        artifact: table.into_bytes(),
    }
}

fn criterion_6() -> Outcome {
    let near_two = 0.45 * spherical_distance(&SpherePoint::real(1.8), &SpherePoint::real(2.0));
    let cases = [
        (
            "z²",
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            0.6,
            6,
            8,
        ),
        (
            "z²−2",
            Complex64::new(-2.0, 0.0),
            Complex64::new(1.8, 0.0),
            near_two,
            8,
            6,
        ),
    ];
    let mut pass = true;
    let mut notes = Vec::new();
    let mut artifact = Vec::new();
    for (name, c, centre, radius, search, verify_depth) in cases {
        let f = HolomorphicMap::quadratic(c);
        let disk = SphericalDisk::new(SpherePoint::new(centre), radius).unwrap();
        let result = two_branch_construction(&f, &disk, search).and_then(|ifs| {
            let root = pressure_root(&ifs, &[4, 6], 1e-9)?;
            let rep = verify_hyperbolic(Some(&f), &ifs, verify_depth)?;
            Ok((ifs, root, rep))
        });
        match result {
            Ok((ifs, root, rep)) => {
                let ok = root.t > 0.1 && rep.lambda_expansion > 1.0 && rep.invariance_defect < 1e-3;
                pass &= ok;
                notes.push(format!(
                    "{name}: t = {:.4}, λ = {:.3}, defect {:.1e}",
                    root.t, rep.lambda_expansion, rep.invariance_defect
                ));
                artifact.extend(csv_bytes(
                    name,
                    &limit_set_sample(&ifs, 10, DEFAULT_WORD_CAP).unwrap(),
                ));
            }
            Err(e) => {
                pass = false;
                notes.push(format!("{name}: {e}"));
            }
        }
    }
    Outcome {
        pass,
        detail: notes.join("; "),
        artifact,
    }
}

fn criterion_7() -> Outcome {
    let f = HolomorphicMap::quadratic(Complex64::new(0.0, 0.0));
    let disk = SphericalDisk::new(SpherePoint::real(1.0), 0.6).unwrap();
    let within = SphericalDisk::new(SpherePoint::real(1.0), 0.7).unwrap();
    let mut roots: Vec<(f64, usize, SpherePoint)> = (0..256)
        .map(|k| (k, SpherePoint::unit(TAU * k as f64 / 256.0)))
        .filter(|(_, p)| within.contains(p))
        .map(|(k, p)| (spherical_distance(&within.center, &p), k, p))
        .collect();
    roots.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let seeds: Vec<SpherePoint> = roots.into_iter().take(50).map(|r| r.2).collect();
    let certs: Vec<RadialCertificate> = seeds
        .par_iter()
        .map(|z| detect_radial(&f, z, 0.3, 8))
        .collect::<Result<_>>()
        .unwrap();
    let result = build_hyperbolic_ifs(&f, &certs, &disk, 0.8, 5.0 / 3.0, 0.5).and_then(|build| {
        let root = pressure_root(&build.ifs, &[1, 2, 3], 1e-9)?;
        let sample = limit_set_sample(&build.ifs, 3, DEFAULT_WORD_CAP)?;
        let boxes = box_counting(&sample, &geometric_scales(0.2, 0.002, 6))?;
        Ok((build, root, sample, boxes))
    });
    match result {
        Ok((build, root, sample, boxes)) => Outcome {
            pass: root.t >= 0.75 && sample.len() >= 1000 && (boxes.t - root.t).abs() <= 0.07,
            detail: format!(
                "{} seeds, {} branches, pressure root {:.4}, box {:.4} on {} points",
                seeds.len(),
                build.ifs.len(),
                root.t,
                boxes.t,
                sample.len()
            ),
            artifact: csv_bytes("depth-3 sample", &sample),
        },
        Err(e) => Outcome {
            pass: false,
            detail: format!("{} seeds: {e}", seeds.len()),
            artifact: Vec::new(),
        },
    }
}

fn criterion_8() -> Outcome {
    let thirds = limit_set_sample(&cantor(), 12, DEFAULT_WORD_CAP).unwrap();
    let cantor_t = box_counting(&thirds, &geometric_scales(0.1, 0.0005, 8))
        .unwrap()
        .t;
    let circle: Vec<SpherePoint> = (0..10_000)
        .map(|k| SpherePoint::unit(TAU * k as f64 / 1e4))
        .collect();
    let circle_t = box_counting(&circle, &geometric_scales(0.2, 0.002, 6))
        .unwrap()
        .t;
    let mut artifact = csv_bytes("middle thirds", &thirds);
    artifact.extend(csv_bytes("great circle", &circle));
    Outcome {
        pass: (cantor_t - 0.631).abs() <= 0.05 && (circle_t - 1.0).abs() <= 0.05,
        detail: format!(
            "middle thirds {cantor_t:.4} ({} points), great circle {circle_t:.4} ({} points)",
            thirds.len(),
            circle.len()
        ),
        artifact,
    }
}

type Criterion = fn() -> Outcome;

const CRITERIA: [(Criterion, Duration); 8] = [
    (criterion_1, Duration::from_secs(1)),
    (criterion_2, Duration::from_secs(1)),
    (criterion_3, Duration::from_secs(30)),
    (criterion_4, Duration::from_secs(10)),
    (criterion_5, Duration::from_secs(10)),
    (criterion_6, Duration::from_secs(60)),
    (criterion_7, Duration::from_secs(300)),
    (criterion_8, Duration::from_secs(60)),
];

#[test]
fn acceptance() {
    let mut passed = Vec::new();
    let mut artifacts = Vec::new();
    for (i, (run, budget)) in CRITERIA.iter().enumerate() {
        let start = Instant::now();
        let mut o = run();
        let elapsed = start.elapsed();
        if elapsed > *budget {
            o.pass = false;
            o.detail
                .push_str(&format!(", over the {} s budget", budget.as_secs()));
        }
        report(i + 1, &o, elapsed);
        passed.push(o.pass);
        artifacts.push(o.artifact);
    }

    // rerun every criterion on a differently sized pool and compare the CSVs
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .unwrap();
    let reruns: Vec<Vec<u8>> =
        pool.install(|| CRITERIA.iter().map(|(run, _)| run().artifact).collect());
    let differing: Vec<usize> = (0..CRITERIA.len())
        .filter(|&i| reruns[i] != artifacts[i])
        .map(|i| i + 1)
        .collect();
    let bytes: usize = artifacts.iter().map(Vec::len).sum();
    let nine = Outcome {
        pass: differing.is_empty(),
        detail: format!(
            "{bytes} CSV bytes over criteria 1–8 rerun on 3 threads, differing: {differing:?}"
        ),
        artifact: Vec::new(),
    };
    report(9, &nine, start.elapsed());
    passed.push(nine.pass);

    let failed: Vec<usize> = (1..=passed.len()).filter(|&n| !passed[n - 1]).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
