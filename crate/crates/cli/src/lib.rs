//! Batch runner for hypdim scenarios: a JSON config in, a summary table, CSV
//! files and a scatter plot out.

pub mod output;
pub mod scenario;

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use hypdim::hyperdim::{geometric_scales, julia_samples, DEFAULT_DEFECT_TOLERANCE};
use hypdim::ifs::{pressure_root_with, pressure_roots, EnumerationOptions, DEFAULT_WORD_CAP};
use hypdim::serial::{ifs_to_json, read_points_csv, IfsDoc, ReportDoc};
use hypdim::{
    box_counting, build_hyperbolic_ifs, detect_radial, limit_set_sample, moran_solve,
    spherical_distance, two_branch_construction, verify_hyperbolic, ConformalIFS,
    DimensionEstimate, Error, HyperbolicSetReport, Map, Result, SpherePoint, SphericalDisk,
};

use output::{write_plot, write_points, write_table, Table};
use scenario::{load_scenario, IfsSource, LoadedScenario, PointSource, Scales, Seeds, Task};

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub threads: Option<usize>,
    pub cap: Option<usize>,
}

/// Everything a task produces before it is written out.
#[derive(Clone, Debug, Default)]
pub struct TaskOutput {
    /// `key = value` lines of the summary.
    pub summary: Vec<(String, String)>,
    pub table: Table,
    pub points: Vec<SpherePoint>,
    pub ifs: Option<ConformalIFS>,
    /// Extra JSON documents, written as `<name>.json`.
    pub documents: Vec<(String, String)>,
}

impl TaskOutput {
    fn note(&mut self, key: &str, value: impl ToString) {
        self.summary.push((key.to_string(), value.to_string()));
    }
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    error: &'a str,
    message: String,
    task: Option<&'a str>,
    seed: Option<u64>,
}

/// Exit status for an error: 2 for configuration problems, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::ConfigParseError(_) => 2,
        _ => 1,
    }
}

/// Runs the scenario at `config` and writes its artifacts into the output
/// directory. Failures are recorded as `error.json` plus a summary, and the
/// process exit status is returned.
pub fn execute(config: &Path, opts: &RunOptions) -> i32 {
    let loaded = load_scenario(config);
    let result = loaded.as_ref().map_err(Clone::clone).and_then(|l| {
        with_threads(opts.threads, || run_task(l, opts))
            .and_then(|out| write_outputs(l, opts, &out))
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            let (task, seed, outputs) = match &loaded {
                Ok(l) => (
                    Some(l.scenario.task.name()),
                    Some(l.scenario.seed),
                    l.scenario.outputs.clone(),
                ),
                Err(_) => (None, None, Default::default()),
            };
            let record = ErrorRecord {
                error: e.name(),
                message: e.to_string(),
                task,
                seed,
            };
            // best effort: the error may itself be an unwritable output directory
            if fs::create_dir_all(&opts.out_dir).is_ok() {
                let json = serde_json::to_string_pretty(&record).expect("error records serialize");
                let _ = fs::write(opts.out_dir.join(&outputs.error), json + "\n");
                let mut summary = header_lines(task, seed);
                summary.push("status: error".into());
                summary.push(format!("error: {}", e.name()));
                summary.push(format!("message: {e}"));
                let _ = fs::write(
                    opts.out_dir.join(&outputs.summary),
                    summary.join("\n") + "\n",
                );
            }
            eprintln!("{}: {e}", e.name());
            exit_code(&e)
        }
    }
}

fn with_threads<R: Send>(threads: Option<usize>, job: impl FnOnce() -> R + Send) -> R {
    match threads {
        Some(n) => match rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
        {
            Ok(pool) => pool.install(job),
            Err(_) => job(),
        },
        None => job(),
    }
}

fn header_lines(task: Option<&str>, seed: Option<u64>) -> Vec<String> {
    vec![
        format!("task: {}", task.unwrap_or("unknown")),
        format!("seed: {}", seed.map_or("unknown".into(), |s| s.to_string())),
    ]
}

fn write_outputs(l: &LoadedScenario, opts: &RunOptions, out: &TaskOutput) -> Result<()> {
    let s = &l.scenario;
    let names = &s.outputs;
    let dir = &opts.out_dir;
    fs::create_dir_all(dir)?;
    let preamble = header_lines(Some(s.task.name()), Some(s.seed));

    let mut summary = preamble.clone();
    summary.push("status: ok".into());
    let width = out.summary.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    for (k, v) in &out.summary {
        summary.push(format!("{k:<width$} = {v}"));
    }
    fs::write(dir.join(&names.summary), summary.join("\n") + "\n")?;
    write_table(&dir.join(&names.table), &preamble, &out.table)?;
    if !out.points.is_empty() {
        write_points(&dir.join(&names.points), &preamble, &out.points)?;
        write_plot(&dir.join(&names.plot), &preamble, &out.points)?;
    }
    if let Some(ifs) = &out.ifs {
        fs::write(dir.join(&names.ifs), ifs_to_json(ifs) + "\n")?;
    }
    for (name, json) in &out.documents {
        fs::write(dir.join(format!("{name}.json")), json.clone() + "\n")?;
    }
    Ok(())
}

/// Runs the task without writing anything.
pub fn run_task(l: &LoadedScenario, opts: &RunOptions) -> Result<TaskOutput> {
    let s = &l.scenario;
    let cap = opts.cap.or(s.cap).unwrap_or(DEFAULT_WORD_CAP);
    let map = s.map.as_deref().map(Map::parse).transpose()?;
    let map = || {
        map.as_ref()
            .ok_or_else(|| Error::ConfigParseError("map required".into()))
    };
    let mut out = TaskOutput::default();
    match &s.task {
        Task::Moran { ratios } => {
            let t = moran_solve(ratios)?;
            out.note("generators", ratios.len());
            out.note("t", format!("{t:.6}"));
            out.table = Table::new(&["t"]);
            out.table.push(vec![t.to_string()]);
        }
        Task::RadialScan {
            seeds,
            deltas,
            n_max,
        } => {
            let f = map()?;
            let seeds = seed_points(seeds, s.seed)?;
            radial_scan(&mut out, f, &seeds, deltas, *n_max)?;
        }
        Task::PressureDim {
            ifs,
            depths,
            tol,
            sample_depth,
            sampling,
        } => {
            let ifs = load_ifs(l, ifs)?;
            let enum_opts = EnumerationOptions {
                cap,
                sampling: sampling.map(|c| (c, s.seed)),
            };
            let roots = pressure_roots(&ifs, depths, *tol, &enum_opts)?;
            let est = pressure_root_with(&ifs, depths, *tol, &enum_opts)?;
            out.table = Table::new(&["depth", "t"]);
            for (n, t) in &roots {
                out.table.push(vec![n.to_string(), t.to_string()]);
            }
            out.note("generators", ifs.len());
            note_estimate(&mut out, "pressure", &est);
            if let Some(d) = sample_depth {
                out.points = limit_set_sample(&ifs, *d, cap)?;
                out.note("sample_points", out.points.len());
            }
        }
        Task::BuildHyperbolic {
            seeds,
            radial_delta,
            n_max,
            disk,
            d_prime,
            delta,
            covering_constant,
            depths,
            tol,
            sample_depth,
            verify_depth,
            scales,
        } => {
            let f = map()?;
            let seeds = seed_points(seeds, s.seed)?;
            let certs = seeds
                .par_iter()
                .map(|z| detect_radial(f, z, *radial_delta, *n_max))
                .collect::<Result<Vec<_>>>()?;
            let build = build_hyperbolic_ifs(
                f,
                &certs,
                &disk.to_disk()?,
                *d_prime,
                *delta,
                *covering_constant,
            )?;
            out.note("seeds", seeds.len());
            out.note("candidates", build.candidates.len());
            out.note("selected", build.ifs.len());
            out.note("mass", build.mass);
            out.note("d_prime", d_prime);
            let est = pressure_root_with(
                &build.ifs,
                depths,
                *tol,
                &EnumerationOptions {
                    cap,
                    sampling: None,
                },
            )?;
            note_estimate(&mut out, "pressure", &est);
            let report = verify_hyperbolic(Some(f), &build.ifs, *verify_depth)?;
            note_report(&mut out, &report);
            branch_table(&mut out, &build.ifs);
            out.points = limit_set_sample(&build.ifs, *sample_depth, cap)?;
            out.note("sample_points", out.points.len());
            if let Some(sc) = scales {
                let b = box_counting(&out.points, &ladder(sc))?;
                note_estimate(&mut out, "box", &b);
            }
            out.ifs = Some(build.ifs);
        }
        Task::TwoBranch {
            disk,
            search_depth,
            depths,
            tol,
            sample_depth,
            verify_depth,
        } => {
            let f = map()?;
            let ifs = two_branch_construction(f, &disk.to_disk()?, *search_depth)?;
            let est = pressure_root_with(
                &ifs,
                depths,
                *tol,
                &EnumerationOptions {
                    cap,
                    sampling: None,
                },
            )?;
            note_estimate(&mut out, "pressure", &est);
            let report = verify_hyperbolic(Some(f), &ifs, *verify_depth)?;
            note_report(&mut out, &report);
            branch_table(&mut out, &ifs);
            out.points = limit_set_sample(&ifs, *sample_depth, cap)?;
            out.note("sample_points", out.points.len());
            out.ifs = Some(ifs);
        }
        Task::BoxCount { points, scales } => {
            let pts = match points {
                PointSource::Ifs { ifs, depth } => {
                    limit_set_sample(&load_ifs(l, ifs)?, *depth, cap)?
                }
                PointSource::Circle { count } => (0..*count)
                    .map(|k| SpherePoint::unit(std::f64::consts::TAU * k as f64 / *count as f64))
                    .collect(),
                PointSource::Julia { count } => julia_samples(map()?, *count, s.seed),
                PointSource::Csv(path) => read_points_csv(std::io::BufReader::new(
                    fs::File::open(l.resolve(path))
                        .map_err(|e| Error::ConfigParseError(format!("{path}: {e}")))?,
                ))?,
            };
            let eps = ladder(scales);
            let est = box_counting(&pts, &eps)?;
            out.table = Table::new(&["epsilon", "boxes"]);
            let counts = est.metadata.get("counts").cloned().unwrap_or_default();
            for (e, c) in eps.iter().zip(counts.split(',')) {
                let boxes = c.rsplit(':').next().unwrap_or_default();
                out.table.push(vec![e.to_string(), boxes.to_string()]);
            }
            out.note("points", pts.len());
            note_estimate(&mut out, "box", &est);
            out.points = pts;
        }
    }
    Ok(out)
}

fn ladder(s: &Scales) -> Vec<f64> {
    geometric_scales(s.hi, s.lo, s.count)
}

fn note_estimate(out: &mut TaskOutput, prefix: &str, est: &DimensionEstimate) {
    out.note(&format!("{prefix}_t"), format!("{:.6}", est.t));
    out.note(&format!("{prefix}_depth"), est.depth);
    out.note(
        &format!("{prefix}_tolerance"),
        format!("{:.3e}", est.tolerance),
    );
    out.documents.push((
        format!("{prefix}_estimate"),
        serde_json::to_string_pretty(est).expect("estimates serialize"),
    ));
}

fn note_report(out: &mut TaskOutput, report: &HyperbolicSetReport) {
    out.note("verified", report.verified());
    out.note(
        "lambda_expansion",
        format!("{:.6}", report.lambda_expansion),
    );
    out.note(
        "invariance_defect",
        format!("{:.3e}", report.invariance_defect),
    );
    out.note(
        "defect_tolerance",
        format!("{:.1e}", DEFAULT_DEFECT_TOLERANCE),
    );
    out.documents.push((
        "report".into(),
        serde_json::to_string_pretty(&ReportDoc::from(report)).expect("reports serialize"),
    ));
}

fn branch_table(out: &mut TaskOutput, ifs: &ConformalIFS) {
    out.table = Table::new(&[
        "generator",
        "anchor_re",
        "anchor_im",
        "depth",
        "theta",
        "lambda",
    ]);
    for (j, (m, lambda)) in ifs.maps.iter().zip(&ifs.lambdas).enumerate() {
        let (re, im, depth, theta) = match m.as_branch() {
            Some(b) => {
                let (z, _) = b.anchor.chart();
                let z = b.anchor.finite().unwrap_or(z);
                (
                    z.re.to_string(),
                    z.im.to_string(),
                    b.depth.to_string(),
                    b.theta.to_string(),
                )
            }
            None => (String::new(), String::new(), String::new(), String::new()),
        };
        out.table.push(vec![
            (j + 1).to_string(),
            re,
            im,
            depth,
            theta,
            lambda.to_string(),
        ]);
    }
}

fn radial_scan(
    out: &mut TaskOutput,
    f: &Map,
    seeds: &[SpherePoint],
    deltas: &[f64],
    n_max: usize,
) -> Result<()> {
    out.table = Table::new(&[
        "delta",
        "seed",
        "re",
        "im",
        "good_times",
        "times",
        "max_theta",
        "disk_re",
        "disk_im",
        "disk_radius",
    ]);
    out.note("seeds", seeds.len());
    for &delta in deltas {
        let certs = seeds
            .par_iter()
            .map(|z| detect_radial(f, z, delta, n_max))
            .collect::<Result<Vec<_>>>()?;
        let mut certified = 0;
        for (i, c) in certs.iter().enumerate() {
            if !c.good_times.is_empty() {
                certified += 1;
            }
            let (z, _) = c.z0.chart();
            let z = c.z0.finite().unwrap_or(z);
            let times = c
                .times()
                .iter()
                .map(|n| n.to_string())
                .collect::<Vec<_>>()
                .join(" ");
            let (dre, dim, drad) = match &c.limit_disk {
                Some(d) => {
                    let w = d.center.finite().unwrap_or_default();
                    (w.re.to_string(), w.im.to_string(), d.radius.to_string())
                }
                None => (String::new(), String::new(), String::new()),
            };
            out.table.push(vec![
                delta.to_string(),
                i.to_string(),
                z.re.to_string(),
                z.im.to_string(),
                c.good_times.len().to_string(),
                times,
                c.max_theta().to_string(),
                dre,
                dim,
                drad,
            ]);
        }
        out.note(&format!("certified_at_{delta}"), certified);
        if out.points.is_empty() {
            out.points = certs.iter().flat_map(|c| c.orbit.iter().copied()).collect();
        }
    }
    Ok(())
}

fn load_ifs(l: &LoadedScenario, source: &IfsSource) -> Result<ConformalIFS> {
    let doc: IfsDoc = match source {
        IfsSource::Inline(doc) => doc.clone(),
        IfsSource::Path(p) => {
            let text = fs::read_to_string(l.resolve(p))
                .map_err(|e| Error::ConfigParseError(format!("{p}: {e}")))?;
            serde_json::from_str(&text).map_err(|e| Error::ConfigParseError(format!("{p}: {e}")))?
        }
    };
    doc.to_ifs()
}

/// Uniform point of `disk` with respect to spherical area.
fn random_in_disk(disk: &SphericalDisk, rng: &mut ChaCha8Rng) -> SpherePoint {
    let u: f64 = rng.random();
    let r = (1.0 - u * (1.0 - disk.radius.cos())).acos();
    disk.point_at(r, rng.random::<f64>() * std::f64::consts::TAU)
}

pub fn seed_points(seeds: &Seeds, seed: u64) -> Result<Vec<SpherePoint>> {
    Ok(match seeds {
        Seeds::Points(p) => p.iter().map(|d| d.to_point()).collect(),
        Seeds::Circle {
            count,
            within,
            limit,
        } => {
            let all = (0..*count)
                .map(|k| SpherePoint::unit(std::f64::consts::TAU * k as f64 / *count as f64));
            let mut pts: Vec<SpherePoint> = match within {
                Some(d) => {
                    let d = d.to_disk()?;
                    let mut inside: Vec<(f64, usize, SpherePoint)> = all
                        .enumerate()
                        .filter(|(_, p)| d.contains(p))
                        .map(|(k, p)| (spherical_distance(&d.center, &p), k, p))
                        .collect();
                    inside.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                    inside.into_iter().map(|(_, _, p)| p).collect()
                }
                None => all.collect(),
            };
            if let Some(l) = limit {
                pts.truncate(*l);
            }
            pts
        }
        Seeds::Random { disk, count } => {
            let d = disk.to_disk()?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..*count).map(|_| random_in_disk(&d, &mut rng)).collect()
        }
    })
}
