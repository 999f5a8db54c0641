//! Scenario configuration: one JSON document per run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use hypdim::serial::{DiskDoc, IfsDoc, PointDoc};
use hypdim::{Error, Result};

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct Scenario {
    /// Map literal, e.g. `rational: (1,0,0)/(1)`. Required by the tasks that iterate a map.
    #[serde(default)]
    pub map: Option<String>,
    #[serde(default)]
    pub seed: u64,
    /// Word cap for enumerations; the `--cap` flag takes precedence.
    #[serde(default)]
    pub cap: Option<usize>,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(flatten)]
    pub task: Task,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum Task {
    RadialScan {
        seeds: Seeds,
        deltas: Vec<f64>,
        n_max: usize,
    },
    Moran {
        ratios: Vec<f64>,
    },
    PressureDim {
        ifs: IfsSource,
        depths: Vec<usize>,
        #[serde(default = "default_tol")]
        tol: f64,
        /// Depth of the exported limit-set sample; none when absent.
        #[serde(default)]
        sample_depth: Option<usize>,
        /// Number of sampled words once `mⁿ` exceeds the cap.
        #[serde(default)]
        sampling: Option<usize>,
    },
    BuildHyperbolic {
        seeds: Seeds,
        /// Radius `δ` used for the radial certificates of the seeds.
        radial_delta: f64,
        n_max: usize,
        disk: DiskDoc,
        d_prime: f64,
        delta: f64,
        covering_constant: f64,
        depths: Vec<usize>,
        #[serde(default = "default_tol")]
        tol: f64,
        sample_depth: usize,
        verify_depth: usize,
        #[serde(default)]
        scales: Option<Scales>,
    },
    TwoBranch {
        disk: DiskDoc,
        search_depth: usize,
        depths: Vec<usize>,
        #[serde(default = "default_tol")]
        tol: f64,
        sample_depth: usize,
        verify_depth: usize,
    },
    BoxCount {
        points: PointSource,
        scales: Scales,
    },
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::RadialScan { .. } => "radial_scan",
            Task::Moran { .. } => "moran",
            Task::PressureDim { .. } => "pressure_dim",
            Task::BuildHyperbolic { .. } => "build_hyperbolic",
            Task::TwoBranch { .. } => "two_branch",
            Task::BoxCount { .. } => "box_count",
        }
    }
}

fn default_tol() -> f64 {
    1e-9
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Seeds {
    Points(Vec<PointDoc>),
    /// The `count`-th roots of unity, optionally restricted to a disk and
    /// thinned to the `limit` nearest its centre.
    Circle {
        count: usize,
        #[serde(default)]
        within: Option<DiskDoc>,
        #[serde(default)]
        limit: Option<usize>,
    },
    /// Uniform in spherical area over a disk, drawn from the scenario seed.
    Random {
        disk: DiskDoc,
        count: usize,
    },
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(untagged)]
pub enum IfsSource {
    /// Path of an IFS document, relative to the scenario file.
    Path(String),
    Inline(IfsDoc),
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PointSource {
    Ifs {
        ifs: IfsSource,
        depth: usize,
    },
    Circle {
        count: usize,
    },
    /// Backward-orbit samples of the scenario map.
    Julia {
        count: usize,
    },
    /// A points file in the exported CSV layout, relative to the scenario file.
    Csv(String),
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
pub struct Scales {
    pub hi: f64,
    pub lo: f64,
    pub count: usize,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default)]
pub struct Outputs {
    pub summary: String,
    pub table: String,
    pub points: String,
    pub plot: String,
    pub ifs: String,
    pub error: String,
}

impl Default for Outputs {
    fn default() -> Self {
        Outputs {
            summary: "summary.txt".into(),
            table: "table.csv".into(),
            points: "points.csv".into(),
            plot: "plot.pgm".into(),
            ifs: "ifs.json".into(),
            error: "error.json".into(),
        }
    }
}

/// A parsed scenario and the directory its relative paths resolve against.
#[derive(Clone, Debug)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub base_dir: PathBuf,
}

impl LoadedScenario {
    pub fn resolve(&self, relative: &str) -> PathBuf {
        self.base_dir.join(relative)
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let scenario: Scenario =
        serde_json::from_str(text).map_err(|e| Error::ConfigParseError(e.to_string()))?;
    scenario.validate()?;
    Ok(scenario)
}

pub fn load_scenario(path: &Path) -> Result<LoadedScenario> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::ConfigParseError(format!("{}: {e}", path.display())))?;
    Ok(LoadedScenario {
        scenario: parse_scenario(&text)?,
        base_dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
    })
}

fn check(ok: bool, what: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::ConfigParseError(what.to_string()))
    }
}

fn check_depths(depths: &[usize]) -> Result<()> {
    check(
        !depths.is_empty() && depths.iter().all(|&d| d >= 1),
        "depths must be a non-empty list of positive integers",
    )
}

fn check_disk(d: &DiskDoc, what: &str) -> Result<()> {
    check(
        d.radius > 0.0 && d.radius < std::f64::consts::FRAC_PI_2,
        &format!("{what}: radius must lie in (0, π/2)"),
    )
}

fn check_scales(s: &Scales) -> Result<()> {
    check(
        s.lo > 0.0 && s.hi > s.lo && s.count >= 2,
        "scales need 0 < lo < hi and count ≥ 2",
    )
}

fn check_seeds(s: &Seeds) -> Result<()> {
    match s {
        Seeds::Points(p) => check(!p.is_empty(), "seed list is empty"),
        Seeds::Circle {
            count,
            within,
            limit,
        } => {
            check(*count >= 1, "circle seed count must be positive")?;
            if let Some(d) = within {
                check_disk(d, "seeds.circle.within")?;
            }
            check(limit.is_none_or(|l| l >= 1), "seed limit must be positive")
        }
        Seeds::Random { disk, count } => {
            check_disk(disk, "seeds.random.disk")?;
            check(*count >= 1, "random seed count must be positive")
        }
    }
}

impl Scenario {
    pub fn needs_map(&self) -> bool {
        matches!(
            &self.task,
            Task::RadialScan { .. }
                | Task::BuildHyperbolic { .. }
                | Task::TwoBranch { .. }
                | Task::BoxCount {
                    points: PointSource::Julia { .. },
                    ..
                }
        )
    }

    /// Range checks on the parameters; failures are configuration errors.
    pub fn validate(&self) -> Result<()> {
        if self.needs_map() {
            check(
                self.map.is_some(),
                &format!("task {} requires a map", self.task.name()),
            )?;
        }
        if let Some(cap) = self.cap {
            check(cap >= 1, "cap must be positive")?;
        }
        match &self.task {
            Task::RadialScan {
                seeds,
                deltas,
                n_max,
            } => {
                check_seeds(seeds)?;
                check(
                    !deltas.is_empty()
                        && deltas
                            .iter()
                            .all(|d| *d > 0.0 && 2.0 * d < std::f64::consts::FRAC_PI_2),
                    "deltas must lie in (0, π/4)",
                )?;
                check(*n_max >= 1, "n_max must be positive")
            }
            Task::Moran { ratios } => check(
                !ratios.is_empty() && ratios.iter().all(|r| *r > 0.0 && *r < 1.0),
                "ratios must be a non-empty list in (0, 1)",
            ),
            Task::PressureDim {
                depths,
                tol,
                sampling,
                ..
            } => {
                check_depths(depths)?;
                check(*tol > 0.0, "tol must be positive")?;
                check(
                    sampling.is_none_or(|s| s >= 2),
                    "sampling needs at least two words",
                )
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
                scales,
                ..
            } => {
                check_seeds(seeds)?;
                check(
                    *radial_delta > 0.0 && 2.0 * radial_delta < std::f64::consts::FRAC_PI_2,
                    "radial_delta must lie in (0, π/4)",
                )?;
                check(*n_max >= 1, "n_max must be positive")?;
                check_disk(disk, "disk")?;
                check((0.0..2.0).contains(d_prime), "d_prime must lie in [0, 2)")?;
                check(
                    *delta > 0.0 && *covering_constant > 0.0,
                    "delta and covering_constant must be positive",
                )?;
                check_depths(depths)?;
                check(*tol > 0.0, "tol must be positive")?;
                if let Some(s) = scales {
                    check_scales(s)?;
                }
                Ok(())
            }
            Task::TwoBranch {
                disk,
                search_depth,
                depths,
                tol,
                ..
            } => {
                check_disk(disk, "disk")?;
                check(*search_depth >= 1, "search_depth must be positive")?;
                check_depths(depths)?;
                check(*tol > 0.0, "tol must be positive")
            }
            Task::BoxCount { points, scales } => {
                check_scales(scales)?;
                match points {
                    PointSource::Circle { count } | PointSource::Julia { count } => {
                        check(*count >= 1, "point count must be positive")
                    }
                    _ => Ok(()),
                }
            }
        }
    }
}
