//! JSON documents for systems and reports, and CSV export of point sets.
//!
//! Points are written as `[re, im]` or the string `"inf"`. Branch generators
//! are stored by their defining data (map literal, depth, anchor, base disk)
//! and re-certified on load.

use std::io::{BufRead, Write};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::branch::{pull_back_univalent, MetricMode};
use crate::error::{Error, Result};
use crate::hyperdim::HyperbolicSetReport;
use crate::ifs::{ConformalIFS, DimensionEstimate, IfsMap};
use crate::maps::HolomorphicMap;
use crate::sphere::{SpherePoint, SphericalDisk};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InfinityTag {
    Inf,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PointDoc {
    Finite([f64; 2]),
    Infinity(InfinityTag),
}

impl From<&SpherePoint> for PointDoc {
    fn from(p: &SpherePoint) -> Self {
        match p.finite() {
            Some(z) => PointDoc::Finite([z.re, z.im]),
            None => PointDoc::Infinity(InfinityTag::Inf),
        }
    }
}

impl PointDoc {
    pub fn to_point(&self) -> SpherePoint {
        match self {
            PointDoc::Finite([re, im]) => SpherePoint::from_parts(*re, *im),
            PointDoc::Infinity(_) => SpherePoint::Infinity,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiskDoc {
    pub center: PointDoc,
    pub radius: f64,
}

impl From<&SphericalDisk> for DiskDoc {
    fn from(d: &SphericalDisk) -> Self {
        DiskDoc {
            center: (&d.center).into(),
            radius: d.radius,
        }
    }
}

impl DiskDoc {
    pub fn to_disk(&self) -> Result<SphericalDisk> {
        SphericalDisk::new(self.center.to_point(), self.radius)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricDoc {
    Spherical,
    Planar,
}

impl From<MetricMode> for MetricDoc {
    fn from(m: MetricMode) -> Self {
        match m {
            MetricMode::Spherical => MetricDoc::Spherical,
            MetricMode::PlanarEuclidean => MetricDoc::Planar,
        }
    }
}

impl From<MetricDoc> for MetricMode {
    fn from(m: MetricDoc) -> Self {
        match m {
            MetricDoc::Spherical => MetricMode::Spherical,
            MetricDoc::Planar => MetricMode::PlanarEuclidean,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MapDoc {
    Branch {
        map: String,
        depth: usize,
        anchor: PointDoc,
        base_disk: DiskDoc,
    },
    /// `z ↦ a·z + b`.
    Similarity { a: [f64; 2], b: [f64; 2] },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IfsDoc {
    pub ambient: DiskDoc,
    pub metric: MetricDoc,
    pub maps: Vec<MapDoc>,
}

impl From<&ConformalIFS> for IfsDoc {
    fn from(ifs: &ConformalIFS) -> Self {
        let maps = ifs
            .maps
            .iter()
            .map(|m| match m {
                IfsMap::Inverse(b) => MapDoc::Branch {
                    map: b.map.to_literal(),
                    depth: b.depth,
                    anchor: (&b.anchor).into(),
                    base_disk: (&b.base_disk).into(),
                },
                IfsMap::Similarity { a, b } => MapDoc::Similarity {
                    a: [a.re, a.im],
                    b: [b.re, b.im],
                },
            })
            .collect();
        IfsDoc {
            ambient: (&ifs.ambient).into(),
            metric: ifs.metric.into(),
            maps,
        }
    }
}

impl IfsDoc {
    /// Rebuilds and validates the system; branches are certified again.
    pub fn to_ifs(&self) -> Result<ConformalIFS> {
        let maps = self
            .maps
            .iter()
            .map(|m| match m {
                MapDoc::Branch {
                    map,
                    depth,
                    anchor,
                    base_disk,
                } => {
                    let f = HolomorphicMap::parse(map)?;
                    let b =
                        pull_back_univalent(&f, *depth, &base_disk.to_disk()?, &anchor.to_point())?;
                    Ok(IfsMap::Inverse(b))
                }
                MapDoc::Similarity { a, b } => Ok(IfsMap::Similarity {
                    a: Complex::new(a[0], a[1]),
                    b: Complex::new(b[0], b[1]),
                }),
            })
            .collect::<Result<Vec<_>>>()?;
        ConformalIFS::new(self.ambient.to_disk()?, maps, self.metric.into())
    }
}

pub fn ifs_to_json(ifs: &ConformalIFS) -> String {
    serde_json::to_string_pretty(&IfsDoc::from(ifs)).expect("documents always serialize")
}

pub fn ifs_from_json(text: &str) -> Result<ConformalIFS> {
    serde_json::from_str::<IfsDoc>(text)
        .map_err(|e| Error::ConfigParseError(e.to_string()))?
        .to_ifs()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportDoc {
    pub sample_size: usize,
    pub n: usize,
    pub lambda_expansion: f64,
    pub invariance_defect: f64,
    pub defect_tolerance: f64,
    pub images_disjoint: bool,
    pub verified: bool,
    pub dimension_lower_bound: DimensionEstimate,
}

impl From<&HyperbolicSetReport> for ReportDoc {
    fn from(r: &HyperbolicSetReport) -> Self {
        ReportDoc {
            sample_size: r.sample.len(),
            n: r.n,
            lambda_expansion: r.lambda_expansion,
            invariance_defect: r.invariance_defect,
            defect_tolerance: r.defect_tolerance,
            images_disjoint: r.images_disjoint,
            verified: r.verified(),
            dimension_lower_bound: r.dimension_lower_bound.clone(),
        }
    }
}

/// Writes `re,im,chart` rows: chart `0` gives `z`, chart `1` gives `w = 1/z`
/// (so `∞` is `0,0,1`). Header lines are written first as `# …` comments.
pub fn write_points_csv<W: Write>(out: W, header: &[String], points: &[SpherePoint]) -> Result<()> {
    let mut out = out;
    for line in header {
        writeln!(out, "# {line}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["re", "im", "chart"]).map_err(csv_error)?;
    for p in points {
        let (z, inverted) = p.chart();
        w.write_record([
            z.re.to_string(),
            z.im.to_string(),
            u8::from(inverted).to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads what [`write_points_csv`] writes; `#` lines are skipped.
pub fn read_points_csv<R: BufRead>(input: R) -> Result<Vec<SpherePoint>> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(input);
    let mut points = Vec::new();
    for record in r.deserialize::<(f64, f64, u8)>() {
        let (re, im, chart) = record.map_err(|e| Error::ConfigParseError(e.to_string()))?;
        let z = Complex::new(re, im);
        points.push(match chart {
            0 => SpherePoint::new(z),
            1 => SpherePoint::from_chart(z, true),
            other => {
                return Err(Error::ConfigParseError(format!(
                    "chart flag {other} is not 0 or 1"
                )))
            }
        });
    }
    Ok(points)
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ifs::{pressure_root, ConformalIFS};
    use crate::sphere::spherical_distance;

    #[test]
    fn point_documents() {
        assert_eq!(
            serde_json::to_string(&PointDoc::from(&SpherePoint::Infinity)).unwrap(),
            "\"inf\""
        );
        let p: PointDoc = serde_json::from_str("[0.5, -1]").unwrap();
        assert_eq!(p.to_point(), SpherePoint::from_parts(0.5, -1.0));
        assert!(serde_json::from_str::<PointDoc>("\"infinity\"").is_err());
    }

    #[test]
    fn cantor_round_trip() {
        let third = Complex::new(1.0 / 3.0, 0.0);
        let ifs = ConformalIFS::new(
            SphericalDisk::from_euclidean(Complex::new(0.5, 0.0), 0.6).unwrap(),
            vec![
                IfsMap::Similarity {
                    a: third,
                    b: Complex::new(0.0, 0.0),
                },
                IfsMap::Similarity {
                    a: third,
                    b: Complex::new(2.0 / 3.0, 0.0),
                },
            ],
            MetricMode::PlanarEuclidean,
        )
        .unwrap();
        let text = ifs_to_json(&ifs);
        let back = ifs_from_json(&text).unwrap();
        assert_eq!(back.lambdas, ifs.lambdas);
        assert_eq!(ifs_to_json(&back), text);
    }

    #[test]
    fn branch_systems_are_recertified() {
        let ifs = ConformalIFS::squaring_arc(3, 0.6).unwrap();
        let back = ifs_from_json(&ifs_to_json(&ifs)).unwrap();
        assert_eq!(back.len(), ifs.len());
        for (a, b) in ifs.maps.iter().zip(&back.maps) {
            let (a, b) = (a.as_branch().unwrap(), b.as_branch().unwrap());
            assert_eq!(a.depth, b.depth);
            assert!(spherical_distance(&a.anchor, &b.anchor) == 0.0);
            assert_eq!(a.theta, b.theta);
        }
        let t0 = pressure_root(&ifs, &[2], 1e-9).unwrap().t;
        let t1 = pressure_root(&back, &[2], 1e-9).unwrap().t;
        assert_eq!(t0, t1);
    }

    #[test]
    fn malformed_documents() {
        assert!(matches!(
            ifs_from_json("{"),
            Err(Error::ConfigParseError(_))
        ));
        let bad = r#"{"ambient":{"center":[1,0],"radius":0.6},"metric":"spherical",
            "maps":[{"kind":"branch","map":"rational: (1,0,0)/(1)","depth":1,"anchor":[0,0],
            "base_disk":{"center":[1,0],"radius":0.6}}]}"#;
        assert!(matches!(ifs_from_json(bad), Err(Error::DomainError(_))));
    }

    #[test]
    fn csv_round_trip_keeps_bits() {
        let points = vec![
            SpherePoint::from_parts(0.1, -0.2),
            SpherePoint::Infinity,
            SpherePoint::from_parts(1e200, 3.0),
            SpherePoint::unit(1.0),
        ];
        let mut buf = Vec::new();
        write_points_csv(&mut buf, &["seed = 3".into()], &points).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# seed = 3\nre,im,chart\n"));
        let back = read_points_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), points.len());
        for (p, q) in points.iter().zip(&back) {
            assert!(spherical_distance(p, q) <= 1e-15, "{p} {q}");
        }
    }
}
