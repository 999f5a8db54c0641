//! Writers for the run artifacts: summary text, CSV tables, PGM scatter plots.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use hypdim::{Error, Result, SpherePoint};

/// A CSV table with a fixed header.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

pub fn write_table(path: &Path, preamble: &[String], table: &Table) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for line in preamble {
        writeln!(out, "# {line}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(&table.header).map_err(io)?;
    for row in &table.rows {
        w.write_record(row).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_points(path: &Path, preamble: &[String], points: &[SpherePoint]) -> Result<()> {
    hypdim::serial::write_points_csv(BufWriter::new(File::create(path)?), preamble, points)
}

pub const PLOT_SIZE: usize = 512;

/// Finite points beyond this modulus are left off the plot.
const PLOT_CLIP: f64 = 1e6;

/// Black-on-white scatter of the finite points in the plane, framed by their
/// bounding square with a 5% margin. Binary PGM with the preamble as comments.
pub fn write_plot(path: &Path, preamble: &[String], points: &[SpherePoint]) -> Result<()> {
    let zs: Vec<_> = points
        .iter()
        .filter_map(|p| p.finite())
        .filter(|z| z.norm() < PLOT_CLIP)
        .collect();
    let mut pixels = vec![255u8; PLOT_SIZE * PLOT_SIZE];
    if !zs.is_empty() {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for z in &zs {
            x0 = x0.min(z.re);
            x1 = x1.max(z.re);
            y0 = y0.min(z.im);
            y1 = y1.max(z.im);
        }
        let side = (x1 - x0).max(y1 - y0).max(1e-12) * 1.1;
        let (cx, cy) = ((x0 + x1) / 2.0, (y0 + y1) / 2.0);
        let last = (PLOT_SIZE - 1) as f64;
        for z in &zs {
            let col = (((z.re - cx) / side + 0.5) * last).round() as usize;
            let row = ((0.5 - (z.im - cy) / side) * last).round() as usize;
            pixels[row.min(PLOT_SIZE - 1) * PLOT_SIZE + col.min(PLOT_SIZE - 1)] = 0;
        }
    }
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "P5")?;
    for line in preamble {
        writeln!(out, "# {line}")?;
    }
    writeln!(out, "{PLOT_SIZE} {PLOT_SIZE}")?;
    writeln!(out, "255")?;
    out.write_all(&pixels)?;
    out.flush()?;
    Ok(())
}
