//! CSV, PGM and summary writers. Floats are written with 17 significant
//! digits so that files round-trip exactly.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use crate::descent::DescentHistory;
use crate::mesh_fem::NodalField;

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Buffered CSV file with a fixed header.
pub struct CsvWriter {
    out: BufWriter<File>,
    columns: usize,
}

impl CsvWriter {
    pub fn create(path: &Path, header: &[&str]) -> io::Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{}", header.join(","))?;
        Ok(Self {
            out,
            columns: header.len(),
        })
    }

    pub fn row(&mut self, cells: &[String]) -> io::Result<()> {
        debug_assert_eq!(cells.len(), self.columns);
        writeln!(self.out, "{}", cells.join(","))
    }

    pub fn floats(&mut self, values: &[f64]) -> io::Result<()> {
        let cells: Vec<String> = values.iter().map(|&x| num(x)).collect();
        self.row(&cells)
    }

    pub fn finish(mut self) -> io::Result<()> {
        self.out.flush()
    }
}

pub fn write_history(path: &Path, history: &DescentHistory) -> io::Result<()> {
    let mut csv = CsvWriter::create(path, &["iter", "E", "grad_norm", "step", "halvings"])?;
    for r in &history.records {
        csv.row(&[
            r.index.to_string(),
            num(r.energy),
            num(r.gradient_norm),
            num(r.step_size),
            r.halvings.to_string(),
        ])?;
    }
    csv.finish()
}

/// One row `(t, x, value)` per node, time-major.
pub fn write_field(path: &Path, field: &NodalField, name: &str) -> io::Result<()> {
    let mut csv = CsvWriter::create(path, &["t", "x", name])?;
    let mesh = field.mesh();
    for i in 0..=mesh.nt() {
        for j in 0..=mesh.nx() {
            let (t, x) = mesh.node(i, j);
            csv.floats(&[t, x, field.at(i, j)])?;
        }
    }
    csv.finish()
}

/// Binary 8-bit PGM, one pixel per node, first row at `t = 0`. Values are
/// mapped linearly from `[min, max]` to `[0, 255]`.
pub fn write_pgm(path: &Path, field: &NodalField) -> io::Result<()> {
    let mesh = field.mesh();
    let (w, h) = (mesh.nx() + 1, mesh.nt() + 1);
    let lo = field.values().iter().copied().fold(f64::INFINITY, f64::min);
    let hi = field.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut out = BufWriter::new(File::create(path)?);
    write!(out, "P5\n{w} {h}\n255\n")?;
    let pixels: Vec<u8> = field
        .values()
        .iter()
        .map(|&u| ((u - lo) / span * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    out.write_all(&pixels)?;
    out.flush()
}

/// `key = value` lines.
#[derive(Default)]
pub struct Summary {
    lines: Vec<(String, String)>,
}

impl Summary {
    pub fn put(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.lines.push((key.to_string(), value.to_string()));
        self
    }

    pub fn put_num(&mut self, key: &str, value: f64) -> &mut Self {
        self.put(key, num(value))
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        std::fs::write(path, self.to_string())
    }
}

impl std::fmt::Display for Summary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (k, v) in &self.lines {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}
