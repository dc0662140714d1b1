//! Text reports and CSV field dumps.

use std::fmt::Display;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{ChannelGrid, ScalarField};

/// Ordered `key = value` lines followed by the resolved configuration.
#[derive(Clone, Debug, Default)]
pub struct Report {
    lines: Vec<(String, String)>,
    config: String,
}

impl Report {
    pub fn new(command: &str, config_text: String) -> Self {
        let mut r = Report { lines: Vec::new(), config: config_text };
        r.set("command", command);
        r
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        self.lines.push((key.to_string(), value.to_string()));
    }

    /// Floats in shortest round-trip form.
    pub fn set_f64(&mut self, key: &str, value: f64) {
        self.set(key, format!("{value:?}"));
    }

    pub fn set_list(&mut self, key: &str, values: &[f64]) {
        self.set(key, values.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(", "));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.lines.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.lines {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out.push_str("\n[config]\n");
        out.push_str(&self.config);
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// Writes `x1,x2,x3,value` rows on the Chebyshev nodes times the
/// equispaced `(2M+1)^2` torus grid.
pub fn write_field_csv(path: &Path, field: &ScalarField) -> Result<()> {
    let g = field.grid();
    let nm = g.nm();
    let vals = field.sample_dump_grid();
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "x1,x2,x3,value")?;
    for (i, x1) in g.x1().iter().enumerate() {
        for a in 0..nm {
            for b in 0..nm {
                let (x2, x3) = (a as f64 / nm as f64, b as f64 / nm as f64);
                let v = vals[(i * nm + a) * nm + b];
                writeln!(w, "{x1:.17e},{x2:.17e},{x3:.17e},{v:.17e}")?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a dump written by [`write_field_csv`], rebuilding the grid from the
/// sample layout.
pub fn read_field_csv(path: &Path) -> Result<ScalarField> {
    let bad = |msg: String| Error::Domain(format!("{}: {msg}", path.display()));
    let reader = BufReader::new(fs::File::open(path)?);
    let mut rows: Vec<[f64; 4]> = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if n == 0 {
            if line.trim() != "x1,x2,x3,value" {
                return Err(bad("missing header x1,x2,x3,value".into()));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut row = [0.0; 4];
        let mut parts = line.split(',');
        for slot in row.iter_mut() {
            *slot = parts
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| bad(format!("line {}: malformed row", n + 1)))?;
        }
        rows.push(row);
    }
    let nm = rows.iter().take_while(|r| r[0] == rows[0][0] && r[1] == rows[0][1]).count();
    if nm == 0 || nm % 2 == 0 || rows.len() % (nm * nm) != 0 {
        return Err(bad(format!("{} rows do not form a dump grid", rows.len())));
    }
    let n1 = rows.len() / (nm * nm);
    let grid: Arc<ChannelGrid> = ChannelGrid::new(n1, (nm - 1) / 2)?;
    for (i, x1) in grid.x1().iter().enumerate() {
        if (rows[i * nm * nm][0] - x1).abs() > 1e-12 {
            return Err(bad(format!("x1 node {i} does not match the Chebyshev grid")));
        }
    }
    let vals: Vec<f64> = rows.iter().map(|r| r[3]).collect();
    ScalarField::from_dump_grid(&grid, &vals)
}
