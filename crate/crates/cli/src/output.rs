use std::fmt::Display;
use std::path::Path;

use supersol::domain::RegionMask;
use supersol::problem::ScalarField;

use crate::CliError;

fn write_error(path: &Path, source: impl Into<std::io::Error>) -> CliError {
    CliError::Write {
        path: path.to_path_buf(),
        source: source.into(),
    }
}

/// Shortest round-trip form, switching to exponent notation outside
/// `[1e-4, 1e7)`.
pub fn real(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e7).contains(&a) {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

/// Ordered `key = value` lines.
#[derive(Debug, Default)]
pub struct Report {
    lines: Vec<(String, String)>,
}

impl Report {
    pub fn push(&mut self, key: &str, value: impl Display) {
        self.lines.push((key.to_string(), value.to_string()));
    }

    pub fn real(&mut self, key: &str, value: f64) {
        self.push(key, real(value));
    }

    pub fn render(&self) -> String {
        self.lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.render()).map_err(|e| write_error(path, e))
    }
}

pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| write_error(path, e))?;
    w.write_record(header).map_err(|e| write_error(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| write_error(path, e))?;
    }
    w.flush().map_err(|e| write_error(path, e))
}

/// Nodal values over `over`, one row per node in index order.
pub fn write_field(path: &Path, u: &ScalarField, over: &RegionMask) -> Result<(), CliError> {
    let grid = u.grid();
    let two_d = grid.dimension() == 2;
    let header: &[&str] = if two_d { &["x", "y", "value"] } else { &["x", "value"] };
    let rows: Vec<Vec<String>> = over
        .indices()
        .map(|i| {
            let at = grid.coords(i);
            let v = real(u.value(i));
            if two_d {
                vec![real(at[0]), real(at[1]), v]
            } else {
                vec![real(at[0]), v]
            }
        })
        .collect();
    write_table(path, header, &rows)
}
