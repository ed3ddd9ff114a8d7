//! Plain columnar text files with one `#` header line.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use slabguide::ComplexField;

use crate::error::{CliError, CliResult};

/// Fixed-width scientific notation; -0 is written as 0.
pub fn num(v: f64) -> String {
    format!("{:.12e}", v + 0.0)
}

pub struct Table {
    header: String,
    body: String,
}

impl Table {
    pub fn new(columns: &[&str], hash: &str) -> Self {
        Table {
            header: format!("# {}  scenario={hash}\n", columns.join(" ")),
            body: String::new(),
        }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.body.push_str(&cells.join(" "));
        self.body.push('\n');
    }

    pub fn numeric_row(&mut self, values: &[f64]) {
        let cells: Vec<String> = values.iter().map(|&v| num(v)).collect();
        self.row(&cells);
    }

    pub fn contents(&self) -> String {
        format!("{}{}", self.header, self.body)
    }

    pub fn write(&self, dir: &Path, name: &str) -> CliResult<PathBuf> {
        let path = dir.join(name);
        fs::write(&path, self.contents()).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}

/// x z re im abs, x fastest.
pub fn field_table(f: &ComplexField, hash: &str) -> Table {
    let mut t = Table::new(&["x", "z", "re", "im", "abs"], hash);
    let g = f.grid;
    for j in 0..g.nz {
        let z = g.z(j);
        for i in 0..g.nx {
            let v = f.get(i, j);
            let mut line = String::with_capacity(100);
            let _ = write!(
                line,
                "{} {} {} {} {}",
                num(g.x(i)),
                num(z),
                num(v.re),
                num(v.im),
                num(v.norm())
            );
            t.row(&[line]);
        }
    }
    t
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}
