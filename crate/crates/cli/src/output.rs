//! CSV and plot-data writers. Floats carry 17 significant digits so that
//! every value round-trips exactly.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use singular_core::GridFunction;

use crate::error::CliError;

pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.16e}")
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, num)
}

pub struct Table {
    writer: csv::Writer<fs::File>,
}

impl Table {
    pub fn create(dir: &Path, name: &str, header: &[&str]) -> Result<Self, CliError> {
        let mut writer = csv::Writer::from_path(dir.join(name))?;
        writer.write_record(header)?;
        Ok(Table { writer })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.writer.flush()?;
        Ok(())
    }
}

pub fn prepare_dir(dir: &Path) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)?;
    Ok(dir.to_path_buf())
}

/// Node coordinates and value, one node per row.
pub fn write_solution(dir: &Path, name: &str, u: &GridFunction) -> Result<(), CliError> {
    let dim = u.grid().dim();
    let header: Vec<&str> = ["x", "y", "z"][..dim].iter().copied().chain(["u"]).collect();
    let mut t = Table::create(dir, name, &header)?;
    for (x, &v) in u.grid().points().zip(u.values()) {
        t.row(x.iter().map(|&c| num(c)).chain([num(v)]))?;
    }
    t.finish()
}

/// Two whitespace-separated columns, no header.
pub fn write_dat(dir: &Path, name: &str, rows: &[(f64, f64)]) -> Result<(), CliError> {
    let mut f = fs::File::create(dir.join(name))?;
    for (a, b) in rows {
        writeln!(f, "{} {}", num(*a), num(*b))?;
    }
    Ok(())
}

/// Values along the first axis through the grid centre line.
pub fn centre_profile(u: &GridFunction) -> Vec<(f64, f64)> {
    let grid = u.grid();
    let mid = grid.cells() / 2;
    (1..grid.cells())
        .filter_map(|i| {
            let mut full = vec![mid; grid.dim()];
            full[0] = i;
            grid.node_at(&full).map(|node| (grid.point(node)[0], u.values()[node]))
        })
        .collect()
}

/// One `status.csv` row per run: exit code, tag and message.
pub fn write_status(dir: &Path, code: u8, kind: &str, message: &str) -> Result<(), CliError> {
    let mut t = Table::create(dir, "status.csv", &["code", "kind", "message"])?;
    t.row([code.to_string(), kind.to_string(), message.to_string()])?;
    t.finish()
}
