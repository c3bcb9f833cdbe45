//! CSV files with a `#` metadata block, plus gnuplot templates.

use std::path::{Path, PathBuf};

use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Header comment lines written above every table.
#[derive(Debug, Clone)]
pub struct Metadata {
    pub command: &'static str,
    pub config_hash: String,
    pub seed: u64,
    pub extra: Vec<(String, String)>,
}

impl Metadata {
    pub fn new(command: &'static str, config_hash: String, seed: u64) -> Self {
        Self { command, config_hash, seed, extra: Vec::new() }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.extra.push((key.to_string(), value.to_string()));
        self
    }

    fn render(&self) -> String {
        let mut s = format!(
            "# qbe {VERSION}\n# command: {}\n# config_hash: {}\n# seed: {}\n",
            self.command, self.config_hash, self.seed
        );
        for (k, v) in &self.extra {
            s.push_str(&format!("# {k}: {v}\n"));
        }
        s
    }
}

/// Fixed-width scientific notation so reruns are byte-identical.
pub fn num(x: f64) -> String {
    format!("{x:.12e}")
}

pub fn write_csv(
    dir: &Path,
    name: &str,
    meta: &Metadata,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| CliError::Io(e.to_string()))?;
    for r in rows {
        w.write_record(r).map_err(|e| CliError::Io(e.to_string()))?;
    }
    let body = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    let mut out = meta.render().into_bytes();
    out.extend_from_slice(&body);
    let path = dir.join(format!("{name}.csv"));
    std::fs::write(&path, out).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(path)
}

/// One plotted series: `using x:y` columns (1-based) and a title.
pub struct Series<'a> {
    pub x: usize,
    pub y: usize,
    pub title: &'a str,
}

/// Writes `<name>.gp` next to `<name>.csv`.
pub fn write_gnuplot(
    dir: &Path,
    name: &str,
    xlabel: &str,
    ylabel: &str,
    log_x: bool,
    log_y: bool,
    series: &[Series],
) -> Result<PathBuf, CliError> {
    let mut s = String::new();
    s.push_str("set datafile separator ','\nset datafile commentschars '#'\nset key autotitle columnhead\n");
    s.push_str(&format!("set xlabel '{xlabel}'\nset ylabel '{ylabel}'\n"));
    if log_x {
        s.push_str("set logscale x\n");
    }
    if log_y {
        s.push_str("set logscale y\n");
    }
    s.push_str(&format!("set terminal pngcairo size 800,600\nset output '{name}.png'\nplot "));
    let parts: Vec<String> = series
        .iter()
        .map(|p| format!("'{name}.csv' using {}:{} with linespoints title '{}'", p.x, p.y, p.title))
        .collect();
    s.push_str(&parts.join(", \\\n     "));
    s.push('\n');
    let path = dir.join(format!("{name}.gp"));
    std::fs::write(&path, s).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(path)
}
