//! CSV emission with a `#` provenance header.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::CliError;

pub struct Table {
    header: String,
    columns: Vec<&'static str>,
    rows: Vec<String>,
    trailer: Vec<String>,
}

impl Table {
    /// `options` records the effective command options that shape the
    /// output; output paths and thread counts stay out of it.
    pub fn new(command: &str, options: &str, config: &ExperimentConfig, columns: &[&'static str]) -> Self {
        let echo = config.echo();
        let hash = hex::encode(Sha256::digest(echo.as_bytes()));
        let mut header = String::new();
        writeln!(header, "# leocov {}", env!("CARGO_PKG_VERSION")).unwrap();
        writeln!(header, "# command: {command} {options}").unwrap();
        writeln!(header, "# config_sha256: {hash}").unwrap();
        for line in echo.lines() {
            writeln!(header, "# | {line}").unwrap();
        }
        Self {
            header,
            columns: columns.to_vec(),
            rows: Vec::new(),
            trailer: Vec::new(),
        }
    }

    pub fn note(&mut self, line: impl AsRef<str>) {
        writeln!(self.header, "# {}", line.as_ref()).unwrap();
    }

    pub fn row(&mut self, cells: &[Cell]) {
        assert_eq!(cells.len(), self.columns.len(), "row width");
        let line: Vec<String> = cells.iter().map(Cell::render).collect();
        self.rows.push(line.join(","));
    }

    pub fn trailer(&mut self, line: impl Into<String>) {
        self.trailer.push(line.into());
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn render(&self) -> String {
        let mut s = self.header.clone();
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for r in &self.rows {
            s.push_str(r);
            s.push('\n');
        }
        for t in &self.trailer {
            writeln!(s, "# {t}").unwrap();
        }
        s
    }

    pub fn write(&self, out: Option<&Path>) -> Result<(), CliError> {
        let text = self.render();
        match out {
            Some(p) => std::fs::write(p, text).map_err(|e| CliError::io(format!("cannot write {}: {e}", p.display()))),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

pub enum Cell {
    F(f64),
    U(u64),
    S(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            // shortest representation that round-trips
            Cell::F(x) => format!("{x:?}"),
            Cell::U(n) => n.to_string(),
            Cell::S(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_then_columns_then_rows() {
        let c = ExperimentConfig::parse("[fading]\nm = 1\nb = 0.1\nomega = 0.5\n").unwrap();
        let mut t = Table::new("demo", "--x 1", &c, &["a", "b"]);
        t.row(&[Cell::F(0.1), Cell::Empty]);
        t.trailer("done");
        let s = t.render();
        let lines: Vec<&str> = s.lines().collect();
        assert!(lines[0].starts_with("# leocov "));
        assert_eq!(lines[1], "# command: demo --x 1");
        assert_eq!(lines[2].len(), "# config_sha256: ".len() + 64);
        assert!(s.contains("# | [fading]"));
        let body: Vec<&str> = lines.iter().filter(|l| !l.starts_with('#')).copied().collect();
        assert_eq!(body, vec!["a,b", "0.1,"]);
        assert_eq!(*lines.last().unwrap(), "# done");
    }
}
