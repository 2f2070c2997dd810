//! CSV with a commented metadata block, written atomically.

use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::CliError;

pub struct Table {
    meta: Vec<(String, String)>,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    /// `config` is hashed into the metadata; it must not depend on the worker count.
    pub fn new(seed: Option<u64>, config: &str, header: &[&str]) -> Self {
        let hash = Sha256::digest(config.as_bytes());
        let hex: String = hash.iter().map(|b| format!("{b:02x}")).collect();
        let mut meta = vec![("subfrac".to_string(), env!("CARGO_PKG_VERSION").to_string())];
        if let Some(s) = seed {
            meta.push(("seed".into(), s.to_string()));
        }
        meta.push(("config_sha256".into(), hex));
        meta.push(("config".into(), config.to_string()));
        Self {
            meta,
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> Result<Vec<u8>, CliError> {
        let mut buf = Vec::new();
        for (k, v) in &self.meta {
            // keep the block to one physical line per key
            writeln!(buf, "# {k}: {}", v.replace('\n', " ")).expect("writing to memory");
        }
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(&self.header).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_err)?;
        }
        w.into_inner()
            .map_err(|e| CliError::Numerical(format!("csv: {e}")))
    }

    /// To `path` through a temporary file in the same directory, or to stdout.
    pub fn write(&self, path: Option<&Path>) -> Result<(), CliError> {
        let bytes = self.render()?;
        match path {
            None => std::io::stdout().write_all(&bytes).map_err(io_err),
            Some(p) => {
                let dir = match p.parent() {
                    Some(d) if !d.as_os_str().is_empty() => d,
                    _ => Path::new("."),
                };
                let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
                tmp.write_all(&bytes).map_err(io_err)?;
                tmp.persist(p).map_err(|e| io_err(e.error))?;
                Ok(())
            }
        }
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Numerical(format!("csv: {e}"))
}

fn io_err(e: std::io::Error) -> CliError {
    CliError::Io(e.to_string())
}

pub fn num(v: f64) -> String {
    format!("{v:.12e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metadata_then_header() {
        let mut t = Table::new(Some(7), "{\"a\":1}", &["x", "label"]);
        t.push(vec![num(0.5), "has,comma".into()]);
        let s = String::from_utf8(t.render().unwrap()).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(
            lines[0],
            format!("# subfrac: {}", env!("CARGO_PKG_VERSION"))
        );
        assert_eq!(lines[1], "# seed: 7");
        assert!(lines[2].starts_with("# config_sha256: ") && lines[2].len() == 17 + 64);
        assert_eq!(lines[4], "x,label");
        assert_eq!(lines[5], "5.000000000000e-1,\"has,comma\"");
    }

    #[test]
    fn atomic_write_replaces_target() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.csv");
        std::fs::write(&p, "old").unwrap();
        Table::new(None, "{}", &["a"]).write(Some(&p)).unwrap();
        let s = std::fs::read_to_string(&p).unwrap();
        assert!(s.ends_with("a\n"));
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
