//! CSV writers and the run manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub struct Outputs {
    dir: PathBuf,
    written: BTreeMap<String, String>,
}

impl Outputs {
    pub fn new(dir: &Path) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), written: BTreeMap::new() })
    }

    /// Writes a CSV with the given header; every row must match its width.
    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for row in rows {
            debug_assert_eq!(row.len(), header.len());
            w.write_record(row)?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        std::fs::write(self.dir.join(name), &bytes)?;
        self.written.insert(name.to_string(), hex(&Sha256::digest(&bytes)));
        Ok(())
    }

    pub fn manifest(self, config: &RunConfig, wall_time: f64) -> std::io::Result<PathBuf> {
        #[derive(Serialize)]
        struct Manifest<'a> {
            config: &'a RunConfig,
            version: &'a str,
            wall_time_seconds: f64,
            outputs: &'a BTreeMap<String, String>,
        }
        let m = Manifest { config, version: env!("CARGO_PKG_VERSION"), wall_time_seconds: wall_time, outputs: &self.written };
        let path = self.dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&m).map_err(std::io::Error::other)?;
        std::fs::write(&path, text + "\n")?;
        Ok(path)
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Shortest round-trip representation.
pub fn num(x: f64) -> String {
    format!("{x}")
}
