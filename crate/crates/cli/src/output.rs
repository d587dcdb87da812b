//! File writers. Reals are written with 17 significant digits so a CSV
//! round-trips to the same `f64`.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Collects the files written by one run so the manifest can list them.
pub struct OutDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &[u8]) -> io::Result<()> {
        let mut f = fs::File::create(self.root.join(name))?;
        f.write_all(contents)?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> io::Result<()> {
        let mut text = header.join(",");
        text.push('\n');
        for row in rows {
            text.push_str(&row.join(","));
            text.push('\n');
        }
        self.write(name, text.as_bytes())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> io::Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Writes `manifest.json` listing every file written so far plus itself.
    pub fn finish(mut self, command: &str, digest: String, seed: u64) -> io::Result<()> {
        let mut outputs = self.written.clone();
        outputs.push("manifest.json".to_string());
        let manifest = RunManifest {
            command: command.to_string(),
            config_digest: digest,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            outputs,
        };
        self.write_json("manifest.json", &manifest)
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    /// SHA-256 of the canonicalized config.
    pub config_digest: String,
    pub seed: u64,
    pub version: String,
    pub timestamp: String,
    pub outputs: Vec<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_round_trip() {
        for x in [0.1, 1.0 / 3.0, 2.0f64.sqrt(), 1e-300, 123456.789, 0.0] {
            let s = real(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
            assert!(!s.contains(','));
        }
    }
}
