//! CSV tables, file digests and run manifests.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Shortest decimal form, used in column names.
pub fn label(x: f64) -> String {
    format!("{x}")
}

pub fn write_csv<I>(path: &Path, header: &[String], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<f64>>,
{
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        let line: Vec<String> = row.into_iter().map(num).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// A numeric CSV table: header names and rows.
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Table> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut lines = text.lines();
        let header: Vec<String> = match lines.next() {
            Some(h) => h.split(',').map(|s| s.trim().to_string()).collect(),
            None => bail!("{} is empty", path.display()),
        };
        let mut rows = Vec::new();
        for (k, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<Vec<f64>, _>>()
                .with_context(|| format!("{}: bad number on line {}", path.display(), k + 2))?;
            if row.len() != header.len() {
                bail!(
                    "{}: line {} has {} fields, header has {}",
                    path.display(),
                    k + 2,
                    row.len(),
                    header.len()
                );
            }
            rows.push(row);
        }
        Ok(Table { header, rows })
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

pub fn digest(path: &Path) -> Result<FileDigest> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let hash = Sha256::digest(&bytes);
    let mut hex = String::with_capacity(64);
    for b in hash.iter() {
        write!(hex, "{b:02x}").unwrap();
    }
    Ok(FileDigest {
        path: path.display().to_string(),
        sha256: hex,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub params: serde_json::Value,
    pub tool_version: String,
    pub runtime_seconds: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

pub struct ManifestSpec<'a> {
    pub subcommand: &'a str,
    pub params: serde_json::Value,
    pub runtime: Duration,
    pub notes: Vec<String>,
    pub inputs: &'a [&'a Path],
    pub outputs: &'a [&'a Path],
}

/// Write `<first output>.manifest.json` describing the run.
pub fn write_manifest(spec: ManifestSpec<'_>) -> Result<PathBuf> {
    let primary = spec
        .outputs
        .first()
        .context("a manifest needs at least one output")?;
    let m = RunManifest {
        subcommand: spec.subcommand.to_string(),
        params: spec.params,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        runtime_seconds: spec.runtime.as_secs_f64(),
        notes: spec.notes,
        inputs: spec
            .inputs
            .iter()
            .map(|p| digest(p))
            .collect::<Result<_>>()?,
        outputs: spec
            .outputs
            .iter()
            .map(|p| digest(p))
            .collect::<Result<_>>()?,
    };
    let path = manifest_path(primary);
    fs::write(&path, serde_json::to_string_pretty(&m)? + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

pub fn read_manifest(path: &Path) -> Result<RunManifest> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 1.99684036732347, f64::MAX] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(label(0.3), "0.3");
    }

    #[test]
    fn table_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let header = vec!["t".to_string(), "mu_0.5".to_string()];
        write_csv(&p, &header, vec![vec![0.1, 1.0 / 7.0], vec![0.2, f64::NAN]]).unwrap();
        let t = Table::read(&p).unwrap();
        assert_eq!(t.header, header);
        assert_eq!(t.column("mu_0.5").unwrap()[0], 1.0 / 7.0);
        assert!(t.column("mu_0.5").unwrap()[1].is_nan());
        assert!(t.column("eta_0.5").is_none());
    }

    #[test]
    fn digest_is_sha256() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("abc");
        fs::write(&p, b"abc").unwrap();
        assert_eq!(
            digest(&p).unwrap().sha256,
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
