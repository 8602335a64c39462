//! Machine-readable run artifacts: CSV tables per pipeline, plus a JSON
//! manifest recording the scenario hash, seed, versions, wall time, and a
//! content hash for every file written.
//!
//! Artifact filenames carry a short content-hash suffix, so a rerun with
//! different results writes a new file instead of silently overwriting an
//! old one; byte-identical reruns land on the identical path.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::boundary::ConcentrationSweep;
use crate::error::{Error, Result};
use crate::inverse::FourierRecovery;
use crate::scenario::sha256_hex;
use crate::spinor::RVec3;

/// One row of the Carleman ratio table.
#[derive(Debug, Clone)]
pub struct CarlemanRow {
    pub weight: String,
    pub s: f64,
    pub h: f64,
    pub family_id: String,
    pub ratio: f64,
}

/// CSV with columns `weight,s,h,family_id,ratio`.
pub fn carleman_csv(rows: &[CarlemanRow]) -> String {
    let mut out = String::from("weight,s,h,family_id,ratio\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{}", r.weight, r.s, r.h, r.family_id, r.ratio);
    }
    out
}

/// CSV with columns `k1,k2,k3,component,re,im,mode,h_extrapolated_from` —
/// one row per lattice mode and recovered component (`curl1..curl3`,
/// `qp`, `qm`).
pub fn recovery_csv(rec: &FourierRecovery) -> String {
    let mut out = String::from("k1,k2,k3,component,re,im,mode,h_extrapolated_from\n");
    let hs = rec
        .h_values
        .iter()
        .map(|h| h.to_string())
        .collect::<Vec<_>>()
        .join(";");
    let mode = rec.mode.label();
    for (i, k) in rec.k_lattice.iter().enumerate() {
        for (j, name) in ["curl1", "curl2", "curl3"].iter().enumerate() {
            let v = rec.curl_a_hat[i][j];
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                k[0], k[1], k[2], name, v.re, v.im, mode, hs
            );
        }
        for (name, v) in [("qp", rec.q_plus_hat[i]), ("qm", rec.q_minus_hat[i])] {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                k[0], k[1], k[2], name, v.re, v.im, mode, hs
            );
        }
    }
    out
}

/// Long-format CSV for a boundary concentration sweep, columns
/// `x0_1,x0_2,x0_3,t1,t2,t3,m,row,col,re,im,extrapolated` — the
/// extrapolated limit is emitted with `m = 0` and flag 1.
pub fn boundary_csv(x0: &RVec3, sweeps: &[ConcentrationSweep]) -> String {
    let mut out = String::from("x0_1,x0_2,x0_3,t1,t2,t3,m,row,col,re,im,extrapolated\n");
    for sw in sweeps {
        let mut emit = |m: f64, mat: &crate::spinor::Mat4, flag: u8| {
            for r in 0..4 {
                for c in 0..4 {
                    let v = mat[(r, c)];
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{},{},{},{},{},{},{}",
                        x0[0],
                        x0[1],
                        x0[2],
                        sw.t_hat[0],
                        sw.t_hat[1],
                        sw.t_hat[2],
                        m,
                        r,
                        c,
                        v.re,
                        v.im,
                        flag
                    );
                }
            }
        };
        for (m, mat) in sw.m_values.iter().zip(&sw.pairings) {
            emit(*m, mat, 0);
        }
        emit(0.0, &sw.extrapolated_limit, 1);
    }
    out
}

/// Generic sweep table, columns supplied by the caller; values are written
/// with the shortest round-trip float formatting so identical runs produce
/// identical bytes.
pub fn sweep_csv(columns: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = columns.join(",");
    out.push('\n');
    for r in rows {
        let mut first = true;
        for v in r {
            if !first {
                out.push(',');
            }
            let _ = write!(out, "{v}");
            first = false;
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct ArtifactEntry {
    pub name: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub scenario_sha256: String,
    pub seed: u64,
    pub crate_name: String,
    pub crate_version: String,
    pub wall_time_seconds: f64,
    pub artifacts: Vec<ArtifactEntry>,
    /// free-form recorded results (recovered values, max deviations, ...)
    pub values: BTreeMap<String, serde_json::Value>,
}

/// Collects the artifacts of one run and writes the manifest at the end.
pub struct ReportWriter {
    out_dir: PathBuf,
    manifest: RunManifest,
    started: Instant,
}

impl ReportWriter {
    pub fn new(out_dir: &Path, subcommand: &str, scenario_sha256: &str, seed: u64) -> Result<Self> {
        std::fs::create_dir_all(out_dir)?;
        Ok(ReportWriter {
            out_dir: out_dir.to_path_buf(),
            manifest: RunManifest {
                subcommand: subcommand.to_string(),
                scenario_sha256: scenario_sha256.to_string(),
                seed,
                crate_name: env!("CARGO_PKG_NAME").to_string(),
                crate_version: env!("CARGO_PKG_VERSION").to_string(),
                wall_time_seconds: 0.0,
                artifacts: Vec::new(),
                values: BTreeMap::new(),
            },
            started: Instant::now(),
        })
    }

    /// Write one artifact, suffixing the stem with the first 8 hex digits
    /// of its content hash. Returns the full path.
    pub fn write_artifact(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let hash = sha256_hex(bytes);
        let (stem, ext) = match name.rsplit_once('.') {
            Some((s, e)) => (s, format!(".{e}")),
            None => (name, String::new()),
        };
        let file = format!("{stem}-{}{ext}", &hash[..8]);
        let path = self.out_dir.join(&file);
        if path.exists() {
            let existing = std::fs::read(&path)?;
            if sha256_hex(&existing) != hash {
                return Err(Error::Scenario(format!(
                    "artifact collision at {}: existing content differs",
                    path.display()
                )));
            }
            // identical bytes already on disk: nothing to do
        } else {
            std::fs::write(&path, bytes)?;
        }
        self.manifest.artifacts.push(ArtifactEntry {
            name: name.to_string(),
            path: file,
            sha256: hash,
        });
        Ok(path)
    }

    pub fn out_dir(&self) -> &Path {
        &self.out_dir
    }

    /// Register a file written outside `write_artifact` (e.g. binary field
    /// dumps with self-managed names) in the manifest.
    pub fn register_external(&mut self, name: &str, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path)?;
        self.manifest.artifacts.push(ArtifactEntry {
            name: name.to_string(),
            path: path
                .file_name()
                .map(|f| f.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string()),
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    pub fn record(&mut self, key: &str, value: serde_json::Value) {
        self.manifest.values.insert(key.to_string(), value);
    }

    /// Write the manifest (also content-hash suffixed) and return its path.
    pub fn finish(mut self) -> Result<PathBuf> {
        self.manifest.wall_time_seconds = self.started.elapsed().as_secs_f64();
        let body = serde_json::to_vec_pretty(&self.manifest)
            .map_err(|e| Error::Scenario(format!("manifest serialisation failed: {e}")))?;
        let hash = sha256_hex(&body);
        let path = self
            .out_dir
            .join(format!("manifest-{}-{}.json", self.manifest.subcommand, &hash[..8]));
        std::fs::write(&path, &body)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spinor::Mat4;

    #[test]
    fn csv_headers_and_shapes() {
        let rows = vec![CarlemanRow {
            weight: "linear".into(),
            s: 0.0,
            h: 0.2,
            family_id: "bump-0".into(),
            ratio: 1.25,
        }];
        let csv = carleman_csv(&rows);
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.starts_with("weight,s,h,family_id,ratio\n"));
        assert!(csv.contains("linear,0,0.2,bump-0,1.25"));

        let sweep = ConcentrationSweep {
            t_hat: RVec3::new(1.0, 0.0, 0.0),
            m_values: vec![8.0],
            pairings: vec![Mat4::identity()],
            extrapolated_limit: Mat4::identity(),
        };
        let csv = boundary_csv(&RVec3::zeros(), &[sweep]);
        // header + 16 entries per matrix, one sweep matrix + the limit
        assert_eq!(csv.lines().count(), 1 + 32);
        assert!(csv.lines().last().unwrap().ends_with(",1"));
    }

    #[test]
    fn artifacts_are_hash_suffixed_and_never_clobbered() {
        let dir = tempfile::tempdir().unwrap();
        let mut w = ReportWriter::new(dir.path(), "carleman", "deadbeef", 7).unwrap();
        let p1 = w.write_artifact("ratios.csv", b"a,b\n1,2\n").unwrap();
        let p2 = w.write_artifact("ratios.csv", b"a,b\n3,4\n").unwrap();
        assert_ne!(p1, p2, "different content must land on different paths");
        // identical rerun reuses the identical path
        let p3 = w.write_artifact("ratios.csv", b"a,b\n1,2\n").unwrap();
        assert_eq!(p1, p3);
        w.record("max_dev", serde_json::json!(1e-14));
        let manifest = w.finish().unwrap();
        let text = std::fs::read_to_string(manifest).unwrap();
        assert!(text.contains("\"scenario_sha256\": \"deadbeef\""));
        assert!(text.contains("max_dev"));
        let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed["artifacts"].as_array().unwrap().len(), 3);
    }
}
