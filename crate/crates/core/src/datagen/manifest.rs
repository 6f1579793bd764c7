use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Injection, LabeledPair};
use crate::embeddings::{read_eseq, write_eseq};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.jsonl";

/// One manifest line. Paths are relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRecord {
    pub v1_path: PathBuf,
    pub v2_path: PathBuf,
    pub true_offset: i64,
    pub injection: Injection,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub positional_weight: f64,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

/// Writes `pair_NNNN_v{1,2}.eseq` plus `manifest.jsonl` into `dir` and
/// returns the manifest path.
pub fn write_manifest(pairs: &[LabeledPair], dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let width = pairs.len().saturating_sub(1).to_string().len().max(4);
    let mut lines = Vec::new();
    for (i, pair) in pairs.iter().enumerate() {
        let v1_path = PathBuf::from(format!("pair_{i:0width$}_v1.eseq"));
        let v2_path = PathBuf::from(format!("pair_{i:0width$}_v2.eseq"));
        for (seq, rel) in [(&pair.v1, &v1_path), (&pair.v2, &v2_path)] {
            write_eseq(seq, dir.join(rel)).map_err(|e| {
                Error::Argument(format!("pair {i}: {e}"))
            })?;
        }
        let record = ManifestRecord {
            v1_path,
            v2_path,
            true_offset: pair.true_offset,
            injection: pair.injection,
            seed: pair.seed,
            positional_weight: pair.positional_weight,
        };
        writeln!(lines, "{}", serde_json::to_string(&record).expect("record serializes"))
            .expect("in-memory write");
    }
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, lines).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Parses manifest records; errors name the 1-based line number.
pub fn read_manifest_records(path: &Path) -> Result<Vec<ManifestRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, line)| {
            serde_json::from_str(line).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: n + 1,
                msg: e.to_string(),
            })
        })
        .collect()
}

/// Reads a manifest and loads every referenced ESEQ file.
pub fn read_manifest(path: &Path) -> Result<Vec<LabeledPair>> {
    let base = path.parent().unwrap_or(Path::new("."));
    read_manifest_records(path)?
        .into_iter()
        .map(|r| {
            Ok(LabeledPair {
                v1: read_eseq(base.join(&r.v1_path))?,
                v2: read_eseq(base.join(&r.v2_path))?,
                true_offset: r.true_offset,
                injection: r.injection,
                seed: r.seed,
                positional_weight: r.positional_weight,
            })
        })
        .collect()
}
