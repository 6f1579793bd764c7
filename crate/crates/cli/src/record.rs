use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use videosync_core::embeddings::ESEQ_VERSION;
use videosync_core::nn::VSMD_VERSION;

use crate::{Command, Format};

/// Everything needed to rerun a command: its flags, tool version and the
/// file formats it wrote. No timestamps, so reruns are byte-identical.
#[derive(Serialize)]
pub struct RunRecord<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub eseq_version: u32,
    pub vsmd_version: u32,
    pub format: Format,
    pub command: &'a Command,
    pub outputs: Vec<PathBuf>,
    pub summary: serde_json::Value,
}

impl<'a> RunRecord<'a> {
    pub fn new(format: Format, command: &'a Command, outputs: Vec<PathBuf>, summary: serde_json::Value) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            eseq_version: ESEQ_VERSION,
            vsmd_version: VSMD_VERSION,
            format,
            command,
            outputs,
            summary,
        }
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text).with_context(|| format!("writing run record {}", path.display()))
    }
}

/// `model.vsmd` → `model.vsmd.run.json`.
pub fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".run.json");
    path.with_file_name(name)
}
