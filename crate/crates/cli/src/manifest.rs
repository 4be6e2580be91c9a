//! Run manifests: every command writes one key=value manifest next to its
//! outputs, recording the command, the fully resolved configuration, the
//! seed, the code version, wall time, and output paths. Re-running the
//! recorded command regenerates the outputs (modulo the wall-time fields).

use anyhow::{Context, Result};
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub struct RunManifest {
    started: Instant,
    entries: Vec<(String, String)>,
    outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(command: &str) -> RunManifest {
        let argv: Vec<String> = std::env::args().collect();
        let mut m = RunManifest {
            started: Instant::now(),
            entries: Vec::new(),
            outputs: Vec::new(),
        };
        m.set("command", command);
        m.set("argv", shell_join(&argv));
        m.set("version", env!("CARGO_PKG_VERSION"));
        m
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn add_output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    /// Write `<manifest_path>` with the wall time filled in.
    pub fn write(mut self, manifest_path: &Path) -> Result<()> {
        let wall = self.started.elapsed().as_secs_f64() * 1e3;
        self.set("wall_ms", format!("{wall:.3}"));
        let outputs: Vec<String> = self
            .outputs
            .iter()
            .map(|p| p.display().to_string())
            .collect();
        self.set("outputs", outputs.join(","));
        let mut text = String::new();
        for (k, v) in &self.entries {
            text.push_str(&format!("{k}={v}\n"));
        }
        std::fs::write(manifest_path, text)
            .with_context(|| format!("writing manifest {}", manifest_path.display()))
    }
}

fn shell_join(argv: &[String]) -> String {
    argv.iter()
        .map(|a| {
            if a.contains(' ') || a.contains('"') {
                format!("{a:?}")
            } else {
                a.clone()
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// `<path>.manifest` beside a file output.
pub fn manifest_path_for(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest");
    out.with_file_name(name)
}
