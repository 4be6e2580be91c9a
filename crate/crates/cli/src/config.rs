//! Optional key=value config file merged into the command line, plus the
//! environment overrides.
//!
//! Precedence: explicit flags > config file entries > environment > built-in
//! defaults. The merge works by injecting config entries as flags right
//! after the subcommand, before the user's own flags; later occurrences win.

use anyhow::{bail, Context, Result};
use std::path::{Path, PathBuf};

pub const ENV_THREADS: &str = "EBM_THREADS";
pub const ENV_OUT_DIR: &str = "EBM_OUT_DIR";

/// Extract `--config FILE` (or `--config=FILE`) from raw args and splice the
/// file's entries in as flags.
pub fn assemble_argv() -> Result<Vec<String>> {
    let raw: Vec<String> = std::env::args().collect();
    let mut args = Vec::with_capacity(raw.len());
    let mut config_path: Option<PathBuf> = None;
    let mut it = raw.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            let val = it.next().context("--config requires a file path")?;
            config_path = Some(PathBuf::from(val));
        } else if let Some(rest) = a.strip_prefix("--config=") {
            config_path = Some(PathBuf::from(rest));
        } else {
            args.push(a);
        }
    }
    let Some(path) = config_path else {
        return Ok(args);
    };
    let injected = read_config_flags(&path)?;
    // program name, subcommand, config flags, then user flags
    if args.len() < 2 {
        bail!("--config requires a subcommand");
    }
    let mut merged = Vec::with_capacity(args.len() + injected.len());
    merged.extend_from_slice(&args[..2]);
    merged.extend(injected);
    merged.extend_from_slice(&args[2..]);
    Ok(merged)
}

fn read_config_flags(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config file {}", path.display()))?;
    let mut flags = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!(
                "{}:{}: expected key=value, got '{line}'",
                path.display(),
                lineno + 1
            );
        };
        let key = key.trim();
        let value = value.trim();
        match value {
            "true" => flags.push(format!("--{key}")),
            "false" => {}
            _ => {
                flags.push(format!("--{key}"));
                flags.push(value.to_string());
            }
        }
    }
    Ok(flags)
}

/// Resolve an output path: relative paths land under $EBM_OUT_DIR when set.
pub fn resolve_out_path(path: &Path) -> PathBuf {
    if path.is_absolute() {
        return path.to_path_buf();
    }
    match std::env::var_os(ENV_OUT_DIR) {
        Some(base) if !base.is_empty() => PathBuf::from(base).join(path),
        _ => path.to_path_buf(),
    }
}

/// Worker cap: flag wins, then $EBM_THREADS, then all logical processors.
pub fn resolve_threads(flag: Option<usize>) -> usize {
    if let Some(n) = flag {
        return n.max(1);
    }
    if let Some(v) = std::env::var(ENV_THREADS).ok().and_then(|v| v.parse::<usize>().ok()) {
        return v.max(1);
    }
    std::thread::available_parallelism().map_or(1, |n| n.get())
}
