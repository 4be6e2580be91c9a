use crate::config::resolve_out_path;
use crate::manifest::{manifest_path_for, RunManifest};
use anyhow::{bail, Context, Result};
use clap::Parser;
use ebm_core::data::GrayCodec;
use ebm_core::energy::EnergyModel;
use ebm_core::metrics::energy_landscape;
use ebm_core::train::load_model;
use std::path::PathBuf;

#[derive(Parser)]
pub struct Args {
    /// MLP checkpoint over a 2-coordinate Gray encoding (even dimension)
    #[arg(long)]
    checkpoint: PathBuf,

    /// Grid resolution per axis (resolution^2 points)
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u32).range(1..))]
    resolution: u32,

    #[arg(long, default_value_t = -4.0)]
    lo: f64,

    #[arg(long, default_value_t = 4.0)]
    hi: f64,

    /// Output grid file (x,y,energy per row)
    #[arg(long)]
    out: PathBuf,
}

pub fn run(args: Args) -> Result<()> {
    let model = load_model(&args.checkpoint)?;
    if !matches!(model, EnergyModel::Mlp(_)) {
        bail!("landscape export requires an MLP checkpoint");
    }
    if model.dim() % 2 != 0 {
        bail!(
            "model dimension {} is odd; a 2-coordinate Gray encoding needs an even dimension",
            model.dim()
        );
    }
    let codec = GrayCodec::new(model.dim() / 2, args.lo, args.hi)?;
    let grid = energy_landscape(&model, &codec, args.resolution as usize)?;

    let out = resolve_out_path(&args.out);
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(&out, grid.to_csv()).with_context(|| format!("writing {}", out.display()))?;
    println!("wrote {} ({} grid points)", out.display(), grid.points.len());

    let mut manifest = RunManifest::new("landscape");
    manifest.set("checkpoint", args.checkpoint.display());
    manifest.set("resolution", args.resolution);
    manifest.set("lo", args.lo);
    manifest.set("hi", args.hi);
    manifest.add_output(&out);
    manifest.write(&manifest_path_for(&out))?;
    Ok(())
}
