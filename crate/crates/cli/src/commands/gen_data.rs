use crate::config::resolve_out_path;
use crate::manifest::{manifest_path_for, RunManifest};
use anyhow::{bail, Result};
use clap::Parser;
use ebm_core::bits::Encoding;
use ebm_core::data::{
    encode_dataset, gen_ising_data, save_dataset, GrayCodec, Synthetic2D, Synthetic2DSpec,
    RANGE_HI, RANGE_LO,
};
use ebm_core::energy::{EnergyModel, IsingEnergy};
use ebm_core::train::save_model;
use std::path::PathBuf;

#[derive(Parser)]
pub struct Args {
    /// Synthetic generator name
    #[arg(
        long,
        value_parser = ["2spirals", "8gaussians", "circles", "moons", "pinwheel", "swissroll", "checkerboard"],
        conflicts_with = "ising",
        required_unless_present = "ising"
    )]
    dist: Option<String>,

    /// Gray-code bits per coordinate (dataset dimension is 2x this)
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u16).range(1..=128))]
    bits: u16,

    /// Generate Ising lattice data from a fixed true model instead
    #[arg(long)]
    ising: bool,

    /// Lattice side length (d = side^2)
    #[arg(long, default_value_t = 25, value_parser = clap::value_parser!(u16).range(3..))]
    side: u16,

    /// True coupling strength
    #[arg(long, default_value_t = 0.25)]
    sigma: f64,

    /// Single-site Gibbs step budget per chain for Ising data
    #[arg(long, default_value_t = 1_000_000)]
    steps: u64,

    /// Parallel Gibbs chains for Ising data
    #[arg(long, default_value_t = 100)]
    chains: usize,

    /// Spin encoding for the Ising energy: pm1 or 01
    #[arg(long, default_value = "pm1")]
    encoding: String,

    /// Also save the true model next to the dataset (Ising only)
    #[arg(long)]
    true_model_out: Option<PathBuf>,

    /// Number of samples
    #[arg(long, default_value_t = 2000)]
    n: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Output dataset path
    #[arg(long)]
    out: PathBuf,
}

pub fn run(args: Args) -> Result<()> {
    let out = resolve_out_path(&args.out);
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut manifest = RunManifest::new("gen-data");
    manifest.set("seed", args.seed);
    manifest.set("n", args.n);

    let dataset = if args.ising {
        let encoding = Encoding::parse(&args.encoding)?;
        let true_model =
            IsingEnergy::cyclic_lattice(args.side as usize, args.sigma, encoding)?;
        manifest.set("mode", "ising");
        manifest.set("side", args.side);
        manifest.set("sigma", args.sigma);
        manifest.set("steps", args.steps);
        manifest.set("chains", args.chains);
        manifest.set("encoding", encoding.name());
        let ds = gen_ising_data(&true_model, args.n, args.steps, args.chains, args.seed)?;
        if let Some(tm_out) = &args.true_model_out {
            let tm_out = resolve_out_path(tm_out);
            save_model(&EnergyModel::Ising(true_model), &tm_out)?;
            manifest.add_output(&tm_out);
        }
        ds
    } else {
        let dist = args.dist.as_deref().expect("clap enforces dist|ising");
        if args.true_model_out.is_some() {
            bail!("--true-model-out applies only to --ising");
        }
        let generator = Synthetic2D::parse(dist)?;
        let codec = GrayCodec::new(args.bits as usize, RANGE_LO, RANGE_HI)?;
        manifest.set("mode", "synthetic2d");
        manifest.set("dist", generator.name());
        manifest.set("bits", args.bits);
        manifest.set("d", 2 * args.bits as usize);
        encode_dataset(
            &Synthetic2DSpec {
                generator,
                n: args.n,
                codec,
            },
            args.seed,
        )?
    };

    save_dataset(&dataset, &out)?;
    println!(
        "wrote {} ({} rows, d={})",
        out.display(),
        dataset.batch.n(),
        dataset.batch.d()
    );
    manifest.add_output(&out);
    manifest.write(&manifest_path_for(&out))?;
    Ok(())
}
