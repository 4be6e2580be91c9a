use crate::config::resolve_out_path;
use crate::manifest::RunManifest;
use anyhow::{bail, Context, Result};
use clap::Parser;
use ebm_core::bits::Encoding;
use ebm_core::data::load_dataset;
use ebm_core::energy::{EnergyModel, IsingEnergy, MlpEnergy};
use ebm_core::rm::{EstimatorKind, EstimatorSpec, DEFAULT_EXPONENT_CLAMP};
use ebm_core::sampler::{streams, RngStream};
use ebm_core::train::{TrainConfig, TrainSinks, Trainer};
use std::io::Write;
use std::path::PathBuf;

#[derive(Parser)]
pub struct Args {
    /// Training dataset (gen-data output)
    #[arg(long)]
    data: PathBuf,

    /// Objective to optimize
    #[arg(
        long,
        value_parser = ["rm-full", "rm-g-full", "rmwggis-basic", "rmwggis-adv", "rmwrand"],
        default_value = "rmwggis-adv"
    )]
    estimator: String,

    /// Sampled flip terms per data point (sampled estimators)
    #[arg(long, default_value_t = 10)]
    s: usize,

    /// Exponent clamp bound for loss terms
    #[arg(long, default_value_t = DEFAULT_EXPONENT_CLAMP)]
    clamp: f64,

    #[arg(long, default_value_t = 256)]
    batch: usize,

    #[arg(long, default_value_t = 3000)]
    iters: u64,

    #[arg(long, default_value_t = 1e-3)]
    lr: f64,

    #[arg(long, default_value_t = 0.9)]
    beta1: f64,

    #[arg(long, default_value_t = 0.999)]
    beta2: f64,

    #[arg(long, default_value_t = 1e-8)]
    eps: f64,

    /// Model family: mlp or ising (learnable coupling)
    #[arg(long, value_parser = ["mlp", "ising"], default_value = "mlp")]
    model: String,

    /// Hidden width (MLP)
    #[arg(long, default_value_t = 256)]
    width: usize,

    /// Hidden layer count (MLP)
    #[arg(long, default_value_t = 3)]
    depth: usize,

    /// Spin encoding for coupling models: pm1 or 01
    #[arg(long, default_value = "pm1")]
    encoding: String,

    /// L1 penalty strength on the coupling matrix (ising model only)
    #[arg(long, default_value_t = 0.0)]
    l1: f64,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Record metrics every N iterations (0: only at the end)
    #[arg(long, default_value_t = 100)]
    eval_every: u64,

    /// Training-set rows used for the periodic objective metric
    #[arg(long, default_value_t = 1000)]
    eval_samples: usize,

    /// Save an intermediate checkpoint every N iterations (0: final only)
    #[arg(long, default_value_t = 0)]
    checkpoint_every: u64,

    /// Resume from a trainer checkpoint
    #[arg(long)]
    resume: Option<PathBuf>,

    /// Output directory (checkpoints, metrics.log, manifest.txt)
    #[arg(long)]
    out_dir: PathBuf,
}

pub fn run(args: Args) -> Result<()> {
    let out_dir = resolve_out_path(&args.out_dir);
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;

    let dataset = load_dataset(&args.data)?;
    let d = dataset.batch.d();

    let kind = EstimatorKind::parse(&args.estimator)?;
    let mut config = TrainConfig::new(
        EstimatorSpec::new(kind, args.s).with_clamp(args.clamp),
        args.iters,
        args.batch,
        args.seed,
    );
    config.adam.lr = args.lr;
    config.adam.beta1 = args.beta1;
    config.adam.beta2 = args.beta2;
    config.adam.eps = args.eps;
    config.eval_every = args.eval_every;
    config.eval_samples = args.eval_samples;
    config.checkpoint_every = args.checkpoint_every;
    config.l1_strength = args.l1;

    let (mut trainer, mut model) = match &args.resume {
        Some(path) => Trainer::resume(config.clone(), path)?,
        None => {
            let model = match args.model.as_str() {
                "mlp" => {
                    if args.l1 > 0.0 {
                        bail!("--l1 applies only to --model ising");
                    }
                    let mut init = RngStream::new(args.seed, streams::INIT);
                    EnergyModel::Mlp(MlpEnergy::new(d, args.width, args.depth, &mut init)?)
                }
                "ising" => EnergyModel::Ising(IsingEnergy::learnable(
                    d,
                    Encoding::parse(&args.encoding)?,
                )?),
                _ => unreachable!("clap validates"),
            };
            let trainer = Trainer::new(config.clone(), &model)?;
            (trainer, model)
        }
    };

    let mut manifest = RunManifest::new("train");
    manifest.set("data", args.data.display());
    manifest.set("estimator", kind.name());
    manifest.set("s", args.s);
    manifest.set("clamp", args.clamp);
    manifest.set("batch", args.batch);
    manifest.set("iters", args.iters);
    manifest.set("lr", args.lr);
    manifest.set("seed", args.seed);
    manifest.set("model", model.signature());
    manifest.set("l1", args.l1);
    manifest.set("config_hash", format!("{:#x}", config.config_hash(&model.signature())));
    if let Some(r) = &args.resume {
        manifest.set("resumed_from", r.display());
    }

    let log_path = out_dir.join("metrics.log");
    let mut log_file = std::fs::File::create(&log_path)
        .with_context(|| format!("creating {}", log_path.display()))?;
    let mut on_record = |record: &ebm_core::train::MetricRecord| {
        let line = record.to_line();
        println!("{line}");
        let _ = writeln!(log_file, "{line}");
    };
    let mut sinks = TrainSinks {
        checkpoint_dir: Some(&out_dir),
        on_record: Some(&mut on_record),
    };
    trainer.run(&dataset.batch, &mut model, &mut sinks)?;

    let final_path = out_dir.join("checkpoint_final.ckpt");
    println!(
        "trained {} to iteration {}; final checkpoint at {}",
        kind.name(),
        trainer.iteration(),
        final_path.display()
    );
    manifest.add_output(&final_path);
    manifest.add_output(&log_path);
    manifest.write(&out_dir.join("manifest.txt"))?;
    Ok(())
}
