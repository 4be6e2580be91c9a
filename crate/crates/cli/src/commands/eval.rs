use crate::config::resolve_out_path;
use crate::manifest::{manifest_path_for, RunManifest};
use anyhow::{bail, Context, Result};
use clap::Parser;
use ebm_core::data::load_dataset;
use ebm_core::energy::EnergyModel;
use ebm_core::rm::DEFAULT_EXPONENT_CLAMP;
use ebm_core::sampler::GibbsConfig;
use ebm_core::train::{evaluate, load_model, EvalOptions, MmdEvalOptions};
use std::path::PathBuf;

#[derive(Parser)]
pub struct Args {
    /// Trained checkpoint (trainer or model format)
    #[arg(long)]
    checkpoint: PathBuf,

    /// Reference dataset
    #[arg(long)]
    data: PathBuf,

    #[arg(long, value_parser = ["mmd", "objective", "rmse"])]
    metric: String,

    /// Sample count: Gibbs draws for mmd, dataset rows for objective
    #[arg(long, default_value_t = 4000)]
    n_samples: usize,

    /// Gibbs chains (mmd)
    #[arg(long, default_value_t = 100)]
    chains: usize,

    /// Gibbs burn-in sweeps (mmd)
    #[arg(long, default_value_t = 1000)]
    burn_in: usize,

    /// Gibbs thinning sweeps (mmd)
    #[arg(long, default_value_t = 10)]
    thin: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    #[arg(long, default_value_t = DEFAULT_EXPONENT_CLAMP)]
    clamp: f64,

    /// True-model checkpoint for rmse
    #[arg(long)]
    true_model: Option<PathBuf>,

    /// Report path (default: <checkpoint>.eval_<metric>.txt)
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(args: Args) -> Result<()> {
    let model = load_model(&args.checkpoint)?;
    let dataset = load_dataset(&args.data)?;
    if args.n_samples == 0 {
        bail!("--n-samples must be positive");
    }

    let mut opts = EvalOptions {
        objective_samples: args.n_samples,
        exponent_clamp: args.clamp,
        mmd: None,
        rmse_against: None,
    };
    match args.metric.as_str() {
        "objective" => {}
        "mmd" => {
            opts.mmd = Some(MmdEvalOptions {
                n_samples: args.n_samples,
                gibbs: GibbsConfig {
                    chains: args.chains,
                    burn_in_sweeps: args.burn_in,
                    thin_sweeps: args.thin,
                },
                seed: args.seed,
            });
        }
        "rmse" => {
            let path = args
                .true_model
                .as_ref()
                .context("--metric rmse requires --true-model")?;
            let true_model = load_model(path)?;
            let j_true = match &true_model {
                EnergyModel::Ising(m) => m.dense_coupling(),
                _ => bail!("--true-model must be a coupling model"),
            };
            opts.rmse_against = Some(j_true);
        }
        _ => unreachable!("clap validates"),
    }

    let report = evaluate(&model, &dataset.batch, &opts)?;

    let mut lines = vec![
        format!("metric={}", args.metric),
        format!("checkpoint={}", args.checkpoint.display()),
        format!("data={}", args.data.display()),
        format!("n_samples={}", args.n_samples),
        format!("objective={}", report.objective),
    ];
    if let Some(mmd) = &report.mmd {
        lines.push(format!("mmd2={}", mmd.mmd_sq));
        lines.push(format!("mmd_kernel={}", mmd.kernel));
        lines.push(format!("mmd_n_x={} mmd_n_y={}", mmd.n_x, mmd.n_y));
    }
    if let Some(rmse) = report.rmse {
        lines.push(format!("rmse={rmse}"));
    }
    let text = lines.join("\n") + "\n";
    print!("{text}");

    let out = resolve_out_path(&args.out.clone().unwrap_or_else(|| {
        let mut name = args
            .checkpoint
            .file_name()
            .unwrap_or_default()
            .to_os_string();
        name.push(format!(".eval_{}.txt", args.metric));
        args.checkpoint.with_file_name(name)
    }));
    std::fs::write(&out, &text).with_context(|| format!("writing {}", out.display()))?;

    let mut manifest = RunManifest::new("eval");
    manifest.set("metric", &args.metric);
    manifest.set("checkpoint", args.checkpoint.display());
    manifest.set("data", args.data.display());
    manifest.set("n_samples", args.n_samples);
    manifest.set("seed", args.seed);
    if args.metric == "mmd" {
        manifest.set("chains", args.chains);
        manifest.set("burn_in", args.burn_in);
        manifest.set("thin", args.thin);
    }
    manifest.add_output(&out);
    manifest.write(&manifest_path_for(&out))?;
    Ok(())
}
