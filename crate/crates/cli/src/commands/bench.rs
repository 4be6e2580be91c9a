use crate::alloc_track;
use crate::config::resolve_out_path;
use crate::manifest::RunManifest;
use anyhow::{Context, Result};
use clap::Parser;
use ebm_core::bits::BitBatch;
use ebm_core::data::{encode_dataset, GrayCodec, Synthetic2D, Synthetic2DSpec, RANGE_HI, RANGE_LO};
use ebm_core::energy::{EnergyModel, MlpEnergy};
use ebm_core::rm::{batch_loss_and_grads, EstimatorKind, EstimatorSpec, DEFAULT_MAX_ROWS_PER_CHUNK};
use ebm_core::sampler::{streams, RngStream};
use ebm_core::tensor::{adam_step, AdamConfig, AdamState};
use std::path::PathBuf;
use std::time::Instant;

#[derive(Parser)]
pub struct Args {
    /// Data dimensions to sweep (each must be even)
    #[arg(long, value_delimiter = ',', default_values_t = vec![32usize, 64, 128, 256, 512, 1024, 2048])]
    dims: Vec<usize>,

    #[arg(long, default_value_t = 256)]
    batch: usize,

    /// Sampled terms for the importance-sampled estimator
    #[arg(long, default_value_t = 10)]
    s: usize,

    #[arg(long, default_value_t = 256)]
    width: usize,

    #[arg(long, default_value_t = 3)]
    depth: usize,

    /// Discarded warm-up batches per timing
    #[arg(long, default_value_t = 5)]
    warmup: usize,

    /// Measured batches per timing
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u32).range(1..))]
    measure: u32,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    #[arg(long)]
    out_dir: PathBuf,
}

struct Timing {
    ms_per_batch: f64,
    peak_mb: f64,
}

/// Average wall time of a full train step (loss, gradients, Adam update)
/// over `measure` batches after `warmup` discarded ones.
fn time_train_step(
    data: &BitBatch,
    kind: EstimatorKind,
    s: usize,
    width: usize,
    depth: usize,
    batch_size: usize,
    warmup: usize,
    measure: u32,
    seed: u64,
) -> Result<Timing> {
    let d = data.d();
    let mut init = RngStream::new(seed, streams::INIT);
    let mut model = EnergyModel::Mlp(MlpEnergy::new(d, width, depth, &mut init)?);
    let spec = EstimatorSpec::new(kind, s);
    let mut rng = RngStream::new(seed, streams::SAMPLER);
    let mut adam = AdamState::new(model.params());
    let adam_cfg = AdamConfig::default();
    let n_batches = data.n() / batch_size;
    let mut step = |i: usize| -> Result<()> {
        let start = (i % n_batches) * batch_size;
        let indices: Vec<usize> = (start..start + batch_size).collect();
        let batch = data.gather(&indices);
        let result = batch_loss_and_grads(
            &model,
            &batch,
            &spec,
            &mut rng,
            0.0,
            DEFAULT_MAX_ROWS_PER_CHUNK,
        )?;
        adam_step(model.params_mut(), &result.grads, &mut adam, &adam_cfg)?;
        Ok(())
    };
    for i in 0..warmup {
        step(i)?;
    }
    alloc_track::reset_peak();
    let t0 = Instant::now();
    for i in 0..measure as usize {
        step(warmup + i)?;
    }
    let elapsed = t0.elapsed().as_secs_f64();
    Ok(Timing {
        ms_per_batch: elapsed * 1e3 / measure as f64,
        peak_mb: alloc_track::peak_bytes() as f64 / (1024.0 * 1024.0),
    })
}

pub fn run(args: Args) -> Result<()> {
    let out_dir = resolve_out_path(&args.out_dir);
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;

    let mut manifest = RunManifest::new("bench");
    manifest.set("dims", args.dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(","));
    manifest.set("batch", args.batch);
    manifest.set("s", args.s);
    manifest.set("width", args.width);
    manifest.set("depth", args.depth);
    manifest.set("warmup", args.warmup);
    manifest.set("measure", args.measure);
    manifest.set("seed", args.seed);

    let header = format!(
        "{:>6} {:>16} {:>16} {:>9} {:>14} {:>14}",
        "d", "rm_full_ms", "rmwggis_adv_ms", "speedup", "rm_peak_mb", "adv_peak_mb"
    );
    let mut table = vec![
        "# per-batch train-step wall time; memory column is best-effort allocator peak (non-normative)".to_string(),
        header.clone(),
    ];
    println!("{header}");
    for &d in &args.dims {
        anyhow::ensure!(d >= 2 && d % 2 == 0, "dimension {d} must be even and >= 2");
        // enough rows for distinct batches without regenerating per step
        let n = args.batch * (args.warmup + args.measure as usize).clamp(4, 16);
        let dataset = encode_dataset(
            &Synthetic2DSpec {
                generator: Synthetic2D::TwoSpirals,
                n,
                codec: GrayCodec::new(d / 2, RANGE_LO, RANGE_HI)?,
            },
            args.seed,
        )?;
        let full = time_train_step(
            &dataset.batch,
            EstimatorKind::RmFull,
            0,
            args.width,
            args.depth,
            args.batch,
            args.warmup,
            args.measure,
            args.seed,
        )?;
        let adv = time_train_step(
            &dataset.batch,
            EstimatorKind::RmwggisAdvanced,
            args.s,
            args.width,
            args.depth,
            args.batch,
            args.warmup,
            args.measure,
            args.seed,
        )?;
        let line = format!(
            "{:>6} {:>16.2} {:>16.2} {:>9.2} {:>14.1} {:>14.1}",
            d,
            full.ms_per_batch,
            adv.ms_per_batch,
            full.ms_per_batch / adv.ms_per_batch,
            full.peak_mb,
            adv.peak_mb
        );
        println!("{line}");
        table.push(line);
    }

    let out = out_dir.join("bench.txt");
    std::fs::write(&out, table.join("\n") + "\n")?;
    manifest.add_output(&out);
    manifest.write(&out_dir.join("manifest.txt"))?;
    Ok(())
}
