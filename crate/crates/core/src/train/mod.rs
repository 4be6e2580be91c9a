//! The training loop: shuffled epochs, per-batch estimator losses, Adam
//! updates, periodic evaluation, and bitwise-reproducible checkpointing.

mod checkpoint;

pub use checkpoint::{fnv1a, load_model, save_model, Container};

use crate::bits::BitBatch;
use crate::data::DatasetManifest;
use crate::energy::EnergyModel;
use crate::error::{CoreError, Result};
use crate::metrics::{mmd_linear, objective_value_eval, rmse_connectivity, MmdReport};
use crate::rm::{batch_loss_and_grads, EstimatorSpec, DEFAULT_MAX_ROWS_PER_CHUNK};
use crate::sampler::{gibbs_sample_set, streams, GibbsConfig, RngStream};
use crate::tensor::{adam_step, AdamConfig, AdamState, Tensor};
use std::path::Path;
use std::time::Instant;

/// Everything that determines a training trajectory, plus logging cadence.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub estimator: EstimatorSpec,
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub iterations: u64,
    pub seed: u64,
    /// Record metrics every this many iterations; 0 disables periodic
    /// evaluation (a final record is always emitted).
    pub eval_every: u64,
    /// Rows of the training set used for periodic objective evaluation.
    pub eval_samples: usize,
    /// Save `checkpoint_<iter>.ckpt` every this many iterations; 0 saves
    /// only the final checkpoint.
    pub checkpoint_every: u64,
    /// L1 penalty on the coupling matrix (learnable coupling models only).
    pub l1_strength: f64,
    pub max_rows_per_chunk: usize,
    /// Abort when the batch loss exceeds this or turns non-finite.
    pub divergence_limit: f64,
}

impl TrainConfig {
    pub fn new(estimator: EstimatorSpec, iterations: u64, batch_size: usize, seed: u64) -> Self {
        TrainConfig {
            estimator,
            adam: AdamConfig::default(),
            batch_size,
            iterations,
            seed,
            eval_every: 0,
            eval_samples: 1000,
            checkpoint_every: 0,
            l1_strength: 0.0,
            max_rows_per_chunk: DEFAULT_MAX_ROWS_PER_CHUNK,
            divergence_limit: 1e12,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.iterations == 0 {
            return Err(CoreError::InvalidArgument(
                "batch size and iterations must be positive".into(),
            ));
        }
        if self.l1_strength < 0.0 {
            return Err(CoreError::InvalidArgument(
                "l1 strength must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    /// Canonical text of the trajectory-determining fields. Logging cadence
    /// and the iteration target are excluded: resuming may extend a run.
    fn canonical(&self, model_signature: &str) -> String {
        format!(
            "estimator={};s={};clamp={};lr={};beta1={};beta2={};eps={};batch={};seed={};l1={};chunk={};divlimit={};model={}",
            self.estimator.kind.name(),
            self.estimator.s,
            self.estimator.exponent_clamp,
            self.adam.lr,
            self.adam.beta1,
            self.adam.beta2,
            self.adam.eps,
            self.batch_size,
            self.seed,
            self.l1_strength,
            self.max_rows_per_chunk,
            self.divergence_limit,
            model_signature,
        )
    }

    pub fn config_hash(&self, model_signature: &str) -> u64 {
        fnv1a(self.canonical(model_signature).as_bytes())
    }
}

/// One metric-log entry.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRecord {
    pub iteration: u64,
    pub loss: f64,
    pub clamp_events: u64,
    pub objective: Option<f64>,
    pub mmd_sq: Option<f64>,
    pub rmse: Option<f64>,
    pub wall_ms_per_iter: f64,
}

impl MetricRecord {
    /// Machine-readable line: `iter=.. loss=.. [objective=..] wall_ms=..`
    pub fn to_line(&self) -> String {
        let mut line = format!(
            "iter={} loss={} clamp_events={}",
            self.iteration, self.loss, self.clamp_events
        );
        if let Some(v) = self.objective {
            line.push_str(&format!(" objective={v}"));
        }
        if let Some(v) = self.mmd_sq {
            line.push_str(&format!(" mmd2={v}"));
        }
        if let Some(v) = self.rmse {
            line.push_str(&format!(" rmse={v}"));
        }
        line.push_str(&format!(" wall_ms={}", self.wall_ms_per_iter));
        line
    }
}

/// Where training writes checkpoints and streams records.
pub struct TrainSinks<'a> {
    pub checkpoint_dir: Option<&'a Path>,
    pub on_record: Option<&'a mut dyn FnMut(&MetricRecord)>,
}

impl<'a> TrainSinks<'a> {
    pub fn none() -> TrainSinks<'static> {
        TrainSinks {
            checkpoint_dir: None,
            on_record: None,
        }
    }
}

/// Resumable trainer: owns the optimizer state, rng positions, and epoch
/// cursor. The model lives outside so callers keep access between runs.
pub struct Trainer {
    config: TrainConfig,
    iteration: u64,
    adam: AdamState,
    sampler_rng: RngStream,
    epoch: u64,
    cursor: usize,
    permutation: Vec<usize>,
}

impl Trainer {
    pub fn new(config: TrainConfig, model: &EnergyModel) -> Result<Trainer> {
        config.validate()?;
        if !model.is_trainable() {
            return Err(CoreError::InvalidArgument(
                "model has no trainable parameters".into(),
            ));
        }
        config.estimator.validate(model.dim())?;
        Ok(Trainer {
            adam: AdamState::new(model.params()),
            sampler_rng: RngStream::new(config.seed, streams::SAMPLER),
            epoch: 0,
            cursor: 0,
            permutation: Vec::new(),
            iteration: 0,
            config,
        })
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    /// Epoch permutations are a pure function of (seed, epoch), so resume
    /// only needs the epoch counter and cursor.
    fn regenerate_permutation(&mut self, n: usize) {
        let mut rng = RngStream::new(self.config.seed, streams::SHUFFLE_BASE + self.epoch);
        self.permutation = (0..n).collect();
        rng.shuffle(&mut self.permutation);
    }

    fn next_batch_indices(&mut self, n: usize) -> Vec<usize> {
        if self.permutation.len() != n {
            self.regenerate_permutation(n);
        }
        if self.cursor + self.config.batch_size > n {
            self.epoch += 1;
            self.cursor = 0;
            self.regenerate_permutation(n);
        }
        let slice = &self.permutation[self.cursor..self.cursor + self.config.batch_size];
        self.cursor += self.config.batch_size;
        slice.to_vec()
    }

    /// Run until `config.iterations`, emitting records and checkpoints.
    /// Returns the metric log.
    pub fn run(
        &mut self,
        dataset: &BitBatch,
        model: &mut EnergyModel,
        sinks: &mut TrainSinks,
    ) -> Result<Vec<MetricRecord>> {
        if dataset.d() != model.dim() {
            return Err(CoreError::DimensionMismatch {
                expected: model.dim(),
                got: dataset.d(),
            });
        }
        if dataset.n() < self.config.batch_size {
            return Err(CoreError::InvalidArgument(format!(
                "batch size {} exceeds dataset size {}",
                self.config.batch_size,
                dataset.n()
            )));
        }
        let eval_subset = dataset.take_prefix(self.config.eval_samples.max(1));
        let mut log = Vec::new();
        let mut window_start = Instant::now();
        let mut window_iters = 0u64;
        while self.iteration < self.config.iterations {
            let indices = self.next_batch_indices(dataset.n());
            let batch = dataset.gather(&indices);
            let result = batch_loss_and_grads(
                model,
                &batch,
                &self.config.estimator,
                &mut self.sampler_rng,
                self.config.l1_strength,
                self.config.max_rows_per_chunk,
            )?;
            let loss = result.loss.value;
            if !loss.is_finite() || loss > self.config.divergence_limit {
                if let Some(dir) = sinks.checkpoint_dir {
                    let _ = self.save_checkpoint(model, &dir.join("checkpoint_diverged.ckpt"));
                }
                return Err(CoreError::Diverged {
                    iteration: self.iteration,
                    loss,
                });
            }
            adam_step(model.params_mut(), &result.grads, &mut self.adam, &self.config.adam)?;
            self.iteration += 1;
            window_iters += 1;

            let is_final = self.iteration == self.config.iterations;
            let at_eval = self.config.eval_every > 0
                && self.iteration.is_multiple_of(self.config.eval_every);
            if at_eval || is_final {
                let objective = objective_value_eval(
                    model,
                    &eval_subset,
                    self.config.estimator.exponent_clamp,
                )?;
                let record = MetricRecord {
                    iteration: self.iteration,
                    loss,
                    clamp_events: result.loss.clamp_events,
                    objective: Some(objective),
                    mmd_sq: None,
                    rmse: None,
                    wall_ms_per_iter: window_start.elapsed().as_secs_f64() * 1e3
                        / window_iters.max(1) as f64,
                };
                if let Some(cb) = sinks.on_record.as_deref_mut() {
                    cb(&record);
                }
                log.push(record);
                window_start = Instant::now();
                window_iters = 0;
            }
            let at_ckpt = self.config.checkpoint_every > 0
                && self.iteration.is_multiple_of(self.config.checkpoint_every);
            if let Some(dir) = sinks.checkpoint_dir {
                if at_ckpt {
                    self.save_checkpoint(
                        model,
                        &dir.join(format!("checkpoint_{:08}.ckpt", self.iteration)),
                    )?;
                }
                if is_final {
                    self.save_checkpoint(model, &dir.join("checkpoint_final.ckpt"))?;
                }
            }
        }
        Ok(log)
    }

    /// Bit-exact trainer checkpoint: model, optimizer moments, iteration,
    /// rng position, epoch cursor, config hash.
    pub fn save_checkpoint(&self, model: &EnergyModel, path: &Path) -> Result<()> {
        let mut manifest = DatasetManifest::new();
        manifest.set("format", "trainer");
        manifest.set("iteration", self.iteration);
        manifest.set("adam_step", self.adam.step);
        manifest.set("config_hash", self.config.config_hash(&model.signature()));
        manifest.set("seed", self.config.seed);
        manifest.set("sampler_word_pos", self.sampler_rng.word_pos());
        manifest.set("epoch", self.epoch);
        manifest.set("cursor", self.cursor);
        let mut c = Container::new(manifest);
        checkpoint::encode_model(&mut c, model)?;
        for (idx, (name, _)) in model.params().iter().enumerate() {
            c.push_array(format!("adam.m.{name}"), self.adam.m[idx].data().to_vec());
            c.push_array(format!("adam.v.{name}"), self.adam.v[idx].data().to_vec());
        }
        c.save(path)
    }

    /// Restore a trainer and its model from a checkpoint saved by
    /// [`Trainer::save_checkpoint`]. The config must hash to the same value
    /// the checkpoint recorded.
    pub fn resume(config: TrainConfig, path: &Path) -> Result<(Trainer, EnergyModel)> {
        config.validate()?;
        let c = Container::load(path)?;
        if c.manifest.get("format") != Some("trainer") {
            return Err(CoreError::Format("not a trainer checkpoint".into()));
        }
        let model = checkpoint::decode_model(&c)?;
        let expected = config.config_hash(&model.signature());
        let found = c.manifest_u64("config_hash")?;
        if found != expected {
            return Err(CoreError::ConfigHashMismatch { expected, found });
        }
        let mut adam = AdamState::new(model.params());
        adam.step = c.manifest_u64("adam_step")?;
        for (idx, (name, t)) in model.params().iter().enumerate() {
            let m = c.array(&format!("adam.m.{name}"))?;
            let v = c.array(&format!("adam.v.{name}"))?;
            adam.m[idx] = Tensor::from_vec(t.shape(), m.to_vec())?;
            adam.v[idx] = Tensor::from_vec(t.shape(), v.to_vec())?;
        }
        let trainer = Trainer {
            iteration: c.manifest_u64("iteration")?,
            adam,
            sampler_rng: RngStream::restore(
                config.seed,
                streams::SAMPLER,
                c.manifest_u128("sampler_word_pos")?,
            ),
            epoch: c.manifest_u64("epoch")?,
            cursor: c.manifest_usize("cursor")?,
            permutation: Vec::new(),
            config,
        };
        Ok((trainer, model))
    }
}

/// Which metrics [`evaluate`] computes.
#[derive(Debug, Clone)]
pub struct EvalOptions {
    /// Rows of the dataset used for the objective (prefix).
    pub objective_samples: usize,
    pub exponent_clamp: f64,
    /// Draw this many model samples via Gibbs and report MMD^2 against the
    /// same number of dataset rows.
    pub mmd: Option<MmdEvalOptions>,
    /// True coupling matrix for recovery RMSE.
    pub rmse_against: Option<Tensor>,
}

#[derive(Debug, Clone)]
pub struct MmdEvalOptions {
    pub n_samples: usize,
    pub gibbs: GibbsConfig,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub objective: f64,
    pub mmd: Option<MmdReport>,
    pub rmse: Option<f64>,
}

/// Post-hoc evaluation of a trained model against a dataset.
pub fn evaluate(
    model: &EnergyModel,
    dataset: &BitBatch,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    let subset = dataset.take_prefix(opts.objective_samples.max(1));
    let objective = objective_value_eval(model, &subset, opts.exponent_clamp)?;
    let mmd = match &opts.mmd {
        Some(m) => {
            let drawn = gibbs_sample_set(model, m.n_samples, &m.gibbs, m.seed)?;
            let reference = dataset.take_prefix(m.n_samples);
            Some(mmd_linear(&drawn, &reference)?)
        }
        None => None,
    };
    let rmse = match &opts.rmse_against {
        Some(j_true) => {
            let j_hat = match model {
                EnergyModel::Ising(m) => m.dense_coupling(),
                _ => {
                    return Err(CoreError::InvalidArgument(
                        "coupling RMSE needs a coupling model".into(),
                    ))
                }
            };
            Some(rmse_connectivity(&j_hat, j_true)?)
        }
        None => None,
    };
    Ok(EvalReport {
        objective,
        mmd,
        rmse,
    })
}
