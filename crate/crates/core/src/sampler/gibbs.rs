use super::{streams, RngStream};
use crate::bits::{BitBatch, BitVector, Encoding};
use crate::energy::EnergyModel;
use crate::error::{CoreError, Result};
use crate::tensor::{sigmoid, Tensor};

/// One Gibbs chain: the current point and how many full sweeps it has taken.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub current: BitVector,
    pub sweep_count: u64,
}

impl ChainState {
    pub fn new(current: BitVector) -> ChainState {
        ChainState {
            current,
            sweep_count: 0,
        }
    }

    pub fn random(d: usize, rng: &mut RngStream) -> Result<ChainState> {
        Ok(ChainState::new(BitVector::random(d, rng)?))
    }
}

/// One systematic scan i = 1..d. Each bit is resampled from its conditional
/// p(x_i = 1 | rest) = sigmoid(E(x_i=0) - E(x_i=1)).
pub fn gibbs_sweep(model: &EnergyModel, state: &mut ChainState, rng: &mut RngStream) -> Result<()> {
    let d = model.dim();
    if state.current.d() != d {
        return Err(CoreError::DimensionMismatch {
            expected: d,
            got: state.current.d(),
        });
    }
    let mut e_cur = model.energy_one(&state.current)?;
    for i in 0..d {
        let e_flip = model.flip_energy(&state.current, e_cur, i)?;
        if !e_flip.is_finite() {
            return Err(CoreError::non_finite("gibbs flip energy"));
        }
        let cur_bit = state.current.get(i);
        // E with bit i clear / set
        let (e0, e1) = if cur_bit { (e_flip, e_cur) } else { (e_cur, e_flip) };
        let p_one = sigmoid(e0 - e1);
        let set = rng.uniform() < p_one;
        if set != cur_bit {
            state.current.flip_in_place(i);
            e_cur = e_flip;
        }
    }
    state.sweep_count += 1;
    Ok(())
}

/// Settings for [`gibbs_sample_set`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GibbsConfig {
    pub chains: usize,
    pub burn_in_sweeps: usize,
    pub thin_sweeps: usize,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        GibbsConfig {
            chains: 100,
            burn_in_sweeps: 1000,
            thin_sweeps: 10,
        }
    }
}

impl GibbsConfig {
    fn validate(&self) -> Result<()> {
        if self.chains == 0 || self.burn_in_sweeps == 0 || self.thin_sweeps == 0 {
            return Err(CoreError::InvalidArgument(
                "gibbs config values must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Draw `n` samples from the model's Boltzmann distribution: independent
/// chains from uniform-random starts, burn-in, then every `thin`-th state
/// collected round-robin by chain id until n samples are gathered.
///
/// Chains advance in lockstep so MLP energies batch across chains, but each
/// chain consumes only its own stream (`GIBBS_BASE + chain`), which makes
/// the result identical to running the chains one at a time.
pub fn gibbs_sample_set(
    model: &EnergyModel,
    n: usize,
    cfg: &GibbsConfig,
    seed: u64,
) -> Result<BitBatch> {
    cfg.validate()?;
    if n == 0 {
        return Err(CoreError::InvalidArgument("sample count must be positive".into()));
    }
    let d = model.dim();
    let mut rngs: Vec<RngStream> = (0..cfg.chains)
        .map(|c| RngStream::new(seed, streams::GIBBS_BASE + c as u64))
        .collect();
    let mut states: Vec<ChainState> = rngs
        .iter_mut()
        .map(|rng| ChainState::random(d, rng))
        .collect::<Result<_>>()?;

    let mut out = BitBatch::with_capacity(d, n)?;
    match model {
        EnergyModel::Mlp(mlp) => {
            let enc = Encoding::ZeroOne;
            let mut rows = Tensor::zeros(&[cfg.chains, d]);
            for (c, st) in states.iter().enumerate() {
                st.current
                    .write_f64_into(enc, &mut rows.data_mut()[c * d..(c + 1) * d]);
            }
            let mut e_cur = mlp.forward_rows(&rows)?;
            let sweep = |states: &mut [ChainState],
                             rngs: &mut [RngStream],
                             rows: &mut Tensor,
                             e_cur: &mut [f64]|
             -> Result<()> {
                for i in 0..d {
                    // flipped candidate rows for every chain, one batched pass
                    let mut flipped = rows.clone();
                    for c in 0..states.len() {
                        let v = flipped.data()[c * d + i];
                        flipped.data_mut()[c * d + i] = if v == 1.0 { 0.0 } else { 1.0 };
                    }
                    let e_flip = mlp.forward_rows(&flipped)?;
                    for c in 0..states.len() {
                        let cur_bit = states[c].current.get(i);
                        let (e0, e1) = if cur_bit {
                            (e_flip[c], e_cur[c])
                        } else {
                            (e_cur[c], e_flip[c])
                        };
                        let p_one = sigmoid(e0 - e1);
                        let set = rngs[c].uniform() < p_one;
                        if set != cur_bit {
                            states[c].current.flip_in_place(i);
                            rows.data_mut()[c * d + i] = enc.value(set);
                            e_cur[c] = e_flip[c];
                        }
                    }
                }
                for st in states.iter_mut() {
                    st.sweep_count += 1;
                }
                Ok(())
            };
            for _ in 0..cfg.burn_in_sweeps {
                sweep(&mut states, &mut rngs, &mut rows, &mut e_cur)?;
            }
            'collect: loop {
                for _ in 0..cfg.thin_sweeps {
                    sweep(&mut states, &mut rngs, &mut rows, &mut e_cur)?;
                }
                for st in &states {
                    out.push(&st.current)?;
                    if out.n() == n {
                        break 'collect;
                    }
                }
            }
        }
        EnergyModel::Ising(_) => {
            for _ in 0..cfg.burn_in_sweeps {
                for (st, rng) in states.iter_mut().zip(rngs.iter_mut()) {
                    gibbs_sweep(model, st, rng)?;
                }
            }
            'collect_ising: loop {
                for _ in 0..cfg.thin_sweeps {
                    for (st, rng) in states.iter_mut().zip(rngs.iter_mut()) {
                        gibbs_sweep(model, st, rng)?;
                    }
                }
                for st in &states {
                    out.push(&st.current)?;
                    if out.n() == n {
                        break 'collect_ising;
                    }
                }
            }
        }
    }
    Ok(out)
}
