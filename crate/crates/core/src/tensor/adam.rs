use super::{GradRecord, ParamSet, Tensor};
use crate::error::{CoreError, Result};

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment buffers plus the step counter, aligned with a
/// [`ParamSet`] entry for entry.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &ParamSet) -> AdamState {
        AdamState {
            m: params.iter().map(|(_, t)| Tensor::zeros(t.shape())).collect(),
            v: params.iter().map(|(_, t)| Tensor::zeros(t.shape())).collect(),
            step: 0,
        }
    }
}

/// One Adam update with bias correction. Mutates `params` and `state`.
pub fn adam_step(
    params: &mut ParamSet,
    grads: &GradRecord,
    state: &mut AdamState,
    cfg: &AdamConfig,
) -> Result<()> {
    grads.check_matches(params)?;
    if state.m.len() != params.len() {
        return Err(CoreError::ShapeMismatch(
            "optimizer state entry count differs from parameter set".into(),
        ));
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for idx in 0..params.len() {
        let g = grads.tensor_at(idx).data();
        let m = state.m[idx].data_mut();
        let v = state.v[idx].data_mut();
        let p = params.tensor_at_mut(idx).data_mut();
        for i in 0..p.len() {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
        params.tensor_at(idx).check_finite("adam-updated parameter")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_param(values: Vec<f64>) -> ParamSet {
        let mut p = ParamSet::new();
        let n = values.len();
        p.push("w", Tensor::from_vec(&[n], values).unwrap());
        p
    }

    #[test]
    fn zero_grads_leave_params_unchanged_and_moments_decay() {
        let mut params = one_param(vec![1.0, -2.0, 3.0]);
        let before = params.tensor_at(0).clone();
        let grads = GradRecord::zeros_like(&params);
        let mut state = AdamState::new(&params);
        adam_step(&mut params, &grads, &mut state, &AdamConfig::default()).unwrap();
        assert_eq!(params.tensor_at(0), &before);
        assert_eq!(state.step, 1);

        // from a nonzero moment, a zero-grad step decays m by beta1
        state.m[0].data_mut()[0] = 1.0;
        adam_step(&mut params, &grads, &mut state, &AdamConfig::default()).unwrap();
        assert!((state.m[0].data()[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn lr_zero_is_identity() {
        let mut params = one_param(vec![0.5, 0.25]);
        let before = params.tensor_at(0).clone();
        let grads = GradRecord::from_entries(vec![(
            "w".into(),
            Tensor::from_vec(&[2], vec![10.0, -3.0]).unwrap(),
        )]);
        let mut state = AdamState::new(&params);
        let cfg = AdamConfig {
            lr: 0.0,
            ..AdamConfig::default()
        };
        for _ in 0..5 {
            adam_step(&mut params, &grads, &mut state, &cfg).unwrap();
        }
        assert_eq!(params.tensor_at(0), &before);
    }

    #[test]
    fn first_step_is_sign_scaled() {
        // After one step: m_hat = g, v_hat = g^2, delta = -lr * g / (|g| + eps)
        let g = vec![2.0, -0.3, 1e-3];
        let mut params = one_param(vec![0.0, 0.0, 0.0]);
        let grads = GradRecord::from_entries(vec![(
            "w".into(),
            Tensor::from_vec(&[3], g.clone()).unwrap(),
        )]);
        let mut state = AdamState::new(&params);
        let cfg = AdamConfig::default();
        adam_step(&mut params, &grads, &mut state, &cfg).unwrap();
        for (p, gv) in params.tensor_at(0).data().iter().zip(g.iter()) {
            let want = -cfg.lr * gv / (gv.abs() + cfg.eps);
            assert!((p - want).abs() < 1e-15, "got {p}, want {want}");
        }
    }

    #[test]
    fn second_step_moment_recurrence() {
        let g = 0.7;
        let mut params = one_param(vec![0.0]);
        let grads = GradRecord::from_entries(vec![(
            "w".into(),
            Tensor::from_vec(&[1], vec![g]).unwrap(),
        )]);
        let mut state = AdamState::new(&params);
        let cfg = AdamConfig::default();
        adam_step(&mut params, &grads, &mut state, &cfg).unwrap();
        let m1 = state.m[0].data()[0];
        adam_step(&mut params, &grads, &mut state, &cfg).unwrap();
        let m2 = state.m[0].data()[0];
        assert!((m1 - (1.0 - cfg.beta1) * g).abs() < 1e-15);
        assert!((m2 - (cfg.beta1 * m1 + (1.0 - cfg.beta1) * g)).abs() < 1e-15);
        let v2 = state.v[0].data()[0];
        let v1 = (1.0 - cfg.beta2) * g * g;
        assert!((v2 - (cfg.beta2 * v1 + (1.0 - cfg.beta2) * g * g)).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut params = one_param(vec![1.0, 2.0]);
        let grads = GradRecord::from_entries(vec![(
            "w".into(),
            Tensor::from_vec(&[3], vec![0.0; 3]).unwrap(),
        )]);
        let mut state = AdamState::new(&params);
        assert!(adam_step(&mut params, &grads, &mut state, &AdamConfig::default()).is_err());
    }
}
