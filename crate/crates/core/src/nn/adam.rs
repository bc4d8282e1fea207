use crate::error::{check_len, Result};

use super::MlpParams;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First/second moment accumulators mirroring the parameter layout.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(n_params: usize) -> Self {
        Self {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step: 0,
            beta1: BETA1,
            beta2: BETA2,
            eps: EPSILON,
        }
    }

    pub fn for_params(params: &MlpParams) -> Self {
        Self::new(params.len())
    }
}

/// One bias-corrected Adam update; parameters move against `grads`.
pub fn adam_step(
    params: &mut MlpParams,
    state: &mut AdamState,
    grads: &[f64],
    learn_rate: f64,
) -> Result<()> {
    check_len(params.len(), grads.len())?;
    check_len(params.len(), state.m.len())?;
    check_len(params.len(), state.v.len())?;
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    for (((p, m), v), &g) in params
        .as_mut_slice()
        .iter_mut()
        .zip(&mut state.m)
        .zip(&mut state.v)
        .zip(grads)
    {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= learn_rate * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}
