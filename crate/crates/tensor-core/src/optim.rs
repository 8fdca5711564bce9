use crate::error::TensorError;
use crate::store::ParamStore;
use crate::tape::GradMap;
use crate::tensor::Tensor;

/// Adam hyperparameters. Only the step size is typically tuned; the moment
/// decays and epsilon use the values virtually every implementation ships.
#[derive(Clone, Copy, Debug)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamParams {
    pub fn with_lr(lr: f64) -> Self {
        AdamParams {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment estimates plus the shared step counter.
///
/// Moments are stored per parameter in store order and updated in place, so
/// repeated runs from the same seed produce bit-identical trajectories.
#[derive(Clone, Debug)]
pub struct AdamState {
    params: AdamParams,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    step: u64,
}

impl AdamState {
    pub fn new(store: &ParamStore, params: AdamParams) -> Self {
        let m = store.iter().map(|(_, _, t)| Tensor::zeros(t.rows(), t.cols())).collect();
        let v = store.iter().map(|(_, _, t)| Tensor::zeros(t.rows(), t.cols())).collect();
        AdamState {
            params,
            m,
            v,
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn params(&self) -> AdamParams {
        self.params
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.params.lr = lr;
    }
}

/// One bias-corrected Adam update over every parameter in the store.
///
/// Every parameter must have a gradient of matching shape — a missing entry
/// means the caller forgot to register the parameter on the tape, which is
/// reported as an error rather than silently skipping the update.
pub fn adam_step(
    store: &mut ParamStore,
    grads: &GradMap,
    state: &mut AdamState,
) -> Result<(), TensorError> {
    // Validate everything first so a failed call leaves the store untouched.
    for (id, name, param) in store.iter() {
        let g = grads
            .get(id)
            .ok_or_else(|| TensorError::MissingGradient(name.to_string()))?;
        if g.shape() != param.shape() {
            return Err(TensorError::GradientShape {
                name: name.to_string(),
                grad_rows: g.rows(),
                grad_cols: g.cols(),
                param_rows: param.rows(),
                param_cols: param.cols(),
            });
        }
    }

    state.step += 1;
    let AdamParams {
        lr,
        beta1,
        beta2,
        eps,
    } = state.params;
    let bc1 = 1.0 - beta1.powi(state.step as i32);
    let bc2 = 1.0 - beta2.powi(state.step as i32);

    for idx in 0..store.len() {
        let id = crate::store::ParamId(idx);
        let g = grads.get(id).expect("validated above");
        let m = &mut state.m[idx];
        let v = &mut state.v[idx];
        let p = store.get_mut(id);
        for ((pv, mv), (vv, &gv)) in p
            .data_mut()
            .iter_mut()
            .zip(m.data_mut())
            .zip(v.data_mut().iter_mut().zip(g.data()))
        {
            *mv = beta1 * *mv + (1.0 - beta1) * gv;
            *vv = beta2 * *vv + (1.0 - beta2) * gv * gv;
            let m_hat = *mv / bc1;
            let v_hat = *vv / bc2;
            *pv -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

/// Scales all gradients so their global L2 norm does not exceed `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm(grads: &mut GradMap, max_norm: f64) -> f64 {
    let mut sq_sum = 0.0;
    for (_, g) in grads.iter() {
        for &v in g.data() {
            sq_sum += v * v;
        }
    }
    let norm = sq_sum.sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for (_, g) in grads.iter_mut() {
            for v in g.data_mut() {
                *v *= scale;
            }
        }
    }
    norm
}
