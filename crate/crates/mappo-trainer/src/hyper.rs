/// Training hyperparameters with the defaults the rest of the crate is
/// tuned around. All fields are plain data so call sites can tweak a copy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparams {
    /// Discount factor.
    pub gamma: f64,
    /// Generalized-advantage-estimation mixing factor.
    pub lam: f64,
    /// Clip radius for both the probability ratio and the value update.
    pub clip_eps: f64,
    /// Weight of the value loss in the combined objective.
    pub value_coef: f64,
    /// Weight of the entropy bonus in the combined objective.
    pub entropy_coef: f64,
    /// Adam learning rate.
    pub lr: f64,
    /// Rollout length per environment per epoch.
    pub t_steps: usize,
    /// Number of environments stepped in parallel (round-robin).
    pub n_envs: usize,
    /// Optimization passes over each epoch's rollout.
    pub passes: usize,
    /// Minibatches per pass; environment-steps are shuffled, then split.
    pub minibatches: usize,
    /// Global gradient-norm ceiling applied before every Adam step.
    pub max_grad_norm: f64,
    /// Floor for the advantage-normalization denominator.
    pub adv_std_floor: f64,
    /// Linear learning-rate decay horizon, in epochs. After any warmup,
    /// epoch `t` (1-based) steps with `lr * (1 - (t-1-warmup)/(horizon-warmup))`,
    /// clamped at zero once the horizon is past. Zero keeps the rate
    /// constant.
    pub lr_anneal_epochs: usize,
    /// Linear learning-rate ramp-in, in epochs. Epoch `t` (1-based) steps
    /// with `lr * t/warmup` until the ramp completes. Zero disables the
    /// ramp. When both schedules are set the decay horizon counts from
    /// epoch 1 and must exceed the warmup.
    pub lr_warmup_epochs: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            gamma: 0.99,
            lam: 0.95,
            clip_eps: 0.2,
            value_coef: 1.0,
            entropy_coef: 0.01,
            lr: 3e-4,
            t_steps: 128,
            n_envs: 4,
            passes: 4,
            minibatches: 4,
            max_grad_norm: 0.5,
            adv_std_floor: 1e-8,
            lr_anneal_epochs: 0,
            lr_warmup_epochs: 0,
        }
    }
}

impl Hyperparams {
    /// Checks that every field is in its sane range. `lr` may be zero
    /// (useful for no-op update tests) but not negative.
    pub fn validate(&self) -> Result<(), String> {
        fn unit(name: &str, v: f64) -> Result<(), String> {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} must lie in [0, 1], got {v}"));
            }
            Ok(())
        }
        unit("gamma", self.gamma)?;
        unit("lam", self.lam)?;
        if !self.clip_eps.is_finite() || self.clip_eps <= 0.0 {
            return Err(format!("clip_eps must be positive, got {}", self.clip_eps));
        }
        if !self.value_coef.is_finite() || self.value_coef < 0.0 {
            return Err(format!(
                "value_coef must be non-negative, got {}",
                self.value_coef
            ));
        }
        if !self.entropy_coef.is_finite() || self.entropy_coef < 0.0 {
            return Err(format!(
                "entropy_coef must be non-negative, got {}",
                self.entropy_coef
            ));
        }
        if !self.lr.is_finite() || self.lr < 0.0 {
            return Err(format!("lr must be non-negative, got {}", self.lr));
        }
        if self.t_steps == 0 {
            return Err("t_steps must be positive".into());
        }
        if self.n_envs == 0 {
            return Err("n_envs must be positive".into());
        }
        if self.passes == 0 {
            return Err("passes must be positive".into());
        }
        if self.minibatches == 0 || self.minibatches > self.t_steps * self.n_envs {
            return Err(format!(
                "minibatches must lie in 1..={} (t_steps * n_envs), got {}",
                self.t_steps * self.n_envs,
                self.minibatches
            ));
        }
        if !self.max_grad_norm.is_finite() || self.max_grad_norm <= 0.0 {
            return Err(format!(
                "max_grad_norm must be positive, got {}",
                self.max_grad_norm
            ));
        }
        if !self.adv_std_floor.is_finite() || self.adv_std_floor <= 0.0 {
            return Err(format!(
                "adv_std_floor must be positive, got {}",
                self.adv_std_floor
            ));
        }
        if self.lr_anneal_epochs > 0
            && self.lr_warmup_epochs > 0
            && self.lr_anneal_epochs <= self.lr_warmup_epochs
        {
            return Err(format!(
                "lr_anneal_epochs ({}) must exceed lr_warmup_epochs ({}) when both are set",
                self.lr_anneal_epochs, self.lr_warmup_epochs
            ));
        }
        Ok(())
    }
}
