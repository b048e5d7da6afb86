//! Adam with decoupled weight decay and a linear warmup/decay schedule.

/// `lr * step / warmup` during warmup, then linear decay to 0 at
/// `total_steps`.
pub fn lr_at_step(step: usize, total_steps: usize, base_lr: f64, warmup_ratio: f64) -> f64 {
    if total_steps == 0 {
        return base_lr;
    }
    let step = step.min(total_steps) as f64;
    let total = total_steps as f64;
    let warmup = warmup_ratio * total;
    if step < warmup {
        base_lr * step / warmup
    } else if total > warmup {
        base_lr * (total - step) / (total - warmup)
    } else {
        base_lr
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates for a list of parameter tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new<'a>(shapes: impl IntoIterator<Item = &'a Vec<f64>>, config: AdamConfig) -> Self {
        let (m, v) = shapes
            .into_iter()
            .map(|t| (vec![0.0; t.len()], vec![0.0; t.len()]))
            .unzip();
        Self { config, m, v }
    }

    /// One update at `step >= 1`:
    /// `theta -= lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * theta)`.
    pub fn step(
        &mut self,
        params: Vec<&mut Vec<f64>>,
        grads: Vec<&Vec<f64>>,
        step: usize,
        lr: f64,
        weight_decay: f64,
    ) {
        assert!(step >= 1, "Adam steps are 1-based");
        assert_eq!(params.len(), self.m.len(), "parameter list changed");
        let AdamConfig { beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - beta1.powi(step as i32);
        let bc2 = 1.0 - beta2.powi(step as i32);
        for (((p, g), m), v) in params
            .into_iter()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for i in 0..p.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= lr * (m_hat / (v_hat.sqrt() + eps) + weight_decay * p[i]);
            }
        }
    }
}
