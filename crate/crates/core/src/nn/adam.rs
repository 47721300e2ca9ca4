use super::{check_len, NnError};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment estimates for one parameter group.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
    beta1_pow: f64,
    beta2_pow: f64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
            beta1_pow: 1.0,
            beta2_pow: 1.0,
        }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    lr: f64,
    cfg: &AdamConfig,
) -> Result<(), NnError> {
    check_len("adam gradients", params.len(), grads.len())?;
    check_len("adam state", params.len(), state.len())?;
    state.step += 1;
    state.beta1_pow *= cfg.beta1;
    state.beta2_pow *= cfg.beta2;
    let c1 = 1.0 - state.beta1_pow;
    let c2 = 1.0 - state.beta2_pow;
    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Rng;

    /// Textbook scalar Adam, one coordinate at a time.
    struct ScalarAdam {
        m: f64,
        v: f64,
        t: i32,
    }

    impl ScalarAdam {
        fn step(&mut self, p: f64, g: f64, lr: f64) -> f64 {
            let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
            self.t += 1;
            self.m = b1 * self.m + (1.0 - b1) * g;
            self.v = b2 * self.v + (1.0 - b2) * g * g;
            let mh = self.m / (1.0 - b1.powi(self.t));
            let vh = self.v / (1.0 - b2.powi(self.t));
            p - lr * mh / (vh.sqrt() + eps)
        }
    }

    #[test]
    fn zero_gradient_is_fixed_point() {
        let mut p = vec![0.3, -1.2, 5.0];
        let before = p.clone();
        let mut st = AdamState::new(3);
        for _ in 0..5 {
            adam_step(&mut p, &[0.0; 3], &mut st, 0.1, &AdamConfig::default()).unwrap();
        }
        assert_eq!(p, before);
        assert_eq!(st.step(), 5);
    }

    #[test]
    fn first_step_magnitude_is_lr() {
        let mut p = vec![1.0];
        let mut st = AdamState::new(1);
        let lr = 0.01;
        adam_step(&mut p, &[1.0], &mut st, lr, &AdamConfig::default()).unwrap();
        // m_hat = v_hat = 1 after bias correction
        let expected = lr / (1.0 + 1e-8);
        assert!(((1.0 - p[0]) - expected).abs() < 1e-15);
    }

    #[test]
    fn matches_scalar_oracle_on_quadratic() {
        // minimise (p - 3)^2 from p = 0 with noisy gradients
        let mut rng = Rng::new(21);
        let mut p = vec![0.0];
        let mut st = AdamState::new(1);
        let mut oracle = ScalarAdam { m: 0.0, v: 0.0, t: 0 };
        let mut q = 0.0;
        for _ in 0..10 {
            let noise = rng.uniform(-0.5, 0.5);
            let g = 2.0 * (p[0] - 3.0) + noise;
            let gq = 2.0 * (q - 3.0) + noise;
            adam_step(&mut p, &[g], &mut st, 0.05, &AdamConfig::default()).unwrap();
            q = oracle.step(q, gq, 0.05);
            assert!((p[0] - q).abs() < 1e-12, "{} vs {}", p[0], q);
        }
    }

    #[test]
    fn shape_mismatch() {
        let mut st = AdamState::new(2);
        let r = adam_step(&mut [0.0; 2], &[0.0; 3], &mut st, 0.1, &AdamConfig::default());
        assert!(matches!(r, Err(NnError::InputShape { .. })));
        let r = adam_step(&mut [0.0; 3], &[0.0; 3], &mut st, 0.1, &AdamConfig::default());
        assert!(r.is_err());
    }
}
