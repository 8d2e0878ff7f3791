use crate::error::{Error, Result};

/// Adam moments plus a cosine-annealed learning rate over `total_steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    step: usize,
    pub lr0: f64,
    pub betas: (f64, f64),
    pub eps: f64,
    total_steps: usize,
}

impl AdamState {
    pub fn new(num_params: usize, lr0: f64, total_steps: usize) -> Result<Self> {
        Self::with_hyper(num_params, lr0, (0.9, 0.999), 1e-8, total_steps)
    }

    pub fn with_hyper(
        num_params: usize,
        lr0: f64,
        betas: (f64, f64),
        eps: f64,
        total_steps: usize,
    ) -> Result<Self> {
        if !(lr0 > 0.0 && lr0.is_finite()) {
            return Err(Error::invalid(format!("learning rate must be positive, got {lr0}")));
        }
        if !(eps > 0.0) || total_steps == 0 {
            return Err(Error::invalid("eps and total_steps must be positive"));
        }
        if !(0.0..1.0).contains(&betas.0) || !(0.0..1.0).contains(&betas.1) {
            return Err(Error::invalid("betas must lie in [0, 1)"));
        }
        Ok(Self {
            first_moment: vec![0.0; num_params],
            second_moment: vec![0.0; num_params],
            step: 0,
            lr0,
            betas,
            eps,
            total_steps,
        })
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn total_steps(&self) -> usize {
        self.total_steps
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.second_moment
    }

    /// Learning rate used by the next update.
    pub fn current_lr(&self) -> f64 {
        cosine_lr(self.lr0, self.step, self.total_steps)
    }
}

/// `lr0 * (1 + cos(pi * step / total)) / 2`.
pub fn cosine_lr(lr0: f64, step: usize, total_steps: usize) -> f64 {
    let t = step as f64 / total_steps as f64;
    lr0 * 0.5 * (1.0 + (std::f64::consts::PI * t).cos())
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState) -> Result<()> {
    let n = state.first_moment.len();
    if params.len() != n || grads.len() != n {
        return Err(Error::DimensionMismatch {
            context: "adam step",
            expected: n,
            got: if params.len() != n { params.len() } else { grads.len() },
        });
    }
    if state.step >= state.total_steps {
        return Err(Error::invalid("adam schedule exhausted"));
    }
    let lr = state.current_lr();
    let (b1, b2) = state.betas;
    let t = (state.step + 1) as i32;
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for i in 0..n {
        let g = grads[i];
        let m = b1 * state.first_moment[i] + (1.0 - b1) * g;
        let v = b2 * state.second_moment[i] + (1.0 - b2) * g * g;
        state.first_moment[i] = m;
        state.second_moment[i] = v;
        let m_hat = m / c1;
        let v_hat = v / c2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + state.eps);
    }
    state.step += 1;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut s = AdamState::new(3, 0.1, 10).unwrap();
        let mut p = vec![1.0, -2.0, 0.5];
        adam_step(&mut p, &[0.0; 3], &mut s).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
        assert!(s.first_moment().iter().all(|&m| m == 0.0));
        assert!(s.second_moment().iter().all(|&v| v == 0.0));
        assert_eq!(s.step(), 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut s = AdamState::new(1, 0.1, 100).unwrap();
        let mut p = vec![0.0];
        adam_step(&mut p, &[1.0], &mut s).unwrap();
        // m_hat = v_hat = 1, so the step is lr / (1 + eps)
        assert!((p[0] + 0.1).abs() < 1e-8);
    }

    #[test]
    fn cosine_endpoint_is_near_zero() {
        let total = 1000;
        let lr = cosine_lr(0.1, total - 1, total);
        let expected = 0.1 * 0.5 * (1.0 + (std::f64::consts::PI * 999.0 / 1000.0).cos());
        assert_eq!(lr, expected);
        assert!(lr < 1e-6);
        assert_eq!(cosine_lr(0.1, 0, total), 0.1);
    }

    #[test]
    fn shape_and_schedule_errors() {
        let mut s = AdamState::new(2, 0.1, 1).unwrap();
        let mut p = vec![0.0; 2];
        assert!(adam_step(&mut p, &[0.0; 3], &mut s).is_err());
        adam_step(&mut p, &[1.0, 1.0], &mut s).unwrap();
        assert!(adam_step(&mut p, &[1.0, 1.0], &mut s).is_err());
        assert!(AdamState::new(1, 0.0, 1).is_err());
    }
}
