//! ADAM with bias correction and a reduce-on-plateau learning-rate
//! scheduler.

use super::{ParamStore, Tensor};

/// Per-parameter first/second moment accumulators plus the step counter.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl AdamState {
    pub fn new(params: &ParamStore, lr: f64) -> Self {
        let zeros: Vec<Tensor> = params
            .tensors()
            .iter()
            .map(|t| Tensor::zeros(t.shape().clone()))
            .collect();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One ADAM update. `grads` must parallel the store's entries in order and
/// shape.
pub fn adam_step(params: &mut ParamStore, grads: &[Tensor], state: &mut AdamState) {
    assert_eq!(
        grads.len(),
        params.entry_count(),
        "gradient count must match parameter entries"
    );
    state.step += 1;
    let bc1 = 1.0 - state.beta1.powi(state.step as i32);
    let bc2 = 1.0 - state.beta2.powi(state.step as i32);
    for (idx, tensor) in params.tensors_mut().iter_mut().enumerate() {
        let g = &grads[idx];
        assert_eq!(
            g.shape(),
            tensor.shape(),
            "gradient shape mismatch at entry {idx}"
        );
        let m = state.m[idx].data_mut();
        let v = state.v[idx].data_mut();
        for (k, p) in tensor.data_mut().iter_mut().enumerate() {
            let gk = g.data()[k];
            m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * gk;
            v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * gk * gk;
            let m_hat = m[k] / bc1;
            let v_hat = v[k] / bc2;
            *p -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
        }
    }
}

/// Reduce-on-plateau: every check, compare against the best loss seen; after
/// `patience` consecutive non-improving checks, multiply the rate by
/// `factor`, never dropping below `floor`.
#[derive(Clone, Debug)]
pub struct PlateauScheduler {
    pub check_interval: usize,
    pub factor: f64,
    pub floor: f64,
    pub patience: usize,
    pub rel_threshold: f64,
    lr: f64,
    best_loss: f64,
    stagnant: usize,
}

impl PlateauScheduler {
    pub fn new(
        check_interval: usize,
        initial_lr: f64,
        factor: f64,
        floor: f64,
        patience: usize,
    ) -> Self {
        assert!(factor > 0.0 && factor < 1.0, "factor must be in (0, 1)");
        assert!(patience >= 1);
        Self {
            check_interval,
            factor,
            floor,
            patience,
            rel_threshold: 1e-4,
            lr: initial_lr,
            best_loss: f64::INFINITY,
            stagnant: 0,
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn best_loss(&self) -> f64 {
        self.best_loss
    }

    /// Call once per check interval; returns the (possibly reduced) rate.
    pub fn update(&mut self, current_loss: f64) -> f64 {
        let improved = current_loss < self.best_loss * (1.0 - self.rel_threshold);
        if improved {
            self.stagnant = 0;
        } else {
            self.stagnant += 1;
        }
        if current_loss < self.best_loss {
            self.best_loss = current_loss;
        }
        if self.stagnant >= self.patience {
            self.lr = (self.lr * self.factor).max(self.floor);
            self.stagnant = 0;
        }
        self.lr
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tape;

    fn single_param(value: f64) -> ParamStore {
        let mut p = ParamStore::new();
        p.insert("x", Tensor::scalar(value));
        p
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut params = single_param(0.7);
        let mut state = AdamState::new(&params, 1e-3);
        adam_step(&mut params, &[Tensor::scalar(0.0)], &mut state);
        assert_eq!(params.get("x").item(), 0.7);
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn first_step_matches_scalar_recursion_oracle() {
        // Independent recursion: m = (1-b1) g, v = (1-b2) g^2,
        // m_hat = g, v_hat = g^2, delta = lr * g / (|g| + eps).
        for g in [0.3, -2.0, 1e-4] {
            let lr = 1e-3;
            let mut params = single_param(1.0);
            let mut state = AdamState::new(&params, lr);
            adam_step(&mut params, &[Tensor::scalar(g)], &mut state);
            let expected_delta = lr * g / (g.abs() + 1e-8);
            let got = params.get("x").item() - 1.0;
            assert!(
                (got + expected_delta).abs() < 1e-15,
                "g={g}: moved {got}, oracle {expected_delta}"
            );
            // Bias-corrected first step moves by about lr in magnitude.
            assert!((got.abs() - lr).abs() < 1e-6);
        }
    }

    #[test]
    fn quadratic_descends_monotonically() {
        // Oracle: run the scalar recursion; loss x^2 must shrink step over
        // step at lr = 1e-3.
        let mut params = single_param(0.5);
        let mut state = AdamState::new(&params, 1e-3);
        let mut prev_loss = f64::INFINITY;
        for _ in 0..2 {
            let x = params.get("x").item();
            let mut tape = Tape::new();
            let xv = tape.input(Tensor::scalar(x));
            let loss = tape.square(xv);
            let grads = tape.backward(loss);
            let g = grads.wrt(xv).unwrap().clone();
            let loss_val = tape.value(loss).item();
            assert!(loss_val < prev_loss);
            prev_loss = loss_val;
            adam_step(&mut params, &[g], &mut state);
        }
        let final_loss = params.get("x").item().powi(2);
        assert!(final_loss < prev_loss);
    }

    #[test]
    fn loss_scaling_leaves_first_step_direction_unchanged() {
        for scale in [10.0, 1e4] {
            let g = -0.37;
            let mut a = single_param(0.0);
            let mut sa = AdamState::new(&a, 1e-3);
            adam_step(&mut a, &[Tensor::scalar(g)], &mut sa);
            let mut b = single_param(0.0);
            let mut sb = AdamState::new(&b, 1e-3);
            adam_step(&mut b, &[Tensor::scalar(scale * g)], &mut sb);
            let (da, db) = (a.get("x").item(), b.get("x").item());
            assert_eq!(da.signum(), db.signum());
            assert!((da - db).abs() < 1e-6, "magnitude shift beyond eps effects");
        }
    }

    #[test]
    fn scheduler_constant_while_improving() {
        let mut s = PlateauScheduler::new(500, 1e-3, 0.9, 1e-6, 1);
        let mut lr = s.lr();
        for k in 0..10 {
            lr = s.update(1.0 / (k + 1) as f64);
        }
        assert_eq!(lr, 1e-3);
    }

    #[test]
    fn scheduler_reduces_on_stagnation() {
        let mut s = PlateauScheduler::new(500, 1e-3, 0.9, 1e-6, 1);
        s.update(1.0);
        let lr = s.update(1.0);
        assert!((lr - 0.9e-3).abs() < 1e-18);
        let lr = s.update(1.0);
        assert!((lr - 0.81e-3).abs() < 1e-18);
        // A real improvement resets the stagnation counter.
        let lr = s.update(0.5);
        assert!((lr - 0.81e-3).abs() < 1e-18);
    }

    #[test]
    fn scheduler_respects_patience() {
        let mut s = PlateauScheduler::new(500, 1e-3, 0.9, 1e-6, 3);
        s.update(1.0);
        assert_eq!(s.update(1.0), 1e-3);
        assert_eq!(s.update(1.0), 1e-3);
        assert!((s.update(1.0) - 0.9e-3).abs() < 1e-18);
    }

    #[test]
    fn scheduler_floors_at_minimum_rate() {
        let mut s = PlateauScheduler::new(500, 1.1e-6, 0.9, 1e-6, 1);
        s.update(1.0);
        let lr = s.update(1.0);
        assert_eq!(lr, 1e-6, "0.99e-6 clamps to the floor");
        let lr = s.update(1.0);
        assert_eq!(lr, 1e-6, "rate must stay at the floor");
    }

    #[test]
    fn near_improvement_counts_as_stagnant() {
        let mut s = PlateauScheduler::new(500, 1e-3, 0.9, 1e-6, 1);
        s.update(1.0);
        // Within the 1e-4 relative threshold: not an improvement.
        let lr = s.update(1.0 - 0.5e-4);
        assert!((lr - 0.9e-3).abs() < 1e-18);
    }
}
