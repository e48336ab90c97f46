use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f32, beta2: f32, eps: f32 },
}

impl OptimizerKind {
    pub const fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl Default for OptimizerKind {
    fn default() -> Self {
        Self::adam()
    }
}

/// First-order optimiser with L2 weight decay folded into the gradient.
#[derive(Clone, Debug)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub lr: f32,
    pub weight_decay: f32,
    steps: u64,
    moments: Vec<(Vec<f32>, Vec<f32>)>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f32, weight_decay: f32) -> Self {
        Self {
            kind,
            lr,
            weight_decay,
            steps: 0,
            moments: Vec::new(),
        }
    }

    pub fn sgd(lr: f32, weight_decay: f32) -> Self {
        Self::new(OptimizerKind::Sgd, lr, weight_decay)
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Tensor]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::Shape(format!("{} params but {} grads", params.len(), grads.len())));
        }
        for (p, g) in params.iter().zip(grads) {
            if p.dims() != g.dims() {
                return Err(Error::Shape(format!("param {:?} vs grad {:?}", p.dims(), g.dims())));
            }
        }
        if self.lr == 0.0 {
            self.steps += 1;
            return Ok(());
        }
        self.steps += 1;
        let (lr, wd) = (self.lr, self.weight_decay);
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    for (w, &d) in p.data_mut().iter_mut().zip(g.data()) {
                        *w -= lr * (d + wd * *w);
                    }
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                if self.moments.is_empty() {
                    self.moments = params.iter().map(|p| (vec![0.0; p.len()], vec![0.0; p.len()])).collect();
                }
                if self.moments.len() != params.len() {
                    return Err(Error::Shape("parameter list changed between steps".into()));
                }
                let t = self.steps as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.moments.iter_mut()) {
                    let data = p.data_mut();
                    for i in 0..data.len() {
                        let d = g.data()[i] + wd * data[i];
                        m[i] = beta1 * m[i] + (1.0 - beta1) * d;
                        v[i] = beta2 * v[i] + (1.0 - beta2) * d * d;
                        let m_hat = m[i] / c1;
                        let v_hat = v[i] / c2;
                        data[i] -= lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_lr_is_identity() {
        let mut p = Tensor::from_fn(&[3], |i| i as f32);
        let g = Tensor::filled(&[3], 5.0);
        for kind in [OptimizerKind::Sgd, OptimizerKind::adam()] {
            let before = p.clone();
            let mut opt = Optimizer::new(kind, 0.0, 1e-6);
            opt.step(&mut [&mut p], std::slice::from_ref(&g)).unwrap();
            assert_eq!(p, before);
        }
    }

    #[test]
    fn zero_grad_zero_decay_is_identity() {
        let mut p = Tensor::from_fn(&[3], |i| i as f32 - 1.0);
        let before = p.clone();
        let mut opt = Optimizer::new(OptimizerKind::adam(), 0.1, 0.0);
        opt.step(&mut [&mut p], &[Tensor::zeros(&[3])]).unwrap();
        let mut sgd = Optimizer::sgd(0.1, 0.0);
        sgd.step(&mut [&mut p], &[Tensor::zeros(&[3])]).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn three_sgd_steps_by_hand() {
        // p=1, g=0.5 constant, lr=0.1, wd=0.2:
        // p1 = 1 - 0.1(0.5 + 0.2)        = 0.93
        // p2 = 0.93 - 0.1(0.5 + 0.186)   = 0.8614
        // p3 = 0.8614 - 0.1(0.5 + 0.17228) = 0.794172
        let mut p = Tensor::scalar(1.0);
        let g = Tensor::scalar(0.5);
        let mut opt = Optimizer::sgd(0.1, 0.2);
        let mut seen = Vec::new();
        for _ in 0..3 {
            opt.step(&mut [&mut p], std::slice::from_ref(&g)).unwrap();
            seen.push(p.data()[0]);
        }
        for (got, want) in seen.iter().zip([0.93f32, 0.8614, 0.794172]) {
            assert!((got - want).abs() < 1e-6, "{got} vs {want}");
        }
    }

    #[test]
    fn first_adam_step_moves_by_lr() {
        // bias-corrected first step is lr·g/(|g|+eps) ≈ lr·sign(g)
        let mut p = Tensor::scalar(0.0);
        let mut opt = Optimizer::new(OptimizerKind::adam(), 1e-3, 0.0);
        opt.step(&mut [&mut p], &[Tensor::scalar(-4.0)]).unwrap();
        assert!((p.data()[0] - 1e-3).abs() < 1e-9);
    }

    #[test]
    fn mismatched_shapes_rejected() {
        let mut p = Tensor::zeros(&[2]);
        let mut opt = Optimizer::sgd(0.1, 0.0);
        assert!(opt.step(&mut [&mut p], &[Tensor::zeros(&[3])]).is_err());
    }
}
