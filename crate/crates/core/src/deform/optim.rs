use super::DeformError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerMethod {
    /// Heavy-ball SGD: `buf = μ buf + g; x -= lr buf`.
    SgdMomentum { momentum: f64 },
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerMethod {
    pub fn sgd(momentum: f64) -> Self {
        Self::SgdMomentum { momentum }
    }

    pub fn adam() -> Self {
        Self::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Stateful first-order optimizer over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Optimizer {
    method: OptimizerMethod,
    learning_rate: f64,
    first: Vec<f64>,
    second: Vec<f64>,
    t: u32,
}

impl Optimizer {
    pub fn new(method: OptimizerMethod, learning_rate: f64, num_params: usize) -> Result<Self, DeformError> {
        if !(learning_rate > 0.0) {
            return Err(DeformError::Config(format!("learning rate must be positive, got {learning_rate}")));
        }
        let second = match method {
            OptimizerMethod::Adam { .. } => vec![0.0; num_params],
            OptimizerMethod::SgdMomentum { .. } => Vec::new(),
        };
        Ok(Self { method, learning_rate, first: vec![0.0; num_params], second, t: 0 })
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), grad.len());
        self.t += 1;
        let lr = self.learning_rate;
        match self.method {
            OptimizerMethod::SgdMomentum { momentum } => {
                for ((x, b), g) in params.iter_mut().zip(self.first.iter_mut()).zip(grad) {
                    *b = momentum * *b + g;
                    *x -= lr * *b;
                }
            }
            OptimizerMethod::Adam { beta1, beta2, eps } => {
                let c1 = 1.0 - beta1.powi(self.t as i32);
                let c2 = 1.0 - beta2.powi(self.t as i32);
                for (((x, m), v), g) in params.iter_mut().zip(self.first.iter_mut()).zip(self.second.iter_mut()).zip(grad) {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    *x -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                }
            }
        }
    }
}
