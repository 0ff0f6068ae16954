//! Plain SGD and Adam over flat f64 slices.
//!
//! Parameters live wherever the model keeps them; the trainer hands each
//! one a slot at registration time and passes `&mut [f64]` plus the
//! gradient at every step. Adam's bias correction uses one shared step
//! counter, which is correct here because every slot updates every step.

use crate::error::TrainError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone)]
struct Slot {
    m: Vec<f64>,
    v: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: u64,
    slots: Vec<Slot>,
}

pub type SlotId = usize;

impl Optimizer {
    pub fn new(kind: OptimizerKind) -> Self {
        Optimizer {
            kind,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            slots: Vec::new(),
        }
    }

    pub fn register(&mut self, len: usize) -> SlotId {
        self.slots.push(Slot {
            m: vec![0.0; len],
            v: vec![0.0; len],
        });
        self.slots.len() - 1
    }

    /// Call once per batch, before the slot updates of that batch.
    pub fn begin_step(&mut self) {
        self.step += 1;
    }

    pub fn update(
        &mut self,
        slot: SlotId,
        lr: f64,
        params: &mut [f64],
        grad: &[f64],
    ) -> Result<(), TrainError> {
        let state = &mut self.slots[slot];
        if params.len() != grad.len() || params.len() != state.m.len() {
            return Err(TrainError::BadConfig(format!(
                "optimizer slot {slot} holds {} values, got {} params and {} grads",
                state.m.len(),
                params.len(),
                grad.len()
            )));
        }
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= lr * g;
                }
            }
            OptimizerKind::Adam => {
                let t = self.step.max(1) as i32;
                let bc1 = 1.0 - self.beta1.powi(t);
                let bc2 = 1.0 - self.beta2.powi(t);
                for ((p, g), (m, v)) in params
                    .iter_mut()
                    .zip(grad)
                    .zip(state.m.iter_mut().zip(state.v.iter_mut()))
                {
                    *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                    *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                    let mhat = *m / bc1;
                    let vhat = *v / bc2;
                    *p -= lr * mhat / (vhat.sqrt() + self.eps);
                }
            }
        }
        Ok(())
    }
}
