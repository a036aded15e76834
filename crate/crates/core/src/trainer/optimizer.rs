use crate::encoder::Parameters;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;
pub const WEIGHT_DECAY: f64 = 0.01;

/// Adaptive-moment optimizer with decoupled weight decay. Decay applies to
/// matrices only; norm scales/shifts and biases are not decayed.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamW {
    pub learning_rate: f64,
    pub weight_decay: f64,
    step: u64,
    first: Vec<f64>,
    second: Vec<f64>,
}

impl AdamW {
    pub fn new(learning_rate: f64, num_values: usize) -> Self {
        AdamW {
            learning_rate,
            weight_decay: WEIGHT_DECAY,
            step: 0,
            first: vec![0.0; num_values],
            second: vec![0.0; num_values],
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut Parameters, grads: &Parameters) {
        self.step += 1;
        let t = self.step as i32;
        let correct1 = 1.0 - BETA1.powi(t);
        let correct2 = 1.0 - BETA2.powi(t);
        let lr = self.learning_rate;
        let mut offset = 0;
        for ((_, mut p), (_, g)) in params.tensors_mut().into_iter().zip(grads.tensors()) {
            let decay = if p.ndim() == 2 { self.weight_decay } else { 0.0 };
            for (x, gx) in p.iter_mut().zip(g.iter()) {
                let m = &mut self.first[offset];
                let v = &mut self.second[offset];
                *m = BETA1 * *m + (1.0 - BETA1) * gx;
                *v = BETA2 * *v + (1.0 - BETA2) * gx * gx;
                let update = (*m / correct1) / ((*v / correct2).sqrt() + EPSILON);
                *x -= lr * (update + decay * *x);
                offset += 1;
            }
        }
        debug_assert_eq!(offset, self.first.len());
    }
}
