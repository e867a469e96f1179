//! Adam optimizer over a parameter set, with global-norm gradient
//! clipping.

use crate::params::ParamSet;
use crate::tensor::Scalar;

#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Global gradient-norm ceiling; clipping is logged when it fires.
    pub clip_norm: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            clip_norm: Some(5.0),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct StepInfo {
    pub grad_norm: f64,
    pub clipped: bool,
}

/// First/second-moment state aligned with the trainable parameters of one
/// model, in registration order.
pub struct Adam<T: Scalar> {
    pub config: AdamConfig,
    pub step_count: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(params: &ParamSet<T>, config: AdamConfig) -> Self {
        let m = params.trainable().map(|p| vec![T::zero(); p.numel()]).collect();
        let v = params.trainable().map(|p| vec![T::zero(); p.numel()]).collect();
        Adam {
            config,
            step_count: 0,
            m,
            v,
        }
    }

    /// One update from the gradients accumulated on `params`; consumes
    /// (zeroes) them. Parameters without a gradient this step keep their
    /// zero moments and stay bit-identical on the first step.
    pub fn step(&mut self, params: &ParamSet<T>) -> StepInfo {
        for p in params.trainable() {
            p.clear_frozen_row_grads();
        }
        let grads: Vec<Vec<T>> = params
            .trainable()
            .map(|p| p.tensor().grad().unwrap_or_else(|| vec![T::zero(); p.numel()]))
            .collect();

        let mut norm_sq = 0.0f64;
        for g in &grads {
            for &v in g {
                let v = v.as_f64();
                norm_sq += v * v;
            }
        }
        let grad_norm = norm_sq.sqrt();
        let mut scale = 1.0f64;
        let mut clipped = false;
        if let Some(clip) = self.config.clip_norm {
            if grad_norm > clip {
                scale = clip / grad_norm;
                clipped = true;
                log::debug!("gradient norm {grad_norm:.3} clipped to {clip}");
            }
        }

        self.step_count += 1;
        let t = self.step_count as i32;
        let b1 = T::from_f64(self.config.beta1);
        let b2 = T::from_f64(self.config.beta2);
        let one = T::one();
        let bias1 = T::from_f64(1.0 - self.config.beta1.powi(t));
        let bias2 = T::from_f64(1.0 - self.config.beta2.powi(t));
        let lr = T::from_f64(self.config.learning_rate);
        let eps = T::from_f64(self.config.epsilon);
        let scale_t = T::from_f64(scale);

        for ((p, g), (m, v)) in params
            .trainable()
            .zip(grads.iter())
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            p.tensor().update_values(|values| {
                for i in 0..values.len() {
                    let gi = g[i] * scale_t;
                    m[i] = b1 * m[i] + (one - b1) * gi;
                    v[i] = b2 * v[i] + (one - b2) * gi * gi;
                    let m_hat = m[i] / bias1;
                    let v_hat = v[i] / bias2;
                    values[i] = values[i] - lr * m_hat / (v_hat.sqrt() + eps);
                }
            });
        }
        params.zero_grads();
        StepInfo { grad_norm, clipped }
    }

    /// (moment-1, moment-2) snapshots for checkpointing.
    pub fn moments(&self) -> (&[Vec<T>], &[Vec<T>]) {
        (&self.m, &self.v)
    }

    pub fn restore_moments(&mut self, m: Vec<Vec<T>>, v: Vec<Vec<T>>, step_count: u64) {
        self.m = m;
        self.v = v;
        self.step_count = step_count;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Init;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_learning_rate_leaves_parameters_bit_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut set = ParamSet::<f64>::new();
        let p = set.create("w", vec![4], Init::Xavier, &mut rng).unwrap();
        let before = p.tensor().to_vec();
        p.tensor().accumulate_grad(&[0.5, -0.5, 1.0, 2.0]);
        let mut adam = Adam::new(&set, AdamConfig { learning_rate: 0.0, ..AdamConfig::default() });
        adam.step(&set);
        assert_eq!(p.tensor().to_vec(), before);
    }

    #[test]
    fn first_step_moves_only_touched_coordinates() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut set = ParamSet::<f64>::new();
        let p = set.create("emb", vec![3, 2], Init::Uniform(-0.1, 0.1), &mut rng).unwrap();
        let before = p.tensor().to_vec();
        // only row 1 has gradient
        p.tensor().accumulate_grad(&[0.0, 0.0, 0.3, -0.3, 0.0, 0.0]);
        let mut adam = Adam::new(&set, AdamConfig::default());
        adam.step(&set);
        let after = p.tensor().to_vec();
        assert_eq!(after[0], before[0]);
        assert_eq!(after[5], before[5]);
        assert_ne!(after[2], before[2]);
        assert_ne!(after[3], before[3]);
    }

    #[test]
    fn embedding_step_touches_only_gathered_rows() {
        // End to end: gather rows, backprop a loss, take one Adam step;
        // the padding row stays frozen and ungathered rows stay put.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut set = ParamSet::<f64>::new();
        let emb =
            crate::tensor::nn::Embedding::with_padding_row(&mut set, "emb", 6, 3, &mut rng)
                .unwrap();
        let before = emb.table.tensor().to_vec();
        let gathered = emb.lookup(&[0, 2, 4]).unwrap();
        let pooled = gathered.mean_rows(3).unwrap();
        pooled.dot(&pooled).unwrap().backward().unwrap();
        let mut adam = Adam::new(&set, AdamConfig { learning_rate: 0.1, ..AdamConfig::default() });
        adam.step(&set);
        let after = emb.table.tensor().to_vec();
        for row in 0..6 {
            let changed = (0..3).any(|j| before[row * 3 + j] != after[row * 3 + j]);
            match row {
                2 | 4 => assert!(changed, "gathered row {row} should move"),
                _ => assert!(!changed, "row {row} (incl. frozen padding) must not move"),
            }
        }
    }

    #[test]
    fn clipping_rescales_update_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut set = ParamSet::<f64>::new();
        let p = set.create("w", vec![2], Init::Zeros, &mut rng).unwrap();
        p.tensor().accumulate_grad(&[30.0, 40.0]); // norm 50
        let mut adam = Adam::new(
            &set,
            AdamConfig { clip_norm: Some(5.0), ..AdamConfig::default() },
        );
        let info = adam.step(&set);
        assert!(info.clipped);
        assert!((info.grad_norm - 50.0).abs() < 1e-9);
        let _ = p;
    }
}
