//! Softmax cross-entropy SGD on the last layer: pretraining and the
//! batch-size-1 fine-tuning baseline.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MtdError, Result};
use crate::exec::Execution;
use crate::model::{LabeledSample, LastLayer};

/// Floor applied to probabilities inside the log.
pub const PROB_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub initial_lr: f64,
    pub decay: f64,
    /// Only used by [`pretrain`].
    pub epochs: usize,
    /// Per-epoch shuffle seed, only used by [`pretrain`].
    pub seed: u64,
}

impl SgdConfig {
    pub fn new(initial_lr: f64, decay: f64, epochs: usize, seed: u64) -> Result<Self> {
        let cfg = SgdConfig {
            initial_lr,
            decay,
            epochs,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return Err(MtdError::config(format!(
                "learning rate must be positive, got {}",
                self.initial_lr
            )));
        }
        if !(self.decay >= 0.0 && self.decay.is_finite()) {
            return Err(MtdError::config(format!(
                "lr decay must be non-negative, got {}",
                self.decay
            )));
        }
        Ok(())
    }

    /// Fine-tuning defaults: lr₀ = 1e-3, δ = 1e-6.
    pub fn fine_tune_default() -> Self {
        SgdConfig {
            initial_lr: 1e-3,
            decay: 1e-6,
            epochs: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub mean_cross_entropy: f64,
}

/// Time-based decay `lr₀ / (1 + δ·i)`.
pub fn lr_schedule(cfg: &SgdConfig, iteration: u64) -> f64 {
    cfg.initial_lr / (1.0 + cfg.decay * iteration as f64)
}

/// Max-shifted softmax.
pub fn softmax(z: &[f64]) -> Result<Vec<f64>> {
    if let Some(position) = z.iter().position(|x| !x.is_finite()) {
        return Err(MtdError::NonFinite { position });
    }
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = z.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= total);
    Ok(out)
}

pub fn cross_entropy(probs: &[f64], label: usize) -> f64 {
    -probs[label].max(PROB_FLOOR).ln()
}

/// Loss of the model on one sample.
pub fn sample_loss(model: &LastLayer, sample: &LabeledSample) -> Result<f64> {
    model.check_sample(sample)?;
    let probs = softmax(&model.forward(sample.features.as_slice())?)?;
    Ok(cross_entropy(&probs, sample.label.index()))
}

/// Row-major `c × l` gradient `(softmax(Wv) − e_y) ⊗ v`.
pub fn gradient(model: &LastLayer, sample: &LabeledSample) -> Result<Vec<f64>> {
    model.check_sample(sample)?;
    let v = sample.features.as_slice();
    let mut delta = softmax(&model.forward(v)?)?;
    delta[sample.label.index()] -= 1.0;
    Ok(delta
        .iter()
        .flat_map(|&d| v.iter().map(move |&x| d * x))
        .collect())
}

/// One SGD step on a single sample. Every row may change.
pub fn sgd_step(model: &mut LastLayer, sample: &LabeledSample, lr: f64) -> Result<()> {
    model.check_sample(sample)?;
    let v = sample.features.as_slice();
    let mut delta = softmax(&model.forward(v)?)?;
    delta[sample.label.index()] -= 1.0;
    let width = model.width();
    for (row, d) in model.weights_mut().chunks_exact_mut(width).zip(delta) {
        let step = lr * d;
        for (w, &x) in row.iter_mut().zip(v) {
            *w -= step * x;
        }
    }
    Ok(())
}

/// Mean cross-entropy over `samples`.
pub fn mean_loss(model: &LastLayer, samples: &[LabeledSample], exec: Execution) -> Result<LossReport> {
    if samples.is_empty() {
        return Err(MtdError::config("cannot compute loss over an empty set"));
    }
    let losses = exec.map_collect(samples, |s| sample_loss(model, s));
    let mut total = 0.0;
    for (position, loss) in losses.into_iter().enumerate() {
        total += loss.map_err(|e| e.at_sample(position))?;
    }
    Ok(LossReport {
        mean_cross_entropy: total / samples.len() as f64,
    })
}

#[derive(Debug, Clone)]
pub struct Pretrained {
    pub model: LastLayer,
    pub loss: LossReport,
    pub iterations: u64,
}

/// Trains a zero-initialised layer with shuffled single-sample SGD.
pub fn pretrain(samples: &[LabeledSample], classes: usize, width: usize, cfg: &SgdConfig) -> Result<Pretrained> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(MtdError::config("pretraining set is empty"));
    }
    if cfg.epochs == 0 {
        return Err(MtdError::config("pretraining needs at least one epoch"));
    }
    let mut model = LastLayer::zeros(classes, width)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut iteration = 0u64;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            sgd_step(&mut model, &samples[i], lr_schedule(cfg, iteration)).map_err(|e| e.at_sample(i))?;
            iteration += 1;
        }
    }
    let loss = mean_loss(&model, samples, Execution::default())?;
    Ok(Pretrained {
        model,
        loss,
        iterations: iteration,
    })
}

/// Batch-size-1 fine-tuning whose schedule keeps counting across chunks.
#[derive(Debug, Clone)]
pub struct FineTuner {
    cfg: SgdConfig,
    iteration: u64,
}

impl FineTuner {
    pub fn new(cfg: SgdConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(FineTuner { cfg, iteration: 0 })
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    /// One pass over `chunk` in arrival order.
    pub fn adapt(&mut self, model: &mut LastLayer, chunk: &[LabeledSample]) -> Result<()> {
        for (position, sample) in chunk.iter().enumerate() {
            sgd_step(model, sample, lr_schedule(&self.cfg, self.iteration))
                .map_err(|e| e.at_sample(position))?;
            self.iteration += 1;
        }
        Ok(())
    }
}

/// Fine-tunes on one chunk starting the schedule at `iteration`, which is
/// advanced by the chunk length.
pub fn fine_tune_chunk(
    model: &mut LastLayer,
    chunk: &[LabeledSample],
    cfg: &SgdConfig,
    iteration: &mut u64,
) -> Result<()> {
    let mut tuner = FineTuner::new(*cfg)?;
    tuner.iteration = *iteration;
    let result = tuner.adapt(model, chunk);
    *iteration = tuner.iteration;
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ClassLabel, FeatureVector};
    use proptest::prelude::*;

    fn sample(v: &[f64], label: usize) -> LabeledSample {
        LabeledSample::new(FeatureVector::new(v.to_vec()).unwrap(), ClassLabel::from_index(label))
    }

    #[test]
    fn softmax_examples() {
        assert_eq!(softmax(&[0.0, 0.0]).unwrap(), vec![0.5, 0.5]);
        let p = softmax(&[1000.0, 0.0]).unwrap();
        assert!(p.iter().all(|x| x.is_finite()));
        assert!((p[0] - 1.0).abs() < 1e-15 && p[1] < 1e-300);
        assert!(softmax(&[f64::INFINITY, 0.0]).is_err());
    }

    #[test]
    fn cross_entropy_examples() {
        assert_eq!(cross_entropy(&[0.0, 1.0, 0.0], 1), 0.0);
        let c = 7;
        let uniform = vec![1.0 / c as f64; c];
        assert!((cross_entropy(&uniform, 3) - (c as f64).ln()).abs() < 1e-12);
        assert!((cross_entropy(&[0.9, 0.1], 1) - std::f64::consts::LN_10).abs() < 1e-6);
        assert!((cross_entropy(&[1.0, 0.0], 1) - 1e15f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn lr_schedule_examples() {
        let cfg = SgdConfig::new(0.001, 1e-6, 1, 0).unwrap();
        assert_eq!(lr_schedule(&cfg, 0), 0.001);
        assert!((lr_schedule(&cfg, 1_000_000) - 0.0005).abs() < 1e-15);
        let flat = SgdConfig::new(0.02, 0.0, 1, 0).unwrap();
        assert!((0..1000).all(|i| lr_schedule(&flat, i * 977) == 0.02));
        assert!(SgdConfig::new(0.0, 0.0, 1, 0).is_err());
        assert!(SgdConfig::new(0.1, -1.0, 1, 0).is_err());
    }

    #[test]
    fn sgd_step_hand_computed() {
        let mut m = LastLayer::zeros(2, 1).unwrap();
        sgd_step(&mut m, &sample(&[1.0], 0), 1.0).unwrap();
        assert_eq!(m.weights(), &[0.5, -0.5]);
    }

    #[test]
    fn sgd_step_at_optimum_is_tiny() {
        let mut m = LastLayer::from_rows(&[vec![100.0, 0.0], vec![-100.0, 0.0]]).unwrap();
        let before = m.clone();
        sgd_step(&mut m, &sample(&[1.0, 0.5], 0), 0.1).unwrap();
        let moved = m
            .weights()
            .iter()
            .zip(before.weights())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(moved <= 1e-12);
    }

    #[test]
    fn fine_tune_chunk_cases() {
        let cfg = SgdConfig::new(0.05, 1e-3, 1, 0).unwrap();
        let mut m = LastLayer::from_rows(&[vec![0.1, 0.2], vec![0.3, -0.1]]).unwrap();
        let before = m.clone();
        let mut it = 5;
        fine_tune_chunk(&mut m, &[], &cfg, &mut it).unwrap();
        assert_eq!((m.clone(), it), (before.clone(), 5));

        let s = sample(&[1.0, -1.0], 1);
        fine_tune_chunk(&mut m, std::slice::from_ref(&s), &cfg, &mut it).unwrap();
        let mut one = before;
        sgd_step(&mut one, &s, lr_schedule(&cfg, 5)).unwrap();
        assert_eq!(m, one);
        assert_eq!(it, 6);
    }

    #[test]
    fn fine_tuner_counts_across_chunks() {
        let cfg = SgdConfig::new(0.05, 0.5, 1, 0).unwrap();
        let chunk = vec![sample(&[1.0, 0.0], 0), sample(&[0.0, 1.0], 1)];
        let mut a = LastLayer::zeros(2, 2).unwrap();
        let mut b = a.clone();
        let mut tuner = FineTuner::new(cfg).unwrap();
        tuner.adapt(&mut a, &chunk).unwrap();
        tuner.adapt(&mut a, &chunk).unwrap();
        assert_eq!(tuner.iteration(), 4);
        for (i, s) in chunk.iter().chain(&chunk).enumerate() {
            sgd_step(&mut b, s, lr_schedule(&cfg, i as u64)).unwrap();
        }
        assert_eq!(a, b);
    }

    fn blobs(n_per: usize, seed: u64) -> Vec<LabeledSample> {
        use rand_distr::{Distribution, Normal};
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.3).unwrap();
        let centers = [[1.0, 1.0, 0.0, 0.0], [-1.0, -1.0, 0.0, 0.0]];
        let mut out = Vec::new();
        for (label, c) in centers.iter().enumerate() {
            for _ in 0..n_per {
                let v: Vec<f64> = c.iter().map(|x| x + noise.sample(&mut rng)).collect();
                out.push(sample(&v, label));
            }
        }
        out
    }

    #[test]
    fn pretrain_separable_blobs() {
        let data = blobs(100, 3);
        let cfg = SgdConfig::new(0.01, 0.0, 20, 11).unwrap();
        let p = pretrain(&data, 2, 4, &cfg).unwrap();
        let correct = data
            .iter()
            .filter(|s| p.model.predict(s.features.as_slice()).unwrap() == s.label)
            .count();
        assert!(correct as f64 / data.len() as f64 >= 0.95);
        assert_eq!(p.iterations, 4000);
        assert!(p.loss.mean_cross_entropy.is_finite() && p.loss.mean_cross_entropy >= 0.0);
    }

    #[test]
    fn pretrain_one_epoch_unfolds() {
        let data = blobs(10, 4);
        let cfg = SgdConfig::new(0.05, 0.0, 1, 99).unwrap();
        let p = pretrain(&data, 2, 4, &cfg).unwrap();
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(99));
        let mut m = LastLayer::zeros(2, 4).unwrap();
        for i in order {
            sgd_step(&mut m, &data[i], 0.05).unwrap();
        }
        assert_eq!(p.model, m);
    }

    #[test]
    fn pretrain_deterministic_and_validated() {
        let data = blobs(20, 5);
        let cfg = SgdConfig::new(0.01, 1e-6, 3, 42).unwrap();
        let a = pretrain(&data, 2, 4, &cfg).unwrap().model;
        let b = pretrain(&data, 2, 4, &cfg).unwrap().model;
        let bits = |m: &LastLayer| m.weights().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert!(matches!(pretrain(&[], 2, 4, &cfg), Err(MtdError::Config(_))));
    }

    #[test]
    fn mean_loss_independent_of_execution() {
        let data = blobs(50, 6);
        let p = pretrain(&data, 2, 4, &SgdConfig::new(0.01, 0.0, 2, 1).unwrap()).unwrap();
        let a = mean_loss(&p.model, &data, Execution::Sequential).unwrap();
        let b = mean_loss(&p.model, &data, Execution::Parallel).unwrap();
        assert_eq!(a.mean_cross_entropy.to_bits(), b.mean_cross_entropy.to_bits());
        assert!(mean_loss(&p.model, &[], Execution::Sequential).is_err());
    }

    fn finite_difference(model: &LastLayer, s: &LabeledSample, h: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(model.weights().len());
        for k in 0..model.weights().len() {
            let mut plus = model.weights().to_vec();
            let mut minus = plus.clone();
            plus[k] += h;
            minus[k] -= h;
            let fp = sample_loss(&LastLayer::from_row_major(model.classes(), model.width(), plus).unwrap(), s).unwrap();
            let fm = sample_loss(&LastLayer::from_row_major(model.classes(), model.width(), minus).unwrap(), s).unwrap();
            out.push((fp - fm) / (2.0 * h));
        }
        out
    }

    fn instance() -> impl Strategy<Value = (usize, usize, Vec<f64>, Vec<f64>, usize)> {
        (2usize..=5, 1usize..=8).prop_flat_map(|(c, l)| {
            (
                Just(c),
                Just(l),
                prop::collection::vec(-1.0f64..1.0, c * l),
                prop::collection::vec(-2.0f64..2.0, l),
                0..c,
            )
        })
    }

    proptest! {
        #[test]
        fn gradient_matches_finite_differences((c, l, w, v, y) in instance()) {
            let m = LastLayer::from_row_major(c, l, w).unwrap();
            let s = sample(&v, y);
            let g = gradient(&m, &s).unwrap();
            let fd = finite_difference(&m, &s, 1e-5);
            for (a, b) in g.iter().zip(&fd) {
                prop_assert!((a - b).abs() <= 1e-6, "{a} vs {b}");
            }
        }

        #[test]
        fn softmax_normalised_and_shift_invariant(z in prop::collection::vec(-50.0f64..50.0, 1..10), shift in -100.0f64..100.0) {
            let p = softmax(&z).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(p.iter().all(|&x| x >= 0.0));
            let shifted: Vec<f64> = z.iter().map(|x| x + shift).collect();
            let q = softmax(&shifted).unwrap();
            for (a, b) in p.iter().zip(&q) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        #[test]
        fn schedule_non_increasing(lr in 1e-5f64..1.0, decay in 0.0f64..1.0, i in 0u64..1_000_000) {
            let cfg = SgdConfig::new(lr, decay, 1, 0).unwrap();
            prop_assert!(lr_schedule(&cfg, i + 1) <= lr_schedule(&cfg, i));
        }

        #[test]
        fn small_step_decreases_loss((c, l, w, v, y) in instance()) {
            let mut m = LastLayer::from_row_major(c, l, w).unwrap();
            let s = sample(&v, y);
            let g = gradient(&m, &s).unwrap();
            let gnorm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assume!(gnorm > 1e-6);
            let before = sample_loss(&m, &s).unwrap();
            sgd_step(&mut m, &s, 1e-4).unwrap();
            prop_assert!(sample_loss(&m, &s).unwrap() < before);
        }
    }
}
