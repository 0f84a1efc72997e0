//! Gaussian-blob feature generator standing in for extracted CNN features.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::dataset::Dataset;
use crate::error::{MtdError, Result};
use crate::model::{dot, norm, ClassLabel, FeatureVector, LabeledSample};

/// Largest allowed cosine between two class means (45°).
pub const MAX_MEAN_COSINE: f64 = std::f64::consts::FRAC_1_SQRT_2;

const PLACEMENT_ATTEMPTS: usize = 10_000;

/// `classes` isotropic Gaussian clusters around unit-norm means that are at
/// least 45° apart. Samples are interleaved by class, `per_class` each.
pub fn generate_synthetic(classes: usize, width: usize, per_class: usize, spread: f64, seed: u64) -> Result<Dataset> {
    if classes < 2 || width < 2 {
        return Err(MtdError::config(format!(
            "need at least 2 classes and width 2, got c={classes} l={width}"
        )));
    }
    if per_class == 0 {
        return Err(MtdError::config("per-class sample count must be at least 1"));
    }
    if !(spread > 0.0 && spread.is_finite()) {
        return Err(MtdError::config(format!("spread must be positive, got {spread}")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let means = place_means(classes, width, &mut rng)?;

    let mut samples = Vec::with_capacity(classes * per_class);
    for _ in 0..per_class {
        for (label, mean) in means.iter().enumerate() {
            let values: Vec<f64> = mean
                .iter()
                .map(|m| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    m + spread * z
                })
                .collect();
            samples.push(LabeledSample::new(
                FeatureVector::new(values)?,
                ClassLabel::from_index(label),
            ));
        }
    }
    Dataset::new(
        format!("synthetic-c{classes}-l{width}-s{seed}"),
        classes,
        width,
        samples,
    )
}

/// Class means of the generator for a given seed, as placed before sampling.
pub fn synthetic_means(classes: usize, width: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    place_means(classes, width, &mut rng)
}

fn place_means(classes: usize, width: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
    let mut means: Vec<Vec<f64>> = Vec::with_capacity(classes);
    let mut attempts = 0;
    while means.len() < classes {
        if attempts == PLACEMENT_ATTEMPTS {
            return Err(MtdError::config(format!(
                "could not place {classes} class means 45 degrees apart in {width} dimensions"
            )));
        }
        attempts += 1;
        let mut candidate: Vec<f64> = (0..width).map(|_| StandardNormal.sample(&mut *rng)).collect();
        let n = norm(&candidate);
        if n < 1e-12 {
            continue;
        }
        candidate.iter_mut().for_each(|x| *x /= n);
        if means.iter().all(|m| dot(m, &candidate) <= MAX_MEAN_COSINE) {
            means.push(candidate);
            attempts = 0;
        }
    }
    Ok(means)
}
