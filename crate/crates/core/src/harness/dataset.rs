use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{MtdError, Result};
use crate::model::LabeledSample;

/// Feature-level dataset with a declared shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    classes: usize,
    width: usize,
    samples: Vec<LabeledSample>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, classes: usize, width: usize, samples: Vec<LabeledSample>) -> Result<Self> {
        if classes == 0 || width == 0 {
            return Err(MtdError::config(format!(
                "dataset shape must be non-empty, got c={classes} l={width}"
            )));
        }
        for (position, s) in samples.iter().enumerate() {
            let err = if s.features.len() != width {
                Some(MtdError::DimensionMismatch {
                    expected: width,
                    got: s.features.len(),
                })
            } else if s.label.index() >= classes {
                Some(MtdError::LabelOutOfRange {
                    label: s.label.index(),
                    classes,
                })
            } else {
                None
            };
            if let Some(e) = err {
                return Err(e.at_sample(position));
            }
        }
        Ok(Dataset {
            name: name.into(),
            classes,
            width,
            samples,
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn samples(&self) -> &[LabeledSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for s in &self.samples {
            counts[s.label.index()] += 1;
        }
        counts
    }

    /// Clones the samples at `indices`, in that order.
    pub fn gather(&self, indices: &[usize]) -> Vec<LabeledSample> {
        indices.iter().map(|&i| self.samples[i].clone()).collect()
    }

    pub fn subset(&self, name: impl Into<String>, indices: &[usize]) -> Dataset {
        Dataset {
            name: name.into(),
            classes: self.classes,
            width: self.width,
            samples: self.gather(indices),
        }
    }

    /// Class-stratified split into `(train, held_out)`.
    pub fn split_holdout(&self, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(MtdError::config(format!(
                "holdout fraction must lie in (0, 1), got {fraction}"
            )));
        }
        let (mut held, mut train) = stratified_split(self, fraction, seed);
        held.sort_unstable();
        train.sort_unstable();
        if held.is_empty() || train.is_empty() {
            return Err(MtdError::config("holdout split leaves an empty side"));
        }
        Ok((
            self.subset(format!("{}-train", self.name), &train),
            self.subset(format!("{}-eval", self.name), &held),
        ))
    }
}

/// Per-class quotas summing to `round(fraction·n)`, each within one sample of
/// `fraction·n_c` (largest-remainder allocation, ties to the lower class).
pub(crate) fn stratified_quotas(counts: &[usize], fraction: f64) -> Vec<usize> {
    let n: usize = counts.iter().sum();
    let target = (fraction * n as f64).round() as usize;
    let exact: Vec<f64> = counts.iter().map(|&c| fraction * c as f64).collect();
    let mut quotas: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let assigned: usize = quotas.iter().sum();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &class in order.iter().take(target.saturating_sub(assigned)) {
        if quotas[class] < counts[class] {
            quotas[class] += 1;
        }
    }
    quotas
}

/// Draws a stratified `fraction` of the dataset. Returns `(selected, rest)`;
/// both lists come out in seeded shuffled order.
pub(crate) fn stratified_split(dataset: &Dataset, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_class = vec![Vec::new(); dataset.classes()];
    for (i, s) in dataset.samples().iter().enumerate() {
        by_class[s.label.index()].push(i);
    }
    let counts: Vec<usize> = by_class.iter().map(Vec::len).collect();
    let quotas = stratified_quotas(&counts, fraction);
    let mut selected = Vec::new();
    let mut rest = Vec::new();
    for (members, quota) in by_class.iter_mut().zip(quotas) {
        members.shuffle(&mut rng);
        selected.extend_from_slice(&members[..quota]);
        rest.extend_from_slice(&members[quota..]);
    }
    selected.shuffle(&mut rng);
    rest.shuffle(&mut rng);
    (selected, rest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ClassLabel, FeatureVector};

    fn toy(counts: &[usize]) -> Dataset {
        let mut samples = Vec::new();
        for (label, &n) in counts.iter().enumerate() {
            for i in 0..n {
                samples.push(LabeledSample::new(
                    FeatureVector::new(vec![i as f64, label as f64]).unwrap(),
                    ClassLabel::from_index(label),
                ));
            }
        }
        Dataset::new("toy", counts.len(), 2, samples).unwrap()
    }

    #[test]
    fn quotas_sum_to_rounded_target() {
        assert_eq!(stratified_quotas(&[5000; 10], 0.1), vec![500; 10]);
        let q = stratified_quotas(&[7, 7, 7], 0.5);
        assert_eq!(q.iter().sum::<usize>(), 11);
        assert!(q.iter().all(|&x| x == 3 || x == 4));
        let q = stratified_quotas(&[460, 520, 500, 490], 0.1);
        assert_eq!(q.iter().sum::<usize>(), 197);
    }

    #[test]
    fn validates_samples() {
        let bad = vec![LabeledSample::new(
            FeatureVector::new(vec![1.0]).unwrap(),
            ClassLabel::from_index(0),
        )];
        assert!(matches!(
            Dataset::new("x", 2, 2, bad.clone()),
            Err(MtdError::AtSample { position: 0, .. })
        ));
        assert!(Dataset::new("x", 0, 1, vec![]).is_err());
        let bad_label = vec![LabeledSample::new(
            FeatureVector::new(vec![1.0]).unwrap(),
            ClassLabel::from_index(3),
        )];
        assert!(Dataset::new("x", 2, 1, bad_label).is_err());
    }

    #[test]
    fn holdout_is_stratified_and_disjoint() {
        let d = toy(&[60, 60, 60]);
        let (train, eval) = d.split_holdout(1.0 / 6.0, 3).unwrap();
        assert_eq!(eval.len(), 30);
        assert_eq!(eval.class_counts(), vec![10, 10, 10]);
        assert_eq!(train.len() + eval.len(), d.len());
        for s in eval.samples() {
            assert!(!train.samples().contains(s));
        }
        assert!(d.split_holdout(1.0, 3).is_err());
    }
}
