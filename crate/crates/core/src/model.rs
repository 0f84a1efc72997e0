//! The last fully-connected layer and the vector arithmetic it needs.
//!
//! A [`LastLayer`] holds one weight row per class (`c × l`, row-major) and no
//! bias, so the forward pass is just `ŷ = W v`.

use serde::{Deserialize, Serialize};

use crate::error::{MtdError, Result};

/// Penultimate-layer activation. Non-empty and finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(MtdError::config("feature vector must have width >= 1"));
        }
        check_finite(&values)?;
        Ok(FeatureVector(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for FeatureVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Class index `j`, standing for the one-hot label `e_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassLabel(usize);

impl ClassLabel {
    pub fn new(index: usize, classes: usize) -> Result<Self> {
        if index >= classes {
            return Err(MtdError::LabelOutOfRange {
                label: index,
                classes,
            });
        }
        Ok(ClassLabel(index))
    }

    /// Builds a label without a class-count check. Models still validate it
    /// on every use.
    pub fn from_index(index: usize) -> Self {
        ClassLabel(index)
    }

    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub features: FeatureVector,
    pub label: ClassLabel,
}

impl LabeledSample {
    pub fn new(features: FeatureVector, label: ClassLabel) -> Self {
        LabeledSample { features, label }
    }
}

/// Weight matrix of the final fully-connected layer, `classes × width`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LastLayer {
    classes: usize,
    width: usize,
    weights: Vec<f64>,
}

impl LastLayer {
    pub fn zeros(classes: usize, width: usize) -> Result<Self> {
        if classes == 0 || width == 0 {
            return Err(MtdError::config(format!(
                "layer shape must be non-empty, got {classes}x{width}"
            )));
        }
        Ok(LastLayer {
            classes,
            width,
            weights: vec![0.0; classes * width],
        })
    }

    /// Builds a layer from a row-major `classes × width` buffer.
    pub fn from_row_major(classes: usize, width: usize, weights: Vec<f64>) -> Result<Self> {
        let mut layer = Self::zeros(classes, width)?;
        if weights.len() != classes * width {
            return Err(MtdError::DimensionMismatch {
                expected: classes * width,
                got: weights.len(),
            });
        }
        check_finite(&weights)?;
        layer.weights = weights;
        Ok(layer)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let classes = rows.len();
        let width = rows.first().map_or(0, Vec::len);
        let mut flat = Vec::with_capacity(classes * width);
        for row in rows {
            if row.len() != width {
                return Err(MtdError::DimensionMismatch {
                    expected: width,
                    got: row.len(),
                });
            }
            flat.extend_from_slice(row);
        }
        Self::from_row_major(classes, width, flat)
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn row(&self, class: usize) -> &[f64] {
        &self.weights[class * self.width..(class + 1) * self.width]
    }

    pub(crate) fn row_mut(&mut self, class: usize) -> &mut [f64] {
        &mut self.weights[class * self.width..(class + 1) * self.width]
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.weights.chunks_exact(self.width)
    }

    pub(crate) fn check_features(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.width {
            return Err(MtdError::DimensionMismatch {
                expected: self.width,
                got: v.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_sample(&self, sample: &LabeledSample) -> Result<()> {
        self.check_features(sample.features.as_slice())?;
        if sample.label.index() >= self.classes {
            return Err(MtdError::LabelOutOfRange {
                label: sample.label.index(),
                classes: self.classes,
            });
        }
        Ok(())
    }

    /// Class logits `ŷ[j] = ⟨w_j, v⟩`.
    pub fn forward(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_features(v)?;
        Ok(self.rows().map(|w| dot(w, v)).collect())
    }

    /// Argmax of the logits; ties go to the lowest class index.
    pub fn predict(&self, v: &[f64]) -> Result<ClassLabel> {
        let logits = self.forward(v)?;
        Ok(ClassLabel(argmax(&logits)))
    }

    pub fn all_finite(&self) -> bool {
        self.weights.iter().all(|x| x.is_finite())
    }
}

/// Index of the first maximal entry.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in values.iter().enumerate().skip(1) {
        if x > values[best] {
            best = i;
        }
    }
    best
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity `⟨u, w⟩ / (‖u‖ ‖w‖)`.
pub fn cosine(u: &[f64], w: &[f64]) -> Result<f64> {
    if u.len() != w.len() {
        return Err(MtdError::DimensionMismatch {
            expected: u.len(),
            got: w.len(),
        });
    }
    let (nu, nw) = (norm(u), norm(w));
    if nu == 0.0 || nw == 0.0 {
        return Err(MtdError::DegenerateVector("cosine of a zero-norm vector"));
    }
    Ok(dot(u, w) / (nu * nw))
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|x| !x.is_finite()) {
        Some(position) => Err(MtdError::NonFinite { position }),
        None => Ok(()),
    }
}
