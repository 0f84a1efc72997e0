//! Move-to-Data: gradient-free adaptation of the labeled class row.
//!
//! For a sample `(v, j)` only row `w_j` moves, toward the data by a constant
//! step `ε ∈ (0, 1)`:
//!
//! * [`Variant::Plain`]: `w'_j = w_j + (v − w_j)·ε`
//! * [`Variant::Projected`]: `w'_j = w_j + (‖w_j‖·v/‖v‖ − w_j)·ε`
//!
//! Updates are order-dependent and applied one sample at a time.
//! [`closed_form_oracle`] gives the non-recursive expansion of `n` plain
//! steps on a single row and is used to check [`apply_stream`].

use serde::{Deserialize, Serialize};

use crate::error::{MtdError, Result};
use crate::model::{norm, LabeledSample, LastLayer};

/// Step size, strictly inside `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Epsilon(f64);

impl Epsilon {
    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && value < 1.0 {
            Ok(Epsilon(value))
        } else {
            Err(MtdError::config(format!(
                "epsilon must lie in (0, 1), got {value}"
            )))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Epsilon {
    type Error = MtdError;

    fn try_from(value: f64) -> Result<Self> {
        Epsilon::new(value)
    }
}

impl From<Epsilon> for f64 {
    fn from(e: Epsilon) -> f64 {
        e.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Plain,
    Projected,
}

impl std::str::FromStr for Variant {
    type Err = MtdError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Variant::Plain),
            "projected" => Ok(Variant::Projected),
            other => Err(MtdError::config(format!(
                "unknown variant {other:?} (expected plain or projected)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateConfig {
    pub epsilon: Epsilon,
    pub variant: Variant,
}

impl UpdateConfig {
    pub fn new(epsilon: f64, variant: Variant) -> Result<Self> {
        Ok(UpdateConfig {
            epsilon: Epsilon::new(epsilon)?,
            variant,
        })
    }
}

/// Moves the labeled row a fraction `eps` of the way toward the feature vector.
pub fn move_to_data_plain(model: &mut LastLayer, sample: &LabeledSample, eps: Epsilon) -> Result<()> {
    model.check_sample(sample)?;
    let eps = eps.get();
    let v = sample.features.as_slice();
    for (w, &x) in model.row_mut(sample.label.index()).iter_mut().zip(v) {
        *w += (x - *w) * eps;
    }
    Ok(())
}

/// Moves the labeled row toward `‖w_j‖·v̂`, the data direction at the row's
/// current length. Zero-norm features or rows are rejected and the model is
/// left untouched.
pub fn move_to_data_projected(
    model: &mut LastLayer,
    sample: &LabeledSample,
    eps: Epsilon,
) -> Result<()> {
    model.check_sample(sample)?;
    let v = sample.features.as_slice();
    let v_norm = norm(v);
    if v_norm == 0.0 {
        return Err(MtdError::DegenerateVector("zero-norm feature vector"));
    }
    let row = model.row_mut(sample.label.index());
    let w_norm = norm(row);
    if w_norm == 0.0 {
        return Err(MtdError::DegenerateVector("zero-norm weight row"));
    }
    let eps = eps.get();
    let scale = w_norm / v_norm;
    for (w, &x) in row.iter_mut().zip(v) {
        *w += (scale * x - *w) * eps;
    }
    Ok(())
}

/// Applies the configured variant to a single sample.
pub fn move_to_data(model: &mut LastLayer, sample: &LabeledSample, cfg: &UpdateConfig) -> Result<()> {
    match cfg.variant {
        Variant::Plain => move_to_data_plain(model, sample, cfg.epsilon),
        Variant::Projected => move_to_data_projected(model, sample, cfg.epsilon),
    }
}

/// Record of updates applied since a checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateTrace {
    checkpoint: LastLayer,
    applied: Vec<(usize, Vec<f64>)>,
}

impl UpdateTrace {
    pub fn new(checkpoint: &LastLayer) -> Self {
        UpdateTrace {
            checkpoint: checkpoint.clone(),
            applied: Vec::new(),
        }
    }

    pub fn checkpoint(&self) -> &LastLayer {
        &self.checkpoint
    }

    /// `(class, features)` pairs in application order.
    pub fn applied(&self) -> &[(usize, Vec<f64>)] {
        &self.applied
    }

    pub fn len(&self) -> usize {
        self.applied.len()
    }

    pub fn is_empty(&self) -> bool {
        self.applied.is_empty()
    }

    /// Features applied to `class`, in order.
    pub fn stream_for(&self, class: usize) -> Vec<&[f64]> {
        self.applied
            .iter()
            .filter(|(c, _)| *c == class)
            .map(|(_, v)| v.as_slice())
            .collect()
    }

    /// Closed-form value of `class`'s row after the traced plain updates.
    pub fn closed_form_row(&self, class: usize, eps: Epsilon) -> Result<Vec<f64>> {
        if class >= self.checkpoint.classes() {
            return Err(MtdError::LabelOutOfRange {
                label: class,
                classes: self.checkpoint.classes(),
            });
        }
        closed_form_oracle(self.checkpoint.row(class), &self.stream_for(class), eps)
    }
}

/// Result of folding updates over a sample list.
#[derive(Debug, Clone, Default)]
pub struct StreamOutcome {
    pub applied: usize,
    /// Samples skipped because the projection was undefined.
    pub skipped_degenerate: usize,
    pub trace: Option<UpdateTrace>,
}

/// Folds [`move_to_data`] over `samples` in order.
///
/// Degenerate samples (zero-norm feature or row under the projected variant)
/// are skipped and counted; any other error aborts with the sample position.
pub fn apply_stream(
    model: &mut LastLayer,
    samples: &[LabeledSample],
    cfg: &UpdateConfig,
    record_trace: bool,
) -> Result<StreamOutcome> {
    let mut outcome = StreamOutcome {
        trace: record_trace.then(|| UpdateTrace::new(model)),
        ..Default::default()
    };
    for (position, sample) in samples.iter().enumerate() {
        match move_to_data(model, sample, cfg) {
            Ok(()) => {
                outcome.applied += 1;
                if let Some(trace) = outcome.trace.as_mut() {
                    trace
                        .applied
                        .push((sample.label.index(), sample.features.as_slice().to_vec()));
                }
            }
            Err(MtdError::DegenerateVector(_)) => outcome.skipped_degenerate += 1,
            Err(e) => return Err(e.at_sample(position)),
        }
    }
    Ok(outcome)
}

/// Non-recursive value of `n = vs.len()` plain updates starting from `w0`:
///
/// `wⁿ = (1−ε)ⁿ·w⁰ + Σᵢ ε(1−ε)ⁿ⁻ⁱ·vⁱ` for `i = 1..=n`.
pub fn closed_form_oracle<V: AsRef<[f64]>>(w0: &[f64], vs: &[V], eps: Epsilon) -> Result<Vec<f64>> {
    let eps = eps.get();
    let n = vs.len();
    let keep = 1.0 - eps;
    let mut out: Vec<f64> = w0.iter().map(|w| keep.powi(n as i32) * w).collect();
    for (i, v) in vs.iter().enumerate() {
        let v = v.as_ref();
        if v.len() != w0.len() {
            return Err(MtdError::DimensionMismatch {
                expected: w0.len(),
                got: v.len(),
            }
            .at_sample(i));
        }
        // vs[i] is v^{i+1}, weighted by ε(1−ε)^{n−(i+1)}
        let coeff = eps * keep.powi((n - i - 1) as i32);
        for (o, x) in out.iter_mut().zip(v) {
            *o += coeff * x;
        }
    }
    Ok(out)
}
