//! Continual learning on the last fully-connected layer of a classifier.
//!
//! Two ways to adapt a pretrained layer to a stream of labeled feature
//! vectors are provided: the gradient-free Move-to-Data update ([`update`])
//! and batch-size-1 softmax cross-entropy SGD ([`sgd`]). The [`harness`]
//! module runs both over the same seeded pretrain/chunk plan and reports
//! per-chunk accuracy, loss and adaptation time.

pub mod error;
pub mod exec;
pub mod harness;
pub mod model;
pub mod sgd;
pub mod update;

pub use error::{MtdError, Result};
pub use exec::Execution;
pub use model::{cosine, ClassLabel, FeatureVector, LabeledSample, LastLayer};
pub use sgd::{LossReport, SgdConfig};
pub use update::{closed_form_oracle, Epsilon, UpdateConfig, UpdateTrace, Variant};
