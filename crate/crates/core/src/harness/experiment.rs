//! Chunked-stream experiment execution and reports.
//!
//! A run pretrains on the plan's pretraining split, measures the held-out
//! accuracy, then adapts chunk by chunk. Only the adaptation loop is timed;
//! evaluation after each chunk happens outside the timer.

use std::fmt::Write as _;
use std::hint::black_box;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::plan::StreamPlan;
use crate::error::{MtdError, Result};
use crate::exec::Execution;
use crate::model::{LabeledSample, LastLayer};
use crate::sgd::{mean_loss, pretrain, FineTuner, SgdConfig};
use crate::update::{apply_stream, UpdateConfig, Variant};

/// How the pretrained layer is adapted to each chunk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AdaptMethod {
    MoveToData(UpdateConfig),
    FineTune(SgdConfig),
    /// Visits every sample and changes nothing. Timing control.
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    MoveToData,
    FineTune,
    Identity,
}

impl AdaptMethod {
    pub fn kind(&self) -> MethodKind {
        match self {
            AdaptMethod::MoveToData(_) => MethodKind::MoveToData,
            AdaptMethod::FineTune(_) => MethodKind::FineTune,
            AdaptMethod::Identity => MethodKind::Identity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub method: MethodKind,
    pub epsilon: Option<f64>,
    pub variant: Option<Variant>,
    pub sgd_config: Option<SgdConfig>,
    pub pretrain_config: SgdConfig,
    pub dataset: String,
    pub pretrain_fraction: f64,
    pub plan_seed: u64,
    pub plan_hash: String,
    pub chunk_count: usize,
    pub initial_accuracy: f64,
    pub initial_mean_loss: f64,
    pub per_chunk_accuracy: Vec<f64>,
    /// Adaptation-only wall-clock seconds per chunk.
    pub per_chunk_wall_time: Vec<f64>,
    /// Mean cross-entropy on the evaluation set after each chunk.
    pub per_chunk_mean_loss: Vec<f64>,
    pub wall_time_mean: f64,
    pub wall_time_std: f64,
    pub skipped_degenerate: usize,
}

impl RunReport {
    pub fn final_accuracy(&self) -> f64 {
        self.per_chunk_accuracy
            .last()
            .copied()
            .unwrap_or(self.initial_accuracy)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// `chunk,accuracy,seconds,mean_loss`; chunk 0 is the pretrained model.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("chunk,accuracy,seconds,mean_loss\n");
        let _ = writeln!(out, "0,{},0,{}", self.initial_accuracy, self.initial_mean_loss);
        for (k, ((acc, secs), loss)) in self
            .per_chunk_accuracy
            .iter()
            .zip(&self.per_chunk_wall_time)
            .zip(&self.per_chunk_mean_loss)
            .enumerate()
        {
            let _ = writeln!(out, "{},{acc},{secs},{loss}", k + 1);
        }
        out
    }
}

/// Fraction of `eval_set` the model classifies correctly.
pub fn accuracy(model: &LastLayer, eval_set: &Dataset, exec: Execution) -> Result<f64> {
    accuracy_on(model, eval_set.samples(), exec)
}

pub fn accuracy_on(model: &LastLayer, samples: &[LabeledSample], exec: Execution) -> Result<f64> {
    if samples.is_empty() {
        return Err(MtdError::config("cannot compute accuracy on an empty set"));
    }
    let hits = exec.map_collect(samples, |s| {
        model
            .predict(s.features.as_slice())
            .map(|p| p == s.label)
    });
    let mut correct = 0usize;
    for (position, hit) in hits.into_iter().enumerate() {
        correct += usize::from(hit.map_err(|e| e.at_sample(position))?);
    }
    Ok(correct as f64 / samples.len() as f64)
}

/// Sample mean and (n−1) standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// A plan bound to its dataset and evaluation set, with the pretrained layer
/// shared by every method run on it.
#[derive(Debug, Clone)]
pub struct Experiment<'a> {
    dataset: &'a Dataset,
    plan: &'a StreamPlan,
    eval_set: &'a Dataset,
    pretrain_config: SgdConfig,
    pretrained: LastLayer,
    plan_hash: String,
    exec: Execution,
}

impl<'a> Experiment<'a> {
    pub fn prepare(
        dataset: &'a Dataset,
        plan: &'a StreamPlan,
        eval_set: &'a Dataset,
        pretrain_config: SgdConfig,
        exec: Execution,
    ) -> Result<Self> {
        plan.validate_for(dataset.len())?;
        if eval_set.width() != dataset.width() || eval_set.classes() != dataset.classes() {
            return Err(MtdError::config(format!(
                "eval set shape c={} l={} does not match dataset c={} l={}",
                eval_set.classes(),
                eval_set.width(),
                dataset.classes(),
                dataset.width()
            )));
        }
        if eval_set.is_empty() {
            return Err(MtdError::config("eval set is empty"));
        }
        let pretrain_samples = dataset.gather(&plan.pretrain_indices);
        let pretrained = pretrain(&pretrain_samples, dataset.classes(), dataset.width(), &pretrain_config)?.model;
        Ok(Experiment {
            dataset,
            plan,
            eval_set,
            pretrain_config,
            pretrained,
            plan_hash: plan.content_hash(),
            exec,
        })
    }

    pub fn pretrained(&self) -> &LastLayer {
        &self.pretrained
    }

    pub fn plan_hash(&self) -> &str {
        &self.plan_hash
    }

    pub fn initial_accuracy(&self) -> Result<f64> {
        accuracy(&self.pretrained, self.eval_set, self.exec)
    }

    pub fn run(&self, method: &AdaptMethod) -> Result<RunReport> {
        self.run_with_model(method).map(|(report, _)| report)
    }

    /// Runs `method` over every chunk and also returns the adapted layer.
    pub fn run_with_model(&self, method: &AdaptMethod) -> Result<(RunReport, LastLayer)> {
        let mut model = self.pretrained.clone();
        let initial_accuracy = accuracy(&model, self.eval_set, self.exec)?;
        let initial_mean_loss = mean_loss(&model, self.eval_set.samples(), self.exec)?.mean_cross_entropy;

        let mut tuner = match method {
            AdaptMethod::FineTune(cfg) => Some(FineTuner::new(*cfg)?),
            _ => None,
        };
        let chunk_count = self.plan.chunks.len();
        let mut per_chunk_accuracy = Vec::with_capacity(chunk_count);
        let mut per_chunk_wall_time = Vec::with_capacity(chunk_count);
        let mut per_chunk_mean_loss = Vec::with_capacity(chunk_count);
        let mut skipped_degenerate = 0;

        for (k, indices) in self.plan.chunks.iter().enumerate() {
            let chunk = self.dataset.gather(indices);
            let start = Instant::now();
            let adapted: Result<()> = match method {
                AdaptMethod::MoveToData(cfg) => apply_stream(&mut model, &chunk, cfg, false).map(|out| {
                    skipped_degenerate += out.skipped_degenerate;
                }),
                AdaptMethod::FineTune(_) => tuner.as_mut().expect("tuner").adapt(&mut model, &chunk),
                AdaptMethod::Identity => {
                    for s in &chunk {
                        black_box(s);
                    }
                    Ok(())
                }
            };
            let elapsed = start.elapsed().as_secs_f64();
            adapted.map_err(|e| e.at_chunk(k))?;

            per_chunk_wall_time.push(elapsed);
            per_chunk_accuracy.push(accuracy(&model, self.eval_set, self.exec).map_err(|e| e.at_chunk(k))?);
            per_chunk_mean_loss.push(
                mean_loss(&model, self.eval_set.samples(), self.exec)
                    .map_err(|e| e.at_chunk(k))?
                    .mean_cross_entropy,
            );
        }

        let (wall_time_mean, wall_time_std) = mean_std(&per_chunk_wall_time);
        let (epsilon, variant, sgd_config) = match method {
            AdaptMethod::MoveToData(cfg) => (Some(cfg.epsilon.get()), Some(cfg.variant), None),
            AdaptMethod::FineTune(cfg) => (None, None, Some(*cfg)),
            AdaptMethod::Identity => (None, None, None),
        };
        let report = RunReport {
            method: method.kind(),
            epsilon,
            variant,
            sgd_config,
            pretrain_config: self.pretrain_config,
            dataset: self.dataset.name.clone(),
            pretrain_fraction: self.plan.pretrain_fraction,
            plan_seed: self.plan.seed,
            plan_hash: self.plan_hash.clone(),
            chunk_count,
            initial_accuracy,
            initial_mean_loss,
            per_chunk_accuracy,
            per_chunk_wall_time,
            per_chunk_mean_loss,
            wall_time_mean,
            wall_time_std,
            skipped_degenerate,
        };
        Ok((report, model))
    }
}

/// Pretrains on the plan's pretraining split and runs `method` on its chunks.
pub fn run_experiment(
    dataset: &Dataset,
    plan: &StreamPlan,
    pretrain_config: SgdConfig,
    method: &AdaptMethod,
    eval_set: &Dataset,
) -> Result<RunReport> {
    Experiment::prepare(dataset, plan, eval_set, pretrain_config, Execution::default())?.run(method)
}

/// Reports from an ε sweep over one plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub plan_hash: String,
    pub runs: Vec<RunReport>,
}

impl SweepReport {
    /// `epsilon,chunk,accuracy`; chunk 0 is the pretrained model.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epsilon,chunk,accuracy\n");
        for run in &self.runs {
            let eps = run.epsilon.unwrap_or(f64::NAN);
            let _ = writeln!(out, "{eps},0,{}", run.initial_accuracy);
            for (k, acc) in run.per_chunk_accuracy.iter().enumerate() {
                let _ = writeln!(out, "{eps},{},{acc}", k + 1);
            }
        }
        out
    }
}

pub fn run_sweep(experiment: &Experiment<'_>, epsilons: &[f64], variant: Variant) -> Result<SweepReport> {
    if epsilons.is_empty() {
        return Err(MtdError::config("sweep needs at least one epsilon"));
    }
    let configs = epsilons
        .iter()
        .map(|&e| UpdateConfig::new(e, variant))
        .collect::<Result<Vec<_>>>()?;
    let runs = configs
        .iter()
        .map(|cfg| experiment.run(&AdaptMethod::MoveToData(*cfg)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport {
        plan_hash: experiment.plan_hash().to_string(),
        runs,
    })
}

/// Head-to-head of Move-to-Data and fine-tuning on one plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub move_to_data: RunReport,
    pub fine_tune: RunReport,
    /// mean fine-tuning chunk time / mean Move-to-Data chunk time
    pub speedup: f64,
}

impl Comparison {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "chunk,move_to_data_accuracy,fine_tune_accuracy,move_to_data_seconds,fine_tune_seconds\n",
        );
        let _ = writeln!(
            out,
            "0,{},{},0,0",
            self.move_to_data.initial_accuracy, self.fine_tune.initial_accuracy
        );
        let (m, f) = (&self.move_to_data, &self.fine_tune);
        for k in 0..m.per_chunk_accuracy.len().min(f.per_chunk_accuracy.len()) {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                k + 1,
                m.per_chunk_accuracy[k],
                f.per_chunk_accuracy[k],
                m.per_chunk_wall_time[k],
                f.per_chunk_wall_time[k]
            );
        }
        out
    }
}

pub fn run_compare(experiment: &Experiment<'_>, update: UpdateConfig, sgd: SgdConfig) -> Result<Comparison> {
    let move_to_data = experiment.run(&AdaptMethod::MoveToData(update))?;
    let fine_tune = experiment.run(&AdaptMethod::FineTune(sgd))?;
    let speedup = fine_tune.wall_time_mean / move_to_data.wall_time_mean;
    Ok(Comparison {
        move_to_data,
        fine_tune,
        speedup,
    })
}
