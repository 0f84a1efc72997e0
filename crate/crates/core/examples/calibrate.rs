//! Prints pretrained and per-method final accuracies over a grid of cluster
//! spreads, for choosing synthetic data settings.
//!
//! SEED=7 cargo run --release -p mtd-core --example calibrate -- 0.3 0.35 0.4

use mtd_core::harness::{generate_synthetic, make_plan, run_compare, run_sweep, Experiment};
use mtd_core::{Execution, SgdConfig, UpdateConfig, Variant};

fn main() -> mtd_core::Result<()> {
    let spreads: Vec<f64> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let spreads = if spreads.is_empty() { vec![0.3, 0.35, 0.4] } else { spreads };
    let seed: u64 = std::env::var("SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(7);
    let pretrain = SgdConfig::new(0.01, 1e-6, 20, seed)?;
    for spread in spreads {
        let data = generate_synthetic(10, 64, 600, spread, seed)?;
        let (train, eval) = data.split_holdout(1.0 / 6.0, seed)?;
        let plan = make_plan(&train, 0.1, 10, seed)?;
        let exp = Experiment::prepare(&train, &plan, &eval, pretrain, Execution::default())?;
        let cmp = run_compare(
            &exp,
            UpdateConfig::new(1e-4, Variant::Projected)?,
            SgdConfig::fine_tune_default(),
        )?;
        let sweep = run_sweep(&exp, &[0.1, 0.01, 0.001, 0.0001], Variant::Projected)?;
        println!(
            "spread {spread}: initial {:.4} | mtd {:.4} finetune {:.4} speedup {:.1}x",
            cmp.move_to_data.initial_accuracy,
            cmp.move_to_data.final_accuracy(),
            cmp.fine_tune.final_accuracy(),
            cmp.speedup
        );
        for run in &sweep.runs {
            println!("  eps {:>7}: {:?}", run.epsilon.unwrap(), run.per_chunk_accuracy);
        }
    }
    Ok(())
}
