use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mtd_core::harness::{
    generate_synthetic, load_features, make_plan, run_compare, run_sweep, to_feature_string, AdaptMethod, Dataset,
    Experiment, RunReport,
};
use mtd_core::{Execution, SgdConfig, UpdateConfig, Variant};

mod output;

use output::{check_parent, write_atomic};

#[derive(Parser, Debug)]
#[command(name = "mtd", version, about = "Move-to-Data streaming experiments on last-layer features")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic Gaussian-blob feature file.
    GenData(GenDataArgs),
    /// Run one adaptation method over the chunked stream.
    Run(RunArgs),
    /// Run Move-to-Data for several epsilons on one plan.
    Sweep(SweepArgs),
    /// Run Move-to-Data and fine-tuning side by side on one plan.
    Compare(CompareArgs),
}

#[derive(Args, Debug)]
struct GenDataArgs {
    #[arg(long)]
    classes: usize,
    #[arg(long)]
    width: usize,
    #[arg(long)]
    per_class: usize,
    #[arg(long, default_value_t = 0.35)]
    spread: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Both,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Mtd,
    Finetune,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    Plain,
    Projected,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Variant {
        match v {
            VariantArg::Plain => Variant::Plain,
            VariantArg::Projected => Variant::Projected,
        }
    }
}

#[derive(Args, Debug)]
struct StreamArgs {
    /// FEATSET v1 feature file to stream.
    #[arg(short, long)]
    input: PathBuf,
    /// Separate evaluation feature file; a stratified holdout of the input is used otherwise.
    #[arg(long)]
    eval: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0 / 6.0)]
    holdout: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    chunks: usize,
    #[arg(long, default_value_t = 0.1)]
    pretrain_fraction: f64,
    #[arg(long, default_value_t = 0.01)]
    pretrain_lr: f64,
    #[arg(long, default_value_t = 1e-6)]
    pretrain_decay: f64,
    #[arg(long, default_value_t = 20)]
    pretrain_epochs: usize,
    /// Report path; the extension is replaced by .json / .csv.
    #[arg(short, long, default_value = "report")]
    output: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Both)]
    format: Format,
    /// Evaluate on a single thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args, Debug)]
struct MtdArgs {
    #[arg(long, default_value_t = 1e-4)]
    epsilon: f64,
    #[arg(long, value_enum, default_value_t = VariantArg::Projected)]
    variant: VariantArg,
}

#[derive(Args, Debug)]
struct FineTuneArgs {
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 1e-6)]
    decay: f64,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    stream: StreamArgs,
    #[arg(long, value_enum)]
    method: MethodArg,
    #[command(flatten)]
    mtd: MtdArgs,
    #[command(flatten)]
    finetune: FineTuneArgs,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    stream: StreamArgs,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.01,0.001,0.0001")]
    epsilons: Vec<f64>,
    #[arg(long, value_enum, default_value_t = VariantArg::Projected)]
    variant: VariantArg,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[command(flatten)]
    stream: StreamArgs,
    #[command(flatten)]
    mtd: MtdArgs,
    #[command(flatten)]
    finetune: FineTuneArgs,
}

/// Validated stream settings.
struct StreamSetup {
    pretrain: SgdConfig,
    exec: Execution,
}

impl StreamArgs {
    fn validate(&self) -> Result<StreamSetup> {
        if !(self.holdout > 0.0 && self.holdout < 1.0) {
            bail!("--holdout must lie in (0, 1), got {}", self.holdout);
        }
        if !(self.pretrain_fraction > 0.0 && self.pretrain_fraction < 1.0) {
            bail!("--pretrain-fraction must lie in (0, 1), got {}", self.pretrain_fraction);
        }
        if self.chunks == 0 {
            bail!("--chunks must be at least 1");
        }
        if self.pretrain_epochs == 0 {
            bail!("--pretrain-epochs must be at least 1");
        }
        check_parent(&self.output)?;
        let pretrain = SgdConfig::new(self.pretrain_lr, self.pretrain_decay, self.pretrain_epochs, self.seed)
            .context("invalid pretraining settings")?;
        let exec = if self.sequential {
            Execution::Sequential
        } else {
            Execution::default()
        };
        Ok(StreamSetup { pretrain, exec })
    }

    fn load(&self) -> Result<(Dataset, Dataset)> {
        let data = load_features(&self.input).with_context(|| format!("reading {}", self.input.display()))?;
        match &self.eval {
            Some(path) => {
                let eval = load_features(path).with_context(|| format!("reading {}", path.display()))?;
                Ok((data, eval))
            }
            None => Ok(data.split_holdout(self.holdout, self.seed)?),
        }
    }
}

impl MtdArgs {
    fn validate(&self) -> Result<UpdateConfig> {
        UpdateConfig::new(self.epsilon, self.variant.into()).context("invalid --epsilon")
    }
}

impl FineTuneArgs {
    fn validate(&self) -> Result<SgdConfig> {
        SgdConfig::new(self.lr, self.decay, 1, 0).context("invalid fine-tuning settings")
    }
}

fn write_reports(stream: &StreamArgs, json: &str, csv: &str) -> Result<()> {
    if matches!(stream.format, Format::Json | Format::Both) {
        let path = stream.output.with_extension("json");
        write_atomic(&path, json.as_bytes())?;
        println!("wrote {}", path.display());
    }
    if matches!(stream.format, Format::Csv | Format::Both) {
        let path = stream.output.with_extension("csv");
        write_atomic(&path, csv.as_bytes())?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn print_run(report: &RunReport) {
    println!("plan {}", report.plan_hash);
    println!("{:>5}  {:>8}  {:>12}  {:>9}", "chunk", "accuracy", "seconds", "mean_loss");
    println!("{:>5}  {:>8.4}  {:>12}  {:>9.4}", 0, report.initial_accuracy, "-", report.initial_mean_loss);
    for k in 0..report.per_chunk_accuracy.len() {
        println!(
            "{:>5}  {:>8.4}  {:>12.6}  {:>9.4}",
            k + 1,
            report.per_chunk_accuracy[k],
            report.per_chunk_wall_time[k],
            report.per_chunk_mean_loss[k]
        );
    }
    println!(
        "adaptation time per chunk: {:.6} ± {:.6} s",
        report.wall_time_mean, report.wall_time_std
    );
}

fn gen_data(args: &GenDataArgs) -> Result<()> {
    if args.per_class == 0 {
        bail!("--per-class must be at least 1");
    }
    check_parent(&args.output)?;
    let data = generate_synthetic(args.classes, args.width, args.per_class, args.spread, args.seed)?;
    write_atomic(&args.output, to_feature_string(&data).as_bytes())?;
    println!(
        "wrote n={} c={} l={} to {}",
        data.len(),
        data.classes(),
        data.width(),
        args.output.display()
    );
    Ok(())
}

fn run(args: &RunArgs) -> Result<()> {
    let setup = args.stream.validate()?;
    let method = match args.method {
        MethodArg::Mtd => AdaptMethod::MoveToData(args.mtd.validate()?),
        MethodArg::Finetune => AdaptMethod::FineTune(args.finetune.validate()?),
    };
    let (data, eval) = args.stream.load()?;
    let plan = make_plan(&data, args.stream.pretrain_fraction, args.stream.chunks, args.stream.seed)?;
    let exp = Experiment::prepare(&data, &plan, &eval, setup.pretrain, setup.exec)?;
    let report = exp.run(&method)?;
    print_run(&report);
    write_reports(&args.stream, &report.to_json(), &report.to_csv())
}

fn sweep(args: &SweepArgs) -> Result<()> {
    let setup = args.stream.validate()?;
    if args.epsilons.is_empty() {
        bail!("--epsilons needs at least one value");
    }
    for &e in &args.epsilons {
        UpdateConfig::new(e, args.variant.into()).context("invalid --epsilons entry")?;
    }
    let (data, eval) = args.stream.load()?;
    let plan = make_plan(&data, args.stream.pretrain_fraction, args.stream.chunks, args.stream.seed)?;
    let exp = Experiment::prepare(&data, &plan, &eval, setup.pretrain, setup.exec)?;
    let report = run_sweep(&exp, &args.epsilons, args.variant.into())?;
    println!("plan {}", report.plan_hash);
    println!("{:>10}  {:>8}  {:>8}  {:>8}", "epsilon", "initial", "final", "min");
    for run in &report.runs {
        let min = run.per_chunk_accuracy.iter().cloned().fold(f64::INFINITY, f64::min);
        println!(
            "{:>10}  {:>8.4}  {:>8.4}  {:>8.4}",
            run.epsilon.unwrap_or(f64::NAN),
            run.initial_accuracy,
            run.final_accuracy(),
            min
        );
    }
    let json = serde_json::to_string_pretty(&report)?;
    write_reports(&args.stream, &json, &report.to_csv())
}

fn compare(args: &CompareArgs) -> Result<()> {
    let setup = args.stream.validate()?;
    let update = args.mtd.validate()?;
    let sgd = args.finetune.validate()?;
    let (data, eval) = args.stream.load()?;
    let plan = make_plan(&data, args.stream.pretrain_fraction, args.stream.chunks, args.stream.seed)?;
    let exp = Experiment::prepare(&data, &plan, &eval, setup.pretrain, setup.exec)?;
    let cmp = run_compare(&exp, update, sgd)?;
    let (m, f) = (&cmp.move_to_data, &cmp.fine_tune);
    println!("plan {}", m.plan_hash);
    println!("{:>5}  {:>12}  {:>12}", "chunk", "move_to_data", "fine_tune");
    println!("{:>5}  {:>12.4}  {:>12.4}", 0, m.initial_accuracy, f.initial_accuracy);
    for k in 0..m.per_chunk_accuracy.len() {
        println!(
            "{:>5}  {:>12.4}  {:>12.4}",
            k + 1,
            m.per_chunk_accuracy[k],
            f.per_chunk_accuracy[k]
        );
    }
    println!(
        "time per chunk: move_to_data {:.6} ± {:.6} s, fine_tune {:.6} ± {:.6} s, speedup {:.2}x",
        m.wall_time_mean, m.wall_time_std, f.wall_time_mean, f.wall_time_std, cmp.speedup
    );
    let json = serde_json::to_string_pretty(&cmp)?;
    write_reports(&args.stream, &json, &cmp.to_csv())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::GenData(args) => gen_data(args),
        Command::Run(args) => run(args),
        Command::Sweep(args) => sweep(args),
        Command::Compare(args) => compare(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
