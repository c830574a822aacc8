//! Command-line front end: train a neural ranker, evaluate a checkpoint,
//! run k-fold cross-validation, or run the synthetic rank-recovery
//! experiment.
//!
//! Exit codes: 0 on success, 2 for configuration/usage errors, 3 for data
//! errors (unreadable or malformed files, bad splits), 4 for numeric
//! failures during training or scoring.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rankforge::data::{make_folds, parse_letor, Dataset};
use rankforge::harness::{
    cross_validate, epochs_csv, evaluate_dataset, evaluate_per_query, per_query_csv, plotdata,
    rank_accuracy_experiment, rankexp_csv, train, CvConfig, RankExpConfig, RunConfig,
};
use rankforge::losses::LossSpec;
use rankforge::numerics::{load_checkpoint, save_checkpoint, ArchCode};
use rankforge::{Error, Result};

#[derive(Parser)]
#[command(
    name = "rankforge",
    version,
    about = "Train and evaluate neural rankers that directly optimize IR metrics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train on one fold of a dataset and write reports and checkpoints.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Run k-fold cross-validation and write fold and summary reports.
    Cv(CvArgs),
    /// Run the synthetic rank-recovery experiment.
    Rankexp(RankExpArgs),
}

/// Options shared by every training-style run.
#[derive(Args)]
struct FitArgs {
    /// LETOR-format data file.
    #[arg(long)]
    data: PathBuf,
    /// Network architecture code (R5, CE5, R4.L, CE4.L).
    #[arg(long, default_value = "R4.L")]
    arch: ArchCode,
    /// Training loss, e.g. `ndcg.type3`, `pre@5.type1`, `ap.type2`,
    /// `nerr@10.type3`, `approxndcg`, `listnet`, `listmle`.
    #[arg(long, default_value = "ndcg.type3")]
    loss: String,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    /// Learning rate.
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    /// L2 weight decay coefficient.
    #[arg(long, default_value_t = 1e-3)]
    l2: f64,
    /// Scale of the substituted sigmoid derivative in the rank-based
    /// losses.
    #[arg(long = "alpha-b", default_value_t = 1.0)]
    alpha_b: f64,
    /// Steepness of the smooth rank approximation (approxndcg).
    #[arg(long, default_value_t = 10.0)]
    alpha: f64,
    /// Training seed; fixes weight init, epoch shuffles, and tie-breaking.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Metric cutoffs for evaluation reports.
    #[arg(long, value_delimiter = ',', default_value = "1,3,5,10,20")]
    cutoffs: Vec<usize>,
    /// Differentiate the nDCG discount as if log2 were the natural log
    /// (drops the 1/ln 2 factor; scales those gradients by ln 2).
    #[arg(long)]
    ndcg_shortcut_grad: bool,
    /// Seed for the fold partition (independent of --seed).
    #[arg(long, default_value_t = 0)]
    folds_seed: u64,
    /// Number of folds in the partition.
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Output directory for reports and checkpoints.
    #[arg(long)]
    out: PathBuf,
}

impl FitArgs {
    fn run_config(&self) -> Result<RunConfig> {
        Ok(RunConfig {
            arch: self.arch,
            loss: LossSpec::parse(&self.loss, self.alpha_b, self.alpha, self.ndcg_shortcut_grad)?,
            epochs: self.epochs,
            lr: self.lr,
            l2: self.l2,
            seed: self.seed,
            cutoffs: self.cutoffs.clone(),
        })
    }

    fn load_data(&self) -> Result<Dataset> {
        parse_letor(&self.data)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    fit: FitArgs,
    /// Which fold of the partition to train on (1-based).
    #[arg(long, default_value_t = 1)]
    fold: usize,
}

#[derive(Args)]
struct EvalArgs {
    /// Checkpoint file written by `train` or `cv`.
    #[arg(long)]
    ckpt: PathBuf,
    /// LETOR-format data file.
    #[arg(long)]
    data: PathBuf,
    /// Metric cutoffs.
    #[arg(long, value_delimiter = ',', default_value = "1,3,5,10,20")]
    cutoffs: Vec<usize>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also emit per-query values next to the report (requires --out).
    #[arg(long)]
    per_query: bool,
}

#[derive(Args)]
struct CvArgs {
    #[command(flatten)]
    fit: FitArgs,
}

#[derive(Args)]
struct RankExpArgs {
    /// Number of random score vectors.
    #[arg(long, default_value_t = 100)]
    v1: usize,
    /// Values per vector.
    #[arg(long, default_value_t = 123)]
    v2: usize,
    /// Steepness values for the smooth method.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "1,10,100,1000,10000,100000"
    )]
    alphas: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => run_train(args),
        Command::Eval(args) => run_eval(args),
        Command::Cv(args) => run_cv(args),
        Command::Rankexp(args) => run_rankexp(args),
    }
}

fn run_train(args: TrainArgs) -> Result<()> {
    let cfg = args.fit.run_config()?;
    let data = args.fit.load_data()?;
    let splits = make_folds(&data, args.fit.folds, args.fit.folds_seed)?;
    let split = splits.get(args.fold.wrapping_sub(1)).ok_or_else(|| {
        Error::Config(format!(
            "fold {} is out of range for a {}-fold partition",
            args.fold, args.fit.folds
        ))
    })?;

    let outcome = train(&cfg, &data, split)?;
    let out = &args.fit.out;
    fs::create_dir_all(out)?;
    fs::write(out.join("epochs.csv"), epochs_csv(&outcome.records))?;
    fs::write(out.join("run.plotdata"), plotdata(&outcome.records))?;
    save_checkpoint(&outcome.best_network, &out.join("best.ckpt"))?;
    save_checkpoint(&outcome.final_network, &out.join("final.ckpt"))?;

    let test_data = data.subset(&split.test);
    for (net, tag) in [
        (&outcome.best_network, "best"),
        (&outcome.final_network, "final"),
    ] {
        let per_query = evaluate_per_query(net, &test_data, &args.fit.cutoffs)?;
        fs::write(
            out.join(format!("per_query_{tag}.csv")),
            per_query_csv(&per_query),
        )?;
        let report = evaluate_dataset(net, &test_data, &args.fit.cutoffs)?;
        fs::write(out.join(format!("eval_{tag}.csv")), report.to_csv())?;
    }

    let last = outcome.records.last().expect("at least one epoch");
    println!(
        "fold {} of {}: {} epochs, best epoch {} (validation ndcg@5 {:.4}), final validation ndcg@5 {:.4}",
        split.fold_index,
        args.fit.folds,
        outcome.records.len(),
        outcome.best_epoch,
        outcome
            .records
            .iter()
            .map(|r| r.vali_ndcg5)
            .fold(f64::NEG_INFINITY, f64::max),
        last.vali_ndcg5
    );
    println!("reports written to {}", out.display());
    Ok(())
}

fn run_eval(args: EvalArgs) -> Result<()> {
    let net = load_checkpoint(&args.ckpt)?;
    let data = parse_letor(&args.data)?;
    let report = evaluate_dataset(&net, &data, &args.cutoffs)?;
    match &args.out {
        Some(path) => {
            fs::write(path, report.to_csv())?;
            if args.per_query {
                let per_query = evaluate_per_query(&net, &data, &args.cutoffs)?;
                let sibling = path.with_extension("per_query.csv");
                fs::write(&sibling, per_query_csv(&per_query))?;
            }
            println!("report written to {}", path.display());
        }
        None => {
            if args.per_query {
                return Err(Error::Config(
                    "--per-query needs --out to name the report file".into(),
                ));
            }
            print!("{}", report.to_csv());
        }
    }
    Ok(())
}

fn run_cv(args: CvArgs) -> Result<()> {
    let run = args.fit.run_config()?;
    let data = args.fit.load_data()?;
    let cfg = CvConfig {
        run,
        folds: args.fit.folds,
        folds_seed: args.fit.folds_seed,
    };
    let outcome = cross_validate(&cfg, &data, &args.fit.out)?;
    println!("fold-averaged test metrics (best-epoch networks):");
    for &(metric, k, mean) in &outcome.summary_best {
        println!("  {metric}@{k}: {mean:.4}");
    }
    println!("reports written to {}", args.fit.out.display());
    Ok(())
}

fn run_rankexp(args: RankExpArgs) -> Result<()> {
    let cfg = RankExpConfig {
        v1: args.v1,
        v2: args.v2,
        alphas: args.alphas,
        seed: args.seed,
    };
    let rows = rank_accuracy_experiment(&cfg)?;
    let csv = rankexp_csv(&rows);
    match &args.out {
        Some(path) => {
            fs::write(path, &csv)?;
            println!("report written to {}", path.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}
