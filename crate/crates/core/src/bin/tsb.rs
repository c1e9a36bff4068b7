use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tsb::experiments::{default_lambda_grid, format_selector, SweepResult};
use tsb::io::{load_features, write_csv, write_dataset};
use tsb::{
    export_leaf_weights, fit_cart, fit_gbs, generate_synthetic, load_csv, load_model, run_sweep, save_model, train,
    Dataset, GbsConfig, LabelKind, Lambda, LeafSelector, LossKind, Model, ModelDocument, SweepConfig, SyntheticConfig,
    TrainingEcho, TsbConfig, TsbError,
};

#[derive(Parser)]
#[command(name = "tsb", version, about = "Tree-structured boosting between CART and boosted stumps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a tree-structured ensemble and save it as JSON.
    Train(TrainArgs),
    /// Train a CART or gradient-boosted-stumps baseline.
    Baseline(BaselineArgs),
    /// Score a CSV file with a saved model.
    Predict(PredictArgs),
    /// Repeated k-fold cross-validation over a grid of lambda values.
    Sweep(SweepArgs),
    /// Write the two-class synthetic dataset.
    Synth(SynthArgs),
    /// Export the instance weights held by one leaf.
    LeafWeights(LeafWeightsArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum LossArg {
    Squared,
    Deviance,
}

impl From<LossArg> for LossKind {
    fn from(l: LossArg) -> Self {
        match l {
            LossArg::Squared => LossKind::SquaredError,
            LossArg::Deviance => LossKind::BinomialDeviance,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    Cart,
    Gbs,
}

fn parse_lambda(s: &str) -> Result<Lambda, String> {
    s.parse().map_err(|e: TsbError| e.to_string())
}

#[derive(Args)]
struct DataArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Name of the label column.
    #[arg(long, default_value = "label")]
    label: String,
    /// Label value mapped to +1; every other value becomes -1.
    #[arg(long)]
    positive: Option<String>,
}

impl DataArgs {
    fn load(&self) -> Result<Dataset, TsbError> {
        load_csv(&self.data, &self.label, self.positive.as_deref())
    }
}

#[derive(Args)]
struct FitArgs {
    /// Defaults to deviance for binary labels and squared otherwise.
    #[arg(long, value_enum)]
    loss: Option<LossArg>,
    #[arg(long, default_value_t = 10)]
    depth: usize,
    /// Defaults to 1.0 for squared error and 0.3 for deviance.
    #[arg(long)]
    shrinkage: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl FitArgs {
    fn resolve(&self, data: &Dataset) -> (LossKind, f64) {
        let loss = self.loss.map(LossKind::from).unwrap_or(match data.label_kind() {
            LabelKind::Binary => LossKind::BinomialDeviance,
            LabelKind::Continuous => LossKind::SquaredError,
        });
        let shrinkage = self.shrinkage.unwrap_or(match loss {
            LossKind::SquaredError => 1.0,
            LossKind::BinomialDeviance => 0.3,
        });
        (loss, shrinkage)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    fit: FitArgs,
    /// Re-weighting ratio: a non-negative number or `inf`.
    #[arg(long, value_parser = parse_lambda)]
    lambda: Lambda,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long, value_enum)]
    algo: Algo,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    fit: FitArgs,
    /// Accepted for symmetry with `train`; ignored.
    #[arg(long, value_parser = parse_lambda)]
    lambda: Option<Lambda>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    fit: FitArgs,
    /// Comma-separated values (`inf` allowed) or `default`.
    #[arg(long, default_value = "default")]
    lambdas: String,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    /// Aggregate CSV; per-fold rows and baselines go to sibling files.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 58)]
    red: usize,
    #[arg(long, default_value_t = 42)]
    green: usize,
    #[arg(long, default_value_t = 1.5)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LeafWeightsArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum)]
    loss: Option<LossArg>,
    #[arg(long, default_value_t = 2)]
    depth: usize,
    #[arg(long)]
    shrinkage: Option<f64>,
    #[arg(long, value_parser = parse_lambda)]
    lambda: Lambda,
    /// Conjunction such as "X2>2.95 & X1<=5.55" (one-based features).
    #[arg(long)]
    leaf: String,
    #[arg(long)]
    out: PathBuf,
}

fn fmt(v: f64) -> String {
    v.to_string()
}

fn echo(algorithm: &str, data: &DataArgs, fit: &FitArgs, loss: LossKind, shrinkage: f64, lambda: Option<Lambda>) -> TrainingEcho {
    TrainingEcho {
        algorithm: algorithm.to_string(),
        loss,
        depth: fit.depth,
        lambda,
        shrinkage,
        seed: Some(fit.seed),
        data: Some(data.data.display().to_string()),
        label: Some(data.label.clone()),
        positive_label: data.positive.clone(),
    }
}

fn cmd_train(args: &TrainArgs) -> Result<(), TsbError> {
    let data = args.data.load()?;
    let (loss, shrinkage) = args.fit.resolve(&data);
    let cfg = TsbConfig::new(args.fit.depth, args.lambda, loss).with_shrinkage(shrinkage);
    let model = train(&data, &cfg)?;
    let doc = ModelDocument::new(
        Model::Tsb(model),
        echo("tsb", &args.data, &args.fit, loss, shrinkage, Some(args.lambda)),
    );
    save_model(&doc, &args.out)
}

fn cmd_baseline(args: &BaselineArgs) -> Result<(), TsbError> {
    let data = args.data.load()?;
    let (loss, shrinkage) = args.fit.resolve(&data);
    let (model, name) = match args.algo {
        Algo::Cart => (Model::Cart(fit_cart(&data, args.fit.depth)?), "cart"),
        Algo::Gbs => (
            Model::Gbs(fit_gbs(
                &data,
                &GbsConfig {
                    rounds: args.fit.depth,
                    loss,
                    shrinkage,
                },
            )?),
            "gbs",
        ),
    };
    let doc = ModelDocument::new(model, echo(name, &args.data, &args.fit, loss, shrinkage, None));
    save_model(&doc, &args.out)
}

fn cmd_predict(args: &PredictArgs) -> Result<(), TsbError> {
    let doc = load_model(&args.model)?;
    let rows = load_features(&args.data, doc.model.feature_names())?;
    let classify = doc.config.loss == LossKind::BinomialDeviance;
    let mut out = Vec::with_capacity(rows.len());
    for (id, x) in rows.iter().enumerate() {
        let margin = doc.model.margin(x)?;
        let mut record = vec![id.to_string(), fmt(margin)];
        if classify {
            record.push(fmt(tsb::model::sign_label(margin)));
            record.push(fmt(doc.model.probability(x)?));
        }
        out.push(record);
    }
    let header: &[&str] = if classify {
        &["id", "margin", "label", "probability"]
    } else {
        &["id", "margin"]
    };
    write_csv(&args.out, header, out)
}

fn parse_grid(text: &str) -> Result<Vec<Lambda>, TsbError> {
    if text.trim() == "default" {
        return Ok(default_lambda_grid());
    }
    text.split(',').map(|t| t.parse()).collect()
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}.csv"))
}

fn write_sweep(out: &Path, result: &SweepResult) -> Result<(), TsbError> {
    write_csv(
        out,
        &["lambda", "mean_train_error", "se_train", "mean_test_error", "se_test"],
        result.aggregates.iter().map(|(l, s)| {
            vec![l.to_string(), fmt(s.mean_train), fmt(s.se_train), fmt(s.mean_test), fmt(s.se_test)]
        }),
    )?;
    write_csv(
        sibling(out, "rows"),
        &["lambda", "trial", "fold", "train_error", "test_error"],
        result.rows.iter().map(|r| {
            vec![
                r.lambda.to_string(),
                r.trial.to_string(),
                r.fold.to_string(),
                fmt(r.train_error),
                fmt(r.test_error),
            ]
        }),
    )?;
    write_csv(
        sibling(out, "baselines"),
        &["algorithm", "mean_train_error", "se_train", "mean_test_error", "se_test"],
        result.baseline_aggregates.iter().map(|(b, s)| {
            vec![b.to_string(), fmt(s.mean_train), fmt(s.se_train), fmt(s.mean_test), fmt(s.se_test)]
        }),
    )
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), TsbError> {
    let data = args.data.load()?;
    let (loss, shrinkage) = args.fit.resolve(&data);
    let cfg = SweepConfig {
        lambda_grid: parse_grid(&args.lambdas)?,
        depth: args.fit.depth,
        loss,
        shrinkage,
        folds: args.folds,
        trials: args.trials,
        seed: args.fit.seed,
    };
    let result = run_sweep(&data, &cfg)?;
    if !result.degenerate_folds.is_empty() {
        log::warn!("{} folds skipped for single-class training data", result.degenerate_folds.len());
    }
    write_sweep(&args.out, &result)
}

fn cmd_synth(args: &SynthArgs) -> Result<(), TsbError> {
    let data = generate_synthetic(&SyntheticConfig {
        n_red: args.red,
        n_green: args.green,
        sigma: args.sigma,
        seed: args.seed,
        ..SyntheticConfig::default()
    })?;
    write_dataset(&args.out, &data)
}

fn cmd_leaf_weights(args: &LeafWeightsArgs) -> Result<(), TsbError> {
    let data = args.data.load()?;
    let fit = FitArgs {
        loss: args.loss,
        depth: args.depth,
        shrinkage: args.shrinkage,
        seed: 0,
    };
    let (loss, shrinkage) = fit.resolve(&data);
    let selector: LeafSelector = args.leaf.parse()?;
    let cfg = TsbConfig::new(args.depth, args.lambda, loss).with_shrinkage(shrinkage);
    let leaf = export_leaf_weights(&data, &cfg, &selector)?;
    log::info!("selected leaf {}", format_selector(&leaf.path));
    let mut header: Vec<&str> = data.feature_names().iter().map(String::as_str).collect();
    header.extend(["label", "weight"]);
    write_csv(
        &args.out,
        &header,
        leaf.rows.iter().map(|r| {
            r.features
                .iter()
                .map(|&v| fmt(v))
                .chain([fmt(r.label), fmt(r.weight)])
                .collect::<Vec<_>>()
        }),
    )
}

fn run(cli: Cli) -> Result<(), TsbError> {
    match &cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Baseline(a) => cmd_baseline(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Synth(a) => cmd_synth(a),
        Command::LeafWeights(a) => cmd_leaf_weights(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error: usage: {first}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let category = e.category();
            eprintln!("error: {}: {e}", category.as_str());
            ExitCode::from(category.exit_code() as u8)
        }
    }
}
