//! Command-line interface. Data goes to files (and, for `fit-shape`, stdout);
//! diagnostics go to stderr.
//!
//! Output files:
//! - `train.csv`, `test.csv`: columns `x, y` (`gen-data`), with `meta.json` holding `k_hat`
//! - `sweep.csv`: `c, final_loss, error, best`
//! - `model.json`: checkpoint; `history.csv`: `epoch, loss`
//! - `trials.csv`: `seed, train_mse, test_mse, train_nll, test_nll, test_inf_var_count`
//! - `eval_<split>.csv`: `split, mse, nll, inf_var_count`
//! - `predictions_<split>.csv`: `x` (1-D) or `row_id`, then `y, z_mean, z_var`
//! - `moments.csv`, `quadrature.csv`: one row per validation grid point
//! - `compare.csv`, `compare.md`: benchmark vs proposed, side by side

pub mod plot;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::datasets::{load_csv, split, Dataset, SyntheticRecipe};
use crate::distributions::fit_weibull_mle;
use crate::error::{Error, Result};
use crate::mc_validation::{default_moment_grid, default_quadrature_grid, run_validation};
use crate::neural_net::{Architecture, HeadKind};
use crate::trainer::{
    evaluate, linear_grid, log_grid, run_trials, sweep_c, EvalReport, EvidentialModel, GridKind,
    MeanStd, SweepConfig, SweepReport, TrainConfig, TrialSummary,
};
use plot::{read_predictions, render_svg, Abscissa};

#[derive(Debug, Parser)]
#[command(name = "evid", version, about = "Weibull evidential regression toolkit")]
pub struct Cli {
    /// Global seed; falls back to EVID_SEED, then the config file, then 0.
    #[arg(long, env = "EVID_SEED", global = true)]
    pub seed: Option<u64>,
    /// Worker threads for sweeps and trials. Results do not depend on it.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// JSON experiment config; command-line flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write synthetic train.csv / test.csv (y = x² + Weibull noise).
    GenData(GenDataArgs),
    /// Fit a Weibull distribution to one CSV column and print k̂ and λ̂.
    FitShape(FitShapeArgs),
    /// Train once per regularisation value and report the best one.
    Sweep(SweepArgs),
    /// Train a model (optionally several seeds) and save a checkpoint.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset.
    Evaluate(EvaluateArgs),
    /// Check the closed-form math against sampling and quadrature.
    ValidateMath(ValidateArgs),
    /// Render a predictions CSV as SVG.
    Plot(PlotArgs),
    /// Sweep and run trials for both heads and tabulate the results.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecipeKind {
    Main,
    Appendix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepPreset {
    Synthetic,
    Recovery,
}

/// Synthetic dataset recipe.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecipeOpts {
    #[arg(long, value_enum)]
    pub recipe: Option<RecipeKind>,
    /// Noise scale λ (required for the main recipe).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Noise shape (defaults: 1.6 main, 1.2 appendix).
    #[arg(long = "noise-k")]
    pub noise_k: Option<f64>,
    /// Training points.
    #[arg(long)]
    pub n: Option<usize>,
    /// Test points.
    #[arg(long)]
    pub n_test: Option<usize>,
}

impl RecipeOpts {
    fn merged(&self, file: &RecipeOpts) -> RecipeOpts {
        RecipeOpts {
            recipe: self.recipe.or(file.recipe),
            lambda: self.lambda.or(file.lambda),
            noise_k: self.noise_k.or(file.noise_k),
            n: self.n.or(file.n),
            n_test: self.n_test.or(file.n_test),
        }
    }

    fn build(&self) -> Result<SyntheticRecipe> {
        let mut r = match self.recipe.unwrap_or(RecipeKind::Main) {
            RecipeKind::Main => {
                let lambda = self.lambda.ok_or_else(|| {
                    Error::Config("--lambda is required with --recipe main".into())
                })?;
                SyntheticRecipe::main(lambda)?
            }
            RecipeKind::Appendix => {
                let mut r = SyntheticRecipe::appendix();
                if let Some(l) = self.lambda {
                    r.noise = crate::WeibullParams::new(r.noise.k, l)?;
                }
                r
            }
        };
        if let Some(k) = self.noise_k {
            r.noise = crate::WeibullParams::new(k, r.noise.lambda)?;
        }
        if let Some(n) = self.n {
            r.n_train = n;
        }
        if let Some(n) = self.n_test {
            r.n_test = n;
        }
        Ok(r)
    }
}

/// Training hyperparameters; every field falls back to the config file, then to defaults.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainOpts {
    /// `weibull` (proposed) or `nig` (benchmark).
    #[arg(long)]
    pub head: Option<HeadKind>,
    /// `synthetic`, `recovery`, `recovery:<width>` or a width list like `64,64`.
    #[arg(long = "arch")]
    pub architecture: Option<Architecture>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long = "lr")]
    pub learning_rate: Option<f64>,
    /// Regularisation coefficient.
    #[arg(long)]
    pub c: Option<f64>,
    /// Weibull shape; otherwise read from meta.json or fitted on the targets.
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long)]
    pub grad_clip: Option<f64>,
    /// Standardise features on training statistics.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub standardize: Option<bool>,
}

impl TrainOpts {
    fn merged(&self, file: &TrainOpts) -> TrainOpts {
        TrainOpts {
            head: self.head.or(file.head),
            architecture: self.architecture.clone().or_else(|| file.architecture.clone()),
            epochs: self.epochs.or(file.epochs),
            batch_size: self.batch_size.or(file.batch_size),
            learning_rate: self.learning_rate.or(file.learning_rate),
            c: self.c.or(file.c),
            k: self.k.or(file.k),
            grad_clip: self.grad_clip.or(file.grad_clip),
            standardize: self.standardize.or(file.standardize),
        }
    }

    fn build(&self, default_head: HeadKind, seed: u64) -> Result<TrainConfig> {
        let mut c = TrainConfig::new(self.head.unwrap_or(default_head));
        c.seed = seed;
        if let Some(a) = &self.architecture {
            c.architecture = a.clone();
        }
        if let Some(v) = self.epochs {
            c.epochs = v;
        }
        if let Some(v) = self.batch_size {
            c.batch_size = v;
        }
        if let Some(v) = self.learning_rate {
            c.learning_rate = v;
        }
        if let Some(v) = self.c {
            c.c = v;
        }
        c.k = self.k;
        if let Some(v) = self.grad_clip {
            c.grad_clip = v;
        }
        if let Some(v) = self.standardize {
            c.standardize = v;
        }
        c.validate()?;
        Ok(c)
    }
}

/// Input data: CSV files, optionally split.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataOpts {
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Target column name.
    #[arg(long)]
    pub target: Option<String>,
    /// Feature columns; all other columns when omitted.
    #[arg(long, value_delimiter = ',')]
    pub features: Option<Vec<String>>,
    /// Hold out this fraction of `--train` as the test set when `--test` is absent.
    #[arg(long)]
    pub test_fraction: Option<f64>,
}

impl DataOpts {
    fn merged(&self, file: &DataOpts) -> DataOpts {
        DataOpts {
            train: self.train.clone().or_else(|| file.train.clone()),
            test: self.test.clone().or_else(|| file.test.clone()),
            target: self.target.clone().or_else(|| file.target.clone()),
            features: self.features.clone().or_else(|| file.features.clone()),
            test_fraction: self.test_fraction.or(file.test_fraction),
        }
    }

    fn target(&self) -> &str {
        self.target.as_deref().unwrap_or("y")
    }

    fn load_train(&self) -> Result<Dataset> {
        let path = self
            .train
            .as_ref()
            .ok_or_else(|| Error::Config("--train <CSV> is required".into()))?;
        load_dataset(path, self.target(), self.features.as_deref())
    }

    /// Train set plus a test set from `--test` or a seeded hold-out.
    fn load_pair(&self, seed: u64) -> Result<(Dataset, Option<Dataset>)> {
        let train = self.load_train()?;
        if let Some(p) = &self.test {
            let mut test = load_dataset(p, self.target(), self.features.as_deref())?;
            test.k_hat = test.k_hat.or(train.k_hat);
            return Ok((train, Some(test)));
        }
        match self.test_fraction {
            Some(f) => {
                let (a, b) = split(&train, f, seed)?;
                Ok((a, Some(b)))
            }
            None => Ok((train, None)),
        }
    }
}

/// Sidecar written next to generated CSVs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataMeta {
    pub recipe: RecipeKind,
    pub noise_k: f64,
    pub noise_lambda: f64,
    pub k_hat: Option<f64>,
    pub seed: u64,
}

fn load_dataset(path: &Path, target: &str, features: Option<&[String]>) -> Result<Dataset> {
    let load = load_csv(path, target, features)?;
    if load.dropped_rows > 0 {
        eprintln!(
            "warning: dropped {} unusable row(s) from {}",
            load.dropped_rows,
            path.display()
        );
    }
    let mut data = load.dataset;
    let meta = path.with_file_name("meta.json");
    if meta.exists() {
        let m: DataMeta = serde_json::from_str(&fs::read_to_string(&meta)?)?;
        data.k_hat = m.k_hat;
    }
    Ok(data)
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridOpts {
    /// Log-spaced grid: LO HI N.
    #[arg(long, num_args = 3, value_names = ["LO", "HI", "N"], conflicts_with_all = ["grid_linear", "grid"])]
    pub grid_log: Option<Vec<f64>>,
    /// Linearly spaced grid: LO HI N.
    #[arg(long, num_args = 3, value_names = ["LO", "HI", "N"], conflicts_with = "grid")]
    pub grid_linear: Option<Vec<f64>>,
    /// Explicit comma-separated values.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    /// Default grid when none is given.
    #[arg(long, value_enum)]
    pub preset: Option<SweepPreset>,
}

impl GridOpts {
    fn merged(&self, file: &GridOpts) -> GridOpts {
        if self.grid_log.is_some() || self.grid_linear.is_some() || self.grid.is_some() {
            return GridOpts {
                preset: self.preset.or(file.preset),
                ..self.clone()
            };
        }
        GridOpts {
            preset: self.preset.or(file.preset),
            ..file.clone()
        }
    }

    fn build(&self, base: TrainConfig) -> Result<SweepConfig> {
        let triple = |v: &[f64]| -> Result<(f64, f64, usize)> {
            let n = v[2];
            if n < 1.0 || n.fract() != 0.0 {
                return Err(Error::Config(format!("grid size must be a positive integer, got {n}")));
            }
            Ok((v[0], v[1], n as usize))
        };
        if let Some(v) = &self.grid_log {
            let (lo, hi, n) = triple(v)?;
            return SweepConfig::new(log_grid(lo, hi, n)?, GridKind::Log, base);
        }
        if let Some(v) = &self.grid_linear {
            let (lo, hi, n) = triple(v)?;
            return SweepConfig::new(linear_grid(lo, hi, n)?, GridKind::Linear, base);
        }
        if let Some(g) = &self.grid {
            return SweepConfig::new(g.clone(), GridKind::Linear, base);
        }
        let s = match self.preset.unwrap_or(SweepPreset::Synthetic) {
            SweepPreset::Synthetic => SweepConfig::synthetic_default(base),
            SweepPreset::Recovery => SweepConfig::recovery_default(base),
        };
        s.validate()?;
        Ok(s)
    }
}

/// JSON experiment document. Every section is optional; flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub recipe: RecipeOpts,
    pub data: DataOpts,
    pub train: TrainOpts,
    pub sweep: GridOpts,
    pub trials: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[command(flatten)]
    pub recipe: RecipeOpts,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitShapeArgs {
    /// CSV with a header row.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "y")]
    pub column: String,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataOpts,
    #[command(flatten)]
    pub train: TrainOpts,
    #[command(flatten)]
    pub grid: GridOpts,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataOpts,
    #[command(flatten)]
    pub train: TrainOpts,
    /// Train this many seeds (seed, seed+1, ...) and report mean ± std.
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "y")]
    pub target: String,
    #[arg(long, value_delimiter = ',')]
    pub features: Option<Vec<String>>,
    /// Label used in file names and the `split` column.
    #[arg(long, default_value = "test")]
    pub split: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Draws per moment check.
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
    /// Shapes for the moment grid.
    #[arg(long, value_delimiter = ',')]
    pub grid_k: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub grid_alpha: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub grid_beta: Option<Vec<f64>>,
    /// Single moment check at this α (with --k and --beta).
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub k: Option<f64>,
    /// Skip the quadrature grid.
    #[arg(long)]
    pub no_quadrature: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// A predictions_<split>.csv file.
    #[arg(long)]
    pub predictions: PathBuf,
    /// Output SVG path.
    #[arg(long)]
    pub out: PathBuf,
    /// Use the observed target as the horizontal axis (multi-feature data).
    #[arg(long)]
    pub against_target: bool,
    #[arg(long)]
    pub title: Option<String>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub recipe: RecipeOpts,
    /// Several noise scales for the main recipe, e.g. 0.2,0.3,0.4.
    #[arg(long, value_delimiter = ',', conflicts_with = "lambda")]
    pub lambdas: Option<Vec<f64>>,
    #[command(flatten)]
    pub data: DataOpts,
    #[command(flatten)]
    pub train: TrainOpts,
    #[command(flatten)]
    pub grid: GridOpts,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

struct Context {
    seed: u64,
    jobs: usize,
    file: ExperimentConfig,
}

impl Context {
    fn out_dir(&self, flag: &Option<PathBuf>) -> Result<PathBuf> {
        let dir = flag
            .clone()
            .or_else(|| self.file.out_dir.clone())
            .unwrap_or_else(|| PathBuf::from("."));
        fs::create_dir_all(&dir)?;
        Ok(dir)
    }
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let ctx = Context {
        seed: cli.seed.or(file.seed).unwrap_or(0),
        jobs: cli.jobs.max(1),
        file,
    };
    match cli.command {
        Command::GenData(a) => cmd_gen_data(&ctx, a),
        Command::FitShape(a) => cmd_fit_shape(a),
        Command::Sweep(a) => cmd_sweep(&ctx, a),
        Command::Train(a) => cmd_train(&ctx, a),
        Command::Evaluate(a) => cmd_evaluate(&ctx, a),
        Command::ValidateMath(a) => cmd_validate_math(&ctx, a),
        Command::Plot(a) => cmd_plot(a),
        Command::Compare(a) => cmd_compare(&ctx, a),
    }
}

fn cmd_gen_data(ctx: &Context, a: GenDataArgs) -> Result<()> {
    let opts = a.recipe.merged(&ctx.file.recipe);
    let recipe = opts.build()?;
    let (train, test) = recipe.generate(ctx.seed)?;
    let dir = ctx.out_dir(&a.out)?;
    train.write_csv(dir.join("train.csv"))?;
    test.write_csv(dir.join("test.csv"))?;
    let meta = DataMeta {
        recipe: opts.recipe.unwrap_or(RecipeKind::Main),
        noise_k: recipe.noise.k,
        noise_lambda: recipe.noise.lambda,
        k_hat: train.k_hat,
        seed: ctx.seed,
    };
    fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)?)?;
    eprintln!(
        "wrote {} train / {} test rows to {} (k_hat = {})",
        train.len(),
        test.len(),
        dir.display(),
        train.k_hat.map_or("n/a".into(), |k| format!("{k:.6}"))
    );
    Ok(())
}

/// Finite values of one column; unparseable cells are skipped.
fn read_column(path: &Path, column: &str) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path)?;
    let headers: Vec<String> = r.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let i = headers.iter().position(|h| h == column).ok_or_else(|| {
        if headers.iter().all(|h| h.is_empty()) {
            Error::EmptyData(format!("{} is empty", path.display()))
        } else {
            Error::Schema(format!(
                "column '{column}' not found; available columns: {}",
                headers.join(", ")
            ))
        }
    })?;
    let mut out = Vec::new();
    for rec in r.records() {
        if let Some(v) = rec?.get(i).and_then(|s| s.trim().parse::<f64>().ok()) {
            if v.is_finite() {
                out.push(v);
            }
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyData(format!(
            "no numeric values in column '{column}' of {}",
            path.display()
        )));
    }
    Ok(out)
}

fn cmd_fit_shape(a: FitShapeArgs) -> Result<()> {
    if fs::metadata(&a.data)?.len() == 0 {
        return Err(Error::EmptyData(format!("{} is empty", a.data.display())));
    }
    let values = read_column(&a.data, &a.column)?;
    let floored: Vec<f64> = values.iter().map(|v| v.max(crate::datasets::TARGET_FLOOR)).collect();
    let fit = fit_weibull_mle(&floored)?;
    println!("k_hat = {}", fit.k);
    println!("lambda_hat = {}", fit.lambda);
    eprintln!("fitted on {} values of '{}'", values.len(), a.column);
    Ok(())
}

fn write_sweep(path: &Path, report: &SweepReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["c", "final_loss", "error", "best"])?;
    for e in &report.entries {
        w.write_record([
            e.c.to_string(),
            e.final_loss.map(|l| l.to_string()).unwrap_or_default(),
            e.error.clone().unwrap_or_default(),
            (e.c == report.best_c).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_sweep(ctx: &Context, a: SweepArgs) -> Result<()> {
    let data_opts = a.data.merged(&ctx.file.data);
    let base = a.train.merged(&ctx.file.train).build(HeadKind::WeibullGamma, ctx.seed)?;
    let sweep = a.grid.merged(&ctx.file.sweep).build(base)?;
    let train = data_opts.load_train()?;
    let report = sweep_c(&sweep, &train, ctx.jobs)?;
    let dir = ctx.out_dir(&a.out)?;
    write_sweep(&dir.join("sweep.csv"), &report)?;
    eprintln!(
        "best c = {} (final training loss {:.6}) over {} grid point(s)",
        report.best_c,
        report.best_loss,
        report.entries.len()
    );
    Ok(())
}

fn write_history(path: &Path, history: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["epoch", "loss"])?;
    for (i, l) in history.iter().enumerate() {
        w.write_record([(i + 1).to_string(), l.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn write_eval(path: &Path, split: &str, r: &EvalReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["split", "mse", "nll", "inf_var_count"])?;
    w.write_record([
        split.to_string(),
        r.mse.to_string(),
        r.nll.to_string(),
        r.inf_var_count.to_string(),
    ])?;
    w.flush()?;
    Ok(())
}

/// Per-point predictions; the first column is `x` for 1-D data, `row_id` otherwise.
pub fn write_predictions(path: &Path, data: &Dataset, r: &EvalReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let one_d = data.n_features() == 1;
    w.write_record([if one_d { "x" } else { "row_id" }, "y", "z_mean", "z_var"])?;
    for (i, p) in r.predictions.iter().enumerate() {
        let first = if one_d {
            data.features[[i, 0]].to_string()
        } else {
            i.to_string()
        };
        w.write_record([
            first,
            data.targets[i].to_string(),
            p.mean.to_string(),
            p.variance.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_trials(path: &Path, s: &TrialSummary) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "seed",
        "train_mse",
        "test_mse",
        "train_nll",
        "test_nll",
        "test_inf_var_count",
    ])?;
    for r in &s.runs {
        w.write_record([
            r.seed.to_string(),
            r.train.mse.to_string(),
            r.test.mse.to_string(),
            r.train.nll.to_string(),
            r.test.nll.to_string(),
            r.test.inf_var_count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_train(ctx: &Context, a: TrainArgs) -> Result<()> {
    let data_opts = a.data.merged(&ctx.file.data);
    let config = a.train.merged(&ctx.file.train).build(HeadKind::WeibullGamma, ctx.seed)?;
    let dir = ctx.out_dir(&a.out)?;
    let (train, test) = data_opts.load_pair(ctx.seed)?;
    let trials = a.trials.or(ctx.file.trials).unwrap_or(1);
    if trials > 1 {
        let test = test.ok_or_else(|| {
            Error::Config("--trials needs a test set (--test or --test-fraction)".into())
        })?;
        let s = run_trials(&config, trials, &train, &test, ctx.jobs)?;
        write_trials(&dir.join("trials.csv"), &s)?;
        for (seed, e) in &s.failures {
            eprintln!("warning: trial with seed {seed} failed: {e}");
        }
        s.runs[0].model.save(dir.join("model.json"))?;
        eprintln!(
            "{} trial(s): test MSE {}, test NLL {}",
            s.runs.len(),
            s.test_mse,
            s.test_nll
        );
        return Ok(());
    }
    let outcome = crate::trainer::train(&config, &train)?;
    outcome.model.save(dir.join("model.json"))?;
    write_history(&dir.join("history.csv"), &outcome.history)?;
    eprintln!(
        "trained {} head for {} epochs, final training loss {:.6}",
        config.head, config.epochs, outcome.final_loss
    );
    if let Some(test) = test {
        let r = evaluate(&outcome.model, &test)?;
        write_eval(&dir.join("eval_test.csv"), "test", &r)?;
        write_predictions(&dir.join("predictions_test.csv"), &test, &r)?;
    }
    Ok(())
}

fn cmd_evaluate(ctx: &Context, a: EvaluateArgs) -> Result<()> {
    let model = EvidentialModel::load(&a.model)?;
    let data = load_dataset(&a.data, &a.target, a.features.as_deref())?;
    let r = evaluate(&model, &data)?;
    let dir = ctx.out_dir(&a.out)?;
    write_eval(&dir.join(format!("eval_{}.csv", a.split)), &a.split, &r)?;
    write_predictions(&dir.join(format!("predictions_{}.csv", a.split)), &data, &r)?;
    eprintln!(
        "{}: mse {:.6}, nll {:.6}, {} infinite-variance prediction(s)",
        a.split, r.mse, r.nll, r.inf_var_count
    );
    Ok(())
}

fn cmd_validate_math(ctx: &Context, a: ValidateArgs) -> Result<()> {
    let moment_grid: Vec<(f64, f64, f64)> = if a.alpha.is_some() || a.k.is_some() || a.beta.is_some() {
        vec![(a.k.unwrap_or(1.0), a.alpha.unwrap_or(3.0), a.beta.unwrap_or(1.0))]
    } else if a.grid_k.is_some() || a.grid_alpha.is_some() || a.grid_beta.is_some() {
        let ks = a.grid_k.clone().unwrap_or_else(|| vec![1.0, 1.2, 1.254, 1.6, 2.0]);
        let alphas = a.grid_alpha.clone().unwrap_or_else(|| vec![2.2, 3.0, 6.0]);
        let betas = a.grid_beta.clone().unwrap_or_else(|| vec![0.5, 2.0]);
        let mut g = Vec::new();
        for &k in &ks {
            for &al in &alphas {
                for &b in &betas {
                    g.push((k, al, b));
                }
            }
        }
        g
    } else {
        default_moment_grid()
    };
    let quad_grid = if a.no_quadrature {
        Vec::new()
    } else {
        default_quadrature_grid()
    };
    let summary = run_validation(&moment_grid, &quad_grid, a.samples, ctx.seed)?;
    let dir = ctx.out_dir(&a.out)?;
    summary.write_csv(dir.join("moments.csv"), dir.join("quadrature.csv"))?;
    for m in &summary.moments {
        let var = match m.variance_pass {
            Some(true) => "pass".to_string(),
            Some(false) => "FAIL".to_string(),
            None => "not graded".to_string(),
        };
        eprintln!(
            "k={} alpha={} beta={}: mean {} ({:.2e} rel, se {:.2e}), variance {var} ({:.2e} rel, se {:.2e}){}",
            m.k,
            m.alpha,
            m.beta,
            if m.mean_pass { "pass" } else { "FAIL" },
            m.mean_rel_error(),
            m.mean_std_error,
            m.variance_rel_error(),
            m.variance_std_error,
            if m.note.is_empty() { String::new() } else { format!("; {}", m.note) }
        );
    }
    let q_pass = summary.quadrature.iter().filter(|q| q.pass).count();
    let m_pass = summary.moments.iter().filter(|m| m.passed()).count();
    eprintln!(
        "moment checks: {m_pass}/{} passed; quadrature checks: {q_pass}/{} passed",
        summary.moments.len(),
        summary.quadrature.len()
    );
    if summary.all_passed() {
        Ok(())
    } else {
        Err(Error::Validation(format!(
            "{} of {} checks failed",
            summary.total() - summary.passed(),
            summary.total()
        )))
    }
}

fn cmd_plot(a: PlotArgs) -> Result<()> {
    let abscissa = if a.against_target {
        Abscissa::Target
    } else {
        Abscissa::Feature
    };
    let points = read_predictions(&a.predictions, abscissa)?;
    let title = a.title.unwrap_or_else(|| {
        a.predictions
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let x_label = if a.against_target { "observed y" } else { "x" };
    let svg = render_svg(&points, &title, x_label)?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(&a.out, svg)?;
    Ok(())
}

/// Sweep then trials for one head on one dataset.
pub struct HeadResult {
    pub head: HeadKind,
    pub sweep: SweepReport,
    pub trials: TrialSummary,
}

/// Runs the sweep, retrains `n_trials` seeds at the best `c` and evaluates on `test`.
pub fn sweep_and_trials(
    base: &TrainConfig,
    grid: &GridOpts,
    train: &Dataset,
    test: &Dataset,
    n_trials: usize,
    jobs: usize,
) -> Result<HeadResult> {
    let sweep = grid.build(base.clone())?;
    let report = sweep_c(&sweep, train, jobs)?;
    let cfg = TrainConfig {
        c: report.best_c,
        ..base.clone()
    };
    let trials = run_trials(&cfg, n_trials, train, test, jobs)?;
    Ok(HeadResult {
        head: base.head,
        sweep: report,
        trials,
    })
}

/// One row of the comparison table.
pub struct CompareRow {
    pub label: String,
    pub benchmark: HeadResult,
    pub proposed: HeadResult,
}

fn mean_inf(s: &TrialSummary) -> f64 {
    s.runs.iter().map(|r| r.test.inf_var_count as f64).sum::<f64>() / s.runs.len() as f64
}

pub fn write_compare(dir: &Path, rows: &[CompareRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(dir.join("compare.csv"))?;
    w.write_record([
        "label",
        "benchmark_c",
        "proposed_c",
        "mse_test_benchmark",
        "mse_test_benchmark_std",
        "mse_test_proposed",
        "mse_test_proposed_std",
        "nll_test_benchmark",
        "nll_test_benchmark_std",
        "nll_test_proposed",
        "nll_test_proposed_std",
        "inf_var_test_benchmark",
        "inf_var_test_proposed",
    ])?;
    let mut md = String::from(
        "| | MSE(test) benchmark | MSE(test) proposed | NLL(test) benchmark | NLL(test) proposed |\n|---|---|---|---|---|\n",
    );
    for r in rows {
        let (b, p) = (&r.benchmark.trials, &r.proposed.trials);
        w.write_record([
            r.label.clone(),
            r.benchmark.sweep.best_c.to_string(),
            r.proposed.sweep.best_c.to_string(),
            b.test_mse.mean.to_string(),
            b.test_mse.std.to_string(),
            p.test_mse.mean.to_string(),
            p.test_mse.std.to_string(),
            b.test_nll.mean.to_string(),
            b.test_nll.std.to_string(),
            p.test_nll.mean.to_string(),
            p.test_nll.std.to_string(),
            mean_inf(b).to_string(),
            mean_inf(p).to_string(),
        ])?;
        let bold = |x: &MeanStd, better: bool| {
            if better {
                format!("**{x}**")
            } else {
                x.to_string()
            }
        };
        md.push_str(&format!(
            "| {} | {} | {} | {} | {} |\n",
            r.label,
            bold(&b.test_mse, b.test_mse.mean <= p.test_mse.mean),
            bold(&p.test_mse, p.test_mse.mean < b.test_mse.mean),
            bold(&b.test_nll, b.test_nll.mean <= p.test_nll.mean),
            bold(&p.test_nll, p.test_nll.mean < b.test_nll.mean),
        ));
    }
    w.flush()?;
    fs::write(dir.join("compare.md"), md)?;
    Ok(())
}

fn cmd_compare(ctx: &Context, a: CompareArgs) -> Result<()> {
    let recipe_opts = a.recipe.merged(&ctx.file.recipe);
    let data_opts = a.data.merged(&ctx.file.data);
    let train_opts = a.train.merged(&ctx.file.train);
    let grid = a.grid.merged(&ctx.file.sweep);
    let n_trials = a.trials.or(ctx.file.trials).unwrap_or(5);
    let dir = ctx.out_dir(&a.out)?;

    let mut datasets: Vec<(String, Dataset, Dataset)> = Vec::new();
    if data_opts.train.is_some() {
        let (train, test) = data_opts.load_pair(ctx.seed)?;
        let test = test.ok_or_else(|| {
            Error::Config("compare needs a test set (--test or --test-fraction)".into())
        })?;
        datasets.push(("data".into(), train, test));
    } else {
        let lambdas = match (&a.lambdas, recipe_opts.lambda) {
            (Some(ls), _) => ls.iter().map(|l| Some(*l)).collect(),
            (None, l) => vec![l],
        };
        for l in lambdas {
            let opts = RecipeOpts {
                lambda: l,
                ..recipe_opts.clone()
            };
            let recipe = opts.build()?;
            let (train, test) = recipe.generate(ctx.seed)?;
            datasets.push((format!("{}", recipe.noise.lambda), train, test));
        }
    }

    let mut rows = Vec::new();
    for (label, train, test) in &datasets {
        let mut per_head = Vec::new();
        for head in [HeadKind::NormalGamma, HeadKind::WeibullGamma] {
            let base = TrainOpts {
                head: Some(head),
                ..train_opts.clone()
            }
            .build(head, ctx.seed)?;
            let r = sweep_and_trials(&base, &grid, train, test, n_trials, ctx.jobs)?;
            for (seed, e) in &r.trials.failures {
                eprintln!("warning: {label} {head} trial seed {seed} failed: {e}");
            }
            let first = &r.trials.runs[0];
            let stem = format!("{label}_{}", head.name());
            first.model.save(dir.join(format!("model_{stem}.json")))?;
            write_predictions(&dir.join(format!("predictions_{stem}.csv")), test, &first.test)?;
            write_sweep(&dir.join(format!("sweep_{stem}.csv")), &r.sweep)?;
            write_trials(&dir.join(format!("trials_{stem}.csv")), &r.trials)?;
            eprintln!(
                "{label} {head}: best c {}, test MSE {}, test NLL {}, mean infinite-variance points {:.1}",
                r.sweep.best_c,
                r.trials.test_mse,
                r.trials.test_nll,
                mean_inf(&r.trials)
            );
            per_head.push(r);
        }
        let proposed = per_head.pop().expect("two heads");
        let benchmark = per_head.pop().expect("two heads");
        rows.push(CompareRow {
            label: label.clone(),
            benchmark,
            proposed,
        });
    }
    write_compare(&dir, &rows)
}

/// Exit status for an error: 2 for configuration problems, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 2,
        _ => 1,
    }
}
