//! Mini-batch training, regularisation sweeps, repeated trials and metrics.

use std::fmt;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::{Dataset, Standardizer, TARGET_FLOOR};
use crate::distributions::fit_weibull_mle;
use crate::error::{Error, Result};
use crate::evidential_nig::{nig_loss_gradients, nig_nll, nig_predict, NigParams};
use crate::evidential_weibull::{self as ew, EvidentialParams, PredictiveSummary};
use crate::neural_net::checkpoint::Checkpoint;
use crate::neural_net::head::{normal_gamma_head_backward, weibull_gamma_head_backward};
use crate::neural_net::{
    normal_gamma_head, weibull_gamma_head, AdamConfig, AdamState, Architecture, Gradients, HeadKind,
    Mlp,
};

const DIVERGENCE_PATIENCE: usize = 3;
const SHUFFLE_STREAM: u64 = 0x5EED_5F1E;

fn default_epochs() -> usize {
    500
}
fn default_batch_size() -> usize {
    128
}
fn default_learning_rate() -> f64 {
    5e-4
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}
fn default_grad_clip() -> f64 {
    10.0
}
fn default_target_floor() -> f64 {
    TARGET_FLOOR
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    /// Regularisation coefficient.
    #[serde(default)]
    pub c: f64,
    #[serde(default)]
    pub seed: u64,
    pub head: HeadKind,
    #[serde(default = "TrainConfig::default_architecture")]
    pub architecture: Architecture,
    /// Weibull shape; when absent the dataset's `k_hat` is used, or fitted on the targets.
    #[serde(default)]
    pub k: Option<f64>,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_grad_clip")]
    pub grad_clip: f64,
    #[serde(default = "default_target_floor")]
    pub target_floor: f64,
    /// Standardise features on training statistics.
    #[serde(default)]
    pub standardize: bool,
}

impl TrainConfig {
    fn default_architecture() -> Architecture {
        Architecture::Synthetic
    }

    pub fn new(head: HeadKind) -> Self {
        Self {
            epochs: default_epochs(),
            batch_size: default_batch_size(),
            learning_rate: default_learning_rate(),
            c: 0.0,
            seed: 0,
            head,
            architecture: Architecture::Synthetic,
            k: None,
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
            grad_clip: default_grad_clip(),
            target_floor: default_target_floor(),
            standardize: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.epochs < 1 {
            return bad("epochs must be >= 1".into());
        }
        if self.batch_size < 1 {
            return bad("batch size must be >= 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be > 0, got {}", self.learning_rate));
        }
        if !(self.c >= 0.0 && self.c.is_finite()) {
            return bad(format!("regularisation coefficient must be >= 0, got {}", self.c));
        }
        if let Some(k) = self.k {
            if !(k > 0.0 && k.is_finite()) {
                return bad(format!("shape k must be > 0, got {k}"));
            }
        }
        if !(self.grad_clip > 0.0) {
            return bad("gradient clip norm must be > 0".into());
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }
}

/// Per-observation output of an evidential head.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HeadOutput {
    Weibull(EvidentialParams),
    Nig(NigParams),
}

impl HeadOutput {
    pub fn from_raw(head: HeadKind, raw: ArrayView1<f64>) -> Self {
        match head {
            HeadKind::WeibullGamma => HeadOutput::Weibull(weibull_gamma_head([raw[0], raw[1]])),
            HeadKind::NormalGamma => {
                HeadOutput::Nig(normal_gamma_head([raw[0], raw[1], raw[2], raw[3]]))
            }
        }
    }

    pub fn summary(&self, k: Option<f64>) -> Result<PredictiveSummary> {
        match self {
            HeadOutput::Weibull(ev) => ew::predict(require_k(k)?, ev),
            HeadOutput::Nig(p) => Ok(nig_predict(p)),
        }
    }

    pub fn nll(&self, y: f64, k: Option<f64>) -> Result<f64> {
        match self {
            HeadOutput::Weibull(ev) => ew::nll(y, require_k(k)?, ev),
            HeadOutput::Nig(p) => Ok(nig_nll(y, p)),
        }
    }
}

fn require_k(k: Option<f64>) -> Result<f64> {
    k.ok_or_else(|| Error::Config("the Weibull head needs a shape parameter k".into()))
}

/// Loss of one row and its gradient with respect to the raw head inputs.
fn row_loss_and_grad(
    head: HeadKind,
    k: f64,
    c: f64,
    y: f64,
    raw: ArrayView1<f64>,
    grad_out: &mut [f64],
) -> Result<f64> {
    match head {
        HeadKind::WeibullGamma => {
            let r = [raw[0], raw[1]];
            let ev = weibull_gamma_head(r);
            let (loss, d) = if c == 0.0 {
                // Pure likelihood training: skip the regulariser entirely.
                let nll = ew::nll(y, k, &ev)?;
                let s = y.powf(k) + ev.beta;
                let d_a = -1.0 / ev.alpha - ev.beta.ln() + s.ln();
                let d_b = -ev.alpha / ev.beta + (ev.alpha + 1.0) / s;
                (nll, [d_a, d_b])
            } else {
                let g = ew::loss_gradients(y, k, &ev, c)?;
                (g.loss, [g.d_alpha, g.d_beta])
            };
            grad_out.copy_from_slice(&weibull_gamma_head_backward(r, d));
            Ok(loss)
        }
        HeadKind::NormalGamma => {
            let r = [raw[0], raw[1], raw[2], raw[3]];
            let g = nig_loss_gradients(y, &normal_gamma_head(r), c);
            grad_out.copy_from_slice(&normal_gamma_head_backward(r, g.as_array()));
            Ok(g.loss)
        }
    }
}

/// A network together with everything needed to interpret its inputs and outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct EvidentialModel {
    pub net: Mlp,
    /// Weibull shape, frozen at training time.
    pub k: Option<f64>,
    pub standardization: Option<Standardizer>,
}

impl EvidentialModel {
    pub fn head(&self) -> HeadKind {
        self.net.head
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint::from_parts(&self.net, self.k, self.standardization.as_ref())
    }

    pub fn from_checkpoint(ck: Checkpoint) -> Result<Self> {
        let (net, k, standardization) = ck.into_parts()?;
        Ok(Self {
            net,
            k,
            standardization,
        })
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_checkpoint(Checkpoint::load(path)?)
    }

    fn features_for(&self, data: &Dataset) -> Result<Array2<f64>> {
        let mut x = data.features.clone();
        if let (Some(s), None) = (&self.standardization, &data.standardization) {
            s.transform_features(&mut x)?;
        }
        Ok(x)
    }

    /// Head outputs for every row of `data`.
    pub fn head_outputs(&self, data: &Dataset) -> Result<Vec<HeadOutput>> {
        let x = self.features_for(data)?;
        let raw = self.net.predict_raw(x.view())?;
        Ok(raw
            .rows()
            .into_iter()
            .map(|r| HeadOutput::from_raw(self.net.head, r))
            .collect())
    }

    pub fn predict(&self, data: &Dataset) -> Result<Vec<PredictiveSummary>> {
        self.head_outputs(data)?
            .iter()
            .map(|o| o.summary(self.k))
            .collect()
    }

    /// Batch-mean of the training objective over `data`.
    pub fn total_loss(&self, data: &Dataset, c: f64) -> Result<f64> {
        let x = self.features_for(data)?;
        let raw = self.net.predict_raw(x.view())?;
        let k = self.k.unwrap_or(1.0);
        let mut scratch = vec![0.0; self.net.head.raw_width()];
        let mut sum = 0.0;
        for (row, y) in raw.rows().into_iter().zip(data.targets.iter()) {
            sum += row_loss_and_grad(self.net.head, k, c, *y, row, &mut scratch)?;
        }
        Ok(sum / data.len() as f64)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: EvidentialModel,
    /// Epoch-mean training loss, one entry per epoch.
    pub history: Vec<f64>,
    /// Objective over the full training set after the last epoch.
    pub final_loss: f64,
}

/// Resolves the Weibull shape: explicit config, then the dataset's `k̂`, then an MLE fit.
pub fn resolve_shape(config: &TrainConfig, data: &Dataset) -> Result<Option<f64>> {
    if config.head != HeadKind::WeibullGamma {
        return Ok(config.k.or(data.k_hat));
    }
    let k = match config.k.or(data.k_hat) {
        Some(k) => k,
        None => {
            let prepared = data.prepare_for_weibull(config.target_floor)?;
            fit_weibull_mle(prepared.targets.as_slice().expect("contiguous"))?.k
        }
    };
    if k <= 0.5 {
        return Err(Error::Config(format!(
            "Weibull head needs k > 0.5 so that alpha > 2 keeps the mean finite, got k = {k}"
        )));
    }
    Ok(Some(k))
}

/// Batch-mean loss and its gradient with respect to every network parameter.
pub fn batch_loss_and_gradients(
    net: &Mlp,
    k: f64,
    c: f64,
    x: ArrayView2<f64>,
    y: &[f64],
) -> Result<(f64, Gradients)> {
    if x.nrows() != y.len() || y.is_empty() {
        return Err(Error::Shape(format!("{} rows for {} targets", x.nrows(), y.len())));
    }
    let width = net.head.raw_width();
    let cache = net.forward(x)?;
    let mut d_out = Array2::zeros((y.len(), width));
    let scale = 1.0 / y.len() as f64;
    let mut sum = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        let mut g = d_out.row_mut(i);
        let gs = g.as_slice_mut().expect("row-major");
        sum += row_loss_and_grad(net.head, k, c, yi, cache.output.row(i), gs)?;
        gs.iter_mut().for_each(|v| *v *= scale);
    }
    let grads = net.backward(&cache, d_out.view())?;
    Ok((sum * scale, grads))
}

/// Trains a fresh network on `train_data` with mini-batch Adam.
pub fn train(config: &TrainConfig, train_data: &Dataset) -> Result<TrainOutcome> {
    config.validate()?;
    if train_data.is_empty() {
        return Err(Error::EmptyData("training set is empty".into()));
    }
    let k = resolve_shape(config, train_data)?;
    let mut data = match config.head {
        HeadKind::WeibullGamma => train_data.prepare_for_weibull(config.target_floor)?,
        HeadKind::NormalGamma => train_data.clone(),
    };
    let standardization = if config.standardize && data.standardization.is_none() {
        let s = Standardizer::fit(&data)?;
        data = s.apply(&data)?;
        Some(s)
    } else {
        None
    };

    let mut net = Mlp::build(&config.architecture, data.n_features(), config.head, config.seed)?;
    let mut adam = AdamState::new(&net, config.adam());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ SHUFFLE_STREAM);
    let kk = k.unwrap_or(1.0);

    let n = data.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut bad_epochs = 0;
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let x = data.features.select(Axis(0), batch);
            let y: Vec<f64> = batch.iter().map(|&i| data.targets[i]).collect();
            let (batch_loss, mut grads) = batch_loss_and_gradients(&net, kk, config.c, x.view(), &y)?;
            let batch_sum = batch_loss * batch.len() as f64;
            epoch_sum += batch_sum;
            if !batch_sum.is_finite() || !grads.is_finite() {
                continue;
            }
            grads.clip_global_norm(config.grad_clip);
            adam.step(&mut net, &grads)?;
        }
        let mean = epoch_sum / n as f64;
        history.push(mean);
        if mean.is_finite() {
            bad_epochs = 0;
        } else {
            bad_epochs += 1;
            if bad_epochs >= DIVERGENCE_PATIENCE {
                return Err(Error::Divergence {
                    epoch,
                    c: config.c,
                });
            }
        }
    }

    let model = EvidentialModel {
        net,
        k,
        standardization,
    };
    let final_loss = model.total_loss(&data, config.c)?;
    Ok(TrainOutcome {
        model,
        history,
        final_loss,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    Log,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub grid: Vec<f64>,
    pub grid_kind: GridKind,
    pub base: TrainConfig,
}

/// `n` points spaced evenly in `log10` between `lo` and `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && n >= 1) {
        return Err(Error::Config(format!("bad log grid [{lo}, {hi}] x {n}")));
    }
    let (a, b) = (lo.log10(), hi.log10());
    Ok(linspace(a, b, n).into_iter().map(|e| 10f64.powf(e)).collect())
}

/// `n` evenly spaced points between `lo` and `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo >= 0.0 && hi >= lo && n >= 1) {
        return Err(Error::Config(format!("bad linear grid [{lo}, {hi}] x {n}")));
    }
    Ok(linspace(lo, hi, n))
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let step = (b - a) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { b } else { a + step * i as f64 })
        .collect()
}

impl SweepConfig {
    pub fn new(grid: Vec<f64>, grid_kind: GridKind, base: TrainConfig) -> Result<Self> {
        let s = Self {
            grid,
            grid_kind,
            base,
        };
        s.validate()?;
        Ok(s)
    }

    /// Six log-spaced values over `[1e-6, 0.1]`.
    pub fn synthetic_default(base: TrainConfig) -> Self {
        Self {
            grid: log_grid(1e-6, 0.1, 6).expect("static grid"),
            grid_kind: GridKind::Log,
            base,
        }
    }

    /// Five linear values over `[0.4, 1.2]` for the Weibull head, `[0.04, 0.12]` for the benchmark.
    pub fn recovery_default(base: TrainConfig) -> Self {
        let (lo, hi) = match base.head {
            HeadKind::WeibullGamma => (0.4, 1.2),
            HeadKind::NormalGamma => (0.04, 0.12),
        };
        Self {
            grid: linear_grid(lo, hi, 5).expect("static grid"),
            grid_kind: GridKind::Linear,
            base,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::Config("sweep grid is empty".into()));
        }
        if let Some(c) = self.grid.iter().find(|c| !(**c >= 0.0 && c.is_finite())) {
            return Err(Error::Config(format!("sweep grid value {c} is not >= 0")));
        }
        self.base.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepEntry {
    pub c: f64,
    pub final_loss: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub best_c: f64,
    pub best_loss: f64,
    pub entries: Vec<SweepEntry>,
}

fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> T {
    match rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

/// Trains once per grid value and keeps the one with the lowest final training
/// loss; ties go to the smaller `c`.
pub fn sweep_c(sweep: &SweepConfig, train_data: &Dataset, jobs: usize) -> Result<SweepReport> {
    sweep.validate()?;
    let results: Vec<Result<f64>> = with_pool(jobs, || {
        sweep
            .grid
            .par_iter()
            .map(|&c| {
                let cfg = TrainConfig {
                    c,
                    ..sweep.base.clone()
                };
                train(&cfg, train_data).map(|o| o.final_loss)
            })
            .collect()
    });
    let entries: Vec<SweepEntry> = sweep
        .grid
        .iter()
        .zip(results)
        .map(|(&c, r)| match r {
            Ok(l) if l.is_finite() => SweepEntry {
                c,
                final_loss: Some(l),
                error: None,
            },
            Ok(l) => SweepEntry {
                c,
                final_loss: None,
                error: Some(format!("non-finite final loss {l}")),
            },
            Err(e) => SweepEntry {
                c,
                final_loss: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let best = entries
        .iter()
        .filter_map(|e| e.final_loss.map(|l| (e.c, l)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)));
    match best {
        Some((best_c, best_loss)) => Ok(SweepReport {
            best_c,
            best_loss,
            entries,
        }),
        None => Err(Error::SweepFailed(
            entries
                .iter()
                .map(|e| format!("c={}: {}", e.c, e.error.as_deref().unwrap_or("?")))
                .collect::<Vec<_>>()
                .join("; "),
        )),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointPrediction {
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub mse: f64,
    /// Mean per-observation negative log marginal likelihood.
    pub nll: f64,
    pub predictions: Vec<PointPrediction>,
    pub inf_var_count: usize,
}

/// Metrics from already-computed head outputs.
pub fn evaluate_outputs(outputs: &[HeadOutput], k: Option<f64>, targets: &[f64]) -> Result<EvalReport> {
    if outputs.len() != targets.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} targets",
            outputs.len(),
            targets.len()
        )));
    }
    if outputs.is_empty() {
        return Err(Error::EmptyData("nothing to evaluate".into()));
    }
    let n = targets.len() as f64;
    let mut se = 0.0;
    let mut nll = 0.0;
    let mut inf = 0;
    let mut predictions = Vec::with_capacity(outputs.len());
    for (out, &y) in outputs.iter().zip(targets) {
        let s = out.summary(k)?;
        let y_eval = match out {
            HeadOutput::Weibull(_) => y.max(TARGET_FLOOR),
            HeadOutput::Nig(_) => y,
        };
        se += (s.mean - y).powi(2);
        nll += out.nll(y_eval, k)?;
        if s.variance.is_infinite() {
            inf += 1;
        }
        predictions.push(PointPrediction {
            mean: s.mean,
            variance: s.variance,
        });
    }
    Ok(EvalReport {
        mse: se / n,
        nll: nll / n,
        predictions,
        inf_var_count: inf,
    })
}

/// MSE of the mean prediction, mean NLL and per-point predictive summaries.
pub fn evaluate(model: &EvidentialModel, data: &Dataset) -> Result<EvalReport> {
    let outputs = model.head_outputs(data)?;
    evaluate_outputs(&outputs, model.k, data.targets.as_slice().expect("contiguous"))
}

/// Sample mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Self { mean, std }
    }
}

impl fmt::Display for MeanStd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3} ± {:.3}", self.mean, self.std)
    }
}

#[derive(Debug, Clone)]
pub struct TrialRun {
    pub seed: u64,
    pub model: EvidentialModel,
    pub train: EvalReport,
    pub test: EvalReport,
}

#[derive(Debug, Clone)]
pub struct TrialSummary {
    pub runs: Vec<TrialRun>,
    /// Seeds whose training failed, with the error message.
    pub failures: Vec<(u64, String)>,
    pub train_mse: MeanStd,
    pub test_mse: MeanStd,
    pub train_nll: MeanStd,
    pub test_nll: MeanStd,
}

/// Retrains with seeds `seed, seed+1, …` and aggregates train/test metrics.
pub fn run_trials(
    config: &TrainConfig,
    n_trials: usize,
    train_data: &Dataset,
    test_data: &Dataset,
    jobs: usize,
) -> Result<TrialSummary> {
    if n_trials < 1 {
        return Err(Error::Config("need at least one trial".into()));
    }
    let seeds: Vec<u64> = (0..n_trials as u64).map(|i| config.seed.wrapping_add(i)).collect();
    let results: Vec<Result<TrialRun>> = with_pool(jobs, || {
        seeds
            .par_iter()
            .map(|&seed| {
                let cfg = TrainConfig {
                    seed,
                    ..config.clone()
                };
                let outcome = train(&cfg, train_data)?;
                let train = evaluate(&outcome.model, train_data)?;
                let test = evaluate(&outcome.model, test_data)?;
                Ok(TrialRun {
                    seed,
                    model: outcome.model,
                    train,
                    test,
                })
            })
            .collect()
    });
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (seed, r) in seeds.iter().zip(results) {
        match r {
            Ok(run) => runs.push(run),
            Err(e) => failures.push((*seed, e.to_string())),
        }
    }
    if runs.is_empty() {
        return Err(Error::SweepFailed(format!(
            "all {n_trials} trials failed: {}",
            failures
                .iter()
                .map(|(s, e)| format!("seed {s}: {e}"))
                .collect::<Vec<_>>()
                .join("; ")
        )));
    }
    let stat = |f: fn(&TrialRun) -> f64| MeanStd::of(&runs.iter().map(f).collect::<Vec<_>>());
    Ok(TrialSummary {
        train_mse: stat(|r| r.train.mse),
        test_mse: stat(|r| r.test.mse),
        train_nll: stat(|r| r.train.nll),
        test_nll: stat(|r| r.test.nll),
        runs,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{gen_synthetic, SyntheticRecipe};
    use crate::distributions::WeibullParams;

    fn small(head: HeadKind) -> TrainConfig {
        TrainConfig {
            epochs: 40,
            batch_size: 64,
            learning_rate: 3e-3,
            architecture: Architecture::Widths(vec![16, 16]),
            ..TrainConfig::new(head)
        }
    }

    fn data() -> Dataset {
        gen_synthetic((-2.0, 2.0), 200, WeibullParams::new(1.6, 0.2).unwrap(), 4).unwrap()
    }

    #[test]
    fn config_validation() {
        let mut c = small(HeadKind::WeibullGamma);
        c.epochs = 0;
        assert!(matches!(train(&c, &data()), Err(Error::Config(_))));
        let mut c = small(HeadKind::WeibullGamma);
        c.c = -1.0;
        assert!(c.validate().is_err());
        c.c = 0.1;
        c.k = Some(0.4);
        assert!(train(&c, &data()).is_err());
    }

    #[test]
    fn training_reduces_loss_and_is_deterministic() {
        for head in [HeadKind::WeibullGamma, HeadKind::NormalGamma] {
            let cfg = TrainConfig { c: 1e-3, ..small(head) };
            let a = train(&cfg, &data()).unwrap();
            let b = train(&cfg, &data()).unwrap();
            assert_eq!(a.history, b.history);
            assert_eq!(a.history.len(), 40);
            assert!(a.history.last().unwrap() < a.history.first().unwrap(), "{head}: {:?}", a.history);
            assert_eq!(a.model, b.model);
        }
    }

    #[test]
    fn uses_dataset_shape() {
        let d = data();
        let out = train(&small(HeadKind::WeibullGamma), &d).unwrap();
        assert_eq!(out.model.k, d.k_hat);
        let cfg = TrainConfig { k: Some(1.3), ..small(HeadKind::WeibullGamma) };
        assert_eq!(train(&cfg, &d).unwrap().model.k, Some(1.3));
    }

    #[test]
    fn grids() {
        let g = log_grid(1e-6, 0.1, 6).unwrap();
        assert_eq!(g.len(), 6);
        assert!((g[0] - 1e-6).abs() < 1e-18 && (g[5] - 0.1).abs() < 1e-15);
        assert!((g[1] - 1e-5).abs() < 1e-17);
        assert_eq!(linear_grid(0.4, 1.2, 5).unwrap().len(), 5);
        let rec = SweepConfig::recovery_default(TrainConfig::new(HeadKind::NormalGamma));
        assert!((rec.grid[0] - 0.04).abs() < 1e-15 && (rec.grid[4] - 0.12).abs() < 1e-15);
        assert!(SweepConfig::new(vec![], GridKind::Log, small(HeadKind::WeibullGamma)).is_err());
        assert!(SweepConfig::new(vec![-0.1], GridKind::Log, small(HeadKind::WeibullGamma)).is_err());
    }

    #[test]
    fn singleton_sweep() {
        let s = SweepConfig::new(vec![0.01], GridKind::Linear, small(HeadKind::WeibullGamma)).unwrap();
        let r = sweep_c(&s, &data(), 1).unwrap();
        assert_eq!(r.best_c, 0.01);
        assert_eq!(r.entries.len(), 1);
    }

    #[test]
    fn sweep_is_jobs_independent() {
        let s = SweepConfig::new(vec![0.0, 0.1, 1.0], GridKind::Linear, TrainConfig { epochs: 5, ..small(HeadKind::NormalGamma) }).unwrap();
        assert_eq!(sweep_c(&s, &data(), 1).unwrap(), sweep_c(&s, &data(), 3).unwrap());
    }

    #[test]
    fn mean_std_format() {
        let m = MeanStd::of(&[84.0, 84.666]);
        assert_eq!(format!("{}", MeanStd { mean: 84.333, std: 0.352 }), "84.333 ± 0.352");
        assert!((m.mean - 84.333).abs() < 1e-9);
        assert_eq!(MeanStd::of(&[3.0]).std, 0.0);
    }

    #[test]
    fn trials_aggregate_reproducibly() {
        let (tr, te) = SyntheticRecipe {
            n_train: 150,
            n_test: 60,
            ..SyntheticRecipe::main(0.3).unwrap()
        }
        .generate(2)
        .unwrap();
        let cfg = TrainConfig { epochs: 10, seed: 7, ..small(HeadKind::WeibullGamma) };
        let one = run_trials(&cfg, 1, &tr, &te, 1).unwrap();
        assert_eq!(one.test_mse.std, 0.0);
        let a = run_trials(&cfg, 3, &tr, &te, 1).unwrap();
        let b = run_trials(&cfg, 3, &tr, &te, 2).unwrap();
        assert_eq!(a.runs.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![7, 8, 9]);
        assert_eq!(a.test_nll, b.test_nll);
        assert_eq!(a.train_mse, b.train_mse);
        assert_eq!(a.runs[0].test, one.runs[0].test);
    }

    #[test]
    fn oracle_head_metrics() {
        // Constant head whose Z equals every target gives zero MSE.
        let k = 1.5;
        let ev = EvidentialParams::new(2.5, 0.8).unwrap();
        let z = ew::mean_prediction(k, &ev).unwrap();
        let outs = vec![HeadOutput::Weibull(ev); 4];
        let r = evaluate_outputs(&outs, Some(k), &[z; 4]).unwrap();
        assert_eq!(r.mse, 0.0);
        let want = ew::nll(z, k, &ev).unwrap();
        assert!((r.nll - want).abs() < 1e-15);
        assert_eq!(r.inf_var_count, 0);

        let ys = [0.2, 1.0, 3.0];
        let r = evaluate_outputs(&outs[..3], Some(k), &ys).unwrap();
        let hand: f64 = ys.iter().map(|y| ew::nll(*y, k, &ev).unwrap()).sum::<f64>() / 3.0;
        assert!((r.nll - hand).abs() < 1e-14);
    }

    #[test]
    fn perfect_signal_mse_is_noise_variance() {
        // Predict x² + E[ε] exactly through the Weibull head (k = 1 ⇒ Z = β/(α−1)).
        let noise = WeibullParams::new(1.6, 0.2).unwrap();
        let d = gen_synthetic((-4.0, 4.0), 20_000, noise, 9).unwrap();
        let shift = noise.mean();
        let outs: Vec<HeadOutput> = d
            .features
            .column(0)
            .iter()
            .map(|x| HeadOutput::Weibull(EvidentialParams::new(3.0, 2.0 * (x * x + shift)).unwrap()))
            .collect();
        let r = evaluate_outputs(&outs, Some(1.0), d.targets.as_slice().unwrap()).unwrap();
        // λ²(Γ(1+2/k) − Γ²(1+1/k)) from mpmath
        let var_eps = 0.013_166_306_266_413_58;
        assert!((noise.variance() - var_eps).abs() < 1e-14);
        assert!((r.mse / var_eps - 1.0).abs() < 0.05, "mse {}", r.mse);
    }

    #[test]
    fn nig_infinite_variance_counted() {
        let outs = vec![
            HeadOutput::Nig(NigParams { gamma: 0.0, nu: 1.0, alpha: 1.0, beta: 1.0 }),
            HeadOutput::Nig(NigParams { gamma: 0.0, nu: 1.0, alpha: 2.0, beta: 1.0 }),
        ];
        let r = evaluate_outputs(&outs, None, &[0.0, 0.0]).unwrap();
        assert_eq!(r.inf_var_count, 1);
    }
}
