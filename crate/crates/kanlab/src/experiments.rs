//! Training, evaluation, preset experiment grids, and result emission.
//!
//! A run is fully determined by `(ModelSpec, TrainConfig, data)`: every
//! random choice flows from the run seed through labeled child streams
//! (`subset`, `noise`, `shuffle`, per-layer `init` / `mask`), so re-running
//! a grid reproduces its tables bit for bit. Wall-clock times are the only
//! nondeterministic output and the CSV writer can zero them.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{
    balanced_subset, edge_dataset, inject_label_noise, load_cifar_dir, synth_regression,
    synthetic_image_classes, CifarVariant, DataError, EdgeSide, LabeledDataset, NoiseSpec, RegFn,
    RegressionDataset,
};
use crate::kan::MaskMode;
use crate::model::{build_model, Arch, L1Scope, ModelError, ModelSpec, Sequential};
use crate::nn::{accuracy, mse_loss, softmax_cross_entropy, Adam};
use crate::rng::Rng;
use crate::tensor::Tensor;

#[derive(Debug, Error)]
pub enum TrainError {
    /// Invalid configuration; message begins with the dotted config path.
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("training diverged at {context}: loss {loss} is not finite")]
    Diverged { context: String, loss: f64 },
}

fn d_epochs() -> i64 {
    15
}
fn d_batch() -> i64 {
    128
}
fn d_lr() -> f64 {
    1e-3
}
fn d_beta1() -> f64 {
    0.9
}
fn d_beta2() -> f64 {
    0.999
}
fn d_eps() -> f64 {
    1e-8
}
fn d_scope() -> L1Scope {
    L1Scope::All
}
fn d_one() -> f64 {
    1.0
}
fn d_cadence() -> i64 {
    1
}

/// One training run's knobs. Integer fields are signed so that negative
/// values reach [`TrainConfig::validate`] and produce a dotted-path error
/// instead of a parse failure.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "d_epochs")]
    pub epochs: i64,
    #[serde(default = "d_batch")]
    pub batch_size: i64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d_lr")]
    pub lr: f64,
    #[serde(default = "d_beta1")]
    pub beta1: f64,
    #[serde(default = "d_beta2")]
    pub beta2: f64,
    #[serde(default = "d_eps")]
    pub eps: f64,
    /// Weight on the spline curvature penalty.
    #[serde(default)]
    pub lambda_smooth: f64,
    /// Weight on the L1 penalty.
    #[serde(default)]
    pub lambda_l1: f64,
    #[serde(default = "d_scope")]
    pub l1_scope: L1Scope,
    /// When present, overrides the model spec's deactivation probability.
    #[serde(default)]
    pub deactivation_p: Option<f64>,
    /// Balanced fraction of the training split to keep (classification only).
    #[serde(default = "d_one")]
    pub data_fraction: f64,
    /// Fraction of kept training labels to corrupt (classification only;
    /// the test split is never touched).
    #[serde(default)]
    pub noise_fraction: f64,
    /// Evaluate every this many epochs (epoch 0 and the final epoch are
    /// always evaluated).
    #[serde(default = "d_cadence")]
    pub eval_every: i64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields defaulted")
    }
}

impl TrainConfig {
    /// Field checks; error messages start with the dotted config path.
    pub fn validate(&self) -> Result<(), TrainError> {
        let err = |m: String| Err(TrainError::Config(m));
        if self.epochs < 0 {
            return err(format!("train.epochs: {} must be >= 0", self.epochs));
        }
        if self.batch_size < 1 {
            return err(format!("train.batch_size: {} must be >= 1", self.batch_size));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return err(format!("train.lr: {} must be positive and finite", self.lr));
        }
        for (name, v) in [("train.beta1", self.beta1), ("train.beta2", self.beta2)] {
            if !(0.0..1.0).contains(&v) {
                return err(format!("{name}: {v} outside [0, 1)"));
            }
        }
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return err(format!("train.eps: {} must be positive and finite", self.eps));
        }
        for (name, v) in [
            ("train.lambda_smooth", self.lambda_smooth),
            ("train.lambda_l1", self.lambda_l1),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return err(format!("{name}: {v} must be nonnegative and finite"));
            }
        }
        if let Some(p) = self.deactivation_p {
            if !(0.0..=1.0).contains(&p) {
                return err(format!("train.deactivation_p: {p} outside [0, 1]"));
            }
        }
        if !(self.data_fraction > 0.0 && self.data_fraction <= 1.0) {
            return err(format!(
                "train.data_fraction: {} outside (0, 1]",
                self.data_fraction
            ));
        }
        if !(0.0..=1.0).contains(&self.noise_fraction) {
            return err(format!(
                "train.noise_fraction: {} outside [0, 1]",
                self.noise_fraction
            ));
        }
        if self.eval_every < 1 {
            return err(format!(
                "train.eval_every: {} must be >= 1",
                self.eval_every
            ));
        }
        Ok(())
    }

    fn make_adam(&self) -> Adam {
        let mut adam = Adam::new(self.lr);
        adam.beta1 = self.beta1;
        adam.beta2 = self.beta2;
        adam.eps = self.eps;
        adam
    }
}

fn ds_source() -> String {
    "synthetic".into()
}
fn ds_classes() -> i64 {
    10
}
fn ds_train() -> i64 {
    1200
}
fn ds_test() -> i64 {
    400
}
fn ds_shape() -> Vec<i64> {
    vec![3, 8, 8]
}
// Large enough that the class clusters genuinely overlap: accuracy is then
// limited by the learned boundary, so label noise and train-set size move
// the test metric instead of saturating it.
fn ds_noise() -> f64 {
    0.3
}
fn ds_reg_fn() -> String {
    "sin".into()
}
// Few enough points that a grid-16 spline can chase the noise; the
// regularizers then have something to fix.
fn ds_reg_train() -> i64 {
    24
}
fn ds_reg_test() -> i64 {
    256
}
fn ds_reg_domain() -> (f64, f64) {
    (-3.0, 3.0)
}
fn ds_reg_noise() -> f64 {
    0.3
}
fn ds_edge_side() -> String {
    "left".into()
}

/// Where datasets come from. `synthetic` generates a deterministic
/// template-plus-noise image set (no files needed); `cifar10`/`cifar100`
/// read the official binary files from `dir`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default = "ds_source")]
    pub source: String,
    #[serde(default)]
    pub dir: Option<PathBuf>,
    /// Per-channel standardization fitted on the training split.
    #[serde(default)]
    pub standardize: bool,
    #[serde(default = "ds_classes")]
    pub synth_classes: i64,
    #[serde(default = "ds_train")]
    pub synth_train: i64,
    #[serde(default = "ds_test")]
    pub synth_test: i64,
    #[serde(default = "ds_shape")]
    pub synth_shape: Vec<i64>,
    /// Pixel noise around each class template, as a fraction of the byte
    /// range.
    #[serde(default = "ds_noise")]
    pub synth_noise_sd: f64,
    /// Seed of the synthetic templates and sample noise (independent of
    /// run seeds, so every run sees the same dataset).
    #[serde(default)]
    pub synth_seed: u64,
    #[serde(default = "ds_reg_fn")]
    pub reg_fn: String,
    #[serde(default = "ds_reg_train")]
    pub reg_train: i64,
    #[serde(default = "ds_reg_test")]
    pub reg_test: i64,
    #[serde(default = "ds_reg_domain")]
    pub reg_domain: (f64, f64),
    #[serde(default = "ds_reg_noise")]
    pub reg_noise_sd: f64,
    #[serde(default = "ds_edge_side")]
    pub edge_side: String,
}

impl Default for DataConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields defaulted")
    }
}

impl DataConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let err = |m: String| Err(TrainError::Config(m));
        match self.source.as_str() {
            "synthetic" => {}
            "cifar10" | "cifar100" => {
                if self.dir.is_none() {
                    return err(format!("data.dir: required for source {:?}", self.source));
                }
            }
            other => {
                return err(format!(
                    "data.source: {other:?} is not one of synthetic|cifar10|cifar100"
                ))
            }
        }
        if self.synth_classes < 2 {
            return err(format!(
                "data.synth_classes: {} must be >= 2",
                self.synth_classes
            ));
        }
        for (name, v) in [
            ("data.synth_train", self.synth_train),
            ("data.synth_test", self.synth_test),
            ("data.reg_train", self.reg_train),
            ("data.reg_test", self.reg_test),
        ] {
            if v < 1 {
                return err(format!("{name}: {v} must be >= 1"));
            }
        }
        if self.synth_shape.len() != 3 || self.synth_shape.iter().any(|&e| e < 1) {
            return err(format!(
                "data.synth_shape: {:?} must be three positive extents",
                self.synth_shape
            ));
        }
        if !(self.synth_noise_sd.is_finite() && self.synth_noise_sd >= 0.0) {
            return err(format!(
                "data.synth_noise_sd: {} must be nonnegative",
                self.synth_noise_sd
            ));
        }
        RegFn::parse(&self.reg_fn)
            .map_err(|e| TrainError::Config(format!("data.reg_fn: {e}")))?;
        if !(self.reg_domain.0 < self.reg_domain.1) {
            return err(format!(
                "data.reg_domain: [{}, {}] is not increasing",
                self.reg_domain.0, self.reg_domain.1
            ));
        }
        if !(self.reg_noise_sd.is_finite() && self.reg_noise_sd >= 0.0) {
            return err(format!(
                "data.reg_noise_sd: {} must be nonnegative",
                self.reg_noise_sd
            ));
        }
        if !matches!(self.edge_side.as_str(), "left" | "right") {
            return err(format!(
                "data.edge_side: {:?} is not left|right",
                self.edge_side
            ));
        }
        Ok(())
    }

    pub fn edge_side_parsed(&self) -> EdgeSide {
        match self.edge_side.as_str() {
            "right" => EdgeSide::Right,
            _ => EdgeSide::Left,
        }
    }

    /// Loads (or synthesizes) the train/test image classification splits.
    pub fn load_image_splits(&self) -> Result<(LabeledDataset, LabeledDataset), TrainError> {
        self.validate()?;
        let (mut train, mut test) = match self.source.as_str() {
            "synthetic" => {
                let shape = [
                    self.synth_shape[0] as usize,
                    self.synth_shape[1] as usize,
                    self.synth_shape[2] as usize,
                ];
                (
                    synthetic_image_classes(
                        self.synth_classes as usize,
                        self.synth_train as usize,
                        shape,
                        self.synth_noise_sd,
                        self.synth_seed,
                        "train",
                    ),
                    synthetic_image_classes(
                        self.synth_classes as usize,
                        self.synth_test as usize,
                        shape,
                        self.synth_noise_sd,
                        self.synth_seed,
                        "test",
                    ),
                )
            }
            name => {
                let variant = if name == "cifar10" {
                    CifarVariant::Cifar10
                } else {
                    CifarVariant::Cifar100
                };
                let dir = self.dir.as_ref().expect("validated");
                (
                    load_cifar_dir(dir, variant, true)?,
                    load_cifar_dir(dir, variant, false)?,
                )
            }
        };
        if self.standardize {
            standardize_per_channel(&mut train, &mut test);
        }
        Ok((train, test))
    }
}

/// Shifts/scales each channel to zero mean and unit variance, with the
/// statistics fitted on the training split only.
pub fn standardize_per_channel(train: &mut LabeledDataset, test: &mut LabeledDataset) {
    let [c, h, w] = train.image_shape();
    let plane = h * w;
    let n = train.len();
    let mut means = vec![0.0; c];
    let mut sds = vec![0.0; c];
    {
        let data = train.images.data();
        for ch in 0..c {
            let mut sum = 0.0;
            let mut sq = 0.0;
            for i in 0..n {
                let base = (i * c + ch) * plane;
                for &v in &data[base..base + plane] {
                    sum += v;
                    sq += v * v;
                }
            }
            let cnt = (n * plane) as f64;
            let mean = sum / cnt;
            let var = (sq / cnt - mean * mean).max(0.0);
            means[ch] = mean;
            sds[ch] = var.sqrt().max(1e-8);
        }
    }
    for ds in [train, test] {
        let rows = ds.len();
        let data = ds.images.data_mut();
        for i in 0..rows {
            for ch in 0..c {
                let base = (i * c + ch) * plane;
                for v in &mut data[base..base + plane] {
                    *v = (*v - means[ch]) / sds[ch];
                }
            }
        }
    }
}

/// The two task families the trainer understands.
#[derive(Debug, Clone)]
pub enum TaskData {
    Classify {
        train: LabeledDataset,
        test: LabeledDataset,
    },
    Regress {
        train: RegressionDataset,
        test: RegressionDataset,
    },
}

/// Loss decomposition of one split evaluation (or one step): the data term
/// is cross-entropy or mean squared error, the metric is accuracy or MSE.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SplitEval {
    pub data_term: f64,
    pub smooth_term: f64,
    pub l1_term: f64,
    pub total: f64,
    pub metric: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EpochEval {
    pub epoch: usize,
    pub train: SplitEval,
    pub test: SplitEval,
    /// Milliseconds since the run started, measured when this evaluation
    /// finished.
    pub wall_ms: u64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct StepLoss {
    pub step: u64,
    pub data_term: f64,
    pub smooth_term: f64,
    pub l1_term: f64,
    pub total: f64,
}

#[derive(Debug)]
pub struct TrainOutput {
    pub model: Sequential,
    pub evals: Vec<EpochEval>,
    pub steps: Vec<StepLoss>,
    /// "accuracy" for classification, "mse" for regression.
    pub metric_name: &'static str,
}

/// Trains `spec` on `task` under `cfg`.
///
/// Classification runs first apply the balanced subset fraction, then label
/// noise, both on the training split only. Epoch 0 (initialization) is
/// always evaluated; training epochs are evaluated on the configured
/// cadence plus always the final epoch. Evaluation runs in inference mode
/// and never consumes mask randomness.
pub fn train(spec: &ModelSpec, task: &TaskData, cfg: &TrainConfig) -> Result<TrainOutput, TrainError> {
    cfg.validate()?;
    let mut spec = spec.clone();
    if let Some(p) = cfg.deactivation_p {
        spec.deactivation_p = p;
    }
    match task {
        TaskData::Classify { train, test } => train_classify(&spec, train, test, cfg),
        TaskData::Regress { train, test } => train_regress(&spec, train, test, cfg),
    }
}

fn check_finite(total: f64, context: &str) -> Result<(), TrainError> {
    if total.is_finite() {
        Ok(())
    } else {
        Err(TrainError::Diverged {
            context: context.to_string(),
            loss: total,
        })
    }
}

fn penalties(model: &Sequential, cfg: &TrainConfig) -> (f64, f64) {
    (
        cfg.lambda_smooth * model.smoothness_value(),
        model.l1_value(cfg.lambda_l1, cfg.l1_scope),
    )
}

fn eval_epochs(epochs: usize, every: usize) -> Vec<usize> {
    let mut out = vec![0];
    for e in 1..=epochs {
        if e % every == 0 || e == epochs {
            out.push(e);
        }
    }
    out.dedup();
    out
}

fn eval_classify(
    model: &Sequential,
    ds: &LabeledDataset,
    cfg: &TrainConfig,
) -> Result<SplitEval, TrainError> {
    let before = model.mask_draws();
    let n = ds.len();
    let chunk = 256;
    let mut ce_sum = 0.0;
    let mut hits = 0.0;
    let mut at = 0;
    while at < n {
        let hi = (at + chunk).min(n);
        let idx: Vec<usize> = (at..hi).collect();
        let (x, labels) = ds.gather(&idx);
        let logits = model.forward_infer(&x);
        let (ce, _) = softmax_cross_entropy(&logits, &labels);
        ce_sum += ce * idx.len() as f64;
        hits += accuracy(&logits, &labels) * idx.len() as f64;
        at = hi;
    }
    assert_eq!(
        model.mask_draws(),
        before,
        "evaluation consumed mask randomness"
    );
    let (smooth, l1) = penalties(model, cfg);
    let data_term = ce_sum / n as f64;
    let total = data_term + smooth + l1;
    check_finite(total, "evaluation")?;
    Ok(SplitEval {
        data_term,
        smooth_term: smooth,
        l1_term: l1,
        total,
        metric: hits / n as f64,
    })
}

fn train_classify(
    spec: &ModelSpec,
    train_full: &LabeledDataset,
    test: &LabeledDataset,
    cfg: &TrainConfig,
) -> Result<TrainOutput, TrainError> {
    let seed = cfg.seed;
    let mut train_ds = if cfg.data_fraction < 1.0 {
        balanced_subset(
            train_full,
            cfg.data_fraction,
            Rng::derive_seed(seed, &["subset"]),
        )?
    } else {
        train_full.clone()
    };
    if cfg.noise_fraction > 0.0 {
        train_ds = inject_label_noise(
            &train_ds,
            NoiseSpec {
                fraction: cfg.noise_fraction,
                seed: Rng::derive_seed(seed, &["noise"]),
            },
        )?;
    }
    let shape = train_ds.image_shape();
    let mut model = build_model(spec, &shape, train_ds.class_count, seed)?;
    let mut adam = cfg.make_adam();
    let mut shuffle_rng = Rng::derive(seed, &["shuffle"]);

    let epochs = cfg.epochs as usize;
    let batch = cfg.batch_size as usize;
    let eval_at = eval_epochs(epochs, cfg.eval_every as usize);
    let start = Instant::now();
    let mut evals = Vec::new();
    let mut steps = Vec::new();
    let mut step: u64 = 0;

    let record_eval = |model: &Sequential, epoch: usize, evals: &mut Vec<EpochEval>| {
        let tr = eval_classify(model, &train_ds, cfg)?;
        let te = eval_classify(model, test, cfg)?;
        evals.push(EpochEval {
            epoch,
            train: tr,
            test: te,
            wall_ms: start.elapsed().as_millis() as u64,
        });
        Ok::<(), TrainError>(())
    };

    record_eval(&model, 0, &mut evals)?;
    let mut order: Vec<usize> = (0..train_ds.len()).collect();
    for epoch in 1..=epochs {
        shuffle_rng.shuffle(&mut order);
        for chunk in order.chunks(batch) {
            let (x, labels) = train_ds.gather(chunk);
            model.zero_grads();
            let (logits, caches) = model.forward_train(&x, MaskMode::Sample);
            let (ce, dlogits) = softmax_cross_entropy(&logits, &labels);
            let (smooth, l1) = penalties(&model, cfg);
            let total = ce + smooth + l1;
            step += 1;
            check_finite(total, &format!("step {step} (epoch {epoch})"))?;
            steps.push(StepLoss {
                step,
                data_term: ce,
                smooth_term: smooth,
                l1_term: l1,
                total,
            });
            model.backward(&caches, &dlogits);
            model.add_smoothness_grad(cfg.lambda_smooth);
            model.add_l1_grad(cfg.lambda_l1, cfg.l1_scope);
            adam.step(&mut model.params_mut());
        }
        if eval_at.contains(&epoch) {
            record_eval(&model, epoch, &mut evals)?;
        }
    }
    Ok(TrainOutput {
        model,
        evals,
        steps,
        metric_name: "accuracy",
    })
}

fn regression_tensor(ds: &RegressionDataset, indices: &[usize]) -> (Tensor, Vec<f64>) {
    let x: Vec<f64> = indices.iter().map(|&i| ds.x[i]).collect();
    let y: Vec<f64> = indices.iter().map(|&i| ds.y[i]).collect();
    (
        Tensor::from_vec(&[indices.len(), 1], x).expect("shape"),
        y,
    )
}

fn eval_regress(
    model: &Sequential,
    ds: &RegressionDataset,
    cfg: &TrainConfig,
) -> Result<SplitEval, TrainError> {
    let before = model.mask_draws();
    let idx: Vec<usize> = (0..ds.len()).collect();
    let (x, y) = regression_tensor(ds, &idx);
    let pred = model.forward_infer(&x);
    let (mse, _) = mse_loss(&pred, &y);
    assert_eq!(
        model.mask_draws(),
        before,
        "evaluation consumed mask randomness"
    );
    let (smooth, l1) = penalties(model, cfg);
    let total = mse + smooth + l1;
    check_finite(total, "evaluation")?;
    Ok(SplitEval {
        data_term: mse,
        smooth_term: smooth,
        l1_term: l1,
        total,
        metric: mse,
    })
}

fn train_regress(
    spec: &ModelSpec,
    train_ds: &RegressionDataset,
    test: &RegressionDataset,
    cfg: &TrainConfig,
) -> Result<TrainOutput, TrainError> {
    let seed = cfg.seed;
    let mut model = build_model(spec, &[1], 1, seed)?;
    let mut adam = cfg.make_adam();
    let mut shuffle_rng = Rng::derive(seed, &["shuffle"]);
    let epochs = cfg.epochs as usize;
    let batch = cfg.batch_size as usize;
    let eval_at = eval_epochs(epochs, cfg.eval_every as usize);
    let start = Instant::now();
    let mut evals = Vec::new();
    let mut steps = Vec::new();
    let mut step: u64 = 0;

    let record_eval = |model: &Sequential, epoch: usize, evals: &mut Vec<EpochEval>| {
        let tr = eval_regress(model, train_ds, cfg)?;
        let te = eval_regress(model, test, cfg)?;
        evals.push(EpochEval {
            epoch,
            train: tr,
            test: te,
            wall_ms: start.elapsed().as_millis() as u64,
        });
        Ok::<(), TrainError>(())
    };

    record_eval(&model, 0, &mut evals)?;
    let mut order: Vec<usize> = (0..train_ds.len()).collect();
    for epoch in 1..=epochs {
        shuffle_rng.shuffle(&mut order);
        for chunk in order.chunks(batch) {
            let (x, y) = regression_tensor(train_ds, chunk);
            model.zero_grads();
            let (pred, caches) = model.forward_train(&x, MaskMode::Sample);
            let (mse, dpred) = mse_loss(&pred, &y);
            let (smooth, l1) = penalties(&model, cfg);
            let total = mse + smooth + l1;
            step += 1;
            check_finite(total, &format!("step {step} (epoch {epoch})"))?;
            steps.push(StepLoss {
                step,
                data_term: mse,
                smooth_term: smooth,
                l1_term: l1,
                total,
            });
            model.backward(&caches, &dpred);
            model.add_smoothness_grad(cfg.lambda_smooth);
            model.add_l1_grad(cfg.lambda_l1, cfg.l1_scope);
            adam.step(&mut model.params_mut());
        }
        if eval_at.contains(&epoch) {
            record_eval(&model, epoch, &mut evals)?;
        }
    }
    Ok(TrainOutput {
        model,
        evals,
        steps,
        metric_name: "mse",
    })
}

// ---------------------------------------------------------------------------
// Preset grids
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    /// Reduced data and default epochs; minutes on a laptop core.
    Desk,
    /// Full dataset fractions; needs the real CIFAR files and hours.
    Paper,
}

impl Scale {
    pub fn parse(s: &str) -> Option<Scale> {
        match s {
            "desk" => Some(Scale::Desk),
            "paper" => Some(Scale::Paper),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Scale::Desk => "desk",
            Scale::Paper => "paper",
        }
    }

    /// Fraction of the training split that "the whole dataset" means at
    /// this scale.
    fn base_fraction(self) -> f64 {
        match self {
            Scale::Desk => 0.1,
            Scale::Paper => 1.0,
        }
    }
}

/// What data a grid cell trains on.
#[derive(Debug, Clone)]
pub enum CellTask {
    /// The mounted image classification splits.
    Image,
    /// The 16-item strip task; train and test coincide.
    Edge(EdgeSide),
    /// Per-seed synthetic 1D regression draws.
    Regress,
}

/// One point of an experiment grid: a model, a training configuration, and
/// labels describing where the result lands in the output tables.
#[derive(Debug, Clone)]
pub struct Cell {
    /// Unique cell label inside the preset, e.g. `noise30/l1_0.001/cnn_kan`.
    pub name: String,
    /// Row label of the summary table.
    pub model_name: String,
    /// Key of the summary's outer grouping, normally the preset name;
    /// presets with several conditions append the condition.
    pub summary_group: String,
    pub sweep_value: f64,
    pub spec: ModelSpec,
    pub train: TrainConfig,
    pub task: CellTask,
}

pub fn preset_names() -> &'static [&'static str] {
    &[
        "exp1", "exp2", "exp3", "exp4", "exp4_sens", "exp_edge", "exp_reg",
    ]
}

fn image_model(arch: Arch) -> (String, ModelSpec) {
    (arch.as_str().to_string(), ModelSpec::new(arch))
}

const IMAGE_ARCHS: [Arch; 3] = [Arch::CnnMlp, Arch::CkanCnnMlp, Arch::CnnKan];

/// Expands a preset into its grid cells. `base` supplies epochs, batch
/// size, optimizer settings, and eval cadence for image cells; the small
/// synthetic presets pin their own schedules.
pub fn build_preset(
    preset: &str,
    scale: Scale,
    base: &TrainConfig,
) -> Result<Vec<Cell>, TrainError> {
    base.validate()?;
    let base_frac = scale.base_fraction();
    let mut cells = Vec::new();
    let image_cell = |name: String, model_name: String, spec: ModelSpec, sweep: f64, train: TrainConfig| Cell {
        name,
        model_name,
        summary_group: preset.to_string(),
        sweep_value: sweep,
        spec,
        train,
        task: CellTask::Image,
    };
    match preset {
        "exp1" => {
            for &frac in &[0.2, 0.4, 0.6, 0.8, 1.0] {
                for arch in IMAGE_ARCHS {
                    let (model_name, spec) = image_model(arch);
                    let mut t = base.clone();
                    t.data_fraction = frac * base_frac;
                    cells.push(image_cell(
                        format!("frac_{frac}/{model_name}"),
                        model_name,
                        spec,
                        frac,
                        t,
                    ));
                }
            }
        }
        "exp2" => {
            for &eta in &[0.1, 0.2, 0.3, 0.4, 0.5] {
                for arch in IMAGE_ARCHS {
                    let (model_name, spec) = image_model(arch);
                    let mut t = base.clone();
                    t.data_fraction = base_frac;
                    t.noise_fraction = eta;
                    cells.push(image_cell(
                        format!("noise_{eta}/{model_name}"),
                        model_name,
                        spec,
                        eta,
                        t,
                    ));
                }
            }
        }
        "exp3" => {
            for &(cond, noise, frac_mult) in
                &[("noise30", 0.3, 1.0), ("data60", 0.0, 0.6)]
            {
                for &lambda in &[0.0, 1e-4, 1e-3, 1e-2] {
                    for arch in IMAGE_ARCHS {
                        let (model_name, spec) = image_model(arch);
                        let mut t = base.clone();
                        t.data_fraction = base_frac * frac_mult;
                        t.noise_fraction = noise;
                        t.lambda_l1 = lambda;
                        let mut cell = image_cell(
                            format!("{cond}/l1_{lambda}/{model_name}"),
                            model_name,
                            spec,
                            lambda,
                            t,
                        );
                        cell.summary_group = format!("{preset}/{cond}");
                        cells.push(cell);
                    }
                }
            }
        }
        "exp4" | "exp4_sens" => {
            let variants: Vec<(String, Arch, f64, f64)> = if preset == "exp4" {
                // (row label, arch, lambda_smooth, deactivation_p)
                vec![
                    ("cnn_mlp".into(), Arch::CnnMlp, 0.0, 0.0),
                    ("cnn_kan".into(), Arch::CnnKan, 0.0, 0.0),
                    ("cnn_kan_smooth".into(), Arch::CnnKan, 1e-3, 0.0),
                    ("cnn_kan_segdeact".into(), Arch::CnnKan, 0.0, 0.1),
                    ("cnn_kan_both".into(), Arch::CnnKan, 1e-3, 0.1),
                ]
            } else {
                let mut v = Vec::new();
                for &l in &[1e-4, 1e-3, 1e-2] {
                    v.push((format!("smooth_{l}"), Arch::CnnKan, l, 0.0));
                }
                for &p in &[0.05, 0.1, 0.2] {
                    v.push((format!("segdeact_{p}"), Arch::CnnKan, 0.0, p));
                }
                v
            };
            for (row, arch, lambda_s, p) in variants {
                let (_, mut spec) = image_model(arch);
                spec.deactivation_p = p;
                let mut t = base.clone();
                t.data_fraction = base_frac;
                t.lambda_smooth = lambda_s;
                let sweep = if preset == "exp4_sens" {
                    if lambda_s > 0.0 {
                        lambda_s
                    } else {
                        p
                    }
                } else {
                    0.0
                };
                cells.push(image_cell(
                    format!("ablation/{row}"),
                    row,
                    spec,
                    sweep,
                    t,
                ));
            }
        }
        "exp_edge" => {
            for (side_name, side) in [("left", EdgeSide::Left), ("right", EdgeSide::Right)] {
                for arch in [Arch::EdgeKan, Arch::EdgeLinear] {
                    let model_name = arch.as_str().to_string();
                    let spec = ModelSpec::new(arch);
                    let mut t = base.clone();
                    t.epochs = 500;
                    t.batch_size = 16;
                    t.lr = 0.02;
                    t.eval_every = 50;
                    t.data_fraction = 1.0;
                    t.noise_fraction = 0.0;
                    cells.push(Cell {
                        name: format!("{side_name}/{model_name}"),
                        model_name,
                        summary_group: preset.to_string(),
                        sweep_value: 0.0,
                        spec,
                        train: t,
                        task: CellTask::Edge(side),
                    });
                }
            }
        }
        "exp_reg" => {
            // (row label, lambda_smooth, deactivation_p)
            for (row, lambda_s, p) in [
                ("kan_plain", 0.0, 0.0),
                ("kan_smooth", 1e-3, 0.0),
                ("kan_segdeact", 0.0, 0.1),
                ("kan_both", 1e-3, 0.1),
            ] {
                let mut spec = ModelSpec::new(Arch::RegKan);
                spec.grid_size = 16;
                spec.domain = (-3.0, 3.0);
                spec.deactivation_p = p;
                let mut t = base.clone();
                t.epochs = 300;
                t.batch_size = 64;
                t.lr = 0.01;
                t.eval_every = 50;
                t.lambda_smooth = lambda_s;
                t.data_fraction = 1.0;
                t.noise_fraction = 0.0;
                cells.push(Cell {
                    name: format!("reg/{row}"),
                    model_name: row.to_string(),
                    summary_group: preset.to_string(),
                    sweep_value: 0.0,
                    spec,
                    train: t,
                    task: CellTask::Regress,
                });
            }
        }
        other => {
            return Err(TrainError::Config(format!(
                "experiment.preset: unknown preset {other:?} (expected one of {})",
                preset_names().join("|")
            )))
        }
    }
    Ok(cells)
}

// ---------------------------------------------------------------------------
// Grid execution and result emission
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub preset: String,
    pub cell: String,
    pub model: String,
    pub sweep_value: f64,
    pub seed: u64,
    pub epoch: usize,
    pub split: &'static str,
    pub loss: f64,
    pub accuracy: f64,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub sd: f64,
    pub n_seeds: usize,
}

/// `group -> sweep value -> model row -> final-epoch test-metric stats`.
pub type Summary = BTreeMap<String, BTreeMap<String, BTreeMap<String, Stat>>>;

pub struct ExperimentRequest {
    pub preset: String,
    pub scale: Scale,
    pub seeds: Vec<u64>,
    pub base_train: TrainConfig,
    pub data: DataConfig,
    /// Worker thread count; `None` uses all logical cores.
    pub workers: Option<usize>,
}

pub struct ExperimentResult {
    pub records: Vec<RunRecord>,
    pub summary: Summary,
    pub metric_name: &'static str,
}

fn stat_of(values: &[f64]) -> Stat {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Stat {
        mean,
        sd,
        n_seeds: n,
    }
}

/// Runs every `(cell, seed)` job of the preset grid, in parallel across a
/// bounded worker pool, and aggregates records in a fixed order that does
/// not depend on scheduling.
pub fn run_experiment(req: &ExperimentRequest) -> Result<ExperimentResult, TrainError> {
    req.base_train.validate()?;
    req.data.validate()?;
    if req.seeds.is_empty() {
        return Err(TrainError::Config(
            "experiment.seeds: at least one seed required".into(),
        ));
    }
    let cells = build_preset(&req.preset, req.scale, &req.base_train)?;
    let needs_image = cells.iter().any(|c| matches!(c.task, CellTask::Image));
    let image = if needs_image {
        Some(req.data.load_image_splits()?)
    } else {
        None
    };
    let jobs: Vec<(usize, u64)> = cells
        .iter()
        .enumerate()
        .flat_map(|(ci, _)| req.seeds.iter().map(move |&s| (ci, s)))
        .collect();

    let run_job = |&(ci, seed): &(usize, u64)| -> Result<(Vec<EpochEval>, &'static str), TrainError> {
        let cell = &cells[ci];
        let mut cfg = cell.train.clone();
        cfg.seed = seed;
        let out = match &cell.task {
            CellTask::Image => {
                let (train_ds, test_ds) = image.as_ref().expect("image data mounted");
                train(
                    &cell.spec,
                    // borrow-free: classification training subsets/copies
                    // internally, so hand it clones of the shared splits
                    &TaskData::Classify {
                        train: train_ds.clone(),
                        test: test_ds.clone(),
                    },
                    &cfg,
                )?
            }
            CellTask::Edge(side) => {
                let ds = edge_dataset(*side);
                train(
                    &cell.spec,
                    &TaskData::Classify {
                        train: ds.clone(),
                        test: ds,
                    },
                    &cfg,
                )?
            }
            CellTask::Regress => {
                let f = RegFn::parse(&req.data.reg_fn).expect("validated");
                let train_ds = synth_regression(
                    f,
                    req.data.reg_train as usize,
                    req.data.reg_domain,
                    req.data.reg_noise_sd,
                    Rng::derive_seed(seed, &["reg", "train"]),
                );
                let test_ds = synth_regression(
                    f,
                    req.data.reg_test as usize,
                    req.data.reg_domain,
                    req.data.reg_noise_sd,
                    Rng::derive_seed(seed, &["reg", "test"]),
                );
                train(
                    &cell.spec,
                    &TaskData::Regress {
                        train: train_ds,
                        test: test_ds,
                    },
                    &cfg,
                )?
            }
        };
        Ok((out.evals, out.metric_name))
    };

    let results: Vec<Result<(Vec<EpochEval>, &'static str), TrainError>> =
        if let Some(workers) = req.workers {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers.max(1))
                .build()
                .map_err(|e| TrainError::Config(format!("experiment.workers: {e}")))?;
            pool.install(|| jobs.par_iter().map(run_job).collect())
        } else {
            jobs.par_iter().map(run_job).collect()
        };

    let mut records = Vec::new();
    let mut finals: BTreeMap<(String, String, String), Vec<f64>> = BTreeMap::new();
    let mut metric_name = "accuracy";
    for (job, result) in jobs.iter().zip(results) {
        let (evals, metric) = result?;
        metric_name = metric;
        let cell = &cells[job.0];
        let seed = job.1;
        for ev in &evals {
            for (split, side) in [("train", &ev.train), ("test", &ev.test)] {
                records.push(RunRecord {
                    preset: req.preset.clone(),
                    cell: cell.name.clone(),
                    model: cell.model_name.clone(),
                    sweep_value: cell.sweep_value,
                    seed,
                    epoch: ev.epoch,
                    split,
                    loss: side.total,
                    accuracy: side.metric,
                    wall_ms: ev.wall_ms,
                });
            }
        }
        if let Some(last) = evals.last() {
            finals
                .entry((
                    cell.summary_group.clone(),
                    format!("{}", cell.sweep_value),
                    cell.model_name.clone(),
                ))
                .or_default()
                .push(last.test.metric);
        }
    }
    let mut summary: Summary = BTreeMap::new();
    for ((group, sweep, model), values) in finals {
        summary
            .entry(group)
            .or_default()
            .entry(sweep)
            .or_default()
            .insert(model, stat_of(&values));
    }
    Ok(ExperimentResult {
        records,
        summary,
        metric_name,
    })
}

pub const CSV_HEADER: &str = "preset,cell,model,sweep_value,seed,epoch,split,loss,accuracy,wall_ms";

/// Renders records as CSV. `zero_wall` replaces wall-clock times with 0 so
/// the bytes are reproducible run to run.
pub fn records_to_csv(records: &[RunRecord], zero_wall: bool) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let wall = if zero_wall { 0 } else { r.wall_ms };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.preset,
            r.cell,
            r.model,
            r.sweep_value,
            r.seed,
            r.epoch,
            r.split,
            r.loss,
            r.accuracy,
            wall
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct GradcheckGroup {
    pub param: String,
    pub mode: String,
    pub max_rel_err: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradcheckReport {
    pub arch: String,
    pub tolerance: f64,
    pub groups: Vec<GradcheckGroup>,
    pub pass: bool,
}

fn gradcheck_shapes(arch: Arch) -> (Vec<usize>, usize) {
    match arch {
        Arch::EdgeKan | Arch::EdgeLinear => (vec![1, 1, 4], 2),
        Arch::KaTheorem => (vec![3], 1),
        Arch::RegKan => (vec![1], 1),
        _ => (vec![1, 8, 8], 3),
    }
}

/// Central finite-difference check of d(total loss)/d(parameter) for every
/// parameter group of a tiny instance of the architecture, where the total
/// loss includes both penalties. Runs once with no deactivation masks and,
/// when the model contains splines, once fully masked.
pub fn gradcheck(spec: &ModelSpec, tolerance: f64) -> Result<GradcheckReport, TrainError> {
    let mut tiny = spec.clone();
    tiny.channels = vec![2, 3];
    tiny.grid_size = tiny.grid_size.min(3);
    let (input_shape, out_dim) = gradcheck_shapes(tiny.arch);
    let lambda_s = 0.3;
    let lambda_1 = 0.01;
    let scope = L1Scope::All;

    let mut xshape = vec![4usize];
    xshape.extend(&input_shape);
    let mut data_rng = Rng::derive(5, &["gradcheck", "input"]);
    let n: usize = xshape.iter().product();
    let x = Tensor::from_vec(
        &xshape,
        (0..n).map(|_| data_rng.uniform_in(-0.9, 0.9)).collect::<Vec<_>>(),
    )
    .expect("shape");
    let labels: Vec<usize> = (0..4).map(|i| i % out_dim).collect();

    let mut groups = Vec::new();
    let has_splines = {
        let probe = build_model(&tiny, &input_shape, out_dim, 7)?;
        probe
            .params()
            .iter()
            .any(|(k, _)| key_has_spline(k))
    };
    let modes: Vec<(MaskMode, &str)> = if has_splines {
        vec![(MaskMode::ForceNone, "unmasked"), (MaskMode::ForceAll, "fully_masked")]
    } else {
        vec![(MaskMode::ForceNone, "unmasked")]
    };

    for (mode, mode_name) in modes {
        let mut check_spec = tiny.clone();
        if mode == MaskMode::ForceAll {
            check_spec.deactivation_p = 1.0;
        }
        let mut model = build_model(&check_spec, &input_shape, out_dim, 7)?;
        let loss_of = |model: &mut Sequential| -> f64 {
            let (logits, _) = model.forward_train(&x, mode);
            let (ce, _) = softmax_cross_entropy(&logits, &labels);
            ce + lambda_s * model.smoothness_value() + model.l1_value(lambda_1, scope)
        };
        model.zero_grads();
        let (logits, caches) = model.forward_train(&x, mode);
        let (_, dlogits) = softmax_cross_entropy(&logits, &labels);
        model.backward(&caches, &dlogits);
        model.add_smoothness_grad(lambda_s);
        model.add_l1_grad(lambda_1, scope);
        let grads: Vec<(String, Vec<f64>)> = model
            .params()
            .iter()
            .map(|(k, p)| (k.clone(), p.grad.data().to_vec()))
            .collect();
        let h = 1e-5;
        for (pi, (key, g)) in grads.iter().enumerate() {
            let mut max_rel: f64 = 0.0;
            for slot in 0..g.len() {
                let orig = model.params()[pi].1.value.data()[slot];
                model.params_mut()[pi].1.value.data_mut()[slot] = orig + h;
                let up = loss_of(&mut model);
                model.params_mut()[pi].1.value.data_mut()[slot] = orig - h;
                let down = loss_of(&mut model);
                model.params_mut()[pi].1.value.data_mut()[slot] = orig;
                let fd = (up - down) / (2.0 * h);
                let rel = (g[slot] - fd).abs() / f64::max(1.0, f64::max(g[slot].abs(), fd.abs()));
                max_rel = max_rel.max(rel);
            }
            groups.push(GradcheckGroup {
                param: key.clone(),
                mode: mode_name.to_string(),
                max_rel_err: max_rel,
                pass: max_rel < tolerance,
            });
        }
    }
    let pass = groups.iter().all(|g| g.pass);
    Ok(GradcheckReport {
        arch: tiny.arch.as_str().to_string(),
        tolerance,
        groups,
        pass,
    })
}

fn key_has_spline(key: &str) -> bool {
    key.ends_with(".c") || key.ends_with(".c_act")
}
