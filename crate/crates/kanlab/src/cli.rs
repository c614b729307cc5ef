//! Command-line surface: strict JSON configuration with dotted-path
//! overrides, five subcommands (`data verify`, `train`, `eval`,
//! `gradcheck`, `experiment`), and a stable exit-code contract:
//! 0 success, 2 configuration problems, 3 missing or malformed files,
//! 4 numerical failures.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{verify_cifar_dir, CifarVariant, DataError};
use crate::experiments::{
    build_preset, gradcheck, records_to_csv, run_experiment, train, DataConfig, EpochEval,
    ExperimentRequest, RunRecord, Scale, TaskData, TrainConfig, TrainError,
};
use crate::model::{
    load_checkpoint, save_checkpoint, Arch, CheckpointMeta, ModelError, ModelSpec, Sequential,
};
use crate::nn::{accuracy, softmax_cross_entropy};
use crate::rng::Rng;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

/// Errors bucketed by exit code; the message is what the user sees.
#[derive(Debug)]
enum CliError {
    Config(String),
    Io(String),
    Numeric(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) | CliError::Io(m) | CliError::Numeric(m) => f.write_str(m),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Io(_) => EXIT_IO,
            CliError::Numeric(_) => EXIT_NUMERIC,
        }
    }
}

fn classify_train_error(err: TrainError) -> CliError {
    let msg = err.to_string();
    match &err {
        TrainError::Config(_) => CliError::Config(msg),
        TrainError::Model(m) => classify_model_error_ref(m, msg),
        TrainError::Data(d) => classify_data_error_ref(d, msg),
        TrainError::Diverged { .. } => CliError::Numeric(msg),
    }
}

fn classify_model_error_ref(err: &ModelError, msg: String) -> CliError {
    match err {
        ModelError::Spec(_) => CliError::Config(msg),
        _ => CliError::Io(msg),
    }
}

fn classify_data_error_ref(err: &DataError, msg: String) -> CliError {
    match err {
        DataError::Io { .. } | DataError::Truncated { .. } | DataError::LabelOutOfRange { .. } => {
            CliError::Io(msg)
        }
        _ => CliError::Config(msg),
    }
}

// ---------------------------------------------------------------------------
// Configuration document
// ---------------------------------------------------------------------------

fn d_outdir() -> PathBuf {
    PathBuf::from("out")
}
fn d_true() -> bool {
    true
}

/// Artifact destination and reproducibility switches.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "d_outdir")]
    pub dir: PathBuf,
    /// Zero out wall-clock columns so re-runs are byte-identical.
    #[serde(default = "d_true")]
    pub deterministic: bool,
    /// Worker threads for experiment grids; absent means all logical cores.
    #[serde(default)]
    pub workers: Option<usize>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: d_outdir(),
            deterministic: true,
            workers: None,
        }
    }
}

/// The full configuration document: four sections, all optional, unknown
/// keys rejected everywhere.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CliConfig {
    pub model: ModelSpec,
    pub train: TrainConfig,
    pub data: DataConfig,
    pub output: OutputConfig,
}

impl Default for CliConfig {
    fn default() -> Self {
        CliConfig {
            model: ModelSpec::new(Arch::CnnMlp),
            train: TrainConfig::default(),
            data: DataConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

const SECTIONS: [&str; 4] = ["model", "train", "data", "output"];

/// Strict instantiation from a JSON value: unknown sections and unknown
/// keys inside a section are both configuration errors.
pub fn config_from_value(value: serde_json::Value) -> Result<CliConfig, String> {
    let obj = value
        .as_object()
        .ok_or_else(|| "config: document must be a JSON object".to_string())?;
    for key in obj.keys() {
        if !SECTIONS.contains(&key.as_str()) {
            return Err(format!(
                "{key}: unknown config section (expected one of {})",
                SECTIONS.join("|")
            ));
        }
    }
    let section = |name: &str| obj.get(name).cloned().unwrap_or_else(|| serde_json::json!({}));
    // A partial model section inherits the remaining fields (including the
    // architecture) from the default spec; unknown keys are still rejected.
    let model: ModelSpec = match obj.get("model") {
        Some(v) => {
            let user = v
                .as_object()
                .ok_or_else(|| "model: section must be a JSON object".to_string())?;
            let mut base = serde_json::to_value(ModelSpec::new(Arch::CnnMlp))
                .expect("spec serializes");
            let merged = base.as_object_mut().expect("spec is an object");
            for (k, val) in user {
                merged.insert(k.clone(), val.clone());
            }
            serde_json::from_value(base).map_err(|e| format!("model: {e}"))?
        }
        None => ModelSpec::new(Arch::CnnMlp),
    };
    let train: TrainConfig =
        serde_json::from_value(section("train")).map_err(|e| format!("train: {e}"))?;
    let data: DataConfig =
        serde_json::from_value(section("data")).map_err(|e| format!("data: {e}"))?;
    let output: OutputConfig =
        serde_json::from_value(section("output")).map_err(|e| format!("output: {e}"))?;
    Ok(CliConfig {
        model,
        train,
        data,
        output,
    })
}

/// Applies one `dotted.path=value` override to the raw JSON document.
/// Values parse as JSON when possible (numbers, booleans, arrays) and fall
/// back to strings, so `train.epochs=5` and `data.source=synthetic` both
/// work unquoted.
pub fn apply_override(root: &mut serde_json::Value, arg: &str) -> Result<(), String> {
    let (path, raw) = arg
        .split_once('=')
        .ok_or_else(|| format!("override {arg:?}: expected dotted.path=value"))?;
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(format!("{path}: empty path segment"));
    }
    let value: serde_json::Value =
        serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    let mut cur = root;
    for p in &parts[..parts.len() - 1] {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| format!("{path}: {p} does not address an object"))?;
        cur = obj
            .entry(p.to_string())
            .or_insert_with(|| serde_json::json!({}));
    }
    let leaf = parts[parts.len() - 1];
    cur.as_object_mut()
        .ok_or_else(|| format!("{path}: {leaf} does not address an object"))?
        .insert(leaf.to_string(), value);
    Ok(())
}

fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<CliConfig, CliError> {
    let mut value = match path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: invalid JSON: {e}", p.display())))?
        }
        None => serde_json::json!({}),
    };
    for o in overrides {
        apply_override(&mut value, o).map_err(CliError::Config)?;
    }
    let cfg = config_from_value(value).map_err(CliError::Config)?;
    cfg.model
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    cfg.train.validate().map_err(classify_train_error)?;
    cfg.data.validate().map_err(classify_train_error)?;
    Ok(cfg)
}

/// sha256 over the canonical (sorted-key) JSON rendering.
fn fingerprint(value: &serde_json::Value) -> String {
    let canon = serde_json::to_string(value).expect("value serializes");
    let digest = Sha256::digest(canon.as_bytes());
    let mut hex = String::with_capacity(64);
    for b in digest {
        hex.push_str(&format!("{b:02x}"));
    }
    hex
}

#[derive(Serialize)]
struct RunMetadata {
    command: String,
    preset: Option<String>,
    scale: Option<String>,
    seeds: Vec<u64>,
    metric: String,
    code_version: String,
    deterministic: bool,
    /// Label noise corrupts training labels only; test labels stay clean.
    noise_applied_to: String,
    config: serde_json::Value,
    fingerprint: String,
}

fn make_metadata(
    command: &str,
    preset: Option<&str>,
    scale: Option<&str>,
    seeds: &[u64],
    metric: &str,
    cfg: &CliConfig,
) -> RunMetadata {
    let config = serde_json::to_value(cfg).expect("config serializes");
    // The fingerprint identifies the run scientifically, so it covers the
    // sections that determine the numbers — not the output location.
    let fp_input = serde_json::json!({
        "command": command,
        "preset": preset,
        "scale": scale,
        "seeds": seeds,
        "model": config["model"],
        "train": config["train"],
        "data": config["data"],
    });
    RunMetadata {
        command: command.to_string(),
        preset: preset.map(str::to_string),
        scale: scale.map(str::to_string),
        seeds: seeds.to_vec(),
        metric: metric.to_string(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        deterministic: cfg.output.deterministic,
        noise_applied_to: "train_split_only".to_string(),
        config,
        fingerprint: fingerprint(&fp_input),
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)
            .map_err(|e| CliError::Io(format!("{}: {e}", parent.display())))?;
    }
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    write_text(path, &(text + "\n"))
}

// ---------------------------------------------------------------------------
// Command definitions
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "kanlab",
    version,
    about = "Spline-edge network layers with a reproducible experiment harness"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Dataset utilities.
    Data {
        #[command(subcommand)]
        cmd: DataCmd,
    },
    /// Train one model from a config file; writes a checkpoint and a CSV.
    Train {
        /// JSON config with sections model/train/data/output.
        #[arg(long)]
        config: PathBuf,
        /// Dotted-path overrides, e.g. train.epochs=5
        overrides: Vec<String>,
    },
    /// Inference-mode evaluation of a checkpoint; prints JSON.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// CIFAR directory; omitted means the synthetic image set.
        #[arg(long)]
        data: Option<PathBuf>,
        /// cifar10 or cifar100 (with --data).
        #[arg(long, default_value = "cifar10")]
        variant: String,
        /// Dotted-path overrides for the synthetic data section.
        overrides: Vec<String>,
    },
    /// Finite-difference check of every parameter group of an architecture.
    Gradcheck {
        /// Architecture tag, e.g. cnn_kan.
        #[arg(long)]
        model: String,
        #[arg(long, default_value_t = 1e-5)]
        tolerance: f64,
    },
    /// Run a preset grid over models, sweep values, and seeds.
    Experiment {
        #[arg(long)]
        preset: String,
        #[arg(long, default_value = "desk")]
        scale: String,
        /// Comma-separated run seeds.
        #[arg(long, value_delimiter = ',', default_values_t = [1u64, 2, 3, 4, 5])]
        seeds: Vec<u64>,
        /// Optional JSON config for train/data/output sections.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory (overrides output.dir).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (overrides output.workers).
        #[arg(long)]
        workers: Option<usize>,
        /// Dotted-path overrides, e.g. train.epochs=5
        overrides: Vec<String>,
    },
}

#[derive(Subcommand)]
enum DataCmd {
    /// Check CIFAR binary files: sizes, label ranges, class histogram.
    Verify {
        dir: PathBuf,
        #[arg(long, default_value = "cifar10")]
        variant: String,
    },
}

/// Entry point used by the binary; returns the process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}

fn parse_variant(name: &str) -> Result<CifarVariant, CliError> {
    match name {
        "cifar10" => Ok(CifarVariant::Cifar10),
        "cifar100" => Ok(CifarVariant::Cifar100),
        other => Err(CliError::Config(format!(
            "variant: {other:?} is not cifar10|cifar100"
        ))),
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::Data {
            cmd: DataCmd::Verify { dir, variant },
        } => cmd_data_verify(&dir, &variant),
        Cmd::Train { config, overrides } => cmd_train(&config, &overrides),
        Cmd::Eval {
            checkpoint,
            data,
            variant,
            overrides,
        } => cmd_eval(&checkpoint, data.as_deref(), &variant, &overrides),
        Cmd::Gradcheck { model, tolerance } => cmd_gradcheck(&model, tolerance),
        Cmd::Experiment {
            preset,
            scale,
            seeds,
            config,
            out,
            workers,
            overrides,
        } => cmd_experiment(&preset, &scale, seeds, config.as_deref(), out, workers, &overrides),
    }
}

fn cmd_data_verify(dir: &Path, variant: &str) -> Result<(), CliError> {
    let variant = parse_variant(variant)?;
    let report = verify_cifar_dir(dir, variant)
        .map_err(|e| classify_data_error_ref(&e, e.to_string()))?;
    println!(
        "{}",
        serde_json::to_string_pretty(&report).expect("report serializes")
    );
    Ok(())
}

/// Builds the task a model spec trains or evaluates on from the data
/// section. Regression architectures draw their datasets from the run
/// seed so every seed is an independent replication.
fn build_task(spec: &ModelSpec, data: &DataConfig, seed: u64) -> Result<TaskData, CliError> {
    match spec.arch {
        Arch::EdgeKan | Arch::EdgeLinear => {
            let ds = crate::data::edge_dataset(data.edge_side_parsed());
            Ok(TaskData::Classify {
                train: ds.clone(),
                test: ds,
            })
        }
        Arch::RegKan | Arch::KaTheorem => {
            let f = crate::data::RegFn::parse(&data.reg_fn)
                .map_err(|e| CliError::Config(format!("data.reg_fn: {e}")))?;
            let train = crate::data::synth_regression(
                f,
                data.reg_train as usize,
                data.reg_domain,
                data.reg_noise_sd,
                Rng::derive_seed(seed, &["reg", "train"]),
            );
            let test = crate::data::synth_regression(
                f,
                data.reg_test as usize,
                data.reg_domain,
                data.reg_noise_sd,
                Rng::derive_seed(seed, &["reg", "test"]),
            );
            Ok(TaskData::Regress { train, test })
        }
        _ => {
            let (train, test) = data.load_image_splits().map_err(classify_train_error)?;
            Ok(TaskData::Classify { train, test })
        }
    }
}

fn records_from_evals(
    evals: &[EpochEval],
    preset: &str,
    cell: &str,
    model: &str,
    seed: u64,
) -> Vec<RunRecord> {
    let mut records = Vec::new();
    for ev in evals {
        for (split, side) in [("train", &ev.train), ("test", &ev.test)] {
            records.push(RunRecord {
                preset: preset.to_string(),
                cell: cell.to_string(),
                model: model.to_string(),
                sweep_value: 0.0,
                seed,
                epoch: ev.epoch,
                split,
                loss: side.total,
                accuracy: side.metric,
                wall_ms: ev.wall_ms,
            });
        }
    }
    records
}

fn cmd_train(config_path: &Path, overrides: &[String]) -> Result<(), CliError> {
    let cfg = load_config(Some(config_path), overrides)?;
    let task = build_task(&cfg.model, &cfg.data, cfg.train.seed)?;
    let out = train(&cfg.model, &task, &cfg.train).map_err(classify_train_error)?;

    let (input_shape, out_dim): (Vec<usize>, usize) = match &task {
        TaskData::Classify { train, .. } => {
            (train.image_shape().to_vec(), train.class_count)
        }
        TaskData::Regress { .. } => (vec![1], 1),
    };
    let dir = &cfg.output.dir;
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let ckpt = dir.join("checkpoint.ckpt");
    let meta = CheckpointMeta {
        model: cfg.model.clone(),
        input_shape,
        out_dim,
        seed: cfg.train.seed,
        basis: cfg.model.basis_spec(),
    };
    save_checkpoint(&out.model, &meta, &ckpt)
        .map_err(|e| classify_model_error_ref(&e, e.to_string()))?;

    let arch = cfg.model.arch.as_str();
    let records = records_from_evals(&out.evals, "train", arch, arch, cfg.train.seed);
    write_text(
        &dir.join("train.csv"),
        &records_to_csv(&records, cfg.output.deterministic),
    )?;
    write_json(
        &dir.join("metadata.json"),
        &make_metadata("train", None, None, &[cfg.train.seed], out.metric_name, &cfg),
    )?;

    let last = out.evals.last().expect("epoch 0 always evaluated");
    println!(
        "{}",
        serde_json::json!({
            "checkpoint": ckpt,
            "epochs": last.epoch,
            "train": {"loss": last.train.total, "metric": last.train.metric},
            "test": {"loss": last.test.total, "metric": last.test.metric},
            "metric": out.metric_name,
        })
    );
    Ok(())
}

fn eval_classification(
    model: &Sequential,
    ds: &crate::data::LabeledDataset,
) -> (f64, f64) {
    let n = ds.len();
    let mut ce_sum = 0.0;
    let mut hits = 0.0;
    let mut at = 0;
    while at < n {
        let hi = (at + 256).min(n);
        let idx: Vec<usize> = (at..hi).collect();
        let (x, labels) = ds.gather(&idx);
        let logits = model.forward_infer(&x);
        let (ce, _) = softmax_cross_entropy(&logits, &labels);
        ce_sum += ce * idx.len() as f64;
        hits += accuracy(&logits, &labels) * idx.len() as f64;
        at = hi;
    }
    (ce_sum / n as f64, hits / n as f64)
}

fn cmd_eval(
    checkpoint: &Path,
    data_dir: Option<&Path>,
    variant: &str,
    overrides: &[String],
) -> Result<(), CliError> {
    let (model, meta) =
        load_checkpoint(checkpoint).map_err(|e| classify_model_error_ref(&e, e.to_string()))?;
    let mut data_cfg = CliConfig::default().data;
    if let Some(dir) = data_dir {
        parse_variant(variant)?;
        data_cfg.source = variant.to_string();
        data_cfg.dir = Some(dir.to_path_buf());
    }
    if !overrides.is_empty() {
        let mut value = serde_json::to_value(&data_cfg).expect("serializes");
        let mut wrapped = serde_json::json!({ "data": value });
        for o in overrides {
            apply_override(&mut wrapped, o).map_err(CliError::Config)?;
        }
        value = wrapped["data"].take();
        data_cfg = serde_json::from_value(value)
            .map_err(|e| CliError::Config(format!("data: {e}")))?;
        data_cfg.validate().map_err(classify_train_error)?;
    }
    let ds = match meta.model.arch {
        Arch::EdgeKan | Arch::EdgeLinear => crate::data::edge_dataset(data_cfg.edge_side_parsed()),
        Arch::RegKan | Arch::KaTheorem => {
            return Err(CliError::Config(
                "eval: regression checkpoints are evaluated through the experiment presets"
                    .to_string(),
            ))
        }
        _ => data_cfg.load_image_splits().map_err(classify_train_error)?.1,
    };
    if ds.image_shape().to_vec() != meta.input_shape {
        return Err(CliError::Config(format!(
            "eval: checkpoint expects input shape {:?} but the dataset provides {:?}",
            meta.input_shape,
            ds.image_shape()
        )));
    }
    let (loss, acc) = eval_classification(&model, &ds);
    println!(
        "{}",
        serde_json::json!({
            "checkpoint": checkpoint,
            "arch": meta.model.arch.as_str(),
            "records": ds.len(),
            "loss": loss,
            "accuracy": acc,
        })
    );
    Ok(())
}

fn cmd_gradcheck(model: &str, tolerance: f64) -> Result<(), CliError> {
    let arch = Arch::parse(model).ok_or_else(|| {
        CliError::Config(format!(
            "model: {model:?} is not a known architecture tag"
        ))
    })?;
    if !(tolerance.is_finite() && tolerance > 0.0) {
        return Err(CliError::Config(format!(
            "tolerance: {tolerance} must be positive"
        )));
    }
    let report =
        gradcheck(&ModelSpec::new(arch), tolerance).map_err(classify_train_error)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&report).expect("report serializes")
    );
    if report.pass {
        Ok(())
    } else {
        Err(CliError::Numeric(format!(
            "gradcheck: {} parameter group(s) exceeded tolerance {tolerance}",
            report.groups.iter().filter(|g| !g.pass).count()
        )))
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_experiment(
    preset: &str,
    scale: &str,
    seeds: Vec<u64>,
    config: Option<&Path>,
    out: Option<PathBuf>,
    workers: Option<usize>,
    overrides: &[String],
) -> Result<(), CliError> {
    let scale = Scale::parse(scale)
        .ok_or_else(|| CliError::Config(format!("scale: {scale:?} is not desk|paper")))?;
    let mut cfg = load_config(config, overrides)?;
    if let Some(dir) = out {
        cfg.output.dir = dir;
    }
    if workers.is_some() {
        cfg.output.workers = workers;
    }
    // fail fast on unknown presets before touching data
    build_preset(preset, scale, &cfg.train).map_err(classify_train_error)?;
    let req = ExperimentRequest {
        preset: preset.to_string(),
        scale,
        seeds: seeds.clone(),
        base_train: cfg.train.clone(),
        data: cfg.data.clone(),
        workers: cfg.output.workers,
    };
    let result = run_experiment(&req).map_err(classify_train_error)?;

    let dir = &cfg.output.dir;
    write_text(
        &dir.join("results.csv"),
        &records_to_csv(&result.records, cfg.output.deterministic),
    )?;
    write_json(&dir.join("summary.json"), &result.summary)?;
    write_json(
        &dir.join("metadata.json"),
        &make_metadata(
            "experiment",
            Some(preset),
            Some(scale.as_str()),
            &seeds,
            result.metric_name,
            &cfg,
        ),
    )?;
    println!(
        "{}",
        serde_json::json!({
            "preset": preset,
            "scale": scale.as_str(),
            "seeds": seeds,
            "records": result.records.len(),
            "out": dir,
        })
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_reach_nested_fields_and_parse_types() {
        let mut value = serde_json::json!({});
        apply_override(&mut value, "train.epochs=5").unwrap();
        apply_override(&mut value, "data.source=synthetic").unwrap();
        apply_override(&mut value, "output.deterministic=false").unwrap();
        apply_override(&mut value, "model.channels=[8,16]").unwrap();
        let cfg = config_from_value(value).unwrap();
        assert_eq!(cfg.train.epochs, 5);
        assert_eq!(cfg.data.source, "synthetic");
        assert!(!cfg.output.deterministic);
        assert_eq!(cfg.model.channels, vec![8, 16]);
    }

    #[test]
    fn bad_overrides_and_sections_are_named() {
        let mut value = serde_json::json!({});
        let err = apply_override(&mut value, "no_equals_sign").unwrap_err();
        assert!(err.contains("no_equals_sign"));
        let err = apply_override(&mut value, "train..epochs=1").unwrap_err();
        assert!(err.contains("empty path segment"));

        let err = config_from_value(serde_json::json!({"trian": {}})).unwrap_err();
        assert!(err.contains("trian"), "{err}");
        let err =
            config_from_value(serde_json::json!({"train": {"epocs": 1}})).unwrap_err();
        assert!(err.starts_with("train:") && err.contains("epocs"), "{err}");
    }

    #[test]
    fn validation_failures_map_to_config_exit_code() {
        let mut value = serde_json::json!({});
        apply_override(&mut value, "train.epochs=-1").unwrap();
        let cfg = config_from_value(value).unwrap();
        let err = cfg.train.validate().unwrap_err();
        let cli_err = classify_train_error(err);
        assert_eq!(cli_err.exit_code(), EXIT_CONFIG);
        assert!(cli_err.to_string().starts_with("train.epochs"));
    }

    #[test]
    fn error_classes_map_to_documented_exit_codes() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(CliError::Io("x".into()).exit_code(), 3);
        assert_eq!(CliError::Numeric("x".into()).exit_code(), 4);
        let diverged = TrainError::Diverged {
            context: "step 1".into(),
            loss: f64::INFINITY,
        };
        assert_eq!(classify_train_error(diverged).exit_code(), EXIT_NUMERIC);
    }

    #[test]
    fn fingerprints_are_stable_and_sensitive() {
        let cfg = CliConfig::default();
        let a = make_metadata("train", None, None, &[1], "accuracy", &cfg);
        let b = make_metadata("train", None, None, &[1], "accuracy", &cfg);
        assert_eq!(a.fingerprint, b.fingerprint);
        assert_eq!(a.fingerprint.len(), 64);
        let mut cfg2 = cfg.clone();
        cfg2.train.epochs = 16;
        let c = make_metadata("train", None, None, &[1], "accuracy", &cfg2);
        assert_ne!(a.fingerprint, c.fingerprint);
        let d = make_metadata("train", None, None, &[2], "accuracy", &cfg);
        assert_ne!(a.fingerprint, d.fingerprint);
    }

    #[test]
    fn default_config_document_round_trips() {
        let cfg = CliConfig::default();
        let value = serde_json::to_value(&cfg).unwrap();
        let back = config_from_value(value).unwrap();
        assert_eq!(back.train.epochs, cfg.train.epochs);
        assert_eq!(back.data.source, cfg.data.source);
        assert_eq!(back.output.dir, cfg.output.dir);
    }
}
