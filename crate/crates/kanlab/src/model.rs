//! Model assembly: a declarative [`ModelSpec`] naming an architecture, a
//! [`Sequential`] container dispatching forward/backward over heterogeneous
//! layers, model-level penalty aggregation, and the checkpoint format.
//!
//! Randomness fan-out: every layer derives its own initialization and mask
//! streams from `(seed, layer name, purpose)`, so adding or reordering
//! layers never shifts the draws of an unrelated layer.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ckan::CkanLayer;
use crate::kan::{KanCache, KanLayer, MaskMode};
use crate::nn::{Conv2d, Conv2dCache, Linear, LinearCache, MaxPool2, MaxPoolCache, Param, Relu, ReluCache};
use crate::rng::Rng;
use crate::spline::BasisSpec;
use crate::tensor::{Tensor, TensorError};
use crate::ckan::CkanCache;

#[derive(Debug, Error)]
pub enum ModelError {
    /// Invalid specification; the message starts with the dotted config path
    /// of the offending field.
    #[error("{0}")]
    Spec(String),
    #[error("checkpoint {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: io::Error,
    },
    #[error("checkpoint metadata: {0}")]
    Json(#[from] serde_json::Error),
}

/// Architecture tags. The three image models share a two-stage
/// conv/pool front end and differ in where spline layers replace
/// conventional pieces; the remaining tags are small task-specific nets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    /// conv-relu-pool x2, flatten, linear head.
    CnnMlp,
    /// First conv replaced by a spline-activated conv block.
    CkanCnnMlp,
    /// Linear head replaced by a KAN layer.
    CnnKan,
    /// Two stacked KAN layers for the 4-pixel edge task.
    EdgeKan,
    /// Bias-free single linear layer on the edge task (the contrast model).
    EdgeLinear,
    /// Two KAN layers shaped d -> 2d+1 -> 1, the superposition-theorem
    /// construction.
    KaTheorem,
    /// Single 1 -> 1 KAN layer for scalar regression.
    RegKan,
}

impl Arch {
    pub fn parse(tag: &str) -> Option<Arch> {
        serde_json::from_value(serde_json::Value::String(tag.to_string())).ok()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Arch::CnnMlp => "cnn_mlp",
            Arch::CkanCnnMlp => "ckan_cnn_mlp",
            Arch::CnnKan => "cnn_kan",
            Arch::EdgeKan => "edge_kan",
            Arch::EdgeLinear => "edge_linear",
            Arch::KaTheorem => "ka_theorem",
            Arch::RegKan => "reg_kan",
        }
    }
}

fn default_channels() -> Vec<usize> {
    vec![32, 64]
}
fn default_grid() -> usize {
    5
}
fn default_order() -> usize {
    3
}
fn default_k_act() -> usize {
    1
}
fn default_domain() -> (f64, f64) {
    (-1.0, 1.0)
}
fn default_true() -> bool {
    true
}

/// Declarative network description; everything needed to rebuild a model
/// except the input shape and class count, which come from the data.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub arch: Arch,
    /// Channel widths of the two conv stages (image models only).
    #[serde(default = "default_channels")]
    pub channels: Vec<usize>,
    /// Interior grid intervals of every spline basis.
    #[serde(default = "default_grid")]
    pub grid_size: usize,
    /// Spline order (polynomial degree).
    #[serde(default = "default_order")]
    pub order: usize,
    /// Splines per channel in the spline-conv activation.
    #[serde(default = "default_k_act")]
    pub k_act: usize,
    /// Segment-deactivation probability for every spline layer.
    #[serde(default)]
    pub deactivation_p: f64,
    /// Optional hidden width: inserts one hidden layer before the head of
    /// the image models, and sets the hidden width of `edge_kan`
    /// (default 8 there).
    #[serde(default)]
    pub hidden: Option<usize>,
    /// Keep the SiLU path inside the spline-conv activation.
    #[serde(default = "default_true")]
    pub ckan_silu: bool,
    /// Spline domain `[lo, hi]` shared by every basis in the model.
    #[serde(default = "default_domain")]
    pub domain: (f64, f64),
}

impl ModelSpec {
    pub fn new(arch: Arch) -> Self {
        ModelSpec {
            arch,
            channels: default_channels(),
            grid_size: default_grid(),
            order: default_order(),
            k_act: default_k_act(),
            deactivation_p: 0.0,
            hidden: None,
            ckan_silu: true,
            domain: default_domain(),
        }
    }

    /// Field-level validation; error messages begin with the dotted config
    /// path of the bad field.
    pub fn validate(&self) -> Result<(), ModelError> {
        let err = |m: String| Err(ModelError::Spec(m));
        if self.channels.len() != 2 || self.channels.iter().any(|&c| c == 0) {
            return err(format!(
                "model.channels: need exactly two nonzero widths, got {:?}",
                self.channels
            ));
        }
        if self.grid_size == 0 {
            return err("model.grid_size: must be >= 1".into());
        }
        if self.k_act == 0 {
            return err("model.k_act: must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.deactivation_p) {
            return err(format!(
                "model.deactivation_p: {} outside [0, 1]",
                self.deactivation_p
            ));
        }
        if self.hidden == Some(0) {
            return err("model.hidden: must be >= 1 when present".into());
        }
        if !(self.domain.0 < self.domain.1)
            || !self.domain.0.is_finite()
            || !self.domain.1.is_finite()
        {
            return err(format!(
                "model.domain: [{}, {}] is not a finite increasing interval",
                self.domain.0, self.domain.1
            ));
        }
        Ok(())
    }

    pub fn basis_spec(&self) -> BasisSpec {
        BasisSpec {
            grid_size: self.grid_size,
            order: self.order,
            x_min: self.domain.0,
            x_max: self.domain.1,
        }
    }
}

/// One stage of a [`Sequential`] model.
#[derive(Debug)]
pub enum Layer {
    Conv(Conv2d),
    Relu(Relu),
    Pool(MaxPool2),
    Flatten,
    Linear(Linear),
    Kan(KanLayer),
    Ckan(CkanLayer),
}

#[derive(Debug)]
pub enum LayerCache {
    Conv(Conv2dCache),
    Relu(ReluCache),
    Pool(MaxPoolCache),
    Flatten { shape: Vec<usize> },
    Linear(LinearCache),
    Kan(KanCache),
    Ckan(CkanCache),
}

impl Layer {
    fn forward(&self, x: &Tensor, mode: MaskMode, rng: Option<&mut Rng>) -> (Tensor, LayerCache) {
        match self {
            Layer::Conv(l) => {
                let (y, c) = l.forward(x);
                (y, LayerCache::Conv(c))
            }
            Layer::Relu(l) => {
                let (y, c) = l.forward(x);
                (y, LayerCache::Relu(c))
            }
            Layer::Pool(l) => {
                let (y, c) = l.forward(x);
                (y, LayerCache::Pool(c))
            }
            Layer::Flatten => {
                let b = x.shape()[0];
                let feat = x.len() / b.max(1);
                let y = x.reshape(&[b, feat]).expect("flatten row count");
                (
                    y,
                    LayerCache::Flatten {
                        shape: x.shape().to_vec(),
                    },
                )
            }
            Layer::Linear(l) => {
                let (y, c) = l.forward(x);
                (y, LayerCache::Linear(c))
            }
            Layer::Kan(l) => {
                let (y, c) = l.forward_train(x, mode, rng);
                (y, LayerCache::Kan(c))
            }
            Layer::Ckan(l) => {
                let (y, c) = l.forward_train(x, mode, rng);
                (y, LayerCache::Ckan(c))
            }
        }
    }

    fn backward(&mut self, cache: &LayerCache, dy: &Tensor) -> Tensor {
        match (self, cache) {
            (Layer::Conv(l), LayerCache::Conv(c)) => l.backward(c, dy),
            (Layer::Relu(l), LayerCache::Relu(c)) => l.backward(c, dy),
            (Layer::Pool(l), LayerCache::Pool(c)) => l.backward(c, dy),
            (Layer::Flatten, LayerCache::Flatten { shape }) => {
                dy.reshape(shape).expect("unflatten")
            }
            (Layer::Linear(l), LayerCache::Linear(c)) => l.backward(c, dy),
            (Layer::Kan(l), LayerCache::Kan(c)) => l.backward(c, dy),
            (Layer::Ckan(l), LayerCache::Ckan(c)) => l.backward(c, dy),
            _ => panic!("layer/cache kind mismatch"),
        }
    }
}

/// Which parameters an L1 penalty covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum L1Scope {
    /// Every trainable parameter in the model.
    All,
    /// Spline coefficient tensors only (keys ending in `.c` / `.c_act`).
    Coefficients,
}

fn key_is_coefficient(key: &str) -> bool {
    key.ends_with(".c") || key.ends_with(".c_act")
}

/// Named layers executed in order, with one dedicated mask stream per layer.
#[derive(Debug)]
pub struct Sequential {
    layers: Vec<(String, Layer)>,
    mask_rngs: Vec<Rng>,
}

impl Sequential {
    pub fn new(seed: u64, layers: Vec<(String, Layer)>) -> Self {
        let mask_rngs = layers
            .iter()
            .map(|(name, _)| Rng::derive(seed, &[name.as_str(), "mask"]))
            .collect();
        Sequential { layers, mask_rngs }
    }

    pub fn layer_names(&self) -> Vec<&str> {
        self.layers.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn layers(&self) -> &[(String, Layer)] {
        &self.layers
    }

    /// Total mask-stream draws so far; inference must never advance this.
    pub fn mask_draws(&self) -> u64 {
        self.mask_rngs.iter().map(|r| r.draw_count()).sum()
    }

    pub fn forward_train(&mut self, x: &Tensor, mode: MaskMode) -> (Tensor, Vec<LayerCache>) {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for (i, (_, layer)) in self.layers.iter().enumerate() {
            let (y, cache) = layer.forward(&cur, mode, Some(&mut self.mask_rngs[i]));
            caches.push(cache);
            cur = y;
        }
        (cur, caches)
    }

    /// Deactivation-free forward; consumes no randomness.
    pub fn forward_infer(&self, x: &Tensor) -> Tensor {
        let mut cur = x.clone();
        for (_, layer) in &self.layers {
            let (y, _) = layer.forward(&cur, MaskMode::ForceNone, None);
            cur = y;
        }
        cur
    }

    /// Accumulates parameter gradients (callers zero them between steps)
    /// and returns the input gradient.
    pub fn backward(&mut self, caches: &[LayerCache], dy: &Tensor) -> Tensor {
        assert_eq!(caches.len(), self.layers.len(), "stale cache list");
        let mut cur = dy.clone();
        for ((_, layer), cache) in self.layers.iter_mut().zip(caches).rev() {
            cur = layer.backward(cache, &cur);
        }
        cur
    }

    /// `(checkpoint key, parameter)` pairs in execution order. Keys are
    /// `<layer>.<tensor>`; a disabled linear bias is omitted.
    pub fn params(&self) -> Vec<(String, &Param)> {
        let mut out = Vec::new();
        for (name, layer) in &self.layers {
            match layer {
                Layer::Conv(l) => {
                    out.push((format!("{name}.W"), &l.weight));
                    out.push((format!("{name}.b"), &l.bias));
                }
                Layer::Linear(l) => {
                    out.push((format!("{name}.W"), &l.weight));
                    if l.has_bias {
                        out.push((format!("{name}.b"), &l.bias));
                    }
                }
                Layer::Kan(l) => {
                    out.push((format!("{name}.c"), &l.c));
                    out.push((format!("{name}.w_b"), &l.w_b));
                    out.push((format!("{name}.w_s"), &l.w_s));
                }
                Layer::Ckan(l) => {
                    out.push((format!("{name}.W"), &l.conv.weight));
                    out.push((format!("{name}.b"), &l.conv.bias));
                    out.push((format!("{name}.c_act"), &l.c_act));
                    out.push((format!("{name}.w_b_act"), &l.w_b_act));
                    out.push((format!("{name}.w_k"), &l.w_k));
                }
                Layer::Relu(_) | Layer::Pool(_) | Layer::Flatten => {}
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<(String, &mut Param)> {
        let mut out = Vec::new();
        for (name, layer) in &mut self.layers {
            match layer {
                Layer::Conv(l) => {
                    out.push((format!("{name}.W"), &mut l.weight));
                    out.push((format!("{name}.b"), &mut l.bias));
                }
                Layer::Linear(l) => {
                    out.push((format!("{name}.W"), &mut l.weight));
                    if l.has_bias {
                        out.push((format!("{name}.b"), &mut l.bias));
                    }
                }
                Layer::Kan(l) => {
                    out.push((format!("{name}.c"), &mut l.c));
                    out.push((format!("{name}.w_b"), &mut l.w_b));
                    out.push((format!("{name}.w_s"), &mut l.w_s));
                }
                Layer::Ckan(l) => {
                    out.push((format!("{name}.W"), &mut l.conv.weight));
                    out.push((format!("{name}.b"), &mut l.conv.bias));
                    out.push((format!("{name}.c_act"), &mut l.c_act));
                    out.push((format!("{name}.w_b_act"), &mut l.w_b_act));
                    out.push((format!("{name}.w_k"), &mut l.w_k));
                }
                Layer::Relu(_) | Layer::Pool(_) | Layer::Flatten => {}
            }
        }
        out
    }

    pub fn zero_grads(&mut self) {
        for (_, p) in self.params_mut() {
            p.zero_grad();
        }
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|(_, p)| p.value.len()).sum()
    }

    /// Curvature energy summed over every spline in the model
    /// (unweighted; multiply by the regularization strength for the loss
    /// contribution).
    pub fn smoothness_value(&self) -> f64 {
        self.layers
            .iter()
            .map(|(_, l)| match l {
                Layer::Kan(k) => k.smoothness_value(),
                Layer::Ckan(c) => c.smoothness_value(),
                _ => 0.0,
            })
            .sum()
    }

    pub fn add_smoothness_grad(&mut self, lambda: f64) {
        if lambda == 0.0 {
            return;
        }
        for (_, l) in &mut self.layers {
            match l {
                Layer::Kan(k) => k.add_smoothness_grad(lambda),
                Layer::Ckan(c) => c.add_smoothness_grad(lambda),
                _ => {}
            }
        }
    }

    /// `lambda * sum |theta|` over the scope's parameters.
    pub fn l1_value(&self, lambda: f64, scope: L1Scope) -> f64 {
        assert!(lambda >= 0.0, "l1 weight must be nonnegative");
        if lambda == 0.0 {
            return 0.0;
        }
        let mut total = 0.0;
        for (key, p) in self.params() {
            if scope == L1Scope::All || key_is_coefficient(&key) {
                total += p.value.data().iter().map(|v| v.abs()).sum::<f64>();
            }
        }
        lambda * total
    }

    /// Subgradient of [`Self::l1_value`]: `lambda * sign(theta)`, zero at
    /// exactly zero.
    pub fn add_l1_grad(&mut self, lambda: f64, scope: L1Scope) {
        assert!(lambda >= 0.0);
        if lambda == 0.0 {
            return;
        }
        for (key, p) in self.params_mut() {
            if scope == L1Scope::All || key_is_coefficient(&key) {
                let vals = p.value.data().to_vec();
                let g = p.grad.data_mut();
                for (gi, v) in g.iter_mut().zip(vals) {
                    if v > 0.0 {
                        *gi += lambda;
                    } else if v < 0.0 {
                        *gi -= lambda;
                    }
                }
            }
        }
    }
}

fn features_after_front(input: &[usize], channels: &[usize]) -> Result<usize, ModelError> {
    if input.len() != 3 {
        return Err(ModelError::Spec(format!(
            "data: image models need [C, H, W] inputs, got shape {input:?}"
        )));
    }
    let (h, w) = (input[1], input[2]);
    if h % 4 != 0 || w % 4 != 0 || h == 0 || w == 0 {
        return Err(ModelError::Spec(format!(
            "data: image extent {h}x{w} must be a positive multiple of 4 (two 2x2 pools)"
        )));
    }
    Ok(channels[1] * (h / 4) * (w / 4))
}

/// Builds the network a [`ModelSpec`] names, for the given per-item input shape
/// and output width. Parameter initialization draws only from streams
/// derived from `(seed, layer name, "init")`.
pub fn build_model(
    spec: &ModelSpec,
    input_shape: &[usize],
    out_dim: usize,
    seed: u64,
) -> Result<Sequential, ModelError> {
    spec.validate()?;
    let basis = spec.basis_spec();
    basis.validate().map_err(ModelError::Spec)?;
    let p = spec.deactivation_p;
    let init = |name: &str| Rng::derive(seed, &[name, "init"]);
    let flat: usize = input_shape.iter().product();
    let mut layers: Vec<(String, Layer)> = Vec::new();

    match spec.arch {
        Arch::CnnMlp | Arch::CnnKan | Arch::CkanCnnMlp => {
            let feat = features_after_front(input_shape, &spec.channels)?;
            let (c_in, ch) = (input_shape[0], &spec.channels);
            if let Arch::CkanCnnMlp = spec.arch {
                let mut ckan = CkanLayer::new(
                    c_in,
                    ch[0],
                    3,
                    1,
                    1,
                    spec.k_act,
                    basis,
                    p,
                    &mut init("ckan1"),
                );
                ckan.silu_path = spec.ckan_silu;
                layers.push(("ckan1".into(), Layer::Ckan(ckan)));
            } else {
                layers.push((
                    "conv1".into(),
                    Layer::Conv(Conv2d::new(c_in, ch[0], 3, 1, 1, &mut init("conv1"))),
                ));
                layers.push(("relu1".into(), Layer::Relu(Relu)));
            }
            layers.push(("pool1".into(), Layer::Pool(MaxPool2)));
            layers.push((
                "conv2".into(),
                Layer::Conv(Conv2d::new(ch[0], ch[1], 3, 1, 1, &mut init("conv2"))),
            ));
            layers.push(("relu2".into(), Layer::Relu(Relu)));
            layers.push(("pool2".into(), Layer::Pool(MaxPool2)));
            layers.push(("flatten".into(), Layer::Flatten));
            let mut head_in = feat;
            if let Some(hdim) = spec.hidden {
                if let Arch::CnnKan = spec.arch {
                    layers.push((
                        "kan_hidden".into(),
                        Layer::Kan(KanLayer::new(feat, hdim, basis, p, &mut init("kan_hidden"))),
                    ));
                } else {
                    layers.push((
                        "hidden".into(),
                        Layer::Linear(Linear::new(feat, hdim, &mut init("hidden"))),
                    ));
                    layers.push(("relu_h".into(), Layer::Relu(Relu)));
                }
                head_in = hdim;
            }
            if let Arch::CnnKan = spec.arch {
                layers.push((
                    "head".into(),
                    Layer::Kan(KanLayer::new(head_in, out_dim, basis, p, &mut init("head"))),
                ));
            } else {
                layers.push((
                    "head".into(),
                    Layer::Linear(Linear::new(head_in, out_dim, &mut init("head"))),
                ));
            }
        }
        Arch::EdgeKan => {
            let hdim = spec.hidden.unwrap_or(8);
            layers.push(("flatten".into(), Layer::Flatten));
            layers.push((
                "kan1".into(),
                Layer::Kan(KanLayer::new(flat, hdim, basis, p, &mut init("kan1"))),
            ));
            layers.push((
                "kan2".into(),
                Layer::Kan(KanLayer::new(hdim, out_dim, basis, p, &mut init("kan2"))),
            ));
        }
        Arch::EdgeLinear => {
            layers.push(("flatten".into(), Layer::Flatten));
            layers.push((
                "head".into(),
                Layer::Linear(Linear::with_bias(flat, out_dim, false, &mut init("head"))),
            ));
        }
        Arch::KaTheorem => {
            let hdim = 2 * flat + 1;
            layers.push(("flatten".into(), Layer::Flatten));
            layers.push((
                "kan1".into(),
                Layer::Kan(KanLayer::new(flat, hdim, basis, p, &mut init("kan1"))),
            ));
            layers.push((
                "kan2".into(),
                Layer::Kan(KanLayer::new(hdim, 1, basis, p, &mut init("kan2"))),
            ));
        }
        Arch::RegKan => {
            layers.push((
                "kan1".into(),
                Layer::Kan(KanLayer::new(flat, out_dim, basis, p, &mut init("kan1"))),
            ));
        }
    }
    Ok(Sequential::new(seed, layers))
}

/// Everything needed to rebuild a checkpointed model before loading its
/// parameter tensors.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    pub model: ModelSpec,
    pub input_shape: Vec<usize>,
    pub out_dim: usize,
    pub seed: u64,
    /// Spline basis parameters, duplicated from the model spec so readers
    /// need not know spec semantics: grid size, order, domain.
    pub basis: BasisSpec,
}

const CKPT_MAGIC: &[u8; 8] = b"KANCKPT1";

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ModelError + '_ {
    move |source| ModelError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes the named-tensor container (magic, entry count, then
/// length-prefixed keys each followed by a tensor in the fixed binary
/// layout) plus a JSON metadata sidecar at `<path>.json`.
pub fn save_checkpoint(
    model: &Sequential,
    meta: &CheckpointMeta,
    path: &Path,
) -> Result<(), ModelError> {
    let params = model.params();
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(CKPT_MAGIC);
    buf.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (key, p) in &params {
        buf.extend_from_slice(&(key.len() as u32).to_le_bytes());
        buf.extend_from_slice(key.as_bytes());
        p.value.write_to(&mut buf)?;
    }
    fs::write(path, buf).map_err(io_err(path))?;
    let side = sidecar_path(path);
    let json = serde_json::to_string_pretty(meta)?;
    fs::write(&side, json + "\n").map_err(io_err(&side))?;
    Ok(())
}

/// Rebuilds the model from the sidecar metadata, then overwrites every
/// parameter from the container. Key mismatches, shape mismatches, and
/// leftover entries are all rejected.
pub fn load_checkpoint(path: &Path) -> Result<(Sequential, CheckpointMeta), ModelError> {
    let side = sidecar_path(path);
    let meta_bytes = fs::read(&side).map_err(io_err(&side))?;
    let meta: CheckpointMeta = serde_json::from_slice(&meta_bytes)?;
    let mut model = build_model(&meta.model, &meta.input_shape, meta.out_dim, meta.seed)?;

    let bytes = fs::read(path).map_err(io_err(path))?;
    let bad = |reason: String| ModelError::Checkpoint {
        path: path.to_path_buf(),
        reason,
    };
    if bytes.len() < 12 || &bytes[..8] != CKPT_MAGIC {
        return Err(bad("missing container magic".into()));
    }
    // cursor is the unread tail of the file
    let mut cursor: &[u8] = &bytes[8..];
    fn take<'a>(cursor: &mut &'a [u8], n: usize) -> Result<&'a [u8], String> {
        if cursor.len() < n {
            return Err(format!(
                "truncated: wanted {n} more bytes, have {}",
                cursor.len()
            ));
        }
        let (head, tail) = cursor.split_at(n);
        *cursor = tail;
        Ok(head)
    }
    let count =
        u32::from_le_bytes(take(&mut cursor, 4).map_err(&bad)?.try_into().unwrap()) as usize;
    let mut entries = Vec::with_capacity(count);
    for _ in 0..count {
        let klen =
            u32::from_le_bytes(take(&mut cursor, 4).map_err(&bad)?.try_into().unwrap()) as usize;
        let key = String::from_utf8(take(&mut cursor, klen).map_err(&bad)?.to_vec())
            .map_err(|e| bad(format!("non-utf8 key: {e}")))?;
        let tensor = Tensor::read_from(&mut cursor)?;
        entries.push((key, tensor));
    }
    if !cursor.is_empty() {
        return Err(bad(format!(
            "{} trailing bytes after last entry",
            cursor.len()
        )));
    }

    let mut params = model.params_mut();
    if params.len() != entries.len() {
        return Err(bad(format!(
            "container has {} tensors but the model has {} parameters",
            entries.len(),
            params.len()
        )));
    }
    for (key, tensor) in entries {
        let slot = params
            .iter_mut()
            .find(|(k, _)| *k == key)
            .ok_or_else(|| bad(format!("unknown parameter key {key:?}")))?;
        if slot.1.value.shape() != tensor.shape() {
            return Err(bad(format!(
                "shape mismatch for {key:?}: container {:?}, model {:?}",
                tensor.shape(),
                slot.1.value.shape()
            )));
        }
        slot.1.value = tensor;
    }
    Ok((model, meta))
}
