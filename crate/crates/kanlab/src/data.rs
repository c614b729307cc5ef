//! Dataset ingestion and synthesis: the CIFAR binary format, balanced
//! subsetting, label-noise injection, the 16-item edge-pattern task, 1D
//! regression samples, and a deterministic synthetic image-classification
//! generator for machines without the CIFAR files.
//!
//! All pixel data is stored as `f64` in `[0, 1]`, exactly `byte / 255`;
//! writing a dataset back to the binary record layout reproduces the
//! original bytes bit for bit.

use std::fs;
use std::io::{self};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::rng::Rng;
use crate::tensor::Tensor;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: file length {len} is not a multiple of the {record}-byte record")]
    Truncated {
        path: PathBuf,
        len: u64,
        record: usize,
    },
    #[error("{path}: record {index} has label {label} but only {classes} classes exist")]
    LabelOutOfRange {
        path: PathBuf,
        index: usize,
        label: u8,
        classes: usize,
    },
    #[error("fraction {0} leaves some class empty; need floor(fraction * per-class count) >= 1")]
    EmptyClass(f64),
    #[error("fraction {0} outside (0, 1]")]
    BadFraction(f64),
    #[error("noise fraction {0} outside [0, 1]")]
    BadNoise(f64),
    #[error("label noise needs at least 2 classes")]
    TooFewClasses,
    #[error("unknown regression function {0:?} (expected \"sin\" or \"square\")")]
    UnknownFunction(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CifarVariant {
    Cifar10,
    Cifar100,
}

impl CifarVariant {
    pub fn record_len(self) -> usize {
        match self {
            CifarVariant::Cifar10 => 3073,
            CifarVariant::Cifar100 => 3074,
        }
    }

    pub fn class_count(self) -> usize {
        match self {
            CifarVariant::Cifar10 => 10,
            CifarVariant::Cifar100 => 100,
        }
    }

    /// Standard file names of the binary distribution.
    pub fn train_files(self) -> Vec<&'static str> {
        match self {
            CifarVariant::Cifar10 => vec![
                "data_batch_1.bin",
                "data_batch_2.bin",
                "data_batch_3.bin",
                "data_batch_4.bin",
                "data_batch_5.bin",
            ],
            CifarVariant::Cifar100 => vec!["train.bin"],
        }
    }

    pub fn test_files(self) -> Vec<&'static str> {
        match self {
            CifarVariant::Cifar10 => vec!["test_batch.bin"],
            CifarVariant::Cifar100 => vec!["test.bin"],
        }
    }
}

/// Images plus integer labels. CIFAR-100 datasets also carry the coarse
/// label byte so files can be reserialized bit-exactly.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub images: Tensor,
    pub labels: Vec<usize>,
    pub class_count: usize,
    pub coarse: Option<Vec<u8>>,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `[C, H, W]` of a single image.
    pub fn image_shape(&self) -> [usize; 3] {
        let s = self.images.shape();
        [s[1], s[2], s[3]]
    }

    /// Copies the rows at `indices` into a batch tensor plus labels.
    pub fn gather(&self, indices: &[usize]) -> (Tensor, Vec<usize>) {
        let [c, h, w] = self.image_shape();
        let row = c * h * w;
        let mut data = Vec::with_capacity(indices.len() * row);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend_from_slice(&self.images.data()[i * row..(i + 1) * row]);
            labels.push(self.labels[i]);
        }
        (
            Tensor::from_vec(&[indices.len(), c, h, w], data).expect("shape"),
            labels,
        )
    }

    fn select(&self, indices: &[usize]) -> LabeledDataset {
        let (images, labels) = self.gather(indices);
        LabeledDataset {
            images,
            labels,
            class_count: self.class_count,
            coarse: self
                .coarse
                .as_ref()
                .map(|c| indices.iter().map(|&i| c[i]).collect()),
        }
    }

    pub fn per_class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.class_count];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, DataError> {
    fs::read(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses one CIFAR binary file. CIFAR-10 records are 3073 bytes (label,
/// then 3072 pixels channel-major R,G,B, each 32x32 row-major); CIFAR-100
/// records are 3074 bytes (coarse label, fine label, pixels). Pixels are
/// scaled by 1/255.
pub fn load_cifar_file(path: &Path, variant: CifarVariant) -> Result<LabeledDataset, DataError> {
    let bytes = read_file(path)?;
    let record = variant.record_len();
    if bytes.len() % record != 0 {
        return Err(DataError::Truncated {
            path: path.to_path_buf(),
            len: bytes.len() as u64,
            record,
        });
    }
    let n = bytes.len() / record;
    let classes = variant.class_count();
    let mut labels = Vec::with_capacity(n);
    let mut coarse = Vec::new();
    let mut data = Vec::with_capacity(n * 3072);
    for i in 0..n {
        let rec = &bytes[i * record..(i + 1) * record];
        let (label, pixels) = match variant {
            CifarVariant::Cifar10 => (rec[0], &rec[1..]),
            CifarVariant::Cifar100 => {
                coarse.push(rec[0]);
                (rec[1], &rec[2..])
            }
        };
        if (label as usize) >= classes {
            return Err(DataError::LabelOutOfRange {
                path: path.to_path_buf(),
                index: i,
                label,
                classes,
            });
        }
        labels.push(label as usize);
        data.extend(pixels.iter().map(|&b| b as f64 / 255.0));
    }
    Ok(LabeledDataset {
        images: Tensor::from_vec(&[n, 3, 32, 32], data).expect("record arithmetic"),
        labels,
        class_count: classes,
        coarse: match variant {
            CifarVariant::Cifar10 => None,
            CifarVariant::Cifar100 => Some(coarse),
        },
    })
}

/// Serializes back to the binary record layout; the inverse of
/// [`load_cifar_file`] down to the byte.
pub fn save_cifar_file(
    ds: &LabeledDataset,
    path: &Path,
    variant: CifarVariant,
) -> Result<(), DataError> {
    let mut out = Vec::with_capacity(ds.len() * variant.record_len());
    let row = 3072;
    for i in 0..ds.len() {
        if let CifarVariant::Cifar100 = variant {
            out.push(ds.coarse.as_ref().map_or(0, |c| c[i]));
        }
        out.push(ds.labels[i] as u8);
        for &v in &ds.images.data()[i * row..(i + 1) * row] {
            out.push((v * 255.0).round() as u8);
        }
    }
    fs::write(path, out).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads and concatenates the standard train or test files of a CIFAR
/// directory.
pub fn load_cifar_dir(
    dir: &Path,
    variant: CifarVariant,
    train: bool,
) -> Result<LabeledDataset, DataError> {
    let names = if train {
        variant.train_files()
    } else {
        variant.test_files()
    };
    let mut parts = Vec::new();
    for name in names {
        parts.push(load_cifar_file(&dir.join(name), variant)?);
    }
    let mut labels = Vec::new();
    let mut data = Vec::new();
    let mut coarse = Vec::new();
    for p in &parts {
        labels.extend_from_slice(&p.labels);
        data.extend_from_slice(p.images.data());
        if let Some(c) = &p.coarse {
            coarse.extend_from_slice(c);
        }
    }
    let n = labels.len();
    Ok(LabeledDataset {
        images: Tensor::from_vec(&[n, 3, 32, 32], data).expect("shape"),
        labels,
        class_count: variant.class_count(),
        coarse: if coarse.is_empty() { None } else { Some(coarse) },
    })
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub files: Vec<FileReport>,
    pub per_class: Vec<usize>,
    pub total: usize,
}

#[derive(Debug, Serialize)]
pub struct FileReport {
    pub name: String,
    pub records: usize,
}

/// Checks file sizes and label ranges of a CIFAR directory and reports the
/// label histogram over all files.
pub fn verify_cifar_dir(dir: &Path, variant: CifarVariant) -> Result<VerifyReport, DataError> {
    let mut files = Vec::new();
    let mut per_class = vec![0usize; variant.class_count()];
    let mut total = 0;
    let names: Vec<&str> = variant
        .train_files()
        .into_iter()
        .chain(variant.test_files())
        .collect();
    for name in names {
        let ds = load_cifar_file(&dir.join(name), variant)?;
        files.push(FileReport {
            name: name.to_string(),
            records: ds.len(),
        });
        for &l in &ds.labels {
            per_class[l] += 1;
        }
        total += ds.len();
    }
    Ok(VerifyReport {
        files,
        per_class,
        total,
    })
}

/// Equal-sized per-class sample without replacement: every class keeps
/// `floor(fraction * its count)` items, selection and final order are
/// shuffled under the seed.
pub fn balanced_subset(
    ds: &LabeledDataset,
    fraction: f64,
    seed: u64,
) -> Result<LabeledDataset, DataError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(DataError::BadFraction(fraction));
    }
    let mut rng = Rng::from_seed(seed);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ds.class_count];
    for (i, &l) in ds.labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut chosen = Vec::new();
    for indices in &mut by_class {
        let keep = (fraction * indices.len() as f64).floor() as usize;
        if keep == 0 {
            return Err(DataError::EmptyClass(fraction));
        }
        rng.shuffle(indices);
        chosen.extend_from_slice(&indices[..keep]);
    }
    rng.shuffle(&mut chosen);
    Ok(ds.select(&chosen))
}

/// Noise parameters: corrupt exactly `round(fraction * n)` labels.
#[derive(Debug, Clone, Copy)]
pub struct NoiseSpec {
    pub fraction: f64,
    pub seed: u64,
}

/// Returns a copy with exactly `round(fraction * n)` labels replaced, each
/// by a uniformly random *different* class. Images are untouched.
pub fn inject_label_noise(
    ds: &LabeledDataset,
    spec: NoiseSpec,
) -> Result<LabeledDataset, DataError> {
    if !(0.0..=1.0).contains(&spec.fraction) {
        return Err(DataError::BadNoise(spec.fraction));
    }
    if ds.class_count < 2 {
        return Err(DataError::TooFewClasses);
    }
    let mut out = ds.clone();
    let count = (spec.fraction * ds.len() as f64).round() as usize;
    let mut rng = Rng::from_seed(spec.seed);
    let mut order: Vec<usize> = (0..ds.len()).collect();
    rng.shuffle(&mut order);
    for &i in order.iter().take(count) {
        let old = out.labels[i];
        let r = rng.below(ds.class_count as u64 - 1) as usize;
        out.labels[i] = if r >= old { r + 1 } else { r };
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeSide {
    Left,
    Right,
}

/// All 16 binary 4-pixel strips as `[16, 1, 1, 4]` images. Pixel `t` of item
/// `i` is bit `3 - t` of `i` (so item index reads as the pixel string in
/// binary). Label 1 iff some adjacent pair is (1,0) for `Left` or (0,1) for
/// `Right` - a black-to-white or white-to-black transition anywhere in the
/// strip.
pub fn edge_dataset(side: EdgeSide) -> LabeledDataset {
    let mut data = Vec::with_capacity(64);
    let mut labels = Vec::with_capacity(16);
    for i in 0..16u32 {
        let bits: Vec<f64> = (0..4).map(|t| ((i >> (3 - t)) & 1) as f64).collect();
        let hit = bits.windows(2).any(|p| match side {
            EdgeSide::Left => p[0] == 1.0 && p[1] == 0.0,
            EdgeSide::Right => p[0] == 0.0 && p[1] == 1.0,
        });
        labels.push(hit as usize);
        data.extend_from_slice(&bits);
    }
    LabeledDataset {
        images: Tensor::from_vec(&[16, 1, 1, 4], data).expect("shape"),
        labels,
        class_count: 2,
        coarse: None,
    }
}

/// Paired `(x, y)` samples for 1D regression.
#[derive(Debug, Clone)]
pub struct RegressionDataset {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl RegressionDataset {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegFn {
    Sin,
    Square,
}

impl RegFn {
    pub fn parse(name: &str) -> Result<Self, DataError> {
        match name {
            "sin" => Ok(RegFn::Sin),
            "square" => Ok(RegFn::Square),
            other => Err(DataError::UnknownFunction(other.to_string())),
        }
    }

    pub fn eval(self, x: f64) -> f64 {
        match self {
            RegFn::Sin => x.sin(),
            RegFn::Square => x * x,
        }
    }
}

/// `n` samples with `x` uniform on the domain and
/// `y = f(x) + noise_sd * N(0,1)`. The noise draw happens even when
/// `noise_sd = 0`, so changing the noise level never shifts the x sequence.
pub fn synth_regression(
    f: RegFn,
    n: usize,
    domain: (f64, f64),
    noise_sd: f64,
    seed: u64,
) -> RegressionDataset {
    let mut rng = Rng::from_seed(seed);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let xi = rng.uniform_in(domain.0, domain.1);
        let yi = f.eval(xi) + noise_sd * rng.normal();
        x.push(xi);
        y.push(yi);
    }
    RegressionDataset { x, y }
}

/// Deterministic image-classification stand-in for machines without CIFAR
/// files: each class gets a random byte template, each sample is the
/// template plus Gaussian pixel noise, re-quantized to bytes so the
/// byte/255 value contract holds exactly. Classes are interleaved, so any
/// prefix is nearly balanced.
pub fn synthetic_image_classes(
    classes: usize,
    n: usize,
    shape: [usize; 3],
    noise_sd: f64,
    seed: u64,
    split: &str,
) -> LabeledDataset {
    let [c, h, w] = shape;
    let pixels = c * h * w;
    let mut trng = Rng::derive(seed, &["synthetic", "templates"]);
    let templates: Vec<Vec<f64>> = (0..classes)
        .map(|_| (0..pixels).map(|_| trng.below(256) as f64).collect())
        .collect();
    let mut srng = Rng::derive(seed, &["synthetic", "samples", split]);
    let mut data = Vec::with_capacity(n * pixels);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % classes;
        labels.push(class);
        for p in 0..pixels {
            let raw = templates[class][p] + srng.normal() * noise_sd * 255.0;
            let byte = raw.round().clamp(0.0, 255.0) as u8;
            data.push(byte as f64 / 255.0);
        }
    }
    LabeledDataset {
        images: Tensor::from_vec(&[n, c, h, w], data).expect("shape"),
        labels,
        class_count: classes,
        coarse: None,
    }
}
