//! End-to-end image classification on the synthetic template dataset:
//! build a conv front-end with a spline-edge head, train for a few
//! epochs, then round-trip the model through a checkpoint file.
//!
//! Run with: cargo run --example train_image_classifier

use kanlab::experiments::{train, DataConfig, TaskData, TrainConfig};
use kanlab::model::{
    load_checkpoint, save_checkpoint, Arch, CheckpointMeta, ModelSpec,
};

fn main() {
    // A small instance of the synthetic set: 10 template classes of 3x8x8
    // images with heavy pixel noise.
    let mut data = DataConfig::default();
    data.synth_train = 600;
    data.synth_test = 200;
    let (train_ds, test_ds) = data.load_image_splits().expect("synthetic data");
    println!(
        "train {} images, test {} images, {} classes, shape {:?}",
        train_ds.len(),
        test_ds.len(),
        train_ds.class_count,
        train_ds.image_shape()
    );

    let spec = ModelSpec::new(Arch::CnnKan);
    let mut cfg = TrainConfig::default();
    cfg.epochs = 5;
    cfg.seed = 1;
    cfg.eval_every = 1;

    let input_shape = train_ds.image_shape().to_vec();
    let out_dim = train_ds.class_count;
    let task = TaskData::Classify {
        train: train_ds,
        test: test_ds,
    };
    let out = train(&spec, &task, &cfg).expect("training runs");
    println!("\nepoch  train_acc  test_acc   total_loss");
    for ev in &out.evals {
        println!(
            "{:5}  {:9.3}  {:8.3}   {:.4}",
            ev.epoch, ev.train.metric, ev.test.metric, ev.train.total
        );
    }

    // Checkpoints store every named parameter tensor plus a JSON sidecar
    // describing how to rebuild the model.
    let dir = std::env::temp_dir().join("kanlab_example_ckpt");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("model.ckpt");
    let meta = CheckpointMeta {
        model: spec.clone(),
        input_shape,
        out_dim,
        seed: cfg.seed,
        basis: spec.basis_spec(),
    };
    save_checkpoint(&out.model, &meta, &path).expect("save");
    let (restored, _) = load_checkpoint(&path).expect("load");

    let (x, _) = match &task {
        TaskData::Classify { test, .. } => test.gather(&(0..32).collect::<Vec<_>>()),
        _ => unreachable!(),
    };
    let a = out.model.forward_infer(&x);
    let b = restored.forward_infer(&x);
    let diff = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max);
    println!("\ncheckpoint round-trip: max logit difference = {diff:.1e}");
    println!("checkpoint at {}", path.display());
}
