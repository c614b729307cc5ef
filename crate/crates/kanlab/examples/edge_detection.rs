//! The 16-point edge task: every 4-pixel binary strip, labeled by whether
//! it contains a left edge (a 1 followed by a 0). A small spline-edge
//! network separates the patterns perfectly; a bias-free linear readout
//! cannot, because the labeling is not affinely separable.
//!
//! Run with: cargo run --example edge_detection

use kanlab::data::{edge_dataset, EdgeSide};
use kanlab::experiments::{train, TaskData, TrainConfig};
use kanlab::model::{Arch, ModelSpec};

fn run(arch: Arch, side: EdgeSide) -> f64 {
    let ds = edge_dataset(side);
    let task = TaskData::Classify {
        train: ds.clone(),
        test: ds,
    };
    let mut cfg = TrainConfig::default();
    cfg.epochs = 500;
    cfg.batch_size = 16; // full batch: all 16 strips every step
    cfg.lr = 0.02;
    cfg.eval_every = 500;
    cfg.seed = 1;
    let out = train(&ModelSpec::new(arch), &task, &cfg).expect("training runs");
    out.evals.last().unwrap().train.metric
}

fn main() {
    // Show the dataset once: strips are the binary expansions of 0..16.
    let ds = edge_dataset(EdgeSide::Left);
    println!("item  pixels        label");
    for i in 0..16 {
        let px: Vec<u8> = (0..4)
            .map(|t| ds.images.data()[i * 4 + t] as u8)
            .collect();
        println!("{i:4}  {px:?}  {}", ds.labels[i]);
    }

    println!("\nfinal train accuracy after 500 full-batch epochs:");
    for side in [EdgeSide::Left, EdgeSide::Right] {
        let kan = run(Arch::EdgeKan, side);
        let lin = run(Arch::EdgeLinear, side);
        println!("{side:?} edges: spline net {kan:.3}, bias-free linear {lin:.3}");
    }
    println!("\nThe linear model tops out at 13/16 = 0.8125 on both labelings.");
}
