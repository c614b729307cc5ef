//! Networks of summed univariate functions can represent multivariate
//! ones. This builds the classic two-stage shape — an inner layer of
//! width 2d+1 spline edges and a single outer edge — and fits
//! f(x, y) = sin(pi x) * cos(pi y) by gradient descent.
//!
//! Run with: cargo run --example function_superposition

use kanlab::kan::MaskMode;
use kanlab::model::{build_model, Arch, ModelSpec};
use kanlab::nn::{mse_loss, Adam};
use kanlab::{Rng, Tensor};

fn target(x: f64, y: f64) -> f64 {
    (std::f64::consts::PI * x).sin() * (std::f64::consts::PI * y).cos()
}

fn main() {
    // d = 2 inputs -> hidden width 2d+1 = 5 -> 1 output.
    let spec = ModelSpec::new(Arch::KaTheorem);
    let mut model = build_model(&spec, &[2], 1, 42).expect("build");
    println!("layers: {:?}", model.layer_names());
    println!("trainable parameters: {}", model.param_count());

    // 256 quasi-random training points in [-0.9, 0.9]^2.
    let mut rng = Rng::from_seed(5);
    let n = 256;
    let mut xs = Vec::with_capacity(2 * n);
    let mut ts = Vec::with_capacity(n);
    for _ in 0..n {
        let a = rng.uniform_in(-0.9, 0.9);
        let b = rng.uniform_in(-0.9, 0.9);
        xs.extend_from_slice(&[a, b]);
        ts.push(target(a, b));
    }
    let x = Tensor::from_vec(&[n, 2], xs).unwrap();

    let mut adam = Adam::new(0.01);
    for step in 0..=600 {
        let (pred, caches) = model.forward_train(&x, MaskMode::ForceNone);
        let (loss, dy) = mse_loss(&pred, &ts);
        if step % 150 == 0 {
            println!("step {step:4}: mse = {loss:.5}");
        }
        model.zero_grads();
        model.backward(&caches, &dy);
        let mut params = model.params_mut();
        adam.step(&mut params);
    }

    // Probe a few points the model never saw.
    println!("\n    x      y     learned   target");
    for (a, b) in [(-0.5, 0.2), (0.1, -0.7), (0.6, 0.6), (0.0, 0.0)] {
        let p = model
            .forward_infer(&Tensor::from_vec(&[1, 2], vec![a, b]).unwrap());
        println!("{a:6.2} {b:6.2}  {:8.4}  {:8.4}", p.data()[0], target(a, b));
    }
}
