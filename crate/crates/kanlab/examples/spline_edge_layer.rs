//! A spline-edge layer carries one learnable univariate function per
//! input-output pair: a SiLU base path plus a B-spline, mixed by two
//! scalar weights. This example trains a single 1-to-1 edge to fit
//! sin(x) from noiseless samples.
//!
//! Run with: cargo run --example spline_edge_layer

use kanlab::kan::{KanLayer, MaskMode};
use kanlab::nn::Adam;
use kanlab::{BasisSpec, Rng, Tensor};

fn main() {
    let spec = BasisSpec {
        grid_size: 12,
        order: 3,
        x_min: -3.0,
        x_max: 3.0,
    };
    let mut rng = Rng::from_seed(7);
    let mut layer = KanLayer::new(1, 1, spec, 0.0, &mut rng);
    println!(
        "edge functions: {} x {}, {} spline coefficients each, {} parameters total",
        1,
        1,
        layer.n_basis(),
        layer.param_count()
    );

    // Training data: 64 points of y = sin(x) on the spline's domain.
    let n = 64;
    let xs: Vec<f64> = (0..n).map(|i| -3.0 + 6.0 * i as f64 / (n - 1) as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
    let x = Tensor::from_vec(&[n, 1], xs.clone()).unwrap();

    let mut adam = Adam::new(0.02);
    for step in 0..=400 {
        let (pred, cache) = layer.forward_train(&x, MaskMode::ForceNone, None);
        let mut mse = 0.0;
        let mut dy = vec![0.0; n];
        for i in 0..n {
            let d = pred.data()[i] - ys[i];
            mse += d * d / n as f64;
            dy[i] = 2.0 * d / n as f64;
        }
        if step % 100 == 0 {
            println!("step {step:4}: mse = {mse:.6}");
        }
        layer.c.zero_grad();
        layer.w_b.zero_grad();
        layer.w_s.zero_grad();
        layer.backward(&cache, &Tensor::from_vec(&[n, 1], dy).unwrap());
        adam.step(&mut [
            ("c".to_string(), &mut layer.c),
            ("w_b".to_string(), &mut layer.w_b),
            ("w_s".to_string(), &mut layer.w_s),
        ]);
    }

    // Inference mode uses the same deterministic forward as p = 0 training.
    let probe = Tensor::from_vec(&[5, 1], vec![-2.5, -1.0, 0.0, 1.0, 2.5]).unwrap();
    let out = layer.forward_infer(&probe);
    println!("\n     x      learned   sin(x)");
    for i in 0..5 {
        let xv = probe.data()[i];
        println!("{:6.2}   {:8.4}   {:8.4}", xv, out.data()[i], xv.sin());
    }
    println!(
        "\ncurvature energy of the learned edge: {:.4}",
        layer.smoothness_value()
    );
}
