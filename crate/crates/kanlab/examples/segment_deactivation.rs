//! Segment deactivation is a training-time regularizer: with probability p
//! per edge and step, the spline term is replaced by the straight line
//! through its endpoint values (its chord). The SiLU path is never
//! deactivated, and inference never deactivates anything.
//!
//! Run with: cargo run --example segment_deactivation

use kanlab::kan::{KanLayer, MaskMode};
use kanlab::{BasisSpec, Rng, Tensor};

fn max_abs_diff(a: &Tensor, b: &Tensor) -> f64 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn main() {
    let spec = BasisSpec {
        grid_size: 5,
        order: 3,
        x_min: -1.0,
        x_max: 1.0,
    };
    let mut rng = Rng::from_seed(11);
    let layer = KanLayer::new(3, 2, spec, 0.5, &mut rng);
    let x = Tensor::from_vec(
        &[4, 3],
        vec![
            -0.9, 0.1, 0.8, 0.3, -0.4, 0.6, 0.0, 0.9, -0.7, 0.5, -0.2, -0.5,
        ],
    )
    .unwrap();

    // With every mask forced off, training forward equals inference.
    let (none, _) = layer.forward_train(&x, MaskMode::ForceNone, None);
    let infer = layer.forward_infer(&x);
    println!(
        "max |forward(no masks) - forward(inference)| = {:.1e}",
        max_abs_diff(&none, &infer)
    );

    // With every mask forced on, each spline collapses to its chord.
    let (all, _) = layer.forward_train(&x, MaskMode::ForceAll, None);
    println!(
        "max |forward(all masked) - forward(inference)| = {:.3}",
        max_abs_diff(&all, &infer)
    );

    // Sampling sits between the two extremes; each edge flips its own coin,
    // so repeated draws differ.
    let mut mask_rng = Rng::derive(0, &["demo", "mask"]);
    let (s1, _) = layer.forward_train(&x, MaskMode::Sample, Some(&mut mask_rng));
    let (s2, _) = layer.forward_train(&x, MaskMode::Sample, Some(&mut mask_rng));
    println!(
        "two sampled forwards differ by {:.3} (p = 0.5)",
        max_abs_diff(&s1, &s2)
    );
    println!(
        "mask randomness consumed: {} draws (6 edges x 2 forwards)",
        mask_rng.draw_count()
    );

    // An affine spline equals its own chord, so deactivation cannot change
    // it: replace the coefficients with a straight line and compare again.
    let mut affine = KanLayer::new(1, 1, spec, 1.0, &mut rng);
    let greville = affine.basis.greville();
    for (i, g) in greville.iter().enumerate() {
        affine.c.value.data_mut()[i] = 0.7 * g - 0.2;
    }
    let (chord, _) = affine.forward_train(&x.reshape(&[12, 1]).unwrap(), MaskMode::ForceAll, None);
    let plain = affine.forward_infer(&x.reshape(&[12, 1]).unwrap());
    println!(
        "affine spline: |masked - unmasked| = {:.1e} (chords are fixed points)",
        max_abs_diff(&chord, &plain)
    );
}
