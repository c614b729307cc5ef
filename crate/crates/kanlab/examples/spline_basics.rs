//! B-spline basis fundamentals: evaluating the basis, checking its
//! partition-of-unity and local-support properties, and reproducing
//! polynomials exactly.
//!
//! Run with: cargo run --example spline_basics

use kanlab::{Basis, BasisSpec};

fn main() {
    // A cubic basis with 5 interior intervals on [-1, 1]: 8 basis functions.
    let spec = BasisSpec {
        grid_size: 5,
        order: 3,
        x_min: -1.0,
        x_max: 1.0,
    };
    let basis = Basis::new(spec);
    println!("basis functions: {}", basis.n_basis());

    // At any point only order+1 = 4 basis functions are non-zero, and they
    // sum to exactly 1.
    let x = 0.37;
    let (span, vals) = basis.eval(x);
    println!("x = {x}: span = {span}, local values = {vals:?}");
    println!("sum of local values = {:.15}", vals.iter().sum::<f64>());

    // The dense view places those values among zeros.
    let dense = basis.eval_all(x);
    let nonzero = dense.iter().filter(|v| **v != 0.0).count();
    println!("non-zero entries in dense basis vector: {nonzero}");

    // Affine reproduction: coefficients at the Greville abscissae make the
    // spline reproduce f(x) = x exactly.
    let greville = basis.greville();
    let mut worst: f64 = 0.0;
    for i in 0..=100 {
        let x = -1.0 + 2.0 * i as f64 / 100.0;
        let s = basis.spline_value(&greville, x);
        worst = worst.max((s - x).abs());
    }
    println!("max |S(x) - x| with Greville coefficients = {worst:.3e}");

    // Derivatives come from the same recurrence; compare against a central
    // finite difference for a smooth coefficient vector.
    let coeffs: Vec<f64> = greville.iter().map(|g| g.sin()).collect();
    let x = 0.2;
    let h = 1e-6;
    let fd = (basis.spline_value(&coeffs, x + h) - basis.spline_value(&coeffs, x - h)) / (2.0 * h);
    let (_, exact) = basis.spline_value_d1(&coeffs, x);
    println!("S'(0.2): analytic = {exact:.8}, finite difference = {fd:.8}");
}
