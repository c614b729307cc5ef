//! The curvature penalty is a quadratic form c'Mc where M integrates
//! products of second derivatives of the basis functions. This example
//! checks M against known curvature energies and shows how the penalty
//! separates wiggly fits from smooth ones.
//!
//! Run with: cargo run --example smoothness_penalty

use kanlab::{Basis, BasisSpec};

fn energy(basis: &Basis, c: &[f64]) -> f64 {
    let m = basis.smoothness_gram();
    let n = basis.n_basis();
    let mut e = 0.0;
    for i in 0..n {
        for j in 0..n {
            e += c[i] * m[i * n + j] * c[j];
        }
    }
    e
}

fn main() {
    let basis = Basis::new(BasisSpec {
        grid_size: 5,
        order: 3,
        x_min: -1.0,
        x_max: 1.0,
    });

    // f(x) = x is affine, so its curvature energy must vanish.
    let line = basis.greville();
    println!("energy of f(x) = x        : {:.3e}", energy(&basis, &line));

    // f(x) = x^2 has f'' = 2 everywhere, so the energy over [-1, 1] is
    // ∫ 4 dx = 8. The quadratic is reproduced exactly by a cubic spline.
    let k = 3.0;
    // Second-order Marsden coefficients: averages of knot products.
    let sq: Vec<f64> = {
        let spec = basis.spec();
        let width = (spec.x_max - spec.x_min) / spec.grid_size as f64;
        let knot = |j: i64| spec.x_min + (j - spec.order as i64) as f64 * width;
        (0..basis.n_basis() as i64)
            .map(|i| {
                let mut s = 0.0;
                for a in 1..=3i64 {
                    for b in (a + 1)..=3i64 {
                        s += knot(i + a) * knot(i + b);
                    }
                }
                s / (k * (k - 1.0) / 2.0)
            })
            .collect()
    };
    println!("energy of f(x) = x^2      : {:.12}", energy(&basis, &sq));

    // A sawtooth coefficient pattern produces a wiggly spline with much
    // higher energy than any smooth fit of comparable scale.
    let saw: Vec<f64> = (0..basis.n_basis())
        .map(|i| if i % 2 == 0 { 0.5 } else { -0.5 })
        .collect();
    println!("energy of sawtooth coeffs : {:.3}", energy(&basis, &saw));
}
