//! Shared oracles for the integration tests: independent, brute-force
//! implementations that the library's fast paths are checked against.

use kanlab::Basis;

/// Midpoint-rule integral of f over [lo, hi] with `n` panels. With 1e5
/// panels the error for piecewise-polynomial integrands is far below 1e-6.
pub fn integrate(lo: f64, hi: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = (hi - lo) / n as f64;
    (0..n).map(|i| f(lo + (i as f64 + 0.5) * h)).sum::<f64>() * h
}

/// Second derivative of basis function `j` at `x`, read off the exact
/// derivative stack (zero outside the function's support).
pub fn basis_second_deriv(basis: &Basis, j: usize, x: f64) -> f64 {
    let (first, _, _, d2) = basis.eval_derivs(x);
    if j < first || j >= first + d2.len() {
        return 0.0;
    }
    d2[j - first]
}

/// Brute-force curvature Gram entry: ∫ B_i'' B_j'' over the domain.
pub fn gram_entry_by_quadrature(basis: &Basis, i: usize, j: usize, panels: usize) -> f64 {
    let spec = basis.spec();
    integrate(spec.x_min, spec.x_max, panels, |x| {
        basis_second_deriv(basis, i, x) * basis_second_deriv(basis, j, x)
    })
}

/// Decides whether binary patterns with the given labels can be separated
/// by a homogeneous linear rule `sign(v . x)` with the tie (v . x = 0)
/// going to class 0, by enumerating every integer weight vector in
/// {-bound..bound}^4. For 16 constraints with 0/1 coefficients an integer
/// separator of small magnitude exists whenever any separator does.
pub fn homogeneous_linear_separable(items: &[[f64; 4]], labels: &[usize], bound: i64) -> bool {
    let r = -bound..=bound;
    for a in r.clone() {
        for b in r.clone() {
            for c in r.clone() {
                for d in r.clone() {
                    let v = [a as f64, b as f64, c as f64, d as f64];
                    let ok = items.iter().zip(labels).all(|(x, &y)| {
                        let s: f64 = x.iter().zip(&v).map(|(xi, vi)| xi * vi).sum();
                        if y == 1 {
                            s > 0.0
                        } else {
                            s <= 0.0
                        }
                    });
                    if ok {
                        return true;
                    }
                }
            }
        }
    }
    false
}
