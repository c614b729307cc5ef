//! Uniform B-spline bases on a bounded interval.
//!
//! A [`Basis`] is defined by a polynomial order `k`, a grid of `G` equal
//! intervals over `[x_min, x_max]`, and the uniformly extended knot vector
//! with `k` extra knots beyond each end (so `G + 2k + 1` knots total,
//! `G + k` basis functions). Inputs are clamped to the interval before
//! evaluation; on the interval the basis is a partition of unity.
//!
//! Evaluation is span-local Cox-de Boor: only the `k + 1` functions that are
//! nonzero at `x` are computed. First and second derivatives come from the
//! standard order-lowering recurrence. The second-derivative inner-product
//! matrix (the quadratic form behind the curvature penalty) is assembled with
//! per-interval Gauss-Legendre quadrature of sufficient degree, so it is
//! exact for polynomials up to machine precision.

use serde::{Deserialize, Serialize};

/// Parameters defining a basis: `grid_size` intervals, polynomial `order`,
/// and the closed domain `[x_min, x_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub grid_size: usize,
    pub order: usize,
    pub x_min: f64,
    pub x_max: f64,
}

impl Default for BasisSpec {
    fn default() -> Self {
        BasisSpec {
            grid_size: 5,
            order: 3,
            x_min: -1.0,
            x_max: 1.0,
        }
    }
}

impl BasisSpec {
    pub fn n_basis(&self) -> usize {
        self.grid_size + self.order
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.grid_size == 0 {
            return Err("grid_size must be at least 1".into());
        }
        if !(self.x_min.is_finite() && self.x_max.is_finite() && self.x_min < self.x_max) {
            return Err(format!(
                "domain [{}, {}] must be a finite nonempty interval",
                self.x_min, self.x_max
            ));
        }
        Ok(())
    }
}

/// A concrete basis: a [`BasisSpec`] plus its expanded knot vector.
#[derive(Debug, Clone)]
pub struct Basis {
    spec: BasisSpec,
    knots: Vec<f64>,
}

impl Basis {
    pub fn new(spec: BasisSpec) -> Self {
        let (g, k) = (spec.grid_size, spec.order);
        let width = spec.x_max - spec.x_min;
        // t_j = x_min + (j - k) * width / G, j = 0 .. G + 2k.
        // Exact at the ends: t_k == x_min, t_{k+G} == x_max.
        let knots = (0..=g + 2 * k)
            .map(|j| spec.x_min + (j as f64 - k as f64) * width / g as f64)
            .collect();
        Basis { spec, knots }
    }

    pub fn spec(&self) -> &BasisSpec {
        &self.spec
    }

    pub fn n_basis(&self) -> usize {
        self.spec.n_basis()
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn x_min(&self) -> f64 {
        self.spec.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.spec.x_max
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.spec.x_min, self.spec.x_max)
    }

    /// Knot span index `s` with `t_s <= x < t_{s+1}` for clamped `x`; the
    /// closed right endpoint maps into the last interior span.
    pub fn span_of(&self, xc: f64) -> usize {
        let g = self.spec.grid_size;
        let h = (self.spec.x_max - self.spec.x_min) / g as f64;
        let cell = (((xc - self.spec.x_min) / h).floor() as isize).clamp(0, g as isize - 1);
        self.spec.order + cell as usize
    }

    /// The `deg + 1` basis functions of order `deg` that are nonzero on span
    /// `s`, i.e. `B_{s-deg} .. B_s`, evaluated at `x`. Requires `deg <= k`.
    fn nonzero(&self, s: usize, x: f64, deg: usize) -> Vec<f64> {
        let t = &self.knots;
        let mut vals = vec![0.0; deg + 1];
        vals[0] = 1.0;
        let mut left = vec![0.0; deg + 1];
        let mut right = vec![0.0; deg + 1];
        for j in 1..=deg {
            left[j] = x - t[s + 1 - j];
            right[j] = t[s + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let tmp = vals[r] / (right[r + 1] + left[j - r]);
                vals[r] = saved + right[r + 1] * tmp;
                saved = left[j - r] * tmp;
            }
            vals[j] = saved;
        }
        vals
    }

    /// Nonzero basis values at `x` (clamped). Returns `(first, values)` where
    /// `values[r]` is basis function `first + r` and `first = span - k`.
    pub fn eval(&self, x: f64) -> (usize, Vec<f64>) {
        let xc = self.clamp(x);
        let s = self.span_of(xc);
        (s - self.spec.order, self.nonzero(s, xc, self.spec.order))
    }

    /// Nonzero basis values plus first and second derivatives at `x`
    /// (clamped). Derivatives are one-sided at the domain endpoints.
    pub fn eval_derivs(&self, x: f64) -> (usize, Vec<f64>, Vec<f64>, Vec<f64>) {
        let xc = self.clamp(x);
        let s = self.span_of(xc);
        let k = self.spec.order;
        let vals = self.nonzero(s, xc, k);
        let (d1, d2) = self.derivs_at_span(s, xc);
        (s - k, vals, d1, d2)
    }

    /// First and second derivatives of the `k + 1` nonzero order-`k` basis
    /// functions on span `s`, via the order-lowering recurrence
    /// `B'_{i,k} = k (B_{i,k-1}/(t_{i+k}-t_i) - B_{i+1,k-1}/(t_{i+k+1}-t_{i+1}))`.
    fn derivs_at_span(&self, s: usize, xc: f64) -> (Vec<f64>, Vec<f64>) {
        let k = self.spec.order;
        let t = &self.knots;
        let kf = k as f64;
        let safe = |num: f64, den: f64| if den != 0.0 { num / den } else { 0.0 };

        if k == 0 {
            return (vec![0.0], vec![0.0]);
        }

        // Order k-1 nonzero values: B_{s-k+1 .. s, k-1}; index i maps to slot
        // i - (s-k+1), zero outside.
        let lower = self.nonzero(s, xc, k - 1);
        let lo_first = s + 1 - k;
        let low = |i: usize| {
            if (lo_first..=s).contains(&i) {
                lower[i - lo_first]
            } else {
                0.0
            }
        };

        let first = s - k;
        let mut d1 = vec![0.0; k + 1];
        for r in 0..=k {
            let i = first + r;
            d1[r] = kf * (safe(low(i), t[i + k] - t[i]) - safe(low(i + 1), t[i + k + 1] - t[i + 1]));
        }

        let mut d2 = vec![0.0; k + 1];
        if k >= 2 {
            // First derivatives of the order-(k-1) functions, from order k-2.
            let lower2 = self.nonzero(s, xc, k - 2);
            let lo2_first = s + 2 - k;
            let low2 = |i: usize| {
                if (lo2_first..=s).contains(&i) {
                    lower2[i - lo2_first]
                } else {
                    0.0
                }
            };
            let km1 = (k - 1) as f64;
            let d1_lower = |i: usize| {
                if (lo_first..=s).contains(&i) {
                    km1 * (safe(low2(i), t[i + k - 1] - t[i])
                        - safe(low2(i + 1), t[i + k] - t[i + 1]))
                } else {
                    0.0
                }
            };
            for r in 0..=k {
                let i = first + r;
                d2[r] = kf
                    * (safe(d1_lower(i), t[i + k] - t[i])
                        - safe(d1_lower(i + 1), t[i + k + 1] - t[i + 1]));
            }
        }
        (d1, d2)
    }

    /// Dense length-`n_basis` vector of all basis values at `x`. Convenience
    /// for tests and for precomputing endpoint rows; hot paths use [`eval`].
    ///
    /// [`eval`]: Basis::eval
    pub fn eval_all(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.n_basis()];
        let (first, vals) = self.eval(x);
        out[first..first + vals.len()].copy_from_slice(&vals);
        out
    }

    /// Spline value `sum_i c[i] B_i(x)` at clamped `x`.
    pub fn spline_value(&self, c: &[f64], x: f64) -> f64 {
        debug_assert_eq!(c.len(), self.n_basis());
        let (first, vals) = self.eval(x);
        vals.iter()
            .enumerate()
            .map(|(r, &v)| c[first + r] * v)
            .sum()
    }

    /// Spline value and first derivative at clamped `x`.
    pub fn spline_value_d1(&self, c: &[f64], x: f64) -> (f64, f64) {
        debug_assert_eq!(c.len(), self.n_basis());
        let (first, vals, d1, _) = self.eval_derivs(x);
        let mut s = 0.0;
        let mut sd = 0.0;
        for r in 0..vals.len() {
            s += c[first + r] * vals[r];
            sd += c[first + r] * d1[r];
        }
        (s, sd)
    }

    /// Greville abscissae: the coefficient values that reproduce `f(x) = x`
    /// exactly. For order 0 the convention here is interval midpoints.
    pub fn greville(&self) -> Vec<f64> {
        let k = self.spec.order;
        (0..self.n_basis())
            .map(|i| {
                if k == 0 {
                    (self.knots[i] + self.knots[i + 1]) / 2.0
                } else {
                    self.knots[i + 1..=i + k].iter().sum::<f64>() / k as f64
                }
            })
            .collect()
    }

    /// Weight vectors `(wa, wb)` such that the straight line through the
    /// spline's endpoint values has slope `a = wa . c` and intercept
    /// `b = wb . c`. Precomputing these makes the deactivated-segment path
    /// linear in the coefficients, with trivial gradients.
    pub fn chord_weights(&self) -> (Vec<f64>, Vec<f64>) {
        let bmin = self.eval_all(self.spec.x_min);
        let bmax = self.eval_all(self.spec.x_max);
        let width = self.spec.x_max - self.spec.x_min;
        let wa: Vec<f64> = bmin
            .iter()
            .zip(&bmax)
            .map(|(&lo, &hi)| (hi - lo) / width)
            .collect();
        let wb: Vec<f64> = bmin
            .iter()
            .zip(&wa)
            .map(|(&lo, &a)| lo - self.spec.x_min * a)
            .collect();
        (wa, wb)
    }

    /// Matrix `M[i][j] = integral over the domain of B_i''(x) B_j''(x) dx`,
    /// dense row-major `n_basis x n_basis`. The curvature penalty of a spline
    /// with coefficients `c` is then `c^T M c`, with gradient `2 M c`.
    ///
    /// Per knot interval the integrand is a polynomial of degree `2(k-2)`, so
    /// `max(1, k-1)` Gauss-Legendre points integrate it exactly.
    pub fn smoothness_gram(&self) -> Vec<f64> {
        let n = self.n_basis();
        let k = self.spec.order;
        let mut m = vec![0.0; n * n];
        if k < 2 {
            return m; // second derivative vanishes a.e.
        }
        let (nodes, weights) = gauss_legendre(k - 1);
        for cell in 0..self.spec.grid_size {
            let s = k + cell;
            let (a, b) = (self.knots[s], self.knots[s + 1]);
            let half = (b - a) / 2.0;
            let mid = (a + b) / 2.0;
            for (&xi, &w) in nodes.iter().zip(&weights) {
                let x = mid + half * xi;
                let (_, d2) = self.derivs_at_span(s, x);
                let first = s - k;
                for (ri, &di) in d2.iter().enumerate() {
                    if di == 0.0 {
                        continue;
                    }
                    for (rj, &dj) in d2.iter().enumerate() {
                        m[(first + ri) * n + (first + rj)] += w * half * di * dj;
                    }
                }
            }
        }
        m
    }
}

/// Nodes and weights of `n`-point Gauss-Legendre quadrature on `[-1, 1]`,
/// computed to machine precision by Newton iteration on the Legendre roots.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    // P_n(x) and P_n'(x) by the three-term recurrence.
    let eval = |x: f64| -> (f64, f64) {
        let (mut p0, mut p1) = (1.0, x);
        for j in 2..=n {
            let jf = j as f64;
            let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
            p0 = p1;
            p1 = p2;
        }
        let dp = if n == 0 {
            0.0
        } else if x.abs() < 1.0 {
            n as f64 * (x * p1 - p0) / (x * x - 1.0)
        } else {
            // not reached for interior roots; kept total for safety
            f64::INFINITY
        };
        (p1, dp)
    };
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = eval(x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = eval(x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        xs[i] = -x;
        ws[i] = w;
        xs[n - 1 - i] = x;
        ws[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        xs[n / 2] = 0.0;
    }
    (xs, ws)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn default_basis() -> Basis {
        Basis::new(BasisSpec::default())
    }

    #[test]
    fn default_counts_and_knots() {
        let b = default_basis();
        assert_eq!(b.n_basis(), 8);
        assert_eq!(b.knots().len(), 12);
        assert_eq!(b.knots()[3], -1.0);
        assert_eq!(b.knots()[8], 1.0);
        // uniform spacing 0.4
        for w in b.knots().windows(2) {
            assert!((w[1] - w[0] - 0.4).abs() < 1e-15);
        }
    }

    #[test]
    fn partition_of_unity_on_domain() {
        for order in 0..=5 {
            let b = Basis::new(BasisSpec {
                grid_size: 7,
                order,
                x_min: -2.0,
                x_max: 3.0,
            });
            for i in 0..=200 {
                let x = -2.0 + 5.0 * i as f64 / 200.0;
                let all = b.eval_all(x);
                let sum: f64 = all.iter().sum();
                assert!(
                    (sum - 1.0).abs() < 1e-12,
                    "order {order}, x {x}: sum {sum}"
                );
                assert!(all.iter().all(|&v| v >= -1e-14), "negative basis value");
            }
        }
    }

    #[test]
    fn clamps_outside_domain() {
        let b = default_basis();
        let c: Vec<f64> = (0..8).map(|i| i as f64 * 0.3 - 1.0).collect();
        let at_max = b.spline_value(&c, 1.0);
        assert_eq!(b.spline_value(&c, 50.0), at_max);
        let at_min = b.spline_value(&c, -1.0);
        assert_eq!(b.spline_value(&c, -7.0), at_min);
    }

    #[test]
    fn reproduces_constant_affine_quadratic() {
        // Marsden's identity gives the exact coefficients for x and x^2,
        // independently of the evaluation code under test:
        //   x   -> c_i = (t_{i+1} + .. + t_{i+k}) / k (Greville points)
        //   x^2 -> c_i = e_2(t_{i+1}, .., t_{i+k}) / C(k, 2)
        for order in 2..=4 {
            let b = Basis::new(BasisSpec {
                grid_size: 6,
                order,
                x_min: -1.5,
                x_max: 2.0,
            });
            let t = b.knots();
            let k = order;
            let ones = vec![1.0; b.n_basis()];
            let lin = b.greville();
            let quad: Vec<f64> = (0..b.n_basis())
                .map(|i| {
                    let window = &t[i + 1..=i + k];
                    let mut e2 = 0.0;
                    for a in 0..window.len() {
                        for bb in a + 1..window.len() {
                            e2 += window[a] * window[bb];
                        }
                    }
                    e2 / (k * (k - 1) / 2) as f64
                })
                .collect();
            for i in 0..=100 {
                let x = -1.5 + 3.5 * i as f64 / 100.0;
                assert!((b.spline_value(&ones, x) - 1.0).abs() < 1e-12);
                assert!(
                    (b.spline_value(&lin, x) - x).abs() < 1e-12,
                    "order {order}, x {x}"
                );
                assert!(
                    (b.spline_value(&quad, x) - x * x).abs() < 1e-11,
                    "order {order}, x {x}"
                );
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let b = default_basis();
        let mut rng = Rng::from_seed(5);
        let h = 1e-5;
        for _ in 0..50 {
            let x = rng.uniform_in(-0.9, 0.9);
            let (first, _, d1, d2) = b.eval_derivs(x);
            let up = b.eval_all(x + h);
            let dn = b.eval_all(x - h);
            let mid = b.eval_all(x);
            for r in 0..d1.len() {
                let i = first + r;
                let fd1 = (up[i] - dn[i]) / (2.0 * h);
                let fd2 = (up[i] - 2.0 * mid[i] + dn[i]) / (h * h);
                assert!((d1[r] - fd1).abs() < 1e-6, "d1 at x={x}: {} vs {fd1}", d1[r]);
                assert!((d2[r] - fd2).abs() < 1e-4, "d2 at x={x}: {} vs {fd2}", d2[r]);
            }
        }
    }

    #[test]
    fn derivative_rows_sum_to_zero() {
        // Partition of unity differentiates to zero.
        let b = Basis::new(BasisSpec {
            grid_size: 4,
            order: 3,
            x_min: 0.0,
            x_max: 1.0,
        });
        for i in 0..=50 {
            let x = i as f64 / 50.0;
            let (_, _, d1, d2) = b.eval_derivs(x);
            assert!(d1.iter().sum::<f64>().abs() < 1e-10);
            assert!(d2.iter().sum::<f64>().abs() < 1e-9);
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in 1..=6 {
            let (xs, ws) = gauss_legendre(n);
            assert!((ws.iter().sum::<f64>() - 2.0).abs() < 1e-14);
            // exact through degree 2n-1
            for deg in 0..=(2 * n - 1) {
                let approx: f64 = xs
                    .iter()
                    .zip(&ws)
                    .map(|(&x, &w)| w * x.powi(deg as i32))
                    .sum();
                let exact = if deg % 2 == 1 {
                    0.0
                } else {
                    2.0 / (deg as f64 + 1.0)
                };
                assert!(
                    (approx - exact).abs() < 1e-13,
                    "n {n} deg {deg}: {approx} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn quadratic_spline_has_known_curvature_energy() {
        // With coefficients reproducing f(x) = x^2 on [-1, 1], f'' = 2 and
        // the curvature energy is integral of 4 over width 2 = 8.
        let b = default_basis();
        let t = b.knots();
        let quad: Vec<f64> = (0..b.n_basis())
            .map(|i| (t[i + 1] * t[i + 2] + t[i + 1] * t[i + 3] + t[i + 2] * t[i + 3]) / 3.0)
            .collect();
        let m = b.smoothness_gram();
        let n = b.n_basis();
        let mut energy = 0.0;
        for i in 0..n {
            for j in 0..n {
                energy += quad[i] * m[i * n + j] * quad[j];
            }
        }
        assert!((energy - 8.0).abs() < 1e-9, "energy {energy}");
    }

    #[test]
    fn affine_spline_has_zero_curvature_energy() {
        let b = default_basis();
        let lin = b.greville();
        let m = b.smoothness_gram();
        let n = b.n_basis();
        let mut energy = 0.0;
        for i in 0..n {
            for j in 0..n {
                energy += lin[i] * m[i * n + j] * lin[j];
            }
        }
        assert!(energy.abs() < 1e-10, "energy {energy}");
    }

    #[test]
    fn gram_matches_brute_force_quadrature() {
        // Independent check: dense trapezoid integration of B_i'' B_j''.
        let b = default_basis();
        let n = b.n_basis();
        let m = b.smoothness_gram();
        let steps = 20_000;
        let h = 2.0 / steps as f64;
        let mut brute = vec![0.0; n * n];
        for step in 0..=steps {
            let x = -1.0 + step as f64 * h;
            let w = if step == 0 || step == steps { 0.5 } else { 1.0 } * h;
            let (first, _, _, d2) = b.eval_derivs(x);
            for (ri, &di) in d2.iter().enumerate() {
                for (rj, &dj) in d2.iter().enumerate() {
                    brute[(first + ri) * n + (first + rj)] += w * di * dj;
                }
            }
        }
        for i in 0..n * n {
            assert!(
                (m[i] - brute[i]).abs() < 1e-4,
                "entry {i}: {} vs {}",
                m[i],
                brute[i]
            );
        }
    }

    #[test]
    fn gram_is_symmetric_and_annihilates_affine() {
        for order in 2..=4 {
            let b = Basis::new(BasisSpec {
                grid_size: 6,
                order,
                x_min: -1.0,
                x_max: 2.0,
            });
            let n = b.n_basis();
            let m = b.smoothness_gram();
            for i in 0..n {
                for j in 0..n {
                    assert!((m[i * n + j] - m[j * n + i]).abs() < 1e-12);
                }
            }
            // M c = 0 for affine c (f'' = 0): check the quadratic form's
            // gradient, not just the scalar energy.
            let lin = b.greville();
            for i in 0..n {
                let row: f64 = (0..n).map(|j| m[i * n + j] * lin[j]).sum();
                assert!(row.abs() < 1e-10, "order {order} row {i}: {row}");
            }
        }
    }

    #[test]
    fn chord_weights_reproduce_endpoint_line() {
        let b = default_basis();
        let mut rng = Rng::from_seed(6);
        for _ in 0..20 {
            let c: Vec<f64> = (0..8).map(|_| rng.normal()).collect();
            let (wa, wb) = b.chord_weights();
            let a: f64 = wa.iter().zip(&c).map(|(w, c)| w * c).sum();
            let intercept: f64 = wb.iter().zip(&c).map(|(w, c)| w * c).sum();
            let s_lo = b.spline_value(&c, -1.0);
            let s_hi = b.spline_value(&c, 1.0);
            assert!((a * -1.0 + intercept - s_lo).abs() < 1e-12);
            assert!((a * 1.0 + intercept - s_hi).abs() < 1e-12);
            // straight line halfway between the endpoints at x = 0
            assert!((a * 0.0 + intercept - (s_lo + s_hi) / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_order_basis_is_indicator() {
        let b = Basis::new(BasisSpec {
            grid_size: 4,
            order: 0,
            x_min: 0.0,
            x_max: 4.0,
        });
        assert_eq!(b.n_basis(), 4);
        let all = b.eval_all(1.5);
        assert_eq!(all, vec![0.0, 1.0, 0.0, 0.0]);
        assert!(b.smoothness_gram().iter().all(|&v| v == 0.0));
    }
}
