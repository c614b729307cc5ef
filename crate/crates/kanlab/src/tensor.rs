//! Dense row-major tensors over `f64`.
//!
//! Every value flowing through the library is a [`Tensor`]: a shape plus a
//! flat row-major buffer. Element `(i0, .., ik)` lives at offset
//! `sum(i_j * stride_j)` with strides derived from the shape. All arithmetic
//! is 64-bit; there is no 32-bit storage path.
//!
//! The binary layout used for checkpoints is fixed: `u32` rank, then one
//! little-endian `u64` per extent, then the row-major data as little-endian
//! `f64`.

use std::io::{self, Read, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("shape mismatch: {op} on shapes {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("axis {axis} out of range for rank-{rank} tensor")]
    AxisOutOfRange { axis: usize, rank: usize },
    #[error("buffer length {got} does not match shape {shape:?} (expects {want})")]
    BadBuffer {
        shape: Vec<usize>,
        want: usize,
        got: usize,
    },
    #[error("truncated tensor stream: {0}")]
    Truncated(String),
    #[error("io error: {0}")]
    Io(#[from] io::Error),
}

/// Dense n-dimensional array, row-major, immutable in spirit: shared readers
/// are always safe, and training code clones before mutating in place.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self, TensorError> {
        let want: usize = shape.iter().product();
        if want != data.len() {
            return Err(TensorError::BadBuffer {
                shape: shape.to_vec(),
                want,
                got: data.len(),
            });
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Rank-2 constructor from nested rows; rows must be equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, TensorError> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(m * n);
        for row in rows {
            if row.len() != n {
                return Err(TensorError::BadBuffer {
                    shape: vec![m, n],
                    want: n,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Tensor::from_vec(&[m, n], data)
    }

    pub fn scalar(value: f64) -> Self {
        Tensor {
            shape: vec![],
            data: vec![value],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Tensor::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Reinterpret the buffer under a new shape with the same element count.
    pub fn reshape(&self, shape: &[usize]) -> Result<Self, TensorError> {
        let want: usize = shape.iter().product();
        if want != self.data.len() {
            return Err(TensorError::BadBuffer {
                shape: shape.to_vec(),
                want,
                got: self.data.len(),
            });
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data: self.data.clone(),
        })
    }

    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1usize; self.shape.len()];
        for i in (0..self.shape.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.shape[i + 1];
        }
        strides
    }

    pub fn get2(&self, i: usize, j: usize) -> f64 {
        debug_assert_eq!(self.rank(), 2);
        self.data[i * self.shape[1] + j]
    }

    pub fn set2(&mut self, i: usize, j: usize, v: f64) {
        debug_assert_eq!(self.rank(), 2);
        self.data[i * self.shape[1] + j] = v;
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Self, TensorError> {
        if self.shape != other.shape {
            return Err(TensorError::ShapeMismatch {
                op: "zip_map",
                lhs: self.shape.clone(),
                rhs: other.shape.clone(),
            });
        }
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Tensor) -> Result<Self, TensorError> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Self, TensorError> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|x| x * s)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Standard matrix product of two rank-2 tensors.
    pub fn matmul(&self, other: &Tensor) -> Result<Self, TensorError> {
        if self.rank() != 2 || other.rank() != 2 || self.shape[1] != other.shape[0] {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                lhs: self.shape.clone(),
                rhs: other.shape.clone(),
            });
        }
        let (m, k) = (self.shape[0], self.shape[1]);
        let n = other.shape[1];
        let mut out = vec![0.0; m * n];
        matmul_into(&self.data, &other.data, &mut out, m, k, n);
        Tensor::from_vec(&[m, n], out)
    }

    /// Elementwise add with numpy-style trailing-dimension broadcasting.
    ///
    /// Shapes align from the right; each pair of extents must be equal or
    /// one of them 1.
    pub fn broadcast_add(&self, other: &Tensor) -> Result<Self, TensorError> {
        let shape = broadcast_shape(&self.shape, &other.shape).ok_or_else(|| {
            TensorError::ShapeMismatch {
                op: "broadcast_add",
                lhs: self.shape.clone(),
                rhs: other.shape.clone(),
            }
        })?;
        let mut out = Tensor::zeros(&shape);
        let mut idx = vec![0usize; shape.len()];
        for o in 0..out.data.len() {
            out.data[o] = self.broadcast_get(&idx) + other.broadcast_get(&idx);
            for d in (0..shape.len()).rev() {
                idx[d] += 1;
                if idx[d] < shape[d] {
                    break;
                }
                idx[d] = 0;
            }
        }
        Ok(out)
    }

    fn broadcast_get(&self, idx: &[usize]) -> f64 {
        let offset = idx.len() - self.shape.len();
        let strides = self.strides();
        let mut pos = 0;
        for (d, &ext) in self.shape.iter().enumerate() {
            let i = if ext == 1 { 0 } else { idx[offset + d] };
            pos += i * strides[d];
        }
        self.data[pos]
    }

    /// Sum over one axis, dropping it from the shape. A rank-1 tensor summed
    /// over axis 0 yields a scalar tensor (rank 0).
    pub fn reduce_sum(&self, axis: usize) -> Result<Self, TensorError> {
        if axis >= self.rank() {
            return Err(TensorError::AxisOutOfRange {
                axis,
                rank: self.rank(),
            });
        }
        let outer: usize = self.shape[..axis].iter().product();
        let mid = self.shape[axis];
        let inner: usize = self.shape[axis + 1..].iter().product();
        let mut out_shape = self.shape.clone();
        out_shape.remove(axis);
        let mut out = vec![0.0; outer * inner];
        for a in 0..outer {
            for b in 0..mid {
                let base = (a * mid + b) * inner;
                for c in 0..inner {
                    out[a * inner + c] += self.data[base + c];
                }
            }
        }
        Tensor::from_vec(&out_shape, out)
    }

    /// Writes the fixed binary layout: u32 rank, u64 extents, f64 LE data.
    pub fn write_to(&self, w: &mut impl Write) -> Result<(), TensorError> {
        w.write_all(&(self.rank() as u32).to_le_bytes())?;
        for &ext in &self.shape {
            w.write_all(&(ext as u64).to_le_bytes())?;
        }
        for &v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self, TensorError> {
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)
            .map_err(|e| TensorError::Truncated(format!("rank: {e}")))?;
        let rank = u32::from_le_bytes(b4) as usize;
        let mut shape = Vec::with_capacity(rank);
        let mut b8 = [0u8; 8];
        for d in 0..rank {
            r.read_exact(&mut b8)
                .map_err(|e| TensorError::Truncated(format!("extent {d}: {e}")))?;
            shape.push(u64::from_le_bytes(b8) as usize);
        }
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        for i in 0..n {
            r.read_exact(&mut b8)
                .map_err(|e| TensorError::Truncated(format!("element {i}: {e}")))?;
            data.push(f64::from_le_bytes(b8));
        }
        Tensor::from_vec(&shape, data)
    }
}

fn broadcast_shape(a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    let rank = a.len().max(b.len());
    let mut out = vec![0usize; rank];
    for d in 0..rank {
        let ea = if d < rank - a.len() { 1 } else { a[d - (rank - a.len())] };
        let eb = if d < rank - b.len() { 1 } else { b[d - (rank - b.len())] };
        if ea == eb || ea == 1 || eb == 1 {
            out[d] = ea.max(eb);
        } else {
            return None;
        }
    }
    Some(out)
}

/// `out[m,n] = a[m,k] * b[k,n]`, row-major slices. The k-outer loop keeps the
/// inner loop a contiguous axpy over `b` rows, which the compiler vectorizes.
pub fn matmul_into(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    out.fill(0.0);
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let orow = &mut out[i * n..(i + 1) * n];
        for (p, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

/// `out[m,n] += a^T[m,k] * b[k,n]` where `a` is stored as `[k,m]`.
pub fn matmul_at_b_acc(a: &[f64], b: &[f64], out: &mut [f64], k: usize, m: usize, n: usize) {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    for p in 0..k {
        let arow = &a[p * m..(p + 1) * m];
        let brow = &b[p * n..(p + 1) * n];
        for (i, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let orow = &mut out[i * n..(i + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

/// `out[m,n] = a[m,k] * b^T[k,n]` where `b` is stored as `[n,k]`.
pub fn matmul_a_bt(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(out.len(), m * n);
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let brow = &b[j * k..(j + 1) * k];
            let mut acc = 0.0;
            for (&av, &bv) in arow.iter().zip(brow) {
                acc += av * bv;
            }
            out[i * n + j] = acc;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t2(rows: &[Vec<f64>]) -> Tensor {
        Tensor::from_rows(rows).unwrap()
    }

    #[test]
    fn matmul_identity() {
        let a = t2(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let out = a.matmul(&Tensor::identity(2)).unwrap();
        assert_eq!(out, a);
    }

    #[test]
    fn matmul_zero_annihilates() {
        let a = t2(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let z = Tensor::zeros(&[2, 2]);
        assert_eq!(a.matmul(&z).unwrap(), z);
    }

    #[test]
    fn matmul_hand_product() {
        let a = t2(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let b = t2(&[vec![5.0, 6.0], vec![7.0, 8.0]]);
        let out = a.matmul(&b).unwrap();
        assert_eq!(out, t2(&[vec![19.0, 22.0], vec![43.0, 50.0]]));
    }

    #[test]
    fn matmul_shape_mismatch_names_both_shapes() {
        let a = Tensor::zeros(&[2, 3]);
        let b = Tensor::zeros(&[2, 3]);
        let err = a.matmul(&b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2, 3]"), "got: {msg}");
    }

    #[test]
    fn reduce_sum_vector() {
        let v = Tensor::from_vec(&[3], vec![1.0, 2.0, 3.0]).unwrap();
        let s = v.reduce_sum(0).unwrap();
        assert_eq!(s.shape(), &[] as &[usize]);
        assert_eq!(s.data(), &[6.0]);
    }

    #[test]
    fn reduce_sum_matrix_axes() {
        let m = t2(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(m.reduce_sum(0).unwrap().data(), &[4.0, 6.0]);
        assert_eq!(m.reduce_sum(1).unwrap().data(), &[3.0, 7.0]);
    }

    #[test]
    fn elementwise_negate_fixed_point() {
        let z = Tensor::from_vec(&[1], vec![0.0]).unwrap();
        assert_eq!(z.map(|x| -x).data(), &[0.0]);
    }

    #[test]
    fn broadcast_add_row_vector() {
        let a = t2(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        let b = Tensor::from_vec(&[2], vec![0.0, 2.0]).unwrap();
        let out = a.broadcast_add(&b).unwrap();
        assert_eq!(out, t2(&[vec![1.0, 3.0], vec![1.0, 3.0]]));
    }

    #[test]
    fn broadcast_rejects_incompatible() {
        let a = Tensor::zeros(&[2, 3]);
        let b = Tensor::zeros(&[2]);
        assert!(a.broadcast_add(&b).is_err());
    }

    #[test]
    fn matmul_associativity_within_tolerance() {
        use crate::rng::Rng;
        let mut rng = Rng::from_seed(7);
        let rand = |rng: &mut Rng, m: usize, n: usize| {
            let data: Vec<f64> = (0..m * n).map(|_| rng.uniform() * 2.0 - 1.0).collect();
            Tensor::from_vec(&[m, n], data).unwrap()
        };
        let a = rand(&mut rng, 4, 5);
        let b = rand(&mut rng, 5, 6);
        let c = rand(&mut rng, 6, 3);
        let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
        let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
        for (l, r) in left.data().iter().zip(right.data()) {
            let rel = (l - r).abs() / l.abs().max(r.abs()).max(1.0);
            assert!(rel < 1e-9, "assoc mismatch {l} vs {r}");
        }
    }

    #[test]
    fn serialization_round_trip() {
        let t = Tensor::from_vec(&[2, 1, 3], vec![1.5, -2.0, 0.0, 3.25, f64::MIN_POSITIVE, 9.0])
            .unwrap();
        let mut buf = Vec::new();
        t.write_to(&mut buf).unwrap();
        // layout: 4 + 3*8 + 6*8
        assert_eq!(buf.len(), 4 + 24 + 48);
        let back = Tensor::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn serialization_rejects_truncation() {
        let t = Tensor::from_vec(&[2], vec![1.0, 2.0]).unwrap();
        let mut buf = Vec::new();
        t.write_to(&mut buf).unwrap();
        buf.pop();
        assert!(matches!(
            Tensor::read_from(&mut buf.as_slice()),
            Err(TensorError::Truncated(_))
        ));
    }
}
