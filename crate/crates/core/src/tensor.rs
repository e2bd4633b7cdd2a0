//! Dense d-way tensors stored with the first mode varying fastest.
//!
//! Modes and indices are zero-based throughout the crate. The element at
//! multi-index `(i_0, ..., i_{d-1})` lives at offset
//! `sum_k i_k * prod_{m<k} dims[m]`, so the mode-0 unfolding is the raw
//! buffer read as a column-major matrix.

use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseTensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

/// Sizes of the mode-`n` "left" block, the mode itself and the "right" block.
#[inline]
fn split_dims(dims: &[usize], n: usize) -> (usize, usize, usize) {
    let left = dims[..n].iter().product();
    let right = dims[n + 1..].iter().product();
    (left, dims[n], right)
}

fn check_dims(dims: &[usize]) -> Result<usize> {
    if dims.is_empty() {
        return Err(Error::InvalidArgument("a tensor needs at least one mode".into()));
    }
    if dims.contains(&0) {
        return Err(Error::InvalidArgument(format!("zero-length mode in {dims:?}")));
    }
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::InvalidArgument(format!("element count of {dims:?} overflows")))
}

impl DenseTensor {
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        let n = check_dims(dims)?;
        Ok(Self {
            dims: dims.to_vec(),
            data: vec![0.0; n],
        })
    }

    pub fn from_vec(dims: &[usize], data: Vec<f64>) -> Result<Self> {
        let n = check_dims(dims)?;
        if data.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} values for dims {dims:?} ({n} elements)",
                data.len()
            )));
        }
        Ok(Self {
            dims: dims.to_vec(),
            data,
        })
    }

    /// Fills a tensor by calling `f` with each multi-index in storage order.
    pub fn from_fn(dims: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let n = check_dims(dims)?;
        let mut idx = vec![0usize; dims.len()];
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(f(&idx));
            for (k, i) in idx.iter_mut().enumerate() {
                *i += 1;
                if *i < dims[k] {
                    break;
                }
                *i = 0;
            }
        }
        Ok(Self {
            dims: dims.to_vec(),
            data,
        })
    }

    #[inline]
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.dims.len()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims.len());
        let mut off = 0;
        let mut stride = 1;
        for (&i, &d) in idx.iter().zip(&self.dims) {
            debug_assert!(i < d);
            off += i * stride;
            stride *= d;
        }
        off
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: f64) {
        let off = self.offset(idx);
        self.data[off] = v;
    }

    pub(crate) fn check_mode(&self, n: usize) -> Result<()> {
        if n >= self.dims.len() {
            return Err(Error::ModeOutOfRange {
                mode: n,
                order: self.dims.len(),
            });
        }
        Ok(())
    }

    pub fn norm_sq(&self) -> f64 {
        dot(&self.data, &self.data)
    }

    /// Frobenius norm.
    pub fn frob_norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn inner(&self, other: &DenseTensor) -> Result<f64> {
        self.check_same_dims(other)?;
        Ok(dot(&self.data, &other.data))
    }

    pub(crate) fn check_same_dims(&self, other: &DenseTensor) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch(format!(
                "{:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        Ok(())
    }

    /// `‖self − other‖²_F`.
    pub fn dist_sq(&self, other: &DenseTensor) -> Result<f64> {
        self.check_same_dims(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum())
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &DenseTensor) -> Result<()> {
        self.check_same_dims(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    /// Mode-`n` unfolding: an `I_n × (∏_{k≠n} I_k)` matrix whose column index
    /// runs over the remaining modes with the lowest mode fastest.
    pub fn matricize(&self, n: usize) -> Result<Matrix> {
        self.check_mode(n)?;
        let (left, size, right) = split_dims(&self.dims, n);
        let mut m = Matrix::zeros(size, left * right);
        for r in 0..right {
            for i in 0..size {
                let src = &self.data[(r * size + i) * left..(r * size + i + 1) * left];
                for (l, &v) in src.iter().enumerate() {
                    m[(i, l + r * left)] = v;
                }
            }
        }
        Ok(m)
    }

    /// Inverse of [`DenseTensor::matricize`].
    pub fn fold(m: &Matrix, n: usize, dims: &[usize]) -> Result<Self> {
        let mut t = Self::zeros(dims)?;
        t.check_mode(n)?;
        let (left, size, right) = split_dims(dims, n);
        if m.rows() != size || m.cols() != left * right {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix cannot fold into {dims:?} along mode {n}",
                m.rows(),
                m.cols()
            )));
        }
        for r in 0..right {
            for i in 0..size {
                let dst = &mut t.data[(r * size + i) * left..(r * size + i + 1) * left];
                for (l, v) in dst.iter_mut().enumerate() {
                    *v = m[(i, l + r * left)];
                }
            }
        }
        Ok(t)
    }

    /// n-mode product `self ×_n a`, i.e. `Y_(n) = a · X_(n)`.
    pub fn ttm(&self, a: &Matrix, n: usize) -> Result<DenseTensor> {
        self.check_mode(n)?;
        if a.cols() != self.dims[n] {
            return Err(Error::DimensionMismatch(format!(
                "ttm along mode {n}: matrix has {} columns, mode has size {}",
                a.cols(),
                self.dims[n]
            )));
        }
        self.mode_product(n, a.rows(), |j, i| a[(j, i)])
    }

    /// `self ×_n aᵀ` without forming the transpose.
    pub fn ttm_transposed(&self, a: &Matrix, n: usize) -> Result<DenseTensor> {
        self.check_mode(n)?;
        if a.rows() != self.dims[n] {
            return Err(Error::DimensionMismatch(format!(
                "transposed ttm along mode {n}: matrix has {} rows, mode has size {}",
                a.rows(),
                self.dims[n]
            )));
        }
        self.mode_product(n, a.cols(), |j, i| a[(i, j)])
    }

    /// Shared kernel: `Y[l, j, r] = Σ_i coef(j, i) · X[l, i, r]`.
    fn mode_product(
        &self,
        n: usize,
        out_size: usize,
        coef: impl Fn(usize, usize) -> f64,
    ) -> Result<DenseTensor> {
        let (left, size, right) = split_dims(&self.dims, n);
        let mut dims = self.dims.clone();
        dims[n] = out_size;
        let mut out = DenseTensor::zeros(&dims)?;
        for r in 0..right {
            let src = &self.data[r * size * left..(r + 1) * size * left];
            let dst = &mut out.data[r * out_size * left..(r + 1) * out_size * left];
            for j in 0..out_size {
                let drow = &mut dst[j * left..(j + 1) * left];
                for i in 0..size {
                    let c = coef(j, i);
                    if c == 0.0 {
                        continue;
                    }
                    let srow = &src[i * left..(i + 1) * left];
                    for (d, &s) in drow.iter_mut().zip(srow) {
                        *d += c * s;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Slice `t` of the last (time) mode as a `(d−1)`-way tensor. A 1-way
    /// tensor yields a single-element 1-way tensor.
    pub fn time_slice(&self, t: usize) -> Result<DenseTensor> {
        let d = self.order();
        let tau = self.dims[d - 1];
        if t >= tau {
            return Err(Error::IndexOutOfRange { index: t, size: tau });
        }
        let dims = if d == 1 {
            vec![1]
        } else {
            self.dims[..d - 1].to_vec()
        };
        let n = self.data.len() / tau;
        Ok(DenseTensor {
            dims,
            data: self.data[t * n..(t + 1) * n].to_vec(),
        })
    }

    /// Borrowed view of time slice `t`'s values.
    pub fn time_slice_values(&self, t: usize) -> &[f64] {
        let tau = self.dims[self.order() - 1];
        let n = self.data.len() / tau;
        &self.data[t * n..(t + 1) * n]
    }

    pub fn time_slice_values_mut(&mut self, t: usize) -> &mut [f64] {
        let tau = self.dims[self.order() - 1];
        let n = self.data.len() / tau;
        &mut self.data[t * n..(t + 1) * n]
    }

    /// Stacks equally shaped slices along a new trailing mode.
    pub fn stack_time(slices: &[DenseTensor]) -> Result<DenseTensor> {
        let first = slices
            .first()
            .ok_or_else(|| Error::InvalidArgument("no slices to stack".into()))?;
        let mut dims = first.dims.clone();
        dims.push(slices.len());
        let mut data = Vec::with_capacity(first.len() * slices.len());
        for s in slices {
            first.check_same_dims(s)?;
            data.extend_from_slice(&s.data);
        }
        DenseTensor::from_vec(&dims, data)
    }
}

/// Relative error `‖x − m‖_F / ‖x‖_F`.
pub fn frob_err(x: &DenseTensor, m: &DenseTensor) -> Result<f64> {
    let nx = x.frob_norm();
    if nx == 0.0 {
        return Err(Error::InvalidArgument(
            "relative error undefined for a zero reference tensor".into(),
        ));
    }
    Ok(x.dist_sq(m)?.sqrt() / nx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(dims: &[usize]) -> DenseTensor {
        let n: usize = dims.iter().product();
        DenseTensor::from_vec(dims, (1..=n).map(|v| v as f64).collect()).unwrap()
    }

    #[test]
    fn matricize_matrix_is_itself() {
        let x = seq(&[2, 2]);
        let m = x.matricize(0).unwrap();
        assert_eq!(m.col(0), &[1.0, 2.0]);
        assert_eq!(m.col(1), &[3.0, 4.0]);
    }

    #[test]
    fn matricize_last_mode_of_cube() {
        let x = seq(&[2, 2, 2]);
        let m = x.matricize(2).unwrap();
        assert_eq!((m.rows(), m.cols()), (2, 4));
        assert_eq!(m.row(0), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.row(1), vec![5.0, 6.0, 7.0, 8.0]);
    }

    #[test]
    fn matricize_column_order_follows_linearization() {
        // Oracle: explicit column formula j = Σ_{k≠n} i_k ∏_{m<k, m≠n} I_m.
        let dims = [3, 2, 4, 2];
        let x = seq(&dims);
        for n in 0..dims.len() {
            let m = x.matricize(n).unwrap();
            let _ = DenseTensor::from_fn(&dims, |idx| {
                let mut j = 0;
                let mut stride = 1;
                for k in 0..dims.len() {
                    if k != n {
                        j += idx[k] * stride;
                        stride *= dims[k];
                    }
                }
                assert_eq!(m[(idx[n], j)], x.get(idx));
                0.0
            })
            .unwrap();
        }
    }

    #[test]
    fn bad_mode_is_rejected() {
        let x = seq(&[2, 3]);
        assert!(matches!(
            x.matricize(2),
            Err(Error::ModeOutOfRange { mode: 2, order: 2 })
        ));
        assert!(DenseTensor::zeros(&[]).is_err());
        assert!(DenseTensor::zeros(&[2, 0]).is_err());
    }

    #[test]
    fn ttm_row_sum() {
        let x = DenseTensor::from_vec(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let a = Matrix::from_rows(&[&[1.0, 1.0]]).unwrap();
        let y = x.ttm(&a, 0).unwrap();
        assert_eq!(y.dims(), &[1, 2]);
        assert_eq!(y.as_slice(), &[3.0, 7.0]);
        assert!(x.ttm(&Matrix::identity(3), 0).is_err());
    }

    #[test]
    fn ttm_identity_and_transposed_agree() {
        let x = seq(&[3, 4, 2]);
        for n in 0..3 {
            let id = Matrix::identity(x.dims()[n]);
            assert_eq!(x.ttm(&id, n).unwrap(), x);
        }
        let a = Matrix::from_fn(4, 3, |i, j| (i as f64) - 0.5 * j as f64);
        assert_eq!(
            x.ttm_transposed(&a, 1).unwrap(),
            x.ttm(&a.transpose(), 1).unwrap()
        );
    }

    #[test]
    fn time_slices() {
        let x = seq(&[2, 3, 4]);
        let first = x.time_slice(0).unwrap();
        assert_eq!(first.dims(), &[2, 3]);
        assert_eq!(first.as_slice(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let last = x.time_slice(3).unwrap();
        assert_eq!(last.as_slice(), &[19.0, 20.0, 21.0, 22.0, 23.0, 24.0]);
        assert!(matches!(
            x.time_slice(4),
            Err(Error::IndexOutOfRange { index: 4, size: 4 })
        ));
        let slices: Vec<_> = (0..4).map(|t| x.time_slice(t).unwrap()).collect();
        assert_eq!(DenseTensor::stack_time(&slices).unwrap(), x);
    }

    #[test]
    fn norms() {
        let x = DenseTensor::from_vec(&[2], vec![3.0, 4.0]).unwrap();
        assert_eq!(x.frob_norm(), 5.0);
        assert_eq!(frob_err(&x, &x).unwrap(), 0.0);
        let z = DenseTensor::zeros(&[2]).unwrap();
        assert!(frob_err(&z, &x).is_err());
    }

    #[test]
    fn frob_err_matches_loop() {
        let x = DenseTensor::from_fn(&[3, 4, 2], |i| (i[0] * 7 + i[1] * 3 + i[2]) as f64 * 0.37 - 2.0).unwrap();
        let m = DenseTensor::from_fn(&[3, 4, 2], |i| ((i[0] + 2 * i[1] + 5 * i[2]) as f64).sin()).unwrap();
        let mut num = 0.0;
        let mut den = 0.0;
        for (a, b) in x.as_slice().iter().zip(m.as_slice()) {
            num += (a - b) * (a - b);
            den += a * a;
        }
        let expect = (num / den).sqrt();
        assert!((frob_err(&x, &m).unwrap() - expect).abs() <= 1e-15 * expect);
    }
}
