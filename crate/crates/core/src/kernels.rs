//! Khatri-Rao product and MTTKRP.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::tensor::DenseTensor;

/// Column-wise Kronecker product; the second operand's row index varies
/// fastest in each output column.
pub fn khatri_rao(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols() != b.cols() {
        return Err(Error::DimensionMismatch(format!(
            "khatri-rao of matrices with {} and {} columns",
            a.cols(),
            b.cols()
        )));
    }
    let rows = a.rows() * b.rows();
    let mut out = Matrix::zeros(rows, a.cols());
    for r in 0..a.cols() {
        let (ac, bc) = (a.col(r), b.col(r));
        let oc = out.col_mut(r);
        for (i, &av) in ac.iter().enumerate() {
            for (j, &bv) in bc.iter().enumerate() {
                oc[i * bc.len() + j] = av * bv;
            }
        }
    }
    Ok(out)
}

/// Checks that `factors` describes a CP model for a tensor of shape `dims`
/// (the entry at `skip`, if any, is not inspected) and returns the rank.
pub(crate) fn check_factors(dims: &[usize], factors: &[Matrix], skip: Option<usize>) -> Result<usize> {
    if factors.len() != dims.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} factors for a {}-way tensor",
            factors.len(),
            dims.len()
        )));
    }
    let mut rank = None;
    for (k, f) in factors.iter().enumerate() {
        if Some(k) == skip {
            continue;
        }
        if f.rows() != dims[k] {
            return Err(Error::DimensionMismatch(format!(
                "factor {k} has {} rows, mode size is {}",
                f.rows(),
                dims[k]
            )));
        }
        match rank {
            None => rank = Some(f.cols()),
            Some(r) if r != f.cols() => {
                return Err(Error::DimensionMismatch(format!(
                    "factor {k} has {} columns, expected {r}",
                    f.cols()
                )))
            }
            _ => {}
        }
    }
    match rank {
        Some(r) => Ok(r),
        // A 1-way tensor with its only factor skipped has no rank to read.
        None => Ok(factors.first().map_or(0, Matrix::cols)),
    }
}

/// Increments a little-endian multi-index over `dims`.
#[inline]
pub(crate) fn advance(idx: &mut [usize], dims: &[usize]) {
    for (i, &d) in idx.iter_mut().zip(dims) {
        *i += 1;
        if *i < d {
            return;
        }
        *i = 0;
    }
}

/// `X_(n) · (A_{d-1} ⊙ ⋯ ⊙ A_{n+1} ⊙ A_{n-1} ⊙ ⋯ ⊙ A_0)`.
///
/// Streams over the tensor once. For each column block of the unfolding the
/// Khatri-Rao row is rebuilt from the factor rows on the fly, so the working
/// set is `O(I_n R)` beyond the tensor itself.
pub fn mttkrp(x: &DenseTensor, factors: &[Matrix], n: usize) -> Result<Matrix> {
    x.check_mode(n)?;
    let dims = x.dims();
    let rank = check_factors(dims, factors, Some(n))?;
    let d = dims.len();
    let left: usize = dims[..n].iter().product();
    let size = dims[n];
    let right: usize = dims[n + 1..].iter().product();
    let data = x.as_slice();

    // Row-major accumulator, transposed into the column-major result at the end.
    let mut acc = vec![0.0; size * rank];
    let mut ridx = vec![0usize; d - n - 1];
    let mut lidx = vec![0usize; n];
    let mut wr = vec![0.0; rank];
    let mut z = vec![0.0; rank];

    for rb in 0..right {
        wr.fill(1.0);
        for (k, &i) in ridx.iter().enumerate() {
            let f = &factors[n + 1 + k];
            for (c, w) in wr.iter_mut().enumerate() {
                *w *= f[(i, c)];
            }
        }
        let block = &data[rb * size * left..(rb + 1) * size * left];
        lidx.fill(0);
        for l in 0..left {
            z.copy_from_slice(&wr);
            for (k, &i) in lidx.iter().enumerate() {
                let f = &factors[k];
                for (c, zc) in z.iter_mut().enumerate() {
                    *zc *= f[(i, c)];
                }
            }
            for i in 0..size {
                let v = block[l + i * left];
                if v == 0.0 {
                    continue;
                }
                let row = &mut acc[i * rank..(i + 1) * rank];
                for (a, &zc) in row.iter_mut().zip(&z) {
                    *a += v * zc;
                }
            }
            advance(&mut lidx, &dims[..n]);
        }
        advance(&mut ridx, &dims[n + 1..]);
    }

    Ok(Matrix::from_fn(size, rank, |i, c| acc[i * rank + c]))
}
