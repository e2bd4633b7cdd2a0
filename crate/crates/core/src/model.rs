//! CP (Kruskal) and Tucker models.

use crate::error::{Error, Result};
use crate::kernels::{advance, check_factors};
use crate::matrix::Matrix;
use crate::tensor::DenseTensor;
use serde::{Deserialize, Serialize};

/// Rank-R CP model `⟦A_0, …, A_{d-1}⟧` with no separate weight vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KruskalModel {
    factors: Vec<Matrix>,
}

impl KruskalModel {
    pub fn new(factors: Vec<Matrix>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidArgument("CP model needs at least one factor".into()));
        }
        let rank = factors[0].cols();
        if rank == 0 {
            return Err(Error::InvalidArgument("CP rank must be at least 1".into()));
        }
        let dims: Vec<usize> = factors.iter().map(Matrix::rows).collect();
        if dims.contains(&0) {
            return Err(Error::InvalidArgument("factor with zero rows".into()));
        }
        check_factors(&dims, &factors, None)?;
        Ok(Self { factors })
    }

    pub fn factors(&self) -> &[Matrix] {
        &self.factors
    }

    pub fn factors_mut(&mut self) -> &mut [Matrix] {
        &mut self.factors
    }

    pub fn into_factors(self) -> Vec<Matrix> {
        self.factors
    }

    pub fn rank(&self) -> usize {
        self.factors[0].cols()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(Matrix::rows).collect()
    }

    pub fn param_count(&self) -> usize {
        self.factors.iter().map(|f| f.rows() * f.cols()).sum()
    }

    /// Dense reconstruction `Σ_r a⁽⁰⁾_r ∘ ⋯ ∘ a⁽ᵈ⁻¹⁾_r`.
    pub fn reconstruct(&self) -> DenseTensor {
        reconstruct_from_factors(&self.factors)
    }

    /// The same tensor as a Tucker model with a superdiagonal identity core.
    pub fn to_tucker(&self) -> TuckerModel {
        let r = self.rank();
        let d = self.factors.len();
        let core = DenseTensor::from_fn(&vec![r; d], |idx| {
            if idx.iter().all(|&i| i == idx[0]) {
                1.0
            } else {
                0.0
            }
        })
        .expect("rank is positive");
        TuckerModel {
            core,
            factors: self.factors.clone(),
        }
    }
}

/// Reconstructs `⟦A_0, …⟧` from borrowed factors (all sharing one column count).
pub(crate) fn reconstruct_from_factors(factors: &[Matrix]) -> DenseTensor {
    let dims: Vec<usize> = factors.iter().map(Matrix::rows).collect();
    let rank = factors[0].cols();
    let first = &factors[0];
    let i0 = dims[0];
    let right: usize = dims[1..].iter().product();
    let mut out = vec![0.0; i0 * right];
    let mut ridx = vec![0usize; dims.len() - 1];
    let mut w = vec![0.0; rank];
    for rb in 0..right {
        w.fill(1.0);
        for (k, &i) in ridx.iter().enumerate() {
            let f = &factors[k + 1];
            for (c, wc) in w.iter_mut().enumerate() {
                *wc *= f[(i, c)];
            }
        }
        let dst = &mut out[rb * i0..(rb + 1) * i0];
        for (c, &wc) in w.iter().enumerate() {
            if wc == 0.0 {
                continue;
            }
            for (o, &a) in dst.iter_mut().zip(first.col(c)) {
                *o += a * wc;
            }
        }
        advance(&mut ridx, &dims[1..]);
    }
    DenseTensor::from_vec(&dims, out).expect("dims follow from factors")
}

/// Tucker model `G ×_0 A_0 ×_1 ⋯ ×_{d-1} A_{d-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuckerModel {
    core: DenseTensor,
    factors: Vec<Matrix>,
}

impl TuckerModel {
    pub fn new(core: DenseTensor, factors: Vec<Matrix>) -> Result<Self> {
        if core.order() != factors.len() {
            return Err(Error::DimensionMismatch(format!(
                "{}-way core with {} factors",
                core.order(),
                factors.len()
            )));
        }
        for (k, f) in factors.iter().enumerate() {
            if f.cols() != core.dims()[k] {
                return Err(Error::DimensionMismatch(format!(
                    "factor {k} has {} columns, core mode has size {}",
                    f.cols(),
                    core.dims()[k]
                )));
            }
            if f.rows() == 0 {
                return Err(Error::InvalidArgument("factor with zero rows".into()));
            }
        }
        Ok(Self { core, factors })
    }

    pub fn core(&self) -> &DenseTensor {
        &self.core
    }

    pub fn factors(&self) -> &[Matrix] {
        &self.factors
    }

    pub fn into_parts(self) -> (DenseTensor, Vec<Matrix>) {
        (self.core, self.factors)
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.core.dims().to_vec()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(Matrix::rows).collect()
    }

    pub fn param_count(&self) -> usize {
        self.core.len() + self.factors.iter().map(|f| f.rows() * f.cols()).sum::<usize>()
    }

    /// Dense reconstruction by a sequence of n-mode products.
    pub fn reconstruct(&self) -> DenseTensor {
        reconstruct_tucker_parts(&self.core, &self.factors)
    }
}

/// Either kind of low-rank model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Model {
    Cp(KruskalModel),
    Tucker(TuckerModel),
}

impl Model {
    pub fn reconstruct(&self) -> DenseTensor {
        match self {
            Model::Cp(m) => m.reconstruct(),
            Model::Tucker(m) => m.reconstruct(),
        }
    }

    pub fn dims(&self) -> Vec<usize> {
        match self {
            Model::Cp(m) => m.dims(),
            Model::Tucker(m) => m.dims(),
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Model::Cp(m) => m.param_count(),
            Model::Tucker(m) => m.param_count(),
        }
    }

    /// Tensor elements per model parameter.
    pub fn compression_ratio(&self) -> f64 {
        self.dims().iter().map(|&d| d as f64).product::<f64>() / self.param_count() as f64
    }
}

pub(crate) fn reconstruct_tucker_parts(core: &DenseTensor, factors: &[Matrix]) -> DenseTensor {
    let mut y = core.clone();
    for (n, a) in factors.iter().enumerate() {
        y = y.ttm(a, n).expect("validated Tucker model");
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_one_outer_product() {
        let m = KruskalModel::new(vec![
            Matrix::from_rows(&[&[1.0], &[2.0]]).unwrap(),
            Matrix::from_rows(&[&[3.0], &[4.0]]).unwrap(),
        ])
        .unwrap();
        let x = m.reconstruct();
        assert_eq!(x.get(&[0, 0]), 3.0);
        assert_eq!(x.get(&[0, 1]), 4.0);
        assert_eq!(x.get(&[1, 0]), 6.0);
        assert_eq!(x.get(&[1, 1]), 8.0);
    }

    #[test]
    fn zeroed_factor_gives_zero_tensor() {
        let mut f: Vec<_> = [3, 4, 2]
            .iter()
            .map(|&d| Matrix::from_fn(d, 2, |i, j| 1.0 + i as f64 + j as f64))
            .collect();
        f[1] = Matrix::zeros(4, 2);
        let x = KruskalModel::new(f).unwrap().reconstruct();
        assert!(x.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cp_validation() {
        assert!(KruskalModel::new(vec![]).is_err());
        assert!(KruskalModel::new(vec![Matrix::zeros(2, 0)]).is_err());
        assert!(KruskalModel::new(vec![Matrix::zeros(2, 2), Matrix::zeros(2, 3)]).is_err());
    }

    #[test]
    fn tucker_rank_one() {
        let core = DenseTensor::from_vec(&[1, 1, 1], vec![2.0]).unwrap();
        let a = Matrix::from_rows(&[&[1.0], &[0.0]]).unwrap();
        let b = Matrix::from_rows(&[&[1.0], &[1.0]]).unwrap();
        let c = Matrix::from_rows(&[&[3.0]]).unwrap();
        let m = TuckerModel::new(core, vec![a.clone(), b.clone(), c]).unwrap();
        let x = m.reconstruct();
        assert_eq!(x.dims(), &[2, 2, 1]);
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(x.get(&[i, j, 0]), 2.0 * a[(i, 0)] * b[(j, 0)] * 3.0);
            }
        }
    }

    #[test]
    fn tucker_identity_factors_embed_core() {
        let core = DenseTensor::from_fn(&[2, 3, 2], |i| (i[0] + 2 * i[1] + 6 * i[2]) as f64).unwrap();
        let f = core.dims().iter().map(|&r| Matrix::identity(r)).collect();
        let m = TuckerModel::new(core.clone(), f).unwrap();
        assert_eq!(m.reconstruct(), core);
        assert!(TuckerModel::new(core, vec![Matrix::identity(2)]).is_err());
    }
}
