//! Flat parameter vectors and the linear maps between parameter space and
//! tensor space.
//!
//! Layout: CP `[vec(A_0), …, vec(A_{d−1})]`; Tucker `[vec(G), vec(A_0), …]`,
//! every block column-major.

use crate::decomp::hadamard_of_grams;
use crate::error::{Error, Result};
use crate::kernels::mttkrp;
use crate::matrix::Matrix;
use crate::model::{reconstruct_from_factors, reconstruct_tucker_parts, KruskalModel, Model, TuckerModel};
use crate::tensor::DenseTensor;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    Cp { rank: usize },
    Tucker { ranks: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    dims: Vec<usize>,
    kind: ModelKind,
}

impl ModelShape {
    pub fn cp(dims: &[usize], rank: usize) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::InvalidArgument(format!("invalid dims {dims:?}")));
        }
        if rank == 0 {
            return Err(Error::InvalidArgument("CP rank must be at least 1".into()));
        }
        Ok(Self {
            dims: dims.to_vec(),
            kind: ModelKind::Cp { rank },
        })
    }

    pub fn tucker(dims: &[usize], ranks: &[usize]) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::InvalidArgument(format!("invalid dims {dims:?}")));
        }
        if ranks.len() != dims.len() || ranks.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "Tucker ranks {ranks:?} do not fit dims {dims:?}"
            )));
        }
        Ok(Self {
            dims: dims.to_vec(),
            kind: ModelKind::Tucker { ranks: ranks.to_vec() },
        })
    }

    pub fn of(model: &Model) -> Self {
        match model {
            Model::Cp(m) => Self {
                dims: m.dims(),
                kind: ModelKind::Cp { rank: m.rank() },
            },
            Model::Tucker(m) => Self {
                dims: m.dims(),
                kind: ModelKind::Tucker { ranks: m.ranks() },
            },
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn is_cp(&self) -> bool {
        matches!(self.kind, ModelKind::Cp { .. })
    }

    fn factor_cols(&self, n: usize) -> usize {
        match &self.kind {
            ModelKind::Cp { rank } => *rank,
            ModelKind::Tucker { ranks } => ranks[n],
        }
    }

    pub fn core_len(&self) -> usize {
        match &self.kind {
            ModelKind::Cp { .. } => 0,
            ModelKind::Tucker { ranks } => ranks.iter().product(),
        }
    }

    /// Start of factor `n`'s block.
    pub fn factor_offset(&self, n: usize) -> usize {
        self.core_len()
            + (0..n)
                .map(|k| self.dims[k] * self.factor_cols(k))
                .sum::<usize>()
    }

    pub fn len(&self) -> usize {
        self.factor_offset(self.dims.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "parameter vector has length {}, model needs {}",
                v.len(),
                self.len()
            )));
        }
        Ok(())
    }

    pub fn pack(&self, model: &Model) -> Result<Vec<f64>> {
        if Self::of(model) != *self {
            return Err(Error::DimensionMismatch("model does not match the parameter layout".into()));
        }
        let mut v = Vec::with_capacity(self.len());
        let factors = match model {
            Model::Cp(m) => m.factors(),
            Model::Tucker(m) => {
                v.extend_from_slice(m.core().as_slice());
                m.factors()
            }
        };
        for f in factors {
            v.extend_from_slice(f.as_slice());
        }
        Ok(v)
    }

    /// Core (Tucker only) and factor matrices held in `v`.
    pub(crate) fn parts(&self, v: &[f64]) -> Result<(Option<DenseTensor>, Vec<Matrix>)> {
        self.check_len(v)?;
        let core = match &self.kind {
            ModelKind::Cp { .. } => None,
            ModelKind::Tucker { ranks } => Some(DenseTensor::from_vec(ranks, v[..self.core_len()].to_vec())?),
        };
        let factors = (0..self.dims.len())
            .map(|n| {
                let (o, len) = (self.factor_offset(n), self.dims[n] * self.factor_cols(n));
                Matrix::from_col_major(self.dims[n], self.factor_cols(n), v[o..o + len].to_vec())
            })
            .collect::<Result<_>>()?;
        Ok((core, factors))
    }

    pub fn unpack(&self, v: &[f64]) -> Result<Model> {
        let (core, factors) = self.parts(v)?;
        Ok(match core {
            None => Model::Cp(KruskalModel::new(factors)?),
            Some(g) => Model::Tucker(TuckerModel::new(g, factors)?),
        })
    }

    /// `M(v)`.
    pub fn reconstruct(&self, v: &[f64]) -> Result<DenseTensor> {
        let (core, factors) = self.parts(v)?;
        Ok(match core {
            None => reconstruct_from_factors(&factors),
            Some(g) => reconstruct_tucker_parts(&g, &factors),
        })
    }

    /// Directional derivative of the reconstruction, `(∂M/∂v)·w`.
    pub fn tangent(&self, v: &[f64], w: &[f64]) -> Result<DenseTensor> {
        self.check_len(w)?;
        let (core, factors) = self.parts(v)?;
        let (wcore, wfactors) = self.parts(w)?;
        let mut out = match (&core, &wcore) {
            (Some(_), Some(wg)) => reconstruct_tucker_parts(wg, &factors),
            _ => DenseTensor::zeros(&self.dims)?,
        };
        let mut swapped = factors.clone();
        for n in 0..self.dims.len() {
            swapped[n] = wfactors[n].clone();
            let term = match &core {
                None => reconstruct_from_factors(&swapped),
                Some(g) => reconstruct_tucker_parts(g, &swapped),
            };
            out.axpy(1.0, &term)?;
            swapped[n] = factors[n].clone();
        }
        Ok(out)
    }

    /// Adjoint of [`ModelShape::tangent`]: `(∂M/∂v)ᵀ·t`, the gradient of
    /// `⟨t, M(v)⟩` with respect to `v`.
    pub fn adjoint(&self, v: &[f64], t: &DenseTensor) -> Result<Vec<f64>> {
        if t.dims() != self.dims.as_slice() {
            return Err(Error::DimensionMismatch(format!(
                "tensor dims {:?} do not match model dims {:?}",
                t.dims(),
                self.dims
            )));
        }
        let (core, factors) = self.parts(v)?;
        let mut out = Vec::with_capacity(self.len());
        match core {
            None => {
                for n in 0..self.dims.len() {
                    out.extend_from_slice(mttkrp(t, &factors, n)?.as_slice());
                }
            }
            Some(g) => {
                let d = self.dims.len();
                let mut full = t.clone();
                for (k, a) in factors.iter().enumerate() {
                    full = full.ttm_transposed(a, k)?;
                }
                out.extend_from_slice(full.as_slice());
                for n in 0..d {
                    let mut y = t.clone();
                    for (k, a) in factors.iter().enumerate() {
                        if k != n {
                            y = y.ttm_transposed(a, k)?;
                        }
                    }
                    let block = y.matricize(n)?.matmul(&g.matricize(n)?.transpose())?;
                    out.extend_from_slice(block.as_slice());
                }
            }
        }
        Ok(out)
    }

    /// CP only: `(∂M/∂v)ᵀ(∂M/∂v)·w` through Gram matrices, without touching
    /// tensor-sized data. Block `n` is
    /// `W_n Γ_n + Σ_{k≠n} A_n (W_kᵀA_k ∗ Γ_{n,k})`, where `Γ` are Hadamard
    /// products of the other modes' Grams.
    pub fn cp_gram_hess_vec(&self, v: &[f64], w: &[f64]) -> Result<Vec<f64>> {
        if !self.is_cp() {
            return Err(Error::InvalidArgument("Gram Hessian product is CP only".into()));
        }
        self.check_len(w)?;
        let (_, a) = self.parts(v)?;
        let (_, wf) = self.parts(w)?;
        let d = a.len();
        let grams: Vec<Matrix> = a.iter().map(Matrix::gram).collect();
        let cross: Vec<Matrix> = (0..d).map(|k| wf[k].t_matmul(&a[k])).collect::<Result<_>>()?;
        let mut out = Vec::with_capacity(self.len());
        for n in 0..d {
            let mut block = wf[n].matmul(&hadamard_of_grams(&grams, n))?;
            let mut s = Matrix::zeros(grams[0].rows(), grams[0].cols());
            for k in (0..d).filter(|&k| k != n) {
                let mut term = cross[k].clone();
                for (m, g) in grams.iter().enumerate() {
                    if m != n && m != k {
                        term.hadamard_assign(g);
                    }
                }
                s.as_mut_slice()
                    .iter_mut()
                    .zip(term.as_slice())
                    .for_each(|(x, y)| *x += y);
            }
            let extra = a[n].matmul(&s)?;
            block
                .as_mut_slice()
                .iter_mut()
                .zip(extra.as_slice())
                .for_each(|(x, y)| *x += y);
            out.extend_from_slice(block.as_slice());
        }
        Ok(out)
    }
}
