use super::shape::ModelShape;
use crate::decomp::hadamard_of_grams;
use crate::error::Result;
use crate::linalg::Cholesky;
use crate::matrix::Matrix;

/// Smallest diagonal entry kept by the Tucker preconditioner.
pub const DIAG_FLOOR: f64 = 1e-14;

/// Approximation `P` of the Frobenius Gauss-Newton operator `JᵀJ` (no
/// weight or factor of 2), applied through `P⁻¹`.
#[derive(Debug, Clone)]
pub enum Preconditioner {
    /// CP: `P = blockdiag(Γ_n ⊗ I)`, `Γ_n = ⊛_{k≠n} A_kᵀA_k`.
    CpBlocks {
        offsets: Vec<usize>,
        rows: Vec<usize>,
        blocks: Vec<Matrix>,
        factors: Vec<Cholesky>,
    },
    /// Tucker: the exact diagonal of `JᵀJ`.
    Diagonal(Vec<f64>),
}

impl Preconditioner {
    pub fn build(shape: &ModelShape, v: &[f64]) -> Result<Self> {
        let (core, factors) = shape.parts(v)?;
        let grams: Vec<Matrix> = factors.iter().map(Matrix::gram).collect();
        let d = factors.len();
        match core {
            None => {
                let blocks: Vec<Matrix> = (0..d).map(|n| hadamard_of_grams(&grams, n)).collect();
                let chol = blocks.iter().map(factor_with_ridge).collect();
                Ok(Preconditioner::CpBlocks {
                    offsets: (0..d).map(|n| shape.factor_offset(n)).collect(),
                    rows: shape.dims().to_vec(),
                    blocks,
                    factors: chol,
                })
            }
            Some(g) => {
                let mut diag = Vec::with_capacity(shape.len());
                let ranks = g.dims().to_vec();
                let mut idx = vec![0usize; d];
                for _ in 0..g.len() {
                    diag.push((0..d).map(|k| grams[k][(idx[k], idx[k])]).product());
                    crate::kernels::advance(&mut idx, &ranks);
                }
                for n in 0..d {
                    let mut h = g.clone();
                    for (k, gram) in grams.iter().enumerate() {
                        if k != n {
                            h = h.ttm(gram, k)?;
                        }
                    }
                    let hn = h.matricize(n)?;
                    let gn = g.matricize(n)?;
                    let entries: Vec<f64> = (0..ranks[n])
                        .map(|r| crate::matrix::dot(&hn.row(r), &gn.row(r)))
                        .collect();
                    for &e in &entries {
                        diag.extend(std::iter::repeat_n(e, shape.dims()[n]));
                    }
                }
                diag.iter_mut().for_each(|e| *e = e.max(DIAG_FLOOR));
                Ok(Preconditioner::Diagonal(diag))
            }
        }
    }

    /// `P⁻¹·r`.
    pub fn apply(&self, r: &[f64]) -> Vec<f64> {
        match self {
            Preconditioner::Diagonal(d) => r.iter().zip(d).map(|(x, p)| x / p).collect(),
            Preconditioner::CpBlocks {
                offsets,
                rows,
                factors,
                ..
            } => {
                let mut out = r.to_vec();
                let mut row = Vec::new();
                for (n, chol) in factors.iter().enumerate() {
                    let (o, i_n) = (offsets[n], rows[n]);
                    let rank = chol.dim();
                    row.resize(rank, 0.0);
                    for i in 0..i_n {
                        for (c, x) in row.iter_mut().enumerate() {
                            *x = out[o + i + c * i_n];
                        }
                        chol.solve_in_place(&mut row);
                        for (c, x) in row.iter().enumerate() {
                            out[o + i + c * i_n] = *x;
                        }
                    }
                }
                out
            }
        }
    }

    /// `P·w`.
    pub fn multiply(&self, w: &[f64]) -> Vec<f64> {
        match self {
            Preconditioner::Diagonal(d) => w.iter().zip(d).map(|(x, p)| x * p).collect(),
            Preconditioner::CpBlocks {
                offsets,
                rows,
                blocks,
                ..
            } => {
                let mut out = vec![0.0; w.len()];
                for (n, b) in blocks.iter().enumerate() {
                    let (o, i_n, rank) = (offsets[n], rows[n], b.rows());
                    let wn = Matrix::from_col_major(i_n, rank, w[o..o + i_n * rank].to_vec())
                        .expect("sized block");
                    let prod = wn.matmul(b).expect("R x R block");
                    out[o..o + i_n * rank].copy_from_slice(prod.as_slice());
                }
                out
            }
        }
    }
}

/// Cholesky of `s`, adding a ridge of `1e-12·trace(s)` (grown tenfold until it
/// succeeds) when `s` is numerically singular.
fn factor_with_ridge(s: &Matrix) -> Cholesky {
    if let Some(c) = Cholesky::factor(s) {
        return c;
    }
    let mut ridge = 1e-12 * s.trace().abs().max(f64::MIN_POSITIVE);
    loop {
        let mut t = s.clone();
        for i in 0..t.rows() {
            t[(i, i)] += ridge;
        }
        if let Some(c) = Cholesky::factor(&t) {
            return c;
        }
        ridge *= 10.0;
    }
}
