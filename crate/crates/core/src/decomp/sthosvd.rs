use crate::error::{Error, Result};
use crate::linalg::sym_eigen_desc;
use crate::matrix::Matrix;
use crate::model::TuckerModel;
use crate::tensor::DenseTensor;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Truncation {
    /// Fixed multilinear ranks, one per mode.
    Ranks(Vec<usize>),
    /// Relative Frobenius error bound ε ∈ (0, 1).
    Tolerance(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SthosvdConfig {
    pub truncation: Truncation,
    /// Mode processing order; `None` means 0, 1, …, d−1.
    pub order: Option<Vec<usize>>,
}

impl SthosvdConfig {
    pub fn tolerance(eps: f64) -> Self {
        Self {
            truncation: Truncation::Tolerance(eps),
            order: None,
        }
    }

    pub fn ranks(ranks: Vec<usize>) -> Self {
        Self {
            truncation: Truncation::Ranks(ranks),
            order: None,
        }
    }
}

/// `Y_(n) Y_(n)ᵀ` computed directly from the storage layout.
fn mode_gram(y: &DenseTensor, n: usize) -> Matrix {
    let dims = y.dims();
    let left: usize = dims[..n].iter().product();
    let size = dims[n];
    let right: usize = dims[n + 1..].iter().product();
    let data = y.as_slice();
    let mut g = Matrix::zeros(size, size);
    for r in 0..right {
        let block = &data[r * size * left..(r + 1) * size * left];
        for i in 0..size {
            let bi = &block[i * left..(i + 1) * left];
            for j in i..size {
                let bj = &block[j * left..(j + 1) * left];
                g[(i, j)] += bi.iter().zip(bj).map(|(a, b)| a * b).sum::<f64>();
            }
        }
    }
    for i in 0..size {
        for j in 0..i {
            g[(i, j)] = g[(j, i)];
        }
    }
    g
}

/// Smallest rank whose discarded eigenvalue mass stays within `budget`.
/// A tie across the cut keeps the tied component too. Eigenvalues below the
/// Gram roundoff floor `n·ε·λ_max` count as zero.
fn rank_for_budget(eigs: &[f64], budget: f64) -> usize {
    let n = eigs.len();
    let floor = eigs[0].abs() * n as f64 * f64::EPSILON;
    let mass = |lam: f64| if lam <= floor { 0.0 } else { lam };
    let mut tail = 0.0;
    let mut rank = n;
    // Drop components from the smallest while the discarded sum fits.
    while rank > 1 {
        let next = tail + mass(eigs[rank - 1]);
        if next > budget {
            break;
        }
        tail = next;
        rank -= 1;
    }
    while rank < n {
        let (kept, dropped) = (eigs[rank - 1], eigs[rank]);
        if dropped > floor && (kept - dropped).abs() <= 1e-12 * kept.abs() {
            rank += 1;
        } else {
            break;
        }
    }
    rank
}

/// Sequentially truncated HOSVD.
///
/// Modes are processed in order; each factor holds the leading eigenvectors
/// of the Gram matrix of the partially compressed tensor, which is then
/// projected onto them. In tolerance mode every mode may discard at most
/// `ε²‖X‖²/d`, so `‖X − M‖ ≤ ε‖X‖`.
pub fn sthosvd(x: &DenseTensor, cfg: &SthosvdConfig) -> Result<TuckerModel> {
    let d = x.order();
    let norm_sq = x.norm_sq();
    if norm_sq == 0.0 {
        return Err(Error::InvalidArgument("cannot compress a zero tensor".into()));
    }
    match &cfg.truncation {
        Truncation::Tolerance(eps) => {
            if !(*eps > 0.0 && *eps < 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "ST-HOSVD tolerance {eps} outside (0, 1)"
                )));
            }
        }
        Truncation::Ranks(ranks) => {
            if ranks.len() != d {
                return Err(Error::InvalidArgument(format!(
                    "{} ranks for a {d}-way tensor",
                    ranks.len()
                )));
            }
            for (k, (&r, &i)) in ranks.iter().zip(x.dims()).enumerate() {
                if r == 0 || r > i {
                    return Err(Error::InvalidArgument(format!(
                        "rank {r} for mode {k} of size {i}"
                    )));
                }
            }
        }
    }
    let order: Vec<usize> = match &cfg.order {
        Some(o) => {
            let mut seen = vec![false; d];
            for &m in o {
                if m >= d || seen[m] {
                    return Err(Error::InvalidArgument(format!("bad mode order {o:?}")));
                }
                seen[m] = true;
            }
            if o.len() != d {
                return Err(Error::InvalidArgument(format!("bad mode order {o:?}")));
            }
            o.clone()
        }
        None => (0..d).collect(),
    };

    let mut y = x.clone();
    let mut factors: Vec<Option<Matrix>> = vec![None; d];
    for &n in &order {
        let gram = mode_gram(&y, n);
        let (eigs, vecs) = sym_eigen_desc(&gram)?;
        let rank = match &cfg.truncation {
            Truncation::Ranks(r) => r[n],
            Truncation::Tolerance(eps) => rank_for_budget(&eigs, eps * eps * norm_sq / d as f64),
        };
        let a = Matrix::from_fn(vecs.rows(), rank, |i, j| vecs[(i, j)]);
        y = y.ttm_transposed(&a, n)?;
        factors[n] = Some(a);
    }
    TuckerModel::new(y, factors.into_iter().map(|f| f.expect("every mode visited")).collect())
}
