use crate::error::{Error, Result};
use crate::kernels::mttkrp;
use crate::linalg::SpdSolver;
use crate::matrix::Matrix;
use crate::model::KruskalModel;
use crate::tensor::DenseTensor;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlsConfig {
    pub rank: usize,
    /// Stop once the fit changes by less than this between sweeps.
    pub fit_tolerance: f64,
    pub max_iterations: usize,
    pub init_seed: u64,
}

impl AlsConfig {
    pub fn new(rank: usize) -> Self {
        Self {
            rank,
            fit_tolerance: 1e-4,
            max_iterations: 100,
            init_seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AlsResult {
    pub model: KruskalModel,
    /// Fit `1 − ‖X − M‖/‖X‖` after each sweep.
    pub fit_history: Vec<f64>,
    pub iterations: usize,
    /// Set when some Gram system had to be solved by the ridged pseudo-inverse.
    pub singular_gram: bool,
}

/// Seeded uniform(0, 1) factors of a rank-`rank` model for `dims`.
pub fn random_factors(dims: &[usize], rank: usize, seed: u64) -> Vec<Matrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    dims.iter()
        .map(|&d| {
            let v = (0..d * rank).map(|_| rng.random::<f64>()).collect();
            Matrix::from_col_major(d, rank, v).expect("sized")
        })
        .collect()
}

/// Hadamard product of the Gram matrices of every factor except `skip`.
pub(crate) fn hadamard_of_grams(grams: &[Matrix], skip: usize) -> Matrix {
    let r = grams[0].rows();
    let mut v = Matrix::from_fn(r, r, |_, _| 1.0);
    for (k, g) in grams.iter().enumerate() {
        if k != skip {
            v.hadamard_assign(g);
        }
    }
    v
}

/// CP alternating least squares.
///
/// Each sweep replaces `A_n` by `MTTKRP(X, n) · (⊛_{k≠n} A_kᵀA_k)⁻¹`. The
/// fit is measured against an explicit reconstruction so the history is not
/// polluted by cancellation in the usual norm expansion. On exit the factor
/// columns of modes 1.. are unit-norm and the scale sits in mode 0.
pub fn cp_als(x: &DenseTensor, cfg: &AlsConfig) -> Result<AlsResult> {
    if cfg.rank == 0 {
        return Err(Error::InvalidArgument("CP rank must be at least 1".into()));
    }
    if !(cfg.fit_tolerance >= 0.0) {
        return Err(Error::InvalidArgument("fit tolerance must be non-negative".into()));
    }
    let norm_x = x.frob_norm();
    if norm_x == 0.0 {
        return Err(Error::InvalidArgument("cannot fit a CP model to a zero tensor".into()));
    }
    let d = x.order();
    let mut factors = random_factors(x.dims(), cfg.rank, cfg.init_seed);
    let mut grams: Vec<Matrix> = factors.iter().map(Matrix::gram).collect();
    let mut history = Vec::new();
    let mut singular = false;
    let mut fit_old = 0.0;
    let mut iterations = 0;

    for _ in 0..cfg.max_iterations {
        iterations += 1;
        for n in 0..d {
            let u = mttkrp(x, &factors, n)?;
            let v = hadamard_of_grams(&grams, n);
            let (solver, warned) = SpdSolver::new(&v);
            singular |= warned;
            factors[n] = solver.solve_rows(&u);
            grams[n] = factors[n].gram();
        }
        let m = crate::model::reconstruct_from_factors(&factors);
        let fit = 1.0 - x.dist_sq(&m)?.sqrt() / norm_x;
        if !fit.is_finite() {
            return Err(Error::Numeric("CP-ALS fit became non-finite".into()));
        }
        history.push(fit);
        let change = (fit - fit_old).abs();
        fit_old = fit;
        if change < cfg.fit_tolerance {
            break;
        }
    }

    normalize_into_first(&mut factors);
    Ok(AlsResult {
        model: KruskalModel::new(factors)?,
        fit_history: history,
        iterations,
        singular_gram: singular,
    })
}

/// Scales columns of modes 1.. to unit 2-norm and pushes the norms into mode 0.
fn normalize_into_first(factors: &mut [Matrix]) {
    let rank = factors[0].cols();
    for r in 0..rank {
        let mut weight = 1.0;
        for f in factors.iter_mut().skip(1) {
            let col = f.col_mut(r);
            let nrm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            if nrm > 0.0 {
                col.iter_mut().for_each(|v| *v /= nrm);
                weight *= nrm;
            } else {
                weight = 0.0;
            }
        }
        factors[0].col_mut(r).iter_mut().for_each(|v| *v *= weight);
    }
}
