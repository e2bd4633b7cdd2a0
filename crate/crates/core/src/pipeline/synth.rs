use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::KruskalModel;
use crate::tensor::DenseTensor;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Low-rank-plus-noise test data.
///
/// One ChaCha8 stream seeded with `seed` first fills the CP factors mode by
/// mode (column-major, uniform on [0, 1)), then draws one standard normal
/// per tensor entry. The tensor is
/// `X = X_lr + η·‖X_lr‖/√N · E`, so the noise has Frobenius norm about
/// `η·‖X_lr‖`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub dims: Vec<usize>,
    pub rank: usize,
    pub noise: f64,
    pub seed: u64,
}

pub fn synth_generate(spec: &SynthSpec) -> Result<DenseTensor> {
    if !(spec.noise >= 0.0) || !spec.noise.is_finite() {
        return Err(Error::InvalidArgument(format!("noise level {} must be non-negative", spec.noise)));
    }
    if spec.dims.is_empty() || spec.dims.contains(&0) {
        return Err(Error::InvalidArgument(format!("invalid dims {:?}", spec.dims)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let factors = spec
        .dims
        .iter()
        .map(|&d| {
            let v = (0..d * spec.rank).map(|_| rng.random::<f64>()).collect();
            Matrix::from_col_major(d, spec.rank, v)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut x = KruskalModel::new(factors)?.reconstruct();
    if spec.noise > 0.0 {
        let scale = spec.noise * x.frob_norm() / (x.len() as f64).sqrt();
        for e in x.as_mut_slice() {
            let n: f64 = rng.sample(StandardNormal);
            *e += scale * n;
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomp::{cp_als, AlsConfig};
    use crate::tensor::frob_err;

    fn spec(noise: f64) -> SynthSpec {
        SynthSpec {
            dims: vec![6, 5, 4, 7],
            rank: 3,
            noise,
            seed: 11,
        }
    }

    #[test]
    fn deterministic_and_validated() {
        assert_eq!(synth_generate(&spec(0.01)).unwrap(), synth_generate(&spec(0.01)).unwrap());
        assert_ne!(synth_generate(&spec(0.01)).unwrap(), synth_generate(&SynthSpec { seed: 12, ..spec(0.01) }).unwrap());
        assert!(synth_generate(&spec(-1.0)).is_err());
    }

    #[test]
    fn noise_level_is_relative() {
        let clean = synth_generate(&spec(0.0)).unwrap();
        let noisy = synth_generate(&spec(0.05)).unwrap();
        let rel = frob_err(&clean, &noisy).unwrap();
        assert!((rel - 0.05).abs() < 0.01, "{rel}");
    }

    #[test]
    fn exact_recovery_without_noise() {
        let x = synth_generate(&spec(0.0)).unwrap();
        let cfg = AlsConfig {
            fit_tolerance: 1e-12,
            max_iterations: 1000,
            ..AlsConfig::new(3)
        };
        let best = (0..5)
            .map(|seed| {
                let r = cp_als(&x, &AlsConfig { init_seed: seed, ..cfg.clone() }).unwrap();
                frob_err(&x, &r.model.reconstruct()).unwrap()
            })
            .fold(f64::INFINITY, f64::min);
        assert!(best <= 1e-6, "{best}");
    }
}
