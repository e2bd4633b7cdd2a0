use crate::error::{Error, Result};
use crate::tensor::DenseTensor;
use serde::{Deserialize, Serialize};

/// Scale below which a variable is treated as constant and left unscaled.
pub const SIGMA_FLOOR: f64 = 1e-14;

/// Per-variable affine scaling `x̃ = (x − μ(v)) / σ(v)` along one mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingInfo {
    variable_mode: usize,
    mu: Vec<f64>,
    sigma: Vec<f64>,
}

impl ScalingInfo {
    pub fn new(variable_mode: usize, mu: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        if mu.len() != sigma.len() || mu.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "{} shifts and {} scales",
                mu.len(),
                sigma.len()
            )));
        }
        if let Some(s) = sigma.iter().find(|&&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidArgument(format!("scale {s} is not positive")));
        }
        if mu.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidArgument("non-finite shift".into()));
        }
        Ok(Self {
            variable_mode,
            mu,
            sigma,
        })
    }

    /// `μ = 0`, `σ = 1` for `nvars` variables.
    pub fn identity(variable_mode: usize, nvars: usize) -> Self {
        Self {
            variable_mode,
            mu: vec![0.0; nvars],
            sigma: vec![1.0; nvars],
        }
    }

    /// Mean and population standard deviation of each variable slice.
    pub fn compute(x: &DenseTensor, variable_mode: usize) -> Result<Self> {
        x.check_mode(variable_mode)?;
        let nv = x.dims()[variable_mode];
        let stride: usize = x.dims()[..variable_mode].iter().product();
        let count = (x.len() / nv) as f64;
        let mut mu = vec![0.0; nv];
        for (c, chunk) in x.as_slice().chunks(stride).enumerate() {
            mu[c % nv] += chunk.iter().sum::<f64>();
        }
        mu.iter_mut().for_each(|m| *m /= count);
        let mut var = vec![0.0; nv];
        for (c, chunk) in x.as_slice().chunks(stride).enumerate() {
            let m = mu[c % nv];
            var[c % nv] += chunk.iter().map(|v| (v - m) * (v - m)).sum::<f64>();
        }
        let sigma = var
            .iter()
            .map(|v| {
                let s = (v / count).sqrt();
                if s < SIGMA_FLOOR {
                    1.0
                } else {
                    s
                }
            })
            .collect();
        Ok(Self {
            variable_mode,
            mu,
            sigma,
        })
    }

    pub fn variable_mode(&self) -> usize {
        self.variable_mode
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn is_identity(&self) -> bool {
        self.mu.iter().all(|&m| m == 0.0) && self.sigma.iter().all(|&s| s == 1.0)
    }

    /// Applies `f(value, v)` to every entry of a tensor whose mode
    /// `variable_mode` indexes the variables; works for full tensors and for
    /// time slices alike.
    fn map(&self, x: &DenseTensor, f: impl Fn(f64, usize) -> f64) -> Result<DenseTensor> {
        let dims = x.dims();
        if self.variable_mode >= dims.len() || dims[self.variable_mode] != self.mu.len() {
            return Err(Error::DimensionMismatch(format!(
                "scaling for {} variables along mode {} does not fit dims {dims:?}",
                self.mu.len(),
                self.variable_mode
            )));
        }
        let stride: usize = dims[..self.variable_mode].iter().product();
        let nv = self.mu.len();
        let mut out = x.clone();
        for (c, chunk) in out.as_mut_slice().chunks_mut(stride).enumerate() {
            let v = c % nv;
            chunk.iter_mut().for_each(|e| *e = f(*e, v));
        }
        Ok(out)
    }

    /// `x̃ = (x − μ) / σ`.
    pub fn apply(&self, x: &DenseTensor) -> Result<DenseTensor> {
        self.map(x, |e, v| (e - self.mu[v]) / self.sigma[v])
    }

    /// `x = σ·x̃ + μ`; the map `S`. Accepts a full tensor or a time slice.
    pub fn unscale(&self, x: &DenseTensor) -> Result<DenseTensor> {
        self.map(x, |e, v| self.sigma[v] * e + self.mu[v])
    }

    /// Chain rule through `S`: `σ(v)·Z`.
    pub fn chain_scale(&self, z: &DenseTensor) -> Result<DenseTensor> {
        self.map(z, |e, v| self.sigma[v] * e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_population_std() {
        // Variable mode 1; variable 0 holds {1, 3}, variable 1 is constant 5.
        let x = DenseTensor::from_vec(&[2, 2], vec![1.0, 3.0, 5.0, 5.0]).unwrap();
        let s = ScalingInfo::compute(&x, 1).unwrap();
        assert_eq!(s.mu(), &[2.0, 5.0]);
        assert_eq!(s.sigma(), &[1.0, 1.0]);
        let y = s.apply(&x).unwrap();
        assert_eq!(y.as_slice(), &[-1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn affine_arithmetic() {
        let s = ScalingInfo::new(0, vec![3.0], vec![2.0]).unwrap();
        let m = DenseTensor::from_vec(&[1], vec![1.0]).unwrap();
        assert_eq!(s.unscale(&m).unwrap().as_slice(), &[5.0]);
        let z = DenseTensor::from_vec(&[1], vec![7.0]).unwrap();
        assert_eq!(s.chain_scale(&z).unwrap().as_slice(), &[14.0]);
        let id = ScalingInfo::identity(0, 1);
        assert!(id.is_identity());
        assert_eq!(id.unscale(&z).unwrap(), z);
        assert_eq!(id.chain_scale(&z).unwrap(), z);
    }

    #[test]
    fn round_trip() {
        let x = DenseTensor::from_fn(&[3, 4, 5, 2], |i| {
            (i[0] as f64 + 0.3 * i[1] as f64).sin() * (1.0 + 10.0 * i[2] as f64) + i[3] as f64
        })
        .unwrap();
        let s = ScalingInfo::compute(&x, 2).unwrap();
        let back = s.unscale(&s.apply(&x).unwrap()).unwrap();
        let err = x.dist_sq(&back).unwrap().sqrt() / x.frob_norm();
        assert!(err <= 1e-13, "{err}");
        // Slices share the variable mode position.
        let slice = s.apply(&x).unwrap().time_slice(1).unwrap();
        let unscaled = s.unscale(&slice).unwrap();
        assert!(unscaled.dist_sq(&x.time_slice(1).unwrap()).unwrap().sqrt() <= 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ScalingInfo::new(0, vec![0.0], vec![0.0]).is_err());
        assert!(ScalingInfo::new(0, vec![0.0, 1.0], vec![1.0]).is_err());
        let s = ScalingInfo::identity(1, 3);
        assert!(s.apply(&DenseTensor::zeros(&[2, 2]).unwrap()).is_err());
    }
}
