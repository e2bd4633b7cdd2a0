//! Pointwise integrands `f(u)` for finite-element QoIs. `u` holds the
//! selected variables at one quadrature point, in the order they were
//! selected.

use crate::error::{Error, Result};
use std::fmt;

/// Densities at or below this value are rejected by [`KineticEnergyDensity`].
pub const RHO_MIN: f64 = 1e-12;

pub trait Integrand: Send + Sync + fmt::Debug {
    /// Number of variables the integrand reads.
    fn arity(&self) -> usize;

    fn eval(&self, u: &[f64]) -> Result<f64>;

    /// Writes `∂f/∂u` into `out` (length [`Integrand::arity`]).
    fn grad(&self, u: &[f64], out: &mut [f64]) -> Result<()>;
}

/// Internal energy: `f = (ρe)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct InternalEnergy;

impl Integrand for InternalEnergy {
    fn arity(&self) -> usize {
        1
    }

    fn eval(&self, u: &[f64]) -> Result<f64> {
        Ok(u[0])
    }

    fn grad(&self, _u: &[f64], out: &mut [f64]) -> Result<()> {
        out[0] = 1.0;
        Ok(())
    }
}

/// Kinetic energy `f = ‖m‖²/(2ρ)`; `u = (ρ, m_1, …, m_k)`.
#[derive(Debug, Clone, Copy)]
pub struct KineticEnergyDensity {
    pub components: usize,
}

impl KineticEnergyDensity {
    fn density(u: &[f64]) -> Result<f64> {
        let rho = u[0];
        if !(rho > RHO_MIN) {
            return Err(Error::Numeric(format!(
                "kinetic energy needs density above {RHO_MIN}, got {rho}"
            )));
        }
        Ok(rho)
    }
}

impl Integrand for KineticEnergyDensity {
    fn arity(&self) -> usize {
        1 + self.components
    }

    fn eval(&self, u: &[f64]) -> Result<f64> {
        let rho = Self::density(u)?;
        let m2: f64 = u[1..].iter().map(|m| m * m).sum();
        Ok(m2 / (2.0 * rho))
    }

    fn grad(&self, u: &[f64], out: &mut [f64]) -> Result<()> {
        let rho = Self::density(u)?;
        let m2: f64 = u[1..].iter().map(|m| m * m).sum();
        out[0] = -m2 / (2.0 * rho * rho);
        for (o, m) in out[1..].iter_mut().zip(&u[1..]) {
            *o = m / rho;
        }
        Ok(())
    }
}

/// Magnetic energy `f = ‖B‖²/(2μ₀)`; `u = (B_1, …, B_k)`.
#[derive(Debug, Clone, Copy)]
pub struct MagneticEnergy {
    pub components: usize,
    pub mu0: f64,
}

impl Integrand for MagneticEnergy {
    fn arity(&self) -> usize {
        self.components
    }

    fn eval(&self, u: &[f64]) -> Result<f64> {
        Ok(u.iter().map(|b| b * b).sum::<f64>() / (2.0 * self.mu0))
    }

    fn grad(&self, u: &[f64], out: &mut [f64]) -> Result<()> {
        for (o, b) in out.iter_mut().zip(u) {
            *o = b / self.mu0;
        }
        Ok(())
    }
}

/// Squared momentum `f = ‖m‖²`; `u = (m_1, …, m_k)`.
#[derive(Debug, Clone, Copy)]
pub struct MomentumSquared {
    pub components: usize,
}

impl Integrand for MomentumSquared {
    fn arity(&self) -> usize {
        self.components
    }

    fn eval(&self, u: &[f64]) -> Result<f64> {
        Ok(u.iter().map(|m| m * m).sum())
    }

    fn grad(&self, u: &[f64], out: &mut [f64]) -> Result<()> {
        for (o, m) in out.iter_mut().zip(u) {
            *o = 2.0 * m;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_grad(f: &dyn Integrand, u: &[f64]) {
        let mut g = vec![0.0; f.arity()];
        f.grad(u, &mut g).unwrap();
        for k in 0..u.len() {
            let h = 1e-6;
            let mut p = u.to_vec();
            p[k] += h;
            let mut m = u.to_vec();
            m[k] -= h;
            let fd = (f.eval(&p).unwrap() - f.eval(&m).unwrap()) / (2.0 * h);
            assert!((fd - g[k]).abs() <= 1e-7 * g[k].abs().max(1.0));
        }
    }

    #[test]
    fn gradients() {
        check_grad(&InternalEnergy, &[0.7]);
        check_grad(&KineticEnergyDensity { components: 3 }, &[1.3, 0.2, -0.5, 0.9]);
        check_grad(&MagneticEnergy { components: 3, mu0: 1.7 }, &[0.2, -0.5, 0.9]);
        check_grad(&MomentumSquared { components: 2 }, &[0.4, -1.1]);
    }

    #[test]
    fn kinetic_energy_guards_density() {
        let ke = KineticEnergyDensity { components: 1 };
        assert!(ke.eval(&[0.0, 1.0]).unwrap_err().is_numeric());
        let mut g = [0.0; 2];
        assert!(ke.grad(&[-1.0, 1.0], &mut g).is_err());
        assert_eq!(ke.eval(&[2.0, 2.0]).unwrap(), 1.0);
    }
}
