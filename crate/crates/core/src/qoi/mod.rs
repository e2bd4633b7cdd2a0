//! Quantities of interest.
//!
//! A QoI is a scalar functional `g` of one time slice of the *unscaled*
//! data, evaluated on a chosen set of time indices. Each functional also
//! supplies its derivative tensor `∂g/∂m`, shaped like the slice.
//!
//! Slices follow the layout `(spatial modes…, variable)`, i.e. the variable
//! mode is the last mode of a slice and the second-to-last mode of the full
//! tensor.

mod combustion;
mod fem;
mod integrands;

pub use combustion::{KineticEnergy, VariableSum};
pub use fem::{fe_qoi_eval, FeQoi, HexMesh, QuadratureRule};
pub use integrands::{
    Integrand, InternalEnergy, KineticEnergyDensity, MagneticEnergy, MomentumSquared, RHO_MIN,
};

use crate::error::{Error, Result};
use crate::tensor::DenseTensor;
use std::fmt;
use std::sync::Arc;

/// A scalar functional of one time slice and its gradient.
pub trait SliceFunctional: Send + Sync + fmt::Debug {
    fn value(&self, slice: &DenseTensor) -> Result<f64>;

    /// `∂g/∂slice`, same dims as `slice`.
    fn derivative(&self, slice: &DenseTensor) -> Result<DenseTensor>;

    /// Linear functionals have a derivative independent of the slice values.
    fn is_linear(&self) -> bool {
        false
    }
}

/// A named QoI with the time steps it is enforced on.
#[derive(Debug, Clone)]
pub struct QoiDefinition {
    name: String,
    time_set: Vec<usize>,
    functional: Arc<dyn SliceFunctional>,
}

impl QoiDefinition {
    /// `time_set` is sorted and de-duplicated; it must not be empty.
    pub fn new(
        name: impl Into<String>,
        mut time_set: Vec<usize>,
        functional: Arc<dyn SliceFunctional>,
    ) -> Result<Self> {
        time_set.sort_unstable();
        time_set.dedup();
        if time_set.is_empty() {
            return Err(Error::InvalidArgument("QoI time set is empty".into()));
        }
        Ok(Self {
            name: name.into(),
            time_set,
            functional,
        })
    }

    /// A QoI enforced on every one of `tau` time steps.
    pub fn all_times(
        name: impl Into<String>,
        tau: usize,
        functional: Arc<dyn SliceFunctional>,
    ) -> Result<Self> {
        Self::new(name, (0..tau).collect(), functional)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn time_set(&self) -> &[usize] {
        &self.time_set
    }

    pub fn functional(&self) -> &dyn SliceFunctional {
        self.functional.as_ref()
    }

    pub fn check_times(&self, tau: usize) -> Result<()> {
        match self.time_set.last() {
            Some(&t) if t >= tau => Err(Error::InvalidArgument(format!(
                "QoI '{}' uses time index {t} but the tensor has {tau} time steps",
                self.name
            ))),
            _ => Ok(()),
        }
    }

    /// `g(X_t)`.
    pub fn evaluate(&self, x: &DenseTensor, t: usize) -> Result<f64> {
        self.functional.value(&x.time_slice(t)?)
    }

    /// `∂g/∂m` at slice `t`, shaped like one slice.
    pub fn derivative(&self, x: &DenseTensor, t: usize) -> Result<DenseTensor> {
        self.functional.derivative(&x.time_slice(t)?)
    }

    /// `g(X_t)` for every `t` in the time set.
    pub fn values(&self, x: &DenseTensor) -> Result<Vec<f64>> {
        self.time_set.iter().map(|&t| self.evaluate(x, t)).collect()
    }

    /// `g(X_t)` for every time step of `x`, regardless of the time set.
    pub fn trajectory(&self, x: &DenseTensor) -> Result<Vec<f64>> {
        let tau = *x.dims().last().expect("non-empty dims");
        (0..tau).map(|t| self.evaluate(x, t)).collect()
    }

    /// `Σ_{t∈T} (g(X_t) − g(M_t))²`.
    pub fn residual_sq(&self, x: &DenseTensor, m: &DenseTensor) -> Result<f64> {
        x.check_same_dims(m)?;
        let mut s = 0.0;
        for &t in &self.time_set {
            let r = self.evaluate(x, t)? - self.evaluate(m, t)?;
            s += r * r;
        }
        Ok(s)
    }
}

/// Splits a slice's dims into (spatial size, variable count).
pub(crate) fn slice_layout(slice: &DenseTensor) -> (usize, usize) {
    let nv = *slice.dims().last().expect("non-empty dims");
    (slice.len() / nv, nv)
}

pub(crate) fn check_vars(vars: &[usize], nv: usize) -> Result<()> {
    match vars.iter().find(|&&v| v >= nv) {
        Some(v) => Err(Error::IndexOutOfRange { index: *v, size: nv }),
        None => Ok(()),
    }
}
