//! Goal-oriented low-rank tensor decompositions.
//!
//! Fits CP and Tucker models to dense space × variable × time tensors so
//! that both the element-wise error and the error in user-defined scalar
//! quantities of interest (QoIs) stay small. The pieces are:
//!
//! * [`tensor`], [`matrix`], [`kernels`], [`model`]: storage and the
//!   multilinear kernels.
//! * [`decomp`]: CP-ALS and ST-HOSVD initial fits.
//! * [`qoi`]: QoI functionals and their derivative tensors, including
//!   finite-element integrals on hexahedral meshes.
//! * [`goal`]: the weighted penalty objective with analytic gradients,
//!   Gauss-Newton Hessian-vector products and preconditioners.
//! * [`optimize`]: L-BFGS and trust-region Newton with truncated CG.
//! * [`pipeline`]: file formats, synthetic data, configuration and the
//!   end-to-end driver.

// NaN-rejecting guards are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod decomp;
pub mod error;
pub mod goal;
pub mod kernels;
pub mod linalg;
pub mod matrix;
pub mod model;
pub mod optimize;
pub mod pipeline;
pub mod qoi;
pub mod tensor;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use model::{KruskalModel, Model, TuckerModel};
pub use tensor::{frob_err, DenseTensor};
