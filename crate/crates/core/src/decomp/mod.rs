//! Classic fits used to seed the goal-oriented optimization.

mod als;
mod sthosvd;

pub use als::{cp_als, random_factors, AlsConfig, AlsResult};
pub(crate) use als::hadamard_of_grams; // shared with the CP preconditioner
pub use sthosvd::{sthosvd, SthosvdConfig, Truncation};
