//! Tuberculosis transmission models and a physics-guided neural ODE.
//!
//! The crate is organized bottom-up:
//!
//! * [`model`]: SLIR / SLIRT parameters, states and vector fields.
//! * [`analysis`]: R₀, equilibria, stability at the disease-free state and
//!   sensitivity indices.
//! * [`integrator`]: RK4 and Dormand–Prince 5(4) with dense output.
//! * [`neural`]: a small tanh MLP with hand-written reverse mode.
//! * [`pgnode`]: the hybrid SLIR field with neural rate modulation.
//! * [`training`]: composite loss, adjoint gradients, Adam, training loop.
//! * [`scenarios`]: the three reference experiments and their metrics.
//!
//! The guide under `book/` walks through each layer; its code listings are
//! compiled and run as doctests of this crate.

pub mod analysis;
pub mod error;
pub mod integrator;
pub mod model;
pub mod neural;
pub mod pgnode;
pub mod scenarios;
pub mod training;

pub use error::{Error, Result};
pub use model::{EpiState, ModelParams, SlirtExtension};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/analysis.md")]
    mod analysis {}
    #[doc = include_str!("../../../book/src/integrator.md")]
    mod integrator {}
    #[doc = include_str!("../../../book/src/pgnode.md")]
    mod pgnode {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/scenarios.md")]
    mod scenarios {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
