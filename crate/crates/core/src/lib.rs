//! Quantum entropy functionals, entropy inequalities and channel capacities.
//!
//! The crate is organised bottom-up:
//!
//! - [`linalg`]: dense complex matrices, Hermitian eigendecomposition,
//!   Kronecker products and partial traces.
//! - [`qstate`]: density operators, pure states, ensembles, purifications
//!   and seeded random sampling.
//! - [`channel`]: CPTP maps in Kraus and measure-and-prepare form.
//! - [`entropy`]: von Neumann and relative entropy, conditional entropy and
//!   the channel mutual information.
//! - [`inequalities`]: slack-reporting checkers for the entropy inequalities
//!   and a deterministic fuzz driver.
//! - [`capacity`]: Holevo and entanglement-assisted capacity estimation and
//!   the bound checks built on them.
//! - [`cli`]: the batch runner behind the `qentropy` binary.
//!
//! All entropies are in bits.

pub mod capacity;
pub mod channel;
pub mod cli;
pub mod entropy;
pub mod error;
pub mod inequalities;
pub mod json;
pub mod linalg;
pub mod qstate;

pub use error::{Error, Result};
