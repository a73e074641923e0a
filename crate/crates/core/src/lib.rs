//! Conformal rulers: extracting the total central charge and edge
//! cross-ratios of gapped 2+1D ground states from entanglement entropies and
//! modular Hamiltonians.
//!
//! State backends implement [`ruler::StateBackend`]:
//! [`gaussian::GaussianBackend`] (free fermions, including the lattice `p + ip`
//! superconductor), [`pairstates::PairStateBackend`], [`cftmodel::CftBackend`]
//! and the dense reference [`edoracle::OracleBackend`].

pub mod cftmodel;
pub mod crossratio;
pub mod edoracle;
pub mod gaussian;
pub mod lattice;
pub mod pairstates;
pub mod ruler;

pub use lattice::{ConformalRuler, Lattice, Region};
pub use ruler::{solve_c_eta, CTotEta, ModularCombo, StateBackend};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
