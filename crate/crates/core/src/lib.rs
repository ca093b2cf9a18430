//! Linear quantum stochastic networks.
//!
//! - [`model`]: oscillator specs and the state-space models they induce.
//! - [`network`]: series/scattering composition and internal-channel
//!   elimination.
//! - [`dsl`]: the `.qnet` block-diagram language and its compiler.
//! - [`observer`]: classical and coherent Luenberger observer constructions.
//! - [`dynamics`]: moment integration, propagators and spectral analysis.

pub mod dsl;
pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod model;
pub mod network;
pub mod observer;
pub mod scenario;

pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector};
pub use model::{derive_state_space, make_mode, realizability_residual, Coupling, CouplingKind, OscillatorSpec, StateSpace};
pub use network::{beamsplitter_5050, Block, ComposedNetwork, StaticComponent};
