//! Hidden Markov models whose hidden states live on the nodes of rooted
//! trees, with a joint (coupled) distribution over each node's child states.
//!
//! * [`tree`] and [`observation`]: tree shapes and observed forests.
//! * [`model`]: initial distribution, one transition tensor per branching
//!   factor, categorical or Gaussian emissions.
//! * [`inference`]: upward/downward recursions, unscaled and scaled.
//! * [`decoding`]: most probable hidden tree and posterior argmax.
//! * [`learning`]: parameter fitting by expectation-maximization.
//! * [`oracle`]: brute-force enumeration for small trees.
//! * [`simulate`] and [`selfcheck`]: sampling and lineage-correlation checks.

pub mod cli;
pub mod decoding;
pub mod error;
pub mod inference;
pub mod io;
pub mod learning;
pub mod model;
pub mod observation;
pub mod oracle;
pub mod selfcheck;
pub mod simulate;
pub mod tree;

pub use error::{HmtError, Result};
pub use model::{Emission, HmtModel, TransitionTensor};
pub use observation::{Forest, Observation, ObservationKind, Observations, ObservedTree};
pub use tree::{NodeId, Tree};
