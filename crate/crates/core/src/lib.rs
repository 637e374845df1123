//! Markov-branching random trees: exact samplers, splitting laws, the
//! marked-leaf chain and small-instance tree metrics.

pub mod ensembles;
pub mod cuttree;
pub mod error;
pub mod mb;
pub mod growth;
pub mod leafchain;
pub mod metric;
pub mod gw;
pub mod quad;
pub mod rng;
pub mod splitting;
pub mod stats;
pub mod tree;

pub use error::{Error, Result};
pub use tree::{CanonicalCode, RootedTree};
