//! No-U-Turn sampling with an iterative, `O(depth)`-memory tree builder.
//!
//! The iterative builder in [`tree_iterative`] replaces the usual recursive
//! doubling procedure with a loop over leaf indices, storing only the even
//! leaves that later U-turn checks need. The recursive form in
//! [`tree_recursive`] is kept alongside as a reference; both produce
//! bitwise-identical trees for the same inputs.

pub mod adapt;
pub mod chains;
pub mod diagnostics;
pub mod error;
pub mod integrator;
pub mod model;
pub mod oracle;
pub mod report;
pub mod rng;
pub mod sampler;
pub mod tree;
pub mod tree_iterative;
pub mod tree_recursive;
pub mod treemath;

pub use error::{Error, Result};
pub use integrator::{MassMatrix, PhasePoint};
pub use model::{BuiltinModel, ModelDescriptor, TargetModel};
pub use rng::RngKey;
pub use tree::{Criterion, Tree, TreeContext};
