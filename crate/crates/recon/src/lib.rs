//! Exact graph reconstruction from distance queries, with query accounting.
//!
//! A hidden graph sits behind a counting [`oracle::DistanceOracle`]; the
//! algorithms in [`tree`], [`chordal`], [`kchordal`] and [`treelength`]
//! recover its edge set, and [`registry`] selects one by name at runtime.

pub mod chordal;
pub mod decomposition;
pub mod generators;
pub mod graph;
pub mod kchordal;
pub mod lower_bound;
pub mod oracle;
pub mod registry;
pub mod result;
pub mod tree;
pub mod treelength;

pub use graph::{Graph, Vertex};
pub use oracle::{DistanceOracle, DistanceQuery};

pub use registry::{Reconstructor, Registry};
pub use result::{ReconError, ReconParams, ReconstructionResult};
