//! Spectra of compact metric graphs and discrete graph Hamiltonians, and
//! the spectral shift produced by edge switches and related rewirings.

pub mod discrete;
pub mod ensemble;
pub mod error;
pub mod fixtures;
pub mod graph;
pub mod linalg;
pub mod metric;
pub mod oracle;
pub mod perturbation;
pub mod shift;
pub mod transform;

pub use discrete::{DiscreteGraph, HermitianOperator};
pub use error::{Error, Result};
pub use graph::{BoundaryCondition, Edge, EdgeEndpoint, EdgeId, End, MetricGraph, Vertex, VertexId};
pub use transform::Transformation;
pub use metric::{MetricSolver, Spectrum};
