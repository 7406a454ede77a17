//! Least-squares and collocation RBF-FD solvers for elliptic problems on
//! irregular domains.

pub mod assembly;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod kdtree;
pub mod linalg;
pub mod local_weights;
pub mod nodes;
pub mod problems;
pub mod solver;
pub mod sparse;
pub mod stencil;

pub use assembly::{AssemblyOptions, GlobalSystem, Pde, ScalingSpec};
pub use error::{Error, Result};
pub use geometry::{BcMode, BoundaryClass, BoundaryParam, Domain, Point, RegionMeasures};
pub use kdtree::KdTree;
pub use local_weights::{LocalSystem, Operator, PhsBasis};
pub use nodes::{EvaluationSet, NodeKind, NodeSet, SpacingReport};
pub use problems::{ExactSolution, Problem};
pub use solver::{RefinementPolicy, Solution, SpectralReport};
pub use sparse::CsrMatrix;
pub use stencil::StencilTable;
