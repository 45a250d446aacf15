//! Numerical operator layer: eigenvalues of finite metric graphs, radial
//! shooting, deficiency elements and the Sobolev-ratio witness.

pub mod edge;
pub mod secular;
pub mod shooting;
pub mod witness;

pub use edge::{sobolev_ratio, EdgeSolution, FunctionNorms, Mode};
pub use secular::{
    boundary_conditions, dirichlet_vs_neumann, expand, first_eigenvalues, secular_eigenvalues, Eigenpair,
    PairedEigenvalue, VertexCondition,
};
pub use shooting::{
    deficiency_element, deficiency_space, transfer_matrix, DeficiencySpace, Layer, LayeredSolution,
};
pub use witness::{witness_nonclosed, WitnessReport, WitnessRow};
