//! Upper bounds on the capacity of two-dimensional constrained systems via
//! concave programs over stationary patch distributions.

pub mod constraint;
pub mod error;
pub mod lattice;
pub mod patches;
pub mod program;
pub mod scheme;
pub mod solver;
pub mod stripe;

pub use constraint::{ConstraintSpec, Symmetry, SymmetryFlag};
pub use error::{Error, Result};
pub use lattice::{Cell, Configuration, IndexSet, TotalOrder};
pub use patches::{enumerate_patches, marginal_map, MarginalMap, PatchCache, PatchSet};
pub use program::{assemble_program, assemble_with_system, build_linear_system, ConcaveProgram, LinearSystem, RowTag};
pub use scheme::{simple_scheme, validate_scheme, Scheme, SchemeTerm};
pub use solver::{certify_bound, solve_concave, SolveOptions, SolveResult, SolveStatus};
pub use stripe::{build_transfer_graph, perron_eigenvalue, stripe_upper_bound, TransferGraph};
