//! Spectral engine for metric (quantum) graphs.
//!
//! The crate covers four related pieces of machinery:
//!
//! - [`graph`] and [`secular`]: metric graphs with Dirichlet, Neumann and
//!   Kirchhoff vertex conditions, and an exact eigenvalue counter/eigensolver
//!   for their Laplacians. The complete graph with pendant edges `G_N` has a
//!   closed-form low spectrum, see [`secular::reference`].
//! - [`perturbation`]: first-order calculus of the second eigenvalue cluster of
//!   `G_N` under edge-length perturbations (form derivatives, rank certificate,
//!   first eigenvalue slope).
//! - [`spectral_distance`]: transport isometries between nearby subspaces and
//!   the N-spectral difference between quadratic forms.
//! - [`prescriber`]: inverse problems (prescribed simple eigenvalues via scaled
//!   unions, prescribed cluster multiplicities via Newton on the cluster form).
//!
//! [`robin`] is a one-dimensional Sturm-Liouville lab for Robin spectra and
//! their Dirichlet limit.

pub mod bump;
pub mod cli;
pub mod edge_function;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod output;
pub mod perturbation;
pub mod prescriber;
pub mod quadrature;
pub mod robin;
pub mod secular;
pub mod spectral_distance;

pub use bump::{BumpFamily, BumpKind};
pub use edge_function::EdgeFunction;
pub use error::{Error, Result};
pub use graph::{MetricGraph, PerturbationPoint, VertexCondition, VertexKind};
pub use perturbation::QuadForm;
pub use secular::{find_eigenvalues, ScanConfig, SpectralCluster};
