//! Nonconforming P3 / discontinuous P2 mixed finite elements for the 3D
//! stationary Stokes equations on tetrahedral meshes.
//!
//! The velocity space enriches continuous vector P3 with nine P4 bubbles
//! per tetrahedron. Each bubble has vanishing P2 moments on the element faces
//! and a P2 divergence, so discrete velocities are pointwise
//! divergence-free. The pressure space is discontinuous P2 with zero mean.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod assembly;
pub mod element;
pub mod error;
pub mod mesh;
pub mod poly;
pub mod quadrature;
pub mod reference;
pub mod solver;
pub mod spaces;
pub mod sparse;
pub mod verify;

pub use analysis::{convergence_study, ConvergenceReport, ExactSolution};
pub use assembly::{apply_dirichlet, assemble_constrained, ConstrainedSystem, SaddleSystem};
pub use error::{Error, Result};
pub use mesh::{build_cube_mesh, level_mesh, Point, TetMesh};
pub use solver::{infsup_constant, solve_stokes, Solution, SolverConfig};
pub use sparse::CsrMatrix;
