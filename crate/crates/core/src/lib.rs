//! Anisotropic p-Laplacian fundamental frequencies on planar domains.
//!
//! Quadratic forms and their classes, domain geometry, P1 meshes, a discrete
//! eigenvalue solver and extremal searches over rotated forms.

pub mod geometry;
pub mod linalg;
pub mod mesh;
pub mod optimizer;
pub mod quadform;
pub mod solver;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Form(#[from] quadform::FormError),
    #[error(transparent)]
    Geometry(#[from] geometry::GeometryError),
    #[error(transparent)]
    Mesh(#[from] mesh::MeshError),
    #[error(transparent)]
    Solver(#[from] solver::SolverError),
    #[error(transparent)]
    Optimize(#[from] optimizer::OptimizeError),
}
