//! Joint first-passage-time densities of bivariate correlated diffusions
//! through constant boundaries.

pub mod cli;
pub mod convergence;
pub mod error;
pub mod model;
pub mod monte_carlo;
pub mod quad;
pub mod solver;
pub mod special;
pub mod wiener;

pub use error::{Error, Result};
pub use model::{
    Boundary, BoundaryKind, Component, DensityField, FieldMeta, GaussianTransition, GridSpec,
    Model, OuParams, WienerParams,
};
