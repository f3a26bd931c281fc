//! Reconstruction of discrete state-space models `x(k+1) = A x(k) + B phi(k dt)`,
//! `y(k) = C x(k)` from observed time series, with the forcing basis `phi`
//! chosen by the kind of symmetry relating pieces of the reconstructed attractor.
//!
//! The usual flow is [`embedding`] → [`symmetry`] → [`identify`] → [`validate`],
//! with [`dynamics`] supplying reference systems, simulation and bundled models.

pub mod cli;
pub mod dynamics;
pub mod embedding;
pub mod error;
pub mod identify;
pub mod io;
mod neighbors;
pub mod series;
pub mod symmetry;
pub mod validate;

pub use embedding::{delay_embed, DelayEmbedding};
pub use error::{Error, Result};
pub use identify::{fit_model, BasisTerm, FitOptions, FitReport, ForcingBasis, StateSpaceModel};
pub use series::TimeSeries;
pub use symmetry::{classify_symmetry, ga_search, GaConfig, SymmetryReport, SymmetryTransform, TransformClass};
