//! Optimal transport from two-dimensional sources to one-dimensional targets through nested
//! level sets of `∂c/∂y`, together with the variational problems built on top of it:
//! congestion penalties, interaction best-reply iteration and hedonic matching.

pub mod best_reply;
pub mod congestion;
pub mod cost;
pub mod domain;
pub mod error;
pub mod geometry;
pub mod hedonic;
pub mod io;
pub mod level;
pub mod nested;
pub mod oracle;
pub mod quadrature;
pub mod reproduce;
pub mod target;

pub use cost::CostModel;
pub use domain::{Density, Domain, Region, SourceMeasure};
pub use error::{Error, Result};
pub use geometry::Pt;
pub use level::{level_integral, mass_to_k, superlevel_mass, LevelCurve, LevelWeight};
pub use target::TargetDensity;
