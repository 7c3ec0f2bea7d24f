//! Density estimation with functional tensor trains built from low-order marginals,
//! optionally refined by a continuous-time potential flow.

pub mod basis;
pub mod cde;
pub mod error;
pub mod experiment;
pub mod flow;
pub mod json;
pub mod linalg;
pub mod marginal;
pub mod pipeline;
pub mod samples;
pub mod targets;
pub mod tt;

pub use basis::{gauss_legendre, BasisSpec, Interval, QuadratureRule};
pub use error::{Error, Result};
pub use samples::SampleSet;
pub use tt::{BaseDensity, FunctionalTT, SquaredTT};
