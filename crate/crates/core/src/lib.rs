//! Exact spacetime metrics, forward-mode jets and curvature, plus compact neural
//! metric fields trained with derivative supervision.

pub mod charts;
pub mod diffgeo;
pub mod error;
pub mod eval;
pub mod field;
pub mod geodesics;
pub mod gw;
pub mod jet;
pub mod nn;
pub mod ode;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
