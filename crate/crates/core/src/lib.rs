//! Wildfire front propagation as lightlike geodesics of `G = dt² − F²`, where `F` is a
//! slope-and-wind Finsler metric on the terrain's aerial chart.

pub mod cli;
pub mod error;
pub mod fields;
pub mod front;
pub mod geodesic;
pub mod geom;
pub mod metric;
pub mod oracle;
pub mod terrain;

pub use error::{Error, Result};
