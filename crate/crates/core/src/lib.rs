//! Isometric embeddings viewed as stationary compressible fluids.

pub mod characteristics;
pub mod chart;
pub mod error;
pub mod fluid2d;
pub mod geometry;
pub mod grid;
pub mod jet;
pub mod linalg;
pub mod multid;
pub mod renorm;
pub mod report;
pub mod scalar;

pub use chart::{builtin_chart, eval_jet, finite_difference_jet, BuiltinChart, Chart, Jet3, JetMode};
pub use error::{Error, Result};
pub use geometry::{geometry_at, GeometryState};
pub use grid::Grid;
pub use jet::Jet;
pub use report::ResidualReport;
pub use scalar::Real;

/// Library version recorded in exported reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type Jet64 = Jet<f64>;
pub type Jet32 = Jet<f32>;
pub type GeometryState64 = GeometryState<f64>;
pub type Grid64 = Grid<f64>;
