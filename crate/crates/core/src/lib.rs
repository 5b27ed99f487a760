//! Volume-preserving minimizing movements for planar sets, with boundary,
//! flow and regularity diagnostics.

pub mod boundary;
pub mod diagnostics;
pub mod distance;
pub mod error;
pub mod excess;
pub mod grid;
pub mod harnack;
pub mod intervals;
pub mod mms;
pub mod optimize;
pub mod region;
pub mod rof;
pub mod shapes;

pub use boundary::{Contour, CurvatureProfile, DiskFit};
pub use error::{Error, Result};
pub use grid::{Grid, GridField};
pub use region::Region;
