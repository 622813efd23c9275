//! Closed surface reconstruction as the zero level set of a scalar field.
//!
//! A discrete field on a Cartesian grid over `[-1, 1]^3` is fitted to an
//! oriented point cloud by descending a variational loss made of a distance
//! term, a normal-alignment term, a unit-gradient penalty and area/volume
//! priors. The field is positive inside the surface and negative outside.
//!
//! The pipeline is:
//!
//! 1. [`distance::sample_shape_surface`] or [`io::read_cloud`] for a target cloud,
//! 2. [`energy::Target::new`] to precompute the distance and nearest-normal fields,
//! 3. [`optimizer::fit`] to minimize [`energy::loss`],
//! 4. [`surface::marching_cubes`] to extract the zero level set,
//! 5. [`metrics`] to score against ground truth with IoU and Chamfer distance.

pub mod distance;
pub mod energy;
mod error;
pub mod gradcheck;
pub mod grid;
pub mod io;
mod mc_table;
pub mod metrics;
pub mod mollifier;
pub mod optimizer;
mod par;
pub mod spatial;
pub mod surface;

pub use error::{Error, Result};
pub use par::set_threads;

/// World-space point or vector.
pub type Vec3 = nalgebra::Vector3<f64>;
