//! Accelerated (momentum) curve evolution for active contours.
//!
//! Two interchangeable backends evolve a closed contour towards a minimiser of
//! an image energy: explicit marker curves ([`geometry`], [`flows`]) and
//! implicit level-set grids ([`levelset`]). Both provide plain gradient
//! descent and two second-order flows derived from a time-weighted action:
//! a constant-density model that needs curvature, and a flowable-mass model
//! that transports density along the curve.

pub mod compare;
pub mod energies;
pub mod error;
pub mod flows;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod levelset;
pub mod scene;
pub mod vec2;
pub mod verify;

pub use error::{Error, Result};
pub use vec2::Vec2;
