//! Normalizing-flow motion primitive planning with prior-space collision
//! masking, an MPPI baseline, and a seeded benchmark harness.

mod codec;
pub mod error;
pub mod experiments;
pub mod flow;
pub mod geometry;
pub mod harness;
mod linalg;
pub mod mask;
pub mod mppi;
pub mod planner;
pub mod primitives;
pub mod vehicle;

pub use error::{Error, Result};
