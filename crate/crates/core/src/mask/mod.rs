//! Prior-space collision masks.
//!
//! The prior is cut into `K^4` equal-probability cells. For every atomic map
//! (one disc of radius `r_atom` on a body-frame lattice) the cache stores one
//! bit per cell: set when the primitive generated from the cell's centroid
//! collides with that disc. Online, a world is over-covered by atomic maps,
//! their bit arrays are OR-ed, and prior draws falling in a set cell are
//! rejected before the flow is evaluated.

mod cache;
mod decompose;
mod grid;

pub use cache::{build_cache, BuildConfig, CacheSummary, MaskCache, PrimitiveSource, RejectMask, CACHE_MAGIC, CACHE_VERSION};
pub use decompose::decompose;
pub use grid::{AtomicGrid, InputGrid, MAX_BINS};
