//! Spherical normal distribution on the unit hypersphere.
//!
//! - [`geometry`]: distance, tangent projection, exponential and log maps.
//! - [`sn`]: density, normalizing constant, finite differences, sampling.
//! - [`estimate`]: weighted Fréchet mean and concentration MLE.
//! - [`mixture`]: EM for finite SN mixtures, information criteria.
//! - [`metrics`]: Rand, Jaccard, NMI; k-means and spherical k-means.
//! - [`io`]: CSV datasets, label files and JSON documents.
//! - [`simulate`], [`bench`], [`cli`]: experiment generators and the
//!   command-line surface.

pub mod bench;
pub mod cli;
pub mod error;
pub mod estimate;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod mixture;
pub mod quadrature;
pub mod simulate;
pub mod sn;

pub use error::{Error, Result};
pub use geometry::{SpherePoint, TangentVector};
pub use sn::SnParams;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used for every seeded computation in the crate.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent sub-seed for `stream` under a master seed (splitmix64 mix).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
