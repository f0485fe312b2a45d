//! Test support for hiereval: random fixtures and reference implementations
//! that work on plain boolean grids and never call into the library.

pub mod fixture;
pub mod oracle;
pub mod raster;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
