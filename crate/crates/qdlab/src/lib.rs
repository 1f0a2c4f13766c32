//! Computational laboratory for quasi-decaying measures.
//!
//! Exact rational arithmetic is used wherever an identity is being checked
//! (covolumes, Pluecker coordinates, shortest vectors, the simplex lemma);
//! floating point is used for Monte Carlo estimation. The two tracks never
//! mix implicitly: conversions go through [`rational`].

pub mod decay;
pub mod dioph;
pub mod error;
pub mod flags;
pub mod geometry;
pub mod homdyn;
pub mod lattice;
pub mod linalg;
pub mod measures;
pub mod plucker;
pub mod poly;
pub mod rational;
pub mod stats;
pub mod suites;

pub use error::{Error, Result};
pub use rational::Q;

/// Seeded generator used everywhere randomness is needed.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Generator for worker `stream` of a run seeded with `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> Rng {
    use rand::SeedableRng;
    let mut rng = Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
