//! Exact computation of the degree sequence deg(fⁿ) of birational maps of
//! projective N-space, by three mutually cross-checking methods:
//!
//! - brute-force minimal-lift iteration with declared-factor stripping,
//! - local-index / proper-pull-back iteration against blow-up charts,
//! - integer matrix powers on the divisor-class group.
//!
//! All arithmetic is exact over the rationals. Builtin fixtures (three
//! worked plane maps and a generic quadratic map) serve as golden data for
//! the acceptance suite; see the `fixtures` module and the `birdeg` CLI.

pub mod blowup;
pub mod dynamics;
pub mod fixtures;
pub mod picard;
pub mod poly;
pub mod ratmap;
pub mod runner;

pub use poly::{MultiPoly, Rat};
pub use ratmap::{BirationalMapDescriptor, ProjectivePoint};
