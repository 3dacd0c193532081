//! Decay majorants, `l^p` duality geometry and dual-space evolution solvers.

pub mod error;
pub mod evolution;
pub mod geometry;
pub mod grid;
pub mod harness;
pub mod rate_bounds;
pub mod scalar;

pub use error::{Error, Result};
pub use grid::{Spacing, TimeGrid};
pub use scalar::ScalarFn;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/majorants.md")]
    mod majorants {}
    #[doc = include_str!("../../../book/src/oracle.md")]
    mod oracle {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/evolution.md")]
    mod evolution {}
    #[doc = include_str!("../../../book/src/harness.md")]
    mod harness {}
}
