//! Entropy of saturated sets for ℤ and ℤ² actions on subshifts.
//!
//! The crate is organized bottom-up:
//!
//! - [`group`]: lattice group elements, finite subsets, boundaries, Følner
//!   sequences and their diagnostics.
//! - [`tiling`]: ε-disjointness, greedy quasi-tilings, disjointification,
//!   congruent dyadic tiling hierarchies and the Følner decomposition built
//!   from them.
//! - [`shift`]: full shifts and mixing one-step SFTs, finitely described
//!   configurations, the canonical separating family, the point metric,
//!   mistake balls and separated/spanning counts.
//! - [`measures`]: cylinder-marginal measures, empirical measures, the
//!   weak* metric and exact entropies.
//! - [`estimators`]: finite-scale entropy estimators (upper capacity, Θ,
//!   Bowen and packing values, local entropies) over constrained pattern sets.
//! - [`genericity`]: gluing, stretched schedules, the generic-point
//!   synthesizer, tracking diagnostics and the Birkhoff spectrum.
//! - [`experiment`] and [`verify`]: config-driven runs writing line-delimited
//!   records, and the acceptance harness.
//!
//! Entropies are in nats throughout.

pub mod error;
pub mod estimators;
pub mod experiment;
pub mod genericity;
pub mod group;
pub mod measures;
pub mod shift;
pub mod tiling;
pub mod verify;

pub use error::{Error, Result};
pub use group::{Dim, FiniteSubset, FolnerSequence, GroupElement};
