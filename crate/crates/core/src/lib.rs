//! Community exploration: allocate a visit budget across disjoint communities
//! so as to meet as many distinct members as possible.
//!
//! The crate covers the offline problem with known community sizes (greedy
//! budget allocation and the greedy adaptive policy, both with exact
//! expected-reward computation and brute-force oracles) and the online
//! problem where sizes are learned round by round from collision counts.
//!
//! Module map:
//! - [`model`]: instances, member identities, exploration state, seeded sampling.
//! - [`nonadaptive`]: expected reward of a fixed allocation and its optimizers.
//! - [`adaptive`]: transition-probability lists and the exact greedy-policy DP.
//! - [`estimation`]: collision-counting estimators and confidence radii.
//! - [`online`]: the round-based learners and exact regret accounting.

pub mod adaptive;
pub mod error;
pub mod estimation;
pub mod model;
pub mod nonadaptive;
pub mod online;

pub use error::{Error, Result};
pub use model::{CommunityInstance, ExplorationState, MemberId, RngHandle, RoundFeedback};

/// Absolute tolerance used when comparing marginal gains and status values.
pub const TIE_TOLERANCE: f64 = 1e-12;
