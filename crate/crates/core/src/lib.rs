//! Recovers the hidden one-to-one pairing between two identifier universes
//! (user IDs and mac-like IDs) observed as unordered daily samples at
//! discrete locations.
//!
//! Per-day bipartite mapping graphs are built from the observation batches,
//! then refined with a sum/product set algebra until blocks shrink to
//! matches. Day graphs fold sequentially inside fixed-size windows and the
//! window graphs combine as a binary reduction tree, so the whole history
//! collapses into one final graph. A synthetic-world generator with hidden
//! ground truth plus two brute-force oracles back the test suites.

pub mod algebra;
pub mod daygraph;
pub mod error;
pub mod instrument;
pub mod io;
pub mod model;
pub mod pipeline;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use model::{Graph, MacId, Mapping, Match, ObservationBatch, ObservationSet, UserId};
