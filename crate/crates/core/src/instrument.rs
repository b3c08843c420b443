//! Optional runtime checks over every normalized graph.
//!
//! When enabled, each graph leaving [`crate::algebra::normalize`] is scanned
//! for tokens appearing more than once across matches and mappings, and
//! violations are counted instead of panicking, so a full run can be audited
//! after the fact.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};

use crate::model::Graph;

static ENABLED: AtomicBool = AtomicBool::new(false);
static VIOLATIONS: AtomicU64 = AtomicU64::new(0);
static CHECKS: AtomicU64 = AtomicU64::new(0);

/// Turns disjointness auditing on or off and clears the counters.
pub fn set_enabled(enabled: bool) {
    VIOLATIONS.store(0, Ordering::SeqCst);
    CHECKS.store(0, Ordering::SeqCst);
    ENABLED.store(enabled, Ordering::SeqCst);
}

/// Number of graphs audited since checks were last enabled.
pub fn checks() -> u64 {
    CHECKS.load(Ordering::SeqCst)
}

/// Number of graphs that carried a duplicated token.
pub fn violations() -> u64 {
    VIOLATIONS.load(Ordering::SeqCst)
}

pub(crate) fn audit(graph: &Graph) {
    if !ENABLED.load(Ordering::Relaxed) {
        return;
    }
    CHECKS.fetch_add(1, Ordering::SeqCst);
    let dups = graph.duplicate_tokens();
    if !dups.is_empty() {
        VIOLATIONS.fetch_add(1, Ordering::SeqCst);
        log::error!(
            "disjointness violation: {} duplicated token(s), first {:?}",
            dups.len(),
            dups.first()
        );
    }
}
