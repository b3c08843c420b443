//! Builds the day graph from the observation batches of consecutive days.
//!
//! Each (day, location) batch splits into a stayer block — the identifiers
//! seen nowhere else within the lookahead window — and one travel block per
//! destination, the intersection of the departing sets with the
//! destination's sets over the same window. Travel blocks landing at the
//! same destination are folded with the exact product before everything is
//! summed and normalized.

use std::collections::BTreeSet;

use crate::algebra::{normalize, product_exact, sum};
use crate::error::{Error, Result};
use crate::model::{Graph, MacId, Mapping, ObservationSet, UserId};

/// Identifies the travel block from `origin` to `destination` built on `day`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct TravelKey {
    pub origin: u32,
    pub destination: u32,
    pub day: u32,
}

impl TravelKey {
    pub fn new(origin: u32, destination: u32, day: u32) -> Self {
        assert_ne!(origin, destination, "travel requires distinct locations");
        Self {
            origin,
            destination,
            day,
        }
    }
}

/// Forward horizon, in days, within which a departure may land.
/// Zero means same-day only; the default of one also admits next-day
/// landings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DayWindow {
    lookahead: u32,
}

impl DayWindow {
    pub fn new(lookahead: u32) -> Self {
        Self { lookahead }
    }

    pub fn lookahead(&self) -> u32 {
        self.lookahead
    }
}

impl Default for DayWindow {
    fn default() -> Self {
        Self { lookahead: 1 }
    }
}

/// Union of the user and mac sets over every location other than `origin`
/// across the lookahead window starting at `day`.
fn elsewhere_union(
    origin: u32,
    day: u32,
    obs: &ObservationSet,
    w: DayWindow,
) -> (BTreeSet<UserId>, BTreeSet<MacId>) {
    let mut users = BTreeSet::new();
    let mut macs = BTreeSet::new();
    for n in 0..=w.lookahead() {
        let Some(d) = day.checked_add(n) else {
            continue;
        };
        for loc in obs.locations_on(d) {
            if loc == origin {
                continue;
            }
            let batch = obs.get(d, loc).expect("listed location has a batch");
            users.extend(batch.users.iter().cloned());
            macs.extend(batch.macs.iter().cloned());
        }
    }
    (users, macs)
}

/// The departing identifiers with no landing information: the batch at
/// (`day`, `location`) minus everything seen at any other location within
/// the lookahead window. Absent when either side empties.
pub fn stayer_mapping(
    location: u32,
    day: u32,
    obs: &ObservationSet,
    w: DayWindow,
) -> Result<Option<Mapping>> {
    let batch = obs
        .get(day, location)
        .ok_or(Error::NoSuchBatch { day, location })?;
    let (other_users, other_macs) = elsewhere_union(location, day, obs, w);
    let users: BTreeSet<UserId> = batch.users.difference(&other_users).cloned().collect();
    let macs: BTreeSet<MacId> = batch.macs.difference(&other_macs).cloned().collect();
    Ok(Mapping::from_sets(users, macs))
}

/// The departure/landing intersection: the batch at the origin intersected
/// with the destination's union over the lookahead window. Missing
/// destination batches contribute empty sets; absent when either side
/// empties.
pub fn travel_mapping(
    key: TravelKey,
    obs: &ObservationSet,
    w: DayWindow,
) -> Result<Option<Mapping>> {
    let batch = obs.get(key.day, key.origin).ok_or(Error::NoSuchBatch {
        day: key.day,
        location: key.origin,
    })?;
    let mut dest_users: BTreeSet<UserId> = BTreeSet::new();
    let mut dest_macs: BTreeSet<MacId> = BTreeSet::new();
    for n in 0..=w.lookahead() {
        let Some(d) = key.day.checked_add(n) else {
            continue;
        };
        if let Some(dest) = obs.get(d, key.destination) {
            dest_users.extend(dest.users.iter().cloned());
            dest_macs.extend(dest.macs.iter().cloned());
        }
    }
    let users: BTreeSet<UserId> = batch.users.intersection(&dest_users).cloned().collect();
    let macs: BTreeSet<MacId> = batch.macs.intersection(&dest_macs).cloned().collect();
    Ok(Mapping::from_sets(users, macs))
}

/// The day summary: every stayer block, plus, per destination, the exact
/// product fold of the travel blocks landing there (ascending origin
/// order). Normalized, so blocks already down to one pair surface as
/// matches.
pub fn build_day_graph(day: u32, obs: &ObservationSet, w: DayWindow) -> Result<Graph> {
    let origins = obs.locations_on(day);
    if origins.is_empty() {
        return Err(Error::EmptyDay(day));
    }

    let mut stayers: Vec<Mapping> = Vec::new();
    for &i in &origins {
        if let Some(m) = stayer_mapping(i, day, obs, w)? {
            stayers.push(m);
        }
    }
    let mut graph = Graph::from_mappings(stayers);

    for j in obs.all_locations() {
        let mut fold: Option<Graph> = None;
        for &i in &origins {
            if i == j {
                continue;
            }
            let Some(m) = travel_mapping(TravelKey::new(i, j, day), obs, w)? else {
                continue;
            };
            let leaf = Graph::from_mappings(vec![m]);
            fold = Some(match fold {
                None => leaf,
                Some(acc) => product_exact(&acc, &leaf),
            });
        }
        if let Some(folded) = fold {
            graph = sum(&graph, &folded);
        }
    }

    Ok(normalize(graph))
}

/// All stayer and travel blocks of one day, before any product is applied.
pub fn leaf_mappings_for_day(day: u32, obs: &ObservationSet, w: DayWindow) -> Result<Vec<Mapping>> {
    let origins = obs.locations_on(day);
    if origins.is_empty() {
        return Err(Error::EmptyDay(day));
    }
    let mut leaves = Vec::new();
    for &i in &origins {
        if let Some(m) = stayer_mapping(i, day, obs, w)? {
            leaves.push(m);
        }
    }
    for j in obs.all_locations() {
        for &i in &origins {
            if i == j {
                continue;
            }
            if let Some(m) = travel_mapping(TravelKey::new(i, j, day), obs, w)? {
                leaves.push(m);
            }
        }
    }
    Ok(leaves)
}

/// Leaf blocks over the whole observed range, in (day, kind, location)
/// order. These are the inputs the brute-force oracles reason about.
pub fn leaf_mappings(obs: &ObservationSet, w: DayWindow) -> Vec<Mapping> {
    let mut leaves = Vec::new();
    for day in obs.days() {
        leaves.extend(
            leaf_mappings_for_day(day, obs, w).expect("observed day has at least one batch"),
        );
    }
    leaves
}
