//! Canonical data types shared by every stage of the engine.
//!
//! Identifiers are opaque tokens compared by exact equality. A [`Mapping`]
//! is a fully connected bipartite block between a user-ID set and a mac-ID
//! set; a [`Graph`] is a collection of such blocks plus the one-to-one
//! [`Match`]es already extracted from them. All types are immutable values
//! after construction and safe to share read-only across workers.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};

/// Opaque user identifier token (e.g. an advertising UUID).
///
/// Drawn from a namespace disjoint from [`MacId`]: no token may appear as
/// both. Ingestion enforces this in one pass.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UserId(pub String);

/// Opaque hardware address token.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MacId(pub String);

impl UserId {
    pub fn new(token: impl Into<String>) -> Self {
        Self(token.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl MacId {
    pub fn new(token: impl Into<String>) -> Self {
        Self(token.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for MacId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A fully connected bipartite block: every user in `S` may correspond to
/// any mac in `M`.
///
/// Both sides are non-empty, deduplicated, and kept in lexicographic token
/// order, so two mappings with equal set-pairs have identical serialized
/// form. The derived `Ord` (users first, then macs) is the canonical
/// ordering used everywhere a deterministic sequence is needed; its first
/// key is the smallest user token.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Mapping {
    #[serde(rename = "S")]
    users: BTreeSet<UserId>,
    #[serde(rename = "M")]
    macs: BTreeSet<MacId>,
}

impl Mapping {
    /// Builds the canonical form: both sides deduplicated and sorted.
    /// Rejects an empty user or mac side.
    pub fn new(
        users: impl IntoIterator<Item = UserId>,
        macs: impl IntoIterator<Item = MacId>,
    ) -> Result<Self> {
        let users: BTreeSet<UserId> = users.into_iter().collect();
        let macs: BTreeSet<MacId> = macs.into_iter().collect();
        if users.is_empty() {
            return Err(Error::EmptySide("user"));
        }
        if macs.is_empty() {
            return Err(Error::EmptySide("mac"));
        }
        Ok(Self { users, macs })
    }

    /// Wraps already-canonical sets, returning `None` if either side is empty.
    pub(crate) fn from_sets(users: BTreeSet<UserId>, macs: BTreeSet<MacId>) -> Option<Self> {
        if users.is_empty() || macs.is_empty() {
            None
        } else {
            Some(Self { users, macs })
        }
    }

    pub fn users(&self) -> &BTreeSet<UserId> {
        &self.users
    }

    pub fn macs(&self) -> &BTreeSet<MacId> {
        &self.macs
    }

    /// True iff the block pins exactly one user to exactly one mac.
    pub fn is_match(&self) -> bool {
        self.users.len() == 1 && self.macs.len() == 1
    }

    /// The resolved pair, when this block is a match.
    pub fn as_match(&self) -> Option<Match> {
        if self.is_match() {
            Some(Match {
                user: self.users.first().expect("non-empty").clone(),
                mac: self.macs.first().expect("non-empty").clone(),
            })
        } else {
            None
        }
    }
}

impl<'de> Deserialize<'de> for Mapping {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            #[serde(rename = "S")]
            users: Vec<UserId>,
            #[serde(rename = "M")]
            macs: Vec<MacId>,
        }
        let raw = Raw::deserialize(deserializer)?;
        Mapping::new(raw.users, raw.macs).map_err(|e| D::Error::custom(e.to_string()))
    }
}

/// A (user, mac) pair claimed to belong to the same hidden device;
/// equivalent to a mapping with one element on each side.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Match {
    pub user: UserId,
    pub mac: MacId,
}

impl Match {
    pub fn new(user: UserId, mac: MacId) -> Self {
        Self { user, mac }
    }
}

/// A knowledge state: the refined mapping blocks plus the matches already
/// put aside.
///
/// [`normalize`](crate::algebra::normalize) keeps mappings deduplicated and
/// canonically ordered, extracts every block that has shrunk to a match,
/// and scrubs matched tokens out of the remaining blocks, so matched
/// tokens never reappear inside `mappings`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    pub mappings: Vec<Mapping>,
    pub matches: BTreeSet<Match>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_mappings(mappings: Vec<Mapping>) -> Self {
        Self {
            mappings,
            matches: BTreeSet::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.mappings.is_empty() && self.matches.is_empty()
    }

    /// Tokens that occur more than once across `matches` and `mappings`.
    ///
    /// Empty on every graph the engine considers disjoint; non-empty output
    /// flags an invariant violation when checks are enabled.
    pub fn duplicate_tokens(&self) -> Vec<String> {
        let mut users: BTreeMap<&UserId, usize> = BTreeMap::new();
        let mut macs: BTreeMap<&MacId, usize> = BTreeMap::new();
        for m in &self.matches {
            *users.entry(&m.user).or_default() += 1;
            *macs.entry(&m.mac).or_default() += 1;
        }
        for mapping in &self.mappings {
            for u in mapping.users() {
                *users.entry(u).or_default() += 1;
            }
            for m in mapping.macs() {
                *macs.entry(m).or_default() += 1;
            }
        }
        let mut out: Vec<String> = Vec::new();
        out.extend(
            users
                .into_iter()
                .filter(|(_, n)| *n > 1)
                .map(|(u, _)| u.0.clone()),
        );
        out.extend(
            macs.into_iter()
                .filter(|(_, n)| *n > 1)
                .map(|(m, _)| m.0.clone()),
        );
        out
    }
}

/// Identifier sets sampled at one location on one day.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationBatch {
    pub day: u32,
    pub location: u32,
    pub users: BTreeSet<UserId>,
    pub macs: BTreeSet<MacId>,
}

impl ObservationBatch {
    pub fn new(day: u32, location: u32) -> Self {
        Self {
            day,
            location,
            users: BTreeSet::new(),
            macs: BTreeSet::new(),
        }
    }
}

/// All observation batches of a run, keyed by (day, location). Ingesting
/// the same key twice merges by set union, so multiple input files cannot
/// create artificial splits.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ObservationSet {
    batches: BTreeMap<(u32, u32), ObservationBatch>,
}

impl ObservationSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert_user(&mut self, day: u32, location: u32, id: UserId) {
        self.batches
            .entry((day, location))
            .or_insert_with(|| ObservationBatch::new(day, location))
            .users
            .insert(id);
    }

    pub fn insert_mac(&mut self, day: u32, location: u32, id: MacId) {
        self.batches
            .entry((day, location))
            .or_insert_with(|| ObservationBatch::new(day, location))
            .macs
            .insert(id);
    }

    /// Merges a whole batch, unioning with any existing one for the same key.
    pub fn merge_batch(&mut self, batch: ObservationBatch) {
        let entry = self
            .batches
            .entry((batch.day, batch.location))
            .or_insert_with(|| ObservationBatch::new(batch.day, batch.location));
        entry.users.extend(batch.users);
        entry.macs.extend(batch.macs);
    }

    pub fn get(&self, day: u32, location: u32) -> Option<&ObservationBatch> {
        self.batches.get(&(day, location))
    }

    pub fn is_empty(&self) -> bool {
        self.batches.is_empty()
    }

    pub fn len(&self) -> usize {
        self.batches.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ObservationBatch> {
        self.batches.values()
    }

    /// Days with at least one batch, ascending.
    pub fn days(&self) -> Vec<u32> {
        let mut days: Vec<u32> = self.batches.keys().map(|(d, _)| *d).collect();
        days.dedup();
        days
    }

    pub fn first_day(&self) -> Option<u32> {
        self.batches.keys().next().map(|(d, _)| *d)
    }

    pub fn last_day(&self) -> Option<u32> {
        self.batches.keys().next_back().map(|(d, _)| *d)
    }

    /// Locations observed on `day`, ascending.
    pub fn locations_on(&self, day: u32) -> Vec<u32> {
        self.batches
            .range((day, 0)..=(day, u32::MAX))
            .map(|((_, l), _)| *l)
            .collect()
    }

    /// Every location index seen anywhere in the stream, ascending.
    pub fn all_locations(&self) -> Vec<u32> {
        let set: BTreeSet<u32> = self.batches.keys().map(|(_, l)| *l).collect();
        set.into_iter().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn u(s: &str) -> UserId {
        UserId::new(s)
    }

    fn m(s: &str) -> MacId {
        MacId::new(s)
    }

    #[test]
    fn canonicalize_sorts_and_dedups() {
        let a = Mapping::new([u("b"), u("a")], [m("m2"), m("m1")]).unwrap();
        let users: Vec<&str> = a.users().iter().map(|x| x.as_str()).collect();
        let macs: Vec<&str> = a.macs().iter().map(|x| x.as_str()).collect();
        assert_eq!(users, ["a", "b"]);
        assert_eq!(macs, ["m1", "m2"]);

        let b = Mapping::new([u("a"), u("a")], [m("m1")]).unwrap();
        assert_eq!(b.users().len(), 1);
    }

    #[test]
    fn canonicalize_is_idempotent() {
        let a = Mapping::new([u("b"), u("a"), u("b")], [m("x"), m("y")]).unwrap();
        let again = Mapping::new(a.users().iter().cloned(), a.macs().iter().cloned()).unwrap();
        assert_eq!(a, again);
    }

    #[test]
    fn canonicalize_rejects_empty_side() {
        let err = Mapping::new(std::iter::empty(), [m("m1")]).unwrap_err();
        assert!(matches!(err, Error::EmptySide("user")));
        let err = Mapping::new([u("a")], std::iter::empty()).unwrap_err();
        assert!(matches!(err, Error::EmptySide("mac")));
    }

    #[test]
    fn is_match_requires_singletons_both_sides() {
        assert!(Mapping::new([u("a")], [m("m1")]).unwrap().is_match());
        assert!(
            !Mapping::new([u("a"), u("b")], [m("m1")])
                .unwrap()
                .is_match()
        );
        assert!(
            !Mapping::new([u("a")], [m("m1"), m("m2")])
                .unwrap()
                .is_match()
        );
    }

    #[test]
    fn serialization_is_canonical() {
        let a = Mapping::new([u("b"), u("a")], [m("y"), m("x")]).unwrap();
        let b = Mapping::new([u("a"), u("b"), u("a")], [m("x"), m("y")]).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        let c = Mapping::new([u("a")], [m("x"), m("y")]).unwrap();
        assert_ne!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&c).unwrap()
        );
    }

    #[test]
    fn mapping_deserialize_rejects_empty_side() {
        let err = serde_json::from_str::<Mapping>(r#"{"S":[],"M":["m1"]}"#);
        assert!(err.is_err());
    }

    #[test]
    fn duplicate_batches_merge_by_union() {
        let mut obs = ObservationSet::new();
        obs.insert_user(0, 1, u("a"));
        let mut batch = ObservationBatch::new(0, 1);
        batch.users.insert(u("b"));
        batch.macs.insert(m("x"));
        obs.merge_batch(batch);
        let got = obs.get(0, 1).unwrap();
        assert_eq!(got.users.len(), 2);
        assert_eq!(got.macs.len(), 1);
        assert_eq!(obs.len(), 1);
    }

    #[test]
    fn duplicate_tokens_reports_reuse() {
        let g = Graph {
            mappings: vec![
                Mapping::new([u("a"), u("b")], [m("x")]).unwrap(),
                Mapping::new([u("a")], [m("y"), m("z")]).unwrap(),
            ],
            matches: BTreeSet::new(),
        };
        assert_eq!(g.duplicate_tokens(), vec!["a".to_string()]);
    }
}
