//! Synthetic worlds with hidden ground truth, plus the brute-force oracles
//! used to verify the refinement pipeline without real data.
//!
//! A world is a set of devices, each owning one user token and one mac
//! token, moving between locations day by day. Sampling turns the schedule
//! into observation batches with configurable per-identifier drop-out.
//! [`trace_oracle`] derives the finest partition any product cascade can
//! reach from a set of leaf blocks; [`naive_fixpoint`] reaches the same
//! answer by exhaustively multiplying intersecting pairs.

use std::collections::{BTreeMap, BTreeSet};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::{normalize, product_pair};
use crate::error::{Error, Result};
use crate::model::{Graph, MacId, Mapping, Match, ObservationSet, UserId};

/// Parameters of a synthetic world.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldParams {
    pub n_locations: u32,
    pub n_devices: u32,
    pub n_days: u32,
    /// Probability a device flies to another location on a given day.
    pub move_prob: f64,
    /// Sampling probability of a user-ID sighting.
    pub obs_prob_user: f64,
    /// Sampling probability of a mac-ID sighting.
    pub obs_prob_mac: f64,
    pub seed: u64,
    /// Daily probability that a device rotates to a fresh user token.
    /// Zero (the default) keeps tokens stable for the whole run.
    pub churn_prob: f64,
}

impl WorldParams {
    pub fn new(n_locations: u32, n_devices: u32, n_days: u32, seed: u64) -> Self {
        Self {
            n_locations,
            n_devices,
            n_days,
            move_prob: 0.3,
            obs_prob_user: 1.0,
            obs_prob_mac: 1.0,
            seed,
            churn_prob: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_locations < 1 || self.n_devices < 1 || self.n_days < 1 {
            return Err(Error::BadParameter(
                "locations, devices, and days must all be at least 1".into(),
            ));
        }
        for (name, p) in [
            ("move_prob", self.move_prob),
            ("obs_prob_user", self.obs_prob_user),
            ("obs_prob_mac", self.obs_prob_mac),
            ("churn_prob", self.churn_prob),
        ] {
            if !(0.0..=1.0).contains(&p) || p.is_nan() {
                return Err(Error::BadParameter(format!(
                    "{name} must lie in [0, 1], got {p}"
                )));
            }
        }
        Ok(())
    }
}

/// Hidden ground truth: the device-to-token bijections and each device's
/// daily location.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorldTruth {
    /// `pairs[d]` is device `d`'s primary (user, mac) token pair.
    pub pairs: Vec<(UserId, MacId)>,
    /// `schedule[day][device]` is the device's location that day, if present.
    pub schedule: Vec<Vec<Option<u32>>>,
    /// Token rotations per device: (first day in effect, token). The first
    /// entry is the primary token from day 0; without churn it is the only
    /// one.
    pub user_history: Vec<Vec<(u32, UserId)>>,
}

impl WorldTruth {
    /// The user token device `d` broadcasts on `day`.
    pub fn active_user(&self, device: usize, day: u32) -> &UserId {
        let history = &self.user_history[device];
        let mut current = &history[0].1;
        for (from, token) in history {
            if *from <= day {
                current = token;
            } else {
                break;
            }
        }
        current
    }

    /// The truth pairs as a set, for match verification.
    pub fn pair_set(&self) -> BTreeSet<(UserId, MacId)> {
        self.pairs.iter().cloned().collect()
    }
}

fn user_token(device: u32) -> UserId {
    UserId::new(format!("u{device:05}"))
}

fn mac_token(device: u32) -> MacId {
    MacId::new(format!("m{device:05}"))
}

/// Rolls out a seeded, reproducible world. Devices start at uniform
/// locations; each day a device stays with probability `1 - move_prob`,
/// otherwise it appears at a uniformly chosen other location the next day.
pub fn generate_world(p: &WorldParams) -> Result<WorldTruth> {
    p.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);

    let devices = p.n_devices as usize;
    let days = p.n_days as usize;

    let pairs: Vec<(UserId, MacId)> = (0..p.n_devices)
        .map(|d| (user_token(d), mac_token(d)))
        .collect();

    let mut schedule: Vec<Vec<Option<u32>>> = vec![vec![None; devices]; days];
    for slot in schedule[0].iter_mut() {
        *slot = Some(rng.random_range(0..p.n_locations));
    }
    for t in 0..days.saturating_sub(1) {
        let (done, rest) = schedule.split_at_mut(t + 1);
        let today = &done[t];
        for (slot, here) in rest[0].iter_mut().zip(today) {
            let here = here.expect("generated devices are always present");
            let next = if p.n_locations > 1 && rng.random_bool(p.move_prob) {
                let mut j = rng.random_range(0..p.n_locations - 1);
                if j >= here {
                    j += 1;
                }
                j
            } else {
                here
            };
            *slot = Some(next);
        }
    }

    let mut user_history: Vec<Vec<(u32, UserId)>> = Vec::with_capacity(devices);
    for d in 0..p.n_devices {
        let mut history = vec![(0, user_token(d))];
        if p.churn_prob > 0.0 {
            for t in 1..p.n_days {
                if rng.random_bool(p.churn_prob) {
                    let alias = UserId::new(format!("u{d:05}.{t}"));
                    history.push((t, alias));
                }
            }
        }
        user_history.push(history);
    }

    Ok(WorldTruth {
        pairs,
        schedule,
        user_history,
    })
}

/// Samples the schedule into observation batches: each present device
/// contributes its user token with probability `obs_prob_user` and its mac
/// token with probability `obs_prob_mac`, independently. Seeded on a
/// separate stream of the world's RNG so sampling never replays the
/// movement draws.
pub fn sample_observations(truth: &WorldTruth, p: &WorldParams) -> Result<ObservationSet> {
    p.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    rng.set_stream(1);

    let mut obs = ObservationSet::new();
    for (t, day_schedule) in truth.schedule.iter().enumerate() {
        for (d, slot) in day_schedule.iter().enumerate() {
            let Some(loc) = slot else { continue };
            let day = t as u32;
            if rng.random_bool(p.obs_prob_user) {
                obs.insert_user(day, *loc, truth.active_user(d, day).clone());
            }
            if rng.random_bool(p.obs_prob_mac) {
                obs.insert_mac(day, *loc, truth.pairs[d].1.clone());
            }
        }
    }
    Ok(obs)
}

/// The finest refinement any product cascade can reach from `leaves`:
/// tokens are grouped by their leaf signature (the set of leaves containing
/// them), and each signature with both a user group and a mac group becomes
/// one block. Singleton-both groups are matches.
pub fn trace_oracle(leaves: &[Mapping]) -> Graph {
    let mut user_sig: BTreeMap<&UserId, Vec<usize>> = BTreeMap::new();
    let mut mac_sig: BTreeMap<&MacId, Vec<usize>> = BTreeMap::new();
    for (i, leaf) in leaves.iter().enumerate() {
        for u in leaf.users() {
            user_sig.entry(u).or_default().push(i);
        }
        for m in leaf.macs() {
            mac_sig.entry(m).or_default().push(i);
        }
    }

    let mut groups: BTreeMap<Vec<usize>, (BTreeSet<UserId>, BTreeSet<MacId>)> = BTreeMap::new();
    for (u, sig) in user_sig {
        groups.entry(sig).or_default().0.insert(u.clone());
    }
    for (m, sig) in mac_sig {
        groups.entry(sig).or_default().1.insert(m.clone());
    }

    let mut mappings: BTreeSet<Mapping> = BTreeSet::new();
    let mut matches: BTreeSet<Match> = BTreeSet::new();
    for (_, (users, macs)) in groups {
        if users.is_empty() || macs.is_empty() {
            continue;
        }
        if users.len() == 1 && macs.len() == 1 {
            matches.insert(Match::new(
                users.first().expect("non-empty").clone(),
                macs.first().expect("non-empty").clone(),
            ));
        } else {
            mappings.insert(Mapping::from_sets(users, macs).expect("checked non-empty"));
        }
    }

    Graph {
        mappings: mappings.into_iter().collect(),
        matches,
    }
}

/// First pair of blocks sharing a user or a mac, in canonical scan order.
fn first_intersecting_pair(mappings: &[Mapping]) -> Option<(usize, usize)> {
    let mut user_owner: BTreeMap<&UserId, usize> = BTreeMap::new();
    let mut mac_owner: BTreeMap<&MacId, usize> = BTreeMap::new();
    for (j, m) in mappings.iter().enumerate() {
        let mut hit: Option<usize> = None;
        for u in m.users() {
            if let Some(&i) = user_owner.get(u) {
                hit = Some(hit.map_or(i, |h| h.min(i)));
            }
        }
        for a in m.macs() {
            if let Some(&i) = mac_owner.get(a) {
                hit = Some(hit.map_or(i, |h| h.min(i)));
            }
        }
        if let Some(i) = hit {
            return Some((i, j));
        }
        for u in m.users() {
            user_owner.entry(u).or_insert(j);
        }
        for a in m.macs() {
            mac_owner.entry(a).or_insert(j);
        }
    }
    None
}

/// Reference semantics for the collection products, by exhaustion:
/// repeatedly replace two intersecting blocks with their pair product and
/// renormalize until no pair intersects. Each step shrinks the graph, so
/// termination is guaranteed.
pub fn naive_fixpoint(g: &Graph) -> Graph {
    let mut current = normalize(g.clone());
    while let Some((i, j)) = first_intersecting_pair(&current.mappings) {
        let pieces = product_pair(&current.mappings[i], &current.mappings[j]);
        let mut mappings: Vec<Mapping> = Vec::with_capacity(current.mappings.len() + 1);
        for (k, m) in current.mappings.iter().enumerate() {
            if k != i && k != j {
                mappings.push(m.clone());
            }
        }
        mappings.extend(pieces);
        current = normalize(Graph {
            mappings,
            matches: current.matches,
        });
    }
    current
}

/// Precision/recall of a graph's matches against the hidden truth, plus
/// the coverage counts.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub n_matches: usize,
    pub n_mappings: usize,
    /// Matches that agree with a truth pair.
    pub true_matches: usize,
    /// Fraction of emitted matches that are true; 1.0 when no matches were
    /// emitted, with `empty_match_set` raised.
    pub precision: f64,
    /// Fraction of truth pairs recovered.
    pub recall: f64,
    pub users_covered: usize,
    pub macs_covered: usize,
    /// Set when the match set was empty and the precision convention kicked in.
    pub empty_match_set: bool,
}

/// Scores `g.matches` against the truth pairing. Coverage counts include
/// matched tokens alongside the mapping sides.
pub fn evaluate(g: &Graph, truth: &WorldTruth) -> EvalReport {
    evaluate_against_pairs(g, &truth.pair_set())
}

/// [`evaluate`] for callers that only hold the pairing, e.g. a truth file.
pub fn evaluate_against_pairs(g: &Graph, truth_pairs: &BTreeSet<(UserId, MacId)>) -> EvalReport {
    let true_matches = g
        .matches
        .iter()
        .filter(|m| truth_pairs.contains(&(m.user.clone(), m.mac.clone())))
        .count();
    let n_matches = g.matches.len();
    let empty = n_matches == 0;
    let precision = if empty {
        1.0
    } else {
        true_matches as f64 / n_matches as f64
    };
    let recall = if truth_pairs.is_empty() {
        0.0
    } else {
        true_matches as f64 / truth_pairs.len() as f64
    };
    let users_covered: usize =
        g.mappings.iter().map(|m| m.users().len()).sum::<usize>() + n_matches;
    let macs_covered: usize = g.mappings.iter().map(|m| m.macs().len()).sum::<usize>() + n_matches;
    EvalReport {
        n_matches,
        n_mappings: g.mappings.len(),
        true_matches,
        precision,
        recall,
        users_covered,
        macs_covered,
        empty_match_set: empty,
    }
}
