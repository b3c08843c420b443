//! The sum and product operators over graphs, plus normalization.
//!
//! The sum is disjoint concatenation and performs no refinement. The
//! product splits blocks that share tokens into difference / intersection /
//! difference pieces, which is what grinds mappings down towards matches.
//! Two collection-level variants exist: [`product_exact`] evaluates the
//! three-term form with residuals taken against the whole opposite operand,
//! while [`product_chunked`] computes intersections first and reuses them
//! for the residuals, processing the older operand in parallel chunks.

use std::collections::{BTreeSet, HashMap};

use crate::instrument;
use crate::model::{Graph, MacId, Mapping, Match, UserId};

/// How a product over two graphs is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProductMode {
    /// Three-term evaluation with residuals against the full opposite side.
    Exact,
    /// Intersection-first evaluation over contiguous chunks of the older
    /// operand; one worker per chunk.
    Chunked {
        /// Number of chunks, at least 1.
        chunks: usize,
    },
}

impl ProductMode {
    pub fn chunked(chunks: usize) -> Self {
        assert!(chunks >= 1, "chunk count must be at least 1");
        ProductMode::Chunked { chunks }
    }
}

/// Disjoint concatenation: `g0`'s mappings first, match sets unioned.
/// No refinement is performed.
pub fn sum(g0: &Graph, g1: &Graph) -> Graph {
    Graph {
        mappings: g0
            .mappings
            .iter()
            .chain(g1.mappings.iter())
            .cloned()
            .collect(),
        matches: g0.matches.union(&g1.matches).cloned().collect(),
    }
}

fn intersect_users(a: &BTreeSet<UserId>, b: &BTreeSet<UserId>) -> BTreeSet<UserId> {
    a.intersection(b).cloned().collect()
}

fn intersect_macs(a: &BTreeSet<MacId>, b: &BTreeSet<MacId>) -> BTreeSet<MacId> {
    a.intersection(b).cloned().collect()
}

fn diff_users(a: &BTreeSet<UserId>, b: &BTreeSet<UserId>) -> BTreeSet<UserId> {
    a.difference(b).cloned().collect()
}

fn diff_macs(a: &BTreeSet<MacId>, b: &BTreeSet<MacId>) -> BTreeSet<MacId> {
    a.difference(b).cloned().collect()
}

/// Product of two blocks: difference, intersection, difference, computed
/// componentwise on (S, M). A piece is kept only if both sides are
/// non-empty, so conflicting evidence drops out rather than merging.
pub fn product_pair(w: &Mapping, v: &Mapping) -> Vec<Mapping> {
    let mut out = Vec::with_capacity(3);
    let mut push = |users: BTreeSet<UserId>, macs: BTreeSet<MacId>| {
        if let Some(m) = Mapping::from_sets(users, macs) {
            out.push(m);
        }
    };
    push(
        diff_users(w.users(), v.users()),
        diff_macs(w.macs(), v.macs()),
    );
    push(
        intersect_users(w.users(), v.users()),
        intersect_macs(w.macs(), v.macs()),
    );
    push(
        diff_users(v.users(), w.users()),
        diff_macs(v.macs(), w.macs()),
    );
    out
}

/// Token -> mapping-index lookup over one operand's blocks. Candidate
/// lists stay in ascending index order by construction.
struct TokenIndex<'g> {
    users: HashMap<&'g UserId, Vec<u32>>,
    macs: HashMap<&'g MacId, Vec<u32>>,
}

impl<'g> TokenIndex<'g> {
    fn build(mappings: &'g [Mapping]) -> Self {
        let mut users: HashMap<&UserId, Vec<u32>> = HashMap::new();
        let mut macs: HashMap<&MacId, Vec<u32>> = HashMap::new();
        for (i, m) in mappings.iter().enumerate() {
            for u in m.users() {
                users.entry(u).or_default().push(i as u32);
            }
            for a in m.macs() {
                macs.entry(a).or_default().push(i as u32);
            }
        }
        Self { users, macs }
    }

    /// Indices of blocks sharing at least one token with `w`, ascending.
    /// Blocks sharing nothing cannot contribute a non-empty piece, so
    /// restricting to these candidates leaves every product unchanged.
    fn candidates(&self, w: &Mapping) -> BTreeSet<u32> {
        let mut out = BTreeSet::new();
        for u in w.users() {
            if let Some(ix) = self.users.get(u) {
                out.extend(ix.iter().copied());
            }
        }
        for m in w.macs() {
            if let Some(ix) = self.macs.get(m) {
                out.extend(ix.iter().copied());
            }
        }
        out
    }
}

/// The three-term collection product: residuals of `g0` against all of
/// `g1`, all pairwise intersections, residuals of `g1` against all of
/// `g0`. Empty-sided pieces are dropped, operand matches are carried, and
/// the result is normalized.
pub fn product_exact(g0: &Graph, g1: &Graph) -> Graph {
    let g0_users: BTreeSet<UserId> = g0
        .mappings
        .iter()
        .flat_map(|m| m.users().iter().cloned())
        .collect();
    let g0_macs: BTreeSet<MacId> = g0
        .mappings
        .iter()
        .flat_map(|m| m.macs().iter().cloned())
        .collect();
    let g1_users: BTreeSet<UserId> = g1
        .mappings
        .iter()
        .flat_map(|m| m.users().iter().cloned())
        .collect();
    let g1_macs: BTreeSet<MacId> = g1
        .mappings
        .iter()
        .flat_map(|m| m.macs().iter().cloned())
        .collect();

    let index = TokenIndex::build(&g1.mappings);
    let mut mappings: Vec<Mapping> = Vec::new();
    for w in &g0.mappings {
        if let Some(m) = Mapping::from_sets(
            diff_users(w.users(), &g1_users),
            diff_macs(w.macs(), &g1_macs),
        ) {
            mappings.push(m);
        }
    }
    for w in &g0.mappings {
        for vi in index.candidates(w) {
            let v = &g1.mappings[vi as usize];
            let users = intersect_users(w.users(), v.users());
            if users.is_empty() {
                continue;
            }
            let macs = intersect_macs(w.macs(), v.macs());
            if let Some(m) = Mapping::from_sets(users, macs) {
                mappings.push(m);
            }
        }
    }
    for v in &g1.mappings {
        if let Some(m) = Mapping::from_sets(
            diff_users(v.users(), &g0_users),
            diff_macs(v.macs(), &g0_macs),
        ) {
            mappings.push(m);
        }
    }

    normalize(Graph {
        mappings,
        matches: g0.matches.union(&g1.matches).cloned().collect(),
    })
}

struct ChunkOutput {
    mappings: Vec<Mapping>,
    touched_users: BTreeSet<UserId>,
    touched_macs: BTreeSet<MacId>,
    any_intersection: bool,
}

/// One worker's pass over a slice of the older operand. For each block
/// `w`, every valid intersection with `g1` is emitted and accumulated;
/// `w` minus its own accumulated intersections follows when anything
/// intersected, otherwise `w` passes through unchanged.
fn process_chunk(ws: &[Mapping], g1: &[Mapping], index: &TokenIndex<'_>) -> ChunkOutput {
    let mut out = ChunkOutput {
        mappings: Vec::new(),
        touched_users: BTreeSet::new(),
        touched_macs: BTreeSet::new(),
        any_intersection: false,
    };
    for w in ws {
        let mut q_users: BTreeSet<UserId> = BTreeSet::new();
        let mut q_macs: BTreeSet<MacId> = BTreeSet::new();
        let mut intersected = false;
        for vi in index.candidates(w) {
            let v = &g1[vi as usize];
            let users = intersect_users(w.users(), v.users());
            if users.is_empty() {
                continue;
            }
            let macs = intersect_macs(w.macs(), v.macs());
            if macs.is_empty() {
                continue;
            }
            q_users.extend(users.iter().cloned());
            q_macs.extend(macs.iter().cloned());
            out.mappings
                .push(Mapping::from_sets(users, macs).expect("checked non-empty"));
            intersected = true;
        }
        if intersected {
            if let Some(m) = Mapping::from_sets(
                diff_users(w.users(), &q_users),
                diff_macs(w.macs(), &q_macs),
            ) {
                out.mappings.push(m);
            }
            out.touched_users.extend(q_users);
            out.touched_macs.extend(q_macs);
            out.any_intersection = true;
        } else {
            out.mappings.push(w.clone());
        }
    }
    out
}

fn chunk_ranges(len: usize, chunks: usize) -> Vec<std::ops::Range<usize>> {
    let chunks = chunks.clamp(1, len.max(1));
    let base = len / chunks;
    let rem = len % chunks;
    let mut ranges = Vec::with_capacity(chunks);
    let mut start = 0;
    for i in 0..chunks {
        let size = base + usize::from(i < rem);
        ranges.push(start..start + size);
        start += size;
    }
    ranges
}

/// Intersection-first collection product. `g0`'s blocks are split into
/// `chunks` contiguous slices processed by one worker each; outputs merge
/// in chunk order, so the result does not depend on scheduling — and, in
/// fact, not on the chunk count either. Residuals of `g1` are taken
/// against the union of every intersection seen anywhere; if nothing
/// intersected, `g1` is appended unchanged. The result is normalized.
pub fn product_chunked(g0: &Graph, g1: &Graph, chunks: usize) -> Graph {
    assert!(chunks >= 1, "chunk count must be at least 1");
    let index = TokenIndex::build(&g1.mappings);
    let ranges = chunk_ranges(g0.mappings.len(), chunks);

    let partials: Vec<ChunkOutput> = if ranges.len() <= 1 {
        vec![process_chunk(&g0.mappings, &g1.mappings, &index)]
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = ranges
                .iter()
                .map(|r| {
                    let ws = &g0.mappings[r.clone()];
                    let index = &index;
                    scope.spawn(move || process_chunk(ws, &g1.mappings, index))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("chunk worker panicked"))
                .collect()
        })
    };

    let mut mappings: Vec<Mapping> = Vec::new();
    let mut touched_users: BTreeSet<UserId> = BTreeSet::new();
    let mut touched_macs: BTreeSet<MacId> = BTreeSet::new();
    let mut any_intersection = false;
    for part in partials {
        mappings.extend(part.mappings);
        touched_users.extend(part.touched_users);
        touched_macs.extend(part.touched_macs);
        any_intersection |= part.any_intersection;
    }

    if any_intersection {
        for v in &g1.mappings {
            if let Some(m) = Mapping::from_sets(
                diff_users(v.users(), &touched_users),
                diff_macs(v.macs(), &touched_macs),
            ) {
                mappings.push(m);
            }
        }
    } else {
        mappings.extend(g1.mappings.iter().cloned());
    }

    normalize(Graph {
        mappings,
        matches: g0.matches.union(&g1.matches).cloned().collect(),
    })
}

/// Dispatches on the mode. `older` plays the chunked role; callers feed
/// the earlier-in-time operand there.
pub fn product(mode: ProductMode, older: &Graph, newer: &Graph) -> Graph {
    match mode {
        ProductMode::Exact => product_exact(older, newer),
        ProductMode::Chunked { chunks } => product_chunked(older, newer, chunks),
    }
}

/// Normal form: duplicate blocks removed, every block that has shrunk to a
/// single (user, mac) pair moved into the match set, and matched tokens
/// scrubbed from remaining blocks until a fixpoint. Mappings come out in
/// canonical order (smallest user token first).
///
/// When a fresh singleton claims a token some earlier match already owns,
/// the earlier match wins and the singleton is dropped — the same outcome
/// scrubbing would produce one round later.
pub fn normalize(g: Graph) -> Graph {
    let mut matched_users: BTreeSet<UserId> = BTreeSet::new();
    let mut matched_macs: BTreeSet<MacId> = BTreeSet::new();
    let mut matches: BTreeSet<Match> = BTreeSet::new();
    for m in g.matches {
        if !matched_users.contains(&m.user) && !matched_macs.contains(&m.mac) {
            matched_users.insert(m.user.clone());
            matched_macs.insert(m.mac.clone());
            matches.insert(m);
        }
    }

    // Set semantics over canonical blocks: drops duplicates, orders the pool.
    let mut pool: BTreeSet<Mapping> = g.mappings.into_iter().collect();

    loop {
        let mut next: BTreeSet<Mapping> = BTreeSet::new();
        for m in pool {
            let scrubbed = if m.users().iter().any(|u| matched_users.contains(u))
                || m.macs().iter().any(|a| matched_macs.contains(a))
            {
                Mapping::from_sets(
                    diff_users(m.users(), &matched_users),
                    diff_macs(m.macs(), &matched_macs),
                )
            } else {
                Some(m)
            };
            if let Some(m) = scrubbed {
                next.insert(m);
            }
        }

        let mut changed = false;
        let mut keep: BTreeSet<Mapping> = BTreeSet::new();
        for m in next {
            match m.as_match() {
                Some(pair) => {
                    changed = true;
                    if !matched_users.contains(&pair.user) && !matched_macs.contains(&pair.mac) {
                        matched_users.insert(pair.user.clone());
                        matched_macs.insert(pair.mac.clone());
                        matches.insert(pair);
                    }
                }
                None => {
                    keep.insert(m);
                }
            }
        }
        pool = keep;
        if !changed {
            break;
        }
    }

    let out = Graph {
        mappings: pool.into_iter().collect(),
        matches,
    };
    instrument::audit(&out);
    out
}
