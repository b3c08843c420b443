//! Window decomposition, the sequential fold within each window, and the
//! binary-tree combination across windows.
//!
//! The observed day range splits into fixed-size intervals that fold
//! independently (day graphs multiply in time order, newer operand on the
//! un-chunked side). The per-window graphs then reduce pairwise as a binary
//! tree, earlier operand in the chunked role, odd trailing graph promoted
//! unchanged. Worker budget is one global count: windows fold concurrently,
//! and as tree levels narrow, idle workers shift into the chunked products.

use std::sync::Mutex;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use crate::algebra::{ProductMode, product};
use crate::daygraph::{DayWindow, build_day_graph};
use crate::error::{Error, Result};
use crate::model::{Graph, ObservationSet};

/// Contiguous, non-overlapping day intervals covering the observed range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowPlan {
    pub window_days: u32,
    /// Inclusive (start_day, end_day) pairs, ascending; the last interval
    /// may be shorter than `window_days`.
    pub intervals: Vec<(u32, u32)>,
}

/// Splits `[first_day, last_day]` into ceil(len / window_days) intervals.
pub fn plan_windows(first_day: u32, last_day: u32, window_days: u32) -> Result<WindowPlan> {
    if first_day > last_day {
        return Err(Error::BadInterval(format!(
            "first day {first_day} is after last day {last_day}"
        )));
    }
    if window_days < 1 {
        return Err(Error::BadInterval("window must be at least one day".into()));
    }
    let mut intervals = Vec::new();
    let mut start = first_day;
    while start <= last_day {
        let end = last_day.min(start.saturating_add(window_days - 1));
        intervals.push((start, end));
        if end == u32::MAX {
            break;
        }
        start = end + 1;
    }
    Ok(WindowPlan {
        window_days,
        intervals,
    })
}

/// Folds one interval's day graphs in time order: the accumulated graph
/// plays the older (chunked) role, each new day graph the un-chunked one.
/// Days without observations are skipped with a warning.
pub fn fold_window(
    interval: (u32, u32),
    obs: &ObservationSet,
    w: DayWindow,
    mode: ProductMode,
) -> Result<Graph> {
    let (start, end) = interval;
    let mut acc: Option<Graph> = None;
    for day in start..=end {
        let day_graph = match build_day_graph(day, obs, w) {
            Ok(g) => g,
            Err(Error::EmptyDay(d)) => {
                log::warn!("day {d} has no observations; skipping");
                continue;
            }
            Err(e) => return Err(e),
        };
        acc = Some(match acc {
            None => day_graph,
            Some(prev) => product(mode, &prev, &day_graph),
        });
    }
    Ok(acc.unwrap_or_default())
}

/// One row of the reduction-tree report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelReport {
    pub level: usize,
    /// Graphs alive at this level.
    pub nodes: usize,
    /// Products performed to reach this level (0 for the leaves).
    pub products: usize,
    pub mappings: usize,
    pub matches: usize,
    /// Largest user side over all mappings; shrinks monotonically from
    /// leaves to root.
    pub max_user_side: usize,
    pub wall_ms: u128,
}

fn level_stats(level: usize, products: usize, graphs: &[Graph], wall_ms: u128) -> LevelReport {
    LevelReport {
        level,
        nodes: graphs.len(),
        products,
        mappings: graphs.iter().map(|g| g.mappings.len()).sum(),
        matches: graphs.iter().map(|g| g.matches.len()).sum(),
        max_user_side: graphs
            .iter()
            .flat_map(|g| g.mappings.iter().map(|m| m.users().len()))
            .max()
            .unwrap_or(0),
        wall_ms,
    }
}

/// Runs `jobs` closures over at most `workers` threads, collecting results
/// in job order regardless of scheduling.
fn run_indexed<T: Send, F: Fn(usize) -> T + Sync>(jobs: usize, workers: usize, f: F) -> Vec<T> {
    let workers = workers.clamp(1, jobs.max(1));
    if jobs == 0 {
        return Vec::new();
    }
    if workers == 1 {
        return (0..jobs).map(f).collect();
    }
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..jobs).map(|_| None).collect());
    let cursor = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| {
                loop {
                    let i = cursor.fetch_add(1, Ordering::SeqCst);
                    if i >= jobs {
                        break;
                    }
                    let out = f(i);
                    slots.lock().expect("worker poisoned the slot lock")[i] = Some(out);
                }
            });
        }
    });
    slots
        .into_inner()
        .expect("worker poisoned the slot lock")
        .into_iter()
        .map(|s| s.expect("every job index was claimed"))
        .collect()
}

/// Combines the per-window graphs as a binary tree: adjacent pairs
/// multiply (earlier operand chunked), an odd trailing graph carries up
/// unchanged, until one graph remains. Exactly `n - 1` products run for
/// `n` leaves. Appends one report row per level, leaves included.
pub fn tree_combine(
    graphs: Vec<Graph>,
    mode: ProductMode,
    workers: usize,
    report: &mut Vec<LevelReport>,
) -> Graph {
    if graphs.is_empty() {
        return Graph::default();
    }
    let workers = workers.max(1);
    let mut level = 0;
    report.push(level_stats(level, 0, &graphs, 0));

    let mut current = graphs;
    while current.len() > 1 {
        let pairs = current.len() / 2;
        let trailing = if current.len() % 2 == 1 {
            current.pop()
        } else {
            None
        };

        // Idle window-level workers move into the products as the tree
        // narrows.
        let per_product = (workers / pairs.max(1)).max(1);
        let level_mode = match mode {
            ProductMode::Exact => ProductMode::Exact,
            ProductMode::Chunked { chunks } => ProductMode::Chunked {
                chunks: chunks.max(per_product),
            },
        };

        let started = Instant::now();
        let mut next = run_indexed(pairs, workers, |i| {
            product(level_mode, &current[2 * i], &current[2 * i + 1])
        });
        if let Some(t) = trailing {
            next.push(t);
        }
        let wall_ms = started.elapsed().as_millis();

        level += 1;
        report.push(level_stats(level, pairs, &next, wall_ms));
        current = next;
    }
    current.into_iter().next().expect("at least one graph")
}

/// Full-run configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunConfig {
    pub window_days: u32,
    pub lookahead: u32,
    pub mode: ProductMode,
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            window_days: 14,
            lookahead: 1,
            mode: ProductMode::Exact,
            workers: 1,
        }
    }
}

/// Per-window summary in the run report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowSummary {
    pub interval: (u32, u32),
    pub mappings: usize,
    pub matches: usize,
    pub wall_ms: u128,
}

/// What a full run produces: the final graph plus size/timing reports.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOutput {
    pub graph: Graph,
    pub windows: Vec<WindowSummary>,
    pub levels: Vec<LevelReport>,
}

/// End-to-end: plan windows over the observed range, fold them (windows run
/// concurrently up to the worker budget), then reduce the window graphs as
/// a binary tree.
pub fn run(obs: &ObservationSet, cfg: &RunConfig) -> Result<RunOutput> {
    let (Some(first), Some(last)) = (obs.first_day(), obs.last_day()) else {
        return Err(Error::EmptyInput);
    };
    let plan = plan_windows(first, last, cfg.window_days)?;
    let day_window = DayWindow::new(cfg.lookahead);

    let folded = run_indexed(plan.intervals.len(), cfg.workers, |i| {
        let started = Instant::now();
        let graph = fold_window(plan.intervals[i], obs, day_window, cfg.mode);
        (graph, started.elapsed().as_millis())
    });

    let mut windows = Vec::with_capacity(folded.len());
    let mut graphs = Vec::with_capacity(folded.len());
    for ((graph, wall_ms), interval) in folded.into_iter().zip(&plan.intervals) {
        let graph = graph?;
        windows.push(WindowSummary {
            interval: *interval,
            mappings: graph.mappings.len(),
            matches: graph.matches.len(),
            wall_ms,
        });
        graphs.push(graph);
    }

    let mut levels = Vec::new();
    let graph = tree_combine(graphs, cfg.mode, cfg.workers, &mut levels);
    Ok(RunOutput {
        graph,
        windows,
        levels,
    })
}
