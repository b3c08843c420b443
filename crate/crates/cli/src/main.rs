//! Command-line surface for the mapping/matching engine.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 internal
//! invariant violation.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::panic::AssertUnwindSafe;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use mapmatch_core::algebra::ProductMode;
use mapmatch_core::daygraph::{self, DayWindow};
use mapmatch_core::io;
use mapmatch_core::model::Graph;
use mapmatch_core::pipeline::{self, LevelReport, RunConfig};
use mapmatch_core::stats::stats;
use mapmatch_core::synth::{self, WorldParams};
use mapmatch_core::{Match, instrument};

#[derive(Parser)]
#[command(
    name = "mapmatch",
    version,
    about = "Recovers one-to-one user/mac matchings from daily co-location samples"
)]
struct Cli {
    /// Audit disjointness after every normalization; any violation makes
    /// the run fail with exit code 3.
    #[arg(long, global = true)]
    check_disjoint: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    Chunked,
}

/// Product/parallelism flags shared by the graph-building commands.
#[derive(Args, Clone, Copy)]
struct EngineArgs {
    /// Days per window interval.
    #[arg(long, default_value_t = 14)]
    window_days: u32,

    /// How many days ahead a departure may land (0 = same day only).
    #[arg(long, default_value_t = 1)]
    lookahead: u32,

    /// Product evaluation strategy.
    #[arg(long, value_enum, default_value_t = ModeArg::Chunked)]
    mode: ModeArg,

    /// Chunk count for the chunked product.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    chunks: u32,

    /// Global worker budget shared by window folds and tree products.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    workers: u32,
}

impl EngineArgs {
    fn product_mode(&self) -> ProductMode {
        match self.mode {
            ModeArg::Exact => ProductMode::Exact,
            ModeArg::Chunked => ProductMode::chunked(self.chunks as usize),
        }
    }

    fn run_config(&self) -> RunConfig {
        RunConfig {
            window_days: self.window_days,
            lookahead: self.lookahead,
            mode: self.product_mode(),
            workers: self.workers as usize,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic world: an event stream plus its hidden truth.
    Generate {
        #[arg(long, default_value_t = 3)]
        locations: u32,
        #[arg(long, default_value_t = 50)]
        devices: u32,
        #[arg(long, default_value_t = 20)]
        days: u32,
        /// Probability a device flies to another location on a given day.
        #[arg(long, default_value_t = 0.3)]
        move_prob: f64,
        /// Sampling probability of a user-ID sighting.
        #[arg(long, default_value_t = 1.0)]
        obs_prob_user: f64,
        /// Sampling probability of a mac-ID sighting.
        #[arg(long, default_value_t = 1.0)]
        obs_prob_mac: f64,
        /// Daily probability a device rotates to a fresh user token.
        #[arg(long, default_value_t = 0.0)]
        churn_prob: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Where to write the event stream.
        #[arg(long)]
        out_events: PathBuf,
        /// Where to write the device/user/mac truth records.
        #[arg(long)]
        out_truth: PathBuf,
        /// Also dump the per-day presence schedule (debugging aid).
        #[arg(long)]
        dump_schedule: Option<PathBuf>,
    },

    /// Build one graph file per window from an event stream.
    Build {
        /// Newline-delimited event file.
        #[arg(long)]
        events: PathBuf,
        /// Directory for the window graph files (created if missing).
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        engine: EngineArgs,
    },

    /// Combine graph files (chronological order) into one final graph.
    Combine {
        /// Graph files, earliest first.
        #[arg(required = true)]
        graphs: Vec<PathBuf>,
        /// Where to write the final graph.
        #[arg(long)]
        out: PathBuf,
        /// Optional deterministic reduction report file.
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        engine: EngineArgs,
    },

    /// Print coverage counts and the user/mac ratio table for a graph.
    Stats { graph: PathBuf },

    /// Score a graph's matches against a truth file.
    Verify {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },

    /// Compare the pipeline's match set against both brute-force oracles.
    OracleDiff {
        #[arg(long)]
        events: PathBuf,
        #[command(flatten)]
        engine: EngineArgs,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();

    if cli.check_disjoint {
        instrument::set_enabled(true);
    }
    match std::panic::catch_unwind(AssertUnwindSafe(|| dispatch(cli.command))) {
        Err(_) => std::process::exit(3),
        Ok(Err(err)) => {
            eprintln!("error: {err:#}");
            std::process::exit(2);
        }
        Ok(Ok(())) => {
            if cli.check_disjoint {
                let violations = instrument::violations();
                eprintln!(
                    "disjointness audit: {} graph(s) checked, {} violation(s)",
                    instrument::checks(),
                    violations
                );
                if violations > 0 {
                    std::process::exit(3);
                }
            }
        }
    }
}

fn dispatch(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Generate {
            locations,
            devices,
            days,
            move_prob,
            obs_prob_user,
            obs_prob_mac,
            churn_prob,
            seed,
            out_events,
            out_truth,
            dump_schedule,
        } => {
            let params = WorldParams {
                n_locations: locations,
                n_devices: devices,
                n_days: days,
                move_prob,
                obs_prob_user,
                obs_prob_mac,
                seed,
                churn_prob,
            };
            let truth = synth::generate_world(&params)?;
            let obs = synth::sample_observations(&truth, &params)?;
            io::write_events(&obs, &out_events)
                .with_context(|| format!("writing {}", out_events.display()))?;
            io::write_truth(&truth, &out_truth)
                .with_context(|| format!("writing {}", out_truth.display()))?;
            if let Some(path) = dump_schedule {
                io::write_schedule(&truth, &path)
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            println!(
                "generated {} batches over {} days ({} devices, {} locations, seed {})",
                obs.len(),
                days,
                devices,
                locations,
                seed
            );
            Ok(())
        }

        Command::Build {
            events,
            out_dir,
            engine,
        } => {
            let obs = io::parse_events(&events)
                .with_context(|| format!("reading {}", events.display()))?;
            let (first, last) = (
                obs.first_day().expect("non-empty after parse"),
                obs.last_day().expect("non-empty after parse"),
            );
            let plan = pipeline::plan_windows(first, last, engine.window_days)?;
            std::fs::create_dir_all(&out_dir)
                .with_context(|| format!("creating {}", out_dir.display()))?;
            let day_window = DayWindow::new(engine.lookahead);
            for (i, interval) in plan.intervals.iter().enumerate() {
                let graph =
                    pipeline::fold_window(*interval, &obs, day_window, engine.product_mode())?;
                let path = window_file(&out_dir, i);
                io::write_graph(&graph, &path)
                    .with_context(|| format!("writing {}", path.display()))?;
                println!(
                    "window {i} days {}..={} mappings {} matches {} -> {}",
                    interval.0,
                    interval.1,
                    graph.mappings.len(),
                    graph.matches.len(),
                    path.display()
                );
            }
            Ok(())
        }

        Command::Combine {
            graphs,
            out,
            report,
            engine,
        } => {
            let mut loaded = Vec::with_capacity(graphs.len());
            for path in &graphs {
                loaded.push(
                    io::read_graph(path).with_context(|| format!("reading {}", path.display()))?,
                );
            }
            let mut levels = Vec::new();
            let final_graph = pipeline::tree_combine(
                loaded,
                engine.product_mode(),
                engine.workers as usize,
                &mut levels,
            );
            io::write_graph(&final_graph, &out)
                .with_context(|| format!("writing {}", out.display()))?;
            print!("{}", render_levels(&levels, true));
            if let Some(path) = report {
                io::atomic_write(&path, render_levels(&levels, false).as_bytes())
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            println!(
                "final graph: {} mappings, {} matches -> {}",
                final_graph.mappings.len(),
                final_graph.matches.len(),
                out.display()
            );
            Ok(())
        }

        Command::Stats { graph } => {
            let g =
                io::read_graph(&graph).with_context(|| format!("reading {}", graph.display()))?;
            print!("{}", stats(&g));
            Ok(())
        }

        Command::Verify { graph, truth } => {
            let g =
                io::read_graph(&graph).with_context(|| format!("reading {}", graph.display()))?;
            let pairs: BTreeSet<_> = io::read_truth_pairs(&truth)
                .with_context(|| format!("reading {}", truth.display()))?
                .into_iter()
                .collect();
            let report = synth::evaluate_against_pairs(&g, &pairs);
            println!("matches        {}", report.n_matches);
            println!("true_matches   {}", report.true_matches);
            println!("precision      {:.6}", report.precision);
            println!("recall         {:.6}", report.recall);
            println!("mappings       {}", report.n_mappings);
            println!("users_covered  {}", report.users_covered);
            println!("macs_covered   {}", report.macs_covered);
            if report.empty_match_set {
                println!("note: no matches emitted; precision reported as 1.0 by convention");
            }
            Ok(())
        }

        Command::OracleDiff { events, engine } => {
            let obs = io::parse_events(&events)
                .with_context(|| format!("reading {}", events.display()))?;
            let out = pipeline::run(&obs, &engine.run_config())?;
            let leaves = daygraph::leaf_mappings(&obs, DayWindow::new(engine.lookahead));
            let traced = synth::trace_oracle(&leaves);
            let fixed = synth::naive_fixpoint(&Graph::from_mappings(leaves));

            println!("pipeline matches       {}", out.graph.matches.len());
            println!("trace oracle matches   {}", traced.matches.len());
            println!("naive fixpoint matches {}", fixed.matches.len());
            let vs_trace = symmetric_diff(&out.graph.matches, &traced.matches);
            let vs_fixed = symmetric_diff(&out.graph.matches, &fixed.matches);
            println!(
                "pipeline vs trace:  {} only-pipeline, {} only-oracle",
                vs_trace.0, vs_trace.1
            );
            println!(
                "pipeline vs naive:  {} only-pipeline, {} only-oracle",
                vs_fixed.0, vs_fixed.1
            );
            Ok(())
        }
    }
}

fn window_file(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("window-{index:04}.mmg"))
}

fn symmetric_diff(a: &BTreeSet<Match>, b: &BTreeSet<Match>) -> (usize, usize) {
    (a.difference(b).count(), b.difference(a).count())
}

/// Renders the per-level reduction report. Wall times are included only in
/// console output; report files stay deterministic.
fn render_levels(levels: &[LevelReport], with_wall: bool) -> String {
    let mut out = String::new();
    for l in levels {
        write!(
            out,
            "level {} nodes {} products {} mappings {} matches {} max_user_side {}",
            l.level, l.nodes, l.products, l.mappings, l.matches, l.max_user_side
        )
        .expect("string write");
        if with_wall {
            write!(out, " wall_ms {}", l.wall_ms).expect("string write");
        }
        out.push('\n');
    }
    out
}
