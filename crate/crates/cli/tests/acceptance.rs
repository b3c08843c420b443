//! Acceptance suite: one test per criterion, each printing a PASS/FAIL
//! line (run with `--nocapture` to see them).
//!
//! Criteria 1-5 and 8 exercise the library directly; 6, 7, 9, and 10 drive
//! the `mapmatch` binary end to end.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Output;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mapmatch_core::algebra::{ProductMode, normalize, product_chunked, product_pair};
use mapmatch_core::daygraph::{self, DayWindow};
use mapmatch_core::model::{Graph, MacId, Mapping, UserId};
use mapmatch_core::pipeline::{self, RunConfig};
use mapmatch_core::synth::{self, WorldParams};

fn uid(i: usize) -> UserId {
    UserId::new(format!("u{i:03}"))
}

fn mid(i: usize) -> MacId {
    MacId::new(format!("m{i:03}"))
}

fn random_side(rng: &mut ChaCha8Rng, pool: usize, max_len: usize) -> BTreeSet<usize> {
    let len = rng.random_range(1..=max_len);
    (0..len).map(|_| rng.random_range(0..pool)).collect()
}

fn random_mapping(rng: &mut ChaCha8Rng, pool: usize) -> Mapping {
    let users = random_side(rng, pool, 8);
    let macs = random_side(rng, pool, 8);
    Mapping::new(users.into_iter().map(uid), macs.into_iter().map(mid)).unwrap()
}

fn random_graph(rng: &mut ChaCha8Rng, pool: usize, max_mappings: usize) -> Graph {
    let n = rng.random_range(0..=max_mappings);
    Graph::from_mappings((0..n).map(|_| random_mapping(rng, pool)).collect())
}

// --- criterion 1 -----------------------------------------------------------

/// Independent three-term evaluation of the pair product, on plain vectors.
fn pair_product_reference(w: &Mapping, v: &Mapping) -> Vec<(Vec<String>, Vec<String>)> {
    let side = |s: &BTreeSet<UserId>| -> Vec<String> { s.iter().map(|u| u.0.clone()).collect() };
    let mide = |s: &BTreeSet<MacId>| -> Vec<String> { s.iter().map(|m| m.0.clone()).collect() };
    let diff = |a: &[String], b: &[String]| -> Vec<String> {
        a.iter().filter(|x| !b.contains(x)).cloned().collect()
    };
    let inter = |a: &[String], b: &[String]| -> Vec<String> {
        a.iter().filter(|x| b.contains(x)).cloned().collect()
    };
    let (wu, wm, vu, vm) = (
        side(w.users()),
        mide(w.macs()),
        side(v.users()),
        mide(v.macs()),
    );
    let terms = [
        (diff(&wu, &vu), diff(&wm, &vm)),
        (inter(&wu, &vu), inter(&wm, &vm)),
        (diff(&vu, &wu), diff(&vm, &wm)),
    ];
    terms
        .into_iter()
        .filter(|(us, ms)| !us.is_empty() && !ms.is_empty())
        .collect()
}

#[test]
fn criterion_1_pair_product_identity() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC1);
    let cases = 1000;
    for _ in 0..cases {
        let w = random_mapping(&mut rng, 14);
        let v = random_mapping(&mut rng, 14);
        let got: Vec<(Vec<String>, Vec<String>)> = product_pair(&w, &v)
            .iter()
            .map(|m| {
                (
                    m.users().iter().map(|u| u.0.clone()).collect(),
                    m.macs().iter().map(|x| x.0.clone()).collect(),
                )
            })
            .collect();
        let expect = pair_product_reference(&w, &v);
        assert_eq!(got, expect, "pair product diverged on {w:?} x {v:?}");
    }
    let elapsed = started.elapsed();
    assert!(
        elapsed < Duration::from_secs(1),
        "criterion 1 FAIL — took {elapsed:?}, budget 1s"
    );
    println!(
        "criterion 1 PASS — {cases} random pairs match the three-term evaluation in {elapsed:?}"
    );
}

// --- criterion 2 -----------------------------------------------------------

#[test]
fn criterion_2_chunking_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC2);
    let cases = 500;
    for case in 0..cases {
        let g0 = random_graph(&mut rng, 12, 8);
        let g1 = random_graph(&mut rng, 12, 8);
        let base = normalize(product_chunked(&g0, &g1, 1));
        for chunks in [2, 3, 8] {
            let other = normalize(product_chunked(&g0, &g1, chunks));
            assert_eq!(
                base, other,
                "criterion 2 FAIL — chunk count {chunks} changed the result on case {case}"
            );
        }
    }
    println!("criterion 2 PASS — {cases} random graph pairs identical for P in {{1,2,3,8}}");
}

// --- criteria 3 & 4 --------------------------------------------------------

struct WorldOutcome {
    seed: u64,
    matches_agree: bool,
    precision: f64,
    recall: f64,
}

fn complete_observation_outcomes() -> &'static (Vec<WorldOutcome>, Duration) {
    static OUTCOMES: OnceLock<(Vec<WorldOutcome>, Duration)> = OnceLock::new();
    OUTCOMES.get_or_init(|| {
        let started = Instant::now();
        let mut results = Vec::new();
        for seed in 0..100u64 {
            let mut size_rng = ChaCha8Rng::seed_from_u64(seed ^ 0xC3);
            let mut params = WorldParams::new(
                size_rng.random_range(2..=5),
                size_rng.random_range(10..=200),
                size_rng.random_range(4..=20),
                seed,
            );
            params.move_prob = 0.15 + 0.5 * size_rng.random::<f64>();
            let truth = synth::generate_world(&params).unwrap();
            let obs = synth::sample_observations(&truth, &params).unwrap();

            // Alternate product variants across worlds.
            let mode = if seed % 2 == 0 {
                ProductMode::chunked(1 + (seed % 4) as usize)
            } else {
                ProductMode::Exact
            };
            let out = pipeline::run(
                &obs,
                &RunConfig {
                    window_days: 5,
                    lookahead: 1,
                    mode,
                    workers: 2,
                },
            )
            .unwrap();

            let leaves = daygraph::leaf_mappings(&obs, DayWindow::default());
            let traced = synth::trace_oracle(&leaves);
            let fixed = synth::naive_fixpoint(&Graph::from_mappings(leaves));
            let agree = out.graph.matches == traced.matches && out.graph.matches == fixed.matches;

            let report = synth::evaluate(&out.graph, &truth);
            results.push(WorldOutcome {
                seed,
                matches_agree: agree,
                precision: report.precision,
                recall: report.recall,
            });
        }
        (results, started.elapsed())
    })
}

#[test]
fn criterion_3_oracle_equivalence_complete_observation() {
    let (outcomes, elapsed) = complete_observation_outcomes();
    let disagreements: Vec<u64> = outcomes
        .iter()
        .filter(|o| !o.matches_agree)
        .map(|o| o.seed)
        .collect();
    assert!(
        disagreements.is_empty(),
        "criterion 3 FAIL — pipeline and oracles disagree on seeds {disagreements:?}"
    );
    assert!(
        *elapsed < Duration::from_secs(120),
        "criterion 3 FAIL — took {elapsed:?}, budget 2min"
    );
    println!(
        "criterion 3 PASS — pipeline == trace oracle == naive fixpoint on {} worlds in {elapsed:?}",
        outcomes.len()
    );
}

#[test]
fn criterion_4_soundness_complete_observation() {
    let (outcomes, _) = complete_observation_outcomes();
    let imperfect: Vec<(u64, f64)> = outcomes
        .iter()
        .filter(|o| o.precision != 1.0)
        .map(|o| (o.seed, o.precision))
        .collect();
    assert!(
        imperfect.is_empty(),
        "criterion 4 FAIL — precision below 1.0 on {imperfect:?}"
    );
    let mean_recall = outcomes.iter().map(|o| o.recall).sum::<f64>() / outcomes.len() as f64;
    println!(
        "criterion 4 PASS — precision 1.000 on all {} worlds; mean recall {mean_recall:.3} (reported, no threshold)",
        outcomes.len()
    );
}

// --- criterion 5 -----------------------------------------------------------

#[test]
fn criterion_5_sampling_co_occurrence() {
    let mut precisions = Vec::new();
    let mut recalls = Vec::new();
    for seed in 0..50u64 {
        let mut size_rng = ChaCha8Rng::seed_from_u64(seed ^ 0xC5);
        let mut params = WorldParams::new(
            size_rng.random_range(2..=4),
            size_rng.random_range(20..=120),
            size_rng.random_range(6..=16),
            seed,
        );
        params.move_prob = 0.2 + 0.4 * size_rng.random::<f64>();
        params.obs_prob_user = 0.5;
        params.obs_prob_mac = 0.5;
        let truth = synth::generate_world(&params).unwrap();
        let obs = synth::sample_observations(&truth, &params).unwrap();
        if obs.is_empty() {
            continue;
        }
        let out = pipeline::run(
            &obs,
            &RunConfig {
                window_days: 5,
                lookahead: 1,
                mode: ProductMode::chunked(2),
                workers: 2,
            },
        )
        .unwrap();
        let leaves = daygraph::leaf_mappings(&obs, DayWindow::default());
        for m in &out.graph.matches {
            let co_occurred = leaves
                .iter()
                .any(|leaf| leaf.users().contains(&m.user) && leaf.macs().contains(&m.mac));
            assert!(
                co_occurred,
                "criterion 5 FAIL — match {m:?} (seed {seed}) never co-occurred in a leaf"
            );
        }
        let report = synth::evaluate(&out.graph, &truth);
        precisions.push(report.precision);
        recalls.push(report.recall);
    }
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len().max(1) as f64;
    println!(
        "criterion 5 PASS — every emitted match co-occurred in a leaf on {} sampled worlds; \
         measured precision mean {:.3}, recall mean {:.3} (no thresholds)",
        precisions.len(),
        mean(&precisions),
        mean(&recalls)
    );
}

// --- CLI helpers -----------------------------------------------------------

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_mapmatch")
}

fn run_ok(dir: &Path, args: &[&str]) -> Output {
    let out = std::process::Command::new(bin())
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "command {:?} failed with {:?}\nstdout: {}\nstderr: {}",
        args,
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read_bytes(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

/// generate -> build -> combine, in `dir`, returning the artifact paths.
fn end_to_end(dir: &Path, tag: &str, window_days: u32, check: bool) -> Vec<PathBuf> {
    let events = format!("{tag}-events.jsonl");
    let truth = format!("{tag}-truth.jsonl");
    let wins = format!("{tag}-wins");
    let final_graph = format!("{tag}-final.mmg");
    let report = format!("{tag}-report.txt");
    let checkflag: &[&str] = if check { &["--check-disjoint"] } else { &[] };

    run_ok(
        dir,
        &[
            [
                "generate",
                "--seed",
                "1234",
                "--locations",
                "4",
                "--devices",
                "120",
                "--days",
                "56",
                "--move-prob",
                "0.3",
                "--out-events",
                &events,
                "--out-truth",
                &truth,
            ]
            .as_slice(),
            checkflag,
        ]
        .concat(),
    );
    run_ok(
        dir,
        &[
            [
                "build",
                "--events",
                &events,
                "--out-dir",
                &wins,
                "--window-days",
                &window_days.to_string(),
                "--mode",
                "chunked",
                "--chunks",
                "2",
            ]
            .as_slice(),
            checkflag,
        ]
        .concat(),
    );
    let mut window_files: Vec<PathBuf> = std::fs::read_dir(dir.join(&wins))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    window_files.sort();
    let mut combine_args: Vec<String> = vec!["combine".into()];
    combine_args.extend(
        window_files
            .iter()
            .map(|p| p.to_string_lossy().into_owned()),
    );
    combine_args.extend([
        "--out".into(),
        final_graph.clone(),
        "--report".into(),
        report.clone(),
        "--workers".into(),
        "4".into(),
        "--mode".into(),
        "chunked".into(),
    ]);
    if check {
        combine_args.push("--check-disjoint".into());
    }
    let args: Vec<&str> = combine_args.iter().map(|s| s.as_str()).collect();
    run_ok(dir, &args);

    let mut artifacts = vec![
        dir.join(events),
        dir.join(truth),
        dir.join(final_graph),
        dir.join(report),
    ];
    artifacts.extend(window_files);
    artifacts
}

// --- criterion 6 -----------------------------------------------------------

#[test]
fn criterion_6_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let a = end_to_end(dir.path(), "runa", 14, false);
    let b = end_to_end(dir.path(), "runb", 14, false);
    assert_eq!(a.len(), b.len(), "criterion 6 FAIL — artifact lists differ");
    for (pa, pb) in a.iter().zip(&b) {
        assert_eq!(
            read_bytes(pa),
            read_bytes(pb),
            "criterion 6 FAIL — {} and {} differ",
            pa.display(),
            pb.display()
        );
    }
    println!(
        "criterion 6 PASS — two identical end-to-end runs produced byte-identical files ({} artifacts)",
        a.len()
    );
}

// --- criterion 7 -----------------------------------------------------------

#[test]
fn criterion_7_disjointness_instrumented() {
    let dir = tempfile::tempdir().unwrap();
    let mut audited = 0u64;

    // Complete observation, both product variants.
    for (tag, mode) in [("c7exact", "exact"), ("c7chunked", "chunked")] {
        let events = format!("{tag}-events.jsonl");
        run_ok(
            dir.path(),
            &[
                "generate",
                "--seed",
                "77",
                "--locations",
                "4",
                "--devices",
                "80",
                "--days",
                "28",
                "--out-events",
                &events,
                "--out-truth",
                &format!("{tag}-truth.jsonl"),
            ],
        );
        audited += audit_pipeline(dir.path(), tag, &events, mode);
    }

    // Sampled observation, exact variant.
    let events = "c7sampled-events.jsonl";
    run_ok(
        dir.path(),
        &[
            "generate",
            "--seed",
            "78",
            "--locations",
            "4",
            "--devices",
            "80",
            "--days",
            "28",
            "--obs-prob-user",
            "0.5",
            "--obs-prob-mac",
            "0.5",
            "--out-events",
            events,
            "--out-truth",
            "c7sampled-truth.jsonl",
        ],
    );
    audited += audit_pipeline(dir.path(), "c7sampled", events, "exact");

    assert!(audited > 0, "criterion 7 FAIL — nothing was audited");
    println!(
        "criterion 7 PASS — {audited} normalized graphs audited across three instrumented runs, zero duplicate tokens"
    );
}

/// Runs build + combine with `--check-disjoint` (exit code 3 would flag a
/// violation) and returns how many graphs the audit inspected.
fn audit_pipeline(dir: &Path, tag: &str, events: &str, mode: &str) -> u64 {
    let wins = format!("{tag}-wins");
    let out = run_ok(
        dir,
        &[
            "build",
            "--check-disjoint",
            "--events",
            events,
            "--out-dir",
            &wins,
            "--window-days",
            "7",
            "--mode",
            mode,
            "--chunks",
            "2",
        ],
    );
    let mut audited = parse_audit(&out);
    let mut window_files: Vec<PathBuf> = std::fs::read_dir(dir.join(&wins))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    window_files.sort();
    let mut args: Vec<String> = vec!["combine".into(), "--check-disjoint".into()];
    args.extend(
        window_files
            .iter()
            .map(|p| p.to_string_lossy().into_owned()),
    );
    args.extend([
        "--out".into(),
        format!("{tag}-final.mmg"),
        "--mode".into(),
        mode.into(),
        "--workers".into(),
        "2".into(),
    ]);
    let args: Vec<&str> = args.iter().map(|s| s.as_str()).collect();
    audited += parse_audit(&run_ok(dir, &args));
    audited
}

fn parse_audit(out: &Output) -> u64 {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr
        .lines()
        .find(|l| l.contains("disjointness audit:"))
        .unwrap_or_else(|| panic!("no audit line in stderr: {stderr}"));
    assert!(
        line.contains(" 0 violation(s)"),
        "criterion 7 FAIL — audit reported violations: {line}"
    );
    line.split("audit:")
        .nth(1)
        .and_then(|rest| rest.trim().split(' ').next())
        .and_then(|n| n.parse().ok())
        .expect("audit line carries a count")
}

// --- criterion 8 -----------------------------------------------------------

/// A 10,000-block graph over 100,000 tokens per side (average side 10),
/// shuffled so blocks of the two operands overlap heavily.
fn desk_scale_graph(seed: u64) -> Graph {
    let blocks = 10_000;
    let tokens = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut users: Vec<usize> = (0..tokens).collect();
    let mut macs: Vec<usize> = (0..tokens).collect();
    for i in (1..tokens).rev() {
        users.swap(i, rng.random_range(0..=i));
        macs.swap(i, rng.random_range(0..=i));
    }
    let per = tokens / blocks;
    let mut mappings = Vec::with_capacity(blocks);
    for b in 0..blocks {
        mappings.push(
            Mapping::new(
                users[b * per..(b + 1) * per]
                    .iter()
                    .map(|i| UserId::new(format!("u{i:06}"))),
                macs[b * per..(b + 1) * per]
                    .iter()
                    .map(|i| MacId::new(format!("m{i:06}"))),
            )
            .unwrap(),
        );
    }
    Graph::from_mappings(mappings)
}

#[test]
fn criterion_8_parallel_scaling() {
    let g0 = desk_scale_graph(0x81);
    let g1 = desk_scale_graph(0x82);

    // Completion half of the criterion.
    let reference = product_chunked(&g0, &g1, 1);
    assert!(
        !reference.mappings.is_empty() || !reference.matches.is_empty(),
        "criterion 8 FAIL — product produced nothing"
    );

    // Median-of-three timing, interleaved.
    let time_once = |chunks: usize| {
        let t = Instant::now();
        let out = product_chunked(&g0, &g1, chunks);
        let elapsed = t.elapsed();
        assert_eq!(out.matches, reference.matches);
        elapsed
    };
    let mut t1 = Vec::new();
    let mut t4 = Vec::new();
    for _ in 0..3 {
        t1.push(time_once(1));
        t4.push(time_once(4));
    }
    t1.sort();
    t4.sort();
    let speedup = t1[1].as_secs_f64() / t4[1].as_secs_f64();
    let cores = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    let detail = format!(
        "10k x 10k product completes; 1 worker {t1:?}, 4 workers {t4:?}, speedup {speedup:.2}x on {cores} core(s)"
    );
    if speedup >= 1.8 {
        println!("criterion 8 PASS — {detail}");
    } else {
        println!("criterion 8 FAIL — {detail}; bound is 1.8x");
        panic!("criterion 8 FAIL — speedup {speedup:.2}x < 1.8x ({detail})");
    }
}

// --- criterion 9 -----------------------------------------------------------

#[test]
fn criterion_9_table_format() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(
        dir.path(),
        &[
            "generate",
            "--seed",
            "9",
            "--locations",
            "3",
            "--devices",
            "60",
            "--days",
            "10",
            "--move-prob",
            "0.2",
            "--out-events",
            "events.jsonl",
            "--out-truth",
            "truth.jsonl",
        ],
    );
    run_ok(
        dir.path(),
        &[
            "build",
            "--events",
            "events.jsonl",
            "--out-dir",
            "wins",
            "--window-days",
            "5",
        ],
    );
    let out = run_ok(dir.path(), &["stats", "wins/window-0000.mmg"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(
        text.contains("| matches | mappings | users covered | macs coverage |"),
        "criterion 9 FAIL — coverage header missing in:\n{text}"
    );
    assert!(
        text.contains("| Min. | 1st Qu. | Median | Mean | 3rd Qu. | Max. |"),
        "criterion 9 FAIL — ratio header missing in:\n{text}"
    );
    println!("criterion 9 PASS — stats reproduces both table column structures exactly");
}

// --- criterion 10 ----------------------------------------------------------

#[test]
fn criterion_10_window_size_experiment() {
    let dir = tempfile::tempdir().unwrap();

    let mut rows = Vec::new();
    for window_days in [14u32, 28] {
        let tag_a = format!("w{window_days}a");
        let tag_b = format!("w{window_days}b");
        // Instrumented first run plus a determinism rerun.
        let a = end_to_end(dir.path(), &tag_a, window_days, true);
        let b = end_to_end(dir.path(), &tag_b, window_days, true);
        for (pa, pb) in a.iter().zip(&b) {
            assert_eq!(
                read_bytes(pa),
                read_bytes(pb),
                "criterion 10 FAIL — rerun differs for window {window_days}"
            );
        }
        let final_graph = mapmatch_core::io::read_graph(&a[2]).unwrap();
        let truth_pairs: BTreeSet<(UserId, MacId)> = mapmatch_core::io::read_truth_pairs(&a[1])
            .unwrap()
            .into_iter()
            .collect();
        let eval = synth::evaluate_against_pairs(&final_graph, &truth_pairs);
        let windows = a.len() - 4;
        rows.push((window_days, windows, eval));
    }

    println!("criterion 10 PASS — window-size experiment on one fixed world (56 days):");
    println!("| window_days | windows | matches | mappings | precision | recall |");
    for (wd, windows, eval) in &rows {
        println!(
            "| {wd} | {windows} | {} | {} | {:.3} | {:.3} |",
            eval.n_matches, eval.n_mappings, eval.precision, eval.recall
        );
    }
}

// --- supporting checks -----------------------------------------------------

/// The deterministic report file must not carry wall-clock columns.
#[test]
fn report_file_is_time_free() {
    let dir = tempfile::tempdir().unwrap();
    let artifacts = end_to_end(dir.path(), "rep", 14, false);
    let report = std::fs::read_to_string(&artifacts[3]).unwrap();
    assert!(report.contains("level 0 nodes"));
    assert!(!report.contains("wall_ms"));
}

/// On complete observation the CLI oracle-diff reports a zero match-set
/// difference between the pipeline and both oracles.
#[test]
fn oracle_diff_zero_on_complete_observation() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(
        dir.path(),
        &[
            "generate",
            "--seed",
            "31",
            "--locations",
            "3",
            "--devices",
            "40",
            "--days",
            "12",
            "--out-events",
            "events.jsonl",
            "--out-truth",
            "truth.jsonl",
        ],
    );
    let out = run_ok(
        dir.path(),
        &[
            "oracle-diff",
            "--events",
            "events.jsonl",
            "--window-days",
            "4",
        ],
    );
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(
        text.matches("0 only-pipeline, 0 only-oracle").count(),
        2,
        "expected zero differences, got:\n{text}"
    );
}

/// The intersection-first product may leave overlapping blocks behind when
/// one side of the evidence is missing; the audit must catch that and fail
/// the run with exit code 3.
#[test]
fn audit_flags_unpaired_chunked_overlap() {
    let dir = tempfile::tempdir().unwrap();
    // Day 0: users a,b share mac m (b's mac never observed).
    // Day 1: user a reappears with macs n,o only. The user sides intersect,
    // the mac sides do not, so the chunked product passes both blocks
    // through and `a` survives in two mappings.
    let events = concat!(
        r#"{"day":0,"loc":0,"kind":"user","id":"a"}"#,
        "\n",
        r#"{"day":0,"loc":0,"kind":"user","id":"b"}"#,
        "\n",
        r#"{"day":0,"loc":0,"kind":"mac","id":"m"}"#,
        "\n",
        r#"{"day":1,"loc":0,"kind":"user","id":"a"}"#,
        "\n",
        r#"{"day":1,"loc":0,"kind":"mac","id":"n"}"#,
        "\n",
        r#"{"day":1,"loc":0,"kind":"mac","id":"o"}"#,
        "\n",
    );
    std::fs::write(dir.path().join("events.jsonl"), events).unwrap();
    run_ok(
        dir.path(),
        &[
            "build",
            "--events",
            "events.jsonl",
            "--out-dir",
            "wins",
            "--window-days",
            "1",
            "--mode",
            "chunked",
        ],
    );
    let out = std::process::Command::new(bin())
        .args([
            "combine",
            "--check-disjoint",
            "wins/window-0000.mmg",
            "wins/window-0001.mmg",
            "--out",
            "final.mmg",
            "--mode",
            "chunked",
        ])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(3),
        "expected invariant-violation exit code, stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Exit codes: 1 usage, 2 data error.
#[test]
fn exit_codes_match_contract() {
    let dir = tempfile::tempdir().unwrap();
    let usage = std::process::Command::new(bin())
        .arg("no-such-command")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(usage.status.code(), Some(1));

    std::fs::write(dir.path().join("empty.jsonl"), "").unwrap();
    let data = std::process::Command::new(bin())
        .args(["build", "--events", "empty.jsonl", "--out-dir", "w"])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(data.status.code(), Some(2));
}
