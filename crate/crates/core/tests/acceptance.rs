// SPDX-License-Identifier: Apache-2.0

//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints exactly one PASS/FAIL line; the process fails if any criterion does.

// The hand formulas spell out ceiling division, and `ensure!` negates
// comparisons so that NaN fails.
#![allow(clippy::manual_div_ceil, clippy::neg_cmp_op_on_partial_ord)]

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use hlsforge::aggregate::{
    archive_dataset, export_tabular, read_standard_json, read_tabular, write_standard_json,
    AggregatedTable, ExecutionMeta, HlsSynthMetrics, ImplMetrics, MetricsBundle, TableRow,
    TabularFormat,
};
use hlsforge::analysis::{wilcoxon_signed_rank, wilcoxon_signed_rank_with, WilcoxonMethod};
use hlsforge::cli::{
    cmd_regress, run_aggregate, run_build, run_demo, run_expand, AggregateOpts, DemoOpts,
    DemoSummary, RegressOpts, RunConfig, DEMO_BASE_DATASET, DEMO_DATASET,
};
use hlsforge::design::{load_dataset, DatasetCollection, WorkspaceLayout};
use hlsforge::executor::{execute_parallel, simulate_schedule, Strategy};
use hlsforge::frontends::{execute_frontend, sample_assignments, FrontendConfig};
use hlsforge::optdsl::{design_space_size, enumerate_design_space, parse_opt_template, render_assignment};
use hlsforge::toolflows::{CostModel, ExternalFlow, FlowStatus, MockHlsSynthFlow, ToolFlow, ToolFlowSpec};

type Outcome = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join("designs")
}

fn within(start: Instant, limit_s: f64) -> Outcome {
    let took = start.elapsed().as_secs_f64();
    ensure!(took < limit_s, "took {took:.2}s, limit {limit_s}s");
    Ok(())
}

const K2MM_TEMPLATE: &str = "loop_opt,3,2
0,lp2,pipeline,unroll,[1 2 4 8]
1,lp3,pipeline,unroll,[1 2 4 8]
2,lp3,,unroll,[1 2 4 8]
set_directive_unroll -factor [factor] k2mm/[name]
set_directive_pipeline k2mm/[name]
";

// ---------------------------------------------------------------------------
// Brute-force OptDSL oracle. Templates are generated from this structure, and
// the oracle enumerates the structure directly without going through the
// parser.

#[derive(Clone, Debug)]
struct OracleLine {
    label: String,
    fixed_pipeline: bool,
    partition: bool,
    choices: Vec<String>,
}

#[derive(Clone, Debug)]
struct OracleGroup {
    name: String,
    lines: Vec<OracleLine>,
}

const TOP: &str = "top";

fn oracle_text(groups: &[OracleGroup]) -> String {
    let mut out = String::new();
    for g in groups {
        let mut templates = Vec::new();
        if g.lines.iter().any(|l| l.fixed_pipeline) {
            templates.push(format!("set_directive_pipeline {TOP}/[name]"));
        }
        if g.lines.iter().any(|l| !l.partition) {
            templates.push(format!("set_directive_unroll -factor [factor] {TOP}/[name]"));
        }
        if g.lines.iter().any(|l| l.partition) {
            templates.push(format!(
                "set_directive_array_partition -type [type] -factor [factor] -dim 1 {TOP} [name]"
            ));
        }
        out.push_str(&format!("{},{},{}\n", g.name, g.lines.len(), templates.len()));
        for (i, l) in g.lines.iter().enumerate() {
            let kind = if l.partition { "array_partition" } else { "unroll" };
            let fixed = if l.fixed_pipeline { "pipeline" } else { "" };
            out.push_str(&format!("{i},{},{fixed},{kind},[{}]\n", l.label, l.choices.join(" ")));
        }
        for t in templates {
            out.push_str(&t);
            out.push('\n');
        }
    }
    out
}

fn oracle_commands(line: &OracleLine, choice: &str) -> Vec<String> {
    let mut cmds = Vec::new();
    if line.fixed_pipeline {
        cmds.push(format!("set_directive_pipeline {TOP}/{}", line.label));
    }
    if line.partition {
        let (kind, factor) = choice.split_once('-').expect("hyphenated choice");
        cmds.push(format!(
            "set_directive_array_partition -type {kind} -factor {factor} -dim 1 {TOP} {}",
            line.label
        ));
    } else {
        cmds.push(format!("set_directive_unroll -factor {choice} {TOP}/{}", line.label));
    }
    cmds
}

/// Group, label and every `(line, choice)` alternative of one axis.
type OracleAxis = (String, String, Vec<(OracleLine, String)>);

/// Every point as its sorted command list joined by newlines.
fn oracle_enumerate(groups: &[OracleGroup]) -> Vec<String> {
    // Axes: (group, label) in first-appearance order, each with all
    // (line, choice) alternatives.
    let mut axes: Vec<OracleAxis> = Vec::new();
    for g in groups {
        for l in &g.lines {
            let pos = axes.iter().position(|(gn, lb, _)| *gn == g.name && *lb == l.label);
            let idx = pos.unwrap_or_else(|| {
                axes.push((g.name.clone(), l.label.clone(), Vec::new()));
                axes.len() - 1
            });
            for c in &l.choices {
                axes[idx].2.push((l.clone(), c.clone()));
            }
        }
    }
    fn rec(axes: &[OracleAxis], acc: &mut Vec<String>, out: &mut Vec<String>) {
        match axes.split_first() {
            None => {
                let mut lines = acc.clone();
                lines.sort();
                out.push(lines.join("\n"));
            }
            Some(((_, _, alts), rest)) => {
                for (line, choice) in alts {
                    let cmds = oracle_commands(line, choice);
                    let n = cmds.len();
                    acc.extend(cmds);
                    rec(rest, acc, out);
                    acc.truncate(acc.len() - n);
                }
            }
        }
    }
    let mut out = Vec::new();
    rec(&axes, &mut Vec::new(), &mut out);
    out
}

fn k2mm_structure() -> Vec<OracleGroup> {
    let choices: Vec<String> = ["1", "2", "4", "8"].iter().map(|s| s.to_string()).collect();
    let line = |label: &str, fixed| OracleLine {
        label: label.into(),
        fixed_pipeline: fixed,
        partition: false,
        choices: choices.clone(),
    };
    vec![OracleGroup {
        name: "loop_opt".into(),
        lines: vec![line("lp2", true), line("lp3", true), line("lp3", false)],
    }]
}

fn random_structure(rng: &mut StdRng) -> Vec<OracleGroup> {
    const UNROLL: [&str; 6] = ["1", "2", "4", "8", "16", "32"];
    const PARTITION: [&str; 6] = ["cyclic-2", "cyclic-4", "block-2", "block-4", "cyclic-8", "block-8"];
    let n_axes = rng.random_range(1..=4);
    let n_groups = rng.random_range(1..=n_axes.min(2));
    let mut groups: Vec<OracleGroup> = (0..n_groups)
        .map(|g| OracleGroup {
            name: format!("g{g}"),
            lines: Vec::new(),
        })
        .collect();
    for a in 0..n_axes {
        let partition = rng.random_bool(0.3);
        let label = if partition { format!("arr{a}") } else { format!("lp{a}") };
        // At most five alternatives per axis, over one or two lines.
        let budget = rng.random_range(1..=5usize);
        let n_lines = if budget >= 2 && rng.random_bool(0.4) { 2 } else { 1 };
        let pool: &[&str] = if partition { &PARTITION } else { &UNROLL };
        // Alternatives of one label draw disjoint choices from a shuffled pool.
        let mut picks: Vec<&str> = pool.to_vec();
        for j in (1..picks.len()).rev() {
            picks.swap(j, rng.random_range(0..=j));
        }
        let mut remaining = budget;
        let mut offset = 0;
        let g = rng.random_range(0..n_groups);
        for i in 0..n_lines {
            let take = if i + 1 == n_lines { remaining } else { rng.random_range(1..remaining) };
            remaining -= take;
            groups[g].lines.push(OracleLine {
                label: label.clone(),
                fixed_pipeline: !partition && rng.random_bool(0.5),
                partition,
                choices: picks[offset..offset + take].iter().map(|s| s.to_string()).collect(),
            });
            offset += take;
        }
    }
    groups.retain(|g| !g.lines.is_empty());
    groups
}

/// Sorted-command renderings of every point the library enumerates.
fn library_renderings(text: &str) -> Result<(Vec<String>, Vec<String>, u128), String> {
    let template = parse_opt_template(text).map_err(|e| format!("parse failed: {e}\n{text}"))?;
    let space = enumerate_design_space(&template);
    let mut raw = Vec::new();
    let mut canonical = Vec::new();
    for a in space.iter() {
        let rendered = render_assignment(&template, &a).map_err(|e| e.to_string())?;
        let mut lines: Vec<&str> = rendered.lines().collect();
        lines.sort();
        canonical.push(lines.join("\n"));
        raw.push(rendered);
    }
    Ok((raw, canonical, space.size()))
}

fn oracle_suite() -> Vec<Vec<OracleGroup>> {
    let mut rng = StdRng::seed_from_u64(20240917);
    let mut suite = vec![k2mm_structure()];
    suite.extend((0..20).map(|_| random_structure(&mut rng)));
    suite
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let k2mm = parse_opt_template(K2MM_TEMPLATE).map_err(|e| e.to_string())?;
    ensure!(design_space_size(&k2mm) == 32, "k2mm template size {}", design_space_size(&k2mm));
    // The oracle renders against a top function named `top`.
    let (_, got, _) = library_renderings(&K2MM_TEMPLATE.replace("k2mm/", "top/"))?;
    let got: BTreeSet<String> = got.into_iter().collect();
    let want: BTreeSet<String> = oracle_enumerate(&k2mm_structure()).into_iter().collect();
    ensure!(got.len() == 32 && got == want, "k2mm template enumeration differs from oracle");
    for (i, groups) in oracle_suite().iter().enumerate() {
        let text = oracle_text(groups);
        let expected: BTreeSet<String> = oracle_enumerate(groups).into_iter().collect();
        let (_, got, size) = library_renderings(&text)?;
        let got_set: BTreeSet<String> = got.iter().cloned().collect();
        ensure!(size as usize == got.len(), "template {i}: size {size} vs {} enumerated", got.len());
        ensure!(got_set.len() == got.len(), "template {i}: duplicate points");
        ensure!(got_set == expected, "template {i}: enumeration differs from oracle\n{text}");
    }
    within(start, 1.0)
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    for (i, groups) in oracle_suite().iter().enumerate() {
        let axes: BTreeMap<(&str, &str), usize> = groups
            .iter()
            .flat_map(|g| g.lines.iter().map(move |l| ((g.name.as_str(), l.label.as_str()), l)))
            .fold(BTreeMap::new(), |mut m, (k, _)| {
                m.insert(k, 0);
                m
            });
        let (raw, _, _) = library_renderings(&oracle_text(groups))?;
        let template = parse_opt_template(&oracle_text(groups)).unwrap();
        let space = enumerate_design_space(&template);
        for (text, a) in raw.iter().zip(space.iter()) {
            ensure!(!text.contains('[') && !text.contains(']'), "template {i}: bracket left in\n{text}");
            // One command per axis plus one per fixed directive of the chosen line.
            let fixed = a.selections().iter().filter(|s| s.fixed_directive.is_some()).count();
            let expected = axes.len() + fixed;
            ensure!(
                text.lines().count() == expected,
                "template {i}: {} directives, expected {expected}",
                text.lines().count()
            );
        }
        let distinct: BTreeSet<&String> = raw.iter().collect();
        ensure!(distinct.len() == raw.len(), "template {i}: rendered files not distinct");
    }
    within(start, 1.0)
}

// ---------------------------------------------------------------------------

fn tree_contents(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        let mut entries: Vec<_> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for p in entries {
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

fn fixture_collection() -> DatasetCollection {
    let mut c = DatasetCollection::new();
    c.insert(load_dataset(&fixtures_dir(), "fixtures").unwrap()).unwrap();
    c
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = FrontendConfig {
        random_sample: true,
        n_samples: 5,
        seed: 1234,
        ..FrontendConfig::default()
    };
    let sources = fixture_collection();
    let mut trees = Vec::new();
    for run in ["a", "b"] {
        let layout = WorkspaceLayout::new(tmp.path().join(run));
        execute_frontend(&sources, &cfg, &layout).map_err(|e| e.to_string())?;
        trees.push(tree_contents(&layout.work_dir));
    }
    ensure!(!trees[0].is_empty(), "frontend wrote nothing");
    ensure!(trees[0] == trees[1], "post-frontend trees differ across identical runs");

    let space = enumerate_design_space(&parse_opt_template(K2MM_TEMPLATE).unwrap());
    let all = sample_assignments(&space, 100, 7);
    ensure!(all.len() == 32, "k > size returned {} points", all.len());
    let in_order: Vec<_> = space.iter().collect();
    ensure!(all == in_order, "k > size is not the enumeration order");

    // The stated per-point band [2700, 3550] is +-4 sigma around 3125, the
    // mean for 100,000 draws; 10,000 draws are checked against their own
    // +-4 sigma band around 312.5.
    for (draws, lo, hi) in [(10_000u64, 243, 382), (100_000u64, 2700, 3550)] {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for seed in 0..draws {
            let pick = sample_assignments(&space, 1, seed);
            ensure!(pick.len() == 1, "k = 1 returned {}", pick.len());
            *counts.entry(pick[0].canonical_text()).or_default() += 1;
        }
        ensure!(counts.len() == 32, "only {} of 32 points drawn", counts.len());
        for (point, n) in &counts {
            ensure!((lo..=hi).contains(n), "{draws} draws: point drawn {n} times, band [{lo}, {hi}]: {point}");
        }
    }
    within(start, 5.0)
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(99);
    for i in 0..100 {
        let n_workers = rng.random_range(1..=8);
        let datasets: Vec<Vec<f64>> = (0..rng.random_range(1..=5))
            .map(|_| (0..rng.random_range(1..=12)).map(|_| rng.random_range(1..=20) as f64).collect())
            .collect();
        let fine = simulate_schedule(&datasets, n_workers, Strategy::FineGrained);
        let naive = simulate_schedule(&datasets, n_workers, Strategy::Naive);
        ensure!(fine <= naive, "instance {i}: fine-grained {fine} > naive {naive} ({datasets:?}, {n_workers} workers)");
    }
    let crafted = vec![vec![8.0, 1.0, 1.0, 1.0], vec![1.0, 1.0, 1.0, 1.0]];
    let naive = simulate_schedule(&crafted, 2, Strategy::Naive);
    let fine = simulate_schedule(&crafted, 2, Strategy::FineGrained);
    ensure!(naive == 10.0 && fine == 8.0, "crafted instance gave naive {naive}, fine-grained {fine}");
    ensure!((naive - fine) / naive == 0.2, "improvement {}", (naive - fine) / naive);
    within(start, 1.0)
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let k2mm = fixtures_dir().join("k2mm");
    let src = tmp.path().join("src");
    fs::create_dir_all(src.join("k2mm")).unwrap();
    for entry in fs::read_dir(&k2mm).unwrap() {
        let p = entry.unwrap().path();
        fs::copy(&p, src.join("k2mm").join(p.file_name().unwrap())).unwrap();
    }
    let mut sources = DatasetCollection::new();
    sources.insert(load_dataset(&src, "one").unwrap()).unwrap();
    let cfg = FrontendConfig {
        random_sample: true,
        n_samples: 8,
        seed: 5,
        ..FrontendConfig::default()
    };
    let layout = WorkspaceLayout::new(tmp.path().join("work"));
    let (collection, _) = execute_frontend(&sources, &cfg, &layout).map_err(|e| e.to_string())?;
    ensure!(collection.design_count() == 8, "{} designs", collection.design_count());

    let flow = MockHlsSynthFlow::new(ToolFlowSpec::new("slow_synth", 30.0), CostModel::default()).with_delay(1.0);
    let t0 = Instant::now();
    let (outcomes, timeline) = execute_parallel(&collection, &flow, Strategy::FineGrained, 4, false);
    let wall = t0.elapsed().as_secs_f64();
    ensure!(wall < 3.5, "8 x 1s jobs on 4 workers took {wall:.2}s");
    ensure!(outcomes.iter().all(|o| o.status == FlowStatus::Ok), "a mock job failed");
    ensure!(timeline.records.len() == 8 && timeline.is_valid(), "timeline invalid: {timeline:?}");

    if cfg!(unix) {
        let mut spec = ToolFlowSpec::new("stub", 1.0);
        spec.command_template = vec!["sleep".into(), "10".into()];
        let stub = ExternalFlow::new(spec).map_err(|e| e.to_string())?;
        let design = collection.datasets().next().unwrap().concrete().next().unwrap();
        let outcome = stub.execute(design).map_err(|e| e.to_string())?;
        ensure!(outcome.status == FlowStatus::Timeout, "stub status {}", outcome.status);
        ensure!(
            (1.0..=1.5).contains(&outcome.runtime_s),
            "stub runtime {:.3}s outside [1.0, 1.5]",
            outcome.runtime_s
        );
    }
    within(start, 15.0)
}

// ---------------------------------------------------------------------------

/// Independent ranking: values below plus half of the ties, doubled to stay
/// in integers.
fn doubled_ranks(mags: &[i64]) -> Vec<i64> {
    mags.iter()
        .map(|m| {
            let below = mags.iter().filter(|x| *x < m).count() as i64;
            let equal = mags.iter().filter(|x| *x == m).count() as i64;
            2 * below + equal + 1
        })
        .collect()
}

fn brute_force_p(diffs: &[i64]) -> f64 {
    let nz: Vec<i64> = diffs.iter().copied().filter(|d| *d != 0).collect();
    if nz.is_empty() {
        return 1.0;
    }
    let ranks = doubled_ranks(&nz.iter().map(|d| d.abs()).collect::<Vec<_>>());
    let total: i64 = ranks.iter().sum();
    let stat = |pos: i64| pos.min(total - pos);
    let observed = stat(ranks.iter().zip(&nz).filter(|(_, d)| **d > 0).map(|(r, _)| r).sum());
    let n = nz.len();
    let mut extreme = 0u64;
    for mask in 0u32..(1 << n) {
        let pos: i64 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| ranks[i]).sum();
        if stat(pos) <= observed {
            extreme += 1;
        }
    }
    extreme as f64 / (1u64 << n) as f64
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(6);
    for i in 0..50 {
        let n = rng.random_range(1..=12);
        let b: Vec<i64> = (0..n).map(|_| rng.random_range(0..100)).collect();
        let a: Vec<i64> = b.iter().map(|x| x + rng.random_range(-6..=6)).collect();
        let af: Vec<f64> = a.iter().map(|x| *x as f64).collect();
        let bf: Vec<f64> = b.iter().map(|x| *x as f64).collect();
        let got = wilcoxon_signed_rank_with(&af, &bf, Some(WilcoxonMethod::Exact)).map_err(|e| e.to_string())?;
        let diffs: Vec<i64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let want = brute_force_p(&diffs);
        ensure!(
            (got.p_two_tailed - want).abs() <= 1e-12,
            "instance {i}: p {} vs brute force {want} for diffs {diffs:?}",
            got.p_two_tailed
        );
    }
    let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
    let b: Vec<f64> = a.iter().map(|x| x + 1.0).collect();
    let p = wilcoxon_signed_rank(&a, &b).map_err(|e| e.to_string())?.p_two_tailed;
    ensure!((p - 0.03125).abs() <= 1e-12, "all d = -1, n = 6: p = {p}");
    let p = wilcoxon_signed_rank(&a, &a).map_err(|e| e.to_string())?.p_two_tailed;
    ensure!(p == 1.0, "identical vectors: p = {p}");
    within(start, 10.0)
}

// ---------------------------------------------------------------------------

const SAMPLES: usize = 4;

fn demo(out: &Path) -> Result<DemoSummary, String> {
    run_demo(&DemoOpts {
        out: out.to_path_buf(),
        seed: 2024,
        samples: SAMPLES,
        workers: 4,
    })
    .map_err(|e| e.to_string())
}

/// Hand evaluation of the mock cost model from a row's assignment summary.
struct HandEstimate {
    latency: u64,
    clock_ns: f64,
    lut: u64,
    ff: u64,
    dsp: u64,
    bram: u64,
}

fn hand_estimate(manifest: &serde_json::Value, summary: &str) -> HandEstimate {
    let mut unroll: BTreeMap<String, u64> = BTreeMap::new();
    let mut pipelined: BTreeSet<String> = BTreeSet::new();
    let mut banks: BTreeMap<String, Option<u64>> = BTreeMap::new();
    for part in summary.split(';').filter(|s| !s.is_empty()) {
        let (label, rest) = part.split_once('=').unwrap();
        let (directive, choice) = rest.split_once(':').unwrap();
        if directive.contains("pipeline") {
            pipelined.insert(label.into());
        }
        if directive.ends_with("unroll") {
            unroll.insert(label.into(), choice.parse().unwrap());
        }
        if directive.ends_with("array_partition") {
            let factor = choice.split('-').nth(1).map(|f| f.parse().unwrap());
            banks.insert(label.into(), factor);
        }
    }
    let int = |v: &serde_json::Value, k: &str| v[k].as_u64().unwrap_or(0);
    let mut est = HandEstimate {
        latency: 0,
        clock_ns: 0.0,
        lut: int(manifest, "base_lut"),
        ff: int(manifest, "base_ff"),
        dsp: 0,
        bram: 0,
    };
    let mut max_u = 1;
    for l in manifest["loops"].as_array().unwrap() {
        let label = l["label"].as_str().unwrap();
        let (trip, ops) = (int(l, "trip_count"), int(l, "body_ops"));
        let u = unroll.get(label).copied().unwrap_or(1).min(trip);
        let chunks = (trip + u - 1) / u;
        est.latency += if pipelined.contains(label) { chunks - 1 + ops } else { chunks * ops };
        est.lut += 25 * ops * u;
        est.ff += 15 * ops * u;
        est.dsp += int(l, "mult_ops") * u;
        max_u = max_u.max(u);
    }
    for a in manifest["arrays"].as_array().unwrap() {
        let depth = int(a, "depth");
        let b = match banks.get(a["label"].as_str().unwrap()) {
            Some(Some(f)) => *f,
            Some(None) => depth,
            None => 1,
        };
        est.bram += (depth * int(a, "elem_bytes") + 2047) / 2048 * b;
    }
    est.clock_ns = 3.0 + 0.2 * (max_u as f64).log2();
    est
}

fn criterion_7(s: &DemoSummary, took: Duration) -> Outcome {
    let start = Instant::now();
    let mut expected = 0;
    let mut n_fixtures = 0;
    for entry in fs::read_dir(fixtures_dir()).unwrap() {
        let dir = entry.unwrap().path();
        let text = fs::read_to_string(dir.join("opt_template.tcl")).unwrap();
        let size = design_space_size(&parse_opt_template(&text).unwrap());
        expected += (SAMPLES as u128).min(size) as usize;
        n_fixtures += 1;
    }
    ensure!(n_fixtures >= 10, "only {n_fixtures} fixture designs");
    let sampled = s.expansion.designs.iter().filter(|d| d.dataset == DEMO_DATASET).map(|d| d.lowered).sum::<usize>();
    ensure!(sampled == expected, "{sampled} sampled designs, expected {expected}");
    let total = expected + n_fixtures;
    ensure!(s.expansion.concrete_count() == total, "{} concrete designs, expected {total}", s.expansion.concrete_count());
    let csv = read_tabular(&s.table_path, TabularFormat::Csv).map_err(|e| e.to_string())?;
    ensure!(csv.len() == total, "{} CSV rows, expected {total}", csv.len());
    ensure!(csv.rows.iter().all(|r| r.execution.as_ref().is_some_and(|e| e.status == FlowStatus::Ok)), "a build failed");

    let mut checked = 0;
    for row in csv.rows.iter().filter(|r| r.dataset == DEMO_DATASET) {
        if checked == 3 {
            break;
        }
        let manifest: serde_json::Value = serde_json::from_str(
            &fs::read_to_string(fixtures_dir().join(&row.base_name).join("mock_manifest.json")).unwrap(),
        )
        .unwrap();
        let want = hand_estimate(&manifest, row.assignment.as_deref().unwrap_or(""));
        let hls = row.hls.as_ref().ok_or("row without HLS metrics")?;
        let got = (hls.latency_best_cycles, hls.latency_avg_cycles, hls.latency_worst_cycles, hls.lut, hls.ff, hls.dsp, hls.bram);
        let exp = (
            Some(want.latency),
            Some(want.latency),
            Some(2 * want.latency),
            Some(want.lut),
            Some(want.ff),
            Some(want.dsp),
            Some(want.bram),
        );
        ensure!(got == exp, "{}: metrics {got:?}, hand formulas {exp:?}", row.design_id);
        let clock = hls.clock_estimate_ns.unwrap_or(f64::NAN);
        ensure!((clock - want.clock_ns).abs() <= 1e-12, "{}: clock {clock} vs {}", row.design_id, want.clock_ns);
        checked += 1;
    }
    ensure!(checked == 3, "only {checked} designs spot-checked");
    let took = took.as_secs_f64() + start.elapsed().as_secs_f64();
    ensure!(took < 60.0, "demo took {took:.2}s, limit 60s");
    Ok(())
}

fn version_b() -> CostModel {
    CostModel {
        version: "mock-1.1".into(),
        lut_per_op: 27,
        clock_base_ns: 3.1,
        power_static_w: 0.52,
        ..CostModel::default()
    }
}

const PERTURBED: &[&str] = &[
    "hls_lut",
    "hls_clock_estimate_ns",
    "impl_lut",
    "impl_wns_ns",
    "impl_total_power_w",
    "runtime_s",
];
const UNPERTURBED: &[&str] = &[
    "hls_latency_avg_cycles",
    "hls_ff",
    "hls_dsp",
    "hls_bram",
    "impl_ff",
    "impl_dsp",
    "impl_bram",
    "impl_whs_ns",
];

fn run_version(base: &RunConfig, work: &Path, model: Option<CostModel>) -> Result<PathBuf, String> {
    let mut cfg = base.clone();
    cfg.work_dir = work.to_path_buf();
    for f in &mut cfg.flows {
        f.cost_model = model.clone();
    }
    run_expand(&cfg).map_err(|e| e.to_string())?;
    run_build(&cfg).map_err(|e| e.to_string())?;
    let (_, written) = run_aggregate(&cfg, &AggregateOpts::default()).map_err(|e| e.to_string())?;
    Ok(written[0].clone())
}

fn regress(a: &Path, b: &Path, json: &Path) -> Result<serde_json::Value, String> {
    let metrics: Vec<String> = PERTURBED.iter().chain(UNPERTURBED).map(|s| s.to_string()).collect();
    let code = cmd_regress(&RegressOpts {
        table_a: a.to_path_buf(),
        table_b: b.to_path_buf(),
        metrics,
        alpha: 0.05,
        json: Some(json.to_path_buf()),
    })
    .map_err(|e| e.to_string())?;
    ensure!(code == 0, "regress exited {code}");
    serde_json::from_str(&fs::read_to_string(json).unwrap()).map_err(|e| e.to_string())
}

fn criterion_8(s: &DemoSummary, root: &Path) -> Outcome {
    let start = Instant::now();
    let a1 = run_version(&s.config, &root.join("version_a1"), None)?;
    let a2 = run_version(&s.config, &root.join("version_a2"), None)?;
    let b = run_version(&s.config, &root.join("version_b"), Some(version_b()))?;
    let n_rows = s.table.len();

    let report = regress(&a1, &b, &root.join("regress_ab.json"))?;
    ensure!(report["n_paired"] == n_rows && report["unpaired_a"] == 0 && report["unpaired_b"] == 0, "pairing incomplete: {} of {n_rows}", report["n_paired"]);
    for m in report["metrics"].as_array().unwrap() {
        let name = m["metric"].as_str().unwrap();
        let significant = m["significant"].as_bool().unwrap();
        let p = m["wilcoxon"]["p_two_tailed"].as_f64().unwrap_or(1.0);
        if PERTURBED.contains(&name) {
            ensure!(significant && p < 0.05, "{name}: perturbed but p = {p}");
        } else {
            ensure!(!significant, "{name}: unperturbed but flagged (p = {p})");
        }
    }
    let table = hlsforge::analysis::compare_tool_versions(
        &read_tabular(&a1, TabularFormat::Csv).unwrap().rows,
        &read_tabular(&b, TabularFormat::Csv).unwrap().rows,
        PERTURBED,
        0.05,
    )
    .map_err(|e| e.to_string())?
    .render_table();
    let starred = table
        .lines()
        .filter(|l| l.split_whitespace().next().is_some_and(|m| m.ends_with('*')))
        .count();
    ensure!(starred == PERTURBED.len(), "{starred} starred rows:\n{table}");

    let same = regress(&a1, &a2, &root.join("regress_aa.json"))?;
    for m in same["metrics"].as_array().unwrap() {
        let p = m["wilcoxon"]["p_two_tailed"].as_f64().unwrap_or(1.0);
        ensure!(p == 1.0, "A vs A: {} has p = {p}", m["metric"]);
    }
    within(start, 90.0)
}

fn range(rows: &[&TableRow], col: &str) -> (f64, f64) {
    rows.iter()
        .filter_map(|r| r.metric(col))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn criterion_9(s: &DemoSummary) -> Outcome {
    let start = Instant::now();
    let group = |ds: &str| s.table.rows.iter().filter(|r| r.dataset == ds).collect::<Vec<_>>();
    let (sampled, base) = (group(DEMO_DATASET), group(DEMO_BASE_DATASET));
    ensure!(!sampled.is_empty() && !base.is_empty(), "empty group");
    for col in ["hls_lut", "hls_latency_avg_cycles"] {
        let (s_lo, s_hi) = range(&sampled, col);
        let (b_lo, b_hi) = range(&base, col);
        ensure!(s_lo <= b_lo && b_hi <= s_hi, "{col}: sampled [{s_lo}, {s_hi}] does not contain base [{b_lo}, {b_hi}]");
        ensure!(s_lo < b_lo || b_hi < s_hi, "{col}: ranges are equal, containment is not strict");
    }
    within(start, 5.0)
}

fn random_bundle(rng: &mut StdRng) -> MetricsBundle {
    let opt_u = |rng: &mut StdRng| rng.random_bool(0.8).then(|| rng.random_range(0..1_000_000u64));
    let real = |rng: &mut StdRng| rng.random_range(-1.0e3..1.0e3) * 10f64.powi(rng.random_range(-6..6));
    MetricsBundle {
        hls: rng.random_bool(0.9).then(|| HlsSynthMetrics {
            latency_best_cycles: opt_u(rng),
            latency_avg_cycles: opt_u(rng),
            latency_worst_cycles: opt_u(rng),
            ii: opt_u(rng),
            clock_estimate_ns: rng.random_bool(0.8).then(|| real(rng)),
            lut: opt_u(rng),
            ff: opt_u(rng),
            dsp: opt_u(rng),
            bram: opt_u(rng),
            uram: opt_u(rng),
        }),
        implementation: rng.random_bool(0.8).then(|| ImplMetrics {
            wns_ns: real(rng),
            whs_ns: real(rng),
            lut: rng.random(),
            ff: rng.random(),
            dsp: rng.random_range(0..10_000),
            bram: rng.random_range(0..10_000),
            total_power_w: real(rng),
        }),
        execution: rng.random_bool(0.8).then(|| ExecutionMeta {
            tool_name: format!("flow{}", rng.random_range(0..5)),
            tool_version: format!("v{}.{}", rng.random_range(0..3), rng.random_range(0..10)),
            runtime_s: rng.random_range(0.0..1.0e4),
            status: [FlowStatus::Ok, FlowStatus::Failed, FlowStatus::Timeout, FlowStatus::SkippedMissingFiles]
                [rng.random_range(0..4)],
        }),
    }
}

fn criterion_10(s: &DemoSummary) -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rng = StdRng::seed_from_u64(10);
    for i in 0..1000 {
        let bundle = random_bundle(&mut rng);
        write_standard_json(tmp.path(), &bundle).map_err(|e| e.to_string())?;
        let back = read_standard_json(tmp.path());
        ensure!(back == bundle, "bundle {i} did not round-trip:\n{bundle:?}\n{back:?}");
    }
    let work = &s.config.work_dir;
    let mut archives = Vec::new();
    let mut exports = Vec::new();
    for run in 0..2 {
        let zip = archive_dataset(work, &tmp.path().join(format!("a{run}.zip")), true).map_err(|e| e.to_string())?;
        archives.push(fs::read(zip).unwrap());
        let table: AggregatedTable = hlsforge::aggregate::aggregate_collection(work);
        for fmt in [TabularFormat::Csv, TabularFormat::Jsonl] {
            let p = export_tabular(&table, &tmp.path().join(format!("t{run}.{fmt}")), fmt).map_err(|e| e.to_string())?;
            exports.push(fs::read(p).unwrap());
        }
    }
    ensure!(archives[0] == archives[1], "archives differ across runs");
    ensure!(exports[0] == exports[2] && exports[1] == exports[3], "exports differ across runs");
    ensure!(exports[0] == fs::read(&s.table_path).unwrap(), "re-export differs from the demo CSV");
    Ok(())
}

/// Runs one criterion and prints its PASS/FAIL line.
fn report(n: usize, title: &str, f: impl FnOnce() -> Outcome) -> bool {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        Err(format!("panicked: {msg}"))
    });
    match outcome {
        Ok(()) => {
            println!("PASS criterion {n:>2}: {title}");
            true
        }
        Err(why) => {
            println!("FAIL criterion {n:>2}: {title}: {why}");
            false
        }
    }
}

fn main() {
    // libtest flags such as --nocapture or a name filter are accepted and ignored.
    let mut ok = vec![
        report(1, "OptDSL enumeration matches brute-force oracle", criterion_1),
        report(2, "rendered directive files are complete and distinct", criterion_2),
        report(3, "seeded sampling is reproducible and uniform", criterion_3),
        report(4, "fine-grained scheduling never loses to naive", criterion_4),
        report(5, "wall-clock executor and timeouts", criterion_5),
        report(6, "exact Wilcoxon p-values match enumeration", criterion_6),
    ];
    let root = tempfile::tempdir().expect("temp dir");
    let t0 = Instant::now();
    let demo = demo(&root.path().join("demo"));
    let took = t0.elapsed();
    match demo {
        Ok(s) => {
            ok.push(report(7, "end-to-end demo matches the cost model", || criterion_7(&s, took)));
            ok.push(report(8, "version regression flags perturbed metrics", || criterion_8(&s, root.path())));
            ok.push(report(9, "sampled designs widen base coverage", || criterion_9(&s)));
            ok.push(report(10, "formats round-trip and export deterministically", || criterion_10(&s)));
        }
        Err(e) => {
            for (n, title) in [(7, "end-to-end demo"), (8, "version regression"), (9, "coverage"), (10, "format stability")] {
                println!("FAIL criterion {n:>2}: {title}: demo failed: {e}");
                ok.push(false);
            }
        }
    }
    let passed = ok.iter().filter(|b| **b).count();
    println!("acceptance: {passed}/{} criteria passed", ok.len());
    if passed != ok.len() {
        std::process::exit(1);
    }
}
