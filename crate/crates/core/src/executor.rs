// SPDX-License-Identifier: Apache-2.0

//! Parallel dispatch of a flow over every concrete design in a collection.
//!
//! Two strategies are offered. `Naive` runs one pool per dataset and waits
//! for it to drain before starting the next dataset. `FineGrained` puts every
//! job from every dataset into one queue, so a long job in one dataset does
//! not leave workers idle at a dataset boundary.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::design::{ConcreteDesign, DatasetCollection};
use crate::toolflows::{log_path, FlowOutcome, FlowStatus, ToolFlow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Naive,
    FineGrained,
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "naive" => Ok(Strategy::Naive),
            "fine_grained" => Ok(Strategy::FineGrained),
            other => Err(format!("unknown strategy `{other}` (expected naive or fine_grained)")),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Naive => "naive",
            Strategy::FineGrained => "fine_grained",
        })
    }
}

/// One flow invocation on one design.
#[derive(Debug, Clone, Copy)]
pub struct Job<'a> {
    pub design: &'a ConcreteDesign,
    pub dataset: &'a str,
}

/// When and where a job ran, in seconds since the start of the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionRecord {
    pub design_id: String,
    pub dataset: String,
    pub flow: String,
    pub worker: usize,
    pub start_s: f64,
    pub end_s: f64,
    pub status: FlowStatus,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Timeline {
    pub records: Vec<ExecutionRecord>,
    pub n_workers: usize,
    /// Whether each worker obtained the core affinity it asked for. Empty
    /// when pinning was not requested.
    pub pinned: Vec<bool>,
}

impl Timeline {
    pub fn makespan(&self) -> f64 {
        self.records.iter().map(|r| r.end_s).fold(0.0, f64::max)
    }

    /// True when no two records on the same worker overlap.
    pub fn is_valid(&self) -> bool {
        let mut by_worker: Vec<Vec<(f64, f64)>> = vec![Vec::new(); self.n_workers];
        for r in &self.records {
            if r.worker >= self.n_workers || r.end_s < r.start_s {
                return false;
            }
            by_worker[r.worker].push((r.start_s, r.end_s));
        }
        by_worker.iter_mut().all(|spans| {
            spans.sort_by(|a, b| a.0.total_cmp(&b.0));
            spans.windows(2).all(|w| w[0].1 <= w[1].0)
        })
    }

    /// Appends `other`, shifted to start where this timeline ends.
    pub fn append(&mut self, other: Timeline) {
        let offset = self.makespan();
        self.n_workers = self.n_workers.max(other.n_workers);
        if self.pinned.is_empty() {
            self.pinned = other.pinned;
        }
        self.records.extend(other.records.into_iter().map(|mut r| {
            r.start_s += offset;
            r.end_s += offset;
            r
        }));
    }

    pub fn write_json(&self, path: &Path) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(&self.records).map_err(std::io::Error::other)?;
        text.push('\n');
        fs::write(path, text)
    }

    pub fn read_json(path: &Path, n_workers: usize) -> std::io::Result<Self> {
        let records: Vec<ExecutionRecord> =
            serde_json::from_str(&fs::read_to_string(path)?).map_err(std::io::Error::other)?;
        Ok(Self {
            records,
            n_workers,
            pinned: Vec::new(),
        })
    }

    /// Per-worker busy time: `worker,jobs,busy_s,makespan_s,utilization`.
    pub fn utilization_csv(&self) -> String {
        let makespan = self.makespan();
        let mut out = String::from("worker,jobs,busy_s,makespan_s,utilization\n");
        for w in 0..self.n_workers {
            let mine = self.records.iter().filter(|r| r.worker == w);
            let (jobs, busy) = mine.fold((0usize, 0.0f64), |(n, b), r| (n + 1, b + r.end_s - r.start_s));
            let util = if makespan > 0.0 { busy / makespan } else { 0.0 };
            out.push_str(&format!("{w},{jobs},{busy:.6},{makespan:.6},{util:.6}\n"));
        }
        out
    }
}

fn pin_to_core(worker: usize) -> bool {
    match core_affinity::get_core_ids() {
        Some(ids) if !ids.is_empty() => core_affinity::set_for_current(ids[worker % ids.len()]),
        _ => false,
    }
}

fn outcome_for(flow: &dyn ToolFlow, job: &Job) -> FlowOutcome {
    let start = Instant::now();
    flow.execute(job.design).unwrap_or_else(|e| {
        log::warn!("{} on {}: {e}", flow.name(), job.design.id);
        FlowOutcome {
            design_id: job.design.id.clone(),
            flow_name: flow.name().to_string(),
            status: FlowStatus::Failed,
            runtime_s: start.elapsed().as_secs_f64(),
            tool_runtime_s: None,
            tool_version: flow.tool_version(),
            log_path: log_path(&job.design.dir, flow.name()),
        }
    })
}

/// Runs `jobs` on a pool of `n_workers` threads pulling from one queue.
/// Results come back in job order.
fn run_pool(
    jobs: &[Job],
    flow: &dyn ToolFlow,
    n_workers: usize,
    pin_cores: bool,
    origin: Instant,
) -> (Vec<(FlowOutcome, ExecutionRecord)>, Vec<bool>) {
    let n_workers = n_workers.max(1);
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<(FlowOutcome, ExecutionRecord)>>> = Mutex::new(vec![None; jobs.len()]);
    let pinned: Mutex<Vec<bool>> = Mutex::new(vec![false; if pin_cores { n_workers } else { 0 }]);
    std::thread::scope(|scope| {
        for worker in 0..n_workers.min(jobs.len().max(1)) {
            let (next, slots, pinned) = (&next, &slots, &pinned);
            scope.spawn(move || {
                if pin_cores {
                    let ok = pin_to_core(worker);
                    pinned.lock().expect("pin table")[worker] = ok;
                }
                loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(job) = jobs.get(i) else { break };
                    let start_s = origin.elapsed().as_secs_f64();
                    let outcome = outcome_for(flow, job);
                    let end_s = origin.elapsed().as_secs_f64();
                    let record = ExecutionRecord {
                        design_id: job.design.id.clone(),
                        dataset: job.dataset.to_string(),
                        flow: flow.name().to_string(),
                        worker,
                        start_s,
                        end_s,
                        status: outcome.status,
                    };
                    slots.lock().expect("result slots")[i] = Some((outcome, record));
                }
            });
        }
    });
    let results = slots
        .into_inner()
        .expect("result slots")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect();
    (results, pinned.into_inner().expect("pin table"))
}

fn jobs_by_dataset(collection: &DatasetCollection) -> Vec<Vec<Job<'_>>> {
    collection
        .datasets()
        .map(|ds| {
            ds.concrete()
                .map(|design| Job {
                    design,
                    dataset: &ds.name,
                })
                .collect()
        })
        .collect()
}

/// Outcomes with their timeline records, and per-worker pin results, of one pool.
type PoolResult = (Vec<(FlowOutcome, ExecutionRecord)>, Vec<bool>);

fn finish(
    parts: Vec<PoolResult>,
    n_workers: usize,
) -> (Vec<FlowOutcome>, Timeline) {
    let mut outcomes = Vec::new();
    let mut timeline = Timeline {
        n_workers,
        ..Default::default()
    };
    for (results, pinned) in parts {
        if timeline.pinned.is_empty() {
            timeline.pinned = pinned;
        }
        for (o, r) in results {
            outcomes.push(o);
            timeline.records.push(r);
        }
    }
    timeline
        .records
        .sort_by(|a, b| a.start_s.total_cmp(&b.start_s).then(a.worker.cmp(&b.worker)));
    (outcomes, timeline)
}

/// All jobs of all datasets in one shared queue.
pub fn execute_parallel_fine_grained(
    collection: &DatasetCollection,
    flow: &dyn ToolFlow,
    n_workers: usize,
    pin_cores: bool,
) -> (Vec<FlowOutcome>, Timeline) {
    let origin = Instant::now();
    let jobs: Vec<Job> = jobs_by_dataset(collection).into_iter().flatten().collect();
    let part = run_pool(&jobs, flow, n_workers, pin_cores, origin);
    finish(vec![part], n_workers.max(1))
}

/// One pool per dataset, datasets processed one after another.
pub fn execute_parallel_naive(
    collection: &DatasetCollection,
    flow: &dyn ToolFlow,
    n_workers: usize,
    pin_cores: bool,
) -> (Vec<FlowOutcome>, Timeline) {
    let origin = Instant::now();
    let parts = jobs_by_dataset(collection)
        .iter()
        .map(|jobs| run_pool(jobs, flow, n_workers, pin_cores, origin))
        .collect();
    finish(parts, n_workers.max(1))
}

pub fn execute_parallel(
    collection: &DatasetCollection,
    flow: &dyn ToolFlow,
    strategy: Strategy,
    n_workers: usize,
    pin_cores: bool,
) -> (Vec<FlowOutcome>, Timeline) {
    match strategy {
        Strategy::Naive => execute_parallel_naive(collection, flow, n_workers, pin_cores),
        Strategy::FineGrained => execute_parallel_fine_grained(collection, flow, n_workers, pin_cores),
    }
}

/// Greedy list scheduling of `durations` in order onto the earliest-free
/// worker, lowest index on ties, starting every worker at `start`.
fn greedy(durations: impl IntoIterator<Item = f64>, n_workers: usize, start: f64) -> f64 {
    let mut free = vec![start; n_workers.max(1)];
    for d in durations {
        let mut w = 0;
        for (i, t) in free.iter().enumerate() {
            if *t < free[w] {
                w = i;
            }
        }
        free[w] += d;
    }
    free.into_iter().fold(start, f64::max)
}

/// Makespan of a run without executing anything. `durations` holds one list
/// of job durations per dataset.
pub fn simulate_schedule(durations: &[Vec<f64>], n_workers: usize, strategy: Strategy) -> f64 {
    match strategy {
        Strategy::FineGrained => greedy(durations.iter().flatten().copied(), n_workers, 0.0),
        Strategy::Naive => durations
            .iter()
            .fold(0.0, |t, ds| greedy(ds.iter().copied(), n_workers, t)),
    }
}

/// Writes `timeline.json` and the utilization CSV.
pub fn write_timeline(timeline: &Timeline, json_path: &Path, csv_path: Option<&Path>) -> std::io::Result<Vec<PathBuf>> {
    timeline.write_json(json_path)?;
    let mut out = vec![json_path.to_path_buf()];
    if let Some(csv) = csv_path {
        fs::write(csv, timeline.utilization_csv())?;
        out.push(csv.to_path_buf());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{Design, DesignDataset, Vendor};
    use crate::optdsl::DirectiveAssignment;
    use crate::toolflows::{Invocation, ToolFlowSpec};
    use proptest::prelude::{prop_assert, proptest};
    use std::fs::File;
    use std::time::Duration;

    struct Sleep {
        spec: ToolFlowSpec,
        secs: f64,
    }

    impl ToolFlow for Sleep {
        fn spec(&self) -> &ToolFlowSpec {
            &self.spec
        }
        fn tool_version(&self) -> String {
            "sleep".into()
        }
        fn invoke(&self, d: &ConcreteDesign, _: &mut File, _: Duration) -> Invocation {
            std::thread::sleep(Duration::from_secs_f64(self.secs));
            Invocation::status(if d.id.ends_with('3') { FlowStatus::Failed } else { FlowStatus::Ok })
        }
    }

    fn collection(root: &Path, sizes: &[usize]) -> DatasetCollection {
        let mut c = DatasetCollection::new();
        for (k, n) in sizes.iter().enumerate() {
            let designs = (0..*n)
                .map(|i| {
                    let dir = root.join(format!("ds{k}/d{i}"));
                    fs::create_dir_all(&dir).unwrap();
                    Design::Concrete(ConcreteDesign {
                        id: format!("d{k}_{i}"),
                        base_name: "d".into(),
                        assignment: DirectiveAssignment::empty(),
                        dir,
                        vendor: Vendor::Xilinx,
                    })
                })
                .collect();
            c.insert(DesignDataset::new(format!("ds{k}"), designs).unwrap()).unwrap();
        }
        c
    }

    fn sleep_flow(secs: f64) -> Sleep {
        Sleep {
            spec: ToolFlowSpec::new("sleep", 10.0),
            secs,
        }
    }

    #[test]
    fn simulator_reference_instance() {
        let d = vec![vec![8.0, 1.0, 1.0, 1.0], vec![1.0; 4]];
        assert_eq!(simulate_schedule(&d, 2, Strategy::Naive), 10.0);
        assert_eq!(simulate_schedule(&d, 2, Strategy::FineGrained), 8.0);
        assert_eq!(simulate_schedule(&[vec![5.0]], 3, Strategy::Naive), 5.0);
        assert_eq!(simulate_schedule(&[vec![5.0]], 3, Strategy::FineGrained), 5.0);
    }

    #[test]
    fn every_job_yields_one_outcome() {
        let tmp = tempfile::tempdir().unwrap();
        let c = collection(tmp.path(), &[5, 4]);
        for strategy in [Strategy::Naive, Strategy::FineGrained] {
            let (outcomes, timeline) = execute_parallel(&c, &sleep_flow(0.01), strategy, 3, false);
            assert_eq!(outcomes.len(), 9);
            assert_eq!(timeline.records.len(), 9);
            assert!(timeline.is_valid());
            assert_eq!(outcomes.iter().filter(|o| o.status == FlowStatus::Failed).count(), 2);
        }
    }

    #[test]
    fn naive_drains_each_dataset_first() {
        let tmp = tempfile::tempdir().unwrap();
        let c = collection(tmp.path(), &[3, 3]);
        let (_, t) = execute_parallel_naive(&c, &sleep_flow(0.02), 4, false);
        let end0 = t.records.iter().filter(|r| r.dataset == "ds0").map(|r| r.end_s).fold(0.0, f64::max);
        let start1 = t.records.iter().filter(|r| r.dataset == "ds1").map(|r| r.start_s).fold(f64::MAX, f64::min);
        assert!(start1 >= end0);
    }

    #[test]
    fn single_worker_serializes() {
        let tmp = tempfile::tempdir().unwrap();
        let c = collection(tmp.path(), &[4]);
        let (_, t) = execute_parallel_fine_grained(&c, &sleep_flow(0.01), 1, true);
        assert!(t.is_valid());
        assert!(t.records.iter().all(|r| r.worker == 0));
        assert_eq!(t.pinned.len(), 1);
    }

    #[test]
    fn empty_collection_returns_immediately() {
        let (o, t) = execute_parallel_fine_grained(&DatasetCollection::new(), &sleep_flow(1.0), 4, false);
        assert!(o.is_empty() && t.records.is_empty());
    }

    #[test]
    fn timeline_files() {
        let tmp = tempfile::tempdir().unwrap();
        let c = collection(tmp.path(), &[2]);
        let (_, t) = execute_parallel_fine_grained(&c, &sleep_flow(0.0), 2, false);
        let json = tmp.path().join("timeline.json");
        let csv = tmp.path().join("util.csv");
        write_timeline(&t, &json, Some(&csv)).unwrap();
        let back = Timeline::read_json(&json, 2).unwrap();
        assert_eq!(back.records, t.records);
        assert_eq!(fs::read_to_string(csv).unwrap().lines().count(), 3);
    }

    proptest! {
        #[test]
        fn fine_grained_never_worse(
            durations in proptest::collection::vec(proptest::collection::vec(0.0f64..20.0, 1..8), 1..5),
            n in 1usize..6,
        ) {
            let fine = simulate_schedule(&durations, n, Strategy::FineGrained);
            let naive = simulate_schedule(&durations, n, Strategy::Naive);
            prop_assert!(fine <= naive + 1e-9, "fine {} naive {}", fine, naive);
        }
    }
}
