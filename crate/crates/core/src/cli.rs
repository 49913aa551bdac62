// SPDX-License-Identifier: Apache-2.0

//! Command-line front end: config loading and the `expand`, `build`,
//! `aggregate`, `regress`, `stats` and `demo` commands.
//!
//! Exit codes: 0 success, 1 failure, 2 configuration error, 3 environment
//! error (a tool is missing), 4 no data.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregate::{
    aggregate_collection, archive_dataset, export_tabular, extract_design_data, read_tabular,
    AggregatedTable, TabularFormat, EXECUTION_DATA_FILE, HLS_DATA_FILE, IMPL_DATA_FILE,
};
use crate::analysis::{compare_tool_versions, coverage_summary, histogram, AnalysisError, GroupBy};
use crate::design::{load_dataset, load_post_frontend, DatasetCollection, WorkspaceLayout};
use crate::executor::{execute_parallel, write_timeline, Strategy, Timeline};
use crate::frontends::{execute_frontend, FrontendConfig, FrontendReport};
use crate::toolflows::{
    CostModel, ExternalFlow, FlowError, FlowOutcome, FlowStatus, MockHlsSynthFlow, MockImplFlow,
    ToolFlow, ToolFlowSpec, VendorTool,
};

pub const WORK_DIR_ENV: &str = "HLSFORGE_WORK_DIR";

pub const DEFAULT_REGRESS_METRICS: &[&str] = &[
    "hls_latency_avg_cycles",
    "hls_clock_estimate_ns",
    "hls_lut",
    "hls_ff",
    "hls_dsp",
    "hls_bram",
    "impl_wns_ns",
    "impl_lut",
    "impl_ff",
    "impl_dsp",
    "impl_bram",
    "impl_total_power_w",
    "runtime_s",
];

pub const DEFAULT_COVERAGE_METRICS: &[&str] = &["hls_latency_avg_cycles", "hls_lut", "hls_ff", "hls_dsp", "hls_bram"];

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error in {path}: {field}: {message}")]
    Config {
        path: String,
        field: String,
        message: String,
    },
    #[error("environment error: {0}")]
    Environment(String),
    #[error("no data: {0}")]
    NoData(String),
    #[error("{0}")]
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Failure(_) => 1,
            CliError::Config { .. } => 2,
            CliError::Environment(_) => 3,
            CliError::NoData(_) => 4,
        }
    }

    fn config(path: &Path, field: &str, message: impl Into<String>) -> Self {
        CliError::Config {
            path: path.display().to_string(),
            field: field.into(),
            message: message.into(),
        }
    }
}

fn failure(e: impl std::fmt::Display) -> CliError {
    CliError::Failure(e.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub name: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowKind {
    MockHlsSynth,
    MockImpl,
    External,
    VitisHlsSynth,
    VitisHlsImpl,
    IntelHlsSynth,
    IntelQuartusImpl,
}

fn default_timeout() -> f64 {
    3600.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub name: String,
    pub kind: FlowKind,
    #[serde(default = "default_timeout")]
    pub timeout_s: f64,
    /// `None` keeps the preset's required files.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub required_files: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub environment: BTreeMap<String, String>,
    /// argv for `external` flows, or an override for vendor presets.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub command: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_model: Option<CostModel>,
    #[serde(default)]
    pub mock_delay_s: f64,
}

impl FlowConfig {
    pub fn mock(name: &str, kind: FlowKind, required_files: &[&str]) -> Self {
        Self {
            name: name.into(),
            kind,
            timeout_s: 600.0,
            required_files: Some(required_files.iter().map(|s| s.to_string()).collect()),
            environment: BTreeMap::new(),
            command: Vec::new(),
            cost_model: None,
            mock_delay_s: 0.0,
        }
    }

    fn spec(&self, preset: Option<ToolFlowSpec>) -> ToolFlowSpec {
        let mut spec = preset.unwrap_or_else(|| ToolFlowSpec::new(&self.name, self.timeout_s));
        spec.name = self.name.clone();
        spec.timeout_s = self.timeout_s;
        if let Some(files) = &self.required_files {
            spec.required_files = files.clone();
        }
        if !self.command.is_empty() {
            spec.command_template = self.command.clone();
        }
        spec.environment = self.environment.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        spec
    }

    /// Builds the flow. Missing executables are environment errors.
    pub fn build(&self) -> Result<Box<dyn ToolFlow>, CliError> {
        let vendor = |tool: VendorTool| -> Result<Box<dyn ToolFlow>, CliError> {
            Ok(Box::new(ExternalFlow::with_spec(tool, self.spec(Some(tool.default_spec()))).map_err(flow_error)?))
        };
        let model = self.cost_model.clone().unwrap_or_default();
        match self.kind {
            FlowKind::MockHlsSynth => {
                let spec = self.spec(None);
                spec.validate().map_err(flow_error)?;
                Ok(Box::new(MockHlsSynthFlow::new(spec, model).with_delay(self.mock_delay_s)))
            }
            FlowKind::MockImpl => {
                let spec = self.spec(None);
                spec.validate().map_err(flow_error)?;
                Ok(Box::new(MockImplFlow::new(spec, model).with_delay(self.mock_delay_s)))
            }
            FlowKind::External => Ok(Box::new(ExternalFlow::new(self.spec(None)).map_err(flow_error)?)),
            FlowKind::VitisHlsSynth => vendor(VendorTool::VitisHlsSynth),
            FlowKind::VitisHlsImpl => vendor(VendorTool::VitisHlsImpl),
            FlowKind::IntelHlsSynth => vendor(VendorTool::IntelHlsSynth),
            FlowKind::IntelQuartusImpl => vendor(VendorTool::IntelQuartusImpl),
        }
    }
}

fn flow_error(e: FlowError) -> CliError {
    match e {
        FlowError::ExecutableNotFound(_) => CliError::Environment(e.to_string()),
        FlowError::InvalidSpec { ref name, .. } => CliError::Config {
            path: "<config>".into(),
            field: format!("flows.{name}"),
            message: e.to_string(),
        },
        FlowError::Io { .. } => failure(e),
    }
}

fn default_workers() -> usize {
    1
}

fn default_strategy() -> Strategy {
    Strategy::FineGrained
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub work_dir: PathBuf,
    pub datasets: Vec<DatasetEntry>,
    #[serde(default)]
    pub frontend: FrontendConfig,
    #[serde(default)]
    pub flows: Vec<FlowConfig>,
    #[serde(default = "default_workers")]
    pub n_workers: usize,
    #[serde(default = "default_strategy")]
    pub strategy: Strategy,
    #[serde(default)]
    pub pin_cores: bool,
    /// Overrides `frontend.seed` when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn layout(&self) -> WorkspaceLayout {
        WorkspaceLayout::new(&self.work_dir)
    }

    pub fn frontend_config(&self) -> FrontendConfig {
        let mut f = self.frontend.clone();
        if let Some(seed) = self.seed {
            f.seed = seed;
        }
        f
    }

    fn validate(&self, path: &Path) -> Result<(), CliError> {
        if self.n_workers == 0 {
            return Err(CliError::config(path, "n_workers", "must be at least 1"));
        }
        if self.datasets.is_empty() {
            return Err(CliError::config(path, "datasets", "at least one dataset is required"));
        }
        self.frontend
            .validate()
            .map_err(|e| CliError::config(path, "frontend", e.to_string()))?;
        for (i, f) in self.flows.iter().enumerate() {
            if !(f.timeout_s > 0.0 && f.timeout_s.is_finite()) {
                return Err(CliError::config(path, &format!("flows[{i}].timeout_s"), "must be positive"));
            }
        }
        Ok(())
    }
}

/// Reads a config file. Relative paths resolve against the file's directory
/// and `HLSFORGE_WORK_DIR`, when set, replaces `work_dir`.
pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::config(path, "<file>", e.to_string()))?;
    let mut value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::config(path, "<json>", e.to_string()))?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| CliError::config(path, "<json>", "expected an object"))?;
    if let Some(dir) = std::env::var_os(WORK_DIR_ENV) {
        obj.insert("work_dir".into(), serde_json::Value::String(dir.to_string_lossy().into_owned()));
    }
    for field in ["work_dir", "datasets"] {
        if !obj.contains_key(field) {
            return Err(CliError::config(path, field, "missing required field"));
        }
    }
    let mut cfg: RunConfig = serde_json::from_value(value).map_err(|e| CliError::config(path, "<schema>", e.to_string()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    if cfg.work_dir.is_relative() {
        cfg.work_dir = base.join(&cfg.work_dir);
    }
    for d in &mut cfg.datasets {
        if d.path.is_relative() {
            d.path = base.join(&d.path);
        }
    }
    cfg.validate(path)?;
    Ok(cfg)
}

fn load_sources(cfg: &RunConfig) -> Result<DatasetCollection, CliError> {
    let mut collection = DatasetCollection::new();
    for (i, d) in cfg.datasets.iter().enumerate() {
        let ds = load_dataset(&d.path, &d.name).map_err(|e| CliError::Config {
            path: "<config>".into(),
            field: format!("datasets[{i}]"),
            message: e.to_string(),
        })?;
        collection.insert(ds).map_err(failure)?;
    }
    Ok(collection)
}

/// Frontend stage. Returns the report; the caller decides the exit code.
pub fn run_expand(cfg: &RunConfig) -> Result<FrontendReport, CliError> {
    let sources = load_sources(cfg)?;
    let layout = cfg.layout();
    fs::create_dir_all(&layout.work_dir).map_err(failure)?;
    let (_, report) = execute_frontend(&sources, &cfg.frontend_config(), &layout).map_err(failure)?;
    let mut json = serde_json::to_string_pretty(&report).map_err(failure)?;
    json.push('\n');
    fs::write(layout.work_dir.join("expansion.json"), json).map_err(failure)?;
    Ok(report)
}

pub fn cmd_expand(cfg: &RunConfig) -> Result<i32, CliError> {
    let report = run_expand(cfg)?;
    for d in &report.designs {
        let space = d.space_size.map_or("pass-through".to_string(), |s| s.to_string());
        println!("{}/{}: space={} sampled={} lowered={}", d.dataset, d.design, space, d.sampled, d.lowered);
        for e in &d.errors {
            eprintln!("  error: {e}");
        }
    }
    println!("{} concrete designs", report.concrete_count());
    Ok(if report.any_failed() { 1 } else { 0 })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BuildSummary {
    /// Per flow, the number of outcomes with each status.
    pub counts: BTreeMap<String, BTreeMap<FlowStatus, usize>>,
    pub outcomes: Vec<FlowOutcome>,
    pub timeline: Timeline,
}

impl PartialOrd for FlowStatus {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for FlowStatus {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.as_str().cmp(other.as_str())
    }
}

fn clean_design_outputs(dir: &Path) -> std::io::Result<()> {
    let prj = dir.join("hls_prj");
    if prj.exists() {
        fs::remove_dir_all(prj)?;
    }
    for f in [HLS_DATA_FILE, IMPL_DATA_FILE, EXECUTION_DATA_FILE] {
        let p = dir.join(f);
        if p.exists() {
            fs::remove_file(p)?;
        }
    }
    Ok(())
}

/// Synthesis stage: every configured flow in order, then per-design data
/// extraction and the timeline.
pub fn run_build(cfg: &RunConfig) -> Result<BuildSummary, CliError> {
    if cfg.flows.is_empty() {
        return Err(CliError::Config {
            path: "<config>".into(),
            field: "flows".into(),
            message: "no flows configured".into(),
        });
    }
    // Construct every flow first so a missing tool stops the run before any job.
    let flows: Vec<Box<dyn ToolFlow>> = cfg.flows.iter().map(FlowConfig::build).collect::<Result<_, _>>()?;
    let layout = cfg.layout();
    let collection = load_post_frontend(&layout).map_err(failure)?;
    if collection.design_count() == 0 {
        return Err(CliError::NoData(format!(
            "no concrete designs under {}; run `expand` first",
            layout.work_dir.display()
        )));
    }
    for ds in collection.datasets() {
        for d in ds.concrete() {
            clean_design_outputs(&d.dir).map_err(failure)?;
        }
    }
    let mut summary = BuildSummary::default();
    for flow in &flows {
        let (outcomes, timeline) =
            execute_parallel(&collection, flow.as_ref(), cfg.strategy, cfg.n_workers, cfg.pin_cores);
        let counts = summary.counts.entry(flow.name().to_string()).or_default();
        for o in &outcomes {
            *counts.entry(o.status).or_default() += 1;
        }
        summary.outcomes.extend(outcomes);
        if summary.timeline.records.is_empty() {
            summary.timeline = timeline;
        } else {
            summary.timeline.append(timeline);
        }
    }
    let mut by_design: HashMap<&str, Vec<FlowOutcome>> = HashMap::new();
    for o in &summary.outcomes {
        by_design.entry(o.design_id.as_str()).or_default().push(o.clone());
    }
    for ds in collection.datasets() {
        for d in ds.concrete() {
            let outcomes = by_design.get(d.id.as_str()).map(Vec::as_slice).unwrap_or_default();
            extract_design_data(&d.dir, outcomes).map_err(failure)?;
        }
    }
    write_timeline(&summary.timeline, &layout.timeline_path(), Some(&layout.utilization_path())).map_err(failure)?;
    Ok(summary)
}

pub fn cmd_build(cfg: &RunConfig) -> Result<i32, CliError> {
    let summary = run_build(cfg)?;
    for (flow, counts) in &summary.counts {
        let parts: Vec<String> = counts.iter().map(|(s, n)| format!("{s}={n}")).collect();
        println!("{flow}: {}", parts.join(" "));
    }
    println!(
        "makespan {:.2}s on {} workers ({})",
        summary.timeline.makespan(),
        summary.timeline.n_workers,
        cfg.strategy
    );
    Ok(0)
}

#[derive(Debug, Clone, Args)]
pub struct AggregateOpts {
    #[arg(long, default_value = "csv")]
    pub format: TabularFormat,
    /// Also write a zip archive of the dataset.
    #[arg(long)]
    pub archive: bool,
    /// Include `hls_prj` build artifacts in the archive.
    #[arg(long)]
    pub artifacts: bool,
    /// Table path; defaults to `<work_dir>/dataset.<format>`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Default for AggregateOpts {
    fn default() -> Self {
        Self {
            format: TabularFormat::Csv,
            archive: false,
            artifacts: false,
            out: None,
        }
    }
}

/// Aggregation stage. Returns the table and the files written.
pub fn run_aggregate(cfg: &RunConfig, opts: &AggregateOpts) -> Result<(AggregatedTable, Vec<PathBuf>), CliError> {
    let work = &cfg.work_dir;
    fs::create_dir_all(work).map_err(failure)?;
    let table = aggregate_collection(work);
    let out = opts
        .out
        .clone()
        .unwrap_or_else(|| work.join(format!("dataset.{}", opts.format)));
    let mut written = vec![export_tabular(&table, &out, opts.format).map_err(failure)?];
    if opts.archive {
        written.push(archive_dataset(work, &work.join("dataset.zip"), opts.artifacts).map_err(failure)?);
    }
    Ok((table, written))
}

pub fn cmd_aggregate(cfg: &RunConfig, opts: &AggregateOpts) -> Result<i32, CliError> {
    let (table, written) = run_aggregate(cfg, opts)?;
    println!("{} rows", table.len());
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(0)
}

fn format_for(path: &Path) -> TabularFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some("jsonl") => TabularFormat::Jsonl,
        _ => TabularFormat::Csv,
    }
}

/// Reads a CSV or JSONL table, chosen by file extension.
pub fn read_table(path: &Path) -> Result<AggregatedTable, CliError> {
    read_tabular(path, format_for(path)).map_err(failure)
}

#[derive(Debug, Clone, Args)]
pub struct RegressOpts {
    pub table_a: PathBuf,
    pub table_b: PathBuf,
    /// Comma-separated column names.
    #[arg(long, value_delimiter = ',')]
    pub metrics: Vec<String>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Write the report as JSON to this path.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

pub fn cmd_regress(opts: &RegressOpts) -> Result<i32, CliError> {
    let a = read_table(&opts.table_a)?;
    let b = read_table(&opts.table_b)?;
    let metrics: Vec<&str> = if opts.metrics.is_empty() {
        DEFAULT_REGRESS_METRICS.to_vec()
    } else {
        opts.metrics.iter().map(String::as_str).collect()
    };
    let report = compare_tool_versions(&a.rows, &b.rows, &metrics, opts.alpha).map_err(|e| match e {
        AnalysisError::NoPairs => CliError::NoData(e.to_string()),
        other => failure(other),
    })?;
    print!("{}", report.render_table());
    let json = serde_json::to_string_pretty(&report).map_err(failure)?;
    match &opts.json {
        Some(p) => fs::write(p, json + "\n").map_err(failure)?,
        None => println!("{json}"),
    }
    Ok(0)
}

#[derive(Debug, Clone, Args)]
pub struct StatsOpts {
    pub table: PathBuf,
    #[arg(long, value_enum, default_value = "base_design")]
    pub group_by: GroupByArg,
    #[arg(long, value_delimiter = ',')]
    pub metrics: Vec<String>,
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Print an equal-width histogram of this column as CSV.
    #[arg(long)]
    pub histogram: Option<String>,
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum GroupByArg {
    BaseDesign,
    Dataset,
}

impl From<GroupByArg> for GroupBy {
    fn from(g: GroupByArg) -> Self {
        match g {
            GroupByArg::BaseDesign => GroupBy::BaseDesign,
            GroupByArg::Dataset => GroupBy::Dataset,
        }
    }
}

pub fn cmd_stats(opts: &StatsOpts) -> Result<i32, CliError> {
    let table = read_table(&opts.table)?;
    if table.is_empty() {
        return Err(CliError::NoData(format!("{} has no rows", opts.table.display())));
    }
    let metrics: Vec<&str> = if opts.metrics.is_empty() {
        DEFAULT_COVERAGE_METRICS.to_vec()
    } else {
        opts.metrics.iter().map(String::as_str).collect()
    };
    let summary = coverage_summary(&table, opts.group_by.into(), &metrics);
    print!("{}", summary.render_table());
    if let Some(p) = &opts.json {
        fs::write(p, serde_json::to_string_pretty(&summary).map_err(failure)? + "\n").map_err(failure)?;
    }
    if let Some(column) = &opts.histogram {
        let values: Vec<f64> = table.rows.iter().filter_map(|r| r.metric(column)).collect();
        if values.is_empty() {
            return Err(CliError::NoData(format!("column `{column}` has no values")));
        }
        println!("bin_lo,bin_hi,count");
        for b in histogram(&values, opts.bins).map_err(failure)? {
            println!("{},{},{}", b.lo, b.hi, b.count);
        }
    }
    Ok(0)
}

#[derive(Debug, Clone, Args)]
pub struct DemoOpts {
    #[arg(long, default_value = "hlsforge-demo")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 4)]
    pub samples: usize,
    #[arg(long, default_value_t = 4)]
    pub workers: usize,
}

impl Default for DemoOpts {
    fn default() -> Self {
        Self {
            out: PathBuf::from("hlsforge-demo"),
            seed: 42,
            samples: 4,
            workers: 4,
        }
    }
}

/// Name of the dataset holding the sampled design points.
pub const DEMO_DATASET: &str = "demo";
/// Name of the dataset holding the unoptimized base designs.
pub const DEMO_BASE_DATASET: &str = "demo_base";

/// The config `demo` runs with, rooted at `out`.
pub fn demo_config(out: &Path, opts: &DemoOpts) -> RunConfig {
    RunConfig {
        work_dir: out.join("work"),
        datasets: vec![
            DatasetEntry {
                name: DEMO_DATASET.into(),
                path: out.join("designs").join(DEMO_DATASET),
            },
            DatasetEntry {
                name: DEMO_BASE_DATASET.into(),
                path: out.join("designs").join(DEMO_BASE_DATASET),
            },
        ],
        frontend: FrontendConfig {
            random_sample: true,
            n_samples: opts.samples,
            seed: opts.seed,
            vendor: crate::design::Vendor::Xilinx,
        },
        flows: vec![
            FlowConfig::mock("hls_synth", FlowKind::MockHlsSynth, &["dataset_hls.tcl", "opt.tcl"]),
            FlowConfig::mock("hls_impl", FlowKind::MockImpl, &["dataset_hls_ip_export.tcl"]),
        ],
        n_workers: opts.workers.max(1),
        strategy: Strategy::FineGrained,
        pin_cores: false,
        seed: None,
    }
}

#[derive(Debug, Clone)]
pub struct DemoSummary {
    pub config: RunConfig,
    pub expansion: FrontendReport,
    pub build: BuildSummary,
    pub table: AggregatedTable,
    pub table_path: PathBuf,
}

/// Writes the bundled designs under `out` and runs every stage on them.
pub fn run_demo(opts: &DemoOpts) -> Result<DemoSummary, CliError> {
    let out = &opts.out;
    let designs = out.join("designs");
    crate::fixtures::write_bundled_designs(&designs.join(DEMO_DATASET)).map_err(failure)?;
    crate::fixtures::write_base_designs(&designs.join(DEMO_BASE_DATASET)).map_err(failure)?;
    let cfg = demo_config(out, opts);
    fs::write(
        out.join("config.json"),
        serde_json::to_string_pretty(&cfg).map_err(failure)? + "\n",
    )
    .map_err(failure)?;
    let expansion = run_expand(&cfg)?;
    if expansion.any_failed() {
        return Err(CliError::Failure("bundled designs failed to expand".into()));
    }
    let build = run_build(&cfg)?;
    let (table, written) = run_aggregate(&cfg, &AggregateOpts::default())?;
    let coverage = coverage_summary(&table, GroupBy::Dataset, DEFAULT_COVERAGE_METRICS);
    fs::write(
        cfg.work_dir.join("coverage.json"),
        serde_json::to_string_pretty(&coverage).map_err(failure)? + "\n",
    )
    .map_err(failure)?;
    Ok(DemoSummary {
        config: cfg,
        expansion,
        build,
        table,
        table_path: written[0].clone(),
    })
}

pub fn cmd_demo(opts: &DemoOpts) -> Result<i32, CliError> {
    let s = run_demo(opts)?;
    println!(
        "expanded {} designs into {} concrete designs",
        s.expansion.designs.len(),
        s.expansion.concrete_count()
    );
    for (flow, counts) in &s.build.counts {
        let parts: Vec<String> = counts.iter().map(|(st, n)| format!("{st}={n}")).collect();
        println!("{flow}: {}", parts.join(" "));
    }
    println!("{} rows in {}", s.table.len(), s.table_path.display());
    let coverage = coverage_summary(&s.table, GroupBy::Dataset, &["hls_lut", "hls_latency_avg_cycles"]);
    print!("{}", coverage.render_table());
    Ok(0)
}

#[derive(Debug, Parser)]
#[command(name = "hlsforge", version, about = "Expand, build and aggregate HLS design datasets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Expand abstract designs into concrete design points.
    Expand {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the configured tool flows over every concrete design.
    Build {
        #[arg(long)]
        config: PathBuf,
    },
    /// Collect per-design results into a table.
    Aggregate {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        opts: AggregateOpts,
    },
    /// Compare two tables paired by design id.
    Regress(RegressOpts),
    /// Summarize metric coverage of a table.
    Stats(StatsOpts),
    /// Run the whole pipeline on the bundled example designs.
    Demo(DemoOpts),
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match &cli.command {
        Command::Expand { config } => load_config(config).and_then(|c| cmd_expand(&c)),
        Command::Build { config } => load_config(config).and_then(|c| cmd_build(&c)),
        Command::Aggregate { config, opts } => load_config(config).and_then(|c| cmd_aggregate(&c, opts)),
        Command::Regress(opts) => cmd_regress(opts),
        Command::Stats(opts) => cmd_stats(opts),
        Command::Demo(opts) => cmd_demo(opts),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
