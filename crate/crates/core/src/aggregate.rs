// SPDX-License-Identifier: Apache-2.0

//! Report parsing, per-design standard JSON, and dataset-level tables.
//!
//! Failed designs are kept as rows with empty metric sections; filtering is
//! left to whoever consumes the table.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::design::{DesignRecord, WorkspaceLayout};
use crate::optdsl::DirectiveAssignment;
use crate::toolflows::{FlowOutcome, FlowStatus, CSYNTH_REPORT_PATH, IMPL_REPORT_PATH};

pub const HLS_DATA_FILE: &str = "data_hls.json";
pub const IMPL_DATA_FILE: &str = "data_impl.json";
pub const EXECUTION_DATA_FILE: &str = "data_execution.json";
pub const SCHEMA_VERSION: u32 = 1;
/// `source` column value for rows produced by this tool.
pub const GENERATED_SOURCE: &str = "hlsforge";

#[derive(Debug, Error)]
pub enum AggregateError {
    #[error("malformed report: {0}")]
    MalformedReport(String),
    #[error("report is missing field `{0}`")]
    MissingField(String),
    #[error("malformed mapping spec: {0}")]
    MalformedSpec(String),
    #[error("cannot read {path}: {message}")]
    SourceUnreadable { path: PathBuf, message: String },
    #[error("malformed table {path}: {message}")]
    MalformedTable { path: PathBuf, message: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, AggregateError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> AggregateError + '_ {
    move |source| AggregateError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// HLS estimates. Every field is optional so that imported datasets can
/// carry partial data; parsed reports fill in all but the latencies a tool
/// reports as undefined.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HlsSynthMetrics {
    pub latency_best_cycles: Option<u64>,
    pub latency_avg_cycles: Option<u64>,
    pub latency_worst_cycles: Option<u64>,
    pub ii: Option<u64>,
    pub clock_estimate_ns: Option<f64>,
    pub lut: Option<u64>,
    pub ff: Option<u64>,
    pub dsp: Option<u64>,
    pub bram: Option<u64>,
    pub uram: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImplMetrics {
    pub wns_ns: f64,
    pub whs_ns: f64,
    pub lut: u64,
    pub ff: u64,
    pub dsp: u64,
    pub bram: u64,
    pub total_power_w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionMeta {
    pub tool_name: String,
    pub tool_version: String,
    pub runtime_s: f64,
    pub status: FlowStatus,
}

impl ExecutionMeta {
    /// Folds the outcomes of the flows run on one design. The runtime is the
    /// sum over flows and the status is the first non-ok one.
    pub fn from_outcomes(outcomes: &[FlowOutcome]) -> Option<Self> {
        let first = outcomes.first()?;
        Some(Self {
            tool_name: first.flow_name.clone(),
            tool_version: first.tool_version.clone(),
            runtime_s: outcomes.iter().map(FlowOutcome::reported_runtime_s).sum(),
            status: outcomes
                .iter()
                .map(|o| o.status)
                .find(|s| *s != FlowStatus::Ok)
                .unwrap_or(FlowStatus::Ok),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsBundle {
    pub hls: Option<HlsSynthMetrics>,
    pub implementation: Option<ImplMetrics>,
    pub execution: Option<ExecutionMeta>,
}

fn child<'a, 'i>(node: roxmltree::Node<'a, 'i>, name: &str) -> Option<roxmltree::Node<'a, 'i>> {
    node.children().find(|n| n.has_tag_name(name))
}

fn path<'a, 'i>(node: roxmltree::Node<'a, 'i>, names: &[&str]) -> Option<roxmltree::Node<'a, 'i>> {
    names.iter().try_fold(node, |n, name| child(n, name))
}

fn text_of<'a>(node: Option<roxmltree::Node<'a, '_>>) -> Option<&'a str> {
    node.and_then(|n| n.text()).map(str::trim)
}

fn parse_num<T: FromStr>(value: &str, what: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| AggregateError::MalformedReport(format!("{what}: `{value}` is not a number")))
}

/// Parses a Vitis HLS `csynth.xml` (2023.1 layout).
pub fn parse_vitis_csynth_report(xml: &str) -> Result<HlsSynthMetrics> {
    let doc = roxmltree::Document::parse(xml).map_err(|e| AggregateError::MalformedReport(e.to_string()))?;
    let root = doc.root_element();
    let area = child(root, "AreaEstimates")
        .ok_or_else(|| AggregateError::MalformedReport("no AreaEstimates element".into()))?;
    let latency_node = path(root, &["PerformanceEstimates", "SummaryOfOverallLatency"]);
    let latency = |name: &str| -> Result<Option<u64>> {
        match text_of(latency_node.and_then(|n| child(n, name))) {
            None | Some("undef") | Some("") => Ok(None),
            Some(v) => parse_num(v, name).map(Some),
        }
    };
    let clock = text_of(path(
        root,
        &["PerformanceEstimates", "SummaryOfTimingAnalysis", "EstimatedClockPeriod"],
    ))
    .map(|v| parse_num::<f64>(v, "EstimatedClockPeriod"))
    .transpose()?;
    let resources = child(area, "Resources");
    let resource = |names: &[&str]| -> Result<Option<u64>> {
        let value = names
            .iter()
            .find_map(|name| text_of(resources.and_then(|r| child(r, name))));
        match value {
            None => Ok(Some(0)),
            Some(v) => parse_num(v, names[0]).map(Some),
        }
    };
    Ok(HlsSynthMetrics {
        latency_best_cycles: latency("Best-caseLatency")?,
        latency_avg_cycles: latency("Average-caseLatency")?,
        latency_worst_cycles: latency("Worst-caseLatency")?,
        ii: latency("Interval-min")?,
        clock_estimate_ns: clock,
        lut: resource(&["LUT"])?,
        ff: resource(&["FF"])?,
        dsp: resource(&["DSP", "DSP48E"])?,
        bram: resource(&["BRAM_18K"])?,
        uram: resource(&["URAM"])?,
    })
}

/// Parses `impl_report.json`. Extra keys are ignored.
pub fn parse_impl_report(json: &str) -> Result<ImplMetrics> {
    let value: Value = serde_json::from_str(json).map_err(|e| AggregateError::MalformedReport(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| AggregateError::MalformedReport("expected a JSON object".into()))?;
    let field = |name: &str| obj.get(name).ok_or_else(|| AggregateError::MissingField(name.into()));
    let float = |name: &str| -> Result<f64> {
        field(name)?
            .as_f64()
            .ok_or_else(|| AggregateError::MalformedReport(format!("`{name}` is not a number")))
    };
    let int = |name: &str| -> Result<u64> {
        field(name)?
            .as_u64()
            .ok_or_else(|| AggregateError::MalformedReport(format!("`{name}` is not a count")))
    };
    Ok(ImplMetrics {
        wns_ns: float("wns_ns")?,
        whs_ns: float("whs_ns")?,
        lut: int("lut")?,
        ff: int("ff")?,
        dsp: int("dsp")?,
        bram: int("bram")?,
        total_power_w: float("total_power_w")?,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("metrics serialize");
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

fn sync_file<T: Serialize>(dir: &Path, name: &str, value: Option<&T>, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    match value {
        Some(v) => {
            write_json(&path, v)?;
            written.push(path);
        }
        None if path.exists() => fs::remove_file(&path).map_err(io_err(&path))?,
        None => {}
    }
    Ok(())
}

/// Writes `data_hls.json`, `data_impl.json` and `data_execution.json` for the
/// sections present in `bundle`, removing files for absent sections.
pub fn write_standard_json(design_dir: &Path, bundle: &MetricsBundle) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    sync_file(design_dir, HLS_DATA_FILE, bundle.hls.as_ref(), &mut written)?;
    sync_file(design_dir, IMPL_DATA_FILE, bundle.implementation.as_ref(), &mut written)?;
    sync_file(design_dir, EXECUTION_DATA_FILE, bundle.execution.as_ref(), &mut written)?;
    Ok(written)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Option<T> {
    let text = fs::read_to_string(path).ok()?;
    match serde_json::from_str(&text) {
        Ok(v) => Some(v),
        Err(e) => {
            log::warn!("ignoring unreadable {}: {e}", path.display());
            None
        }
    }
}

/// Reads whatever standard JSON files exist in a design directory.
pub fn read_standard_json(design_dir: &Path) -> MetricsBundle {
    MetricsBundle {
        hls: read_json(&design_dir.join(HLS_DATA_FILE)),
        implementation: read_json(&design_dir.join(IMPL_DATA_FILE)),
        execution: read_json(&design_dir.join(EXECUTION_DATA_FILE)),
    }
}

/// Parses the tool reports present in a design directory, folds in the flow
/// outcomes, and writes the standard JSON files.
pub fn extract_design_data(design_dir: &Path, outcomes: &[FlowOutcome]) -> Result<MetricsBundle> {
    let read = |rel: &str| fs::read_to_string(design_dir.join(rel)).ok();
    let bundle = MetricsBundle {
        hls: read(CSYNTH_REPORT_PATH).and_then(|x| match parse_vitis_csynth_report(&x) {
            Ok(m) => Some(m),
            Err(e) => {
                log::warn!("{}: {e}", design_dir.display());
                None
            }
        }),
        implementation: read(IMPL_REPORT_PATH).and_then(|x| parse_impl_report(&x).ok()),
        execution: ExecutionMeta::from_outcomes(outcomes),
    };
    write_standard_json(design_dir, &bundle)?;
    Ok(bundle)
}

/// Directive summary columns derived from an assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AssignmentStats {
    pub n_directives: u64,
    pub n_pipelined: u64,
    pub max_unroll: u64,
    pub max_partition: u64,
}

impl AssignmentStats {
    pub fn of(assignment: &DirectiveAssignment) -> Self {
        let mut stats = Self {
            n_directives: 0,
            n_pipelined: 0,
            max_unroll: 1,
            max_partition: 1,
        };
        for sel in assignment.selections() {
            stats.n_directives += 1 + u64::from(sel.fixed_directive.is_some());
            if sel.fixed_directive.as_deref() == Some("pipeline") || sel.param_kind == "pipeline" {
                stats.n_pipelined += 1;
            }
            let factor = sel
                .choice
                .rsplit('-')
                .next()
                .and_then(|f| f.parse::<u64>().ok());
            match (sel.param_kind.as_str(), factor) {
                ("unroll", Some(f)) => stats.max_unroll = stats.max_unroll.max(f),
                ("array_partition", Some(f)) => stats.max_partition = stats.max_partition.max(f),
                _ => {}
            }
        }
        stats
    }
}

/// One row of an aggregated table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub design_id: String,
    pub base_name: String,
    pub dataset: String,
    pub vendor: Option<String>,
    pub source: String,
    pub assignment: Option<String>,
    pub stats: Option<AssignmentStats>,
    pub hls: Option<HlsSynthMetrics>,
    pub implementation: Option<ImplMetrics>,
    pub execution: Option<ExecutionMeta>,
}

/// Column order of CSV and JSONL exports.
pub const COLUMNS: [&str; 31] = [
    "design_id",
    "base_name",
    "dataset",
    "vendor",
    "source",
    "assignment",
    "n_directives",
    "n_pipelined",
    "max_unroll",
    "max_partition",
    "hls_latency_best_cycles",
    "hls_latency_avg_cycles",
    "hls_latency_worst_cycles",
    "hls_ii",
    "hls_clock_estimate_ns",
    "hls_lut",
    "hls_ff",
    "hls_dsp",
    "hls_bram",
    "hls_uram",
    "impl_wns_ns",
    "impl_whs_ns",
    "impl_lut",
    "impl_ff",
    "impl_dsp",
    "impl_bram",
    "impl_total_power_w",
    "tool_name",
    "tool_version",
    "runtime_s",
    "status",
];

const HLS_COLUMNS: std::ops::Range<usize> = 10..20;
const FLOAT_COLUMNS: [&str; 5] = [
    "hls_clock_estimate_ns",
    "impl_wns_ns",
    "impl_whs_ns",
    "impl_total_power_w",
    "runtime_s",
];
const STRING_COLUMNS: [&str; 9] = [
    "design_id",
    "base_name",
    "dataset",
    "vendor",
    "source",
    "assignment",
    "tool_name",
    "tool_version",
    "status",
];

impl TableRow {
    /// Values in [`COLUMNS`] order; `Value::Null` marks an empty cell.
    pub fn values(&self) -> Vec<Value> {
        fn v<T: Serialize>(x: T) -> Value {
            serde_json::to_value(x).expect("scalar serializes")
        }
        let h = self.hls.clone().unwrap_or_default();
        let i = self.implementation.as_ref();
        let e = self.execution.as_ref();
        let s = self.stats.as_ref();
        vec![
            v(&self.design_id),
            v(&self.base_name),
            v(&self.dataset),
            v(&self.vendor),
            v(&self.source),
            v(&self.assignment),
            v(s.map(|s| s.n_directives)),
            v(s.map(|s| s.n_pipelined)),
            v(s.map(|s| s.max_unroll)),
            v(s.map(|s| s.max_partition)),
            v(h.latency_best_cycles),
            v(h.latency_avg_cycles),
            v(h.latency_worst_cycles),
            v(h.ii),
            v(h.clock_estimate_ns),
            v(h.lut),
            v(h.ff),
            v(h.dsp),
            v(h.bram),
            v(h.uram),
            v(i.map(|i| i.wns_ns)),
            v(i.map(|i| i.whs_ns)),
            v(i.map(|i| i.lut)),
            v(i.map(|i| i.ff)),
            v(i.map(|i| i.dsp)),
            v(i.map(|i| i.bram)),
            v(i.map(|i| i.total_power_w)),
            v(e.map(|e| &e.tool_name)),
            v(e.map(|e| &e.tool_version)),
            v(e.map(|e| e.runtime_s)),
            v(e.map(|e| e.status.as_str())),
        ]
    }

    /// Value of one column by name.
    pub fn get(&self, column: &str) -> Option<Value> {
        let idx = COLUMNS.iter().position(|c| *c == column)?;
        Some(self.values().swap_remove(idx))
    }

    /// Numeric value of a column, `None` when null or not numeric.
    pub fn metric(&self, column: &str) -> Option<f64> {
        self.get(column).and_then(|v| v.as_f64())
    }

    /// Rebuilds a row from column values. Missing keys are treated as null.
    pub fn from_map(map: &Map<String, Value>) -> std::result::Result<Self, String> {
        let get = |c: &str| map.get(c).filter(|v| !v.is_null());
        let string = |c: &str| get(c).and_then(Value::as_str).map(str::to_string);
        let required = |c: &str| string(c).ok_or_else(|| format!("missing `{c}`"));
        let int = |c: &str| -> std::result::Result<Option<u64>, String> {
            get(c)
                .map(|v| v.as_u64().ok_or_else(|| format!("`{c}` is not a count")))
                .transpose()
        };
        let float = |c: &str| -> std::result::Result<Option<f64>, String> {
            get(c)
                .map(|v| v.as_f64().ok_or_else(|| format!("`{c}` is not a number")))
                .transpose()
        };
        let stats = match (
            int("n_directives")?,
            int("n_pipelined")?,
            int("max_unroll")?,
            int("max_partition")?,
        ) {
            (Some(n_directives), Some(n_pipelined), Some(max_unroll), Some(max_partition)) => {
                Some(AssignmentStats {
                    n_directives,
                    n_pipelined,
                    max_unroll,
                    max_partition,
                })
            }
            _ => None,
        };
        let hls = if COLUMNS[HLS_COLUMNS].iter().any(|c| get(c).is_some()) {
            Some(HlsSynthMetrics {
                latency_best_cycles: int("hls_latency_best_cycles")?,
                latency_avg_cycles: int("hls_latency_avg_cycles")?,
                latency_worst_cycles: int("hls_latency_worst_cycles")?,
                ii: int("hls_ii")?,
                clock_estimate_ns: float("hls_clock_estimate_ns")?,
                lut: int("hls_lut")?,
                ff: int("hls_ff")?,
                dsp: int("hls_dsp")?,
                bram: int("hls_bram")?,
                uram: int("hls_uram")?,
            })
        } else {
            None
        };
        let implementation = match (
            float("impl_wns_ns")?,
            float("impl_whs_ns")?,
            int("impl_lut")?,
            int("impl_ff")?,
            int("impl_dsp")?,
            int("impl_bram")?,
            float("impl_total_power_w")?,
        ) {
            (Some(wns_ns), Some(whs_ns), Some(lut), Some(ff), Some(dsp), Some(bram), Some(total_power_w)) => {
                Some(ImplMetrics {
                    wns_ns,
                    whs_ns,
                    lut,
                    ff,
                    dsp,
                    bram,
                    total_power_w,
                })
            }
            _ => None,
        };
        let execution = match (
            string("tool_name"),
            string("tool_version"),
            float("runtime_s")?,
            string("status"),
        ) {
            (Some(tool_name), Some(tool_version), Some(runtime_s), Some(status)) => Some(ExecutionMeta {
                tool_name,
                tool_version,
                runtime_s,
                status: FlowStatus::parse(&status).ok_or_else(|| format!("unknown status `{status}`"))?,
            }),
            _ => None,
        };
        Ok(Self {
            design_id: required("design_id")?,
            base_name: required("base_name")?,
            dataset: required("dataset")?,
            vendor: string("vendor"),
            source: required("source")?,
            assignment: string("assignment"),
            stats,
            hls,
            implementation,
            execution,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AggregatedTable {
    pub rows: Vec<TableRow>,
}

impl AggregatedTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn sort(&mut self) {
        self.rows
            .sort_by(|a, b| (&a.dataset, &a.design_id).cmp(&(&b.dataset, &b.design_id)));
    }
}

fn subdirs(dir: &Path) -> Vec<PathBuf> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map(|rd| {
            rd.filter_map(|e| e.ok())
                .map(|e| e.path())
                .filter(|p| p.is_dir())
                .filter(|p| !p.file_name().is_some_and(|n| n.to_string_lossy().starts_with('.')))
                .collect()
        })
        .unwrap_or_default();
    out.sort();
    out
}

/// One row per concrete design directory under the workspace.
pub fn aggregate_collection(work_dir: &Path) -> AggregatedTable {
    let layout = WorkspaceLayout::new(work_dir);
    let mut table = AggregatedTable::default();
    for (dataset, dir) in layout.post_frontend_datasets().unwrap_or_default() {
        for design_dir in subdirs(&dir) {
            let dir_name = design_dir
                .file_name()
                .expect("directory has a name")
                .to_string_lossy()
                .into_owned();
            let record = DesignRecord::read(&design_dir).ok();
            let (design_id, base_name) = match &record {
                Some(r) => (r.id.clone(), r.base_name.clone()),
                None => {
                    let base = dir_name.split("__").next().unwrap_or(&dir_name).to_string();
                    (dir_name.clone(), base)
                }
            };
            let assignment = record.as_ref().map(DesignRecord::assignment);
            let bundle = read_standard_json(&design_dir);
            table.rows.push(TableRow {
                design_id,
                base_name,
                dataset: dataset.clone(),
                vendor: record.as_ref().map(|r| r.vendor.to_string()),
                source: GENERATED_SOURCE.into(),
                assignment: assignment.as_ref().map(DirectiveAssignment::summary),
                stats: assignment.as_ref().map(AssignmentStats::of),
                hls: bundle.hls,
                implementation: bundle.implementation,
                execution: bundle.execution,
            });
        }
    }
    table.sort();
    table
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TabularFormat {
    Csv,
    Jsonl,
}

impl FromStr for TabularFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Self::Csv),
            "jsonl" => Ok(Self::Jsonl),
            other => Err(format!("unknown format `{other}` (expected csv or jsonl)")),
        }
    }
}

impl fmt::Display for TabularFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Csv => "csv",
            Self::Jsonl => "jsonl",
        })
    }
}

fn cell(value: &Value) -> String {
    match value {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Writes the table with the fixed column schema.
pub fn export_tabular(table: &AggregatedTable, path: &Path, format: TabularFormat) -> Result<PathBuf> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let file = File::create(path).map_err(io_err(path))?;
    match format {
        TabularFormat::Csv => {
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file);
            let csv_err = |e: csv::Error| AggregateError::Io {
                path: path.to_path_buf(),
                source: e.into(),
            };
            w.write_record(COLUMNS).map_err(csv_err)?;
            for row in &table.rows {
                w.write_record(row.values().iter().map(cell)).map_err(csv_err)?;
            }
            w.flush().map_err(io_err(path))?;
        }
        TabularFormat::Jsonl => {
            let mut w = std::io::BufWriter::new(file);
            for row in &table.rows {
                let mut line = format!("{{\"schema_version\":{SCHEMA_VERSION}");
                for (col, value) in COLUMNS.iter().zip(row.values()) {
                    line.push_str(&format!(",\"{col}\":{value}"));
                }
                line.push_str("}\n");
                w.write_all(line.as_bytes()).map_err(io_err(path))?;
            }
            w.flush().map_err(io_err(path))?;
        }
    }
    Ok(path.to_path_buf())
}

fn typed_cell(column: &str, raw: &str) -> std::result::Result<Value, String> {
    if raw.is_empty() {
        return Ok(Value::Null);
    }
    if STRING_COLUMNS.contains(&column) {
        return Ok(Value::String(raw.to_string()));
    }
    if FLOAT_COLUMNS.contains(&column) {
        let f: f64 = raw.parse().map_err(|_| format!("`{column}`: `{raw}` is not a number"))?;
        return Ok(serde_json::json!(f));
    }
    let n: u64 = raw.parse().map_err(|_| format!("`{column}`: `{raw}` is not a count"))?;
    Ok(Value::from(n))
}

/// Reads a table written by [`export_tabular`].
pub fn read_tabular(path: &Path, format: TabularFormat) -> Result<AggregatedTable> {
    let bad = |message: String| AggregateError::MalformedTable {
        path: path.to_path_buf(),
        message,
    };
    let file = File::open(path).map_err(io_err(path))?;
    let mut table = AggregatedTable::default();
    match format {
        TabularFormat::Csv => {
            let mut r = csv::Reader::from_reader(file);
            let headers = r.headers().map_err(|e| bad(e.to_string()))?.clone();
            if headers.iter().ne(COLUMNS.iter().copied()) {
                return Err(bad("header does not match the column schema".into()));
            }
            for record in r.records() {
                let record = record.map_err(|e| bad(e.to_string()))?;
                let mut map = Map::new();
                for (col, raw) in COLUMNS.iter().zip(record.iter()) {
                    map.insert(col.to_string(), typed_cell(col, raw).map_err(bad)?);
                }
                table.rows.push(TableRow::from_map(&map).map_err(bad)?);
            }
        }
        TabularFormat::Jsonl => {
            for line in BufReader::new(file).lines() {
                let line = line.map_err(io_err(path))?;
                if line.trim().is_empty() {
                    continue;
                }
                let value: Value = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
                let map = value.as_object().ok_or_else(|| bad("row is not an object".into()))?;
                if map.get("schema_version").and_then(Value::as_u64) != Some(SCHEMA_VERSION as u64) {
                    return Err(bad("unsupported schema_version".into()));
                }
                table.rows.push(TableRow::from_map(map).map_err(bad)?);
            }
        }
    }
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitRule {
    Identity,
    MhzToNs,
    NsToMhz,
}

impl UnitRule {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            UnitRule::Identity => x,
            // Period and frequency are reciprocal in either direction.
            UnitRule::MhzToNs | UnitRule::NsToMhz => 1000.0 / x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceFormat {
    Csv,
    Json,
}

/// How to read a third-party dataset into table rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappingSpec {
    pub name: String,
    pub format: SourceFormat,
    /// Source column -> target column.
    pub columns: BTreeMap<String, String>,
    /// Target column -> unit conversion.
    #[serde(default)]
    pub units: BTreeMap<String, UnitRule>,
}

/// Columns an external dataset may populate.
const IMPORT_TARGETS: [&str; 12] = [
    "design_id",
    "base_name",
    "hls_latency_best_cycles",
    "hls_latency_avg_cycles",
    "hls_latency_worst_cycles",
    "hls_ii",
    "hls_clock_estimate_ns",
    "hls_lut",
    "hls_ff",
    "hls_dsp",
    "hls_bram",
    "hls_uram",
];

fn resolve_target(target: &str) -> Option<&'static str> {
    let prefixed = format!("hls_{target}");
    IMPORT_TARGETS
        .iter()
        .copied()
        .find(|t| *t == target || *t == prefixed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportResult {
    pub rows: Vec<TableRow>,
    /// Rows skipped because a mapped value failed to parse.
    pub dropped: usize,
}

/// Header and records of an external source file.
type SourceRecords = (Vec<String>, Vec<BTreeMap<String, String>>);

fn load_records(spec: &MappingSpec, path: &Path) -> Result<SourceRecords> {
    let unreadable = |message: String| AggregateError::SourceUnreadable {
        path: path.to_path_buf(),
        message,
    };
    match spec.format {
        SourceFormat::Csv => {
            let mut r = csv::Reader::from_path(path).map_err(|e| unreadable(e.to_string()))?;
            let headers: Vec<String> = r
                .headers()
                .map_err(|e| unreadable(e.to_string()))?
                .iter()
                .map(str::to_string)
                .collect();
            let mut records = Vec::new();
            for rec in r.records() {
                let rec = rec.map_err(|e| unreadable(e.to_string()))?;
                records.push(headers.iter().cloned().zip(rec.iter().map(str::to_string)).collect());
            }
            Ok((headers, records))
        }
        SourceFormat::Json => {
            let text = fs::read_to_string(path).map_err(|e| unreadable(e.to_string()))?;
            let value: Value = serde_json::from_str(&text).map_err(|e| unreadable(e.to_string()))?;
            let items = value
                .as_array()
                .ok_or_else(|| unreadable("expected a JSON array of objects".into()))?;
            let mut keys = std::collections::BTreeSet::new();
            let mut records = Vec::new();
            for item in items {
                let obj = item
                    .as_object()
                    .ok_or_else(|| unreadable("expected a JSON array of objects".into()))?;
                let mut rec = BTreeMap::new();
                for (k, v) in obj {
                    keys.insert(k.clone());
                    if !v.is_null() {
                        rec.insert(k.clone(), cell(v));
                    }
                }
                records.push(rec);
            }
            Ok((keys.into_iter().collect(), records))
        }
    }
}

/// Imports rows from a pre-generated dataset. Rows whose mapped numeric
/// values fail to parse are dropped and counted.
pub fn import_external_dataset(spec: &MappingSpec, path: &Path) -> Result<ImportResult> {
    if spec.name.trim().is_empty() {
        return Err(AggregateError::MalformedSpec("name is empty".into()));
    }
    if spec.columns.is_empty() {
        return Err(AggregateError::MalformedSpec("no column mappings".into()));
    }
    let mut mapping: Vec<(&str, &'static str)> = Vec::new();
    for (src, dst) in &spec.columns {
        let target = resolve_target(dst)
            .ok_or_else(|| AggregateError::MalformedSpec(format!("`{dst}` is not an importable field")))?;
        if mapping.iter().any(|(_, t)| *t == target) {
            return Err(AggregateError::MalformedSpec(format!("`{target}` is mapped twice")));
        }
        mapping.push((src, target));
    }
    let mut units: BTreeMap<&'static str, UnitRule> = BTreeMap::new();
    for (dst, rule) in &spec.units {
        let target = resolve_target(dst)
            .filter(|t| mapping.iter().any(|(_, m)| m == t))
            .ok_or_else(|| AggregateError::MalformedSpec(format!("unit rule for unmapped field `{dst}`")))?;
        units.insert(target, *rule);
    }

    let (headers, records) = load_records(spec, path)?;
    for (src, _) in &mapping {
        if !headers.iter().any(|h| h == src) {
            return Err(AggregateError::MalformedSpec(format!(
                "source column `{src}` not present in {}",
                path.display()
            )));
        }
    }

    let mut rows = Vec::new();
    let mut dropped = 0;
    'records: for (n, rec) in records.iter().enumerate() {
        let mut map = Map::new();
        for (src, target) in &mapping {
            let raw = rec.get(*src).map(|s| s.trim()).unwrap_or("");
            let value = if raw.is_empty() {
                Value::Null
            } else if STRING_COLUMNS.contains(target) {
                Value::String(raw.to_string())
            } else {
                let rule = units.get(target).copied().unwrap_or(UnitRule::Identity);
                match raw.parse::<f64>() {
                    Ok(x) if x.is_finite() && x >= 0.0 => {
                        let x = rule.apply(x);
                        if FLOAT_COLUMNS.contains(target) {
                            serde_json::json!(x)
                        } else {
                            Value::from(x.round() as u64)
                        }
                    }
                    _ => {
                        log::warn!("{}: row {} dropped, `{src}`=`{raw}` is not numeric", spec.name, n + 1);
                        dropped += 1;
                        continue 'records;
                    }
                }
            };
            map.insert(target.to_string(), value);
        }
        let id = map
            .get("design_id")
            .and_then(Value::as_str)
            .map(str::to_string)
            .unwrap_or_else(|| format!("{}_{n}", spec.name));
        let base = map
            .get("base_name")
            .and_then(Value::as_str)
            .map(str::to_string)
            .unwrap_or_else(|| id.clone());
        map.insert("design_id".into(), Value::String(id));
        map.insert("base_name".into(), Value::String(base));
        map.insert("dataset".into(), Value::String(spec.name.clone()));
        map.insert("source".into(), Value::String(format!("external:{}", spec.name)));
        rows.push(TableRow::from_map(&map).map_err(AggregateError::MalformedSpec)?);
    }
    if dropped > 0 {
        log::warn!("{}: {dropped} row(s) dropped", spec.name);
    }
    Ok(ImportResult { rows, dropped })
}

const ARCHIVE_MANIFEST: &str = "manifest.json";

fn archived(rel: &str, artifacts: bool) -> bool {
    let name = rel.rsplit('/').next().unwrap_or(rel);
    if rel.split('/').any(|c| c == "hls_prj") {
        return artifacts;
    }
    (name.starts_with("data_") && name.ends_with(".json"))
        || name == "timeline.json"
        || name == crate::optdsl::RENDERED_FILE
        || name == crate::frontends::INTEL_ANNOTATIONS_FILE
        || name
            .rsplit_once('.')
            .is_some_and(|(_, ext)| ["c", "cc", "cpp", "cxx", "h", "hh", "hpp"].contains(&ext))
}

fn walk_files(root: &Path, dir: &Path, out: &mut Vec<String>) -> std::io::Result<()> {
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let path = entry.path();
        if entry.file_type()?.is_dir() {
            walk_files(root, &path, out)?;
        } else {
            let rel = path.strip_prefix(root).expect("under root");
            let rel: Vec<String> = rel.components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect();
            out.push(rel.join("/"));
        }
    }
    Ok(())
}

/// Packs the shareable parts of a workspace into a zip whose bytes depend
/// only on the file tree: members are sorted and timestamps zeroed.
pub fn archive_dataset(work_dir: &Path, out_path: &Path, artifacts: bool) -> Result<PathBuf> {
    use zip::write::SimpleFileOptions;

    let mut members = Vec::new();
    if work_dir.is_dir() {
        walk_files(work_dir, work_dir, &mut members).map_err(io_err(work_dir))?;
    }
    let out_abs = out_path.canonicalize().ok();
    members.retain(|m| {
        archived(m, artifacts) && work_dir.join(m).canonicalize().ok() != out_abs
    });
    members.sort();

    let file = File::create(out_path).map_err(io_err(out_path))?;
    let mut zip = zip::ZipWriter::new(file);
    let options = SimpleFileOptions::default()
        .compression_method(zip::CompressionMethod::Deflated)
        .last_modified_time(zip::DateTime::default())
        .unix_permissions(0o644);
    let zip_err = |e: zip::result::ZipError| AggregateError::Io {
        path: out_path.to_path_buf(),
        source: std::io::Error::other(e),
    };
    let manifest = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "artifacts": artifacts,
        "files": members,
    });
    zip.start_file(ARCHIVE_MANIFEST, options).map_err(zip_err)?;
    zip.write_all(serde_json::to_string_pretty(&manifest).expect("manifest serializes").as_bytes())
        .map_err(io_err(out_path))?;
    for member in &members {
        let src = work_dir.join(member);
        let bytes = fs::read(&src).map_err(io_err(&src))?;
        zip.start_file(member.as_str(), options).map_err(zip_err)?;
        zip.write_all(&bytes).map_err(io_err(out_path))?;
    }
    zip.finish().map_err(zip_err)?;
    Ok(out_path.to_path_buf())
}
