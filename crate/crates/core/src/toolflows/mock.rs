// SPDX-License-Identifier: Apache-2.0

//! Deterministic stand-ins for HLS synthesis and implementation.
//!
//! The mock synthesis flow reads the directives a frontend produced (`opt.tcl`
//! for Xilinx designs, injected source annotations for Intel designs) together
//! with a per-design `mock_manifest.json`, evaluates an analytical cost model,
//! and writes reports in the same shape the real tools produce. With
//! `U` the unroll factor of a loop, `T` its trip count and `P` whether it is
//! pipelined:
//!
//! ```text
//! cycles(L)  = P ? ceil(T/U) - 1 + body_ops : ceil(T/U) * body_ops
//! latency    = sum of cycles(L)          (best = avg, worst = 2 * avg)
//! LUT        = base_lut + sum 25 * body_ops * U
//! FF         = base_ff  + sum 15 * body_ops * U
//! DSP        = sum mult_ops * U
//! BRAM_18K   = sum over arrays ceil(depth * elem_bytes / 2048) * banks
//! clock (ns) = 3.0 + 0.2 * log2(max U)
//! ```
//!
//! The constants live in [`CostModel`] so that two "tool versions" can be
//! simulated by running the same designs under different constant sets.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::Write;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ensure_dir, simulated_delay, Invocation, FlowStatus, ToolFlow, ToolFlowSpec};
use crate::aggregate::{parse_vitis_csynth_report, HlsSynthMetrics};
use crate::design::{ConcreteDesign, Vendor};
use crate::frontends::{parse_anchor, source_files};
use crate::optdsl::RENDERED_FILE;

pub const MANIFEST_FILE: &str = "mock_manifest.json";
pub const CSYNTH_REPORT_PATH: &str = "hls_prj/solution1/syn/report/csynth.xml";
pub const IMPL_REPORT_PATH: &str = "hls_prj/impl_report.json";

#[derive(Debug, Error)]
pub enum MockError {
    #[error("{0} not found in design directory")]
    ManifestMissing(String),
    #[error("malformed manifest: {0}")]
    MalformedManifest(String),
    #[error("directive targets unknown label `{0}`")]
    LabelUnknown(String),
    #[error("malformed directive `{0}`")]
    MalformedDirective(String),
    #[error("synthesis report missing: {0}")]
    SynthReportMissing(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoopInfo {
    pub label: String,
    pub trip_count: u64,
    pub body_ops: u64,
    #[serde(default)]
    pub mult_ops: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrayInfo {
    pub label: String,
    pub elem_bytes: u64,
    pub depth: u64,
}

fn default_top() -> String {
    "top".into()
}

fn default_clock_target() -> f64 {
    10.0
}

/// `mock_manifest.json`: the structural facts the cost model needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockManifest {
    #[serde(default = "default_top")]
    pub top: String,
    #[serde(default = "default_clock_target")]
    pub clock_target_ns: f64,
    pub base_lut: u64,
    pub base_ff: u64,
    #[serde(default)]
    pub loops: Vec<LoopInfo>,
    #[serde(default)]
    pub arrays: Vec<ArrayInfo>,
}

impl MockManifest {
    pub fn loop_info(&self, label: &str) -> Option<&LoopInfo> {
        self.loops.iter().find(|l| l.label == label)
    }

    pub fn array_info(&self, label: &str) -> Option<&ArrayInfo> {
        self.arrays.iter().find(|a| a.label == label)
    }

    fn validate(&self) -> Result<(), MockError> {
        for l in &self.loops {
            if l.trip_count == 0 || l.body_ops == 0 {
                return Err(MockError::MalformedManifest(format!(
                    "loop `{}` needs trip_count >= 1 and body_ops >= 1",
                    l.label
                )));
            }
        }
        for a in &self.arrays {
            if a.elem_bytes == 0 || a.depth == 0 {
                return Err(MockError::MalformedManifest(format!(
                    "array `{}` needs elem_bytes >= 1 and depth >= 1",
                    a.label
                )));
            }
        }
        Ok(())
    }
}

pub fn load_manifest(dir: &Path) -> Result<MockManifest, MockError> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path)
        .map_err(|_| MockError::ManifestMissing(MANIFEST_FILE.to_string()))?;
    let manifest: MockManifest =
        serde_json::from_str(&text).map_err(|e| MockError::MalformedManifest(e.to_string()))?;
    manifest.validate()?;
    Ok(manifest)
}

/// Constants of the analytical cost model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostModel {
    pub version: String,
    pub lut_per_op: u64,
    pub ff_per_op: u64,
    pub bram_block_bytes: u64,
    pub clock_base_ns: f64,
    pub clock_per_log2_unroll_ns: f64,
    pub latency_worst_factor: u64,
    pub impl_resource_scale: f64,
    pub wns_lut_coeff: f64,
    pub whs_ns: f64,
    pub power_static_w: f64,
    pub power_per_lut_w: f64,
    pub power_per_dsp_w: f64,
    pub synth_runtime_base_s: f64,
    pub impl_runtime_base_s: f64,
    pub runtime_per_lut_s: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            version: "mock-1.0".into(),
            lut_per_op: 25,
            ff_per_op: 15,
            bram_block_bytes: 2048,
            clock_base_ns: 3.0,
            clock_per_log2_unroll_ns: 0.2,
            latency_worst_factor: 2,
            impl_resource_scale: 0.9,
            wns_lut_coeff: 0.1,
            whs_ns: 0.05,
            power_static_w: 0.5,
            power_per_lut_w: 1e-5,
            power_per_dsp_w: 1e-3,
            synth_runtime_base_s: 5.0,
            impl_runtime_base_s: 20.0,
            runtime_per_lut_s: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LabelEffect {
    pub unroll: Option<u64>,
    pub pipelined: bool,
    pub partition_banks: Option<u64>,
}

/// Directives applied to a design, keyed by label.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DirectiveEffects {
    pub labels: BTreeMap<String, LabelEffect>,
    /// Every loop counts as pipelined (the i++ default).
    pub pipeline_all_loops: bool,
}

impl DirectiveEffects {
    fn entry(&mut self, label: &str) -> &mut LabelEffect {
        self.labels.entry(label.to_string()).or_default()
    }
}

const TCL_FLAGS: &[&str] = &["-off", "-rewind", "-skip_exit_check", "-recursive", "-region"];

fn parse_tcl_directive(line: &str, effects: &mut DirectiveEffects) -> Result<(), MockError> {
    let tokens: Vec<&str> = line
        .split_whitespace()
        .map(|t| t.trim_matches('"'))
        .collect();
    let Some(command) = tokens.first().and_then(|t| t.strip_prefix("set_directive_")) else {
        return Ok(());
    };
    let mut options: BTreeMap<&str, &str> = BTreeMap::new();
    let mut flags: Vec<&str> = Vec::new();
    let mut positional: Vec<&str> = Vec::new();
    let mut i = 1;
    while i < tokens.len() {
        let tok = tokens[i];
        if TCL_FLAGS.contains(&tok) {
            flags.push(tok);
        } else if let Some(opt) = tok.strip_prefix('-') {
            let value = tokens
                .get(i + 1)
                .ok_or_else(|| MockError::MalformedDirective(line.to_string()))?;
            options.insert(opt, value);
            i += 1;
        } else {
            positional.push(tok);
        }
        i += 1;
    }
    let location = positional
        .last()
        .ok_or_else(|| MockError::MalformedDirective(line.to_string()))?;
    let label = location.rsplit('/').next().unwrap_or(location);
    let number = |key: &str| -> Result<Option<u64>, MockError> {
        options
            .get(key)
            .map(|v| {
                v.parse::<u64>()
                    .ok()
                    .filter(|n| *n >= 1)
                    .ok_or_else(|| MockError::MalformedDirective(line.to_string()))
            })
            .transpose()
    };
    match command {
        "unroll" => effects.entry(label).unroll = Some(number("factor")?.unwrap_or(u64::MAX)),
        "pipeline" => effects.entry(label).pipelined = !flags.contains(&"-off"),
        "array_partition" => {
            let banks = if options.get("type") == Some(&"complete") {
                0 // resolved against the array depth later
            } else {
                number("factor")?.unwrap_or(1)
            };
            effects.entry(label).partition_banks = Some(banks);
        }
        _ => {}
    }
    Ok(())
}

fn parse_intel_annotation(line: &str, label: &str, effects: &mut DirectiveEffects) -> Result<bool, MockError> {
    let bad = || MockError::MalformedDirective(line.to_string());
    if let Some(rest) = line.strip_prefix("#pragma unroll") {
        let rest = rest.trim();
        let factor = if rest.is_empty() {
            u64::MAX
        } else {
            rest.parse::<u64>().ok().filter(|n| *n >= 1).ok_or_else(bad)?
        };
        effects.entry(label).unroll = Some(factor);
        return Ok(true);
    }
    if let Some(rest) = line.strip_prefix("hls_numbanks(") {
        let banks = rest
            .split(')')
            .next()
            .and_then(|n| n.trim().parse::<u64>().ok())
            .filter(|n| *n >= 1)
            .ok_or_else(bad)?;
        effects.entry(label).partition_banks = Some(banks);
        return Ok(true);
    }
    Ok(false)
}

/// Reads the directives applied to a concrete design from its directory.
pub fn read_directive_effects(design: &ConcreteDesign) -> Result<DirectiveEffects, MockError> {
    let mut effects = DirectiveEffects::default();
    match design.vendor {
        Vendor::Xilinx => {
            let path = design.dir.join(RENDERED_FILE);
            let text = fs::read_to_string(&path).map_err(|_| {
                MockError::MalformedDirective(format!("{RENDERED_FILE} missing"))
            })?;
            for line in text.lines().map(str::trim) {
                if !line.is_empty() && !line.starts_with('#') {
                    parse_tcl_directive(line, &mut effects)?;
                }
            }
        }
        Vendor::Intel => {
            effects.pipeline_all_loops = true;
            for file in source_files(&design.dir)? {
                let text = fs::read_to_string(design.dir.join(&file))?;
                let lines: Vec<&str> = text.lines().collect();
                for (i, line) in lines.iter().enumerate() {
                    if let Some(label) = parse_anchor(line) {
                        for next in &lines[i + 1..] {
                            if !parse_intel_annotation(next.trim(), label, &mut effects)? {
                                break;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(effects)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HlsEstimate {
    pub latency_best_cycles: u64,
    pub latency_avg_cycles: u64,
    pub latency_worst_cycles: u64,
    pub clock_estimate_ns: f64,
    pub lut: u64,
    pub ff: u64,
    pub dsp: u64,
    pub bram: u64,
    pub uram: u64,
}

pub fn compute_hls_estimate(
    manifest: &MockManifest,
    effects: &DirectiveEffects,
    model: &CostModel,
) -> Result<HlsEstimate, MockError> {
    for (label, effect) in &effects.labels {
        let is_loop = manifest.loop_info(label).is_some();
        let is_array = manifest.array_info(label).is_some();
        let loop_directive = effect.unroll.is_some() || effect.pipelined;
        if (loop_directive && !is_loop) || (effect.partition_banks.is_some() && !is_array) {
            return Err(MockError::LabelUnknown(label.clone()));
        }
    }
    let effect = |label: &str| effects.labels.get(label).copied().unwrap_or_default();

    let mut latency = 0u64;
    let mut lut = manifest.base_lut;
    let mut ff = manifest.base_ff;
    let mut dsp = 0u64;
    let mut max_unroll = 1u64;
    for l in &manifest.loops {
        let e = effect(&l.label);
        let unroll = e.unroll.unwrap_or(1).min(l.trip_count);
        let pipelined = e.pipelined || effects.pipeline_all_loops;
        let chunks = l.trip_count.div_ceil(unroll);
        latency += if pipelined {
            chunks - 1 + l.body_ops
        } else {
            chunks * l.body_ops
        };
        lut += model.lut_per_op * l.body_ops * unroll;
        ff += model.ff_per_op * l.body_ops * unroll;
        dsp += l.mult_ops * unroll;
        max_unroll = max_unroll.max(unroll);
    }
    let mut bram = 0u64;
    for a in &manifest.arrays {
        let banks = match effect(&a.label).partition_banks {
            Some(0) => a.depth,
            Some(b) => b,
            None => 1,
        };
        bram += (a.depth * a.elem_bytes).div_ceil(model.bram_block_bytes) * banks;
    }
    Ok(HlsEstimate {
        latency_best_cycles: latency,
        latency_avg_cycles: latency,
        latency_worst_cycles: model.latency_worst_factor * latency,
        clock_estimate_ns: model.clock_base_ns
            + model.clock_per_log2_unroll_ns * (max_unroll as f64).log2(),
        lut,
        ff,
        dsp,
        bram,
        uram: 0,
    })
}

/// Renders a Vitis-HLS-shaped `csynth.xml`.
pub fn render_csynth_xml(est: &HlsEstimate, manifest: &MockManifest, model: &CostModel) -> String {
    format!(
        r#"<?xml version="1.0" encoding="UTF-8"?>
<profile>
  <ReportVersion>
    <Version>{version}</Version>
  </ReportVersion>
  <UserAssignments>
    <TopModelName>{top}</TopModelName>
    <TargetClockPeriod>{target}</TargetClockPeriod>
  </UserAssignments>
  <PerformanceEstimates>
    <SummaryOfTimingAnalysis>
      <unit>ns</unit>
      <EstimatedClockPeriod>{clock}</EstimatedClockPeriod>
    </SummaryOfTimingAnalysis>
    <SummaryOfOverallLatency>
      <unit>clock cycles</unit>
      <Best-caseLatency>{best}</Best-caseLatency>
      <Average-caseLatency>{avg}</Average-caseLatency>
      <Worst-caseLatency>{worst}</Worst-caseLatency>
    </SummaryOfOverallLatency>
  </PerformanceEstimates>
  <AreaEstimates>
    <Resources>
      <BRAM_18K>{bram}</BRAM_18K>
      <DSP>{dsp}</DSP>
      <FF>{ff}</FF>
      <LUT>{lut}</LUT>
      <URAM>{uram}</URAM>
    </Resources>
  </AreaEstimates>
</profile>
"#,
        version = model.version,
        top = manifest.top,
        target = manifest.clock_target_ns,
        clock = est.clock_estimate_ns,
        best = est.latency_best_cycles,
        avg = est.latency_avg_cycles,
        worst = est.latency_worst_cycles,
        bram = est.bram,
        dsp = est.dsp,
        ff = est.ff,
        lut = est.lut,
        uram = est.uram,
    )
}

/// Runs the mock synthesis cost model and writes `csynth.xml`.
pub fn mock_hls_synth(design: &ConcreteDesign, model: &CostModel) -> Result<HlsEstimate, MockError> {
    let manifest = load_manifest(&design.dir)?;
    let effects = read_directive_effects(design)?;
    let est = compute_hls_estimate(&manifest, &effects, model)?;
    let report = design.dir.join(CSYNTH_REPORT_PATH);
    ensure_dir(report.parent().expect("report path has a parent"))?;
    fs::write(&report, render_csynth_xml(&est, &manifest, model))?;
    Ok(est)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImplEstimate {
    pub wns_ns: f64,
    pub whs_ns: f64,
    pub lut: u64,
    pub ff: u64,
    pub dsp: u64,
    pub bram: u64,
    pub total_power_w: f64,
}

/// Implementation results derived from the HLS estimate.
pub fn compute_impl_estimate(
    hls: &HlsSynthMetrics,
    clock_target_ns: f64,
    model: &CostModel,
) -> ImplEstimate {
    let lut = hls.lut.unwrap_or(0);
    let dsp = hls.dsp.unwrap_or(0);
    let scale = |v: Option<u64>| (model.impl_resource_scale * v.unwrap_or(0) as f64).round() as u64;
    let clock = hls.clock_estimate_ns.unwrap_or(clock_target_ns);
    ImplEstimate {
        wns_ns: clock_target_ns - clock - model.wns_lut_coeff * (1.0 + lut as f64 / 1000.0).log2(),
        whs_ns: model.whs_ns,
        lut: scale(hls.lut),
        ff: scale(hls.ff),
        dsp: scale(hls.dsp),
        bram: scale(hls.bram),
        total_power_w: model.power_static_w
            + lut as f64 * model.power_per_lut_w
            + dsp as f64 * model.power_per_dsp_w,
    }
}

/// Runs the mock implementation step and writes `impl_report.json`.
pub fn mock_impl(design: &ConcreteDesign, model: &CostModel) -> Result<(HlsSynthMetrics, ImplEstimate), MockError> {
    let report_path = design.dir.join(CSYNTH_REPORT_PATH);
    let xml = fs::read_to_string(&report_path)
        .map_err(|_| MockError::SynthReportMissing(CSYNTH_REPORT_PATH.to_string()))?;
    let hls = parse_vitis_csynth_report(&xml)
        .map_err(|e| MockError::SynthReportMissing(e.to_string()))?;
    let clock_target = load_manifest(&design.dir)
        .map(|m| m.clock_target_ns)
        .unwrap_or_else(|_| default_clock_target());
    let est = compute_impl_estimate(&hls, clock_target, model);
    let mut text = serde_json::to_string_pretty(&est).expect("estimate serializes");
    text.push('\n');
    fs::write(design.dir.join(IMPL_REPORT_PATH), text)?;
    Ok((hls, est))
}

fn log_error(log: &mut File, err: &MockError) -> Invocation {
    let _ = writeln!(log, "error: {err}");
    Invocation::status(FlowStatus::Failed)
}

/// Mock HLS synthesis as a [`ToolFlow`].
#[derive(Debug, Clone)]
pub struct MockHlsSynthFlow {
    pub spec: ToolFlowSpec,
    pub model: CostModel,
    /// Wall-clock seconds each invocation sleeps, to emulate tool runtime.
    pub delay_s: f64,
}

impl MockHlsSynthFlow {
    pub fn new(spec: ToolFlowSpec, model: CostModel) -> Self {
        Self {
            spec,
            model,
            delay_s: 0.0,
        }
    }

    pub fn with_delay(mut self, delay_s: f64) -> Self {
        self.delay_s = delay_s;
        self
    }
}

impl ToolFlow for MockHlsSynthFlow {
    fn spec(&self) -> &ToolFlowSpec {
        &self.spec
    }

    fn tool_version(&self) -> String {
        self.model.version.clone()
    }

    fn invoke(&self, design: &ConcreteDesign, log: &mut File, timeout: Duration) -> Invocation {
        if !simulated_delay(self.delay_s, timeout) {
            return Invocation::status(FlowStatus::Timeout);
        }
        match mock_hls_synth(design, &self.model) {
            Ok(est) => {
                let _ = writeln!(
                    log,
                    "latency={} lut={} ff={} dsp={} bram={} clock={}",
                    est.latency_avg_cycles, est.lut, est.ff, est.dsp, est.bram, est.clock_estimate_ns
                );
                Invocation {
                    status: FlowStatus::Ok,
                    tool_runtime_s: Some(
                        self.model.synth_runtime_base_s + self.model.runtime_per_lut_s * est.lut as f64,
                    ),
                }
            }
            Err(e) => log_error(log, &e),
        }
    }
}

/// Mock place-and-route as a [`ToolFlow`].
#[derive(Debug, Clone)]
pub struct MockImplFlow {
    pub spec: ToolFlowSpec,
    pub model: CostModel,
    pub delay_s: f64,
}

impl MockImplFlow {
    pub fn new(spec: ToolFlowSpec, model: CostModel) -> Self {
        Self {
            spec,
            model,
            delay_s: 0.0,
        }
    }

    pub fn with_delay(mut self, delay_s: f64) -> Self {
        self.delay_s = delay_s;
        self
    }
}

impl ToolFlow for MockImplFlow {
    fn spec(&self) -> &ToolFlowSpec {
        &self.spec
    }

    fn tool_version(&self) -> String {
        self.model.version.clone()
    }

    fn invoke(&self, design: &ConcreteDesign, log: &mut File, timeout: Duration) -> Invocation {
        if !simulated_delay(self.delay_s, timeout) {
            return Invocation::status(FlowStatus::Timeout);
        }
        match mock_impl(design, &self.model) {
            Ok((hls, est)) => {
                let _ = writeln!(log, "wns={} power={}", est.wns_ns, est.total_power_w);
                Invocation {
                    status: FlowStatus::Ok,
                    tool_runtime_s: Some(
                        self.model.impl_runtime_base_s
                            + 4.0 * self.model.runtime_per_lut_s * hls.lut.unwrap_or(0) as f64,
                    ),
                }
            }
            Err(e) => log_error(log, &e),
        }
    }
}
