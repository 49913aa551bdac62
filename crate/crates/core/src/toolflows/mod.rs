// SPDX-License-Identifier: Apache-2.0

//! Tool flows: the synthesis/implementation steps run on each concrete design.
//!
//! A flow never fails because the tool failed. Missing inputs, non-zero exits
//! and timeouts are all reported through [`FlowStatus`] so that large batch
//! runs carry on past bad design points. Only setup problems (an unwritable
//! design directory, say) surface as [`FlowError`].

use std::fmt;
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::design::{missing_files, ConcreteDesign};

mod external;
mod mock;

pub use external::{find_executable, ExternalFlow, VendorTool};
pub use mock::{
    compute_hls_estimate, compute_impl_estimate, load_manifest, mock_hls_synth, mock_impl,
    read_directive_effects, ArrayInfo, CostModel, DirectiveEffects, HlsEstimate, ImplEstimate,
    LoopInfo, MockError, MockHlsSynthFlow, MockImplFlow, MockManifest, CSYNTH_REPORT_PATH,
    IMPL_REPORT_PATH, MANIFEST_FILE,
};

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("executable `{0}` not found on PATH")]
    ExecutableNotFound(String),
    #[error("invalid flow spec `{name}`: {message}")]
    InvalidSpec { name: String, message: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowStatus {
    Ok,
    Failed,
    Timeout,
    SkippedMissingFiles,
}

impl FlowStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            FlowStatus::Ok => "ok",
            FlowStatus::Failed => "failed",
            FlowStatus::Timeout => "timeout",
            FlowStatus::SkippedMissingFiles => "skipped_missing_files",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            FlowStatus::Ok,
            FlowStatus::Failed,
            FlowStatus::Timeout,
            FlowStatus::SkippedMissingFiles,
        ]
        .into_iter()
        .find(|st| st.as_str() == s)
    }
}

impl fmt::Display for FlowStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Static description of a flow step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolFlowSpec {
    pub name: String,
    #[serde(default)]
    pub required_files: Vec<String>,
    pub timeout_s: f64,
    #[serde(default)]
    pub environment: Vec<(String, String)>,
    /// argv for external flows; `{design_dir}`, `{design_id}` and `{sources}`
    /// are substituted per design.
    #[serde(default)]
    pub command_template: Vec<String>,
}

impl ToolFlowSpec {
    pub fn new(name: impl Into<String>, timeout_s: f64) -> Self {
        Self {
            name: name.into(),
            required_files: Vec::new(),
            timeout_s,
            environment: Vec::new(),
            command_template: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), FlowError> {
        if !(self.timeout_s > 0.0 && self.timeout_s.is_finite()) {
            return Err(FlowError::InvalidSpec {
                name: self.name.clone(),
                message: format!("timeout_s must be positive, got {}", self.timeout_s),
            });
        }
        if !crate::design::is_valid_name(&self.name) {
            return Err(FlowError::InvalidSpec {
                name: self.name.clone(),
                message: "flow names must match [A-Za-z0-9_]+".into(),
            });
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_s)
    }
}

/// What a flow body reports back to [`run_flow`].
#[derive(Debug, Clone, PartialEq)]
pub struct Invocation {
    pub status: FlowStatus,
    /// Tool-reported runtime, when the tool provides one. Mock flows report
    /// a modeled runtime so that their metadata is reproducible.
    pub tool_runtime_s: Option<f64>,
}

impl Invocation {
    pub fn status(status: FlowStatus) -> Self {
        Self {
            status,
            tool_runtime_s: None,
        }
    }
}

/// Result of running one flow on one design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowOutcome {
    pub design_id: String,
    pub flow_name: String,
    pub status: FlowStatus,
    /// Wall-clock seconds.
    pub runtime_s: f64,
    pub tool_runtime_s: Option<f64>,
    pub tool_version: String,
    pub log_path: PathBuf,
}

impl FlowOutcome {
    /// Tool-reported runtime when present, wall clock otherwise.
    pub fn reported_runtime_s(&self) -> f64 {
        self.tool_runtime_s.unwrap_or(self.runtime_s)
    }
}

/// A synthesis or implementation step.
pub trait ToolFlow: Send + Sync {
    fn spec(&self) -> &ToolFlowSpec;

    /// Version string recorded in execution metadata.
    fn tool_version(&self) -> String;

    /// Runs the flow body inside the design directory. Tool output goes to `log`.
    fn invoke(&self, design: &ConcreteDesign, log: &mut File, timeout: Duration) -> Invocation;

    fn name(&self) -> &str {
        &self.spec().name
    }

    fn execute(&self, design: &ConcreteDesign) -> Result<FlowOutcome, FlowError> {
        run_flow(self, design)
    }
}

pub fn log_path(design_dir: &Path, flow_name: &str) -> PathBuf {
    design_dir.join(format!("{flow_name}.log"))
}

/// Runs `flow` on `design`: checks required files, invokes the body under the
/// flow's timeout, and writes a log beside the design.
pub fn run_flow<F: ToolFlow + ?Sized>(
    flow: &F,
    design: &ConcreteDesign,
) -> Result<FlowOutcome, FlowError> {
    let spec = flow.spec();
    let log_path = log_path(&design.dir, &spec.name);
    let io = |source| FlowError::Io {
        path: log_path.clone(),
        source,
    };
    let mut log = File::create(&log_path).map_err(io)?;
    writeln!(log, "# flow {} on {}", spec.name, design.id).map_err(io)?;

    let start = Instant::now();
    let missing = missing_files(&design.dir, &spec.required_files);
    let invocation = if missing.is_empty() {
        flow.invoke(design, &mut log, spec.timeout())
    } else {
        writeln!(log, "skipped: missing required files: {}", missing.join(", ")).map_err(io)?;
        Invocation::status(FlowStatus::SkippedMissingFiles)
    };
    let runtime_s = start.elapsed().as_secs_f64();
    writeln!(log, "# status {} after {runtime_s:.3}s", invocation.status).map_err(io)?;

    Ok(FlowOutcome {
        design_id: design.id.clone(),
        flow_name: spec.name.clone(),
        status: invocation.status,
        runtime_s,
        tool_runtime_s: invocation.tool_runtime_s,
        tool_version: flow.tool_version(),
        log_path,
    })
}

/// Sleeps for `delay_s`, capped at `timeout`. Returns false if the delay did
/// not fit in the timeout.
pub(crate) fn simulated_delay(delay_s: f64, timeout: Duration) -> bool {
    if delay_s <= 0.0 {
        return true;
    }
    let delay = Duration::from_secs_f64(delay_s);
    if delay > timeout {
        std::thread::sleep(timeout);
        false
    } else {
        std::thread::sleep(delay);
        true
    }
}

pub(crate) fn ensure_dir(path: &Path) -> std::io::Result<()> {
    fs::create_dir_all(path)
}
