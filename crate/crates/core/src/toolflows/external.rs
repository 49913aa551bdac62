// SPDX-License-Identifier: Apache-2.0

//! External vendor-tool adapters.
//!
//! Tools are treated as opaque commands run inside the design directory.
//! On Unix each child gets its own process group so a timeout kills the
//! whole tree the tool spawned, not just the top-level process.

use std::env;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::OnceLock;
use std::time::Duration;

use wait_timeout::ChildExt;

use super::{FlowError, FlowStatus, Invocation, ToolFlow, ToolFlowSpec};
use crate::design::ConcreteDesign;
use crate::frontends::source_files;

/// Looks `program` up on PATH. Paths containing a separator are checked as is.
pub fn find_executable(program: &str) -> Option<PathBuf> {
    let is_exec = |p: &Path| {
        #[cfg(unix)]
        {
            use std::os::unix::fs::PermissionsExt;
            p.metadata()
                .map(|m| m.is_file() && m.permissions().mode() & 0o111 != 0)
                .unwrap_or(false)
        }
        #[cfg(not(unix))]
        {
            p.is_file()
        }
    };
    if program.contains(std::path::MAIN_SEPARATOR) {
        let p = PathBuf::from(program);
        return is_exec(&p).then_some(p);
    }
    env::split_paths(&env::var_os("PATH")?)
        .map(|dir| dir.join(program))
        .find(|p| is_exec(p))
}

/// Preset commands for the supported vendor tools.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VendorTool {
    VitisHlsSynth,
    VitisHlsImpl,
    IntelHlsSynth,
    IntelQuartusImpl,
}

impl VendorTool {
    pub fn default_spec(self) -> ToolFlowSpec {
        let (name, files, argv): (&str, &[&str], &[&str]) = match self {
            VendorTool::VitisHlsSynth => (
                "vitis_hls_synth",
                &["dataset_hls.tcl"],
                &["vitis_hls", "-f", "dataset_hls.tcl"],
            ),
            VendorTool::VitisHlsImpl => (
                "vitis_hls_impl",
                &["dataset_hls_ip_export.tcl"],
                &["vitis_hls", "-f", "dataset_hls_ip_export.tcl"],
            ),
            VendorTool::IntelHlsSynth => (
                "intel_hls_synth",
                &[],
                &["i++", "-march=Agilex", "--simulator", "none", "-o", "hls_prj", "{sources}"],
            ),
            VendorTool::IntelQuartusImpl => (
                "intel_quartus_impl",
                &[],
                &["quartus_sh", "--flow", "compile", "hls_prj.prj/quartus/quartus_compile"],
            ),
        };
        let mut spec = ToolFlowSpec::new(name, 3600.0);
        spec.required_files = files.iter().map(|s| s.to_string()).collect();
        spec.command_template = argv.iter().map(|s| s.to_string()).collect();
        spec
    }

    fn version_flag(self) -> &'static str {
        match self {
            VendorTool::VitisHlsSynth | VendorTool::VitisHlsImpl => "-version",
            _ => "--version",
        }
    }
}

/// A flow that runs an external command.
#[derive(Debug)]
pub struct ExternalFlow {
    spec: ToolFlowSpec,
    program: PathBuf,
    version_args: Vec<String>,
    version: OnceLock<String>,
}

impl ExternalFlow {
    /// Fails with [`FlowError::ExecutableNotFound`] when the program named by
    /// the first token of the command template is not on PATH.
    pub fn new(spec: ToolFlowSpec) -> Result<Self, FlowError> {
        spec.validate()?;
        let program = spec.command_template.first().ok_or_else(|| FlowError::InvalidSpec {
            name: spec.name.clone(),
            message: "command_template is empty".into(),
        })?;
        let resolved =
            find_executable(program).ok_or_else(|| FlowError::ExecutableNotFound(program.clone()))?;
        Ok(Self {
            spec,
            program: resolved,
            version_args: vec!["--version".into()],
            version: OnceLock::new(),
        })
    }

    pub fn vendor(tool: VendorTool) -> Result<Self, FlowError> {
        Self::with_spec(tool, tool.default_spec())
    }

    /// A vendor adapter with overridden defaults.
    pub fn with_spec(tool: VendorTool, spec: ToolFlowSpec) -> Result<Self, FlowError> {
        let mut flow = Self::new(spec)?;
        flow.version_args = vec![tool.version_flag().into()];
        Ok(flow)
    }

    pub fn program(&self) -> &Path {
        &self.program
    }

    fn argv(&self, design: &ConcreteDesign) -> Vec<String> {
        let sources = source_files(&design.dir)
            .map(|files| {
                files
                    .iter()
                    .map(|f| f.to_string_lossy().into_owned())
                    .collect::<Vec<_>>()
            })
            .unwrap_or_default();
        let dir = design.dir.to_string_lossy();
        let mut argv = Vec::new();
        for tok in &self.spec.command_template[1..] {
            if tok == "{sources}" {
                argv.extend(sources.iter().cloned());
            } else {
                argv.push(tok.replace("{design_dir}", &dir).replace("{design_id}", &design.id));
            }
        }
        argv
    }
}

fn new_process_group(cmd: &mut Command) {
    #[cfg(unix)]
    {
        use std::os::unix::process::CommandExt;
        cmd.process_group(0);
    }
    #[cfg(not(unix))]
    let _ = cmd;
}

fn kill_tree(child: &mut std::process::Child) {
    #[cfg(unix)]
    // SAFETY: signals the process group created for this child; no memory is shared.
    unsafe {
        libc::kill(-(child.id() as libc::pid_t), libc::SIGKILL);
    }
    let _ = child.kill();
}

impl ToolFlow for ExternalFlow {
    fn spec(&self) -> &ToolFlowSpec {
        &self.spec
    }

    fn tool_version(&self) -> String {
        self.version
            .get_or_init(|| {
                Command::new(&self.program)
                    .args(&self.version_args)
                    .stdin(Stdio::null())
                    .stderr(Stdio::null())
                    .output()
                    .ok()
                    .filter(|o| o.status.success())
                    .and_then(|o| {
                        String::from_utf8_lossy(&o.stdout)
                            .lines()
                            .map(str::trim)
                            .find(|l| !l.is_empty())
                            .map(str::to_string)
                    })
                    .unwrap_or_else(|| "unknown".into())
            })
            .clone()
    }

    fn invoke(&self, design: &ConcreteDesign, log: &mut File, timeout: Duration) -> Invocation {
        let (stdout, stderr) = match (log.try_clone(), log.try_clone()) {
            (Ok(a), Ok(b)) => (a, b),
            _ => return Invocation::status(FlowStatus::Failed),
        };
        let mut cmd = Command::new(&self.program);
        cmd.args(self.argv(design))
            .current_dir(&design.dir)
            .stdin(Stdio::null())
            .stdout(stdout)
            .stderr(stderr);
        for (k, v) in &self.spec.environment {
            cmd.env(k, v);
        }
        new_process_group(&mut cmd);
        let mut child = match cmd.spawn() {
            Ok(c) => c,
            Err(e) => {
                let _ = writeln!(log, "spawn failed: {e}");
                return Invocation::status(FlowStatus::Failed);
            }
        };
        match child.wait_timeout(timeout) {
            Ok(Some(status)) if status.success() => Invocation::status(FlowStatus::Ok),
            Ok(Some(status)) => {
                let _ = writeln!(log, "# exited with {status}");
                Invocation::status(FlowStatus::Failed)
            }
            Ok(None) => {
                kill_tree(&mut child);
                let _ = child.wait();
                let _ = writeln!(log, "# killed after {:.1}s timeout", timeout.as_secs_f64());
                Invocation::status(FlowStatus::Timeout)
            }
            Err(e) => {
                kill_tree(&mut child);
                let _ = child.wait();
                let _ = writeln!(log, "# wait failed: {e}");
                Invocation::status(FlowStatus::Failed)
            }
        }
    }
}
