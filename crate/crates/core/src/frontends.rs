// SPDX-License-Identifier: Apache-2.0

//! Frontends: lower abstract designs into vendor-specific concrete designs.
//!
//! The Xilinx frontend renders `opt.tcl` next to a copy of the sources. The
//! Intel frontend has no directive file, so annotations are injected into the
//! sources at anchor comments of the form `// HLSFORGE_LABEL: <label>` placed
//! on the line before each annotatable loop or array declaration.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::design::{
    concrete_design_id, io_err, list_files, AbstractDesign, ConcreteDesign, DatasetCollection,
    Design, DesignDataset, DesignError, DesignRecord, Vendor, WorkspaceLayout,
};
use crate::optdsl::{
    enumerate_design_space, parse_opt_template, render_assignment, DesignSpace,
    DirectiveAssignment, DirectiveLine, OptDslError, OptTemplate, RENDERED_FILE, TEMPLATE_FILE,
};
use crate::toolflows::{load_manifest, ArrayInfo, MockManifest, MANIFEST_FILE};

pub const ANCHOR_PREFIX: &str = "// HLSFORGE_LABEL:";
pub const INTEL_ANNOTATIONS_FILE: &str = "intel_annotations.json";

const SOURCE_EXTENSIONS: &[&str] = &["c", "cc", "cpp", "cxx", "h", "hh", "hpp"];
const SHUFFLE_LIMIT: u128 = 1 << 20;

#[derive(Debug, Error)]
pub enum FrontendError {
    #[error("design `{0}` has no {TEMPLATE_FILE}")]
    MissingTemplate(String),
    #[error("no anchor for label `{label}` in design `{design}`")]
    AnchorNotFound { design: String, label: String },
    #[error("directive `{0}` has no Intel equivalent")]
    UnsupportedDirective(String),
    #[error("array `{0}` is not described in {MANIFEST_FILE}")]
    UnknownArray(String),
    #[error("invalid frontend config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    OptDsl(#[from] OptDslError),
    #[error(transparent)]
    Design(#[from] DesignError),
}

pub type Result<T> = std::result::Result<T, FrontendError>;

fn default_n_samples() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrontendConfig {
    #[serde(default)]
    pub random_sample: bool,
    #[serde(default = "default_n_samples")]
    pub n_samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub vendor: Vendor,
}

impl Default for FrontendConfig {
    fn default() -> Self {
        Self {
            random_sample: false,
            n_samples: default_n_samples(),
            seed: 0,
            vendor: Vendor::Xilinx,
        }
    }
}

impl FrontendConfig {
    pub fn validate(&self) -> Result<()> {
        if self.random_sample && self.n_samples == 0 {
            return Err(FrontendError::InvalidConfig(
                "n_samples must be at least 1 when random_sample is set".into(),
            ));
        }
        Ok(())
    }
}

/// Draws `min(k, size)` distinct assignments uniformly without replacement.
///
/// With `k >= size` the whole space is returned in enumeration order;
/// otherwise the order is the draw order.
pub fn sample_assignments(space: &DesignSpace, k: usize, seed: u64) -> Vec<DirectiveAssignment> {
    let size = space.size();
    if k as u128 >= size {
        return space.iter().collect();
    }
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    let indices: Vec<u128> = if size <= SHUFFLE_LIMIT {
        let n = size as usize;
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = rng.random_range(i..n);
            pool.swap(i, j);
        }
        pool[..k].iter().map(|&i| i as u128).collect()
    } else {
        let mut seen = HashSet::with_capacity(k);
        let mut out = Vec::with_capacity(k);
        while out.len() < k {
            let i = rng.random_range(0..size);
            if seen.insert(i) {
                out.push(i);
            }
        }
        out
    };
    indices
        .into_iter()
        .map(|i| space.assignment_at(i).expect("index below space size"))
        .collect()
}

/// Label named by an anchor comment, if `line` is one.
pub fn parse_anchor(line: &str) -> Option<&str> {
    let label = line.trim().strip_prefix(ANCHOR_PREFIX)?.trim();
    (!label.is_empty()).then_some(label)
}

/// C/C++ source files of a design directory, relative and sorted.
pub fn source_files(dir: &Path) -> io::Result<Vec<PathBuf>> {
    let files = list_files(dir).map_err(|e| io::Error::other(e.to_string()))?;
    Ok(files
        .into_iter()
        .filter(|f| {
            f.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| SOURCE_EXTENSIONS.contains(&e))
        })
        .collect())
}

fn fresh_dir(dir: &Path) -> Result<()> {
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    Ok(())
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, contents).map_err(io_err(path))?;
    Ok(())
}

fn copy_file(from: &Path, to: &Path) -> Result<()> {
    if let Some(parent) = to.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::copy(from, to).map_err(io_err(from))?;
    Ok(())
}

fn read_template(design: &AbstractDesign) -> Result<OptTemplate> {
    if !design.is_frontend_ready() {
        return Err(FrontendError::MissingTemplate(design.name.clone()));
    }
    let path = design.source_dir.join(TEMPLATE_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    Ok(parse_opt_template(&text)?)
}

/// Lowers one assignment into `<work_dir>/<dataset>__post_frontend/<id>/`
/// with a rendered `opt.tcl`.
pub fn lower_xilinx(
    design: &AbstractDesign,
    assignment: &DirectiveAssignment,
    ws: &WorkspaceLayout,
) -> Result<ConcreteDesign> {
    let template = read_template(design)?;
    lower_xilinx_with(design, &template, assignment, ws)
}

fn lower_xilinx_with(
    design: &AbstractDesign,
    template: &OptTemplate,
    assignment: &DirectiveAssignment,
    ws: &WorkspaceLayout,
) -> Result<ConcreteDesign> {
    let rendered = render_assignment(template, assignment)?;
    let id = concrete_design_id(&design.name, assignment);
    let dir = ws.concrete_dir(&design.dataset_name, &id);
    fresh_dir(&dir)?;
    for file in design.files.iter().filter(|f| *f != Path::new(TEMPLATE_FILE)) {
        copy_file(&design.source_dir.join(file), &dir.join(file))?;
    }
    write_file(&dir.join(RENDERED_FILE), rendered)?;
    finish(design, id, assignment.clone(), dir, Vendor::Xilinx)
}

fn finish(
    design: &AbstractDesign,
    id: String,
    assignment: DirectiveAssignment,
    dir: PathBuf,
    vendor: Vendor,
) -> Result<ConcreteDesign> {
    let concrete = ConcreteDesign {
        id,
        base_name: design.name.clone(),
        assignment,
        dir,
        vendor,
    };
    DesignRecord::from_design(&concrete).write(&concrete.dir)?;
    Ok(concrete)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    BeforeLoop,
    OnDeclaration,
}

/// Source text injected for the Intel flow.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntelAnnotation {
    pub label: String,
    pub text: String,
    pub placement: Placement,
    /// The directive this annotation was derived from, as `directive=choice`.
    pub provenance: String,
}

/// A directive with no emitted annotation because i++ already behaves that way.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntelSubstitution {
    pub label: String,
    pub directive: String,
    pub note: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntelAnnotationRecord {
    pub annotations: Vec<IntelAnnotation>,
    pub substitutions: Vec<IntelSubstitution>,
}

fn partition_factor(choice: &str, array: &ArrayInfo) -> Option<u64> {
    let mut parts = choice.split('-');
    let first = parts.next()?;
    match (first, parts.next()) {
        ("complete", None) => Some(array.depth),
        (_, Some(f)) => f.parse().ok(),
        (f, None) => f.parse().ok(),
    }
    .filter(|f| *f >= 1)
}

/// Maps one selected directive line to i++ source annotations.
///
/// A fixed `pipeline` produces nothing: i++ pipelines loops by default.
/// Array partitioning needs the element width, taken from the manifest entry
/// for the array.
pub fn map_directive_to_intel(
    line: &DirectiveLine,
    choice: &str,
    array: Option<&ArrayInfo>,
) -> Result<Vec<IntelAnnotation>> {
    match line.fixed_directive.as_deref() {
        None | Some("pipeline") => {}
        Some(other) => return Err(FrontendError::UnsupportedDirective(other.to_string())),
    }
    let provenance = format!("{}={choice}", line.param_kind);
    let annotation = |text: String, placement| IntelAnnotation {
        label: line.label.clone(),
        text,
        placement,
        provenance: provenance.clone(),
    };
    match line.param_kind.as_str() {
        "unroll" => {
            let factor: u64 = choice
                .parse()
                .map_err(|_| FrontendError::UnsupportedDirective(provenance.clone()))?;
            Ok(vec![annotation(format!("#pragma unroll {factor}"), Placement::BeforeLoop)])
        }
        "array_partition" => {
            let array = array.ok_or_else(|| FrontendError::UnknownArray(line.label.clone()))?;
            let banks = partition_factor(choice, array)
                .ok_or_else(|| FrontendError::UnsupportedDirective(provenance.clone()))?;
            Ok(vec![
                annotation(format!("hls_numbanks({banks})"), Placement::OnDeclaration),
                annotation(format!("hls_bankwidth({})", array.elem_bytes), Placement::OnDeclaration),
            ])
        }
        other => Err(FrontendError::UnsupportedDirective(other.to_string())),
    }
}

/// Inserts annotation lines after each matching anchor. Every other line is
/// copied unchanged.
fn inject(text: &str, by_label: &BTreeMap<&str, Vec<&IntelAnnotation>>, found: &mut BTreeSet<String>) -> String {
    let mut out = String::with_capacity(text.len());
    for line in text.split_inclusive('\n') {
        out.push_str(line);
        let Some(label) = parse_anchor(line) else {
            continue;
        };
        found.insert(label.to_string());
        let Some(annotations) = by_label.get(label) else {
            continue;
        };
        if !line.ends_with('\n') {
            out.push('\n');
        }
        let indent: String = line.chars().take_while(|c| c.is_whitespace()).collect();
        let pragmas = annotations.iter().filter(|a| a.placement == Placement::BeforeLoop);
        for a in pragmas {
            out.push_str(&format!("{indent}{}\n", a.text));
        }
        let attrs: Vec<&str> = annotations
            .iter()
            .filter(|a| a.placement == Placement::OnDeclaration)
            .map(|a| a.text.as_str())
            .collect();
        if !attrs.is_empty() {
            out.push_str(&format!("{indent}{}\n", attrs.join(" ")));
        }
    }
    out
}

/// Lowers one assignment for the Intel flow by injecting annotations into
/// copies of the sources.
pub fn lower_intel(
    design: &AbstractDesign,
    assignment: &DirectiveAssignment,
    ws: &WorkspaceLayout,
) -> Result<ConcreteDesign> {
    let template = read_template(design)?;
    lower_intel_with(design, &template, assignment, ws)
}

fn lower_intel_with(
    design: &AbstractDesign,
    template: &OptTemplate,
    assignment: &DirectiveAssignment,
    ws: &WorkspaceLayout,
) -> Result<ConcreteDesign> {
    let manifest: Option<MockManifest> = load_manifest(&design.source_dir).ok();
    let mut record = IntelAnnotationRecord::default();
    for sel in assignment.selections() {
        let line = template
            .group(&sel.group)
            .and_then(|g| g.line(sel.line_index))
            .ok_or_else(|| {
                OptDslError::InvalidAssignment(format!("{}/{} not in template", sel.group, sel.label))
            })?;
        let array = manifest.as_ref().and_then(|m| m.array_info(&line.label));
        record
            .annotations
            .extend(map_directive_to_intel(line, &sel.choice, array)?);
        if line.fixed_directive.as_deref() == Some("pipeline") {
            record.substitutions.push(IntelSubstitution {
                label: line.label.clone(),
                directive: "pipeline".into(),
                note: "default-pipelined".into(),
            });
        }
    }
    let mut by_label: BTreeMap<&str, Vec<&IntelAnnotation>> = BTreeMap::new();
    for a in &record.annotations {
        by_label.entry(a.label.as_str()).or_default().push(a);
    }

    let sources: BTreeSet<PathBuf> = source_files(&design.source_dir)
        .map_err(io_err(&design.source_dir))?
        .into_iter()
        .collect();
    let id = concrete_design_id(&design.name, assignment);
    let dir = ws.concrete_dir(&design.dataset_name, &id);
    fresh_dir(&dir)?;
    let mut found = BTreeSet::new();
    for file in design.files.iter().filter(|f| *f != Path::new(TEMPLATE_FILE)) {
        let from = design.source_dir.join(file);
        if sources.contains(file) {
            let text = fs::read_to_string(&from).map_err(io_err(&from))?;
            write_file(&dir.join(file), inject(&text, &by_label, &mut found))?;
        } else {
            copy_file(&from, &dir.join(file))?;
        }
    }
    for sel in assignment.selections() {
        if !found.contains(&sel.label) {
            return Err(FrontendError::AnchorNotFound {
                design: design.name.clone(),
                label: sel.label.clone(),
            });
        }
    }
    let mut text = serde_json::to_string_pretty(&record).expect("annotations serialize");
    text.push('\n');
    write_file(&dir.join(INTEL_ANNOTATIONS_FILE), text)?;
    finish(design, id, assignment.clone(), dir, Vendor::Intel)
}

/// Copies a design that has no template; it is already concrete.
fn pass_through(design: &AbstractDesign, vendor: Vendor, ws: &WorkspaceLayout) -> Result<ConcreteDesign> {
    let dir = ws.concrete_dir(&design.dataset_name, &design.name);
    fresh_dir(&dir)?;
    for file in &design.files {
        copy_file(&design.source_dir.join(file), &dir.join(file))?;
    }
    finish(design, design.name.clone(), DirectiveAssignment::empty(), dir, vendor)
}

/// Per-design summary of a frontend run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DesignExpansion {
    pub dataset: String,
    pub design: String,
    /// `None` for pass-through designs.
    pub space_size: Option<u128>,
    pub sampled: usize,
    pub lowered: usize,
    pub errors: Vec<String>,
}

impl DesignExpansion {
    pub fn failed(&self) -> bool {
        self.lowered == 0 || !self.errors.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FrontendReport {
    pub designs: Vec<DesignExpansion>,
}

impl FrontendReport {
    pub fn any_failed(&self) -> bool {
        self.designs.iter().any(DesignExpansion::failed)
    }

    pub fn concrete_count(&self) -> usize {
        self.designs.iter().map(|d| d.lowered).sum()
    }
}

fn expand_design(
    design: &AbstractDesign,
    cfg: &FrontendConfig,
    ws: &WorkspaceLayout,
    out: &mut Vec<Design>,
) -> DesignExpansion {
    let mut summary = DesignExpansion {
        dataset: design.dataset_name.clone(),
        design: design.name.clone(),
        space_size: None,
        sampled: 0,
        lowered: 0,
        errors: Vec::new(),
    };
    if !design.is_frontend_ready() {
        summary.sampled = 1;
        match pass_through(design, cfg.vendor, ws) {
            Ok(c) => {
                summary.lowered = 1;
                out.push(Design::Concrete(c));
            }
            Err(e) => summary.errors.push(e.to_string()),
        }
        return summary;
    }
    let template = match read_template(design) {
        Ok(t) => t,
        Err(e) => {
            summary.errors.push(e.to_string());
            return summary;
        }
    };
    let space = enumerate_design_space(&template);
    summary.space_size = Some(space.size());
    let assignments = if cfg.random_sample {
        sample_assignments(&space, cfg.n_samples, cfg.seed)
    } else {
        space.iter().collect()
    };
    summary.sampled = assignments.len();
    for a in &assignments {
        let lowered = match cfg.vendor {
            Vendor::Xilinx => lower_xilinx_with(design, &template, a, ws),
            Vendor::Intel => lower_intel_with(design, &template, a, ws),
        };
        match lowered {
            Ok(c) => {
                summary.lowered += 1;
                out.push(Design::Concrete(c));
            }
            Err(e) => summary.errors.push(format!("{}: {e}", a.summary())),
        }
    }
    summary
}

/// Expands every design of every dataset. Per-design failures are collected
/// in the report; only setup errors abort the run.
pub fn execute_frontend(
    collection: &DatasetCollection,
    cfg: &FrontendConfig,
    ws: &WorkspaceLayout,
) -> Result<(DatasetCollection, FrontendReport)> {
    cfg.validate()?;
    let mut result = DatasetCollection::new();
    let mut report = FrontendReport::default();
    for dataset in collection.datasets() {
        fresh_dir(&ws.post_frontend_dir(&dataset.name))?;
        let mut designs = Vec::new();
        for design in dataset.designs() {
            match design {
                Design::Abstract(d) => report.designs.push(expand_design(d, cfg, ws, &mut designs)),
                Design::Concrete(c) => designs.push(Design::Concrete(c.clone())),
            }
        }
        designs.sort_by(|a, b| a.name().cmp(b.name()));
        result.insert(DesignDataset::new(dataset.name.clone(), designs)?)?;
    }
    Ok((result, report))
}
