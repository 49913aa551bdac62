// SPDX-License-Identifier: Apache-2.0

//! Designs, datasets and the on-disk workspace layout.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::optdsl::{DirectiveAssignment, Selection, SelectionRecord, TEMPLATE_FILE};

/// Suffix of dataset directories produced by a frontend.
pub const POST_FRONTEND_SUFFIX: &str = "__post_frontend";
/// Per-design identity record written by the frontends.
pub const DESIGN_RECORD_FILE: &str = "data_design.json";

#[derive(Debug, Error)]
pub enum DesignError {
    #[error("directory not found: {0}")]
    MissingDirectory(PathBuf),
    #[error("dataset directory {0} contains no designs")]
    EmptyDataset(PathBuf),
    #[error("design {0} contains no source files")]
    EmptyDesign(PathBuf),
    #[error("invalid identifier `{0}` (expected [A-Za-z0-9_]+)")]
    InvalidName(String),
    #[error("duplicate design `{design}` in dataset `{dataset}`")]
    DuplicateDesign { dataset: String, design: String },
    #[error("duplicate dataset `{0}`")]
    DuplicateDataset(String),
    #[error("malformed design record {path}: {message}")]
    MalformedRecord { path: PathBuf, message: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, DesignError>;

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DesignError + '_ {
    move |source| DesignError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn is_valid_name(name: &str) -> bool {
    !name.is_empty() && name.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_')
}

fn check_name(name: &str) -> Result<()> {
    if is_valid_name(name) {
        Ok(())
    } else {
        Err(DesignError::InvalidName(name.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Vendor {
    #[default]
    Xilinx,
    Intel,
}

impl Vendor {
    pub fn as_str(self) -> &'static str {
        match self {
            Vendor::Xilinx => "xilinx",
            Vendor::Intel => "intel",
        }
    }
}

impl fmt::Display for Vendor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Vendor {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "xilinx" => Ok(Vendor::Xilinx),
            "intel" => Ok(Vendor::Intel),
            other => Err(format!("unknown vendor `{other}`")),
        }
    }
}

/// A source design, possibly carrying an `opt_template.tcl`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbstractDesign {
    pub name: String,
    pub dataset_name: String,
    pub source_dir: PathBuf,
    /// Relative paths, sorted.
    pub files: Vec<PathBuf>,
}

impl AbstractDesign {
    /// Whether the OptDSL frontend can expand this design.
    pub fn is_frontend_ready(&self) -> bool {
        self.files.iter().any(|f| f == Path::new(TEMPLATE_FILE))
    }
}

/// One lowered design point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConcreteDesign {
    pub id: String,
    pub base_name: String,
    pub assignment: DirectiveAssignment,
    pub dir: PathBuf,
    pub vendor: Vendor,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Design {
    Abstract(AbstractDesign),
    Concrete(ConcreteDesign),
}

impl Design {
    pub fn name(&self) -> &str {
        match self {
            Design::Abstract(d) => &d.name,
            Design::Concrete(d) => &d.id,
        }
    }

    pub fn dir(&self) -> &Path {
        match self {
            Design::Abstract(d) => &d.source_dir,
            Design::Concrete(d) => &d.dir,
        }
    }

    pub fn as_concrete(&self) -> Option<&ConcreteDesign> {
        match self {
            Design::Concrete(d) => Some(d),
            Design::Abstract(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DesignDataset {
    pub name: String,
    designs: Vec<Design>,
}

impl DesignDataset {
    pub fn new(name: impl Into<String>, designs: Vec<Design>) -> Result<Self> {
        let name = name.into();
        for (i, d) in designs.iter().enumerate() {
            if designs[..i].iter().any(|o| o.name() == d.name()) {
                return Err(DesignError::DuplicateDesign {
                    dataset: name,
                    design: d.name().to_string(),
                });
            }
        }
        Ok(Self { name, designs })
    }

    pub fn designs(&self) -> &[Design] {
        &self.designs
    }

    pub fn len(&self) -> usize {
        self.designs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.designs.is_empty()
    }

    pub fn concrete(&self) -> impl Iterator<Item = &ConcreteDesign> {
        self.designs.iter().filter_map(Design::as_concrete)
    }
}

/// Datasets keyed by name, iterated in name order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DatasetCollection {
    datasets: BTreeMap<String, DesignDataset>,
}

impl DatasetCollection {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, dataset: DesignDataset) -> Result<()> {
        if self.datasets.contains_key(&dataset.name) {
            return Err(DesignError::DuplicateDataset(dataset.name));
        }
        self.datasets.insert(dataset.name.clone(), dataset);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&DesignDataset> {
        self.datasets.get(name)
    }

    pub fn datasets(&self) -> impl Iterator<Item = &DesignDataset> {
        self.datasets.values()
    }

    pub fn len(&self) -> usize {
        self.datasets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.datasets.is_empty()
    }

    pub fn design_count(&self) -> usize {
        self.datasets.values().map(DesignDataset::len).sum()
    }
}

/// Paths of everything generated under one work directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkspaceLayout {
    pub work_dir: PathBuf,
}

impl WorkspaceLayout {
    pub fn new(work_dir: impl Into<PathBuf>) -> Self {
        Self {
            work_dir: work_dir.into(),
        }
    }

    pub fn post_frontend_name(dataset: &str) -> String {
        format!("{dataset}{POST_FRONTEND_SUFFIX}")
    }

    pub fn post_frontend_dir(&self, dataset: &str) -> PathBuf {
        self.work_dir.join(Self::post_frontend_name(dataset))
    }

    pub fn concrete_dir(&self, dataset: &str, id: &str) -> PathBuf {
        self.post_frontend_dir(dataset).join(id)
    }

    pub fn timeline_path(&self) -> PathBuf {
        self.work_dir.join("timeline.json")
    }

    pub fn utilization_path(&self) -> PathBuf {
        self.work_dir.join("utilization.csv")
    }

    /// Post-frontend dataset directories present on disk, sorted by name.
    pub fn post_frontend_datasets(&self) -> Result<Vec<(String, PathBuf)>> {
        if !self.work_dir.is_dir() {
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.work_dir).map_err(io_err(&self.work_dir))? {
            let entry = entry.map_err(io_err(&self.work_dir))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if let Some(dataset) = name.strip_suffix(POST_FRONTEND_SUFFIX) {
                if entry.path().is_dir() {
                    out.push((dataset.to_string(), entry.path()));
                }
            }
        }
        out.sort();
        Ok(out)
    }
}

fn is_ignored(name: &str) -> bool {
    name.starts_with('.') || name.ends_with(".log")
}

fn subdirectories(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let entry = entry.map_err(io_err(dir))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if !is_ignored(&name) && entry.path().is_dir() {
            dirs.push(entry.path());
        }
    }
    dirs.sort();
    Ok(dirs)
}

/// Relative paths of all files under `dir`, sorted, skipping hidden entries and logs.
pub fn list_files(dir: &Path) -> Result<Vec<PathBuf>> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
        for entry in fs::read_dir(dir).map_err(io_err(dir))? {
            let entry = entry.map_err(io_err(dir))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if is_ignored(&name) {
                continue;
            }
            let path = entry.path();
            if path.is_dir() {
                walk(root, &path, out)?;
            } else {
                out.push(path.strip_prefix(root).expect("under root").to_path_buf());
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out)?;
    out.sort();
    Ok(out)
}

/// Loads one abstract design per immediate subdirectory of `dir`.
pub fn load_dataset(dir: &Path, name: &str) -> Result<DesignDataset> {
    check_name(name)?;
    if !dir.is_dir() {
        return Err(DesignError::MissingDirectory(dir.to_path_buf()));
    }
    let subdirs = subdirectories(dir)?;
    if subdirs.is_empty() {
        return Err(DesignError::EmptyDataset(dir.to_path_buf()));
    }
    let mut designs = Vec::with_capacity(subdirs.len());
    for sub in subdirs {
        let design_name = sub
            .file_name()
            .expect("subdirectory has a name")
            .to_string_lossy()
            .into_owned();
        check_name(&design_name)?;
        let files = list_files(&sub)?;
        if files.is_empty() {
            return Err(DesignError::EmptyDesign(sub));
        }
        designs.push(Design::Abstract(AbstractDesign {
            name: design_name,
            dataset_name: name.to_string(),
            source_dir: sub,
            files,
        }));
    }
    DesignDataset::new(name, designs)
}

/// `<base_name>__<hash8>` where hash8 is the SHA-256 prefix of the
/// assignment's canonical text.
pub fn concrete_design_id(base_name: &str, assignment: &DirectiveAssignment) -> String {
    let digest = Sha256::digest(assignment.canonical_text().as_bytes());
    format!("{base_name}__{}", &hex::encode(digest)[..8])
}

/// Required files absent from the design directory, in the order given.
pub fn validate_design_files<S: AsRef<str>>(design: &Design, required: &[S]) -> Vec<String> {
    missing_files(design.dir(), required)
}

pub(crate) fn missing_files<S: AsRef<str>>(dir: &Path, required: &[S]) -> Vec<String> {
    required
        .iter()
        .map(AsRef::as_ref)
        .filter(|f| !dir.join(f).is_file())
        .map(str::to_string)
        .collect()
}

/// Contents of `data_design.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignRecord {
    pub base_name: String,
    pub id: String,
    pub vendor: Vendor,
    pub assignment: Vec<SelectionRecord>,
}

impl DesignRecord {
    pub fn from_design(d: &ConcreteDesign) -> Self {
        Self {
            base_name: d.base_name.clone(),
            id: d.id.clone(),
            vendor: d.vendor,
            assignment: d.assignment.selections().iter().map(Into::into).collect(),
        }
    }

    pub fn assignment(&self) -> DirectiveAssignment {
        DirectiveAssignment::new(
            self.assignment
                .iter()
                .cloned()
                .map(Selection::from)
                .collect(),
        )
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(DESIGN_RECORD_FILE);
        let mut text = serde_json::to_string_pretty(self).expect("record serializes");
        text.push('\n');
        fs::write(&path, text).map_err(io_err(&path))
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(DESIGN_RECORD_FILE);
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        serde_json::from_str(&text).map_err(|e| DesignError::MalformedRecord {
            path,
            message: e.to_string(),
        })
    }
}

/// Loads a post-frontend dataset directory back into concrete designs.
pub fn load_concrete_dataset(dir: &Path, name: &str) -> Result<DesignDataset> {
    if !dir.is_dir() {
        return Err(DesignError::MissingDirectory(dir.to_path_buf()));
    }
    let mut designs = Vec::new();
    for sub in subdirectories(dir)? {
        let record = DesignRecord::read(&sub)?;
        designs.push(Design::Concrete(ConcreteDesign {
            assignment: record.assignment(),
            id: record.id,
            base_name: record.base_name,
            dir: sub,
            vendor: record.vendor,
        }));
    }
    DesignDataset::new(name, designs)
}

/// Every post-frontend dataset under the workspace, keyed by the original
/// dataset name.
pub fn load_post_frontend(layout: &WorkspaceLayout) -> Result<DatasetCollection> {
    let mut collection = DatasetCollection::new();
    for (name, dir) in layout.post_frontend_datasets()? {
        collection.insert(load_concrete_dataset(&dir, &name)?)?;
    }
    Ok(collection)
}
