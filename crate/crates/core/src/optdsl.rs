// SPDX-License-Identifier: Apache-2.0

//! Parser and design-space model for `opt_template.tcl` directive templates.
//!
//! A template is a sequence of groups. Each group starts with a header
//! `<group>,<n_lines>,<n_templates>`, followed by `n_lines` directive lines of
//! the form `<index>,<label>,<fixed_directive>,<param_kind>,[c1 c2 ...]` and
//! `n_templates` Tcl command templates containing bracketed placeholders:
//!
//! ```text
//! loop_opt,3,2
//! 0,lp2,pipeline,unroll,[1 2 4 8]
//! 1,lp3,pipeline,unroll,[1 2 4 8]
//! 2,lp3,,unroll,[1 2 4 8]
//! set_directive_unroll -factor [factor] k2mm/[name]
//! set_directive_pipeline k2mm/[name]
//! ```
//!
//! Lines of one group that share a label are mutually exclusive alternatives;
//! distinct labels are independent axes of the design space. The example above
//! therefore spans `4 * 8 = 32` design points.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Name of the OptDSL template file inside an abstract design.
pub const TEMPLATE_FILE: &str = "opt_template.tcl";
/// Name of the rendered directive script inside a Xilinx concrete design.
pub const RENDERED_FILE: &str = "opt.tcl";

const NAME_PLACEHOLDER: &str = "name";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OptDslError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("group `{group}` declares {declared} {what} but {found} present")]
    CountMismatch {
        group: String,
        what: &'static str,
        declared: usize,
        found: usize,
    },
    #[error("group `{group}`: no template matches `set_directive_{kind}`")]
    UnmatchedTemplate { group: String, kind: String },
    #[error("group `{group}`: cannot fill placeholder(s) of `{template}` with choice `{choice}`")]
    UnfilledPlaceholder {
        group: String,
        template: String,
        choice: String,
    },
    #[error("assignment does not fit template: {0}")]
    InvalidAssignment(String),
}

pub type Result<T> = std::result::Result<T, OptDslError>;

/// One parameterized directive line of a group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectiveLine {
    pub index: usize,
    pub label: String,
    pub fixed_directive: Option<String>,
    pub param_kind: String,
    pub choices: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectiveGroup {
    pub name: String,
    pub lines: Vec<DirectiveLine>,
    pub templates: Vec<String>,
    pub declared_line_count: usize,
    pub declared_template_count: usize,
}

impl DirectiveGroup {
    /// Finds the command template for a directive kind. A template matches
    /// when one of its whitespace-separated tokens is `set_directive_<kind>`.
    pub fn template_for(&self, kind: &str) -> Option<&str> {
        let command = format!("set_directive_{kind}");
        self.templates
            .iter()
            .find(|t| t.split_whitespace().any(|tok| tok == command))
            .map(String::as_str)
    }

    pub fn line(&self, index: usize) -> Option<&DirectiveLine> {
        self.lines.get(index)
    }
}

/// A parsed `opt_template.tcl`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct OptTemplate {
    groups: Vec<DirectiveGroup>,
}

impl OptTemplate {
    pub fn groups(&self) -> &[DirectiveGroup] {
        &self.groups
    }

    pub fn group(&self, name: &str) -> Option<&DirectiveGroup> {
        self.groups.iter().find(|g| g.name == name)
    }

    /// All command templates, in file order.
    pub fn templates(&self) -> impl Iterator<Item = &str> {
        self.groups
            .iter()
            .flat_map(|g| g.templates.iter().map(String::as_str))
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LineShape {
    Header,
    Directive,
    Template,
}

fn classify(line: &str) -> LineShape {
    let first = line.split(',').next().unwrap_or("");
    if line.contains(',') && !first.is_empty() && first.bytes().all(|b| b.is_ascii_digit()) {
        LineShape::Directive
    } else if line.contains(',') && !line.contains(char::is_whitespace) {
        LineShape::Header
    } else {
        LineShape::Template
    }
}

fn is_identifier(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_')
}

fn syntax(line: usize, message: impl Into<String>) -> OptDslError {
    OptDslError::Syntax {
        line,
        message: message.into(),
    }
}

fn parse_header(lineno: usize, text: &str) -> Result<(String, usize, usize)> {
    let fields: Vec<&str> = text.split(',').collect();
    if fields.len() != 3 {
        return Err(syntax(
            lineno,
            format!("group header needs 3 fields, found {}", fields.len()),
        ));
    }
    if !is_identifier(fields[0]) {
        return Err(syntax(lineno, format!("invalid group name `{}`", fields[0])));
    }
    let count = |s: &str, what: &str| {
        s.parse::<usize>()
            .map_err(|_| syntax(lineno, format!("invalid {what} count `{s}`")))
    };
    Ok((
        fields[0].to_string(),
        count(fields[1], "line")?,
        count(fields[2], "template")?,
    ))
}

fn parse_choices(lineno: usize, field: &str) -> Result<Vec<String>> {
    if field.contains('\t') {
        return Err(syntax(lineno, "tab characters are not allowed in choice lists"));
    }
    let inner = field
        .strip_prefix('[')
        .ok_or_else(|| syntax(lineno, "choice list must start with `[`"))?;
    let inner = inner
        .strip_suffix(']')
        .ok_or_else(|| syntax(lineno, "unterminated bracket in choice list"))?;
    if inner.contains('[') || inner.contains(']') {
        return Err(syntax(lineno, "nested brackets in choice list"));
    }
    if inner.is_empty() {
        return Err(syntax(lineno, "empty choice list"));
    }
    let choices: Vec<String> = inner.split(' ').map(str::to_string).collect();
    if choices.iter().any(String::is_empty) {
        return Err(syntax(lineno, "choices must be separated by single spaces"));
    }
    Ok(choices)
}

fn parse_directive_line(lineno: usize, text: &str, position: usize) -> Result<DirectiveLine> {
    let fields: Vec<&str> = text.split(',').collect();
    if fields.len() != 5 {
        return Err(syntax(
            lineno,
            format!("directive line needs 5 fields, found {}", fields.len()),
        ));
    }
    let index: usize = fields[0]
        .parse()
        .map_err(|_| syntax(lineno, format!("invalid line index `{}`", fields[0])))?;
    if index != position {
        return Err(syntax(
            lineno,
            format!("line index {index} does not match its position {position}"),
        ));
    }
    let label = fields[1].trim();
    if !is_identifier(label) {
        return Err(syntax(lineno, format!("invalid label `{label}`")));
    }
    let fixed = fields[2].trim();
    if !fixed.is_empty() && !is_identifier(fixed) {
        return Err(syntax(lineno, format!("invalid directive `{fixed}`")));
    }
    let kind = fields[3].trim();
    if !is_identifier(kind) {
        return Err(syntax(lineno, format!("invalid directive kind `{kind}`")));
    }
    Ok(DirectiveLine {
        index,
        label: label.to_string(),
        fixed_directive: (!fixed.is_empty()).then(|| fixed.to_string()),
        param_kind: kind.to_string(),
        choices: parse_choices(lineno, fields[4].trim())?,
    })
}

/// Distinct placeholder names of a template, in order of first appearance.
/// `[name]` is included.
fn placeholders(template: &str) -> Vec<&str> {
    let mut out: Vec<&str> = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('[') {
        let after = &rest[open + 1..];
        match after.find(']') {
            Some(close) => {
                let name = &after[..close];
                if !out.contains(&name) {
                    out.push(name);
                }
                rest = &after[close + 1..];
            }
            None => break,
        }
    }
    out
}

/// Substitutes `[name]` with `label` and the remaining placeholders with the
/// hyphen-separated parts of `choice`. A single-part choice fills every
/// value placeholder; otherwise parts are matched to placeholders by position.
fn fill_template(template: &str, label: &str, choice: Option<&str>) -> Option<String> {
    let values: Vec<&str> = placeholders(template)
        .into_iter()
        .filter(|p| *p != NAME_PLACEHOLDER)
        .collect();
    let parts: Vec<&str> = choice.map(|c| c.split('-').collect()).unwrap_or_default();
    match (values.len(), parts.len()) {
        (0, 0) => {}
        (0, _) | (_, 0) => return None,
        (_, 1) => {}
        (v, p) if v == p => {}
        _ => return None,
    }
    let mut out = template.replace("[name]", label);
    for (i, placeholder) in values.iter().enumerate() {
        let value = if parts.len() == 1 { parts[0] } else { parts[i] };
        out = out.replace(&format!("[{placeholder}]"), value);
    }
    if out.contains('[') || out.contains(']') {
        return None;
    }
    Some(out)
}

fn validate_group(group: &DirectiveGroup) -> Result<()> {
    for line in &group.lines {
        let template = group
            .template_for(&line.param_kind)
            .ok_or_else(|| OptDslError::UnmatchedTemplate {
                group: group.name.clone(),
                kind: line.param_kind.clone(),
            })?;
        for choice in &line.choices {
            if fill_template(template, &line.label, Some(choice)).is_none() {
                return Err(OptDslError::UnfilledPlaceholder {
                    group: group.name.clone(),
                    template: template.to_string(),
                    choice: choice.clone(),
                });
            }
        }
        if let Some(fixed) = &line.fixed_directive {
            let template =
                group
                    .template_for(fixed)
                    .ok_or_else(|| OptDslError::UnmatchedTemplate {
                        group: group.name.clone(),
                        kind: fixed.clone(),
                    })?;
            if fill_template(template, &line.label, None).is_none() {
                return Err(OptDslError::UnfilledPlaceholder {
                    group: group.name.clone(),
                    template: template.to_string(),
                    choice: String::new(),
                });
            }
        }
    }
    Ok(())
}

/// Parses the text of an `opt_template.tcl`. Blank lines and lines starting
/// with `#` are skipped.
pub fn parse_opt_template(text: &str) -> Result<OptTemplate> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r').trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .collect();

    let mut groups: Vec<DirectiveGroup> = Vec::new();
    let mut pos = 0;
    while pos < lines.len() {
        let (lineno, text) = lines[pos];
        match classify(text) {
            LineShape::Header => {}
            shape => {
                // Extra lines after a completed group mean its header undercounted.
                if let Some(prev) = groups.last() {
                    let (what, declared, found) = if shape == LineShape::Directive {
                        let extra = lines[pos..]
                            .iter()
                            .take_while(|(_, l)| classify(l) == LineShape::Directive)
                            .count();
                        ("lines", prev.declared_line_count, prev.lines.len() + extra)
                    } else {
                        let extra = lines[pos..]
                            .iter()
                            .take_while(|(_, l)| classify(l) == LineShape::Template)
                            .count();
                        (
                            "templates",
                            prev.declared_template_count,
                            prev.templates.len() + extra,
                        )
                    };
                    return Err(OptDslError::CountMismatch {
                        group: prev.name.clone(),
                        what,
                        declared,
                        found,
                    });
                }
                return Err(syntax(lineno, "expected group header `<group>,<n_lines>,<n_templates>`"));
            }
        }
        let (name, n_lines, n_templates) = parse_header(lineno, text)?;
        if groups.iter().any(|g| g.name == name) {
            return Err(syntax(lineno, format!("duplicate group `{name}`")));
        }
        pos += 1;

        let mut directive_lines = Vec::with_capacity(n_lines);
        while directive_lines.len() < n_lines {
            match lines.get(pos) {
                Some(&(ln, l)) if classify(l) == LineShape::Directive => {
                    directive_lines.push(parse_directive_line(ln, l, directive_lines.len())?);
                    pos += 1;
                }
                _ => {
                    return Err(OptDslError::CountMismatch {
                        group: name,
                        what: "lines",
                        declared: n_lines,
                        found: directive_lines.len(),
                    })
                }
            }
        }
        if let Some(&(_, l)) = lines.get(pos) {
            if classify(l) == LineShape::Directive {
                let extra = lines[pos..]
                    .iter()
                    .take_while(|(_, l)| classify(l) == LineShape::Directive)
                    .count();
                return Err(OptDslError::CountMismatch {
                    group: name,
                    what: "lines",
                    declared: n_lines,
                    found: n_lines + extra,
                });
            }
        }

        let mut templates = Vec::with_capacity(n_templates);
        while templates.len() < n_templates {
            match lines.get(pos) {
                Some(&(ln, l)) if classify(l) == LineShape::Template => {
                    if placeholders(l).iter().any(|p| p.is_empty() || p.contains(' ')) {
                        return Err(syntax(ln, "malformed placeholder in template"));
                    }
                    if l.matches('[').count() != l.matches(']').count() {
                        return Err(syntax(ln, "unterminated bracket in template"));
                    }
                    templates.push(l.to_string());
                    pos += 1;
                }
                _ => {
                    return Err(OptDslError::CountMismatch {
                        group: name,
                        what: "templates",
                        declared: n_templates,
                        found: templates.len(),
                    })
                }
            }
        }

        let group = DirectiveGroup {
            name,
            lines: directive_lines,
            templates,
            declared_line_count: n_lines,
            declared_template_count: n_templates,
        };
        validate_group(&group)?;
        groups.push(group);
    }
    Ok(OptTemplate { groups })
}

/// One selected `(line, choice)` pair.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Selection {
    pub group: String,
    pub label: String,
    pub line_index: usize,
    pub fixed_directive: Option<String>,
    pub param_kind: String,
    pub choice: String,
}

impl Selection {
    /// `pipeline+unroll` style directive descriptor.
    pub fn directive(&self) -> String {
        match &self.fixed_directive {
            Some(fixed) => format!("{fixed}+{}", self.param_kind),
            None => self.param_kind.clone(),
        }
    }

    /// Inverse of [`Selection::directive`].
    pub fn split_directive(directive: &str) -> (Option<String>, String) {
        match directive.split_once('+') {
            Some((fixed, kind)) => (Some(fixed.to_string()), kind.to_string()),
            None => (None, directive.to_string()),
        }
    }
}

/// One point of a design space: a selection per axis, in axis order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct DirectiveAssignment {
    selections: Vec<Selection>,
}

impl DirectiveAssignment {
    pub fn new(selections: Vec<Selection>) -> Self {
        Self { selections }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn selections(&self) -> &[Selection] {
        &self.selections
    }

    pub fn is_empty(&self) -> bool {
        self.selections.is_empty()
    }

    pub fn selection_for(&self, label: &str) -> Option<&Selection> {
        self.selections.iter().find(|s| s.label == label)
    }

    /// Selections sorted by group, label and line index.
    pub fn canonical(&self) -> Vec<&Selection> {
        let mut sorted: Vec<&Selection> = self.selections.iter().collect();
        sorted.sort_by(|a, b| {
            (&a.group, &a.label, a.line_index, &a.choice)
                .cmp(&(&b.group, &b.label, b.line_index, &b.choice))
        });
        sorted
    }

    /// Order-independent text form; this is what concrete design ids hash.
    pub fn canonical_text(&self) -> String {
        let mut out = String::new();
        for s in self.canonical() {
            out.push_str(&format!(
                "{}/{}/{}:{}={}\n",
                s.group,
                s.label,
                s.line_index,
                s.directive(),
                s.choice
            ));
        }
        out
    }

    /// Compact `label=directive:choice;...` summary used in tables.
    pub fn summary(&self) -> String {
        self.canonical()
            .iter()
            .map(|s| format!("{}={}:{}", s.label, s.directive(), s.choice))
            .collect::<Vec<_>>()
            .join(";")
    }
}

impl fmt::Display for DirectiveAssignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.summary())
    }
}

/// JSON record of a selection as written to `data_design.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub group: String,
    pub label: String,
    pub line_index: usize,
    pub directive: String,
    pub choice: String,
}

impl From<&Selection> for SelectionRecord {
    fn from(s: &Selection) -> Self {
        Self {
            group: s.group.clone(),
            label: s.label.clone(),
            line_index: s.line_index,
            directive: s.directive(),
            choice: s.choice.clone(),
        }
    }
}

impl From<SelectionRecord> for Selection {
    fn from(r: SelectionRecord) -> Self {
        let (fixed_directive, param_kind) = Selection::split_directive(&r.directive);
        Self {
            group: r.group,
            label: r.label,
            line_index: r.line_index,
            fixed_directive,
            param_kind,
            choice: r.choice,
        }
    }
}

/// One independent dimension of a design space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Axis {
    pub group: String,
    pub label: String,
    /// `(line index, choice)` alternatives, in line then choice order.
    pub alternatives: Vec<(usize, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DesignSpace {
    template: OptTemplate,
    axes: Vec<Axis>,
}

impl DesignSpace {
    pub fn new(template: &OptTemplate) -> Self {
        let mut axes: Vec<Axis> = Vec::new();
        for group in template.groups() {
            let first = axes.len();
            for line in &group.lines {
                let idx = match axes[first..].iter().position(|a| a.label == line.label) {
                    Some(i) => first + i,
                    None => {
                        axes.push(Axis {
                            group: group.name.clone(),
                            label: line.label.clone(),
                            alternatives: Vec::new(),
                        });
                        axes.len() - 1
                    }
                };
                axes[idx]
                    .alternatives
                    .extend(line.choices.iter().map(|c| (line.index, c.clone())));
            }
        }
        Self {
            template: template.clone(),
            axes,
        }
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn template(&self) -> &OptTemplate {
        &self.template
    }

    /// Number of design points. Saturates at `u128::MAX`.
    pub fn size(&self) -> u128 {
        self.axes
            .iter()
            .fold(1u128, |acc, a| acc.saturating_mul(a.alternatives.len() as u128))
    }

    /// The assignment at `index` in lexicographic order, first axis most
    /// significant.
    pub fn assignment_at(&self, mut index: u128) -> Option<DirectiveAssignment> {
        if index >= self.size() {
            return None;
        }
        let mut picks = vec![0usize; self.axes.len()];
        for (pick, axis) in picks.iter_mut().zip(&self.axes).rev() {
            let radix = axis.alternatives.len() as u128;
            *pick = (index % radix) as usize;
            index /= radix;
        }
        Some(self.assignment_from_picks(&picks))
    }

    fn assignment_from_picks(&self, picks: &[usize]) -> DirectiveAssignment {
        let selections = self
            .axes
            .iter()
            .zip(picks)
            .map(|(axis, &pick)| {
                let (line_index, choice) = &axis.alternatives[pick];
                let line = &self
                    .template
                    .group(&axis.group)
                    .expect("axis group exists")
                    .lines[*line_index];
                Selection {
                    group: axis.group.clone(),
                    label: axis.label.clone(),
                    line_index: *line_index,
                    fixed_directive: line.fixed_directive.clone(),
                    param_kind: line.param_kind.clone(),
                    choice: choice.clone(),
                }
            })
            .collect();
        DirectiveAssignment { selections }
    }

    pub fn iter(&self) -> Assignments<'_> {
        Assignments {
            space: self,
            picks: vec![0; self.axes.len()],
            done: false,
        }
    }
}

/// Odometer iterator over every assignment of a [`DesignSpace`].
pub struct Assignments<'a> {
    space: &'a DesignSpace,
    picks: Vec<usize>,
    done: bool,
}

impl Iterator for Assignments<'_> {
    type Item = DirectiveAssignment;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let current = self.space.assignment_from_picks(&self.picks);
        self.done = true;
        for (pick, axis) in self.picks.iter_mut().zip(&self.space.axes).rev() {
            *pick += 1;
            if *pick < axis.alternatives.len() {
                self.done = false;
                break;
            }
            *pick = 0;
        }
        Some(current)
    }
}

pub fn enumerate_design_space(template: &OptTemplate) -> DesignSpace {
    DesignSpace::new(template)
}

pub fn design_space_size(template: &OptTemplate) -> u128 {
    DesignSpace::new(template).size()
}

/// Renders the concrete `opt.tcl` text for one assignment.
pub fn render_assignment(template: &OptTemplate, assignment: &DirectiveAssignment) -> Result<String> {
    let mut commands: Vec<String> = Vec::new();
    for sel in assignment.selections() {
        let group = template.group(&sel.group).ok_or_else(|| {
            OptDslError::InvalidAssignment(format!("unknown group `{}`", sel.group))
        })?;
        let line = group.line(sel.line_index).ok_or_else(|| {
            OptDslError::InvalidAssignment(format!(
                "group `{}` has no line {}",
                sel.group, sel.line_index
            ))
        })?;
        if line.label != sel.label || !line.choices.contains(&sel.choice) {
            return Err(OptDslError::InvalidAssignment(format!(
                "line {} of `{}` does not offer {}={}",
                sel.line_index, sel.group, sel.label, sel.choice
            )));
        }
        if let Some(fixed) = &line.fixed_directive {
            let t = group
                .template_for(fixed)
                .ok_or_else(|| OptDslError::UnmatchedTemplate {
                    group: group.name.clone(),
                    kind: fixed.clone(),
                })?;
            commands.push(fill_template(t, &line.label, None).ok_or_else(|| {
                OptDslError::UnfilledPlaceholder {
                    group: group.name.clone(),
                    template: t.to_string(),
                    choice: String::new(),
                }
            })?);
        }
        let t = group
            .template_for(&line.param_kind)
            .ok_or_else(|| OptDslError::UnmatchedTemplate {
                group: group.name.clone(),
                kind: line.param_kind.clone(),
            })?;
        commands.push(
            fill_template(t, &line.label, Some(&sel.choice)).ok_or_else(|| {
                OptDslError::UnfilledPlaceholder {
                    group: group.name.clone(),
                    template: t.to_string(),
                    choice: sel.choice.clone(),
                }
            })?,
        );
    }
    let mut text = commands.join("\n");
    text.push('\n');
    Ok(text)
}
