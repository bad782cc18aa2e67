//! Job documents: the JSON file a run is started from.
//!
//! A document is a job plan plus the roster flags, instructions and run
//! configuration the service needs. Loading reports every problem with the
//! field path and, when it can be located, the source line.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use teamalloc::cost::{CostModel, Vec3};
use teamalloc::nodes::{Primitive, RunConfig};
use teamalloc::plan::{Job, JobPlan, PlanAction, PlanNode, WorkerKind, WorkerSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobDocument {
    pub name: String,
    pub workers: Vec<RosterEntry>,
    pub actions: Vec<DocumentAction>,
    pub structure: PlanNode,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default, skip_serializing_if = "Gains::is_empty")]
    pub gains: Gains,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RosterEntry {
    pub id: String,
    pub kind: WorkerKind,
    /// Human answering through the operator console. In mixed runs the
    /// other humans are simulated.
    #[serde(default)]
    pub console: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<Vec3>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DocumentAction {
    pub id: String,
    #[serde(default)]
    pub label: String,
    pub costs: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_init: Option<BTreeMap<String, f64>>,
    #[serde(default)]
    pub collaborative: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<Vec3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub primitives: Option<Vec<Primitive>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instruction: Option<Instruction>,
}

/// What the console shows once an action is accepted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instruction {
    /// Free tag such as `insertion` or `rotation`.
    pub kind: String,
    pub text: String,
}

/// Overrides for the calibrated cost gains.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gains {
    /// Availability gain per worker.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub alpha: BTreeMap<String, f64>,
    /// Preference gain per candidate (`h`, `h+r`).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub psi: BTreeMap<String, f64>,
}

impl Gains {
    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty() && self.psi.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub path: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "line {l}, column {c}: ")?,
            (Some(l), None) => write!(f, "line {l}: ")?,
            _ => {}
        }
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid job document:\n{}", .0.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n"))]
pub struct DocumentError(pub Vec<Diagnostic>);

/// A document that passed validation, with the plan it describes.
#[derive(Debug, Clone)]
pub struct LoadedJob {
    pub document: JobDocument,
    pub plan: JobPlan,
}

impl LoadedJob {
    pub fn config(&self) -> RunConfig {
        self.document.run
    }

    pub fn name(&self) -> &str {
        &self.document.name
    }

    pub fn instruction(&self, action: &str) -> Option<&Instruction> {
        self.document
            .actions
            .iter()
            .find(|a| a.id == action)
            .and_then(|a| a.instruction.as_ref())
    }

    /// Humans flagged for the console.
    pub fn console_workers(&self) -> Vec<String> {
        self.document
            .workers
            .iter()
            .filter(|w| w.console)
            .map(|w| w.id.clone())
            .collect()
    }

    /// Applies the gain overrides to a calibrated cost model.
    pub fn apply_gains(&self, job: &Job, costs: &mut CostModel) {
        for (worker, &alpha) in &self.document.gains.alpha {
            if let Some(i) = job.worker_index(worker) {
                costs.alpha[i] = alpha;
            }
        }
        for (candidate, &psi) in &self.document.gains.psi {
            if let Some(c) = job.candidates.by_name(candidate) {
                costs.psi[c.0] = psi;
            }
        }
    }
}

impl JobDocument {
    pub fn from_plan(plan: &JobPlan, run: RunConfig) -> Self {
        JobDocument {
            name: plan.name.clone(),
            workers: plan
                .workers
                .iter()
                .map(|w| RosterEntry {
                    id: w.id.clone(),
                    kind: w.kind,
                    console: w.kind == WorkerKind::Human,
                    position: w.position,
                })
                .collect(),
            actions: plan
                .actions
                .iter()
                .map(|a| DocumentAction {
                    id: a.id.clone(),
                    label: a.label.clone(),
                    costs: a.costs.clone(),
                    c_init: a.c_init.clone(),
                    collaborative: a.collaborative,
                    position: a.position,
                    primitives: a.primitives.clone(),
                    instruction: None,
                })
                .collect(),
            structure: plan.structure.clone(),
            run,
            gains: Gains::default(),
        }
    }

    pub fn plan(&self) -> JobPlan {
        JobPlan {
            name: self.name.clone(),
            workers: self
                .workers
                .iter()
                .map(|w| WorkerSpec {
                    id: w.id.clone(),
                    kind: w.kind,
                    position: w.position,
                })
                .collect(),
            actions: self
                .actions
                .iter()
                .map(|a| PlanAction {
                    id: a.id.clone(),
                    label: a.label.clone(),
                    costs: a.costs.clone(),
                    c_init: a.c_init.clone(),
                    collaborative: a.collaborative,
                    position: a.position,
                    primitives: a.primitives.clone(),
                })
                .collect(),
            structure: self.structure.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("documents serialize") + "\n"
    }
}

pub fn load_job_file(path: &Path) -> Result<LoadedJob, DocumentError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        DocumentError(vec![Diagnostic {
            line: None,
            column: None,
            path: String::new(),
            message: format!("cannot read {}: {e}", path.display()),
        }])
    })?;
    load_job(&text)
}

pub fn load_job(text: &str) -> Result<LoadedJob, DocumentError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let parsed = serde_path_to_error::deserialize::<_, JobDocument>(&mut de);
    let document = match parsed {
        Ok(d) => d,
        Err(e) => {
            let path = e.path().to_string();
            let inner = e.into_inner();
            return Err(DocumentError(vec![Diagnostic {
                line: Some(inner.line()),
                column: Some(inner.column()),
                path: if path == "." { String::new() } else { path },
                message: strip_position(&inner.to_string()),
            }]));
        }
    };
    if let Err(e) = de.end() {
        return Err(DocumentError(vec![Diagnostic {
            line: Some(e.line()),
            column: Some(e.column()),
            path: String::new(),
            message: strip_position(&e.to_string()),
        }]));
    }
    let mut problems: Vec<(String, String)> = Vec::new();
    for (i, w) in document.workers.iter().enumerate() {
        if w.console && w.kind != WorkerKind::Human {
            problems.push((format!("workers[{i}].console"), "only human workers use the console".into()));
        }
    }
    for (key, table) in [("alpha", &document.gains.alpha), ("psi", &document.gains.psi)] {
        for (name, &value) in table {
            let known = match key {
                "alpha" => document.workers.iter().any(|w| &w.id == name),
                _ => name.split('+').all(|m| document.workers.iter().any(|w| w.id == m)),
            };
            if !known {
                problems.push((format!("gains.{key}.{name}"), format!("unknown worker `{name}`")));
            }
            if !value.is_finite() || value < 0.0 {
                problems.push((format!("gains.{key}.{name}"), format!("gain must be finite and non-negative, got {value}")));
            }
        }
    }
    let plan = document.plan();
    match plan.validate() {
        Ok(()) => {
            let job = Job::new(plan.clone(), document.run.variant.max_combo());
            match job {
                Ok(job) => {
                    if let Err(e) = CostModel::new(&job, document.run.costs) {
                        problems.push(("workers".into(), e.to_string()));
                    }
                }
                Err(errors) => problems.extend(errors.0.into_iter().map(|e| (e.path, e.message))),
            }
        }
        Err(errors) => problems.extend(errors.0.into_iter().map(|e| (e.path, e.message))),
    }
    if problems.is_empty() {
        return Ok(LoadedJob { document, plan });
    }
    let lines = locate(text);
    let diagnostics = problems
        .into_iter()
        .map(|(path, message)| Diagnostic {
            line: line_of(&lines, &path),
            column: None,
            path,
            message,
        })
        .collect();
    Err(DocumentError(diagnostics))
}

/// serde_json appends " at line L column C"; the diagnostic carries those
/// separately.
fn strip_position(message: &str) -> String {
    match message.rfind(" at line ") {
        Some(i) => message[..i].to_string(),
        None => message.to_string(),
    }
}

/// Closest located ancestor of `path`.
fn line_of(lines: &HashMap<String, usize>, path: &str) -> Option<usize> {
    let mut path = path;
    loop {
        if let Some(&line) = lines.get(path) {
            return Some(line);
        }
        let cut = path.rfind(['.', '['])?;
        path = &path[..cut];
    }
}

/// Maps the field path of every value in a well-formed JSON text to the line
/// it starts on. Children of `{"sequence": [...]}` and `{"parallel": [...]}`
/// are also reachable as `path[i]`, the form plan validation reports.
fn locate(text: &str) -> HashMap<String, usize> {
    let mut scanner = Scanner {
        bytes: text.as_bytes(),
        pos: 0,
        line: 1,
        out: HashMap::new(),
    };
    scanner.value(String::new(), None);
    scanner.out
}

struct Scanner<'a> {
    bytes: &'a [u8],
    pos: usize,
    line: usize,
    out: HashMap<String, usize>,
}

impl Scanner<'_> {
    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn bump(&mut self) {
        if self.peek() == Some(b'\n') {
            self.line += 1;
        }
        self.pos += 1;
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b' ' | b'\t' | b'\r' | b'\n')) {
            self.bump();
        }
    }

    fn string(&mut self) -> String {
        self.bump();
        let start = self.pos;
        while let Some(b) = self.peek() {
            match b {
                b'\\' => {
                    self.bump();
                    self.bump();
                }
                b'"' => break,
                _ => self.bump(),
            }
        }
        let raw = String::from_utf8_lossy(&self.bytes[start..self.pos]).into_owned();
        self.bump();
        raw
    }

    fn value(&mut self, path: String, alias: Option<String>) {
        self.skip_ws();
        self.out.entry(path.clone()).or_insert(self.line);
        if let Some(a) = &alias {
            self.out.entry(a.clone()).or_insert(self.line);
        }
        match self.peek() {
            Some(b'{') => {
                self.bump();
                loop {
                    self.skip_ws();
                    match self.peek() {
                        Some(b'}') | None => {
                            self.bump();
                            break;
                        }
                        Some(b',') => self.bump(),
                        Some(b'"') => {
                            let key = self.string();
                            self.skip_ws();
                            self.bump();
                            let child = if path.is_empty() { key.clone() } else { format!("{path}.{key}") };
                            let group_alias = (key == "sequence" || key == "parallel")
                                .then(|| alias.clone().unwrap_or_else(|| path.clone()));
                            self.value(child, group_alias.map(|a| format!("{a}#group")));
                        }
                        Some(_) => self.bump(),
                    }
                }
            }
            Some(b'[') => {
                self.bump();
                let group = alias.as_deref().and_then(|a| a.strip_suffix("#group")).map(str::to_string);
                let mut index = 0;
                loop {
                    self.skip_ws();
                    match self.peek() {
                        Some(b']') | None => {
                            self.bump();
                            break;
                        }
                        Some(b',') => {
                            self.bump();
                            index += 1;
                        }
                        _ => {
                            let child_alias = group.as_ref().map(|g| format!("{g}[{index}]"));
                            self.value(format!("{path}[{index}]"), child_alias);
                        }
                    }
                }
            }
            Some(b'"') => {
                self.string();
            }
            _ => {
                while let Some(b) = self.peek() {
                    if matches!(b, b',' | b'}' | b']') || b.is_ascii_whitespace() {
                        break;
                    }
                    self.bump();
                }
            }
        }
    }
}
