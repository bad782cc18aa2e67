//! Job plans: workers, actions with per-candidate costs, and the
//! sequence/parallel structure over the actions.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::alloc::{CandidateId, CandidateSet};
use crate::cost::Vec3;
use crate::nodes::Primitive;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkerKind {
    Human,
    Robot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerSpec {
    pub id: String,
    pub kind: WorkerKind,
    /// Starting position for the distance cost model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<Vec3>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanAction {
    pub id: String,
    #[serde(default)]
    pub label: String,
    /// Execution time per candidate, keyed by candidate name (`h`, `h+r`).
    /// Candidates missing from the map cannot perform the action.
    pub costs: BTreeMap<String, f64>,
    /// Initial costs for the distance metric; falls back to `costs`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_init: Option<BTreeMap<String, f64>>,
    /// Whether combinations of workers may take this action.
    #[serde(default)]
    pub collaborative: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<Vec3>,
    /// Robot primitive composition; defaults to a move-object sequence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub primitives: Option<Vec<Primitive>>,
}

impl PlanAction {
    pub fn new(id: &str, costs: &[(&str, f64)]) -> Self {
        PlanAction {
            id: id.to_string(),
            label: String::new(),
            costs: costs.iter().map(|&(k, v)| (k.to_string(), v)).collect(),
            c_init: None,
            collaborative: costs.iter().any(|(k, _)| k.contains('+')),
            position: None,
            primitives: None,
        }
    }

    pub fn labelled(mut self, label: &str) -> Self {
        self.label = label.to_string();
        self
    }
}

/// Structure of a plan: action references grouped in sequences and
/// parallels. Serialized as a bare string for an action, or
/// `{"sequence": [...]}` / `{"parallel": [...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PlanNode {
    Action(String),
    Group(Group),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Sequence(Vec<PlanNode>),
    Parallel(Vec<PlanNode>),
}

impl PlanNode {
    pub fn action(id: &str) -> Self {
        PlanNode::Action(id.to_string())
    }

    pub fn seq(children: Vec<PlanNode>) -> Self {
        PlanNode::Group(Group::Sequence(children))
    }

    pub fn par(children: Vec<PlanNode>) -> Self {
        PlanNode::Group(Group::Parallel(children))
    }

    /// Action ids in depth-first order.
    pub fn action_ids(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect(&mut out);
        out
    }

    fn collect<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            PlanNode::Action(id) => out.push(id),
            PlanNode::Group(Group::Sequence(c) | Group::Parallel(c)) => {
                c.iter().for_each(|n| n.collect(out))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobPlan {
    pub name: String,
    pub workers: Vec<WorkerSpec>,
    pub actions: Vec<PlanAction>,
    pub structure: PlanNode,
}

/// A validation problem, located by a field path such as `actions[3].costs`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for PlanError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid job plan:\n{}", .0.iter().map(|e| format!("  {e}")).collect::<Vec<_>>().join("\n"))]
pub struct PlanErrors(pub Vec<PlanError>);

impl JobPlan {
    /// Checks the whole plan and reports every problem found.
    pub fn validate(&self) -> Result<(), PlanErrors> {
        let mut errors = Vec::new();
        let mut err = |path: String, message: String| errors.push(PlanError { path, message });
        if self.workers.is_empty() {
            err("workers".into(), "at least one worker is required".into());
        }
        if self.actions.is_empty() {
            err("actions".into(), "plan has no actions".into());
        }
        let mut workers = HashSet::new();
        for (i, w) in self.workers.iter().enumerate() {
            if w.id.is_empty() || w.id.contains('+') {
                err(format!("workers[{i}].id"), format!("invalid worker id `{}`", w.id));
            }
            if !workers.insert(w.id.as_str()) {
                err(format!("workers[{i}].id"), format!("duplicate worker `{}`", w.id));
            }
        }
        let mut ids = HashSet::new();
        for (i, a) in self.actions.iter().enumerate() {
            if !ids.insert(a.id.as_str()) {
                err(format!("actions[{i}].id"), format!("duplicate action `{}`", a.id));
            }
            let tables = std::iter::once(("costs", &a.costs)).chain(a.c_init.as_ref().map(|c| ("c_init", c)));
            for (field, table) in tables {
                for (key, &value) in table {
                    let path = format!("actions[{i}].{field}.{key}");
                    let members: Vec<&str> = key.split('+').map(str::trim).collect();
                    if let Some(unknown) = members.iter().find(|m| !workers.contains(*m)) {
                        err(path.clone(), format!("unknown worker `{unknown}`"));
                    } else if members.iter().collect::<HashSet<_>>().len() != members.len() {
                        err(path.clone(), "repeated worker in combination".into());
                    } else if members.len() > 2 {
                        err(path.clone(), "only single workers and pairs are supported".into());
                    }
                    if !value.is_finite() || value < 0.0 {
                        err(path, format!("cost must be finite and non-negative, got {value}"));
                    }
                }
            }
            let feasible = a
                .costs
                .keys()
                .any(|k| a.collaborative || !k.contains('+'));
            if !feasible {
                err(
                    format!("actions[{i}].costs"),
                    format!("action `{}` has no feasible candidate", a.id),
                );
            }
            if a.collaborative && !a.costs.keys().any(|k| k.contains('+')) {
                err(
                    format!("actions[{i}].collaborative"),
                    "collaborative action lists no pair cost".into(),
                );
            }
        }
        let referenced = self.structure.action_ids();
        let mut seen = HashSet::new();
        for id in &referenced {
            if !ids.contains(id) {
                err("structure".into(), format!("unknown action `{id}`"));
            }
            if !seen.insert(*id) {
                err("structure".into(), format!("action `{id}` referenced twice"));
            }
        }
        for (i, a) in self.actions.iter().enumerate() {
            if !seen.contains(a.id.as_str()) {
                err(format!("actions[{i}]"), format!("action `{}` not used in structure", a.id));
            }
        }
        check_groups(&self.structure, "structure", &mut errors);
        if errors.is_empty() {
            Ok(())
        } else {
            Err(PlanErrors(errors))
        }
    }

    pub fn action(&self, id: &str) -> Option<&PlanAction> {
        self.actions.iter().find(|a| a.id == id)
    }

    pub fn has_collaboration(&self) -> bool {
        self.actions.iter().any(|a| a.collaborative)
    }
}

fn check_groups(node: &PlanNode, path: &str, errors: &mut Vec<PlanError>) {
    if let PlanNode::Group(Group::Sequence(c) | Group::Parallel(c)) = node {
        if c.is_empty() {
            errors.push(PlanError {
                path: path.to_string(),
                message: "empty group".into(),
            });
        }
        for (i, child) in c.iter().enumerate() {
            check_groups(child, &format!("{path}[{i}]"), errors);
        }
    }
}

/// A validated plan with its candidate set and dense cost tables.
#[derive(Debug, Clone)]
pub struct Job {
    pub plan: JobPlan,
    pub candidates: CandidateSet,
    /// Execution time per `[candidate][action]`; doubles as the duration
    /// cost.
    pub durations: Vec<Vec<Option<f64>>>,
    /// Initial costs for the distance metric, `[candidate][action]`.
    pub c_init: Vec<Vec<Option<f64>>>,
    index: HashMap<String, usize>,
}

impl Job {
    /// Builds the job for either singles only (`max_combo = 1`) or singles
    /// plus pairs (`max_combo = 2`). Pair costs are dropped for actions that
    /// are not collaborative.
    pub fn new(plan: JobPlan, max_combo: usize) -> Result<Self, PlanErrors> {
        plan.validate()?;
        let names: Vec<&str> = plan.workers.iter().map(|w| w.id.as_str()).collect();
        let candidates = CandidateSet::build(&names, max_combo).map_err(|e| {
            PlanErrors(vec![PlanError {
                path: "workers".into(),
                message: e.to_string(),
            }])
        })?;
        let table = |pick: &dyn Fn(&PlanAction) -> &BTreeMap<String, f64>| {
            let mut out = vec![vec![None; plan.actions.len()]; candidates.len()];
            for (a, action) in plan.actions.iter().enumerate() {
                for (key, &value) in pick(action) {
                    if key.contains('+') && !action.collaborative {
                        continue;
                    }
                    if let Some(c) = candidates.by_name(key) {
                        out[c.0][a] = Some(value);
                    }
                }
            }
            out
        };
        let durations = table(&|a| &a.costs);
        let c_init = table(&|a| a.c_init.as_ref().unwrap_or(&a.costs));
        let mut errors = Vec::new();
        for (a, action) in plan.actions.iter().enumerate() {
            if durations.iter().all(|row| row[a].is_none()) {
                errors.push(PlanError {
                    path: format!("actions[{a}].costs"),
                    message: format!(
                        "action `{}` has no feasible candidate in this configuration",
                        action.id
                    ),
                });
            }
            for c in candidates.iter() {
                if c_init[c.id.0][a].is_some() != durations[c.id.0][a].is_some() {
                    errors.push(PlanError {
                        path: format!("actions[{a}].c_init"),
                        message: format!("feasibility of `{}` differs from costs", c.name),
                    });
                }
            }
        }
        if !errors.is_empty() {
            return Err(PlanErrors(errors));
        }
        let index = plan
            .actions
            .iter()
            .enumerate()
            .map(|(i, a)| (a.id.clone(), i))
            .collect();
        Ok(Job {
            plan,
            candidates,
            durations,
            c_init,
            index,
        })
    }

    pub fn action_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn action_id(&self, index: usize) -> &str {
        &self.plan.actions[index].id
    }

    pub fn action_count(&self) -> usize {
        self.plan.actions.len()
    }

    pub fn worker_kind(&self, agent: usize) -> WorkerKind {
        self.plan.workers[agent].kind
    }

    pub fn worker_id(&self, agent: usize) -> &str {
        &self.plan.workers[agent].id
    }

    pub fn worker_index(&self, id: &str) -> Option<usize> {
        self.plan.workers.iter().position(|w| w.id == id)
    }

    pub fn has_human(&self, candidate: CandidateId) -> bool {
        self.candidates
            .get(candidate)
            .members
            .iter()
            .any(|&m| self.worker_kind(m) == WorkerKind::Human)
    }

    pub fn duration(&self, candidate: CandidateId, action: usize) -> Option<f64> {
        self.durations[candidate.0][action]
    }
}
