//! Behavior-tree core: node taxonomy, tick propagation and status semantics.
//!
//! Control nodes keep memory across ticks: a `Sequence` resumes from the child
//! that was running, a `Parallel` latches the terminal status of each child.
//! Completed children are therefore never re-executed within one run of their
//! parent. Whenever a control node reaches a terminal status it resets itself
//! and its whole subtree, so the next activation starts from scratch.

mod blackboard;
mod clock;

pub use blackboard::{Blackboard, BoardError, BoardKey};
pub use clock::{TickRate, VirtualClock};

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeStatus {
    Success,
    Failure,
    Running,
}

impl NodeStatus {
    pub fn is_terminal(self) -> bool {
        self != NodeStatus::Running
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub usize);

/// The six node categories of a behavior tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeType {
    Sequence,
    Fallback,
    Parallel,
    Decorator,
    Condition,
    Action,
}

#[derive(Debug, Error)]
pub enum TickError {
    #[error("node `{node}` faulted: {message}")]
    Fault { node: String, message: String },
    #[error(transparent)]
    Board(#[from] BoardError),
}

impl TickError {
    pub fn fault(node: impl Into<String>, message: impl Into<String>) -> Self {
        TickError::Fault {
            node: node.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StructureError {
    #[error("decorator `{label}` must have exactly one child, found {found}")]
    DecoratorArity { label: String, found: usize },
    #[error("leaf `{label}` must not have children, found {found}")]
    LeafWithChildren { label: String, found: usize },
    #[error("parallel `{label}` threshold {threshold} outside 1..={children}")]
    ParallelThreshold {
        label: String,
        threshold: usize,
        children: usize,
    },
}

/// Execution leaf. Returns `Running` while in progress.
pub trait Action<C>: Send {
    fn name(&self) -> &str;
    fn tick(&mut self, ctx: &mut C) -> Result<NodeStatus, TickError>;
    /// Clears per-activation state. Called when the owning subtree finishes or
    /// is halted.
    fn reset(&mut self) {}
}

/// Condition leaf. Evaluates to true/false and can never be `Running`.
pub trait Condition<C>: Send {
    fn name(&self) -> &str;
    fn evaluate(&mut self, ctx: &mut C) -> Result<bool, TickError>;
}

/// Decorator with custom semantics over a single child.
pub trait Decorator<C>: Send {
    fn name(&self) -> &str;
    fn tick(&mut self, ctx: &mut C, child: &mut Node<C>) -> Result<NodeStatus, TickError>;
    fn reset(&mut self) {}
}

pub enum NodeKind<C> {
    Sequence { cursor: usize },
    Fallback { cursor: usize },
    Parallel {
        threshold: usize,
        latched: Vec<Option<NodeStatus>>,
    },
    Decorator(Box<dyn Decorator<C>>),
    Condition(Box<dyn Condition<C>>),
    Action(Box<dyn Action<C>>),
}

pub struct Node<C> {
    id: NodeId,
    label: String,
    kind: NodeKind<C>,
    children: Vec<Node<C>>,
}

impl<C> Node<C> {
    /// Raw constructor; shape is checked when the node is placed in a [`Tree`].
    pub fn new(label: impl Into<String>, kind: NodeKind<C>, children: Vec<Node<C>>) -> Self {
        Node {
            id: NodeId(usize::MAX),
            label: label.into(),
            kind,
            children,
        }
    }

    pub fn sequence(label: impl Into<String>, children: Vec<Node<C>>) -> Self {
        Self::new(label, NodeKind::Sequence { cursor: 0 }, children)
    }

    pub fn fallback(label: impl Into<String>, children: Vec<Node<C>>) -> Self {
        Self::new(label, NodeKind::Fallback { cursor: 0 }, children)
    }

    /// Parallel node succeeding once `threshold` children succeeded.
    pub fn parallel(label: impl Into<String>, threshold: usize, children: Vec<Node<C>>) -> Self {
        let latched = vec![None; children.len()];
        Self::new(label, NodeKind::Parallel { threshold, latched }, children)
    }

    /// Parallel node requiring every child to succeed.
    pub fn parallel_all(label: impl Into<String>, children: Vec<Node<C>>) -> Self {
        let n = children.len();
        Self::parallel(label, n, children)
    }

    pub fn decorator(decorator: impl Decorator<C> + 'static, child: Node<C>) -> Self {
        let label = decorator.name().to_string();
        Self::new(label, NodeKind::Decorator(Box::new(decorator)), vec![child])
    }

    pub fn condition(condition: impl Condition<C> + 'static) -> Self {
        let label = condition.name().to_string();
        Self::new(label, NodeKind::Condition(Box::new(condition)), Vec::new())
    }

    pub fn action(action: impl Action<C> + 'static) -> Self {
        let label = action.name().to_string();
        Self::new(label, NodeKind::Action(Box::new(action)), Vec::new())
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn children(&self) -> &[Node<C>] {
        &self.children
    }

    pub fn node_type(&self) -> NodeType {
        match self.kind {
            NodeKind::Sequence { .. } => NodeType::Sequence,
            NodeKind::Fallback { .. } => NodeType::Fallback,
            NodeKind::Parallel { .. } => NodeType::Parallel,
            NodeKind::Decorator(_) => NodeType::Decorator,
            NodeKind::Condition(_) => NodeType::Condition,
            NodeKind::Action(_) => NodeType::Action,
        }
    }

    /// Success threshold of a parallel node.
    pub fn parallel_threshold(&self) -> Option<usize> {
        match self.kind {
            NodeKind::Parallel { threshold, .. } => Some(threshold),
            _ => None,
        }
    }

    /// Pre-order traversal.
    pub fn walk(&self) -> Vec<&Node<C>> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(node) = stack.pop() {
            out.push(node);
            stack.extend(node.children.iter().rev());
        }
        out
    }

    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(Node::depth).max().unwrap_or(0)
    }

    fn assign_ids(&mut self, next: &mut usize) {
        self.id = NodeId(*next);
        *next += 1;
        for child in &mut self.children {
            child.assign_ids(next);
        }
    }

    fn validate(&self) -> Result<(), StructureError> {
        let n = self.children.len();
        match &self.kind {
            NodeKind::Decorator(_) if n != 1 => {
                return Err(StructureError::DecoratorArity {
                    label: self.label.clone(),
                    found: n,
                })
            }
            NodeKind::Condition(_) | NodeKind::Action(_) if n != 0 => {
                return Err(StructureError::LeafWithChildren {
                    label: self.label.clone(),
                    found: n,
                })
            }
            NodeKind::Parallel { threshold, .. } if *threshold < 1 || *threshold > n => {
                return Err(StructureError::ParallelThreshold {
                    label: self.label.clone(),
                    threshold: *threshold,
                    children: n,
                })
            }
            _ => {}
        }
        self.children.iter().try_for_each(Node::validate)
    }

    /// Clears the memory of this node and its whole subtree.
    pub fn reset(&mut self) {
        match &mut self.kind {
            NodeKind::Sequence { cursor } | NodeKind::Fallback { cursor } => *cursor = 0,
            NodeKind::Parallel { latched, .. } => latched.iter_mut().for_each(|s| *s = None),
            NodeKind::Decorator(d) => d.reset(),
            NodeKind::Condition(_) => {}
            NodeKind::Action(a) => a.reset(),
        }
        for child in &mut self.children {
            child.reset();
        }
    }

    pub fn tick(&mut self, ctx: &mut C) -> Result<NodeStatus, TickError> {
        let children = &mut self.children;
        let status = match &mut self.kind {
            NodeKind::Sequence { cursor } => loop {
                let Some(child) = children.get_mut(*cursor) else {
                    break NodeStatus::Success;
                };
                match child.tick(ctx)? {
                    NodeStatus::Success => *cursor += 1,
                    other => break other,
                }
            },
            NodeKind::Fallback { cursor } => loop {
                let Some(child) = children.get_mut(*cursor) else {
                    break NodeStatus::Failure;
                };
                match child.tick(ctx)? {
                    NodeStatus::Failure => *cursor += 1,
                    other => break other,
                }
            },
            NodeKind::Parallel { threshold, latched } => {
                for (slot, child) in latched.iter_mut().zip(children.iter_mut()) {
                    if slot.is_none() {
                        let s = child.tick(ctx)?;
                        if s.is_terminal() {
                            *slot = Some(s);
                        }
                    }
                }
                let total = latched.len();
                let succeeded = latched
                    .iter()
                    .filter(|s| **s == Some(NodeStatus::Success))
                    .count();
                let failed = latched
                    .iter()
                    .filter(|s| **s == Some(NodeStatus::Failure))
                    .count();
                if succeeded >= *threshold {
                    NodeStatus::Success
                } else if failed > total - *threshold {
                    NodeStatus::Failure
                } else {
                    NodeStatus::Running
                }
            }
            NodeKind::Decorator(d) => d.tick(ctx, &mut children[0])?,
            NodeKind::Condition(c) => {
                if c.evaluate(ctx)? {
                    NodeStatus::Success
                } else {
                    NodeStatus::Failure
                }
            }
            NodeKind::Action(a) => a.tick(ctx)?,
        };
        if status.is_terminal() {
            self.reset();
        }
        Ok(status)
    }
}

impl<C> fmt::Debug for Node<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = f.debug_struct("Node");
        s.field("id", &self.id.0)
            .field("label", &self.label)
            .field("type", &self.node_type());
        if let Some(t) = self.parallel_threshold() {
            s.field("threshold", &t);
        }
        if !self.children.is_empty() {
            s.field("children", &self.children);
        }
        s.finish()
    }
}

/// A validated, rooted tree with unique node ids assigned in pre-order.
pub struct Tree<C> {
    root: Node<C>,
    size: usize,
    ticks: u64,
}

impl<C> Tree<C> {
    pub fn new(mut root: Node<C>) -> Result<Self, StructureError> {
        root.validate()?;
        let mut next = 0;
        root.assign_ids(&mut next);
        Ok(Tree {
            root,
            size: next,
            ticks: 0,
        })
    }

    pub fn root(&self) -> &Node<C> {
        &self.root
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn ticks(&self) -> u64 {
        self.ticks
    }

    pub fn tick(&mut self, ctx: &mut C) -> Result<NodeStatus, TickError> {
        self.ticks += 1;
        self.root.tick(ctx)
    }

    pub fn reset(&mut self) {
        self.root.reset();
    }

    /// Nodes whose label equals `label`.
    pub fn find(&self, label: &str) -> Vec<&Node<C>> {
        self.root
            .walk()
            .into_iter()
            .filter(|n| n.label == label)
            .collect()
    }
}

impl<C> fmt::Debug for Tree<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}

/// Inverts the terminal status of its child.
pub struct Inverter;

impl<C> Decorator<C> for Inverter {
    fn name(&self) -> &str {
        "Inverter"
    }

    fn tick(&mut self, ctx: &mut C, child: &mut Node<C>) -> Result<NodeStatus, TickError> {
        Ok(match child.tick(ctx)? {
            NodeStatus::Success => NodeStatus::Failure,
            NodeStatus::Failure => NodeStatus::Success,
            NodeStatus::Running => NodeStatus::Running,
        })
    }
}
