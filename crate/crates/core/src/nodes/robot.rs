use serde::{Deserialize, Serialize};

use super::{ActionPhase, RunContext};
use crate::bt::{Action, NodeStatus, TickError};
use crate::cost::Vec3;
use crate::nodes::events::EventKind;

/// Building block of robot behaviours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Primitive {
    Move {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target: Option<Vec3>,
    },
    Grasp {
        close: bool,
    },
    Release,
    SwitchController {
        controller: String,
    },
    Wait,
}

impl Primitive {
    /// Move to the object, close, move to the target, open.
    pub fn move_object() -> Vec<Primitive> {
        vec![
            Primitive::Move { target: None },
            Primitive::Grasp { close: true },
            Primitive::Move { target: None },
            Primitive::Grasp { close: false },
        ]
    }

    /// Grasp, hand over to admittance control while the human works, then
    /// release and restore position control.
    pub fn collaborative_hold() -> Vec<Primitive> {
        vec![
            Primitive::Move { target: None },
            Primitive::Grasp { close: true },
            Primitive::SwitchController {
                controller: "admittance".into(),
            },
            Primitive::Wait,
            Primitive::Release,
            Primitive::SwitchController {
                controller: "position".into(),
            },
        ]
    }
}

/// One primitive to run on behalf of an action.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimitiveCommand<'a> {
    pub robots: &'a [usize],
    pub action: usize,
    pub index: usize,
    pub count: usize,
    pub primitive: &'a Primitive,
    /// Nominal duration of the whole action.
    pub nominal: f64,
    pub action_start: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PrimitiveStatus {
    Running,
    Done,
    Fault(String),
}

/// Executes robot primitives. Must not block.
pub trait ExecutionBackend: Send {
    fn start(&mut self, command: &PrimitiveCommand<'_>, now: f64) -> Result<u64, String>;
    fn poll(&mut self, handle: u64, now: f64) -> PrimitiveStatus;
}

struct RunState {
    robots: Vec<usize>,
    primitives: Vec<Primitive>,
    nominal: f64,
    start: f64,
    index: usize,
    handle: Option<u64>,
}

/// Robot execution of an action as a sequence of primitives.
///
/// The autonomous variant dispatches the action itself. The collaborative
/// variant runs the robot side of an accepted human+robot allocation and
/// succeeds at once if the candidate has no robot.
pub struct RobotAction {
    name: String,
    action: usize,
    collaborative: bool,
    state: Option<RunState>,
}

impl RobotAction {
    pub fn autonomous(action: usize, id: &str) -> Self {
        RobotAction {
            name: format!("RobotAction:{id}"),
            action,
            collaborative: false,
            state: None,
        }
    }

    pub fn collaborative(action: usize, id: &str) -> Self {
        RobotAction {
            name: format!("RobotCollaborativeAction:{id}"),
            action,
            collaborative: true,
            state: None,
        }
    }

    fn begin(&self, ctx: &mut RunContext) -> Result<RunState, TickError> {
        let a = self.action;
        let candidate = ctx.allocation_of(a)?.ok_or_else(|| {
            TickError::fault(&self.name, format!("`{}` has no allocation", ctx.job.action_id(a)))
        })?;
        let members = ctx.job.candidates.get(candidate).members.clone();
        let robots: Vec<usize> = members
            .into_iter()
            .filter(|&m| ctx.job.worker_kind(m) == crate::plan::WorkerKind::Robot)
            .collect();
        let nominal = ctx.job.duration(candidate, a).unwrap_or(0.0);
        let now = ctx.now;
        let plan_action = &ctx.job.plan.actions[a];
        let primitives = match (&plan_action.primitives, self.collaborative) {
            (Some(p), false) => p.clone(),
            (_, true) => Primitive::collaborative_hold(),
            (None, false) => Primitive::move_object(),
        };
        for &r in &robots {
            ctx.agents[r].engage(a, nominal);
            ctx.agents[r].busy_since = Some(now);
        }
        if !self.collaborative {
            ctx.view_mut()?.acts_to_be_allocated.remove(&a);
            ctx.phases[a] = ActionPhase::Executing;
            ctx.starts[a] = Some(now);
            let candidate = ctx.job.candidates.get(candidate).name.clone();
            let action = ctx.job.action_id(a).to_string();
            ctx.emit(EventKind::ActionStarted { action, candidate });
        }
        Ok(RunState {
            robots,
            primitives,
            nominal,
            start: now,
            index: 0,
            handle: None,
        })
    }
}

impl Action<RunContext> for RobotAction {
    fn name(&self) -> &str {
        &self.name
    }

    fn tick(&mut self, ctx: &mut RunContext) -> Result<NodeStatus, TickError> {
        if self.state.is_none() {
            self.state = Some(self.begin(ctx)?);
        }
        let state = self.state.as_mut().expect("initialized above");
        if state.robots.is_empty() {
            return Ok(NodeStatus::Success);
        }
        loop {
            if state.index == state.primitives.len() {
                for &r in &state.robots {
                    ctx.agents[r].release();
                }
                return Ok(NodeStatus::Success);
            }
            let handle = match state.handle {
                Some(h) => h,
                None => {
                    let command = PrimitiveCommand {
                        robots: &state.robots,
                        action: self.action,
                        index: state.index,
                        count: state.primitives.len(),
                        primitive: &state.primitives[state.index],
                        nominal: state.nominal,
                        action_start: state.start,
                    };
                    match ctx.backend.start(&command, ctx.now) {
                        Ok(h) => {
                            state.handle = Some(h);
                            h
                        }
                        Err(message) => return Ok(fault(ctx, state, self.action, message)),
                    }
                }
            };
            match ctx.backend.poll(handle, ctx.now) {
                PrimitiveStatus::Running => return Ok(NodeStatus::Running),
                PrimitiveStatus::Done => {
                    state.index += 1;
                    state.handle = None;
                }
                PrimitiveStatus::Fault(message) => return Ok(fault(ctx, state, self.action, message)),
            }
        }
    }

    fn reset(&mut self) {
        self.state = None;
    }
}

fn fault(ctx: &mut RunContext, state: &RunState, action: usize, message: String) -> NodeStatus {
    for &r in &state.robots {
        ctx.agents[r].release();
    }
    let message = format!(
        "primitive {} of `{}` failed: {message}",
        state.index,
        ctx.job.action_id(action)
    );
    ctx.emit(EventKind::Fault { message });
    NodeStatus::Failure
}
