use super::{ActionPhase, RunContext};
use crate::bt::{Decorator, Node, NodeStatus, TickError};
use crate::nodes::events::EventKind;

/// Registers its action for allocation and runs the helper subtree once the
/// allocated workers can take it.
pub struct AllocatorManager {
    name: String,
    action: usize,
}

impl AllocatorManager {
    pub fn new(action: usize, id: &str) -> Self {
        AllocatorManager {
            name: format!("AM:{id}"),
            action,
        }
    }

    /// Allocated to workers that are free, or already engaged on this action.
    fn allocated(&self, ctx: &RunContext) -> Result<bool, TickError> {
        let Some(candidate) = ctx.allocation_of(self.action)? else {
            return Ok(false);
        };
        let members = ctx.members(candidate);
        let free = members.iter().all(|&m| ctx.agents[m].available);
        let ours = members
            .iter()
            .all(|&m| ctx.agents[m].busy_action == Some(self.action));
        Ok(free || ours)
    }

    fn complete(&self, ctx: &mut RunContext) -> Result<(), TickError> {
        let a = self.action;
        let candidate = ctx.view_mut()?.current_allocation.remove(&a);
        for agent in ctx.agents.iter_mut().filter(|w| w.busy_action == Some(a)) {
            agent.release();
        }
        ctx.phases[a] = ActionPhase::Completed;
        let start = ctx.starts[a].unwrap_or(ctx.now);
        let candidate = candidate.map_or_else(String::new, |c| ctx.candidate_name(c).to_string());
        let action = ctx.job.action_id(a).to_string();
        ctx.emit(EventKind::ActionFinished {
            action,
            candidate,
            start,
        });
        Ok(())
    }
}

impl Decorator<RunContext> for AllocatorManager {
    fn name(&self) -> &str {
        &self.name
    }

    fn tick(&mut self, ctx: &mut RunContext, child: &mut Node<RunContext>) -> Result<NodeStatus, TickError> {
        let a = self.action;
        match ctx.phases[a] {
            ActionPhase::Completed => return Ok(NodeStatus::Success),
            ActionPhase::Idle => {
                ctx.phases[a] = ActionPhase::Pending;
                ctx.view_mut()?.acts_to_be_allocated.insert(a);
                let action = ctx.job.action_id(a).to_string();
                ctx.emit(EventKind::ActionRegistered { action });
            }
            _ => {}
        }
        // Humans confirmed early are released while collaborating robots still run.
        if ctx.phases[a] != ActionPhase::Executing && !self.allocated(ctx)? {
            return Ok(NodeStatus::Running);
        }
        match child.tick(ctx)? {
            NodeStatus::Success => {
                if ctx.view_mut()?.actions_rejected.remove(&a) {
                    Ok(NodeStatus::Running)
                } else {
                    self.complete(ctx)?;
                    Ok(NodeStatus::Success)
                }
            }
            NodeStatus::Failure => {
                ctx.emit(EventKind::Fault {
                    message: format!("action `{}` failed", ctx.job.action_id(a)),
                });
                Ok(NodeStatus::Failure)
            }
            NodeStatus::Running => Ok(NodeStatus::Running),
        }
    }
}
