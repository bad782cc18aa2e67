use std::time::Instant;

use super::{ActionPhase, RunContext, Variant};
use crate::alloc::{solve, CandidateId};
use crate::bt::{Decorator, Node, NodeStatus, TickError};
use crate::cost::BusyState;
use crate::nodes::events::EventKind;

/// Root decorator: re-solves the allocation of every pending action on each
/// tick, then ticks the task structure.
#[derive(Default)]
pub struct RoleAllocator {
    last: Vec<(usize, CandidateId)>,
}

impl RoleAllocator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Actions to solve this tick. Actions under negotiation keep their
    /// allocation until the humans answer.
    fn to_solve(ctx: &RunContext) -> Result<Vec<usize>, TickError> {
        let pending: Vec<usize> = ctx
            .view()?
            .acts_to_be_allocated
            .iter()
            .copied()
            .filter(|&a| ctx.phases[a] == ActionPhase::Pending)
            .collect();
        if !ctx.agents.iter().any(|w| w.available) {
            return Ok(Vec::new());
        }
        // The single-task baseline allocates a batch only once the whole team
        // is idle.
        if ctx.variant == Variant::CoopSt && !ctx.agents.iter().all(|w| w.available) {
            return Ok(Vec::new());
        }
        Ok(pending)
    }

    fn allocate(&mut self, ctx: &mut RunContext, actions: &[usize]) -> Result<(), TickError> {
        let started = Instant::now();
        let xi: Vec<f64> = ctx
            .agents
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let busy = (!w.available).then(|| BusyState {
                    nominal: w.busy_nominal.unwrap_or(0.0),
                    elapsed: w.busy_since.map_or(0.0, |s| ctx.now - s),
                });
                ctx.costs.worker_availability(i, busy)
            })
            .collect();
        let outcome = ctx
            .costs
            .problem(&ctx.job, ctx.variant.mode(), actions, &xi)
            .and_then(|p| solve(&p.with_count_rule(ctx.count_rule)));
        let solution = match outcome {
            Ok(s) => s,
            Err(e) => {
                let message = e.to_string();
                ctx.emit(EventKind::Fault {
                    message: message.clone(),
                });
                return Err(TickError::fault("RoleAllocator", message));
            }
        };
        let elapsed = started.elapsed();
        ctx.solver.record(elapsed, &solution.stats);

        let mut assignment: Vec<(usize, CandidateId)> = solution
            .assignment
            .iter()
            .map(|&(c, i)| (actions[i], c))
            .collect();
        assignment.sort();
        let view = ctx.view_mut()?;
        for a in actions {
            view.current_allocation.remove(a);
        }
        view.current_allocation.extend(assignment.iter().copied());
        if assignment != self.last {
            let pairs = assignment
                .iter()
                .map(|&(a, c)| [ctx.candidate_name(c).to_string(), ctx.job.action_id(a).to_string()])
                .collect();
            let actions = actions.iter().map(|&a| ctx.job.action_id(a).to_string()).collect();
            ctx.emit(EventKind::Allocated {
                actions,
                assignment: pairs,
                objective: solution.objective,
                solve_us: elapsed.as_micros() as u64,
            });
            self.last = assignment;
        }
        Ok(())
    }
}

impl Decorator<RunContext> for RoleAllocator {
    fn name(&self) -> &str {
        "RoleAllocator"
    }

    fn tick(&mut self, ctx: &mut RunContext, child: &mut Node<RunContext>) -> Result<NodeStatus, TickError> {
        let actions = Self::to_solve(ctx)?;
        if !actions.is_empty() {
            self.allocate(ctx, &actions)?;
        }
        child.tick(ctx)
    }

    fn reset(&mut self) {
        self.last.clear();
    }
}
