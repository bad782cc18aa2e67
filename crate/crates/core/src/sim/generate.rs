use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::plan::{JobPlan, PlanAction, PlanNode, WorkerKind, WorkerSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    /// All actions in one sequence.
    Series,
    /// All actions in one parallel group.
    Parallel,
}

impl std::str::FromStr for Topology {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "series" => Ok(Topology::Series),
            "parallel" => Ok(Topology::Parallel),
            _ => Err(format!("unknown topology `{s}` (expected series or parallel)")),
        }
    }
}

pub const SYNTHETIC_COST_RANGE: std::ops::RangeInclusive<u32> = 5..=50;

/// Synthetic job over `agents` robots `r1..rN`: every action is
/// collaborative-enabled and every single worker and pair gets an
/// independent integer cost.
pub fn generate_plan(topology: Topology, actions: usize, agents: usize, seed: u64) -> JobPlan {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let workers: Vec<WorkerSpec> = (1..=agents)
        .map(|i| WorkerSpec {
            id: format!("r{i}"),
            kind: WorkerKind::Robot,
            position: None,
        })
        .collect();
    let mut keys: Vec<String> = workers.iter().map(|w| w.id.clone()).collect();
    for i in 0..agents {
        for j in i + 1..agents {
            keys.push(format!("{}+{}", workers[i].id, workers[j].id));
        }
    }
    let plan_actions: Vec<PlanAction> = (1..=actions)
        .map(|j| {
            let costs: BTreeMap<String, f64> = keys
                .iter()
                .map(|k| (k.clone(), rng.gen_range(SYNTHETIC_COST_RANGE) as f64))
                .collect();
            PlanAction {
                id: format!("a{j}"),
                label: String::new(),
                costs,
                c_init: None,
                collaborative: agents > 1,
                position: None,
                primitives: None,
            }
        })
        .collect();
    let ids: Vec<PlanNode> = plan_actions.iter().map(|a| PlanNode::action(&a.id)).collect();
    let structure = match topology {
        Topology::Series => PlanNode::seq(ids),
        Topology::Parallel => PlanNode::par(ids),
    };
    JobPlan {
        name: format!("{topology:?}-{actions}x{agents}").to_lowercase(),
        workers,
        actions: plan_actions,
        structure,
    }
}
