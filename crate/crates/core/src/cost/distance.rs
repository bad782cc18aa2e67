use serde::{Deserialize, Serialize};

pub type Vec3 = [f64; 3];

pub fn norm(a: Vec3, b: Vec3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceGains {
    pub beta: f64,
    pub gamma: f64,
    /// Guard against division by zero, meters.
    pub epsilon: f64,
}

impl Default for DistanceGains {
    fn default() -> Self {
        DistanceGains {
            beta: 20.0,
            gamma: 35.0,
            epsilon: 1e-3,
        }
    }
}

/// Who a distance-augmented cost is computed for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistanceRole {
    Human,
    /// Robot alone; argument is the human-to-action distance.
    Robot { human_to_action: f64 },
    /// Human and robot together; argument is the human-to-robot distance.
    Collaboration { human_to_robot: f64 },
}

pub fn distance_cost(c_init: f64, role: DistanceRole, gains: DistanceGains) -> f64 {
    match role {
        DistanceRole::Human => c_init,
        DistanceRole::Robot { human_to_action } => c_init + gains.beta / (human_to_action + gains.epsilon),
        DistanceRole::Collaboration { human_to_robot } => c_init + gains.gamma * human_to_robot,
    }
}
