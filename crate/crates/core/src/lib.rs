//! Task planning and dynamic role allocation for mixed human-robot teams.
//!
//! A job plan compiles into a behavior tree whose allocation nodes re-solve a
//! binary assignment program on every tick, negotiate allocations with human
//! workers, and dispatch robot actions.

pub mod alloc;
pub mod bt;
pub mod cost;
pub mod nodes;
pub mod par;
pub mod plan;
pub mod reference;
pub mod sim;
