//! Simulated policy bank: a tabletop world served over a synchronous wire
//! protocol, plus the demonstration generator that produces learning input.

pub mod demo;
pub mod policy;
pub mod proto;
pub mod server;
pub mod world;

pub use demo::{generate_demonstration, sample_script, DemoConfig, ScriptStep};
pub use policy::{default_policies, FailureMode, PolicyKind, PolicySpec};
pub use proto::{Request, Response};
pub use server::{serve, spawn_duplex, spawn_tcp, WorldConfig};
pub use world::{SpatialGoal, WorldState};
