//! Phase II: mapping learned actions to policies and executing them,
//! gated and verified against the live scene graph.

pub mod client;
pub mod eval;
pub mod executor;
pub mod schedule;
pub mod skills;

pub use client::{BankClient, ClientError};
pub use eval::{eval_chain, EvalConfig, EvalOutcome};
pub use executor::{check_preconditions, execute_plan, ExecutionReport, StepOutcome};
pub use schedule::{build_schedule, ClassTriplet, ExecutionPlan, PlanStep, StepKind};
pub use skills::SkillMap;
