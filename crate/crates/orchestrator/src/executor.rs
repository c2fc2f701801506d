//! Sequential plan execution with precondition gating, effect verification,
//! and retries.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use sceneplan_core::csg::ContinuousSceneGraph;
use sceneplan_core::layer::Layer;
use sceneplan_core::pipeline::Pipeline;

use crate::client::{BankClient, ClientError};
use crate::schedule::{ClassTriplet, ExecutionPlan, PlanStep};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepOutcome {
    /// Executed and the expected effects committed; `retries` additional
    /// attempts were needed.
    Executed { retries: u32 },
    /// Preconditions not present in the live graph; the plan moved on.
    SkippedPreconditions,
    /// Effects never committed within the retry budget.
    FailedAfterRetries { attempts: u32 },
    /// No policy mapped (or the server does not provide it).
    UnmappedSkill,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StepReport {
    pub policy: Option<String>,
    pub outcome: StepOutcome,
    pub frames_ingested: u64,
    pub elapsed_ms: u64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ExecutionReport {
    pub steps: Vec<StepReport>,
    /// Set when a transport failure aborted the plan; `steps` then covers
    /// only the completed prefix.
    pub transport_error: Option<String>,
}

impl ExecutionReport {
    pub fn executed_count(&self) -> usize {
        self.steps.iter().filter(|s| matches!(s.outcome, StepOutcome::Executed { .. })).count()
    }

    /// Human-readable per-step summary.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for (i, step) in self.steps.iter().enumerate() {
            let policy = step.policy.as_deref().unwrap_or("<unmapped>");
            let outcome = match &step.outcome {
                StepOutcome::Executed { retries: 0 } => "executed".to_string(),
                StepOutcome::Executed { retries } => format!("executed after {retries} retries"),
                StepOutcome::SkippedPreconditions => "skipped (preconditions)".to_string(),
                StepOutcome::FailedAfterRetries { attempts } => {
                    format!("failed after {attempts} attempts")
                }
                StepOutcome::UnmappedSkill => "unmapped".to_string(),
            };
            out.push_str(&format!(
                "step {:>2}: {:<14} {} ({} frames, {} ms)\n",
                i + 1,
                policy,
                outcome,
                step.frames_ingested,
                step.elapsed_ms
            ));
        }
        if let Some(err) = &self.transport_error {
            out.push_str(&format!("aborted: {err}\n"));
        }
        out
    }
}

/// True when every triplet is committed (at the current timestamp) on the
/// functional or topological layer, grounded by class.
///
/// A graph that has not observed any frame yet cannot refute anything: the
/// check passes vacuously so the first policy can run and start the
/// observation stream.
pub fn check_preconditions(graph: &ContinuousSceneGraph, triplets: &[ClassTriplet]) -> bool {
    if graph.current_timestamp().is_none() {
        return true;
    }
    triplets.iter().all(|t| relation_committed(graph, t))
}

/// True when a class-grounded relation is committed at the graph's current
/// timestamp on the functional or topological layer. False on an empty
/// graph.
pub fn relation_committed(graph: &ContinuousSceneGraph, triplet: &ClassTriplet) -> bool {
    let Some(t) = graph.current_timestamp() else {
        return false;
    };
    for layer in [Layer::Functional, Layer::Topological] {
        let Ok(relations) = graph.relations_at_ids(layer, t) else {
            continue;
        };
        for (subject, object, pred) in relations {
            if graph.resolve(pred) == triplet.predicate
                && graph.node(subject).map(|n| n.class_label.as_str()) == Some(&triplet.subject)
                && graph.node(object).map(|n| n.class_label.as_str()) == Some(&triplet.object)
            {
                return true;
            }
        }
    }
    false
}

/// Runs the plan strictly sequentially. Per step: gate on preconditions,
/// execute the policy while ingesting its frame stream into the live graph,
/// verify the expected effects, and retry up to the step's budget. Outcomes
/// depend only on effect verification, never on elapsed frames.
pub fn execute_plan<R: BufRead, W: Write>(
    plan: &ExecutionPlan,
    client: &mut BankClient<R, W>,
    pipeline: &mut Pipeline,
) -> ExecutionReport {
    execute_plan_with_hook(plan, client, pipeline, |_, _| {})
}

/// `execute_plan` with a post-step callback (step index, live pipeline),
/// used by evaluation to snapshot world beliefs between steps.
pub fn execute_plan_with_hook<R, W, H>(
    plan: &ExecutionPlan,
    client: &mut BankClient<R, W>,
    pipeline: &mut Pipeline,
    mut after_step: H,
) -> ExecutionReport
where
    R: BufRead,
    W: Write,
    H: FnMut(usize, &Pipeline),
{
    let mut report = ExecutionReport::default();

    let available: BTreeSet<String> = match client.list_policies() {
        Ok(names) => names.into_iter().collect(),
        Err(e) => {
            report.transport_error = Some(e.to_string());
            return report;
        }
    };

    for (index, step) in plan.steps.iter().enumerate() {
        let started = Instant::now();
        let mut frames_ingested = 0u64;
        let outcome = match &step.policy {
            Some(policy) if available.contains(policy) => {
                if !check_preconditions(pipeline.graph(), &step.preconditions) {
                    StepOutcome::SkippedPreconditions
                } else {
                    match run_with_retries(step, policy, client, pipeline, &mut frames_ingested) {
                        Ok(outcome) => outcome,
                        Err(e) => {
                            report.transport_error = Some(e.to_string());
                            report.steps.push(StepReport {
                                policy: step.policy.clone(),
                                outcome: StepOutcome::FailedAfterRetries { attempts: 0 },
                                frames_ingested,
                                elapsed_ms: started.elapsed().as_millis() as u64,
                            });
                            return report;
                        }
                    }
                }
            }
            _ => StepOutcome::UnmappedSkill,
        };
        report.steps.push(StepReport {
            policy: step.policy.clone(),
            outcome,
            frames_ingested,
            elapsed_ms: started.elapsed().as_millis() as u64,
        });
        after_step(index, pipeline);
    }
    report
}

fn run_with_retries<R: BufRead, W: Write>(
    step: &PlanStep,
    policy: &str,
    client: &mut BankClient<R, W>,
    pipeline: &mut Pipeline,
    frames_ingested: &mut u64,
) -> Result<StepOutcome, ClientError> {
    let mut attempts = 0u32;
    loop {
        let result = client.execute(policy, |frame| {
            *frames_ingested += 1;
            pipeline.ingest_frame(&frame).map_err(|e| e.to_string())
        });
        match result {
            Ok(_signal) => {}
            Err(ClientError::Server(message)) => {
                // The server refused the policy (e.g. unknown at runtime).
                log::warn!("policy {policy}: {message}");
                return Ok(StepOutcome::UnmappedSkill);
            }
            Err(e) => return Err(e),
        }
        // Outcome is decided by the graph, not by the server's signal.
        if step.verify.iter().all(|t| relation_committed(pipeline.graph(), t)) {
            return Ok(StepOutcome::Executed { retries: attempts });
        }
        attempts += 1;
        if attempts > step.max_retries {
            return Ok(StepOutcome::FailedAfterRetries { attempts });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use sceneplan_bank::{spawn_duplex, WorldConfig};
    use sceneplan_core::layer::Lexicon;
    use sceneplan_core::pipeline::RelationSource;
    use sceneplan_core::RunConfig;

    use crate::schedule::StepKind;

    fn live_pipeline() -> Pipeline {
        Pipeline::new(RunConfig::default(), Lexicon::default_indoor(), RelationSource::Derived, false)
    }

    fn triplet(s: &str, p: &str, o: &str) -> ClassTriplet {
        ClassTriplet { subject: s.into(), predicate: p.into(), object: o.into() }
    }

    fn step(policy: &str, pre: Vec<ClassTriplet>, verify: Vec<ClassTriplet>, retries: u32) -> PlanStep {
        PlanStep {
            policy: Some(policy.into()),
            kind: StepKind::Pick,
            preconditions: pre,
            verify,
            max_retries: retries,
            action_index: 0,
        }
    }

    fn deterministic_config() -> WorldConfig {
        let mut config = WorldConfig::default();
        for policy in &mut config.policies {
            policy.success_probability = 1.0;
        }
        config
    }

    #[test]
    fn empty_graph_passes_preconditions_vacuously() {
        let pipeline = live_pipeline();
        assert!(check_preconditions(pipeline.graph(), &[triplet("knife", "above", "plate")]));
    }

    #[test]
    fn pick_executes_and_verifies_the_grip() {
        let (tx, rx) = spawn_duplex(deterministic_config());
        let mut client = BankClient::from_parts(rx, tx);
        let mut pipeline = live_pipeline();
        let plan = ExecutionPlan {
            steps: vec![step(
                "pick_knife",
                vec![triplet("knife", "above", "plate")],
                vec![triplet("hand", "holding", "knife")],
                0,
            )],
        };
        let report = execute_plan(&plan, &mut client, &mut pipeline);
        assert_eq!(report.steps.len(), 1);
        assert_eq!(report.steps[0].outcome, StepOutcome::Executed { retries: 0 });
        assert_eq!(report.steps[0].frames_ingested, 30);
        assert!(report.transport_error.is_none());
    }

    #[test]
    fn unsatisfied_preconditions_skip_and_continue() {
        let (tx, rx) = spawn_duplex(deterministic_config());
        let mut client = BankClient::from_parts(rx, tx);
        let mut pipeline = live_pipeline();
        let plan = ExecutionPlan {
            steps: vec![
                // Executes: cold start is vacuous.
                step("pick_knife", vec![], vec![triplet("hand", "holding", "knife")], 0),
                // Now the graph is warm and refutes this.
                step("pick_fork", vec![triplet("fork", "inside", "plate")], vec![], 0),
                // Still reached: the plan continues after a skip.
                step("place_right", vec![], vec![triplet("knife", "right_of", "plate")], 0),
            ],
        };
        let report = execute_plan(&plan, &mut client, &mut pipeline);
        assert_eq!(report.steps.len(), 3);
        assert_eq!(report.steps[1].outcome, StepOutcome::SkippedPreconditions);
        assert_eq!(report.steps[2].outcome, StepOutcome::Executed { retries: 0 });
    }

    #[test]
    fn failing_policy_retries_then_succeeds() {
        // Find a seed where the first pick_fork draw (p = 0.6) fails and the
        // second succeeds: the step must report exactly one retry.
        for seed in 0..64u64 {
            let config = WorldConfig { seed, ..WorldConfig::default() };
            let (tx, rx) = spawn_duplex(config);
            let mut client = BankClient::from_parts(rx, tx);
            let mut pipeline = live_pipeline();
            let plan = ExecutionPlan {
                steps: vec![step("pick_fork", vec![], vec![triplet("hand", "holding", "fork")], 3)],
            };
            let report = execute_plan(&plan, &mut client, &mut pipeline);
            match report.steps[0].outcome {
                StepOutcome::Executed { retries: 0 } => continue,
                StepOutcome::Executed { retries: 1 } => return, // fail once, then succeed
                StepOutcome::Executed { retries: _ } | StepOutcome::FailedAfterRetries { .. } => {
                    continue
                }
                ref other => panic!("unexpected outcome {other:?}"),
            }
        }
        panic!("no seed in 0..64 produced a single-retry execution");
    }

    #[test]
    fn impossible_verification_fails_after_budget() {
        let (tx, rx) = spawn_duplex(deterministic_config());
        let mut client = BankClient::from_parts(rx, tx);
        let mut pipeline = live_pipeline();
        let plan = ExecutionPlan {
            steps: vec![step("pick_knife", vec![], vec![triplet("knife", "below", "plate")], 2)],
        };
        let report = execute_plan(&plan, &mut client, &mut pipeline);
        assert_eq!(report.steps[0].outcome, StepOutcome::FailedAfterRetries { attempts: 3 });
    }

    #[test]
    fn unmapped_and_unknown_policies_are_reported_not_fatal() {
        let (tx, rx) = spawn_duplex(deterministic_config());
        let mut client = BankClient::from_parts(rx, tx);
        let mut pipeline = live_pipeline();
        let mut placeholder = step("whatever", vec![], vec![], 0);
        placeholder.policy = None;
        let plan = ExecutionPlan {
            steps: vec![
                placeholder,
                step("teleport", vec![], vec![], 0),
                step("pick_knife", vec![], vec![triplet("hand", "holding", "knife")], 0),
            ],
        };
        let report = execute_plan(&plan, &mut client, &mut pipeline);
        assert_eq!(report.steps[0].outcome, StepOutcome::UnmappedSkill);
        assert_eq!(report.steps[1].outcome, StepOutcome::UnmappedSkill);
        assert_eq!(report.steps[2].outcome, StepOutcome::Executed { retries: 0 });
    }

    #[test]
    fn regrounding_matches_by_class_not_by_track_id() {
        use sceneplan_core::frame::{Detection, Frame};
        use sceneplan_core::geometry::BBox;
        // The demonstration knew knife id 3; at execution time the knife is
        // a different track. Class-level grounding still matches.
        let mut pipeline = live_pipeline();
        let frame = Frame::new(
            0,
            vec![
                Detection::new(BBox::centered(0.5, 0.55, 0.2, 0.2), "plate", 0.9),
                Detection::new(BBox::centered(0.2, 0.55, 0.1, 0.2), "knife", 0.9),
            ],
        );
        pipeline.ingest_frame(&frame).unwrap();
        assert!(check_preconditions(pipeline.graph(), &[triplet("knife", "left_of", "plate")]));
        assert!(!check_preconditions(pipeline.graph(), &[triplet("knife", "right_of", "plate")]));
    }

    #[test]
    fn outcome_is_independent_of_policy_duration() {
        for duration in [12u32, 60] {
            let mut config = deterministic_config();
            for policy in &mut config.policies {
                policy.duration = duration;
            }
            let (tx, rx) = spawn_duplex(config);
            let mut client = BankClient::from_parts(rx, tx);
            let mut pipeline = live_pipeline();
            let plan = ExecutionPlan {
                steps: vec![step("pick_knife", vec![], vec![triplet("hand", "holding", "knife")], 0)],
            };
            let report = execute_plan(&plan, &mut client, &mut pipeline);
            assert_eq!(
                report.steps[0].outcome,
                StepOutcome::Executed { retries: 0 },
                "duration {duration}"
            );
        }
    }

    #[test]
    fn transport_failure_aborts_with_partial_report() {
        use std::io::Write as _;
        let (mut tx, rx) = spawn_duplex(deterministic_config());
        // Poison the session: a malformed line makes the server answer an
        // error and close the connection.
        tx.write_all(b"not json\n").unwrap();
        let mut client = BankClient::from_parts(rx, tx);
        let mut pipeline = live_pipeline();
        let plan = ExecutionPlan {
            steps: vec![step("pick_knife", vec![], vec![triplet("hand", "holding", "knife")], 0)],
        };
        let report = execute_plan(&plan, &mut client, &mut pipeline);
        assert!(report.transport_error.is_some());
        assert!(report.steps.is_empty(), "no step completed");
    }
}
