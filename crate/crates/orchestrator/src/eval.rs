//! Chain evaluation: demonstrate, learn, execute, and score random
//! pick-and-place tasks end to end against an in-process server.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use sceneplan_bank::demo::{generate_demonstration, sample_script, DemoConfig, ScriptStep};
use sceneplan_bank::server::{spawn_duplex, WorldConfig};
use sceneplan_core::action::GroundedAction;
use sceneplan_core::layer::Lexicon;
use sceneplan_core::pipeline::{Pipeline, RelationSource};
use sceneplan_core::RunConfig;

use crate::client::BankClient;
use crate::executor::{execute_plan_with_hook, relation_committed};
use crate::schedule::{build_schedule, ClassTriplet};
use crate::skills::SkillMap;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Skills per task (pick-and-places in a row).
    pub chain_length: usize,
    /// Sampled tasks.
    pub episodes: usize,
    /// Retry budget per step (0 disables the fallback).
    pub max_retries: u32,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub chain_length: usize,
    pub episodes: usize,
    pub seed: u64,
    pub max_retries: u32,
    /// Fraction of episodes whose learned schedule equals the script
    /// exactly (objects, targets, and order).
    pub action_accuracy: f64,
    /// Mean fraction of skills whose object held its demonstrated target
    /// relation once the skill's steps finished.
    pub task_success: f64,
    /// Fraction of episodes where every skill succeeded.
    pub strict_task_success: f64,
}

/// (object class, effect predicate) pairs recovered from learned actions.
fn schedule_of(actions: &[GroundedAction]) -> Vec<(String, String)> {
    actions
        .iter()
        .filter_map(|a| {
            let mut effects = a.effects.iter();
            let first = effects.next()?;
            if effects.next().is_some() {
                return None; // ambiguous effect set never matches a script step
            }
            Some((a.trigger.object.class.clone(), first.predicate.clone()))
        })
        .collect()
}

fn matches_script(actions: &[GroundedAction], script: &[ScriptStep]) -> bool {
    let learned = schedule_of(actions);
    learned.len() == script.len()
        && learned
            .iter()
            .zip(script)
            .all(|((class, pred), step)| *class == step.object && *pred == step.target)
}

/// Runs one episode; returns (schedule recovered exactly, per-skill success).
fn run_episode(
    script: &[ScriptStep],
    episode_seed: u64,
    world_config: &WorldConfig,
    run: &RunConfig,
    max_retries: u32,
) -> (bool, Vec<bool>) {
    // Demonstrate and learn.
    let demo_config = DemoConfig { seed: episode_seed, ..DemoConfig::default() };
    let frames = generate_demonstration(&world_config.world, script, &demo_config)
        .expect("scripts from the sampler are always valid");
    let mut learner = Pipeline::new(run.clone(), Lexicon::default_indoor(), RelationSource::Derived, true);
    for frame in &frames {
        if learner.ingest_frame(frame).is_err() {
            return (false, vec![false; script.len()]);
        }
    }
    let (_, actions) = learner.into_parts();
    let accurate = matches_script(&actions, script);

    // Execute against a fresh world.
    let mut episode_world = world_config.clone();
    episode_world.seed = episode_seed ^ 0xA5A5_5A5A;
    let (tx, rx) = spawn_duplex(episode_world);
    let mut client = BankClient::from_parts(rx, tx);
    let mut live = Pipeline::new(run.clone(), Lexicon::default_indoor(), RelationSource::Derived, false);
    let plan = build_schedule(&actions, &SkillMap::default_scenario(), max_retries);

    // Last plan step of each action, for post-skill measurement.
    let mut last_step_of_action = vec![usize::MAX; actions.len()];
    for (i, step) in plan.steps.iter().enumerate() {
        last_step_of_action[step.action_index] = i;
    }
    let mut skill_success = vec![false; script.len()];
    execute_plan_with_hook(&plan, &mut client, &mut live, |step_index, pipeline| {
        for (action_index, &last) in last_step_of_action.iter().enumerate() {
            if last == step_index && action_index < script.len() {
                let step = &script[action_index];
                let goal = ClassTriplet {
                    subject: step.object.clone(),
                    predicate: step.target.clone(),
                    object: "plate".to_string(),
                };
                skill_success[action_index] = relation_committed(pipeline.graph(), &goal);
            }
        }
    });
    (accurate, skill_success)
}

/// Samples `episodes` random tasks of `chain_length` skills, runs
/// demonstrate-learn-execute for each, and aggregates the scores.
pub fn eval_chain(config: &EvalConfig, world_config: &WorldConfig, run: &RunConfig) -> EvalOutcome {
    let mut accurate_episodes = 0usize;
    let mut skill_successes = 0usize;
    let mut strict_episodes = 0usize;
    let mut total_skills = 0usize;

    for episode in 0..config.episodes {
        let episode_seed =
            config.seed.wrapping_add((episode as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut rng = ChaCha8Rng::seed_from_u64(episode_seed);
        let script = sample_script(&world_config.world, config.chain_length, &mut rng);
        let (accurate, skills) =
            run_episode(&script, episode_seed, world_config, run, config.max_retries);
        accurate_episodes += accurate as usize;
        let succeeded = skills.iter().filter(|s| **s).count();
        skill_successes += succeeded;
        total_skills += skills.len();
        strict_episodes += (succeeded == skills.len()) as usize;
        if (episode + 1) % 1000 == 0 {
            log::info!("episode {}/{}", episode + 1, config.episodes);
        }
    }

    EvalOutcome {
        chain_length: config.chain_length,
        episodes: config.episodes,
        seed: config.seed,
        max_retries: config.max_retries,
        action_accuracy: accurate_episodes as f64 / config.episodes.max(1) as f64,
        task_success: skill_successes as f64 / total_skills.max(1) as f64,
        strict_task_success: strict_episodes as f64 / config.episodes.max(1) as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_policies_solve_every_episode() {
        let mut world_config = WorldConfig::default();
        for policy in &mut world_config.policies {
            policy.success_probability = 1.0;
        }
        let config = EvalConfig { chain_length: 2, episodes: 10, max_retries: 0, seed: 7 };
        let outcome = eval_chain(&config, &world_config, &RunConfig::default());
        assert_eq!(outcome.action_accuracy, 1.0);
        assert_eq!(outcome.task_success, 1.0);
        assert_eq!(outcome.strict_task_success, 1.0);
    }

    #[test]
    fn imperfect_picks_lower_task_success_but_not_accuracy() {
        let world_config = WorldConfig::default(); // default pick rates
        let config = EvalConfig { chain_length: 2, episodes: 60, max_retries: 0, seed: 11 };
        let outcome = eval_chain(&config, &world_config, &RunConfig::default());
        assert_eq!(outcome.action_accuracy, 1.0);
        assert!(outcome.task_success < 0.95, "{}", outcome.task_success);
        assert!(outcome.task_success > 0.4, "{}", outcome.task_success);
    }

    #[test]
    fn retries_improve_task_success() {
        let world_config = WorldConfig::default();
        let without = eval_chain(
            &EvalConfig { chain_length: 2, episodes: 40, max_retries: 0, seed: 3 },
            &world_config,
            &RunConfig::default(),
        );
        let with = eval_chain(
            &EvalConfig { chain_length: 2, episodes: 40, max_retries: 3, seed: 3 },
            &world_config,
            &RunConfig::default(),
        );
        assert!(
            with.task_success >= without.task_success,
            "retries {} vs none {}",
            with.task_success,
            without.task_success
        );
    }
}
