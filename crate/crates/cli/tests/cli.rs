//! End-to-end checks of the command-line surface: artifacts, determinism,
//! and exit codes.

use std::path::Path;
use std::process::Command;

fn sceneplan() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sceneplan"))
}

fn write(path: &Path, content: &str) {
    std::fs::write(path, content).unwrap();
}

#[test]
fn simulate_learn_mine_replay_produce_consistent_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("script.json");
    write(
        &script,
        r#"[{"object":"knife","target":"right_of"},{"object":"fork","target":"left_of"}]"#,
    );
    let demo = dir.path().join("demo.jsonl");

    let status = sceneplan()
        .args(["simulate"])
        .arg(&script)
        .arg("-o")
        .arg(&demo)
        .args(["--seed", "11"])
        .status()
        .unwrap();
    assert!(status.success());

    let domain = dir.path().join("domain.pddl");
    let actions = dir.path().join("actions.jsonl");
    let learn = |domain: &Path, actions: &Path| {
        sceneplan()
            .args(["learn"])
            .arg(&demo)
            .arg("--qsr")
            .arg("-o")
            .arg(domain)
            .arg("--actions")
            .arg(actions)
            .output()
            .unwrap()
    };
    let output = learn(&domain, &actions);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    assert!(String::from_utf8_lossy(&output.stdout).contains("2 actions"));

    // Same input, same config: byte-identical outputs.
    let domain2 = dir.path().join("domain2.pddl");
    let actions2 = dir.path().join("actions2.jsonl");
    assert!(learn(&domain2, &actions2).status.success());
    assert_eq!(std::fs::read(&domain).unwrap(), std::fs::read(&domain2).unwrap());
    assert_eq!(std::fs::read(&actions).unwrap(), std::fs::read(&actions2).unwrap());

    let text = std::fs::read_to_string(&domain).unwrap();
    assert!(text.contains("(:action holding_knife"));
    assert!(text.contains("(:action holding_fork"));

    let output = sceneplan().args(["mine-ontology"]).arg(&actions).output().unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("movable: fork, knife"), "{stdout}");
    assert!(stdout.contains("static:  plate"), "{stdout}");

    let dump = dir.path().join("graph.json");
    let status = sceneplan()
        .args(["replay"])
        .arg(&demo)
        .arg("--qsr")
        .arg("--dump")
        .arg(&dump)
        .status()
        .unwrap();
    assert!(status.success());
    let graph: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&dump).unwrap()).unwrap();
    assert!(graph.get("nodes").is_some() && graph.get("pairs").is_some());
}

#[test]
fn static_scene_reports_zero_actions() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("script.json");
    write(&script, "[]");
    let demo = dir.path().join("static.jsonl");
    assert!(sceneplan().args(["simulate"]).arg(&script).arg("-o").arg(&demo).status().unwrap().success());
    let output = sceneplan()
        .args(["learn"])
        .arg(&demo)
        .arg("--qsr")
        .arg("-o")
        .arg(dir.path().join("d.pddl"))
        .arg("--actions")
        .arg(dir.path().join("a.jsonl"))
        .output()
        .unwrap();
    assert!(output.status.success());
    assert!(String::from_utf8_lossy(&output.stdout).contains("0 actions"));
    assert!(!dir.path().join("d.pddl").exists(), "no domain for an empty action set");
}

#[test]
fn exit_codes_distinguish_error_classes() {
    let dir = tempfile::tempdir().unwrap();
    // Missing input file: I/O class.
    let code = sceneplan()
        .args(["learn", "no-such-file.jsonl"])
        .current_dir(dir.path())
        .status()
        .unwrap()
        .code();
    assert_eq!(code, Some(3));

    // Unknown script entry: validation class.
    let script = dir.path().join("bad.json");
    write(&script, r#"[{"object":"piano","target":"left_of"}]"#);
    let code = sceneplan()
        .args(["simulate"])
        .arg(&script)
        .arg("-o")
        .arg(dir.path().join("x.jsonl"))
        .status()
        .unwrap()
        .code();
    assert_eq!(code, Some(4));

    // Unreachable server: network class.
    let actions = dir.path().join("actions.jsonl");
    write(&actions, "");
    let code = sceneplan()
        .args(["orchestrate"])
        .arg(&actions)
        .args(["--endpoint", "127.0.0.1:1"])
        .status()
        .unwrap()
        .code();
    assert_eq!(code, Some(6));

    // Bad flag: usage class (clap's conventional exit code).
    let code = sceneplan().args(["learn", "--bogus"]).status().unwrap().code();
    assert_eq!(code, Some(2));
}

#[test]
fn shipped_sample_configs_load() {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let read = |name: &str| std::fs::read_to_string(configs.join(name)).unwrap();
    sceneplan_core::layer::Lexicon::from_json(&read("lexicon.json")).unwrap();
    serde_json::from_str::<sceneplan_orchestrator::SkillMap>(&read("skills.json")).unwrap();
    serde_json::from_str::<sceneplan_bank::WorldConfig>(&read("world.json")).unwrap();
    let run: sceneplan_core::RunConfig = serde_json::from_str(&read("run.json")).unwrap();
    run.validate().unwrap();
    serde_json::from_str::<Vec<sceneplan_bank::ScriptStep>>(&read("script.json")).unwrap();
}

#[test]
fn eval_chain_prints_the_seed_and_scores() {
    let output = sceneplan()
        .args(["eval-chain", "-k", "1", "-n", "5", "--retries", "0", "--seed", "99"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("seed:                99"), "{stdout}");
    assert!(stdout.contains("action accuracy"), "{stdout}");
    assert!(stdout.contains("task success"), "{stdout}");
}
