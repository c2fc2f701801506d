//! `sceneplan`: demonstrations in, planning domains out, and a policy
//! orchestrator to replay them.

use std::io::Write as _;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use sceneplan_bank::demo::{generate_demonstration, DemoConfig, ScriptStep};
use sceneplan_bank::server::{serve, WorldConfig};
use sceneplan_core::action::{lift, GroundedAction};
use sceneplan_core::layer::Lexicon;
use sceneplan_core::pddl::{emit_actions, mine_ontology_grounded};
use sceneplan_core::pipeline::{Pipeline, RelationSource};
use sceneplan_core::stream::{open_stream, FrameWriter};
use sceneplan_core::RunConfig;
use sceneplan_orchestrator::{build_schedule, eval_chain, execute_plan, BankClient, EvalConfig, SkillMap};

#[derive(Parser)]
#[command(name = "sceneplan", version, about = "Turn tabletop demonstrations into PDDL action models and replay them through a policy bank")]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

/// Pipeline parameter overrides. Values from `--config` apply first, then
/// explicit flags.
#[derive(Args)]
struct Overrides {
    /// JSON run-config file (partial files are fine; missing keys keep
    /// defaults).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Consecutive identical observations required to change a committed
    /// relation state.
    #[arg(long, global = true)]
    theta: Option<u32>,
    /// Look-back/look-ahead window (frames) for preconditions and effects.
    #[arg(long, global = true)]
    zeta: Option<u32>,
    /// Confidence gain per frame of re-detection gap.
    #[arg(long, global = true)]
    sigma: Option<f64>,
    /// Detection confidence threshold.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Seed for all randomized commands.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Learn a planning domain from a demonstration stream.
    Learn {
        /// Demonstration file (one frame record per line).
        input: PathBuf,
        /// Derive spatial relations from boxes instead of reading them from
        /// the stream.
        #[arg(long)]
        qsr: bool,
        /// Output domain file.
        #[arg(short = 'o', long, default_value = "domain.pddl")]
        domain: PathBuf,
        /// Grounded-action log (one action per line).
        #[arg(long, default_value = "actions.jsonl")]
        actions: PathBuf,
        /// Domain name in the emitted file.
        #[arg(long, default_value = "tabletop")]
        domain_name: String,
        /// Optional relation lexicon file.
        #[arg(long)]
        lexicon: Option<PathBuf>,
    },
    /// Generate a demonstration stream from a pick-and-place script.
    Simulate {
        /// JSON script: a list of {"object", "target"} steps.
        script: PathBuf,
        #[arg(short = 'o', long, default_value = "demo.jsonl")]
        output: PathBuf,
        /// Embed relation records in the stream (detector-log mode).
        #[arg(long)]
        emit_relations: bool,
        /// Uniform bounding-box jitter amplitude.
        #[arg(long, default_value_t = 0.0)]
        jitter: f64,
        /// Probability of flipping an emitted relation label.
        #[arg(long, default_value_t = 0.0)]
        label_noise: f64,
        /// Optional world config for a non-default layout.
        #[arg(long)]
        world_config: Option<PathBuf>,
    },
    /// Serve the simulated policy bank.
    Serve {
        #[arg(long, default_value_t = 7711)]
        port: u16,
        #[arg(long)]
        world_config: Option<PathBuf>,
    },
    /// Execute a learned action log against a policy server.
    Orchestrate {
        /// Grounded-action log from `learn`.
        actions: PathBuf,
        /// Skill map file; defaults to the built-in tabletop mapping.
        #[arg(long)]
        skills: Option<PathBuf>,
        /// Server endpoint.
        #[arg(long, default_value = "127.0.0.1:7711")]
        endpoint: String,
        /// Retry budget per step; 0 disables the verification fallback.
        #[arg(long, default_value_t = 3)]
        retries: u32,
        /// Write the execution report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Split object classes into movable and static from an action log.
    MineOntology {
        actions: PathBuf,
        /// Write the report as JSON instead of just printing it.
        #[arg(short = 'o', long)]
        output: Option<PathBuf>,
    },
    /// Rebuild the scene graph from a stream and dump it for inspection.
    Replay {
        input: PathBuf,
        #[arg(long)]
        qsr: bool,
        #[arg(long, default_value = "graph.json")]
        dump: PathBuf,
    },
    /// Sample random tasks, learn each from a generated demonstration, and
    /// execute it in-process; reports action accuracy and task success.
    EvalChain {
        /// Skills per task.
        #[arg(short = 'k', long, default_value_t = 2)]
        chain_length: usize,
        /// Episodes to sample.
        #[arg(short = 'n', long, default_value_t = 1000)]
        episodes: usize,
        /// Retry budget per step; 0 reproduces the no-fallback baseline.
        #[arg(long, default_value_t = 0)]
        retries: u32,
        #[arg(long)]
        world_config: Option<PathBuf>,
    },
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Config(#[from] sceneplan_core::config::ConfigError),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Stream(#[from] sceneplan_core::stream::StreamError),
    #[error("{0}")]
    Lexicon(#[from] sceneplan_core::layer::LexiconError),
    #[error("{0}")]
    Pipeline(#[from] sceneplan_core::pipeline::PipelineError),
    #[error("{0}")]
    Pddl(#[from] sceneplan_core::pddl::PddlError),
    #[error("{0}")]
    Demo(#[from] sceneplan_bank::demo::DemoError),
    #[error("{0}")]
    Skills(#[from] sceneplan_orchestrator::skills::SkillMapError),
    #[error("{0}")]
    Server(#[from] sceneplan_bank::server::ServerError),
    #[error("{0}")]
    Client(#[from] sceneplan_orchestrator::ClientError),
    #[error("{0}")]
    Malformed(String),
}

impl CliError {
    /// Documented exit codes: 2 usage/config, 3 I/O, 4 parse/validation,
    /// 5 pipeline, 6 network/protocol, 7 server.
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) | CliError::Stream(_) => 3,
            CliError::Lexicon(_) | CliError::Pddl(_) | CliError::Malformed(_)
            | CliError::Skills(_) | CliError::Demo(_) => 4,
            CliError::Pipeline(_) => 5,
            CliError::Client(_) => 6,
            CliError::Server(_) => 7,
        }
    }
}

fn read_to_string(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_string(path: &Path, content: &str) -> Result<(), CliError> {
    std::fs::write(path, content).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn load_run_config(overrides: &Overrides) -> Result<RunConfig, CliError> {
    let mut config = match &overrides.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(theta) = overrides.theta {
        config.theta = theta;
    }
    if let Some(zeta) = overrides.zeta {
        config.zeta = zeta;
    }
    if let Some(sigma) = overrides.sigma {
        config.sigma = sigma;
    }
    if let Some(alpha) = overrides.alpha {
        config.alpha = alpha;
    }
    if let Some(seed) = overrides.seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn load_world_config(path: &Option<PathBuf>, seed: u64) -> Result<WorldConfig, CliError> {
    let mut config = match path {
        Some(path) => WorldConfig::load(path)?,
        None => WorldConfig::default(),
    };
    config.seed = config.seed.wrapping_add(seed);
    Ok(config)
}

fn read_action_log(path: &Path) -> Result<Vec<GroundedAction>, CliError> {
    let mut actions = Vec::new();
    for (i, line) in read_to_string(path)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let action: GroundedAction = serde_json::from_str(line)
            .map_err(|e| CliError::Malformed(format!("{}:{}: {e}", path.display(), i + 1)))?;
        actions.push(action);
    }
    Ok(actions)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let run_config = load_run_config(&cli.overrides)?;
    match cli.command {
        Command::Learn { input, qsr, domain, actions, domain_name, lexicon } => {
            let lexicon = match lexicon {
                Some(path) => Lexicon::load(path)?,
                None => Lexicon::default_indoor(),
            };
            let source = if qsr { RelationSource::Derived } else { RelationSource::Stream };
            let mut pipeline = Pipeline::new(run_config.clone(), lexicon, source, true);
            for frame in open_stream(&input)? {
                pipeline.ingest_frame(&frame?)?;
            }
            let (_, learned) = pipeline.into_parts();

            let mut log_text = String::new();
            for action in &learned {
                log_text.push_str(&serde_json::to_string(action).expect("action serializes"));
                log_text.push('\n');
            }
            write_string(&actions, &log_text)?;

            if learned.is_empty() {
                log::warn!("no actions extracted; domain emission skipped");
                println!("0 actions");
                return Ok(());
            }
            let lifted: Vec<_> = learned.iter().map(lift).collect();
            let text = emit_actions(&domain_name, lifted, &run_config.agent_classes)?;
            write_string(&domain, &text)?;
            println!("{} actions", learned.len());
            println!("domain:  {}", domain.display());
            println!("actions: {}", actions.display());
        }
        Command::Simulate { script, output, emit_relations, jitter, label_noise, world_config } => {
            let steps: Vec<ScriptStep> = serde_json::from_str(&read_to_string(&script)?)
                .map_err(|e| CliError::Malformed(format!("{}: {e}", script.display())))?;
            let world = load_world_config(&world_config, 0)?.world;
            let demo_config = DemoConfig {
                emit_relations,
                bbox_jitter: jitter,
                label_noise,
                seed: run_config.seed,
                ..DemoConfig::default()
            };
            let frames = generate_demonstration(&world, &steps, &demo_config)?;
            let mut writer = FrameWriter::create(&output)?;
            for frame in &frames {
                writer.write_frame(frame)?;
            }
            writer.finish()?;
            println!("{} frames -> {}", frames.len(), output.display());
        }
        Command::Serve { port, world_config } => {
            let config = load_world_config(&world_config, run_config.seed)?;
            let listener = TcpListener::bind(("127.0.0.1", port))
                .map_err(|e| CliError::Io(format!("bind 127.0.0.1:{port}: {e}")))?;
            println!("serving on 127.0.0.1:{port} (seed {})", config.seed);
            serve(listener, config)?;
        }
        Command::Orchestrate { actions, skills, endpoint, retries, report } => {
            let learned = read_action_log(&actions)?;
            let skill_map = match skills {
                Some(path) => SkillMap::load(path)?,
                None => SkillMap::default_scenario(),
            };
            let plan = build_schedule(&learned, &skill_map, retries);
            let mut client = BankClient::connect(&endpoint)?;
            let mut live = Pipeline::new(
                run_config.clone(),
                Lexicon::default_indoor(),
                RelationSource::Derived,
                false,
            );
            let result = execute_plan(&plan, &mut client, &mut live);
            print!("{}", result.summary());
            println!("executed {}/{} steps", result.executed_count(), plan.len());
            if let Some(path) = report {
                write_string(&path, &serde_json::to_string_pretty(&result).expect("report serializes"))?;
            }
            if let Some(error) = result.transport_error {
                return Err(CliError::Malformed(format!("plan aborted: {error}")));
            }
        }
        Command::MineOntology { actions, output } => {
            let learned = read_action_log(&actions)?;
            let ontology = mine_ontology_grounded(&learned, &run_config.agent_classes);
            println!("movable: {}", ontology.movable.iter().cloned().collect::<Vec<_>>().join(", "));
            println!(
                "static:  {}",
                ontology.static_objects.iter().cloned().collect::<Vec<_>>().join(", ")
            );
            if let Some(path) = output {
                write_string(&path, &serde_json::to_string_pretty(&ontology).expect("serializes"))?;
            }
        }
        Command::Replay { input, qsr, dump } => {
            let source = if qsr { RelationSource::Derived } else { RelationSource::Stream };
            let mut pipeline =
                Pipeline::new(run_config.clone(), Lexicon::default_indoor(), source, false);
            for frame in open_stream(&input)? {
                pipeline.ingest_frame(&frame?)?;
            }
            let graph = pipeline.graph();
            write_string(&dump, &serde_json::to_string_pretty(graph).expect("graph serializes"))?;
            println!(
                "{} nodes, {} pair timelines, {} frames -> {}",
                graph.node_count(),
                graph.pair_count(),
                graph.ingested_times().len(),
                dump.display()
            );
        }
        Command::EvalChain { chain_length, episodes, retries, world_config } => {
            let world = load_world_config(&world_config, 0)?;
            let eval = EvalConfig {
                chain_length,
                episodes,
                max_retries: retries,
                seed: run_config.seed,
            };
            let outcome = eval_chain(&eval, &world, &run_config);
            println!("seed:                {}", outcome.seed);
            println!("chain length:        {}", outcome.chain_length);
            println!("episodes:            {}", outcome.episodes);
            println!("retries:             {}", outcome.max_retries);
            println!("action accuracy:     {:.4}", outcome.action_accuracy);
            println!("task success:        {:.4}", outcome.task_success);
            println!("strict task success: {:.4}", outcome.strict_task_success);
            let mut stdout = std::io::stdout();
            let _ = writeln!(stdout, "{}", serde_json::to_string(&outcome).expect("serializes"));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::from(error.code())
        }
    }
}
