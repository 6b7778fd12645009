use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use genwar::harness::{
    run_experiment, write_outputs, BackendHandle, BackendProfile, ExperimentConfig, HarnessError, PolicyKind, Upstream,
};
use genwar::memory::RetrievalWeights;
use genwar::planning::Templates;
use genwar::reflection::ReflectionConfig;
use genwar::sim::Scenario;

#[derive(Parser)]
#[command(name = "genwar", version, about = "Hex wargame with generative agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a seeded batch of episodes and write metrics and transcripts.
    Run(Box<RunArgs>),
    /// Write the built-in scenario as JSON.
    Scenario {
        #[arg(long, default_value = "-")]
        out: String,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Scenario JSON; the built-in board when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, default_value = "gwa")]
    red: PolicyKind,
    #[arg(long, default_value = "rule")]
    blue: PolicyKind,
    #[arg(long, default_value_t = 10)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "scripted")]
    backend: BackendProfile,
    /// Where a cached backend sends misses.
    #[arg(long, default_value = "scripted")]
    upstream: Upstream,
    #[arg(long)]
    cache_file: Option<PathBuf>,
    /// Rule file replacing the built-in scripted replies.
    #[arg(long)]
    script: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    alpha_recency: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha_importance: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha_relevance: f64,
    #[arg(long, default_value_t = 0.995)]
    decay: f64,
    /// Memories handed to the planner each tick.
    #[arg(long, default_value_t = 8)]
    top_k: usize,
    #[arg(long, default_value_t = 20.0)]
    reflect_threshold: f64,
    #[arg(long, default_value_t = 3)]
    max_rounds: usize,
    #[arg(long)]
    expert_doc: Option<PathBuf>,
    /// Directory of prompt template overrides.
    #[arg(long)]
    templates: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long)]
    out: PathBuf,
}

fn config(args: &RunArgs) -> Result<ExperimentConfig, HarnessError> {
    let scenario = match &args.scenario {
        Some(p) => Scenario::load(p)?,
        None => Scenario::standard(),
    };
    let mut cfg = ExperimentConfig::new(scenario, args.red, args.blue);
    cfg.scenario_path = args.scenario.clone();
    cfg.episodes = args.episodes;
    cfg.base_seed = args.seed;
    cfg.weights = RetrievalWeights {
        alpha_recency: args.alpha_recency,
        alpha_importance: args.alpha_importance,
        alpha_relevance: args.alpha_relevance,
        decay: args.decay,
        k: args.top_k,
    };
    cfg.reflection = ReflectionConfig { threshold: args.reflect_threshold, ..Default::default() };
    cfg.max_rounds = args.max_rounds;
    cfg.backend = args.backend;
    cfg.upstream = args.upstream;
    cfg.script = args.script.clone();
    cfg.workers = args.workers;
    cfg.cache_file = match (&args.cache_file, args.backend) {
        (Some(p), _) => Some(p.clone()),
        (None, BackendProfile::Cached) => Some(args.out.join("cache.jsonl")),
        (None, _) => None,
    };
    if let Some(dir) = &args.templates {
        cfg.templates = Templates::from_dir(dir).map_err(|e| HarnessError::Config(e.to_string()))?;
    }
    if let Some(p) = &args.expert_doc {
        cfg = cfg.with_expert_doc(p)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(args: &RunArgs) -> Result<(), HarnessError> {
    let cfg = config(args)?;
    let backend = BackendHandle::from_config(&cfg)?;
    let run = run_experiment(&cfg, &backend)?;
    write_outputs(&run, &args.out)?;
    let r = &run.report;
    println!(
        "{} vs {}: {} episodes, red {:.3} blue {:.3} draw {:.3}, {} failed",
        cfg.red,
        cfg.blue,
        r.completed,
        r.win_rate["red"],
        r.win_rate["blue"],
        r.win_rate["draw"],
        r.failures.len()
    );
    println!("outputs in {}", args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(&args),
        Command::Scenario { out } => {
            let json = Scenario::standard().to_json();
            if out == "-" {
                println!("{json}");
                Ok(())
            } else {
                std::fs::write(&out, json + "\n").map_err(|e| HarnessError::Io { path: out, message: e.to_string() })
            }
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("genwar: {e}");
            ExitCode::FAILURE
        }
    }
}
