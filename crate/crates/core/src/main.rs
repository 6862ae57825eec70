use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use smcl::catalog::{
    complex_coordination, random_initial_weights, shapley, simple_coordination, ComplexGameParams,
};
use smcl::dot::export_dot;
use smcl::io::{parse_game, parse_weights, save_game};
use smcl::report::{run_check, run_one, RunConfig};
use smcl::simulator::{empirical_convergence, simulate};
use smcl::{Algorithm, ExploreConfig, JointAction, LearnerParams, LearnerState, Result};

#[derive(Parser)]
#[command(
    name = "smcl",
    version,
    about = "Model checking of fictitious-play learning dynamics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Explore and analyse the learning chain for one or more initializations.
    Check(CheckArgs),
    /// Monte-Carlo playouts, optionally writing the first run's trace as CSV.
    Simulate(SimulateArgs),
    /// Write one of the built-in games as a game file.
    Catalog(CatalogArgs),
}

#[derive(Args)]
struct LearnerArgs {
    #[arg(long)]
    game: PathBuf,
    #[arg(long = "algo")]
    algorithm: Algorithm,
    #[arg(long, default_value_t = 0.2)]
    alpha: f64,
    #[arg(long, default_value_t = 0.8)]
    lambda0: f64,
    #[arg(long, default_value_t = 0.05)]
    gamma: f64,
    #[arg(long, default_value_t = 0.01)]
    lambda_min: f64,
    /// Temperature of the first smooth best response [default: 0.01 with
    /// --weights, 1 otherwise].
    #[arg(long)]
    tau0: Option<f64>,
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl LearnerArgs {
    fn params(&self) -> LearnerParams {
        LearnerParams {
            alpha: self.alpha,
            lambda0: self.lambda0,
            gamma: self.gamma,
            lambda_min: self.lambda_min,
            ..LearnerParams::default()
        }
    }

    fn tau0(&self) -> f64 {
        self.tau0
            .unwrap_or(if self.weights.is_some() { 0.01 } else { 1.0 })
    }
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    learner: LearnerArgs,
    #[arg(long, default_value_t = 100)]
    max_depth: usize,
    #[arg(long, default_value_t = 1_000_000)]
    state_cap: usize,
    /// Number of random initializations (instead of --weights).
    #[arg(long, default_value_t = 0)]
    random_inits: usize,
    #[arg(long)]
    no_merge: bool,
    /// Keep lagged copies of identical bottom cycles apart.
    #[arg(long)]
    no_lump: bool,
    /// Write the chain of the first initialization as Graphviz.
    #[arg(long)]
    dot: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    learner: LearnerArgs,
    #[arg(long, default_value_t = 100)]
    iterations: usize,
    #[arg(long, default_value_t = 1)]
    runs: usize,
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct CatalogArgs {
    #[command(subcommand)]
    game: CatalogGame,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum CatalogGame {
    Simple,
    Shapley,
    Complex {
        #[arg(long, default_value_t = 5)]
        n: usize,
        #[arg(long, default_value_t = 0.03)]
        delta: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Check(args) => check(args),
        Command::Simulate(args) => simulate_cmd(args),
        Command::Catalog(args) => catalog(args),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn check(args: CheckArgs) -> Result<bool> {
    let game = parse_game(&args.learner.game)?;
    let weights = args
        .learner
        .weights
        .as_deref()
        .map(|p| parse_weights(p, &game))
        .transpose()?;
    let config = RunConfig {
        algorithm: args.learner.algorithm,
        params: args.learner.params(),
        explore: ExploreConfig {
            max_depth: args.max_depth,
            tau0: args.learner.tau0(),
            merge_enabled: !args.no_merge,
            lump_cycles: !args.no_lump,
            state_cap: args.state_cap,
            ..ExploreConfig::default()
        },
        random_inits: args.random_inits,
        seed: args.learner.seed,
    };
    let inits = config.initializations(&game, weights)?;
    let report = run_check(&config, &game, &inits);
    print!("{}", report.to_table());
    for run in report.runs.iter().filter(|r| !r.completed()) {
        eprintln!(
            "run {} failed: {}",
            run.index,
            run.error.as_deref().unwrap_or("")
        );
    }
    if let Some(path) = &args.json {
        report.save_json(path)?;
    }
    if let Some(path) = &args.dot {
        let (dtmc, analysis) = run_one(&config, &game, &inits[0])?;
        export_dot(&dtmc, &analysis, path)?;
    }
    Ok(report.all_completed())
}

fn simulate_cmd(args: SimulateArgs) -> Result<bool> {
    let game = parse_game(&args.learner.game)?;
    let weights = match &args.learner.weights {
        Some(p) => parse_weights(p, &game)?,
        None => random_initial_weights(&game, args.learner.seed),
    };
    let learner = LearnerState::initial(
        args.learner.algorithm,
        &game,
        &weights,
        &args.learner.params(),
    )?;
    let tau0 = args.learner.tau0();
    if let Some(path) = &args.trace {
        simulate(&game, &learner, args.iterations, tau0, args.learner.seed)?.save_csv(path)?;
    }
    let result = empirical_convergence(
        &game,
        &learner,
        args.runs,
        args.iterations,
        tau0,
        args.learner.seed,
    )?;
    println!("runs {}  unresolved {}", result.runs, result.unresolved);
    for class in &result.classes {
        let actions: Vec<String> = class.actions.iter().map(JointAction::to_string).collect();
        println!(
            "  frequency {:.6}  count {:>8}  actions {}",
            class.frequency,
            class.count,
            actions.join(" ")
        );
    }
    let rewards: Vec<String> = result
        .mean_terminal_reward
        .iter()
        .map(|r| format!("{r:.6}"))
        .collect();
    println!("mean terminal reward {}", rewards.join(" "));
    Ok(true)
}

fn catalog(args: CatalogArgs) -> Result<bool> {
    let game = match args.game {
        CatalogGame::Simple => simple_coordination(),
        CatalogGame::Shapley => shapley(),
        CatalogGame::Complex { n, delta } => complex_coordination(ComplexGameParams { n, delta })?,
    };
    match &args.out {
        Some(path) => save_game(&game, path)?,
        None => print!("{}", smcl::io::game_to_string(&game)),
    }
    Ok(true)
}
