use std::path::PathBuf;
use std::process::ExitCode;

use caregraph::par;
use caregraph::pipeline::{Pipeline, RunConfig, Stage, StageOutcome};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "caregraph", version, about = "Readmission prediction on admission-similarity graphs")]
struct Cli {
    /// Run configuration (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Recompute stages whose artifacts are already current.
    #[arg(long, global = true)]
    force: bool,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic raw tables to the data directory.
    Generate,
    /// Filter admissions, derive temporal fields and label readmissions.
    Ingest,
    /// Encode feature blocks, split patients and scale features.
    Featurize,
    /// Build the similarity graph.
    Graph,
    /// Train GraphSAGE and the LR and MLP baselines once.
    Train,
    /// Train every grid point and rank by validation AUROC.
    Grid,
    /// Train GraphSAGE on each feature combination.
    Ablate,
    /// K-fold cross-validation with normality and t-tests.
    Crossval,
    /// Collect stage outputs into report.json.
    Report,
    /// Run every stage in order.
    RunAll,
    /// Print the effective configuration as TOML.
    ShowConfig,
}

fn stage_of(c: &Command) -> Option<Stage> {
    Some(match c {
        Command::Generate => Stage::Generate,
        Command::Ingest => Stage::Ingest,
        Command::Featurize => Stage::Featurize,
        Command::Graph => Stage::Graph,
        Command::Train => Stage::Train,
        Command::Grid => Stage::Grid,
        Command::Ablate => Stage::Ablate,
        Command::Crossval => Stage::Crossval,
        Command::Report => Stage::Report,
        Command::RunAll | Command::ShowConfig => return None,
    })
}

fn report(stage: Stage, outcome: StageOutcome) {
    match outcome {
        StageOutcome::Ran => println!("{stage}: done"),
        StageOutcome::UpToDate => println!("{stage}: up to date"),
    }
}

fn run(cli: Cli) -> caregraph::Result<()> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Command::ShowConfig = cli.command {
        config.validate()?;
        print!("{}", config.to_toml());
        return Ok(());
    }
    par::init_threads(cli.threads);
    let pipeline = Pipeline::new(config)?.force(cli.force);
    match stage_of(&cli.command) {
        Some(stage) => report(stage, pipeline.run(stage)?),
        None => {
            for (stage, outcome) in pipeline.run_all()? {
                report(stage, outcome);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
