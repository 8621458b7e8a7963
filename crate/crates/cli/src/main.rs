//! `barterd`: dataset generation, experiment execution, metric comparison,
//! formula spot-checks, board dumps, and ledger replay.

mod board;
mod experiment;
mod price;
mod replay;

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crbs_core::sim::{
    dataset_fingerprint, generate, generate_custom, inject_free_riders, Dataset, DatasetClass,
    ExperimentProfile, Mechanism,
};

#[derive(Parser)]
#[command(
    name = "barterd",
    version,
    about = "Barter-credit marketplace engine and discrete-event simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a reproducible dataset.
    Gen(GenArgs),
    /// Run experiments and write datasets, logs, metrics, and a summary.
    Run(experiment::RunArgs),
    /// Compare two metric reports from the same dataset and seed.
    Compare(CompareArgs),
    /// Evaluate the pricing formulas directly.
    Price {
        #[command(subcommand)]
        formula: price::PriceCmd,
    },
    /// Inspect the blackboard.
    Board {
        #[command(subcommand)]
        action: board::BoardCmd,
    },
    /// Inspect or replay the transaction ledger.
    Ledger {
        #[command(subcommand)]
        action: replay::LedgerCmd,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProfileArg {
    Exp1,
    Exp2,
    Exp3,
    #[value(name = "free-rider")]
    FreeRider,
    #[value(name = "price-cat1")]
    PriceCat1,
    #[value(name = "price-cat2")]
    PriceCat2,
    #[value(name = "price-cat3")]
    PriceCat3,
}

impl From<ProfileArg> for ExperimentProfile {
    fn from(value: ProfileArg) -> Self {
        match value {
            ProfileArg::Exp1 => ExperimentProfile::Exp1,
            ProfileArg::Exp2 => ExperimentProfile::Exp2,
            ProfileArg::Exp3 => ExperimentProfile::Exp3,
            ProfileArg::FreeRider => ExperimentProfile::FreeRider,
            ProfileArg::PriceCat1 => ExperimentProfile::PriceCat1,
            ProfileArg::PriceCat2 => ExperimentProfile::PriceCat2,
            ProfileArg::PriceCat3 => ExperimentProfile::PriceCat3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MechanismArg {
    Crbs,
    Fcfs,
}

impl From<MechanismArg> for Mechanism {
    fn from(value: MechanismArg) -> Self {
        match value {
            MechanismArg::Crbs => Mechanism::Crbs,
            MechanismArg::Fcfs => Mechanism::Fcfs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClassArg {
    Small,
    Medium,
    Large,
}

impl From<ClassArg> for DatasetClass {
    fn from(value: ClassArg) -> Self {
        match value {
            ClassArg::Small => DatasetClass::Small,
            ClassArg::Medium => DatasetClass::Medium,
            ClassArg::Large => DatasetClass::Large,
        }
    }
}

#[derive(Args)]
struct GenArgs {
    /// Canned experiment profile; omit for a custom shape.
    #[arg(long, value_enum)]
    profile: Option<ProfileArg>,
    /// Dataset seed.
    #[arg(long, env = "BARTERD_SEED", default_value_t = 0)]
    seed: u64,
    /// Size class for custom shapes.
    #[arg(long, value_enum, default_value = "large")]
    class: ClassArg,
    #[arg(long, requires = "requestors")]
    providers: Option<usize>,
    #[arg(long, requires = "providers")]
    requestors: Option<usize>,
    /// Minutes over which advertisements arrive (custom shapes).
    #[arg(long, default_value_t = 360)]
    ad_window: u64,
    /// Minutes over which requests arrive (custom shapes).
    #[arg(long, default_value_t = 240)]
    request_window: u64,
    /// Mark this many requestors as pre-indebted free-riders.
    #[arg(long)]
    free_riders: Option<usize>,
    /// Output file; stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    left: PathBuf,
    right: PathBuf,
    /// Emit the comparison as JSON instead of text.
    #[arg(long)]
    json: bool,
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let mut dataset = match (args.profile, args.providers, args.requestors) {
        (Some(profile), None, None) => generate(profile.into(), args.seed)
            .with_context(|| format!("generating profile {profile:?}"))?,
        (None, Some(providers), Some(requestors)) => generate_custom(
            args.class.into(),
            args.seed,
            providers,
            requestors,
            args.ad_window,
            args.request_window,
        )?,
        (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
            bail!("--profile and --providers/--requestors are mutually exclusive")
        }
        _ => bail!("pass either --profile or both --providers and --requestors"),
    };
    if let Some(count) = args.free_riders {
        dataset = inject_free_riders(&dataset, count, args.seed)?;
    }
    let text = serde_json::to_string_pretty(&dataset)?;
    match args.output {
        Some(path) => {
            std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
            eprintln!(
                "wrote {} ({} providers, {} requestors, fingerprint {})",
                path.display(),
                dataset.providers.len(),
                dataset.requestors.len(),
                dataset_fingerprint(&dataset)
            );
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> Result<()> {
    let left: crbs_core::sim::MetricsReport = read_json(&args.left)?;
    let right: crbs_core::sim::MetricsReport = read_json(&args.right)?;
    let report = crbs_core::sim::compare(&left, &right)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
        return Ok(());
    }
    println!(
        "comparison of {} vs {} (seed {}, profile {})",
        report.left_mechanism,
        report.right_mechanism,
        report.seed,
        report.profile.as_deref().unwrap_or("-")
    );
    println!(
        "  consumed resources      {:>8} vs {:<8}",
        report.consumed_resources.0, report.consumed_resources.1
    );
    println!(
        "  settled transactions    {:>8} vs {:<8}",
        report.settled_transactions.0, report.settled_transactions.1
    );
    let pct = |x: crbs_core::Credits| format!("{:.1}%", 100.0 * x.to_f64());
    println!(
        "  utilization             {:>8} vs {:<8} (abs diff {:.1}pp, pct diff {:.1}%)",
        pct(report.utilization.0),
        pct(report.utilization.1),
        100.0 * report.utilization_abs_diff.to_f64(),
        report.utilization_pct_diff.to_f64()
    );
    println!(
        "  satisfaction            {:>8} vs {:<8} (abs diff {:.1}pp, pct diff {:.1}%)",
        pct(report.satisfaction.0),
        pct(report.satisfaction.1),
        100.0 * report.satisfaction_abs_diff.to_f64(),
        report.satisfaction_pct_diff.to_f64()
    );
    Ok(())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &PathBuf) -> Result<T> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn load_dataset(path: &PathBuf) -> Result<Dataset> {
    let dataset: Dataset = read_json(path)?;
    dataset.validate()?;
    Ok(dataset)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Run(args) => experiment::cmd_run(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Price { formula } => price::cmd_price(formula),
        Command::Board { action } => board::cmd_board(action),
        Command::Ledger { action } => replay::cmd_ledger(action),
    }
}
