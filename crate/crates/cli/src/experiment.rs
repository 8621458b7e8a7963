//! The `run` subcommand: execute seed sweeps for a profile (or a custom
//! dataset) under one or both mechanisms and write every artifact needed to
//! reproduce and inspect the runs.
//!
//! Data files carry no timestamps; wall-clock data lives only in the run
//! manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crbs_core::sim::event::to_ndjson;
use crbs_core::sim::{
    compare, generate, inject_free_riders, run, run_price_study, Dataset, ExperimentProfile,
    Mechanism, MetricsReport, PriceCategory, PriceStudyReport, RunOptions, RunOutput,
};
use crbs_core::{Credits, Urgency};

use crate::replay::snapshot;
use crate::{MechanismArg, ProfileArg};

#[derive(Args)]
pub struct RunArgs {
    /// JSON config file; explicit flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Canned experiment profiles (comma-separated for a combined table).
    #[arg(long, value_enum, value_delimiter = ',')]
    profile: Option<Vec<ProfileArg>>,
    /// Custom dataset file (alternative to --profile).
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Seeds: `5`, `1,2,7`, or an inclusive range `1..30`.
    #[arg(long, env = "BARTERD_SEED")]
    seeds: Option<String>,
    /// Comma-separated mechanisms to run.
    #[arg(long, value_delimiter = ',')]
    mechanisms: Option<Vec<MechanismArg>>,
    /// Output directory.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Debt guard toggle.
    #[arg(long)]
    guard: Option<GuardToggle>,
    /// Most negative balance tolerated before blocking.
    #[arg(long)]
    debt_ceiling: Option<Credits>,
    /// Override the number of injected free-riders (profile datasets).
    #[arg(long)]
    free_riders: Option<usize>,
    /// Sessions per seed for price-study profiles.
    #[arg(long)]
    sessions: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuardToggle {
    On,
    Off,
}

/// File form of the run configuration. Flags win over file values.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    profile: Option<String>,
    dataset: Option<PathBuf>,
    seeds: Option<String>,
    mechanisms: Option<Vec<String>>,
    output_dir: Option<PathBuf>,
    guard_enabled: Option<bool>,
    debt_ceiling: Option<Credits>,
    free_riders: Option<usize>,
    sessions: Option<u64>,
}

struct Plan {
    profiles: Vec<ExperimentProfile>,
    dataset_path: Option<PathBuf>,
    seeds: Vec<u64>,
    mechanisms: Vec<Mechanism>,
    out: PathBuf,
    guard_enabled: bool,
    debt_ceiling: Credits,
    free_riders: Option<usize>,
    sessions: u64,
}

fn parse_profile_name(name: &str) -> Result<ExperimentProfile> {
    Ok(match name {
        "exp1" => ExperimentProfile::Exp1,
        "exp2" => ExperimentProfile::Exp2,
        "exp3" => ExperimentProfile::Exp3,
        "free-rider" => ExperimentProfile::FreeRider,
        "price-cat1" => ExperimentProfile::PriceCat1,
        "price-cat2" => ExperimentProfile::PriceCat2,
        "price-cat3" => ExperimentProfile::PriceCat3,
        other => bail!("unknown profile {other:?}"),
    })
}

fn parse_seeds(spec: &str) -> Result<Vec<u64>> {
    let spec = spec.trim();
    if let Some((lo, hi)) = spec.split_once("..") {
        let lo: u64 = lo.trim().parse().context("range start")?;
        let hi: u64 = hi.trim().parse().context("range end")?;
        if hi < lo {
            bail!("seed range {spec:?} is empty");
        }
        return Ok((lo..=hi).collect());
    }
    spec.split(',')
        .map(|s| s.trim().parse::<u64>().with_context(|| format!("seed {s:?}")))
        .collect()
}

fn resolve(args: RunArgs) -> Result<Plan> {
    let file: ConfigFile = match &args.config {
        Some(path) => crate::read_json(path)?,
        None => ConfigFile::default(),
    };

    let profiles: Vec<ExperimentProfile> = match (&args.profile, &file.profile) {
        (Some(list), _) => list.iter().map(|&p| p.into()).collect(),
        (None, Some(names)) => names
            .split(',')
            .map(|n| parse_profile_name(n.trim()))
            .collect::<Result<_>>()?,
        (None, None) => Vec::new(),
    };
    let dataset_path = args.dataset.or(file.dataset);
    if !profiles.is_empty() && dataset_path.is_some() {
        bail!("--profile and --dataset are mutually exclusive");
    }
    if profiles.is_empty() && dataset_path.is_none() {
        bail!("pass --profile or --dataset (or set one in the config file)");
    }
    let study_count = profiles.iter().filter(|p| p.is_price_study()).count();
    if study_count > 0 && study_count != profiles.len() {
        bail!("price-study profiles cannot be mixed with market profiles");
    }

    let seeds = match args.seeds.as_deref().or(file.seeds.as_deref()) {
        Some(spec) => parse_seeds(spec)?,
        None => vec![0],
    };
    if seeds.is_empty() {
        bail!("at least one seed is required");
    }

    let mechanisms: Vec<Mechanism> = match (&args.mechanisms, &file.mechanisms) {
        (Some(list), _) => list.iter().map(|&m| m.into()).collect(),
        (None, Some(names)) => names
            .iter()
            .map(|n| match n.as_str() {
                "crbs" => Ok(Mechanism::Crbs),
                "fcfs" => Ok(Mechanism::Fcfs),
                other => bail!("unknown mechanism {other:?}"),
            })
            .collect::<Result<_>>()?,
        (None, None) => vec![Mechanism::Crbs, Mechanism::Fcfs],
    };
    if mechanisms.is_empty() {
        bail!("at least one mechanism is required");
    }

    let out = match args.out.or(file.output_dir) {
        Some(dir) => dir,
        None => bail!("--out (or output_dir in the config) is required"),
    };

    let guard_enabled = match args.guard {
        Some(GuardToggle::On) => true,
        Some(GuardToggle::Off) => false,
        None => file.guard_enabled.unwrap_or(true),
    };

    Ok(Plan {
        profiles,
        dataset_path,
        seeds,
        mechanisms,
        out,
        guard_enabled,
        debt_ceiling: args.debt_ceiling.or(file.debt_ceiling).unwrap_or(Credits::ZERO),
        free_riders: args.free_riders.or(file.free_riders),
        sessions: args.sessions.or(file.sessions).unwrap_or(100),
    })
}

pub fn cmd_run(args: RunArgs) -> Result<()> {
    let invocation: Vec<String> = std::env::args().collect();
    let plan = resolve(args)?;
    std::fs::create_dir_all(&plan.out)
        .with_context(|| format!("creating {}", plan.out.display()))?;

    if plan.profiles.iter().any(|p| p.is_price_study()) {
        price_study_sweeps(&plan)?;
    } else {
        market_sweep(&plan)?;
    }

    write_manifest(&plan.out, &invocation)?;
    Ok(())
}

// ----------------------------------------------------------------------
// Market sweeps
// ----------------------------------------------------------------------

/// One seed's worth of results for one profile: the dataset actually run
/// plus each mechanism's output.
type SeedRuns = (String, u64, Dataset, Vec<(Mechanism, RunOutput)>);

/// reports[label][seed][mechanism]
type ReportTable = BTreeMap<String, BTreeMap<u64, BTreeMap<String, MetricsReport>>>;

fn market_sweep(plan: &Plan) -> Result<()> {
    let base_dataset = match &plan.dataset_path {
        Some(path) => Some(crate::load_dataset(path)?),
        None => None,
    };
    let jobs: Vec<(String, Option<ExperimentProfile>)> = if plan.profiles.is_empty() {
        vec![("custom".to_string(), None)]
    } else {
        plan.profiles
            .iter()
            .map(|&p| (p.name().to_string(), Some(p)))
            .collect()
    };
    let tasks: Vec<(&str, Option<ExperimentProfile>, u64)> = jobs
        .iter()
        .flat_map(|(label, profile)| {
            plan.seeds
                .iter()
                .map(move |&seed| (label.as_str(), *profile, seed))
        })
        .collect();

    // (profile, seed) pairs run in parallel, each run isolated; artifacts
    // are written afterwards in task order so every output is deterministic.
    let sweep: Vec<SeedRuns> = tasks
        .par_iter()
        .map(|&(label, profile, seed)| -> Result<_> {
            let mut dataset = match (profile, &base_dataset) {
                (Some(profile), None) => generate(profile, seed)?,
                (None, Some(base)) => {
                    // A custom dataset keeps its market content; the sweep
                    // seed drives the engine's randomness.
                    let mut ds = base.clone();
                    ds.seed = seed;
                    ds
                }
                _ => unreachable!("resolve() enforces exactly one source"),
            };
            if let Some(count) = plan.free_riders {
                dataset = inject_free_riders(&dataset, count, seed)?;
            }
            let mut per_mechanism = Vec::with_capacity(plan.mechanisms.len());
            for &mechanism in &plan.mechanisms {
                let options = RunOptions {
                    mechanism,
                    guard_enabled: plan.guard_enabled,
                    debt_ceiling: plan.debt_ceiling,
                };
                per_mechanism.push((mechanism, run(&dataset, &options)?));
            }
            Ok((label.to_string(), seed, dataset, per_mechanism))
        })
        .collect::<Result<_>>()?;

    let mut csv = csv::Writer::from_path(plan.out.join("metrics.csv"))?;
    write_csv_header(&mut csv)?;
    let mut reports = ReportTable::new();
    for (label, seed, dataset, per_mechanism) in &sweep {
        let seed_dir = plan.out.join(label).join(format!("seed_{seed:04}"));
        std::fs::create_dir_all(&seed_dir)?;
        std::fs::write(
            seed_dir.join("dataset.json"),
            serde_json::to_string_pretty(dataset)?,
        )?;
        for (mechanism, output) in per_mechanism {
            let mech_dir = seed_dir.join(mechanism.to_string().to_lowercase());
            write_run_artifacts(&mech_dir, output)?;
            write_csv_row(&mut csv, label, *seed, &output.report)?;
            reports
                .entry(label.clone())
                .or_default()
                .entry(*seed)
                .or_default()
                .insert(mechanism.to_string(), output.report.clone());
        }
    }
    csv.flush()?;

    // Per-profile blocks in invocation order, then the cross-profile
    // average of the satisfaction differences.
    let mut summary = String::new();
    let mut profile_diffs = Vec::new();
    for (label, _) in &jobs {
        let (block, mean_diff) = render_summary(label, plan, &reports[label])?;
        summary.push_str(&block);
        if let Some(diff) = mean_diff {
            profile_diffs.push(diff);
        }
    }
    if profile_diffs.len() > 1 {
        let grand = profile_diffs.iter().sum::<f64>() / profile_diffs.len() as f64;
        writeln!(
            summary,
            "{:<44}{:>9.1}%",
            "average percentage difference of request satisfaction", grand
        )?;
    }
    std::fs::write(plan.out.join("summary.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}

fn write_run_artifacts(dir: &Path, output: &RunOutput) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("events.ndjson"), to_ndjson(&output.events))?;
    let mut transactions = String::new();
    for record in &output.ledger_records {
        transactions.push_str(&serde_json::to_string(record)?);
        transactions.push('\n');
    }
    std::fs::write(dir.join("transactions.ndjson"), transactions)?;
    std::fs::write(
        dir.join("report.json"),
        serde_json::to_string_pretty(&output.report)?,
    )?;
    std::fs::write(
        dir.join("accounts.json"),
        serde_json::to_string_pretty(&snapshot(&output.ledger))?,
    )?;
    Ok(())
}

const CSV_COLUMNS: [&str; 24] = [
    "profile",
    "seed",
    "mechanism",
    "providers",
    "requestors",
    "available_resources",
    "consumed_resources",
    "possible_transactions",
    "settled_transactions",
    "satisfied_requests",
    "blocked_requests",
    "free_rider_count",
    "free_rider_settled",
    "utilization",
    "satisfaction",
    "tx_h1",
    "tx_h3",
    "tx_h6",
    "tx_h12",
    "tx_h18",
    "tx_h24",
    "mean_price_requestor_more_urgent",
    "mean_price_provider_more_urgent",
    "mean_price_equal_urgency",
];

fn write_csv_header(w: &mut csv::Writer<std::fs::File>) -> Result<()> {
    w.write_record(CSV_COLUMNS)?;
    Ok(())
}

fn write_csv_row(
    w: &mut csv::Writer<std::fs::File>,
    profile: &str,
    seed: u64,
    report: &MetricsReport,
) -> Result<()> {
    let tx = |u: Urgency| {
        report
            .transactions_by_urgency
            .get(&u)
            .copied()
            .unwrap_or(0)
            .to_string()
    };
    let mean_price = |c: PriceCategory| {
        report
            .mean_price_by_category
            .get(&c)
            .map(|p| format!("{:.6}", p.to_f64()))
            .unwrap_or_default()
    };
    w.write_record([
        profile.to_string(),
        seed.to_string(),
        report.mechanism.to_string(),
        report.providers.to_string(),
        report.requestors.to_string(),
        report.available_resources.to_string(),
        report.consumed_resources.to_string(),
        report.possible_transactions.to_string(),
        report.settled_transactions.to_string(),
        report.satisfied_requests.to_string(),
        report.blocked_requests.to_string(),
        report.free_rider_count.to_string(),
        report.free_rider_settled.to_string(),
        format!("{:.6}", report.utilization_f64()),
        format!("{:.6}", report.satisfaction_f64()),
        tx(Urgency::H1),
        tx(Urgency::H3),
        tx(Urgency::H6),
        tx(Urgency::H12),
        tx(Urgency::H18),
        tx(Urgency::H24),
        mean_price(PriceCategory::RequestorMoreUrgent),
        mean_price(PriceCategory::ProviderMoreUrgent),
        mean_price(PriceCategory::EqualUrgency),
    ])?;
    Ok(())
}

struct MechanismMeans {
    consumed: f64,
    settled: f64,
    utilization: f64,
    satisfaction: f64,
}

fn mean_for(
    reports: &BTreeMap<u64, BTreeMap<String, MetricsReport>>,
    mechanism: &str,
) -> Option<MechanismMeans> {
    let rows: Vec<&MetricsReport> = reports
        .values()
        .filter_map(|per_mech| per_mech.get(mechanism))
        .collect();
    if rows.is_empty() {
        return None;
    }
    let n = rows.len() as f64;
    Some(MechanismMeans {
        consumed: rows.iter().map(|r| r.consumed_resources as f64).sum::<f64>() / n,
        settled: rows.iter().map(|r| r.settled_transactions as f64).sum::<f64>() / n,
        utilization: rows.iter().map(|r| r.utilization_f64()).sum::<f64>() / n,
        satisfaction: rows.iter().map(|r| r.satisfaction_f64()).sum::<f64>() / n,
    })
}

/// Reference-table-style block: one column per mechanism plus the
/// percentage-difference row when both ran. Returns the block and that
/// profile's mean satisfaction difference, if computed.
fn render_summary(
    label: &str,
    plan: &Plan,
    reports: &BTreeMap<u64, BTreeMap<String, MetricsReport>>,
) -> Result<(String, Option<f64>)> {
    let mut out = String::new();
    let first = reports
        .values()
        .next()
        .and_then(|m| m.values().next())
        .context("no runs completed")?;
    writeln!(out, "== {label}: {} seed(s) ==", plan.seeds.len())?;
    writeln!(out, "{:<44}{:>10}{:>10}", "", "CRBS", "FCFS")?;
    writeln!(
        out,
        "{:<44}{:>10}{:>10}",
        "number of providers", first.providers, first.providers
    )?;
    writeln!(
        out,
        "{:<44}{:>10}{:>10}",
        "number of requestors", first.requestors, first.requestors
    )?;
    writeln!(
        out,
        "{:<44}{:>10}{:>10}",
        "number of available resources", first.available_resources, first.available_resources
    )?;

    let crbs = mean_for(reports, "CRBS");
    let fcfs = mean_for(reports, "FCFS");
    let cell = |v: Option<f64>| match v {
        Some(x) => format!("{x:>10.1}"),
        None => format!("{:>10}", "-"),
    };
    let pct_cell = |v: Option<f64>| match v {
        Some(x) => format!("{:>9.1}%", 100.0 * x),
        None => format!("{:>10}", "-"),
    };
    writeln!(
        out,
        "{:<44}{}{}",
        "number of consumed resources (mean)",
        cell(crbs.as_ref().map(|m| m.consumed)),
        cell(fcfs.as_ref().map(|m| m.consumed))
    )?;
    writeln!(
        out,
        "{:<44}{}{}",
        "settled transactions (mean)",
        cell(crbs.as_ref().map(|m| m.settled)),
        cell(fcfs.as_ref().map(|m| m.settled))
    )?;
    writeln!(
        out,
        "{:<44}{}{}",
        "resource utilization rate (mean)",
        pct_cell(crbs.as_ref().map(|m| m.utilization)),
        pct_cell(fcfs.as_ref().map(|m| m.utilization))
    )?;
    writeln!(
        out,
        "{:<44}{}{}",
        "request satisfaction rate (mean)",
        pct_cell(crbs.as_ref().map(|m| m.satisfaction)),
        pct_cell(fcfs.as_ref().map(|m| m.satisfaction))
    )?;

    let mut profile_diff = None;
    if crbs.is_some() && fcfs.is_some() {
        let mut diffs = Vec::new();
        for per_mech in reports.values() {
            if let (Some(a), Some(b)) = (per_mech.get("CRBS"), per_mech.get("FCFS")) {
                diffs.push(compare(a, b)?.satisfaction_pct_diff.to_f64());
            }
        }
        if !diffs.is_empty() {
            let mean_diff = diffs.iter().sum::<f64>() / diffs.len() as f64;
            writeln!(
                out,
                "{:<44}{:>9.1}%",
                "percentage difference of request satisfaction", mean_diff
            )?;
            profile_diff = Some(mean_diff);
        }
    }
    writeln!(out)?;
    Ok((out, profile_diff))
}

// ----------------------------------------------------------------------
// Price-study sweeps
// ----------------------------------------------------------------------

fn price_study_sweeps(plan: &Plan) -> Result<()> {
    let mut csv = csv::Writer::from_path(plan.out.join("price_metrics.csv"))?;
    csv.write_record([
        "profile",
        "base_seed",
        "sessions",
        "settled",
        "mean_agreed_price",
        "mean_midpoint",
        "mean_deviation",
    ])?;
    let mut summary = String::new();

    for &profile in &plan.profiles {
        let category = match profile {
            ExperimentProfile::PriceCat1 => PriceCategory::RequestorMoreUrgent,
            ExperimentProfile::PriceCat2 => PriceCategory::ProviderMoreUrgent,
            ExperimentProfile::PriceCat3 => PriceCategory::EqualUrgency,
            _ => unreachable!("resolve() rejects mixed profile kinds"),
        };
        let dir = plan.out.join(profile.name());
        std::fs::create_dir_all(&dir)?;

        let studies: Vec<PriceStudyReport> = plan
            .seeds
            .par_iter()
            .map(|&seed| {
                run_price_study(category, seed, plan.sessions).map_err(anyhow::Error::from)
            })
            .collect::<Result<_>>()?;

        writeln!(
            summary,
            "== {}: {} seed(s), {} sessions each ==",
            profile.name(),
            plan.seeds.len(),
            plan.sessions
        )?;
        for (&seed, report) in plan.seeds.iter().zip(&studies) {
            std::fs::write(
                dir.join(format!("study_seed_{seed:04}.json")),
                serde_json::to_string_pretty(&report)?,
            )?;
            csv.write_record([
                profile.name().to_string(),
                seed.to_string(),
                report.sessions.to_string(),
                report.settled.to_string(),
                format!("{:.6}", report.mean_agreed_price.to_f64()),
                format!("{:.6}", report.mean_midpoint.to_f64()),
                format!("{:.6}", report.mean_deviation.to_f64()),
            ])?;
            writeln!(
                summary,
                "  seed {seed}: mean agreed {:.3}, midpoint {:.3}, deviation {:+.3}",
                report.mean_agreed_price.to_f64(),
                report.mean_midpoint.to_f64(),
                report.mean_deviation.to_f64()
            )?;
        }
        writeln!(summary)?;
    }
    csv.flush()?;
    std::fs::write(plan.out.join("summary.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}

// ----------------------------------------------------------------------
// Manifest
// ----------------------------------------------------------------------

#[derive(Serialize)]
struct Manifest {
    tool: String,
    version: String,
    invocation: Vec<String>,
    created_unix_secs: u64,
}

/// The one artifact that carries wall-clock data.
fn write_manifest(out: &Path, invocation: &[String]) -> Result<()> {
    let manifest = Manifest {
        tool: "barterd".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        invocation: invocation.to_vec(),
        created_unix_secs: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    std::fs::write(
        out.join("run_manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(())
}
