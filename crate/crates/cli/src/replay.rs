//! Ledger replay: rebuild balances, ranks, and debts from a transaction log
//! and optionally check them against a run's account snapshot.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Subcommand};
use serde::{Deserialize, Serialize};

use crbs_core::{Credits, InstanceClass, Ledger, LedgerRecord, Rank};

#[derive(Subcommand)]
pub enum LedgerCmd {
    /// Reconstruct account state from a newline-delimited transaction log.
    Replay(ReplayArgs),
}

#[derive(Args)]
pub struct ReplayArgs {
    /// Transaction log (newline-delimited JSON) produced by `run`.
    log: PathBuf,
    /// Debt ceiling the original run used.
    #[arg(long, default_value = "0")]
    debt_ceiling: Credits,
    /// Compare the replayed accounts against a snapshot and fail on any
    /// mismatch.
    #[arg(long)]
    check: Option<PathBuf>,
    /// Emit the accounts as JSON instead of a table.
    #[arg(long)]
    json: bool,
}

/// The per-account state a replay must reproduce bit-for-bit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccountView {
    pub balance: Credits,
    pub rank: Rank,
    pub debts: BTreeMap<InstanceClass, Credits>,
}

pub type AccountsSnapshot = BTreeMap<String, AccountView>;

pub fn snapshot(ledger: &Ledger) -> AccountsSnapshot {
    ledger
        .accounts()
        .map(|account| {
            (
                account.participant.to_string(),
                AccountView {
                    balance: account.balance,
                    rank: account.rank(),
                    debts: account.debts.clone(),
                },
            )
        })
        .collect()
}

pub fn cmd_ledger(cmd: LedgerCmd) -> Result<()> {
    match cmd {
        LedgerCmd::Replay(args) => replay(args),
    }
}

fn replay(args: ReplayArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.log)
        .with_context(|| format!("reading {}", args.log.display()))?;
    let records = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str::<LedgerRecord>)
        .collect::<std::result::Result<Vec<_>, _>>()
        .context("parsing transaction log")?;

    let ledger = Ledger::replay(args.debt_ceiling, records.iter())?;
    ledger
        .check_conservation()
        .map_err(|e| anyhow::anyhow!("conservation violated after replay: {e}"))?;

    let accounts = snapshot(&ledger);
    if let Some(expected_path) = args.check {
        let expected: AccountsSnapshot = crate::read_json(&expected_path)?;
        if accounts != expected {
            let mut mismatches = Vec::new();
            for (id, view) in &accounts {
                match expected.get(id) {
                    None => mismatches.push(format!("{id}: unexpected account")),
                    Some(want) if want != view => mismatches.push(format!(
                        "{id}: replayed balance {} rank {} != snapshot balance {} rank {}",
                        view.balance, view.rank, want.balance, want.rank
                    )),
                    _ => {}
                }
            }
            for id in expected.keys() {
                if !accounts.contains_key(id) {
                    mismatches.push(format!("{id}: missing from replay"));
                }
            }
            bail!("replay diverges from snapshot:\n  {}", mismatches.join("\n  "));
        }
        eprintln!("replay matches snapshot ({} accounts)", accounts.len());
    }

    if args.json {
        println!("{}", serde_json::to_string_pretty(&accounts)?);
    } else {
        println!(
            "{:<12} {:>14} {:>10}  debts",
            "participant", "balance", "rank"
        );
        for (id, view) in &accounts {
            let debts = if view.debts.is_empty() {
                "-".to_string()
            } else {
                view.debts
                    .iter()
                    .map(|(class, amount)| format!("{class}={amount}"))
                    .collect::<Vec<_>>()
                    .join(", ")
            };
            println!(
                "{:<12} {:>14} {:>10}  {debts}",
                id,
                view.balance.canonical(),
                view.rank.canonical()
            );
        }
        println!("accounts: {}", accounts.len());
    }
    Ok(())
}
