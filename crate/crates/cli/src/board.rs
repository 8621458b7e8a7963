//! Blackboard reconstruction from an event log.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Subcommand};
use serde::Serialize;

use crbs_core::sim::event::{from_ndjson, DecideOutcome, EventKind};
use crbs_core::{
    Credits, InstanceClass, NegotiatorRef, ParticipantId, Rank, Region, SharingDuration,
    TransactionId,
};

#[derive(Subcommand)]
pub enum BoardCmd {
    /// Rebuild the live board at a point in time from an event log and dump
    /// it as a JSON array of nine-attribute entries.
    Dump(DumpArgs),
}

#[derive(Args)]
pub struct DumpArgs {
    /// Event log (newline-delimited JSON) produced by `run`.
    #[arg(long)]
    events: PathBuf,
    /// Board state after all events up to and including this minute;
    /// defaults to the end of the log.
    #[arg(long)]
    at: Option<u64>,
    /// Output file; stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

/// One listed entry as reconstructed from the log. The rank attribute is
/// absent in baseline-mechanism logs, which have no reputation concept.
#[derive(Debug, Serialize)]
struct BoardRow {
    transaction_id: TransactionId,
    provider: ParticipantId,
    resource_type: InstanceClass,
    available_count: u64,
    region: Region,
    price: Credits,
    duration: SharingDuration,
    #[serde(skip_serializing_if = "Option::is_none")]
    provider_rank: Option<Rank>,
    negotiator_ref: NegotiatorRef,
}

pub fn cmd_board(cmd: BoardCmd) -> Result<()> {
    match cmd {
        BoardCmd::Dump(args) => dump(args),
    }
}

fn dump(args: DumpArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.events)
        .with_context(|| format!("reading {}", args.events.display()))?;
    let events = from_ndjson(&text)?;
    let cutoff = args.at.unwrap_or(u64::MAX);

    let mut live: BTreeMap<TransactionId, BoardRow> = BTreeMap::new();
    for event in events {
        if event.time > cutoff {
            break;
        }
        match event.kind {
            EventKind::Publish {
                transaction_id,
                provider,
                resource_type,
                available_count,
                region,
                price,
                duration,
                provider_rank,
                negotiator_ref,
                ..
            } => {
                live.insert(
                    transaction_id,
                    BoardRow {
                        transaction_id,
                        provider,
                        resource_type,
                        available_count,
                        region,
                        price,
                        duration,
                        provider_rank,
                        negotiator_ref,
                    },
                );
            }
            EventKind::Decide {
                transaction_id,
                outcome: DecideOutcome::Accept,
                ..
            } => {
                live.remove(&transaction_id);
            }
            _ => {}
        }
    }

    let rows: Vec<&BoardRow> = live.values().collect();
    let text = serde_json::to_string_pretty(&rows)?;
    match args.output {
        Some(path) => {
            std::fs::write(&path, text)
                .with_context(|| format!("writing {}", path.display()))?;
            eprintln!("wrote {} ({} live entries)", path.display(), rows.len());
        }
        None => println!("{text}"),
    }
    Ok(())
}
