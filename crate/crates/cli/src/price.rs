//! Formula spot-checks: bundle valuation, the budget fraction and bid, and
//! the transactional price.

use anyhow::{anyhow, bail, Result};
use clap::{Args, Subcommand};

use crbs_core::{
    barter_credits, budget_fraction, estimated_bid, instance_value, transactional_price_shared,
    ClockPair, Credits, InstanceClass, ResourceBundle, SharingDuration,
};

#[derive(Subcommand)]
pub enum PriceCmd {
    /// Instance value and barter credits for a bundle shared over a duration.
    Credits(CreditsArgs),
    /// Fraction of budget a requestor should commit given its clock.
    Fraction(ClockArgs),
    /// The bid itself: budget times the committed fraction.
    Bid(BidArgs),
    /// The blended settlement price between a provider's price band.
    Transactional(TransactionalArgs),
}

#[derive(Args)]
pub struct CreditsArgs {
    /// Bundle as comma-separated class=count pairs, e.g. `medium=10` or
    /// `small=5,xlarge=2`.
    #[arg(long)]
    bundle: String,
    /// Sharing duration: 1w, 2w, 3w, 1m, or 2m.
    #[arg(long)]
    duration: String,
}

#[derive(Args)]
pub struct ClockArgs {
    /// Total time in the deadline window (any unit).
    #[arg(long)]
    tt: u64,
    /// Remaining time, same unit as --tt.
    #[arg(long)]
    rt: u64,
}

#[derive(Args)]
pub struct BidArgs {
    #[arg(long)]
    budget: Credits,
    #[arg(long)]
    tt: u64,
    #[arg(long)]
    rt: u64,
}

#[derive(Args)]
pub struct TransactionalArgs {
    /// Shared total window for both parties (any unit).
    #[arg(long)]
    tt: u64,
    #[arg(long)]
    pmax: Credits,
    #[arg(long)]
    pmin: Credits,
    /// Provider's remaining time.
    #[arg(long)]
    rtp: u64,
    /// Requestor's remaining time.
    #[arg(long)]
    rtr: u64,
}

fn parse_class(s: &str) -> Result<InstanceClass> {
    match s.to_ascii_lowercase().as_str() {
        "micro" => Ok(InstanceClass::Micro),
        "small" => Ok(InstanceClass::Small),
        "medium" => Ok(InstanceClass::Medium),
        "large" => Ok(InstanceClass::Large),
        "xlarge" | "x-large" => Ok(InstanceClass::XLarge),
        other => bail!("unknown instance class {other:?}"),
    }
}

fn parse_duration(s: &str) -> Result<SharingDuration> {
    match s.to_ascii_lowercase().as_str() {
        "1w" | "oneweek" => Ok(SharingDuration::OneWeek),
        "2w" | "twoweeks" => Ok(SharingDuration::TwoWeeks),
        "3w" | "threeweeks" => Ok(SharingDuration::ThreeWeeks),
        "1m" | "onemonth" => Ok(SharingDuration::OneMonth),
        "2m" | "twomonths" => Ok(SharingDuration::TwoMonths),
        other => bail!("unknown sharing duration {other:?} (use 1w/2w/3w/1m/2m)"),
    }
}

fn parse_bundle(s: &str) -> Result<ResourceBundle> {
    let mut bundle = ResourceBundle::new();
    for part in s.split(',') {
        let (class, count) = part
            .split_once('=')
            .ok_or_else(|| anyhow!("bundle items look like class=count, got {part:?}"))?;
        let count: u64 = count.trim().parse()?;
        bundle = bundle.with(parse_class(class.trim())?, count);
    }
    if bundle.is_empty() {
        bail!("bundle is empty");
    }
    Ok(bundle)
}

/// Canonical rational plus a decimal gloss when it is not an integer.
fn show(amount: Credits) -> String {
    let canonical = amount.canonical();
    if canonical.contains('/') {
        format!("{canonical} ({:.4})", amount.to_f64())
    } else {
        canonical
    }
}

pub fn cmd_price(cmd: PriceCmd) -> Result<()> {
    match cmd {
        PriceCmd::Credits(args) => {
            let bundle = parse_bundle(&args.bundle)?;
            let duration = parse_duration(&args.duration)?;
            let value = instance_value(&bundle);
            let credits = barter_credits(value, duration);
            println!("instance value: {}", show(value));
            println!("barter credits: {}", show(credits));
        }
        PriceCmd::Fraction(args) => {
            let clock = ClockPair::new(args.tt, args.rt)?;
            let fraction = budget_fraction(clock);
            let as_credits = Credits::new(*fraction.numer(), *fraction.denom());
            println!("budget fraction: {}", show(as_credits));
        }
        PriceCmd::Bid(args) => {
            let clock = ClockPair::new(args.tt, args.rt)?;
            let bid = estimated_bid(args.budget, clock)?;
            println!("estimated bid: {}", show(bid));
        }
        PriceCmd::Transactional(args) => {
            let price =
                transactional_price_shared(args.tt, args.pmax, args.pmin, args.rtp, args.rtr)?;
            println!("transactional price: {}", show(price));
        }
    }
    Ok(())
}
