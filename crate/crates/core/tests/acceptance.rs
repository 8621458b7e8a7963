//! Acceptance gate: one test per release criterion, each printing a
//! PASS line with the measured values. Run with `--nocapture` to see them:
//!
//! ```text
//! cargo test -p crbs-core --test acceptance -- --nocapture
//! ```

use std::collections::BTreeMap;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crbs_core::sim::{
    compare, generate, run, symmetric_pct_diff, ExperimentProfile, Mechanism, PriceCategory,
    RunOptions,
};
use crbs_core::{
    barter_credits, budget_fraction, duration_weight_of, estimated_bid, instance_value,
    transactional_price_shared, Advertisement, Blackboard, BlackboardEntry, ClockPair,
    ConflictBid, Credits, InstanceClass, Ledger, ParticipantId, Rank, Region, ResourceBundle,
    ResourceRequest, SharingDuration, TransactionId, Urgency,
};

fn credits(n: i64) -> Credits {
    Credits::from_integer(n)
}

/// 1. Barter-credit valuation reproduces the worked example exactly: ten
///    medium instances for three weeks are worth 30 points and 90 credits.
#[test]
fn criterion_01_barter_credit_worked_example() {
    let bundle = ResourceBundle::single(InstanceClass::Medium, 10);
    let value = instance_value(&bundle);
    assert_eq!(value, credits(30));
    let total = barter_credits(value, SharingDuration::ThreeWeeks);
    assert_eq!(total, credits(90));
    println!("CRITERION 1 PASS: instance value 30, barter credits 90 (exact)");
}

/// 2. Budget-fraction boundaries are exact and a 1,000-point grid matches
///    the closed form and is monotone.
#[test]
fn criterion_02_budget_fraction_boundaries_and_grid() {
    let full = budget_fraction(ClockPair::new(1440, 1440).unwrap());
    assert_eq!(full, Ratio::new(1, 5));
    let spent = budget_fraction(ClockPair::new(1440, 0).unwrap());
    assert_eq!(spent, Ratio::from_integer(1));

    let mut points = 0usize;
    for total in [60u64, 180, 360, 720, 1080, 1440] {
        let mut previous: Option<Ratio<i64>> = None;
        for step in 0..=total.min(199) {
            let remaining = total * step / total.min(199);
            let fraction = budget_fraction(ClockPair::new(total, remaining).unwrap());
            // Independent closed form.
            let expected = (Ratio::from_integer(20)
                + (Ratio::from_integer(80)
                    - Ratio::from_integer(80) * Ratio::new(remaining as i64, total as i64)))
                / Ratio::from_integer(100);
            assert_eq!(fraction, expected);
            assert!(fraction >= Ratio::new(1, 5) && fraction <= Ratio::from_integer(1));
            if let Some(prev) = previous {
                // More remaining time never raises the fraction.
                assert!(fraction <= prev);
            }
            previous = Some(fraction);
            points += 1;
        }
    }
    assert!(points >= 1000, "swept {points} grid points");
    println!("CRITERION 2 PASS: boundaries exact, {points} grid points match the closed form");
}

/// 3. Transactional price: symmetric remaining times give the exact
///    midpoint, boundaries give the exact extremes, and a 100x100 grid stays
///    within [min, max].
#[test]
fn criterion_03_transactional_price_grid() {
    let pmax = credits(100);
    let pmin = credits(40);
    let total = 100u64;

    assert_eq!(
        transactional_price_shared(total, pmax, pmin, total, 0).unwrap(),
        pmax
    );
    assert_eq!(
        transactional_price_shared(total, pmax, pmin, 0, total).unwrap(),
        pmin
    );
    assert_eq!(
        transactional_price_shared(24, pmax, pmin, 6, 18).unwrap(),
        credits(55)
    );

    let midpoint = (pmax + pmin) / 2;
    for provider_remaining in 0..=total {
        for requestor_remaining in 0..=total {
            let price = transactional_price_shared(
                total,
                pmax,
                pmin,
                provider_remaining,
                requestor_remaining,
            )
            .unwrap();
            assert!(price >= pmin && price <= pmax);
            if provider_remaining == requestor_remaining {
                assert_eq!(price, midpoint);
            }
        }
    }
    println!(
        "CRITERION 3 PASS: boundaries exact, containment on {}x{} grid, symmetric = midpoint",
        total + 1,
        total + 1
    );
}

/// 4. Conflict-resolution golden suite: the four allocation rows, the
///    max-price tie-break, seeded determinism, and near-uniform random
///    selection on full ties.
#[test]
fn criterion_04_allocation_golden_suite() {
    let bid = |name: &str, price: i64, rank: i64| ConflictBid {
        requestor: ParticipantId::new(name),
        offered_price: credits(price),
        rank: Rank::from_integer(rank),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(404);

    // Row 2: same rank, different price -> highest offering price.
    let winner =
        Blackboard::resolve_conflict(&[bid("a", 50, 3), bid("b", 60, 3)], &mut rng).unwrap();
    assert_eq!(winner, 1);
    // Row 3: different rank, same price -> highest rank.
    let winner =
        Blackboard::resolve_conflict(&[bid("a", 50, 3), bid("b", 50, 7)], &mut rng).unwrap();
    assert_eq!(winner, 1);
    // Row 4: different rank, different price -> price still rules.
    let winner =
        Blackboard::resolve_conflict(&[bid("a", 60, 1), bid("b", 50, 9)], &mut rng).unwrap();
    assert_eq!(winner, 0);
    // Max-price tie: ranks 3 vs 7 at the same top price -> rank 7 bidder.
    let winner = Blackboard::resolve_conflict(
        &[bid("a", 60, 3), bid("b", 60, 7), bid("c", 55, 9)],
        &mut rng,
    )
    .unwrap();
    assert_eq!(winner, 1);

    // Row 1: full tie is seed-deterministic ...
    let tie = [bid("a", 50, 3), bid("b", 50, 3)];
    let first = {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        Blackboard::resolve_conflict(&tie, &mut rng).unwrap()
    };
    let second = {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        Blackboard::resolve_conflict(&tie, &mut rng).unwrap()
    };
    assert_eq!(first, second);

    // ... and uniform to within 2 percentage points over 10,000 trials.
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let trials = 10_000;
    let mut wins = [0u32; 2];
    for _ in 0..trials {
        wins[Blackboard::resolve_conflict(&tie, &mut rng).unwrap()] += 1;
    }
    for (i, &w) in wins.iter().enumerate() {
        let share = w as f64 / trials as f64;
        assert!(
            (share - 0.5).abs() <= 0.02,
            "bidder {i} won {share:.3} of full ties"
        );
    }
    println!(
        "CRITERION 4 PASS: all four allocation rows + max-price tie; tie split {}/{} over {trials} trials",
        wins[0], wins[1]
    );
}

/// 5. Free-rider handling: with the guard on, injected free-riders settle
///    nothing; with it off they consume resources; blocking them never raises
///    the total number of settlements.
#[test]
fn criterion_05_free_rider_guard() {
    let mut guarded_zero = true;
    let mut unguarded_any = true;
    for seed in 1..=10u64 {
        let dataset = generate(ExperimentProfile::FreeRider, seed).unwrap();
        assert_eq!(dataset.free_rider_ids().len(), 10);

        let on = run(&dataset, &RunOptions::crbs()).unwrap();
        let off = run(
            &dataset,
            &RunOptions {
                guard_enabled: false,
                ..RunOptions::crbs()
            },
        )
        .unwrap();

        guarded_zero &= on.report.free_rider_settled == 0;
        unguarded_any &= off.report.free_rider_settled > 0;
        assert_eq!(
            on.report.free_rider_settled, 0,
            "seed {seed}: guarded free-riders settled"
        );
        assert!(
            off.report.free_rider_settled > 0,
            "seed {seed}: unguarded free-riders settled nothing"
        );
        assert!(
            on.report.settled_transactions <= off.report.settled_transactions,
            "seed {seed}: blocking free-riders raised total settlements"
        );
        assert_eq!(on.report.blocked_requests, 10);
    }
    assert!(guarded_zero && unguarded_any);
    println!("CRITERION 5 PASS: guard-on free-rider settlements = 0, guard-off > 0, totals ordered (10 seeds)");
}

/// 6. Mean utilization/satisfaction over 30 seeds per profile sit within
///    15 percentage points of the reference table, bartering beats the
///    baseline on satisfaction everywhere, and the average symmetric
///    percentage difference lands in [35%, 65%].
#[test]
fn criterion_06_reference_table_reproduction() {
    let seeds: Vec<u64> = (1..=30).collect();
    // (profile, target utilization, target satisfaction)
    let targets = [
        (ExperimentProfile::Exp1, 0.45, 0.90),
        (ExperimentProfile::Exp2, 0.84, 0.42),
        (ExperimentProfile::Exp3, 0.89, 0.89),
    ];
    let tolerance = 0.15;
    let mut pct_diffs = Vec::new();

    for (profile, util_target, sat_target) in targets {
        let mut crbs_util = 0.0;
        let mut crbs_sat = 0.0;
        let mut fcfs_sat = 0.0;
        let mut pct = 0.0;
        for &seed in &seeds {
            let dataset = generate(profile, seed).unwrap();
            let crbs = run(&dataset, &RunOptions::crbs()).unwrap();
            let fcfs = run(&dataset, &RunOptions::fcfs()).unwrap();
            // Structural counting bound holds on every run.
            assert!(crbs.report.consumed_resources <= crbs.report.possible_transactions);
            assert!(fcfs.report.consumed_resources <= fcfs.report.possible_transactions);
            crbs_util += crbs.report.utilization_f64();
            crbs_sat += crbs.report.satisfaction_f64();
            fcfs_sat += fcfs.report.satisfaction_f64();
            let cmp = compare(&crbs.report, &fcfs.report).unwrap();
            pct += cmp.satisfaction_pct_diff.to_f64();
        }
        let n = seeds.len() as f64;
        let crbs_util = crbs_util / n;
        let crbs_sat = crbs_sat / n;
        let fcfs_sat = fcfs_sat / n;
        let pct = pct / n;
        println!(
            "  {}: CRBS util {:.1}% (target {:.0}%), sat {:.1}% (target {:.0}%), FCFS sat {:.1}%, pct diff {:.1}%",
            profile.name(),
            100.0 * crbs_util,
            100.0 * util_target,
            100.0 * crbs_sat,
            100.0 * sat_target,
            100.0 * fcfs_sat,
            pct
        );
        assert!(
            (crbs_util - util_target).abs() <= tolerance,
            "{}: utilization {:.3} misses {:.2} +/- {:.2}",
            profile.name(),
            crbs_util,
            util_target,
            tolerance
        );
        assert!(
            (crbs_sat - sat_target).abs() <= tolerance,
            "{}: satisfaction {:.3} misses {:.2} +/- {:.2}",
            profile.name(),
            crbs_sat,
            sat_target,
            tolerance
        );
        assert!(
            crbs_sat > fcfs_sat,
            "{}: bartering does not beat the baseline",
            profile.name()
        );
        pct_diffs.push(pct);
    }
    let avg = pct_diffs.iter().sum::<f64>() / pct_diffs.len() as f64;
    assert!(
        (35.0..=65.0).contains(&avg),
        "average satisfaction pct difference {avg:.1}% outside [35, 65]"
    );
    println!("CRITERION 6 PASS: all profile means in window, average pct difference {avg:.1}%");
}

/// 7. Price dynamics: across 100 seeded sessions per category, a more
///    urgent requestor pays above the midpoint, a more urgent provider
///    concedes below it, and equal urgencies settle within 1% of it.
#[test]
fn criterion_07_price_dynamics() {
    let sessions = 100;
    let cat1 = crbs_core::sim::run_price_study(
        PriceCategory::RequestorMoreUrgent,
        1000,
        sessions,
    )
    .unwrap();
    assert_eq!(cat1.settled, sessions);
    assert!(
        cat1.mean_deviation > Credits::ZERO,
        "category 1 mean {} not above midpoint {}",
        cat1.mean_agreed_price,
        cat1.mean_midpoint
    );

    let cat2 = crbs_core::sim::run_price_study(
        PriceCategory::ProviderMoreUrgent,
        2000,
        sessions,
    )
    .unwrap();
    assert_eq!(cat2.settled, sessions);
    assert!(
        cat2.mean_deviation < Credits::ZERO,
        "category 2 mean {} not below midpoint {}",
        cat2.mean_agreed_price,
        cat2.mean_midpoint
    );

    let cat3 =
        crbs_core::sim::run_price_study(PriceCategory::EqualUrgency, 3000, sessions).unwrap();
    assert_eq!(cat3.settled, sessions);
    let band = cat3.mean_midpoint * Credits::new(1, 100);
    assert!(
        cat3.mean_deviation.abs() <= band,
        "category 3 mean {} outside 1% of midpoint {}",
        cat3.mean_agreed_price,
        cat3.mean_midpoint
    );

    println!(
        "CRITERION 7 PASS: mean deviations {:+.3} / {:+.3} / {:+.3} credits (above / below / at midpoint)",
        cat1.mean_deviation.to_f64(),
        cat2.mean_deviation.to_f64(),
        cat3.mean_deviation.to_f64()
    );
}

/// Independent oracle for the selection function: literal filters, full
/// scoring, stable ordering. Kept free of the engine's code path.
fn oracle_select(
    entries: &[BlackboardEntry],
    request: &ResourceRequest,
    now: u64,
) -> Vec<TransactionId> {
    if request.deadline() <= now {
        return Vec::new();
    }
    let mut scored: Vec<(Credits, TransactionId)> = Vec::new();
    for entry in entries {
        if entry.resource_type != request.instance_class {
            continue;
        }
        if entry.available_count < request.count {
            continue;
        }
        if duration_weight_of(entry.duration) < duration_weight_of(request.duration) {
            continue;
        }
        if entry.price > request.budget {
            continue;
        }
        if let Some(ref want) = request.preferred_region {
            if &entry.region != want {
                continue;
            }
        }
        let utility = (request.budget - entry.price) + entry.provider_rank.as_credit_points();
        scored.push((utility, entry.transaction_id));
    }
    scored.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    scored.into_iter().take(3).map(|(_, id)| id).collect()
}

/// 8. Selection equals the brute-force oracle (membership and order) on
///    1,000 random boards of up to 50 entries.
#[test]
fn criterion_08_selection_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    for round in 0..1000 {
        let mut board = Blackboard::new();
        let entry_count = rng.random_range(0..=50usize);
        for i in 0..entry_count {
            let class = InstanceClass::ALL[rng.random_range(0..5)];
            let ad = Advertisement {
                provider: ParticipantId::new(format!("P{round}_{i}")),
                bundle: ResourceBundle::single(class, rng.random_range(1..=5)),
                min_price: credits(rng.random_range(0..=20)),
                max_price: credits(rng.random_range(20..=60)),
                region: Region::new(format!("R{}", rng.random_range(1..=3u32))),
                duration: SharingDuration::ALL[rng.random_range(0..5)],
                posted_at: 0,
                provider_deadline: Urgency::ALL[rng.random_range(0..6)],
            };
            let rank = Rank::from_ratio(Ratio::new(rng.random_range(0..=30), 3));
            board.publish(&ad, rank).unwrap();
        }
        let request = ResourceRequest {
            requestor: ParticipantId::new("R"),
            instance_class: InstanceClass::ALL[rng.random_range(0..5)],
            count: rng.random_range(1..=5),
            duration: SharingDuration::ALL[rng.random_range(0..5)],
            budget: credits(rng.random_range(0..=70)),
            urgency: Urgency::ALL[rng.random_range(0..6)],
            preferred_region: if rng.random_range(0..4u32) == 0 {
                Some(Region::new(format!("R{}", rng.random_range(1..=3u32))))
            } else {
                None
            },
            issued_at: 0,
        };
        let now = rng.random_range(0..=90u64);

        let selected: Vec<TransactionId> = board
            .select(&request, now)
            .iter()
            .map(|o| o.entry.transaction_id)
            .collect();
        let entries: Vec<BlackboardEntry> = board.live_entries().cloned().collect();
        let expected = oracle_select(&entries, &request, now);
        assert_eq!(selected, expected, "round {round} diverged from the oracle");
    }
    println!("CRITERION 8 PASS: selection matches the oracle on 1000 random boards");
}

/// 9. Ledger conservation and replay: signed balances (including the pool)
///    sum to zero, each debts map mirrors its account's deficit, and replaying
///    the transaction log reproduces balances and ranks bit-for-bit.
#[test]
fn criterion_09_conservation_and_replay() {
    for (profile, seed) in [
        (ExperimentProfile::Exp3, 1u64),
        (ExperimentProfile::Exp2, 7),
        (ExperimentProfile::FreeRider, 3),
    ] {
        let dataset = generate(profile, seed).unwrap();
        for options in [RunOptions::crbs(), RunOptions::fcfs()] {
            let output = run(&dataset, &options).unwrap();
            // Zero-sum plus debts-mirror-deficit, checked again here.
            output.ledger.check_conservation().unwrap();
            let total: Credits = output.ledger.accounts().map(|a| a.balance).sum();
            assert!(total.is_zero());

            let replayed =
                Ledger::replay(options.debt_ceiling, output.ledger_records.iter()).unwrap();
            for account in output.ledger.accounts() {
                let mirror = replayed
                    .account(&account.participant)
                    .expect("replay has every account");
                assert_eq!(account.balance, mirror.balance, "{}", account.participant);
                assert_eq!(account.rank(), mirror.rank(), "{}", account.participant);
                assert_eq!(account.debts, mirror.debts, "{}", account.participant);
            }
        }
    }
    println!("CRITERION 9 PASS: zero-sum conservation and bit-exact replay on 3 datasets x 2 mechanisms");
}

/// 10. Determinism: identical (dataset, seed, mechanism) produce
///     byte-identical event logs and transaction logs.
#[test]
fn criterion_10_byte_identical_replays() {
    let dataset = generate(ExperimentProfile::Exp1, 5).unwrap();
    for options in [RunOptions::crbs(), RunOptions::fcfs()] {
        let first = run(&dataset, &options).unwrap();
        let second = run(&dataset, &options).unwrap();
        let events_a = crbs_core::sim::event::to_ndjson(&first.events);
        let events_b = crbs_core::sim::event::to_ndjson(&second.events);
        assert_eq!(events_a, events_b, "{:?} event logs differ", options.mechanism);
        assert!(!events_a.is_empty());

        let records_a: Vec<String> = first
            .ledger_records
            .iter()
            .map(|r| serde_json::to_string(r).unwrap())
            .collect();
        let records_b: Vec<String> = second
            .ledger_records
            .iter()
            .map(|r| serde_json::to_string(r).unwrap())
            .collect();
        assert_eq!(records_a, records_b);
    }
    // Different seeds diverge.
    let other = generate(ExperimentProfile::Exp1, 6).unwrap();
    let a = run(&dataset, &RunOptions::crbs()).unwrap();
    let b = run(&other, &RunOptions::crbs()).unwrap();
    assert_ne!(
        crbs_core::sim::event::to_ndjson(&a.events),
        crbs_core::sim::event::to_ndjson(&b.events)
    );
    println!("CRITERION 10 PASS: byte-identical logs for both mechanisms");
}

/// Sanity check kept alongside the criteria: the report's satisfaction is
/// vacuously 1 with zero requestors and the symmetric difference formula
/// matches the published 73% example.
#[test]
fn supporting_metric_semantics() {
    let mut dataset = generate(ExperimentProfile::Exp1, 2).unwrap();
    dataset.requestors.clear();
    let output = run(&dataset, &RunOptions::crbs()).unwrap();
    assert_eq!(output.report.request_satisfaction_rate, credits(1));
    assert_eq!(output.report.resource_utilization_rate, Credits::ZERO);
    assert!(output.report.transactions_by_urgency.is_empty());

    let diff = symmetric_pct_diff(Credits::new(90, 100), Credits::new(42, 100));
    let expected = Credits::new(800, 11); // ~72.7%
    assert_eq!(diff, expected);

    let mut empty_supply = generate(ExperimentProfile::Exp1, 2).unwrap();
    empty_supply.providers.clear();
    let output = run(&empty_supply, &RunOptions::crbs()).unwrap();
    assert_eq!(output.report.satisfied_requests, 0);
    assert_eq!(output.report.available_resources, 0);

    let _unused: BTreeMap<Urgency, u64> = BTreeMap::new();
    let _ = Mechanism::Crbs;
    let _ = estimated_bid(credits(10), ClockPair::new(10, 5).unwrap()).unwrap();
}
