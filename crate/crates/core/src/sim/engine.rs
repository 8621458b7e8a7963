//! The single-threaded discrete-event market engine.
//!
//! Actions (ad publications, request arrivals, wake timers, urgency
//! expiries) are queued by (minute, sequence) and processed one minute at a
//! time. Within a minute the order is fixed: expiries, publications,
//! arrivals, timer wakes, then negotiation rounds until quiescent. All
//! randomness (conflict coin tosses, feedback scores) flows from one seeded
//! stream, so a run is a pure function of (dataset, options).
//!
//! Under the bartering mechanism, sessions negotiate via the blackboard;
//! under the baseline, each request is matched once, on arrival, to the
//! first price-feasible listing in publication order at its listed price,
//! ignoring rank and urgency.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::blackboard::{Blackboard, BlackboardEntry, ConflictBid, TransactionId};
use crate::credits::{Credits, Rank};
use crate::domain::{duration_weight_of, SimTime, Urgency};
use crate::ledger::{Feedback, GuardDecision, Ledger, LedgerError, LedgerRecord};
use crate::negotiation::{
    Decision, NegotiationError, NegotiationSession, SessionId, SessionState, SlaRecord,
    WakeReason,
};
use crate::sim::dataset::{pick_scores, Dataset};
use crate::sim::event::{DecideOutcome, EventKind, SimEvent};
use crate::sim::metrics::{
    dataset_fingerprint, Mechanism, MetricsReport, PriceCategory,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub mechanism: Mechanism,
    /// Whether the debt guard blocks indebted requestors (bartering
    /// mechanism only; the baseline has no debt concept).
    pub guard_enabled: bool,
    /// Most negative balance tolerated before blocking.
    pub debt_ceiling: Credits,
}

impl RunOptions {
    pub fn crbs() -> Self {
        RunOptions {
            mechanism: Mechanism::Crbs,
            guard_enabled: true,
            debt_ceiling: Credits::ZERO,
        }
    }

    pub fn fcfs() -> Self {
        RunOptions {
            mechanism: Mechanism::Fcfs,
            guard_enabled: false,
            debt_ceiling: Credits::ZERO,
        }
    }
}

#[derive(Debug)]
pub struct RunOutput {
    pub events: Vec<SimEvent>,
    pub ledger_records: Vec<LedgerRecord>,
    pub slas: Vec<SlaRecord>,
    pub report: MetricsReport,
    pub ledger: Ledger,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("dataset invalid: {0}")]
    Dataset(#[from] crate::sim::dataset::DatasetError),
    #[error("ledger rejected an operation: {0}")]
    Ledger(#[from] LedgerError),
    #[error("blackboard rejected an operation: {0}")]
    Blackboard(#[from] crate::blackboard::BlackboardError),
    #[error("negotiation protocol desync: {0}")]
    Negotiation(#[from] NegotiationError),
    #[error("invariant violated: {0}")]
    InvariantViolated(String),
}

/// Run one dataset under one mechanism.
pub fn run(dataset: &Dataset, options: &RunOptions) -> Result<RunOutput, RunError> {
    dataset.validate()?;
    let mut engine = Engine::new(dataset, options);
    engine.prime()?;
    engine.drive()?;
    engine.finish()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Action {
    Expire(SessionId),
    Publish(usize),
    Open(usize),
    WakeTimer(SessionId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Queued {
    time: SimTime,
    seq: u64,
    action: Action,
}

struct SessionCtx {
    session: NegotiationSession,
    free_rider: bool,
}

struct Engine<'a> {
    dataset: &'a Dataset,
    options: RunOptions,
    board: Blackboard,
    ledger: Ledger,
    sessions: BTreeMap<SessionId, SessionCtx>,
    queue: BinaryHeap<Reverse<Queued>>,
    queue_seq: u64,
    events: Vec<SimEvent>,
    event_seq: u64,
    records: Vec<LedgerRecord>,
    slas: Vec<SlaRecord>,
    rng: ChaCha8Rng,
    // Metrics bookkeeping.
    consumed_roots: BTreeSet<TransactionId>,
    transactions_by_urgency: BTreeMap<Urgency, u64>,
    prices_by_category: BTreeMap<PriceCategory, Vec<Credits>>,
    blocked_requests: u64,
    free_rider_settled: u64,
    /// Urgency of each live entry's provider, for price categorisation.
    provider_urgency: BTreeMap<TransactionId, Urgency>,
}

impl<'a> Engine<'a> {
    fn new(dataset: &'a Dataset, options: &RunOptions) -> Self {
        Engine {
            dataset,
            options: *options,
            board: Blackboard::new(),
            ledger: Ledger::new(options.debt_ceiling),
            sessions: BTreeMap::new(),
            queue: BinaryHeap::new(),
            queue_seq: 0,
            events: Vec::new(),
            event_seq: 0,
            records: Vec::new(),
            slas: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(dataset.seed),
            consumed_roots: BTreeSet::new(),
            transactions_by_urgency: BTreeMap::new(),
            prices_by_category: BTreeMap::new(),
            blocked_requests: 0,
            free_rider_settled: 0,
            provider_urgency: BTreeMap::new(),
        }
    }

    /// Register every participant and queue the arrival actions.
    fn prime(&mut self) -> Result<(), RunError> {
        for provider in &self.dataset.providers {
            self.ledger.register(
                provider.id.clone(),
                0,
                &provider.prior_feedback,
                &BTreeMap::new(),
            )?;
            self.records.push(LedgerRecord::Register {
                participant: provider.id.clone(),
                joined_at: 0,
                prior_feedback: provider.prior_feedback.clone(),
                preloaded_debt: BTreeMap::new(),
            });
        }
        for requestor in &self.dataset.requestors {
            self.ledger.register(
                requestor.id.clone(),
                0,
                &[],
                &requestor.preloaded_debt,
            )?;
            self.records.push(LedgerRecord::Register {
                participant: requestor.id.clone(),
                joined_at: 0,
                prior_feedback: Vec::new(),
                preloaded_debt: requestor.preloaded_debt.clone(),
            });
        }
        // Queue arrivals in spec order so same-minute arrivals keep their
        // dataset ordering.
        for (i, provider) in self.dataset.providers.iter().enumerate() {
            self.schedule(provider.posted_at, Action::Publish(i));
        }
        for (i, requestor) in self.dataset.requestors.iter().enumerate() {
            self.schedule(requestor.issued_at, Action::Open(i));
        }
        Ok(())
    }

    /// Process queued minutes until the market is quiescent.
    fn drive(&mut self) -> Result<(), RunError> {
        while let Some(Reverse(head)) = self.queue.peek().copied() {
            let now = head.time;
            let mut batch = Vec::new();
            while let Some(Reverse(q)) = self.queue.peek().copied() {
                if q.time != now {
                    break;
                }
                self.queue.pop();
                batch.push(q);
            }
            // Fixed stage order within the minute; `Queued` orders actions
            // by (time, seq), and the stages pick their own kinds out.
            for q in &batch {
                if let Action::Expire(sid) = q.action {
                    self.stage_expire(sid, now);
                }
            }
            for q in &batch {
                if let Action::Publish(idx) = q.action {
                    self.stage_publish(idx, now)?;
                }
            }
            for q in &batch {
                if let Action::Open(idx) = q.action {
                    self.stage_open(idx, now)?;
                }
            }
            for q in &batch {
                if let Action::WakeTimer(sid) = q.action {
                    self.stage_timer_wake(sid, now);
                }
            }
            if self.options.mechanism == Mechanism::Crbs {
                self.negotiation_rounds(now)?;
            }
        }
        Ok(())
    }

    fn finish(self) -> Result<RunOutput, RunError> {
        self.ledger
            .check_conservation()
            .map_err(RunError::InvariantViolated)?;

        let requests = self.dataset.requestors.len() as u64;
        let available = self.dataset.providers.len() as u64;
        let satisfied = self.slas.len() as u64;
        let consumed = self.consumed_roots.len() as u64;
        if consumed > available {
            return Err(RunError::InvariantViolated(format!(
                "consumed {consumed} root resources from {available} advertisements"
            )));
        }

        let satisfaction = if requests == 0 {
            Credits::from_integer(1)
        } else {
            Credits::new(satisfied as i64, requests as i64)
        };
        let utilization = if available == 0 {
            Credits::ZERO
        } else {
            Credits::new(consumed as i64, available as i64)
        };
        let mean_price_by_category = self
            .prices_by_category
            .iter()
            .map(|(&cat, prices)| {
                let sum: Credits = prices.iter().copied().sum();
                (cat, sum / prices.len() as i64)
            })
            .collect();

        let report = MetricsReport {
            mechanism: self.options.mechanism,
            seed: self.dataset.seed,
            profile: self.dataset.profile.clone(),
            dataset_fingerprint: dataset_fingerprint(self.dataset),
            providers: self.dataset.providers.len() as u64,
            requestors: requests,
            available_resources: available,
            consumed_resources: consumed,
            possible_transactions: (self.dataset.providers.len().min(self.dataset.requestors.len()))
                as u64,
            settled_transactions: satisfied,
            satisfied_requests: satisfied,
            blocked_requests: self.blocked_requests,
            free_rider_count: self.dataset.free_rider_ids().len() as u64,
            free_rider_settled: self.free_rider_settled,
            resource_utilization_rate: utilization,
            request_satisfaction_rate: satisfaction,
            transactions_by_urgency: self.transactions_by_urgency,
            mean_price_by_category,
        };

        Ok(RunOutput {
            events: self.events,
            ledger_records: self.records,
            slas: self.slas,
            report,
            ledger: self.ledger,
        })
    }

    // ------------------------------------------------------------------
    // Stages
    // ------------------------------------------------------------------

    fn stage_expire(&mut self, sid: SessionId, now: SimTime) {
        let Some(ctx) = self.sessions.get_mut(&sid) else {
            return;
        };
        if ctx.session.is_terminal() {
            return;
        }
        ctx.session.expire();
        self.emit(now, EventKind::Expire { session_id: sid });
    }

    fn stage_publish(&mut self, idx: usize, now: SimTime) -> Result<(), RunError> {
        let spec = &self.dataset.providers[idx];
        let ad = spec.advertisement();
        let rank = match self.options.mechanism {
            Mechanism::Crbs => self.ledger.rank_of(&spec.id),
            Mechanism::Fcfs => Rank::ZERO,
        };
        let entry = self.board.publish(&ad, rank)?;
        self.provider_urgency
            .insert(entry.transaction_id, spec.urgency);
        let event_rank = match self.options.mechanism {
            Mechanism::Crbs => Some(entry.provider_rank),
            Mechanism::Fcfs => None,
        };
        self.emit(
            now,
            EventKind::Publish {
                transaction_id: entry.transaction_id,
                provider: entry.provider.clone(),
                resource_type: entry.resource_type,
                available_count: entry.available_count,
                region: entry.region.clone(),
                price: entry.price,
                duration: entry.duration,
                provider_rank: event_rank,
                negotiator_ref: entry.negotiator_ref,
                relist_of: None,
            },
        );
        Ok(())
    }

    fn stage_open(&mut self, idx: usize, now: SimTime) -> Result<(), RunError> {
        let spec = &self.dataset.requestors[idx];
        let request = spec.request();
        let sid = SessionId(idx as u64);

        match self.options.mechanism {
            Mechanism::Crbs => {
                let refused = if self.options.guard_enabled {
                    self.ledger.guard(&spec.id)? == GuardDecision::Blocked
                } else {
                    false
                };
                self.emit(
                    now,
                    EventKind::Request {
                        session_id: sid,
                        requestor: spec.id.clone(),
                        resource_type: spec.resource_type,
                        count: spec.count,
                        duration: spec.duration,
                        budget: spec.budget,
                        urgency: spec.urgency,
                        preferred_region: spec.preferred_region.clone(),
                        refused,
                    },
                );
                if refused {
                    self.blocked_requests += 1;
                    let mut session =
                        NegotiationSession::open(sid, request, &Blackboard::new(), now);
                    session.expire();
                    self.sessions.insert(
                        sid,
                        SessionCtx {
                            session,
                            free_rider: spec.is_debtor(),
                        },
                    );
                    return Ok(());
                }
                let session = NegotiationSession::open(sid, request.clone(), &self.board, now);
                if let Some(wakeup) = session.next_wakeup {
                    self.schedule(wakeup, Action::WakeTimer(sid));
                }
                self.schedule(request.deadline(), Action::Expire(sid));
                self.sessions.insert(
                    sid,
                    SessionCtx {
                        session,
                        free_rider: spec.is_debtor(),
                    },
                );
            }
            Mechanism::Fcfs => {
                self.emit(
                    now,
                    EventKind::Request {
                        session_id: sid,
                        requestor: spec.id.clone(),
                        resource_type: spec.resource_type,
                        count: spec.count,
                        duration: spec.duration,
                        budget: spec.budget,
                        urgency: spec.urgency,
                        preferred_region: spec.preferred_region.clone(),
                        refused: false,
                    },
                );
                self.fcfs_match(sid, idx, now)?;
            }
        }
        Ok(())
    }

    fn stage_timer_wake(&mut self, sid: SessionId, now: SimTime) {
        let Some(ctx) = self.sessions.get_mut(&sid) else {
            return;
        };
        // Skip timers that were superseded by an earlier wake.
        if ctx.session.state != SessionState::Waiting
            || ctx.session.next_wakeup != Some(now)
        {
            return;
        }
        ctx.session.wake(&self.board, now, WakeReason::Timer);
        self.emit(
            now,
            EventKind::Wake {
                session_id: sid,
                reason: WakeReason::Timer,
            },
        );
        if let Some(wakeup) = self.sessions[&sid].session.next_wakeup {
            self.schedule(wakeup, Action::WakeTimer(sid));
        }
    }

    // ------------------------------------------------------------------
    // Bartering negotiation
    // ------------------------------------------------------------------

    /// Run cfp rounds until no session holds a live offer: group same-minute
    /// bids per entry, resolve conflicts, quote and decide for the winners,
    /// and wake parked sessions whenever a publication (including a relisted
    /// leftover) changes the board.
    fn negotiation_rounds(&mut self, now: SimTime) -> Result<(), RunError> {
        loop {
            let woke = self.notify_waiting_sessions(now);
            let groups = self.collect_bids(now);
            if groups.is_empty() {
                if !woke {
                    break;
                }
                continue;
            }
            for (entry_id, bidders) in groups {
                if self.board.get(entry_id).is_none() {
                    // Entry vanished while an earlier group settled; the
                    // sessions will regroup next round.
                    continue;
                }
                let winner = self.pick_winner(entry_id, &bidders, now)?;
                self.negotiate_entry(winner, entry_id, now)?;
            }
        }
        Ok(())
    }

    /// Wake every waiting session that has not seen the current board
    /// version. Returns true when any session woke.
    fn notify_waiting_sessions(&mut self, now: SimTime) -> bool {
        let version = self.board.version();
        let stale: Vec<SessionId> = self
            .sessions
            .iter()
            .filter(|(_, ctx)| {
                ctx.session.state == SessionState::Waiting
                    && ctx.session.seen_board_version < version
            })
            .map(|(&sid, _)| sid)
            .collect();
        let mut woke = false;
        for sid in stale {
            let ctx = self.sessions.get_mut(&sid).unwrap();
            ctx.session
                .wake(&self.board, now, WakeReason::NewPublication);
            self.emit(
                now,
                EventKind::Wake {
                    session_id: sid,
                    reason: WakeReason::NewPublication,
                },
            );
            if let Some(wakeup) = self.sessions[&sid].session.next_wakeup {
                self.schedule(wakeup, Action::WakeTimer(sid));
            }
            woke = true;
        }
        woke
    }

    /// Advance every quoting session past retired shortlist entries and
    /// group the survivors by the entry their cursor points at.
    fn collect_bids(&mut self, now: SimTime) -> BTreeMap<TransactionId, Vec<SessionId>> {
        let mut groups: BTreeMap<TransactionId, Vec<SessionId>> = BTreeMap::new();
        let sids: Vec<SessionId> = self
            .sessions
            .iter()
            .filter(|(_, ctx)| ctx.session.state == SessionState::AwaitingQuote)
            .map(|(&sid, _)| sid)
            .collect();
        for sid in sids {
            loop {
                let offer_id = self.sessions[&sid]
                    .session
                    .current_offer()
                    .map(|o| o.entry.transaction_id);
                let Some(id) = offer_id else { break };
                if self.board.get(id).is_some() {
                    groups.entry(id).or_default().push(sid);
                    break;
                }
                // Retired under us: fail over to the next offer.
                let parked_wakeup = {
                    let ctx = self.sessions.get_mut(&sid).unwrap();
                    ctx.session.advance_cursor(now);
                    if ctx.session.state != SessionState::AwaitingQuote {
                        Some(ctx.session.next_wakeup)
                    } else {
                        None
                    }
                };
                self.emit(
                    now,
                    EventKind::Decide {
                        session_id: sid,
                        transaction_id: id,
                        quoted: None,
                        bid: None,
                        outcome: DecideOutcome::Stale,
                    },
                );
                if let Some(wakeup) = parked_wakeup {
                    if let Some(at) = wakeup {
                        self.schedule(at, Action::WakeTimer(sid));
                    }
                    break;
                }
            }
        }
        groups
    }

    /// Resolve a contested entry; losers are redirected to their next
    /// shortlist offers.
    fn pick_winner(
        &mut self,
        _entry_id: TransactionId,
        bidders: &[SessionId],
        now: SimTime,
    ) -> Result<SessionId, RunError> {
        if bidders.len() == 1 {
            return Ok(bidders[0]);
        }
        let mut bids = Vec::with_capacity(bidders.len());
        for &sid in bidders {
            let ctx = &self.sessions[&sid];
            let request = &ctx.session.request;
            let clock = crate::pricing::ClockPair::new(
                request.urgency.deadline_minutes(),
                request.remaining_at(now),
            )
            .map_err(NegotiationError::from)?;
            let offered = crate::pricing::estimated_bid(request.budget, clock)
                .map_err(NegotiationError::from)?;
            bids.push(ConflictBid {
                requestor: request.requestor.clone(),
                offered_price: offered,
                rank: self.ledger.rank_of(&request.requestor),
            });
        }
        let winner_idx = Blackboard::resolve_conflict(&bids, &mut self.rng)
            .expect("bid set is non-empty");
        let winner = bidders[winner_idx];
        for &sid in bidders {
            if sid == winner {
                continue;
            }
            let parked_wakeup = {
                let ctx = self.sessions.get_mut(&sid).unwrap();
                ctx.session.advance_cursor(now);
                if ctx.session.state != SessionState::AwaitingQuote {
                    ctx.session.next_wakeup
                } else {
                    None
                }
            };
            if let Some(wakeup) = parked_wakeup {
                self.schedule(wakeup, Action::WakeTimer(sid));
            }
        }
        Ok(winner)
    }

    /// One cfp against one live entry: quote, decide, and settle or move on.
    fn negotiate_entry(
        &mut self,
        sid: SessionId,
        entry_id: TransactionId,
        now: SimTime,
    ) -> Result<(), RunError> {
        let quote_result = {
            let ctx = self.sessions.get_mut(&sid).unwrap();
            ctx.session.quote(&self.board, now)
        };
        let quoted = match quote_result {
            Ok(q) => q,
            Err(NegotiationError::EntryRetired(id)) => {
                let parked_wakeup = {
                    let ctx = self.sessions.get_mut(&sid).unwrap();
                    ctx.session.advance_cursor(now);
                    ctx.session.next_wakeup
                };
                self.emit(
                    now,
                    EventKind::Decide {
                        session_id: sid,
                        transaction_id: id,
                        quoted: None,
                        bid: None,
                        outcome: DecideOutcome::Stale,
                    },
                );
                if let Some(wakeup) = parked_wakeup {
                    self.schedule(wakeup, Action::WakeTimer(sid));
                }
                return Ok(());
            }
            Err(e) => return Err(e.into()),
        };
        self.emit(
            now,
            EventKind::Quote {
                session_id: sid,
                transaction_id: entry_id,
                quoted,
            },
        );
        let (decision, bid) = {
            let ctx = self.sessions.get_mut(&sid).unwrap();
            let request = &ctx.session.request;
            let clock = crate::pricing::ClockPair::new(
                request.urgency.deadline_minutes(),
                request.remaining_at(now),
            )
            .map_err(NegotiationError::from)?;
            let bid = crate::pricing::estimated_bid(request.budget, clock)
                .map_err(NegotiationError::from)?;
            let decision = ctx.session.decide(quoted, now).map_err(RunError::from)?;
            (decision, bid)
        };
        match decision {
            Decision::Accepted => {
                self.emit(
                    now,
                    EventKind::Decide {
                        session_id: sid,
                        transaction_id: entry_id,
                        quoted: Some(quoted),
                        bid: Some(bid),
                        outcome: DecideOutcome::Accept,
                    },
                );
                self.settle_deal(sid, entry_id, quoted, now)?;
            }
            Decision::Rejected => {
                self.emit(
                    now,
                    EventKind::Decide {
                        session_id: sid,
                        transaction_id: entry_id,
                        quoted: Some(quoted),
                        bid: Some(bid),
                        outcome: DecideOutcome::Reject,
                    },
                );
                let parked_wakeup = {
                    let ctx = &self.sessions[&sid];
                    if ctx.session.state != SessionState::AwaitingQuote {
                        ctx.session.next_wakeup
                    } else {
                        None
                    }
                };
                if let Some(wakeup) = parked_wakeup {
                    self.schedule(wakeup, Action::WakeTimer(sid));
                }
            }
        }
        Ok(())
    }

    /// Retire the entry (relisting any leftover), emit the SLA, settle the
    /// ledger, and record the requestor's feedback on the provider.
    fn settle_deal(
        &mut self,
        sid: SessionId,
        entry_id: TransactionId,
        agreed_price: Credits,
        now: SimTime,
    ) -> Result<(), RunError> {
        let root = self
            .board
            .root_of(entry_id)
            .expect("live entries have lineage");
        let provider_deadline = self.provider_urgency[&entry_id];
        let (request, free_rider) = {
            let ctx = &self.sessions[&sid];
            (ctx.session.request.clone(), ctx.free_rider)
        };
        let (retired, leftover) = self.board.consume(entry_id, request.count)?;
        if let Some(ref relist) = leftover {
            self.provider_urgency
                .insert(relist.transaction_id, provider_deadline);
            let event_rank = match self.options.mechanism {
                Mechanism::Crbs => Some(relist.provider_rank),
                Mechanism::Fcfs => None,
            };
            self.emit(
                now,
                EventKind::Publish {
                    transaction_id: relist.transaction_id,
                    provider: relist.provider.clone(),
                    resource_type: relist.resource_type,
                    available_count: relist.available_count,
                    region: relist.region.clone(),
                    price: relist.price,
                    duration: relist.duration,
                    provider_rank: event_rank,
                    negotiator_ref: relist.negotiator_ref,
                    relist_of: Some(retired.transaction_id),
                },
            );
        }

        let sla = SlaRecord {
            transaction_id: retired.transaction_id,
            provider: retired.provider.clone(),
            requestor: request.requestor.clone(),
            resource_type: retired.resource_type,
            count: request.count,
            duration: retired.duration,
            agreed_price,
            concluded_at: now,
        };
        self.ledger.settle(&sla)?;
        self.records.push(LedgerRecord::Sla(sla.clone()));
        self.slas.push(sla.clone());

        self.consumed_roots.insert(root);
        *self
            .transactions_by_urgency
            .entry(request.urgency)
            .or_insert(0) += 1;
        let category = PriceCategory::classify(request.urgency, provider_deadline);
        self.prices_by_category
            .entry(category)
            .or_default()
            .push(agreed_price);
        if free_rider {
            self.free_rider_settled += 1;
        }

        if self.options.mechanism == Mechanism::Crbs {
            let scores = pick_scores(&mut self.rng);
            let feedback = Feedback {
                transaction_id: sla.transaction_id,
                rater: sla.requestor.clone(),
                ratee: sla.provider.clone(),
                scores,
            };
            let new_rank = self.ledger.record_feedback(&feedback)?;
            self.records.push(LedgerRecord::Feedback(feedback.clone()));
            self.emit(
                now,
                EventKind::Feedback {
                    transaction_id: feedback.transaction_id,
                    rater: feedback.rater,
                    ratee: feedback.ratee,
                    scores: feedback.scores,
                    new_rank,
                },
            );
        }
        Ok(())
    }

    // ------------------------------------------------------------------
    // Baseline mechanism
    // ------------------------------------------------------------------

    /// Match a request once, on arrival: first live listing in publication
    /// order that fits the request and whose listed price fits the whole
    /// budget. No negotiation, no retry, no reputation.
    fn fcfs_match(&mut self, sid: SessionId, idx: usize, now: SimTime) -> Result<(), RunError> {
        let spec = &self.dataset.requestors[idx];
        let request = spec.request();
        let chosen: Option<BlackboardEntry> = self
            .board
            .live_entries()
            .find(|e| {
                e.resource_type == request.instance_class
                    && e.available_count >= request.count
                    && duration_weight_of(e.duration) >= duration_weight_of(request.duration)
                    && e.price <= request.budget
                    && match &request.preferred_region {
                        Some(region) => &e.region == region,
                        None => true,
                    }
            })
            .cloned();

        match chosen {
            Some(entry) => {
                let listed = entry.price;
                self.emit(
                    now,
                    EventKind::Decide {
                        session_id: sid,
                        transaction_id: entry.transaction_id,
                        quoted: Some(listed),
                        bid: Some(request.budget),
                        outcome: DecideOutcome::Accept,
                    },
                );
                // Reuse the bartering settlement path with the listed price;
                // there is no feedback under the baseline.
                let root = self
                    .board
                    .root_of(entry.transaction_id)
                    .expect("live entries have lineage");
                let provider_deadline = self.provider_urgency[&entry.transaction_id];
                let (retired, leftover) = self.board.consume(entry.transaction_id, request.count)?;
                if let Some(ref relist) = leftover {
                    self.provider_urgency
                        .insert(relist.transaction_id, provider_deadline);
                    self.emit(
                        now,
                        EventKind::Publish {
                            transaction_id: relist.transaction_id,
                            provider: relist.provider.clone(),
                            resource_type: relist.resource_type,
                            available_count: relist.available_count,
                            region: relist.region.clone(),
                            price: relist.price,
                            duration: relist.duration,
                            provider_rank: None,
                            negotiator_ref: relist.negotiator_ref,
                            relist_of: Some(retired.transaction_id),
                        },
                    );
                }
                let sla = SlaRecord {
                    transaction_id: retired.transaction_id,
                    provider: retired.provider.clone(),
                    requestor: request.requestor.clone(),
                    resource_type: retired.resource_type,
                    count: request.count,
                    duration: retired.duration,
                    agreed_price: listed,
                    concluded_at: now,
                };
                self.ledger.settle(&sla)?;
                self.records.push(LedgerRecord::Sla(sla.clone()));
                self.slas.push(sla.clone());
                self.consumed_roots.insert(root);
                *self
                    .transactions_by_urgency
                    .entry(request.urgency)
                    .or_insert(0) += 1;
                let category = PriceCategory::classify(request.urgency, provider_deadline);
                self.prices_by_category
                    .entry(category)
                    .or_default()
                    .push(listed);
                if spec.is_debtor() {
                    self.free_rider_settled += 1;
                }
            }
            None => {
                // Served or rejected on the spot: an unmatched request dies.
                self.emit(now, EventKind::Expire { session_id: sid });
            }
        }
        Ok(())
    }

    // ------------------------------------------------------------------
    // Plumbing
    // ------------------------------------------------------------------

    fn schedule(&mut self, time: SimTime, action: Action) {
        self.queue.push(Reverse(Queued {
            time,
            seq: self.queue_seq,
            action,
        }));
        self.queue_seq += 1;
    }

    fn emit(&mut self, time: SimTime, kind: EventKind) {
        self.events.push(SimEvent {
            time,
            seq: self.event_seq,
            kind,
        });
        self.event_seq += 1;
    }

}
