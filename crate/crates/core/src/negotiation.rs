//! Requestor-side negotiation sessions.
//!
//! A session walks the cfp/quote/accept-reject protocol against the
//! bartering sessions of its top-3 shortlist, one offer at a time. When the
//! whole shortlist is exhausted the session waits and revisits the board
//! after five minutes, or immediately when a new offer is published. An
//! accepted quote ends in an SLA record; an expired urgency ends in failure.
//!
//! Sessions are independent state machines driven one event at a time by
//! the simulator's single event loop.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::blackboard::{
    Blackboard, ScoredOffer, TransactionId, REVISIT_INTERVAL,
};
use crate::credits::Credits;
use crate::domain::{
    InstanceClass, ParticipantId, ResourceRequest, SharingDuration, SimTime,
};
use crate::pricing::{estimated_bid, transactional_price, ClockPair};

/// Identifier of one requestor session.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SessionId(pub u64);

impl fmt::Display for SessionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S{:05}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SessionState {
    Selecting,
    AwaitingQuote,
    Confirming,
    Settled,
    Failed,
    Waiting,
}

/// Why a waiting session re-selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WakeReason {
    Timer,
    NewPublication,
}

/// The settled agreement binding both parties.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlaRecord {
    pub transaction_id: TransactionId,
    pub provider: ParticipantId,
    pub requestor: ParticipantId,
    pub resource_type: InstanceClass,
    pub count: u64,
    /// The advertisement's listed sharing duration (the terms the price was
    /// computed for); it covers the request's minimum by the selection
    /// filter.
    pub duration: SharingDuration,
    pub agreed_price: Credits,
    pub concluded_at: SimTime,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum NegotiationError {
    #[error("session is in state {0:?}, operation needs {1:?}")]
    WrongState(SessionState, SessionState),
    #[error("shortlist entry {0} is no longer live")]
    EntryRetired(TransactionId),
    #[error("no active offer at the cursor")]
    CursorExhausted,
    #[error("pricing failed: {0}")]
    Pricing(#[from] crate::pricing::PricingError),
}

/// Outcome of comparing a quote against the current estimated bid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Accepted,
    Rejected,
}

#[derive(Debug, Clone)]
pub struct NegotiationSession {
    pub session_id: SessionId,
    pub request: ResourceRequest,
    pub shortlist: Vec<ScoredOffer>,
    pub cursor: usize,
    pub state: SessionState,
    pub next_wakeup: Option<SimTime>,
    /// Board version at the last selection; a later version means unseen
    /// offers exist and the session may be notified.
    pub seen_board_version: u64,
}

impl NegotiationSession {
    /// Open a session for a request that already passed the ledger guard.
    ///
    /// Runs the first selection: a non-empty shortlist starts negotiation on
    /// the highest-utility offer, an empty one parks the session until the
    /// revisit timer or a new publication.
    pub fn open(
        session_id: SessionId,
        request: ResourceRequest,
        board: &Blackboard,
        now: SimTime,
    ) -> Self {
        let mut session = NegotiationSession {
            session_id,
            request,
            shortlist: Vec::new(),
            cursor: 0,
            state: SessionState::Selecting,
            next_wakeup: None,
            seen_board_version: 0,
        };
        session.reselect(board, now);
        session
    }

    /// Re-run selection with a fresh shortlist.
    pub fn reselect(&mut self, board: &Blackboard, now: SimTime) {
        self.seen_board_version = board.version();
        if self.request.remaining_at(now) == 0 {
            self.state = SessionState::Failed;
            self.next_wakeup = None;
            return;
        }
        self.shortlist = board.select(&self.request, now);
        self.cursor = 0;
        if self.shortlist.is_empty() {
            self.park(now);
        } else {
            self.state = SessionState::AwaitingQuote;
            self.next_wakeup = None;
        }
    }

    /// Wake a waiting session. An expired urgency fails it; otherwise it
    /// re-selects.
    pub fn wake(&mut self, board: &Blackboard, now: SimTime, _reason: WakeReason) {
        debug_assert_eq!(self.state, SessionState::Waiting);
        if self.request.remaining_at(now) == 0 {
            self.state = SessionState::Failed;
            self.next_wakeup = None;
            return;
        }
        self.reselect(board, now);
    }

    /// The offer the cursor points at, if any.
    pub fn current_offer(&self) -> Option<&ScoredOffer> {
        self.shortlist.get(self.cursor)
    }

    /// Ask the current offer's bartering session for a transactional price.
    ///
    /// A concurrently retired entry fails the quote; the caller advances the
    /// cursor. On success the session moves to `Confirming`.
    pub fn quote(&mut self, board: &Blackboard, now: SimTime) -> Result<Credits, NegotiationError> {
        if self.state != SessionState::AwaitingQuote {
            return Err(NegotiationError::WrongState(
                self.state,
                SessionState::AwaitingQuote,
            ));
        }
        let offer = self
            .current_offer()
            .ok_or(NegotiationError::CursorExhausted)?;
        let id = offer.entry.transaction_id;
        let entry = board.get(id).ok_or(NegotiationError::EntryRetired(id))?;
        let terms = board
            .terms(entry.negotiator_ref)
            .ok_or(NegotiationError::EntryRetired(id))?;
        let provider_clock = ClockPair::new(
            terms.provider_deadline.deadline_minutes(),
            terms.remaining_at(now),
        )?;
        let requestor_clock = ClockPair::new(
            self.request.urgency.deadline_minutes(),
            self.request.remaining_at(now),
        )?;
        let price = transactional_price(
            provider_clock,
            requestor_clock,
            terms.max_price,
            terms.min_price,
        )?;
        self.state = SessionState::Confirming;
        Ok(price)
    }

    /// Compare a quote against the current estimated bid.
    ///
    /// Acceptance settles the session; the caller performs the retire, SLA
    /// emission, and ledger settlement. Rejection advances to the next
    /// shortlist offer or parks the session when the shortlist is spent.
    pub fn decide(&mut self, quoted: Credits, now: SimTime) -> Result<Decision, NegotiationError> {
        if self.state != SessionState::Confirming {
            return Err(NegotiationError::WrongState(
                self.state,
                SessionState::Confirming,
            ));
        }
        let clock = ClockPair::new(
            self.request.urgency.deadline_minutes(),
            self.request.remaining_at(now),
        )?;
        let bid = estimated_bid(self.request.budget, clock)?;
        if quoted <= bid {
            self.state = SessionState::Settled;
            self.next_wakeup = None;
            Ok(Decision::Accepted)
        } else {
            self.state = SessionState::AwaitingQuote;
            self.advance_cursor(now);
            Ok(Decision::Rejected)
        }
    }

    /// Skip the current offer (retired underneath us or rejected) and park
    /// when the shortlist is exhausted.
    pub fn advance_cursor(&mut self, now: SimTime) {
        self.cursor += 1;
        if self.cursor >= self.shortlist.len() {
            self.park(now);
        }
    }

    /// Mark the session failed once its urgency has expired.
    pub fn expire(&mut self) {
        if self.state != SessionState::Settled {
            self.state = SessionState::Failed;
            self.next_wakeup = None;
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self.state, SessionState::Settled | SessionState::Failed)
    }

    fn park(&mut self, now: SimTime) {
        self.state = SessionState::Waiting;
        self.shortlist.clear();
        self.cursor = 0;
        self.next_wakeup = Some(now + REVISIT_INTERVAL);
    }
}
