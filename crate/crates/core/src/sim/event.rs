//! The replayable event timeline.
//!
//! Every run emits a newline-delimited JSON log, one event per line,
//! strictly ordered by (time, seq). Identical inputs produce byte-identical
//! logs; that equality is the master regression check.

use serde::{Deserialize, Serialize};

use crate::blackboard::{NegotiatorRef, TransactionId};
use crate::credits::{Credits, Rank};
use crate::domain::{InstanceClass, ParticipantId, Region, SharingDuration, SimTime, Urgency};
use crate::ledger::FeedbackScores;
use crate::negotiation::{SessionId, WakeReason};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecideOutcome {
    Accept,
    Reject,
    /// The shortlisted entry was retired before the cfp reached it; the
    /// session failed over to its next offer.
    Stale,
}

/// Payload per event kind. Publish events carry the listing attributes so a
/// board snapshot is reconstructible from the log alone; the rank attribute
/// is absent under the baseline mechanism, which has no reputation concept.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    Publish {
        transaction_id: TransactionId,
        provider: ParticipantId,
        resource_type: InstanceClass,
        available_count: u64,
        region: Region,
        price: Credits,
        duration: SharingDuration,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        provider_rank: Option<Rank>,
        negotiator_ref: NegotiatorRef,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        relist_of: Option<TransactionId>,
    },
    Request {
        session_id: SessionId,
        requestor: ParticipantId,
        resource_type: InstanceClass,
        count: u64,
        duration: SharingDuration,
        budget: Credits,
        urgency: Urgency,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        preferred_region: Option<Region>,
        /// True when the ledger guard refused the request outright.
        refused: bool,
    },
    Quote {
        session_id: SessionId,
        transaction_id: TransactionId,
        quoted: Credits,
    },
    Decide {
        session_id: SessionId,
        transaction_id: TransactionId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        quoted: Option<Credits>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bid: Option<Credits>,
        outcome: DecideOutcome,
    },
    Wake {
        session_id: SessionId,
        reason: WakeReason,
    },
    Expire {
        session_id: SessionId,
    },
    Feedback {
        transaction_id: TransactionId,
        rater: ParticipantId,
        ratee: ParticipantId,
        scores: FeedbackScores,
        new_rank: Rank,
    },
}

/// One timeline entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimEvent {
    pub time: SimTime,
    pub seq: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

/// Render events as newline-delimited JSON, one object per line.
pub fn to_ndjson(events: &[SimEvent]) -> String {
    let mut out = String::new();
    for event in events {
        out.push_str(&serde_json::to_string(event).expect("events serialize"));
        out.push('\n');
    }
    out
}

/// Parse a newline-delimited JSON event log.
pub fn from_ndjson(text: &str) -> Result<Vec<SimEvent>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ndjson_roundtrip_preserves_events() {
        let events = vec![
            SimEvent {
                time: 3,
                seq: 0,
                kind: EventKind::Wake {
                    session_id: SessionId(1),
                    reason: WakeReason::Timer,
                },
            },
            SimEvent {
                time: 3,
                seq: 1,
                kind: EventKind::Expire {
                    session_id: SessionId(1),
                },
            },
        ];
        let text = to_ndjson(&events);
        assert_eq!(text.lines().count(), 2);
        let back = from_ndjson(&text).unwrap();
        assert_eq!(back, events);
    }

    #[test]
    fn publish_omits_absent_rank() {
        let event = SimEvent {
            time: 0,
            seq: 0,
            kind: EventKind::Publish {
                transaction_id: TransactionId(0),
                provider: ParticipantId::new("P1"),
                resource_type: InstanceClass::Micro,
                available_count: 1,
                region: Region::new("R1"),
                price: Credits::from_integer(5),
                duration: SharingDuration::OneWeek,
                provider_rank: None,
                negotiator_ref: NegotiatorRef(0),
                relist_of: None,
            },
        };
        let line = serde_json::to_string(&event).unwrap();
        assert!(!line.contains("provider_rank"));
        assert!(!line.contains("relist_of"));
        assert!(line.contains("\"kind\":\"publish\""));
    }
}
