//! Shared builders for the benchmark suite.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crbs_core::{
    Advertisement, Blackboard, Credits, InstanceClass, ParticipantId, Rank, Region,
    ResourceBundle, ResourceRequest, SharingDuration, Urgency,
};

/// A board with `entries` seeded-random live listings.
pub fn populated_board(entries: usize, seed: u64) -> Blackboard {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut board = Blackboard::new();
    for i in 0..entries {
        let class = InstanceClass::ALL[rng.random_range(0..5)];
        let ad = Advertisement {
            provider: ParticipantId::new(format!("P{i:06}")),
            bundle: ResourceBundle::single(class, rng.random_range(1..=4)),
            min_price: Credits::from_integer(rng.random_range(1..=30)),
            max_price: Credits::from_integer(rng.random_range(30..=90)),
            region: Region::new(format!("R{}", rng.random_range(1..=4u32))),
            duration: SharingDuration::ALL[rng.random_range(0..5)],
            posted_at: 0,
            provider_deadline: Urgency::ALL[rng.random_range(0..6)],
        };
        let rank = Rank::from_integer(rng.random_range(0..=10));
        board.publish(&ad, rank).expect("unique providers never collide");
    }
    board
}

/// A request that matches a reasonable slice of `populated_board`.
pub fn typical_request(seed: u64) -> ResourceRequest {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ResourceRequest {
        requestor: ParticipantId::new("R000001"),
        instance_class: InstanceClass::ALL[rng.random_range(0..5)],
        count: rng.random_range(1..=3),
        duration: SharingDuration::TwoWeeks,
        budget: Credits::from_integer(rng.random_range(40..=100)),
        urgency: Urgency::H6,
        preferred_region: None,
        issued_at: 0,
    }
}
