//! The three numeric mechanisms of the market, all in exact rational
//! arithmetic:
//!
//! * barter-credit valuation of a bundle (instance value times duration
//!   weight),
//! * the requestor's urgency-driven budget fraction and estimated bid,
//! * the transactional price that blends both parties' remaining urgency
//!   into a fair settlement between the provider's price band.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::credits::Credits;
use crate::domain::{duration_weight_of, weight_of, ResourceBundle, SharingDuration};

/// A party's deadline clock: total time allowed and time still remaining,
/// both in simulated minutes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClockPair {
    pub total: u64,
    pub remaining: u64,
}

impl ClockPair {
    pub fn new(total: u64, remaining: u64) -> Result<Self, PricingError> {
        if total == 0 {
            return Err(PricingError::ZeroTotalTime);
        }
        if remaining > total {
            return Err(PricingError::RemainingExceedsTotal { remaining, total });
        }
        Ok(ClockPair { total, remaining })
    }

    /// remaining / total as an exact fraction in [0, 1].
    pub fn fraction_remaining(self) -> Ratio<i64> {
        Ratio::new(self.remaining as i64, self.total as i64)
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PricingError {
    #[error("total time must be positive")]
    ZeroTotalTime,
    #[error("remaining time {remaining} exceeds total {total}")]
    RemainingExceedsTotal { remaining: u64, total: u64 },
    #[error("price band requires min <= max (got min {min}, max {max})")]
    InvertedPriceBand { min: Credits, max: Credits },
    #[error("prices must be non-negative (got {0})")]
    NegativePrice(Credits),
    #[error("budget must be non-negative (got {0})")]
    NegativeBudget(Credits),
}

/// Sum over classes of count times instance weight.
pub fn instance_value(bundle: &ResourceBundle) -> Credits {
    bundle
        .items
        .iter()
        .map(|(&class, &count)| Credits::from_integer(count as i64 * weight_of(class)))
        .sum()
}

/// Credits for sharing `value` worth of instances for duration `d`.
pub fn barter_credits(value: Credits, d: SharingDuration) -> Credits {
    value * duration_weight_of(d)
}

/// Suggested listing value of a bundle shared for `d`.
pub fn suggested_price(bundle: &ResourceBundle, d: SharingDuration) -> Credits {
    barter_credits(instance_value(bundle), d)
}

/// Fraction of the budget a requestor should commit given its clock:
/// `(20 + (80 - 80 * remaining/total)) / 100`.
///
/// Starts at 1/5 with the full window remaining and climbs linearly to 1 as
/// the deadline approaches.
pub fn budget_fraction(clock: ClockPair) -> Ratio<i64> {
    let eighty = Ratio::from_integer(80);
    let twenty = Ratio::from_integer(20);
    (twenty + (eighty - eighty * clock.fraction_remaining())) / Ratio::from_integer(100)
}

/// The bid a requestor is currently prepared to make.
pub fn estimated_bid(budget: Credits, clock: ClockPair) -> Result<Credits, PricingError> {
    if budget.is_negative() {
        return Err(PricingError::NegativeBudget(budget));
    }
    Ok(budget * budget_fraction(clock))
}

/// Transactional price blending both parties' urgency, each ratio taken
/// against its own party's total window.
///
/// The provider-side component rewards a relaxed provider (more remaining
/// time holds the price near the maximum); the requestor-side component
/// penalises a desperate requestor (less remaining time pulls its blend
/// toward the maximum). The settlement is the mean of the two components
/// and always lies within `[min, max]`.
pub fn transactional_price(
    provider: ClockPair,
    requestor: ClockPair,
    max_price: Credits,
    min_price: Credits,
) -> Result<Credits, PricingError> {
    if min_price.is_negative() {
        return Err(PricingError::NegativePrice(min_price));
    }
    if min_price > max_price {
        return Err(PricingError::InvertedPriceBand {
            min: min_price,
            max: max_price,
        });
    }
    let one = Ratio::from_integer(1);
    let p_frac = provider.fraction_remaining();
    let r_frac = requestor.fraction_remaining();
    let provider_component = max_price * p_frac + min_price * (one - p_frac);
    let requestor_component = min_price * r_frac + max_price * (one - r_frac);
    Ok((provider_component + requestor_component) / 2)
}

/// Single-window form: both parties share one total time `total`.
pub fn transactional_price_shared(
    total: u64,
    max_price: Credits,
    min_price: Credits,
    provider_remaining: u64,
    requestor_remaining: u64,
) -> Result<Credits, PricingError> {
    let provider = ClockPair::new(total, provider_remaining)?;
    let requestor = ClockPair::new(total, requestor_remaining)?;
    transactional_price(provider, requestor, max_price, min_price)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::InstanceClass;

    fn credits(n: i64) -> Credits {
        Credits::from_integer(n)
    }

    #[test]
    fn instance_value_worked_example() {
        // Ten medium instances are worth thirty points.
        let bundle = ResourceBundle::single(InstanceClass::Medium, 10);
        assert_eq!(instance_value(&bundle), credits(30));
    }

    #[test]
    fn instance_value_unit_and_mixed() {
        assert_eq!(
            instance_value(&ResourceBundle::single(InstanceClass::Micro, 1)),
            credits(1)
        );
        let mixed = ResourceBundle::single(InstanceClass::Small, 5)
            .with(InstanceClass::XLarge, 2);
        // 5*2 + 2*5
        assert_eq!(instance_value(&mixed), credits(20));
    }

    #[test]
    fn barter_credits_worked_example() {
        assert_eq!(
            barter_credits(credits(30), SharingDuration::ThreeWeeks),
            credits(90)
        );
        assert_eq!(barter_credits(credits(7), SharingDuration::OneWeek), credits(7));
        assert_eq!(
            barter_credits(credits(20), SharingDuration::TwoMonths),
            credits(160)
        );
    }

    #[test]
    fn budget_fraction_boundaries() {
        let full = ClockPair::new(360, 360).unwrap();
        assert_eq!(budget_fraction(full), Ratio::new(1, 5));
        let expired = ClockPair::new(360, 0).unwrap();
        assert_eq!(budget_fraction(expired), Ratio::from_integer(1));
        let halfway = ClockPair::new(360, 180).unwrap();
        assert_eq!(budget_fraction(halfway), Ratio::new(3, 5));
    }

    #[test]
    fn budget_fraction_rejects_zero_total() {
        assert_eq!(ClockPair::new(0, 0), Err(PricingError::ZeroTotalTime));
    }

    #[test]
    fn estimated_bid_examples() {
        let halfway = ClockPair::new(360, 180).unwrap();
        assert_eq!(estimated_bid(credits(100), halfway).unwrap(), credits(60));
        let expired = ClockPair::new(60, 0).unwrap();
        assert_eq!(estimated_bid(credits(42), expired).unwrap(), credits(42));
        assert_eq!(estimated_bid(Credits::ZERO, halfway).unwrap(), Credits::ZERO);
        assert!(estimated_bid(credits(-1), halfway).is_err());
    }

    #[test]
    fn transactional_price_symmetry_gives_midpoint() {
        let p = transactional_price_shared(24, credits(100), credits(40), 12, 12).unwrap();
        assert_eq!(p, credits(70));
    }

    #[test]
    fn transactional_price_boundary_cases() {
        // Relaxed provider, desperate requestor: maximum price.
        let p = transactional_price_shared(24, credits(100), credits(40), 24, 0).unwrap();
        assert_eq!(p, credits(100));
        // Desperate provider, relaxed requestor: minimum price.
        let p = transactional_price_shared(24, credits(100), credits(40), 0, 24).unwrap();
        assert_eq!(p, credits(40));
    }

    #[test]
    fn transactional_price_worked_example() {
        let p = transactional_price_shared(24, credits(100), credits(40), 6, 18).unwrap();
        assert_eq!(p, credits(55));
    }

    #[test]
    fn transactional_price_rejects_bad_bands() {
        assert!(matches!(
            transactional_price_shared(24, credits(40), credits(100), 6, 6),
            Err(PricingError::InvertedPriceBand { .. })
        ));
        assert!(matches!(
            transactional_price_shared(0, credits(100), credits(40), 0, 0),
            Err(PricingError::ZeroTotalTime)
        ));
    }

    #[test]
    fn per_party_totals_are_independent() {
        let provider = ClockPair::new(720, 360).unwrap();
        let requestor = ClockPair::new(60, 30).unwrap();
        // Both halfway through their own windows: midpoint again.
        let p =
            transactional_price(provider, requestor, credits(100), credits(40)).unwrap();
        assert_eq!(p, credits(70));
    }
}
