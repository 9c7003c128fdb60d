//! Token bucket with exact integer arithmetic.
//!
//! One token is `NANOS_PER_MINUTE` units, so a budget of `r` requests per
//! minute refills exactly `r` units per nanosecond and waits come out exact.

use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::clock::Clock;

const NANOS_PER_MINUTE: u128 = 60_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateBudget {
    pub max_requests_per_minute: u32,
    pub burst: u32,
}

impl Default for RateBudget {
    fn default() -> Self {
        RateBudget {
            max_requests_per_minute: 120,
            burst: 20,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("rate budget fields must be positive")]
pub struct InvalidBudget;

impl RateBudget {
    pub fn new(max_requests_per_minute: u32, burst: u32) -> Result<Self, InvalidBudget> {
        let b = RateBudget {
            max_requests_per_minute,
            burst,
        };
        b.validate().map(|_| b)
    }

    pub fn validate(&self) -> Result<(), InvalidBudget> {
        if self.max_requests_per_minute == 0 || self.burst == 0 {
            Err(InvalidBudget)
        } else {
            Ok(())
        }
    }
}

/// Proof that one request may be sent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Permit {
    pub granted_at: DateTime<Utc>,
}

#[derive(Debug, Clone)]
pub struct TokenBucket {
    budget: RateBudget,
    units: u128,
    last: Option<DateTime<Utc>>,
}

impl TokenBucket {
    /// Starts full.
    pub fn new(budget: RateBudget) -> Self {
        TokenBucket {
            budget,
            units: budget.burst as u128 * NANOS_PER_MINUTE,
            last: None,
        }
    }

    pub fn budget(&self) -> RateBudget {
        self.budget
    }

    fn capacity(&self) -> u128 {
        self.budget.burst as u128 * NANOS_PER_MINUTE
    }

    fn refill(&mut self, now: DateTime<Utc>) {
        if let Some(last) = self.last {
            let elapsed = (now - last).num_nanoseconds().unwrap_or(i64::MAX).max(0) as u128;
            let added = elapsed.saturating_mul(self.budget.max_requests_per_minute as u128);
            self.units = self.units.saturating_add(added).min(self.capacity());
        }
        if self.last.is_none_or(|l| now > l) {
            self.last = Some(now);
        }
    }

    /// Whole tokens currently available.
    pub fn available(&mut self, now: DateTime<Utc>) -> u32 {
        self.refill(now);
        (self.units / NANOS_PER_MINUTE) as u32
    }

    /// A permit, or the exact time until one will be available.
    pub fn acquire(&mut self, now: DateTime<Utc>) -> Result<Permit, Duration> {
        self.refill(now);
        if self.units >= NANOS_PER_MINUTE {
            self.units -= NANOS_PER_MINUTE;
            return Ok(Permit { granted_at: now });
        }
        let deficit = NANOS_PER_MINUTE - self.units;
        let rate = self.budget.max_requests_per_minute as u128;
        let wait = deficit.div_ceil(rate);
        Err(Duration::from_nanos(wait as u64))
    }
}

/// Blocks on `clock` until a permit is granted; never over-grants.
pub fn acquire_request_permit(bucket: &mut TokenBucket, clock: &dyn Clock) -> Permit {
    loop {
        match bucket.acquire(clock.now()) {
            Ok(p) => return p,
            Err(wait) => clock.sleep(wait),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::clock::VirtualClock;

    #[test]
    fn burst_then_wait() {
        let t = DateTime::<Utc>::UNIX_EPOCH;
        let mut b = TokenBucket::new(RateBudget::new(60, 10).unwrap());
        for _ in 0..10 {
            assert!(b.acquire(t).is_ok());
        }
        let wait = b.acquire(t).unwrap_err();
        assert_eq!(wait, Duration::from_secs(1));
        assert!(b.acquire(t + chrono::Duration::milliseconds(999)).is_err());
        assert!(b.acquire(t + chrono::Duration::seconds(1)).is_ok());
    }

    #[test]
    fn waits_are_exact_for_uneven_rates() {
        let t = DateTime::<Utc>::UNIX_EPOCH;
        let mut b = TokenBucket::new(RateBudget::new(7, 1).unwrap());
        b.acquire(t).unwrap();
        let wait = b.acquire(t).unwrap_err();
        // 60 s / 7, rounded up to the nanosecond
        assert_eq!(wait.as_nanos(), 60_000_000_000u128.div_ceil(7));
        assert!(b
            .acquire(t + chrono::Duration::from_std(wait).unwrap())
            .is_ok());
    }

    #[test]
    fn blocking_acquire_sleeps_on_the_clock() {
        let clock = VirtualClock::at_epoch();
        let mut b = TokenBucket::new(RateBudget::new(120, 2).unwrap());
        for _ in 0..4 {
            acquire_request_permit(&mut b, &clock);
        }
        assert_eq!(clock.now().timestamp_millis(), 1000);
    }

    #[test]
    fn zero_budgets_are_rejected() {
        assert_eq!(RateBudget::new(0, 1), Err(InvalidBudget));
        assert_eq!(RateBudget::new(1, 0), Err(InvalidBudget));
    }
}
