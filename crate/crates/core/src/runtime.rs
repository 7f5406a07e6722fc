//! Id generation and clocks, with a deterministic-test mode.

use std::sync::atomic::{AtomicU64, Ordering};

use chrono::{DateTime, TimeZone, Utc};

use crate::protocol::ENV_DETERMINISTIC;

/// True when `AGENT_DETERMINISTIC=1` is set in this process.
pub fn deterministic_from_env() -> bool {
    std::env::var(ENV_DETERMINISTIC).is_ok_and(|v| v == "1")
}

const CROCKFORD: &[u8; 32] = b"0123456789ABCDEFGHJKMNPQRSTVWXYZ";

/// Fixed origin of the logical clock used in deterministic mode.
fn logical_epoch() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap()
}

/// ULID-style identifiers: 48-bit millisecond timestamp followed by 80 bits
/// of entropy, Crockford base32, lexicographically time-ordered.
///
/// In deterministic mode the timestamp comes from a counter and the entropy
/// field is zero, so the n-th id is the same on every run.
#[derive(Debug)]
pub struct IdGenerator {
    deterministic: bool,
    counter: AtomicU64,
}

impl IdGenerator {
    pub fn new(deterministic: bool) -> Self {
        IdGenerator {
            deterministic,
            counter: AtomicU64::new(0),
        }
    }

    pub fn next_id(&self) -> String {
        let n = self.counter.fetch_add(1, Ordering::SeqCst);
        let (millis, entropy) = if self.deterministic {
            (logical_epoch().timestamp_millis() as u64 + n, 0u128)
        } else {
            let millis = Utc::now().timestamp_millis() as u64;
            // Counter in the high entropy bits keeps ids from one generator
            // strictly increasing within the same millisecond.
            let random: u64 = rand::random();
            (millis, ((n as u128 & 0xFFFF) << 64) | random as u128)
        };
        encode_ulid(millis, entropy)
    }
}

fn encode_ulid(millis: u64, entropy: u128) -> String {
    let value: u128 = ((millis as u128 & 0xFFFF_FFFF_FFFF) << 80) | (entropy & ((1 << 80) - 1));
    (0..26)
        .rev()
        .map(|i| CROCKFORD[((value >> (i * 5)) & 0x1F) as usize] as char)
        .collect()
}

/// Wall clock, or a logical clock that advances one millisecond per reading.
#[derive(Debug)]
pub enum Clock {
    System,
    Logical(AtomicU64),
}

impl Clock {
    pub fn new(deterministic: bool) -> Self {
        if deterministic {
            Clock::Logical(AtomicU64::new(0))
        } else {
            Clock::System
        }
    }

    pub fn now(&self) -> DateTime<Utc> {
        match self {
            Clock::System => Utc::now(),
            Clock::Logical(ticks) => {
                let n = ticks.fetch_add(1, Ordering::SeqCst);
                logical_epoch() + chrono::Duration::milliseconds(n as i64)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_time_ordered_and_unique() {
        let ids = IdGenerator::new(false);
        let batch: Vec<String> = (0..200).map(|_| ids.next_id()).collect();
        for pair in batch.windows(2) {
            assert!(pair[0] < pair[1], "{} !< {}", pair[0], pair[1]);
        }
        assert!(batch.iter().all(|id| id.len() == 26));
    }

    #[test]
    fn deterministic_ids_repeat() {
        let a: Vec<String> = {
            let g = IdGenerator::new(true);
            (0..5).map(|_| g.next_id()).collect()
        };
        let b: Vec<String> = {
            let g = IdGenerator::new(true);
            (0..5).map(|_| g.next_id()).collect()
        };
        assert_eq!(a, b);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn logical_clock_advances() {
        let clock = Clock::new(true);
        let t0 = clock.now();
        let t1 = clock.now();
        assert!(t1 > t0);
        assert_eq!(t0, logical_epoch());
    }
}
