use std::sync::{Arc, Mutex};
use std::time::Duration;

use super::Clock;

/// Token bucket shared by every remote call of a run. Starts full with
/// `capacity` tokens and refills at `rate_per_s`.
pub struct RateLimiter {
    capacity: f64,
    rate_per_s: f64,
    clock: Arc<dyn Clock>,
    state: Mutex<Bucket>,
}

struct Bucket {
    tokens: f64,
    last: Duration,
}

impl RateLimiter {
    pub fn new(capacity: u32, rate_per_s: f64, clock: Arc<dyn Clock>) -> Self {
        assert!(rate_per_s > 0.0, "rate must be positive");
        let last = clock.now();
        Self {
            capacity: capacity.max(1) as f64,
            rate_per_s,
            clock,
            state: Mutex::new(Bucket {
                tokens: capacity.max(1) as f64,
                last,
            }),
        }
    }

    /// Blocks until a token is available, then consumes it.
    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut bucket = self.state.lock().unwrap();
                let now = self.clock.now();
                let elapsed = now.saturating_sub(bucket.last).as_secs_f64();
                bucket.tokens = (bucket.tokens + elapsed * self.rate_per_s).min(self.capacity);
                bucket.last = now;
                if bucket.tokens >= 1.0 {
                    bucket.tokens -= 1.0;
                    return;
                }
                (1.0 - bucket.tokens) / self.rate_per_s
            };
            // Round up so the refill after waking always reaches one token.
            self.clock
                .sleep(Duration::from_nanos((wait * 1e9).ceil().max(1.0) as u64));
        }
    }
}
