use std::collections::VecDeque;

use super::Clock;

/// Request budget over a sliding window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Budget {
    pub max_requests: usize,
    pub window_ms: u64,
}

impl Budget {
    pub const DAY_MS: u64 = 86_400_000;
    pub const MINUTE_MS: u64 = 60_000;

    pub fn per_day(max_requests: usize) -> Self {
        Self { max_requests, window_ms: Self::DAY_MS }
    }

    pub fn per_minute(max_requests: usize) -> Self {
        Self { max_requests, window_ms: Self::MINUTE_MS }
    }
}

/// Sliding-window log limiter: a request at time `t` is allowed when fewer
/// than `max_requests` requests fall in `(t - window, t]`.
#[derive(Debug, Clone)]
pub struct SlidingWindowLimiter {
    budget: Budget,
    log: VecDeque<u64>,
}

impl SlidingWindowLimiter {
    pub fn new(budget: Budget) -> Self {
        assert!(budget.max_requests > 0, "budget must allow at least one request");
        Self { budget, log: VecDeque::new() }
    }

    /// Restores a limiter from previously recorded request times.
    pub fn with_history(budget: Budget, history: &[u64]) -> Self {
        let mut l = Self::new(budget);
        let mut sorted = history.to_vec();
        sorted.sort_unstable();
        l.log.extend(sorted);
        l
    }

    fn prune(&mut self, now: u64) {
        while let Some(&front) = self.log.front() {
            if front + self.budget.window_ms <= now {
                self.log.pop_front();
            } else {
                break;
            }
        }
    }

    pub fn remaining(&mut self, now: u64) -> usize {
        self.prune(now);
        self.budget.max_requests.saturating_sub(self.log.len())
    }

    /// Blocks on `clock` until a request may go out, records it and returns
    /// its timestamp.
    pub fn acquire(&mut self, clock: &dyn Clock) -> u64 {
        loop {
            let now = clock.now_ms();
            self.prune(now);
            if self.log.len() < self.budget.max_requests {
                self.log.push_back(now);
                return now;
            }
            let oldest = *self.log.front().expect("full log is non-empty");
            clock.sleep_ms((oldest + self.budget.window_ms).saturating_sub(now).max(1));
        }
    }

    /// Request times still inside the window, oldest first.
    pub fn history(&self) -> Vec<u64> {
        self.log.iter().copied().collect()
    }
}

/// Largest number of requests in any window `(t - window, t]`, evaluated at
/// every request time. Used to audit request logs.
pub fn max_in_any_window(times: &[u64], window_ms: u64) -> usize {
    let mut sorted = times.to_vec();
    sorted.sort_unstable();
    let mut lo = 0;
    let mut best = 0;
    for hi in 0..sorted.len() {
        while sorted[lo] + window_ms <= sorted[hi] {
            lo += 1;
        }
        best = best.max(hi - lo + 1);
    }
    best
}
