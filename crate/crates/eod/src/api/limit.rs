use std::collections::{HashMap, VecDeque};
use std::net::IpAddr;
use std::sync::Mutex;

use chrono::{DateTime, Duration, Utc};

/// Sliding-window counter of submission attempts per client address.
#[derive(Debug)]
pub struct RateLimiter {
    limit: usize,
    window: Duration,
    hits: Mutex<HashMap<IpAddr, VecDeque<DateTime<Utc>>>>,
}

impl RateLimiter {
    pub fn per_hour(limit: u32) -> Self {
        Self::new(limit as usize, Duration::hours(1))
    }

    pub fn new(limit: usize, window: Duration) -> Self {
        Self {
            limit,
            window,
            hits: Mutex::new(HashMap::new()),
        }
    }

    /// Records an attempt at `now`. On refusal returns the seconds until a slot frees up.
    pub fn check(&self, ip: IpAddr, now: DateTime<Utc>) -> Result<(), u64> {
        let mut hits = self.hits.lock().unwrap_or_else(|p| p.into_inner());
        let cutoff = now - self.window;
        hits.retain(|_, q| {
            while q.front().is_some_and(|t| *t <= cutoff) {
                q.pop_front();
            }
            !q.is_empty()
        });
        let queue = hits.entry(ip).or_default();
        if queue.len() >= self.limit {
            let oldest = *queue.front().expect("limit is positive");
            let wait = (oldest + self.window - now).num_seconds().max(1);
            return Err(wait as u64);
        }
        queue.push_back(now);
        Ok(())
    }
}
