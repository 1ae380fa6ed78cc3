use std::collections::VecDeque;

use crate::clock::Micros;

pub type ContainerId = u64;

/// Warm-container bookkeeping.
///
/// Idle containers are kept in release order, which is also last-use order,
/// so the front is always the least recently used one.
#[derive(Debug, Clone)]
pub struct ContainerPool {
    idle: VecDeque<(ContainerId, Micros)>,
    keepalive: Option<Micros>,
    active: usize,
    peak_active: usize,
    created: u64,
}

impl ContainerPool {
    /// `keepalive = None` keeps idle containers forever.
    pub fn new(keepalive: Option<Micros>) -> Self {
        Self {
            idle: VecDeque::new(),
            keepalive,
            active: 0,
            peak_active: 0,
            created: 0,
        }
    }

    fn evict_expired(&mut self, now: Micros) {
        if let Some(ttl) = self.keepalive {
            while let Some(&(_, last)) = self.idle.front() {
                if now.saturating_sub(last) > ttl {
                    self.idle.pop_front();
                } else {
                    break;
                }
            }
        }
    }

    /// Takes the least recently used warm container, or creates a new one.
    /// Returns the container and whether it was a cold start.
    pub fn acquire(&mut self, now: Micros) -> (ContainerId, bool) {
        self.evict_expired(now);
        self.active += 1;
        self.peak_active = self.peak_active.max(self.active);
        match self.idle.pop_front() {
            Some((id, _)) => (id, false),
            None => {
                let id = self.created;
                self.created += 1;
                (id, true)
            }
        }
    }

    pub fn release(&mut self, id: ContainerId, now: Micros) {
        debug_assert!(self.active > 0);
        self.active -= 1;
        // Keep the deque sorted by last use even if a caller's clock reads
        // are slightly out of order.
        let last = self.idle.back().map_or(now, |&(_, t)| t.max(now));
        self.idle.push_back((id, last));
    }

    pub fn active(&self) -> usize {
        self.active
    }

    pub fn warm(&self) -> usize {
        self.idle.len()
    }

    pub fn peak_active(&self) -> usize {
        self.peak_active
    }

    /// Containers ever created, i.e. cold starts.
    pub fn created(&self) -> u64 {
        self.created
    }
}
