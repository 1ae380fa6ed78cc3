//! Staged retuning of the UTS split factor and iteration bound from the
//! observed number of active tasks.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Fires when the active count exceeds the threshold.
    Rise,
    /// Fires when the active count drops below the threshold.
    Fall,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stage {
    pub direction: Direction,
    pub threshold: usize,
    pub split_factor: usize,
    pub iters: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptiveSchedule {
    pub initial_split_factor: usize,
    pub initial_iters: u64,
    pub stages: Vec<Stage>,
}

const REFERENCE_CAP: usize = 2_000;

impl AdaptiveSchedule {
    /// The four-stage schedule tuned for a 2,000-task cap, with thresholds
    /// scaled linearly to `max_concurrency`.
    ///
    /// # Panics
    ///
    /// Panics if `max_concurrency` is zero.
    pub fn default_for(max_concurrency: usize) -> Self {
        assert!(max_concurrency >= 1, "max_concurrency must be at least 1");
        let scale = |t: usize| (t * max_concurrency + REFERENCE_CAP / 2) / REFERENCE_CAP;
        let stage = |direction, t, split_factor, iters| Stage {
            direction,
            threshold: scale(t),
            split_factor,
            iters,
        };
        Self {
            initial_split_factor: 200,
            initial_iters: 50_000,
            stages: vec![
                stage(Direction::Rise, 800, 50, 2_500_000),
                stage(Direction::Rise, 1_300, 5, 5_000_000),
                stage(Direction::Fall, 1_100, 5, 2_500_000),
                stage(Direction::Fall, 100, 5, 1_000_000),
            ],
        }
    }

    pub fn thresholds(&self) -> Vec<usize> {
        self.stages.iter().map(|s| s.threshold).collect()
    }

    pub fn validate(&self) -> Result<(), String> {
        let bad = |s: usize, n: u64| s == 0 || n == 0;
        if bad(self.initial_split_factor, self.initial_iters)
            || self.stages.iter().any(|s| bad(s.split_factor, s.iters))
        {
            return Err("split factors and iteration bounds must be >= 1".into());
        }
        Ok(())
    }
}

/// Replays an [`AdaptiveSchedule`]. Stages fire in order and at most once.
/// Within one call every consecutive stage whose condition holds fires, so a
/// burst that jumps past several thresholds at once is not lost.
#[derive(Debug, Clone)]
pub struct AdaptiveController {
    schedule: AdaptiveSchedule,
    fired: usize,
    current: (usize, u64),
}

impl AdaptiveController {
    pub fn new(schedule: AdaptiveSchedule) -> Self {
        let current = (schedule.initial_split_factor, schedule.initial_iters);
        Self {
            schedule,
            fired: 0,
            current,
        }
    }

    /// Current `(split_factor, iters)`.
    pub fn current(&self) -> (usize, u64) {
        self.current
    }

    /// Number of stages fired so far.
    pub fn step(&self) -> usize {
        self.fired
    }

    pub fn on_completion(&mut self, active: usize) -> (usize, u64) {
        while let Some(stage) = self.schedule.stages.get(self.fired) {
            let holds = match stage.direction {
                Direction::Rise => active > stage.threshold,
                Direction::Fall => active < stage.threshold,
            };
            if !holds {
                break;
            }
            self.fired += 1;
            self.current = (stage.split_factor, stage.iters);
        }
        self.current
    }
}
