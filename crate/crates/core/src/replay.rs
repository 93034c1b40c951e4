//! Episode replay memory and the exploration schedule.
//!
//! The learners train on whole episodes (the Q-net is recurrent), so the
//! replay unit is a full trajectory, not a single transition.

use std::collections::VecDeque;

use rand_chacha::ChaCha12Rng;

/// One finished episode as seen by the agents.
///
/// `observations` has one more entry than `actions`/`rewards`: the last row
/// is the terminal observation. All episodes end in a terminal state (payload
/// complete or period over), so the final transition never bootstraps.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRecord {
    /// [step][agent] -> raw local observation vector; length T+1.
    pub observations: Vec<Vec<Vec<f64>>>,
    /// [step][agent] -> flat action id; length T.
    pub actions: Vec<Vec<usize>>,
    /// Team reward per step; length T.
    pub rewards: Vec<f64>,
    /// Terminal flags; exactly one `true`, at the last step.
    pub dones: Vec<bool>,
    /// Exploration rate the episode was collected under.
    pub epsilon: f64,
    /// Training episode index the record came from.
    pub episode_idx: u64,
}

impl EpisodeRecord {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Total reward collected over the episode.
    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }

    pub fn check_consistent(&self) -> bool {
        self.observations.len() == self.len() + 1
            && self.rewards.len() == self.len()
            && self.dones.len() == self.len()
            && self.dones.iter().filter(|&&d| d).count() == 1
            && self.dones.last() == Some(&true)
    }
}

/// Fixed-capacity FIFO episode store with uniform minibatch sampling.
#[derive(Clone, Debug)]
pub struct ReplayMemory {
    capacity: usize,
    episodes: VecDeque<EpisodeRecord>,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> ReplayMemory {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayMemory { capacity, episodes: VecDeque::with_capacity(capacity) }
    }

    /// Append an episode, evicting the oldest once full.
    pub fn push(&mut self, episode: EpisodeRecord) {
        debug_assert!(episode.check_consistent());
        if self.episodes.len() == self.capacity {
            self.episodes.pop_front();
        }
        self.episodes.push_back(episode);
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Stored episodes, oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &EpisodeRecord> {
        self.episodes.iter()
    }

    /// Uniform sample of `batch` distinct episodes. Call only when at least
    /// `batch` episodes are stored.
    pub fn sample<'a>(&'a self, rng: &mut ChaCha12Rng, batch: usize) -> Vec<&'a EpisodeRecord> {
        assert!(
            batch <= self.episodes.len(),
            "asked for {batch} episodes, only {} stored",
            self.episodes.len()
        );
        rand::seq::index::sample(rng, self.episodes.len(), batch)
            .iter()
            .map(|i| &self.episodes[i])
            .collect()
    }
}

/// Linearly decaying epsilon-greedy schedule with a floor:
/// epsilon(e) = max(1 - delta * e, floor).
#[derive(Clone, Copy, Debug)]
pub struct EpsilonSchedule {
    pub delta: f64,
    pub floor: f64,
}

impl EpsilonSchedule {
    pub fn value(&self, episode: u64) -> f64 {
        (1.0 - self.delta * episode as f64).max(self.floor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{self, tag};

    fn episode(id: u64) -> EpisodeRecord {
        EpisodeRecord {
            observations: vec![vec![vec![id as f64]]; 3],
            actions: vec![vec![0]; 2],
            rewards: vec![1.0, 2.0],
            dones: vec![false, true],
            epsilon: 0.5,
            episode_idx: id,
        }
    }

    #[test]
    fn fifo_eviction_keeps_most_recent_in_order() {
        let mut mem = ReplayMemory::new(3);
        for id in 0..5 {
            mem.push(episode(id));
        }
        assert_eq!(mem.len(), 3);
        let ids: Vec<u64> = mem.iter().map(|e| e.episode_idx).collect();
        assert_eq!(ids, vec![2, 3, 4]);
    }

    #[test]
    fn sample_returns_distinct_episodes() {
        let mut mem = ReplayMemory::new(10);
        for id in 0..10 {
            mem.push(episode(id));
        }
        let mut rng = rng::stream(5, tag::REPLAY);
        for _ in 0..50 {
            let batch = mem.sample(&mut rng, 4);
            let mut ids: Vec<u64> = batch.iter().map(|e| e.episode_idx).collect();
            ids.sort_unstable();
            ids.dedup();
            assert_eq!(ids.len(), 4);
        }
    }

    #[test]
    fn schedule_formula() {
        let s = EpsilonSchedule { delta: 1e-3, floor: 0.03 };
        assert_eq!(s.value(0), 1.0);
        assert_eq!(s.value(100), 1.0 - 1e-3 * 100.0);
        // The line meets the floor at episode 970 (up to rounding) and the
        // floor holds exactly from the next episode on.
        assert!((s.value(970) - 0.03).abs() < 1e-12);
        assert_eq!(s.value(971), 0.03);
        assert_eq!(s.value(5000), 0.03);
        for e in 0..2000 {
            let v = s.value(e);
            assert!((0.03..=1.0).contains(&v));
            assert_eq!(v, (1.0 - 1e-3 * e as f64).max(0.03));
        }
    }

    #[test]
    fn total_reward_sums() {
        assert_eq!(episode(0).total_reward(), 3.0);
    }
}
