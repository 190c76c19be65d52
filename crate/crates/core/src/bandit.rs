//! Per-player bandit statistics, the upper confidence bound and reward noise.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::market::ArmId;

/// What one player knows: successful pulls and observed rewards per arm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlayerBanditState {
    success_counts: Vec<u64>,
    reward_sums: Vec<f64>,
}

impl PlayerBanditState {
    pub fn new(n_arms: usize) -> Self {
        PlayerBanditState {
            success_counts: vec![0; n_arms],
            reward_sums: vec![0.0; n_arms],
        }
    }

    pub fn n_arms(&self) -> usize {
        self.success_counts.len()
    }

    pub fn success_count(&self, arm: ArmId) -> u64 {
        self.success_counts[arm.0]
    }

    pub fn reward_sum(&self, arm: ArmId) -> f64 {
        self.reward_sums[arm.0]
    }

    pub fn empirical_mean(&self, arm: ArmId) -> Option<f64> {
        match self.success_counts[arm.0] {
            0 => None,
            n => Some(self.reward_sums[arm.0] / n as f64),
        }
    }

    /// Upper confidence bound of `arm` at round `t >= 1`:
    /// `mean + sqrt(3 ln t / (2 n))`, or `+inf` while the arm has never been
    /// pulled successfully. Counts are those accumulated through round `t-1`.
    pub fn ucb_value(&self, arm: ArmId, t: u64) -> f64 {
        debug_assert!(t >= 1, "rounds start at 1");
        match self.empirical_mean(arm) {
            None => f64::INFINITY,
            Some(mean) => mean + ucb_width(self.success_counts[arm.0], t),
        }
    }

    pub fn record_success(&mut self, arm: ArmId, reward: f64) {
        self.success_counts[arm.0] += 1;
        self.reward_sums[arm.0] += reward;
    }
}

/// Exploration bonus for an arm with `count > 0` successful pulls.
pub fn ucb_width(count: u64, t: u64) -> f64 {
    (3.0 * (t as f64).ln() / (2.0 * count as f64)).sqrt()
}

/// Gaussian reward noise around the true mean.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardModel {
    pub noise_sigma: f64,
}

impl Default for RewardModel {
    fn default() -> Self {
        RewardModel { noise_sigma: 1.0 }
    }
}

impl RewardModel {
    pub fn new(noise_sigma: f64) -> Self {
        assert!(noise_sigma.is_finite() && noise_sigma >= 0.0, "sigma must be finite and >= 0");
        RewardModel { noise_sigma }
    }

    pub fn sample_reward(&self, mean: f64, rng: &mut impl Rng) -> f64 {
        if self.noise_sigma == 0.0 {
            return mean;
        }
        Normal::new(mean, self.noise_sigma)
            .expect("sigma validated at construction")
            .sample(rng)
    }
}
