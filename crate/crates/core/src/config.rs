//! Run configuration: physical scenario parameters and learning
//! hyperparameters, loaded from a human-editable TOML file with two flat
//! tables, `[scenario]` and `[training]`. Every key is required; a missing
//! key is reported by name.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Resource-selection algorithm.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algo {
    /// One shared recurrent Q-net, trained on the summed team Q-value.
    Vdn,
    /// Independent per-agent Q-nets with an exploration fingerprint.
    Marl,
    /// Uniform action choice, no learning.
    Random,
}

impl std::fmt::Display for Algo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Algo::Vdn => "vdn",
            Algo::Marl => "marl",
            Algo::Random => "random",
        })
    }
}

impl std::str::FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Algo> {
        match s {
            "vdn" => Ok(Algo::Vdn),
            "marl" => Ok(Algo::Marl),
            "random" => Ok(Algo::Random),
            other => Err(Error::Usage(format!(
                "unknown algorithm {other:?} (expected vdn, marl or random)"
            ))),
        }
    }
}

/// How platoons are laid out across lanes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaneScheme {
    /// Consecutive platoons alternate between the two adjacent lanes, heads
    /// evenly spaced along the road.
    Alternating,
    /// All platoons share one lane, heads evenly spaced.
    SingleLane,
}

/// Physical and protocol parameters of the multi-platoon groupcast scenario.
///
/// Distances are meters, powers dBm, bandwidths Hz, times milliseconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Number of platoons N (one agent per platoon).
    pub n_platoons: usize,
    /// Vehicles per platoon: one leader plus M followers.
    pub platoon_len: usize,
    /// Distance between a platoon's head and tail vehicle, meters.
    pub head_to_tail_m: f64,
    /// Number of orthogonal subchannels K.
    pub n_subchannels: usize,
    /// Bandwidth of one subchannel, Hz.
    pub subchannel_bw_hz: f64,
    /// Carrier frequency, Hz.
    pub carrier_hz: f64,
    /// Selectable transmit power levels, dBm, strictly decreasing.
    pub power_levels_dbm: Vec<f64>,
    /// Receiver noise power over one subchannel, dBm.
    pub noise_dbm: f64,
    /// Combined tx+rx antenna gain, dB.
    pub antenna_gain_db: f64,
    /// Log-normal shadowing standard deviation, dB.
    pub shadow_std_db: f64,
    /// Slot duration (small-scale fading update interval), ms.
    pub slot_ms: u64,
    /// Payload generation period (episode duration), ms.
    pub period_ms: u64,
    /// Groupcast payload per platoon per period, bytes.
    pub payload_bytes: u64,
    /// Payload size unit for evaluation sweeps, bytes.
    pub payload_unit_bytes: u64,
    /// Lateral distance between the two lanes, meters.
    pub lane_width_m: f64,
    /// Lane assignment scheme.
    pub lane_spacing_scheme: LaneScheme,
    /// Along-road gap between consecutive platoon heads, meters.
    pub head_spacing_m: f64,
    /// Uniform per-episode jitter applied to each head position, meters.
    pub head_jitter_m: f64,
    /// Lower edge of the interference observation range, dBm (maps to 0).
    pub obs_interference_lo_dbm: f64,
    /// Upper edge of the interference observation range, dBm (maps to 1).
    pub obs_interference_hi_dbm: f64,
    /// Run seed; all random streams derive from it.
    pub rng_seed: u64,
}

impl ScenarioConfig {
    /// Followers per platoon (receivers of the groupcast).
    pub fn n_followers(&self) -> usize {
        self.platoon_len.saturating_sub(1)
    }

    /// Number of power levels H.
    pub fn n_power_levels(&self) -> usize {
        self.power_levels_dbm.len()
    }

    /// Size of one agent's action space, K * H.
    pub fn n_actions(&self) -> usize {
        self.n_subchannels * self.n_power_levels()
    }

    /// Slots per period.
    pub fn t_slots(&self) -> usize {
        (self.period_ms / self.slot_ms) as usize
    }

    /// Slot duration in seconds.
    pub fn slot_s(&self) -> f64 {
        self.slot_ms as f64 * 1e-3
    }

    /// Payload per platoon in bits.
    pub fn payload_bits(&self) -> f64 {
        8.0 * self.payload_bytes as f64
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        if self.n_platoons == 0 {
            return err("n_platoons must be >= 1".into());
        }
        if self.platoon_len < 2 {
            return err("platoon_len must be >= 2 (a leader and at least one follower)".into());
        }
        if self.head_to_tail_m <= 0.0 {
            return err("head_to_tail_m must be > 0".into());
        }
        if self.n_subchannels == 0 {
            return err("n_subchannels must be >= 1".into());
        }
        if self.subchannel_bw_hz <= 0.0 || self.carrier_hz <= 0.0 {
            return err("subchannel_bw_hz and carrier_hz must be > 0".into());
        }
        if self.power_levels_dbm.is_empty() {
            return err("power_levels_dbm must be non-empty".into());
        }
        if !self.power_levels_dbm.windows(2).all(|w| w[0] > w[1]) {
            return err("power_levels_dbm must be strictly decreasing".into());
        }
        if self.slot_ms == 0 || self.period_ms == 0 || self.period_ms % self.slot_ms != 0 {
            return err(format!(
                "period_ms ({}) must be a positive multiple of slot_ms ({})",
                self.period_ms, self.slot_ms
            ));
        }
        if self.payload_bytes == 0 {
            return err("payload_bytes must be > 0".into());
        }
        if self.payload_unit_bytes == 0 {
            return err("payload_unit_bytes must be > 0".into());
        }
        if self.lane_width_m < 0.0 {
            return err("lane_width_m must be >= 0".into());
        }
        if self.head_spacing_m <= 0.0 {
            return err("head_spacing_m must be > 0".into());
        }
        if self.head_jitter_m < 0.0 {
            return err("head_jitter_m must be >= 0".into());
        }
        if self.shadow_std_db < 0.0 {
            return err("shadow_std_db must be >= 0".into());
        }
        if self.obs_interference_lo_dbm >= self.obs_interference_hi_dbm {
            return err("obs_interference_lo_dbm must be below obs_interference_hi_dbm".into());
        }
        Ok(())
    }
}

/// Which TD-target formulation the learner uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetMode {
    /// Team reward counted once; bootstrap on each agent's best next action.
    Standard,
    /// Reward counted once per agent; bootstrap on the action actually taken.
    /// Kept for side-by-side comparison with `Standard`.
    Literal,
}

/// Learning hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    /// Training episodes.
    pub episodes: usize,
    /// Recurrent hidden width.
    pub hidden_dim: usize,
    /// Adam learning rate.
    pub learning_rate: f64,
    /// TD discount factor.
    pub discount: f64,
    /// Completion-bonus coefficient: the slot on which the last payload
    /// finishes pays `tau * remaining_slots` instead of the rate sum.
    pub tau: f64,
    /// Per-episode exploration decrement; epsilon(e) = max(1 - delta*e, floor).
    pub epsilon_delta: f64,
    /// Exploration floor.
    pub epsilon_floor: f64,
    /// Episodes sampled per gradient update.
    pub batch_episodes: usize,
    /// Replay memory capacity in episodes (FIFO eviction).
    pub replay_capacity: usize,
    /// Target-network sync cadence, in gradient updates.
    pub target_sync_updates: usize,
    /// Global-norm gradient clip.
    pub grad_clip_norm: f64,
    /// TD-target formulation.
    pub target_mode: TargetMode,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: &str| Err(Error::Config(m.into()));
        if self.episodes == 0 {
            return err("episodes must be >= 1");
        }
        if self.hidden_dim == 0 {
            return err("hidden_dim must be >= 1");
        }
        if self.learning_rate <= 0.0 {
            return err("learning_rate must be > 0");
        }
        if !(0.0..=1.0).contains(&self.discount) {
            return err("discount must be in [0, 1]");
        }
        if self.tau < 0.0 {
            return err("tau must be >= 0");
        }
        if self.epsilon_delta < 0.0 {
            return err("epsilon_delta must be >= 0");
        }
        if !(0.0..=1.0).contains(&self.epsilon_floor) {
            return err("epsilon_floor must be in [0, 1]");
        }
        if self.batch_episodes == 0 {
            return err("batch_episodes must be >= 1");
        }
        if self.replay_capacity < self.batch_episodes {
            return err("replay_capacity must be >= batch_episodes");
        }
        if self.target_sync_updates == 0 {
            return err("target_sync_updates must be >= 1");
        }
        if self.grad_clip_norm <= 0.0 {
            return err("grad_clip_norm must be > 0");
        }
        Ok(())
    }
}

/// Full run configuration: `[scenario]` plus `[training]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub scenario: ScenarioConfig,
    pub training: TrainConfig,
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SimConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.training.validate()
    }

    /// Hash of everything a trained network depends on: geometry, radio
    /// parameters, action space, observation layout, and network width.
    ///
    /// Payload size and seed are deliberately excluded; they are
    /// evaluation-time choices (payload sweeps and fresh eval seeds run
    /// against the same checkpoint).
    pub fn structural_hash(&self) -> u64 {
        let s = &self.scenario;
        let mut repr = String::new();
        let mut push = |v: String| {
            repr.push_str(&v);
            repr.push(';');
        };
        push(format!("{}", s.n_platoons));
        push(format!("{}", s.platoon_len));
        push(format!("{}", s.head_to_tail_m));
        push(format!("{}", s.n_subchannels));
        push(format!("{}", s.subchannel_bw_hz));
        push(format!("{}", s.carrier_hz));
        push(format!("{:?}", s.power_levels_dbm));
        push(format!("{}", s.noise_dbm));
        push(format!("{}", s.antenna_gain_db));
        push(format!("{}", s.shadow_std_db));
        push(format!("{}", s.slot_ms));
        push(format!("{}", s.period_ms));
        push(format!("{}", s.lane_width_m));
        push(format!("{:?}", s.lane_spacing_scheme));
        push(format!("{}", s.head_spacing_m));
        push(format!("{}", s.head_jitter_m));
        push(format!("{}", s.obs_interference_lo_dbm));
        push(format!("{}", s.obs_interference_hi_dbm));
        push(format!("{}", self.training.hidden_dim));
        fnv1a(repr.as_bytes())
    }
}

/// FNV-1a; stable across builds, unlike the stdlib hasher.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let cfg = crate::presets::desk();
        let text = cfg.to_toml_string();
        let back = SimConfig::from_toml_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn missing_key_is_named() {
        let text = crate::presets::desk()
            .to_toml_string()
            .replace("n_platoons = 4\n", "");
        let err = SimConfig::from_toml_str(&text).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(err.to_string().contains("n_platoons"), "{err}");
    }

    #[test]
    fn power_levels_must_decrease() {
        let mut cfg = crate::presets::desk();
        cfg.scenario.power_levels_dbm = vec![23.0, 23.0, 10.0];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn period_must_divide() {
        let mut cfg = crate::presets::desk();
        cfg.scenario.slot_ms = 3;
        assert!(cfg.validate().is_err(), "100 ms period over 3 ms slots");
        cfg.scenario.slot_ms = 1;
        cfg.scenario.period_ms = 0;
        assert!(cfg.validate().is_err(), "empty period");
    }

    #[test]
    fn hash_ignores_payload_and_seed_but_not_geometry() {
        let base = crate::presets::desk();
        let mut payload = base.clone();
        payload.scenario.payload_bytes = 99_999;
        payload.scenario.rng_seed = 42;
        assert_eq!(base.structural_hash(), payload.structural_hash());

        let mut moved = base.clone();
        moved.scenario.head_spacing_m += 1.0;
        assert_ne!(base.structural_hash(), moved.structural_hash());
    }
}
