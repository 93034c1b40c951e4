//! Ready-made configurations.
//!
//! `desk()` is the four-platoon highway scenario used throughout the test
//! suite; `smoke()` is a two-platoon shrink for fast checks. The TOML files
//! under `configs/` at the repo root mirror these values.

use crate::config::{LaneScheme, ScenarioConfig, SimConfig, TargetMode, TrainConfig};

/// Four platoons, two subchannels, four power levels, 100 slots of 1 ms.
///
/// Noise is a 180 kHz thermal floor with a 9 dB receiver noise figure
/// (-174 dBm/Hz + 9 dB + 10*log10(180e3) = -112.4 dBm), which makes the
/// -114 dBm power level an effectively silent choice.
pub fn desk() -> SimConfig {
    SimConfig {
        scenario: ScenarioConfig {
            n_platoons: 4,
            platoon_len: 5,
            head_to_tail_m: 75.0,
            n_subchannels: 2,
            subchannel_bw_hz: 180e3,
            carrier_hz: 5.9e9,
            power_levels_dbm: vec![23.0, 15.0, 10.0, -114.0],
            noise_dbm: -112.4,
            antenna_gain_db: 3.0,
            shadow_std_db: 3.0,
            slot_ms: 1,
            period_ms: 100,
            payload_bytes: 2400,
            payload_unit_bytes: 1200,
            lane_width_m: 4.0,
            lane_spacing_scheme: LaneScheme::Alternating,
            head_spacing_m: 75.0,
            head_jitter_m: 5.0,
            obs_interference_lo_dbm: -114.0,
            obs_interference_hi_dbm: -30.0,
            rng_seed: 1,
        },
        training: TrainConfig {
            episodes: 3000,
            hidden_dim: 64,
            learning_rate: 1e-3,
            discount: 0.99,
            tau: 0.5,
            epsilon_delta: 1e-3,
            epsilon_floor: 0.03,
            batch_episodes: 32,
            replay_capacity: 2000,
            // Hard-sync cadence in gradient updates. Each sync deepens the
            // effective Bellman backup by ~1, so the cadence sets how fast
            // value propagates: 100 never untangles the shared net's
            // same-channel collapse within the budget, 10 re-destabilizes
            // after recovery, 25 converges to channel-splitting policies.
            target_sync_updates: 25,
            grad_clip_norm: 10.0,
            target_mode: TargetMode::Standard,
        },
    }
}

/// Two platoons, one 1200-byte payload each, and a 20 ms period. Finishes a
/// training run in seconds.
///
/// The short period is what makes this shrink informative: with the full
/// 100 ms deadline two platoons always deliver no matter how badly they
/// schedule, and every policy's return collapses to within a few percent of
/// every other's. At 20 ms a sloppy schedule misses deadlines, so learning
/// has something real to gain.
pub fn smoke() -> SimConfig {
    let mut cfg = desk();
    cfg.scenario.n_platoons = 2;
    cfg.scenario.payload_bytes = 1200;
    cfg.scenario.period_ms = 20;
    cfg.training.episodes = 300;
    cfg.training.hidden_dim = 32;
    cfg.training.epsilon_delta = 4e-3;
    cfg.training.target_sync_updates = 25;
    cfg
}
