//! Desk-scale simulator and learners for multi-platoon vehicle-to-vehicle
//! groupcast over shared sidelink subchannels.
//!
//! Platoon leaders must push a periodic payload to their followers over K
//! orthogonal subchannels; picking a subchannel and a transmit power each
//! millisecond slot is a cooperative multi-agent reinforcement-learning
//! problem. This crate provides:
//!
//! - the radio model ([`channel`]): geometry, two-clock fading, SINR and the
//!   worst-receiver groupcast rate;
//! - the episodic environment ([`env`]) the agents interact with;
//! - a from-scratch recurrent Q-network with hand-derived gradients ([`nn`]);
//! - the sum-mixer cooperative learner ([`vdn`]) and its baselines
//!   ([`marl`]): independent fingerprint learners and uniform random;
//! - greedy evaluation and metrics ([`eval`]).
//!
//! Everything is deterministic given a seed: every random draw comes from a
//! purpose-tagged counter-mode stream derived in [`rng`].

pub mod channel;
pub mod config;
pub mod env;
pub mod error;
pub mod eval;
pub mod marl;
pub mod nn;
pub mod presets;
pub mod replay;
pub mod rng;
pub mod rollout;
pub mod vdn;

pub use channel::{LinkFading, LinkState, Topology, Transmission};
pub use config::{Algo, LaneScheme, ScenarioConfig, SimConfig, TargetMode, TrainConfig};
pub use env::{Action, Env, EnvState, Observation, StepOutcome};
pub use error::{Error, Result};
pub use eval::{EvalPointResult, EvalPolicy, TraceRow};
pub use marl::{FingerprintObs, MarlTrainResult};
pub use nn::checkpoint::Checkpoint;
pub use nn::{OptimState, QNetDims, QNetParams, Tensor2};
pub use replay::{EpisodeRecord, EpsilonSchedule, ReplayMemory};
pub use rollout::RolloutOutcome;
pub use vdn::{TrainLogRow, TrainResult};
