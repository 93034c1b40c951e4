//! The partially observable Markov game.
//!
//! One episode is one payload period: every platoon leader must groupcast
//! `payload_bytes` to its followers within `t_slots` slots. Each slot, every
//! agent (platoon) picks a subchannel and a power level; rates follow from
//! the resulting interference; remaining payloads shrink by rate * bandwidth
//! * slot time. Agents only see their own platoon: last slot's per-subchannel
//! interference at the tail receiver, plus normalized remaining payload and
//! time budget.
//!
//! Platoons that have finished their payload are forced silent. The episode
//! ends when every payload is complete (paying a one-time completion bonus of
//! `tau * remaining_slots`) or when the period runs out.

use rand_chacha::ChaCha12Rng;

use crate::channel::{
    self, LinkFading, Topology, Transmission, build_topology, dbm_to_watt, watt_to_dbm,
};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::rng::{self, tag};

// ---------------------------------------------------------------------------
// Actions
// ---------------------------------------------------------------------------

/// One agent's choice for a slot: a subchannel index and a power-level index
/// into `power_levels_dbm`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Action {
    pub subchannel: usize,
    pub power_level: usize,
}

impl Action {
    /// Flat id in [0, K*H): subchannel * H + power_level.
    pub fn encode(&self, n_power_levels: usize) -> usize {
        self.subchannel * n_power_levels + self.power_level
    }

    /// Inverse of `encode`.
    pub fn decode(flat_id: usize, n_subchannels: usize, n_power_levels: usize) -> Result<Action> {
        if flat_id >= n_subchannels * n_power_levels {
            return Err(Error::Domain(format!(
                "action id {flat_id} out of range for {n_subchannels} subchannels x {n_power_levels} power levels"
            )));
        }
        Ok(Action {
            subchannel: flat_id / n_power_levels,
            power_level: flat_id % n_power_levels,
        })
    }
}

// ---------------------------------------------------------------------------
// Observations
// ---------------------------------------------------------------------------

/// An agent's local view, all components in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    /// Previous slot's interference-plus-noise power at the platoon's tail
    /// receiver, one value per subchannel, affinely mapped from the
    /// configured dBm range and clamped.
    pub interference_prev: Vec<f64>,
    /// Remaining payload over the full payload.
    pub remaining_bits_norm: f64,
    /// Remaining slots over the period.
    pub remaining_slots_norm: f64,
}

impl Observation {
    pub fn dim(n_subchannels: usize) -> usize {
        n_subchannels + 2
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.interference_prev.clone();
        v.push(self.remaining_bits_norm);
        v.push(self.remaining_slots_norm);
        v
    }
}

// ---------------------------------------------------------------------------
// Environment
// ---------------------------------------------------------------------------

/// Full (hidden) simulator state.
#[derive(Clone, Debug)]
pub struct EnvState {
    /// Slots elapsed, 0..=t_slots.
    pub slot: usize,
    /// Outstanding payload per platoon, bits.
    pub remaining_bits: Vec<f64>,
    pub topology: Topology,
    pub fading: LinkFading,
    /// Interference-plus-noise measured last slot at each platoon's tail,
    /// dBm, per subchannel.
    pub last_interference_dbm: Vec<Vec<f64>>,
    pub done: bool,
}

/// What one step returns.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub observations: Vec<Observation>,
    pub reward: f64,
    pub done: bool,
    /// Realized effective rate per platoon this slot (0 when silent).
    pub rates: Vec<f64>,
    /// Bits actually credited per platoon this slot (capped at remaining).
    pub delivered_bits: Vec<f64>,
}

pub struct Env {
    cfg: ScenarioConfig,
    tau: f64,
    state: EnvState,
    rng: ChaCha12Rng,
}

impl Env {
    /// Start episode `episode_idx`: new geometry and large-scale fading, full
    /// payloads, noise-floor interference history. Deterministic per
    /// (`cfg.rng_seed`, `episode_idx`).
    pub fn reset(
        cfg: &ScenarioConfig,
        tau: f64,
        episode_idx: u64,
    ) -> Result<(Env, Vec<Observation>)> {
        cfg.validate()?;
        let mut rng = rng::indexed_stream(cfg.rng_seed, tag::ENV, episode_idx);
        let topology = build_topology(cfg, &mut rng)?;
        let fading = LinkFading::sample_large_scale(&topology, cfg, &mut rng)?;
        let n = cfg.n_platoons;
        let noise_floor = vec![vec![cfg.noise_dbm; cfg.n_subchannels]; n];
        let state = EnvState {
            slot: 0,
            remaining_bits: vec![cfg.payload_bits(); n],
            topology,
            fading,
            last_interference_dbm: noise_floor,
            done: false,
        };
        let env = Env { cfg: cfg.clone(), tau, state, rng };
        let obs = env.observations();
        Ok((env, obs))
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn cfg(&self) -> &ScenarioConfig {
        &self.cfg
    }

    /// Test hook: overwrite a platoon's outstanding payload.
    pub fn set_remaining_bits(&mut self, platoon: usize, bits: f64) {
        self.state.remaining_bits[platoon] = bits;
    }

    /// Advance one slot under the given joint action.
    pub fn step(&mut self, actions: &[Action]) -> Result<StepOutcome> {
        if self.state.done {
            return Err(Error::Usage("step called on a finished episode".into()));
        }
        let n = self.cfg.n_platoons;
        if actions.len() != n {
            return Err(Error::Usage(format!(
                "expected {n} actions, got {}",
                actions.len()
            )));
        }

        self.state.fading.resample_small_scale(&mut self.rng);

        // Finished platoons are forced silent no matter what they chose.
        let active: Vec<bool> = self.state.remaining_bits.iter().map(|&b| b > 0.0).collect();
        let transmissions: Vec<Option<Transmission>> = actions
            .iter()
            .zip(&active)
            .map(|(a, &is_active)| {
                is_active.then(|| Transmission {
                    subchannel: a.subchannel,
                    power_w: dbm_to_watt(self.cfg.power_levels_dbm[a.power_level]),
                })
            })
            .collect();

        let noise_w = dbm_to_watt(self.cfg.noise_dbm);
        let bits_per_rate = self.cfg.subchannel_bw_hz * self.cfg.slot_s();
        let remaining_before = self.state.remaining_bits.clone();
        let mut rates = vec![0.0; n];
        let mut delivered = vec![0.0; n];
        for p in 0..n {
            if let Some(t) = transmissions[p] {
                let rate =
                    channel::effective_rate(&self.state.fading, noise_w, &transmissions, p, t.subchannel);
                rates[p] = rate;
                delivered[p] = (rate * bits_per_rate).min(self.state.remaining_bits[p]);
                self.state.remaining_bits[p] -= delivered[p];
            }
        }

        // Interference-plus-noise per platoon per subchannel at the tail
        // receiver, measured from this slot's realized transmissions.
        let tail = self.cfg.n_followers();
        for p in 0..n {
            for ch in 0..self.cfg.n_subchannels {
                let mut power = noise_w;
                for (tx, t) in transmissions.iter().enumerate() {
                    if tx == p {
                        continue;
                    }
                    if let Some(t) = t {
                        if t.subchannel == ch {
                            power += t.power_w * self.state.fading.link(tx, p, tail).gain();
                        }
                    }
                }
                self.state.last_interference_dbm[p][ch] = watt_to_dbm(power);
            }
        }

        self.state.slot += 1;
        let remaining_slots = self.cfg.t_slots() - self.state.slot;
        let reward = reward_fn(
            &rates,
            &remaining_before,
            &self.state.remaining_bits,
            remaining_slots,
            self.tau,
        );
        let all_done = self.state.remaining_bits.iter().all(|&b| b <= 0.0);
        self.state.done = all_done || self.state.slot == self.cfg.t_slots();

        Ok(StepOutcome {
            observations: self.observations(),
            reward,
            done: self.state.done,
            rates,
            delivered_bits: delivered,
        })
    }

    /// Per-agent local observations of the current state.
    pub fn observations(&self) -> Vec<Observation> {
        let lo = self.cfg.obs_interference_lo_dbm;
        let hi = self.cfg.obs_interference_hi_dbm;
        let t_slots = self.cfg.t_slots() as f64;
        let payload = self.cfg.payload_bits();
        (0..self.cfg.n_platoons)
            .map(|p| Observation {
                interference_prev: self.state.last_interference_dbm[p]
                    .iter()
                    .map(|&dbm| ((dbm - lo) / (hi - lo)).clamp(0.0, 1.0))
                    .collect(),
                remaining_bits_norm: self.state.remaining_bits[p] / payload,
                remaining_slots_norm: (t_slots - self.state.slot as f64) / t_slots,
            })
            .collect()
    }
}

/// Slot reward.
///
/// While any payload is outstanding, the reward is the rate sum of the
/// platoons that still had payload at the start of the slot (finished
/// platoons contribute nothing). On the slot where the last payload
/// completes, the reward is instead `tau * remaining_slots`, paid once; the
/// episode then terminates. Exactly one branch applies per slot.
pub fn reward_fn(
    rates: &[f64],
    remaining_before: &[f64],
    remaining_after: &[f64],
    remaining_slots: usize,
    tau: f64,
) -> f64 {
    if remaining_after.iter().all(|&b| b <= 0.0) {
        tau * remaining_slots as f64
    } else {
        rates
            .iter()
            .zip(remaining_before)
            .filter(|&(_, &before)| before > 0.0)
            .map(|(&r, _)| r)
            .sum()
    }
}
