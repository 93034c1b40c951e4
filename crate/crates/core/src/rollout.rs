//! Shared episode runner: every algorithm (learned or not, training or
//! greedy evaluation) collects experience through the same loop, so physics
//! and bookkeeping cannot drift between them.

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::config::ScenarioConfig;
use crate::env::{Action, Env, Observation};
use crate::error::Result;
use crate::marl::FingerprintObs;
use crate::nn::QNetParams;
use crate::replay::EpisodeRecord;
use crate::vdn;

/// Per-slot decision maker. `reset` is called once per episode before any
/// `act`; `act` is called once per agent per slot in agent order.
pub trait SlotPolicy {
    fn reset(&mut self);
    fn act(
        &mut self,
        agent: usize,
        obs: &Observation,
        prev_action: Option<usize>,
        rng: &mut ChaCha12Rng,
    ) -> usize;
}

/// Uniform over the flat action space.
pub struct RandomPolicy {
    pub n_actions: usize,
}

impl SlotPolicy for RandomPolicy {
    fn reset(&mut self) {}

    fn act(&mut self, _: usize, _: &Observation, _: Option<usize>, rng: &mut ChaCha12Rng) -> usize {
        rng.random_range(0..self.n_actions)
    }
}

/// One shared net; agents are told apart by an identity one-hot and their
/// own recurrent state.
pub struct SharedNetPolicy<'a> {
    pub net: &'a QNetParams,
    pub n_agents: usize,
    pub epsilon: f64,
    hiddens: Vec<Vec<f64>>,
}

impl<'a> SharedNetPolicy<'a> {
    pub fn new(net: &'a QNetParams, n_agents: usize, epsilon: f64) -> Self {
        let hiddens = vec![net.zero_hidden(); n_agents];
        SharedNetPolicy { net, n_agents, epsilon, hiddens }
    }
}

impl SlotPolicy for SharedNetPolicy<'_> {
    fn reset(&mut self) {
        for h in &mut self.hiddens {
            h.fill(0.0);
        }
    }

    fn act(
        &mut self,
        agent: usize,
        obs: &Observation,
        prev_action: Option<usize>,
        rng: &mut ChaCha12Rng,
    ) -> usize {
        let (a, h_next) = vdn::select_action(
            agent,
            self.n_agents,
            obs,
            prev_action,
            &self.hiddens[agent],
            self.net,
            self.epsilon,
            rng,
        );
        self.hiddens[agent] = h_next;
        a
    }
}

/// Independent nets, one per agent, fed fingerprinted observations.
pub struct PerAgentPolicy<'a> {
    pub nets: &'a [QNetParams],
    pub epsilon: f64,
    /// Fingerprint appended to every observation: (collection-time epsilon,
    /// normalized episode index).
    pub fingerprint: (f64, f64),
    hiddens: Vec<Vec<f64>>,
}

impl<'a> PerAgentPolicy<'a> {
    pub fn new(nets: &'a [QNetParams], epsilon: f64, fingerprint: (f64, f64)) -> Self {
        let hiddens = nets.iter().map(|n| n.zero_hidden()).collect();
        PerAgentPolicy { nets, epsilon, fingerprint, hiddens }
    }
}

impl SlotPolicy for PerAgentPolicy<'_> {
    fn reset(&mut self) {
        for h in &mut self.hiddens {
            h.fill(0.0);
        }
    }

    fn act(
        &mut self,
        agent: usize,
        obs: &Observation,
        _prev_action: Option<usize>,
        rng: &mut ChaCha12Rng,
    ) -> usize {
        let fp = FingerprintObs {
            base: obs.to_vec(),
            epsilon: self.fingerprint.0,
            episode_norm: self.fingerprint.1,
        };
        let net = &self.nets[agent];
        let (q, h_next) =
            crate::nn::qnet_forward_nograd(net, &fp.to_input(), &self.hiddens[agent]);
        self.hiddens[agent] = h_next;
        epsilon_greedy(&q, self.epsilon, rng)
    }
}

/// With probability `epsilon` a uniform action, otherwise the argmax;
/// ties break toward the lowest flat id.
pub fn epsilon_greedy(q: &[f64], epsilon: f64, rng: &mut ChaCha12Rng) -> usize {
    if rng.random::<f64>() < epsilon {
        rng.random_range(0..q.len())
    } else {
        argmax(q)
    }
}

/// Index of the largest value; first occurrence wins ties.
pub fn argmax(q: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in q.iter().enumerate().skip(1) {
        if v > q[best] {
            best = i;
        }
    }
    best
}

/// Everything an episode produces, for training and for metrics.
#[derive(Clone, Debug)]
pub struct RolloutOutcome {
    pub record: EpisodeRecord,
    /// [slot][platoon] realized effective rate; length = slots actually run.
    pub rates_per_slot: Vec<Vec<f64>>,
    /// Bits delivered per platoon over the whole episode.
    pub delivered_bits: Vec<f64>,
    /// Payload still outstanding per platoon when the episode ended; a
    /// platoon delivered fully iff its entry is exactly zero.
    pub final_remaining_bits: Vec<f64>,
    /// Number of slots used when every payload completed, if it did.
    pub completion_slot: Option<usize>,
}

impl RolloutOutcome {
    /// Did every platoon get its full payload across?
    pub fn all_delivered(&self) -> bool {
        self.completion_slot.is_some()
    }

    /// Per-platoon full-delivery flags.
    pub fn delivered_flags(&self) -> Vec<bool> {
        self.final_remaining_bits.iter().map(|&b| b <= 0.0).collect()
    }
}

/// Play one full episode of environment `episode_idx` under `policy`.
///
/// Environment randomness comes from (`cfg.rng_seed`, `episode_idx`) only,
/// so two policies evaluated with the same seed face identical channels —
/// comparisons are paired.
pub fn run_episode(
    cfg: &ScenarioConfig,
    tau: f64,
    episode_idx: u64,
    epsilon: f64,
    policy: &mut dyn SlotPolicy,
    policy_rng: &mut ChaCha12Rng,
) -> Result<RolloutOutcome> {
    let (mut env, mut obs) = Env::reset(cfg, tau, episode_idx)?;
    policy.reset();

    let n = cfg.n_platoons;
    let n_power = cfg.n_power_levels();
    let mut observations = vec![obs.iter().map(Observation::to_vec).collect::<Vec<_>>()];
    let mut actions_log: Vec<Vec<usize>> = Vec::new();
    let mut rewards: Vec<f64> = Vec::new();
    let mut dones: Vec<bool> = Vec::new();
    let mut rates_per_slot: Vec<Vec<f64>> = Vec::new();
    let mut delivered_bits = vec![0.0; n];
    let mut prev_actions: Vec<Option<usize>> = vec![None; n];

    loop {
        let flat: Vec<usize> = (0..n)
            .map(|agent| policy.act(agent, &obs[agent], prev_actions[agent], policy_rng))
            .collect();
        let joint: Vec<Action> = flat
            .iter()
            .map(|&id| Action::decode(id, cfg.n_subchannels, n_power))
            .collect::<Result<_>>()?;
        let out = env.step(&joint)?;

        observations.push(out.observations.iter().map(Observation::to_vec).collect());
        actions_log.push(flat.clone());
        rewards.push(out.reward);
        dones.push(out.done);
        rates_per_slot.push(out.rates.clone());
        for (tot, d) in delivered_bits.iter_mut().zip(&out.delivered_bits) {
            *tot += d;
        }
        prev_actions = flat.into_iter().map(Some).collect();
        obs = out.observations;
        if out.done {
            break;
        }
    }

    let final_remaining_bits = env.state().remaining_bits.clone();
    let completion_slot = final_remaining_bits
        .iter()
        .all(|&b| b <= 0.0)
        .then_some(env.state().slot);

    let record = EpisodeRecord {
        observations,
        actions: actions_log,
        rewards,
        dones,
        epsilon,
        episode_idx,
    };
    Ok(RolloutOutcome {
        record,
        rates_per_slot,
        delivered_bits,
        final_remaining_bits,
        completion_slot,
    })
}
