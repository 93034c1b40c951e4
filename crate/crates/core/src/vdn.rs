//! Cooperative Q-learning with an additive mixer.
//!
//! All agents share one recurrent Q-net; the team value is the plain sum of
//! the per-agent Q-values of the chosen actions. Because the mixer is a sum,
//! each agent maximizing its own head maximizes the team value, so execution
//! stays fully decentralized while the TD loss trains the joint value.
//!
//! Training follows the usual deep-Q recipe: epsilon-greedy collection,
//! full-episode FIFO replay, a frozen target copy synced on a fixed cadence,
//! Adam on a backpropagation-through-time gradient.

use std::time::Instant;

use rand_chacha::ChaCha12Rng;

use crate::config::{SimConfig, TargetMode};
use crate::env::Observation;
use crate::error::{Error, Result};
use crate::nn::adam::{self, OptimState};
use crate::nn::{QNetDims, QNetParams, qnet_backward, qnet_forward, qnet_forward_nograd};
use crate::replay::{EpisodeRecord, EpsilonSchedule, ReplayMemory};
use crate::rng::{self, tag};
use crate::rollout::{self, SharedNetPolicy};

// ---------------------------------------------------------------------------
// Network input assembly
// ---------------------------------------------------------------------------

/// The shared net sees: local observation, previous own action as a one-hot
/// (zeros on the first slot), and the agent's identity as a one-hot.
pub fn assemble_input(
    obs: &[f64],
    prev_action: Option<usize>,
    n_actions: usize,
    agent: usize,
    n_agents: usize,
) -> Vec<f64> {
    let mut x = Vec::with_capacity(obs.len() + n_actions + n_agents);
    x.extend_from_slice(obs);
    let mut one_hot = vec![0.0; n_actions];
    if let Some(a) = prev_action {
        one_hot[a] = 1.0;
    }
    x.extend_from_slice(&one_hot);
    let mut id = vec![0.0; n_agents];
    id[agent] = 1.0;
    x.extend_from_slice(&id);
    x
}

pub fn input_dim(obs_dim: usize, n_actions: usize, n_agents: usize) -> usize {
    obs_dim + n_actions + n_agents
}

// ---------------------------------------------------------------------------
// Action selection
// ---------------------------------------------------------------------------

/// Epsilon-greedy step for one agent. The forward pass runs in both branches
/// so the recurrent state advances identically whether the action was
/// explored or greedy; ties break toward the lowest flat id.
#[allow(clippy::too_many_arguments)]
pub fn select_action(
    agent: usize,
    n_agents: usize,
    obs: &Observation,
    prev_action: Option<usize>,
    hidden: &[f64],
    params: &QNetParams,
    epsilon: f64,
    rng: &mut ChaCha12Rng,
) -> (usize, Vec<f64>) {
    let x = assemble_input(&obs.to_vec(), prev_action, params.dims.actions, agent, n_agents);
    let (q, h_next) = qnet_forward_nograd(params, &x, hidden);
    let a = rollout::epsilon_greedy(&q, epsilon, rng);
    (a, h_next)
}

// ---------------------------------------------------------------------------
// Mixer and targets
// ---------------------------------------------------------------------------

/// Team value: the sum of the per-agent chosen-action values.
pub fn mix(q_chosen: &[f64]) -> f64 {
    q_chosen.iter().sum()
}

/// TD target, team reward counted once, bootstrapping each agent's best
/// next action through the frozen copy; no bootstrap on terminal steps.
pub fn compute_target(
    reward: f64,
    done: bool,
    next_q_target_max: &[f64],
    discount: f64,
) -> f64 {
    if done {
        reward
    } else {
        reward + discount * next_q_target_max.iter().sum::<f64>()
    }
}

/// Alternative target: per-agent targets summed, which counts the shared
/// reward once per agent and bootstraps on the action actually taken.
pub fn compute_target_literal(
    reward: f64,
    n_agents: usize,
    done: bool,
    next_q_target_taken: &[f64],
    discount: f64,
) -> f64 {
    let r = reward * n_agents as f64;
    if done {
        r
    } else {
        r + discount * next_q_target_taken.iter().sum::<f64>()
    }
}

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

/// What `vdn_loss` needs besides the networks.
#[derive(Clone, Copy, Debug)]
pub struct LossCtx {
    pub n_agents: usize,
    pub discount: f64,
    pub target_mode: TargetMode,
}

/// Squared TD error, averaged over every (episode, slot) in the batch, and
/// its gradient with respect to the online parameters.
///
/// Hidden states start at zero for every episode and roll forward through
/// it, for the online and the target net alike. Gradients flow only through
/// the online net; targets are constants.
pub fn vdn_loss(
    batch: &[&EpisodeRecord],
    params: &QNetParams,
    target: &QNetParams,
    ctx: &LossCtx,
) -> Result<(f64, QNetParams)> {
    if batch.is_empty() {
        return Err(Error::Training("empty training batch".into()));
    }
    let n = ctx.n_agents;
    let n_actions = params.dims.actions;
    let total_slots: usize = batch.iter().map(|e| e.len()).sum();
    if total_slots == 0 {
        return Err(Error::Training("batch contains only empty episodes".into()));
    }
    let scale = 1.0 / total_slots as f64;

    let mut loss = 0.0;
    let mut grads = params.zeros_like();

    for ep in batch {
        debug_assert!(ep.check_consistent());
        let t_len = ep.len();

        // Forward pass, per agent, caches kept for the backward sweep.
        let mut caches = Vec::with_capacity(n);
        let mut q_online: Vec<Vec<Vec<f64>>> = Vec::with_capacity(n);
        let mut q_target_next: Vec<Vec<Vec<f64>>> = Vec::with_capacity(n);
        for i in 0..n {
            let mut agent_caches = Vec::with_capacity(t_len);
            let mut agent_q = Vec::with_capacity(t_len);
            let mut h = params.zero_hidden();
            for t in 0..t_len {
                let prev = if t == 0 { None } else { Some(ep.actions[t - 1][i]) };
                let x = assemble_input(&ep.observations[t][i], prev, n_actions, i, n);
                let (q, h_new, cache) = qnet_forward(params, &x, &h);
                h = h_new;
                agent_q.push(q);
                agent_caches.push(cache);
            }
            caches.push(agent_caches);
            q_online.push(agent_q);

            // Target net walks the same trajectory one step ahead; index t
            // holds its Q-values at observation t+1.
            let mut ht = target.zero_hidden();
            let mut agent_qt = Vec::with_capacity(t_len);
            for t in 0..=t_len {
                let prev = if t == 0 { None } else { Some(ep.actions[t - 1][i]) };
                let x = assemble_input(&ep.observations[t][i], prev, n_actions, i, n);
                let (q, h_new) = qnet_forward_nograd(target, &x, &ht);
                ht = h_new;
                if t > 0 {
                    agent_qt.push(q);
                }
            }
            q_target_next.push(agent_qt);
        }

        // TD errors per slot.
        let mut dq_tot = vec![0.0; t_len];
        for t in 0..t_len {
            let q_chosen: Vec<f64> =
                (0..n).map(|i| q_online[i][t][ep.actions[t][i]]).collect();
            let q_tot = mix(&q_chosen);
            let y = match ctx.target_mode {
                TargetMode::Standard => {
                    let maxes: Vec<f64> = (0..n)
                        .map(|i| {
                            q_target_next[i][t]
                                .iter()
                                .cloned()
                                .fold(f64::NEG_INFINITY, f64::max)
                        })
                        .collect();
                    compute_target(ep.rewards[t], ep.dones[t], &maxes, ctx.discount)
                }
                TargetMode::Literal => {
                    let taken: Vec<f64> = (0..n)
                        .map(|i| q_target_next[i][t][ep.actions[t][i]])
                        .collect();
                    compute_target_literal(ep.rewards[t], n, ep.dones[t], &taken, ctx.discount)
                }
            };
            let diff = q_tot - y;
            loss += diff * diff * scale;
            dq_tot[t] = 2.0 * diff * scale;
        }

        // Backward through time, independently per agent (the recurrent
        // chains are per-agent; parameters are shared so gradients sum).
        for i in 0..n {
            let mut dh = params.zero_hidden();
            for t in (0..t_len).rev() {
                let mut dq = vec![0.0; n_actions];
                dq[ep.actions[t][i]] = dq_tot[t];
                dh = qnet_backward(params, &caches[i][t], &dq, &dh, &mut grads);
            }
        }
    }

    if !loss.is_finite() {
        return Err(Error::Training(format!("non-finite loss {loss}")));
    }
    Ok((loss, grads))
}

/// Overwrite the frozen copy with the online parameters.
pub fn sync_target(params: &QNetParams, target: &mut QNetParams) {
    target.clone_from(params);
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

/// One line of the training log, one per episode.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainLogRow {
    pub episode: u64,
    pub epsilon: f64,
    pub total_reward: f64,
    /// None until the replay memory can fill a batch.
    pub loss: Option<f64>,
    pub wall_ms: u64,
}

pub struct TrainResult {
    pub params: QNetParams,
    pub log: Vec<TrainLogRow>,
}

/// Dimensions of the shared net for a given scenario.
pub fn net_dims(cfg: &SimConfig) -> QNetDims {
    let s = &cfg.scenario;
    QNetDims {
        input: input_dim(
            Observation::dim(s.n_subchannels),
            s.n_actions(),
            s.n_platoons,
        ),
        hidden: cfg.training.hidden_dim,
        actions: s.n_actions(),
    }
}

/// Full training run: collect an episode, store it, then (once the memory
/// can fill a batch) one gradient step per episode, syncing the target copy
/// on the configured cadence. Deterministic given the config.
pub fn train(cfg: &SimConfig) -> Result<TrainResult> {
    cfg.validate()?;
    let s = &cfg.scenario;
    let t = &cfg.training;
    let seed = s.rng_seed;

    let mut params = QNetParams::init(net_dims(cfg), &mut rng::stream(seed, tag::WEIGHT_INIT));
    let mut target = params.clone();
    let mut opt = OptimState::new(params.flat_len());
    let mut memory = ReplayMemory::new(t.replay_capacity);
    let schedule = EpsilonSchedule { delta: t.epsilon_delta, floor: t.epsilon_floor };
    let ctx = LossCtx { n_agents: s.n_platoons, discount: t.discount, target_mode: t.target_mode };

    let mut policy_rng = rng::stream(seed, tag::POLICY);
    let mut replay_rng = rng::stream(seed, tag::REPLAY);
    let mut log = Vec::with_capacity(t.episodes);
    let mut updates: usize = 0;

    for episode in 0..t.episodes as u64 {
        let started = Instant::now();
        let epsilon = schedule.value(episode);

        let outcome = {
            let mut policy = SharedNetPolicy::new(&params, s.n_platoons, epsilon);
            rollout::run_episode(s, t.tau, episode, epsilon, &mut policy, &mut policy_rng)?
        };
        let total_reward = outcome.record.total_reward();
        memory.push(outcome.record);

        let mut loss_val = None;
        if memory.len() >= t.batch_episodes {
            let (loss, grads) = {
                let batch = memory.sample(&mut replay_rng, t.batch_episodes);
                vdn_loss(&batch, &params, &target, &ctx)?
            };
            let mut gflat = grads.flat();
            let norm = adam::clip_global_norm(&mut gflat, t.grad_clip_norm);
            if norm > t.grad_clip_norm {
                log::debug!("episode {episode}: gradient norm {norm:.2} clipped");
            }
            let mut pflat = params.flat();
            adam::optimizer_step(&mut opt, &mut pflat, &gflat, t.learning_rate);
            params.set_flat(&pflat);
            updates += 1;
            if updates % t.target_sync_updates == 0 {
                sync_target(&params, &mut target);
            }
            loss_val = Some(loss);
        }

        let wall_ms = started.elapsed().as_millis() as u64;
        if episode % 200 == 0 {
            log::info!(
                "episode {episode}: epsilon {epsilon:.3}, reward {total_reward:.1}, loss {loss_val:?}"
            );
        }
        log.push(TrainLogRow { episode, epsilon, total_reward, loss: loss_val, wall_ms });
    }

    Ok(TrainResult { params, log })
}
