//! Comparison policies: uniform-random selection, and independent per-agent
//! deep Q-learning stabilized with an exploration fingerprint.
//!
//! The fingerprint learner deliberately shares everything with the
//! cooperative learner except the two things under study: there is no value
//! mixing (each net chases its own TD target) and no parameter sharing (one
//! net per agent). Architecture, optimizer, replay and exploration schedule
//! are identical.

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::config::SimConfig;
use crate::env::Observation;
use crate::error::{Error, Result};
use crate::nn::adam::{self, OptimState};
use crate::nn::{QNetDims, QNetParams, qnet_backward, qnet_forward, qnet_forward_nograd};
use crate::replay::{EpisodeRecord, EpsilonSchedule, ReplayMemory};
use crate::rng::{self, tag};
use crate::rollout::{self, PerAgentPolicy};
use crate::vdn::TrainLogRow;

/// Uniform choice over the flat action space, one id per agent.
pub fn random_policy(n_agents: usize, n_actions: usize, rng: &mut ChaCha12Rng) -> Vec<usize> {
    (0..n_agents).map(|_| rng.random_range(0..n_actions)).collect()
}

/// A local observation extended with the collection-time exploration state,
/// so stale replayed experience is distinguishable from fresh experience.
#[derive(Clone, Debug, PartialEq)]
pub struct FingerprintObs {
    pub base: Vec<f64>,
    /// Exploration rate when the observation was collected, in [0, 1].
    pub epsilon: f64,
    /// Episode index over total episodes, in [0, 1].
    pub episode_norm: f64,
}

impl FingerprintObs {
    pub fn to_input(&self) -> Vec<f64> {
        let mut x = self.base.clone();
        x.push(self.epsilon);
        x.push(self.episode_norm);
        x
    }

    pub fn dim(obs_dim: usize) -> usize {
        obs_dim + 2
    }
}

/// Dimensions of each per-agent net for a given scenario.
pub fn net_dims(cfg: &SimConfig) -> QNetDims {
    QNetDims {
        input: FingerprintObs::dim(Observation::dim(cfg.scenario.n_subchannels)),
        hidden: cfg.training.hidden_dim,
        actions: cfg.scenario.n_actions(),
    }
}

pub struct MarlTrainResult {
    pub nets: Vec<QNetParams>,
    pub log: Vec<TrainLogRow>,
}

/// Mean squared per-agent TD error over a batch, plus per-net gradients.
///
/// Each agent bootstraps its own frozen copy at its best next action and
/// sees the shared team reward once. The fingerprint fed to the nets is the
/// one the episode was collected under.
pub fn marl_loss(
    batch: &[&EpisodeRecord],
    nets: &[QNetParams],
    targets: &[QNetParams],
    discount: f64,
    episodes_total: usize,
) -> Result<(f64, Vec<QNetParams>)> {
    let n = nets.len();
    let total_slots: usize = batch.iter().map(|e| e.len()).sum();
    if total_slots == 0 {
        return Err(Error::Training("batch contains only empty episodes".into()));
    }
    let scale = 1.0 / total_slots as f64;

    let mut loss = 0.0;
    let mut grads: Vec<QNetParams> = nets.iter().map(|p| p.zeros_like()).collect();

    for ep in batch {
        let t_len = ep.len();
        let fp = (
            ep.epsilon,
            ep.episode_idx as f64 / episodes_total as f64,
        );
        for i in 0..n {
            let input = |t: usize| {
                FingerprintObs {
                    base: ep.observations[t][i].clone(),
                    epsilon: fp.0,
                    episode_norm: fp.1,
                }
                .to_input()
            };

            let mut caches = Vec::with_capacity(t_len);
            let mut q_online = Vec::with_capacity(t_len);
            let mut h = nets[i].zero_hidden();
            for t in 0..t_len {
                let (q, h_new, cache) = qnet_forward(&nets[i], &input(t), &h);
                h = h_new;
                q_online.push(q);
                caches.push(cache);
            }

            let mut q_target_next = Vec::with_capacity(t_len);
            let mut ht = targets[i].zero_hidden();
            for t in 0..=t_len {
                let (q, h_new) = qnet_forward_nograd(&targets[i], &input(t), &ht);
                ht = h_new;
                if t > 0 {
                    q_target_next.push(q);
                }
            }

            let mut dq_per_slot = vec![0.0; t_len];
            for t in 0..t_len {
                let q_i = q_online[t][ep.actions[t][i]];
                let y = if ep.dones[t] {
                    ep.rewards[t]
                } else {
                    let best = q_target_next[t]
                        .iter()
                        .cloned()
                        .fold(f64::NEG_INFINITY, f64::max);
                    ep.rewards[t] + discount * best
                };
                let diff = q_i - y;
                // Average over agents as well, so the reported loss is
                // comparable across team sizes.
                loss += diff * diff * scale / n as f64;
                dq_per_slot[t] = 2.0 * diff * scale / n as f64;
            }

            let mut dh = nets[i].zero_hidden();
            for t in (0..t_len).rev() {
                let mut dq = vec![0.0; nets[i].dims.actions];
                dq[ep.actions[t][i]] = dq_per_slot[t];
                dh = qnet_backward(&nets[i], &caches[t], &dq, &dh, &mut grads[i]);
            }
        }
    }

    if !loss.is_finite() {
        return Err(Error::Training(format!("non-finite loss {loss}")));
    }
    Ok((loss, grads))
}

/// Training loop for the independent learners; mirrors the cooperative
/// loop step for step (same schedule, replay, sync cadence, optimizer).
pub fn train_marl(cfg: &SimConfig) -> Result<MarlTrainResult> {
    cfg.validate()?;
    let s = &cfg.scenario;
    let t = &cfg.training;
    let seed = s.rng_seed;
    let n = s.n_platoons;
    let dims = net_dims(cfg);

    let mut nets: Vec<QNetParams> = (0..n)
        .map(|i| QNetParams::init(dims, &mut rng::indexed_stream(seed, tag::WEIGHT_INIT, i as u64)))
        .collect();
    let mut targets = nets.clone();
    let mut opts: Vec<OptimState> =
        nets.iter().map(|p| OptimState::new(p.flat_len())).collect();
    let mut memory = ReplayMemory::new(t.replay_capacity);
    let schedule = EpsilonSchedule { delta: t.epsilon_delta, floor: t.epsilon_floor };

    let mut policy_rng = rng::stream(seed, tag::POLICY);
    let mut replay_rng = rng::stream(seed, tag::REPLAY);
    let mut log = Vec::with_capacity(t.episodes);
    let mut updates: usize = 0;

    for episode in 0..t.episodes as u64 {
        let started = std::time::Instant::now();
        let epsilon = schedule.value(episode);
        let episode_norm = episode as f64 / t.episodes as f64;

        let outcome = {
            let mut policy = PerAgentPolicy::new(&nets, epsilon, (epsilon, episode_norm));
            rollout::run_episode(s, t.tau, episode, epsilon, &mut policy, &mut policy_rng)?
        };
        let total_reward = outcome.record.total_reward();
        memory.push(outcome.record);

        let mut loss_val = None;
        if memory.len() >= t.batch_episodes {
            let (loss, grads) = {
                let batch = memory.sample(&mut replay_rng, t.batch_episodes);
                marl_loss(&batch, &nets, &targets, t.discount, t.episodes)?
            };
            for i in 0..n {
                let mut gflat = grads[i].flat();
                adam::clip_global_norm(&mut gflat, t.grad_clip_norm);
                let mut pflat = nets[i].flat();
                adam::optimizer_step(&mut opts[i], &mut pflat, &gflat, t.learning_rate);
                nets[i].set_flat(&pflat);
            }
            updates += 1;
            if updates % t.target_sync_updates == 0 {
                targets.clone_from(&nets);
            }
            loss_val = Some(loss);
        }

        let wall_ms = started.elapsed().as_millis() as u64;
        if episode % 200 == 0 {
            log::info!(
                "independent learners, episode {episode}: epsilon {epsilon:.3}, \
                 reward {total_reward:.1}, loss {loss_val:?}"
            );
        }
        log.push(TrainLogRow { episode, epsilon, total_reward, loss: loss_val, wall_ms });
    }

    Ok(MarlTrainResult { nets, log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vdn;

    #[test]
    fn random_policy_uniform_within_one_percent() {
        let mut rng = rng::stream(3, tag::POLICY);
        let mut counts = vec![0u64; 8];
        let draws = 1_000_000;
        for _ in 0..draws / 4 {
            for a in random_policy(4, 8, &mut rng) {
                counts[a] += 1;
            }
        }
        let expect = draws as f64 / 8.0;
        for (a, &c) in counts.iter().enumerate() {
            let rel = (c as f64 - expect).abs() / expect;
            assert!(rel < 0.01, "action {a}: deviation {rel}");
        }
    }

    #[test]
    fn random_policy_degenerate_and_deterministic() {
        let mut rng = rng::stream(1, tag::POLICY);
        for _ in 0..10 {
            assert_eq!(random_policy(3, 1, &mut rng), vec![0, 0, 0]);
        }
        let a: Vec<Vec<usize>> = {
            let mut r = rng::stream(9, tag::POLICY);
            (0..5).map(|_| random_policy(2, 8, &mut r)).collect()
        };
        let b: Vec<Vec<usize>> = {
            let mut r = rng::stream(9, tag::POLICY);
            (0..5).map(|_| random_policy(2, 8, &mut r)).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn fingerprint_components_in_unit_range_at_start() {
        let fp = FingerprintObs { base: vec![0.1], epsilon: 1.0, episode_norm: 0.0 };
        assert_eq!(fp.to_input(), vec![0.1, 1.0, 0.0]);
        assert_eq!(FingerprintObs::dim(4), 6);
    }

    #[test]
    fn single_agent_target_matches_team_target() {
        // With one agent the per-agent target and the summed team target
        // are the same number.
        let y_team = vdn::compute_target(2.0, false, &[7.0], 0.9);
        let y_solo = 2.0 + 0.9 * 7.0;
        assert_eq!(y_team, y_solo);
    }
}
