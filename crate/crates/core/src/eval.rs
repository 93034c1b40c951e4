//! Greedy evaluation of frozen policies: delivery probability over payload
//! sweeps, reward summaries, and per-slot rate traces.
//!
//! Environment randomness depends only on (seed, episode index), never on
//! the policy, so different algorithms evaluated with the same seed face the
//! same sequence of channel realizations — every comparison is paired.

use serde::Serialize;

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::nn::QNetParams;
use crate::rng::{self, tag};
use crate::rollout::{self, PerAgentPolicy, RandomPolicy, SharedNetPolicy, SlotPolicy};

/// A frozen policy under evaluation.
pub enum EvalPolicy<'a> {
    Random,
    /// Shared-net learner.
    Vdn(&'a QNetParams),
    /// Independent per-agent learners; evaluated with the end-of-training
    /// fingerprint (epsilon 0, episode fraction 1).
    Marl(&'a [QNetParams]),
}

impl EvalPolicy<'_> {
    fn instantiate(&self, scenario: &ScenarioConfig) -> Box<dyn SlotPolicy + '_> {
        match self {
            EvalPolicy::Random => Box::new(RandomPolicy { n_actions: scenario.n_actions() }),
            EvalPolicy::Vdn(net) => {
                Box::new(SharedNetPolicy::new(net, scenario.n_platoons, 0.0))
            }
            EvalPolicy::Marl(nets) => Box::new(PerAgentPolicy::new(nets, 0.0, (0.0, 1.0))),
        }
    }
}

/// One row of a per-slot rate trace.
#[derive(Clone, Debug, Serialize)]
pub struct TraceRow {
    pub slot: usize,
    /// Realized effective rate per platoon (bit/s/Hz).
    pub rates: Vec<f64>,
    pub total_rate: f64,
}

/// Aggregate results of evaluating one payload size.
#[derive(Clone, Debug)]
pub struct EvalPointResult {
    pub payload_multiple: u64,
    pub payload_bytes: u64,
    /// Fraction of (episode, platoon) pairs with full delivery in time.
    pub delivery_probability: f64,
    /// Stricter variant: fraction of episodes where every platoon delivered.
    pub all_delivered_probability: f64,
    pub mean_episode_reward: f64,
    /// Mean slot count to full team delivery, over the episodes that got
    /// there; None when none did.
    pub mean_completion_slot: Option<f64>,
    /// Which episode the rate trace below was taken from.
    pub trace_episode: u64,
    /// Per-slot rates of the designated episode, zero-padded to the full
    /// period (platoons stay silent after the payload completes).
    pub trace: Vec<TraceRow>,
    /// Raw per-episode per-platoon completion flags.
    pub delivered: Vec<Vec<bool>>,
}

/// Fraction of (episode, platoon) pairs that delivered in full.
pub fn delivery_probability(delivered: &[Vec<bool>]) -> Result<f64> {
    if delivered.is_empty() || delivered.iter().any(|e| e.is_empty()) {
        return Err(Error::Domain("delivery probability of an empty outcome set".into()));
    }
    let total: usize = delivered.iter().map(|e| e.len()).sum();
    let hits: usize = delivered.iter().flatten().filter(|&&d| d).count();
    Ok(hits as f64 / total as f64)
}

/// Fraction of episodes in which every platoon delivered.
pub fn all_delivered_probability(delivered: &[Vec<bool>]) -> Result<f64> {
    if delivered.is_empty() {
        return Err(Error::Domain("delivery probability of an empty outcome set".into()));
    }
    let hits = delivered.iter().filter(|e| e.iter().all(|&d| d)).count();
    Ok(hits as f64 / delivered.len() as f64)
}

/// Greedy rollouts at one payload size. `scenario.payload_bytes` must
/// already be set to the size under test; `scenario.rng_seed` is the eval
/// seed. `trace_episode` designates which episode's rates are kept.
pub fn evaluate_point(
    scenario: &ScenarioConfig,
    tau: f64,
    policy: &EvalPolicy<'_>,
    episodes: u64,
    trace_episode: u64,
) -> Result<EvalPointResult> {
    if episodes == 0 {
        return Err(Error::Usage("evaluation needs at least one episode".into()));
    }
    if trace_episode >= episodes {
        return Err(Error::Usage(format!(
            "trace episode {trace_episode} out of range (0..{episodes})"
        )));
    }
    scenario.validate()?;

    let mut slot_policy = policy.instantiate(scenario);
    let mut policy_rng = rng::stream(scenario.rng_seed, tag::POLICY);

    let n = scenario.n_platoons;
    let mut delivered: Vec<Vec<bool>> = Vec::with_capacity(episodes as usize);
    let mut reward_sum = 0.0;
    let mut completion_sum = 0.0;
    let mut completion_count = 0u64;
    let mut trace: Vec<TraceRow> = Vec::new();

    for episode in 0..episodes {
        let outcome = rollout::run_episode(
            scenario,
            tau,
            episode,
            0.0,
            slot_policy.as_mut(),
            &mut policy_rng,
        )?;
        delivered.push(outcome.delivered_flags());
        reward_sum += outcome.record.total_reward();
        if let Some(slot) = outcome.completion_slot {
            completion_sum += slot as f64;
            completion_count += 1;
        }
        if episode == trace_episode {
            trace = pad_trace(&outcome.rates_per_slot, scenario.t_slots(), n);
        }
    }

    Ok(EvalPointResult {
        payload_multiple: scenario.payload_bytes / scenario.payload_unit_bytes,
        payload_bytes: scenario.payload_bytes,
        delivery_probability: delivery_probability(&delivered)?,
        all_delivered_probability: all_delivered_probability(&delivered)?,
        mean_episode_reward: reward_sum / episodes as f64,
        mean_completion_slot: (completion_count > 0)
            .then(|| completion_sum / completion_count as f64),
        trace_episode,
        trace,
        delivered,
    })
}

/// Zero-pad an episode's per-slot rates to the full period: once the
/// episode ends, nobody transmits for the rest of it.
fn pad_trace(rates_per_slot: &[Vec<f64>], t_slots: usize, n_platoons: usize) -> Vec<TraceRow> {
    (0..t_slots)
        .map(|slot| {
            let rates = rates_per_slot
                .get(slot)
                .cloned()
                .unwrap_or_else(|| vec![0.0; n_platoons]);
            let total_rate = rates.iter().sum();
            TraceRow { slot, rates, total_rate }
        })
        .collect()
}

/// Evaluate a list of payload multiples (of `payload_unit_bytes`).
///
/// Multiple 0 is answered without simulation: with nothing to send,
/// delivery is trivially certain and the air stays silent.
pub fn evaluate_sweep(
    base: &ScenarioConfig,
    tau: f64,
    policy: &EvalPolicy<'_>,
    multiples: &[u64],
    episodes: u64,
    trace_episode: u64,
) -> Result<Vec<EvalPointResult>> {
    let mut rows = Vec::with_capacity(multiples.len());
    for &m in multiples {
        if m == 0 {
            rows.push(EvalPointResult {
                payload_multiple: 0,
                payload_bytes: 0,
                delivery_probability: 1.0,
                all_delivered_probability: 1.0,
                mean_episode_reward: 0.0,
                mean_completion_slot: Some(0.0),
                trace_episode,
                trace: pad_trace(&[], base.t_slots(), base.n_platoons),
                delivered: vec![vec![true; base.n_platoons]; episodes as usize],
            });
            continue;
        }
        let mut scenario = base.clone();
        scenario.payload_bytes = m * base.payload_unit_bytes;
        rows.push(evaluate_point(&scenario, tau, policy, episodes, trace_episode)?);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn delivery_probability_counts_pairs() {
        let all = vec![vec![true, true], vec![true, true]];
        assert_eq!(delivery_probability(&all).unwrap(), 1.0);

        let three_of_four = vec![vec![true, true, true, false]; 5];
        assert_eq!(delivery_probability(&three_of_four).unwrap(), 0.75);

        let mixed = vec![vec![true, false], vec![false, false], vec![true, true]];
        assert_eq!(delivery_probability(&mixed).unwrap(), 3.0 / 6.0);
        assert_eq!(all_delivered_probability(&mixed).unwrap(), 1.0 / 3.0);

        assert!(delivery_probability(&[]).is_err());
        assert!(all_delivered_probability(&[]).is_err());
    }

    #[test]
    fn zero_payload_point_is_certain_and_silent() {
        let scenario = presets::smoke().scenario;
        let rows =
            evaluate_sweep(&scenario, 0.5, &EvalPolicy::Random, &[0], 3, 0).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].delivery_probability, 1.0);
        assert_eq!(rows[0].trace.len(), scenario.t_slots());
        assert!(rows[0].trace.iter().all(|r| r.total_rate == 0.0));
    }

    #[test]
    fn infeasible_payload_delivers_nothing() {
        let mut scenario = presets::smoke().scenario;
        scenario.payload_bytes = 100 * 1200;
        let point =
            evaluate_point(&scenario, 0.5, &EvalPolicy::Random, 5, 0).unwrap();
        assert_eq!(point.delivery_probability, 0.0);
        assert_eq!(point.mean_completion_slot, None);
        // Every slot of the period was used and the trace is full length.
        assert_eq!(point.trace.len(), scenario.t_slots());
    }

    #[test]
    fn paired_evaluation_is_deterministic() {
        let scenario = presets::smoke().scenario;
        let a = evaluate_point(&scenario, 0.5, &EvalPolicy::Random, 4, 1).unwrap();
        let b = evaluate_point(&scenario, 0.5, &EvalPolicy::Random, 4, 1).unwrap();
        assert_eq!(a.delivered, b.delivered);
        assert_eq!(a.mean_episode_reward, b.mean_episode_reward);
    }
}
