//! Learner benchmarks: one recurrent forward step, and a full loss +
//! gradient evaluation over a replay batch at desk scale.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use platoon_core::presets;
use platoon_core::rng::{self, tag};
use platoon_core::rollout::{self, RandomPolicy};
use platoon_core::vdn::{self, LossCtx};
use platoon_core::{EpisodeRecord, QNetParams};

fn desk_net_and_batch(episodes: usize) -> (QNetParams, Vec<EpisodeRecord>) {
    let cfg = presets::desk();
    let params = QNetParams::init(vdn::net_dims(&cfg), &mut rng::stream(3, tag::WEIGHT_INIT));
    let mut policy = RandomPolicy { n_actions: cfg.scenario.n_actions() };
    let mut prng = rng::stream(3, tag::POLICY);
    let batch: Vec<EpisodeRecord> = (0..episodes)
        .map(|e| {
            rollout::run_episode(&cfg.scenario, cfg.training.tau, e as u64, 1.0, &mut policy, &mut prng)
                .unwrap()
                .record
        })
        .collect();
    (params, batch)
}

fn bench_forward_step(c: &mut Criterion) {
    let (params, batch) = desk_net_and_batch(1);
    let n = 4;
    let x = vdn::assemble_input(&batch[0].observations[0][0], None, params.dims.actions, 0, n);
    let h = params.zero_hidden();
    c.bench_function("qnet_forward_step", |b| {
        b.iter(|| platoon_core::nn::qnet_forward(black_box(&params), black_box(&x), black_box(&h)))
    });
}

fn bench_loss_and_gradient(c: &mut Criterion) {
    let (params, batch) = desk_net_and_batch(4);
    let target = params.clone();
    let ctx = LossCtx {
        n_agents: 4,
        discount: 0.99,
        target_mode: platoon_core::TargetMode::Standard,
    };
    let refs: Vec<&EpisodeRecord> = batch.iter().collect();
    c.bench_function("vdn_loss_4_episodes", |b| {
        b.iter(|| {
            vdn::vdn_loss(black_box(&refs), black_box(&params), black_box(&target), &ctx).unwrap()
        })
    });
}

criterion_group!(benches, bench_forward_step, bench_loss_and_gradient);
criterion_main!(benches);
