//! Data-parallel (rayon) against sequential execution for the three batch
//! workloads: the grid sweep, head scoring and simulated rollbacks.
//!
//! Build with `--no-default-features` to see both arms fall back to a single
//! thread.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sentinel_core::eval::{grid_sweep, SweepEpisode, SweepSpec};
use sentinel_core::heads::{score_heads, SelectionConfig};
use sentinel_core::labeler::{label_episode, LabelerConfig};
use sentinel_core::recovery::{generate_scenario, run_batch, RollbackConfig, Scenario, WorldGenConfig};
use sentinel_core::synth::{gen_dataset, SynthSpec};
use sentinel_core::{EpisodeTrace, Exec};

const ARMS: [(&str, Exec); 2] = [("parallel", Exec::Parallel), ("sequential", Exec::Sequential)];

fn corpus() -> Vec<(EpisodeTrace, sentinel_core::labeler::LabeledEpisode)> {
    let spec = SynthSpec { episodes: 120, ..SynthSpec::default() };
    let data = gen_dataset(&spec, Exec::default()).expect("dataset");
    data.train
        .into_iter()
        .chain(data.val)
        .map(|e| {
            let l = label_episode(&e.trace, &LabelerConfig::default()).expect("labels");
            (e.trace, l)
        })
        .collect()
}

fn sweep(c: &mut Criterion) {
    let corpus = corpus();
    let ranked: Vec<_> = corpus[0].0.stored_heads[..10].to_vec();
    let episodes: Vec<SweepEpisode> =
        corpus.iter().map(|(t, l)| SweepEpisode::from_trace(t, l, &ranked).expect("episode")).collect();
    let spec = SweepSpec::full_grid(0.10);
    let mut g = c.benchmark_group("grid_sweep_9000");
    g.sample_size(10);
    for (name, exec) in ARMS {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| grid_sweep(&episodes, &spec, exec).expect("sweep")));
    }
    g.finish();
}

fn scoring(c: &mut Criterion) {
    let corpus = corpus();
    let cfg = SelectionConfig::default();
    let mut g = c.benchmark_group("score_heads_64");
    g.sample_size(10);
    for (name, exec) in ARMS {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| score_heads(&corpus, &cfg, exec).expect("scores")));
    }
    g.finish();
}

fn rollouts(c: &mut Criterion) {
    let scenarios: Vec<Scenario> = (0..16).map(|i| generate_scenario(2024, i, &WorldGenConfig::default())).collect();
    let cfg = RollbackConfig::default();
    let mut g = c.benchmark_group("rollbacks_16");
    g.sample_size(10);
    for (name, exec) in ARMS {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| run_batch(&scenarios, &cfg, exec).expect("rollouts")));
    }
    g.finish();
}

criterion_group!(benches, sweep, scoring, rollouts);
criterion_main!(benches);
