//! Data-parallel kernels with and without worker threads.
//!
//! With the default `parallel` feature each kernel runs on the global rayon
//! pool and on a one-thread pool. `--no-default-features` benchmarks the
//! plain sequential fallback under the label `sequential`.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use pgnn::graph::{constant_features, grid_graph};
use pgnn::metric::{all_pairs, bourgain_embed, measure_distortion, sample_anchor_family, Norm};
use pgnn::model::{init_rng, make_distance_input, pgnn_forward, PgnnConfig, PgnnParams};
use pgnn::train::epoch_loss;
use pgnn::Tape;

/// Runs `f` once per available execution mode, labelled by the mode.
fn modes(c: &mut Criterion, group: &str, input: &str, f: impl Fn() + Sync) {
    let mut g = c.benchmark_group(group);
    g.sample_size(10);
    #[cfg(feature = "parallel")]
    {
        g.bench_function(BenchmarkId::new("rayon", input), |b| b.iter(&f));
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        g.bench_function(BenchmarkId::new("1-thread", input), |b| b.iter(|| one.install(&f)));
    }
    #[cfg(not(feature = "parallel"))]
    g.bench_function(BenchmarkId::new("sequential", input), |b| b.iter(&f));
    g.finish();
}

fn distances(c: &mut Criterion) {
    let g = grid_graph(40, 40).unwrap();
    modes(c, "all_pairs", "grid_40x40", || {
        black_box(all_pairs(&g));
    });
}

fn distortion(c: &mut Criterion) {
    let g = grid_graph(20, 20).unwrap();
    let dm = all_pairs(&g);
    let fam = sample_anchor_family(g.n(), 1.0, 0).unwrap();
    let emb = bourgain_embed(&dm, &fam).unwrap();
    modes(c, "measure_distortion", "grid_20x20", || {
        black_box(measure_distortion(&dm, &emb, Norm::L1).unwrap());
    });
}

fn forward_backward(c: &mut Criterion) {
    let g = constant_features(&grid_graph(20, 20).unwrap());
    let cfg = PgnnConfig::default();
    let dm = make_distance_input(&g, cfg.variant);
    let fam = sample_anchor_family(g.n(), cfg.anchor_c, 0).unwrap();
    let params = PgnnParams::init(1, &cfg, &mut init_rng(0));
    let pos: Vec<(usize, usize)> = g.edges().take(200).collect();
    let neg: Vec<(usize, usize)> = (0..200).map(|i| (i, (i * 7 + 131) % g.n())).collect();
    modes(c, "pgnn_forward_backward", "grid_20x20", || {
        let mut tape = Tape::new();
        let vars = params.record(&mut tape);
        let z = pgnn_forward(&mut tape, &g, &dm, &fam, &vars, &cfg).unwrap().z;
        let loss = epoch_loss(&mut tape, z, &pos, &neg).unwrap();
        black_box(tape.backward(loss).unwrap());
    });
}

criterion_group!(benches, distances, distortion, forward_backward);
criterion_main!(benches);
