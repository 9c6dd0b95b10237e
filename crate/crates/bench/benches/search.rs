use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kbqa_bench::ToyWorkload;
use kbqa_core::synth::random_tree;
use kbqa_core::{Method, SearchConfig, Strategy};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn toy_search(c: &mut Criterion) {
    let toy = ToyWorkload::new(11);
    let config = SearchConfig { early_stop_k: 2, ..SearchConfig::default() };
    let question = toy.fixture.dataset[1].question.clone();
    let mut group = c.benchmark_group("toy question");
    for method in [Method::Mcts, Method::Bfs, Method::Dfs] {
        group.bench_function(format!("{method:?}"), |b| b.iter(|| method.run(toy.ctx(&config), &question).stats.node_count));
    }
    group.finish();
}

fn selection(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for size in [100, 2_000] {
        let tree = random_tree(&mut rng, size);
        c.bench_with_input(BenchmarkId::new("select", size), &tree, |b, t| {
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            b.iter(|| t.select(Strategy::Mcts, 12, &mut rng))
        });
    }
}

criterion_group!(benches, toy_search, selection);
criterion_main!(benches);
