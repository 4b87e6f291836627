use criterion::{criterion_group, criterion_main, Criterion};
use hwsim_bench::replay_corpus;

fn replay_records(c: &mut Criterion) {
    let corpus = replay_corpus(10_000);
    c.bench_function("replay 10k records", |b| {
        b.iter(|| {
            for (pre, r) in &corpus {
                let post = r.apply(pre).unwrap();
                assert_eq!(post.snapshot_hash(), r.post_state_ref);
            }
        })
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = replay_records
}
criterion_main!(benches);
