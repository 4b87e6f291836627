use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use hwsim_bench::coffee;
use hwsim_core::observation::observe;
use hwsim_core::rules::execute_in_place;
use hwsim_core::runtime::{run_episode, HeuristicPlanner, RunConfig, ScriptedPlanner};

pub fn criterion_benchmark(c: &mut Criterion) {
    let ep = coffee();
    let chain: Vec<_> = ep.gt_chains.iter().flatten().cloned().collect();

    c.bench_function("execute GT chain", |b| {
        b.iter(|| {
            let mut g = ep.init.clone();
            for a in &chain {
                black_box(execute_in_place(&mut g, &ep.rules, a));
            }
            g
        })
    });

    let end = ep.gt_post.last().unwrap().clone();
    let area = end.agent().current_area.clone();
    c.bench_function("observe", |b| {
        b.iter(|| observe(&ep.init, black_box(&end), &area, "img").unwrap())
    });

    let cfg = RunConfig::default();
    c.bench_function("episode ground truth", |b| {
        b.iter(|| run_episode(&ep, &mut ScriptedPlanner::ground_truth(&ep), &cfg))
    });
    c.bench_function("episode heuristic", |b| {
        b.iter(|| run_episode(&ep, &mut HeuristicPlanner::default(), &cfg))
    });
}

criterion_group!(benches, criterion_benchmark);
criterion_main!(benches);
