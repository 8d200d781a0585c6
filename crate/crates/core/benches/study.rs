use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use copdiv::montecarlo::{run_study_with, Execution};
use copdiv::{fit, pseudo_observations, Copula, CriterionContext, Divergence, OptimizerSettings, RankScaling};
use copdiv::{StudyConfig, StudyMode, TiePolicy};

fn study_execution(c: &mut Criterion) {
    let mut group = c.benchmark_group("study");
    group.sample_size(10);
    for (mode, theta) in [(StudyMode::Null, 0.0), (StudyMode::Alternative, 2.0)] {
        let config = StudyConfig::new(mode, Copula::Clayton, Divergence::KlM, theta, 200, 64, 7);
        for (label, execution) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
            group.bench_with_input(BenchmarkId::new(label, format!("{mode:?}")), &config, |b, cfg| {
                b.iter(|| run_study_with(black_box(cfg), execution).unwrap())
            });
        }
    }
    group.finish();
}

fn single_fit(c: &mut Criterion) {
    let data = Copula::Frank.sample(3.0, 500, 1).unwrap();
    let sample = pseudo_observations(&data, RankScaling::NPlusOne, TiePolicy::Midrank).unwrap();
    let settings = OptimizerSettings::default();
    let mut group = c.benchmark_group("fit");
    for phi in [Divergence::KlM, Divergence::Hellinger] {
        group.bench_function(phi.name(), |b| {
            b.iter(|| {
                // a fresh context so the constant-term cache starts empty
                let ctx = CriterionContext::with_defaults(Copula::Frank, phi);
                fit(&ctx, black_box(&sample), &settings).unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, study_execution, single_fit);
criterion_main!(benches);
