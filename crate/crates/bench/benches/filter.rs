use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use cvtrack::{
    predict, update, DMatrix, DVector, GaussianState, ModelMatrices, NoiseParams, Parameterization,
};

fn bench_predict_update(c: &mut Criterion) {
    let noise = NoiseParams::default();
    let mut group = c.benchmark_group("predict_update");
    for param in Parameterization::ALL {
        let m = ModelMatrices::build(param, &noise).unwrap();
        let n = param.state_dim();
        let state =
            GaussianState::new(DVector::from_element(n, 10.0), DMatrix::identity(n, n)).unwrap();
        let z = DVector::from_column_slice(&[11.0, 9.0, 10.5, 10.0]);
        group.bench_with_input(BenchmarkId::from_parameter(param), &param, |b, _| {
            b.iter(|| {
                let predicted = predict(&state, &m.f, &m.q).unwrap();
                update(&predicted, &z, &m.h, &m.r).unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_predict_update);
criterion_main!(benches);
