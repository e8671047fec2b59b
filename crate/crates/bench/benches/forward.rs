use criterion::{black_box, criterion_group, criterion_main, Criterion};

use ringload::bayes::ForwardModel;
use ringload::response::BaselineSet;
use ringload::{build_mesh, solve, RingSolver};
use ringload_bench::{reference_model, sample_field};

fn forward_benches(c: &mut Criterion) {
    let model = reference_model(100);
    let mesh = build_mesh(&model).unwrap();
    let field = sample_field();

    c.bench_function("solve_cold_100_elements", |b| {
        b.iter(|| solve(black_box(&model), black_box(&mesh), black_box(&field)).unwrap())
    });

    let solver = RingSolver::new(&model, &mesh).unwrap();
    c.bench_function("solve_factorized_100_elements", |b| {
        b.iter(|| solver.solve_field(black_box(&field)).unwrap())
    });

    let baselines = BaselineSet::full(&mesh);
    let direct = ForwardModel::Direct {
        model: model.clone(),
        mesh: mesh.clone(),
        baselines,
        force_angle_deg: Some(0.0),
    };
    let linear = ForwardModel::Linear(direct.linearize(22).unwrap());
    let q: Vec<f64> = sample_field().knots().to_vec();
    c.bench_function("linearized_predict_22_knots", |b| {
        b.iter(|| linear.predict(black_box(&q)).unwrap())
    });
}

criterion_group!(benches, forward_benches);
criterion_main!(benches);
