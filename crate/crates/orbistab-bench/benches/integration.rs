use criterion::{black_box, criterion_group, criterion_main, Criterion};
use std::f64::consts::PI;

use orbistab::orbits::orbit_distance;
use orbistab::{
    build_perturbed_field, find_periodic_orbit, integrate, monodromy_matrix, IntegratorConfig,
    Mode, Vec3, VectorField3,
};
use orbistab_bench::bench_spec;

fn integrators(c: &mut Criterion) {
    let rotation = VectorField3::new(|u: Vec3| Vec3::new(u.y, -u.x, 0.0));
    let u0 = Vec3::new(1.0, 0.0, 0.0);

    c.bench_function("dopri45_rotation_one_turn", |b| {
        let cfg = IntegratorConfig::adaptive(1e-10, 1e-12);
        b.iter(|| integrate(&rotation, black_box(u0), 2.0 * PI, &cfg).unwrap())
    });
    c.bench_function("rk4_rotation_one_turn", |b| {
        let cfg = IntegratorConfig::fixed(1e-3);
        b.iter(|| integrate(&rotation, black_box(u0), 2.0 * PI, &cfg).unwrap())
    });
}

fn orbit_pipeline(c: &mut Criterion) {
    let spec = bench_spec(Mode::PreserveCStabilize);
    let orbit = find_periodic_orbit(&spec.system, -1.0, 2.0, Vec3::new(1.0, 1.0, 1.0)).unwrap();
    let field = build_perturbed_field(&spec);

    c.bench_function("monodromy_one_period", |b| {
        let cfg = IntegratorConfig::adaptive(1e-11, 1e-13);
        b.iter(|| monodromy_matrix(&field, orbit.anchor(), orbit.period(), &cfg).unwrap())
    });
    c.bench_function("orbit_distance_query", |b| {
        let u = Vec3::new(1.2, 0.8, 1.1);
        b.iter(|| black_box(orbit_distance(&orbit, black_box(u))))
    });
}

criterion_group!(benches, integrators, orbit_pipeline);
criterion_main!(benches);
