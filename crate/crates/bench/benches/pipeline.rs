use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use qwm::ancilla::{flag_states, Coupling, GaussianWavepacket, Sign, SmearGrid, HBAR};
use qwm::chip::RB87_MASS;
use qwm::{
    pseudo_thermal_state, random_unitary, rf_unitary, simulate_run, smeared_density,
    tpm_distribution, ExperimentConfig, HamiltonianPair, Spectrum,
};

fn tpm(c: &mut Criterion) {
    let pair = HamiltonianPair::two_level(0.56).unwrap();
    let rho = pseudo_thermal_state(0.58, &pair.initial, None).unwrap();
    let u = rf_unitary(1.3, 0.0).unwrap();
    c.bench_function("tpm_distribution D=2", |b| {
        b.iter(|| tpm_distribution(black_box(&rho), &pair, &u).unwrap())
    });

    let e: Vec<f64> = (0..8).map(|k| k as f64).collect();
    let pair8 = HamiltonianPair::new(
        Spectrum::diagonal(&e).unwrap(),
        Spectrum::diagonal(&e.iter().map(|x| 0.7 * x + 0.1).collect::<Vec<_>>()).unwrap(),
    )
    .unwrap();
    let rho8 = pseudo_thermal_state(1.0, &pair8.initial, None).unwrap();
    let u8 = random_unitary(8, 1).unwrap();
    c.bench_function("tpm_distribution D=8", |b| {
        b.iter(|| tpm_distribution(black_box(&rho8), &pair8, &u8).unwrap())
    });
}

fn smear(c: &mut Criterion) {
    let pair = HamiltonianPair::two_level(0.56).unwrap();
    let rho = pseudo_thermal_state(0.58, &pair.initial, Some(0.0)).unwrap();
    let u = rf_unitary(1.3, 0.0).unwrap();
    let dist = tpm_distribution(&rho, &pair, &u).unwrap();
    let sigma = 1e-6;
    let packet = GaussianWavepacket::new(0.0, 0.0, sigma, RB87_MASS).unwrap();
    let lambda = 20.0 * HBAR / sigma;
    let flags = flag_states(
        &dist,
        &packet,
        Coupling::new(lambda, Sign::Positive).unwrap(),
    );
    let grid = SmearGrid::default();
    c.bench_function("smeared_density with coherences", |b| {
        b.iter(|| smeared_density(black_box(&flags), true, &rho, &pair, &u, grid).unwrap())
    });
}

fn simulate(c: &mut Criterion) {
    let cfg = ExperimentConfig {
        atom_count: 100_000,
        ..Default::default()
    };
    let mut group = c.benchmark_group("simulate_run");
    group.sample_size(20);
    group.bench_function("N=1e5", |b| {
        b.iter(|| simulate_run(black_box(&cfg)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, tpm, smear, simulate);
criterion_main!(benches);
