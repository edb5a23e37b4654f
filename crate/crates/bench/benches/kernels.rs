use bosegas_core::checks::{nine_mode_setup, NINE_MODE_ALPHAS};
use bosegas_core::fock::{build_hamiltonian, energy_expectation, BasisGuard, OccupationState, VhatTable};
use bosegas_core::scattering::{solve_zero_energy, w_norms};
use bosegas_core::thermo::{chemical_potential, chemical_potential_quadrature};
use bosegas_core::RadialPotential;
use criterion::{black_box, criterion_group, criterion_main, Criterion};

fn scattering(c: &mut Criterion) {
    let pot = RadialPotential::square(2.0, 1.0).unwrap();
    c.bench_function("solve_zero_energy square", |b| b.iter(|| solve_zero_energy(black_box(&pot), 3.0, 1e-3).unwrap().a));
    let sol = solve_zero_energy(&pot, 3.0, 5e-4).unwrap();
    c.bench_function("w_norms square", |b| b.iter(|| w_norms(black_box(&sol)).unwrap()));
}

fn thermo(c: &mut Criterion) {
    c.bench_function("chemical_potential series", |b| b.iter(|| chemical_potential(black_box(1e-3), 1.0).unwrap()));
    c.bench_function("chemical_potential quadrature", |b| b.iter(|| chemical_potential_quadrature(black_box(1e-3), 1.0).unwrap()));
}

fn fock(c: &mut Criterion) {
    let pot = RadialPotential::square(2.0, 1.0).unwrap();
    let s = nine_mode_setup(&pot).unwrap();
    let vh = VhatTable::new(&s.lattice, &pot).unwrap();
    c.bench_function("build_hamiltonian nine modes N=4", |b| {
        b.iter(|| build_hamiltonian(&s.lattice, black_box(4), &vh, BasisGuard::default()).unwrap().dim())
    });
    let alpha = OccupationState::parse(&s.lattice, NINE_MODE_ALPHAS[3]).unwrap();
    c.bench_function("generate family", |b| b.iter(|| s.family(black_box(&alpha)).unwrap().len()));
    let psi = s.family(&alpha).unwrap().state();
    c.bench_function("energy_expectation family", |b| b.iter(|| energy_expectation(&s.lattice, &vh, black_box(&psi))));
}

criterion_group!(benches, scattering, thermo, fock);
criterion_main!(benches);
