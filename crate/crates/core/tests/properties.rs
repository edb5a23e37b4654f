use bosegas_core::bridge::{box_rescale, isometry_check, BridgeProfile, Periodic1d, TrigPoly};
use bosegas_core::checks::{nine_mode_setup, NINE_MODE_ALPHAS};
use bosegas_core::fock::{build_hamiltonian, BasisGuard, Ladder, MomentumLattice, OccupationState, StateVector, VhatTable};
use bosegas_core::gibbs::{build_gamma0, Gamma0Options, TruncatedModeEnsemble};
use bosegas_core::potential::mollified_majorant;
use bosegas_core::scattering::solve_zero_energy;
use bosegas_core::thermo::{chemical_potential, critical_density, delta_f_leading, free_energy_series};
use bosegas_core::RadialPotential;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn potential() -> impl Strategy<Value = RadialPotential> {
    prop_oneof![
        (0.1f64..5.0, 0.3f64..1.0).prop_map(|(v, r)| RadialPotential::square(v, r).unwrap()),
        (0.1f64..5.0, 0.3f64..1.0).prop_map(|(v, r)| RadialPotential::ramp(v, r).unwrap()),
        prop::collection::vec(0.0f64..3.0, 2..6).prop_map(|vs| {
            let n = vs.len();
            let mut t: Vec<(f64, f64)> = vs.iter().enumerate().map(|(i, &v)| (i as f64 / n as f64, v)).collect();
            t.push((1.0, 0.0));
            RadialPotential::table(&t).unwrap()
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fourier_hat_at_zero_is_integral(pot in potential()) {
        let v0 = pot.fourier_hat(0.0).unwrap();
        prop_assert!((v0 - pot.integral()).abs() <= 1e-10 * pot.integral().abs().max(1e-300));
    }

    #[test]
    fn scattering_length_grows_with_barrier(v in 0.1f64..5.0, dv in 0.01f64..2.0, r0 in 0.3f64..1.5) {
        let a = |v0: f64| solve_zero_energy(&RadialPotential::square(v0, r0).unwrap(), 3.0 * r0, r0 / 1000.0).unwrap().a;
        prop_assert!(a(v + dv) > a(v));
    }

    #[test]
    fn step_halving_moves_a_little(pot in potential()) {
        let r0 = pot.range();
        let coarse = solve_zero_energy(&pot, 3.0 * r0, r0 / 1000.0).unwrap().a;
        let fine = solve_zero_energy(&pot, 3.0 * r0, r0 / 2000.0).unwrap().a;
        prop_assert!((coarse - fine).abs() <= 1e-9 * fine.abs());
    }

    #[test]
    fn exterior_is_affine_with_unit_slope(pot in potential(), x in 0.01f64..2.0) {
        let sol = solve_zero_energy(&pot, 4.0, pot.range() / 1000.0).unwrap();
        let r = pot.range() * (1.0 + x);
        let h = 1e-4;
        let slope = (sol.u_at(r + h).0 - sol.u_at(r - h).0) / (2.0 * h);
        prop_assert!((slope - 1.0).abs() < 1e-9);
        prop_assert!((sol.w(r) - sol.a / r).abs() < 1e-12);
    }

    #[test]
    fn chemical_potential_monotone_nonpositive(beta in 0.1f64..20.0, x in -6.0f64..1.0, y in -6.0f64..1.0) {
        let (lo, hi) = if x < y { (x, y) } else { (y, x) };
        let (r1, r2) = (10f64.powf(lo), 10f64.powf(hi));
        let (m1, m2) = (chemical_potential(r1, beta).unwrap(), chemical_potential(r2, beta).unwrap());
        prop_assert!(m1 <= 0.0 && m2 <= 0.0);
        prop_assert!(m1 <= m2);
    }

    #[test]
    fn f0_nonincreasing_convex_and_flat_above_critical(beta in 0.1f64..20.0, u in 0.05f64..0.9, d in 0.01f64..0.05) {
        let rc = critical_density(beta).unwrap();
        let f = |r: f64| free_energy_series(r, beta).unwrap();
        let (a, b, c) = (rc * u, rc * (u + d), rc * (u + 2.0 * d));
        prop_assert!(f(b) <= f(a) && f(c) <= f(b));
        prop_assert!(f(a) + f(c) - 2.0 * f(b) >= -1e-12 * f(b).abs());
        let flat = f(rc * 1.5);
        prop_assert!((f(rc * 3.0) - flat).abs() <= 1e-14 * flat.abs());
    }

    #[test]
    fn delta_f_continuous_at_critical(a in 0.01f64..2.0, rho in 1e-6f64..1e-1, k in 8i32..14) {
        let eps = 10f64.powi(-k);
        let lo = delta_f_leading(a, rho, rho * (1.0 + eps));
        let hi = delta_f_leading(a, rho, rho * (1.0 - eps));
        prop_assert!((lo - hi).abs() <= 1e-12 * lo);
    }

    #[test]
    fn number_operator_is_exact(counts in prop::collection::vec(0u16..6, 9), mode in 0usize..9) {
        let occ = OccupationState::from_counts(counts.clone());
        let n = StateVector::basis(occ).expectation(&[Ladder::Create(mode), Ladder::Annihilate(mode)]);
        prop_assert_eq!(n.re, counts[mode] as f64);
        prop_assert_eq!(n.im, 0.0);
    }

    #[test]
    fn isometry_for_trig_polynomials(seed in 0u64..1000, l in 0.5f64..3.0, frac in 0.05f64..0.5, deg in 0i32..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = BridgeProfile::new(l, frac * l).unwrap();
        let fs = [TrigPoly::random(l, deg, &mut rng), TrigPoly::random(l, deg, &mut rng), TrigPoly::random(l, deg, &mut rng)];
        let f: [&dyn Periodic1d; 3] = [&fs[0], &fs[1], &fs[2]];
        prop_assert!(isometry_check(&p, f).unwrap().defect < 1e-10);
    }

    #[test]
    fn particle_number_survives_rescaling(l in 1.0f64..1e3, e in -8.0f64..-1.0) {
        prop_assert!(box_rescale(l, 10f64.powf(e)).unwrap().defect <= 1e-14);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn majorant_dominates(pot in potential(), n in 1u32..3, m in 4u32..7) {
        let maj = mollified_majorant(&pot, n, m).unwrap();
        for i in 0..=2000 {
            let r = i as f64 * 1e-3;
            prop_assert!(maj.potential.value(r) >= pot.value(r) - 1e-12, "r = {}", r);
        }
    }

    #[test]
    fn families_normalized_and_real(v in 0.2f64..4.0, r0 in 0.4f64..1.0, pick in 0usize..7) {
        let s = nine_mode_setup(&RadialPotential::square(v, r0).unwrap()).unwrap();
        let f = s.family(&OccupationState::parse(&s.lattice, NINE_MODE_ALPHAS[pick]).unwrap()).unwrap();
        prop_assert!((f.norm_sqr() - 1.0).abs() < 1e-12);
        prop_assert!(f.imaginary_defect() < 1e-15);
    }

    #[test]
    fn hamiltonian_conserves_momentum(v in 0.1f64..4.0, n in 1u32..4) {
        let lat = MomentumLattice::from_modes(2.0 * PI, vec![[0, 0, 0], [1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0]]).unwrap();
        let vh = VhatTable::new(&lat, &RadialPotential::square(v, 1.0).unwrap()).unwrap();
        let h = build_hamiltonian(&lat, n, &vh, BasisGuard::default()).unwrap();
        prop_assert_eq!(h.momentum_block_defect(&lat), 0.0);
        prop_assert!(h.basis.iter().all(|b| b.total() == n));
        prop_assert!(h.hermiticity_defect() < 1e-14);
    }

    #[test]
    fn gamma0_seeded_and_normalized(seed in 0u64..1_000_000, beta in 0.2f64..2.0) {
        let lat = MomentumLattice::cube(2.0 * PI, 1).unwrap();
        let ov = bosegas_core::excitation::ShellOverrides {
            radii: Some(bosegas_core::excitation::ShellRadii { l_min: 1.2, l_max: 1.5, h_min: 1.6, h_max: 2.0 }),
            m_c: Some(4),
            eta: None,
        };
        let sh = bosegas_core::excitation::build_shells(&lat, 0.01, ov).unwrap();
        let ens = TruncatedModeEnsemble::new(&lat, &sh, beta, -0.3).unwrap();
        let opts = Gamma0Options { target: 3.0, seed, samples: 5_000, exact_modes: 2, ..Default::default() };
        let a = build_gamma0(&ens, 200, &lat, &sh, opts).unwrap();
        let b = build_gamma0(&ens, 200, &lat, &sh, opts).unwrap();
        prop_assert!((a.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert_eq!(a.weights, b.weights);
        prop_assert_eq!(a.alphas, b.alphas);
    }
}
