use std::f64::consts::PI;

use pauli_core::evolution::{self, charge, energy};
use pauli_core::field_solver::{self, a_equation_residual, solve_a};
use pauli_core::magnetic::magnetic_laplacian;
use pauli_core::spectral::{divergence, leray_project};
use pauli_core::spinor::{inner_product, spin_density_imag_defect};
use pauli_core::{ASolveOptions, Coupling, FieldSampler, GaugeKind, Grid, SimState, StepOptions};
use proptest::prelude::*;

fn grid(n: usize) -> Grid {
    Grid::new(n, 2.0 * PI).unwrap()
}

// Without the 2/3 truncation only the integrator error remains.
fn untruncated() -> StepOptions {
    StepOptions { dealias: false, ..StepOptions::default() }
}

fn config() -> ProptestConfig {
    ProptestConfig { cases: 16, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn leray_projection_is_idempotent_and_solenoidal(seed in any::<u64>(), amp in 0.1f64..5.0) {
        let g = grid(8);
        let v = FieldSampler::new(&g, seed).vector_full_band(amp);
        let p = leray_project(&v);
        prop_assert!(divergence(&p).l2_norm() <= 1e-12 * amp);
        prop_assert!(leray_project(&p).sub(&p).unwrap().l2_norm() <= 1e-13 * amp);
        prop_assert!(p.l2_norm() <= v.l2_norm() * (1.0 + 1e-14));
    }

    #[test]
    fn magnetic_laplacian_is_nonpositive(seed in any::<u64>()) {
        let g = grid(8);
        let mut s = FieldSampler::new(&g, seed);
        let u = s.spinor_band_limited(1.0);
        let a = s.vector_band_limited(0.5);
        let q = inner_product(&u, &magnetic_laplacian(&u, &a).unwrap()).unwrap();
        let scale = u.l2_norm_sq() * (1.0 + a.l2_norm()).powi(2) * 16.0;
        prop_assert!(q.im.abs() <= 1e-12 * scale);
        prop_assert!(q.re <= 1e-12 * scale);
    }

    #[test]
    fn spin_density_is_real(seed in any::<u64>()) {
        let g = grid(8);
        let u = FieldSampler::new(&g, seed).spinor_full_band(2.0);
        prop_assert!(spin_density_imag_defect(&u) <= 1e-14 * u.l2_norm_sq().max(1.0));
    }

    #[test]
    fn semigroup_is_unitary_or_contractive(seed in any::<u64>(), eps in 0.0f64..0.5, tau in 0.0f64..0.1) {
        let g = grid(8);
        let u = FieldSampler::new(&g, seed).spinor_band_limited(1.0);
        let out = evolution::semigroup(&u, eps, tau);
        if eps == 0.0 {
            prop_assert!((out.l2_norm() - u.l2_norm()).abs() <= 1e-13 * u.l2_norm());
        } else {
            prop_assert!(out.l2_norm() <= u.l2_norm() * (1.0 + 1e-14));
        }
    }

    #[test]
    fn solved_potential_satisfies_its_equation(seed in any::<u64>(), darwin in any::<bool>()) {
        let g = grid(8);
        let gauge = if darwin { GaugeKind::Darwin } else { GaugeKind::Poisswell };
        let u = FieldSampler::new(&g, seed).spinor_in_band(2, 0.1);
        let sol = solve_a(&u, gauge, &ASolveOptions::default(), None).unwrap();
        prop_assert!(sol.residual <= 1e-10);
        prop_assert!(a_equation_residual(&u, &sol.field, gauge).unwrap() <= 1e-9);
        if darwin {
            prop_assert!(divergence(&sol.field).l2_norm() <= 1e-12);
        }
        prop_assert!(field_solver::solve_v(&u).mean().abs() <= 1e-14);
    }
}

#[test]
fn short_evolution_conserves_charge_and_energy() {
    let g = grid(12);
    let u = FieldSampler::new(&g, 7).spinor_in_band(2, 0.1);
    for gauge in [GaugeKind::Darwin, GaugeKind::Poisswell] {
        let s0 = SimState::new(u.clone(), gauge, 0.0, Coupling::Full, &ASolveOptions::default()).unwrap();
        let (q0, e0) = (charge(&s0), energy(&s0));
        let mut s = s0;
        for _ in 0..20 {
            s = evolution::step(&s, 0.005, &untruncated()).unwrap();
        }
        assert!((charge(&s) - q0).abs() <= 1e-9 * q0, "{gauge:?}");
        assert!((energy(&s) - e0).abs() <= 1e-7 * e0.abs().max(1.0), "{gauge:?}");
    }
}

#[test]
fn regularized_flow_lowers_energy_and_keeps_charge() {
    let g = grid(12);
    let u = FieldSampler::new(&g, 11).spinor_in_band(3, 0.1);
    let s0 = SimState::new(u, GaugeKind::Darwin, 0.1, Coupling::Full, &ASolveOptions::default()).unwrap();
    let (q0, mut e_prev) = (charge(&s0), energy(&s0));
    let mut s = s0;
    for _ in 0..20 {
        s = evolution::step(&s, 0.005, &untruncated()).unwrap();
        let e = energy(&s);
        assert!(e <= e_prev + 1e-12);
        e_prev = e;
    }
    assert!((charge(&s) - q0).abs() <= 1e-8 * q0);
}
