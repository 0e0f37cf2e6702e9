//! Conservation, equivariance and dissipation properties of the integrator.

use proptest::prelude::*;
use qns_core::diagnostics::energy;
use qns_core::dynamics::{
    step, to_effective, to_primitive, Formulation, InitialData, Mode, Model, Shape, State,
    StepControl,
};
use qns_core::fields::{PeriodicGrid, ScalarField, VectorField};
use qns_core::ModelParams;

fn mode(k: Vec<i32>, amp: f64, phase: f64, component: usize) -> Mode {
    Mode {
        k,
        amp,
        phase,
        shape: Shape::Cos,
        component,
    }
}

/// Smooth 2D data: one density mode and two velocity modes with random amplitudes.
fn data_2d() -> impl Strategy<Value = InitialData> {
    (0.0f64..0.6, 0.0f64..6.3, -0.2f64..0.2, -0.2f64..0.2).prop_map(|(a, ph, u1, u2)| InitialData {
        rho_mean: 2.0,
        rho_modes: vec![mode(vec![1, 1], a, ph, 0)],
        u_modes: vec![mode(vec![0, 1], u1, 0.0, 0), mode(vec![1, 0], u2, ph, 1)],
        random_u: None,
        rho_min: 0.1,
    })
}

fn model(eps: f64, dim: usize) -> Model {
    Model::new(ModelParams::new(1.25, 0.75, 2.0, eps, dim)).unwrap()
}

fn advance(model: &Model, mut s: State, steps: usize) -> State {
    let control = StepControl::with_t_end(1.0);
    for _ in 0..steps {
        s = step(model, &s, &control).unwrap();
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn mass_is_conserved_in_both_formulations(ini in data_2d()) {
        let m = model(0.4, 2);
        let grid = PeriodicGrid::new(2, 16, 1.0).unwrap();
        let s0 = ini.primitive_state(&grid).unwrap();
        let mass0 = s0.mass();
        for s in [s0.clone(), to_effective(&m, &s0, 0.5 * m.mu()).unwrap()] {
            let s = advance(&m, s, 4);
            prop_assert!((s.mass() - mass0).abs() <= 1e-13 * mass0);
        }
    }

    #[test]
    fn momentum_is_conserved_without_damping(ini in data_2d()) {
        let m = model(0.0, 2);
        let grid = PeriodicGrid::new(2, 16, 1.0).unwrap();
        let s0 = ini.primitive_state(&grid).unwrap();
        let p0 = s0.total_momentum();
        let s = advance(&m, s0, 4);
        for (a, b) in s.total_momentum().iter().zip(&p0) {
            prop_assert!((a - b).abs() <= 1e-13);
        }
    }

    #[test]
    fn effective_transform_round_trips(ini in data_2d(), frac in 0.05f64..1.0) {
        let m = model(0.3, 2);
        let grid = PeriodicGrid::new(2, 16, 1.0).unwrap();
        let s0 = ini.primitive_state(&grid).unwrap();
        let back = to_primitive(&m, &to_effective(&m, &s0, frac * m.mu()).unwrap()).unwrap();
        prop_assert_eq!(back.rho.values(), s0.rho.values());
        prop_assert!(back.mom.sub(&s0.mom).max_abs() <= 1e-13);
        prop_assert_eq!(back.formulation, Formulation::Primitive);
    }

    #[test]
    fn energy_never_increases_over_a_step(ini in data_2d()) {
        let m = model(0.4, 2);
        let grid = PeriodicGrid::new(2, 16, 1.0).unwrap();
        let mut s = ini.primitive_state(&grid).unwrap();
        let mut e = energy(&m, &s).unwrap().energy;
        for _ in 0..6 {
            s = advance(&m, s, 1);
            let next = energy(&m, &s).unwrap().energy;
            prop_assert!(next <= e + 1e-12 * e);
            e = next;
        }
    }
}

#[test]
fn grid_translation_commutes_with_stepping() {
    let m = model(0.4, 1);
    let grid = PeriodicGrid::new(1, 32, 1.0).unwrap();
    let ini = InitialData {
        rho_mean: 2.0,
        rho_modes: vec![mode(vec![1], 0.5, 0.3, 0), mode(vec![3], 0.1, 1.1, 0)],
        u_modes: vec![mode(vec![2], 0.1, 0.0, 0)],
        random_u: None,
        rho_min: 0.1,
    };
    let s0 = ini.primitive_state(&grid).unwrap();
    let shift = |f: &ScalarField| {
        let v = f.values();
        let n = v.len();
        ScalarField::new(&grid, (0..n).map(|i| v[(i + 5) % n]).collect()).unwrap()
    };
    let shifted = State::primitive(
        shift(&s0.rho),
        VectorField::new(vec![shift(s0.mom.comp(0))]).unwrap(),
        0.0,
    )
    .unwrap();
    let a = advance(&m, s0, 5);
    let b = advance(&m, shifted, 5);
    assert!(shift(&a.rho).sub(&b.rho).max_abs() <= 1e-13);
    assert!(shift(a.mom.comp(0)).sub(b.mom.comp(0)).max_abs() <= 1e-13);
}

#[test]
fn reflection_symmetry_is_preserved() {
    // even density with odd velocity stays even/odd under x -> -x
    let m = model(0.4, 1);
    let grid = PeriodicGrid::new(1, 32, 1.0).unwrap();
    let ini = InitialData {
        rho_mean: 2.0,
        rho_modes: vec![mode(vec![1], 0.5, 0.0, 0), mode(vec![2], 0.2, 0.0, 0)],
        u_modes: vec![Mode {
            shape: Shape::Sin,
            ..mode(vec![1], 0.1, 0.0, 0)
        }],
        random_u: None,
        rho_min: 0.1,
    };
    let s = advance(&m, ini.primitive_state(&grid).unwrap(), 10);
    let n = 32;
    let (r, q) = (s.rho.values(), s.mom.comp(0).values());
    for i in 1..n {
        assert!((r[i] - r[n - i]).abs() <= 1e-13);
        assert!((q[i] + q[n - i]).abs() <= 1e-13);
    }
}
