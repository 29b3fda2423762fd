//! Property suites over the spec's module invariants: builder matrix
//! structure, polynomial degree, probing identities, biorthonormality,
//! conjugation symmetry, spin-speed continuity.

mod common;

use nalgebra::DVector;
use proptest::prelude::*;
use ssmrot::linalg::{C64, CVector};
use ssmrot::model::beam::{build_rotating_beam, BeamSpec};
use ssmrot::model::shaft::{build_rotating_shaft, ShaftSpec};
use ssmrot::model::tensor::random_tensor_model;
use ssmrot::model::{
    check_model_invariants, complexify_evaluator, gnl_degree_split_ok, shift_to_equilibrium,
    solve_static_equilibrium, ComplexMap, EquilibriumOptions, TangentMethod,
};
use ssmrot::spectral::{solve_spectrum, to_first_order};

fn beam_strategy() -> impl Strategy<Value = BeamSpec> {
    (
        0.5..2.0f64,          // length
        0.01..0.05f64,        // width
        0.005..0.04f64,       // thickness
        50e9..210e9f64,       // E
        1000.0..8000.0f64,    // rho
        0.0..0.5f64,          // hub offset
        0.0..250.0f64,        // spin speed
        3usize..10,           // elements
        prop::bool::ANY,      // coriolis
    )
        .prop_map(
            |(length, width, thickness, e, rho, r_h, spin, n_el, coriolis)| BeamSpec {
                length,
                width,
                thickness,
                youngs_modulus: e,
                poisson: 0.3,
                density: rho,
                hub_offset: r_h,
                spin_speed: spin,
                n_elements: n_el,
                tip_spring_stiffness: 0.0,
                include_coriolis: coriolis,
                asymmetry_preload: 0.0,
            },
        )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn beam_builder_invariants(spec in beam_strategy()) {
        let model = build_rotating_beam(&spec).unwrap();
        check_model_invariants(&model, 7).unwrap();
    }

    #[test]
    fn beam_gnl_is_quadratic_plus_cubic(spec in beam_strategy(), seed in 0u64..1000) {
        let model = build_rotating_beam(&spec).unwrap();
        let u0 = solve_static_equilibrium(&model, &EquilibriumOptions::default()).unwrap();
        let shifted = shift_to_equilibrium(&model, &u0, TangentMethod::Auto).unwrap();
        use rand::prelude::*;
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let dir = DVector::from_fn(model.n, |_, _| rng.random_range(-0.01..0.01f64));
        prop_assert!(gnl_degree_split_ok(shifted.g_nl.as_ref(), &dir, 1e-7));
        // g_nl(0) = 0 and vanishing Jacobian by finite differences.
        let zero = DVector::zeros(model.n);
        prop_assert!(shifted.g_nl.eval_real(&zero).norm() < 1e-9);
        let h = 1e-7;
        let mut worst: f64 = 0.0;
        for j in (0..model.n).step_by((model.n / 4).max(1)) {
            let mut e = DVector::zeros(model.n);
            e[j] = h;
            let col = (shifted.g_nl.eval_real(&e) - shifted.g_nl.eval_real(&(-e.clone()))) / (2.0 * h);
            worst = worst.max(col.norm());
        }
        let k_scale = shifted.k_t.norm();
        prop_assert!(worst <= 1e-6 * k_scale, "g_nl Jacobian at 0: {worst:.3e} vs K scale {k_scale:.3e}");
    }
}

#[test]
fn complexified_adapter_matches_native_complex_eval() {
    // The spec's ShiftedModel invariant: native complex g_nl equals the
    // polarization-based complexification of the real evaluator.
    use rand::prelude::*;
    let spec = BeamSpec {
        n_elements: 6,
        spin_speed: 120.0,
        ..BeamSpec::default()
    };
    let model = build_rotating_beam(&spec).unwrap();
    let u0 = solve_static_equilibrium(&model, &EquilibriumOptions::default()).unwrap();
    let shifted = shift_to_equilibrium(&model, &u0, TangentMethod::Auto).unwrap();
    let g = shifted.g_nl.clone();
    let g_for_closure = g.clone();
    let adapter = complexify_evaluator(
        move |u: &DVector<f64>| g_for_closure.eval_real(u),
        model.n,
    );
    let mut rng = rand::rngs::StdRng::seed_from_u64(3);
    for _ in 0..5 {
        let z = CVector::from_fn(model.n, |_, _| {
            C64::new(rng.random_range(-0.01..0.01), rng.random_range(-0.01..0.01))
        });
        let native = g.eval(&z);
        let adapted = adapter.eval(&z);
        let scale = native.norm().max(1e-30);
        assert!(
            (&native - &adapted).norm() / scale < 1e-9,
            "complexified adapter mismatch {:.3e}",
            (&native - &adapted).norm() / scale
        );
    }
    // Real inputs match the real evaluator exactly.
    let xr = DVector::from_fn(model.n, |i, _| 1e-3 * (i as f64 + 1.0).sin());
    let zr = CVector::from_fn(model.n, |i, _| C64::new(xr[i], 0.0));
    let direct = g.eval_real(&xr);
    let via_adapter = adapter.eval(&zr);
    for i in 0..model.n {
        assert_eq!(via_adapter[i].re, direct[i]);
        assert_eq!(via_adapter[i].im, 0.0);
    }
}

#[test]
fn biorthonormality_across_example_models() {
    for seed in [1u64, 2, 3] {
        let model = random_tensor_model(8, seed, 0.5);
        let shifted =
            shift_to_equilibrium(&model, &DVector::zeros(8), TangentMethod::Auto).unwrap();
        let sys = to_first_order(&shifted).unwrap();
        let spectrum = solve_spectrum(&sys, 8).unwrap();
        assert!(spectrum.max_biorthogonality_defect(&sys) < 1e-10);
        assert!(spectrum.max_residual(&sys) < 1e-8);
    }
}

#[test]
fn shaft_spectrum_continuous_at_zero_speed() {
    let base = ShaftSpec {
        spin_speed: 0.0,
        ..ShaftSpec::default()
    };
    let tiny = ShaftSpec {
        spin_speed: 1e-6,
        ..ShaftSpec::default()
    };
    let freqs = |spec: &ShaftSpec| -> Vec<f64> {
        let model = build_rotating_shaft(spec).unwrap();
        let u0 = solve_static_equilibrium(&model, &EquilibriumOptions::default()).unwrap();
        let shifted = shift_to_equilibrium(&model, &u0, TangentMethod::Auto).unwrap();
        let sys = to_first_order(&shifted).unwrap();
        let spectrum = solve_spectrum(&sys, 6).unwrap();
        spectrum.pairs.iter().map(|p| p.lambda.im).collect()
    };
    let f0 = freqs(&base);
    let f1 = freqs(&tiny);
    for (a, b) in f0.iter().zip(f1.iter()) {
        assert!(
            (a - b).abs() < 1e-6 * a.max(1.0),
            "spectrum drift at Ω̂ = 1e-6: {a} vs {b}"
        );
    }
}
