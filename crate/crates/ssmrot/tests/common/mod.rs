//! Shared fixtures and independent oracles for the integration suites.

#![allow(dead_code)]

use nalgebra::DVector;
use ssmrot::linalg::real_eigen;
use ssmrot::model::duffing::{build_duffing, DuffingSpec};
use ssmrot::model::{
    apply_damping, shift_to_equilibrium, solve_static_equilibrium, DampingSpec,
    EquilibriumOptions, SecondOrderModel, ShiftedModel, TangentMethod,
};
use ssmrot::spectral::{
    select_master, solve_spectrum, to_first_order, FirstOrderSystem, MasterSelection,
    MasterSubspace, Spectrum,
};
use ssmrot::ssm::{compute_autonomous_ssm, SsmOptions, SSMModel};

pub struct Setup {
    pub model: SecondOrderModel,
    pub shifted: ShiftedModel,
    pub sys: FirstOrderSystem,
    pub spectrum: Spectrum,
    pub master: MasterSubspace,
    pub ssm: SSMModel,
}

/// Full pipeline to an autonomous SSM for any second-order model.
pub fn reduce_model(
    model: SecondOrderModel,
    damping: DampingSpec,
    selection: &MasterSelection,
    n_eigen: usize,
    order: u32,
) -> Setup {
    let u0 = solve_static_equilibrium(&model, &EquilibriumOptions::default()).expect("equilibrium");
    let mut shifted = shift_to_equilibrium(&model, &u0, TangentMethod::Auto).expect("shift");
    apply_damping(&mut shifted, damping).expect("damping");
    let sys = to_first_order(&shifted).expect("first order");
    let spectrum = solve_spectrum(&sys, n_eigen.min(sys.dim())).expect("spectrum");
    let master = select_master(&spectrum, selection).expect("master");
    let ssm = compute_autonomous_ssm(&sys, &master, order, &SsmOptions::default()).expect("ssm");
    Setup {
        model,
        shifted,
        sys,
        spectrum,
        master,
        ssm,
    }
}

pub fn duffing_setup(zeta: f64, gamma: f64, order: u32) -> Setup {
    let model = build_duffing(&DuffingSpec::with_zeta(1.0, zeta, gamma)).unwrap();
    reduce_model(
        model,
        DampingSpec::None,
        &MasterSelection::Pairs(vec![0]),
        2,
        order,
    )
}

/// Steady harmonic-balance amplitudes of the Duffing oscillator
/// m ẍ + c ẋ + k x + γ x³ = f cos Ωt: positive real roots a of
/// [(k − mΩ² + ¾γa²)² + (cΩ)²] a² = f², via the companion matrix of the
/// cubic in u = a².
pub fn duffing_hb_amplitudes(k: f64, c: f64, gamma: f64, f: f64, omega: f64) -> Vec<f64> {
    let d = k - omega * omega;
    // (9/16)γ²u³ + (3/2)γ d u² + (d² + c²Ω²)u − f² = 0
    let a3 = 9.0 / 16.0 * gamma * gamma;
    let a2 = 1.5 * gamma * d;
    let a1 = d * d + c * c * omega * omega;
    let a0 = -f * f;
    // Companion matrix of u³ + (a2/a3)u² + (a1/a3)u + (a0/a3).
    let (b2, b1, b0) = (a2 / a3, a1 / a3, a0 / a3);
    let comp = nalgebra::DMatrix::from_row_slice(3, 3, &[
        0.0, 0.0, -b0, //
        1.0, 0.0, -b1, //
        0.0, 1.0, -b2,
    ]);
    let eig = real_eigen(&comp).expect("cubic roots");
    let mut out: Vec<f64> = eig
        .values
        .iter()
        .filter(|l| l.im.abs() < 1e-9 * l.norm().max(1e-300) && l.re > 0.0)
        .map(|l| l.re.sqrt())
        .collect();
    out.sort_by(|x, y| x.partial_cmp(y).unwrap());
    out
}

/// Bistable window of the Duffing response: Ω-interval with three positive
/// HB roots, located by scan plus bisection on the root count.
pub fn duffing_hb_window(k: f64, c: f64, gamma: f64, f: f64, lo: f64, hi: f64) -> Option<(f64, f64)> {
    let count = |w: f64| duffing_hb_amplitudes(k, c, gamma, f, w).len();
    let n = 4000;
    let mut edges = Vec::new();
    let mut prev = count(lo);
    for i in 1..=n {
        let w = lo + (hi - lo) * i as f64 / n as f64;
        let cur = count(w);
        if cur != prev {
            // Bisect the transition.
            let mut a = lo + (hi - lo) * (i - 1) as f64 / n as f64;
            let mut b = w;
            for _ in 0..60 {
                let m = 0.5 * (a + b);
                if count(m) == prev {
                    a = m;
                } else {
                    b = m;
                }
            }
            edges.push(0.5 * (a + b));
            prev = cur;
        }
    }
    if edges.len() >= 2 {
        Some((edges[0], edges[1]))
    } else {
        None
    }
}

/// Linear steady-state amplitude of the scalar oscillator.
pub fn linear_frf(k: f64, c: f64, f: f64, omega: f64) -> f64 {
    f / ((k - omega * omega).powi(2) + (c * omega).powi(2)).sqrt()
}
