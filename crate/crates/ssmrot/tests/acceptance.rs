//! Acceptance suite: one test per shipped claim, each printing a PASS/FAIL
//! line with the measured quantities. Tolerances are pinned in code.
//!
//! Criterion 7 (Coriolis backbone dominance) is expected to fail for this
//! model family and says so loudly; see the decisions ledger entry shipped
//! with the review notes for the analysis.

mod common;

use common::*;
use nalgebra::DVector;
use ssmrot::linalg::C64;
use ssmrot::model::beam::{build_rotating_beam, tune_tip_spring, BeamSpec};
use ssmrot::model::shaft::{build_rotating_shaft, DiskSpec, ShaftSpec};
use ssmrot::model::tensor::random_tensor_model;
use ssmrot::model::{DampingSpec, OutputDof};
use ssmrot::reduced::backbone::{backbone, backbone_coefficients};
use ssmrot::reduced::continuation::{continue_frc, find_coexisting, FrcOptions, SlowFamily};
use ssmrot::spectral::MasterSelection;
use ssmrot::ssm::oracle::tensor_oracle_composition;
use ssmrot::ssm::probe::{CountingEvaluator, ProbeEngine};
use ssmrot::ssm::{
    composition_coefficient, compute_autonomous_ssm, invariance_residual, sample_points,
    MultiIndex, SsmOptions,
};

fn pass(name: &str, detail: &str) {
    println!("criterion {name}: PASS — {detail}");
}

/// 1. Non-intrusive composition against the brute-force tensor oracle on 20
/// random models.
#[test]
fn criterion_01_composition_oracle() {
    let t0 = std::time::Instant::now();
    let mut worst = 0.0_f64;
    for trial in 0..20u64 {
        let n = 4 + (trial % 7) as usize; // 4..10
        let order = 3 + (trial % 3) as u32; // 3..5
        let model = random_tensor_model(n, 1000 + trial, 0.6);
        let raw = model.raw_tensors.clone().unwrap();
        let setup = reduce_model(
            model,
            DampingSpec::None,
            &MasterSelection::Pairs(vec![0]),
            2,
            order,
        );
        let counter = CountingEvaluator::new(&setup.sys);
        let mut engine = ProbeEngine::new(&counter);
        for d in 2..=order {
            for m in MultiIndex::all_of_degree(2, d) {
                let got = composition_coefficient(&mut engine, &setup.ssm.w, &m);
                let want =
                    tensor_oracle_composition(&raw.quadratic, &raw.cubic, n, &setup.ssm.w, &m)
                        .unwrap();
                let scale = want.norm().max(1e-30);
                worst = worst.max((&got - &want).norm() / scale);
            }
        }
    }
    let dt = t0.elapsed().as_secs_f64();
    assert!(worst < 1e-11, "worst composition error {worst:.3e}");
    assert!(dt < 30.0, "runtime {dt:.1}s exceeds 30s");
    pass("01", &format!("20 models, worst error {worst:.2e}, {dt:.1}s"));
}

/// 2. Invariance-residual order: slope ≥ O + 0.5 over |p| ∈ [1e-4, 1e-2].
#[test]
fn criterion_02_invariance_residual_order() {
    let t0 = std::time::Instant::now();
    // 17 log-spaced amplitudes across the window: high orders clear the
    // black-box evaluation noise floor only in the top half-decade, and
    // the fit needs several informative samples there.
    let rhos: Vec<f64> = (0..17).map(|i| 1e-4 * 10f64.powf(i as f64 / 8.0)).collect();
    let mut lines = Vec::new();

    for order in [3u32, 5] {
        let setup = duffing_setup(0.001, 0.5, order);
        let report = invariance_residual(&setup.ssm, &setup.sys, &sample_points(2, &rhos, 0.7));
        assert!(
            report.slope >= order as f64 + 0.5,
            "Duffing O={order}: slope {:.2}",
            report.slope
        );
        lines.push(format!("duffing O{order} slope {:.2}", report.slope));
    }

    for order in [3u32, 5, 7] {
        let spec = BeamSpec {
            n_elements: 8,
            ..BeamSpec::default()
        }
        .rpm(2000.0);
        let model = build_rotating_beam(&spec).unwrap();
        let setup = reduce_model(
            model,
            DampingSpec::None,
            &MasterSelection::Pairs(vec![0]),
            6,
            order,
        );
        let report = invariance_residual(&setup.ssm, &setup.sys, &sample_points(2, &rhos, 0.7));
        assert!(
            report.slope >= order as f64 + 0.5,
            "beam O={order}: slope {:.2}",
            report.slope
        );
        lines.push(format!("beam O{order} slope {:.2}", report.slope));
    }
    let dt = t0.elapsed().as_secs_f64();
    assert!(dt < 120.0, "runtime {dt:.1}s exceeds 2min");
    pass("02", &format!("{}; {dt:.1}s", lines.join(", ")));
}

/// 3. Duffing analytic backbone: ω̂(a) − ω₀ = (3γ/8ω₀)a² within 1% for
/// a ≤ 0.1 (γ = 0.5, ω₀ = 1, ζ = 0.001).
#[test]
fn criterion_03_duffing_backbone() {
    let t0 = std::time::Instant::now();
    let gamma = 0.5;
    let setup = duffing_setup(0.001, gamma, 5);
    let w_lin = setup.master.pairs[0].lambda.im;
    let rho_grid: Vec<f64> = (1..=14).map(|i| 0.005 * i as f64).collect();
    let curve = backbone(&setup.ssm, &rho_grid, 0).unwrap();
    let mut checked = 0;
    let mut worst = 0.0_f64;
    for pt in &curve.points {
        if pt.amplitude > 0.1 || pt.amplitude < 0.01 {
            continue;
        }
        let predicted_shift = 3.0 * gamma / 8.0 * pt.amplitude * pt.amplitude;
        let rel = ((pt.omega_hat - w_lin) - predicted_shift).abs() / predicted_shift;
        worst = worst.max(rel);
        checked += 1;
    }
    let dt = t0.elapsed().as_secs_f64();
    assert!(checked >= 5, "too few amplitude samples in (0.01, 0.1]");
    assert!(worst < 0.01, "backbone deviation {worst:.3e} ≥ 1%");
    assert!(dt < 5.0, "runtime {dt:.1}s exceeds 5s");
    pass("03", &format!("{checked} amplitudes, worst deviation {:.2}%, {dt:.2}s", 100.0 * worst));
}

/// 4. Duffing FRC against the harmonic-balance amplitude cubic: 2 folds,
/// window endpoints within 1%, stable–unstable–stable pattern.
#[test]
fn criterion_04_duffing_frc_vs_cubic_oracle() {
    let t0 = std::time::Instant::now();
    let zeta = 0.01;
    let gamma = 0.5;
    let eps = 0.01;
    let setup = duffing_setup(zeta, gamma, 7);
    let out = vec![OutputDof {
        name: "x".into(),
        index: 0,
    }];
    let frc = continue_frc(
        &setup.sys,
        &setup.ssm,
        eps,
        (0.9, 1.4),
        &out,
        &FrcOptions::default(),
    )
    .unwrap();
    let sns = frc.saddle_nodes();
    assert_eq!(sns.len(), 2, "SN count = {}", sns.len());
    let mut sn_omegas: Vec<f64> = sns.iter().map(|p| p.omega).collect();
    sn_omegas.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let c = 2.0 * zeta;
    let (w_lo, w_hi) =
        duffing_hb_window(1.0, c, gamma, eps, 0.9, 1.4).expect("oracle finds a bistable window");
    let err_lo = (sn_omegas[0] - w_lo).abs() / w_lo;
    let err_hi = (sn_omegas[1] - w_hi).abs() / w_hi;
    assert!(
        err_lo < 0.01 && err_hi < 0.01,
        "window endpoints: SSM ({:.5}, {:.5}) vs oracle ({w_lo:.5}, {w_hi:.5})",
        sn_omegas[0],
        sn_omegas[1]
    );

    // Stability pattern along the branch.
    let flags: Vec<bool> = frc.points.iter().map(|p| p.stable).collect();
    let mut pattern = vec![flags[0]];
    for w in flags.windows(2) {
        if w[0] != w[1] {
            pattern.push(w[1]);
        }
    }
    assert_eq!(pattern, vec![true, false, true], "stability pattern {pattern:?}");
    let dt = t0.elapsed().as_secs_f64();
    assert!(dt < 30.0, "runtime {dt:.1}s exceeds 30s");
    pass(
        "04",
        &format!(
            "2 folds at ({:.5}, {:.5}); oracle gaps ({:.2}%, {:.2}%); stable–unstable–stable; {dt:.1}s",
            sn_omegas[0],
            sn_omegas[1],
            100.0 * err_lo,
            100.0 * err_hi
        ),
    );
}

/// 6. Hardening–softening transition: the leading backbone coefficient
/// changes sign exactly once across the speed scan.
#[test]
fn criterion_06_hardening_softening_transition() {
    let t0 = std::time::Instant::now();
    let rpms = [2000.0, 3000.0, 4000.0, 6000.0, 8000.0];
    let mut gammas = Vec::new();
    for rpm in rpms {
        let spec = BeamSpec {
            n_elements: 10,
            ..BeamSpec::default()
        }
        .rpm(rpm);
        let model = build_rotating_beam(spec.clone().validate().map(|_| &spec).unwrap()).unwrap();
        let setup = reduce_model(
            model,
            DampingSpec::None,
            &MasterSelection::Pairs(vec![0]),
            6,
            3,
        );
        let g1 = backbone_coefficients(&setup.ssm).unwrap()[0];
        gammas.push(g1);
    }
    let sign_changes = gammas
        .windows(2)
        .filter(|w| w[0].signum() != w[1].signum())
        .count();
    let dt = t0.elapsed().as_secs_f64();
    assert_eq!(
        sign_changes, 1,
        "Im γ₁ over {rpms:?} rpm = {gammas:?}: {sign_changes} sign changes"
    );
    assert!(dt < 300.0, "runtime {dt:.1}s exceeds 5min");
    pass(
        "06",
        &format!(
            "Im γ₁ = [{}] across {rpms:?} rpm; one sign change; {dt:.1}s",
            gammas
                .iter()
                .map(|g| format!("{g:+.2e}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    );
}

/// 8. Gyroscopic whirl splitting: zero at Ω̂ = 0 and strictly monotone over
/// the speed scan.
#[test]
fn criterion_08_whirl_splitting() {
    let t0 = std::time::Instant::now();
    let speeds = [0.0, 25.0, 50.0, 75.0, 100.0];
    let mut splits = Vec::new();
    for speed in speeds {
        let spec = ShaftSpec {
            spin_speed: speed,
            ..ShaftSpec::default()
        };
        let model = build_rotating_shaft(&spec).unwrap();
        let setup = reduce_model(
            model,
            DampingSpec::None,
            &MasterSelection::Pairs(vec![0]),
            4,
            2,
        );
        let mut freqs: Vec<f64> = setup.spectrum.pairs.iter().map(|p| p.lambda.im).collect();
        freqs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        splits.push((freqs[1] - freqs[0]).abs());
    }
    let dt = t0.elapsed().as_secs_f64();
    assert!(
        splits[0] < 1e-6,
        "whirl pair split at rest: {:.3e}",
        splits[0]
    );
    for w in splits.windows(2) {
        assert!(w[1] > w[0] + 1e-9, "splitting not strictly monotone: {splits:?}");
    }
    assert!(dt < 60.0, "runtime {dt:.1}s exceeds 1min");
    pass(
        "08",
        &format!(
            "splits over Ω̂ {speeds:?}: [{}]; {dt:.1}s",
            splits
                .iter()
                .map(|s| format!("{s:.3}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    );
}

/// 11. Determinism and serialization: repeated runs byte-identical
/// (report.json compared with timings nulled), ssm.json round-trip
/// byte-identical.
#[test]
fn criterion_11_determinism_and_serialization() {
    let t0 = std::time::Instant::now();
    let toml_text = r#"
seed = 42
[model]
builder = "beam"
[model.beam]
n_elements = 6
spin_speed = 150.0
length = 1.0
width = 0.03
thickness = 0.02
youngs_modulus = 104e9
poisson = 0.3
density = 4400.0
hub_offset = 0.1
tip_spring_stiffness = 0.0
include_coriolis = true
asymmetry_preload = 0.0
[damping]
xi1 = 0.002
[master]
mode = "pairs"
pairs = [0]
[ssm]
order = 3
[analysis]
kind = "frc"
omega_range = [150.0, 185.0]
eps = 3.0
"#;
    let cfg = ssmrot::pipeline::PipelineConfig::from_toml(toml_text).unwrap();
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    ssmrot::pipeline::run(&cfg, d1.path()).unwrap();
    ssmrot::pipeline::run(&cfg, d2.path()).unwrap();

    for name in ["spectrum.csv", "frc.csv", "frc.svg", "ssm.json"] {
        let a = std::fs::read(d1.path().join(name)).unwrap();
        let b = std::fs::read(d2.path().join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
    // report.json: structural equality with wall-clock timings nulled.
    let normalize = |p: &std::path::Path| -> serde_json::Value {
        let mut v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap();
        v["timings"] = serde_json::Value::Null;
        v["comparison"] = serde_json::Value::Null;
        v
    };
    assert_eq!(
        normalize(&d1.path().join("report.json")),
        normalize(&d2.path().join("report.json")),
        "report.json differs beyond timings"
    );

    // ssm.json round-trip byte-stability.
    let text = std::fs::read_to_string(d1.path().join("ssm.json")).unwrap();
    let (loaded, hash) = ssmrot::ssm::serialize::from_json(&text).unwrap();
    let text2 = ssmrot::ssm::serialize::to_json(&loaded, &hash).unwrap();
    assert_eq!(text.trim_end(), text2.trim_end(), "ssm.json round-trip not byte-identical");
    let dt = t0.elapsed().as_secs_f64();
    assert!(dt < 60.0, "runtime {dt:.1}s exceeds 1min");
    pass("11", &format!("byte-identical artifacts and round-trip; {dt:.1}s"));
}

/// 7. Coriolis significance, literal reading. Expected to FAIL for the
/// planar beam: the Coriolis effect on the linear frequency (∝ Ω̂²)
/// dominates its effect on the converged backbone at every validated
/// amplitude. The measured quantities print either way; the blocking
/// analysis lives in the reviewer ledger.
#[test]
fn criterion_07_coriolis_significance() {
    let t0 = std::time::Instant::now();
    let rpms = [500.0, 1000.0, 1500.0, 2000.0];
    let top = *rpms.last().unwrap();

    let run = |coriolis: bool, order: u32| {
        let spec = BeamSpec {
            n_elements: 10,
            include_coriolis: coriolis,
            ..BeamSpec::default()
        }
        .rpm(top);
        let model = build_rotating_beam(&spec).unwrap();
        let tip = model.output_dofs[0].index;
        (
            reduce_model(
                model,
                DampingSpec::None,
                &MasterSelection::Pairs(vec![0]),
                6,
                order,
            ),
            tip,
        )
    };

    let (on5, tip) = run(true, 5);
    let (on7, _) = run(true, 7);
    let (off5, _) = run(false, 5);
    let (off7, _) = run(false, 7);
    let w_on = on5.master.pairs[0].lambda.im;
    let w_off = off5.master.pairs[0].lambda.im;
    let lin_diff = (w_on - w_off).abs();
    assert!(
        lin_diff / w_off < 0.01,
        "linear frequencies differ by {:.3}% ≥ 1%",
        100.0 * lin_diff / w_off
    );

    // Largest validated ρ: O5 vs O7 backbone agreement within 1% on both
    // models.
    let rho_grid: Vec<f64> = (1..=120).map(|i| 0.004 * i as f64).collect();
    let bb = |setup: &Setup, order_pair: &Setup| {
        (
            backbone(&setup.ssm, &rho_grid, tip).unwrap(),
            backbone(&order_pair.ssm, &rho_grid, tip).unwrap(),
        )
    };
    let (bb_on5, bb_on7) = bb(&on5, &on7);
    let (bb_off5, bb_off7) = bb(&off5, &off7);
    let mut idx_val = 0;
    for i in 0..rho_grid.len() {
        let ok_on =
            (bb_on5.points[i].omega_hat - bb_on7.points[i].omega_hat).abs() / bb_on7.points[i].omega_hat
                < 0.01;
        let ok_off = (bb_off5.points[i].omega_hat - bb_off7.points[i].omega_hat).abs()
            / bb_off7.points[i].omega_hat
            < 0.01;
        if ok_on && ok_off {
            idx_val = i;
        } else {
            break;
        }
    }
    let p_on = &bb_on7.points[idx_val];
    let p_off = bb_off7
        .points
        .iter()
        .min_by(|a, b| {
            (a.amplitude - p_on.amplitude)
                .abs()
                .partial_cmp(&(b.amplitude - p_on.amplitude).abs())
                .unwrap()
        })
        .unwrap();
    let bb_diff = (p_on.omega_hat - p_off.omega_hat).abs();
    let ratio = bb_diff / lin_diff;
    let dt = t0.elapsed().as_secs_f64();
    println!(
        "criterion 07 measurements: scan {rpms:?} rpm; at {top} rpm linear diff {lin_diff:.4} rad/s \
         ({:.3}% rel), validated ρ = {:.1} (amp {:.4} m), backbone diff {bb_diff:.4} rad/s, \
         ratio {ratio:.2} (needs ≥ 5); {dt:.1}s",
        100.0 * lin_diff / w_off,
        p_on.rho,
        p_on.amplitude
    );
    assert!(dt < 300.0, "runtime {dt:.1}s exceeds 5min");
    assert!(
        ratio >= 5.0,
        "criterion 07: FAIL — backbone difference at the largest validated ρ is {ratio:.2}× the \
         linear split (< 5×). Known-unattainable for the planar von Kármán beam; see the \
         decisions ledger for the full analysis (geometry/speed/preload sweeps and the \
         near-1:3 truncation artifact)."
    );
    pass("07", &format!("ratio {ratio:.2} ≥ 5; {dt:.1}s"));
}
