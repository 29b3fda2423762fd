use std::time::Instant;
use ssmrot::model::beam::{build_rotating_beam, BeamSpec};
use ssmrot::model::{apply_damping, shift_to_equilibrium, solve_static_equilibrium, DampingSpec, EquilibriumOptions, TangentMethod};
use ssmrot::reduced::continuation::{continue_frc, FrcOptions};
use ssmrot::spectral::{select_master, solve_spectrum, to_first_order, MasterSelection};
use ssmrot::ssm::{compute_autonomous_ssm, SsmOptions};
use ssmrot::validate::{compare_frc, CompareOptions};

fn main() {
    let n_el: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(40);
    let eps: f64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(20.0);
    let order: u32 = std::env::args().nth(3).and_then(|s| s.parse().ok()).unwrap_or(5);

    let t0 = Instant::now();
    let spec = BeamSpec { n_elements: n_el, ..BeamSpec::default() }.rpm(2000.0);
    let model = build_rotating_beam(&spec).unwrap();
    let u0 = solve_static_equilibrium(&model, &EquilibriumOptions::default()).unwrap();
    let mut shifted = shift_to_equilibrium(&model, &u0, TangentMethod::Auto).unwrap();
    apply_damping(&mut shifted, DampingSpec::Alpha(0.5)).unwrap();
    let sys = to_first_order(&shifted).unwrap();
    let spectrum = solve_spectrum(&sys, 8).unwrap();
    let master = select_master(&spectrum, &MasterSelection::Pairs(vec![0])).unwrap();
    let w1 = master.pairs[0].lambda.im;
    println!("n = {}, w1 = {:.4} ({:.2}s so far)", model.n, w1, t0.elapsed().as_secs_f64());

    let t_ssm = Instant::now();
    let ssm = compute_autonomous_ssm(&sys, &master, order, &SsmOptions::default()).unwrap();
    println!("SSM O{order} in {:.2}s, probes {}", t_ssm.elapsed().as_secs_f64(), ssm.probe_calls);

    let t_frc = Instant::now();
    let range = (0.90 * w1, 1.09 * w1);
    let frc = continue_frc(&sys, &ssm, eps, range, &model.output_dofs, &FrcOptions::default()).unwrap();
    let frc_secs = t_frc.elapsed().as_secs_f64();
    let peak = frc.points.iter().map(|p| p.amplitudes[0]).fold(0.0_f64, f64::max);
    let sns: Vec<f64> = frc.saddle_nodes().iter().map(|p| p.omega).collect();
    println!("FRC: {} points in {:.2}s; peak tip amp {:.4} m; SN at {:?}; warnings {:?}", frc.points.len(), frc_secs, peak, sns, frc.warnings);

    let t_cmp = Instant::now();
    let probes = vec![0.97 * w1, 1.06 * w1];
    let mut copts = CompareOptions::default();
    copts.integrator.steps_per_period = std::env::args().nth(4).and_then(|s| s.parse().ok()).unwrap_or(400);
    copts.integrator.rho_inf = std::env::args().nth(5).and_then(|s| s.parse().ok()).unwrap_or(0.9);
    copts.settle_periods = 30;
    let cmp = match compare_frc(&frc, &shifted, &sys, &ssm, &probes, eps, &copts) {
        Ok(c) => c,
        Err(e) => { println!("compare failed: {e}"); return; }
    };
    println!("compare in {:.2}s:", t_cmp.elapsed().as_secs_f64());
    for p in &cmp.probes {
        println!("  probe w {:.3}: rom {:.4}, full {:.4}, rel {:.4}, conv {}, rom_s {:.2}, full_s {:.2}",
            p.omega, p.rom_amplitude, p.full_amplitude, p.relative_error, p.converged, p.rom_seconds, p.full_seconds);
    }
    println!("total {:.1}s", t0.elapsed().as_secs_f64());
}
