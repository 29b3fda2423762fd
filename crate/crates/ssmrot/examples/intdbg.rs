use nalgebra::DVector;
use ssmrot::model::beam::{build_rotating_beam, BeamSpec};
use ssmrot::model::{apply_damping, shift_to_equilibrium, solve_static_equilibrium, DampingSpec, EquilibriumOptions, TangentMethod};
use ssmrot::validate::{integrate_full, InitialCondition, IntegratorOptions};
use ssmrot::linalg::sym_gen_eigen;

fn main() {
    let amp: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.2);
    let spec = BeamSpec { n_elements: 40, ..BeamSpec::default() }.rpm(2000.0);
    let model = build_rotating_beam(&spec).unwrap();
    let u0 = solve_static_equilibrium(&model, &EquilibriumOptions::default()).unwrap();
    let mut shifted = shift_to_equilibrium(&model, &u0, TangentMethod::Auto).unwrap();
    apply_damping(&mut shifted, DampingSpec::Alpha(0.5)).unwrap();
    let (_, modes) = sym_gen_eigen(&shifted.k_t, &shifted.model.mass).unwrap();
    let tip = model.output_dofs[0].index;
    let mode = modes.column(0).clone_owned();
    let d0 = &mode * (amp / mode[tip].abs());
    let w1 = shifted.natural_frequencies().unwrap()[0];
    println!("free vibration from tip {amp} m, w1 = {w1:.2}");
    let period = 2.0 * std::f64::consts::PI / w1;
    match integrate_full(&shifted, w1, 0.0, 3.0 * period, &InitialCondition::State(d0, DVector::zeros(model.n)), &IntegratorOptions::default()) {
        Ok(traj) => {
            let max_tip = traj.displacements.iter().map(|d| d[tip].abs()).fold(0.0_f64, f64::max);
            println!("ok: {} steps, max tip {max_tip:.4}", traj.len());
        }
        Err(e) => println!("integration failed: {e}"),
    }
}
