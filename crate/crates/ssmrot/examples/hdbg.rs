use ssmrot::model::beam::{build_rotating_beam, BeamSpec};
use ssmrot::model::{apply_damping, shift_to_equilibrium, solve_static_equilibrium, DampingSpec, EquilibriumOptions, TangentMethod};
use ssmrot::spectral::{select_master, solve_spectrum, to_first_order, MasterSelection};
use ssmrot::ssm::{compute_nonauto_fields, nonauto_residual, HarmonicSolver, SsmOptions};

fn main() {
    let spec = BeamSpec { n_elements: 40, ..BeamSpec::default() }.rpm(2000.0);
    let model = build_rotating_beam(&spec).unwrap();
    let u0 = solve_static_equilibrium(&model, &EquilibriumOptions::default()).unwrap();
    let mut shifted = shift_to_equilibrium(&model, &u0, TangentMethod::Auto).unwrap();
    apply_damping(&mut shifted, DampingSpec::Alpha(0.5)).unwrap();
    let sys = to_first_order(&shifted).unwrap();
    let spectrum = solve_spectrum(&sys, 8).unwrap();
    let master = select_master(&spectrum, &MasterSelection::Pairs(vec![0])).unwrap();
    let opts = SsmOptions::default();
    println!("w1 = {}", master.pairs[0].lambda.im);
    // direct path at the failing frequency
    match compute_nonauto_fields(&sys, &master, 134.81129969606766, &opts) {
        Ok(na) => println!("direct: gate {:.3e}", nonauto_residual(&sys, &master, &na) / sys.f_ext.norm()),
        Err(e) => println!("direct failed: {e}"),
    }
    // cached path cold
    let mut solver = HarmonicSolver::new();
    match solver.fields(&sys, &master, 134.81129969606766, &opts) {
        Ok(na) => println!("cached cold: gate {:.3e}", nonauto_residual(&sys, &master, &na) / sys.f_ext.norm()),
        Err(e) => println!("cached cold failed: {e}"),
    }
    // cached warm from a nearby frequency
    let mut solver2 = HarmonicSolver::new();
    let _ = solver2.fields(&sys, &master, 133.7, &opts).unwrap();
    match solver2.fields(&sys, &master, 134.81129969606766, &opts) {
        Ok(na) => println!("cached warm: gate {:.3e}", nonauto_residual(&sys, &master, &na) / sys.f_ext.norm()),
        Err(e) => println!("cached warm failed: {e}"),
    }
}
