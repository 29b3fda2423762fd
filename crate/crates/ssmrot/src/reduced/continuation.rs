//! Pseudo-arclength continuation of the slow-system fixed points over the
//! forcing frequency, with saddle-node and Hopf detection.
//!
//! The augmented unknown is (x, Ω) with x the realified reduced
//! coordinates. Steps adapt on Newton behavior (halve on failure, grow on
//! fast convergence); at every accepted point the realified Jacobian
//! delivers stability and the two monitor functions — det J for folds and
//! the largest real part over oscillatory eigenvalue pairs for Hopf points.
//! A monitor sign change triggers bisection along the branch segment until
//! the bracket collapses below the Ω tolerance.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::model::OutputDof;
use crate::spectral::FirstOrderSystem;
use crate::ssm::{resonant_s0, HarmonicSolver, SSMModel};

use super::{
    build_slow_from_parts, classify_fixed_point, pack, solve_fixed_point, to_physical_with,
    unpack, FixedPointClass, SlowReducedSystem,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Bifurcation {
    None,
    SaddleNode,
    Hopf,
}

impl std::fmt::Display for Bifurcation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Bifurcation::None => write!(f, "-"),
            Bifurcation::SaddleNode => write!(f, "SN"),
            Bifurcation::Hopf => write!(f, "HB"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FrcPoint {
    pub omega: f64,
    /// Leader coordinates of the fixed point.
    pub q: Vec<C64>,
    /// Reduced amplitudes |q_k|.
    pub rho: Vec<f64>,
    /// Physical amplitudes per output DOF (max over one period).
    pub amplitudes: Vec<f64>,
    pub stable: bool,
    pub bifurcation: Bifurcation,
}

#[derive(Debug, Clone)]
pub struct Frc {
    pub points: Vec<FrcPoint>,
    pub eps: f64,
    pub order: u32,
    pub dim_m: usize,
    pub output_dofs: Vec<OutputDof>,
    pub warnings: Vec<String>,
}

impl Frc {
    pub fn saddle_nodes(&self) -> Vec<&FrcPoint> {
        self.points
            .iter()
            .filter(|p| p.bifurcation == Bifurcation::SaddleNode)
            .collect()
    }

    pub fn hopf_points(&self) -> Vec<&FrcPoint> {
        self.points
            .iter()
            .filter(|p| p.bifurcation == Bifurcation::Hopf)
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct FrcOptions {
    /// Initial step as a fraction of the scaled branch metric.
    pub h0: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub newton_tol: f64,
    pub max_newton: usize,
    pub max_steps: usize,
    /// Ω half-width at which a bifurcation bracket stops shrinking.
    pub bif_tol_omega: f64,
    /// Truncate the branch when max|q| exceeds this bound.
    pub amp_cap: f64,
    /// Phase samples per point for the physical amplitudes.
    pub n_phase: usize,
}

impl Default for FrcOptions {
    fn default() -> Self {
        Self {
            h0: 0.02,
            h_min: 1e-6,
            h_max: 0.1,
            newton_tol: 1e-10,
            max_newton: 12,
            max_steps: 20_000,
            bif_tol_omega: 1e-8,
            amp_cap: f64::INFINITY,
            n_phase: 64,
        }
    }
}

/// The Ω-family of slow systems backing one continuation run. The fast
/// path [`SlowFamily::at`] assembles the slow dynamics from O(n)
/// projections; the full harmonic fields (needed for physical amplitudes)
/// go through a cached-factorization solver.
pub struct SlowFamily<'a> {
    pub sys: &'a FirstOrderSystem,
    pub ssm: &'a SSMModel,
    pub eps: f64,
    solver: std::cell::RefCell<HarmonicSolver>,
}

impl<'a> SlowFamily<'a> {
    pub fn new(sys: &'a FirstOrderSystem, ssm: &'a SSMModel, eps: f64) -> Self {
        Self {
            sys,
            ssm,
            eps,
            solver: std::cell::RefCell::new(HarmonicSolver::new()),
        }
    }

    pub fn at(&self, omega: f64) -> Result<SlowReducedSystem> {
        let (pairs, s0) = resonant_s0(self.sys, &self.ssm.master, omega, self.ssm.options.ext_tol);
        super::assemble_slow(self.ssm, omega, &pairs, &s0, self.eps)
    }

    pub fn at_with_fields(
        &self,
        omega: f64,
    ) -> Result<(SlowReducedSystem, crate::ssm::NonAutonomous)> {
        let na = self
            .solver
            .borrow_mut()
            .fields(self.sys, &self.ssm.master, omega, &self.ssm.options)?;
        let slow = build_slow_from_parts(self.ssm, &na, self.eps, omega)?;
        Ok((slow, na))
    }

    /// (factorizations, harmonic solves) performed so far.
    pub fn solver_stats(&self) -> (usize, usize) {
        let s = self.solver.borrow();
        (s.factorizations, s.solves)
    }
}

struct Workspace<'a> {
    family: &'a SlowFamily<'a>,
    /// Scales making the arclength metric dimensionless.
    x_scale: f64,
    omega_scale: f64,
}

impl Workspace<'_> {
    /// Residual of the augmented system at (x, Ω).
    fn residual(&self, x: &DVector<f64>, omega: f64) -> Result<DVector<f64>> {
        let slow = self.family.at(omega)?;
        Ok(slow.real_field(x))
    }

    /// [J_x | ∂F/∂Ω] with the Ω column by central differences.
    fn extended_jacobian(&self, x: &DVector<f64>, omega: f64) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let slow = self.family.at(omega)?;
        let jx = slow.real_jacobian(x);
        let d_omega = 1e-7 * (1.0 + omega.abs());
        let fp = self.residual(x, omega + d_omega)?;
        let fm = self.residual(x, omega - d_omega)?;
        let fd = (fp - fm) / (2.0 * d_omega);
        Ok((jx, fd))
    }

    /// Tangent through the nullspace construction
    /// [[J_x, F_Ω], [t_prevᵀ]] t = e_last, normalized in the scaled metric.
    fn tangent(
        &self,
        x: &DVector<f64>,
        omega: f64,
        t_prev: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        let d = x.len();
        let (jx, fo) = self.extended_jacobian(x, omega)?;
        let mut m = DMatrix::zeros(d + 1, d + 1);
        m.view_mut((0, 0), (d, d)).copy_from(&jx);
        for i in 0..d {
            m[(i, d)] = fo[i];
        }
        for j in 0..=d {
            m[(d, j)] = t_prev[j];
        }
        let mut rhs = DVector::zeros(d + 1);
        rhs[d] = 1.0;
        let t = m
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Continuation("tangent system is singular".into()))?;
        Ok(self.normalize(t))
    }

    fn normalize(&self, mut t: DVector<f64>) -> DVector<f64> {
        let d = t.len() - 1;
        let mut nrm = 0.0;
        for i in 0..d {
            nrm += (t[i] / self.x_scale).powi(2);
        }
        nrm += (t[d] / self.omega_scale).powi(2);
        let nrm = nrm.sqrt().max(1e-300);
        t /= nrm;
        t
    }

    /// Scaled inner product of the arclength metric.
    fn dot(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        let d = a.len() - 1;
        let mut acc = 0.0;
        for i in 0..d {
            acc += a[i] * b[i] / (self.x_scale * self.x_scale);
        }
        acc + a[d] * b[d] / (self.omega_scale * self.omega_scale)
    }

    /// Pseudo-arclength corrector: Newton on [F(x,Ω); ⟨t, X − X_pred⟩].
    fn correct(
        &self,
        x_pred: &DVector<f64>,
        omega_pred: f64,
        t: &DVector<f64>,
        opts: &FrcOptions,
    ) -> Result<(DVector<f64>, f64, usize)> {
        let d = x_pred.len();
        let mut x = x_pred.clone();
        let mut omega = omega_pred;
        let slow_pred = self.family.at(omega_pred)?;
        let f_scale = slow_pred
            .forcing
            .iter()
            .map(|f| f.norm())
            .sum::<f64>()
            .max(1e-300);
        let lam_scale = slow_pred.lambda[0].norm();
        for iter in 0..opts.max_newton {
            let f = self.residual(&x, omega)?;
            let mut aug = DVector::zeros(d + 1);
            for i in 0..d {
                aug[i] = x[i] - x_pred[i];
            }
            aug[d] = omega - omega_pred;
            let g = self.dot(t, &aug);
            // Outside the externally resonant band the forcing vanishes and
            // the field scale comes from the linear part alone.
            let scale = f_scale.max(lam_scale * x.norm());
            if f.norm() <= opts.newton_tol * scale && g.abs() <= 1e-12 {
                return Ok((x, omega, iter));
            }
            let (jx, fo) = self.extended_jacobian(&x, omega)?;
            let mut m = DMatrix::zeros(d + 1, d + 1);
            m.view_mut((0, 0), (d, d)).copy_from(&jx);
            for i in 0..d {
                m[(i, d)] = fo[i];
            }
            for j in 0..d {
                m[(d, j)] = t[j] / (self.x_scale * self.x_scale);
            }
            m[(d, d)] = t[d] / (self.omega_scale * self.omega_scale);
            let mut rhs = DVector::zeros(d + 1);
            for i in 0..d {
                rhs[i] = f[i];
            }
            rhs[d] = g;
            let delta = m
                .lu()
                .solve(&rhs)
                .ok_or_else(|| Error::Continuation("corrector Jacobian singular".into()))?;
            for i in 0..d {
                x[i] -= delta[i];
            }
            omega -= delta[d];
        }
        Err(Error::Continuation("corrector did not converge".into()))
    }
}

fn make_point(
    family: &SlowFamily<'_>,
    x: &DVector<f64>,
    omega: f64,
    output_dofs: &[OutputDof],
    n_phase: usize,
) -> Result<(FrcPoint, FixedPointClass)> {
    let (slow, na) = family.at_with_fields(omega)?;
    let q = unpack(x);
    let class = classify_fixed_point(&slow, &q)?;
    let dof_idx: Vec<usize> = output_dofs.iter().map(|d| d.index).collect();
    let resp = to_physical_with(family.ssm, &slow, Some(&na), family.eps, &q, &dof_idx, n_phase)?;
    Ok((
        FrcPoint {
            omega,
            rho: q.iter().map(|c| c.norm()).collect(),
            q,
            amplitudes: resp.amplitudes,
            stable: class.stable,
            bifurcation: Bifurcation::None,
        },
        class,
    ))
}

/// Continue the forced-response branch from the linear solution at the low
/// end of `omega_range`.
pub fn continue_frc(
    sys: &FirstOrderSystem,
    ssm: &SSMModel,
    eps: f64,
    omega_range: (f64, f64),
    output_dofs: &[OutputDof],
    opts: &FrcOptions,
) -> Result<Frc> {
    let family = SlowFamily::new(sys, ssm, eps);
    let slow_lo = family.at(omega_range.0)?;
    // Linear initial guess: (λ_k − iν_kΩ) q_k + f_k = 0.
    let q0: Vec<C64> = (0..slow_lo.n_pairs)
        .map(|k| {
            -slow_lo.forcing[k] / (slow_lo.lambda[k] - C64::new(0.0, slow_lo.nu[k] * slow_lo.omega))
        })
        .collect();
    let q_start = solve_fixed_point(&slow_lo, &q0, 1e-12, 50).map_err(|e| {
        Error::Continuation(format!("no convergence at the initial point: {e}"))
    })?;
    continue_branch(&family, omega_range.0, &q_start, omega_range, output_dofs, opts, 1.0)
}

/// Continue a branch from an explicit starting fixed point (used for
/// secondary branches found by multi-start searches). `direction` picks the
/// initial Ω heading (+1/−1).
#[allow(clippy::too_many_arguments)]
pub fn continue_branch(
    family: &SlowFamily<'_>,
    omega_start: f64,
    q_start: &[C64],
    omega_range: (f64, f64),
    output_dofs: &[OutputDof],
    opts: &FrcOptions,
    direction: f64,
) -> Result<Frc> {
    let (omega_lo, omega_hi) = omega_range;
    if omega_hi <= omega_lo {
        return Err(Error::InvalidSpec(format!(
            "empty frequency range [{omega_lo}, {omega_hi}]"
        )));
    }
    let span = omega_hi - omega_lo;
    let margin = 0.05 * span;

    // Scale estimate: the linear resonance peak of the slowest forced pair.
    let slow0 = family.at(omega_start)?;
    let f_norm: f64 = slow0.forcing.iter().map(|f| f.norm()).fold(0.0, f64::max);
    let peak_est = if f_norm > 0.0 {
        f_norm / slow0.lambda[0].re.abs().max(1e-12)
    } else {
        1.0
    };
    let ws = Workspace {
        family,
        x_scale: peak_est.max(1e-12),
        omega_scale: span,
    };

    let mut warnings = Vec::new();
    let mut points: Vec<FrcPoint> = Vec::new();

    let mut x = pack(q_start);
    let mut omega = omega_start;
    let mut t_prev = DVector::zeros(x.len() + 1);
    t_prev[x.len()] = direction;
    let mut t = ws.tangent(&x, omega, &t_prev)?;
    if t[x.len()] * direction < 0.0 {
        t = -t;
    }

    let (first_pt, first_class) = make_point(family, &x, omega, output_dofs, opts.n_phase)?;
    let mut prev_class = first_class;
    let mut prev_x = x.clone();
    let mut prev_omega = omega;
    points.push(first_pt);

    let mut h = opts.h0;
    let mut steps = 0usize;
    loop {
        steps += 1;
        if steps > opts.max_steps {
            warnings.push(format!("step budget exhausted after {} points", points.len()));
            break;
        }
        // Predictor.
        let d = x.len();
        let mut x_pred = x.clone();
        for i in 0..d {
            x_pred[i] += h * t[i];
        }
        let omega_pred = omega + h * t[d];

        match ws.correct(&x_pred, omega_pred, &t, opts) {
            Ok((x_new, omega_new, iters)) => {
                // Accept.
                let (mut pt, class) = make_point(family, &x_new, omega_new, output_dofs, opts.n_phase)?;

                // Monitor sign changes against the previous accepted point.
                let sn_cross = prev_class.det * class.det < 0.0;
                let hopf_cross = prev_class.hopf_monitor * class.hopf_monitor < 0.0
                    && prev_class.hopf_monitor.is_finite();
                if sn_cross || hopf_cross {
                    let kind = if sn_cross {
                        Bifurcation::SaddleNode
                    } else {
                        Bifurcation::Hopf
                    };
                    match bisect_bifurcation(
                        &ws, &prev_x, prev_omega, &x_new, omega_new, &t, kind, opts,
                    ) {
                        Ok((xb, wb)) => {
                            let (mut bp, _) =
                                make_point(family, &xb, wb, output_dofs, opts.n_phase)?;
                            bp.bifurcation = kind;
                            points.push(bp);
                        }
                        Err(e) => {
                            warnings.push(format!(
                                "bifurcation bracketing failed near Ω = {omega_new}: {e}"
                            ));
                            pt.bifurcation = kind;
                        }
                    }
                }

                let rho_max = pt.rho.iter().fold(0.0_f64, |a, &b| a.max(b));
                points.push(pt);
                prev_class = class;
                prev_x = x_new.clone();
                prev_omega = omega_new;

                // New tangent, oriented along the previous one.
                let t_new = ws.tangent(&x_new, omega_new, &t)?;
                t = if ws.dot(&t_new, &t) < 0.0 { -t_new } else { t_new };
                x = x_new;
                omega = omega_new;

                if iters <= 3 {
                    h = (h * 1.2).min(opts.h_max);
                }

                if rho_max > opts.amp_cap {
                    warnings.push(format!(
                        "branch truncated at Ω = {omega}: |q| = {rho_max:.3e} exceeded the amplitude bound"
                    ));
                    break;
                }
                if omega > omega_hi || omega < omega_lo - margin {
                    break;
                }
            }
            Err(_) => {
                h *= 0.5;
                if h < opts.h_min {
                    warnings.push(format!(
                        "step underflow at Ω = {omega} after {} points",
                        points.len()
                    ));
                    break;
                }
            }
        }
    }

    Ok(Frc {
        points,
        eps: family.eps,
        order: family.ssm.order,
        dim_m: family.ssm.dim_m(),
        output_dofs: output_dofs.to_vec(),
        warnings,
    })
}

/// Bisection along the secant between two accepted points until the monitor
/// crossing is located within the Ω tolerance.
#[allow(clippy::too_many_arguments)]
fn bisect_bifurcation(
    ws: &Workspace<'_>,
    x_a: &DVector<f64>,
    omega_a: f64,
    x_b: &DVector<f64>,
    omega_b: f64,
    t: &DVector<f64>,
    kind: Bifurcation,
    opts: &FrcOptions,
) -> Result<(DVector<f64>, f64)> {
    let monitor = |x: &DVector<f64>, omega: f64| -> Result<f64> {
        let slow = ws.family.at(omega)?;
        let class = classify_fixed_point(&slow, &unpack(x))?;
        Ok(match kind {
            Bifurcation::SaddleNode => class.det,
            Bifurcation::Hopf => class.hopf_monitor,
            Bifurcation::None => unreachable!(),
        })
    };
    let mut lo = (x_a.clone(), omega_a, monitor(x_a, omega_a)?);
    let mut hi = (x_b.clone(), omega_b, monitor(x_b, omega_b)?);
    if lo.2 * hi.2 > 0.0 {
        return Err(Error::Continuation("monitor bracket lost".into()));
    }
    for _ in 0..80 {
        if (hi.1 - lo.1).abs() <= opts.bif_tol_omega {
            break;
        }
        let d = x_a.len();
        let mut x_mid = DVector::zeros(d);
        for i in 0..d {
            x_mid[i] = 0.5 * (lo.0[i] + hi.0[i]);
        }
        let omega_mid = 0.5 * (lo.1 + hi.1);
        let (x_c, omega_c, _) = ws.correct(&x_mid, omega_mid, t, opts)?;
        let val = monitor(&x_c, omega_c)?;
        if val * lo.2 <= 0.0 {
            hi = (x_c, omega_c, val);
        } else {
            lo = (x_c, omega_c, val);
        }
    }
    Ok((hi.0, hi.1))
}

/// Multi-start fixed-point search at one frequency: distinct coexisting
/// solutions with their classification, deduplicated and sorted by
/// amplitude.
pub fn find_coexisting(
    family: &SlowFamily<'_>,
    omega: f64,
    n_starts: usize,
    seed: u64,
) -> Result<Vec<(Vec<C64>, FixedPointClass)>> {
    use rand::prelude::*;
    use rand::rngs::StdRng;
    let slow = family.at(omega)?;
    let f_norm: f64 = slow.forcing.iter().map(|f| f.norm()).fold(0.0, f64::max);
    let scale = if f_norm > 0.0 {
        f_norm / slow.lambda[0].re.abs().max(1e-12)
    } else {
        1.0
    };
    let mut rng = StdRng::seed_from_u64(seed);
    let mut found: Vec<(Vec<C64>, FixedPointClass)> = Vec::new();
    let mut seeds: Vec<Vec<C64>> = vec![vec![C64::new(0.0, 0.0); slow.n_pairs]];
    for _ in 0..n_starts {
        seeds.push(
            (0..slow.n_pairs)
                .map(|_| {
                    C64::new(
                        scale * rng.random_range(-1.5..1.5),
                        scale * rng.random_range(-1.5..1.5),
                    )
                })
                .collect(),
        );
    }
    for q0 in seeds {
        let Ok(q) = solve_fixed_point(&slow, &q0, 1e-11, 80) else {
            continue;
        };
        let dup = found.iter().any(|(qf, _)| {
            qf.iter()
                .zip(q.iter())
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt()
                < 1e-6 * scale
        });
        if !dup {
            let class = classify_fixed_point(&slow, &q)?;
            found.push((q, class));
        }
    }
    found.sort_by(|a, b| {
        let na: f64 = a.0.iter().map(|c| c.norm_sqr()).sum();
        let nb: f64 = b.0.iter().map(|c| c.norm_sqr()).sum();
        na.partial_cmp(&nb).unwrap()
    });
    Ok(found)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::duffing::{build_duffing, DuffingSpec};
    use crate::model::{shift_to_equilibrium, TangentMethod};
    use crate::spectral::{select_master, solve_spectrum, to_first_order, MasterSelection};
    use crate::ssm::{compute_autonomous_ssm, SsmOptions};
    use nalgebra::DVector;

    fn duffing_setup(zeta: f64, gamma: f64, order: u32) -> (FirstOrderSystem, SSMModel) {
        let model = build_duffing(&DuffingSpec::with_zeta(1.0, zeta, gamma)).unwrap();
        let shifted =
            shift_to_equilibrium(&model, &DVector::zeros(1), TangentMethod::Auto).unwrap();
        let sys = to_first_order(&shifted).unwrap();
        let spectrum = solve_spectrum(&sys, 2).unwrap();
        let master = select_master(&spectrum, &MasterSelection::default()).unwrap();
        let ssm = compute_autonomous_ssm(&sys, &master, order, &SsmOptions::default()).unwrap();
        (sys, ssm)
    }

    fn duffing_output() -> Vec<OutputDof> {
        vec![OutputDof {
            name: "x".into(),
            index: 0,
        }]
    }

    #[test]
    fn small_eps_collapses_onto_linear_frf() {
        let (sys, ssm) = duffing_setup(0.01, 0.5, 5);
        let eps = 2e-5; // peak amplitude ≈ 1e-3
        let opts = FrcOptions {
            h_max: 0.01,
            ..FrcOptions::default()
        };
        let frc = continue_frc(&sys, &ssm, eps, (0.9, 1.1), &duffing_output(), &opts).unwrap();
        assert!(frc.points.len() > 50, "continuation produced {} points", frc.points.len());
        let c = 2.0 * 0.01;
        let mut worst = 0.0_f64;
        for pt in &frc.points {
            let w = pt.omega;
            let frf = eps / ((1.0 - w * w).powi(2) + (c * w).powi(2)).sqrt();
            worst = worst.max((pt.amplitudes[0] - frf).abs() / frf);
            assert!(pt.stable, "linear-regime FRC must be stable everywhere");
        }
        assert!(worst < 0.01, "linear limit deviation {worst:.3e}");
        assert!(frc.saddle_nodes().is_empty());
    }

    #[test]
    fn duffing_above_critical_has_two_folds_and_unstable_middle() {
        let (sys, ssm) = duffing_setup(0.01, 0.5, 5);
        let eps = 0.01;
        let frc = continue_frc(&sys, &ssm, eps, (0.9, 1.35), &duffing_output(), &FrcOptions::default())
            .unwrap();
        let sns = frc.saddle_nodes();
        assert_eq!(sns.len(), 2, "expected exactly 2 folds, got {}", sns.len());
        // Stability pattern along the branch: stable – unstable – stable.
        let flags: Vec<bool> = frc.points.iter().map(|p| p.stable).collect();
        let mut transitions = Vec::new();
        for w in flags.windows(2) {
            if w[0] != w[1] {
                transitions.push(w[1]);
            }
        }
        assert_eq!(transitions.len(), 2, "stability must switch exactly twice");
        assert!(flags[0], "branch starts stable");
        assert!(*flags.last().unwrap(), "branch ends stable");
        // Stability switches only at marked bifurcation points: check the
        // neighbors of each switch location contain a marker.
        for (i, w) in frc.points.windows(2).enumerate() {
            if w[0].stable != w[1].stable {
                let near_marker = frc.points[i.saturating_sub(1)..(i + 3).min(frc.points.len())]
                    .iter()
                    .any(|p| p.bifurcation != Bifurcation::None);
                assert!(near_marker, "unmarked stability change near Ω = {}", w[1].omega);
            }
        }
    }

    #[test]
    fn coexistence_inside_the_bistable_window() {
        let (sys, ssm) = duffing_setup(0.01, 0.5, 5);
        let eps = 0.01;
        let family = SlowFamily::new(&sys, &ssm, eps);
        let frc = continue_frc(&sys, &ssm, eps, (0.9, 1.35), &duffing_output(), &FrcOptions::default())
            .unwrap();
        let sns = frc.saddle_nodes();
        let (w1, w2) = (sns[0].omega, sns[1].omega);
        let mid = 0.5 * (w1 + w2);
        let sols = find_coexisting(&family, mid, 120, 7).unwrap();
        assert_eq!(sols.len(), 3, "bistable window must hold 3 fixed points");
        let stable_count = sols.iter().filter(|(_, c)| c.stable).count();
        assert_eq!(stable_count, 2);
    }
}
