//! Full-order reference solutions: implicit time integration of the shifted
//! second-order system, steady-state extraction, and quantitative
//! ROM-versus-full comparisons.
//!
//! The integrator is the generalized-α scheme with a spectral radius
//! parameter ρ∞ (default 0.9: controllable high-frequency dissipation
//! without touching the resonance physics) and a full Newton solve of the
//! dynamic balance at every step. The Coriolis matrix enters the
//! velocity-proportional term exactly as C + G.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::model::ShiftedModel;
use crate::reduced::continuation::{Frc, SlowFamily};
use crate::reduced::{solve_fixed_point, to_physical_with};
use crate::spectral::FirstOrderSystem;
use crate::ssm::SSMModel;

#[derive(Debug, Clone)]
pub struct IntegratorOptions {
    /// Spectral radius at infinite frequency (1.0 = no dissipation).
    pub rho_inf: f64,
    pub steps_per_period: usize,
    /// Newton tolerance on the force residual.
    pub newton_tol: f64,
    pub max_newton: usize,
    /// Emergency step-halving floor, as a fraction of the nominal step.
    pub min_step_fraction: f64,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            rho_inf: 0.9,
            steps_per_period: 200,
            newton_tol: 1e-10,
            max_newton: 25,
            min_step_fraction: 1.0 / 64.0,
        }
    }
}

#[derive(Debug, Clone)]
pub enum InitialCondition {
    Zero,
    /// Explicit (displacement, velocity).
    State(DVector<f64>, DVector<f64>),
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub displacements: Vec<DVector<f64>>,
    pub velocities: Vec<DVector<f64>>,
    pub omega: f64,
    pub eps: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Integrate the shifted system under ε·f_load·cos(Ωt) up to `t_end`.
pub fn integrate_full(
    shifted: &ShiftedModel,
    omega: f64,
    eps: f64,
    t_end: f64,
    init: &InitialCondition,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    let n = shifted.n();
    let m = &shifted.model.mass;
    let c_total = &shifted.model.damping + &shifted.model.coriolis;
    let k_t = &shifted.k_t;
    let load = &shifted.model.load_pattern;

    let rho = opts.rho_inf;
    let alpha_m = (2.0 * rho - 1.0) / (rho + 1.0);
    let alpha_f = rho / (rho + 1.0);
    let gamma = 0.5 - alpha_m + alpha_f;
    let beta = 0.25 * (1.0 - alpha_m + alpha_f).powi(2);

    let period = 2.0 * std::f64::consts::PI / omega;
    let h_nominal = period / opts.steps_per_period as f64;
    let h_min = h_nominal * opts.min_step_fraction;

    let (mut d, mut v) = match init {
        InitialCondition::Zero => (DVector::zeros(n), DVector::zeros(n)),
        InitialCondition::State(d0, v0) => (d0.clone(), v0.clone()),
    };

    let f_ext = |t: f64| -> DVector<f64> { load * (eps * (omega * t).cos()) };
    let internal = |u: &DVector<f64>| -> DVector<f64> { k_t * u + shifted.g_nl.eval_real(u) };
    let tangent = |u: &DVector<f64>| -> DMatrix<f64> {
        match shifted.model.internal.tangent(&(u + &shifted.u0)) {
            Some(kt) => kt,
            None => crate::model::fd_jacobian(
                shifted.model.internal.as_ref(),
                &(u + &shifted.u0),
                1e-7 * (1.0 + u.amax()),
            ),
        }
    };

    // Consistent initial acceleration.
    let mut a = m
        .clone()
        .lu()
        .solve(&(f_ext(0.0) - &c_total * &v - internal(&d)))
        .ok_or_else(|| Error::Integration("mass matrix is singular".into()))?;

    let force_scale = (eps * load.norm()).max(1e-300);
    let mut t = 0.0;
    let mut traj = Trajectory {
        times: vec![0.0],
        displacements: vec![d.clone()],
        velocities: vec![v.clone()],
        omega,
        eps,
    };

    while t < t_end - 1e-12 * t_end.max(1.0) {
        let mut h = h_nominal.min(t_end - t);
        loop {
            // Newton on the end-step acceleration, with backtracking: full
            // steps overshoot when the membrane stiffening turns hard
            // within one load increment.
            let residual_at = |a_new: &DVector<f64>| -> (DVector<f64>, f64, f64) {
                let d_new = &d + &v * h + (&a * (0.5 - beta) + a_new * beta) * (h * h);
                let v_new = &v + (&a * (1.0 - gamma) + a_new * gamma) * h;
                let a_mid = a_new * (1.0 - alpha_m) + &a * alpha_m;
                let v_mid = &v_new * (1.0 - alpha_f) + &v * alpha_f;
                let d_mid = &d_new * (1.0 - alpha_f) + &d * alpha_f;
                let t_mid = t + (1.0 - alpha_f) * h;
                let residual = m * &a_mid + &c_total * &v_mid + internal(&d_mid) - f_ext(t_mid);
                let scale = force_scale
                    .max((m * &a_mid).norm())
                    .max(internal(&d_mid).norm())
                    .max(1.0e-300);
                let rn = residual.norm();
                (residual, rn, scale)
            };
            let mut a_new = a.clone();
            let mut converged = false;
            let (mut residual, mut res_norm, mut scale) = residual_at(&a_new);
            for _ in 0..opts.max_newton {
                if res_norm <= opts.newton_tol * scale {
                    converged = true;
                    break;
                }
                let d_mid = {
                    let d_new = &d + &v * h + (&a * (0.5 - beta) + &a_new * beta) * (h * h);
                    &d_new * (1.0 - alpha_f) + &d * alpha_f
                };
                let k_tan = tangent(&d_mid);
                let jac = m * (1.0 - alpha_m)
                    + &c_total * ((1.0 - alpha_f) * gamma * h)
                    + k_tan * ((1.0 - alpha_f) * beta * h * h);
                let delta = jac.lu().solve(&residual).ok_or_else(|| {
                    Error::Integration(format!("singular dynamic Jacobian at t = {t:.6e}"))
                })?;
                let mut alpha_ls = 1.0;
                let mut advanced = false;
                for _ in 0..8 {
                    let trial = &a_new - &delta * alpha_ls;
                    let (r_t, rn_t, sc_t) = residual_at(&trial);
                    if rn_t < res_norm || rn_t <= opts.newton_tol * sc_t {
                        a_new = trial;
                        residual = r_t;
                        res_norm = rn_t;
                        scale = sc_t;
                        advanced = true;
                        break;
                    }
                    alpha_ls *= 0.5;
                }
                if !advanced {
                    break;
                }
            }
            if converged {
                let d_new = &d + &v * h + (&a * (0.5 - beta) + &a_new * beta) * (h * h);
                let v_new = &v + (&a * (1.0 - gamma) + &a_new * gamma) * h;
                a = a_new;
                d = d_new;
                v = v_new;
            }
            if converged {
                t += h;
                traj.times.push(t);
                traj.displacements.push(d.clone());
                traj.velocities.push(v.clone());
                break;
            }
            h *= 0.5;
            if h < h_min {
                if std::env::var("SSMROT_INTEGRATOR_DEBUG").is_ok() {
                    eprintln!(
                        "integrator stall: t = {t:.6e}, h = {h:.3e}, ‖d‖∞ = {:.3e}, ‖v‖∞ = {:.3e}, ‖a‖∞ = {:.3e}",
                        d.amax(),
                        v.amax(),
                        a.amax()
                    );
                }
                return Err(Error::Integration(format!(
                    "Newton diverged at t = {t:.6e}; step fell below {h_min:.3e}"
                )));
            }
        }
        if !d.iter().all(|x| x.is_finite()) {
            return Err(Error::Integration(format!("non-finite state at t = {t:.6e}")));
        }
    }
    Ok(traj)
}

/// Total mechanical energy of the shifted conservative system.
pub fn total_energy(shifted: &ShiftedModel, d: &DVector<f64>, v: &DVector<f64>) -> f64 {
    let kinetic = 0.5 * v.dot(&(&shifted.model.mass * v));
    // Potential about the equilibrium: ½uᵀK_t u + quadratic/3 + cubic/4 of
    // g_nl (exact for the polynomial force).
    let g_plus = shifted.g_nl.eval_real(d);
    let g_minus = shifted.g_nl.eval_real(&(-d));
    let quad = (&g_plus + &g_minus) * 0.5;
    let cubic = (&g_plus - &g_minus) * 0.5;
    let potential = 0.5 * d.dot(&(&shifted.k_t * d)) + d.dot(&quad) / 3.0 + d.dot(&cubic) / 4.0;
    kinetic + potential
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SteadyState {
    pub amplitude: f64,
    pub converged: bool,
    /// Per-period maxima over the examined tail.
    pub period_maxima: Vec<f64>,
}

/// Amplitude over the last `n_tail` forcing periods; converged when
/// consecutive per-period maxima agree to 0.5%.
pub fn steady_state_amplitude(
    traj: &Trajectory,
    output_dof: usize,
    n_tail: usize,
) -> Result<SteadyState> {
    if traj.omega <= 0.0 {
        return Err(Error::InvalidSpec("trajectory lacks a forcing frequency".into()));
    }
    let period = 2.0 * std::f64::consts::PI / traj.omega;
    let t_end = *traj.times.last().ok_or_else(|| {
        Error::InvalidSpec("empty trajectory".into())
    })?;
    let span = n_tail as f64 * period;
    if t_end < 2.0 * span {
        return Err(Error::InvalidSpec(format!(
            "trajectory spans {:.3} periods, need ≥ {} for the tail check",
            t_end / period,
            2 * n_tail
        )));
    }
    let mut maxima = vec![0.0_f64; n_tail];
    for (i, &t) in traj.times.iter().enumerate() {
        if t < t_end - span {
            continue;
        }
        let k = (((t - (t_end - span)) / period) as usize).min(n_tail - 1);
        maxima[k] = maxima[k].max(traj.displacements[i][output_dof].abs());
    }
    let amplitude = maxima.iter().fold(0.0_f64, |a, &b| a.max(b));
    let mut converged = true;
    for w in maxima.windows(2) {
        let scale = w[0].abs().max(w[1].abs());
        if scale > 0.0 && (w[1] - w[0]).abs() / scale > 0.005 {
            converged = false;
        }
    }
    Ok(SteadyState {
        amplitude,
        converged,
        period_maxima: maxima,
    })
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ProbeResult {
    pub omega: f64,
    pub rom_amplitude: f64,
    pub full_amplitude: f64,
    pub relative_error: f64,
    pub converged: bool,
    pub rom_seconds: f64,
    pub full_seconds: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct FrcComparison {
    pub probes: Vec<ProbeResult>,
    pub max_relative_error: f64,
    pub mean_relative_error: f64,
    pub inconclusive: usize,
}

/// Options for the probe comparison.
#[derive(Debug, Clone)]
pub struct CompareOptions {
    pub integrator: IntegratorOptions,
    /// Periods to integrate before examining the tail.
    pub settle_periods: usize,
    pub tail_periods: usize,
    /// Output DOF used for amplitudes.
    pub output_dof: usize,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self {
            integrator: IntegratorOptions::default(),
            settle_periods: 20,
            tail_periods: 4,
            output_dof: 0,
        }
    }
}

/// Compare FRC amplitudes against full-model steady states at the probe
/// frequencies. Each probe targets the stable branch point nearest in
/// frequency (per stable segment, so both branches of a bistable window are
/// reachable); the full model starts from the ROM-predicted state, which
/// settles in a few periods instead of hundreds.
pub fn compare_frc(
    frc: &Frc,
    shifted: &ShiftedModel,
    sys: &FirstOrderSystem,
    ssm: &SSMModel,
    probe_frequencies: &[f64],
    eps: f64,
    opts: &CompareOptions,
) -> Result<FrcComparison> {
    let family = SlowFamily::new(sys, ssm, eps);
    let out_dof_idx = frc
        .output_dofs
        .get(opts.output_dof)
        .map(|d| d.index)
        .ok_or_else(|| Error::InvalidSpec("output DOF index out of range".into()))?;

    let mut probes = Vec::new();
    for &omega_star in probe_frequencies {
        // Stable branch candidates near the probe: nearest point of every
        // stable segment whose frequency window contains ω*.
        let mut segments: Vec<Vec<&crate::reduced::continuation::FrcPoint>> = Vec::new();
        let mut segment: Vec<&crate::reduced::continuation::FrcPoint> = Vec::new();
        for pt in &frc.points {
            if pt.stable {
                segment.push(pt);
            } else if !segment.is_empty() {
                segments.push(std::mem::take(&mut segment));
            }
        }
        if !segment.is_empty() {
            segments.push(segment);
        }
        let mut candidates: Vec<&crate::reduced::continuation::FrcPoint> = Vec::new();
        for seg in &segments {
            let best = seg
                .iter()
                .min_by(|a, b| {
                    (a.omega - omega_star)
                        .abs()
                        .partial_cmp(&(b.omega - omega_star).abs())
                        .unwrap()
                })
                .unwrap();
            let seg_lo = seg.iter().map(|p| p.omega).fold(f64::INFINITY, f64::min);
            let seg_hi = seg.iter().map(|p| p.omega).fold(f64::NEG_INFINITY, f64::max);
            let tol = 0.02 * (seg_hi - seg_lo).abs().max(1e-9 * omega_star);
            if best.omega >= seg_lo - tol
                && best.omega <= seg_hi + tol
                && omega_star >= seg_lo - tol
                && omega_star <= seg_hi + tol
            {
                candidates.push(best);
            }
        }
        // Deduplicate by amplitude.
        candidates.dedup_by(|a, b| {
            let s = a.amplitudes[opts.output_dof].max(b.amplitudes[opts.output_dof]);
            s > 0.0 && (a.amplitudes[opts.output_dof] - b.amplitudes[opts.output_dof]).abs() / s < 0.01
        });

        for cand in candidates {
            let rom_start = Instant::now();
            // Polish the fixed point at exactly ω*.
            let (slow, na) = family.at_with_fields(omega_star)?;
            let Ok(q) = solve_fixed_point(&slow, &cand.q, 1e-11, 60) else {
                probes.push(ProbeResult {
                    omega: omega_star,
                    rom_amplitude: cand.amplitudes[opts.output_dof],
                    full_amplitude: f64::NAN,
                    relative_error: f64::NAN,
                    converged: false,
                    rom_seconds: rom_start.elapsed().as_secs_f64(),
                    full_seconds: 0.0,
                });
                continue;
            };
            let resp = to_physical_with(ssm, &slow, Some(&na), eps, &q, &[out_dof_idx], 64)?;
            let rom_amp = resp.amplitudes[0];
            let rom_seconds = rom_start.elapsed().as_secs_f64();

            let full_start = Instant::now();
            let n = shifted.n();
            let d0 = DVector::from_fn(n, |i, _| resp.initial_state[i]);
            let v0 = DVector::from_fn(n, |i, _| resp.initial_state[n + i]);
            let period = 2.0 * std::f64::consts::PI / omega_star;
            let t_end = opts.settle_periods as f64 * period;
            let traj = integrate_full(
                shifted,
                omega_star,
                eps,
                t_end,
                &InitialCondition::State(d0, v0),
                &opts.integrator,
            )?;
            let steady = steady_state_amplitude(&traj, out_dof_idx, opts.tail_periods)?;
            let full_seconds = full_start.elapsed().as_secs_f64();

            let rel = (rom_amp - steady.amplitude).abs() / steady.amplitude.abs().max(1e-300);
            probes.push(ProbeResult {
                omega: omega_star,
                rom_amplitude: rom_amp,
                full_amplitude: steady.amplitude,
                relative_error: if steady.converged { rel } else { f64::NAN },
                converged: steady.converged,
                rom_seconds,
                full_seconds,
            });
        }
    }

    let conclusive: Vec<&ProbeResult> = probes.iter().filter(|p| p.converged).collect();
    let max_relative_error = conclusive
        .iter()
        .map(|p| p.relative_error)
        .fold(0.0_f64, f64::max);
    let mean_relative_error = if conclusive.is_empty() {
        f64::NAN
    } else {
        conclusive.iter().map(|p| p.relative_error).sum::<f64>() / conclusive.len() as f64
    };
    Ok(FrcComparison {
        inconclusive: probes.len() - conclusive.len(),
        probes,
        max_relative_error,
        mean_relative_error,
    })
}

/// Reconstruct the ROM-predicted state at phase 0 for integrator seeding
/// (exposed for the CLI's validation pipeline).
pub fn ssm_initial_state(
    sys: &FirstOrderSystem,
    ssm: &SSMModel,
    eps: f64,
    omega: f64,
    q: &[C64],
) -> Result<DVector<f64>> {
    let family = SlowFamily::new(sys, ssm, eps);
    let (slow, na) = family.at_with_fields(omega)?;
    let resp = to_physical_with(ssm, &slow, Some(&na), eps, q, &[0], 16)?;
    Ok(resp.initial_state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::beam::{build_rotating_beam, BeamSpec};
    use crate::model::duffing::{build_duffing, DuffingSpec};
    use crate::model::{shift_to_equilibrium, TangentMethod};

    fn duffing_shifted(zeta: f64, gamma: f64) -> ShiftedModel {
        let model = build_duffing(&DuffingSpec::with_zeta(1.0, zeta, gamma)).unwrap();
        shift_to_equilibrium(&model, &DVector::zeros(1), TangentMethod::Auto).unwrap()
    }

    #[test]
    fn linear_oscillator_matches_closed_form_frf() {
        let shifted = duffing_shifted(0.05, 0.0);
        let omega = 0.85;
        let eps = 1e-3;
        let period = 2.0 * std::f64::consts::PI / omega;
        let traj = integrate_full(
            &shifted,
            omega,
            eps,
            80.0 * period,
            &InitialCondition::Zero,
            &IntegratorOptions::default(),
        )
        .unwrap();
        let steady = steady_state_amplitude(&traj, 0, 5).unwrap();
        let c = 2.0 * 0.05;
        let frf = eps / ((1.0 - omega * omega).powi(2) + (c * omega).powi(2)).sqrt();
        let rel = (steady.amplitude - frf).abs() / frf;
        assert!(steady.converged);
        assert!(rel < 1e-3, "steady amplitude off the FRF by {rel:.3e}");
    }

    #[test]
    fn conservative_beam_preserves_energy() {
        // Ω̂ = 0, no damping: energy drift < 0.1% over 10 periods of free
        // vibration at moderate amplitude.
        let spec = BeamSpec {
            n_elements: 6,
            spin_speed: 0.0,
            include_coriolis: false,
            ..BeamSpec::default()
        };
        let model = build_rotating_beam(&spec).unwrap();
        let shifted =
            shift_to_equilibrium(&model, &DVector::zeros(model.n), TangentMethod::Auto).unwrap();
        let w1 = shifted.natural_frequencies().unwrap()[0];
        // Initial displacement along the first mode, tip deflection ≈ 5 cm.
        let (_, modes) = crate::linalg::sym_gen_eigen(&shifted.k_t, &shifted.model.mass).unwrap();
        let tip = model.output_dofs[0].index;
        let mode = modes.column(0).clone_owned();
        let d0 = &mode * (0.005 / mode[tip].abs());
        let v0 = DVector::zeros(model.n);
        let e0 = total_energy(&shifted, &d0, &v0);

        let period = 2.0 * std::f64::consts::PI / w1;
        let opts = IntegratorOptions {
            rho_inf: 1.0,
            steps_per_period: 400,
            ..IntegratorOptions::default()
        };
        let traj = integrate_full(
            &shifted,
            w1, // forcing frequency only sets the step size; ε = 0
            0.0,
            10.0 * period,
            &InitialCondition::State(d0, v0),
            &opts,
        )
        .unwrap();
        let mut worst = 0.0_f64;
        for i in 0..traj.len() {
            let e = total_energy(&shifted, &traj.displacements[i], &traj.velocities[i]);
            worst = worst.max((e - e0).abs() / e0);
        }
        assert!(worst < 1e-3, "energy drift {worst:.3e}");
    }

    #[test]
    fn integrator_is_second_order() {
        let shifted = duffing_shifted(0.05, 0.0);
        let omega = 1.3;
        let eps = 1e-3;
        let period = 2.0 * std::f64::consts::PI / omega;
        let c = 2.0 * 0.05;
        let exact = eps / ((1.0 - omega * omega).powi(2) + (c * omega).powi(2)).sqrt();
        let mut errs = Vec::new();
        for steps in [25usize, 50, 100] {
            let opts = IntegratorOptions {
                steps_per_period: steps,
                ..IntegratorOptions::default()
            };
            let traj = integrate_full(
                &shifted,
                omega,
                eps,
                80.0 * period,
                &InitialCondition::Zero,
                &opts,
            )
            .unwrap();
            let steady = steady_state_amplitude(&traj, 0, 5).unwrap();
            errs.push((steady.amplitude - exact).abs());
        }
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "errors must shrink: {errs:?}");
        // Amplitude error mixes integration and sampling bias, both O(h²);
        // judge the order across the full refinement.
        let order = (errs[0] / errs[2]).log2() / 2.0;
        assert!(order > 1.8, "observed order {order:.2} (errors {errs:?})");
    }

    #[test]
    fn steady_state_flags() {
        // Pure sinusoid: amplitude 1, converged.
        let omega = 2.0;
        let period = 2.0 * std::f64::consts::PI / omega;
        let times: Vec<f64> = (0..=4000).map(|i| i as f64 * period / 200.0).collect();
        let disp: Vec<DVector<f64>> = times
            .iter()
            .map(|&t| DVector::from_element(1, (omega * t).sin()))
            .collect();
        let traj = Trajectory {
            velocities: disp.clone(),
            times,
            displacements: disp,
            omega,
            eps: 1.0,
        };
        let s = steady_state_amplitude(&traj, 0, 4).unwrap();
        assert!((s.amplitude - 1.0).abs() < 1e-6);
        assert!(s.converged);

        // Linearly growing envelope: not converged.
        let times: Vec<f64> = (0..=4000).map(|i| i as f64 * period / 200.0).collect();
        let disp: Vec<DVector<f64>> = times
            .iter()
            .map(|&t| DVector::from_element(1, t * (omega * t).sin()))
            .collect();
        let traj = Trajectory {
            velocities: disp.clone(),
            times,
            displacements: disp,
            omega,
            eps: 1.0,
        };
        let s = steady_state_amplitude(&traj, 0, 4).unwrap();
        assert!(!s.converged);

        // Zero trajectory: amplitude 0, converged.
        let times: Vec<f64> = (0..=4000).map(|i| i as f64 * period / 200.0).collect();
        let disp: Vec<DVector<f64>> = times.iter().map(|_| DVector::zeros(1)).collect();
        let traj = Trajectory {
            velocities: disp.clone(),
            times,
            displacements: disp,
            omega,
            eps: 0.0,
        };
        let s = steady_state_amplitude(&traj, 0, 4).unwrap();
        assert_eq!(s.amplitude, 0.0);
        assert!(s.converged);
    }

    #[test]
    fn insufficient_span_rejected() {
        let omega = 1.0;
        let traj = Trajectory {
            times: vec![0.0, 1.0],
            displacements: vec![DVector::zeros(1), DVector::zeros(1)],
            velocities: vec![DVector::zeros(1), DVector::zeros(1)],
            omega,
            eps: 0.0,
        };
        assert!(steady_state_amplitude(&traj, 0, 4).is_err());
    }
}
