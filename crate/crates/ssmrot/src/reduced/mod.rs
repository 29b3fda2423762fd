//! Predictions from the SSM-based ROM: the rotating-frame slow system whose
//! fixed points are the forced periodic orbits, backbone curves, forced
//! response curves via continuation, stability classification, and the
//! reconstruction of physical responses.

pub mod backbone;
pub mod continuation;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, C64};
use crate::ssm::{monomial, MultiIndex, SSMModel};

pub use backbone::{backbone, BackboneCurve, BackbonePoint};
pub use continuation::{continue_frc, find_coexisting, Frc, FrcOptions, FrcPoint};

/// Autonomous slow dynamics in the frame co-rotating with the forcing:
/// q̇_k = (λ_k − i ν_k Ω) q_k + Σ γ_{k,m} (q, q̄)^m + f_k for the K pair
/// leaders; the conjugate equations are implicit.
#[derive(Debug, Clone)]
pub struct SlowReducedSystem {
    pub n_pairs: usize,
    pub omega: f64,
    pub lambda: Vec<C64>,
    /// Rotation multiple ν_k = η_k / η_ref of each pair.
    pub nu: Vec<f64>,
    /// Resonant monomial terms (pair k, multi-index over interleaved slots,
    /// coefficient).
    pub gamma: Vec<(usize, MultiIndex, C64)>,
    /// ε·s₀⁺ on each pair leader.
    pub forcing: Vec<C64>,
    pub eta: Vec<u32>,
    pub eta_ref: u32,
}

impl SlowReducedSystem {
    pub fn real_dim(&self) -> usize {
        2 * self.n_pairs
    }

    /// Interleaved p-vector from leader coordinates.
    pub fn interleave(&self, q: &[C64]) -> Vec<C64> {
        let mut p = Vec::with_capacity(2 * q.len());
        for &qk in q {
            p.push(qk);
            p.push(qk.conj());
        }
        p
    }

    /// Complex vector field at the leader coordinates.
    pub fn field(&self, q: &[C64]) -> Vec<C64> {
        let p = self.interleave(q);
        let mut out: Vec<C64> = (0..self.n_pairs)
            .map(|k| (self.lambda[k] - C64::new(0.0, self.nu[k] * self.omega)) * q[k] + self.forcing[k])
            .collect();
        for (k, m, g) in &self.gamma {
            out[*k] += *g * monomial(&p, m);
        }
        out
    }

    /// Wirtinger derivatives (∂G_k/∂q_j, ∂G_k/∂q̄_j) at q.
    fn wirtinger(&self, q: &[C64]) -> (DMatrix<C64>, DMatrix<C64>) {
        let kk = self.n_pairs;
        let p = self.interleave(q);
        let mut dq = DMatrix::from_element(kk, kk, C64::new(0.0, 0.0));
        let mut dqbar = DMatrix::from_element(kk, kk, C64::new(0.0, 0.0));
        for k in 0..kk {
            dq[(k, k)] = self.lambda[k] - C64::new(0.0, self.nu[k] * self.omega);
        }
        for (k, m, g) in &self.gamma {
            for j in 0..kk {
                // Slot 2j carries q_j, slot 2j+1 carries q̄_j.
                let e_q = m.0[2 * j];
                if e_q > 0 {
                    let mut red = m.clone();
                    red.0[2 * j] -= 1;
                    dq[(*k, j)] += *g * (e_q as f64) * monomial(&p, &red);
                }
                let e_qb = m.0[2 * j + 1];
                if e_qb > 0 {
                    let mut red = m.clone();
                    red.0[2 * j + 1] -= 1;
                    dqbar[(*k, j)] += *g * (e_qb as f64) * monomial(&p, &red);
                }
            }
        }
        (dq, dqbar)
    }

    /// Realified vector field on x = (Re q_1, Im q_1, …).
    pub fn real_field(&self, x: &DVector<f64>) -> DVector<f64> {
        let q = unpack(x);
        let g = self.field(&q);
        let mut out = DVector::zeros(self.real_dim());
        for (k, gk) in g.iter().enumerate() {
            out[2 * k] = gk.re;
            out[2 * k + 1] = gk.im;
        }
        out
    }

    /// Realified Jacobian (2K × 2K).
    pub fn real_jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let q = unpack(x);
        let (a, b) = self.wirtinger(&q);
        let kk = self.n_pairs;
        let mut jac = DMatrix::zeros(2 * kk, 2 * kk);
        for k in 0..kk {
            for j in 0..kk {
                let apb = a[(k, j)] + b[(k, j)];
                let amb = a[(k, j)] - b[(k, j)];
                jac[(2 * k, 2 * j)] = apb.re;
                jac[(2 * k, 2 * j + 1)] = -amb.im;
                jac[(2 * k + 1, 2 * j)] = apb.im;
                jac[(2 * k + 1, 2 * j + 1)] = amb.re;
            }
        }
        jac
    }
}

pub(crate) fn unpack(x: &DVector<f64>) -> Vec<C64> {
    (0..x.len() / 2)
        .map(|k| C64::new(x[2 * k], x[2 * k + 1]))
        .collect()
}

pub(crate) fn pack(q: &[C64]) -> DVector<f64> {
    let mut x = DVector::zeros(2 * q.len());
    for (k, qk) in q.iter().enumerate() {
        x[2 * k] = qk.re;
        x[2 * k + 1] = qk.im;
    }
    x
}

/// Build the rotating-frame slow system from a ROM with its time-periodic
/// part attached at Ω.
pub fn build_slow_system(ssm: &SSMModel, omega: f64) -> Result<SlowReducedSystem> {
    let na = ssm
        .nonauto
        .as_ref()
        .ok_or_else(|| Error::Internal("slow system requires the non-autonomous fields".into()))?;
    build_slow_from_parts(ssm, na, ssm.eps, omega)
}

/// Same, with the Ω-dependent fields supplied externally (continuation
/// recomputes them per step while the autonomous expansion is reused).
pub fn build_slow_from_parts(
    ssm: &SSMModel,
    na: &crate::ssm::NonAutonomous,
    eps: f64,
    omega: f64,
) -> Result<SlowReducedSystem> {
    if (na.omega - omega).abs() > 1e-12 * omega.abs().max(1.0) {
        return Err(Error::Internal(format!(
            "non-autonomous fields were computed at Ω = {}, requested {}",
            na.omega, omega
        )));
    }
    assemble_slow(ssm, omega, &na.resonant_pairs, &na.s0_plus, eps)
}

/// Core assembly: needs only the resonant set and the s₀⁺ projections,
/// which cost O(n) — the slow dynamics never touches the x₀ solve.
pub fn assemble_slow(
    ssm: &SSMModel,
    omega: f64,
    resonant_pairs: &[usize],
    s0_plus: &crate::linalg::CVector,
    eps: f64,
) -> Result<SlowReducedSystem> {
    let n_pairs = ssm.master.n_pairs();
    let eta = ssm.master.eta.clone();
    // η_ref: the ratio of the externally forced pair (they must agree when
    // several pairs are forced, as in 1:1:1 systems).
    let eta_ref = if resonant_pairs.is_empty() {
        eta[0]
    } else {
        let r = eta[resonant_pairs[0]];
        for &k in resonant_pairs {
            if eta[k] != r {
                return Err(Error::Internal(format!(
                    "externally resonant pairs carry mixed ratios η = {:?}",
                    resonant_pairs.iter().map(|&k| eta[k]).collect::<Vec<_>>()
                )));
            }
        }
        r
    };

    let mut gamma = Vec::new();
    for (m, c) in &ssm.r.coeffs {
        if m.degree() < 2 {
            continue;
        }
        for k in 0..n_pairs {
            let g = c[2 * k];
            if g == C64::new(0.0, 0.0) {
                continue;
            }
            // Autonomy bookkeeping in exact integer arithmetic: the monomial
            // must rotate with the equation, Σ m_i σ_i η_i = η_k.
            let mut rot: i64 = 0;
            for (slot, &e) in m.0.iter().enumerate() {
                let sign = if slot % 2 == 0 { 1 } else { -1 };
                rot += sign * (e as i64) * (eta[slot / 2] as i64);
            }
            if rot != eta[k] as i64 {
                return Err(Error::Internal(format!(
                    "resonant monomial {m:?} in pair-{k} equation rotates at {rot}·Ω/{eta_ref}, \
                     equation rotates at {}: resonance-set inconsistency upstream",
                    eta[k]
                )));
            }
            gamma.push((k, m.clone(), g));
        }
    }

    // Forcing enters the leader equations that are externally resonant;
    // their rotation must match e^{iΩt} exactly.
    let mut forcing = vec![C64::new(0.0, 0.0); n_pairs];
    for &k in resonant_pairs {
        if eta[k] != eta_ref {
            return Err(Error::Internal(
                "forced pair rotates against the reference ratio".into(),
            ));
        }
        forcing[k] = s0_plus[2 * k] * eps;
    }

    Ok(SlowReducedSystem {
        n_pairs,
        omega,
        lambda: (0..n_pairs).map(|k| ssm.master.pairs[k].lambda).collect(),
        nu: (0..n_pairs)
            .map(|k| eta[k] as f64 / eta_ref as f64)
            .collect(),
        gamma,
        forcing,
        eta,
        eta_ref,
    })
}

/// Stability and bifurcation-monitor data of one fixed point.
#[derive(Debug, Clone)]
pub struct FixedPointClass {
    pub stable: bool,
    /// Eigenvalues of the realified Jacobian, sorted by descending real part.
    pub jacobian_eigenvalues: Vec<C64>,
    /// det(J): sign change flags a saddle-node.
    pub det: f64,
    /// Largest real part among complex (oscillatory) eigenvalue pairs:
    /// sign change flags a Hopf point.
    pub hopf_monitor: f64,
}

/// Classify a fixed point of the slow system (‖field‖ must already be small).
pub fn classify_fixed_point(slow: &SlowReducedSystem, q: &[C64]) -> Result<FixedPointClass> {
    let x = pack(q);
    let jac = slow.real_jacobian(&x);
    let eig = linalg::real_eigen(&jac)?;
    let mut vals = eig.values;
    vals.sort_by(|a, b| b.re.partial_cmp(&a.re).unwrap());
    let stable = vals.iter().all(|l| l.re < 0.0);
    let det = jac.determinant();
    let im_floor = 1e-9
        * vals
            .iter()
            .map(|l| l.norm())
            .fold(0.0_f64, f64::max)
            .max(1e-300);
    let hopf_monitor = vals
        .iter()
        .filter(|l| l.im.abs() > im_floor)
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(FixedPointClass {
        stable,
        jacobian_eigenvalues: vals,
        det,
        hopf_monitor: if hopf_monitor.is_finite() {
            hopf_monitor
        } else {
            // No oscillatory directions: keep the monitor away from zero.
            -1.0
        },
    })
}

/// Newton solve for a fixed point of the slow system from an initial guess.
pub fn solve_fixed_point(
    slow: &SlowReducedSystem,
    q0: &[C64],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<C64>> {
    let mut x = pack(q0);
    let scale = slow
        .forcing
        .iter()
        .map(|f| f.norm())
        .sum::<f64>()
        .max(1e-300);
    let mut f = slow.real_field(&x);
    for _ in 0..max_iter {
        if f.norm() <= tol * scale.max(x.norm() * slow.lambda[0].norm()) {
            return Ok(unpack(&x));
        }
        let jac = slow.real_jacobian(&x);
        let delta = jac
            .lu()
            .solve(&f)
            .ok_or_else(|| Error::Singular("singular Jacobian in fixed-point solve".into()))?;
        // Backtracking keeps the iteration inside the basin for starts far
        // from the root.
        let mut alpha = 1.0;
        let mut advanced = false;
        for _ in 0..6 {
            let trial = &x - &delta * alpha;
            let f_trial = slow.real_field(&trial);
            if f_trial.norm() < f.norm() {
                x = trial;
                f = f_trial;
                advanced = true;
                break;
            }
            alpha *= 0.5;
        }
        if !advanced {
            // Full step as a last resort; Newton may still escape a plateau.
            x -= &delta;
            f = slow.real_field(&x);
        }
    }
    let f = slow.real_field(&x);
    if f.norm() <= tol * scale.max(x.norm() * slow.lambda[0].norm()) {
        Ok(unpack(&x))
    } else {
        Err(Error::Continuation(format!(
            "fixed-point Newton stalled at ‖G‖ = {:.3e}",
            f.norm()
        )))
    }
}

/// Reconstructed periodic response at a fixed point.
#[derive(Debug, Clone)]
pub struct PhysicalResponse {
    pub times: Vec<f64>,
    /// Displacement samples per requested output DOF.
    pub series: Vec<Vec<f64>>,
    /// max |displacement| over the period, per output DOF.
    pub amplitudes: Vec<f64>,
    /// Full state snapshot at t = 0 (length 2n), for integrator seeding.
    pub initial_state: DVector<f64>,
}

/// Map a fixed point back to the physical periodic orbit:
/// p(t) = q·e^{i ν Ω t} componentwise, z(t) = W(p(t)) + ε X₀(Ωt).
/// Reads the time-periodic fields attached to the model.
pub fn to_physical(
    ssm: &SSMModel,
    slow: &SlowReducedSystem,
    q: &[C64],
    output_dofs: &[usize],
    n_phase: usize,
) -> Result<PhysicalResponse> {
    to_physical_with(ssm, slow, ssm.nonauto.as_ref(), ssm.eps, q, output_dofs, n_phase)
}

/// Same, with the Ω-dependent fields supplied externally.
pub fn to_physical_with(
    ssm: &SSMModel,
    slow: &SlowReducedSystem,
    na: Option<&crate::ssm::NonAutonomous>,
    eps: f64,
    q: &[C64],
    output_dofs: &[usize],
    n_phase: usize,
) -> Result<PhysicalResponse> {
    if n_phase < 16 {
        return Err(Error::InvalidSpec(format!("n_phase = {n_phase} < 16")));
    }
    let omega = slow.omega;
    let period = 2.0 * std::f64::consts::PI * slow.eta_ref as f64 / omega;
    let dim = ssm.w.vector_len();
    let n = dim / 2;
    let mut times = Vec::with_capacity(n_phase);
    let mut series = vec![Vec::with_capacity(n_phase); output_dofs.len()];
    let mut amplitudes = vec![0.0_f64; output_dofs.len()];
    let mut initial_state = DVector::zeros(dim);

    for i in 0..n_phase {
        let t = period * i as f64 / n_phase as f64;
        let phi = omega * t;
        let mut p = vec![C64::new(0.0, 0.0); 2 * slow.n_pairs];
        for k in 0..slow.n_pairs {
            let rot = C64::new(0.0, slow.nu[k] * omega * t).exp();
            p[2 * k] = q[k] * rot;
            p[2 * k + 1] = (q[k] * rot).conj();
        }
        let mut z = ssm.w.eval(&p);
        if let (Some(na), true) = (na, eps != 0.0) {
            let e_plus = C64::new(0.0, phi).exp();
            let e_minus = C64::new(0.0, -phi).exp();
            for r in 0..dim {
                z[r] += (na.x0_plus[r] * e_plus + na.x0_minus[r] * e_minus) * eps;
            }
        }
        if i == 0 {
            for r in 0..dim {
                initial_state[r] = z[r].re;
            }
        }
        times.push(t);
        for (oi, &dof) in output_dofs.iter().enumerate() {
            debug_assert!(dof < n, "output DOF indexes the displacement half");
            let val = z[dof].re;
            series[oi].push(val);
            amplitudes[oi] = amplitudes[oi].max(val.abs());
        }
    }
    Ok(PhysicalResponse {
        times,
        series,
        amplitudes,
        initial_state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::duffing::{build_duffing, DuffingSpec};
    use crate::model::{shift_to_equilibrium, TangentMethod};
    use crate::spectral::{select_master, solve_spectrum, to_first_order, MasterSelection};
    use crate::ssm::{compute_autonomous_ssm, compute_nonautonomous, SsmOptions};

    fn duffing_slow(zeta: f64, gamma: f64, omega: f64, eps: f64) -> (SSMModel, SlowReducedSystem) {
        let model = build_duffing(&DuffingSpec::with_zeta(1.0, zeta, gamma)).unwrap();
        let shifted =
            shift_to_equilibrium(&model, &DVector::zeros(1), TangentMethod::Auto).unwrap();
        let sys = to_first_order(&shifted).unwrap();
        let spectrum = solve_spectrum(&sys, 2).unwrap();
        let master = select_master(&spectrum, &MasterSelection::default()).unwrap();
        let mut ssm = compute_autonomous_ssm(&sys, &master, 3, &SsmOptions::default()).unwrap();
        compute_nonautonomous(&mut ssm, &sys, omega, eps).unwrap();
        let slow = build_slow_system(&ssm, omega).unwrap();
        (ssm, slow)
    }

    #[test]
    fn slow_field_is_textbook_form() {
        // Single mode: q̇ = (λ − iΩ)q + γ₁|q|²q + s.
        let (ssm, slow) = duffing_slow(0.001, 0.5, 1.0, 0.01);
        assert_eq!(slow.n_pairs, 1);
        assert_eq!(slow.gamma.len(), 1);
        let (k, m, g) = &slow.gamma[0];
        assert_eq!(*k, 0);
        assert_eq!(m.0, vec![2, 1]);
        let lam = slow.lambda[0];
        let q = C64::new(0.3, -0.2);
        let field = slow.field(&[q]);
        let expected = (lam - C64::new(0.0, slow.omega)) * q
            + *g * q * q * q.conj()
            + slow.forcing[0];
        assert!((field[0] - expected).norm() < 1e-14);
        let _ = ssm;
    }

    #[test]
    fn zero_eps_keeps_origin_fixed() {
        let (_, slow) = duffing_slow(0.001, 0.5, 1.0, 0.0);
        let f = slow.field(&[C64::new(0.0, 0.0)]);
        assert!(f[0].norm() < 1e-16);
        let class = classify_fixed_point(&slow, &[C64::new(0.0, 0.0)]).unwrap();
        assert!(class.stable);
        // Rightmost eigenvalue = Re λ₁ (damped system).
        assert!((class.jacobian_eigenvalues[0].re - slow.lambda[0].re).abs() < 1e-9);
    }

    #[test]
    fn real_jacobian_matches_finite_differences() {
        let (_, slow) = duffing_slow(0.01, 0.5, 1.02, 0.05);
        let x0 = DVector::from_vec(vec![0.21, -0.13]);
        let analytic = slow.real_jacobian(&x0);
        let h = 1e-7;
        let mut fd = DMatrix::zeros(2, 2);
        for j in 0..2 {
            let mut xp = x0.clone();
            let mut xm = x0.clone();
            xp[j] += h;
            xm[j] -= h;
            let fp = slow.real_field(&xp);
            let fm = slow.real_field(&xm);
            for i in 0..2 {
                fd[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        let rel = (&analytic - &fd).norm() / analytic.norm();
        assert!(rel < 1e-7, "Jacobian mismatch {rel:.3e}");
    }

    #[test]
    fn fixed_point_reproduces_linear_response_at_low_eps() {
        let eps = 1e-6;
        let omega = 1.05;
        let (ssm, slow) = duffing_slow(0.01, 0.5, omega, eps);
        let q0 = vec![C64::new(0.0, 0.0)];
        let q = solve_fixed_point(&slow, &q0, 1e-12, 50).unwrap();
        // Compare the physical amplitude against the scalar FRF of the
        // linearized oscillator: a = ε/√((ω₀²−Ω²)² + (cΩ)²).
        let resp = to_physical(&ssm, &slow, &q, &[0], 128).unwrap();
        let c = 2.0 * 0.01;
        let frf = eps / ((1.0 - omega * omega).powi(2) + (c * omega).powi(2)).sqrt();
        let rel = (resp.amplitudes[0] - frf).abs() / frf;
        assert!(rel < 1e-3, "linear limit amplitude off by {rel:.3e}");
    }

    #[test]
    fn physical_response_period_consistency() {
        let (ssm, slow) = duffing_slow(0.001, 0.5, 1.0, 0.05);
        let q = solve_fixed_point(&slow, &[C64::new(0.1, 0.0)], 1e-12, 100).unwrap();
        let resp = to_physical(&ssm, &slow, &q, &[0], 64).unwrap();
        assert_eq!(resp.series[0].len(), 64);
        assert!(resp.amplitudes[0] > 0.0);
        // Initial state must sit on the orbit: displacement equals the
        // series start.
        assert!((resp.initial_state[0] - resp.series[0][0]).abs() < 1e-14);
    }
}
