//! Second-order rotating-structure models.
//!
//! A [`SecondOrderModel`] carries `M ü + (C + G) u̇ + F_int(u) = f_cen + f_ext(t)`
//! with a black-box polynomial internal force (degree ≤ 3). The centrifugal
//! load induces a nontrivial static equilibrium; [`shift_to_equilibrium`]
//! produces the shifted system `M ü + (C+G) u̇ + K_t u + g_nl(u) = f_ext(t)`
//! whose nonlinearity `g_nl` is purely quadratic + cubic and evaluable on
//! complex vectors.

pub mod beam;
pub mod duffing;
pub mod hub;
pub mod io;
pub mod shaft;
pub mod tensor;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, C64, CVector};

/// Named DOF index for reporting.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OutputDof {
    pub name: String,
    pub index: usize,
}

/// Black-box internal force, exactly polynomial of degree ≤ 3 in the
/// displacements. Evaluators must be reentrant: `&self` and no interior
/// mutability visible across calls.
pub trait InternalForce: Send + Sync {
    fn dim(&self) -> usize;

    fn eval(&self, u: &DVector<f64>) -> DVector<f64>;

    /// Analytic continuation of the real polynomial to complex inputs.
    fn eval_complex(&self, u: &CVector) -> CVector;

    /// Analytic tangent ∂F/∂u if available; `None` requests finite
    /// differences from callers that need a Jacobian.
    fn tangent(&self, _u: &DVector<f64>) -> Option<DMatrix<f64>> {
        None
    }

    /// Concrete-type access (builder-specific diagnostics, tensor export).
    fn as_any(&self) -> &dyn std::any::Any;
}

/// Second-order model in the rotating frame.
#[derive(Clone)]
pub struct SecondOrderModel {
    pub n: usize,
    pub mass: DMatrix<f64>,
    pub damping: DMatrix<f64>,
    pub coriolis: DMatrix<f64>,
    pub spin_speed: f64,
    pub internal: Arc<dyn InternalForce>,
    pub load_pattern: DVector<f64>,
    /// Static load scaling with Ω̂² (zero when the model is not spinning).
    pub centrifugal_load: DVector<f64>,
    /// Spin-independent static load (preloads, gravity analogs).
    pub static_preload: DVector<f64>,
    /// The −Ω̂²·M_t spin-softening matrix folded into the linear part of
    /// F_int; lets the equilibrium solver ramp the spin speed consistently.
    /// Zero when unknown (file-loaded models ramp by load only).
    pub spin_softening: DMatrix<f64>,
    pub output_dofs: Vec<OutputDof>,
    /// Raw polynomial tensors when the model was loaded from files; kept for
    /// oracle tests.
    pub raw_tensors: Option<tensor::RawTensors>,
}

impl SecondOrderModel {
    pub fn internal_force(&self, u: &DVector<f64>) -> DVector<f64> {
        self.internal.eval(u)
    }

    /// Max relative skew-symmetry violation of G: ‖G + Gᵀ‖ / ‖G‖.
    pub fn coriolis_skew_error(&self) -> f64 {
        let g = &self.coriolis;
        let viol = (g + g.transpose()).norm();
        let nrm = g.norm();
        if nrm == 0.0 {
            viol
        } else {
            viol / nrm
        }
    }

    /// Potential of the internal force (valid for any degree-3 polynomial
    /// force with a symmetric tangent): V = ½uᵀK₀u + uᵀQ(u,u)/3 + uᵀT(u,u,u)/4.
    pub fn internal_potential(&self, u: &DVector<f64>) -> f64 {
        let k0 = self
            .internal
            .tangent(&DVector::zeros(self.n))
            .unwrap_or_else(|| fd_jacobian(self.internal.as_ref(), &DVector::zeros(self.n), 1e-7));
        let f_plus = self.internal.eval(u);
        let f_minus = self.internal.eval(&(-u));
        let lin = &k0 * u;
        let quad = (&f_plus + &f_minus) * 0.5;
        let cubic = (&f_plus - &f_minus) * 0.5 - &lin;
        0.5 * u.dot(&lin) + u.dot(&quad) / 3.0 + u.dot(&cubic) / 4.0
    }
}

/// g_nl-style map: zero value and zero Jacobian at the origin, quadratic +
/// cubic only, defined for complex vectors.
pub trait ComplexMap: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, u: &CVector) -> CVector;
    fn eval_real(&self, u: &DVector<f64>) -> DVector<f64>;
}

/// Model shifted to its static equilibrium.
#[derive(Clone)]
pub struct ShiftedModel {
    pub model: SecondOrderModel,
    pub u0: DVector<f64>,
    pub k_t: DMatrix<f64>,
    pub g_nl: Arc<dyn ComplexMap>,
}

impl ShiftedModel {
    pub fn n(&self) -> usize {
        self.model.n
    }

    /// Install a damping matrix (damping does not affect the equilibrium,
    /// the tangent stiffness, or g_nl).
    pub fn set_damping(&mut self, c: DMatrix<f64>) {
        self.model.damping = c;
    }

    /// Undamped natural frequencies of (M, K_t), ascending.
    pub fn natural_frequencies(&self) -> Result<Vec<f64>> {
        linalg::natural_frequencies(&self.k_t, &self.model.mass)
    }
}

/// Options for the static-equilibrium Newton solve.
#[derive(Debug, Clone)]
pub struct EquilibriumOptions {
    pub tol_abs: f64,
    pub tol_rel: f64,
    pub max_iter: usize,
    pub n_ramp: usize,
}

impl Default for EquilibriumOptions {
    fn default() -> Self {
        Self {
            tol_abs: 1e-10,
            tol_rel: 1e-10,
            max_iter: 50,
            n_ramp: 5,
        }
    }
}

/// Newton solve of F_int(u0) = f_cen + preload, with a geometric spin-speed
/// ramp as fallback.
///
/// Ramp step k models the structure at spin (k/n_ramp)·Ω̂: the centrifugal
/// load scales by (k/n_ramp)² and the spin-softening part of F_int is
/// backed off by (1 − (k/n_ramp)²)·S, so every intermediate problem is a
/// physical spinning state (load-only ramping can cross a transiently
/// buckled configuration when softening outweighs the not-yet-applied
/// stiffening).
pub fn solve_static_equilibrium(
    model: &SecondOrderModel,
    opts: &EquilibriumOptions,
) -> Result<DVector<f64>> {
    let f_full = &model.centrifugal_load + &model.static_preload;
    let f_norm = f_full.norm();
    let tol = opts.tol_abs + opts.tol_rel * f_norm;
    if f_norm == 0.0 {
        // Unloaded model about its own expansion point.
        return Ok(DVector::zeros(model.n));
    }

    let mut u = DVector::zeros(model.n);
    match newton_static(model, 1.0, &mut u, tol, opts.max_iter, 0) {
        Ok(()) => Ok(u),
        Err(_) => {
            u.fill(0.0);
            for step in 1..=opts.n_ramp {
                let s = step as f64 / opts.n_ramp as f64;
                let tol_step = if step == opts.n_ramp {
                    tol
                } else {
                    tol.max(1e-8 * f_norm)
                };
                newton_static(model, s, &mut u, tol_step, opts.max_iter, step)?;
            }
            Ok(u)
        }
    }
}

/// One Newton solve at spin fraction `s` ∈ (0, 1].
fn newton_static(
    model: &SecondOrderModel,
    s: f64,
    u: &mut DVector<f64>,
    tol: f64,
    max_iter: usize,
    ramp_step: usize,
) -> Result<()> {
    let s2 = s * s;
    let soften_backoff = 1.0 - s2; // subtract this much of S from F_int
    // Centrifugal load follows the spin fraction quadratically; the
    // spin-independent preload is applied quasi-statically alongside.
    let f_target = &model.centrifugal_load * s2 + &model.static_preload * s;
    let eval = |u: &DVector<f64>| -> DVector<f64> {
        let mut r = model.internal.eval(u) - &f_target;
        if soften_backoff != 0.0 {
            r -= (&model.spin_softening * u) * soften_backoff;
        }
        r
    };
    let mut residual = eval(u);
    let mut res_norm = residual.norm();
    for _ in 0..max_iter {
        if res_norm <= tol {
            return Ok(());
        }
        let mut jac = model
            .internal
            .tangent(u)
            .unwrap_or_else(|| fd_jacobian(model.internal.as_ref(), u, fd_step(u)));
        if soften_backoff != 0.0 {
            jac -= &model.spin_softening * soften_backoff;
        }
        let lu = jac.lu();
        let delta = lu.solve(&residual).ok_or(Error::EquilibriumSingular)?;
        // Backtracking line search on the residual norm.
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..8 {
            let trial = &*u - &delta * alpha;
            let r_trial = eval(&trial);
            let n_trial = r_trial.norm();
            if n_trial < res_norm || n_trial <= tol {
                *u = trial;
                residual = r_trial;
                res_norm = n_trial;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(Error::EquilibriumDiverged {
                residual: res_norm,
                iterations: max_iter,
                ramp_step,
            });
        }
    }
    if res_norm <= tol {
        Ok(())
    } else {
        Err(Error::EquilibriumDiverged {
            residual: res_norm,
            iterations: max_iter,
            ramp_step,
        })
    }
}

fn fd_step(u: &DVector<f64>) -> f64 {
    1e-7 * (1.0 + u.amax())
}

/// Central finite-difference Jacobian, column by column.
pub fn fd_jacobian(force: &dyn InternalForce, u: &DVector<f64>, h: f64) -> DMatrix<f64> {
    let n = force.dim();
    let mut jac = DMatrix::zeros(n, n);
    let mut up = u.clone();
    let mut um = u.clone();
    for j in 0..n {
        up[j] += h;
        um[j] -= h;
        let fp = force.eval(&up);
        let fm = force.eval(&um);
        for i in 0..n {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
        up[j] = u[j];
        um[j] = u[j];
    }
    jac
}

/// How the tangent stiffness is obtained in [`shift_to_equilibrium`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TangentMethod {
    /// Analytic when the force provides one, finite differences otherwise.
    #[default]
    Auto,
    FiniteDifference,
}

/// Shift the model to the equilibrium `u0`: tangent stiffness K_t plus the
/// shifted nonlinearity g_nl(u) = F_int(u + u0) − F_int(u0) − K_t u.
pub fn shift_to_equilibrium(
    model: &SecondOrderModel,
    u0: &DVector<f64>,
    method: TangentMethod,
) -> Result<ShiftedModel> {
    let k_t = match method {
        TangentMethod::Auto => model
            .internal
            .tangent(u0)
            .unwrap_or_else(|| fd_jacobian(model.internal.as_ref(), u0, fd_step(u0))),
        TangentMethod::FiniteDifference => fd_jacobian(model.internal.as_ref(), u0, fd_step(u0)),
    };
    let g_nl = Arc::new(NativeGnl {
        force: model.internal.clone(),
        u0: u0.clone(),
        f0: model.internal.eval(u0),
        k_t: k_t.clone(),
    });
    Ok(ShiftedModel {
        model: model.clone(),
        u0: u0.clone(),
        k_t,
        g_nl,
    })
}

/// g_nl built from a force with native complex evaluation.
struct NativeGnl {
    force: Arc<dyn InternalForce>,
    u0: DVector<f64>,
    f0: DVector<f64>,
    k_t: DMatrix<f64>,
}

impl ComplexMap for NativeGnl {
    fn dim(&self) -> usize {
        self.force.dim()
    }

    fn eval(&self, u: &CVector) -> CVector {
        let shifted = CVector::from_fn(u.len(), |i, _| u[i] + C64::new(self.u0[i], 0.0));
        let f = self.force.eval_complex(&shifted);
        let ktu = complex_matvec_real(&self.k_t, u);
        CVector::from_fn(u.len(), |i, _| f[i] - C64::new(self.f0[i], 0.0) - ktu[i])
    }

    fn eval_real(&self, u: &DVector<f64>) -> DVector<f64> {
        let f = self.force.eval(&(u + &self.u0));
        f - &self.f0 - &self.k_t * u
    }
}

pub fn complex_matvec_real(m: &DMatrix<f64>, x: &CVector) -> CVector {
    let n = m.nrows();
    let mut out = CVector::zeros(n);
    for j in 0..m.ncols() {
        let xj = x[j];
        if xj == C64::new(0.0, 0.0) {
            continue;
        }
        for i in 0..n {
            out[i] += xj * m[(i, j)];
        }
    }
    out
}

/// Damping specification: either a first-mode damping ratio (α = 2ξ₁ω₁,
/// β = 0) or an explicit α override.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum DampingSpec {
    None,
    Xi1(f64),
    Alpha(f64),
}

/// Install Rayleigh damping on the shifted model; `DampingSpec::None`
/// keeps whatever damping the model was built or loaded with.
pub fn apply_damping(shifted: &mut ShiftedModel, spec: DampingSpec) -> Result<()> {
    if spec == DampingSpec::None {
        return Ok(());
    }
    let c = rayleigh_damping(shifted, spec)?;
    shifted.set_damping(c);
    Ok(())
}

/// Mass-proportional Rayleigh damping C = αM, with ω₁ defined by the
/// undamped system M ü + K_t u = 0.
pub fn rayleigh_damping(shifted: &ShiftedModel, spec: DampingSpec) -> Result<DMatrix<f64>> {
    let alpha = match spec {
        DampingSpec::None => 0.0,
        DampingSpec::Alpha(a) => a,
        DampingSpec::Xi1(xi1) => {
            if xi1 < 0.0 {
                return Err(Error::InvalidSpec(format!("damping ratio ξ₁ = {xi1} < 0")));
            }
            let omega1 = shifted
                .natural_frequencies()?
                .first()
                .copied()
                .ok_or_else(|| Error::Internal("empty spectrum".into()))?;
            2.0 * xi1 * omega1
        }
    };
    Ok(&shifted.model.mass * alpha)
}

/// Complex-capable wrapper around a real polynomial map with zero value and
/// zero Jacobian at the origin (quadratic + cubic only).
///
/// Evaluates g(a + ib) through the multilinear expansion: the input is
/// split into even/odd parts by ± probes, and the mixed bilinear/trilinear
/// values are recovered by polarization over (a, b). Exact for polynomials.
pub struct ComplexifiedMap<F>
where
    F: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync,
{
    real: F,
    dim: usize,
}

pub fn complexify_evaluator<F>(real: F, dim: usize) -> ComplexifiedMap<F>
where
    F: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync,
{
    ComplexifiedMap { real, dim }
}

impl<F> ComplexifiedMap<F>
where
    F: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync,
{
    fn even_odd(&self, x: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let fp = (self.real)(x);
        let fm = (self.real)(&(-x));
        ((&fp + &fm) * 0.5, (fp - fm) * 0.5)
    }
}

impl<F> ComplexMap for ComplexifiedMap<F>
where
    F: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, u: &CVector) -> CVector {
        let a = DVector::from_fn(u.len(), |i, _| u[i].re);
        let b = DVector::from_fn(u.len(), |i, _| u[i].im);
        if b.iter().all(|&x| x == 0.0) {
            let f = (self.real)(&a);
            return CVector::from_fn(u.len(), |i, _| C64::new(f[i], 0.0));
        }
        // Probes.
        let (q_aa, t_aaa) = self.even_odd(&a);
        let (q_bb, t_bbb) = self.even_odd(&b);
        let apb = &a + &b;
        let amb = &a - &b;
        let (q_apb, t_apb) = self.even_odd(&apb);
        let (_, t_amb) = self.even_odd(&amb);
        // Q(a,b) = [Q(a+b,a+b) − Q(a,a) − Q(b,b)] / 2
        let q_ab = (&q_apb - &q_aa - &q_bb) * 0.5;
        // T(a,a,b) = [T(a+b) − T(a−b) − 2 T(b)] / 6
        let t_aab = (&t_apb - &t_amb - &t_bbb * 2.0) / 6.0;
        // T(a,b,b) = [T(a+b) + T(a−b) − 2 T(a)] / 6
        let t_abb = (&t_apb + &t_amb - &t_aaa * 2.0) / 6.0;

        // g(a+ib) = Q(a,a) − Q(b,b) + 2i Q(a,b)
        //         + T(a,a,a) − 3 T(a,b,b) + i (3 T(a,a,b) − T(b,b,b)).
        let re = &q_aa - &q_bb + &t_aaa - &t_abb * 3.0;
        let im = &q_ab * 2.0 + &t_aab * 3.0 - &t_bbb;
        CVector::from_fn(u.len(), |i, _| C64::new(re[i], im[i]))
    }

    fn eval_real(&self, u: &DVector<f64>) -> DVector<f64> {
        (self.real)(u)
    }
}

/// Shared invariant checks used by builder tests and `model-info`.
pub fn check_model_invariants(model: &SecondOrderModel, seed: u64) -> Result<()> {
    use rand::prelude::*;
    use rand::rngs::StdRng;
    let mut rng = StdRng::seed_from_u64(seed);
    let n = model.n;

    // G skew.
    if model.coriolis_skew_error() > 1e-12 {
        return Err(Error::Internal(format!(
            "Coriolis matrix is not skew-symmetric: rel error {:.3e}",
            model.coriolis_skew_error()
        )));
    }
    // M symmetric positive definite on random vectors.
    let m_sym = (&model.mass - model.mass.transpose()).norm() / model.mass.norm();
    if m_sym > 1e-12 {
        return Err(Error::Internal(format!("mass matrix asymmetry {m_sym:.3e}")));
    }
    for _ in 0..3 {
        let x = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0_f64));
        let q = x.dot(&(&model.mass * &x));
        if q <= 0.0 {
            return Err(Error::Internal("mass matrix is not positive definite".into()));
        }
    }
    // F_int(0) = 0.
    let f0 = model.internal.eval(&DVector::zeros(n));
    if f0.norm() > 1e-10 {
        return Err(Error::Internal(format!("F_int(0) ≠ 0: ‖F‖ = {:.3e}", f0.norm())));
    }
    // Degree ≤ 3: cubic interpolation through 4 scalings predicts a 5th.
    for _ in 0..5 {
        let dir = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0_f64));
        if !polynomial_degree_at_most_3(model.internal.as_ref(), &dir, 1e-8) {
            return Err(Error::Internal(
                "internal force is not polynomial of degree ≤ 3 along a random direction".into(),
            ));
        }
    }
    Ok(())
}

/// Check that t ↦ F(t·dir) is a polynomial of degree ≤ 3 by interpolating
/// from 4 samples and predicting a 5th.
pub fn polynomial_degree_at_most_3(
    force: &dyn InternalForce,
    dir: &DVector<f64>,
    rel_tol: f64,
) -> bool {
    let ts = [0.5, 1.0, 1.5, 2.0];
    let t_check = 2.5;
    let samples: Vec<DVector<f64>> = ts.iter().map(|&t| force.eval(&(dir * t))).collect();
    let predicted = cubic_extrapolate(&ts, &samples, t_check);
    let actual = force.eval(&(dir * t_check));
    let scale = actual.norm().max(samples[3].norm()).max(1e-30);
    (predicted - actual).norm() / scale <= rel_tol
}

fn cubic_extrapolate(ts: &[f64; 4], samples: &[DVector<f64>], t: f64) -> DVector<f64> {
    // Lagrange interpolation of the degree-3 polynomial through 4 samples.
    let mut out = DVector::zeros(samples[0].len());
    for i in 0..4 {
        let mut w = 1.0;
        for j in 0..4 {
            if i != j {
                w *= (t - ts[j]) / (ts[i] - ts[j]);
            }
        }
        out += &samples[i] * w;
    }
    out
}

/// Even/odd homogeneity of a g_nl map: the quadratic and cubic parts must
/// scale as t² and t³ exactly.
pub fn gnl_degree_split_ok(gnl: &dyn ComplexMap, dir: &DVector<f64>, rel_tol: f64) -> bool {
    let g1 = gnl.eval_real(dir);
    let g1m = gnl.eval_real(&(-dir));
    let even1 = (&g1 + &g1m) * 0.5;
    let odd1 = (&g1 - &g1m) * 0.5;
    let t = 1.7;
    let g2 = gnl.eval_real(&(dir * t));
    let g2m = gnl.eval_real(&(dir * (-t)));
    let even2 = (&g2 + &g2m) * 0.5;
    let odd2 = (&g2 - &g2m) * 0.5;
    let scale = g2.norm().max(1e-30);
    let e_err = (&even2 - &even1 * (t * t)).norm() / scale;
    let o_err = (&odd2 - &odd1 * (t * t * t)).norm() / scale;
    e_err <= rel_tol && o_err <= rel_tol
}
