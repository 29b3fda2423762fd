//! Non-intrusive spectral-submanifold expansion.
//!
//! The autonomous manifold W(p) and reduced dynamics R(p) solve
//! B·DW·R = A·W + F∘W order by order: collecting the p^m monomial gives the
//! linear system (A − Λ_m B) W_m = Σ_j B v_j R_m^j + C_m − F∘W|_m with
//! Λ_m = Σ m_i λ_i. Near-resonant monomials (normal-form style) keep a
//! reduced-dynamics coefficient fixed by the solvability projection and a
//! bordered solve; everything else gets R_m = 0. The composition
//! coefficients F∘W|_m come exclusively from polarization probes of the
//! black-box force ([`probe`]).
//!
//! The leading-order time-periodic correction solves
//! (A − iΩB) x₀ = B·V·s₀⁺ − F_ext/2 with s₀⁺ supported on the externally
//! resonant modes, again via a bordered system; the e^{−iφ} half follows by
//! conjugation. Every sign convention here is pinned by the invariance
//! residual ([`invariance_residual`]), which evaluates both sides of the
//! invariance equation with the stored expansions and the black-box force.

pub mod multi_index;
pub mod oracle;
pub mod probe;
pub mod serialize;

use std::collections::BTreeMap;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{self, C64, CMatrix, CVector};
use crate::model::complex_matvec_real;
use crate::spectral::{external_resonance_set, FirstOrderSystem, MasterSubspace};

pub use multi_index::MultiIndex;
pub use probe::{composition_coefficient, CountingEvaluator, ProbeEngine};

/// Map from multi-indices to complex coefficient vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialMap {
    pub dim_in: usize,
    pub vector_len: usize,
    pub coeffs: BTreeMap<MultiIndex, CVector>,
}

impl PolynomialMap {
    pub fn new(dim_in: usize, vector_len: usize) -> Self {
        Self {
            dim_in,
            vector_len,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn vector_len(&self) -> usize {
        self.vector_len
    }

    pub fn order(&self) -> u32 {
        self.coeffs.keys().map(|m| m.degree()).max().unwrap_or(0)
    }

    pub fn insert(&mut self, m: MultiIndex, v: CVector) {
        debug_assert_eq!(m.dim(), self.dim_in);
        debug_assert_eq!(v.len(), self.vector_len);
        self.coeffs.insert(m, v);
    }

    pub fn get(&self, m: &MultiIndex) -> Option<&CVector> {
        self.coeffs.get(m)
    }

    /// Coefficient access that treats a gap in the recursion as a bug.
    pub fn coeff(&self, m: &MultiIndex) -> &CVector {
        self.coeffs
            .get(m)
            .unwrap_or_else(|| panic!("missing lower-order coefficient {m:?}"))
    }

    /// Evaluate Σ_m c_m p^m.
    pub fn eval(&self, p: &[C64]) -> CVector {
        let mut out = CVector::zeros(self.vector_len);
        for (m, c) in &self.coeffs {
            let mono = monomial(p, m);
            if mono != C64::new(0.0, 0.0) {
                out += c * mono;
            }
        }
        out
    }

    /// Worst relative violation of the conjugation symmetry. Coefficients
    /// in physical space obey c(m̄) = conj(c(m)); coefficients in reduced
    /// space additionally swap their slot components (`swap_components`),
    /// since the conjugate equation lives in the paired slot. Violations
    /// are measured against the largest coefficient of the same degree, so
    /// that noise-level coefficients do not trip the check.
    pub fn reality_defect(&self, swap_components: bool) -> f64 {
        let mut degree_scale: std::collections::BTreeMap<u32, f64> = std::collections::BTreeMap::new();
        for (m, c) in &self.coeffs {
            let e = degree_scale.entry(m.degree()).or_insert(0.0);
            *e = e.max(c.norm());
        }
        // Monotone envelope over ascending degree: a degree that vanishes
        // identically (odd systems) is measured against the live scale of
        // the lower orders instead of against its own rounding noise.
        let mut envelope = 0.0_f64;
        for v in degree_scale.values_mut() {
            envelope = envelope.max(*v);
            *v = envelope;
        }
        let mut worst = 0.0_f64;
        for (m, c) in &self.coeffs {
            let conj_m = m.conj_swap();
            if let Some(cc) = self.coeffs.get(&conj_m) {
                let diff = (0..c.len())
                    .map(|i| {
                        let ii = if swap_components { i ^ 1 } else { i };
                        (cc[ii] - c[i].conj()).norm_sqr()
                    })
                    .sum::<f64>()
                    .sqrt();
                let scale = degree_scale[&m.degree()].max(1e-300);
                worst = worst.max(diff / scale);
            } else {
                worst = f64::INFINITY;
            }
        }
        worst
    }
}

pub fn monomial(p: &[C64], m: &MultiIndex) -> C64 {
    let mut acc = C64::new(1.0, 0.0);
    for (i, &e) in m.0.iter().enumerate() {
        if e > 0 {
            acc *= p[i].powu(e as u32);
        }
    }
    acc
}

/// Tolerances of the expansion.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SsmOptions {
    /// Relative inner-resonance tolerance: |Λ_m − λ_j| ≤ inner_tol·|λ_j|.
    pub inner_tol: f64,
    /// Absolute floor factor on the inner test, × |Im λ₁|.
    pub inner_tol_floor: f64,
    /// Relative external-resonance tolerance on |Im λ_j − Ω| vs Ω.
    pub ext_tol: f64,
}

impl Default for SsmOptions {
    fn default() -> Self {
        Self {
            inner_tol: 0.05,
            inner_tol_floor: 1e-3,
            ext_tol: 0.1,
        }
    }
}

/// Leading-order time-periodic part at forcing frequency Ω.
#[derive(Debug, Clone)]
pub struct NonAutonomous {
    pub omega: f64,
    pub x0_plus: CVector,
    pub x0_minus: CVector,
    pub s0_plus: CVector,
    pub s0_minus: CVector,
    /// Pair indices that received an s₀ term.
    pub resonant_pairs: Vec<usize>,
}

/// The SSM-based reduced-order model.
#[derive(Clone)]
pub struct SSMModel {
    pub master: MasterSubspace,
    pub order: u32,
    /// Manifold coefficients W_m ∈ C^{2n}.
    pub w: PolynomialMap,
    /// Reduced dynamics coefficients R_m ∈ C^{dim_M} (normal-form style:
    /// only near-resonant monomials beyond degree 1).
    pub r: PolynomialMap,
    pub nonauto: Option<NonAutonomous>,
    pub eps: f64,
    pub options: SsmOptions,
    /// Evaluator calls spent on probing during construction.
    pub probe_calls: u64,
}

impl SSMModel {
    pub fn dim_m(&self) -> usize {
        self.master.dim()
    }

    /// z = W(p) (+ ε X₀(φ) when the time-periodic part is attached).
    pub fn physical_point(&self, p: &[C64], phi: f64) -> CVector {
        let mut z = self.w.eval(p);
        if let (Some(na), true) = (&self.nonauto, self.eps != 0.0) {
            let e_plus = C64::new(0.0, phi).exp();
            let e_minus = C64::new(0.0, -phi).exp();
            for i in 0..z.len() {
                z[i] += (na.x0_plus[i] * e_plus + na.x0_minus[i] * e_minus) * self.eps;
            }
        }
        z
    }

    /// Reduced vector field ṗ = R(p) + ε S₀(φ).
    pub fn reduced_field(&self, p: &[C64], phi: f64) -> CVector {
        let mut f = self.r.eval(p);
        if let (Some(na), true) = (&self.nonauto, self.eps != 0.0) {
            let e_plus = C64::new(0.0, phi).exp();
            let e_minus = C64::new(0.0, -phi).exp();
            for j in 0..f.len() {
                f[j] += (na.s0_plus[j] * e_plus + na.s0_minus[j] * e_minus) * self.eps;
            }
        }
        f
    }
}

/// Λ_m = Σ m_i λ_i over the interleaved master slots.
fn lambda_m(master: &MasterSubspace, m: &MultiIndex) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for (slot, &e) in m.0.iter().enumerate() {
        if e > 0 {
            acc += master.lambda_slot(slot) * (e as f64);
        }
    }
    acc
}

/// Solve one per-multi-index coefficient system.
///
/// `rhs` is C_m − F∘W|_m. Returns (W_m, R_m) with R_m supported on the
/// detected resonant slots.
pub fn solve_coefficient_equation(
    sys: &FirstOrderSystem,
    master: &MasterSubspace,
    m: &MultiIndex,
    rhs: &CVector,
    opts: &SsmOptions,
) -> Result<(CVector, CVector)> {
    let dim = sys.dim();
    let dim_m = master.dim();
    let lam_m = lambda_m(master, m);
    let floor = opts.inner_tol_floor * master.lambda_slot(0).im.abs();

    let mut resonant: Vec<usize> = Vec::new();
    for j in 0..dim_m {
        let lam_j = master.lambda_slot(j);
        let gap = (lam_m - lam_j).norm();
        if gap <= (opts.inner_tol * lam_j.norm()).max(floor) {
            resonant.push(j);
        }
    }

    // Core operator A − Λ_m B.
    let mut core = CMatrix::zeros(dim, dim);
    for j in 0..dim {
        for i in 0..dim {
            core[(i, j)] = C64::new(sys.a[(i, j)], 0.0) - lam_m * sys.b[(i, j)];
        }
    }

    let mut r_m = CVector::zeros(dim_m);
    let w_m: CVector;
    if resonant.is_empty() {
        let lu = core.clone().lu();
        let mut solved = lu
            .solve(rhs)
            .ok_or_else(|| near_resonant_error(master, m, lam_m))?;
        // Iterative refinement doubles as a condition probe: a correction
        // comparable to the solution flags a solve that is near-singular
        // outside the declared resonance set.
        let r2 = rhs - &core * &solved;
        if let Some(dx) = lu.solve(&r2) {
            if dx.norm() > 1e-2 * solved.norm().max(1e-300) {
                return Err(near_resonant_error(master, m, lam_m));
            }
            solved += dx;
        }
        w_m = solved;
    } else {
        let cols: Vec<CVector> = resonant
            .iter()
            .map(|&j| complex_matvec_real(&sys.b, &master.v_slot(j)))
            .collect();
        let bt = sys.b.transpose();
        let rows: Vec<CVector> = resonant
            .iter()
            .map(|&j| {
                let wbar = master.w_slot(j).map(|x| x.conj());
                complex_matvec_real(&bt, &wbar)
            })
            .collect();
        let rhs2 = vec![C64::new(0.0, 0.0); resonant.len()];
        let (x, y) = linalg::solve_bordered(&core, &cols, &rows, rhs, &rhs2)?;
        for (idx, &j) in resonant.iter().enumerate() {
            r_m[j] = -y[idx];
        }
        w_m = x;
    }
    Ok((w_m, r_m))
}

fn near_resonant_error(master: &MasterSubspace, m: &MultiIndex, lam_m: C64) -> Error {
    let mut gaps: Vec<(usize, f64)> = (0..master.dim())
        .map(|j| (j, (lam_m - master.lambda_slot(j)).norm()))
        .collect();
    gaps.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    let table = gaps
        .iter()
        .map(|(j, g)| format!("slot {j}: {g:.3e}"))
        .collect::<Vec<_>>()
        .join(", ");
    let min_gap = gaps.first().map(|g| g.1).unwrap_or(f64::NAN);
    Error::NearResonantSolve {
        index: m.0.clone(),
        min_gap,
        table,
    }
}

/// Compute the autonomous SSM expansion to the given order.
pub fn compute_autonomous_ssm(
    sys: &FirstOrderSystem,
    master: &MasterSubspace,
    order: u32,
    opts: &SsmOptions,
) -> Result<SSMModel> {
    if order < 2 {
        return Err(Error::InvalidSpec(format!("SSM order {order} < 2")));
    }
    let dim = sys.dim();
    let dim_m = master.dim();
    let mut w = PolynomialMap::new(dim_m, dim);
    let mut r = PolynomialMap::new(dim_m, dim_m);

    // Degree 1: W holds the master eigenvectors, R the diagonal spectrum.
    for j in 0..dim_m {
        let e_j = MultiIndex::unit(dim_m, j);
        w.insert(e_j.clone(), master.v_slot(j));
        let mut r1 = CVector::zeros(dim_m);
        r1[j] = master.lambda_slot(j);
        r.insert(e_j, r1);
    }

    let counter = CountingEvaluator::new(sys);
    let mut engine = ProbeEngine::new(&counter);

    for d in 2..=order {
        for m in MultiIndex::all_of_degree(dim_m, d) {
            // Conjugation symmetry is enforced constructively: only the
            // canonical member of each (m, m̄) pair is solved, the partner
            // (already emitted for m̄ < m) follows by conjugation, and
            // self-conjugate monomials are symmetrized. Exact reality and
            // half the solves.
            let mc = m.conj_swap();
            if mc < m {
                let w_c = w.coeff(&mc).map(|x| x.conj());
                w.insert(m.clone(), w_c);
                if let Some(r_c) = r.get(&mc) {
                    let mut r_m = CVector::zeros(dim_m);
                    for j in 0..dim_m {
                        r_m[j] = r_c[j ^ 1].conj();
                    }
                    r.insert(m.clone(), r_m);
                }
                continue;
            }
            // C_m: contributions of B·(DW)·R at monomial m from nonlinear R
            // coefficients (the linear Λ_m·B·W_m part sits on the left-hand
            // side).
            let mut s = CVector::zeros(dim);
            for (v_idx, r_v) in r.coeffs.iter() {
                let deg_v = v_idx.degree();
                if deg_v < 2 || deg_v > d - 1 {
                    continue;
                }
                for j in 0..dim_m {
                    if r_v[j] == C64::new(0.0, 0.0) {
                        continue;
                    }
                    let Some(u_idx) = m.bump(j).checked_sub(v_idx) else {
                        continue;
                    };
                    if u_idx.degree() == 0 {
                        continue;
                    }
                    let u_j = u_idx.0[j] as f64;
                    if u_j == 0.0 {
                        continue;
                    }
                    let w_u = w.coeff(&u_idx);
                    s += w_u * (r_v[j] * u_j);
                }
            }
            let c_m = complex_matvec_real(&sys.b, &s);
            let f_m = composition_coefficient(&mut engine, &w, &m);
            let rhs = c_m - f_m;
            let (mut w_m, mut r_m) = solve_coefficient_equation(sys, master, &m, &rhs, opts)?;
            if mc == m {
                // Self-conjugate monomial: physical coefficient is real,
                // reduced coefficients pair up across the slot swap.
                for x in w_m.iter_mut() {
                    *x = C64::new(x.re, 0.0);
                }
                let r_sym = CVector::from_fn(dim_m, |j, _| (r_m[j] + r_m[j ^ 1].conj()) * 0.5);
                r_m = r_sym;
            }
            w.insert(m.clone(), w_m);
            if r_m.iter().any(|x| *x != C64::new(0.0, 0.0)) {
                r.insert(m, r_m);
            }
        }
    }

    let model = SSMModel {
        master: master.clone(),
        order,
        w,
        r,
        nonauto: None,
        eps: 0.0,
        options: opts.clone(),
        probe_calls: counter.calls(),
    };

    let defect = model.w.reality_defect(false).max(model.r.reality_defect(true));
    debug_assert!(
        defect < 1e-14,
        "conjugation enforcement failed: defect {defect:.3e}"
    );
    let _ = defect;
    Ok(model)
}

/// Attach the leading-order time-periodic part at forcing frequency Ω and
/// forcing scale ε.
pub fn compute_nonautonomous(
    ssm: &mut SSMModel,
    sys: &FirstOrderSystem,
    omega: f64,
    eps: f64,
) -> Result<()> {
    let na = compute_nonauto_fields(sys, &ssm.master, omega, &ssm.options)?;
    ssm.nonauto = Some(na);
    ssm.eps = eps;
    Ok(())
}

/// Externally resonant pairs and their solvability coefficients
/// s₀⁺_j = w_j*·F_ext/2 — the only harmonic data the slow reduced dynamics
/// needs, available without any 2n-dimensional solve.
pub fn resonant_s0(
    sys: &FirstOrderSystem,
    master: &MasterSubspace,
    omega: f64,
    ext_tol: f64,
) -> (Vec<usize>, CVector) {
    let resonant_pairs = external_resonance_set(master, omega, ext_tol);
    let mut s0_plus = CVector::zeros(master.dim());
    for &k in &resonant_pairs {
        let w = &master.pairs[k].w;
        let dot: C64 = (0..sys.dim())
            .map(|i| w[i].conj() * C64::new(sys.f_ext[i] * 0.5, 0.0))
            .sum();
        s0_plus[2 * k] = dot;
    }
    (resonant_pairs, s0_plus)
}

/// The Ω-dependent harmonic coefficients alone (continuation recomputes
/// these every step without touching the autonomous expansion).
pub fn compute_nonauto_fields(
    sys: &FirstOrderSystem,
    master: &MasterSubspace,
    omega: f64,
    options: &SsmOptions,
) -> Result<NonAutonomous> {
    if omega <= 0.0 {
        return Err(Error::InvalidSpec(format!("forcing frequency Ω = {omega} must be positive")));
    }
    let dim = sys.dim();
    let dim_m = master.dim();
    let resonant_pairs = external_resonance_set(master, omega, options.ext_tol);

    let f_half = CVector::from_fn(dim, |i, _| C64::new(sys.f_ext[i] * 0.5, 0.0));
    let mut core = CMatrix::zeros(dim, dim);
    let iw = C64::new(0.0, omega);
    for j in 0..dim {
        for i in 0..dim {
            core[(i, j)] = C64::new(sys.a[(i, j)], 0.0) - iw * sys.b[(i, j)];
        }
    }

    let mut s0_plus = CVector::zeros(dim_m);
    let x0: CVector;
    if resonant_pairs.is_empty() {
        x0 = core.clone().lu().solve(&(-&f_half)).ok_or_else(|| {
            Error::Singular(format!(
                "(A − iΩB) singular at Ω = {omega} with empty external-resonance set; \
                 increase ext_tol"
            ))
        })?;
    } else {
        let cols: Vec<CVector> = resonant_pairs
            .iter()
            .map(|&k| complex_matvec_real(&sys.b, &master.pairs[k].v))
            .collect();
        let bt = sys.b.transpose();
        let rows: Vec<CVector> = resonant_pairs
            .iter()
            .map(|&k| {
                let wbar = master.pairs[k].w.map(|x| x.conj());
                complex_matvec_real(&bt, &wbar)
            })
            .collect();
        let rhs2 = vec![C64::new(0.0, 0.0); resonant_pairs.len()];
        let (x, y) = linalg::solve_bordered(&core, &cols, &rows, &(-&f_half), &rhs2)?;
        for (idx, &k) in resonant_pairs.iter().enumerate() {
            s0_plus[2 * k] = -y[idx];
        }
        x0 = x;
    }

    let x0_minus = x0.map(|v| v.conj());
    let mut s0_minus = CVector::zeros(dim_m);
    for k in 0..dim_m / 2 {
        s0_minus[2 * k + 1] = s0_plus[2 * k].conj();
    }

    let na = NonAutonomous {
        omega,
        x0_plus: x0,
        x0_minus,
        s0_plus,
        s0_minus,
        resonant_pairs,
    };

    // Residual gate on the harmonic balance at 8 sampled phases.
    let worst = nonauto_residual(sys, master, &na);
    let scale = sys.f_ext.norm().max(1e-300);
    if worst / scale > 1e-9 {
        return Err(Error::Internal(format!(
            "leading-order periodic part failed its residual gate: {:.3e} relative",
            worst / scale
        )));
    }
    Ok(na)
}

/// Ω-sweep solver for the leading-order harmonic fields with factorization
/// reuse: the bordered matrix is factored at a reference frequency and
/// nearby frequencies are served by iterative refinement (one
/// back-substitution plus matvecs per iteration instead of a fresh LU).
/// Refactors automatically when the resonant set changes or refinement
/// stops contracting. Results match [`compute_nonauto_fields`] to solver
/// tolerance.
pub struct HarmonicSolver {
    cache: Option<HarmonicCache>,
    pub factorizations: usize,
    pub solves: usize,
}

struct HarmonicCache {
    resonant_pairs: Vec<usize>,
    lu: nalgebra::LU<C64, nalgebra::Dyn, nalgebra::Dyn>,
    cols: Vec<CVector>,
    rows: Vec<CVector>,
}

impl Default for HarmonicSolver {
    fn default() -> Self {
        Self::new()
    }
}

impl HarmonicSolver {
    pub fn new() -> Self {
        Self {
            cache: None,
            factorizations: 0,
            solves: 0,
        }
    }

    fn assemble(
        sys: &FirstOrderSystem,
        master: &MasterSubspace,
        omega: f64,
        resonant_pairs: &[usize],
    ) -> (CMatrix, Vec<CVector>, Vec<CVector>) {
        let dim = sys.dim();
        let r = resonant_pairs.len();
        let iw = C64::new(0.0, omega);
        let mut m = CMatrix::zeros(dim + r, dim + r);
        for j in 0..dim {
            for i in 0..dim {
                m[(i, j)] = C64::new(sys.a[(i, j)], 0.0) - iw * sys.b[(i, j)];
            }
        }
        let cols: Vec<CVector> = resonant_pairs
            .iter()
            .map(|&k| complex_matvec_real(&sys.b, &master.pairs[k].v))
            .collect();
        let bt = sys.b.transpose();
        let rows: Vec<CVector> = resonant_pairs
            .iter()
            .map(|&k| {
                let wbar = master.pairs[k].w.map(|x| x.conj());
                complex_matvec_real(&bt, &wbar)
            })
            .collect();
        for (jj, colv) in cols.iter().enumerate() {
            for i in 0..dim {
                m[(i, dim + jj)] = colv[i];
            }
        }
        for (ii, rowv) in rows.iter().enumerate() {
            for j in 0..dim {
                m[(dim + ii, j)] = rowv[j];
            }
        }
        (m, cols, rows)
    }

    /// M(Ω)·x without forming M: core (A − iΩB) action plus borders.
    fn apply(
        sys: &FirstOrderSystem,
        omega: f64,
        cols: &[CVector],
        rows: &[CVector],
        x: &CVector,
    ) -> CVector {
        let dim = sys.dim();
        let r = cols.len();
        let x_core = CVector::from_fn(dim, |i, _| x[i]);
        let ax = complex_matvec_real(&sys.a, &x_core);
        let bx = complex_matvec_real(&sys.b, &x_core);
        let iw = C64::new(0.0, omega);
        let mut out = CVector::zeros(dim + r);
        for i in 0..dim {
            out[i] = ax[i] - iw * bx[i];
        }
        for (jj, colv) in cols.iter().enumerate() {
            let y = x[dim + jj];
            if y != C64::new(0.0, 0.0) {
                for i in 0..dim {
                    out[i] += colv[i] * y;
                }
            }
        }
        for (ii, rowv) in rows.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..dim {
                acc += rowv[j] * x[j];
            }
            out[dim + ii] = acc;
        }
        out
    }

    pub fn fields(
        &mut self,
        sys: &FirstOrderSystem,
        master: &MasterSubspace,
        omega: f64,
        options: &SsmOptions,
    ) -> Result<NonAutonomous> {
        if omega <= 0.0 {
            return Err(Error::InvalidSpec(format!(
                "forcing frequency Ω = {omega} must be positive"
            )));
        }
        self.solves += 1;
        let dim = sys.dim();
        let (resonant_pairs, _) = resonant_s0(sys, master, omega, options.ext_tol);
        let r = resonant_pairs.len();
        let mut b = CVector::zeros(dim + r);
        for i in 0..dim {
            b[i] = C64::new(-sys.f_ext[i] * 0.5, 0.0);
        }

        let need_refactor = match &self.cache {
            Some(c) => c.resonant_pairs != resonant_pairs,
            None => true,
        };
        if need_refactor {
            let (m, cols, rows) = Self::assemble(sys, master, omega, &resonant_pairs);
            self.cache = Some(HarmonicCache {
                resonant_pairs: resonant_pairs.clone(),
                lu: m.lu(),
                cols,
                rows,
            });
            self.factorizations += 1;
        }

        // Refine to stagnation: iterative refinement converges to the same
        // backward-stable quality as a fresh factorization whenever it
        // contracts at all, so no floor estimate is needed — the Eq. (23)
        // residual gate below is the arbiter, and a failed gate triggers
        // one refactor-and-retry at the requested frequency.
        let mut solution: Option<CVector> = None;
        for attempt in 0..2 {
            let cache = self.cache.as_ref().unwrap();
            let mut x = cache
                .lu
                .solve(&b)
                .ok_or_else(|| Error::Singular("harmonic system is singular".into()))?;
            let mut best = x.clone();
            let mut best_rn = f64::INFINITY;
            let mut last_rn = f64::INFINITY;
            for _ in 0..16 {
                let res = &b - Self::apply(sys, omega, &cache.cols, &cache.rows, &x);
                let rn = res.norm();
                if rn < best_rn {
                    best_rn = rn;
                    best = x.clone();
                }
                if rn >= 0.95 * last_rn {
                    break;
                }
                last_rn = rn;
                let dx = cache
                    .lu
                    .solve(&res)
                    .ok_or_else(|| Error::Singular("harmonic refinement failed".into()))?;
                x += dx;
            }
            // Gate check on the candidate; stale caches that stagnated high
            // get one refactor.
            let candidate = self.package(sys, master, omega, &resonant_pairs, &best);
            let worst = nonauto_residual(sys, master, &candidate);
            if worst / sys.f_ext.norm().max(1e-300) <= 1e-9 {
                solution = Some(best);
                break;
            }
            if attempt == 0 {
                let (m, cols, rows) = Self::assemble(sys, master, omega, &resonant_pairs);
                self.cache = Some(HarmonicCache {
                    resonant_pairs: resonant_pairs.clone(),
                    lu: m.lu(),
                    cols,
                    rows,
                });
                self.factorizations += 1;
            }
        }
        let sol = solution
            .ok_or_else(|| Error::Singular("harmonic solve did not converge after refactor".into()))?;
        Ok(self.package(sys, master, omega, &resonant_pairs, &sol))
    }

    fn package(
        &self,
        sys: &FirstOrderSystem,
        master: &MasterSubspace,
        omega: f64,
        resonant_pairs: &[usize],
        sol: &CVector,
    ) -> NonAutonomous {
        let dim = sys.dim();
        let dim_m = master.dim();
        let x0 = CVector::from_fn(dim, |i, _| sol[i]);
        let mut s0_plus = CVector::zeros(dim_m);
        for (idx, &k) in resonant_pairs.iter().enumerate() {
            s0_plus[2 * k] = -sol[dim + idx];
        }
        let x0_minus = x0.map(|v| v.conj());
        let mut s0_minus = CVector::zeros(dim_m);
        for k in 0..dim_m / 2 {
            s0_minus[2 * k + 1] = s0_plus[2 * k].conj();
        }
        NonAutonomous {
            omega,
            x0_plus: x0,
            x0_minus,
            s0_plus,
            s0_minus,
            resonant_pairs: resonant_pairs.to_vec(),
        }
    }
}

/// Residual of the leading-order harmonic balance
/// B·V·S₀(φ) + ΩB·dX₀/dφ − A·X₀(φ) − F_ext cos φ over sampled phases.
pub fn nonauto_residual(
    sys: &FirstOrderSystem,
    master: &MasterSubspace,
    na: &NonAutonomous,
) -> f64 {
    let dim = sys.dim();
    let dim_m = master.dim();
    let mut worst = 0.0_f64;
    for k in 0..8 {
        let phi = 2.0 * std::f64::consts::PI * k as f64 / 8.0;
        let e_plus = C64::new(0.0, phi).exp();
        let e_minus = C64::new(0.0, -phi).exp();
        // S₀(φ) and V·S₀.
        let mut vs = CVector::zeros(dim);
        for j in 0..dim_m {
            let s_j = na.s0_plus[j] * e_plus + na.s0_minus[j] * e_minus;
            if s_j != C64::new(0.0, 0.0) {
                vs += master.v_slot(j) * s_j;
            }
        }
        let x0 = CVector::from_fn(dim, |i, _| {
            na.x0_plus[i] * e_plus + na.x0_minus[i] * e_minus
        });
        let dx0 = CVector::from_fn(dim, |i, _| {
            na.x0_plus[i] * e_plus * C64::new(0.0, 1.0)
                + na.x0_minus[i] * e_minus * C64::new(0.0, -1.0)
        });
        let lhs = complex_matvec_real(&sys.b, &vs) + complex_matvec_real(&sys.b, &dx0) * C64::new(na.omega, 0.0);
        let rhs = complex_matvec_real(&sys.a, &x0)
            + CVector::from_fn(dim, |i, _| C64::new(sys.f_ext[i] * phi.cos(), 0.0));
        worst = worst.max((lhs - rhs).norm());
    }
    worst
}

/// One sampled invariance residual.
#[derive(Debug, Clone)]
pub struct ResidualSample {
    pub p_norm: f64,
    pub absolute: f64,
    pub relative: f64,
}

#[derive(Debug, Clone)]
pub struct ResidualReport {
    pub samples: Vec<ResidualSample>,
    /// Fitted slope of log‖res‖ against log|p| (absolute residuals).
    pub slope: f64,
}

/// One residual evaluation: ‖B(DW·R_ε + Ω∂φW_ε) − A·W_ε − F∘W_ε − εF cos φ‖
/// and the ‖A·W‖ scale used for relative reporting.
fn eval_residual_at(ssm: &SSMModel, sys: &FirstOrderSystem, p: &[C64], phi: f64) -> (f64, f64) {
    let z = ssm.physical_point(p, phi);
    // DW(p)·(R(p) + ε S₀): Σ_u W_u Σ_j u_j p^{u−e_j} ṗ_j.
    let pdot = ssm.reduced_field(p, phi);
    let mut dw_pdot = CVector::zeros(sys.dim());
    for (u_idx, w_u) in &ssm.w.coeffs {
        let mut coeff = C64::new(0.0, 0.0);
        for j in 0..u_idx.dim() {
            let e = u_idx.0[j];
            if e == 0 || pdot[j] == C64::new(0.0, 0.0) {
                continue;
            }
            let mut mono = C64::new(e as f64, 0.0);
            for (i, &ei) in u_idx.0.iter().enumerate() {
                let pw = if i == j { ei - 1 } else { ei };
                if pw > 0 {
                    mono *= p[i].powu(pw as u32);
                }
            }
            coeff += mono * pdot[j];
        }
        if coeff != C64::new(0.0, 0.0) {
            dw_pdot += w_u * coeff;
        }
    }
    // Ω ∂φ W_ε = ε Ω X₀'(φ).
    let mut lhs_vec = dw_pdot;
    if let (Some(na), true) = (&ssm.nonauto, ssm.eps != 0.0) {
        let e_plus = C64::new(0.0, phi).exp();
        let e_minus = C64::new(0.0, -phi).exp();
        for i in 0..lhs_vec.len() {
            lhs_vec[i] += (na.x0_plus[i] * e_plus * C64::new(0.0, 1.0)
                + na.x0_minus[i] * e_minus * C64::new(0.0, -1.0))
                * (ssm.eps * na.omega);
        }
    }
    let lhs = complex_matvec_real(&sys.b, &lhs_vec);

    let aw = complex_matvec_real(&sys.a, &z);
    let fw = sys.eval_force(&z);
    let mut rhs = aw.clone() + fw;
    if ssm.nonauto.is_some() && ssm.eps != 0.0 {
        let c = phi.cos();
        for i in 0..rhs.len() {
            rhs[i] += C64::new(sys.f_ext[i] * c * ssm.eps, 0.0);
        }
    }
    ((lhs - rhs).norm(), aw.norm().max(1e-300))
}

/// Evaluate the invariance equation residual at the given reduced points.
///
/// With the time-periodic part attached and ε ≠ 0 the report includes the
/// O(ε·p) and O(ε²) truncation terms by construction; order-of-accuracy
/// fits should use ε = 0 samples.
pub fn invariance_residual(
    ssm: &SSMModel,
    sys: &FirstOrderSystem,
    samples: &[(Vec<C64>, f64)],
) -> ResidualReport {
    // Evaluation noise floor, measured where the true residual is
    // negligible by construction (|p| ~ 1e-12): black-box force
    // evaluations of shifted models carry a constant cancellation floor
    // ~ε_mach·‖F_int(u0)‖ that a purely relative filter cannot see.
    let dim_m = ssm.dim_m();
    let floor_probe = sample_points(dim_m, &[1e-12], 0.37);
    let floor = eval_residual_at(ssm, sys, &floor_probe[0].0, floor_probe[0].1).0;

    let mut out = Vec::with_capacity(samples.len());
    for (p, phi) in samples {
        let (res, scale) = eval_residual_at(ssm, sys, p, *phi);
        let p_norm = p.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        out.push(ResidualSample {
            p_norm,
            absolute: res,
            relative: res / scale,
        });
    }

    // Log-log least-squares slope. Samples at the measured evaluation
    // noise floor carry no order information and are left out of the fit.
    let pts: Vec<(f64, f64)> = out
        .iter()
        .filter(|s| {
            s.p_norm > 0.0 && s.absolute > 10.0 * floor && s.relative > 2e-15
        })
        .map(|s| (s.p_norm.ln(), s.absolute.ln()))
        .collect();
    let slope = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let denom = n * sxx - sx * sx;
        if denom.abs() > 0.0 {
            (n * sxy - sx * sy) / denom
        } else {
            f64::NAN
        }
    } else {
        f64::NAN
    };

    ResidualReport {
        samples: out,
        slope,
    }
}

/// Conjugate-symmetric sample points p = ρ(e^{iθ}, e^{−iθ}, ...) per pair,
/// for residual scans.
pub fn sample_points(
    dim_m: usize,
    rho_values: &[f64],
    theta: f64,
) -> Vec<(Vec<C64>, f64)> {
    rho_values
        .iter()
        .map(|&rho| {
            let mut p = vec![C64::new(0.0, 0.0); dim_m];
            for k in 0..dim_m / 2 {
                let ph = C64::new(0.0, theta * (k as f64 + 1.0)).exp();
                p[2 * k] = ph * rho;
                p[2 * k + 1] = (ph * rho).conj();
            }
            (p, 0.0)
        })
        .collect()
}

/// Map a DVector of reduced coordinates to the slice form used by the
/// polynomial evaluators.
pub fn pvec(p: &DVector<C64>) -> Vec<C64> {
    p.iter().copied().collect()
}
