//! First-order embedding and generalized eigenanalysis.
//!
//! The shifted second-order system becomes B ż = A z + F(z) + ε F_ext cos Ωt
//! with z = (u, u̇),
//! B = [[C+G, M], [M, 0]], A = [[−K_t, 0], [0, M]], F(z) = (−g_nl(u), 0).
//!
//! The pencil eigenproblem A v = λ B v is solved through T = B⁻¹A: right
//! eigenvectors come from the dense complex QR solver, left eigenvectors
//! from rows of V⁻¹B⁻¹, which makes the biorthonormalization
//! w_i* B v_j = δ_ij exact by construction. Conjugate pairs are stored
//! explicitly with the positive-imaginary member first and the phase fixed
//! by making the largest-magnitude entry of v real positive.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, C64, CMatrix, CVector};
use crate::model::{complex_matvec_real, ComplexMap, ShiftedModel};

/// Hard ceiling for the dense eigensolve; larger systems would need a
/// shift-invert iteration that this toolkit does not carry.
pub const DENSE_EIGEN_LIMIT: usize = 4000;

pub struct FirstOrderSystem {
    /// Second-order DOF count n (state dimension is 2n).
    pub n: usize,
    pub b: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub g_nl: Arc<dyn ComplexMap>,
    pub f_ext: DVector<f64>,
}

impl FirstOrderSystem {
    pub fn dim(&self) -> usize {
        2 * self.n
    }

    /// F(z) = (−g_nl(u), 0) with u the displacement half of z.
    pub fn eval_force(&self, z: &CVector) -> CVector {
        let u = CVector::from_fn(self.n, |i, _| z[i]);
        let g = self.g_nl.eval(&u);
        let mut out = CVector::zeros(2 * self.n);
        for i in 0..self.n {
            out[i] = -g[i];
        }
        out
    }
}

/// Assemble the first-order blocks from a shifted model.
pub fn to_first_order(shifted: &ShiftedModel) -> Result<FirstOrderSystem> {
    let n = shifted.n();
    let m = &shifted.model.mass;
    let cg = &shifted.model.damping + &shifted.model.coriolis;
    let mut b = DMatrix::zeros(2 * n, 2 * n);
    b.view_mut((0, 0), (n, n)).copy_from(&cg);
    b.view_mut((0, n), (n, n)).copy_from(m);
    b.view_mut((n, 0), (n, n)).copy_from(m);
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    a.view_mut((0, 0), (n, n)).copy_from(&(-&shifted.k_t));
    a.view_mut((n, n), (n, n)).copy_from(m);
    let mut f_ext = DVector::zeros(2 * n);
    for i in 0..n {
        f_ext[i] = shifted.model.load_pattern[i];
    }
    Ok(FirstOrderSystem {
        n,
        b,
        a,
        g_nl: shifted.g_nl.clone(),
        f_ext,
    })
}

/// One conjugate eigenpair, stored through its positive-imaginary member.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub lambda: C64,
    pub v: CVector,
    pub w: CVector,
}

/// Overdamped (real) eigenvalue.
#[derive(Debug, Clone)]
pub struct RealMode {
    pub lambda: f64,
}

#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Conjugate pairs sorted by descending real part, then ascending
    /// frequency.
    pub pairs: Vec<EigenPair>,
    pub real_modes: Vec<RealMode>,
    pub state_dim: usize,
    /// 1-norm condition estimate of the full eigenvector matrix; large
    /// values flag a (near-)defective pencil.
    pub eigenvector_cond: f64,
    pub warnings: Vec<String>,
}

impl Spectrum {
    /// Worst relative eigen-residual over the returned pairs:
    /// max ‖Av − λBv‖ / ((‖A‖ + |λ|‖B‖)‖v‖), and the left-vector analog.
    pub fn max_residual(&self, sys: &FirstOrderSystem) -> f64 {
        let anorm = sys.a.norm();
        let bnorm = sys.b.norm();
        let mut worst = 0.0_f64;
        for p in &self.pairs {
            let av = complex_matvec_real(&sys.a, &p.v);
            let bv = complex_matvec_real(&sys.b, &p.v);
            let res = (0..av.len())
                .map(|i| (av[i] - p.lambda * bv[i]).norm_sqr())
                .sum::<f64>()
                .sqrt();
            let scale = (anorm + p.lambda.norm() * bnorm) * p.v.norm();
            worst = worst.max(res / scale);
            // Left: w*A − λ w*B ⇔ Aᵀ w̄ − λ Bᵀ w̄.
            let wbar = p.w.map(|x| x.conj());
            let at_w = complex_matvec_real(&sys.a.transpose(), &wbar);
            let bt_w = complex_matvec_real(&sys.b.transpose(), &wbar);
            let lres = (0..at_w.len())
                .map(|i| (at_w[i] - p.lambda * bt_w[i]).norm_sqr())
                .sum::<f64>()
                .sqrt();
            worst = worst.max(lres / ((anorm + p.lambda.norm() * bnorm) * p.w.norm()));
        }
        worst
    }

    /// Max |w_i* B v_j − δ_ij| over the returned pairs (interleaved slots).
    pub fn max_biorthogonality_defect(&self, sys: &FirstOrderSystem) -> f64 {
        let slots = self.interleaved();
        let mut worst = 0.0_f64;
        for (i, (_, _, wi)) in slots.iter().enumerate() {
            for (j, (_, vj, _)) in slots.iter().enumerate() {
                let bv = complex_matvec_real(&sys.b, vj);
                let dot: C64 = (0..bv.len()).map(|r| wi[r].conj() * bv[r]).sum();
                let target = if i == j {
                    C64::new(1.0, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                };
                worst = worst.max((dot - target).norm());
            }
        }
        worst
    }

    /// Interleaved slot view: (λ, v, w), conjugate following each pair leader.
    fn interleaved(&self) -> Vec<(C64, CVector, CVector)> {
        let mut out = Vec::with_capacity(2 * self.pairs.len());
        for p in &self.pairs {
            out.push((p.lambda, p.v.clone(), p.w.clone()));
            out.push((
                p.lambda.conj(),
                p.v.map(|x| x.conj()),
                p.w.map(|x| x.conj()),
            ));
        }
        out
    }
}

/// Solve the pencil eigenproblem for the `k` eigenvalues of largest real
/// part (k counts eigenvalues; conjugate pairs occupy two slots).
pub fn solve_spectrum(sys: &FirstOrderSystem, k: usize) -> Result<Spectrum> {
    let dim = sys.dim();
    if k > dim {
        return Err(Error::Eigen(format!("requested {k} eigenvalues from a {dim}-state system")));
    }
    if dim > DENSE_EIGEN_LIMIT {
        return Err(Error::Eigen(format!(
            "state dimension {dim} exceeds the dense eigensolver limit {DENSE_EIGEN_LIMIT}"
        )));
    }

    // T = B⁻¹ A.
    let b_lu = sys.b.clone().lu();
    let t = b_lu
        .solve(&sys.a)
        .ok_or_else(|| Error::Eigen("B is singular (is the mass matrix nonsingular?)".into()))?;
    let b_inv = b_lu
        .try_inverse()
        .ok_or_else(|| Error::Eigen("B is singular".into()))?;

    let eig = linalg::real_eigen(&t)?;

    // Group into conjugate pairs and real modes.
    let scale = eig
        .values
        .iter()
        .map(|l| l.norm())
        .fold(0.0_f64, f64::max)
        .max(1e-300);
    let im_floor = 1e-9 * scale;
    let mut pos: Vec<usize> = Vec::new();
    let mut neg: Vec<usize> = Vec::new();
    let mut reals: Vec<usize> = Vec::new();
    for (i, l) in eig.values.iter().enumerate() {
        if l.im > im_floor {
            pos.push(i);
        } else if l.im < -im_floor {
            neg.push(i);
        } else {
            reals.push(i);
        }
    }
    if pos.len() != neg.len() {
        return Err(Error::Eigen(format!(
            "conjugate pairing failed: {} positive vs {} negative imaginary parts",
            pos.len(),
            neg.len()
        )));
    }
    let mut neg_used = vec![false; neg.len()];
    let mut pairing: Vec<(usize, usize)> = Vec::with_capacity(pos.len());
    for &p in &pos {
        let target = eig.values[p].conj();
        let mut best = None;
        let mut best_d = f64::INFINITY;
        for (qi, &q) in neg.iter().enumerate() {
            if neg_used[qi] {
                continue;
            }
            let d = (eig.values[q] - target).norm();
            if d < best_d {
                best_d = d;
                best = Some(qi);
            }
        }
        let qi = best.ok_or_else(|| Error::Eigen("conjugate pairing failed".into()))?;
        if best_d > 1e-6 * scale {
            return Err(Error::Eigen(format!(
                "conjugate pairing failed: nearest partner of {} is {:.3e} away",
                eig.values[p], best_d
            )));
        }
        neg_used[qi] = true;
        pairing.push((p, neg[qi]));
    }

    // Sort pair leaders by descending real part (grouped at noise level,
    // so equal-damping modes order by ascending frequency).
    let re_group = 1e-8 * scale;
    pairing.sort_by(|&(a, _), &(b, _)| {
        let la = eig.values[a];
        let lb = eig.values[b];
        if (la.re - lb.re).abs() <= re_group {
            la.im.partial_cmp(&lb.im).unwrap()
        } else {
            lb.re.partial_cmp(&la.re).unwrap()
        }
    });
    reals.sort_by(|&a, &b| eig.values[b].re.partial_cmp(&eig.values[a].re).unwrap());

    // Rebuild the full eigenvector matrix with exact conjugate structure and
    // fixed phases, then invert it for the left vectors.
    let mut v_full = CMatrix::zeros(dim, dim);
    let mut values = vec![C64::new(0.0, 0.0); dim];
    let mut col = 0usize;
    let mut pair_cols: Vec<(usize, C64)> = Vec::new();
    let n_pairs_wanted = k.div_ceil(2).min(pairing.len());
    for (pair_idx, &(p, q)) in pairing.iter().enumerate() {
        // Symmetrize the eigenvalue across the pair.
        let mut lam = (eig.values[p] + eig.values[q].conj()) * 0.5;
        let mut v = eig.vectors.column(p).clone_owned();
        // Newton-polish the returned pairs: the QR residual (~1e-10
        // relative) otherwise caps the accuracy of every downstream
        // invariance check through the linear part of the expansion.
        if pair_idx < n_pairs_wanted {
            refine_eigenpair(sys, &mut lam, &mut v);
        }
        phase_fix(&mut v);
        // Normalize by the displacement half: a reduced coordinate of
        // magnitude ρ then carries a mode-1 displacement of order ρ for
        // every model, so amplitude windows mean the same thing on a
        // 1-DOF oscillator and on an FE beam.
        let disp_norm = (0..sys.n).map(|i| v[i].norm_sqr()).sum::<f64>().sqrt();
        if disp_norm > 1e-12 * v.norm() {
            v /= C64::new(disp_norm, 0.0);
        }
        values[col] = lam;
        v_full.set_column(col, &v);
        values[col + 1] = lam.conj();
        let vc = v.map(|x| x.conj());
        v_full.set_column(col + 1, &vc);
        pair_cols.push((col, lam));
        col += 2;
    }
    let real_start = col;
    for &r in &reals {
        let mut v = eig.vectors.column(r).clone_owned();
        // Strip the spurious imaginary part of a real mode.
        phase_fix(&mut v);
        let vr = v.map(|x| C64::new(x.re, 0.0));
        let nrm = vr.norm();
        values[col] = C64::new(eig.values[r].re, 0.0);
        v_full.set_column(col, &(vr / C64::new(nrm.max(1e-300), 0.0)));
        col += 1;
    }

    let v_lu = v_full.clone().lu();
    let v_inv = v_lu
        .try_inverse()
        .ok_or_else(|| Error::Eigen("eigenvector matrix is singular (defective pencil)".into()))?;
    let cond = linalg::cond_1(&v_full, &v_inv);
    let mut warnings = Vec::new();
    if cond > 1e8 {
        warnings.push(format!(
            "eigenvector matrix condition {cond:.3e}: pencil is close to defective; \
             biorthonormalization may amplify noise"
        ));
    }

    // Left vectors: w_j* = (V⁻¹ B⁻¹)_j.
    let b_inv_c = b_inv.map(|x| C64::new(x, 0.0));
    let z = &v_inv * &b_inv_c;

    // Assemble the requested number of slots.
    let mut pairs = Vec::with_capacity(n_pairs_wanted);
    for &(c, lam) in pair_cols.iter().take(n_pairs_wanted) {
        let v = v_full.column(c).clone_owned();
        let w = CVector::from_fn(dim, |i, _| z[(c, i)].conj());
        pairs.push(EigenPair { lambda: lam, v, w });
    }
    let real_modes: Vec<RealMode> = reals
        .iter()
        .enumerate()
        .map(|(i, _)| RealMode {
            lambda: values[real_start + i].re,
        })
        .collect();

    Ok(Spectrum {
        pairs,
        real_modes,
        state_dim: dim,
        eigenvector_cond: cond,
        warnings,
    })
}

/// One-or-two Newton corrections of the pencil eigenpair through the
/// bordered system [[A − λB, Bv], [vᴴ, 0]]·[δ; s] = [−r; 0] with
/// λ ← λ − s, v ← v + δ. Drives ‖Av − λBv‖ to near round-off.
fn refine_eigenpair(sys: &FirstOrderSystem, lam: &mut C64, v: &mut CVector) {
    let dim = sys.dim();
    let scale = sys.a.norm() + lam.norm() * sys.b.norm();
    for _ in 0..2 {
        let av = complex_matvec_real(&sys.a, v);
        let bv = complex_matvec_real(&sys.b, v);
        let r = CVector::from_fn(dim, |i, _| av[i] - *lam * bv[i]);
        if r.norm() <= 1e-18 * scale * v.norm() {
            break;
        }
        let mut core = crate::linalg::CMatrix::zeros(dim, dim);
        for j in 0..dim {
            for i in 0..dim {
                core[(i, j)] = C64::new(sys.a[(i, j)], 0.0) - *lam * sys.b[(i, j)];
            }
        }
        let vbar = v.map(|x| x.conj());
        let Ok((delta, s)) =
            linalg::solve_bordered(&core, &[bv.clone()], &[vbar], &(-r), &[C64::new(0.0, 0.0)])
        else {
            break;
        };
        let step_ok = delta.norm() <= 0.5 * v.norm();
        if !step_ok {
            break;
        }
        *v += delta;
        *lam -= s[0];
    }
}

/// Rotate an eigenvector's phase so its largest-magnitude entry is real
/// positive, and normalize to unit length. Deterministic across runs.
fn phase_fix(v: &mut CVector) {
    let nrm = v.norm();
    if nrm > 0.0 {
        *v /= C64::new(nrm, 0.0);
    }
    let mut idx = 0;
    let mut best = 0.0;
    for (i, x) in v.iter().enumerate() {
        let m = x.norm();
        if m > best {
            best = m;
            idx = i;
        }
    }
    if best > 0.0 {
        let phase = v[idx] / v[idx].norm();
        let rot = phase.conj();
        for x in v.iter_mut() {
            *x *= rot;
        }
    }
}

/// Master spectral subspace: K conjugate pairs (dim 2K) with integer
/// resonance ratios η. Interleaved slot convention: slot 2k is pair k's
/// positive-imaginary member, slot 2k+1 its conjugate.
#[derive(Debug, Clone)]
pub struct MasterSubspace {
    pub pairs: Vec<EigenPair>,
    pub eta: Vec<u32>,
}

impl MasterSubspace {
    pub fn dim(&self) -> usize {
        2 * self.pairs.len()
    }

    pub fn n_pairs(&self) -> usize {
        self.pairs.len()
    }

    /// Eigenvalue at an interleaved slot.
    pub fn lambda_slot(&self, slot: usize) -> C64 {
        let p = &self.pairs[slot / 2];
        if slot % 2 == 0 {
            p.lambda
        } else {
            p.lambda.conj()
        }
    }

    pub fn v_slot(&self, slot: usize) -> CVector {
        let p = &self.pairs[slot / 2];
        if slot % 2 == 0 {
            p.v.clone()
        } else {
            p.v.map(|x| x.conj())
        }
    }

    pub fn w_slot(&self, slot: usize) -> CVector {
        let p = &self.pairs[slot / 2];
        if slot % 2 == 0 {
            p.w.clone()
        } else {
            p.w.map(|x| x.conj())
        }
    }

    /// Signed resonance ratio of a slot: +η_k on the leader, −η_k on the
    /// conjugate.
    pub fn nu_slot(&self, slot: usize) -> i64 {
        let eta = self.eta[slot / 2] as i64;
        if slot % 2 == 0 {
            eta
        } else {
            -eta
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum MasterSelection {
    /// Pair indices into the sorted spectrum.
    Pairs(Vec<usize>),
    /// Slowest pair plus every pair in small-integer ratio with it.
    Auto { max_pairs: usize, res_tol: f64 },
}

impl Default for MasterSelection {
    fn default() -> Self {
        MasterSelection::Auto {
            max_pairs: 3,
            res_tol: 0.02,
        }
    }
}

/// Rational approximation a/b of `ratio` with a + b ≤ 6.
fn small_integer_ratio(ratio: f64, tol: f64) -> Option<(u32, u32)> {
    let mut best: Option<(u32, u32, f64)> = None;
    for b in 1..=5u32 {
        for a in 1..=5u32 {
            if a + b > 6 {
                continue;
            }
            let r = a as f64 / b as f64;
            let err = (ratio - r).abs() / r;
            if err <= tol {
                match best {
                    Some((_, _, e)) if e <= err => {}
                    _ => best = Some((a, b, err)),
                }
            }
        }
    }
    best.map(|(a, b, _)| {
        let g = gcd(a, b);
        (a / g, b / g)
    })
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: u32, b: u32) -> u32 {
    a / gcd(a, b) * b
}

/// Select the master subspace.
pub fn select_master(spectrum: &Spectrum, selection: &MasterSelection) -> Result<MasterSubspace> {
    match selection {
        MasterSelection::Pairs(indices) => {
            if indices.is_empty() {
                return Err(Error::MasterSelection("empty selection".into()));
            }
            let mut pairs = Vec::with_capacity(indices.len());
            for &i in indices {
                let p = spectrum.pairs.get(i).ok_or_else(|| {
                    Error::MasterSelection(format!(
                        "pair index {i} out of range ({} pairs available)",
                        spectrum.pairs.len()
                    ))
                })?;
                pairs.push(p.clone());
            }
            // η from frequency ratios against the slowest selected pair.
            let eta = eta_from_pairs(&pairs, 0.02)?;
            Ok(MasterSubspace { pairs, eta })
        }
        MasterSelection::Auto { max_pairs, res_tol } => {
            if *res_tol < 0.0 {
                return Err(Error::MasterSelection(format!("res_tol = {res_tol} < 0")));
            }
            if spectrum.pairs.is_empty() {
                return Err(Error::MasterSelection("spectrum holds no oscillatory pairs".into()));
            }
            let slowest = spectrum
                .pairs
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.lambda.im.partial_cmp(&b.1.lambda.im).unwrap())
                .map(|(i, _)| i)
                .unwrap();
            let base = spectrum.pairs[slowest].lambda.im;
            let mut chosen = vec![slowest];
            for (i, p) in spectrum.pairs.iter().enumerate() {
                if i == slowest || chosen.len() >= *max_pairs {
                    continue;
                }
                let ratio = p.lambda.im / base;
                if small_integer_ratio(ratio, *res_tol).is_some() {
                    chosen.push(i);
                }
            }
            chosen.sort_unstable();
            let pairs: Vec<EigenPair> = chosen
                .iter()
                .map(|&i| spectrum.pairs[i].clone())
                .collect();
            let eta = eta_from_pairs(&pairs, (*res_tol).max(1e-12))?;
            Ok(MasterSubspace { pairs, eta })
        }
    }
}

fn eta_from_pairs(pairs: &[EigenPair], tol: f64) -> Result<Vec<u32>> {
    let base = pairs
        .iter()
        .map(|p| p.lambda.im)
        .fold(f64::INFINITY, f64::min);
    let mut fracs = Vec::with_capacity(pairs.len());
    for p in pairs {
        let ratio = p.lambda.im / base;
        let frac = small_integer_ratio(ratio, tol.max(0.05)).unwrap_or((ratio.round() as u32, 1));
        fracs.push(frac);
    }
    let denom = fracs.iter().fold(1u32, |acc, &(_, b)| lcm(acc, b));
    Ok(fracs.iter().map(|&(a, b)| a * denom / b).collect())
}

/// Pair indices whose frequency is externally resonant with the forcing:
/// |Im λ_j − Ω| ≤ ext_tol · Ω. With master ratios η = (1, 3) and Ω near the
/// slow mode, only the slow pair qualifies; the fast pair resonates
/// internally at 3Ω and is handled by the autonomous normal form.
pub fn external_resonance_set(master: &MasterSubspace, omega: f64, ext_tol: f64) -> Vec<usize> {
    master
        .pairs
        .iter()
        .enumerate()
        .filter(|(_, p)| (p.lambda.im - omega).abs() <= ext_tol * omega)
        .map(|(i, _)| i)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::beam::{build_rotating_beam, BeamSpec};
    use crate::model::duffing::{build_duffing, DuffingSpec};
    use crate::model::{shift_to_equilibrium, solve_static_equilibrium, EquilibriumOptions, TangentMethod};

    fn duffing_first_order(zeta: f64) -> FirstOrderSystem {
        let model = build_duffing(&DuffingSpec::with_zeta(1.0, zeta, 0.5)).unwrap();
        let shifted =
            shift_to_equilibrium(&model, &DVector::zeros(1), TangentMethod::Auto).unwrap();
        to_first_order(&shifted).unwrap()
    }

    #[test]
    fn duffing_blocks_match_by_hand() {
        let sys = duffing_first_order(0.001);
        // B = [[c, m], [m, 0]], A = [[−k, 0], [0, m]].
        assert!((sys.b[(0, 0)] - 0.002).abs() < 1e-15);
        assert!((sys.b[(0, 1)] - 1.0).abs() < 1e-15);
        assert!((sys.b[(1, 0)] - 1.0).abs() < 1e-15);
        assert!(sys.b[(1, 1)].abs() < 1e-15);
        assert!((sys.a[(0, 0)] + 1.0).abs() < 1e-15);
        assert!((sys.a[(1, 1)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn duffing_eigenvalue_quadratic_formula() {
        let zeta = 0.001;
        let sys = duffing_first_order(zeta);
        let spec = solve_spectrum(&sys, 2).unwrap();
        assert_eq!(spec.pairs.len(), 1);
        let lam = spec.pairs[0].lambda;
        let expected_re = -zeta;
        let expected_im = (1.0 - zeta * zeta).sqrt();
        assert!((lam.re - expected_re).abs() < 1e-12, "Re {}", lam.re);
        assert!((lam.im - expected_im).abs() < 1e-12, "Im {}", lam.im);
        assert!(spec.max_residual(&sys) < 1e-10);
        assert!(spec.max_biorthogonality_defect(&sys) < 1e-10);
    }

    #[test]
    fn undamped_beam_eigenvalues_match_natural_frequencies() {
        let spec = BeamSpec {
            n_elements: 8,
            spin_speed: 0.0,
            ..BeamSpec::default()
        };
        let model = build_rotating_beam(&spec).unwrap();
        let shifted =
            shift_to_equilibrium(&model, &DVector::zeros(model.n), TangentMethod::Auto).unwrap();
        let freqs = shifted.natural_frequencies().unwrap();
        let sys = to_first_order(&shifted).unwrap();
        let spectrum = solve_spectrum(&sys, 8).unwrap();
        for (i, p) in spectrum.pairs.iter().enumerate() {
            assert!(p.lambda.re.abs() < 1e-8 * p.lambda.im.abs());
            let rel = (p.lambda.im - freqs[i]).abs() / freqs[i];
            assert!(rel < 1e-8, "pair {i}: {} vs {}", p.lambda.im, freqs[i]);
        }
        assert!(spectrum.max_residual(&sys) < 1e-8);
        assert!(spectrum.max_biorthogonality_defect(&sys) < 1e-10);
    }

    #[test]
    fn force_depends_only_on_displacement_half() {
        let spec = BeamSpec::default().rpm(1000.0);
        let model = build_rotating_beam(&spec).unwrap();
        let u0 = solve_static_equilibrium(&model, &EquilibriumOptions::default()).unwrap();
        let shifted = shift_to_equilibrium(&model, &u0, TangentMethod::Auto).unwrap();
        let sys = to_first_order(&shifted).unwrap();
        use rand::prelude::*;
        let mut rng = rand::rngs::StdRng::seed_from_u64(17);
        let mut z = CVector::from_fn(sys.dim(), |_, _| {
            C64::new(rng.random_range(-0.01..0.01), rng.random_range(-0.01..0.01))
        });
        let f1 = sys.eval_force(&z);
        for i in sys.n..sys.dim() {
            z[i] += C64::new(rng.random_range(-1.0..1.0), 0.3);
        }
        let f2 = sys.eval_force(&z);
        assert!((f1 - f2).norm() < 1e-14);
    }

    #[test]
    fn first_order_residual_identity_random_points() {
        // B ż − A z − F(z) at (z, ż) consistent with the second-order
        // equation must vanish: change-of-variables identity.
        let spec = BeamSpec::default().rpm(1500.0);
        let model = build_rotating_beam(&spec).unwrap();
        let u0 = solve_static_equilibrium(&model, &EquilibriumOptions::default()).unwrap();
        let shifted = shift_to_equilibrium(&model, &u0, TangentMethod::Auto).unwrap();
        let sys = to_first_order(&shifted).unwrap();
        use rand::prelude::*;
        let mut rng = rand::rngs::StdRng::seed_from_u64(23);
        let n = sys.n;
        for _ in 0..5 {
            let u = DVector::from_fn(n, |_, _| rng.random_range(-1e-3..1e-3_f64));
            let v = DVector::from_fn(n, |_, _| rng.random_range(-1e-3..1e-3_f64));
            // Second-order acceleration: M a = −(C+G)v − K_t u − g_nl(u).
            let rhs = -(&shifted.model.damping + &shifted.model.coriolis) * &v
                - &shifted.k_t * &u
                - shifted.g_nl.eval_real(&u);
            let acc = shifted.model.mass.clone().lu().solve(&rhs).unwrap();
            // First-order: z = (u, v), ż = (v, a).
            let mut z = CVector::zeros(2 * n);
            let mut zdot = CVector::zeros(2 * n);
            for i in 0..n {
                z[i] = C64::new(u[i], 0.0);
                z[n + i] = C64::new(v[i], 0.0);
                zdot[i] = C64::new(v[i], 0.0);
                zdot[n + i] = C64::new(acc[i], 0.0);
            }
            let res = complex_matvec_real(&sys.b, &zdot)
                - complex_matvec_real(&sys.a, &z)
                - sys.eval_force(&z);
            let scale = complex_matvec_real(&sys.a, &z).norm().max(1e-30);
            assert!(res.norm() / scale < 1e-10, "identity residual {:.3e}", res.norm() / scale);
        }
    }

    #[test]
    fn nonzero_coriolis_makes_b_asymmetric_by_2g() {
        let spec = BeamSpec::default().rpm(1000.0);
        let model = build_rotating_beam(&spec).unwrap();
        let g_norm = model.coriolis.norm();
        assert!(g_norm > 0.0);
        let shifted =
            shift_to_equilibrium(&model, &DVector::zeros(model.n), TangentMethod::Auto).unwrap();
        let sys = to_first_order(&shifted).unwrap();
        let asym = (&sys.b - sys.b.transpose()).norm();
        assert!((asym - 2.0 * g_norm).abs() < 1e-9 * g_norm);
    }

    #[test]
    fn auto_master_single_mode() {
        let sys = duffing_first_order(0.001);
        let spectrum = solve_spectrum(&sys, 2).unwrap();
        let master = select_master(&spectrum, &MasterSelection::default()).unwrap();
        assert_eq!(master.dim(), 2);
        assert_eq!(master.eta, vec![1]);
    }

    #[test]
    fn explicit_selection_out_of_range_rejected() {
        let sys = duffing_first_order(0.001);
        let spectrum = solve_spectrum(&sys, 2).unwrap();
        assert!(select_master(&spectrum, &MasterSelection::Pairs(vec![3])).is_err());
    }

    #[test]
    fn external_resonance_set_cases() {
        let sys = duffing_first_order(0.001);
        let spectrum = solve_spectrum(&sys, 2).unwrap();
        let master = select_master(&spectrum, &MasterSelection::default()).unwrap();
        let w1 = master.pairs[0].lambda.im;
        // Far above every mode: empty.
        assert!(external_resonance_set(&master, 50.0 * w1, 0.1).is_empty());
        // At the mode: {0}.
        assert_eq!(external_resonance_set(&master, w1, 0.1), vec![0]);
    }

    #[test]
    fn small_integer_ratio_detection() {
        assert_eq!(small_integer_ratio(3.001, 0.02), Some((3, 1)));
        assert_eq!(small_integer_ratio(1.0, 0.02), Some((1, 1)));
        // 5/2 exceeds the p + q ≤ 6 budget.
        assert_eq!(small_integer_ratio(2.5, 0.02), None);
        assert_eq!(small_integer_ratio(2.0, 0.02), Some((2, 1)));
        assert_eq!(small_integer_ratio(6.27, 0.02), None);
        assert_eq!(small_integer_ratio(3.2, 0.02), None);
    }
}
