//! Dense linear-algebra kernels shared by the pipeline: a complex
//! Hessenberg + shifted-QR eigensolver (eigenvalues and right eigenvectors
//! of a general complex matrix), a symmetric-definite generalized
//! eigensolver, and bordered-system solves.
//!
//! The QR solver follows the classical explicit single-shift scheme
//! (Wilkinson shift, deflation by subdiagonal scan, Schur-vector
//! accumulation, triangular back-substitution). Matrices here are at most
//! a few thousand rows, so everything is dense.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

const MAX_QR_SWEEPS_PER_EIG: usize = 40;

/// Eigenvalues and right eigenvectors of a general complex matrix.
pub struct ComplexEigen {
    pub values: Vec<C64>,
    /// Column j is the (unit-norm) eigenvector for `values[j]`.
    pub vectors: CMatrix,
}

/// Full eigendecomposition of a general complex matrix.
pub fn complex_eigen(a: &CMatrix) -> Result<ComplexEigen> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "matrix must be square");
    if n == 0 {
        return Ok(ComplexEigen {
            values: Vec::new(),
            vectors: CMatrix::zeros(0, 0),
        });
    }

    let mut h = a.clone();
    let scale = balance(&mut h);
    let mut z = hessenberg(&mut h);
    qr_schur(&mut h, &mut z)?;

    let values: Vec<C64> = (0..n).map(|i| h[(i, i)]).collect();
    let mut vectors = triangular_eigenvectors(&h, &z);

    // Undo balancing and normalize.
    for j in 0..n {
        for i in 0..n {
            vectors[(i, j)] *= C64::new(scale[i], 0.0);
        }
        let nrm = vectors.column(j).norm();
        if nrm > 0.0 {
            for i in 0..n {
                vectors[(i, j)] /= C64::new(nrm, 0.0);
            }
        }
    }

    Ok(ComplexEigen { values, vectors })
}

/// Eigendecomposition of a real general matrix (complexified internally).
pub fn real_eigen(a: &DMatrix<f64>) -> Result<ComplexEigen> {
    let ac = a.map(|x| C64::new(x, 0.0));
    complex_eigen(&ac)
}

/// Parlett–Reinsch balancing: diagonal similarity D⁻¹ A D equalizing row and
/// column norms. Returns the diagonal of D; recover original-space
/// eigenvectors as x_i ← d_i · x_i.
fn balance(a: &mut CMatrix) -> Vec<f64> {
    let n = a.nrows();
    let mut d = vec![1.0_f64; n];
    let radix = 2.0_f64;
    loop {
        let mut converged = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].norm();
                    r += a[(i, j)].norm();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            while c < r / radix {
                c *= radix;
                r /= radix;
                f *= radix;
            }
            while c >= r * radix {
                c /= radix;
                r *= radix;
                f /= radix;
            }
            if (c + r) < 0.95 * s && f != 1.0 {
                converged = false;
                d[i] *= f;
                let inv = 1.0 / f;
                for j in 0..n {
                    a[(i, j)] *= C64::new(inv, 0.0);
                }
                for j in 0..n {
                    a[(j, i)] *= C64::new(f, 0.0);
                }
            }
        }
        if converged {
            break;
        }
    }
    d
}

/// Householder reduction to upper Hessenberg form; returns the accumulated
/// unitary Q with A = Q H Q*.
fn hessenberg(a: &mut CMatrix) -> CMatrix {
    let n = a.nrows();
    let mut q = CMatrix::identity(n, n);
    for k in 0..n.saturating_sub(2) {
        // Householder vector for column k, rows k+1..n.
        let mut v = CVector::zeros(n - k - 1);
        for i in 0..v.len() {
            v[i] = a[(k + 1 + i, k)];
        }
        let alpha = v.norm();
        if alpha == 0.0 {
            continue;
        }
        let a0 = v[0];
        let phase = if a0.norm() > 0.0 { a0 / a0.norm() } else { C64::new(1.0, 0.0) };
        v[0] += phase * C64::new(alpha, 0.0);
        let vnorm = v.norm();
        if vnorm == 0.0 {
            continue;
        }
        for i in 0..v.len() {
            v[i] /= C64::new(vnorm, 0.0);
        }
        // A ← (I − 2vv*) A : rows k+1..n.
        for j in 0..n {
            let mut dot = C64::new(0.0, 0.0);
            for i in 0..v.len() {
                dot += v[i].conj() * a[(k + 1 + i, j)];
            }
            let two_dot = dot * 2.0;
            for i in 0..v.len() {
                a[(k + 1 + i, j)] -= two_dot * v[i];
            }
        }
        // A ← A (I − 2vv*) : cols k+1..n.
        for i in 0..n {
            let mut dot = C64::new(0.0, 0.0);
            for j in 0..v.len() {
                dot += a[(i, k + 1 + j)] * v[j];
            }
            let two_dot = dot * 2.0;
            for j in 0..v.len() {
                a[(i, k + 1 + j)] -= two_dot * v[j].conj();
            }
        }
        // Q ← Q (I − 2vv*).
        for i in 0..n {
            let mut dot = C64::new(0.0, 0.0);
            for j in 0..v.len() {
                dot += q[(i, k + 1 + j)] * v[j];
            }
            let two_dot = dot * 2.0;
            for j in 0..v.len() {
                q[(i, k + 1 + j)] -= two_dot * v[j].conj();
            }
        }
        // Clean the column below the subdiagonal.
        for i in k + 2..n {
            a[(i, k)] = C64::new(0.0, 0.0);
        }
    }
    q
}

/// Complex Givens rotation zeroing `b` against `a`:
/// G = [[c, s], [-s̄, c]] with c real ≥ 0, so that G·(a, b)ᵀ = (r, 0)ᵀ.
fn givens(a: C64, b: C64) -> (f64, C64, C64) {
    if b.norm() == 0.0 {
        return (1.0, C64::new(0.0, 0.0), a);
    }
    if a.norm() == 0.0 {
        // r = |b|, s chosen so -s̄·a + c·b = 0 with c = 0 → s̄ b... pick s = b̄/|b|.
        let r = C64::new(b.norm(), 0.0);
        return (0.0, b.conj() / b.norm(), r);
    }
    let norm = (a.norm_sqr() + b.norm_sqr()).sqrt();
    let c = a.norm() / norm;
    let phase = a / a.norm();
    let s = phase * b.conj() / norm;
    let r = phase * norm;
    (c, s, r)
}

/// Explicit single-shift QR iteration reducing the Hessenberg matrix to
/// upper-triangular (complex Schur) form, accumulating transformations in `z`.
fn qr_schur(h: &mut CMatrix, z: &mut CMatrix) -> Result<()> {
    let n = h.nrows();
    let eps = f64::EPSILON;
    let mut hi = n - 1;
    let mut iter_at_hi = 0usize;
    let mut total_iter = 0usize;
    let max_total = MAX_QR_SWEEPS_PER_EIG * n.max(1);

    while hi > 0 {
        // Deflation scan: find the largest lo ≤ hi with a negligible
        // subdiagonal just above it.
        let mut lo = hi;
        while lo > 0 {
            let sub = h[(lo, lo - 1)].norm();
            let tol = eps * (h[(lo - 1, lo - 1)].norm() + h[(lo, lo)].norm()).max(f64::MIN_POSITIVE);
            if sub <= tol {
                h[(lo, lo - 1)] = C64::new(0.0, 0.0);
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            // Eigenvalue converged at hi.
            hi -= 1;
            iter_at_hi = 0;
            continue;
        }

        total_iter += 1;
        iter_at_hi += 1;
        if total_iter > max_total {
            return Err(Error::Eigen(format!(
                "QR iteration did not converge after {total_iter} sweeps (block {lo}..{hi})"
            )));
        }

        // Shift: Wilkinson (eigenvalue of trailing 2x2 closest to h[hi,hi]),
        // with an exceptional shift every 10 stalled sweeps.
        let shift = if iter_at_hi % 10 == 0 {
            h[(hi, hi)] + C64::new(h[(hi, hi - 1)].norm() * 0.75, 0.0)
        } else {
            wilkinson_shift(
                h[(hi - 1, hi - 1)],
                h[(hi - 1, hi)],
                h[(hi, hi - 1)],
                h[(hi, hi)],
            )
        };

        // Explicit shifted QR step on the active block [lo..=hi].
        for i in lo..=hi {
            h[(i, i)] -= shift;
        }
        let mut rots: Vec<(f64, C64)> = Vec::with_capacity(hi - lo);
        for k in lo..hi {
            let (c, s, r) = givens(h[(k, k)], h[(k + 1, k)]);
            h[(k, k)] = r;
            h[(k + 1, k)] = C64::new(0.0, 0.0);
            // Apply G to rows k, k+1 in the trailing columns.
            for j in k + 1..n {
                let x = h[(k, j)];
                let y = h[(k + 1, j)];
                h[(k, j)] = x * c + y * s;
                h[(k + 1, j)] = -x * s.conj() + y * c;
            }
            rots.push((c, s));
        }
        // RQ: apply G* from the right on columns k, k+1.
        for (idx, &(c, s)) in rots.iter().enumerate() {
            let k = lo + idx;
            let row_end = (k + 2).min(hi + 1);
            for i in 0..row_end {
                let x = h[(i, k)];
                let y = h[(i, k + 1)];
                h[(i, k)] = x * c + y * s.conj();
                h[(i, k + 1)] = -x * s + y * c;
            }
            for i in 0..z.nrows() {
                let x = z[(i, k)];
                let y = z[(i, k + 1)];
                z[(i, k)] = x * c + y * s.conj();
                z[(i, k + 1)] = -x * s + y * c;
            }
        }
        for i in lo..=hi {
            h[(i, i)] += shift;
        }
    }
    Ok(())
}

fn wilkinson_shift(a: C64, b: C64, c: C64, d: C64) -> C64 {
    // Eigenvalues of [[a, b], [c, d]] closest to d.
    let tr = a + d;
    let det = a * d - b * c;
    let disc = (tr * tr - det * 4.0).sqrt();
    let l1 = (tr + disc) * 0.5;
    let l2 = (tr - disc) * 0.5;
    if (l1 - d).norm() < (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

/// Right eigenvectors of the triangular Schur factor, mapped back through the
/// accumulated unitary `z`.
fn triangular_eigenvectors(t: &CMatrix, z: &CMatrix) -> CMatrix {
    let n = t.nrows();
    let tnorm = t.norm();
    let mut vectors = CMatrix::zeros(n, n);
    let mut y = vec![C64::new(0.0, 0.0); n];
    for k in 0..n {
        for e in y.iter_mut() {
            *e = C64::new(0.0, 0.0);
        }
        y[k] = C64::new(1.0, 0.0);
        let lam = t[(k, k)];
        let smin = (f64::EPSILON * lam.norm()).max(f64::EPSILON * tnorm).max(f64::MIN_POSITIVE);
        for i in (0..k).rev() {
            let mut s = C64::new(0.0, 0.0);
            for (j, yj) in y.iter().enumerate().take(k + 1).skip(i + 1) {
                s += t[(i, j)] * *yj;
            }
            let mut d = t[(i, i)] - lam;
            if d.norm() < smin {
                d = C64::new(smin, 0.0);
            }
            y[i] = -s / d;
            // Crude overflow guard for strongly non-normal blocks.
            let mag = y[i].norm();
            if mag > 1e120 {
                let inv = 1.0 / mag;
                for yj in y.iter_mut().take(k + 1) {
                    *yj *= C64::new(inv, 0.0);
                }
            }
        }
        for i in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for (j, yj) in y.iter().enumerate().take(k + 1) {
                acc += z[(i, j)] * *yj;
            }
            vectors[(i, k)] = acc;
        }
    }
    vectors
}

/// Generalized symmetric-definite eigenproblem K φ = ω² M φ with M SPD.
/// Returns (ascending ω² values, mass-normalized mode matrix).
pub fn sym_gen_eigen(k: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = k.nrows();
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Eigen("mass matrix is not positive definite".into()))?;
    let l = chol.l();
    // C = L⁻¹ K L⁻ᵀ, forced symmetric against rounding.
    let linv_k = l.solve_lower_triangular(k).ok_or_else(|| {
        Error::Eigen("singular Cholesky factor in symmetric generalized eigenproblem".into())
    })?;
    let linv_k_linvt = l
        .solve_lower_triangular(&linv_k.transpose())
        .ok_or_else(|| Error::Eigen("singular Cholesky factor".into()))?;
    let c = (&linv_k_linvt + linv_k_linvt.transpose()) * 0.5;
    let se = nalgebra::SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| se.eigenvalues[i].partial_cmp(&se.eigenvalues[j]).unwrap());
    let mut vals = Vec::with_capacity(n);
    let mut modes = DMatrix::zeros(n, n);
    for (col, &idx) in order.iter().enumerate() {
        vals.push(se.eigenvalues[idx]);
        let y = se.eigenvectors.column(idx).clone_owned();
        let phi = l
            .transpose()
            .solve_upper_triangular(&y)
            .ok_or_else(|| Error::Eigen("singular Cholesky factor".into()))?;
        modes.set_column(col, &phi);
    }
    Ok((vals, modes))
}

/// Undamped natural frequencies ω (rad/s, ascending) of (M, K).
pub fn natural_frequencies(k: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<Vec<f64>> {
    let (vals, _) = sym_gen_eigen(k, m)?;
    Ok(vals.iter().map(|&v| v.max(0.0).sqrt()).collect())
}

/// Solve the bordered complex system
/// ```text
/// [ core  cols ] [x]   [rhs ]
/// [ rows    0  ] [y] = [rhs2]
/// ```
/// where `rows[i]` enters as a row vector (taken as given — callers pass w*B
/// rows already conjugated as needed).
pub fn solve_bordered(
    core: &CMatrix,
    cols: &[CVector],
    rows: &[CVector],
    rhs: &CVector,
    rhs2: &[C64],
) -> Result<(CVector, Vec<C64>)> {
    let n = core.nrows();
    let r = cols.len();
    assert_eq!(rows.len(), r);
    assert_eq!(rhs2.len(), r);
    let dim = n + r;
    let mut aug = CMatrix::zeros(dim, dim);
    aug.view_mut((0, 0), (n, n)).copy_from(core);
    for (j, colv) in cols.iter().enumerate() {
        for i in 0..n {
            aug[(i, n + j)] = colv[i];
        }
    }
    for (i, rowv) in rows.iter().enumerate() {
        for j in 0..n {
            aug[(n + i, j)] = rowv[j];
        }
    }
    let mut b = CVector::zeros(dim);
    for i in 0..n {
        b[i] = rhs[i];
    }
    for (i, &v) in rhs2.iter().enumerate() {
        b[n + i] = v;
    }
    let lu = aug.lu();
    let sol = lu
        .solve(&b)
        .ok_or_else(|| Error::Singular("bordered system is singular".into()))?;
    let x = CVector::from_iterator(n, (0..n).map(|i| sol[i]));
    let y = (0..r).map(|i| sol[n + i]).collect();
    Ok((x, y))
}

/// Solve (core) x = rhs by LU, complex dense.
pub fn solve_complex(core: &CMatrix, rhs: &CVector) -> Result<CVector> {
    core.clone()
        .lu()
        .solve(rhs)
        .ok_or_else(|| Error::Singular("complex linear solve failed".into()))
}

/// Solve A x = b for real dense A.
pub fn solve_real(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Singular("real linear solve failed".into()))
}

/// 1-norm condition estimate from an explicit inverse (matrices here are
/// small enough that forming the inverse is acceptable).
pub fn cond_1(a: &CMatrix, a_inv: &CMatrix) -> f64 {
    norm_1(a) * norm_1(a_inv)
}

fn norm_1(a: &CMatrix) -> f64 {
    let mut best = 0.0_f64;
    for j in 0..a.ncols() {
        let s: f64 = (0..a.nrows()).map(|i| a[(i, j)].norm()).sum();
        best = best.max(s);
    }
    best
}
