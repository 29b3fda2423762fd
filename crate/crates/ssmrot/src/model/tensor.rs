//! Models defined by explicit polynomial tensors: F_int(u) = K u +
//! Σ Q_{ijk} u_j u_k + Σ T_{ijkl} u_j u_k u_l, evaluated by sparse
//! contraction over the stored entry lists. The raw tensors are retained on
//! the model so oracle tests can contract them independently.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{C64, CVector};
use crate::model::{InternalForce, OutputDof, SecondOrderModel};

/// Sparse quadratic entry: F_i += value · u_j · u_k.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct QuadEntry {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub value: f64,
}

/// Sparse cubic entry: F_i += value · u_j · u_k · u_l.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CubicEntry {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub l: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Default)]
pub struct RawTensors {
    pub stiffness: DMatrix<f64>,
    pub quadratic: Vec<QuadEntry>,
    pub cubic: Vec<CubicEntry>,
}

pub struct TensorForce {
    pub n: usize,
    pub stiffness: DMatrix<f64>,
    pub quadratic: Vec<QuadEntry>,
    pub cubic: Vec<CubicEntry>,
}

impl TensorForce {
    fn eval_generic<T>(&self, u: &[T]) -> Vec<T>
    where
        T: Copy + Default + std::ops::Mul<Output = T> + std::ops::AddAssign + std::ops::Mul<f64, Output = T>,
    {
        let mut out = vec![T::default(); self.n];
        for i in 0..self.n {
            for j in 0..self.n {
                let k = self.stiffness[(i, j)];
                if k != 0.0 {
                    out[i] += u[j] * k;
                }
            }
        }
        for e in &self.quadratic {
            out[e.i] += (u[e.j] * u[e.k]) * e.value;
        }
        for e in &self.cubic {
            out[e.i] += (u[e.j] * u[e.k] * u[e.l]) * e.value;
        }
        out
    }
}

impl InternalForce for TensorForce {
    fn dim(&self) -> usize {
        self.n
    }

    fn eval(&self, u: &DVector<f64>) -> DVector<f64> {
        let slice: Vec<f64> = u.iter().copied().collect();
        DVector::from_vec(self.eval_generic(&slice))
    }

    fn eval_complex(&self, u: &CVector) -> CVector {
        let slice: Vec<C64> = u.iter().copied().collect();
        CVector::from_vec(self.eval_generic(&slice))
    }

    fn tangent(&self, u: &DVector<f64>) -> Option<DMatrix<f64>> {
        let mut k = self.stiffness.clone();
        for e in &self.quadratic {
            k[(e.i, e.j)] += e.value * u[e.k];
            k[(e.i, e.k)] += e.value * u[e.j];
        }
        for e in &self.cubic {
            k[(e.i, e.j)] += e.value * u[e.k] * u[e.l];
            k[(e.i, e.k)] += e.value * u[e.j] * u[e.l];
            k[(e.i, e.l)] += e.value * u[e.j] * u[e.k];
        }
        Some(k)
    }

    fn as_any(&self) -> &dyn std::any::Any {
        self
    }
}

/// Assemble a tensor-backed model from in-memory parts (the file loader in
/// [`crate::model::io`] parses into this).
#[allow(clippy::too_many_arguments)]
pub fn build_tensor_model(
    n: usize,
    mass: DMatrix<f64>,
    damping: DMatrix<f64>,
    coriolis: DMatrix<f64>,
    spin_speed: f64,
    stiffness: DMatrix<f64>,
    quadratic: Vec<QuadEntry>,
    cubic: Vec<CubicEntry>,
    load_pattern: DVector<f64>,
    centrifugal_load: DVector<f64>,
    output_dofs: Vec<OutputDof>,
) -> Result<SecondOrderModel> {
    for (name, m) in [("M", &mass), ("C", &damping), ("G", &coriolis), ("K", &stiffness)] {
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::InvalidSpec(format!(
                "{name} is {}×{}, expected {n}×{n}",
                m.nrows(),
                m.ncols()
            )));
        }
    }
    for e in &quadratic {
        if e.i >= n || e.j >= n || e.k >= n {
            return Err(Error::InvalidSpec(format!(
                "quadratic entry index out of range: ({}, {}, {}) with n = {n}",
                e.i, e.j, e.k
            )));
        }
    }
    for e in &cubic {
        if e.i >= n || e.j >= n || e.k >= n || e.l >= n {
            return Err(Error::InvalidSpec(format!(
                "cubic entry index out of range: ({}, {}, {}, {}) with n = {n}",
                e.i, e.j, e.k, e.l
            )));
        }
    }
    let raw = RawTensors {
        stiffness: stiffness.clone(),
        quadratic: quadratic.clone(),
        cubic: cubic.clone(),
    };
    Ok(SecondOrderModel {
        n,
        mass,
        damping,
        coriolis,
        spin_speed,
        internal: Arc::new(TensorForce {
            n,
            stiffness,
            quadratic,
            cubic,
        }),
        load_pattern,
        centrifugal_load,
        static_preload: DVector::zeros(n),
        spin_softening: DMatrix::zeros(n, n),
        output_dofs,
        raw_tensors: Some(raw),
    })
}

/// Random tensor model for oracle suites: symmetric positive mass, symmetric
/// positive-definite stiffness, light damping, plus random sparse
/// quadratic/cubic entries of moderate magnitude.
pub fn random_tensor_model(n: usize, seed: u64, nl_scale: f64) -> SecondOrderModel {
    use rand::prelude::*;
    use rand::rngs::StdRng;
    let mut rng = StdRng::seed_from_u64(seed);

    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-0.5..0.5_f64));
    let mass = &a * a.transpose() + DMatrix::identity(n, n) * (n as f64);
    let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-0.5..0.5_f64));
    let stiffness = &b * b.transpose() + DMatrix::identity(n, n) * (2.0 * n as f64);
    let damping = DMatrix::identity(n, n) * 0.01;

    let n_quad = 3 * n;
    let n_cub = 3 * n;
    let mut quadratic = Vec::with_capacity(n_quad);
    for _ in 0..n_quad {
        quadratic.push(QuadEntry {
            i: rng.random_range(0..n),
            j: rng.random_range(0..n),
            k: rng.random_range(0..n),
            value: nl_scale * rng.random_range(-1.0..1.0_f64),
        });
    }
    let mut cubic = Vec::with_capacity(n_cub);
    for _ in 0..n_cub {
        cubic.push(CubicEntry {
            i: rng.random_range(0..n),
            j: rng.random_range(0..n),
            k: rng.random_range(0..n),
            l: rng.random_range(0..n),
            value: nl_scale * rng.random_range(-1.0..1.0_f64),
        });
    }
    let load = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0_f64));

    build_tensor_model(
        n,
        mass,
        damping,
        DMatrix::zeros(n, n),
        0.0,
        stiffness,
        quadratic,
        cubic,
        load,
        DVector::zeros(n),
        vec![OutputDof {
            name: "dof0".into(),
            index: 0,
        }],
    )
    .expect("random model dimensions are consistent")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand::rngs::StdRng;

    /// Dense contraction oracle: builds full dense Q[n³] and T[n⁴] arrays and
    /// contracts them directly, independent of the sparse evaluation path.
    fn dense_oracle(force: &TensorForce, u: &[f64]) -> Vec<f64> {
        let n = force.n;
        let mut q = vec![0.0; n * n * n];
        for e in &force.quadratic {
            q[(e.i * n + e.j) * n + e.k] += e.value;
        }
        let mut t = vec![0.0; n * n * n * n];
        for e in &force.cubic {
            t[((e.i * n + e.j) * n + e.k) * n + e.l] += e.value;
        }
        let mut out = vec![0.0; n];
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += force.stiffness[(i, j)] * u[j];
                for k in 0..n {
                    acc += q[(i * n + j) * n + k] * u[j] * u[k];
                    for l in 0..n {
                        acc += t[((i * n + j) * n + k) * n + l] * u[j] * u[k] * u[l];
                    }
                }
            }
            out[i] = acc;
        }
        out
    }

    #[test]
    fn sparse_contraction_matches_dense_oracle() {
        let n = 10;
        let model = random_tensor_model(n, 42, 1.0);
        let force = model.internal.as_any().downcast_ref::<TensorForce>().unwrap();
        let mut rng = StdRng::seed_from_u64(1);
        for _ in 0..5 {
            let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let got = force.eval(&DVector::from_vec(u.clone()));
            let want = dense_oracle(force, &u);
            let scale: f64 = want.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-30);
            let err: f64 = got
                .iter()
                .zip(want.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
                / scale;
            assert!(err < 1e-13, "sparse vs dense contraction error {err:.3e}");
        }
    }

    #[test]
    fn complex_eval_matches_direct_complex_contraction() {
        let n = 8;
        let model = random_tensor_model(n, 7, 1.0);
        let force = model.internal.as_any().downcast_ref::<TensorForce>().unwrap();
        let mut rng = StdRng::seed_from_u64(2);
        let u = CVector::from_fn(n, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let got = force.eval_complex(&u);
        // Direct dense complex contraction.
        let mut want = CVector::zeros(n);
        for i in 0..n {
            for j in 0..n {
                want[i] += u[j] * force.stiffness[(i, j)];
            }
        }
        for e in &force.quadratic {
            want[e.i] += u[e.j] * u[e.k] * e.value;
        }
        for e in &force.cubic {
            want[e.i] += u[e.j] * u[e.k] * u[e.l] * e.value;
        }
        let err = (got - want).norm();
        assert!(err < 1e-12, "complex contraction error {err:.3e}");
    }

    #[test]
    fn tangent_matches_finite_differences() {
        let n = 6;
        let model = random_tensor_model(n, 3, 1.0);
        let mut rng = StdRng::seed_from_u64(5);
        let u = DVector::from_fn(n, |_, _| rng.random_range(-0.5..0.5_f64));
        let analytic = model.internal.tangent(&u).unwrap();
        let fd = crate::model::fd_jacobian(model.internal.as_ref(), &u, 1e-6);
        let rel = (&analytic - &fd).norm() / analytic.norm();
        assert!(rel < 1e-7, "tensor tangent mismatch {rel:.3e}");
    }

    #[test]
    fn out_of_range_entries_rejected() {
        let n = 3;
        let res = build_tensor_model(
            n,
            DMatrix::identity(n, n),
            DMatrix::zeros(n, n),
            DMatrix::zeros(n, n),
            0.0,
            DMatrix::identity(n, n),
            vec![QuadEntry {
                i: 0,
                j: 5,
                k: 0,
                value: 1.0,
            }],
            vec![],
            DVector::zeros(n),
            DVector::zeros(n),
            vec![],
        );
        assert!(res.is_err());
    }
}
