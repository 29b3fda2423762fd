//! Clamped–clamped rotor: flexible shaft spinning about its own axis with
//! lumped rigid disks.
//!
//! Euler–Bernoulli bending in the two transverse planes (v, w with slopes
//! θv = v′, θw = w′) plus the axial field u that carries the midline
//! stretching ε = u′ + ½(v′)² + ½(w′)². In the rotating frame the
//! transverse translational inertia produces the 2Ω̂ Coriolis coupling
//! between the planes and the −Ω̂² spin softening; disks add lumped
//! mass/inertia and the polar-inertia gyroscopic coupling J_p Ω̂ between the
//! tilt DOFs. A disk mounted with a transverse offset feels a static
//! centrifugal load, shifting the equilibrium and breaking the symmetry of
//! the nonlinear terms.

use std::ops::Neg;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{C64, CVector};
use crate::model::beam::{element_points, ElementPoint, Field};
use crate::model::{InternalForce, OutputDof, SecondOrderModel};

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DiskSpec {
    pub mass: f64,
    pub polar_inertia: f64,
    pub diametral_inertia: f64,
    /// Axial mounting position in (0, L); snapped to the nearest node.
    pub position: f64,
    /// Transverse offset of the disk center in the w-direction [m].
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ShaftSpec {
    pub length: f64,
    pub radius: f64,
    pub youngs_modulus: f64,
    pub density: f64,
    pub spin_speed: f64,
    pub n_elements: usize,
    pub disks: Vec<DiskSpec>,
    pub include_coriolis: bool,
}

impl Default for ShaftSpec {
    fn default() -> Self {
        // Steel shaft, two aluminum-like disks, spun about its axis.
        Self {
            length: 1.0,
            radius: 0.01,
            youngs_modulus: 210e9,
            density: 7850.0,
            spin_speed: 100.0,
            n_elements: 10,
            disks: vec![
                DiskSpec {
                    mass: 3.0,
                    polar_inertia: 0.012,
                    diametral_inertia: 0.006,
                    position: 0.3,
                    offset: 0.005,
                },
                DiskSpec {
                    mass: 1.8,
                    polar_inertia: 0.004,
                    diametral_inertia: 0.002,
                    position: 0.7,
                    offset: 0.0,
                },
            ],
            include_coriolis: true,
        }
    }
}

impl ShaftSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_elements < 2 {
            return Err(Error::InvalidSpec(format!(
                "n_elements = {} < 2",
                self.n_elements
            )));
        }
        for (name, v) in [
            ("length", self.length),
            ("radius", self.radius),
            ("youngs_modulus", self.youngs_modulus),
            ("density", self.density),
        ] {
            if v <= 0.0 {
                return Err(Error::InvalidSpec(format!("{name} = {v} must be positive")));
            }
        }
        for (i, d) in self.disks.iter().enumerate() {
            if d.position <= 0.0 || d.position >= self.length {
                return Err(Error::InvalidSpec(format!(
                    "disk {i} position {} outside (0, {})",
                    d.position, self.length
                )));
            }
            if d.mass < 0.0 || d.polar_inertia < 0.0 || d.diametral_inertia < 0.0 {
                return Err(Error::InvalidSpec(format!("disk {i} has negative inertia")));
            }
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        std::f64::consts::PI * self.radius * self.radius
    }

    pub fn second_moment(&self) -> f64 {
        std::f64::consts::PI * self.radius.powi(4) / 4.0
    }
}

/// One bending plane of a shaft element: local slots into the 10-slot
/// element DOF list (u1, v1, θv1, w1, θw1, u2, v2, θv2, w2, θw2).
const PLANE_V: [usize; 6] = [0, 1, 2, 5, 6, 7];
const PLANE_W: [usize; 6] = [0, 3, 4, 5, 8, 9];

struct ShaftElement {
    ea: f64,
    ei: f64,
    dof_map: [Option<usize>; 10],
    points: Vec<ElementPoint>,
}

impl ShaftElement {
    fn gather<T: Field>(&self, u: &[T]) -> [T; 10] {
        let mut q = [T::default(); 10];
        for (slot, dof) in self.dof_map.iter().enumerate() {
            if let Some(g) = dof {
                q[slot] = u[*g];
            }
        }
        q
    }

    fn add_internal_force<T: Field>(&self, u: &[T], out: &mut [T]) {
        let q = self.gather(u);
        for pt in &self.points {
            let mut du = T::default();
            let mut dv = T::default();
            let mut dw = T::default();
            let mut kv = T::default();
            let mut kw = T::default();
            for s in 0..6 {
                du += q[PLANE_V[s]] * pt.b_u[s];
                dv += q[PLANE_V[s]] * pt.b_v[s];
                kv += q[PLANE_V[s]] * pt.b_k[s];
                dw += q[PLANE_W[s]] * pt.b_v[s];
                kw += q[PLANE_W[s]] * pt.b_k[s];
            }
            let strain = du + dv * dv * 0.5 + dw * dw * 0.5;
            let n_force = strain * self.ea;
            for s in 0..6 {
                if let Some(g) = self.dof_map[PLANE_V[s]] {
                    let de = T::from_f64(pt.b_u[s]) + dv * pt.b_v[s];
                    out[g] += (n_force * de + kv * (self.ei * pt.b_k[s])) * pt.weight;
                }
                if let Some(g) = self.dof_map[PLANE_W[s]] {
                    // The axial slots overlap PLANE_V; count them only once.
                    let de = dw * pt.b_v[s];
                    let bend = kw * (self.ei * pt.b_k[s]);
                    if pt.b_u[s] == 0.0 {
                        out[g] += (n_force * de + bend) * pt.weight;
                    }
                }
            }
        }
    }

    fn add_tangent(&self, u: &[f64], k: &mut DMatrix<f64>) {
        let q = self.gather(u);
        for pt in &self.points {
            let mut du = 0.0;
            let mut dv = 0.0;
            let mut dw = 0.0;
            for s in 0..6 {
                du += q[PLANE_V[s]] * pt.b_u[s];
                dv += q[PLANE_V[s]] * pt.b_v[s];
                dw += q[PLANE_W[s]] * pt.b_v[s];
            }
            let strain = du + 0.5 * dv * dv + 0.5 * dw * dw;
            let n_force = self.ea * strain;
            // ∂ε/∂q over the 10 slots, plus per-plane curvature rows.
            let mut de = [0.0; 10];
            let mut bkv = [0.0; 10];
            let mut bkw = [0.0; 10];
            let mut bvv = [0.0; 10];
            let mut bvw = [0.0; 10];
            for s in 0..6 {
                de[PLANE_V[s]] += pt.b_u[s] + dv * pt.b_v[s];
                bkv[PLANE_V[s]] += pt.b_k[s];
                bvv[PLANE_V[s]] += pt.b_v[s];
                if pt.b_u[s] == 0.0 {
                    de[PLANE_W[s]] += dw * pt.b_v[s];
                    bkw[PLANE_W[s]] += pt.b_k[s];
                    bvw[PLANE_W[s]] += pt.b_v[s];
                }
            }
            for si in 0..10 {
                let Some(gi) = self.dof_map[si] else { continue };
                for sj in 0..10 {
                    let Some(gj) = self.dof_map[sj] else { continue };
                    let kk = self.ea * de[si] * de[sj]
                        + n_force * (bvv[si] * bvv[sj] + bvw[si] * bvw[sj])
                        + self.ei * (bkv[si] * bkv[sj] + bkw[si] * bkw[sj]);
                    k[(gi, gj)] += kk * pt.weight;
                }
            }
        }
    }
}

struct ShaftForce {
    n: usize,
    elements: Vec<ShaftElement>,
    softening: DMatrix<f64>,
}

impl ShaftForce {
    fn eval_generic<T: Field>(&self, u: &[T]) -> Vec<T> {
        let mut out = vec![T::default(); self.n];
        for el in &self.elements {
            el.add_internal_force(u, &mut out);
        }
        for j in 0..self.n {
            let uj = u[j];
            for i in 0..self.n {
                let c = self.softening[(i, j)];
                if c != 0.0 {
                    out[i] += uj * c;
                }
            }
        }
        out
    }
}

impl InternalForce for ShaftForce {
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
        let slice: Vec<f64> = u.iter().copied().collect();
        let mut k = self.softening.clone();
        for el in &self.elements {
            el.add_tangent(&slice, &mut k);
        }
        Some(k)
    }

    fn as_any(&self) -> &dyn std::any::Any {
        self
    }
}

/// Build the rotor model. DOF layout: nodes 1..n_el−1 free (both end nodes
/// clamped), 5 DOFs per free node in order [u, v, θv, w, θw].
pub fn build_rotating_shaft(spec: &ShaftSpec) -> Result<SecondOrderModel> {
    spec.validate()?;
    let n_el = spec.n_elements;
    let n_nodes = n_el + 1;
    let free_nodes = n_nodes - 2;
    let n = 5 * free_nodes;
    let h = spec.length / n_el as f64;
    let ea = spec.youngs_modulus * spec.area();
    let ei = spec.youngs_modulus * spec.second_moment();
    let rho_a = spec.density * spec.area();
    let omega = spec.spin_speed;

    let dof = |node: usize, comp: usize| -> Option<usize> {
        if node == 0 || node == n_nodes - 1 {
            None
        } else {
            Some(5 * (node - 1) + comp)
        }
    };

    let points = element_points(h);
    let mut elements = Vec::with_capacity(n_el);
    let mut mass = DMatrix::zeros(n, n);
    let mut m_transverse = DMatrix::zeros(n, n); // spin-softening basis
    let mut coriolis = DMatrix::zeros(n, n);
    let mut f_cen = DVector::zeros(n);

    for e in 0..n_el {
        let mut dof_map = [None; 10];
        for c in 0..5 {
            dof_map[c] = dof(e, c);
            dof_map[5 + c] = dof(e + 1, c);
        }
        // Consistent mass: axial (linear shapes) + both bending planes
        // (Hermite shapes); Coriolis couples the two transverse planes.
        for pt in &points {
            let wq = pt.weight * rho_a;
            for si in 0..6 {
                for sj in 0..6 {
                    let m_ax = wq * pt.n_u[si] * pt.n_u[sj];
                    let m_tr = wq * pt.n_v[si] * pt.n_v[sj];
                    if let (Some(gi), Some(gj)) = (dof_map[PLANE_V[si]], dof_map[PLANE_V[sj]]) {
                        mass[(gi, gj)] += m_ax + m_tr;
                        m_transverse[(gi, gj)] += m_tr;
                    }
                    if pt.n_u[si] == 0.0 && pt.n_u[sj] == 0.0 {
                        if let (Some(gi), Some(gj)) = (dof_map[PLANE_W[si]], dof_map[PLANE_W[sj]]) {
                            mass[(gi, gj)] += m_tr;
                            m_transverse[(gi, gj)] += m_tr;
                        }
                    }
                    // 2Ω̂ (w-plane row picks +N_w N_v, v-plane row −N_v N_w).
                    if spec.include_coriolis {
                        if let (Some(gi), Some(gj)) = (dof_map[PLANE_V[si]], dof_map[PLANE_W[sj]]) {
                            if pt.n_u[si] == 0.0 && pt.n_u[sj] == 0.0 {
                                coriolis[(gi, gj)] -= 2.0 * omega * m_tr;
                            }
                        }
                        if let (Some(gi), Some(gj)) = (dof_map[PLANE_W[si]], dof_map[PLANE_V[sj]]) {
                            if pt.n_u[si] == 0.0 && pt.n_u[sj] == 0.0 {
                                coriolis[(gi, gj)] += 2.0 * omega * m_tr;
                            }
                        }
                    }
                }
            }
        }
        elements.push(ShaftElement {
            ea,
            ei,
            dof_map,
            points: points.clone(),
        });
    }

    // Lumped disks.
    let mut output_dofs = Vec::new();
    for (di, disk) in spec.disks.iter().enumerate() {
        let node = ((disk.position / h).round() as usize).clamp(1, n_nodes - 2);
        let gu = dof(node, 0).unwrap();
        let gv = dof(node, 1).unwrap();
        let gtv = dof(node, 2).unwrap();
        let gw = dof(node, 3).unwrap();
        let gtw = dof(node, 4).unwrap();
        mass[(gu, gu)] += disk.mass;
        mass[(gv, gv)] += disk.mass;
        mass[(gw, gw)] += disk.mass;
        mass[(gtv, gtv)] += disk.diametral_inertia;
        mass[(gtw, gtw)] += disk.diametral_inertia;
        m_transverse[(gv, gv)] += disk.mass;
        m_transverse[(gw, gw)] += disk.mass;
        if spec.include_coriolis {
            coriolis[(gv, gw)] -= 2.0 * omega * disk.mass;
            coriolis[(gw, gv)] += 2.0 * omega * disk.mass;
            // Disk polar inertia couples the tilt DOFs.
            coriolis[(gtv, gtw)] -= omega * disk.polar_inertia;
            coriolis[(gtw, gtv)] += omega * disk.polar_inertia;
        }
        // Offset disk center: static centrifugal pull in w.
        f_cen[gw] += omega * omega * disk.mass * disk.offset;
        output_dofs.push(OutputDof {
            name: format!("disk{}_w", di + 1),
            index: gw,
        });
        output_dofs.push(OutputDof {
            name: format!("disk{}_v", di + 1),
            index: gv,
        });
    }

    let softening = m_transverse.neg() * (omega * omega);
    let softening_copy = softening.clone();
    let force = ShaftForce {
        n,
        elements,
        softening,
    };

    // Default harmonic load: transverse w at the first disk node (or
    // midspan when no disks are present).
    let mut load = DVector::zeros(n);
    let load_dof = if let Some(first) = output_dofs.first() {
        first.index
    } else {
        let mid = (n_nodes - 1) / 2;
        dof(mid.clamp(1, n_nodes - 2), 3).unwrap()
    };
    load[load_dof] = 1.0;
    if output_dofs.is_empty() {
        output_dofs.push(OutputDof {
            name: "mid_w".into(),
            index: load_dof,
        });
    }

    Ok(SecondOrderModel {
        n,
        mass,
        damping: DMatrix::zeros(n, n),
        coriolis,
        spin_speed: omega,
        internal: Arc::new(force),
        load_pattern: load,
        centrifugal_load: f_cen,
        static_preload: DVector::zeros(n),
        spin_softening: softening_copy,
        output_dofs,
        raw_tensors: None,
    })
}

/// Imaginary parts of the first whirl pair of the shifted shaft model,
/// (backward, forward), used by the splitting scans.
pub fn first_whirl_pair(spec: &ShaftSpec) -> Result<(f64, f64)> {
    use crate::model::{shift_to_equilibrium, solve_static_equilibrium, EquilibriumOptions, TangentMethod};
    use crate::spectral::{solve_spectrum, to_first_order};
    let model = build_rotating_shaft(spec)?;
    let u0 = solve_static_equilibrium(&model, &EquilibriumOptions::default())?;
    let shifted = shift_to_equilibrium(&model, &u0, TangentMethod::Auto)?;
    let sys = to_first_order(&shifted)?;
    let spectrum = solve_spectrum(&sys, 4)?;
    let mut freqs: Vec<f64> = spectrum.pairs.iter().map(|p| p.lambda.im).collect();
    freqs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok((freqs[0], freqs[1]))
}
