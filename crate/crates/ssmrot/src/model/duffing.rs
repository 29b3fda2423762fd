//! Single-DOF oscillator with quadratic/cubic stiffness. Used for closed-form
//! checks throughout the test suite and as a CLI builder.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::CVector;
use crate::model::{InternalForce, OutputDof, SecondOrderModel};

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DuffingSpec {
    pub mass: f64,
    /// Viscous damping coefficient c (λ = −c/2m ± i√(k/m − ...)).
    pub damping: f64,
    pub stiffness: f64,
    pub quadratic: f64,
    pub cubic: f64,
}

impl Default for DuffingSpec {
    fn default() -> Self {
        Self {
            mass: 1.0,
            damping: 0.002,
            stiffness: 1.0,
            quadratic: 0.0,
            cubic: 0.5,
        }
    }
}

impl DuffingSpec {
    /// ζ, ω₀ parameterization: m = 1, k = ω₀², c = 2ζω₀.
    pub fn with_zeta(omega0: f64, zeta: f64, gamma: f64) -> Self {
        Self {
            mass: 1.0,
            damping: 2.0 * zeta * omega0,
            stiffness: omega0 * omega0,
            quadratic: 0.0,
            cubic: gamma,
        }
    }
}

struct DuffingForce {
    k: f64,
    beta: f64,
    gamma: f64,
}

impl InternalForce for DuffingForce {
    fn dim(&self) -> usize {
        1
    }

    fn eval(&self, u: &DVector<f64>) -> DVector<f64> {
        let x = u[0];
        DVector::from_element(1, self.k * x + self.beta * x * x + self.gamma * x * x * x)
    }

    fn eval_complex(&self, u: &CVector) -> CVector {
        let x = u[0];
        CVector::from_element(1, x * self.k + x * x * self.beta + x * x * x * self.gamma)
    }

    fn tangent(&self, u: &DVector<f64>) -> Option<DMatrix<f64>> {
        let x = u[0];
        Some(DMatrix::from_element(
            1,
            1,
            self.k + 2.0 * self.beta * x + 3.0 * self.gamma * x * x,
        ))
    }

    fn as_any(&self) -> &dyn std::any::Any {
        self
    }
}

pub fn build_duffing(spec: &DuffingSpec) -> Result<SecondOrderModel> {
    if spec.mass <= 0.0 || spec.stiffness <= 0.0 {
        return Err(Error::InvalidSpec(
            "Duffing mass and stiffness must be positive".into(),
        ));
    }
    Ok(SecondOrderModel {
        n: 1,
        mass: DMatrix::from_element(1, 1, spec.mass),
        damping: DMatrix::from_element(1, 1, spec.damping),
        coriolis: DMatrix::zeros(1, 1),
        spin_speed: 0.0,
        internal: Arc::new(DuffingForce {
            k: spec.stiffness,
            beta: spec.quadratic,
            gamma: spec.cubic,
        }),
        load_pattern: DVector::from_element(1, 1.0),
        centrifugal_load: DVector::zeros(1),
        static_preload: DVector::zeros(1),
        spin_softening: DMatrix::zeros(1, 1),
        output_dofs: vec![OutputDof {
            name: "x".into(),
            index: 0,
        }],
        raw_tensors: None,
    })
}
