//! Backbone curves of a single-mode ROM: amplitude-dependent response
//! frequency ω̂(ρ) = Im λ₁ + Σ_k Im(γ_k) ρ^{2k} over the resonant monomials
//! m = (k+1, k), with physical amplitude read off the manifold on a phase
//! grid.

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::ssm::{MultiIndex, SSMModel};

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BackbonePoint {
    pub rho: f64,
    pub omega_hat: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BackboneCurve {
    pub points: Vec<BackbonePoint>,
    pub output_dof: usize,
}

/// Im γ over the backbone monomials (k+1, k), ascending in k. The first
/// entry is the leading backbone coefficient whose sign separates hardening
/// from softening.
pub fn backbone_coefficients(ssm: &SSMModel) -> Result<Vec<f64>> {
    if ssm.dim_m() != 2 {
        return Err(Error::InvalidSpec(format!(
            "backbone requires a single-mode master (dim 2), got {}; use the FRC machinery",
            ssm.dim_m()
        )));
    }
    let mut out = Vec::new();
    let mut k = 1u8;
    loop {
        let m = MultiIndex(vec![k + 1, k]);
        if m.degree() > ssm.order {
            break;
        }
        match ssm.r.get(&m) {
            Some(c) => out.push(c[0].im),
            None => out.push(0.0),
        }
        k += 1;
    }
    Ok(out)
}

/// Evaluate the backbone over a grid of reduced amplitudes.
pub fn backbone(ssm: &SSMModel, rho_grid: &[f64], output_dof: usize) -> Result<BackboneCurve> {
    let gammas = backbone_coefficients(ssm)?;
    let omega1 = ssm.master.pairs[0].lambda.im;
    let n_theta = 64;
    let mut points = Vec::with_capacity(rho_grid.len());
    for &rho in rho_grid {
        let mut omega_hat = omega1;
        for (k, g) in gammas.iter().enumerate() {
            omega_hat += g * rho.powi(2 * (k as i32 + 1));
        }
        let mut amp = 0.0_f64;
        for i in 0..n_theta {
            let theta = 2.0 * std::f64::consts::PI * i as f64 / n_theta as f64;
            let ph = C64::new(0.0, theta).exp() * rho;
            let p = vec![ph, ph.conj()];
            let z = ssm.w.eval(&p);
            amp = amp.max(z[output_dof].re.abs());
        }
        points.push(BackbonePoint {
            rho,
            omega_hat,
            amplitude: amp,
        });
    }
    Ok(BackboneCurve { points, output_dof })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::duffing::{build_duffing, DuffingSpec};
    use crate::model::{shift_to_equilibrium, TangentMethod};
    use crate::spectral::{select_master, solve_spectrum, to_first_order, MasterSelection};
    use crate::ssm::{compute_autonomous_ssm, SsmOptions};
    use nalgebra::DVector;

    fn duffing_ssm(zeta: f64, gamma: f64, order: u32) -> SSMModel {
        let model = build_duffing(&DuffingSpec::with_zeta(1.0, zeta, gamma)).unwrap();
        let shifted =
            shift_to_equilibrium(&model, &DVector::zeros(1), TangentMethod::Auto).unwrap();
        let sys = to_first_order(&shifted).unwrap();
        let spectrum = solve_spectrum(&sys, 2).unwrap();
        let master = select_master(&spectrum, &MasterSelection::default()).unwrap();
        compute_autonomous_ssm(&sys, &master, order, &SsmOptions::default()).unwrap()
    }

    #[test]
    fn duffing_backbone_against_averaging_formula() {
        // ω̂(a) − ω₀ = (3γ/8ω₀) a² within 1% for a ≤ 0.1.
        let gamma = 0.5;
        let ssm = duffing_ssm(0.001, gamma, 5);
        let w_lin = ssm.master.pairs[0].lambda.im;
        let rho_grid: Vec<f64> = (2..=12).map(|i| 0.006 * i as f64).collect();
        let curve = backbone(&ssm, &rho_grid, 0).unwrap();
        for pt in &curve.points {
            if pt.amplitude > 0.1 {
                continue;
            }
            let predicted = w_lin + 3.0 * gamma / 8.0 * pt.amplitude * pt.amplitude;
            let rel = (pt.omega_hat - predicted).abs() / (predicted - w_lin).abs();
            assert!(
                rel < 0.01,
                "a = {:.3}: ω̂ = {:.6}, averaging {:.6}, rel {rel:.3e}",
                pt.amplitude,
                pt.omega_hat,
                predicted
            );
        }
    }

    #[test]
    fn rho_to_zero_recovers_linear_frequency() {
        let ssm = duffing_ssm(0.001, 0.5, 3);
        let curve = backbone(&ssm, &[1e-9], 0).unwrap();
        let w1 = ssm.master.pairs[0].lambda.im;
        assert!((curve.points[0].omega_hat - w1).abs() / w1 < 1e-8);
    }

    #[test]
    fn linear_model_backbone_is_flat() {
        // γ = 0: ω̂(ρ) ≡ Im λ₁ and amp = 2ρ|v₁ at output|.
        let ssm = duffing_ssm(0.001, 0.0, 3);
        let rho = 0.07;
        let curve = backbone(&ssm, &[rho], 0).unwrap();
        let w1 = ssm.master.pairs[0].lambda.im;
        assert!((curve.points[0].omega_hat - w1).abs() < 1e-12);
        let v_out = ssm.master.pairs[0].v[0].norm();
        let expected = 2.0 * rho * v_out;
        // The 64-point phase grid undershoots a pure sinusoid's maximum by
        // at most (π/64)²/2 ≈ 1.2e-3 relative.
        assert!(
            (curve.points[0].amplitude - expected).abs() / expected < 2e-3,
            "amp {} vs 2ρ|v| = {}",
            curve.points[0].amplitude,
            expected
        );
        assert!(curve.points[0].amplitude <= expected * (1.0 + 1e-12));
    }

    #[test]
    fn multi_mode_master_rejected() {
        let ssm = duffing_ssm(0.001, 0.5, 3);
        let mut fake = ssm.clone();
        fake.master.pairs.push(fake.master.pairs[0].clone());
        fake.master.eta.push(3);
        assert!(backbone_coefficients(&fake).is_err());
    }
}
