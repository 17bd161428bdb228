//! Butler-Volmer current density and Faraday front speed.
//!
//! Inputs and outputs are SI. The only non-SI values are the parameter
//! fields `a_diss` (mol/(cm^2 s)) and `c_solid` (mol/L), which carry the
//! units of the published parameter table and are converted here.

use crate::error::{PitError, Result};

/// Largest exponent accepted before `exp` would overflow.
pub const EXPONENT_GUARD: f64 = 700.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElectroParams {
    pub z: f64,
    /// Faraday constant, C/mol.
    pub faraday: f64,
    /// Gas constant, J/(mol K).
    pub gas_const: f64,
    /// Temperature, K.
    pub temperature: f64,
    /// Applied potential, V.
    pub v_app: f64,
    /// Dissolution rate constant, mol/(cm^2 s).
    pub a_diss: f64,
    /// Metal concentration in the solid, mol/L.
    pub c_solid: f64,
    pub alpha: f64,
    /// Electrolyte conductivity, S/m.
    pub sigma_c: f64,
}

impl Default for ElectroParams {
    fn default() -> Self {
        ElectroParams {
            z: 2.19,
            faraday: 96485.0,
            gas_const: 8.315,
            temperature: 298.15,
            v_app: -0.14,
            a_diss: 4.0,
            c_solid: 143.0,
            alpha: 0.5,
            sigma_c: 1.0,
        }
    }
}

impl ElectroParams {
    pub fn a_diss_si(&self) -> f64 {
        self.a_diss * 1e4
    }

    pub fn c_solid_si(&self) -> f64 {
        self.c_solid * 1e3
    }

    /// zF/(RT), 1/V.
    pub fn zf_over_rt(&self) -> f64 {
        self.z * self.faraday / (self.gas_const * self.temperature)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("z", self.z),
            ("faraday", self.faraday),
            ("gas_const", self.gas_const),
            ("temperature", self.temperature),
            ("a_diss", self.a_diss),
            ("c_solid", self.c_solid),
            ("sigma_c", self.sigma_c),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(PitError::Config {
                    key: key.into(),
                    message: format!("must be positive and finite, got {v}"),
                });
            }
        }
        if !self.v_app.is_finite() {
            return Err(PitError::Config {
                key: "v_app".into(),
                message: "must be finite".into(),
            });
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(PitError::Config {
                key: "alpha".into(),
                message: format!("must lie in (0, 1], got {}", self.alpha),
            });
        }
        Ok(())
    }
}

pub fn overpotential(p: &ElectroParams, v_corr: f64, phi: f64) -> f64 {
    p.v_app - v_corr - phi
}

/// Argument of the Butler-Volmer exponential, checked against the guard.
pub fn bv_exponent(p: &ElectroParams, v_corr: f64, phi: f64) -> Result<f64> {
    let exponent = p.zf_over_rt() * (v_corr + p.alpha * overpotential(p, v_corr, phi));
    if exponent > EXPONENT_GUARD || exponent.is_nan() {
        return Err(PitError::Overflow {
            exponent,
            v_corr,
            phi,
        });
    }
    Ok(exponent)
}

/// Anodic current density, A/m^2.
pub fn current_density(p: &ElectroParams, v_corr: f64, phi: f64) -> Result<f64> {
    Ok(p.z * p.faraday * p.a_diss_si() * bv_exponent(p, v_corr, phi)?.exp())
}

/// d(current_density)/d(phi), A/(m^2 V).
pub fn current_density_dphi(p: &ElectroParams, v_corr: f64, phi: f64) -> Result<f64> {
    Ok(-p.alpha * p.zf_over_rt() * current_density(p, v_corr, phi)?)
}

/// Normal front velocity, m/s.
pub fn normal_velocity(p: &ElectroParams, v_corr: f64, phi: f64) -> Result<f64> {
    Ok(p.a_diss_si() / p.c_solid_si() * bv_exponent(p, v_corr, phi)?.exp())
}

/// Normal front velocity in micrometres per second.
pub fn normal_velocity_um(p: &ElectroParams, v_corr: f64, phi: f64) -> Result<f64> {
    Ok(normal_velocity(p, v_corr, phi)? * 1e6)
}
