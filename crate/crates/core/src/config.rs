//! Numerical thresholds shared by every module.
//!
//! Suites and the CLI read tolerances from one [`Tolerances`] record; a JSON
//! file may override any subset of fields.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Smallest admissible |denominator| and log/sqrt argument in jet arithmetic.
    pub jet_singular: f64,
    /// Gram determinant threshold for Gram-Schmidt.
    pub gram_det: f64,
    /// Sphericality check at load time, | |g| - 1 |.
    pub sphericality: f64,
    /// Rank check at load time, Gram determinant of the first partials.
    pub immersion_rank: f64,
    /// Shape operators below this norm count as vanishing.
    pub frame_ambiguity: f64,
    /// Finite-difference step for the normal connection form.
    pub omega_step: f64,
    /// Polar map regularity threshold on r.
    pub regularity: f64,
    /// 1 - K below this is treated as a flat point.
    pub near_flat: f64,
    /// Finite-difference step for frame functions and connection forms.
    pub fd_step: f64,
    /// Finite-difference step for the bundle Laplace-Beltrami operator.
    pub laplacian_step: f64,
    /// Step for the surface Laplace-Beltrami in the K-equation residual.
    pub pde_step: f64,
    /// Relative disagreement allowed between the two routes to u.
    pub u_mismatch: f64,
    /// Allowed deviation of flow speed from 1.
    pub flow_speed: f64,
    /// Blow-up threshold on |v| for the Riccati demo.
    pub blowup_threshold: f64,

    // Suite pass thresholds.
    pub orthonormality: f64,
    pub minimality: f64,
    pub superminimal_defect: f64,
    pub pde_residual: f64,
    pub principal_curvature_rel: f64,
    pub gauss_kronecker_rel: f64,
    pub polar_tangency: f64,
    pub expected_singular: f64,
    pub frame_residual: f64,
    pub conservation: f64,
    pub harmonic: f64,
    pub bridge: f64,
    pub quotient_rel: f64,
    pub superminimal_uv: f64,
    pub identity: f64,
    pub conformal: f64,
    pub planarity: f64,
    pub closure: f64,
    pub drift: f64,
    pub blowup_time: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            jet_singular: 1e-14,
            gram_det: 1e-20,
            sphericality: 1e-10,
            immersion_rank: 1e-12,
            frame_ambiguity: 1e-10,
            omega_step: 1e-4,
            regularity: 1e-10,
            near_flat: 1e-6,
            fd_step: 1e-4,
            laplacian_step: 1e-3,
            pde_step: 1e-2,
            u_mismatch: 1e-4,
            flow_speed: 1e-6,
            blowup_threshold: 1e6,

            orthonormality: 1e-10,
            minimality: 1e-8,
            superminimal_defect: 1e-8,
            pde_residual: 1e-6,
            principal_curvature_rel: 1e-7,
            gauss_kronecker_rel: 1e-9,
            polar_tangency: 1e-9,
            expected_singular: 1e-12,
            frame_residual: 1e-3,
            conservation: 1e-4,
            harmonic: 1e-3,
            bridge: 1e-6,
            quotient_rel: 1e-7,
            superminimal_uv: 1e-5,
            identity: 1e-10,
            conformal: 1e-9,
            planarity: 1e-6,
            closure: 1e-8,
            drift: 1e-6,
            blowup_time: 1e-3,
        }
    }
}

impl Tolerances {
    /// Parses a JSON object; absent fields keep their defaults.
    pub fn from_json(text: &str) -> Result<Self> {
        let tol: Tolerances =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("tolerance file: {e}")))?;
        tol.validate()?;
        Ok(tol)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = serde_json::to_value(self).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(map) = fields.as_object() {
            for (name, value) in map {
                match value.as_f64() {
                    Some(x) if x > 0.0 && x.is_finite() => {}
                    _ => {
                        return Err(Error::Config(format!(
                            "tolerance `{name}` must be positive and finite"
                        )))
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_override_keeps_defaults() {
        let tol = Tolerances::from_json(r#"{ "fd_step": 5e-5 }"#).unwrap();
        assert_eq!(tol.fd_step, 5e-5);
        assert_eq!(tol.regularity, Tolerances::default().regularity);
    }

    #[test]
    fn rejects_unknown_and_negative() {
        assert!(Tolerances::from_json(r#"{ "nope": 1.0 }"#).is_err());
        assert!(Tolerances::from_json(r#"{ "fd_step": -1.0 }"#).is_err());
    }
}
