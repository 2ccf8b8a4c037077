//! Dynamical-system abstraction, reference systems, and the time-domain
//! machinery (adaptive integration, period detection, steady-state capture)
//! used for initial guesses and validation oracles.

mod duffing;
mod integrate;
mod vanderpol;

pub use duffing::{Duffing, DuffingParameter, DuffingParams};
pub use integrate::{
    estimate_period, integrate, nominal_steady_state, steady_state_fft, IntegrationConfig,
    NominalGuess, PeriodSpec, Trajectory,
};
pub use vanderpol::{VanDerPol, VanDerPolParams};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Arc;

/// Whether the base frequency is imposed by an external drive or is itself
/// an unknown of the periodic problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Forcing {
    Forced { omega: f64 },
    SelfExcited,
}

/// Time-derivative samples handed to a residual: first derivatives always,
/// second derivatives only for systems stated in second-order form.
#[derive(Debug, Clone, Copy)]
pub struct TimeDerivatives<'a> {
    pub first: &'a [f64],
    pub second: Option<&'a [f64]>,
}

/// A dynamical system with a time-domain right-hand side (first-order form,
/// used by the integrator) and a residual form (used by the spectral solver).
///
/// `hb_dim` counts the states carried as Fourier unknowns; for a system in
/// second-order form these are the positions, and the first-order state for
/// integration is `[positions, velocities]` of length `ode_dim`.
pub trait OdeSystem: Send + Sync {
    fn name(&self) -> &str;

    /// Number of states represented by Fourier series.
    fn hb_dim(&self) -> usize;

    /// First-order state dimension used by the time integrator.
    fn ode_dim(&self) -> usize;

    /// True if the residual consumes second time derivatives.
    fn uses_second_derivative(&self) -> bool;

    /// Declared polynomial degree of the nonlinearity (for oversampling).
    fn nonlinearity_degree(&self) -> usize;

    fn forcing(&self) -> Forcing;

    /// First-order right-hand side `dy/dt = f(y, t, theta)`.
    fn rhs(&self, t: f64, state: &[f64], theta: f64, out: &mut [f64]);

    /// Residual in the system's natural form, evaluated pointwise in time.
    /// `x` holds the `hb_dim` spectral states.
    fn residual(
        &self,
        derivatives: &TimeDerivatives,
        x: &[f64],
        t: f64,
        theta: f64,
        out: &mut [f64],
    );

    /// Starting state for steady-state integrations.
    fn default_initial_state(&self, theta: f64) -> Vec<f64>;
}

/// Builds a registered system by name. `parameters` overrides the system's
/// defaults; unknown keys are rejected. `uncertain` names the parameter the
/// random variable replaces (default: `alpha` for duffing, `mu` for
/// vanderpol).
pub fn by_name(
    name: &str,
    parameters: &BTreeMap<String, f64>,
    uncertain: Option<&str>,
) -> Result<Arc<dyn OdeSystem>> {
    match name {
        "duffing" => {
            let mut params = DuffingParams::table1();
            for (key, &value) in parameters {
                match key.as_str() {
                    "delta" => params.delta = value,
                    "alpha" => params.alpha = value,
                    "beta" => params.beta = value,
                    "gamma" => params.gamma = value,
                    "omega" => params.omega = value,
                    _ => {
                        return Err(Error::UnknownParameter {
                            system: "duffing",
                            name: key.clone(),
                        })
                    }
                }
            }
            let uncertain = match uncertain.unwrap_or("alpha") {
                "delta" => DuffingParameter::Delta,
                "alpha" => DuffingParameter::Alpha,
                "beta" => DuffingParameter::Beta,
                "gamma" => DuffingParameter::Gamma,
                other => {
                    return Err(Error::UnknownParameter {
                        system: "duffing",
                        name: format!("uncertain parameter `{other}`"),
                    })
                }
            };
            Ok(Arc::new(Duffing::new(params, uncertain)?))
        }
        "vanderpol" => {
            let mut params = VanDerPolParams { mu: 1.0 };
            for (key, &value) in parameters {
                match key.as_str() {
                    "mu" => params.mu = value,
                    _ => {
                        return Err(Error::UnknownParameter {
                            system: "vanderpol",
                            name: key.clone(),
                        })
                    }
                }
            }
            match uncertain {
                None | Some("mu") => {}
                Some(other) => {
                    return Err(Error::UnknownParameter {
                        system: "vanderpol",
                        name: format!("uncertain parameter `{other}`"),
                    })
                }
            }
            Ok(Arc::new(VanDerPol::new(params)?))
        }
        other => Err(Error::UnknownSystem(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_builds_known_systems() {
        let duffing = by_name("duffing", &BTreeMap::new(), None).unwrap();
        assert_eq!(duffing.name(), "duffing");
        assert!(matches!(duffing.forcing(), Forcing::Forced { omega } if omega == 1.4));

        let mut params = BTreeMap::new();
        params.insert("mu".to_string(), 2.0);
        let vdp = by_name("vanderpol", &params, Some("mu")).unwrap();
        assert_eq!(vdp.forcing(), Forcing::SelfExcited);
    }

    #[test]
    fn registry_rejects_unknown_names_and_keys() {
        assert!(matches!(
            by_name("lorenz", &BTreeMap::new(), None),
            Err(Error::UnknownSystem(_))
        ));
        let mut params = BTreeMap::new();
        params.insert("stiffness".to_string(), 1.0);
        assert!(matches!(
            by_name("duffing", &params, None),
            Err(Error::UnknownParameter { .. })
        ));
    }
}
