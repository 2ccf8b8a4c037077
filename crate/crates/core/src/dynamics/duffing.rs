//! Forced Duffing oscillator in second-order residual form:
//! `x'' + delta x' + alpha x + beta x^3 = gamma cos(Omega t)`.

use super::{Forcing, OdeSystem, TimeDerivatives};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Mass-normalized Duffing parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DuffingParams {
    /// Viscous damping, 1/s.
    pub delta: f64,
    /// Linear stiffness, 1/s^2.
    pub alpha: f64,
    /// Cubic stiffness, 1/(s^2 m^2).
    pub beta: f64,
    /// Forcing amplitude, m/s^2.
    pub gamma: f64,
    /// Forcing frequency, rad/s.
    pub omega: f64,
}

impl DuffingParams {
    /// The benchmark parameter set: `delta = 0.08`, `beta = 1`, `gamma = 0.2`,
    /// `Omega = 1.4`, with nominal linear stiffness `alpha = 1`.
    pub fn table1() -> Self {
        Self {
            delta: 0.08,
            alpha: 1.0,
            beta: 1.0,
            gamma: 0.2,
            omega: 1.4,
        }
    }

    fn validate(&self) -> Result<()> {
        let values = [self.delta, self.alpha, self.beta, self.gamma, self.omega];
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "duffing parameters must be finite".into(),
            ));
        }
        if self.gamma < 0.0 {
            return Err(Error::InvalidParameter(
                "duffing forcing amplitude must be non-negative".into(),
            ));
        }
        if self.omega <= 0.0 {
            return Err(Error::InvalidParameter(
                "duffing forcing frequency must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Which scalar parameter the random variable replaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DuffingParameter {
    Delta,
    Alpha,
    Beta,
    Gamma,
}

#[derive(Debug, Clone)]
pub struct Duffing {
    params: DuffingParams,
    uncertain: DuffingParameter,
}

impl Duffing {
    pub fn new(params: DuffingParams, uncertain: DuffingParameter) -> Result<Self> {
        params.validate()?;
        Ok(Self { params, uncertain })
    }

    pub fn params(&self) -> DuffingParams {
        self.params
    }

    /// Same oscillator driven at a different frequency; used by frequency
    /// sweeps.
    pub fn with_forcing_frequency(&self, omega: f64) -> Result<Self> {
        let params = DuffingParams {
            omega,
            ..self.params
        };
        Self::new(params, self.uncertain)
    }

    #[inline]
    fn effective(&self, theta: f64) -> DuffingParams {
        let mut p = self.params;
        match self.uncertain {
            DuffingParameter::Delta => p.delta = theta,
            DuffingParameter::Alpha => p.alpha = theta,
            DuffingParameter::Beta => p.beta = theta,
            DuffingParameter::Gamma => p.gamma = theta,
        }
        p
    }
}

impl OdeSystem for Duffing {
    fn name(&self) -> &str {
        "duffing"
    }

    fn hb_dim(&self) -> usize {
        1
    }

    fn ode_dim(&self) -> usize {
        2
    }

    fn uses_second_derivative(&self) -> bool {
        true
    }

    fn nonlinearity_degree(&self) -> usize {
        3
    }

    fn forcing(&self) -> Forcing {
        Forcing::Forced {
            omega: self.params.omega,
        }
    }

    fn rhs(&self, t: f64, state: &[f64], theta: f64, out: &mut [f64]) {
        let p = self.effective(theta);
        let (x, v) = (state[0], state[1]);
        out[0] = v;
        out[1] = -p.delta * v - p.alpha * x - p.beta * x * x * x + p.gamma * (p.omega * t).cos();
    }

    fn residual(
        &self,
        derivatives: &TimeDerivatives,
        x: &[f64],
        t: f64,
        theta: f64,
        out: &mut [f64],
    ) {
        let p = self.effective(theta);
        let acc = derivatives.second.expect("duffing is second order")[0];
        let vel = derivatives.first[0];
        out[0] =
            acc + p.delta * vel + p.alpha * x[0] + p.beta * x[0] * x[0] * x[0]
                - p.gamma * (p.omega * t).cos();
    }

    fn default_initial_state(&self, _theta: f64) -> Vec<f64> {
        // Moderate displacement inside the large-amplitude basin of the
        // benchmark band; from rest the trajectory settles on the small
        // branch instead. Basins interleave, so steady-state captures that
        // must track a specific branch should pass their own start.
        vec![1.2, 0.0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn table1() -> Duffing {
        Duffing::new(DuffingParams::table1(), DuffingParameter::Alpha).unwrap()
    }

    #[test]
    fn table1_values() {
        let p = table1().params();
        assert_eq!(
            (p.delta, p.beta, p.gamma, p.omega),
            (0.08, 1.0, 0.2, 1.4)
        );
    }

    #[test]
    fn trivial_equilibrium_of_unforced_linear_case() {
        let system = Duffing::new(
            DuffingParams {
                beta: 0.0,
                gamma: 0.0,
                ..DuffingParams::table1()
            },
            DuffingParameter::Alpha,
        )
        .unwrap();
        let mut out = [f64::NAN];
        system.residual(
            &TimeDerivatives {
                first: &[0.0],
                second: Some(&[0.0]),
            },
            &[0.0],
            0.3,
            1.0,
            &mut out,
        );
        assert_eq!(out[0], 0.0);
    }

    #[test]
    fn linear_oscillator_closed_form_annihilates_residual() {
        // beta = 0: steady state a cos(W t) + b sin(W t) with
        // a = gamma (alpha - W^2)/D, b = gamma delta W / D, D = (alpha-W^2)^2 + (delta W)^2
        let system = Duffing::new(
            DuffingParams {
                beta: 0.0,
                ..DuffingParams::table1()
            },
            DuffingParameter::Alpha,
        )
        .unwrap();
        let (alpha, delta, gamma, omega) = (1.0f64, 0.08f64, 0.2f64, 1.4f64);
        let det = (alpha - omega * omega).powi(2) + (delta * omega).powi(2);
        let a = gamma * (alpha - omega * omega) / det;
        let b = gamma * delta * omega / det;
        for i in 0..32 {
            let t = i as f64 * 0.31;
            let (s, c) = (omega * t).sin_cos();
            let x = a * c + b * s;
            let v = omega * (-a * s + b * c);
            let acc = -omega * omega * x;
            let mut out = [f64::NAN];
            system.residual(
                &TimeDerivatives {
                    first: &[v],
                    second: Some(&[acc]),
                },
                &[x],
                t,
                alpha,
                &mut out,
            );
            assert_abs_diff_eq!(out[0], 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn residual_is_odd_under_sign_flip_of_state_and_forcing() {
        let system = table1();
        let flipped = Duffing::new(
            DuffingParams {
                gamma: -0.2,
                omega: 1.4,
                ..DuffingParams::table1()
            },
            DuffingParameter::Alpha,
        );
        // gamma < 0 rejected by validation; flip by evaluating at t + T/2 instead
        assert!(flipped.is_err());
        let period = 2.0 * std::f64::consts::PI / 1.4;
        for i in 0..16 {
            let t = i as f64 * 0.21;
            let (x, v, acc, theta) = (0.7, -0.3, 0.4, 1.05);
            let mut r = [0.0];
            let mut r_flip = [0.0];
            system.residual(
                &TimeDerivatives {
                    first: &[v],
                    second: Some(&[acc]),
                },
                &[x],
                t,
                theta,
                &mut r,
            );
            system.residual(
                &TimeDerivatives {
                    first: &[-v],
                    second: Some(&[-acc]),
                },
                &[-x],
                t + 0.5 * period,
                theta,
                &mut r_flip,
            );
            assert_abs_diff_eq!(r_flip[0], -r[0], epsilon = 1e-14);
        }
    }

    #[test]
    fn rhs_and_residual_are_consistent() {
        let system = table1();
        for i in 0..24 {
            let x = (i as f64 * 0.7).sin() * 1.3;
            let v = (i as f64 * 1.1).cos() * 0.8;
            let t = i as f64 * 0.13;
            let theta = 0.9 + 0.02 * i as f64;
            let mut dydt = [0.0; 2];
            system.rhs(t, &[x, v], theta, &mut dydt);
            let mut r = [f64::NAN];
            system.residual(
                &TimeDerivatives {
                    first: &[dydt[0]],
                    second: Some(&[dydt[1]]),
                },
                &[x],
                t,
                theta,
                &mut r,
            );
            assert_abs_diff_eq!(r[0], 0.0, epsilon = 1e-13);
        }
    }
}
