//! Van der Pol oscillator `x'' - mu (1 - x^2) x' + x = 0`, the self-excited
//! reference system: unknown base frequency, phase anchoring, odd-harmonic
//! structure.

use super::{Forcing, OdeSystem, TimeDerivatives};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VanDerPolParams {
    /// Damping parameter; a limit cycle exists for `mu > 0`.
    pub mu: f64,
}

#[derive(Debug, Clone)]
pub struct VanDerPol {
    params: VanDerPolParams,
}

impl VanDerPol {
    pub fn new(params: VanDerPolParams) -> Result<Self> {
        if !(params.mu > 0.0) || !params.mu.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "van der Pol damping must be positive and finite, got {}",
                params.mu
            )));
        }
        Ok(Self { params })
    }

    pub fn params(&self) -> VanDerPolParams {
        self.params
    }
}

impl OdeSystem for VanDerPol {
    fn name(&self) -> &str {
        "vanderpol"
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
        Forcing::SelfExcited
    }

    fn rhs(&self, _t: f64, state: &[f64], theta: f64, out: &mut [f64]) {
        let (x, v) = (state[0], state[1]);
        out[0] = v;
        out[1] = theta * (1.0 - x * x) * v - x;
    }

    fn residual(
        &self,
        derivatives: &TimeDerivatives,
        x: &[f64],
        _t: f64,
        theta: f64,
        out: &mut [f64],
    ) {
        let acc = derivatives.second.expect("van der Pol is second order")[0];
        let vel = derivatives.first[0];
        out[0] = acc - theta * (1.0 - x[0] * x[0]) * vel + x[0];
    }

    fn default_initial_state(&self, _theta: f64) -> Vec<f64> {
        // Near the limit cycle; the origin is an equilibrium and must be avoided.
        vec![2.0, 0.0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_is_an_equilibrium() {
        let system = VanDerPol::new(VanDerPolParams { mu: 1.0 }).unwrap();
        let mut r = [f64::NAN];
        system.residual(
            &TimeDerivatives {
                first: &[0.0],
                second: Some(&[0.0]),
            },
            &[0.0],
            0.0,
            1.0,
            &mut r,
        );
        assert_eq!(r[0], 0.0);
    }

    #[test]
    fn nonpositive_damping_is_rejected() {
        assert!(VanDerPol::new(VanDerPolParams { mu: 0.0 }).is_err());
        assert!(VanDerPol::new(VanDerPolParams { mu: -1.0 }).is_err());
    }

    #[test]
    fn rhs_and_residual_are_consistent() {
        let system = VanDerPol::new(VanDerPolParams { mu: 1.0 }).unwrap();
        for i in 0..24 {
            let x = (i as f64 * 0.5).sin() * 2.0;
            let v = (i as f64 * 0.9).cos() * 1.5;
            let theta = 0.8 + 0.02 * i as f64;
            let mut dydt = [0.0; 2];
            system.rhs(0.0, &[x, v], theta, &mut dydt);
            let mut r = [f64::NAN];
            system.residual(
                &TimeDerivatives {
                    first: &[dydt[0]],
                    second: Some(&[dydt[1]]),
                },
                &[x],
                0.0,
                theta,
                &mut r,
            );
            assert!(r[0].abs() < 1e-13);
        }
    }
}
