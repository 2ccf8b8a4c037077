//! Deterministic Harmonic Balance: alternating frequency/time residual
//! assembly, damped Newton root finding, deflation for coexisting solutions,
//! and predictor-corrector continuation of frequency-response branches.

mod continuation;
mod deflate;
mod newton;

pub use continuation::{continuation_sweep, Branch, BranchPoint, ContinuationConfig};
pub use deflate::{deflated_solve, deflation_factor, DeflationConfig, RootRecord, SolutionSet, Stability};
pub use newton::{inf_norm, newton_solve, NewtonConfig, NewtonDiagnostics};

use crate::dynamics::{Forcing, NominalGuess, OdeSystem, TimeDerivatives};
use crate::error::{Error, Result};
use crate::fourier::{
    differentiate, forward_transform, inverse_transform_unchecked, FourierGrid,
    HarmonicCoefficients,
};
use std::sync::Arc;

/// How the base frequency enters the unknown vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FrequencyClosure {
    /// Forced system: the frequency is a fixed datum.
    Fixed(f64),
    /// Self-excited system: the frequency is an unknown and the time-shift
    /// invariance is removed by pinning the first-harmonic sine amplitude of
    /// `anchor_state` to `anchor_value`.
    Free { anchor_state: usize, anchor_value: f64 },
}

/// Maps between the solver's real unknown vector and the coefficient set.
///
/// Per state the real layout is `[a_0, a_1, b_1, ..., a_H, b_H]`. For a free
/// frequency the anchored `b_1` entry is removed from the unknowns and the
/// frequency is appended at the end.
#[derive(Debug, Clone)]
pub struct HbLayout {
    n_d: usize,
    h: usize,
    closure: FrequencyClosure,
}

impl HbLayout {
    pub fn new(n_d: usize, h: usize, closure: FrequencyClosure) -> Result<Self> {
        if let FrequencyClosure::Free { anchor_state, .. } = closure {
            if h == 0 {
                return Err(Error::InvalidParameter(
                    "phase anchoring needs at least one harmonic".into(),
                ));
            }
            if anchor_state >= n_d {
                return Err(Error::InvalidParameter(format!(
                    "anchor state {anchor_state} out of range for {n_d} states"
                )));
            }
        }
        Ok(Self { n_d, h, closure })
    }

    pub fn state_dim(&self) -> usize {
        self.n_d
    }

    pub fn harmonic_order(&self) -> usize {
        self.h
    }

    pub fn closure(&self) -> FrequencyClosure {
        self.closure
    }

    fn entries(&self) -> usize {
        2 * self.h + 1
    }

    pub fn unknown_count(&self) -> usize {
        match self.closure {
            FrequencyClosure::Fixed(_) => self.n_d * self.entries(),
            FrequencyClosure::Free { .. } => self.n_d * self.entries(), // -1 anchor, +1 omega
        }
    }

    pub fn equation_count(&self) -> usize {
        self.n_d * self.entries()
    }

    /// Packs coefficients (and, for a free frequency, `omega`) into the
    /// unknown vector, dropping the anchored entry.
    pub fn pack(&self, coeffs: &HarmonicCoefficients, omega: f64) -> Vec<f64> {
        let full = coeffs.to_real_layout();
        match self.closure {
            FrequencyClosure::Fixed(_) => full,
            FrequencyClosure::Free { anchor_state, .. } => {
                let mut out = Vec::with_capacity(self.unknown_count());
                for (i, v) in full.iter().enumerate() {
                    if i != self.anchor_index(anchor_state) {
                        out.push(*v);
                    }
                }
                out.push(omega);
                out
            }
        }
    }

    /// Expands the unknown vector back into coefficients and frequency,
    /// reinserting the anchored value.
    pub fn unpack(&self, u: &[f64]) -> Result<(HarmonicCoefficients, f64)> {
        if u.len() != self.unknown_count() {
            return Err(Error::DimensionMismatch {
                context: "HbLayout::unpack",
                expected: self.unknown_count(),
                actual: u.len(),
            });
        }
        match self.closure {
            FrequencyClosure::Fixed(omega) => Ok((
                HarmonicCoefficients::from_real_layout(self.h, self.n_d, u)?,
                omega,
            )),
            FrequencyClosure::Free {
                anchor_state,
                anchor_value,
            } => {
                let omega = u[u.len() - 1];
                let mut full = Vec::with_capacity(self.n_d * self.entries());
                let anchor = self.anchor_index(anchor_state);
                let mut src = u[..u.len() - 1].iter();
                for i in 0..self.n_d * self.entries() {
                    if i == anchor {
                        full.push(anchor_value);
                    } else {
                        full.push(*src.next().expect("layout arithmetic"));
                    }
                }
                Ok((
                    HarmonicCoefficients::from_real_layout(self.h, self.n_d, &full)?,
                    omega,
                ))
            }
        }
    }

    /// Flat index of the anchored `b_1` entry in the full real layout.
    fn anchor_index(&self, anchor_state: usize) -> usize {
        anchor_state * self.entries() + 2
    }
}

/// A deterministic Harmonic Balance problem at a fixed parameter value.
pub struct HbProblem {
    pub system: Arc<dyn OdeSystem>,
    pub grid: FourierGrid,
    pub theta: f64,
    layout: HbLayout,
}

impl HbProblem {
    /// Problem for a forced system; the base frequency is the drive frequency.
    pub fn forced(system: Arc<dyn OdeSystem>, grid: FourierGrid, theta: f64) -> Result<Self> {
        let omega = match system.forcing() {
            Forcing::Forced { omega } => omega,
            Forcing::SelfExcited => {
                return Err(Error::InvalidParameter(
                    "system is self-excited; use HbProblem::self_excited".into(),
                ))
            }
        };
        Self::with_closure(system, grid, theta, FrequencyClosure::Fixed(omega))
    }

    /// Problem for a self-excited system with unknown frequency and a phase
    /// anchor fixing `b_1` of `anchor_state` to `anchor_value`.
    pub fn self_excited(
        system: Arc<dyn OdeSystem>,
        grid: FourierGrid,
        theta: f64,
        anchor_state: usize,
        anchor_value: f64,
    ) -> Result<Self> {
        if system.forcing() != Forcing::SelfExcited {
            return Err(Error::InvalidParameter(
                "system is forced; use HbProblem::forced".into(),
            ));
        }
        Self::with_closure(
            system,
            grid,
            theta,
            FrequencyClosure::Free {
                anchor_state,
                anchor_value,
            },
        )
    }

    /// Picks the closure from the system's forcing type, anchoring
    /// self-excited systems at the guess's first-harmonic sine amplitude.
    pub fn from_guess(
        system: Arc<dyn OdeSystem>,
        grid: FourierGrid,
        theta: f64,
        guess: &NominalGuess,
        anchor_state: usize,
    ) -> Result<Self> {
        match system.forcing() {
            Forcing::Forced { .. } => Self::forced(system, grid, theta),
            Forcing::SelfExcited => {
                let anchor_value = -2.0 * guess.coeffs.get(anchor_state, 1).im;
                Self::self_excited(system, grid, theta, anchor_state, anchor_value)
            }
        }
    }

    fn with_closure(
        system: Arc<dyn OdeSystem>,
        grid: FourierGrid,
        theta: f64,
        closure: FrequencyClosure,
    ) -> Result<Self> {
        if grid.state_dim() != system.hb_dim() {
            return Err(Error::DimensionMismatch {
                context: "HbProblem grid state dimension",
                expected: system.hb_dim(),
                actual: grid.state_dim(),
            });
        }
        let layout = HbLayout::new(system.hb_dim(), grid.harmonic_order(), closure)?;
        Ok(Self {
            system,
            grid,
            theta,
            layout,
        })
    }

    pub fn layout(&self) -> &HbLayout {
        &self.layout
    }

    /// Packs a steady-state capture into the unknown vector.
    pub fn initial_guess(&self, guess: &NominalGuess) -> Vec<f64> {
        self.layout.pack(&guess.coeffs, guess.omega)
    }

    /// Assembles the Galerkin residual at the given unknowns by the
    /// alternating frequency/time scheme.
    pub fn residual(&self, unknowns: &[f64]) -> Result<Vec<f64>> {
        let (coeffs, omega) = self.layout.unpack(unknowns)?;
        harmonic_residual(&*self.system, &self.grid, &coeffs, omega, self.theta)
    }
}

/// Alternating frequency/time evaluation of the Harmonic Balance residual:
/// evaluate the series and its derivatives on the time grid, apply the
/// system residual pointwise, and project back onto the retained harmonics.
/// Returns the projection in the real `[a_0, a_1, b_1, ...]` layout.
pub fn harmonic_residual(
    system: &dyn OdeSystem,
    grid: &FourierGrid,
    coeffs: &HarmonicCoefficients,
    omega: f64,
    theta: f64,
) -> Result<Vec<f64>> {
    if !(omega > 1e-12) || !omega.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "base frequency must be positive, got {omega}"
        )));
    }
    let n_d = grid.state_dim();
    let n_t = grid.time_samples();

    let positions = inverse_transform_unchecked(coeffs, grid);
    let vel_coeffs = differentiate(coeffs, omega);
    let velocities = inverse_transform_unchecked(&vel_coeffs, grid);
    let accelerations = if system.uses_second_derivative() {
        Some(inverse_transform_unchecked(
            &differentiate(&vel_coeffs, omega),
            grid,
        ))
    } else {
        None
    };

    let mut residual_samples = vec![0.0; n_t * n_d];
    let mut out_row = vec![0.0; n_d];
    for j in 0..n_t {
        let row = j * n_d..(j + 1) * n_d;
        let derivatives = TimeDerivatives {
            first: &velocities[row.clone()],
            second: accelerations.as_ref().map(|a| &a[row.clone()]),
        };
        // grid nodes are normalized phases; physical time rescales by omega
        let t = grid.nodes()[j] / omega;
        system.residual(&derivatives, &positions[row.clone()], t, theta, &mut out_row);
        if out_row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteResidual {
                time_index: j,
                quad_node: None,
            });
        }
        residual_samples[row].copy_from_slice(&out_row);
    }

    Ok(forward_transform(&residual_samples, grid)?.to_real_layout())
}
