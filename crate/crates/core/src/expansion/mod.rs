//! The combined Fourier x polynomial-chaos Galerkin system: coefficient
//! layout, residual assembly over the quadrature nodes, the initial-guess
//! pipeline, the multi-branch solve driver, and the serializable surrogate.
//!
//! The surrogate ansatz expands every Fourier amplitude in the orthonormal
//! polynomial basis of the random parameter,
//! `x(t, theta) = sum_k sum_m q_km exp(i k w t) Phi_m(theta)`;
//! for self-excited systems the base frequency gets its own expansion
//! `w(theta) = sum_m q_wm Phi_m(theta)` and the phase is fixed by pinning
//! the anchor state's first-harmonic sine amplitudes: the degree-zero one to
//! its steady-state value and the higher-degree ones to zero.

use crate::dynamics::{
    nominal_steady_state, Forcing, IntegrationConfig, NominalGuess, OdeSystem, PeriodSpec,
    Trajectory,
};
use crate::error::{Error, Result};
use crate::fourier::{FourierGrid, HarmonicCoefficients};
use crate::hb::{
    deflated_solve, deflation_factor, harmonic_residual, newton_solve, DeflationConfig,
    FrequencyClosure, NewtonConfig, NewtonDiagnostics,
};
use crate::stochastic::{Distribution, QuadratureRule, StochasticBasis};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Index bookkeeping for the real unknown vector of the combined system.
///
/// Ordering: states outer, Fourier entries `[a_0, a_1, b_1, ...]` next,
/// polynomial degrees innermost. For a free frequency the anchor state's
/// `b_1` block is removed from the unknowns and the `N+1` frequency
/// coefficients are appended at the end.
#[derive(Debug, Clone)]
pub struct FgpcLayout {
    n_d: usize,
    h: usize,
    degree: usize,
    closure: FrequencyClosure,
    /// Start of each `(state, entry)` coefficient block in the unknown
    /// vector; `None` marks the anchored entry.
    offsets: Vec<Option<usize>>,
    omega_offset: Option<usize>,
}

impl FgpcLayout {
    pub fn new(n_d: usize, h: usize, degree: usize, closure: FrequencyClosure) -> Result<Self> {
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
        let entries = 2 * h + 1;
        let terms = degree + 1;
        let mut offsets = Vec::with_capacity(n_d * entries);
        let mut cursor = 0;
        for c in 0..n_d {
            for e in 0..entries {
                let anchored = matches!(
                    closure,
                    FrequencyClosure::Free { anchor_state, .. } if c == anchor_state && e == 2
                );
                if anchored {
                    offsets.push(None);
                } else {
                    offsets.push(Some(cursor));
                    cursor += terms;
                }
            }
        }
        let omega_offset = match closure {
            FrequencyClosure::Fixed(_) => None,
            FrequencyClosure::Free { .. } => {
                let at = cursor;
                cursor += terms;
                Some(at)
            }
        };
        let _ = cursor;
        Ok(Self {
            n_d,
            h,
            degree,
            closure,
            offsets,
            omega_offset,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.n_d
    }

    pub fn harmonic_order(&self) -> usize {
        self.h
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn closure(&self) -> FrequencyClosure {
        self.closure
    }

    fn entries(&self) -> usize {
        2 * self.h + 1
    }

    fn terms(&self) -> usize {
        self.degree + 1
    }

    pub fn unknown_count(&self) -> usize {
        // the anchored block (if any) is exactly offset by the frequency block
        self.n_d * self.entries() * self.terms()
    }

    pub fn equation_count(&self) -> usize {
        self.n_d * self.entries() * self.terms()
    }

    fn block(&self, state: usize, entry: usize) -> Option<usize> {
        self.offsets[state * self.entries() + entry]
    }

    /// Contracts the unknowns with basis values `phi` into per-parameter
    /// Fourier coefficients and base frequency.
    pub fn per_theta(&self, u: &[f64], phi: &[f64]) -> (HarmonicCoefficients, f64) {
        debug_assert_eq!(u.len(), self.unknown_count());
        debug_assert_eq!(phi.len(), self.terms());
        let entries = self.entries();
        let mut real = vec![0.0; self.n_d * entries];
        for c in 0..self.n_d {
            for e in 0..entries {
                real[c * entries + e] = match self.block(c, e) {
                    Some(at) => u[at..at + self.terms()]
                        .iter()
                        .zip(phi.iter())
                        .map(|(q, p)| q * p)
                        .sum(),
                    // anchored: b_1 = value * Phi_0, higher degrees are zero
                    None => self.anchor_value(),
                };
            }
        }
        let omega = match self.closure {
            FrequencyClosure::Fixed(omega) => omega,
            FrequencyClosure::Free { .. } => {
                let at = self.omega_offset.expect("free layout has omega block");
                u[at..at + self.terms()]
                    .iter()
                    .zip(phi.iter())
                    .map(|(q, p)| q * p)
                    .sum()
            }
        };
        let coeffs = HarmonicCoefficients::from_real_layout(self.h, self.n_d, &real)
            .expect("layout arithmetic");
        (coeffs, omega)
    }

    fn anchor_value(&self) -> f64 {
        match self.closure {
            FrequencyClosure::Free { anchor_value, .. } => anchor_value,
            FrequencyClosure::Fixed(_) => unreachable!("no anchor on forced layouts"),
        }
    }

    /// Unknown vector with the degree-zero coefficients taken from a
    /// steady-state capture and all higher degrees zero.
    pub fn degree0_guess(&self, guess: &NominalGuess) -> Vec<f64> {
        let mut u = vec![0.0; self.unknown_count()];
        let real = guess.coeffs.to_real_layout();
        let entries = self.entries();
        for c in 0..self.n_d {
            for e in 0..entries {
                if let Some(at) = self.block(c, e) {
                    u[at] = real[c * entries + e];
                }
            }
        }
        if let Some(at) = self.omega_offset {
            u[at] = guess.omega;
        }
        u
    }

    /// Embeds a degree-zero solution of the same grid as the degree-zero
    /// coefficients of this layout.
    pub fn lift(&self, base: &FgpcLayout, base_unknowns: &[f64]) -> Result<Vec<f64>> {
        if base.degree != 0 || base.n_d != self.n_d || base.h != self.h {
            return Err(Error::InvalidParameter(
                "lift expects a degree-zero layout on the same grid".into(),
            ));
        }
        if base_unknowns.len() != base.unknown_count() {
            return Err(Error::DimensionMismatch {
                context: "FgpcLayout::lift",
                expected: base.unknown_count(),
                actual: base_unknowns.len(),
            });
        }
        let mut u = vec![0.0; self.unknown_count()];
        let entries = self.entries();
        for c in 0..self.n_d {
            for e in 0..entries {
                if let (Some(at), Some(base_at)) = (self.block(c, e), base.block(c, e)) {
                    u[at] = base_unknowns[base_at];
                }
            }
        }
        if let (Some(at), Some(base_at)) = (self.omega_offset, base.omega_offset) {
            u[at] = base_unknowns[base_at];
        }
        Ok(u)
    }

    /// Materializes the full coefficient tensors (anchored values included):
    /// cosine `[state][k=0..H][m]`, sine `[state][k=1..H][m]`, and the
    /// frequency coefficients for a free closure.
    #[allow(clippy::type_complexity)]
    pub fn unpack(
        &self,
        u: &[f64],
    ) -> (
        Vec<Vec<Vec<f64>>>,
        Vec<Vec<Vec<f64>>>,
        Option<Vec<f64>>,
    ) {
        let terms = self.terms();
        let coeff = |c: usize, e: usize, m: usize| -> f64 {
            match self.block(c, e) {
                Some(at) => u[at + m],
                None => {
                    if m == 0 {
                        self.anchor_value()
                    } else {
                        0.0
                    }
                }
            }
        };
        let mut cosine = vec![vec![vec![0.0; terms]; self.h + 1]; self.n_d];
        let mut sine = vec![vec![vec![0.0; terms]; self.h]; self.n_d];
        for c in 0..self.n_d {
            for m in 0..terms {
                cosine[c][0][m] = coeff(c, 0, m);
                for k in 1..=self.h {
                    cosine[c][k][m] = coeff(c, 2 * k - 1, m);
                    sine[c][k - 1][m] = coeff(c, 2 * k, m);
                }
            }
        }
        let omega = self
            .omega_offset
            .map(|at| u[at..at + terms].to_vec());
        (cosine, sine, omega)
    }
}

/// Assembled spectral-stochastic problem.
pub struct FgpcProblem {
    pub system: Arc<dyn OdeSystem>,
    pub grid: FourierGrid,
    pub basis: StochasticBasis,
    pub quad: QuadratureRule,
    layout: FgpcLayout,
    /// Basis values at the quadrature nodes, precomputed once.
    phi_nodes: Vec<Vec<f64>>,
}

impl FgpcProblem {
    pub fn forced(
        system: Arc<dyn OdeSystem>,
        grid: FourierGrid,
        basis: StochasticBasis,
        quad: QuadratureRule,
    ) -> Result<Self> {
        let omega = match system.forcing() {
            Forcing::Forced { omega } => omega,
            Forcing::SelfExcited => {
                return Err(Error::InvalidParameter(
                    "system is self-excited; use FgpcProblem::self_excited".into(),
                ))
            }
        };
        Self::with_closure(system, grid, basis, quad, FrequencyClosure::Fixed(omega))
    }

    pub fn self_excited(
        system: Arc<dyn OdeSystem>,
        grid: FourierGrid,
        basis: StochasticBasis,
        quad: QuadratureRule,
        anchor_state: usize,
        anchor_value: f64,
    ) -> Result<Self> {
        if system.forcing() != Forcing::SelfExcited {
            return Err(Error::InvalidParameter(
                "system is forced; use FgpcProblem::forced".into(),
            ));
        }
        Self::with_closure(
            system,
            grid,
            basis,
            quad,
            FrequencyClosure::Free {
                anchor_state,
                anchor_value,
            },
        )
    }

    /// Builds the problem matching the system's forcing type; self-excited
    /// systems anchor the phase at the guess's first-harmonic sine amplitude.
    pub fn from_guess(
        system: Arc<dyn OdeSystem>,
        grid: FourierGrid,
        basis: StochasticBasis,
        quad: QuadratureRule,
        guess: &NominalGuess,
        anchor_state: usize,
    ) -> Result<Self> {
        match system.forcing() {
            Forcing::Forced { .. } => Self::forced(system, grid, basis, quad),
            Forcing::SelfExcited => {
                let anchor_value = -2.0 * guess.coeffs.get(anchor_state, 1).im;
                Self::self_excited(system, grid, basis, quad, anchor_state, anchor_value)
            }
        }
    }

    fn with_closure(
        system: Arc<dyn OdeSystem>,
        grid: FourierGrid,
        basis: StochasticBasis,
        quad: QuadratureRule,
        closure: FrequencyClosure,
    ) -> Result<Self> {
        if grid.state_dim() != system.hb_dim() {
            return Err(Error::DimensionMismatch {
                context: "FgpcProblem grid state dimension",
                expected: system.hb_dim(),
                actual: grid.state_dim(),
            });
        }
        if quad.is_empty() {
            return Err(Error::InvalidParameter(
                "quadrature rule must have at least one node".into(),
            ));
        }
        let layout = FgpcLayout::new(
            system.hb_dim(),
            grid.harmonic_order(),
            basis.degree(),
            closure,
        )?;
        let phi_nodes = quad
            .nodes()
            .iter()
            .map(|&theta| basis.evaluate(theta))
            .collect();
        Ok(Self {
            system,
            grid,
            basis,
            quad,
            layout,
            phi_nodes,
        })
    }

    pub fn layout(&self) -> &FgpcLayout {
        &self.layout
    }

    /// Quadrature-weighted mean of the nodes: the nominal parameter used for
    /// initial guesses.
    pub fn nominal_theta(&self) -> f64 {
        self.quad.nominal()
    }

    /// Galerkin residual: per quadrature node, reconstruct the per-parameter
    /// Fourier problem, assemble its residual through the alternating
    /// frequency/time scheme, and accumulate the projections onto the basis
    /// polynomials (fixed ascending node order keeps runs reproducible).
    pub fn residual(&self, unknowns: &[f64]) -> Result<Vec<f64>> {
        if unknowns.len() != self.layout.unknown_count() {
            return Err(Error::DimensionMismatch {
                context: "FgpcProblem::residual unknowns",
                expected: self.layout.unknown_count(),
                actual: unknowns.len(),
            });
        }
        let terms = self.layout.terms();
        let mut out = vec![0.0; self.layout.equation_count()];
        for (z, (&theta, &weight)) in self
            .quad
            .nodes()
            .iter()
            .zip(self.quad.weights().iter())
            .enumerate()
        {
            let phi = &self.phi_nodes[z];
            let (coeffs, omega) = self.layout.per_theta(unknowns, phi);
            let r = harmonic_residual(&*self.system, &self.grid, &coeffs, omega, theta).map_err(
                |e| match e {
                    Error::NonFiniteResidual { time_index, .. } => Error::NonFiniteResidual {
                        time_index,
                        quad_node: Some(z),
                    },
                    other => other,
                },
            )?;
            for (i, ri) in r.iter().enumerate() {
                let row = &mut out[i * terms..(i + 1) * terms];
                for (slot, p) in row.iter_mut().zip(phi.iter()) {
                    *slot += ri * p * weight;
                }
            }
        }
        Ok(out)
    }

    /// Initial unknowns from a steady-state capture at the nominal parameter:
    /// degree-zero coefficients filled, higher degrees zero.
    pub fn initial_guess(&self, guess: &NominalGuess) -> Vec<f64> {
        self.layout.degree0_guess(guess)
    }

    /// All-zero fallback guess; only meaningful for forced systems (a free
    /// frequency must start positive).
    pub fn zero_guess(&self) -> Result<Vec<f64>> {
        match self.layout.closure {
            FrequencyClosure::Fixed(_) => Ok(vec![0.0; self.layout.unknown_count()]),
            FrequencyClosure::Free { .. } => Err(Error::InvalidParameter(
                "zero guess is undefined for self-excited systems (unknown frequency)".into(),
            )),
        }
    }

    /// Packages converged unknowns as a surrogate solution.
    pub fn solution_from(&self, unknowns: &[f64], diagnostics: NewtonDiagnostics) -> FgpcSolution {
        let (cosine, sine, omega) = self.layout.unpack(unknowns);
        let anchor = match self.layout.closure {
            FrequencyClosure::Free {
                anchor_state,
                anchor_value,
            } => Some(PhaseAnchor {
                state: anchor_state,
                value: anchor_value,
            }),
            FrequencyClosure::Fixed(_) => None,
        };
        FgpcSolution {
            system: self.system.name().to_string(),
            forcing: self.system.forcing(),
            harmonic_order: self.layout.h,
            degree: self.layout.degree,
            time_samples: self.grid.time_samples(),
            quadrature_points: self.quad.len(),
            basis: self.basis.clone(),
            anchor,
            cosine,
            sine,
            omega,
            residual_norm: diagnostics.residual_norm,
            newton_iterations: diagnostics.iterations,
        }
    }
}

/// Phase anchor metadata of a self-excited solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseAnchor {
    pub state: usize,
    pub value: f64,
}

/// Converged spectral-stochastic surrogate, self-describing and serializable.
///
/// Coefficient tensors are stored in the cosine/sine view:
/// `cosine[state][k][m]` for `k = 0..=H`, `sine[state][k-1][m]` for
/// `k = 1..=H`. `omega` holds the frequency expansion of self-excited
/// solutions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FgpcSolution {
    pub system: String,
    pub forcing: Forcing,
    pub harmonic_order: usize,
    pub degree: usize,
    pub time_samples: usize,
    pub quadrature_points: usize,
    pub basis: StochasticBasis,
    pub anchor: Option<PhaseAnchor>,
    pub cosine: Vec<Vec<Vec<f64>>>,
    pub sine: Vec<Vec<Vec<f64>>>,
    pub omega: Option<Vec<f64>>,
    pub residual_norm: f64,
    pub newton_iterations: usize,
}

impl FgpcSolution {
    pub fn state_dim(&self) -> usize {
        self.cosine.len()
    }

    pub fn distribution(&self) -> &Distribution {
        self.basis.distribution()
    }

    /// Base frequency at a parameter value.
    pub fn omega_at(&self, theta: f64) -> f64 {
        match (&self.forcing, &self.omega) {
            (Forcing::Forced { omega }, _) => *omega,
            (Forcing::SelfExcited, Some(q)) => {
                let phi = self.basis.evaluate(theta);
                q.iter().zip(phi.iter()).map(|(c, p)| c * p).sum()
            }
            (Forcing::SelfExcited, None) => unreachable!("self-excited solution without omega"),
        }
    }

    pub fn period_at(&self, theta: f64) -> f64 {
        2.0 * std::f64::consts::PI / self.omega_at(theta)
    }

    /// Per-parameter Fourier coefficients and frequency.
    pub fn coefficients_at(&self, theta: f64) -> (HarmonicCoefficients, f64) {
        let phi = self.basis.evaluate(theta);
        let h = self.harmonic_order;
        let n_d = self.state_dim();
        let contract = |values: &[f64]| -> f64 {
            values.iter().zip(phi.iter()).map(|(q, p)| q * p).sum()
        };
        let mut real = vec![0.0; n_d * (2 * h + 1)];
        for c in 0..n_d {
            let block = &mut real[c * (2 * h + 1)..(c + 1) * (2 * h + 1)];
            block[0] = contract(&self.cosine[c][0]);
            for k in 1..=h {
                block[2 * k - 1] = contract(&self.cosine[c][k]);
                block[2 * k] = contract(&self.sine[c][k - 1]);
            }
        }
        let coeffs =
            HarmonicCoefficients::from_real_layout(h, n_d, &real).expect("tensor arithmetic");
        (coeffs, self.omega_at(theta))
    }

    /// Evaluates one state of the surrogate at the requested times.
    pub fn evaluate_state(&self, theta: f64, times: &[f64], state: usize) -> Vec<f64> {
        let (a, b, omega) = self.amplitudes_at(theta, state);
        times
            .iter()
            .map(|&t| series_value(&a, &b, omega, t))
            .collect()
    }

    /// Time derivative of one state.
    pub fn evaluate_velocity_state(&self, theta: f64, times: &[f64], state: usize) -> Vec<f64> {
        let (a, b, omega) = self.amplitudes_at(theta, state);
        times
            .iter()
            .map(|&t| series_derivative(&a, &b, omega, t))
            .collect()
    }

    /// Evaluates all states; time-major layout `[t * n_d + c]`.
    pub fn evaluate(&self, theta: f64, times: &[f64]) -> Vec<f64> {
        let n_d = self.state_dim();
        let mut out = vec![0.0; times.len() * n_d];
        for c in 0..n_d {
            let column = self.evaluate_state(theta, times, c);
            for (i, v) in column.into_iter().enumerate() {
                out[i * n_d + c] = v;
            }
        }
        out
    }

    fn amplitudes_at(&self, theta: f64, state: usize) -> (Vec<f64>, Vec<f64>, f64) {
        let phi = self.basis.evaluate(theta);
        let contract = |values: &[f64]| -> f64 {
            values.iter().zip(phi.iter()).map(|(q, p)| q * p).sum()
        };
        let h = self.harmonic_order;
        let a: Vec<f64> = (0..=h).map(|k| contract(&self.cosine[state][k])).collect();
        let b: Vec<f64> = (1..=h)
            .map(|k| contract(&self.sine[state][k - 1]))
            .collect();
        (a, b, self.omega_at(theta))
    }

    /// Coefficient magnitude `sqrt(a_km^2 + b_km^2)` (`|a_0m|` for `k = 0`).
    pub fn magnitude(&self, state: usize, k: usize, m: usize) -> f64 {
        if k == 0 {
            self.cosine[state][0][m].abs()
        } else {
            let a = self.cosine[state][k][m];
            let b = self.sine[state][k - 1][m];
            (a * a + b * b).sqrt()
        }
    }

    pub fn max_magnitude(&self, state: usize) -> f64 {
        let mut max = 0.0f64;
        for k in 0..=self.harmonic_order {
            for m in 0..=self.degree {
                max = max.max(self.magnitude(state, k, m));
            }
        }
        max
    }

    /// Degree-zero first-harmonic magnitude; used for branch selection.
    pub fn first_harmonic_magnitude(&self, state: usize) -> f64 {
        self.magnitude(state, 1, 0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("surrogate serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::InvalidParameter(format!("surrogate deserialization: {e}")))
    }
}

fn series_value(a: &[f64], b: &[f64], omega: f64, t: f64) -> f64 {
    let (sin1, cos1) = (omega * t).sin_cos();
    let mut value = a[0];
    let (mut ck, mut sk) = (1.0, 0.0); // cos/sin of k w t, starting at k = 0
    for k in 1..a.len() {
        let c_next = ck * cos1 - sk * sin1;
        let s_next = sk * cos1 + ck * sin1;
        ck = c_next;
        sk = s_next;
        value += a[k] * ck + b[k - 1] * sk;
    }
    value
}

fn series_derivative(a: &[f64], b: &[f64], omega: f64, t: f64) -> f64 {
    let (sin1, cos1) = (omega * t).sin_cos();
    let mut value = 0.0;
    let (mut ck, mut sk) = (1.0, 0.0);
    for k in 1..a.len() {
        let c_next = ck * cos1 - sk * sin1;
        let s_next = sk * cos1 + ck * sin1;
        ck = c_next;
        sk = s_next;
        value += k as f64 * omega * (-a[k] * sk + b[k - 1] * ck);
    }
    value
}

/// Options of the end-to-end solve driver.
#[derive(Debug, Clone)]
pub struct FgpcSolverConfig {
    pub newton: NewtonConfig,
    /// Deflation settings; `None` solves a single branch.
    pub deflation: Option<DeflationConfig>,
    pub integration: IntegrationConfig,
    /// Anchor state for self-excited systems.
    pub anchor_state: usize,
    /// Start from all-zero coefficients instead of a steady-state capture
    /// (forced systems only).
    pub zero_guess: bool,
}

impl Default for FgpcSolverConfig {
    fn default() -> Self {
        Self {
            newton: NewtonConfig::default(),
            deflation: Some(DeflationConfig::default()),
            integration: IntegrationConfig::default(),
            anchor_state: 0,
            zero_guess: false,
        }
    }
}

/// Outcome of [`solve_fgpc`]: the distinct surrogate branches found, paired
/// with per-attempt diagnostics.
#[derive(Debug)]
pub struct FgpcReport {
    pub solutions: Vec<FgpcSolution>,
    /// Number of degree-zero roots used to seed the full solves.
    pub base_roots: usize,
    pub failures: Vec<String>,
    pub nominal_theta: f64,
}

/// Full solve pipeline.
///
/// A degree-zero problem is solved first (with deflation when enabled, so
/// coexisting branches are discovered); every degree-zero root is then lifted
/// to the degree-zero coefficients of the full problem and corrected by
/// Newton. This realizes the one-guess-per-branch requirement of the full
/// system: each branch gets its own lifted initial guess.
pub fn solve_fgpc(
    system: &Arc<dyn OdeSystem>,
    grid: &FourierGrid,
    basis: &StochasticBasis,
    quad: &QuadratureRule,
    cfg: &FgpcSolverConfig,
) -> Result<FgpcReport> {
    let nominal = quad.nominal();
    let guess = if cfg.zero_guess {
        match system.forcing() {
            Forcing::Forced { omega } => NominalGuess {
                coeffs: HarmonicCoefficients::zeros(grid.harmonic_order(), system.hb_dim()),
                omega,
            },
            Forcing::SelfExcited => {
                return Err(Error::InvalidParameter(
                    "zero guess is undefined for self-excited systems".into(),
                ))
            }
        }
    } else {
        nominal_steady_state(&**system, nominal, grid, &cfg.integration)?
    };

    let base_basis = StochasticBasis::new(*basis.distribution(), 0)?;
    let base = FgpcProblem::from_guess(
        system.clone(),
        grid.clone(),
        base_basis,
        quad.clone(),
        &guess,
        cfg.anchor_state,
    )?;
    let base_guess = base.initial_guess(&guess);

    let mut failures = Vec::new();
    let base_roots: Vec<(Vec<f64>, NewtonDiagnostics)> = match &cfg.deflation {
        Some(deflation) => {
            let set = deflated_solve(
                &|u: &[f64]| base.residual(u),
                &[base_guess],
                deflation,
                &cfg.newton,
            )?;
            failures.extend(
                set.failures
                    .into_iter()
                    .map(|f| format!("degree-0 stage: {f}")),
            );
            set.roots
                .into_iter()
                .map(|r| {
                    (
                        r.unknowns,
                        NewtonDiagnostics {
                            iterations: r.iterations,
                            residual_norm: r.residual_norm,
                        },
                    )
                })
                .collect()
        }
        None => match newton_solve(&|u: &[f64]| base.residual(u), &base_guess, &cfg.newton) {
            Ok((root, diag)) => vec![(root, diag)],
            Err(e) => {
                failures.push(format!("degree-0 stage: {e}"));
                Vec::new()
            }
        },
    };

    if basis.degree() == 0 {
        let solutions = base_roots
            .iter()
            .map(|(u, d)| base.solution_from(u, *d))
            .collect();
        return Ok(FgpcReport {
            solutions,
            base_roots: base_roots.len(),
            failures,
            nominal_theta: nominal,
        });
    }

    let full = FgpcProblem::from_guess(
        system.clone(),
        grid.clone(),
        basis.clone(),
        quad.clone(),
        &guess,
        cfg.anchor_state,
    )?;
    let mut solutions: Vec<FgpcSolution> = Vec::new();
    let mut accepted: Vec<Vec<f64>> = Vec::new();
    for (branch_index, (base_root, _)) in base_roots.iter().enumerate() {
        let lifted = full.layout().lift(base.layout(), base_root)?;
        let result = match &cfg.deflation {
            Some(deflation) if !accepted.is_empty() => {
                let known = accepted.clone();
                let deflated = |u: &[f64]| -> Result<Vec<f64>> {
                    let mut r = full.residual(u)?;
                    let factor = deflation_factor(u, &known, deflation);
                    for v in &mut r {
                        *v *= factor;
                    }
                    Ok(r)
                };
                newton_solve(&deflated, &lifted, &cfg.newton).and_then(|(root, diag)| {
                    // accept only genuine roots of the undeflated system
                    let plain = full.residual(&root)?;
                    let norm = crate::hb::inf_norm(&plain);
                    if norm < cfg.newton.tol {
                        Ok((
                            root,
                            NewtonDiagnostics {
                                iterations: diag.iterations,
                                residual_norm: norm,
                            },
                        ))
                    } else {
                        Err(Error::LineSearchStalled {
                            residual_norm: norm,
                            last: root,
                        })
                    }
                })
            }
            _ => newton_solve(&|u: &[f64]| full.residual(u), &lifted, &cfg.newton),
        };
        match result {
            Ok((root, diag)) => {
                let duplicate = accepted.iter().any(|s| {
                    let d: f64 = s
                        .iter()
                        .zip(root.iter())
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt();
                    let scale: f64 = 1.0 + s.iter().map(|x| x * x).sum::<f64>().sqrt();
                    d <= 1e-6 * scale
                });
                if duplicate {
                    failures.push(format!(
                        "branch {branch_index}: converged to an already accepted branch"
                    ));
                } else {
                    solutions.push(full.solution_from(&root, diag));
                    accepted.push(root);
                }
            }
            Err(e) => failures.push(format!("branch {branch_index}: {e}")),
        }
        if cfg
            .deflation
            .as_ref()
            .is_some_and(|d| solutions.len() >= d.max_solutions)
        {
            break;
        }
    }

    Ok(FgpcReport {
        solutions,
        base_roots: base_roots.len(),
        failures,
        nominal_theta: nominal,
    })
}

/// Single-branch solve reusing an existing steady-state trajectory, shared
/// by parameter studies that sweep the truncation orders.
#[derive(Debug, Clone)]
pub struct CellConfig {
    pub newton: NewtonConfig,
    pub anchor_state: usize,
    pub time_samples: Option<usize>,
    pub quadrature_points: Option<usize>,
}

impl Default for CellConfig {
    fn default() -> Self {
        Self {
            newton: NewtonConfig::default(),
            anchor_state: 0,
            time_samples: None,
            quadrature_points: None,
        }
    }
}

pub fn solve_single_from_trajectory(
    system: &Arc<dyn OdeSystem>,
    distribution: &Distribution,
    trajectory: &Trajectory,
    h: usize,
    degree: usize,
    cfg: &CellConfig,
) -> Result<FgpcSolution> {
    let d_nl = system.nonlinearity_degree();
    let grid = match cfg.time_samples {
        Some(n_t) => FourierGrid::new(h, n_t, system.hb_dim())?,
        None => FourierGrid::with_default_sampling(h, system.hb_dim(), d_nl)?,
    };
    let basis = StochasticBasis::new(*distribution, degree)?;
    let n_g = cfg
        .quadrature_points
        .unwrap_or_else(|| basis.default_quadrature_size(d_nl));
    let quad = basis.gauss_rule(n_g)?;

    let spec = match system.forcing() {
        Forcing::Forced { omega } => PeriodSpec::Known(2.0 * std::f64::consts::PI / omega),
        Forcing::SelfExcited => PeriodSpec::Estimate { component: 0 },
    };
    let (coeffs, omega) = crate::dynamics::steady_state_fft(trajectory, spec, &grid)?;
    let guess = NominalGuess { coeffs, omega };

    let problem = FgpcProblem::from_guess(
        system.clone(),
        grid,
        basis,
        quad,
        &guess,
        cfg.anchor_state,
    )?;
    let u0 = problem.initial_guess(&guess);
    let (root, diag) = newton_solve(&|u: &[f64]| problem.residual(u), &u0, &cfg.newton)?;
    Ok(problem.solution_from(&root, diag))
}

#[cfg(test)]
mod tests;
