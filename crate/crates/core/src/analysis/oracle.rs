//! Monte-Carlo-over-HB oracle: a deterministic Harmonic Balance solve per
//! parameter sample. Samples arrive sorted so every root warm-starts the
//! next solve; the chain is sequential by construction.

use crate::dynamics::{nominal_steady_state, IntegrationConfig, OdeSystem};
use crate::error::{Error, Result};
use crate::fourier::{evaluate_series, FourierGrid};
use crate::hb::{harmonic_residual, newton_solve, HbLayout, HbProblem, NewtonConfig};
use std::sync::Arc;
use std::time::Instant;

#[derive(Debug, Clone, Default)]
pub struct McConfig {
    pub newton: NewtonConfig,
    pub integration: IntegrationConfig,
    /// Anchor state for self-excited systems.
    pub anchor_state: usize,
}

#[derive(Debug, Clone)]
pub struct McSample {
    pub theta: f64,
    pub unknowns: Vec<f64>,
    pub omega: f64,
    pub iterations: usize,
    pub residual_norm: f64,
}

/// Per-sample Harmonic Balance roots plus solve timing.
pub struct McOracle {
    pub grid: FourierGrid,
    pub layout: HbLayout,
    pub thetas: Vec<f64>,
    /// One entry per sample; `None` marks a solver failure (expected
    /// behavior near bifurcations — the run continues).
    pub samples: Vec<Option<McSample>>,
    pub failures: Vec<String>,
    /// Wall-clock seconds of the whole oracle run (first-guess integration
    /// plus the warm-started solve chain).
    pub solve_seconds: f64,
}

impl McOracle {
    pub fn converged_count(&self) -> usize {
        self.samples.iter().filter(|s| s.is_some()).count()
    }

    /// Dense evaluation of sample `i` at the requested times.
    pub fn evaluate_state(&self, i: usize, times: &[f64], state: usize) -> Option<Vec<f64>> {
        let sample = self.samples[i].as_ref()?;
        let (coeffs, omega) = self.layout.unpack(&sample.unknowns).ok()?;
        let n_d = self.grid.state_dim();
        let values = evaluate_series(&coeffs, omega, times);
        Some((0..times.len()).map(|t| values[t * n_d + state]).collect())
    }

    /// Newton iterations of the first solve and the maximum over the
    /// warm-started remainder.
    pub fn iteration_profile(&self) -> (usize, usize) {
        let mut first = 0;
        let mut later_max = 0;
        for (i, s) in self.samples.iter().enumerate() {
            if let Some(s) = s {
                if i == 0 {
                    first = s.iterations;
                } else {
                    later_max = later_max.max(s.iterations);
                }
            }
        }
        (first, later_max)
    }

    /// Per-sample summary as CSV.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("theta,omega,first_harmonic_magnitude,iterations,converged\n");
        for (i, &theta) in self.thetas.iter().enumerate() {
            match &self.samples[i] {
                Some(s) => {
                    let (coeffs, _) = self
                        .layout
                        .unpack(&s.unknowns)
                        .expect("stored unknowns match the layout");
                    let (a, b) = coeffs.cosine_sine();
                    let magnitude = (a[0][1] * a[0][1] + b[0][0] * b[0][0]).sqrt();
                    out.push_str(&format!(
                        "{theta:.12e},{:.12e},{magnitude:.12e},{},true\n",
                        s.omega, s.iterations
                    ));
                }
                None => out.push_str(&format!("{theta:.12e},,,,false\n")),
            }
        }
        out
    }
}

/// Runs the oracle over ascending-sorted samples. The first sample is
/// initialized from a steady-state time integration; every further sample
/// starts from the previous root.
pub fn mc_oracle(
    system: &Arc<dyn OdeSystem>,
    grid: &FourierGrid,
    thetas: &[f64],
    cfg: &McConfig,
) -> Result<McOracle> {
    if thetas.is_empty() {
        return Err(Error::InvalidParameter("no samples supplied".into()));
    }
    if thetas.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidParameter(
            "samples must be sorted ascending for warm starting".into(),
        ));
    }

    let started = Instant::now();
    let guess = nominal_steady_state(&**system, thetas[0], grid, &cfg.integration)?;
    let problem = HbProblem::from_guess(
        system.clone(),
        grid.clone(),
        thetas[0],
        &guess,
        cfg.anchor_state,
    )?;
    let layout = problem.layout().clone();

    let residual_at = |theta: f64, u: &[f64]| -> Result<Vec<f64>> {
        let (coeffs, omega) = layout.unpack(u)?;
        harmonic_residual(&**system, grid, &coeffs, omega, theta)
    };

    let mut samples = Vec::with_capacity(thetas.len());
    let mut failures = Vec::new();
    let mut warm = problem.initial_guess(&guess);
    for (i, &theta) in thetas.iter().enumerate() {
        match newton_solve(&|u: &[f64]| residual_at(theta, u), &warm, &cfg.newton) {
            Ok((root, diag)) => {
                let (_, omega) = layout.unpack(&root)?;
                warm = root.clone();
                samples.push(Some(McSample {
                    theta,
                    unknowns: root,
                    omega,
                    iterations: diag.iterations,
                    residual_norm: diag.residual_norm,
                }));
            }
            Err(e) => {
                failures.push(format!("sample {i} (theta = {theta:.6}): {e}"));
                samples.push(None);
                // keep warm start from the last success
            }
        }
    }

    Ok(McOracle {
        grid: grid.clone(),
        layout,
        thetas: thetas.to_vec(),
        samples,
        failures,
        solve_seconds: started.elapsed().as_secs_f64(),
    })
}
