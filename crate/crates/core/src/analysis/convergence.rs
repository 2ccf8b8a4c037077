//! Convergence-error maps over the truncation orders: the error metric is
//! the root mean square, over parameter samples, of the difference between
//! period-averaged absolute responses of a solution and of a reference
//! solution; per-state errors are summed.

use crate::error::Result;
use crate::expansion::FgpcSolution;
use crate::stochastic::Distribution;
use serde::Serialize;

#[derive(Debug, Clone)]
pub struct ConvergenceConfig {
    pub h_values: Vec<usize>,
    pub n_values: Vec<usize>,
    /// Truncation orders of the reference solution.
    pub reference: (usize, usize),
    pub n_samples: usize,
    pub seed: u64,
    /// Trapezoid points of the period average.
    pub integration_points: usize,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            h_values: (1..=5).collect(),
            n_values: (0..=12).collect(),
            reference: (5, 11),
            n_samples: 500,
            seed: 2024,
            integration_points: 1024,
        }
    }
}

/// Error grid over `(H, N)`; failed cells are explicitly absent.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorMap {
    pub h_values: Vec<usize>,
    pub n_values: Vec<usize>,
    pub reference: (usize, usize),
    pub n_samples: usize,
    /// Row-major over `h_values x n_values`.
    pub cells: Vec<Option<f64>>,
    pub failures: Vec<(usize, usize, String)>,
}

impl ErrorMap {
    pub fn get(&self, h: usize, n: usize) -> Option<f64> {
        let i = self.h_values.iter().position(|&v| v == h)?;
        let j = self.n_values.iter().position(|&v| v == n)?;
        self.cells[i * self.n_values.len() + j]
    }

    /// CSV rows `H,N,error`; absent cells keep an empty error field.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("H,N,error\n");
        for (i, &h) in self.h_values.iter().enumerate() {
            for (j, &n) in self.n_values.iter().enumerate() {
                match self.cells[i * self.n_values.len() + j] {
                    Some(e) => out.push_str(&format!("{h},{n},{e:.12e}\n")),
                    None => out.push_str(&format!("{h},{n},\n")),
                }
            }
        }
        out
    }
}

/// Period-averaged absolute response per state:
/// `(1/T) integral |x_c(t, theta)| dt` by an `points`-interval trapezoid
/// over one period (periodic, so the rule reduces to the sample mean).
fn period_average(solution: &FgpcSolution, theta: f64, points: usize) -> Vec<f64> {
    let period = solution.period_at(theta);
    let times: Vec<f64> = (0..points)
        .map(|l| period * l as f64 / points as f64)
        .collect();
    let n_d = solution.state_dim();
    let values = solution.evaluate(theta, &times);
    (0..n_d)
        .map(|c| {
            times
                .iter()
                .enumerate()
                .map(|(l, _)| values[l * n_d + c].abs())
                .sum::<f64>()
                / points as f64
        })
        .collect()
}

fn sample_integrals(solution: &FgpcSolution, thetas: &[f64], points: usize) -> Vec<Vec<f64>> {
    use rayon::prelude::*;
    thetas
        .par_iter()
        .map(|&theta| period_average(solution, theta, points))
        .collect()
}

/// RMS distance between two solutions under the period-average metric,
/// summed over states. A pseudometric on solutions: zero on identical
/// inputs, symmetric, and obeying the triangle inequality.
pub fn rms_amplitude_distance(
    a: &FgpcSolution,
    b: &FgpcSolution,
    thetas: &[f64],
    points: usize,
) -> f64 {
    let ia = sample_integrals(a, thetas, points);
    let ib = sample_integrals(b, thetas, points);
    let n_d = a.state_dim().min(b.state_dim());
    (0..n_d)
        .map(|c| {
            let mse = ia
                .iter()
                .zip(ib.iter())
                .map(|(ra, rb)| (ra[c] - rb[c]) * (ra[c] - rb[c]))
                .sum::<f64>()
                / thetas.len() as f64;
            mse.sqrt()
        })
        .sum()
}

/// Solves every `(H, N)` cell through `solve` and measures it against the
/// reference solution. Per-cell solver failures are recorded, not fatal; a
/// failing reference is.
pub fn convergence_map<F>(
    solve: F,
    distribution: &Distribution,
    cfg: &ConvergenceConfig,
) -> Result<ErrorMap>
where
    F: Fn(usize, usize) -> Result<FgpcSolution>,
{
    let thetas = distribution.sample(cfg.n_samples, cfg.seed);
    let reference = solve(cfg.reference.0, cfg.reference.1)?;
    let ref_integrals = sample_integrals(&reference, &thetas, cfg.integration_points);
    let n_d = reference.state_dim();

    let mut cells = Vec::with_capacity(cfg.h_values.len() * cfg.n_values.len());
    let mut failures = Vec::new();
    for &h in &cfg.h_values {
        for &n in &cfg.n_values {
            match solve(h, n) {
                Ok(sol) => {
                    let integrals = sample_integrals(&sol, &thetas, cfg.integration_points);
                    let error: f64 = (0..n_d)
                        .map(|c| {
                            let mse = integrals
                                .iter()
                                .zip(ref_integrals.iter())
                                .map(|(s, r)| (s[c] - r[c]) * (s[c] - r[c]))
                                .sum::<f64>()
                                / thetas.len() as f64;
                            mse.sqrt()
                        })
                        .sum();
                    cells.push(Some(error));
                }
                Err(e) => {
                    failures.push((h, n, e.to_string()));
                    cells.push(None);
                }
            }
        }
    }
    Ok(ErrorMap {
        h_values: cfg.h_values.clone(),
        n_values: cfg.n_values.clone(),
        reference: cfg.reference,
        n_samples: cfg.n_samples,
        cells,
        failures,
    })
}
