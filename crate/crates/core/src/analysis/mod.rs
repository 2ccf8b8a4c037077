//! Post-processing and validation of surrogate solutions: stochastic
//! moments, sample summaries with coverage intervals, marginal
//! distributions, coefficient-magnitude grids, convergence maps, the
//! Monte-Carlo-over-HB oracle, and phase portraits.

mod convergence;
mod oracle;
mod portrait;

pub use convergence::{
    convergence_map, rms_amplitude_distance, ConvergenceConfig, ErrorMap,
};
pub use oracle::{mc_oracle, McConfig, McOracle, McSample};
pub use portrait::{phase_portrait, PhasePortrait};

use crate::dynamics::Forcing;
use crate::error::{Error, Result};
use crate::expansion::FgpcSolution;
use crate::fourier::{evaluate_series, HarmonicCoefficients};
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

/// Mean and variance series of a forced surrogate.
#[derive(Debug, Clone, Serialize)]
pub struct MomentSeries {
    pub times: Vec<f64>,
    /// Time-major `[t * n_d + c]`.
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

impl MomentSeries {
    pub fn to_csv(&self, state: usize, n_d: usize) -> String {
        let mut out = String::from("time,mean,variance\n");
        for (i, t) in self.times.iter().enumerate() {
            out.push_str(&format!(
                "{:.12e},{:.12e},{:.12e}\n",
                t,
                self.mean[i * n_d + state],
                self.variance[i * n_d + state]
            ));
        }
        out
    }
}

/// Closed-form moments from the coefficients: the mean is the degree-zero
/// series and the variance the sum of squared degree-`m` series. Only valid
/// for forced systems — with a random base frequency the expansion mixes
/// frequency into every harmonic, so self-excited surrogates must be
/// summarized by sampling instead.
pub fn moments_from_coefficients(
    solution: &FgpcSolution,
    times: &[f64],
) -> Result<MomentSeries> {
    let omega = match solution.forcing {
        Forcing::Forced { omega } => omega,
        Forcing::SelfExcited => {
            return Err(Error::InvalidParameter(
                "closed-form moments are invalid for self-excited surrogates (random base \
                 frequency); use sample_summary"
                    .into(),
            ))
        }
    };
    let n_d = solution.state_dim();
    let h = solution.harmonic_order;
    let mut mean = vec![0.0; times.len() * n_d];
    let mut variance = vec![0.0; times.len() * n_d];
    for m in 0..=solution.degree {
        let mut real = vec![0.0; n_d * (2 * h + 1)];
        for c in 0..n_d {
            let block = &mut real[c * (2 * h + 1)..(c + 1) * (2 * h + 1)];
            block[0] = solution.cosine[c][0][m];
            for k in 1..=h {
                block[2 * k - 1] = solution.cosine[c][k][m];
                block[2 * k] = solution.sine[c][k - 1][m];
            }
        }
        let coeffs = HarmonicCoefficients::from_real_layout(h, n_d, &real)?;
        let series = evaluate_series(&coeffs, omega, times);
        if m == 0 {
            mean.copy_from_slice(&series);
        } else {
            for (v, s) in variance.iter_mut().zip(series.iter()) {
                *v += s * s;
            }
        }
    }
    Ok(MomentSeries {
        times: times.to_vec(),
        mean,
        variance,
    })
}

/// Sorted parameter samples with the boundary-path indices used for the
/// 95% coverage construction.
pub struct SampleSet {
    pub thetas: Vec<f64>,
    pub lower_index: usize,
    pub upper_index: usize,
}

pub fn sorted_samples(solution: &FgpcSolution, n: usize, seed: u64) -> SampleSet {
    let mut thetas = solution.distribution().sample(n, seed);
    thetas.sort_by(f64::total_cmp);
    SampleSet {
        thetas,
        lower_index: quantile_index(n, 0.025),
        upper_index: quantile_index(n, 0.975),
    }
}

/// Order-statistic index of quantile `q` among `n` sorted values.
pub fn quantile_index(n: usize, q: f64) -> usize {
    ((n - 1) as f64 * q).round() as usize
}

/// Output time grid of one period. Forced systems use physical time; for
/// self-excited systems the grid is the normalized phase on `[0, 2 pi)`,
/// rescaled per sample by its own period during evaluation.
fn output_times(solution: &FgpcSolution, n_time: usize, closed: bool) -> (Vec<f64>, bool) {
    let count = if closed { n_time + 1 } else { n_time };
    match solution.forcing {
        Forcing::Forced { omega } => {
            let period = 2.0 * PI / omega;
            (
                (0..count).map(|i| period * i as f64 / n_time as f64).collect(),
                false,
            )
        }
        Forcing::SelfExcited => (
            (0..count)
                .map(|i| 2.0 * PI * i as f64 / n_time as f64)
                .collect(),
            true,
        ),
    }
}

/// Evaluates one state for every sample on the output grid; rows are
/// samples. Self-excited samples are evaluated at `t = phase / omega(theta)`
/// so every row covers exactly one of its own periods.
fn evaluation_matrix(
    solution: &FgpcSolution,
    thetas: &[f64],
    times: &[f64],
    normalized: bool,
    state: usize,
) -> Vec<Vec<f64>> {
    thetas
        .par_iter()
        .map(|&theta| {
            if normalized {
                let omega = solution.omega_at(theta);
                let scaled: Vec<f64> = times.iter().map(|phase| phase / omega).collect();
                solution.evaluate_state(theta, &scaled, state)
            } else {
                solution.evaluate_state(theta, times, state)
            }
        })
        .collect()
}

/// Sample statistics of one state over one period: mean, variance,
/// per-time-point 2.5/97.5% quantiles, and the two boundary sample paths
/// (the samples nearest 2.5% and 97.5% of the sorted input).
#[derive(Debug, Clone, Serialize)]
pub struct StochasticSummary {
    /// Phase grid for self-excited solutions, physical time otherwise.
    pub normalized_time: bool,
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub lower_quantile: Vec<f64>,
    pub upper_quantile: Vec<f64>,
    pub lower_path: Vec<f64>,
    pub upper_path: Vec<f64>,
    pub n_samples: usize,
    pub state: usize,
}

impl StochasticSummary {
    /// Number of sign changes between the two boundary paths over one period
    /// (cyclic).
    pub fn boundary_crossings(&self) -> usize {
        let diff: Vec<f64> = self
            .lower_path
            .iter()
            .zip(self.upper_path.iter())
            .map(|(l, u)| u - l)
            .collect();
        let n = diff.len();
        (0..n)
            .filter(|&i| diff[i].signum() != diff[(i + 1) % n].signum())
            .count()
    }

    pub fn to_csv(&self) -> String {
        let label = if self.normalized_time { "phase" } else { "time" };
        let mut out = format!(
            "{label},mean,variance,lower_quantile,upper_quantile,lower_path,upper_path\n"
        );
        for i in 0..self.times.len() {
            out.push_str(&format!(
                "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n",
                self.times[i],
                self.mean[i],
                self.variance[i],
                self.lower_quantile[i],
                self.upper_quantile[i],
                self.lower_path[i],
                self.upper_path[i],
            ));
        }
        out
    }
}

pub fn sample_summary(
    solution: &FgpcSolution,
    n_samples: usize,
    seed: u64,
    n_time: usize,
    state: usize,
) -> StochasticSummary {
    let samples = sorted_samples(solution, n_samples, seed);
    let (times, normalized) = output_times(solution, n_time, false);
    let matrix = evaluation_matrix(solution, &samples.thetas, &times, normalized, state);

    let n = samples.thetas.len();
    let nt = times.len();
    let mut mean = vec![0.0; nt];
    let mut variance = vec![0.0; nt];
    let mut lower_q = vec![0.0; nt];
    let mut upper_q = vec![0.0; nt];
    let mut column = vec![0.0; n];
    for t in 0..nt {
        for (i, row) in matrix.iter().enumerate() {
            column[i] = row[t];
        }
        let m = column.iter().sum::<f64>() / n as f64;
        mean[t] = m;
        variance[t] = column.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n as f64;
        let mut sorted = column.clone();
        sorted.sort_by(f64::total_cmp);
        lower_q[t] = sorted[samples.lower_index];
        upper_q[t] = sorted[samples.upper_index];
    }

    StochasticSummary {
        normalized_time: normalized,
        times,
        mean,
        variance,
        lower_quantile: lower_q,
        upper_quantile: upper_q,
        lower_path: matrix[samples.lower_index].clone(),
        upper_path: matrix[samples.upper_index].clone(),
        n_samples: n,
        state,
    }
}

/// Empirical marginal distribution of one state at a single time point
/// (normalized phase for self-excited solutions).
#[derive(Debug, Clone, Serialize)]
pub struct Marginal {
    pub time_point: f64,
    pub normalized_time: bool,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
    pub skewness: f64,
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub n_samples: usize,
    pub state: usize,
}

impl Marginal {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("marginal serializes")
    }
}

/// Raw marginal values at a time point, ordered by the sorted input samples.
pub fn marginal_values(
    solution: &FgpcSolution,
    n_samples: usize,
    seed: u64,
    time_point: f64,
    state: usize,
) -> Vec<f64> {
    let samples = sorted_samples(solution, n_samples, seed);
    let normalized = matches!(solution.forcing, Forcing::SelfExcited);
    samples
        .thetas
        .par_iter()
        .map(|&theta| {
            let t = if normalized {
                time_point / solution.omega_at(theta)
            } else {
                time_point
            };
            solution.evaluate_state(theta, &[t], state)[0]
        })
        .collect()
}

pub fn marginal_at(
    solution: &FgpcSolution,
    n_samples: usize,
    seed: u64,
    time_point: f64,
    state: usize,
    bins: Option<usize>,
) -> Marginal {
    let values = marginal_values(solution, n_samples, seed, time_point, state);
    let n = values.len();
    let mut sorted = values.clone();
    sorted.sort_by(f64::total_cmp);
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let m2 = sorted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    let m3 = sorted.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n as f64;
    let skewness = if m2 > 0.0 { m3 / m2.powf(1.5) } else { 0.0 };
    let lower = sorted[quantile_index(n, 0.025)];
    let upper = sorted[quantile_index(n, 0.975)];

    // Freedman-Diaconis bin width unless overridden.
    let bin_count = bins.unwrap_or_else(|| {
        let iqr = sorted[quantile_index(n, 0.75)] - sorted[quantile_index(n, 0.25)];
        let width = 2.0 * iqr / (n as f64).cbrt();
        let range = sorted[n - 1] - sorted[0];
        if width > 0.0 && range > 0.0 {
            ((range / width).ceil() as usize).clamp(1, 512)
        } else {
            1
        }
    });
    let lo = sorted[0];
    let hi = sorted[n - 1];
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    let mut counts = vec![0u64; bin_count];
    for &v in &sorted {
        let idx = (((v - lo) / span) * bin_count as f64) as usize;
        counts[idx.min(bin_count - 1)] += 1;
    }
    let bin_edges = (0..=bin_count)
        .map(|i| lo + span * i as f64 / bin_count as f64)
        .collect();

    Marginal {
        time_point,
        normalized_time: matches!(solution.forcing, Forcing::SelfExcited),
        mean,
        lower,
        upper,
        skewness,
        bin_edges,
        counts,
        n_samples: n,
        state,
    }
}

/// Per-coefficient magnitude table `sqrt(a_km^2 + b_km^2)`, plus the
/// frequency-coefficient row for self-excited solutions.
#[derive(Debug, Clone, Serialize)]
pub struct CoefficientGrid {
    pub harmonic_order: usize,
    pub degree: usize,
    /// `[state][k][m]`
    pub magnitudes: Vec<Vec<Vec<f64>>>,
    pub omega_row: Option<Vec<f64>>,
}

impl CoefficientGrid {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("state,harmonic");
        for m in 0..=self.degree {
            out.push_str(&format!(",deg_{m}"));
        }
        out.push('\n');
        for (c, per_state) in self.magnitudes.iter().enumerate() {
            for (k, row) in per_state.iter().enumerate() {
                out.push_str(&format!("{c},{k}"));
                for v in row {
                    out.push_str(&format!(",{v:.12e}"));
                }
                out.push('\n');
            }
        }
        if let Some(row) = &self.omega_row {
            out.push_str("omega,-");
            for v in row {
                out.push_str(&format!(",{v:.12e}"));
            }
            out.push('\n');
        }
        out
    }
}

pub fn coefficient_grid(solution: &FgpcSolution) -> CoefficientGrid {
    let magnitudes = (0..solution.state_dim())
        .map(|c| {
            (0..=solution.harmonic_order)
                .map(|k| {
                    (0..=solution.degree)
                        .map(|m| solution.magnitude(c, k, m))
                        .collect()
                })
                .collect()
        })
        .collect();
    let omega_row = solution
        .omega
        .as_ref()
        .map(|q| q.iter().map(|v| v.abs()).collect());
    CoefficientGrid {
        harmonic_order: solution.harmonic_order,
        degree: solution.degree,
        magnitudes,
        omega_row,
    }
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn two_sample_ks(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] == v {
            i += 1;
        }
        while j < b.len() && b[j] == v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{Duffing, DuffingParameter, DuffingParams, IntegrationConfig};
    use crate::expansion::{solve_single_from_trajectory, CellConfig};
    use crate::stochastic::Distribution;
    use std::sync::Arc;

    fn beta_paper() -> Distribution {
        Distribution::Beta4 {
            shape_a: 5.0,
            shape_b: 5.0,
            lo: 0.8,
            hi: 1.2,
        }
    }

    fn solved_duffing(beta: f64, h: usize, degree: usize) -> FgpcSolution {
        let system: Arc<dyn crate::dynamics::OdeSystem> = Arc::new(
            Duffing::new(
                DuffingParams {
                    beta,
                    ..DuffingParams::table1()
                },
                DuffingParameter::Alpha,
            )
            .unwrap(),
        );
        let period = 2.0 * std::f64::consts::PI / 1.4;
        let traj = crate::dynamics::integrate(
            &*system,
            &system.default_initial_state(1.0),
            1.0,
            (0.0, 300.0 * period),
            &IntegrationConfig::default(),
        )
        .unwrap();
        solve_single_from_trajectory(
            &system,
            &beta_paper(),
            &traj,
            h,
            degree,
            &CellConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn degree_zero_variance_vanishes() {
        let sol = solved_duffing(1.0, 3, 0);
        let times: Vec<f64> = (0..32).map(|i| i as f64 * 0.1).collect();
        let moments = moments_from_coefficients(&sol, &times).unwrap();
        for v in &moments.variance {
            assert_eq!(*v, 0.0);
        }
    }

    #[test]
    fn moment_identities_match_sampling() {
        let sol = solved_duffing(1.0, 5, 8);
        let n = 100_000;
        let summary = sample_summary(&sol, n, 3, 32, 0);
        let moments = moments_from_coefficients(&sol, &summary.times).unwrap();
        for t in 0..summary.times.len() {
            let std = summary.variance[t].sqrt();
            let tol = 4.0 * std / (n as f64).sqrt();
            assert!(
                (moments.mean[t] - summary.mean[t]).abs() <= tol.max(1e-12),
                "t index {t}: closed {} vs sampled {}",
                moments.mean[t],
                summary.mean[t]
            );
        }
    }

    #[test]
    fn linear_marginal_is_nearly_symmetric() {
        // Uncertain forcing amplitude of a linear oscillator: the response is
        // proportional to it, so a symmetric input stays symmetric.
        let system: Arc<dyn crate::dynamics::OdeSystem> = Arc::new(
            Duffing::new(
                DuffingParams {
                    beta: 0.0,
                    ..DuffingParams::table1()
                },
                DuffingParameter::Gamma,
            )
            .unwrap(),
        );
        let dist = Distribution::Beta4 {
            shape_a: 5.0,
            shape_b: 5.0,
            lo: 0.16,
            hi: 0.24,
        };
        let period = 2.0 * std::f64::consts::PI / 1.4;
        let traj = crate::dynamics::integrate(
            &*system,
            &system.default_initial_state(0.2),
            0.2,
            (0.0, 300.0 * period),
            &IntegrationConfig::default(),
        )
        .unwrap();
        let sol =
            solve_single_from_trajectory(&system, &dist, &traj, 3, 4, &CellConfig::default())
                .unwrap();
        let marginal = marginal_at(&sol, 50_000, 5, 2.0, 0, None);
        assert!(
            marginal.skewness.abs() < 0.05,
            "skewness {}",
            marginal.skewness
        );
    }

    #[test]
    fn coverage_is_calibrated() {
        let sol = solved_duffing(1.0, 5, 8);
        let n = 100_000;
        let summary = sample_summary(&sol, n, 9, 16, 0);
        let samples = sorted_samples(&sol, n, 9);
        let (times, normalized) = output_times(&sol, 16, false);
        assert!(!normalized);
        let matrix = evaluation_matrix(&sol, &samples.thetas, &times, false, 0);
        for t in 0..times.len() {
            let inside = matrix
                .iter()
                .filter(|row| {
                    row[t] >= summary.lower_quantile[t] && row[t] <= summary.upper_quantile[t]
                })
                .count();
            let fraction = inside as f64 / n as f64;
            assert!(
                (0.945..=0.955).contains(&fraction),
                "t index {t}: coverage {fraction}"
            );
        }
    }

    #[test]
    fn constant_surrogate_has_degenerate_summary() {
        let mut sol = solved_duffing(1.0, 3, 2);
        // strip everything but the DC coefficient
        for k in 0..=3usize {
            for m in 0..=2usize {
                sol.cosine[0][k][m] = 0.0;
                if k >= 1 {
                    sol.sine[0][k - 1][m] = 0.0;
                }
            }
        }
        sol.cosine[0][0][0] = 0.75;
        let summary = sample_summary(&sol, 2000, 1, 16, 0);
        for t in 0..summary.times.len() {
            assert!((summary.mean[t] - 0.75).abs() < 1e-14);
            assert!((summary.upper_quantile[t] - summary.lower_quantile[t]).abs() < 1e-14);
        }
    }

    #[test]
    fn ks_distance_of_identical_samples_is_zero() {
        let xs: Vec<f64> = (0..100).map(|i| i as f64 * 0.01).collect();
        assert_eq!(two_sample_ks(&xs, &xs), 0.0);
        let ys: Vec<f64> = xs.iter().map(|x| x + 10.0).collect();
        assert_eq!(two_sample_ks(&xs, &ys), 1.0);
    }

    #[test]
    fn grid_of_degree_zero_solution_is_a_single_column() {
        let sol = solved_duffing(1.0, 5, 0);
        let grid = coefficient_grid(&sol);
        for k in 0..=5usize {
            assert_eq!(grid.magnitudes[0][k].len(), 1);
            assert!((grid.magnitudes[0][k][0] - sol.magnitude(0, k, 0)).abs() < 1e-15);
        }
        assert!(grid.omega_row.is_none());
    }
}
