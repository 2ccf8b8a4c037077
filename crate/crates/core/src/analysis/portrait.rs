//! Phase portraits over one period: the pointwise sample mean of
//! `(x, dx/dt)` plus the two 95% boundary sample paths, each a closed curve.

use crate::dynamics::Forcing;
use crate::expansion::FgpcSolution;
use serde::Serialize;
use std::f64::consts::PI;

#[derive(Debug, Clone, Serialize)]
pub struct PhasePortrait {
    pub state: usize,
    pub mean: Vec<[f64; 2]>,
    pub lower: Vec<[f64; 2]>,
    pub upper: Vec<[f64; 2]>,
}

impl PhasePortrait {
    /// Largest endpoint mismatch over the three curves.
    pub fn closure_defect(&self) -> f64 {
        [&self.mean, &self.lower, &self.upper]
            .iter()
            .map(|curve| {
                let first = curve.first().unwrap();
                let last = curve.last().unwrap();
                ((first[0] - last[0]).powi(2) + (first[1] - last[1]).powi(2)).sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// Shoelace area of the mean curve.
    pub fn mean_area(&self) -> f64 {
        let mut acc = 0.0;
        for w in self.mean.windows(2) {
            acc += w[0][0] * w[1][1] - w[1][0] * w[0][1];
        }
        0.5 * acc.abs()
    }

    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("x_mean,v_mean,x_lower,v_lower,x_upper,v_upper\n");
        for i in 0..self.mean.len() {
            out.push_str(&format!(
                "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n",
                self.mean[i][0],
                self.mean[i][1],
                self.lower[i][0],
                self.lower[i][1],
                self.upper[i][0],
                self.upper[i][1],
            ));
        }
        out
    }
}

pub fn phase_portrait(
    solution: &FgpcSolution,
    n_samples: usize,
    seed: u64,
    n_time: usize,
    state: usize,
) -> PhasePortrait {
    use rayon::prelude::*;
    let samples = super::sorted_samples(solution, n_samples, seed);
    let normalized = matches!(solution.forcing, Forcing::SelfExcited);
    let phases: Vec<f64> = (0..=n_time)
        .map(|i| 2.0 * PI * i as f64 / n_time as f64)
        .collect();

    let curve_of = |theta: f64| -> Vec<[f64; 2]> {
        let omega = solution.omega_at(theta);
        let times: Vec<f64> = if normalized {
            phases.iter().map(|p| p / omega).collect()
        } else {
            // physical times spanning one forcing period
            phases.iter().map(|p| p / omega).collect()
        };
        let x = solution.evaluate_state(theta, &times, state);
        let v = solution.evaluate_velocity_state(theta, &times, state);
        x.into_iter().zip(v).map(|(a, b)| [a, b]).collect()
    };

    let curves: Vec<Vec<[f64; 2]>> = samples.thetas.par_iter().map(|&t| curve_of(t)).collect();
    let n = curves.len() as f64;
    let mut mean = vec![[0.0, 0.0]; phases.len()];
    for curve in &curves {
        for (m, p) in mean.iter_mut().zip(curve.iter()) {
            m[0] += p[0] / n;
            m[1] += p[1] / n;
        }
    }

    PhasePortrait {
        state,
        mean,
        lower: curves[samples.lower_index].clone(),
        upper: curves[samples.upper_index].clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{
        integrate, Duffing, DuffingParameter, DuffingParams, IntegrationConfig,
    };
    use crate::expansion::{solve_single_from_trajectory, CellConfig};
    use crate::stochastic::Distribution;
    use std::sync::Arc;

    fn solved(beta: f64) -> FgpcSolution {
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
        let traj = integrate(
            &*system,
            &system.default_initial_state(1.0),
            1.0,
            (0.0, 300.0 * period),
            &IntegrationConfig::default(),
        )
        .unwrap();
        let dist = Distribution::Beta4 {
            shape_a: 5.0,
            shape_b: 5.0,
            lo: 0.8,
            hi: 1.2,
        };
        solve_single_from_trajectory(&system, &dist, &traj, 5, 6, &CellConfig::default())
            .unwrap()
    }

    #[test]
    fn curves_close_over_one_period() {
        let portrait = phase_portrait(&solved(1.0), 2000, 7, 128, 0);
        assert!(portrait.closure_defect() < 1e-10);
    }

    #[test]
    fn linear_mean_curve_is_an_ellipse() {
        let portrait = phase_portrait(&solved(0.0), 4000, 3, 512, 0);
        // ellipse with semi-axes A and Omega A has area pi Omega A^2
        let amp = portrait
            .mean
            .iter()
            .map(|p| p[0].abs())
            .fold(0.0, f64::max);
        let expected = PI * 1.4 * amp * amp;
        let area = portrait.mean_area();
        assert!(
            (area - expected).abs() / expected < 0.01,
            "area {area} vs {expected}"
        );
    }
}
