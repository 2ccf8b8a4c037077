//! Pseudo-arclength continuation of forced frequency-response branches:
//! secant predictor, Newton corrector with an arclength constraint, adaptive
//! step halving, and traversal of turning points.

use super::newton::{newton_solve, NewtonConfig};
use super::Stability;
use crate::dynamics::{nominal_steady_state, Forcing, IntegrationConfig, OdeSystem};
use crate::error::{Error, Result};
use crate::fourier::{FourierGrid, HarmonicCoefficients};
use std::sync::Arc;

#[derive(Debug, Clone, Copy)]
pub struct ContinuationConfig {
    /// First arclength step and the step taken to seed the secant direction.
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    pub max_points: usize,
    /// Corrector iteration count below which the step is enlarged.
    pub target_iterations: usize,
    pub newton: NewtonConfig,
    pub integration: IntegrationConfig,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        Self {
            initial_step: 0.02,
            min_step: 1e-6,
            max_step: 0.05,
            max_points: 20_000,
            target_iterations: 4,
            newton: NewtonConfig::default(),
            integration: IntegrationConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BranchPoint {
    pub omega: f64,
    pub unknowns: Vec<f64>,
    /// Per state, magnitudes `[|a_0|, sqrt(a_1^2+b_1^2), ...]` of length H+1.
    pub magnitudes: Vec<Vec<f64>>,
    pub stability: Stability,
}

impl BranchPoint {
    pub fn first_harmonic_magnitude(&self, state: usize) -> f64 {
        self.magnitudes[state][1]
    }
}

/// A continuation branch over the sweep frequency.
#[derive(Debug, Default)]
pub struct Branch {
    pub h: usize,
    pub n_d: usize,
    pub points: Vec<BranchPoint>,
    pub warnings: Vec<String>,
}

impl Branch {
    /// Frequencies of the turning points, refined by a parabola through the
    /// three points around each reversal of the sweep direction.
    pub fn fold_omegas(&self) -> Vec<f64> {
        let omegas: Vec<f64> = self.points.iter().map(|p| p.omega).collect();
        if omegas.len() < 3 {
            return Vec::new();
        }
        // arclength parameter from unknown-vector increments
        let mut s = vec![0.0];
        for w in self.points.windows(2) {
            let mut d: f64 = (w[1].omega - w[0].omega) * (w[1].omega - w[0].omega);
            d += w[0]
                .unknowns
                .iter()
                .zip(w[1].unknowns.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
            s.push(s.last().unwrap() + d.sqrt());
        }
        let mut folds = Vec::new();
        for i in 1..omegas.len() - 1 {
            let d1 = omegas[i] - omegas[i - 1];
            let d2 = omegas[i + 1] - omegas[i];
            if d1 * d2 < 0.0 {
                folds.push(parabola_extremum(
                    (s[i - 1], omegas[i - 1]),
                    (s[i], omegas[i]),
                    (s[i + 1], omegas[i + 1]),
                ));
            }
        }
        folds
    }

    /// Frequency band bounded by exactly two folds, if present.
    pub fn three_solution_band(&self) -> Option<(f64, f64)> {
        let folds = self.fold_omegas();
        if folds.len() == 2 {
            Some((folds[0].min(folds[1]), folds[0].max(folds[1])))
        } else {
            None
        }
    }

    /// Branch table as CSV: sweep frequency, per-harmonic magnitudes per
    /// state, stability label.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("omega");
        for c in 0..self.n_d {
            for k in 0..=self.h {
                out.push_str(&format!(",mag_s{c}_h{k}"));
            }
        }
        out.push_str(",stability\n");
        for p in &self.points {
            out.push_str(&format!("{:.12e}", p.omega));
            for c in 0..self.n_d {
                for k in 0..=self.h {
                    out.push_str(&format!(",{:.12e}", p.magnitudes[c][k]));
                }
            }
            out.push_str(&format!(",{}\n", p.stability));
        }
        out
    }
}

fn parabola_extremum(p0: (f64, f64), p1: (f64, f64), p2: (f64, f64)) -> f64 {
    // Lagrange parabola through the three points; value at the vertex.
    let (x0, y0) = p0;
    let (x1, y1) = p1;
    let (x2, y2) = p2;
    let d0 = (x0 - x1) * (x0 - x2);
    let d1 = (x1 - x0) * (x1 - x2);
    let d2 = (x2 - x0) * (x2 - x1);
    let a = y0 / d0 + y1 / d1 + y2 / d2;
    let b = -(y0 * (x1 + x2) / d0 + y1 * (x0 + x2) / d1 + y2 * (x0 + x1) / d2);
    if a.abs() < 1e-300 {
        return y1;
    }
    let xv = -b / (2.0 * a);
    let c = y0 * x1 * x2 / d0 + y1 * x0 * x2 / d1 + y2 * x0 * x1 / d2;
    a * xv * xv + b * xv + c
}

fn magnitudes_of(coeffs: &HarmonicCoefficients, h: usize, n_d: usize) -> Vec<Vec<f64>> {
    let (a, b) = coeffs.cosine_sine();
    (0..n_d)
        .map(|c| {
            (0..=h)
                .map(|k| {
                    if k == 0 {
                        a[c][0].abs()
                    } else {
                        (a[c][k] * a[c][k] + b[c][k - 1] * b[c][k - 1]).sqrt()
                    }
                })
                .collect()
        })
        .collect()
}

/// Sweeps the forcing frequency from `omega_range.0` to `omega_range.1`.
///
/// `system_at` must produce the system driven at the requested frequency;
/// self-excited systems are excluded (their frequency is an unknown, not a
/// sweep parameter). The branch traverses folds, so the recorded frequencies
/// are not monotone.
pub fn continuation_sweep<S>(
    system_at: S,
    grid: &FourierGrid,
    theta: f64,
    omega_range: (f64, f64),
    cfg: &ContinuationConfig,
) -> Result<Branch>
where
    S: Fn(f64) -> Result<Arc<dyn OdeSystem>> + Sync,
{
    let (start, end) = omega_range;
    if !(start > 0.0 && end > 0.0) || start == end {
        return Err(Error::InvalidParameter(
            "sweep range must be positive and non-degenerate".into(),
        ));
    }
    let lo = start.min(end);
    let hi = start.max(end);

    let probe = system_at(start)?;
    match probe.forcing() {
        Forcing::Forced { omega } if (omega - start).abs() <= 1e-12 * start.abs() => {}
        Forcing::Forced { omega } => {
            return Err(Error::InvalidParameter(format!(
                "system factory ignored the requested frequency (asked {start}, got {omega})"
            )))
        }
        Forcing::SelfExcited => {
            return Err(Error::InvalidParameter(
                "continuation over the drive frequency excludes self-excited systems".into(),
            ))
        }
    }
    let n_d = grid.state_dim();
    let h = grid.harmonic_order();
    let n = n_d * (2 * h + 1);

    let residual_at = |omega: f64, u: &[f64]| -> Result<Vec<f64>> {
        let system = system_at(omega)?;
        let coeffs = HarmonicCoefficients::from_real_layout(h, n_d, u)?;
        super::harmonic_residual(&*system, grid, &coeffs, omega, theta)
    };

    let mut branch = Branch {
        h,
        n_d,
        points: Vec::new(),
        warnings: Vec::new(),
    };
    let push_point = |branch: &mut Branch, u: &[f64], omega: f64| -> Result<()> {
        let coeffs = HarmonicCoefficients::from_real_layout(h, n_d, u)?;
        branch.points.push(BranchPoint {
            omega,
            unknowns: u.to_vec(),
            magnitudes: magnitudes_of(&coeffs, h, n_d),
            stability: Stability::Unknown,
        });
        Ok(())
    };

    // First point: steady-state capture at the sweep start.
    let guess = nominal_steady_state(&*probe, theta, grid, &cfg.integration)?;
    let u0 = guess.coeffs.to_real_layout();
    let (u0, _) = newton_solve(&|u: &[f64]| residual_at(start, u), &u0, &cfg.newton)?;
    push_point(&mut branch, &u0, start)?;

    // Second point seeds the secant direction.
    let dir = (end - start).signum();
    let omega1 = start + dir * cfg.initial_step.min(cfg.max_step);
    let (u1, _) = newton_solve(&|u: &[f64]| residual_at(omega1, u), &u0, &cfg.newton)?;
    push_point(&mut branch, &u1, omega1)?;

    // Extended vector y = [u, omega].
    let mut y_prev: Vec<f64> = u0.iter().copied().chain([start]).collect();
    let mut y_curr: Vec<f64> = u1.iter().copied().chain([omega1]).collect();
    let mut tangent = normalized_difference(&y_curr, &y_prev);
    let mut ds = cfg.initial_step;

    while branch.points.len() < cfg.max_points {
        let omega_now = y_curr[n];
        if omega_now > hi + cfg.max_step || omega_now < lo - cfg.max_step {
            break;
        }

        let mut accepted = false;
        while ds >= cfg.min_step {
            let predictor: Vec<f64> = y_curr
                .iter()
                .zip(tangent.iter())
                .map(|(y, t)| y + ds * t)
                .collect();
            let y_ref = y_curr.clone();
            let t_ref = tangent.clone();
            let ds_ref = ds;
            let augmented = |y: &[f64]| -> Result<Vec<f64>> {
                let omega = y[n];
                let mut r = residual_at(omega, &y[..n])?;
                let constraint: f64 = y
                    .iter()
                    .zip(y_ref.iter())
                    .zip(t_ref.iter())
                    .map(|((a, b), t)| (a - b) * t)
                    .sum::<f64>()
                    - ds_ref;
                r.push(constraint);
                Ok(r)
            };
            match newton_solve(&augmented, &predictor, &cfg.newton) {
                Ok((y_new, diag)) => {
                    push_point(&mut branch, &y_new[..n], y_new[n])?;
                    tangent = normalized_difference(&y_new, &y_curr);
                    y_prev = std::mem::replace(&mut y_curr, y_new);
                    let _ = y_prev;
                    if diag.iterations <= cfg.target_iterations {
                        ds = (ds * 1.3).min(cfg.max_step);
                    }
                    accepted = true;
                    break;
                }
                Err(_) => {
                    ds *= 0.5;
                }
            }
        }
        if !accepted {
            branch.warnings.push(format!(
                "branch truncated at omega = {:.6}: corrector failed at the minimum step",
                y_curr[n]
            ));
            break;
        }
    }
    if branch.points.len() >= cfg.max_points {
        branch
            .warnings
            .push("branch truncated: maximum point count reached".into());
    }

    label_stability(&mut branch);
    Ok(branch)
}

fn normalized_difference(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut d: Vec<f64> = a.iter().zip(b.iter()).map(|(x, y)| x - y).collect();
    let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in &mut d {
            *v /= norm;
        }
    }
    d
}

/// Structural stability labels for the classic single-oscillator S-curve:
/// when exactly two folds are bracketed, the segment between them is the
/// unstable branch. Anything else stays `Unknown`.
fn label_stability(branch: &mut Branch) {
    if branch.n_d != 1 {
        return;
    }
    let omegas: Vec<f64> = branch.points.iter().map(|p| p.omega).collect();
    let mut fold_indices = Vec::new();
    for i in 1..omegas.len().saturating_sub(1) {
        if (omegas[i] - omegas[i - 1]) * (omegas[i + 1] - omegas[i]) < 0.0 {
            fold_indices.push(i);
        }
    }
    if fold_indices.len() != 2 {
        return;
    }
    let (f1, f2) = (fold_indices[0], fold_indices[1]);
    for (i, point) in branch.points.iter_mut().enumerate() {
        point.stability = if i <= f1 || i > f2 {
            Stability::Stable
        } else {
            Stability::Unstable
        };
    }
}
