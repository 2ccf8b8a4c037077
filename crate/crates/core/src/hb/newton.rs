//! Damped Newton iteration with a forward-difference Jacobian and Armijo
//! backtracking on the squared residual norm.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

#[derive(Debug, Clone, Copy)]
pub struct NewtonConfig {
    /// Convergence threshold on the max-norm of the residual.
    pub tol: f64,
    pub max_iter: usize,
    /// Reject Jacobians whose condition estimate exceeds this.
    pub condition_limit: f64,
    /// Number of times a full step may be accepted even though the line
    /// search found no decrease. Deflated residuals need this: the deflation
    /// factor grows toward an undiscovered root sitting between known ones,
    /// so a monotone search stalls on the ridge.
    pub nonmonotone_escapes: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50,
            condition_limit: 1e14,
            nonmonotone_escapes: 0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct NewtonDiagnostics {
    pub iterations: usize,
    pub residual_norm: f64,
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Finds a root of `residual`, starting from `initial`. Returns immediately
/// when the start already satisfies the tolerance. The residual may fail
/// (non-finite system values); failures during the line search shorten the
/// step, a failure at the current iterate aborts.
pub fn newton_solve<F>(
    residual: &F,
    initial: &[f64],
    cfg: &NewtonConfig,
) -> Result<(Vec<f64>, NewtonDiagnostics)>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    let mut x = initial.to_vec();
    let mut r = residual(&x)?;
    if r.len() != x.len() {
        return Err(Error::DimensionMismatch {
            context: "newton_solve residual length",
            expected: x.len(),
            actual: r.len(),
        });
    }
    let mut norm = inf_norm(&r);
    let mut iterations = 0;
    let mut escapes_left = cfg.nonmonotone_escapes;

    loop {
        if norm < cfg.tol {
            return Ok((
                x,
                NewtonDiagnostics {
                    iterations,
                    residual_norm: norm,
                },
            ));
        }
        if iterations >= cfg.max_iter {
            return Err(Error::MaxIterations {
                max_iter: cfg.max_iter,
                residual_norm: norm,
                last: x,
            });
        }

        let jacobian = forward_difference_jacobian(residual, &x, &r)?;
        let lu = jacobian.lu();
        let condition = condition_estimate(lu.u());
        if !condition.is_finite() || condition > cfg.condition_limit {
            return Err(Error::SingularJacobian { condition, last: x });
        }
        let rhs = DVector::from_iterator(r.len(), r.iter().map(|v| -v));
        let delta = match lu.solve(&rhs) {
            Some(d) if d.iter().all(|v| v.is_finite()) => d,
            _ => return Err(Error::SingularJacobian { condition, last: x }),
        };

        // Armijo backtracking on phi = 0.5 |r|^2; for the Newton direction
        // the directional derivative is -2 phi.
        let phi0: f64 = 0.5 * r.iter().map(|v| v * v).sum::<f64>();
        let mut lambda = 1.0;
        let mut accepted = false;
        while lambda >= 1e-12 {
            let trial: Vec<f64> = x
                .iter()
                .zip(delta.iter())
                .map(|(xi, di)| xi + lambda * di)
                .collect();
            match residual(&trial) {
                Ok(rt) if rt.iter().all(|v| v.is_finite()) => {
                    let phit: f64 = 0.5 * rt.iter().map(|v| v * v).sum::<f64>();
                    if phit <= phi0 * (1.0 - 2e-4 * lambda) || phit < cfg.tol * cfg.tol {
                        x = trial;
                        r = rt;
                        norm = inf_norm(&r);
                        accepted = true;
                        break;
                    }
                }
                _ => {}
            }
            lambda *= 0.5;
        }
        if !accepted && escapes_left > 0 {
            // jump the ridge: full step regardless of decrease
            let trial: Vec<f64> = x.iter().zip(delta.iter()).map(|(a, d)| a + d).collect();
            if let Ok(rt) = residual(&trial) {
                if rt.iter().all(|v| v.is_finite()) {
                    x = trial;
                    r = rt;
                    norm = inf_norm(&r);
                    escapes_left -= 1;
                    accepted = true;
                }
            }
        }
        if !accepted {
            return Err(Error::LineSearchStalled {
                residual_norm: norm,
                last: x,
            });
        }
        iterations += 1;
    }
}

/// Forward-difference Jacobian; columns are independent and evaluated in
/// parallel.
fn forward_difference_jacobian<F>(residual: &F, x: &[f64], r0: &[f64]) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    let n = x.len();
    let sqrt_eps = f64::EPSILON.sqrt();
    let columns: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>> {
            let h = sqrt_eps * (1.0 + x[i].abs());
            let mut xp = x.to_vec();
            xp[i] += h;
            let rp = residual(&xp)?;
            Ok(rp
                .iter()
                .zip(r0.iter())
                .map(|(a, b)| (a - b) / h)
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut jac = DMatrix::zeros(r0.len(), n);
    for (i, col) in columns.iter().enumerate() {
        for (j, v) in col.iter().enumerate() {
            jac[(j, i)] = *v;
        }
    }
    Ok(jac)
}

/// Cheap condition proxy: ratio of extreme magnitudes on the diagonal of U.
fn condition_estimate(u: DMatrix<f64>) -> f64 {
    let mut max_d = 0.0f64;
    let mut min_d = f64::INFINITY;
    for i in 0..u.nrows().min(u.ncols()) {
        let d = u[(i, i)].abs();
        max_d = max_d.max(d);
        min_d = min_d.min(d);
    }
    if min_d == 0.0 {
        f64::INFINITY
    } else {
        max_d / min_d
    }
}
