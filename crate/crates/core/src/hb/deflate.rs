//! Shifted deflation: multiply the residual by a factor singular at every
//! known root so Newton is pushed toward solutions it has not seen yet.

use super::newton::{inf_norm, newton_solve, NewtonConfig};
use crate::error::Result;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy)]
pub struct DeflationConfig {
    /// Singularity exponent `p_D`.
    pub exponent: f64,
    /// Additive shift `alpha_D`; keeps the deflated residual from flattening
    /// far away from known roots.
    pub shift: f64,
    /// Two roots closer than `distinct_radius * (1 + |s|)` count as the same.
    pub distinct_radius: f64,
    pub max_solutions: usize,
}

impl Default for DeflationConfig {
    fn default() -> Self {
        Self {
            exponent: 2.0,
            shift: 1.0,
            distinct_radius: 1e-6,
            max_solutions: 8,
        }
    }
}

impl DeflationConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.exponent > 0.0) {
            return Err(format!("deflation exponent must be positive, got {}", self.exponent));
        }
        if !(self.shift > 0.0) {
            return Err(format!("deflation shift must be positive, got {}", self.shift));
        }
        if !(self.distinct_radius > 0.0) {
            return Err(format!(
                "distinctness radius must be positive, got {}",
                self.distinct_radius
            ));
        }
        if self.max_solutions == 0 {
            return Err("max_solutions must be at least 1".into());
        }
        Ok(())
    }
}

/// Stability label of a periodic solution. The solvers here do not compute
/// Floquet stability; labels other than `Unknown` come from structural
/// post-processing (see continuation).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Stable,
    Unstable,
    Unknown,
}

impl std::fmt::Display for Stability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
            Stability::Unknown => "unknown",
        })
    }
}

#[derive(Debug, Clone)]
pub struct RootRecord {
    pub unknowns: Vec<f64>,
    /// Max-norm of the *undeflated* residual at the root.
    pub residual_norm: f64,
    pub iterations: usize,
    pub stability: Stability,
}

/// Deflated collection of distinct roots plus per-attempt diagnostics.
#[derive(Debug, Default)]
pub struct SolutionSet {
    pub roots: Vec<RootRecord>,
    pub failures: Vec<String>,
}

impl SolutionSet {
    pub fn len(&self) -> usize {
        self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    pub fn pairwise_distances(&self) -> Vec<((usize, usize), f64)> {
        let mut out = Vec::new();
        for i in 0..self.roots.len() {
            for j in i + 1..self.roots.len() {
                out.push((
                    (i, j),
                    distance(&self.roots[i].unknowns, &self.roots[j].unknowns),
                ));
            }
        }
        out
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Product of the shifted deflation operators of all known roots evaluated
/// at `point`: `prod_s (|s - point|^-p + alpha)`. The operators are scalar
/// multiples of the identity, so the product collapses to a scalar.
pub fn deflation_factor(point: &[f64], roots: &[Vec<f64>], cfg: &DeflationConfig) -> f64 {
    roots
        .iter()
        .map(|s| distance(s, point).powf(-cfg.exponent) + cfg.shift)
        .product()
}

/// Finds multiple distinct roots of `residual` by repeated deflated Newton
/// runs. Every accepted root is verified against the *undeflated* residual
/// and against the distinctness radius; failed attempts are recorded and the
/// search stops once a full pass over the initial guesses produces nothing
/// new (or `max_solutions` is reached).
pub fn deflated_solve<F>(
    residual: &F,
    initials: &[Vec<f64>],
    deflation: &DeflationConfig,
    newton: &NewtonConfig,
) -> Result<SolutionSet>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    if initials.is_empty() {
        return Err(crate::error::Error::InvalidParameter(
            "deflated_solve needs at least one initial guess".into(),
        ));
    }
    deflation
        .validate()
        .map_err(crate::error::Error::InvalidParameter)?;

    let mut set = SolutionSet::default();
    while set.roots.len() < deflation.max_solutions {
        let known: Vec<Vec<f64>> = set.roots.iter().map(|r| r.unknowns.clone()).collect();
        let deflated = |q: &[f64]| -> Result<Vec<f64>> {
            let mut r = residual(q)?;
            let factor = deflation_factor(q, &known, deflation);
            for v in &mut r {
                *v *= factor;
            }
            Ok(r)
        };

        // The supplied guesses first; when those get stuck on the
        // singularities of already-found roots (a converged capture IS the
        // first root), derived guesses give fresh basins: the origin, then
        // pairwise midpoints and reflections — a remaining root often sits
        // between two known ones.
        let mut candidates: Vec<Vec<f64>> = initials.to_vec();
        if !known.is_empty() {
            candidates.push(vec![0.0; initials[0].len()]);
        }
        for i in 0..known.len() {
            for j in i + 1..known.len() {
                candidates.push(
                    known[i]
                        .iter()
                        .zip(known[j].iter())
                        .map(|(a, b)| 0.5 * (a + b))
                        .collect(),
                );
            }
        }
        for i in 0..known.len() {
            for j in 0..known.len() {
                if i != j {
                    candidates.push(
                        known[i]
                            .iter()
                            .zip(known[j].iter())
                            .map(|(a, b)| 2.0 * b - a)
                            .collect(),
                    );
                }
            }
        }

        // ridge-jumping escapes for the monotone line search, see NewtonConfig
        let deflated_newton = NewtonConfig {
            nonmonotone_escapes: newton.nonmonotone_escapes.max(8),
            ..*newton
        };
        let mut found_new = false;
        for (gi, guess) in candidates.iter().enumerate() {
            match newton_solve(&deflated, guess, &deflated_newton) {
                Ok((root, diag)) => {
                    let plain_norm = match residual(&root) {
                        Ok(r) => inf_norm(&r),
                        Err(e) => {
                            set.failures
                                .push(format!("guess {gi}: root validation failed: {e}"));
                            continue;
                        }
                    };
                    if plain_norm >= newton.tol {
                        set.failures.push(format!(
                            "guess {gi}: deflated solve landed on a spurious point (|r| = {plain_norm:.3e})"
                        ));
                        continue;
                    }
                    let duplicate = set.roots.iter().any(|r| {
                        distance(&r.unknowns, &root)
                            <= deflation.distinct_radius * (1.0 + norm(&r.unknowns))
                    });
                    if duplicate {
                        set.failures
                            .push(format!("guess {gi}: converged to an already known root"));
                        continue;
                    }
                    set.roots.push(RootRecord {
                        unknowns: root,
                        residual_norm: plain_norm,
                        iterations: diag.iterations,
                        stability: Stability::Unknown,
                    });
                    found_new = true;
                    break;
                }
                Err(e) => {
                    set.failures.push(format!("guess {gi}: {e}"));
                }
            }
        }
        if !found_new {
            break;
        }
    }
    Ok(set)
}
