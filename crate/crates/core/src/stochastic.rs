//! Orthonormal polynomial bases matched to a scalar input density, and the
//! Gauss quadrature rules used by the stochastic Galerkin projection.
//!
//! Families follow the Askey scheme: uniform input uses normalized Legendre
//! polynomials, Gaussian input probabilists' Hermite, and four-parameter Beta
//! input Jacobi polynomials shifted to the support. Recurrence coefficients
//! come from the analytic Jacobi/Hermite/Legendre formulas rather than a
//! moment-based Stieltjes procedure, which is ill-conditioned at the degrees
//! used here; the Stieltjes path survives as a test oracle.
//!
//! Only a scalar random parameter is supported. The layout keeps the
//! distribution as a standalone value so a vector-valued extension can slot
//! in, but tensorized multivariate bases are out of scope.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution as SampleDistribution;
use serde::{Deserialize, Serialize};

/// Scalar input distribution of the uncertain parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum Distribution {
    Uniform { lo: f64, hi: f64 },
    Normal { mean: f64, std: f64 },
    /// Four-parameter Beta: shape pair on the bounded support `[lo, hi]`.
    Beta4 { shape_a: f64, shape_b: f64, lo: f64, hi: f64 },
}

impl Distribution {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Distribution::Uniform { lo, hi } => {
                if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                    return Err(Error::InvalidDistribution(format!(
                        "uniform requires finite lo < hi, got [{lo}, {hi}]"
                    )));
                }
            }
            Distribution::Normal { mean, std } => {
                if !(std > 0.0) || !mean.is_finite() || !std.is_finite() {
                    return Err(Error::InvalidDistribution(format!(
                        "normal requires finite mean and std > 0, got ({mean}, {std})"
                    )));
                }
            }
            Distribution::Beta4 {
                shape_a,
                shape_b,
                lo,
                hi,
            } => {
                if !(shape_a > 0.0 && shape_b > 0.0) {
                    return Err(Error::InvalidDistribution(format!(
                        "beta4 requires positive shape parameters, got ({shape_a}, {shape_b})"
                    )));
                }
                if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                    return Err(Error::InvalidDistribution(format!(
                        "beta4 requires finite lo < hi, got [{lo}, {hi}]"
                    )));
                }
            }
        }
        let mass = self.density_mass();
        if (mass - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidDistribution(format!(
                "density integrates to {mass:.12}, expected 1"
            )));
        }
        Ok(())
    }

    /// Probability density at `x`.
    pub fn density(&self, x: f64) -> f64 {
        match *self {
            Distribution::Uniform { lo, hi } => {
                if x < lo || x > hi {
                    0.0
                } else {
                    1.0 / (hi - lo)
                }
            }
            Distribution::Normal { mean, std } => {
                let z = (x - mean) / std;
                (-0.5 * z * z).exp() / (std * (2.0 * std::f64::consts::PI).sqrt())
            }
            Distribution::Beta4 {
                shape_a,
                shape_b,
                lo,
                hi,
            } => {
                if x < lo || x > hi {
                    return 0.0;
                }
                let u = (x - lo) / (hi - lo);
                let ln_b = ln_gamma(shape_a) + ln_gamma(shape_b) - ln_gamma(shape_a + shape_b);
                ((shape_a - 1.0) * u.ln() + (shape_b - 1.0) * (1.0 - u).ln() - ln_b).exp()
                    / (hi - lo)
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Distribution::Uniform { lo, hi } => 0.5 * (lo + hi),
            Distribution::Normal { mean, .. } => mean,
            Distribution::Beta4 {
                shape_a,
                shape_b,
                lo,
                hi,
            } => lo + (hi - lo) * shape_a / (shape_a + shape_b),
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Distribution::Uniform { lo, hi } => (hi - lo) * (hi - lo) / 12.0,
            Distribution::Normal { std, .. } => std * std,
            Distribution::Beta4 {
                shape_a,
                shape_b,
                lo,
                hi,
            } => {
                let s = shape_a + shape_b;
                (hi - lo) * (hi - lo) * shape_a * shape_b / (s * s * (s + 1.0))
            }
        }
    }

    /// Reproducible i.i.d. samples; the stream is fully determined by `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match *self {
            Distribution::Uniform { lo, hi } => {
                let d = rand_distr::Uniform::new_inclusive(lo, hi)
                    .expect("validated support");
                (0..n).map(|_| d.sample(&mut rng)).collect()
            }
            Distribution::Normal { mean, std } => {
                let d = rand_distr::Normal::new(mean, std).expect("validated parameters");
                (0..n).map(|_| d.sample(&mut rng)).collect()
            }
            Distribution::Beta4 {
                shape_a,
                shape_b,
                lo,
                hi,
            } => {
                let d = rand_distr::Beta::new(shape_a, shape_b).expect("validated parameters");
                (0..n).map(|_| lo + (hi - lo) * d.sample(&mut rng)).collect()
            }
        }
    }

    /// Integration window covering essentially all probability mass.
    fn integration_window(&self) -> (f64, f64) {
        match *self {
            Distribution::Uniform { lo, hi } => (lo, hi),
            Distribution::Normal { mean, std } => (mean - 12.0 * std, mean + 12.0 * std),
            Distribution::Beta4 { lo, hi, .. } => (lo, hi),
        }
    }

    /// Total mass by 128-point Gauss-Legendre over the integration window.
    fn density_mass(&self) -> f64 {
        let (lo, hi) = self.integration_window();
        let (nodes, weights) = gauss_legendre_unit(128);
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        nodes
            .iter()
            .zip(weights.iter())
            .map(|(&x, &w)| w * half * self.density(mid + half * x))
            .sum()
    }

    /// Monic three-term recurrence coefficients `(alpha_j, beta_j)` of the
    /// orthogonal polynomials for this density; `beta_0 = 1` since the
    /// measure is a probability measure.
    fn recurrence(&self, j: usize) -> (f64, f64) {
        match *self {
            Distribution::Uniform { lo, hi } => {
                let mid = 0.5 * (lo + hi);
                let half = 0.5 * (hi - lo);
                let beta = if j == 0 {
                    1.0
                } else {
                    let jf = j as f64;
                    half * half * jf * jf / (4.0 * jf * jf - 1.0)
                };
                (mid, beta)
            }
            Distribution::Normal { mean, std } => {
                let beta = if j == 0 { 1.0 } else { j as f64 * std * std };
                (mean, beta)
            }
            Distribution::Beta4 {
                shape_a,
                shape_b,
                lo,
                hi,
            } => {
                // Jacobi weight (1-x)^A (1+x)^B on [-1, 1] matches the Beta
                // density when A = shape_b - 1 and B = shape_a - 1.
                let a = shape_b - 1.0;
                let b = shape_a - 1.0;
                let mid = 0.5 * (lo + hi);
                let half = 0.5 * (hi - lo);
                if j == 0 {
                    let alpha = (b - a) / (a + b + 2.0);
                    (mid + half * alpha, 1.0)
                } else {
                    let n = j as f64;
                    let s = 2.0 * n + a + b;
                    let alpha = (b * b - a * a) / (s * (s + 2.0));
                    let beta = 4.0 * n * (n + a) * (n + b) * (n + a + b)
                        / (s * s * (s + 1.0) * (s - 1.0));
                    (mid + half * alpha, half * half * beta)
                }
            }
        }
    }
}

/// Orthonormal polynomial basis of maximal degree `N` for a distribution.
///
/// The basis is fully determined by `(distribution, degree)`; evaluation and
/// quadrature reconstruct what they need from the analytic recurrence, so the
/// type serializes trivially.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticBasis {
    distribution: Distribution,
    degree: usize,
}

impl StochasticBasis {
    /// Builds the orthonormal basis `Phi_0..Phi_N` for the given density.
    pub fn new(distribution: Distribution, degree: usize) -> Result<Self> {
        distribution.validate()?;
        Ok(Self {
            distribution,
            degree,
        })
    }

    pub fn distribution(&self) -> &Distribution {
        &self.distribution
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of basis polynomials, `N + 1`.
    pub fn len(&self) -> usize {
        self.degree + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Monic recurrence coefficients `(alpha_j, beta_j)`.
    pub fn recurrence(&self, j: usize) -> (f64, f64) {
        self.distribution.recurrence(j)
    }

    /// Evaluates `[Phi_0(theta), ..., Phi_N(theta)]` by the normalized
    /// three-term recurrence. Evaluation outside the support is permitted;
    /// values there are extrapolations of the polynomials.
    pub fn evaluate(&self, theta: f64) -> Vec<f64> {
        self.evaluate_to(theta, self.degree)
    }

    fn evaluate_to(&self, theta: f64, degree: usize) -> Vec<f64> {
        // sqrt(beta_{j+1}) phi_{j+1} = (theta - alpha_j) phi_j - sqrt(beta_j) phi_{j-1}
        let mut values = Vec::with_capacity(degree + 1);
        values.push(1.0);
        if degree == 0 {
            return values;
        }
        let mut prev = 0.0;
        let mut curr = 1.0;
        let mut sqrt_beta_j = 0.0; // sqrt(beta_0) never multiplies a nonzero phi_{-1}
        for j in 0..degree {
            let (alpha_j, _) = self.recurrence(j);
            let (_, beta_next) = self.recurrence(j + 1);
            let sqrt_beta_next = beta_next.sqrt();
            let next = ((theta - alpha_j) * curr - sqrt_beta_j * prev) / sqrt_beta_next;
            values.push(next);
            prev = curr;
            curr = next;
            sqrt_beta_j = sqrt_beta_next;
        }
        values
    }

    /// Gauss rule with `n_g` nodes from the symmetric tridiagonal
    /// (Golub-Welsch) eigenproblem of the recurrence. Weights sum to one.
    pub fn gauss_rule(&self, n_g: usize) -> Result<QuadratureRule> {
        if n_g == 0 {
            return Err(Error::InvalidParameter(
                "quadrature rule needs at least one node".into(),
            ));
        }
        let mut jacobi = DMatrix::<f64>::zeros(n_g, n_g);
        let mut scale: f64 = 0.0;
        for j in 0..n_g {
            let (alpha_j, _) = self.recurrence(j);
            jacobi[(j, j)] = alpha_j;
            scale = scale.max(alpha_j.abs());
            if j + 1 < n_g {
                let (_, beta_next) = self.recurrence(j + 1);
                let off = beta_next.sqrt();
                jacobi[(j, j + 1)] = off;
                jacobi[(j + 1, j)] = off;
                scale = scale.max(off);
            }
        }
        let eigen = SymmetricEigen::try_new(jacobi, f64::EPSILON, 10_000)
            .ok_or(Error::QuadratureEigenFailure { n_g, scale })?;
        let mut pairs: Vec<(f64, f64)> = (0..n_g)
            .map(|i| {
                let node = eigen.eigenvalues[i];
                let first = eigen.eigenvectors[(0, i)];
                (node, first * first) // beta_0 = 1
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        Ok(QuadratureRule {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1 / total).collect(),
        })
    }

    /// Default Gauss size for Galerkin assembly of a residual whose
    /// nonlinearity has polynomial degree `d_nl`: integrands reach degree
    /// about `d_nl * N + N`, integrated with margin.
    pub fn default_quadrature_size(&self, d_nl: usize) -> usize {
        let n = self.degree;
        (2 * (n + 1)).max(n + 1 + (d_nl.max(1) * n).div_ceil(2) + 1)
    }
}

/// Nodes and weights of a Gauss rule matched to a probability density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// Assembles a rule from explicit nodes and weights; weights must be
    /// positive and sum to one (total probability mass).
    pub fn new(nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if nodes.len() != weights.len() || nodes.is_empty() {
            return Err(Error::InvalidParameter(
                "quadrature nodes and weights must be non-empty and equal length".into(),
            ));
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::InvalidParameter(
                "quadrature weights must be positive".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "quadrature weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Quadrature-weighted mean of the nodes, i.e. the discrete first moment.
    pub fn nominal(&self) -> f64 {
        self.nodes
            .iter()
            .zip(self.weights.iter())
            .map(|(&x, &w)| w * x)
            .sum()
    }

    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(self.weights.iter())
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Gauss-Legendre rule on [-1, 1] with unit weight, used internally for
/// density checks. Built from the Legendre recurrence.
fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let basis = StochasticBasis {
        distribution: Distribution::Uniform { lo: -1.0, hi: 1.0 },
        degree: 0,
    };
    let rule = basis.gauss_rule(n).expect("Legendre rule");
    // weights of the probability rule sum to 1; the unit-weight rule sums to 2
    let weights = rule.weights.iter().map(|w| 2.0 * w).collect();
    (rule.nodes, weights)
}

/// Lanczos approximation of ln Gamma, accurate to ~1e-13 for x > 0.
fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEFFS: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEFFS[0];
    for (i, &c) in COEFFS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn beta_paper() -> Distribution {
        Distribution::Beta4 {
            shape_a: 5.0,
            shape_b: 5.0,
            lo: 0.8,
            hi: 1.2,
        }
    }

    #[test]
    fn legendre_degree_one_is_sqrt3_x() {
        let basis =
            StochasticBasis::new(Distribution::Uniform { lo: -1.0, hi: 1.0 }, 1).unwrap();
        for x in [-0.9, -0.3, 0.0, 0.4, 1.0] {
            let v = basis.evaluate(x);
            assert_abs_diff_eq!(v[0], 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(v[1], 3.0f64.sqrt() * x, epsilon = 1e-14);
        }
    }

    #[test]
    fn hermite_degree_two_closed_form() {
        let basis =
            StochasticBasis::new(Distribution::Normal { mean: 0.0, std: 1.0 }, 2).unwrap();
        for x in [-2.0, -0.5, 0.0, 1.3, 2.7] {
            let v = basis.evaluate(x);
            assert_abs_diff_eq!(v[2], (x * x - 1.0) / 2.0f64.sqrt(), epsilon = 1e-13);
        }
    }

    #[test]
    fn legendre_edge_values() {
        let basis =
            StochasticBasis::new(Distribution::Uniform { lo: -1.0, hi: 1.0 }, 6).unwrap();
        let v = basis.evaluate(1.0);
        for (m, value) in v.iter().enumerate() {
            assert_abs_diff_eq!(*value, ((2 * m + 1) as f64).sqrt(), epsilon = 1e-12);
        }
    }

    #[test]
    fn degree_one_is_standardized_variable_for_all_families() {
        for dist in [
            Distribution::Uniform { lo: 0.3, hi: 2.1 },
            Distribution::Normal { mean: -1.0, std: 0.7 },
            beta_paper(),
        ] {
            let basis = StochasticBasis::new(dist, 1).unwrap();
            let (mu, sigma) = (dist.mean(), dist.variance().sqrt());
            for x in [mu - sigma, mu, mu + 0.5 * sigma] {
                let v = basis.evaluate(x);
                assert_abs_diff_eq!(v[1], (x - mu) / sigma, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn gram_matrix_is_identity_under_quadrature() {
        for dist in [
            Distribution::Uniform { lo: -1.0, hi: 1.0 },
            Distribution::Normal { mean: 0.0, std: 1.0 },
            beta_paper(),
        ] {
            let basis = StochasticBasis::new(dist, 12).unwrap();
            let rule = basis.gauss_rule(20).unwrap();
            for m in 0..=12usize {
                for n in 0..=12usize {
                    let inner = rule.integrate(|theta| {
                        let v = basis.evaluate(theta);
                        v[m] * v[n]
                    });
                    let expected = if m == n { 1.0 } else { 0.0 };
                    assert!(
                        (inner - expected).abs() < 1e-10,
                        "family {dist:?} m={m} n={n}: {inner}"
                    );
                }
            }
        }
    }

    #[test]
    fn two_point_gauss_legendre() {
        let basis =
            StochasticBasis::new(Distribution::Uniform { lo: -1.0, hi: 1.0 }, 1).unwrap();
        let rule = basis.gauss_rule(2).unwrap();
        let inv_sqrt3 = 1.0 / 3.0f64.sqrt();
        assert_abs_diff_eq!(rule.nodes()[0], -inv_sqrt3, epsilon = 1e-14);
        assert_abs_diff_eq!(rule.nodes()[1], inv_sqrt3, epsilon = 1e-14);
        assert_abs_diff_eq!(rule.weights()[0], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(rule.weights()[1], 0.5, epsilon = 1e-14);
    }

    #[test]
    fn single_node_normal_rule_sits_at_mean() {
        let basis =
            StochasticBasis::new(Distribution::Normal { mean: 0.0, std: 1.0 }, 0).unwrap();
        let rule = basis.gauss_rule(1).unwrap();
        assert_abs_diff_eq!(rule.nodes()[0], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(rule.weights()[0], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn beta_rule_reproduces_symmetric_mean() {
        let basis = StochasticBasis::new(beta_paper(), 4).unwrap();
        let rule = basis.gauss_rule(20).unwrap();
        assert_abs_diff_eq!(rule.integrate(|x| x), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rule.weights().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert!(rule.weights().iter().all(|&w| w > 0.0));
    }

    /// Analytic raw moments used as the exactness oracle.
    fn analytic_moment(dist: &Distribution, k: usize) -> f64 {
        match *dist {
            Distribution::Uniform { lo, hi } => {
                (hi.powi(k as i32 + 1) - lo.powi(k as i32 + 1)) / ((k as f64 + 1.0) * (hi - lo))
            }
            Distribution::Normal { mean, std } => {
                // E[(mean + std Z)^k] via binomial expansion and Gaussian moments
                let mut total = 0.0;
                for j in 0..=k {
                    if j % 2 == 1 {
                        continue;
                    }
                    let gauss: f64 = (1..=j).filter(|i| i % 2 == 1).map(|i| i as f64).product();
                    total += binomial(k, j) * mean.powi((k - j) as i32) * std.powi(j as i32) * gauss;
                }
                total
            }
            Distribution::Beta4 {
                shape_a,
                shape_b,
                lo,
                hi,
            } => {
                // E[(lo + (hi-lo) U)^k] with U ~ Beta(a, b) on [0, 1]
                let mut unit = vec![1.0];
                for j in 0..k {
                    let prev = unit[j];
                    unit.push(prev * (shape_a + j as f64) / (shape_a + shape_b + j as f64));
                }
                (0..=k)
                    .map(|j| binomial(k, j) * lo.powi((k - j) as i32) * (hi - lo).powi(j as i32) * unit[j])
                    .sum()
            }
        }
    }

    fn binomial(n: usize, k: usize) -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    #[test]
    fn quadrature_is_exact_up_to_degree_2ng_minus_1() {
        for dist in [
            Distribution::Uniform { lo: 0.2, hi: 1.7 },
            Distribution::Normal { mean: 0.5, std: 2.0 },
            beta_paper(),
        ] {
            let basis = StochasticBasis::new(dist, 0).unwrap();
            let n_g = 8;
            let rule = basis.gauss_rule(n_g).unwrap();
            for k in 0..2 * n_g {
                let quad = rule.integrate(|x| x.powi(k as i32));
                let exact = analytic_moment(&dist, k);
                let scale = exact.abs().max(1.0);
                assert!(
                    (quad - exact).abs() / scale < 1e-10,
                    "{dist:?} moment {k}: quad {quad} vs exact {exact}"
                );
            }
        }
    }

    /// Stieltjes procedure on a dense Gauss-Legendre grid, as an independent
    /// oracle for the analytic Jacobi recurrence.
    fn stieltjes_basis_values(dist: &Distribution, degree: usize, theta: f64) -> Vec<f64> {
        let (lo, hi) = match *dist {
            Distribution::Beta4 { lo, hi, .. } | Distribution::Uniform { lo, hi } => (lo, hi),
            Distribution::Normal { mean, std } => (mean - 14.0 * std, mean + 14.0 * std),
        };
        let (xs, ws) = gauss_legendre_unit(220);
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        let nodes: Vec<f64> = xs.iter().map(|&x| mid + half * x).collect();
        let weights: Vec<f64> = xs
            .iter()
            .zip(ws.iter())
            .map(|(&x, &w)| w * half * dist.density(mid + half * x))
            .collect();
        let dot = |f: &[f64], g: &[f64]| -> f64 {
            f.iter()
                .zip(g.iter())
                .zip(weights.iter())
                .map(|((a, b), w)| a * b * w)
                .sum()
        };
        // monic recurrence p_{j+1} = (t - alpha_j) p_j - beta_j p_{j-1},
        // beta_j = <p_j, p_j> / <p_{j-1}, p_{j-1}>, beta_0 = total mass
        let mut alphas = Vec::new();
        let mut betas = Vec::new();
        let mut p_prev = vec![0.0; nodes.len()];
        let mut p_curr = vec![1.0; nodes.len()];
        let mut norm_prev = 1.0;
        for _ in 0..=degree {
            let norm_curr = dot(&p_curr, &p_curr);
            betas.push(norm_curr / norm_prev);
            let tx: Vec<f64> = nodes.iter().zip(p_curr.iter()).map(|(t, p)| t * p).collect();
            let alpha = dot(&tx, &p_curr) / norm_curr;
            alphas.push(alpha);
            let beta_j = *betas.last().unwrap();
            let p_next: Vec<f64> = nodes
                .iter()
                .zip(p_curr.iter().zip(p_prev.iter()))
                .map(|(t, (pc, pp))| (t - alpha) * pc - beta_j * pp)
                .collect();
            p_prev = p_curr;
            p_curr = p_next;
            norm_prev = norm_curr;
        }
        // evaluate the orthonormal recurrence at theta
        let mut values = vec![1.0];
        let mut prev = 0.0;
        let mut curr = 1.0;
        let mut sqrt_beta = 0.0;
        for j in 0..degree {
            let sqrt_next = betas[j + 1].sqrt();
            let next = ((theta - alphas[j]) * curr - sqrt_beta * prev) / sqrt_next;
            values.push(next);
            prev = curr;
            curr = next;
            sqrt_beta = sqrt_next;
        }
        values
    }

    #[test]
    fn beta_evaluation_matches_stieltjes_oracle() {
        let dist = beta_paper();
        let basis = StochasticBasis::new(dist, 8).unwrap();
        let thetas = dist.sample(50, 7);
        for theta in thetas {
            let ours = basis.evaluate(theta);
            let oracle = stieltjes_basis_values(&dist, 8, theta);
            for (o, s) in ours.iter().zip(oracle.iter()) {
                assert!(
                    (o - s).abs() < 1e-11 * s.abs().max(1.0),
                    "theta={theta}: {o} vs {s}"
                );
            }
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let dist = beta_paper();
        let a = dist.sample(64, 42);
        let b = dist.sample(64, 42);
        assert_eq!(a, b);
        let c = dist.sample(64, 43);
        assert_ne!(a, c);
    }

    #[test]
    fn beta_sample_mean_is_centered() {
        let dist = beta_paper();
        let n = 100_000;
        let samples = dist.sample(n, 1);
        let mean = samples.iter().sum::<f64>() / n as f64;
        let std = (samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * std / (n as f64).sqrt());
    }

    #[test]
    fn beta_samples_pass_ks_against_analytic_cdf() {
        use statrs::distribution::ContinuousCDF;
        let dist = beta_paper();
        let n = 100_000;
        let mut samples = dist.sample(n, 11);
        samples.sort_by(f64::total_cmp);
        let reference = statrs::distribution::Beta::new(5.0, 5.0).unwrap();
        let mut ks: f64 = 0.0;
        for (i, &x) in samples.iter().enumerate() {
            let u = (x - 0.8) / 0.4;
            let cdf = reference.cdf(u);
            let hi = (i + 1) as f64 / n as f64;
            let lo = i as f64 / n as f64;
            ks = ks.max((cdf - hi).abs()).max((cdf - lo).abs());
        }
        assert!(ks < 1.63 / (n as f64).sqrt(), "KS statistic {ks}");
    }

    #[test]
    fn invalid_distributions_are_rejected() {
        assert!(Distribution::Uniform { lo: 2.0, hi: 1.0 }.validate().is_err());
        assert!(Distribution::Normal { mean: 0.0, std: 0.0 }.validate().is_err());
        assert!(Distribution::Beta4 {
            shape_a: -1.0,
            shape_b: 2.0,
            lo: 0.0,
            hi: 1.0
        }
        .validate()
        .is_err());
    }

    #[test]
    fn default_quadrature_size_covers_nonlinear_degree() {
        let basis = StochasticBasis::new(beta_paper(), 12).unwrap();
        assert_eq!(basis.default_quadrature_size(3), 32);
        let b0 = StochasticBasis::new(beta_paper(), 0).unwrap();
        assert_eq!(b0.default_quadrature_size(3), 2);
    }
}
