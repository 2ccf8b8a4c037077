use super::*;
use crate::dynamics::{Duffing, DuffingParameter, DuffingParams};
use crate::hb::HbProblem;
use approx::assert_abs_diff_eq;

fn beta_paper() -> Distribution {
    Distribution::Beta4 {
        shape_a: 5.0,
        shape_b: 5.0,
        lo: 0.8,
        hi: 1.2,
    }
}

fn duffing(beta: f64) -> Arc<dyn OdeSystem> {
    Arc::new(
        Duffing::new(
            DuffingParams {
                beta,
                ..DuffingParams::table1()
            },
            DuffingParameter::Alpha,
        )
        .unwrap(),
    )
}

fn pseudo_random(n: usize, scale: f64, salt: u64) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let x = (i as u64).wrapping_mul(6364136223846793005).wrapping_add(salt);
            ((x >> 33) as f64 / ((1u64 << 31) as f64) - 1.0) * scale
        })
        .collect()
}

#[test]
fn single_node_quadrature_degenerates_to_plain_harmonic_balance() {
    let system = duffing(1.0);
    let grid = FourierGrid::with_default_sampling(3, 1, 3).unwrap();
    let basis = StochasticBasis::new(beta_paper(), 0).unwrap();
    let quad = QuadratureRule::new(vec![1.0], vec![1.0]).unwrap();
    let problem =
        FgpcProblem::forced(system.clone(), grid.clone(), basis, quad).unwrap();
    let hb = HbProblem::forced(system, grid, 1.0).unwrap();

    let u = pseudo_random(7, 0.8, 17);
    let ours = problem.residual(&u).unwrap();
    let plain = hb.residual(&u).unwrap();
    for (a, b) in ours.iter().zip(plain.iter()) {
        assert!((a - b).abs() < 1e-14, "{a} vs {b}");
    }
}

#[test]
fn degree_zero_residual_equals_harmonic_balance_at_the_nominal_parameter() {
    let system = duffing(1.0);
    let grid = FourierGrid::with_default_sampling(5, 1, 3).unwrap();
    let basis = StochasticBasis::new(beta_paper(), 0).unwrap();
    let quad = basis.gauss_rule(basis.default_quadrature_size(3)).unwrap();
    let problem = FgpcProblem::forced(system.clone(), grid.clone(), basis, quad).unwrap();
    let nominal = problem.nominal_theta();
    assert_abs_diff_eq!(nominal, 1.0, epsilon = 1e-13);
    let hb = HbProblem::forced(system, grid, nominal).unwrap();

    for salt in 0..100u64 {
        let u = pseudo_random(11, 1.2, salt);
        let ours = problem.residual(&u).unwrap();
        let plain = hb.residual(&u).unwrap();
        for (a, b) in ours.iter().zip(plain.iter()) {
            assert!((a - b).abs() < 1e-13, "salt {salt}: {a} vs {b}");
        }
    }
}

/// With N_G = N + 1 the Gauss nodes make the Galerkin system decouple into
/// per-node problems, so for a linear oscillator the solution must equal the
/// discrete projection of the per-node closed forms.
#[test]
fn linear_system_matches_projected_closed_form() {
    let system = duffing(0.0);
    let degree = 6;
    let grid = FourierGrid::with_default_sampling(2, 1, 3).unwrap();
    let basis = StochasticBasis::new(beta_paper(), degree).unwrap();
    let quad = basis.gauss_rule(degree + 1).unwrap();
    let problem =
        FgpcProblem::forced(system, grid, basis.clone(), quad.clone()).unwrap();

    let guess = problem.zero_guess().unwrap();
    let (root, _) = newton_solve(
        &|u: &[f64]| problem.residual(u),
        &guess,
        &NewtonConfig::default(),
    )
    .unwrap();
    let (cosine, sine, _) = problem.layout().unpack(&root);

    let (delta, gamma, omega) = (0.08, 0.2, 1.4);
    let closed_a = |theta: f64| {
        let det = (theta - omega * omega).powi(2) + (delta * omega).powi(2);
        gamma * (theta - omega * omega) / det
    };
    let closed_b = |theta: f64| {
        let det = (theta - omega * omega).powi(2) + (delta * omega).powi(2);
        gamma * delta * omega / det
    };
    for m in 0..=degree {
        let mut proj_a = 0.0;
        let mut proj_b = 0.0;
        for (&theta, &w) in quad.nodes().iter().zip(quad.weights().iter()) {
            let phi = basis.evaluate(theta);
            proj_a += w * closed_a(theta) * phi[m];
            proj_b += w * closed_b(theta) * phi[m];
        }
        assert!(
            (cosine[0][1][m] - proj_a).abs() < 1e-10,
            "a_1{m}: {} vs {proj_a}",
            cosine[0][1][m]
        );
        assert!(
            (sine[0][0][m] - proj_b).abs() < 1e-10,
            "b_1{m}: {} vs {proj_b}",
            sine[0][0][m]
        );
        // DC and second harmonic stay empty for the linear oscillator
        assert!(cosine[0][0][m].abs() < 1e-10);
        assert!(cosine[0][2][m].abs() < 1e-10);
    }
}

#[test]
fn steady_state_guess_lands_near_the_converged_branch() {
    let system = duffing(1.0);
    let grid = FourierGrid::with_default_sampling(5, 1, 3).unwrap();
    let basis = StochasticBasis::new(beta_paper(), 0).unwrap();
    let quad = basis.gauss_rule(2).unwrap();
    let integration = IntegrationConfig::default();
    let guess = nominal_steady_state(&*system, 1.0, &grid, &integration).unwrap();
    let problem = FgpcProblem::forced(system, grid, basis, quad).unwrap();
    let u0 = problem.initial_guess(&guess);
    let (root, diag) = newton_solve(
        &|u: &[f64]| problem.residual(u),
        &u0,
        &NewtonConfig::default(),
    )
    .unwrap();
    assert!(diag.iterations <= 15);
    let (cosine, sine, _) = problem.layout().unpack(&root);
    let converged = (cosine[0][1][0].powi(2) + sine[0][0][0].powi(2)).sqrt();
    let guessed = {
        let real = guess.coeffs.to_real_layout();
        (real[1] * real[1] + real[2] * real[2]).sqrt()
    };
    assert!(
        (guessed - converged).abs() / converged < 0.02,
        "guess {guessed} vs converged {converged}"
    );
}

#[test]
fn zero_guess_converges_for_weak_nonlinearity() {
    let system = duffing(0.01);
    let grid = FourierGrid::with_default_sampling(3, 1, 3).unwrap();
    let basis = StochasticBasis::new(beta_paper(), 4).unwrap();
    let quad = basis.gauss_rule(basis.default_quadrature_size(3)).unwrap();
    let problem = FgpcProblem::forced(system, grid, basis, quad).unwrap();
    let (root, _) = newton_solve(
        &|u: &[f64]| problem.residual(u),
        &problem.zero_guess().unwrap(),
        &NewtonConfig::default(),
    )
    .unwrap();
    let r = problem.residual(&root).unwrap();
    assert!(crate::hb::inf_norm(&r) < 1e-10);
}

#[test]
fn forced_linear_guess_solves_the_degree_zero_problem() {
    let system = duffing(0.0);
    let grid = FourierGrid::with_default_sampling(3, 1, 3).unwrap();
    let basis = StochasticBasis::new(beta_paper(), 0).unwrap();
    let quad = basis.gauss_rule(2).unwrap();
    let guess =
        nominal_steady_state(&*system, 1.0, &grid, &IntegrationConfig::default()).unwrap();
    let problem = FgpcProblem::forced(system, grid, basis, quad).unwrap();
    let u0 = problem.initial_guess(&guess);
    let r = problem.residual(&u0).unwrap();
    assert!(
        crate::hb::inf_norm(&r) < 1e-6,
        "residual at the capture: {}",
        crate::hb::inf_norm(&r)
    );
}

fn solve_paper_cell(h: usize, degree: usize, n_g: Option<usize>) -> FgpcSolution {
    let system = duffing(1.0);
    let cfg = CellConfig {
        quadrature_points: n_g,
        ..Default::default()
    };
    let guess_traj = {
        let period = 2.0 * std::f64::consts::PI / 1.4;
        crate::dynamics::integrate(
            &*system,
            &system.default_initial_state(1.0),
            1.0,
            (0.0, 300.0 * period),
            &IntegrationConfig::default(),
        )
        .unwrap()
    };
    solve_single_from_trajectory(&system, &beta_paper(), &guess_traj, h, degree, &cfg).unwrap()
}

#[test]
fn quadrature_refinement_leaves_the_solution_unchanged() {
    let coarse = solve_paper_cell(3, 6, None);
    let basis = StochasticBasis::new(beta_paper(), 6).unwrap();
    let fine = solve_paper_cell(3, 6, Some(2 * basis.default_quadrature_size(3)));
    let scale = coarse.max_magnitude(0);
    for k in 0..=3usize {
        for m in 0..=6usize {
            let d = (coarse.magnitude(0, k, m) - fine.magnitude(0, k, m)).abs();
            assert!(d / scale < 1e-8, "k={k} m={m}: moved by {d:.3e}");
        }
    }
}

#[test]
fn surrogate_evaluation_is_consistent_with_assembly() {
    let sol = solve_paper_cell(5, 6, None);
    let quad_basis = StochasticBasis::new(beta_paper(), 6).unwrap();
    let rule = quad_basis.gauss_rule(8).unwrap();
    let theta = rule.nodes()[3];
    let (coeffs, omega) = sol.coefficients_at(theta);
    assert!(coeffs.hermitian_deviation() < 1e-15);
    let grid = FourierGrid::new(5, sol.time_samples, 1).unwrap();
    let times: Vec<f64> = grid.nodes().iter().map(|t| t / omega).collect();
    let direct = crate::fourier::evaluate_series(&coeffs, omega, &times);
    let surrogate = sol.evaluate_state(theta, &times, 0);
    for (d, s) in direct.iter().zip(surrogate.iter()) {
        assert!((d - s).abs() < 1e-12);
    }
}

#[test]
fn degree_zero_surrogate_ignores_the_parameter() {
    let sol = solve_paper_cell(5, 0, None);
    let times = [0.0, 0.7, 1.9, 3.3];
    let a = sol.evaluate_state(0.85, &times, 0);
    let b = sol.evaluate_state(1.15, &times, 0);
    for (x, y) in a.iter().zip(b.iter()) {
        assert_abs_diff_eq!(*x, *y, epsilon = 1e-15);
    }
}

#[test]
fn surrogate_tracks_the_deterministic_solution_at_the_nominal_parameter() {
    let sol = solve_paper_cell(5, 8, None);
    // deterministic reference at theta = 1
    let system = duffing(1.0);
    let grid = FourierGrid::with_default_sampling(5, 1, 3).unwrap();
    let guess =
        nominal_steady_state(&*system, 1.0, &grid, &IntegrationConfig::default()).unwrap();
    let hb = HbProblem::forced(system, grid, 1.0).unwrap();
    let (root, _) = newton_solve(
        &|u: &[f64]| hb.residual(u),
        &hb.initial_guess(&guess),
        &NewtonConfig::default(),
    )
    .unwrap();
    let (coeffs, omega) = hb.layout().unpack(&root).unwrap();
    let period = 2.0 * std::f64::consts::PI / omega;
    let times: Vec<f64> = (0..256).map(|i| period * i as f64 / 256.0).collect();
    let reference = crate::fourier::evaluate_series(&coeffs, omega, &times);
    let surrogate = sol.evaluate_state(1.0, &times, 0);
    let rms = (reference
        .iter()
        .zip(surrogate.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / 256.0)
        .sqrt();
    assert!(rms < 1e-4, "rms distance {rms}");
}

#[test]
fn report_pipeline_recovers_single_branch_and_serializes() {
    let system = duffing(1.0);
    let grid = FourierGrid::with_default_sampling(3, 1, 3).unwrap();
    let basis = StochasticBasis::new(beta_paper(), 4).unwrap();
    let quad = basis.gauss_rule(basis.default_quadrature_size(3)).unwrap();
    let cfg = FgpcSolverConfig {
        deflation: None,
        ..Default::default()
    };
    let report = solve_fgpc(&system, &grid, &basis, &quad, &cfg).unwrap();
    assert_eq!(report.solutions.len(), 1, "failures: {:?}", report.failures);
    let sol = &report.solutions[0];
    assert!(sol.residual_norm < 1e-10);
    let text = sol.to_json();
    let back = FgpcSolution::from_json(&text).unwrap();
    assert_eq!(back.cosine, sol.cosine);
    assert_eq!(back.sine, sol.sine);
    assert_eq!(back.degree, sol.degree);
}
