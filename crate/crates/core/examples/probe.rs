use fgpc::dynamics::*;
use fgpc::fourier::FourierGrid;
use fgpc::hb::*;
use std::sync::Arc;

fn main() {
    let system: Arc<dyn OdeSystem> = Arc::new(
        Duffing::new(DuffingParams::table1(), DuffingParameter::Alpha).unwrap(),
    );
    println!("default x0 = {:?}", system.default_initial_state(1.0));
    let grid = FourierGrid::with_default_sampling(5, 1, 3).unwrap();
    let guess = nominal_steady_state(&*system, 1.0, &grid, &IntegrationConfig::default()).unwrap();
    let u = guess.coeffs.to_real_layout();
    println!("guess layout: {:?}", &u[..5]);
    println!("guess |A1| = {}", (u[1]*u[1]+u[2]*u[2]).sqrt());
    let problem = HbProblem::forced(system, grid, 1.0).unwrap();
    let (root, diag) = newton_solve(&|x: &[f64]| problem.residual(x), &u, &NewtonConfig::default()).unwrap();
    println!("root a1={} b1={} |A1|={}  iters={}", root[1], root[2], (root[1]*root[1]+root[2]*root[2]).sqrt(), diag.iterations);
}
