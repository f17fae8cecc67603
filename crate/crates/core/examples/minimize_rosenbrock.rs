//! BFGS and L-BFGS on the Rosenbrock function, with the Wolfe check per step.

use handfit::solver::{minimize, FnObjective, SolverConfig};

fn main() -> handfit::Result<()> {
    let rosen = FnObjective::new(
        2,
        |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
        |x: &[f64]| {
            vec![
                -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]),
                200.0 * (x[1] - x[0] * x[0]),
            ]
        },
    );
    for cfg in [SolverConfig::bfgs(), SolverConfig::lbfgs()] {
        let out = minimize(&rosen, &[-1.2, 1.0], &cfg)?;
        let wolfe = out.steps.iter().all(|s| s.satisfies_wolfe(cfg.c1, cfg.c2));
        println!(
            "{:<5} x = ({:.8}, {:.8})  f = {:.3e}  {} iterations, {} evaluations, {}, Wolfe at every step: {wolfe}",
            cfg.method.as_str(),
            out.x_final[0],
            out.x_final[1],
            out.f_final,
            out.iterations,
            out.evaluations,
            out.status.as_str(),
        );
    }
    Ok(())
}
