//! Batch over 100 random initializations of the 2x2 coordination game,
//! reporting the mean probability of reaching a Pareto-efficient pure Nash
//! equilibrium for each learner.

use smcl::catalog::simple_coordination;
use smcl::{run_check, Algorithm, RunConfig};

fn main() -> smcl::Result<()> {
    let game = simple_coordination();
    println!(
        "{:<6} {:>12} {:>8} {:>10} {:>8}",
        "algo", "convergence", "states", "max depth", "layers"
    );
    for algorithm in Algorithm::ALL {
        let config = RunConfig::batch(algorithm, 100, 0);
        let inits = config.initializations(&game, None)?;
        let report = run_check(&config, &game, &inits);
        let s = &report.summary;
        let mean = |x: Option<smcl::report::Stat>| x.map_or(f64::NAN, |st| st.mean);
        println!(
            "{:<6} {:>12.4} {:>8.1} {:>10.1} {:>8.1}",
            algorithm.to_string(),
            mean(s.convergence_probability),
            mean(s.states),
            mean(s.max_depth_reached),
            mean(s.layers_expanded)
        );
    }
    Ok(())
}
