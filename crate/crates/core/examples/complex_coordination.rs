//! The 20x20 identical-interest coordination game. Fictitious play drifts
//! along a band of near-optimal joint actions, so exploration needs a depth
//! bound in the thousands. Pass the number of initializations as the first
//! argument (default 5).

use std::time::Instant;

use smcl::catalog::{complex_coordination, ComplexGameParams};
use smcl::{run_check, Algorithm, RunConfig};

fn main() -> smcl::Result<()> {
    let inits: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(5);
    let game = complex_coordination(ComplexGameParams::default())?;
    for algorithm in Algorithm::ALL {
        let start = Instant::now();
        let mut config = RunConfig::batch(algorithm, inits, 0);
        config.explore.max_depth = 3000;
        let report = run_check(&config, &game, &config.initializations(&game, None)?);
        let s = &report.summary;
        let (Some(conv), Some(states), Some(depth)) =
            (s.convergence_probability, s.states, s.max_depth_reached)
        else {
            println!("{algorithm}: no run completed");
            continue;
        };
        println!(
            "{algorithm}: convergence {:.4}, states {:.0} (max {:.0}), max depth {:.0}, truncated {}, {:.1} s",
            conv.mean,
            states.mean,
            states.max,
            depth.mean,
            s.truncated,
            start.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
