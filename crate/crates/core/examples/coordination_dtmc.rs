//! Builds and analyses the Markov chain of the 2x2 coordination game for all
//! three learners, starting from slightly asymmetric beliefs.

use std::time::Instant;

use smcl::catalog::simple_coordination;
use smcl::{analyze, explore, Algorithm, ExploreConfig, LearnerParams, LearnerState, PairVectors};

fn main() -> smcl::Result<()> {
    let game = simple_coordination();
    let weights = PairVectors::two_player(vec![0.511, 0.489], vec![0.489, 0.511]);
    for algorithm in Algorithm::ALL {
        let start = Instant::now();
        let learner = LearnerState::initial(algorithm, &game, &weights, &LearnerParams::default())?;
        let dtmc = explore(&game, learner, &ExploreConfig::default())?;
        let report = analyze(&game, &dtmc)?;
        println!(
            "{algorithm}: {} states, {} layers, truncated = {}, {:.1} ms",
            dtmc.states.len(),
            dtmc.layers_expanded,
            dtmc.truncated,
            start.elapsed().as_secs_f64() * 1e3
        );
        for b in &report.bsccs {
            let actions: Vec<String> = b.actions.iter().map(|a| a.to_string()).collect();
            println!(
                "  {:<22} p = {:.6}  actions {}",
                b.classification.name(),
                b.reach_probability,
                actions.join(" ")
            );
        }
        println!(
            "  convergence probability {:.6}",
            report.convergence_probability
        );
    }
    Ok(())
}
