//! Compares the chain's reach probabilities with frequencies from independent
//! playouts of the same learning process.

use smcl::catalog::simple_coordination;
use smcl::simulator::empirical_convergence;
use smcl::{analyze, explore, Algorithm, ExploreConfig, LearnerParams, LearnerState, PairVectors};

fn main() -> smcl::Result<()> {
    let game = simple_coordination();
    let weights = PairVectors::two_player(vec![0.511, 0.489], vec![0.489, 0.511]);
    let runs = 20_000;
    for algorithm in Algorithm::ALL {
        let learner = LearnerState::initial(algorithm, &game, &weights, &LearnerParams::default())?;
        let report = analyze(
            &game,
            &explore(&game, learner.clone(), &ExploreConfig::default())?,
        )?;
        let sampled = empirical_convergence(&game, &learner, runs, 200, 0.01, 1)?;
        println!("{algorithm}:");
        for b in &report.bsccs {
            let p = b.reach_probability;
            let f = sampled.frequency_of(&b.actions);
            let se = (p * (1.0 - p) / runs as f64).sqrt();
            let actions: Vec<String> = b.actions.iter().map(|a| a.to_string()).collect();
            println!(
                "  {:<16} chain {p:.4}  sampled {f:.4}  |diff| / se = {:.2}",
                actions.join(" "),
                (f - p).abs() / se
            );
        }
    }
    Ok(())
}
