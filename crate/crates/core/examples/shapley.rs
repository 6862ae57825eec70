//! Fictitious play on the Shapley game. Equal initial beliefs settle into a
//! cycle over the diagonal; generic beliefs enter the six-action cycle whose
//! runs keep lengthening, so exploration stops at the depth bound.

use smcl::catalog::{random_initial_weights, shapley};
use smcl::simulator::simulate;
use smcl::{analyze, explore, Algorithm, ExploreConfig, LearnerParams, LearnerState, PairVectors};

fn main() -> smcl::Result<()> {
    let game = shapley();
    let params = LearnerParams::default();

    let equal = PairVectors::two_player(vec![1.0; 3], vec![1.0; 3]);
    let learner = LearnerState::initial(Algorithm::Fp, &game, &equal, &params)?;
    let dtmc = explore(&game, learner, &ExploreConfig::default())?;
    println!("equal weights: {} states", dtmc.states.len());
    for b in &analyze(&game, &dtmc)?.bsccs {
        let actions: Vec<String> = b.actions.iter().map(|a| a.to_string()).collect();
        let steady: Vec<String> = b.steady_state.values().map(|p| format!("{p:.4}")).collect();
        println!(
            "  {:<14} p = {:.4}  actions {}  steady state [{}]",
            b.classification.name(),
            b.reach_probability,
            actions.join(" "),
            steady.join(", ")
        );
    }

    let weights = random_initial_weights(&game, 1);
    let learner = LearnerState::initial(Algorithm::Fp, &game, &weights, &params)?;
    let config = ExploreConfig {
        tau0: 1.0,
        max_depth: 200,
        ..ExploreConfig::default()
    };
    let dtmc = explore(&game, learner.clone(), &config)?;
    let report = analyze(&game, &dtmc)?;
    println!(
        "random weights: {} states, truncated = {}",
        dtmc.states.len(),
        dtmc.truncated
    );
    for b in &report.bsccs {
        println!(
            "  {:<14} p = {:.4}",
            b.classification.name(),
            b.reach_probability
        );
    }

    // Lengths of consecutive runs of one joint action along a single playout.
    let trace = simulate(&game, &learner, 2000, 1.0, 0)?;
    let mut runs: Vec<(String, usize)> = Vec::new();
    for a in trace.actions() {
        match runs.last_mut() {
            Some((last, n)) if *last == a.to_string() => *n += 1,
            _ => runs.push((a.to_string(), 1)),
        }
    }
    let shown: Vec<String> = runs
        .iter()
        .take(18)
        .map(|(a, n)| format!("{a}x{n}"))
        .collect();
    println!("playout runs: {}", shown.join(" "));
    Ok(())
}
