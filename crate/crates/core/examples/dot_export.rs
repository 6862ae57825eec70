//! Writes the fictitious-play chain of the coordination game as Graphviz.
//! Render with `dot -Tpng coordination_fp.dot -o coordination_fp.png`.

use std::path::PathBuf;

use smcl::catalog::simple_coordination;
use smcl::dot::export_dot;
use smcl::{analyze, explore, Algorithm, ExploreConfig, LearnerParams, LearnerState, PairVectors};

fn main() -> smcl::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("coordination_fp.dot"));
    let game = simple_coordination();
    let weights = PairVectors::two_player(vec![0.511, 0.489], vec![0.489, 0.511]);
    let learner = LearnerState::initial(Algorithm::Fp, &game, &weights, &LearnerParams::default())?;
    let dtmc = explore(&game, learner, &ExploreConfig::default())?;
    let report = analyze(&game, &dtmc)?;
    export_dot(&dtmc, &report, &out)?;
    println!(
        "wrote {} ({} states, {} BSCCs)",
        out.display(),
        dtmc.states.len(),
        report.bsccs.len()
    );
    Ok(())
}
