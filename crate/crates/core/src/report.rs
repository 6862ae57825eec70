//! Batch runs over initializations and the reports they produce.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::AnalysisReport;
use crate::analysis::{analyze, Classification};
use crate::catalog::random_initial_weights;
use crate::error::{Error, Result};
use crate::explorer::{explore, Dtmc, ExploreConfig};
use crate::game::{Game, JointAction};
use crate::io::write_atomic;
use crate::learners::{Algorithm, LearnerParams, LearnerState, PairVectors};

/// Everything that determines a batch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub params: LearnerParams,
    pub explore: ExploreConfig,
    /// Number of random initializations; 0 means a weights file is used.
    pub random_inits: usize,
    /// Initialization `k` of a batch draws its weights with seed `seed + k`.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Fp,
            params: LearnerParams::default(),
            explore: ExploreConfig::default(),
            random_inits: 0,
            seed: 0,
        }
    }
}

impl RunConfig {
    /// Settings for a batch over random initializations, which start from a
    /// smooth best response at temperature 1.
    pub fn batch(algorithm: Algorithm, random_inits: usize, seed: u64) -> Self {
        Self {
            algorithm,
            random_inits,
            seed,
            explore: ExploreConfig {
                tau0: 1.0,
                ..ExploreConfig::default()
            },
            ..Self::default()
        }
    }

    /// The initial weights of each run: the given weights, or `random_inits`
    /// random draws. Exactly one source must be supplied.
    pub fn initializations(
        &self,
        game: &Game,
        weights: Option<PairVectors>,
    ) -> Result<Vec<PairVectors>> {
        match (weights, self.random_inits) {
            (Some(w), 0) => {
                w.check_shape(game)?;
                Ok(vec![w])
            }
            (None, 0) => Err(Error::Config(
                "supply either initial weights or a positive number of random initializations"
                    .into(),
            )),
            (Some(_), _) => Err(Error::Config(
                "initial weights and random initializations are mutually exclusive".into(),
            )),
            (None, n) => Ok((0..n as u64)
                .map(|k| random_initial_weights(game, self.seed.wrapping_add(k)))
                .collect()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BsccRecord {
    pub members: Vec<usize>,
    pub actions: Vec<JointAction>,
    pub classification: Classification,
    pub reach_probability: f64,
    /// Stationary probability of each member state, keyed by state id.
    pub steady_state: Vec<(usize, f64)>,
}

/// Outcome of one initialization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub index: usize,
    /// Present when exploration or analysis failed; all other fields are then empty.
    pub error: Option<String>,
    pub states: usize,
    /// Deepest state in the chain.
    pub max_depth_reached: usize,
    /// Breadth-first layers expanded before the frontier emptied or the depth bound hit.
    pub layers_expanded: usize,
    pub truncated: bool,
    pub bsccs: Vec<BsccRecord>,
    pub convergence_probability: f64,
}

impl RunRecord {
    pub fn completed(&self) -> bool {
        self.error.is_none()
    }

    fn failed(index: usize, error: &Error) -> Self {
        Self {
            index,
            error: Some(error.to_string()),
            states: 0,
            max_depth_reached: 0,
            layers_expanded: 0,
            truncated: false,
            bsccs: Vec::new(),
            convergence_probability: 0.0,
        }
    }

    fn from_analysis(index: usize, dtmc: &Dtmc, analysis: &AnalysisReport) -> Self {
        Self {
            index,
            error: None,
            states: dtmc.states.len(),
            max_depth_reached: dtmc.max_state_depth(),
            layers_expanded: dtmc.layers_expanded,
            truncated: dtmc.truncated,
            bsccs: analysis
                .bsccs
                .iter()
                .map(|b| BsccRecord {
                    members: b.scc.members.clone(),
                    actions: b.actions.clone(),
                    classification: b.classification,
                    reach_probability: b.reach_probability,
                    steady_state: b.steady_state.iter().map(|(&k, &v)| (k, v)).collect(),
                })
                .collect(),
            convergence_probability: analysis.convergence_probability,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl Stat {
    fn of(values: impl Iterator<Item = f64>) -> Option<Self> {
        let values: Vec<f64> = values.collect();
        if values.is_empty() {
            return None;
        }
        Some(Self {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

/// Aggregates over the completed runs. The statistics are absent when no run completed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub runs: usize,
    pub completed: usize,
    pub failed: usize,
    pub truncated: usize,
    pub states: Option<Stat>,
    pub max_depth_reached: Option<Stat>,
    pub layers_expanded: Option<Stat>,
    pub bscc_count: Option<Stat>,
    pub convergence_probability: Option<Stat>,
}

impl Summary {
    fn of(runs: &[RunRecord]) -> Self {
        let done = || runs.iter().filter(|r| r.completed());
        Self {
            runs: runs.len(),
            completed: done().count(),
            failed: runs.len() - done().count(),
            truncated: done().filter(|r| r.truncated).count(),
            states: Stat::of(done().map(|r| r.states as f64)),
            max_depth_reached: Stat::of(done().map(|r| r.max_depth_reached as f64)),
            layers_expanded: Stat::of(done().map(|r| r.layers_expanded as f64)),
            bscc_count: Stat::of(done().map(|r| r.bsccs.len() as f64)),
            convergence_probability: Stat::of(done().map(|r| r.convergence_probability)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: RunConfig,
    pub runs: Vec<RunRecord>,
    pub summary: Summary,
}

impl Report {
    pub fn all_completed(&self) -> bool {
        self.summary.failed == 0
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }

    /// Human-readable table carrying the same fields as the JSON form.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "algorithm {}  tau0 {}  max_depth {}  merge {}",
            self.config.algorithm,
            self.config.explore.tau0,
            self.config.explore.max_depth,
            if self.config.explore.merge_enabled {
                "on"
            } else {
                "off"
            }
        );
        let _ = writeln!(
            out,
            "{:>5} {:>8} {:>9} {:>7} {:>9} {:>6} {:>12}  status",
            "run", "states", "max_depth", "layers", "truncated", "bsccs", "convergence"
        );
        for r in &self.runs {
            match &r.error {
                Some(e) => {
                    let _ = writeln!(
                        out,
                        "{:>5} {:>8} {:>9} {:>7} {:>9} {:>6} {:>12}  failed: {e}",
                        r.index, "-", "-", "-", "-", "-", "-"
                    );
                }
                None => {
                    let _ = writeln!(
                        out,
                        "{:>5} {:>8} {:>9} {:>7} {:>9} {:>6} {:>12.6}  ok",
                        r.index,
                        r.states,
                        r.max_depth_reached,
                        r.layers_expanded,
                        r.truncated,
                        r.bsccs.len(),
                        r.convergence_probability
                    );
                    for b in &r.bsccs {
                        let actions: Vec<String> =
                            b.actions.iter().map(JointAction::to_string).collect();
                        let _ = writeln!(
                            out,
                            "      bscc {:<22} p = {:.6}  size {}  actions {}",
                            b.classification.name(),
                            b.reach_probability,
                            b.members.len(),
                            actions.join(" ")
                        );
                    }
                }
            }
        }
        let s = &self.summary;
        let _ = writeln!(
            out,
            "runs {}  completed {}  failed {}  truncated {}",
            s.runs, s.completed, s.failed, s.truncated
        );
        for (name, stat) in [
            ("states", s.states),
            ("max_depth_reached", s.max_depth_reached),
            ("layers_expanded", s.layers_expanded),
            ("bscc_count", s.bscc_count),
            ("convergence_probability", s.convergence_probability),
        ] {
            if let Some(st) = stat {
                let _ = writeln!(
                    out,
                    "{name:<24} mean {:.6}  min {:.6}  max {:.6}",
                    st.mean, st.min, st.max
                );
            }
        }
        out
    }
}

/// Explores and analyses every initialization, in parallel. A failing run is
/// recorded with its error and the batch carries on.
pub fn run_check(config: &RunConfig, game: &Game, inits: &[PairVectors]) -> Report {
    let runs: Vec<RunRecord> = inits
        .par_iter()
        .enumerate()
        .map(|(index, w)| match run_one(config, game, w) {
            Ok((dtmc, analysis)) => RunRecord::from_analysis(index, &dtmc, &analysis),
            Err(e) => RunRecord::failed(index, &e),
        })
        .collect();
    let summary = Summary::of(&runs);
    Report {
        config: *config,
        runs,
        summary,
    }
}

/// Explores and analyses a single initialization.
pub fn run_one(
    config: &RunConfig,
    game: &Game,
    weights: &PairVectors,
) -> Result<(Dtmc, AnalysisReport)> {
    let learner = LearnerState::initial(config.algorithm, game, weights, &config.params)?;
    let dtmc = explore(game, learner, &config.explore)?;
    let analysis = analyze(game, &dtmc)?;
    Ok((dtmc, analysis))
}
