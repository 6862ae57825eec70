//! Breadth-first construction of the Markov chain over joint-strategy states.
//!
//! The initial state plays a smooth best response, so it branches over every
//! joint action it can fire. From then on every player best-responds, which
//! makes each later state pure and gives it exactly one successor. New states
//! are merged into earlier behaviour-similar states whenever possible, which
//! is what lets cycles and fixed points close into finite components.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{
    decide, ActionDistribution, DecisionRule, Game, JointAction, DISTRIBUTION_TOLERANCE,
};
use crate::learners::LearnerState;
use crate::similarity::{similar, SimilarityContext};

/// A node of the chain: a joint strategy together with the learner
/// parameters that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct ExplorationState {
    /// Position in [`Dtmc::states`]. Assigned when the explorer inserts the state.
    pub id: usize,
    pub strategy: Vec<ActionDistribution>,
    pub learner: LearnerState,
    pub depth: usize,
    pub parent_id: Option<usize>,
    pub executed_from_parent: Option<JointAction>,
    /// Per player, the expected reward of each own action under the current beliefs.
    pub expected_rewards: Vec<Vec<f64>>,
    pub predecessor_strategy: Option<Vec<ActionDistribution>>,
    pub predecessor_expected_rewards: Option<Vec<Vec<f64>>>,
}

impl ExplorationState {
    /// Root state whose strategy follows `rule` applied to `learner`'s beliefs.
    pub fn root(game: &Game, learner: LearnerState, rule: DecisionRule) -> Result<Self> {
        if learner.num_players() != game.num_players() {
            return Err(Error::Contract(format!(
                "learner tracks {} players, game has {}",
                learner.num_players(),
                game.num_players()
            )));
        }
        let expected_rewards = all_expected_rewards(game, &learner);
        let strategy = strategies_for(&expected_rewards, rule)?;
        Ok(Self {
            id: 0,
            strategy,
            learner,
            depth: 0,
            parent_id: None,
            executed_from_parent: None,
            expected_rewards,
            predecessor_strategy: None,
            predecessor_expected_rewards: None,
        })
    }

    /// The joint action played with certainty, if every player is pure.
    pub fn pure_action(&self) -> Option<JointAction> {
        self.strategy
            .iter()
            .map(ActionDistribution::pure_action)
            .collect::<Option<Vec<_>>>()
            .map(JointAction::new)
    }

    /// Probability that the joint strategy fires `joint`.
    pub fn joint_probability(&self, joint: &JointAction) -> f64 {
        self.strategy
            .iter()
            .zip(joint.actions())
            .map(|(d, &a)| d.prob(a))
            .product()
    }
}

pub(crate) fn all_expected_rewards(game: &Game, learner: &LearnerState) -> Vec<Vec<f64>> {
    (0..game.num_players())
        .map(|i| learner.expected_rewards(game, i))
        .collect()
}

fn strategies_for(rewards: &[Vec<f64>], rule: DecisionRule) -> Result<Vec<ActionDistribution>> {
    rewards.iter().map(|r| decide(r, rule)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub target: usize,
    pub probability: f64,
    /// Joint action fired along the edge; `None` for edges into the sink.
    pub action: Option<JointAction>,
}

#[derive(Clone, Debug)]
pub struct Dtmc {
    pub states: Vec<ExplorationState>,
    /// Outgoing edges per node. Has one extra entry for the sink when present.
    pub transitions: Vec<Vec<Transition>>,
    pub initial_id: usize,
    /// The termination sink. Always equals `states.len()` when present.
    pub sink_id: Option<usize>,
    pub truncated: bool,
    /// Number of breadth-first layers that were expanded.
    pub layers_expanded: usize,
}

impl Dtmc {
    /// States plus the sink, if any.
    pub fn num_nodes(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_sink(&self, id: usize) -> bool {
        self.sink_id == Some(id)
    }

    pub fn successors(&self, id: usize) -> impl Iterator<Item = usize> + '_ {
        self.transitions[id].iter().map(|t| t.target)
    }

    /// Deepest state generated.
    pub fn max_state_depth(&self) -> usize {
        self.states.iter().map(|s| s.depth).max().unwrap_or(0)
    }

    /// Assembles a chain directly from node adjacency. Nodes get placeholder
    /// data, which is enough for graph algorithms and probability solves.
    pub fn from_edges(edges: Vec<Vec<(usize, f64)>>) -> Self {
        use crate::learners::{FpState, PairVectors};
        let placeholder = LearnerState::Fp(FpState {
            weights: PairVectors::two_player(vec![1.0], vec![1.0]),
            iteration: 0,
        });
        let states = (0..edges.len())
            .map(|id| ExplorationState {
                id,
                strategy: vec![ActionDistribution::pure(1, 0); 2],
                learner: placeholder.clone(),
                depth: 0,
                parent_id: None,
                executed_from_parent: None,
                expected_rewards: vec![vec![0.0]; 2],
                predecessor_strategy: None,
                predecessor_expected_rewards: None,
            })
            .collect();
        let transitions = edges
            .into_iter()
            .map(|out| {
                out.into_iter()
                    .map(|(target, probability)| Transition {
                        target,
                        probability,
                        action: None,
                    })
                    .collect()
            })
            .collect();
        Self {
            states,
            transitions,
            initial_id: 0,
            sink_id: None,
            truncated: false,
            layers_expanded: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExploreConfig {
    pub max_depth: usize,
    /// Temperature of the smooth best response played by the initial state.
    pub tau0: f64,
    /// Joint actions at or below this probability are not expanded.
    pub prob_floor: f64,
    pub merge_enabled: bool,
    /// After merging, fold bottom cycles that fire the same periodic
    /// joint-action sequence into one. Only applies when merging is on.
    pub lump_cycles: bool,
    pub state_cap: usize,
}

impl Default for ExploreConfig {
    fn default() -> Self {
        Self {
            max_depth: 100,
            tau0: 0.01,
            prob_floor: 0.0,
            merge_enabled: true,
            lump_cycles: true,
            state_cap: 1_000_000,
        }
    }
}

impl ExploreConfig {
    fn validate(&self) -> Result<()> {
        if self.max_depth == 0 {
            return Err(Error::Config("max_depth must be at least 1".into()));
        }
        if !(self.tau0 > 0.0 && self.tau0.is_finite()) {
            return Err(Error::Config(format!(
                "tau0 must be positive, got {}",
                self.tau0
            )));
        }
        if !(self.prob_floor >= 0.0 && self.prob_floor < 1.0) {
            return Err(Error::Config(format!(
                "prob_floor must lie in [0, 1), got {}",
                self.prob_floor
            )));
        }
        if self.state_cap == 0 {
            return Err(Error::Config("state cap must be at least 1".into()));
        }
        Ok(())
    }
}

/// Child of `state` after every player observes `executed`, with its strategy
/// chosen by `rule`. The returned state's `id` is a placeholder.
pub fn successor(
    state: &ExplorationState,
    executed: &JointAction,
    game: &Game,
    rule: DecisionRule,
) -> Result<ExplorationState> {
    game.check_joint_action(executed)?;
    let mut learner = state.learner.clone();
    learner.observe_in_place(executed);
    let expected_rewards = all_expected_rewards(game, &learner);
    let strategy = strategies_for(&expected_rewards, rule)?;
    Ok(ExplorationState {
        id: usize::MAX,
        strategy,
        learner,
        depth: state.depth + 1,
        parent_id: Some(state.id),
        executed_from_parent: Some(executed.clone()),
        expected_rewards,
        predecessor_strategy: Some(state.strategy.clone()),
        predecessor_expected_rewards: Some(state.expected_rewards.clone()),
    })
}

pub fn explore(game: &Game, initial_learner: LearnerState, cfg: &ExploreConfig) -> Result<Dtmc> {
    cfg.validate()?;
    let first_rule = DecisionRule::SmoothBestResponse { tau: cfg.tau0 };
    let root = ExplorationState::root(game, initial_learner, first_rule)?;
    let algorithm = root.learner.algorithm();

    let mut states = vec![root];
    let mut transitions: Vec<Vec<Transition>> = vec![Vec::new()];
    // Pure states keyed by the flat index of the joint action they fire.
    let mut by_action: HashMap<usize, Vec<usize>> = HashMap::new();

    let mut queue1 = vec![0usize];
    let mut depth = 0;
    let mut layers_expanded = 0;
    let mut truncated = false;
    let mut sink_id = None;

    while !queue1.is_empty() {
        if depth >= cfg.max_depth {
            let sink = states.len();
            for &id in &queue1 {
                transitions[id].push(Transition {
                    target: sink,
                    probability: 1.0,
                    action: None,
                });
            }
            transitions.push(vec![Transition {
                target: sink,
                probability: 1.0,
                action: None,
            }]);
            sink_id = Some(sink);
            truncated = true;
            break;
        }
        let mut queue2 = Vec::new();
        for &id in &queue1 {
            let mut out = Vec::new();
            for flat in 0..game.num_joint_actions() {
                let joint = game.joint_action(flat);
                let p = states[id].joint_probability(&joint);
                if p <= cfg.prob_floor {
                    continue;
                }
                let mut child = successor(&states[id], &joint, game, DecisionRule::BestResponse)?;
                let key = child.pure_action().map(|a| game.flat_index(&a));

                let mut target = None;
                if cfg.merge_enabled {
                    if let Some(candidates) = key.and_then(|k| by_action.get(&k)) {
                        let ctx = SimilarityContext::new(algorithm, game, &states)
                            .with_transitions(&transitions);
                        target = candidates
                            .iter()
                            .rev()
                            .copied()
                            .find(|&c| similar(&states[c], &child, &ctx));
                    }
                }
                let target = match target {
                    Some(t) => t,
                    None => {
                        if states.len() >= cfg.state_cap {
                            return Err(Error::StateBudget {
                                cap: cfg.state_cap,
                                count: states.len() + 1,
                            });
                        }
                        let new_id = states.len();
                        child.id = new_id;
                        if let Some(k) = key {
                            by_action.entry(k).or_default().push(new_id);
                        }
                        states.push(child);
                        transitions.push(Vec::new());
                        queue2.push(new_id);
                        new_id
                    }
                };
                out.push(Transition {
                    target,
                    probability: p,
                    action: Some(joint),
                });
            }
            let total: f64 = out.iter().map(|t| t.probability).sum();
            if (total - 1.0).abs() > DISTRIBUTION_TOLERANCE && total > 0.0 {
                for t in &mut out {
                    t.probability /= total;
                }
            }
            transitions[id] = out;
        }
        layers_expanded += 1;
        queue1 = queue2;
        depth += 1;
    }

    let dtmc = Dtmc {
        states,
        transitions,
        initial_id: 0,
        sink_id,
        truncated,
        layers_expanded,
    };
    Ok(if cfg.merge_enabled && cfg.lump_cycles {
        lump_equivalent_cycles(game, dtmc)
    } else {
        dtmc
    })
}

/// Folds bottom cycles that fire the same periodic joint-action sequence.
///
/// Two branches of the exploration often fall into the same cycle with a lag,
/// each closing its own copy because the learners on the two branches never
/// agree exactly. Every copy emits the same joint actions forever, so each
/// duplicate state is replaced by the state of the first copy that sits at the
/// same phase of the sequence, and the duplicate states are dropped.
pub fn lump_equivalent_cycles(game: &Game, dtmc: Dtmc) -> Dtmc {
    let mut cycles: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
    for scc in crate::analysis::tarjan_sccs(&dtmc) {
        if !scc.is_bottom || scc.members.iter().any(|&m| dtmc.is_sink(m)) {
            continue;
        }
        if scc.members.iter().any(|&m| dtmc.transitions[m].len() != 1) {
            continue;
        }
        let Some(order) = cycle_order(&dtmc, scc.members[0], scc.members.len()) else {
            continue;
        };
        let Some(word) = order
            .iter()
            .map(|&id| dtmc.states[id].pure_action().map(|a| game.flat_index(&a)))
            .collect::<Option<Vec<_>>>()
        else {
            continue;
        };
        cycles.push((order, word));
    }
    cycles.sort_by_key(|(order, _)| order.iter().copied().min());

    // Canonical key: the least rotation of the primitive period of the word.
    let mut representative: HashMap<Vec<usize>, (Vec<usize>, usize, usize)> = HashMap::new();
    let mut replace: HashMap<usize, usize> = HashMap::new();
    for (order, word) in cycles {
        let period = primitive_period(&word);
        let primitive = &word[..period];
        let shift = least_rotation(primitive);
        let key: Vec<usize> = (0..period)
            .map(|k| primitive[(shift + k) % period])
            .collect();
        match representative.get(&key) {
            None => {
                representative.insert(key, (order, shift, period));
            }
            Some((rep_order, rep_shift, _)) => {
                for (k, &id) in order.iter().enumerate() {
                    let phase = (k + period - shift % period) % period;
                    replace.insert(id, rep_order[(rep_shift + phase) % rep_order.len()]);
                }
            }
        }
    }
    if replace.is_empty() {
        return dtmc;
    }

    let mut new_id = vec![usize::MAX; dtmc.num_nodes()];
    let mut next = 0;
    for (id, slot) in new_id.iter_mut().enumerate() {
        if !replace.contains_key(&id) {
            *slot = next;
            next += 1;
        }
    }
    let resolve = |id: usize| new_id[*replace.get(&id).unwrap_or(&id)];

    let Dtmc {
        states,
        transitions,
        initial_id,
        sink_id,
        truncated,
        layers_expanded,
    } = dtmc;
    let mut kept_states = Vec::with_capacity(next);
    let mut kept_transitions = Vec::with_capacity(next);
    for (id, (mut state, out)) in states
        .into_iter()
        .zip(transitions.iter().cloned())
        .enumerate()
    {
        if replace.contains_key(&id) {
            continue;
        }
        state.id = new_id[id];
        state.parent_id = state.parent_id.map(resolve);
        kept_states.push(state);
        kept_transitions.push(remap_edges(out, &resolve));
    }
    if let Some(sink) = sink_id {
        kept_transitions.push(remap_edges(transitions[sink].clone(), &resolve));
    }
    Dtmc {
        sink_id: sink_id.map(|_| kept_states.len()),
        states: kept_states,
        transitions: kept_transitions,
        initial_id: resolve(initial_id),
        truncated,
        layers_expanded,
    }
}

fn remap_edges(out: Vec<Transition>, resolve: &impl Fn(usize) -> usize) -> Vec<Transition> {
    out.into_iter()
        .map(|t| Transition {
            target: resolve(t.target),
            ..t
        })
        .collect()
}

/// Members of a deterministic cycle in firing order from `start`.
fn cycle_order(dtmc: &Dtmc, start: usize, len: usize) -> Option<Vec<usize>> {
    let mut order = Vec::with_capacity(len);
    let mut cursor = start;
    loop {
        order.push(cursor);
        cursor = dtmc.transitions[cursor][0].target;
        if cursor == start {
            break;
        }
        if order.len() > len {
            return None;
        }
    }
    (order.len() == len).then_some(order)
}

fn primitive_period(word: &[usize]) -> usize {
    let n = word.len();
    (1..=n)
        .find(|&p| n.is_multiple_of(p) && (0..n).all(|k| word[k] == word[k % p]))
        .unwrap_or(n)
}

fn least_rotation(word: &[usize]) -> usize {
    let n = word.len();
    (0..n)
        .min_by(|&a, &b| {
            (0..n)
                .map(|k| word[(a + k) % n])
                .cmp((0..n).map(|k| word[(b + k) % n]))
        })
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::learners::{initial_state, Algorithm, LearnerParams, PairVectors};

    fn toy(algorithm: Algorithm) -> (Game, LearnerState) {
        let g = catalog::simple_coordination();
        let w = PairVectors::two_player(vec![0.511, 0.489], vec![0.489, 0.511]);
        let l = initial_state(algorithm, &g, &w, &LearnerParams::default()).unwrap();
        (g, l)
    }

    #[test]
    fn initial_joint_probabilities() {
        let (g, l) = toy(Algorithm::Fp);
        let dtmc = explore(&g, l, &ExploreConfig::default()).unwrap();
        let root = &dtmc.states[0];
        let expected = [0.09, 0.81, 0.01, 0.09];
        for (flat, want) in expected.iter().enumerate() {
            let p = root.joint_probability(&g.joint_action(flat));
            assert!((p - want).abs() < 5e-3, "{flat}: {p}");
        }
    }

    #[test]
    fn depth_one_truncates() {
        let (g, l) = toy(Algorithm::Fp);
        let cfg = ExploreConfig {
            max_depth: 1,
            ..ExploreConfig::default()
        };
        let dtmc = explore(&g, l, &cfg).unwrap();
        assert!(dtmc.truncated);
        let sink = dtmc.sink_id.unwrap();
        assert_eq!(sink, dtmc.states.len());
        assert_eq!(dtmc.states.len(), 5);
        for id in 1..dtmc.states.len() {
            assert_eq!(dtmc.transitions[id].len(), 1);
            assert_eq!(dtmc.transitions[id][0].target, sink);
            assert_eq!(dtmc.transitions[id][0].probability, 1.0);
        }
    }

    #[test]
    fn successor_matches_example() {
        let (g, l) = toy(Algorithm::Fp);
        let root =
            ExplorationState::root(&g, l, DecisionRule::SmoothBestResponse { tau: 0.01 }).unwrap();
        let a = JointAction::new(vec![0, 0]);
        let child = successor(&root, &a, &g, DecisionRule::BestResponse).unwrap();
        let LearnerState::Fp(fp) = &child.learner else {
            panic!()
        };
        assert!((fp.weights.get(0, 1)[0] - 1.511).abs() < 1e-12);
        assert_eq!(child.pure_action(), Some(a.clone()));
        let again = successor(&child, &a, &g, DecisionRule::BestResponse).unwrap();
        assert_eq!(again.strategy, child.strategy);
    }

    #[test]
    fn every_state_stochastic_and_deterministic() {
        for alg in Algorithm::ALL {
            let (g, l) = toy(alg);
            let a = explore(&g, l.clone(), &ExploreConfig::default()).unwrap();
            let b = explore(&g, l, &ExploreConfig::default()).unwrap();
            assert_eq!(a.transitions, b.transitions);
            for out in &a.transitions {
                let total: f64 = out.iter().map(|t| t.probability).sum();
                assert!((total - 1.0).abs() < 1e-9);
            }
            assert!(a.states.iter().skip(1).all(|s| s.pure_action().is_some()));
        }
    }

    #[test]
    fn no_merge_builds_a_tree() {
        let (g, l) = toy(Algorithm::Gfp);
        let cfg = ExploreConfig {
            max_depth: 6,
            merge_enabled: false,
            ..ExploreConfig::default()
        };
        let dtmc = explore(&g, l, &cfg).unwrap();
        assert_eq!(dtmc.states.len(), 1 + 4 * 6);
        for s in dtmc.states.iter().skip(1) {
            assert_eq!(s.depth, dtmc.states[s.parent_id.unwrap()].depth + 1);
        }
    }

    #[test]
    fn lagged_cycle_copies_are_folded() {
        for alg in [Algorithm::Gfp, Algorithm::Afffp] {
            let (g, l) = toy(alg);
            let plain = ExploreConfig {
                lump_cycles: false,
                ..ExploreConfig::default()
            };
            let unlumped = explore(&g, l.clone(), &plain).unwrap();
            let lumped = explore(&g, l, &ExploreConfig::default()).unwrap();
            assert!(lumped.states.len() < unlumped.states.len());
            let bottoms = |d: &Dtmc| {
                crate::analysis::tarjan_sccs(d)
                    .into_iter()
                    .filter(|s| s.is_bottom)
                    .count()
            };
            assert_eq!(bottoms(&unlumped), 4);
            assert_eq!(bottoms(&lumped), 3);
            for (id, s) in lumped.states.iter().enumerate() {
                assert_eq!(s.id, id);
                if let Some(p) = s.parent_id {
                    assert!(p < lumped.states.len());
                }
            }
        }
    }

    #[test]
    fn rotation_helpers() {
        assert_eq!(primitive_period(&[1, 2, 1, 2]), 2);
        assert_eq!(primitive_period(&[1, 2, 3]), 3);
        assert_eq!(least_rotation(&[3, 1, 2]), 1);
        assert_eq!(least_rotation(&[2, 1]), 1);
    }

    #[test]
    fn state_cap_is_enforced() {
        let (g, l) = toy(Algorithm::Fp);
        let cfg = ExploreConfig {
            merge_enabled: false,
            state_cap: 10,
            ..ExploreConfig::default()
        };
        assert!(matches!(
            explore(&g, l, &cfg),
            Err(Error::StateBudget { cap: 10, .. })
        ));
    }
}
