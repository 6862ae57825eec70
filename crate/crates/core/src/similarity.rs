//! Behaviour similarity between exploration states.
//!
//! `similar(s1, s2, ctx)` decides whether a freshly generated state `s2` will
//! behave like the earlier state `s1` from now on, so that the explorer may
//! redirect the edge into `s2` to `s1` instead of expanding it. Both states
//! must play pure strategies. The test combines:
//!
//! * equal joint strategies;
//! * either learners that agree parameter for parameter, which settles the
//!   question outright, or all of the following;
//! * the same per-player argmax of the reward increment since the predecessor;
//! * when both predecessors already played the current strategy, no unplayed
//!   action may be gaining on the executed one faster in `s2` than in `s1`,
//!   unless the executed action is already the best reply;
//! * a path-dependent reward comparison. If `s1` is the parent of `s2`, the
//!   executed action must be worth at least as much in `s2`. If a longer path
//!   leads from `s1` to `s2`, its joint actions are replayed from `s2`; the
//!   replay has to reproduce the same strategies step by step, with rewards of
//!   the executed actions that are no larger (FP) or no smaller (GFP, AFFFP)
//!   than along the original path. Without any path, both states need the
//!   same predecessor strategy and a reward advantage for `s2`.

use std::collections::{HashMap, VecDeque};

use crate::explorer::{all_expected_rewards, ExplorationState, Transition};
use crate::game::{
    argmax_smallest, best_deviation_reward, decide, ActionDistribution, DecisionRule, Game,
    JointAction, TIE_TOLERANCE,
};
use crate::learners::Algorithm;

/// What `similar` needs besides the two states: the algorithm, the game,
/// the explorer's state arena and, optionally, the edges built so far.
#[derive(Clone, Copy)]
pub struct SimilarityContext<'a> {
    pub algorithm: Algorithm,
    pub game: &'a Game,
    pub states: &'a [ExplorationState],
    /// Edges committed so far. Without them only generation-tree paths count.
    pub transitions: Option<&'a [Vec<Transition>]>,
}

impl<'a> SimilarityContext<'a> {
    pub fn new(algorithm: Algorithm, game: &'a Game, states: &'a [ExplorationState]) -> Self {
        Self {
            algorithm,
            game,
            states,
            transitions: None,
        }
    }

    pub fn with_transitions(mut self, transitions: &'a [Vec<Transition>]) -> Self {
        self.transitions = Some(transitions);
        self
    }

    /// Nodes `s1 = p_0, ..., p_{n-1}` of a path from `s1` to `s2`, the last
    /// being `s2`'s parent. The generation tree is tried first; failing that,
    /// the shortest path through the edges committed so far.
    fn path_from(&self, s1: &ExplorationState, s2: &ExplorationState) -> Option<Vec<usize>> {
        let parent = s2.parent_id?;
        self.tree_path(s1, s2)
            .or_else(|| self.graph_path(s1.id, parent))
    }

    fn tree_path(&self, s1: &ExplorationState, s2: &ExplorationState) -> Option<Vec<usize>> {
        if s1.depth >= s2.depth {
            return None;
        }
        let mut path = Vec::with_capacity(s2.depth - s1.depth);
        let mut cursor = s2.parent_id;
        while let Some(id) = cursor {
            let node = self.states.get(id)?;
            path.push(id);
            if id == s1.id {
                path.reverse();
                return Some(path);
            }
            if node.depth <= s1.depth {
                return None;
            }
            cursor = node.parent_id;
        }
        None
    }

    fn graph_path(&self, from: usize, to: usize) -> Option<Vec<usize>> {
        let transitions = self.transitions?;
        let mut came_from: HashMap<usize, usize> = HashMap::new();
        let mut queue = VecDeque::from([from]);
        came_from.insert(from, from);
        while let Some(v) = queue.pop_front() {
            if v == to {
                let mut path = vec![to];
                let mut cursor = to;
                while cursor != from {
                    cursor = came_from[&cursor];
                    path.push(cursor);
                }
                path.reverse();
                return Some(path);
            }
            for t in transitions.get(v).into_iter().flatten() {
                if t.target < self.states.len() && !came_from.contains_key(&t.target) {
                    came_from.insert(t.target, v);
                    queue.push_back(t.target);
                }
            }
        }
        None
    }
}

fn same_strategy(a: &[ActionDistribution], b: &[ActionDistribution]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| {
            x.len() == y.len()
                && x.probs()
                    .iter()
                    .zip(y.probs())
                    .all(|(p, q)| (p - q).abs() <= TIE_TOLERANCE)
        })
}

fn increment_argmax(now: &[f64], before: &[f64]) -> usize {
    let diff: Vec<f64> = now.iter().zip(before).map(|(x, y)| x - y).collect();
    argmax_smallest(&diff)
}

pub fn similar(s1: &ExplorationState, s2: &ExplorationState, ctx: &SimilarityContext<'_>) -> bool {
    let (Some(a1), Some(a2)) = (s1.pure_action(), s2.pure_action()) else {
        return false;
    };
    if a1 != a2 {
        return false;
    }
    let (Some(prev_sigma1), Some(prev_r1)) =
        (&s1.predecessor_strategy, &s1.predecessor_expected_rewards)
    else {
        return false;
    };
    let (Some(prev_sigma2), Some(prev_r2)) =
        (&s2.predecessor_strategy, &s2.predecessor_expected_rewards)
    else {
        return false;
    };
    if std::ptr::eq(s1, s2) || s1.id == s2.id {
        return true;
    }
    // Later strategies are best responses to the learner's beliefs, so equal
    // learners imply equal futures whatever the histories were.
    if s1.learner.approx_eq(&s2.learner, TIE_TOLERANCE) {
        return true;
    }
    let exec = &a1;
    let players = ctx.game.num_players();
    let r1 = &s1.expected_rewards;
    let r2 = &s2.expected_rewards;

    for i in 0..players {
        if increment_argmax(&r1[i], &prev_r1[i]) != increment_argmax(&r2[i], &prev_r2[i]) {
            return false;
        }
    }

    if same_strategy(prev_sigma1, prev_sigma2) && same_strategy(prev_sigma1, &s1.strategy) {
        for i in 0..players {
            let e = exec.action(i);
            let best_reply = ctx.game.reward(i, exec)
                >= best_deviation_reward(ctx.game, i, exec) - TIE_TOLERANCE;
            if best_reply {
                continue;
            }
            let exec_gain = r2[i][e] - r1[i][e];
            for b in (0..r1[i].len()).filter(|&b| b != e) {
                if r2[i][b] - r1[i][b] > exec_gain + TIE_TOLERANCE {
                    return false;
                }
            }
        }
    }

    match ctx.path_from(s1, s2) {
        Some(path) if path.len() == 1 => {
            (0..players).all(|i| r2[i][exec.action(i)] >= r1[i][exec.action(i)] - TIE_TOLERANCE)
        }
        Some(path) => replay_matches(s2, &path, ctx),
        None => {
            if !same_strategy(prev_sigma1, prev_sigma2) {
                return false;
            }
            (0..players).all(|i| {
                let e = exec.action(i);
                if r2[i][e] < r1[i][e] - TIE_TOLERANCE {
                    return false;
                }
                match ctx.algorithm {
                    Algorithm::Fp => true,
                    Algorithm::Gfp | Algorithm::Afffp => (0..r1[i].len())
                        .filter(|&b| b != e)
                        .all(|b| r2[i][b] - r1[i][b] > TIE_TOLERANCE),
                }
            })
        }
    }
}

/// Replays the path from `s1` to `s2` starting at `s2` and compares each
/// replayed state with the stored state the same number of steps past `s1`.
fn replay_matches(s2: &ExplorationState, path: &[usize], ctx: &SimilarityContext<'_>) -> bool {
    let mut learner = s2.learner.clone();
    for j in 1..=path.len() {
        let original = if j < path.len() {
            &ctx.states[path[j]]
        } else {
            s2
        };
        let Some(word) = ctx.states[path[j - 1]].pure_action() else {
            return false;
        };
        learner.observe_in_place(&word);
        let rewards = all_expected_rewards(ctx.game, &learner);
        let Ok(strategy) = rewards
            .iter()
            .map(|r| decide(r, DecisionRule::BestResponse))
            .collect::<crate::error::Result<Vec<_>>>()
        else {
            return false;
        };
        if !same_strategy(&strategy, &original.strategy) {
            return false;
        }
        let Some(step) = original.pure_action() else {
            return false;
        };
        for (i, (replayed, stored)) in rewards.iter().zip(&original.expected_rewards).enumerate() {
            let (x, y) = (replayed[step.action(i)], stored[step.action(i)]);
            let ok = match ctx.algorithm {
                Algorithm::Fp => x <= y + TIE_TOLERANCE,
                Algorithm::Gfp | Algorithm::Afffp => x >= y - TIE_TOLERANCE,
            };
            if !ok {
                return false;
            }
        }
    }
    true
}

/// Clones the learner of `from`, feeds it `word` one joint action at a time
/// and records the best-response strategy after every step.
pub fn replay_strategies(
    from: &ExplorationState,
    word: &[JointAction],
    game: &Game,
) -> Vec<Vec<ActionDistribution>> {
    let mut learner = from.learner.clone();
    word.iter()
        .map(|a| {
            learner.observe_in_place(a);
            all_expected_rewards(game, &learner)
                .iter()
                .map(|r| decide(r, DecisionRule::BestResponse).expect("best response never fails"))
                .collect()
        })
        .collect()
}
