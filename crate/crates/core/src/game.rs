//! Strategic-form games and the two decision rules players use on them.
//!
//! Rewards live in one dense buffer in row-major joint-action order (the last
//! player's index varies fastest), so a joint action is addressable by a single
//! flat index and `reward(player, flat)` is an O(1) lookup.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two expected rewards closer than this are treated as a tie.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Tolerance accepted on the total mass of a probability vector.
pub const DISTRIBUTION_TOLERANCE: f64 = 1e-9;

/// One zero-based action index per player.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointAction(pub Vec<usize>);

impl JointAction {
    pub fn new(actions: Vec<usize>) -> Self {
        Self(actions)
    }

    pub fn actions(&self) -> &[usize] {
        &self.0
    }

    pub fn action(&self, player: usize) -> usize {
        self.0[player]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for JointAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

impl From<Vec<usize>> for JointAction {
    fn from(actions: Vec<usize>) -> Self {
        Self(actions)
    }
}

/// A mixed strategy of a single player.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionDistribution(Vec<f64>);

impl ActionDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Input("empty action distribution".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Input(format!(
                "distribution has a negative or non-finite entry: {probs:?}"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > DISTRIBUTION_TOLERANCE {
            return Err(Error::Input(format!(
                "distribution sums to {total}, expected 1"
            )));
        }
        Ok(Self(probs))
    }

    /// Degenerate distribution on `action`.
    pub fn pure(num_actions: usize, action: usize) -> Self {
        let mut probs = vec![0.0; num_actions];
        probs[action] = 1.0;
        Self(probs)
    }

    pub fn uniform(num_actions: usize) -> Self {
        Self(vec![1.0 / num_actions as f64; num_actions])
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn prob(&self, action: usize) -> f64 {
        self.0[action]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The action played with probability one, if the distribution is degenerate.
    pub fn pure_action(&self) -> Option<usize> {
        let mut found = None;
        for (a, &p) in self.0.iter().enumerate() {
            if p > 0.0 {
                if found.is_some() || (p - 1.0).abs() > DISTRIBUTION_TOLERANCE {
                    return None;
                }
                found = Some(a);
            }
        }
        found
    }
}

/// What one observer believes about each of its opponents.
///
/// `by_player[observer]` is unused and kept empty.
#[derive(Clone, Debug, PartialEq)]
pub struct OpponentEstimates {
    observer: usize,
    by_player: Vec<Vec<f64>>,
}

impl OpponentEstimates {
    pub fn new(observer: usize, by_player: Vec<Vec<f64>>) -> Result<Self> {
        if observer >= by_player.len() {
            return Err(Error::Contract(format!(
                "observer {observer} out of range for {} players",
                by_player.len()
            )));
        }
        for (j, dist) in by_player.iter().enumerate() {
            if j == observer {
                continue;
            }
            ActionDistribution::new(dist.clone())?;
        }
        let mut by_player = by_player;
        by_player[observer].clear();
        Ok(Self {
            observer,
            by_player,
        })
    }

    /// Two-player shorthand: the single opponent's distribution.
    pub fn two_player(observer: usize, opponent: Vec<f64>) -> Result<Self> {
        match observer {
            0 => Self::new(0, vec![Vec::new(), opponent]),
            1 => Self::new(1, vec![opponent, Vec::new()]),
            _ => Err(Error::Contract(format!(
                "observer {observer} out of range for 2 players"
            ))),
        }
    }

    pub(crate) fn from_raw(observer: usize, by_player: Vec<Vec<f64>>) -> Self {
        Self {
            observer,
            by_player,
        }
    }

    pub fn observer(&self) -> usize {
        self.observer
    }

    /// Estimate of opponent `player`'s strategy. Empty for the observer itself.
    pub fn of(&self, player: usize) -> &[f64] {
        &self.by_player[player]
    }

    pub fn num_players(&self) -> usize {
        self.by_player.len()
    }
}

/// How a player turns expected rewards into a strategy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DecisionRule {
    BestResponse,
    SmoothBestResponse { tau: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Game {
    action_counts: Vec<usize>,
    /// `strides[i]` is the flat-index weight of player `i`'s action.
    strides: Vec<usize>,
    /// `rewards[flat * num_players + player]`.
    rewards: Vec<f64>,
}

impl Game {
    /// Builds a game from per-player action counts and a reward buffer laid
    /// out as `rewards[flat_joint_index * num_players + player]`.
    pub fn new(action_counts: Vec<usize>, rewards: Vec<f64>) -> Result<Self> {
        if action_counts.len() < 2 {
            return Err(Error::InvalidGame(format!(
                "need at least 2 players, got {}",
                action_counts.len()
            )));
        }
        if let Some(p) = action_counts.iter().position(|&n| n == 0) {
            return Err(Error::InvalidGame(format!("player {p} has no actions")));
        }
        let joint: usize = action_counts.iter().product();
        let expected = joint * action_counts.len();
        if rewards.len() != expected {
            return Err(Error::InvalidGame(format!(
                "reward buffer has {} entries, expected {expected}",
                rewards.len()
            )));
        }
        if rewards.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidGame("non-finite reward".into()));
        }
        let strides = strides_for(&action_counts);
        Ok(Self {
            action_counts,
            strides,
            rewards,
        })
    }

    /// Builds a game by evaluating `f` on every joint action; `f` returns one
    /// reward per player.
    pub fn from_fn<F>(action_counts: Vec<usize>, mut f: F) -> Result<Self>
    where
        F: FnMut(&[usize]) -> Vec<f64>,
    {
        let players = action_counts.len();
        let joint: usize = action_counts.iter().product();
        let strides = strides_for(&action_counts);
        let mut rewards = Vec::with_capacity(joint * players);
        let mut actions = vec![0; players];
        for flat in 0..joint {
            decode(flat, &strides, &action_counts, &mut actions);
            let r = f(&actions);
            if r.len() != players {
                return Err(Error::InvalidGame(format!(
                    "reward function returned {} values for {players} players",
                    r.len()
                )));
            }
            rewards.extend(r);
        }
        Self::new(action_counts, rewards)
    }

    pub fn num_players(&self) -> usize {
        self.action_counts.len()
    }

    pub fn action_counts(&self) -> &[usize] {
        &self.action_counts
    }

    pub fn num_actions(&self, player: usize) -> usize {
        self.action_counts[player]
    }

    pub fn num_joint_actions(&self) -> usize {
        self.rewards.len() / self.num_players()
    }

    pub fn flat_index(&self, joint: &JointAction) -> usize {
        joint.0.iter().zip(&self.strides).map(|(a, s)| a * s).sum()
    }

    pub fn joint_action(&self, flat: usize) -> JointAction {
        let mut actions = vec![0; self.num_players()];
        decode(flat, &self.strides, &self.action_counts, &mut actions);
        JointAction(actions)
    }

    /// All joint actions in flat-index order.
    pub fn joint_actions(&self) -> impl Iterator<Item = JointAction> + '_ {
        (0..self.num_joint_actions()).map(|flat| self.joint_action(flat))
    }

    pub fn check_joint_action(&self, joint: &JointAction) -> Result<()> {
        if joint.len() != self.num_players() {
            return Err(Error::Contract(format!(
                "joint action {joint} has {} entries for {} players",
                joint.len(),
                self.num_players()
            )));
        }
        for (player, (&a, &n)) in joint.0.iter().zip(&self.action_counts).enumerate() {
            if a >= n {
                return Err(Error::Contract(format!(
                    "action {a} out of range for player {player} ({n} actions)"
                )));
            }
        }
        Ok(())
    }

    pub fn reward(&self, player: usize, joint: &JointAction) -> f64 {
        self.reward_flat(player, self.flat_index(joint))
    }

    pub fn reward_flat(&self, player: usize, flat: usize) -> f64 {
        self.rewards[flat * self.num_players() + player]
    }

    pub fn rewards_raw(&self) -> &[f64] {
        &self.rewards
    }

    /// Expected reward of every action of `player` against `estimates`.
    ///
    /// Caller guarantees `estimates` belongs to `player` and covers every opponent.
    pub fn expected_rewards(&self, player: usize, estimates: &OpponentEstimates) -> Vec<f64> {
        let players = self.num_players();
        let mut out = vec![0.0; self.action_counts[player]];
        let mut actions = vec![0; players];
        for flat in 0..self.num_joint_actions() {
            let r = self.rewards[flat * players + player];
            if r == 0.0 {
                continue;
            }
            decode(flat, &self.strides, &self.action_counts, &mut actions);
            let mut prob = 1.0;
            for (j, &a) in actions.iter().enumerate() {
                if j != player {
                    prob *= estimates.of(j)[a];
                }
            }
            out[actions[player]] += r * prob;
        }
        out
    }

    fn check_estimates(&self, player: usize, estimates: &OpponentEstimates) -> Result<()> {
        if player >= self.num_players() {
            return Err(Error::Contract(format!(
                "player {player} out of range for {} players",
                self.num_players()
            )));
        }
        if estimates.observer() != player || estimates.num_players() != self.num_players() {
            return Err(Error::Contract(format!(
                "estimates held by player {} over {} players do not fit player {player}",
                estimates.observer(),
                estimates.num_players()
            )));
        }
        for j in (0..self.num_players()).filter(|&j| j != player) {
            if estimates.of(j).len() != self.action_counts[j] {
                return Err(Error::Contract(format!(
                    "estimate of player {j} has {} entries, expected {}",
                    estimates.of(j).len(),
                    self.action_counts[j]
                )));
            }
        }
        Ok(())
    }
}

fn strides_for(action_counts: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; action_counts.len()];
    for i in (0..action_counts.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * action_counts[i + 1];
    }
    strides
}

fn decode(flat: usize, strides: &[usize], counts: &[usize], out: &mut [usize]) {
    for ((o, &s), &n) in out.iter_mut().zip(strides).zip(counts) {
        *o = (flat / s) % n;
    }
}

/// `r^i(action, sigma^{-i})` for a single action.
pub fn expected_reward(
    game: &Game,
    player: usize,
    action: usize,
    estimates: &OpponentEstimates,
) -> Result<f64> {
    game.check_estimates(player, estimates)?;
    if action >= game.num_actions(player) {
        return Err(Error::Contract(format!(
            "action {action} out of range for player {player}"
        )));
    }
    Ok(game.expected_rewards(player, estimates)[action])
}

/// Index of the largest value; values within [`TIE_TOLERANCE`] of the maximum
/// count as ties and the smallest index among them wins.
pub fn argmax_smallest(values: &[f64]) -> usize {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    values
        .iter()
        .position(|&v| v >= max - TIE_TOLERANCE)
        .unwrap_or(0)
}

pub fn best_response(game: &Game, player: usize, estimates: &OpponentEstimates) -> Result<usize> {
    game.check_estimates(player, estimates)?;
    Ok(argmax_smallest(&game.expected_rewards(player, estimates)))
}

/// Max-shifted softmax of `values` at temperature `tau`.
pub fn softmax(values: &[f64], tau: f64) -> Result<Vec<f64>> {
    if !tau.is_finite() || tau <= 0.0 {
        return Err(Error::Parameter(format!(
            "temperature must be positive and finite, got {tau}"
        )));
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = values.iter().map(|v| ((v - max) / tau).exp()).collect();
    let total: f64 = out.iter().sum();
    for p in &mut out {
        *p /= total;
    }
    Ok(out)
}

pub fn smooth_best_response(
    game: &Game,
    player: usize,
    estimates: &OpponentEstimates,
    tau: f64,
) -> Result<ActionDistribution> {
    game.check_estimates(player, estimates)?;
    let probs = softmax(&game.expected_rewards(player, estimates), tau)?;
    Ok(ActionDistribution(probs))
}

/// Applies a decision rule to one player's expected-reward vector.
pub fn decide(rewards: &[f64], rule: DecisionRule) -> Result<ActionDistribution> {
    match rule {
        DecisionRule::BestResponse => Ok(ActionDistribution::pure(
            rewards.len(),
            argmax_smallest(rewards),
        )),
        DecisionRule::SmoothBestResponse { tau } => Ok(ActionDistribution(softmax(rewards, tau)?)),
    }
}

/// Largest reward `player` could get by deviating unilaterally from `joint`.
pub fn best_deviation_reward(game: &Game, player: usize, joint: &JointAction) -> f64 {
    let mut probe = joint.clone();
    (0..game.num_actions(player))
        .map(|b| {
            probe.0[player] = b;
            game.reward(player, &probe)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// No player gains by a unilateral deviation from `joint`.
pub fn is_pure_nash(game: &Game, joint: &JointAction) -> bool {
    (0..game.num_players())
        .all(|i| best_deviation_reward(game, i, joint) <= game.reward(i, joint) + TIE_TOLERANCE)
}

/// No other pure joint action gives every player strictly more.
pub fn is_pareto_efficient_pure(game: &Game, joint: &JointAction) -> bool {
    let flat = game.flat_index(joint);
    !(0..game.num_joint_actions()).any(|other| {
        other != flat
            && (0..game.num_players())
                .all(|i| game.reward_flat(i, other) > game.reward_flat(i, flat) + TIE_TOLERANCE)
    })
}
