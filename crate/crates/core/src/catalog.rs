//! Built-in benchmark games and random initial beliefs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::Game;
use crate::learners::PairVectors;

/// Two players, two actions each; both are paid 1 when they pick the same
/// index and 0 otherwise.
pub fn simple_coordination() -> Game {
    Game::from_fn(vec![2, 2], |a| {
        let r = if a[0] == a[1] { 1.0 } else { 0.0 };
        vec![r, r]
    })
    .expect("static game is well formed")
}

/// Shapley's 3x3 game. Every diagonal cell pays nothing, and each player wins
/// on one of the two off-diagonal cells of its row, so best replies chase
/// each other round the board.
pub fn shapley() -> Game {
    const TABLE: [[(f64, f64); 3]; 3] = [
        [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)],
        [(0.0, 1.0), (0.0, 0.0), (1.0, 0.0)],
        [(1.0, 0.0), (0.0, 1.0), (0.0, 0.0)],
    ];
    Game::from_fn(vec![3, 3], |a| {
        let (x, y) = TABLE[a[0]][a[1]];
        vec![x, y]
    })
    .expect("static game is well formed")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexGameParams {
    pub n: usize,
    pub delta: f64,
}

impl Default for ComplexGameParams {
    fn default() -> Self {
        Self { n: 5, delta: 0.03 }
    }
}

impl ComplexGameParams {
    pub fn zeta(&self) -> f64 {
        1.0 + 1.0 / (self.n as f64).powf(1.0 - self.delta)
    }

    pub fn beta(&self) -> f64 {
        1.0 - 1.0 / (self.n as f64).powf(2.0 * (1.0 - self.delta))
    }

    /// Shared payoff of row action `i` against column action `j`, both 1-based.
    /// Rules are tried in order and the first match wins. Rules with equal
    /// payoffs stay separate so each reads as one clause of the definition.
    #[allow(clippy::if_same_then_else)]
    pub fn utility(&self, i: usize, j: usize) -> f64 {
        let n = self.n;
        if (n + 1..=4 * n).contains(&i) && j == i {
            1.0
        } else if (2..=n).contains(&i) && j + 1 == i {
            1.0
        } else if (n + 1..=4 * n).contains(&i) && j + 1 == i {
            self.zeta()
        } else if i == 2 * n + 1 && j == 4 * n {
            self.zeta()
        } else if (j <= 2 * n && i > j) || (i > j && i - j <= n) {
            self.beta()
        } else if (3 * n + 1..=4 * n).contains(&j) && i > 2 * n && i + n <= j {
            self.beta()
        } else {
            0.0
        }
    }
}

/// Identical-interest coordination game with `4n` actions per player whose
/// best payoffs sit on a band that fictitious play can drift along.
pub fn complex_coordination(params: ComplexGameParams) -> Result<Game> {
    if params.n < 2 {
        return Err(Error::Parameter(format!(
            "n must be at least 2, got {}",
            params.n
        )));
    }
    if !(params.delta > 0.0 && params.delta < 1.0) {
        return Err(Error::Parameter(format!(
            "delta must lie in (0, 1), got {}",
            params.delta
        )));
    }
    let size = 4 * params.n;
    Game::from_fn(vec![size, size], |a| {
        let u = params.utility(a[0] + 1, a[1] + 1);
        vec![u, u]
    })
}

/// Draws each weight uniformly from `(0, 1]` and normalizes every ordered
/// pair to sum to one.
pub fn random_initial_weights(game: &Game, seed: u64) -> PairVectors {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PairVectors::from_fn(game, |_, j| {
        let raw: Vec<f64> = (0..game.num_actions(j))
            .map(|_| 1.0 - rng.random::<f64>())
            .collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / total).collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{is_pure_nash, JointAction};

    #[test]
    fn simple_coordination_entries() {
        let g = simple_coordination();
        assert_eq!(g.reward(0, &JointAction::new(vec![0, 0])), 1.0);
        assert_eq!(g.reward(0, &JointAction::new(vec![0, 1])), 0.0);
        for a in g.joint_actions() {
            let swapped = JointAction::new(vec![1 - a.action(0), 1 - a.action(1)]);
            for p in 0..2 {
                assert_eq!(g.reward(p, &a), g.reward(p, &swapped));
            }
        }
    }

    #[test]
    fn shapley_entries() {
        let g = shapley();
        let b1a2 = JointAction::new(vec![0, 1]);
        assert_eq!((g.reward(0, &b1a2), g.reward(1, &b1a2)), (1.0, 0.0));
        let b1a1 = JointAction::new(vec![0, 0]);
        assert_eq!((g.reward(0, &b1a1), g.reward(1, &b1a1)), (0.0, 0.0));
        assert!(g.joint_actions().all(|a| !is_pure_nash(&g, &a)));
    }

    #[test]
    fn complex_constants() {
        let p = ComplexGameParams::default();
        assert!((p.zeta() - 1.2099).abs() < 5e-4);
        assert!((p.beta() - 0.95594).abs() < 5e-4);
        let q = ComplexGameParams { n: 5, delta: 0.001 };
        assert!((q.zeta() - 1.2003).abs() < 5e-4);
        assert!((q.beta() - 0.9599).abs() < 5e-4);
    }

    #[test]
    fn complex_spot_entries() {
        let p = ComplexGameParams::default();
        assert_eq!(p.utility(2, 1), 1.0);
        assert_eq!(p.utility(17, 11), 0.0);
        assert_eq!(p.utility(11, 20), p.zeta());
        assert_eq!(p.utility(6, 5), p.zeta());
        assert_eq!(p.utility(6, 6), 1.0);
        assert_eq!(p.utility(1, 1), 0.0);
        let g = complex_coordination(p).unwrap();
        assert_eq!(g.num_actions(0), 20);
        let values = [0.0, 1.0, p.zeta(), p.beta()];
        assert!(g.rewards_raw().iter().all(|r| values.contains(r)));
    }

    #[test]
    fn complex_rejects_bad_params() {
        assert!(complex_coordination(ComplexGameParams { n: 1, delta: 0.03 }).is_err());
        assert!(complex_coordination(ComplexGameParams { n: 5, delta: 1.0 }).is_err());
    }

    #[test]
    fn random_weights_are_normalized_and_reproducible() {
        let g = shapley();
        let w = random_initial_weights(&g, 7);
        for (i, j) in w.pairs() {
            let v = w.get(i, j);
            assert!(v.iter().all(|&x| x > 0.0));
            assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert_eq!(w, random_initial_weights(&g, 7));
        assert_ne!(w, random_initial_weights(&g, 8));
    }
}
