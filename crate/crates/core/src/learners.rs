//! Opponent-estimation engines for the fictitious-play variants listed in
//! [`Algorithm`].
//!
//! Every engine keeps one record per ordered pair `(observer, opponent)` and
//! exposes the same two operations: fold an observed joint action into the
//! record, and report the observer's current belief about each opponent.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{Game, JointAction, OpponentEstimates};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Fp,
    Gfp,
    Afffp,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Fp, Algorithm::Gfp, Algorithm::Afffp];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Fp => "fp",
            Algorithm::Gfp => "gfp",
            Algorithm::Afffp => "afffp",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name().to_uppercase())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fp" => Ok(Algorithm::Fp),
            "gfp" => Ok(Algorithm::Gfp),
            "afffp" => Ok(Algorithm::Afffp),
            other => Err(Error::Config(format!(
                "unknown algorithm `{other}` (expected fp, gfp or afffp)"
            ))),
        }
    }
}

/// Which weights feed the AFFFP forgetting-factor gradient step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaGradient {
    /// Step λ using the weights and derivatives after folding in the current
    /// observation. The gradient then reflects how well the updated estimate
    /// explains the action just seen, which drives λ down quickly whenever
    /// the opponent alternates.
    #[default]
    Retrospective,
    /// Step λ using the weights and derivatives as they stood before the
    /// observation, so the gradient scores the prediction that was made.
    Predictive,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerParams {
    /// GFP step size.
    pub alpha: f64,
    /// Initial AFFFP forgetting factor.
    pub lambda0: f64,
    /// AFFFP gradient learning rate.
    pub gamma: f64,
    /// Lower clamp on the AFFFP forgetting factor.
    pub lambda_min: f64,
    pub gradient: LambdaGradient,
}

impl Default for LearnerParams {
    fn default() -> Self {
        Self {
            alpha: 0.2,
            lambda0: 0.8,
            gamma: 0.05,
            lambda_min: 0.01,
            gradient: LambdaGradient::Retrospective,
        }
    }
}

impl LearnerParams {
    fn validate(&self, algorithm: Algorithm) -> Result<()> {
        let bad = |name: &str, v: f64, range: &str| {
            Err(Error::Config(format!("{name} = {v} outside {range}")))
        };
        match algorithm {
            Algorithm::Fp => Ok(()),
            Algorithm::Gfp => {
                if !(self.alpha > 0.0 && self.alpha < 1.0) {
                    return bad("alpha", self.alpha, "(0, 1)");
                }
                Ok(())
            }
            Algorithm::Afffp => {
                if !(self.lambda_min > 0.0 && self.lambda_min <= 1.0) {
                    return bad("lambda_min", self.lambda_min, "(0, 1]");
                }
                if !(self.lambda0 >= self.lambda_min && self.lambda0 <= 1.0) {
                    return bad("lambda0", self.lambda0, "[lambda_min, 1]");
                }
                if !(0.0..=1.0).contains(&self.gamma) {
                    return bad("gamma", self.gamma, "[0, 1]");
                }
                Ok(())
            }
        }
    }
}

/// One real vector per ordered pair `(i, j)` with `i != j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairVectors {
    players: usize,
    data: Vec<Vec<f64>>,
}

impl PairVectors {
    /// Zero vectors shaped for `game`: the `(i, j)` entry has one slot per action of `j`.
    pub fn zeros(game: &Game) -> Self {
        let players = game.num_players();
        let mut data = Vec::with_capacity(players * players);
        for i in 0..players {
            for j in 0..players {
                let len = if i == j { 0 } else { game.num_actions(j) };
                data.push(vec![0.0; len]);
            }
        }
        Self { players, data }
    }

    /// Two-player shorthand: `first` is what player 0 holds about player 1,
    /// `second` what player 1 holds about player 0.
    pub fn two_player(first: Vec<f64>, second: Vec<f64>) -> Self {
        Self {
            players: 2,
            data: vec![Vec::new(), first, second, Vec::new()],
        }
    }

    pub fn from_fn<F>(game: &Game, mut f: F) -> Self
    where
        F: FnMut(usize, usize) -> Vec<f64>,
    {
        let mut out = Self::zeros(game);
        for i in 0..out.players {
            for j in (0..out.players).filter(|&j| j != i) {
                out.data[i * out.players + j] = f(i, j);
            }
        }
        out
    }

    pub fn num_players(&self) -> usize {
        self.players
    }

    pub fn get(&self, i: usize, j: usize) -> &[f64] {
        &self.data[i * self.players + j]
    }

    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut Vec<f64> {
        &mut self.data[i * self.players + j]
    }

    pub fn set(&mut self, i: usize, j: usize, values: Vec<f64>) {
        self.data[i * self.players + j] = values;
    }

    /// Ordered pairs `(i, j)`, `i != j`, in lexicographic order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> {
        let players = self.players;
        (0..players).flat_map(move |i| (0..players).filter(move |&j| j != i).map(move |j| (i, j)))
    }

    /// Checks the table has the shape `game` requires.
    pub fn check_shape(&self, game: &Game) -> Result<()> {
        if self.players != game.num_players() || self.data.len() != self.players * self.players {
            return Err(Error::Input(format!(
                "weights cover {} players, game has {}",
                self.players,
                game.num_players()
            )));
        }
        for (i, j) in self.pairs() {
            let have = self.get(i, j).len();
            let want = game.num_actions(j);
            if have != want {
                return Err(Error::Input(format!(
                    "weights for pair ({i},{j}) have {have} entries, expected {want}"
                )));
            }
        }
        Ok(())
    }

    fn normalized(&self) -> Self {
        let mut out = self.clone();
        for v in out.data.iter_mut().filter(|v| !v.is_empty()) {
            let total: f64 = v.iter().sum();
            for x in v.iter_mut() {
                *x /= total;
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FpState {
    pub weights: PairVectors,
    pub iteration: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GfpState {
    pub estimates: PairVectors,
    pub alpha: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AfffpState {
    pub weights: PairVectors,
    /// Per-pair running total of the weights, indexed `i * players + j`.
    pub norms: Vec<f64>,
    pub lambdas: Vec<f64>,
    /// Derivative of each weight with respect to λ.
    pub dkappa: PairVectors,
    /// Derivative of each norm with respect to λ.
    pub dn: Vec<f64>,
    pub gamma: f64,
    pub lambda_min: f64,
    pub gradient: LambdaGradient,
}

impl AfffpState {
    pub fn lambda(&self, i: usize, j: usize) -> f64 {
        self.lambdas[i * self.weights.num_players() + j]
    }

    pub fn norm(&self, i: usize, j: usize) -> f64 {
        self.norms[i * self.weights.num_players() + j]
    }

    fn observe_pair(&mut self, i: usize, j: usize, observed: usize) {
        let idx = i * self.weights.num_players() + j;
        let lam = self.lambdas[idx];
        let n = self.norms[idx];
        let dn = self.dn[idx];
        let clamp = |x: f64| x.clamp(self.lambda_min, 1.0);

        let predictive = {
            let k = self.weights.get(i, j)[observed];
            let dk = self.dkappa.get(i, j)[observed];
            clamp(lam + self.gamma * (dk / k - dn / n))
        };

        let kappa = self.weights.get_mut(i, j);
        let dkappa = self.dkappa.get_mut(i, j);
        for (a, (k, dk)) in kappa.iter_mut().zip(dkappa.iter_mut()).enumerate() {
            *dk = *k + lam * *dk;
            *k = lam * *k + if a == observed { 1.0 } else { 0.0 };
        }
        let dn_new = n + lam * dn;
        let n_new = lam * n + 1.0;
        self.dn[idx] = dn_new;
        self.norms[idx] = n_new;

        self.lambdas[idx] = match self.gradient {
            LambdaGradient::Predictive => predictive,
            LambdaGradient::Retrospective => {
                let k = self.weights.get(i, j)[observed];
                let dk = self.dkappa.get(i, j)[observed];
                clamp(lam + self.gamma * (dk / k - dn_new / n_new))
            }
        };
    }
}

/// The learner's parameter vector, one variant per algorithm.
#[derive(Clone, Debug, PartialEq)]
pub enum LearnerState {
    Fp(FpState),
    Gfp(GfpState),
    Afffp(AfffpState),
}

impl LearnerState {
    /// Normalizes `raw_weights` per ordered pair and builds the algorithm's
    /// starting parameters.
    pub fn initial(
        algorithm: Algorithm,
        game: &Game,
        raw_weights: &PairVectors,
        params: &LearnerParams,
    ) -> Result<Self> {
        raw_weights.check_shape(game)?;
        for (i, j) in raw_weights.pairs() {
            if let Some(w) = raw_weights
                .get(i, j)
                .iter()
                .find(|w| !(w.is_finite() && **w > 0.0))
            {
                return Err(Error::Input(format!(
                    "weight {w} for pair ({i},{j}) is not strictly positive"
                )));
            }
        }
        params.validate(algorithm)?;
        let weights = raw_weights.normalized();
        let players = game.num_players();
        Ok(match algorithm {
            Algorithm::Fp => LearnerState::Fp(FpState {
                weights,
                iteration: 0,
            }),
            Algorithm::Gfp => LearnerState::Gfp(GfpState {
                estimates: weights,
                alpha: params.alpha,
            }),
            Algorithm::Afffp => {
                let pair_count = players * players;
                LearnerState::Afffp(AfffpState {
                    dkappa: PairVectors::zeros(game),
                    weights,
                    norms: vec![1.0; pair_count],
                    lambdas: vec![params.lambda0; pair_count],
                    dn: vec![0.0; pair_count],
                    gamma: params.gamma,
                    lambda_min: params.lambda_min,
                    gradient: params.gradient,
                })
            }
        })
    }

    pub fn algorithm(&self) -> Algorithm {
        match self {
            LearnerState::Fp(_) => Algorithm::Fp,
            LearnerState::Gfp(_) => Algorithm::Gfp,
            LearnerState::Afffp(_) => Algorithm::Afffp,
        }
    }

    pub fn num_players(&self) -> usize {
        match self {
            LearnerState::Fp(s) => s.weights.num_players(),
            LearnerState::Gfp(s) => s.estimates.num_players(),
            LearnerState::Afffp(s) => s.weights.num_players(),
        }
    }

    /// Every parameter of `self` lies within `tol` of the matching parameter
    /// of `other`. States with such learners make the same choices from now on.
    pub fn approx_eq(&self, other: &LearnerState, tol: f64) -> bool {
        let close = |a: &[f64], b: &[f64]| {
            a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
        };
        let close_pairs = |a: &PairVectors, b: &PairVectors| {
            a.players == b.players && a.data.iter().zip(&b.data).all(|(x, y)| close(x, y))
        };
        match (self, other) {
            (LearnerState::Fp(a), LearnerState::Fp(b)) => close_pairs(&a.weights, &b.weights),
            (LearnerState::Gfp(a), LearnerState::Gfp(b)) => {
                a.alpha == b.alpha && close_pairs(&a.estimates, &b.estimates)
            }
            (LearnerState::Afffp(a), LearnerState::Afffp(b)) => {
                a.gamma == b.gamma
                    && a.lambda_min == b.lambda_min
                    && a.gradient == b.gradient
                    && close_pairs(&a.weights, &b.weights)
                    && close_pairs(&a.dkappa, &b.dkappa)
                    && close(&a.norms, &b.norms)
                    && close(&a.lambdas, &b.lambdas)
                    && close(&a.dn, &b.dn)
            }
            _ => false,
        }
    }

    /// Returns the successor parameters after every player observes `executed`.
    pub fn observe(&self, game: &Game, executed: &JointAction) -> Result<Self> {
        game.check_joint_action(executed)?;
        let mut next = self.clone();
        next.observe_in_place(executed);
        Ok(next)
    }

    /// Unchecked in-place update; `executed` must be valid for the game.
    pub(crate) fn observe_in_place(&mut self, executed: &JointAction) {
        match self {
            LearnerState::Fp(s) => {
                let pairs: Vec<_> = s.weights.pairs().collect();
                for (i, j) in pairs {
                    s.weights.get_mut(i, j)[executed.action(j)] += 1.0;
                }
                s.iteration += 1;
            }
            LearnerState::Gfp(s) => {
                let alpha = s.alpha;
                let pairs: Vec<_> = s.estimates.pairs().collect();
                for (i, j) in pairs {
                    let observed = executed.action(j);
                    for (a, x) in s.estimates.get_mut(i, j).iter_mut().enumerate() {
                        let hit = if a == observed { 1.0 } else { 0.0 };
                        *x = (1.0 - alpha) * *x + alpha * hit;
                    }
                }
            }
            LearnerState::Afffp(s) => {
                let pairs: Vec<_> = s.weights.pairs().collect();
                for (i, j) in pairs {
                    s.observe_pair(i, j, executed.action(j));
                }
            }
        }
    }

    /// Observer's current belief about each opponent.
    pub fn estimates(&self, observer: usize) -> OpponentEstimates {
        let players = self.num_players();
        let by_player = (0..players)
            .map(|j| {
                if j == observer {
                    return Vec::new();
                }
                match self {
                    LearnerState::Fp(s) => normalize(s.weights.get(observer, j)),
                    LearnerState::Gfp(s) => s.estimates.get(observer, j).to_vec(),
                    LearnerState::Afffp(s) => {
                        let n = s.norm(observer, j);
                        s.weights.get(observer, j).iter().map(|k| k / n).collect()
                    }
                }
            })
            .collect();
        OpponentEstimates::from_raw(observer, by_player)
    }

    /// Expected reward of each of `player`'s actions under its current beliefs.
    pub fn expected_rewards(&self, game: &Game, player: usize) -> Vec<f64> {
        game.expected_rewards(player, &self.estimates(player))
    }
}

fn normalize(v: &[f64]) -> Vec<f64> {
    let total: f64 = v.iter().sum();
    v.iter().map(|x| x / total).collect()
}

pub fn initial_state(
    algorithm: Algorithm,
    game: &Game,
    raw_weights: &PairVectors,
    params: &LearnerParams,
) -> Result<LearnerState> {
    LearnerState::initial(algorithm, game, raw_weights, params)
}

pub fn observe(state: &LearnerState, game: &Game, executed: &JointAction) -> Result<LearnerState> {
    state.observe(game, executed)
}

pub fn estimates(state: &LearnerState, observer: usize) -> OpponentEstimates {
    state.estimates(observer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    fn toy_weights() -> PairVectors {
        PairVectors::two_player(vec![0.511, 0.489], vec![0.489, 0.511])
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn fp_initial_keeps_normalized_weights() {
        let g = catalog::simple_coordination();
        let s =
            initial_state(Algorithm::Fp, &g, &toy_weights(), &LearnerParams::default()).unwrap();
        let LearnerState::Fp(fp) = &s else { panic!() };
        assert!(close(fp.weights.get(0, 1), &[0.511, 0.489], 1e-12));
        assert_eq!(fp.iteration, 0);
    }

    #[test]
    fn fp_initial_normalizes() {
        let g = catalog::simple_coordination();
        let raw = PairVectors::two_player(vec![1.0, 1.0], vec![3.0, 1.0]);
        let s = initial_state(Algorithm::Fp, &g, &raw, &LearnerParams::default()).unwrap();
        let LearnerState::Fp(fp) = &s else { panic!() };
        assert!(close(fp.weights.get(0, 1), &[0.5, 0.5], 1e-12));
        assert!(close(fp.weights.get(1, 0), &[0.75, 0.25], 1e-12));
    }

    #[test]
    fn afffp_initial_values() {
        let g = catalog::simple_coordination();
        let raw = PairVectors::two_player(vec![0.5, 0.5], vec![0.5, 0.5]);
        let s = initial_state(Algorithm::Afffp, &g, &raw, &LearnerParams::default()).unwrap();
        let LearnerState::Afffp(a) = &s else { panic!() };
        assert_eq!(a.norm(0, 1), 1.0);
        assert_eq!(a.lambda(0, 1), 0.8);
        assert_eq!(a.dkappa.get(0, 1), &[0.0, 0.0]);
        assert_eq!(a.dn[1], 0.0);
    }

    #[test]
    fn initial_rejects_bad_input() {
        let g = catalog::simple_coordination();
        let zero = PairVectors::two_player(vec![0.0, 1.0], vec![0.5, 0.5]);
        assert!(matches!(
            initial_state(Algorithm::Fp, &g, &zero, &LearnerParams::default()),
            Err(Error::Input(_))
        ));
        let short = PairVectors::two_player(vec![1.0], vec![0.5, 0.5]);
        assert!(initial_state(Algorithm::Fp, &g, &short, &LearnerParams::default()).is_err());
        let params = LearnerParams {
            alpha: 0.0,
            ..LearnerParams::default()
        };
        assert!(matches!(
            initial_state(Algorithm::Gfp, &g, &toy_weights(), &params),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn fp_observe_matches_successor_weights() {
        let g = catalog::simple_coordination();
        let s =
            initial_state(Algorithm::Fp, &g, &toy_weights(), &LearnerParams::default()).unwrap();
        let next = observe(&s, &g, &JointAction::new(vec![0, 0])).unwrap();
        let LearnerState::Fp(fp) = &next else {
            panic!()
        };
        assert!(close(fp.weights.get(0, 1), &[1.511, 0.489], 1e-12));
        assert!(close(fp.weights.get(1, 0), &[1.489, 0.511], 1e-12));
        assert_eq!(fp.iteration, 1);
        assert!(close(estimates(&next, 0).of(1), &[0.7555, 0.2445], 1e-12));
    }

    #[test]
    fn gfp_observe_example() {
        let g = catalog::simple_coordination();
        let raw = PairVectors::two_player(vec![0.5, 0.5], vec![0.5, 0.5]);
        let s = initial_state(Algorithm::Gfp, &g, &raw, &LearnerParams::default()).unwrap();
        let next = observe(&s, &g, &JointAction::new(vec![0, 0])).unwrap();
        assert!(close(estimates(&next, 0).of(1), &[0.6, 0.4], 1e-12));
    }

    #[test]
    fn afffp_observe_example() {
        let g = catalog::simple_coordination();
        let raw = PairVectors::two_player(vec![0.5, 0.5], vec![0.5, 0.5]);
        for gradient in [LambdaGradient::Predictive, LambdaGradient::Retrospective] {
            let params = LearnerParams {
                gradient,
                ..LearnerParams::default()
            };
            let s = initial_state(Algorithm::Afffp, &g, &raw, &params).unwrap();
            let next = observe(&s, &g, &JointAction::new(vec![0, 0])).unwrap();
            let LearnerState::Afffp(a) = &next else {
                panic!()
            };
            assert!(close(a.weights.get(0, 1), &[1.4, 0.4], 1e-12));
            assert!((a.norm(0, 1) - 1.8).abs() < 1e-12);
            assert!(close(a.dkappa.get(0, 1), &[0.5, 0.5], 1e-12));
            assert!((a.dn[1] - 1.0).abs() < 1e-12);
            assert!(close(
                estimates(&next, 0).of(1),
                &[7.0 / 9.0, 2.0 / 9.0],
                1e-12
            ));
            if gradient == LambdaGradient::Predictive {
                assert_eq!(a.lambda(0, 1), 0.8);
            } else {
                // 0.8 + 0.05 * (0.5 / 1.4 - 1 / 1.8)
                let expected = 0.8 + 0.05 * (0.5 / 1.4 - 1.0 / 1.8);
                assert!((a.lambda(0, 1) - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn afffp_lambda_stays_clamped() {
        let g = catalog::simple_coordination();
        let params = LearnerParams {
            gamma: 1.0,
            ..LearnerParams::default()
        };
        let mut s = initial_state(Algorithm::Afffp, &g, &toy_weights(), &params).unwrap();
        for t in 0..200 {
            let a = if t % 2 == 0 { vec![0, 1] } else { vec![1, 0] };
            s = observe(&s, &g, &JointAction::new(a)).unwrap();
            let LearnerState::Afffp(st) = &s else {
                panic!()
            };
            for (i, j) in st.weights.pairs() {
                let lam = st.lambda(i, j);
                assert!((0.01..=1.0).contains(&lam));
                let total: f64 = st.weights.get(i, j).iter().sum();
                assert!((total - st.norm(i, j)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn algorithm_parses() {
        assert_eq!("GFP".parse::<Algorithm>().unwrap(), Algorithm::Gfp);
        assert!(matches!("rm".parse::<Algorithm>(), Err(Error::Config(_))));
    }
}
