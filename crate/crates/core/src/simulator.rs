//! Monte-Carlo playouts of the learning dynamics.
//!
//! A playout samples the first joint action from the smooth best response
//! and then follows deterministic best responses, exactly the process the
//! explorer enumerates. Batches of playouts serve as an independent oracle
//! for the chain's reach probabilities.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{decide, ActionDistribution, DecisionRule, Game, JointAction, OpponentEstimates};
use crate::learners::LearnerState;

/// Longest repeating pattern recognised in a playout's tail.
pub const MAX_PERIOD: usize = 8;
/// Upper bound on the tail window used to classify a playout.
pub const MAX_TAIL_WINDOW: usize = 50;

/// One iteration of a playout.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceStep {
    pub joint: JointAction,
    /// Per player, the expected reward of each own action when the action was chosen.
    pub expected_rewards: Vec<Vec<f64>>,
    /// Beliefs of every player at that moment, kept only on sampled iterations.
    pub estimates: Option<Vec<OpponentEstimates>>,
}

impl TraceStep {
    /// Expected reward player `i` attached to the action it executed.
    pub fn executed_reward(&self, player: usize) -> f64 {
        self.expected_rewards[player][self.joint.action(player)]
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trace {
    pub steps: Vec<TraceStep>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn actions(&self) -> impl Iterator<Item = &JointAction> {
        self.steps.iter().map(|s| &s.joint)
    }

    /// Writes `iter,action_0..,reward_0..` rows, one per iteration.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let players = self.steps.first().map_or(0, |s| s.joint.len());
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let mut header = vec!["iter".to_string()];
        header.extend((0..players).map(|i| format!("action_{i}")));
        header.extend((0..players).map(|i| format!("reward_{i}")));
        writer.write_record(&header)?;
        for (t, step) in self.steps.iter().enumerate() {
            let mut row = vec![t.to_string()];
            row.extend(step.joint.actions().iter().map(usize::to_string));
            row.extend((0..players).map(|i| step.executed_reward(i).to_string()));
            writer.write_record(&row)?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Optional knobs of a single playout.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PlayoutOptions {
    /// Generator stream; batches use the run index.
    pub stream: u64,
    /// Keep belief snapshots every this many iterations (0 disables them).
    pub snapshot_every: usize,
}

pub fn simulate(
    game: &Game,
    initial: &LearnerState,
    iterations: usize,
    tau0: f64,
    seed: u64,
) -> Result<Trace> {
    simulate_with(
        game,
        initial,
        iterations,
        tau0,
        seed,
        PlayoutOptions::default(),
    )
}

pub fn simulate_with(
    game: &Game,
    initial: &LearnerState,
    iterations: usize,
    tau0: f64,
    seed: u64,
    options: PlayoutOptions,
) -> Result<Trace> {
    check_inputs(game, initial, iterations, tau0)?;
    let mut rng = generator(seed, options.stream);
    let mut learner = initial.clone();
    let mut steps = Vec::with_capacity(iterations);
    for t in 0..iterations {
        let rule = rule_at(t, tau0);
        let expected_rewards: Vec<Vec<f64>> = (0..game.num_players())
            .map(|i| learner.expected_rewards(game, i))
            .collect();
        let joint = choose(&expected_rewards, rule, &mut rng)?;
        let estimates =
            (options.snapshot_every > 0 && t % options.snapshot_every == 0).then(|| {
                (0..game.num_players())
                    .map(|i| learner.estimates(i))
                    .collect()
            });
        learner.observe_in_place(&joint);
        steps.push(TraceStep {
            joint,
            expected_rewards,
            estimates,
        });
    }
    Ok(Trace { steps })
}

/// Tally of one recognised tail pattern.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmpiricalClass {
    /// Sorted, duplicate-free joint actions of the repeating pattern.
    pub actions: Vec<JointAction>,
    pub count: usize,
    pub frequency: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmpiricalResult {
    pub runs: usize,
    pub classes: Vec<EmpiricalClass>,
    /// Runs whose tail showed no pattern of period at most [`MAX_PERIOD`].
    pub unresolved: usize,
    /// Per player, the mean reward of the last executed joint action.
    pub mean_terminal_reward: Vec<f64>,
}

impl EmpiricalResult {
    /// Fraction of runs whose tail pattern uses exactly `actions`.
    pub fn frequency_of(&self, actions: &[JointAction]) -> f64 {
        let mut key = actions.to_vec();
        key.sort();
        key.dedup();
        self.classes
            .iter()
            .find(|c| c.actions == key)
            .map_or(0.0, |c| c.frequency)
    }
}

/// Runs `runs` independent playouts in parallel. Run `k` draws from stream
/// `k` of the generator seeded with `seed`, so results do not depend on
/// scheduling.
pub fn empirical_convergence(
    game: &Game,
    initial: &LearnerState,
    runs: usize,
    iterations: usize,
    tau0: f64,
    seed: u64,
) -> Result<EmpiricalResult> {
    if runs == 0 {
        return Err(Error::Parameter("at least one run is required".into()));
    }
    check_inputs(game, initial, iterations, tau0)?;
    let window = tail_window(iterations);
    let outcomes: Vec<(Option<Vec<JointAction>>, JointAction)> = (0..runs)
        .into_par_iter()
        .map(|k| {
            let actions = playout_actions(game, initial, iterations, tau0, seed, k as u64)?;
            let pattern = tail_pattern(&actions[actions.len() - window..]);
            Ok((pattern, actions[actions.len() - 1].clone()))
        })
        .collect::<Result<_>>()?;

    let mut counts: BTreeMap<Vec<JointAction>, usize> = BTreeMap::new();
    let mut unresolved = 0;
    let mut reward_sums = vec![0.0; game.num_players()];
    for (pattern, last) in &outcomes {
        match pattern {
            Some(p) => *counts.entry(p.clone()).or_default() += 1,
            None => unresolved += 1,
        }
        for (i, sum) in reward_sums.iter_mut().enumerate() {
            *sum += game.reward(i, last);
        }
    }
    let classes = counts
        .into_iter()
        .map(|(actions, count)| EmpiricalClass {
            actions,
            count,
            frequency: count as f64 / runs as f64,
        })
        .collect();
    Ok(EmpiricalResult {
        runs,
        classes,
        unresolved,
        mean_terminal_reward: reward_sums.into_iter().map(|s| s / runs as f64).collect(),
    })
}

/// Length of the tail inspected for a repeating pattern.
pub fn tail_window(iterations: usize) -> usize {
    (iterations / 2).clamp(1, MAX_TAIL_WINDOW)
}

/// Smallest period `p <= MAX_PERIOD` with `tail[k] == tail[k - p]` throughout,
/// returned as the sorted set of actions in one period.
pub fn tail_pattern(tail: &[JointAction]) -> Option<Vec<JointAction>> {
    let period = (1..=MAX_PERIOD.min(tail.len()))
        .find(|&p| (p..tail.len()).all(|k| tail[k] == tail[k - p]))?;
    let mut actions = tail[tail.len() - period..].to_vec();
    actions.sort();
    actions.dedup();
    Some(actions)
}

fn playout_actions(
    game: &Game,
    initial: &LearnerState,
    iterations: usize,
    tau0: f64,
    seed: u64,
    stream: u64,
) -> Result<Vec<JointAction>> {
    let mut rng = generator(seed, stream);
    let mut learner = initial.clone();
    let mut actions = Vec::with_capacity(iterations);
    for t in 0..iterations {
        let rewards: Vec<Vec<f64>> = (0..game.num_players())
            .map(|i| learner.expected_rewards(game, i))
            .collect();
        let joint = choose(&rewards, rule_at(t, tau0), &mut rng)?;
        learner.observe_in_place(&joint);
        actions.push(joint);
    }
    Ok(actions)
}

fn generator(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn rule_at(t: usize, tau0: f64) -> DecisionRule {
    if t == 0 {
        DecisionRule::SmoothBestResponse { tau: tau0 }
    } else {
        DecisionRule::BestResponse
    }
}

fn choose(rewards: &[Vec<f64>], rule: DecisionRule, rng: &mut ChaCha8Rng) -> Result<JointAction> {
    rewards
        .iter()
        .map(|r| decide(r, rule).map(|d| sample(&d, rng)))
        .collect::<Result<Vec<_>>>()
        .map(JointAction::new)
}

fn sample(dist: &ActionDistribution, rng: &mut ChaCha8Rng) -> usize {
    if let Some(a) = dist.pure_action() {
        return a;
    }
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (a, &p) in dist.probs().iter().enumerate() {
        acc += p;
        if u < acc {
            return a;
        }
    }
    // Rounding left u above the cumulative sum: take the last supported action.
    dist.probs().iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

fn check_inputs(game: &Game, initial: &LearnerState, iterations: usize, tau0: f64) -> Result<()> {
    if iterations == 0 {
        return Err(Error::Parameter(
            "at least one iteration is required".into(),
        ));
    }
    if !(tau0 > 0.0 && tau0.is_finite()) {
        return Err(Error::Parameter(format!(
            "tau0 must be positive, got {tau0}"
        )));
    }
    if initial.num_players() != game.num_players() {
        return Err(Error::Contract(format!(
            "learner tracks {} players, game has {}",
            initial.num_players(),
            game.num_players()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{random_initial_weights, shapley, simple_coordination};
    use crate::learners::{Algorithm, LearnerParams, PairVectors};

    fn toy(alg: Algorithm) -> (Game, LearnerState) {
        let game = simple_coordination();
        let w = PairVectors::two_player(vec![0.511, 0.489], vec![0.489, 0.511]);
        let l = LearnerState::initial(alg, &game, &w, &LearnerParams::default()).unwrap();
        (game, l)
    }

    fn ja(a: usize, b: usize) -> JointAction {
        JointAction::new(vec![a, b])
    }

    #[test]
    fn single_iteration_trace() {
        let (g, l) = toy(Algorithm::Fp);
        let t = simulate(&g, &l, 1, 0.01, 3).unwrap();
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn fp_cycle_alternates_with_first_action_in_odd_iterations() {
        let (g, l) = toy(Algorithm::Fp);
        let trace = (0..200)
            .map(|seed| simulate(&g, &l, 20, 0.01, seed).unwrap())
            .find(|t| t.steps[0].joint == ja(0, 1))
            .expect("some seed opens with (b1,a2)");
        for (t, a) in trace.actions().enumerate() {
            let expected = if t % 2 == 0 { ja(0, 1) } else { ja(1, 0) };
            assert_eq!(a, &expected, "iteration {t}");
        }
    }

    #[test]
    fn same_seed_same_trace() {
        let (g, l) = toy(Algorithm::Gfp);
        let a = simulate(&g, &l, 40, 1.0, 11).unwrap();
        let b = simulate(&g, &l, 40, 1.0, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn absorbed_trace_repeats_its_action() {
        let (g, l) = toy(Algorithm::Fp);
        for seed in 0..100 {
            let t = simulate(&g, &l, 30, 0.01, seed).unwrap();
            let first = &t.steps[0].joint;
            if first == &ja(0, 0) || first == &ja(1, 1) {
                assert!(t.actions().all(|a| a == first));
            }
        }
    }

    #[test]
    fn shapley_fp_runs_lengthen() {
        let g = shapley();
        let w = random_initial_weights(&g, 5);
        let l = LearnerState::initial(Algorithm::Fp, &g, &w, &LearnerParams::default()).unwrap();
        let t = simulate(&g, &l, 3000, 1.0, 0).unwrap();
        let mut runs = Vec::new();
        let mut len = 1;
        for k in 1..t.len() {
            if t.steps[k].joint == t.steps[k - 1].joint {
                len += 1;
            } else {
                runs.push(len);
                len = 1;
            }
        }
        assert!(runs.len() > 6);
        assert!(runs[runs.len() - 1] > runs[1] * 2, "run lengths {runs:?}");
    }

    #[test]
    fn fp_pure_nash_frequency_near_chain_value() {
        let (g, l) = toy(Algorithm::Fp);
        let r = empirical_convergence(&g, &l, 20_000, 50, 0.01, 1).unwrap();
        let nash = r.frequency_of(&[ja(0, 0)]) + r.frequency_of(&[ja(1, 1)]);
        let se = (0.1796f64 * 0.8204 / 20_000.0).sqrt();
        assert!((nash - 0.1796).abs() < 3.0 * se, "{nash}");
        assert_eq!(r.unresolved, 0);
    }

    #[test]
    fn one_joint_action_game_has_one_class() {
        let g = Game::new(vec![1, 1], vec![1.0, 1.0]).unwrap();
        let w = PairVectors::two_player(vec![1.0], vec![1.0]);
        let l = LearnerState::initial(Algorithm::Fp, &g, &w, &LearnerParams::default()).unwrap();
        let r = empirical_convergence(&g, &l, 10, 5, 1.0, 0).unwrap();
        assert_eq!(r.classes.len(), 1);
        assert_eq!(r.classes[0].frequency, 1.0);
    }

    #[test]
    fn tail_pattern_periods() {
        let cyc: Vec<_> = (0..10)
            .map(|k| if k % 2 == 0 { ja(0, 1) } else { ja(1, 0) })
            .collect();
        assert_eq!(tail_pattern(&cyc), Some(vec![ja(0, 1), ja(1, 0)]));
        let drift: Vec<_> = (0..20).map(|k| ja(k % 3, usize::from(k > 9))).collect();
        assert_eq!(tail_pattern(&drift), None);
        assert_eq!(tail_window(1), 1);
        assert_eq!(tail_window(1000), 50);
    }

    #[test]
    fn csv_layout() {
        let (g, l) = toy(Algorithm::Fp);
        let t = simulate(&g, &l, 3, 0.01, 0).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "iter,action_0,action_1,reward_0,reward_1");
        assert_eq!(lines.len(), 4);
        assert!(!text.contains('\r'));
    }

    #[test]
    fn rejects_bad_inputs() {
        let (g, l) = toy(Algorithm::Fp);
        assert!(simulate(&g, &l, 0, 1.0, 0).is_err());
        assert!(simulate(&g, &l, 5, 0.0, 0).is_err());
        assert!(empirical_convergence(&g, &l, 0, 5, 1.0, 0).is_err());
    }
}
