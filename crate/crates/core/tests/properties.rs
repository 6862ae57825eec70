//! Randomized invariants of the learners, the SCC machinery and the
//! explored chains.

use std::collections::BTreeSet;

use proptest::prelude::*;
use smcl::analysis::{analyze, tarjan, tarjan_sccs};
use smcl::catalog::{random_initial_weights, shapley, simple_coordination};
use smcl::explorer::{explore, successor, Dtmc, ExploreConfig};
use smcl::game::{
    best_response, smooth_best_response, DecisionRule, Game, JointAction, OpponentEstimates,
};
use smcl::learners::{Algorithm, LearnerParams, LearnerState, PairVectors};
use smcl::simulator::tail_pattern;

fn two_player_game(n0: usize, n1: usize) -> Game {
    Game::from_fn(vec![n0, n1], |a| {
        (0..2)
            .map(|i| ((a[0] * 7 + a[1] * 3 + i) % 5) as f64)
            .collect()
    })
    .unwrap()
}

fn weights_strategy() -> impl Strategy<Value = (usize, usize, Vec<f64>, Vec<f64>)> {
    (2usize..6, 2usize..6).prop_flat_map(|(n0, n1)| {
        (
            Just(n0),
            Just(n1),
            prop::collection::vec(0.01f64..1.0, n1),
            prop::collection::vec(0.01f64..1.0, n0),
        )
    })
}

fn history(n0: usize, n1: usize, len: usize) -> impl Strategy<Value = Vec<JointAction>> {
    prop::collection::vec(
        (0..n0, 0..n1).prop_map(|(a, b)| JointAction::new(vec![a, b])),
        0..len,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    /// Normalized counts equal the running-average recursion.
    #[test]
    fn fp_counts_match_running_average(
        (n0, n1, w01, w10) in weights_strategy(),
        seq in prop::collection::vec(any::<u32>(), 0..40),
    ) {
        let game = two_player_game(n0, n1);
        let mut learner = LearnerState::initial(
            Algorithm::Fp, &game, &PairVectors::two_player(w01, w10), &LearnerParams::default()).unwrap();
        let mut avg0 = learner.estimates(0).of(1).to_vec();
        let mut avg1 = learner.estimates(1).of(0).to_vec();
        for (t, x) in seq.iter().enumerate() {
            let a = JointAction::new(vec![*x as usize % n0, (*x as usize / 7) % n1]);
            learner = learner.observe(&game, &a).unwrap();
            let step = 1.0 / (t as f64 + 2.0);
            for (k, v) in avg0.iter_mut().enumerate() {
                *v = (1.0 - step) * *v + step * f64::from(u8::from(k == a.action(1)));
            }
            for (k, v) in avg1.iter_mut().enumerate() {
                *v = (1.0 - step) * *v + step * f64::from(u8::from(k == a.action(0)));
            }
            for (x, y) in learner.estimates(0).of(1).iter().zip(&avg0) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            for (x, y) in learner.estimates(1).of(0).iter().zip(&avg1) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1_000))]

    /// An update never reorders the actions it did not observe, and the
    /// observed action's estimate rises unless it was already certain.
    #[test]
    fn update_preserves_rank_of_unobserved_actions(
        (n0, n1, w01, w10) in weights_strategy(),
        alg in prop::sample::select(Algorithm::ALL.to_vec()),
        warmup in history(5, 5, 15),
        last in (0usize..5, 0usize..5),
    ) {
        let game = two_player_game(n0, n1);
        let mut learner = LearnerState::initial(
            alg, &game, &PairVectors::two_player(w01, w10), &LearnerParams::default()).unwrap();
        for a in &warmup {
            let a = JointAction::new(vec![a.action(0) % n0, a.action(1) % n1]);
            learner = learner.observe(&game, &a).unwrap();
        }
        let executed = JointAction::new(vec![last.0 % n0, last.1 % n1]);
        let before = learner.estimates(0).of(1).to_vec();
        let after = learner.observe(&game, &executed).unwrap().estimates(0).of(1).to_vec();
        let seen = executed.action(1);
        for a in 0..n1 {
            for b in 0..n1 {
                if a != seen && b != seen && before[a] > before[b] + 1e-12 {
                    prop_assert!(after[a] > after[b], "{alg}: order of {a} and {b} flipped");
                }
            }
        }
        if before[seen] < 1.0 - 1e-12 {
            prop_assert!(after[seen] > before[seen]);
        }
        if alg == Algorithm::Gfp {
            prop_assert!((after.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    /// Tarjan's components equal those found from the transitive closure.
    #[test]
    fn tarjan_matches_transitive_closure(
        n in 1usize..50,
        edges in prop::collection::vec((0usize..50, 0usize..50), 0..150),
    ) {
        let mut adj = vec![Vec::new(); n];
        for (a, b) in edges {
            adj[a % n].push(b % n);
        }
        let mut reach = vec![vec![false; n]; n];
        for (s, row) in reach.iter_mut().enumerate() {
            let mut stack = vec![s];
            row[s] = true;
            while let Some(v) = stack.pop() {
                for &w in &adj[v] {
                    if !row[w] {
                        row[w] = true;
                        stack.push(w);
                    }
                }
            }
        }
        let brute: BTreeSet<Vec<usize>> = (0..n)
            .map(|v| (0..n).filter(|&u| reach[v][u] && reach[u][v]).collect())
            .collect();
        let found: BTreeSet<Vec<usize>> = tarjan(n, |v| adj[v].clone())
            .into_iter()
            .map(|mut c| { c.sort_unstable(); c })
            .collect();
        prop_assert_eq!(found, brute);
    }

    /// At a tiny temperature the smooth best response concentrates on the best response.
    #[test]
    fn cold_softmax_agrees_with_best_response(
        (n0, n1, w01, _w10) in weights_strategy(),
    ) {
        let game = Game::from_fn(vec![n0, n1], |a| {
            (0..2).map(|i| ((a[0] * 13 + a[1] * 5 + 3 * i) % 11) as f64 / 11.0).collect()
        }).unwrap();
        let total: f64 = w01.iter().sum();
        let est = OpponentEstimates::two_player(0, w01.iter().map(|w| w / total).collect()).unwrap();
        let mut rewards = game.expected_rewards(0, &est);
        rewards.sort_by(|a, b| b.total_cmp(a));
        prop_assume!(rewards[0] - rewards[1] > 1e-6);
        let br = best_response(&game, 0, &est).unwrap();
        let sbr = smooth_best_response(&game, 0, &est, 1e-8).unwrap();
        let top = (0..n0).max_by(|&a, &b| sbr.prob(a).total_cmp(&sbr.prob(b))).unwrap();
        prop_assert_eq!(top, br);
        prop_assert!(sbr.prob(top) > 1.0 - 1e-9);
    }
}

/// With λ frozen the accumulated derivatives match central differences of a
/// replay at λ ± h.
#[test]
fn afffp_derivatives_match_finite_differences() {
    let game = simple_coordination();
    let w = PairVectors::two_player(vec![0.3, 0.7], vec![0.6, 0.4]);
    let frozen = |lambda0: f64| LearnerParams {
        lambda0,
        gamma: 0.0,
        ..LearnerParams::default()
    };
    let mut rng_state = 12345u64;
    for _ in 0..200 {
        let len = 1 + (rng_state % 10) as usize;
        let lambda = 0.2 + (rng_state % 700) as f64 / 1000.0;
        let moves: Vec<JointAction> = (0..len)
            .map(|_| {
                rng_state = rng_state
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                JointAction::new(vec![
                    (rng_state >> 33) as usize % 2,
                    (rng_state >> 40) as usize % 2,
                ])
            })
            .collect();
        let replay = |lam: f64| {
            let mut l = LearnerState::initial(Algorithm::Afffp, &game, &w, &frozen(lam)).unwrap();
            for a in &moves {
                l = l.observe(&game, a).unwrap();
            }
            match l {
                LearnerState::Afffp(s) => s,
                _ => unreachable!(),
            }
        };
        let h = 1e-6;
        let (mid, up, down) = (replay(lambda), replay(lambda + h), replay(lambda - h));
        for (i, j) in [(0, 1), (1, 0)] {
            assert_eq!(mid.lambda(i, j), lambda);
            for a in 0..2 {
                let fd = (up.weights.get(i, j)[a] - down.weights.get(i, j)[a]) / (2.0 * h);
                assert!(
                    (fd - mid.dkappa.get(i, j)[a]).abs() < 1e-5,
                    "dkappa {fd} vs {}",
                    mid.dkappa.get(i, j)[a]
                );
            }
            let idx = i * 2 + j;
            let fd = (up.norm(i, j) - down.norm(i, j)) / (2.0 * h);
            assert!(
                (fd - mid.dn[idx]).abs() < 1e-5,
                "dn {fd} vs {}",
                mid.dn[idx]
            );
        }
    }
}

/// The chains produced for the case-study games under every algorithm.
fn case_study_chains() -> Vec<(Game, Dtmc)> {
    let mut out = Vec::new();
    for alg in Algorithm::ALL {
        let params = LearnerParams::default();
        let simple = simple_coordination();
        let toy = PairVectors::two_player(vec![0.511, 0.489], vec![0.489, 0.511]);
        let l = LearnerState::initial(alg, &simple, &toy, &params).unwrap();
        out.push((
            simple.clone(),
            explore(&simple, l, &ExploreConfig::default()).unwrap(),
        ));
        for seed in 0..15 {
            let w = random_initial_weights(&simple, seed);
            let l = LearnerState::initial(alg, &simple, &w, &params).unwrap();
            let cfg = ExploreConfig {
                tau0: 1.0,
                ..ExploreConfig::default()
            };
            out.push((simple.clone(), explore(&simple, l, &cfg).unwrap()));
        }
        let sh = shapley();
        let equal = PairVectors::two_player(vec![1.0; 3], vec![1.0; 3]);
        let starts = std::iter::once(equal).chain((0..4).map(|s| random_initial_weights(&sh, s)));
        for w in starts {
            let l = LearnerState::initial(alg, &sh, &w, &params).unwrap();
            let cfg = ExploreConfig {
                tau0: 1.0,
                max_depth: 60,
                ..ExploreConfig::default()
            };
            out.push((sh.clone(), explore(&sh, l, &cfg).unwrap()));
        }
    }
    out
}

#[test]
fn chains_are_stochastic_and_fully_absorbing() {
    for (game, dtmc) in case_study_chains() {
        for (id, edges) in dtmc.transitions.iter().enumerate() {
            let total: f64 = edges.iter().map(|t| t.probability).sum();
            assert!((total - 1.0).abs() < 1e-9, "state {id} sums to {total}");
        }
        for s in dtmc.states.iter().filter(|s| s.depth >= 1) {
            assert!(
                s.pure_action().is_some(),
                "state {} at depth {} is mixed",
                s.id,
                s.depth
            );
        }
        let report = analyze(&game, &dtmc).unwrap();
        let reach: f64 = report.bsccs.iter().map(|b| b.reach_probability).sum();
        assert!((reach - 1.0).abs() < 1e-9, "reach sums to {reach}");
        for b in &report.bsccs {
            let mass: f64 = b.steady_state.values().sum();
            assert!((mass - 1.0).abs() < 1e-9);
            for &m in &b.scc.members {
                assert!(
                    dtmc.successors(m).all(|t| b.scc.contains(t)),
                    "bottom component leaks"
                );
            }
        }
        for scc in tarjan_sccs(&dtmc).iter().filter(|s| !s.is_bottom) {
            assert!(scc
                .members
                .iter()
                .any(|&m| dtmc.successors(m).any(|t| !scc.contains(t))));
        }
        // Every node is reachable from the initial state.
        let mut seen = vec![false; dtmc.num_nodes()];
        let mut stack = vec![dtmc.initial_id];
        seen[dtmc.initial_id] = true;
        while let Some(v) = stack.pop() {
            for w in dtmc.successors(v) {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        assert!(seen.iter().all(|&x| x), "orphan node");
    }
}

/// Deterministic best-response continuation from the learner of `state`,
/// summarised by the repeating pattern over the second half of `steps`.
/// Growing cycles span several runs there and so show no short period.
fn continuation_pattern(
    game: &Game,
    state: &smcl::ExplorationState,
    steps: usize,
) -> Option<Vec<JointAction>> {
    let mut current = state.clone();
    let mut actions = Vec::with_capacity(steps);
    for _ in 0..steps {
        let a = current.pure_action().expect("pure state");
        actions.push(a.clone());
        current = successor(&current, &a, game, DecisionRule::BestResponse).unwrap();
    }
    tail_pattern(&actions[steps / 2..])
}

#[test]
fn merges_never_change_the_long_run_behaviour() {
    for (game, dtmc) in case_study_chains() {
        for (from, edges) in dtmc.transitions.iter().enumerate().take(dtmc.states.len()) {
            for t in edges {
                if dtmc.is_sink(t.target) {
                    continue;
                }
                let target = &dtmc.states[t.target];
                let action = t.action.clone().expect("state edges carry actions");
                if target.parent_id == Some(from)
                    && target.executed_from_parent.as_ref() == Some(&action)
                {
                    continue;
                }
                let s2 = successor(
                    &dtmc.states[from],
                    &action,
                    &game,
                    DecisionRule::BestResponse,
                )
                .unwrap();
                assert_eq!(
                    s2.pure_action(),
                    target.pure_action(),
                    "merge across different actions"
                );
                let horizon = (2 * s2.depth).max(2000);
                assert_eq!(
                    continuation_pattern(&game, &s2, horizon),
                    continuation_pattern(&game, target, horizon),
                    "merge of a depth-{} state into state {} alters the limit",
                    s2.depth,
                    target.id
                );
            }
        }
    }
}

/// A pure Nash state that is a fixed point of the learner is absorbing: it
/// lies in a bottom component firing only its action, or (when an equal
/// state was generated earlier) its single edge leads into such a component.
#[test]
fn fixed_point_nash_states_are_absorbing() {
    for (game, dtmc) in case_study_chains() {
        let report = analyze(&game, &dtmc).unwrap();
        let absorbing = |id: usize, a: &JointAction| {
            report
                .bsccs
                .iter()
                .any(|b| b.scc.contains(id) && b.actions == [a.clone()])
        };
        for s in &dtmc.states {
            let Some(a) = s.pure_action() else { continue };
            if !smcl::game::is_pure_nash(&game, &a) {
                continue;
            }
            let next = successor(s, &a, &game, DecisionRule::BestResponse).unwrap();
            if next.strategy != s.strategy || dtmc.successors(s.id).any(|t| dtmc.is_sink(t)) {
                continue;
            }
            let targets: Vec<usize> = dtmc.successors(s.id).collect();
            assert!(
                absorbing(s.id, &a) || (targets.len() == 1 && absorbing(targets[0], &a)),
                "state {} firing {a} is not absorbed",
                s.id
            );
        }
    }
}

/// Reach probabilities per action set agree between the merged chain and
/// the plain expansion tree, whose leaves are classified by their tail.
#[test]
fn merging_preserves_reach_probabilities() {
    let game = simple_coordination();
    for alg in Algorithm::ALL {
        let inits = std::iter::once(PairVectors::two_player(
            vec![0.511, 0.489],
            vec![0.489, 0.511],
        ))
        .chain((0..5).map(|s| random_initial_weights(&game, s)));
        for w in inits {
            let l = LearnerState::initial(alg, &game, &w, &LearnerParams::default()).unwrap();
            let merged = explore(
                &game,
                l.clone(),
                &ExploreConfig {
                    tau0: 1.0,
                    ..Default::default()
                },
            )
            .unwrap();
            let report = analyze(&game, &merged).unwrap();
            let tree_cfg = ExploreConfig {
                tau0: 1.0,
                max_depth: 300,
                merge_enabled: false,
                ..Default::default()
            };
            let tree = explore(&game, l, &tree_cfg).unwrap();
            let mut by_class: std::collections::BTreeMap<Vec<JointAction>, f64> =
                Default::default();
            for leaf in tree.states.iter().filter(|s| s.depth == 300) {
                let mut path = Vec::new();
                let mut prob = 1.0;
                let mut cursor = leaf;
                while let Some(p) = cursor.parent_id {
                    let a = cursor.executed_from_parent.clone().unwrap();
                    prob *= tree.states[p].joint_probability(&a);
                    path.push(a);
                    cursor = &tree.states[p];
                }
                path.reverse();
                let class = tail_pattern(&path[path.len() - 50..]).expect("tree tail settles");
                *by_class.entry(class).or_default() += prob;
            }
            for (class, p) in &by_class {
                let q = report.probability_of(class);
                assert!(
                    (p - q).abs() < 1e-9,
                    "{alg}: class {class:?} tree {p} chain {q}"
                );
            }
        }
    }
}

#[test]
fn without_merging_the_chain_is_a_tree() {
    let game = shapley();
    let w = random_initial_weights(&game, 3);
    let l = LearnerState::initial(Algorithm::Gfp, &game, &w, &LearnerParams::default()).unwrap();
    let cfg = ExploreConfig {
        tau0: 1.0,
        max_depth: 12,
        merge_enabled: false,
        ..Default::default()
    };
    let dtmc = explore(&game, l, &cfg).unwrap();
    let mut indegree = vec![0; dtmc.num_nodes()];
    for (from, edges) in dtmc.transitions.iter().enumerate() {
        for t in edges {
            if !(dtmc.is_sink(t.target) && dtmc.is_sink(from)) {
                indegree[t.target] += 1;
            }
        }
    }
    assert_eq!(indegree[dtmc.initial_id], 0);
    for s in dtmc.states.iter().filter(|s| s.id != dtmc.initial_id) {
        assert_eq!(indegree[s.id], 1);
        assert!(s.depth <= 12);
    }
}
