//! Bottom strongly connected components, absorption probabilities,
//! stationary distributions and equilibrium classification.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explorer::Dtmc;
use crate::game::{is_pareto_efficient_pure, is_pure_nash, Game, JointAction, TIE_TOLERANCE};

/// Components up to this many states are solved by dense LU factorization.
pub const DENSE_LIMIT: usize = 2000;

const ITERATIVE_TOLERANCE: f64 = 1e-12;
const ITERATION_CAP: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scc {
    /// Member node ids in increasing order.
    pub members: Vec<usize>,
    pub is_bottom: bool,
}

impl Scc {
    pub fn contains(&self, id: usize) -> bool {
        self.members.binary_search(&id).is_ok()
    }
}

/// Iterative Tarjan over nodes `0..n`. Components come out in reverse
/// topological order: every component precedes the components that can reach it.
pub fn tarjan<I, F>(n: usize, mut successors: F) -> Vec<Vec<usize>>
where
    F: FnMut(usize) -> I,
    I: IntoIterator<Item = usize>,
{
    const UNVISITED: usize = usize::MAX;
    let mut index = vec![UNVISITED; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut out = Vec::new();
    let mut counter = 0;
    let adjacency: Vec<Vec<usize>> = (0..n)
        .map(|v| successors(v).into_iter().collect())
        .collect();

    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        // Frames of (node, position of the next successor to look at).
        let mut frames = vec![(root, 0usize)];
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut pos)) = frames.last_mut() {
            if let Some(&w) = adjacency[v].get(*pos) {
                *pos += 1;
                if index[w] == UNVISITED {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    frames.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            frames.pop();
            if let Some(&(parent, _)) = frames.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut component = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack holds the component");
                    on_stack[w] = false;
                    component.push(w);
                    if w == v {
                        break;
                    }
                }
                component.sort_unstable();
                out.push(component);
            }
        }
    }
    out
}

/// Strongly connected components of the chain, in reverse topological order.
pub fn tarjan_sccs(dtmc: &Dtmc) -> Vec<Scc> {
    let n = dtmc.num_nodes();
    let components = tarjan(n, |v| dtmc.successors(v).collect::<Vec<_>>());
    let mut comp_of = vec![0; n];
    for (c, members) in components.iter().enumerate() {
        for &m in members {
            comp_of[m] = c;
        }
    }
    components
        .into_iter()
        .enumerate()
        .map(|(c, members)| {
            let is_bottom = members
                .iter()
                .all(|&m| dtmc.successors(m).all(|t| comp_of[t] == c));
            Scc { members, is_bottom }
        })
        .collect()
}

fn require_bottom(scc: &Scc) -> Result<()> {
    if scc.is_bottom {
        Ok(())
    } else {
        Err(Error::Contract(format!(
            "component {:?} is not bottom",
            scc.members
        )))
    }
}

/// Joint actions fired with positive probability by some member of a bottom component.
pub fn bscc_actions(dtmc: &Dtmc, scc: &Scc) -> Result<BTreeSet<JointAction>> {
    require_bottom(scc)?;
    let mut out = BTreeSet::new();
    for &id in &scc.members {
        let Some(state) = dtmc.states.get(id) else {
            continue;
        };
        let supports: Vec<Vec<usize>> = state
            .strategy
            .iter()
            .map(|d| (0..d.len()).filter(|&a| d.prob(a) > 0.0).collect())
            .collect();
        let mut current = vec![0; supports.len()];
        collect_products(&supports, 0, &mut current, &mut out);
    }
    Ok(out)
}

fn collect_products(
    supports: &[Vec<usize>],
    player: usize,
    current: &mut Vec<usize>,
    out: &mut BTreeSet<JointAction>,
) {
    if player == supports.len() {
        out.insert(JointAction::new(current.clone()));
        return;
    }
    for &a in &supports[player] {
        current[player] = a;
        collect_products(supports, player + 1, current, out);
    }
}

/// Probability of eventually entering each of `bsccs` from the initial state.
///
/// Mass is pushed forward from the initial state one component at a time in
/// topological order, so each transient component is solved once for the
/// expected number of visits to its members.
pub fn reach_probabilities(dtmc: &Dtmc, bsccs: &[Scc]) -> Result<Vec<f64>> {
    reach_probabilities_with(dtmc, bsccs, DENSE_LIMIT)
}

fn reach_probabilities_with(dtmc: &Dtmc, bsccs: &[Scc], dense_limit: usize) -> Result<Vec<f64>> {
    let n = dtmc.num_nodes();
    let components = tarjan_sccs(dtmc);
    let mut comp_of = vec![0; n];
    for (c, scc) in components.iter().enumerate() {
        for &m in &scc.members {
            comp_of[m] = c;
        }
    }
    let mut position = vec![usize::MAX; n];
    let mut mass = vec![0.0; n];
    mass[dtmc.initial_id] = 1.0;
    let mut absorbed = vec![0.0; components.len()];

    for (c, scc) in components.iter().enumerate().rev() {
        let total_in: f64 = scc.members.iter().map(|&m| mass[m]).sum();
        if total_in == 0.0 {
            continue;
        }
        if scc.is_bottom {
            absorbed[c] = total_in;
            continue;
        }
        for (k, &m) in scc.members.iter().enumerate() {
            position[m] = k;
        }
        let inflow: Vec<f64> = scc.members.iter().map(|&m| mass[m]).collect();
        let visits = expected_visits(dtmc, scc, &position, &inflow, dense_limit)?;
        for (k, &s) in scc.members.iter().enumerate() {
            for t in &dtmc.transitions[s] {
                if comp_of[t.target] != c {
                    mass[t.target] += visits[k] * t.probability;
                }
            }
        }
    }

    let mut out = Vec::with_capacity(bsccs.len());
    let mut covered = vec![false; components.len()];
    for b in bsccs {
        let Some(&first) = b.members.first() else {
            return Err(Error::Contract("empty component".into()));
        };
        let c = comp_of[first];
        if components[c].members != b.members || !components[c].is_bottom {
            return Err(Error::Contract(format!(
                "{:?} is not a bottom component of this chain",
                b.members
            )));
        }
        covered[c] = true;
        out.push(absorbed[c]);
    }
    if let Some(c) = (0..components.len()).find(|&c| components[c].is_bottom && !covered[c]) {
        return Err(Error::Contract(format!(
            "bottom component {:?} missing from the request",
            components[c].members
        )));
    }
    Ok(out)
}

/// Solves `v = inflow + v T_CC` for the expected visits to each member of a
/// transient component.
fn expected_visits(
    dtmc: &Dtmc,
    scc: &Scc,
    position: &[usize],
    inflow: &[f64],
    dense_limit: usize,
) -> Result<Vec<f64>> {
    let size = scc.members.len();
    let inner = |s: usize| {
        dtmc.transitions[s]
            .iter()
            .filter(|t| position[t.target] < size && scc.contains(t.target))
    };
    if size == 1 {
        let s = scc.members[0];
        let stay: f64 = inner(s).map(|t| t.probability).sum();
        return Ok(vec![inflow[0] / (1.0 - stay)]);
    }
    if size <= dense_limit {
        let mut a = DMatrix::<f64>::identity(size, size);
        for (k, &s) in scc.members.iter().enumerate() {
            for t in inner(s) {
                a[(position[t.target], k)] -= t.probability;
            }
        }
        let b = DVector::from_column_slice(inflow);
        return a
            .lu()
            .solve(&b)
            .map(|v| v.iter().copied().collect())
            .ok_or(Error::Numeric {
                iterations: 0,
                residual: f64::INFINITY,
            });
    }
    // Gauss-Seidel on the transposed system, using incoming edges per member.
    let mut incoming: Vec<Vec<(usize, f64)>> = vec![Vec::new(); size];
    for (k, &s) in scc.members.iter().enumerate() {
        for t in inner(s) {
            incoming[position[t.target]].push((k, t.probability));
        }
    }
    let mut v = inflow.to_vec();
    let mut residual = f64::INFINITY;
    for _ in 0..ITERATION_CAP {
        residual = 0.0;
        for k in 0..size {
            let next = inflow[k] + incoming[k].iter().map(|&(s, p)| v[s] * p).sum::<f64>();
            residual = f64::max(residual, (next - v[k]).abs());
            v[k] = next;
        }
        if residual < ITERATIVE_TOLERANCE {
            return Ok(v);
        }
    }
    Err(Error::Numeric {
        iterations: ITERATION_CAP,
        residual,
    })
}

/// Stationary distribution of the chain restricted to a bottom component.
pub fn steady_state(dtmc: &Dtmc, scc: &Scc) -> Result<BTreeMap<usize, f64>> {
    steady_state_with(dtmc, scc, DENSE_LIMIT)
}

fn steady_state_with(dtmc: &Dtmc, scc: &Scc, dense_limit: usize) -> Result<BTreeMap<usize, f64>> {
    require_bottom(scc)?;
    let size = scc.members.len();
    let pos = |id: usize| scc.members.binary_search(&id).ok();
    let deterministic_cycle = scc.members.iter().all(|&s| dtmc.transitions[s].len() == 1);
    let pi = if size == 1 {
        vec![1.0]
    } else if deterministic_cycle {
        // A bottom component where every member has a single edge is one
        // simple cycle, visited uniformly.
        vec![1.0 / size as f64; size]
    } else if size <= dense_limit {
        // Rows: balance equations for members 1.., then the normalization row.
        let mut a = DMatrix::<f64>::zeros(size, size);
        for (k, &s) in scc.members.iter().enumerate() {
            a[(k, k)] -= 1.0;
            for t in &dtmc.transitions[s] {
                if let Some(j) = pos(t.target) {
                    a[(j, k)] += t.probability;
                }
            }
        }
        for k in 0..size {
            a[(0, k)] = 1.0;
        }
        let mut b = DVector::zeros(size);
        b[0] = 1.0;
        a.lu()
            .solve(&b)
            .map(|v| v.iter().copied().collect())
            .ok_or(Error::Numeric {
                iterations: 0,
                residual: f64::INFINITY,
            })?
    } else {
        lazy_power_iteration(dtmc, scc)?
    };
    Ok(scc.members.iter().copied().zip(pi).collect())
}

/// Power iteration on `(I + T) / 2`, which shares the stationary distribution
/// with `T` but is aperiodic.
fn lazy_power_iteration(dtmc: &Dtmc, scc: &Scc) -> Result<Vec<f64>> {
    let size = scc.members.len();
    let mut pi = vec![1.0 / size as f64; size];
    let mut residual = f64::INFINITY;
    for _ in 0..ITERATION_CAP {
        let mut next: Vec<f64> = pi.iter().map(|p| 0.5 * p).collect();
        for (k, &s) in scc.members.iter().enumerate() {
            for t in &dtmc.transitions[s] {
                if let Ok(j) = scc.members.binary_search(&t.target) {
                    next[j] += 0.5 * pi[k] * t.probability;
                }
            }
        }
        residual = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        pi = next;
        if residual < ITERATIVE_TOLERANCE {
            return Ok(pi);
        }
    }
    Err(Error::Numeric {
        iterations: ITERATION_CAP,
        residual,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    PureNashPareto,
    PureNashNonPareto,
    /// A cycle in which every joint action leaves some player empty-handed
    /// although another joint action would pay everyone more.
    RewardlessCycle,
    MixedCycle,
    Truncation,
}

impl Classification {
    pub fn name(self) -> &'static str {
        match self {
            Classification::PureNashPareto => "pure-nash-pareto",
            Classification::PureNashNonPareto => "pure-nash-non-pareto",
            Classification::RewardlessCycle => "rewardless-cycle",
            Classification::MixedCycle => "mixed-cycle",
            Classification::Truncation => "truncation",
        }
    }
}

pub fn classify(game: &Game, dtmc: &Dtmc, scc: &Scc) -> Result<Classification> {
    require_bottom(scc)?;
    if scc.members.iter().any(|&m| dtmc.is_sink(m)) {
        return Ok(Classification::Truncation);
    }
    let actions = bscc_actions(dtmc, scc)?;
    if actions.len() == 1 {
        let a = actions.iter().next().expect("one action");
        if is_pure_nash(game, a) {
            return Ok(if is_pareto_efficient_pure(game, a) {
                Classification::PureNashPareto
            } else {
                Classification::PureNashNonPareto
            });
        }
    }
    let players = game.num_players();
    let each_leaves_someone_empty = actions
        .iter()
        .all(|a| (0..players).any(|i| game.reward(i, a).abs() <= TIE_TOLERANCE));
    let dominated = (0..game.num_joint_actions()).any(|flat| {
        actions.iter().all(|a| {
            (0..players).all(|i| game.reward_flat(i, flat) > game.reward(i, a) + TIE_TOLERANCE)
        })
    });
    Ok(if each_leaves_someone_empty && dominated {
        Classification::RewardlessCycle
    } else {
        Classification::MixedCycle
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BsccReport {
    pub scc: Scc,
    pub actions: Vec<JointAction>,
    pub classification: Classification,
    pub reach_probability: f64,
    pub steady_state: BTreeMap<usize, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub bsccs: Vec<BsccReport>,
    pub convergence_probability: f64,
}

impl AnalysisReport {
    /// Reports with positive reach probability and the given classification.
    pub fn with_class(&self, class: Classification) -> impl Iterator<Item = &BsccReport> {
        self.bsccs.iter().filter(move |b| b.classification == class)
    }

    /// Combined reach probability of all components firing exactly `actions`.
    pub fn probability_of(&self, actions: &[JointAction]) -> f64 {
        let mut want = actions.to_vec();
        want.sort();
        self.bsccs
            .iter()
            .filter(|b| b.actions == want)
            .map(|b| b.reach_probability)
            .sum()
    }
}

/// Full analysis: one [`BsccReport`] per bottom component, ordered by
/// smallest member id.
pub fn analyze(game: &Game, dtmc: &Dtmc) -> Result<AnalysisReport> {
    let mut bottoms: Vec<Scc> = tarjan_sccs(dtmc)
        .into_iter()
        .filter(|s| s.is_bottom)
        .collect();
    bottoms.sort_by_key(|s| s.members[0]);
    let reach = reach_probabilities(dtmc, &bottoms)?;
    let mut bsccs = Vec::with_capacity(bottoms.len());
    for (scc, reach_probability) in bottoms.into_iter().zip(reach) {
        let classification = classify(game, dtmc, &scc)?;
        let actions = bscc_actions(dtmc, &scc)?.into_iter().collect();
        let steady_state = if classification == Classification::Truncation {
            scc.members
                .iter()
                .map(|&m| (m, 1.0 / scc.members.len() as f64))
                .collect()
        } else {
            steady_state(dtmc, &scc)?
        };
        bsccs.push(BsccReport {
            scc,
            actions,
            classification,
            reach_probability,
            steady_state,
        });
    }
    let convergence_probability = bsccs
        .iter()
        .filter(|b| b.classification == Classification::PureNashPareto)
        .map(|b| b.reach_probability)
        .sum();
    Ok(AnalysisReport {
        bsccs,
        convergence_probability,
    })
}

/// Probability of absorption into a Pareto-efficient pure Nash equilibrium.
pub fn convergence_probability(game: &Game, dtmc: &Dtmc) -> Result<f64> {
    Ok(analyze(game, dtmc)?.convergence_probability)
}
