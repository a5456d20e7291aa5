//! Test-only oracles and generators. Nothing here calls the solver or the
//! factor code it is used to check.

#![allow(dead_code)]

use std::collections::{BTreeSet, VecDeque};

use cplanner::factors::{factor_report, CriticalSet, FactorReport};
use cplanner::grid::{build_grid_mdp, CellKind, GridMap, MotionNoise, MoveAction, MoveSet};
use cplanner::mapfile::reference_map;
use cplanner::mdp::{ActionId, Mdp, MdpBuilder, StateId};
use cplanner::solver::{extract_policy, nominal_route, value_iteration, Policy, PropertySpec, Route, SolverConfig, ValueTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Solved {
    pub map: GridMap,
    pub mdp: Mdp<f64>,
    pub values: ValueTable<f64>,
    pub policy: Policy,
    pub route: Route,
    pub report: FactorReport<f64>,
}

pub fn solve_map(map: GridMap, alpha: f64) -> Solved {
    let mdp: Mdp<f64> = build_grid_mdp(&map).unwrap();
    let values = value_iteration(&mdp, &PropertySpec::min_expected_distance(&mdp), &SolverConfig::default()).unwrap();
    let policy = extract_policy(&mdp, &values);
    let route = nominal_route(&mdp, &policy, mdp.initial()).unwrap();
    let report = factor_report(&mdp, &values, &policy, alpha).unwrap();
    Solved {
        map,
        mdp,
        values,
        policy,
        route,
        report,
    }
}

pub fn reference() -> Solved {
    solve_map(reference_map(), 0.0)
}

pub fn g(i: usize) -> StateId {
    StateId(i)
}

pub fn mv(m: MoveAction) -> ActionId {
    m.action_id()
}

/// Fewest moves from each cell to the destination along mask edges (reverse BFS).
pub fn bfs_distances(map: &GridMap) -> Vec<Option<usize>> {
    let n = map.width * map.height;
    let dest = map.cells.iter().position(|c| *c == CellKind::Destination).unwrap();
    let mut dist = vec![None; n];
    dist[dest] = Some(0);
    let mut queue = VecDeque::from([dest]);
    while let Some(v) = queue.pop_front() {
        for u in 0..n {
            if dist[u].is_some() {
                continue;
            }
            let (ur, uc) = (u / map.width, u % map.width);
            let points_to_v = map.masks[u].iter().any(|m| {
                let (r, c) = match m {
                    MoveAction::North if ur > 0 => (ur - 1, uc),
                    MoveAction::South => (ur + 1, uc),
                    MoveAction::East => (ur, uc + 1),
                    MoveAction::West if uc > 0 => (ur, uc - 1),
                    _ => return false,
                };
                r * map.width + c == v
            });
            if points_to_v {
                dist[u] = Some(dist[v].unwrap() + 1);
                queue.push_back(u);
            }
        }
    }
    dist
}

/// ε by exhaustive depth-first enumeration of simple paths out of `(s, a)`:
/// the set of states met on any simple path whose interior avoids targets and
/// unreachable states, intersected with the critical set.
pub fn brute_force_epsilon(
    mdp: &Mdp<f64>,
    values: &ValueTable<f64>,
    critical: &CriticalSet<f64>,
    s: StateId,
    a: ActionId,
) -> usize {
    fn dfs(
        mdp: &Mdp<f64>,
        values: &ValueTable<f64>,
        path: &mut Vec<StateId>,
        seen: &mut BTreeSet<StateId>,
    ) {
        let cur = *path.last().unwrap();
        seen.insert(cur);
        if values.is_target(cur) || values.value(cur).unwrap().is_unreachable() {
            return;
        }
        for c in mdp.choices(cur).unwrap() {
            for o in &c.outcomes {
                if o.probability > 0.0 && !path.contains(&o.next) {
                    path.push(o.next);
                    dfs(mdp, values, path, seen);
                    path.pop();
                }
            }
        }
    }
    let mut seen = BTreeSet::new();
    let choice = mdp.choice(s, a).unwrap();
    for o in &choice.outcomes {
        if o.probability > 0.0 && o.next != s {
            let mut path = vec![s, o.next];
            dfs(mdp, values, &mut path, &mut seen);
        }
    }
    seen.into_iter()
        .filter(|x| *x != s && critical.members.contains(x))
        .map(|x| mdp.choices(x).unwrap().len())
        .sum()
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
#[allow(clippy::needless_range_loop)]
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|i, j| a[*i][col].abs().partial_cmp(&a[*j][col].abs()).unwrap()).unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Exact expected cost-to-target of a deterministic policy from `start`, or
/// `None` when the target is not reached almost surely.
pub fn exact_policy_cost(mdp: &Mdp<f64>, choice: &[Option<ActionId>], start: StateId) -> Option<f64> {
    let succ = |s: StateId| -> Vec<(StateId, f64, f64)> {
        match choice[s.0] {
            Some(a) if !mdp.is_target(s) => mdp
                .choice(s, a)
                .unwrap()
                .outcomes
                .iter()
                .filter(|o| o.probability > 0.0)
                .map(|o| (o.next, o.probability, o.reward))
                .collect(),
            _ => Vec::new(),
        }
    };
    // States reachable from `start` under the policy.
    let mut reach = BTreeSet::from([start]);
    let mut stack = vec![start];
    while let Some(s) = stack.pop() {
        for (n, _, _) in succ(s) {
            if reach.insert(n) {
                stack.push(n);
            }
        }
    }
    // Every reachable state must itself be able to reach a target.
    for &s in &reach {
        let mut seen = BTreeSet::from([s]);
        let mut st = vec![s];
        let mut ok = false;
        while let Some(x) = st.pop() {
            if mdp.is_target(x) {
                ok = true;
                break;
            }
            for (n, _, _) in succ(x) {
                if seen.insert(n) {
                    st.push(n);
                }
            }
        }
        if !ok {
            return None;
        }
    }
    let idx: Vec<StateId> = reach.iter().copied().collect();
    let pos = |s: StateId| idx.iter().position(|x| *x == s).unwrap();
    let n = idx.len();
    let mut a = vec![vec![0.0; n]; n];
    let mut b = vec![0.0; n];
    for (i, &s) in idx.iter().enumerate() {
        a[i][i] = 1.0;
        if mdp.is_target(s) {
            continue;
        }
        for (next, p, r) in succ(s) {
            b[i] += p * r;
            a[i][pos(next)] -= p;
        }
    }
    Some(solve_linear(a, b)[pos(start)])
}

/// Best start-state cost over every memoryless deterministic policy.
pub fn exhaustive_best_cost(mdp: &Mdp<f64>) -> Option<f64> {
    let states: Vec<StateId> = mdp.states().iter().copied().filter(|s| !mdp.choices(*s).unwrap().is_empty()).collect();
    let options: Vec<Vec<ActionId>> = states.iter().map(|s| mdp.enabled_actions(*s).unwrap()).collect();
    let mut counter = vec![0usize; states.len()];
    let mut best: Option<f64> = None;
    loop {
        let mut choice = vec![None; mdp.capacity()];
        for (k, s) in states.iter().enumerate() {
            choice[s.0] = Some(options[k][counter[k]]);
        }
        if let Some(v) = exact_policy_cost(mdp, &choice, mdp.initial()) {
            best = Some(best.map_or(v, |b: f64| b.min(v)));
        }
        let mut k = 0;
        loop {
            if k == states.len() {
                return best;
            }
            counter[k] += 1;
            if counter[k] < options[k].len() {
                break;
            }
            counter[k] = 0;
            k += 1;
        }
    }
}

/// Random sparse MDP with positive rewards; state 0 is initial, the last
/// state is the target.
pub fn random_mdp(rng: &mut ChaCha8Rng, max_states: usize) -> Mdp<f64> {
    let n = rng.random_range(3..=max_states);
    let actions = ["a", "b", "c"];
    let mut b = MdpBuilder::new(actions);
    for i in 0..n {
        b.state(StateId(i));
    }
    b.initial(StateId(0)).target(StateId(n - 1));
    for s in 0..n - 1 {
        let k = rng.random_range(0..=3usize);
        for a in 0..k {
            let m = rng.random_range(1..=3usize.min(n));
            let mut succ: Vec<usize> = Vec::new();
            while succ.len() < m {
                let x = rng.random_range(0..n);
                if !succ.contains(&x) {
                    succ.push(x);
                }
            }
            let weights: Vec<f64> = succ.iter().map(|_| rng.random_range(0.1..1.0)).collect();
            let total: f64 = weights.iter().sum();
            let outcomes: Vec<(StateId, f64, f64)> = succ
                .iter()
                .zip(&weights)
                .map(|(x, w)| (StateId(*x), w / total, rng.random_range(0.5..2.0)))
                .collect();
            b.choice(StateId(s), ActionId(a), outcomes);
        }
    }
    b.build().unwrap()
}

/// Random grid map up to `max_side` × `max_side` whose start reaches the
/// destination; default masks, 20% buildings, noise in [0.6, 1].
pub fn random_grid(rng: &mut ChaCha8Rng, max_side: usize) -> GridMap {
    loop {
        let width = rng.random_range(2..=max_side);
        let height = rng.random_range(2..=max_side);
        let n = width * height;
        let mut cells: Vec<CellKind> = (0..n)
            .map(|_| match rng.random_range(0..10) {
                0 | 1 => CellKind::Building,
                2 => CellKind::Highway,
                _ => CellKind::UrbanRoad,
            })
            .collect();
        let start = rng.random_range(0..n);
        let dest = rng.random_range(0..n);
        if start == dest {
            continue;
        }
        cells[start] = CellKind::Start;
        cells[dest] = CellKind::Destination;
        let p = if rng.random_bool(0.2) { 1.0 } else { rng.random_range(0.6..1.0) };
        let mut map = GridMap {
            width,
            height,
            cells,
            masks: vec![MoveSet::EMPTY; n],
            noise: MotionNoise { p_success: p },
            start,
        };
        for i in 0..n {
            map.masks[i] = map.default_mask(i);
        }
        if bfs_distances(&map)[start].is_some() {
            return map;
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
