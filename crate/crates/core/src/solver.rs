//! Property values by value iteration, optimal policies and nominal routes.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{ActionId, Choice, Mdp, StateId};
use crate::scalar::Scalar;
use crate::value::ExtValue;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropertyKind {
    ExpectedCumulativeReward,
    ReachabilityProbability,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Minimize,
    Maximize,
}

/// Which quantity `ρ_s` denotes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertySpec {
    pub kind: PropertyKind,
    pub direction: Direction,
    pub targets: BTreeSet<StateId>,
}

impl PropertySpec {
    /// Minimum expected cumulative cost to reach the model's targets.
    pub fn min_expected_distance<T: Scalar>(mdp: &Mdp<T>) -> Self {
        PropertySpec {
            kind: PropertyKind::ExpectedCumulativeReward,
            direction: Direction::Minimize,
            targets: mdp.targets().clone(),
        }
    }

    pub fn reachability<T: Scalar>(mdp: &Mdp<T>, direction: Direction) -> Self {
        PropertySpec {
            kind: PropertyKind::ReachabilityProbability,
            direction,
            targets: mdp.targets().clone(),
        }
    }

    fn validate<T: Scalar>(&self, mdp: &Mdp<T>) -> Result<()> {
        if self.targets.is_empty() {
            return Err(Error::InvalidArgument("property has no target states".into()));
        }
        if let Some(t) = self.targets.iter().find(|t| !mdp.contains(**t)) {
            return Err(Error::UnknownState(*t));
        }
        if self.kind == PropertyKind::ExpectedCumulativeReward && self.direction == Direction::Maximize {
            return Err(Error::InvalidArgument(
                "maximal undiscounted cumulative reward is unbounded in general; minimize instead".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tolerance: 1e-6,
            max_iterations: 100_000,
        }
    }
}

/// Converged property values, indexed by state id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ValueTable<T: Scalar> {
    pub property: PropertySpec,
    values: Vec<ExtValue<T>>,
    pub residual: T,
    pub iterations: usize,
}

impl<T: Scalar> ValueTable<T> {
    /// A table from externally supplied values (for instance, hand-computed
    /// figures). States not listed are `Unreachable`.
    pub fn from_values<I>(mdp: &Mdp<T>, property: PropertySpec, values: I) -> Result<Self>
    where
        I: IntoIterator<Item = (StateId, ExtValue<T>)>,
    {
        let mut table = vec![ExtValue::Unreachable; mdp.capacity()];
        for (s, v) in values {
            if !mdp.contains(s) {
                return Err(Error::UnknownState(s));
            }
            table[s.0] = v;
        }
        Ok(ValueTable {
            property,
            values: table,
            residual: T::zero(),
            iterations: 0,
        })
    }

    pub fn value(&self, s: StateId) -> Result<ExtValue<T>> {
        self.values.get(s.0).copied().ok_or(Error::UnknownState(s))
    }

    /// Value lookup for ids already known to be states.
    pub(crate) fn get(&self, s: StateId) -> ExtValue<T> {
        self.values[s.0]
    }

    pub fn is_target(&self, s: StateId) -> bool {
        self.property.targets.contains(&s)
    }

    /// `(state, ρ_s)` over the model's states.
    pub fn iter<'a>(&'a self, mdp: &'a Mdp<T>) -> impl Iterator<Item = (StateId, ExtValue<T>)> + 'a {
        mdp.states().iter().map(move |&s| (s, self.values[s.0]))
    }

    /// One Bellman backup of state `s` against this table.
    pub fn backup(&self, mdp: &Mdp<T>, s: StateId) -> Result<ExtValue<T>> {
        if self.is_target(s) {
            return Ok(self.target_value());
        }
        let choices = mdp.choices(s)?;
        let qs = choices.iter().map(|c| q_value(self.property.kind, c, &self.values));
        Ok(optimum(self.property.direction, qs).unwrap_or(self.dead_value()))
    }

    fn target_value(&self) -> ExtValue<T> {
        match self.property.kind {
            PropertyKind::ExpectedCumulativeReward => ExtValue::zero(),
            PropertyKind::ReachabilityProbability => ExtValue::Finite(T::one()),
        }
    }

    fn dead_value(&self) -> ExtValue<T> {
        match self.property.kind {
            PropertyKind::ExpectedCumulativeReward => ExtValue::Unreachable,
            PropertyKind::ReachabilityProbability => ExtValue::zero(),
        }
    }
}

/// `Σ δ·(r + ρ')` for costs, `Σ δ·ρ'` for probabilities.
fn q_value<T: Scalar>(kind: PropertyKind, choice: &Choice<T>, values: &[ExtValue<T>]) -> ExtValue<T> {
    match kind {
        PropertyKind::ExpectedCumulativeReward => ExtValue::weighted_sum(
            choice
                .support()
                .map(|o| (o.probability, ExtValue::Finite(o.reward) + values[o.next.0])),
        ),
        PropertyKind::ReachabilityProbability => {
            ExtValue::weighted_sum(choice.support().map(|o| (o.probability, values[o.next.0])))
        }
    }
}

fn optimum<T: Scalar, I: IntoIterator<Item = ExtValue<T>>>(direction: Direction, qs: I) -> Option<ExtValue<T>> {
    qs.into_iter().reduce(|a, b| match direction {
        Direction::Minimize => a.min(b),
        Direction::Maximize => a.max(b),
    })
}

/// States that can reach a target with positive probability.
fn can_reach<T: Scalar>(mdp: &Mdp<T>, targets: &BTreeSet<StateId>) -> Vec<bool> {
    let mut reach = vec![false; mdp.capacity()];
    for t in targets {
        reach[t.0] = true;
    }
    let mut changed = true;
    while changed {
        changed = false;
        for &s in mdp.states() {
            if reach[s.0] {
                continue;
            }
            let hit = mdp.choices(s).unwrap().iter().any(|c| c.support().any(|o| reach[o.next.0]));
            if hit {
                reach[s.0] = true;
                changed = true;
            }
        }
    }
    reach
}

/// States from which some policy reaches a target with probability one.
fn almost_sure<T: Scalar>(mdp: &Mdp<T>, targets: &BTreeSet<StateId>) -> Vec<bool> {
    let mut keep: Vec<bool> = (0..mdp.capacity()).map(|i| mdp.contains(StateId(i))).collect();
    loop {
        let mut reach = vec![false; mdp.capacity()];
        for t in targets {
            reach[t.0] = true;
        }
        let mut changed = true;
        while changed {
            changed = false;
            for &s in mdp.states() {
                if reach[s.0] || !keep[s.0] || targets.contains(&s) {
                    continue;
                }
                let ok = mdp.choices(s).unwrap().iter().any(|c| {
                    c.support().all(|o| keep[o.next.0]) && c.support().any(|o| reach[o.next.0])
                });
                if ok {
                    reach[s.0] = true;
                    changed = true;
                }
            }
        }
        if reach == keep {
            return keep;
        }
        keep = reach;
    }
}

/// States from which every policy reaches a target with positive probability.
fn forced_positive<T: Scalar>(mdp: &Mdp<T>, targets: &BTreeSet<StateId>) -> Vec<bool> {
    let mut reach = vec![false; mdp.capacity()];
    for t in targets {
        reach[t.0] = true;
    }
    let mut changed = true;
    while changed {
        changed = false;
        for &s in mdp.states() {
            if reach[s.0] {
                continue;
            }
            let choices = mdp.choices(s).unwrap();
            if !choices.is_empty() && choices.iter().all(|c| c.support().any(|o| reach[o.next.0])) {
                reach[s.0] = true;
                changed = true;
            }
        }
    }
    reach
}

/// Computes `ρ_s` for every state.
///
/// Cost properties: targets are pinned at 0 and states that cannot reach the
/// targets almost surely under any policy are pinned `Unreachable` before
/// iterating; the remaining states are iterated with only the actions that
/// stay inside the almost-sure region. Probability properties pin targets at
/// 1 and states with no chance of reaching them at 0.
pub fn value_iteration<T: Scalar>(mdp: &Mdp<T>, property: &PropertySpec, cfg: &SolverConfig) -> Result<ValueTable<T>> {
    property.validate(mdp)?;
    if cfg.tolerance.is_nan() || cfg.tolerance <= 0.0 {
        return Err(Error::InvalidArgument(format!("tolerance {} must be positive", cfg.tolerance)));
    }
    let targets = &property.targets;
    let tolerance = T::lit(cfg.tolerance);
    let n = mdp.capacity();

    let mut table = ValueTable {
        property: property.clone(),
        values: vec![ExtValue::Unreachable; n],
        residual: T::zero(),
        iterations: 0,
    };

    // Per state, the choices to iterate over; `None` marks pinned states.
    let mut active: Vec<Option<Vec<&Choice<T>>>> = vec![None; n];
    match property.kind {
        PropertyKind::ExpectedCumulativeReward => {
            let sure = almost_sure(mdp, targets);
            for &s in mdp.states() {
                if targets.contains(&s) {
                    table.values[s.0] = ExtValue::zero();
                } else if sure[s.0] {
                    table.values[s.0] = ExtValue::zero();
                    let allowed = mdp
                        .choices(s)?
                        .iter()
                        .filter(|c| c.support().all(|o| sure[o.next.0]))
                        .collect();
                    active[s.0] = Some(allowed);
                }
            }
        }
        PropertyKind::ReachabilityProbability => {
            let positive = match property.direction {
                Direction::Maximize => can_reach(mdp, targets),
                Direction::Minimize => forced_positive(mdp, targets),
            };
            for &s in mdp.states() {
                if targets.contains(&s) {
                    table.values[s.0] = ExtValue::Finite(T::one());
                } else {
                    table.values[s.0] = ExtValue::zero();
                    if positive[s.0] {
                        active[s.0] = Some(mdp.choices(s)?.iter().collect());
                    }
                }
            }
        }
    }

    let mut next = table.values.clone();
    loop {
        let mut residual = T::zero();
        for &s in mdp.states() {
            let Some(choices) = &active[s.0] else { continue };
            let q = choices.iter().map(|c| q_value(property.kind, c, &table.values));
            let v = optimum(property.direction, q).unwrap_or_else(|| table.dead_value());
            if let Some(d) = v.distance(&table.values[s.0]) {
                residual = residual.max(d);
            }
            next[s.0] = v;
        }
        std::mem::swap(&mut table.values, &mut next);
        table.iterations += 1;
        table.residual = residual;
        if residual <= tolerance {
            return Ok(table);
        }
        if table.iterations >= cfg.max_iterations {
            return Err(Error::NotConverged {
                iterations: table.iterations,
                residual: residual.as_f64(),
            });
        }
    }
}

/// Memoryless deterministic policy; `None` on targets and action-less states.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Policy {
    choice: Vec<Option<ActionId>>,
}

impl Policy {
    pub fn from_choices(choice: Vec<Option<ActionId>>) -> Self {
        Policy { choice }
    }

    pub fn action(&self, s: StateId) -> Option<ActionId> {
        self.choice.get(s.0).copied().flatten()
    }

    /// `(state, action)` for every state with a defined choice.
    pub fn iter(&self) -> impl Iterator<Item = (StateId, ActionId)> + '_ {
        self.choice
            .iter()
            .enumerate()
            .filter_map(|(i, a)| a.map(|a| (StateId(i), a)))
    }
}

/// Picks, in every non-target state, the action whose backup attains the
/// optimum; near-ties go to the smallest action index.
pub fn extract_policy<T: Scalar>(mdp: &Mdp<T>, values: &ValueTable<T>) -> Policy {
    let mut choice = vec![None; mdp.capacity()];
    let tol = T::tie_tolerance();
    for &s in mdp.states() {
        if values.is_target(s) || mdp.is_target(s) {
            continue;
        }
        let choices = mdp.choices(s).expect("state of this model");
        let qs: Vec<ExtValue<T>> = choices
            .iter()
            .map(|c| q_value(values.property.kind, c, &values.values))
            .collect();
        let Some(best) = optimum(values.property.direction, qs.iter().copied()) else {
            continue;
        };
        let pick = qs
            .iter()
            .position(|q| match (q, &best) {
                (ExtValue::Finite(a), ExtValue::Finite(b)) => (*a - *b).abs() <= tol * (T::one() + b.abs()),
                _ => q == &best,
            })
            .expect("optimum is attained");
        choice[s.0] = Some(choices[pick].action);
    }
    Policy { choice }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteStep {
    pub state: StateId,
    pub action: ActionId,
}

/// Most-likely trajectory under a policy.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Route {
    pub steps: Vec<RouteStep>,
    pub terminal: StateId,
}

impl Route {
    pub fn position(&self, s: StateId) -> Option<usize> {
        self.steps.iter().position(|st| st.state == s)
    }
}

/// Follows the policy from `from`, always moving to the most likely successor
/// other than the current state (smallest id on ties), until a target.
pub fn nominal_route<T: Scalar>(mdp: &Mdp<T>, policy: &Policy, from: StateId) -> Result<Route> {
    let limit = mdp.num_states();
    let mut steps = Vec::new();
    let mut s = from;
    if !mdp.contains(s) {
        return Err(Error::UnknownState(s));
    }
    while !mdp.is_target(s) {
        if steps.len() >= limit {
            return Err(Error::Route {
                state: s,
                reason: format!("no target reached within {limit} steps"),
            });
        }
        let action = policy.action(s).ok_or_else(|| Error::Route {
            state: s,
            reason: "policy defines no action".into(),
        })?;
        let choice = mdp.choice(s, action)?;
        let next = choice
            .support()
            .filter(|o| o.next != s)
            .max_by(|a, b| {
                a.probability
                    .partial_cmp(&b.probability)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(b.next.cmp(&a.next))
            })
            .map(|o| o.next)
            .ok_or_else(|| Error::Route {
                state: s,
                reason: "policy action makes no progress".into(),
            })?;
        steps.push(RouteStep { state: s, action });
        s = next;
    }
    Ok(Route { steps, terminal: s })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::MdpBuilder;

    fn chain(p: f64) -> Mdp<f64> {
        let mut b = MdpBuilder::new(["go"]);
        b.state(StateId(0)).state(StateId(1)).initial(StateId(0)).target(StateId(1));
        b.choice(StateId(0), ActionId(0), [(StateId(1), p, 1.0), (StateId(0), 1.0 - p, 1.0)]);
        b.build().unwrap()
    }

    #[test]
    fn geometric_expectation() {
        let m = chain(0.9);
        let t = value_iteration(&m, &PropertySpec::min_expected_distance(&m), &SolverConfig::default()).unwrap();
        let v = t.value(StateId(0)).unwrap().finite().unwrap();
        assert!((v - 1.0 / 0.9).abs() < 1e-6, "{v}");
        assert_eq!(t.value(StateId(1)).unwrap(), ExtValue::zero());
    }

    #[test]
    fn non_convergence_reports_residual() {
        let m = chain(0.01);
        let cfg = SolverConfig {
            tolerance: 1e-9,
            max_iterations: 5,
        };
        match value_iteration(&m, &PropertySpec::min_expected_distance(&m), &cfg) {
            Err(Error::NotConverged { iterations: 5, residual }) => assert!(residual > 0.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn improper_loop_is_unreachable() {
        // Action 0 loops forever, action 1 gambles on a dead end.
        let mut b = MdpBuilder::new(["stay", "gamble"]);
        for i in 0..3 {
            b.state(StateId(i));
        }
        b.initial(StateId(0)).target(StateId(1));
        b.choice(StateId(0), ActionId(0), [(StateId(0), 1.0, 1.0)]);
        b.choice(StateId(0), ActionId(1), [(StateId(1), 0.5, 1.0), (StateId(2), 0.5, 1.0)]);
        let m = b.build().unwrap();
        let t = value_iteration(&m, &PropertySpec::min_expected_distance(&m), &SolverConfig::default()).unwrap();
        assert_eq!(t.value(StateId(0)).unwrap(), ExtValue::Unreachable);
        assert_eq!(t.value(StateId(2)).unwrap(), ExtValue::Unreachable);

        let r = value_iteration(
            &m,
            &PropertySpec::reachability(&m, Direction::Maximize),
            &SolverConfig::default(),
        )
        .unwrap();
        let p: f64 = r.value(StateId(0)).unwrap().finite().unwrap();
        assert!((p - 0.5).abs() < 1e-9);
        let r = value_iteration(
            &m,
            &PropertySpec::reachability(&m, Direction::Minimize),
            &SolverConfig::default(),
        )
        .unwrap();
        assert_eq!(r.value(StateId(0)).unwrap(), ExtValue::zero());
    }

    #[test]
    fn maximizing_cost_is_rejected() {
        let m = chain(0.9);
        let mut p = PropertySpec::min_expected_distance(&m);
        p.direction = Direction::Maximize;
        assert!(matches!(
            value_iteration(&m, &p, &SolverConfig::default()),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn route_from_target_is_empty() {
        let m = chain(0.9);
        let t = value_iteration(&m, &PropertySpec::min_expected_distance(&m), &SolverConfig::default()).unwrap();
        let pol = extract_policy(&m, &t);
        let r = nominal_route(&m, &pol, StateId(1)).unwrap();
        assert!(r.steps.is_empty());
        assert_eq!(r.terminal, StateId(1));
        let r = nominal_route(&m, &pol, StateId(0)).unwrap();
        assert_eq!(r.steps, vec![RouteStep { state: StateId(0), action: ActionId(0) }]);
    }

    #[test]
    fn looping_policy_fails_route_extraction() {
        let mut b = MdpBuilder::new(["a", "b"]);
        for i in 0..3 {
            b.state(StateId(i));
        }
        b.initial(StateId(0)).target(StateId(2));
        b.choice(StateId(0), ActionId(0), [(StateId(1), 1.0, 1.0)]);
        b.choice(StateId(1), ActionId(0), [(StateId(0), 1.0, 1.0)]);
        b.choice(StateId(1), ActionId(1), [(StateId(2), 1.0, 1.0)]);
        let m = b.build().unwrap();
        let pol = Policy::from_choices(vec![Some(ActionId(0)), Some(ActionId(0)), None]);
        assert!(matches!(nominal_route(&m, &pol, StateId(0)), Err(Error::Route { .. })));
    }

    #[test]
    fn route_tie_breaks_by_smallest_state() {
        let mut b = MdpBuilder::new(["split"]);
        for i in 0..4 {
            b.state(StateId(i));
        }
        b.initial(StateId(0)).target(StateId(1)).target(StateId(2)).target(StateId(3));
        b.choice(StateId(0), ActionId(0), [(StateId(3), 0.5, 1.0), (StateId(2), 0.5, 1.0)]);
        let m = b.build().unwrap();
        let pol = Policy::from_choices(vec![Some(ActionId(0)), None, None, None]);
        assert_eq!(nominal_route(&m, &pol, StateId(0)).unwrap().terminal, StateId(2));
    }
}
