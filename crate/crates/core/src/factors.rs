//! Impact `ω`, critical states, responsibility `ζ` and the per-state factor
//! report that explanations are built from.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{ActionId, Mdp, StateId};
use crate::scalar::Scalar;
use crate::solver::{Direction, Policy, ValueTable};
use crate::tree::{footprint_constrictiveness, tree_footprint};
use crate::value::ExtValue;

/// `ω(s, a) = Σ δ(s, a, s')·ρ_{s'}`.
pub fn impact<T: Scalar>(mdp: &Mdp<T>, values: &ValueTable<T>, s: StateId, a: ActionId) -> Result<ExtValue<T>> {
    let choice = mdp.choice(s, a)?;
    Ok(ExtValue::weighted_sum(
        choice.support().map(|o| (o.probability, values.get(o.next))),
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ImpactBounds<T: Scalar> {
    pub lambda_min: ExtValue<T>,
    pub lambda_max: ExtValue<T>,
    pub per_action: BTreeMap<ActionId, ExtValue<T>>,
}

impl<T: Scalar> ImpactBounds<T> {
    /// `λ^max − λ^min`; `None` when both are unreachable.
    pub fn gap(&self) -> Option<ExtValue<T>> {
        if self.lambda_max == self.lambda_min {
            return Some(ExtValue::zero());
        }
        self.lambda_max.checked_sub(self.lambda_min)
    }

    fn is_critical(&self, alpha: T) -> bool {
        match (self.lambda_min, self.lambda_max) {
            (ExtValue::Finite(lo), ExtValue::Finite(hi)) => hi - lo > alpha,
            (ExtValue::Finite(_), ExtValue::Unreachable) => true,
            _ => false,
        }
    }
}

pub fn impact_bounds<T: Scalar>(mdp: &Mdp<T>, values: &ValueTable<T>, s: StateId) -> Result<ImpactBounds<T>> {
    let actions = mdp.enabled_actions(s)?;
    if actions.is_empty() {
        return Err(Error::NoEnabledActions(s));
    }
    let per_action = actions
        .into_iter()
        .map(|a| Ok((a, impact(mdp, values, s, a)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    let mut it = per_action.values().copied();
    let first = it.next().expect("non-empty");
    let (lambda_min, lambda_max) = it.fold((first, first), |(lo, hi), w| (lo.min(w), hi.max(w)));
    Ok(ImpactBounds {
        lambda_min,
        lambda_max,
        per_action,
    })
}

/// `S_c = { s | λ^max_s − λ^min_s > α }`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalSet<T> {
    pub alpha: T,
    pub members: BTreeSet<StateId>,
}

impl<T: Scalar> CriticalSet<T> {
    pub fn contains(&self, s: StateId) -> bool {
        self.members.contains(&s)
    }
}

fn check_alpha<T: Scalar>(alpha: T) -> Result<()> {
    if alpha >= T::zero() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("alpha must be non-negative, got {alpha}")))
    }
}

/// Critical states at threshold `alpha`. An unreachable worst case over a
/// finite best case exceeds every threshold; two unreachable bounds never do.
pub fn critical_states<T: Scalar>(mdp: &Mdp<T>, values: &ValueTable<T>, alpha: T) -> Result<CriticalSet<T>> {
    check_alpha(alpha)?;
    let mut members = BTreeSet::new();
    for &s in mdp.states() {
        if values.is_target(s) || mdp.choices(s)?.is_empty() {
            continue;
        }
        if impact_bounds(mdp, values, s)?.is_critical(alpha) {
            members.insert(s);
        }
    }
    Ok(CriticalSet { alpha, members })
}

/// `ζ(s, a) = ω(s, a) − λ^min_s`; zero whenever `ω` equals `λ^min`.
pub fn responsibility<T: Scalar>(mdp: &Mdp<T>, values: &ValueTable<T>, s: StateId, a: ActionId) -> Result<ExtValue<T>> {
    let bounds = impact_bounds(mdp, values, s)?;
    let omega = *bounds
        .per_action
        .get(&a)
        .ok_or(Error::ActionNotEnabled { state: s, action: a })?;
    Ok(zeta(omega, bounds.lambda_min))
}

fn zeta<T: Scalar>(omega: ExtValue<T>, lambda_min: ExtValue<T>) -> ExtValue<T> {
    if omega == lambda_min {
        ExtValue::zero()
    } else {
        omega.checked_sub(lambda_min).expect("ω ≥ λ^min")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct StateFactors<T: Scalar> {
    pub state: StateId,
    pub bounds: ImpactBounds<T>,
    pub chosen: Option<ActionId>,
    pub responsibility: BTreeMap<ActionId, ExtValue<T>>,
    pub constrictiveness: BTreeMap<ActionId, usize>,
    /// Distinct states of each action's search tree, root excluded.
    pub footprint: BTreeMap<ActionId, Vec<StateId>>,
}

impl<T: Scalar> StateFactors<T> {
    pub fn omega(&self, a: ActionId) -> Option<ExtValue<T>> {
        self.bounds.per_action.get(&a).copied()
    }

    pub fn zeta(&self, a: ActionId) -> Option<ExtValue<T>> {
        self.responsibility.get(&a).copied()
    }

    pub fn epsilon(&self, a: ActionId) -> Option<usize> {
        self.constrictiveness.get(&a).copied()
    }
}

/// Factors for every critical state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct FactorReport<T: Scalar> {
    pub direction: Direction,
    pub critical: CriticalSet<T>,
    pub states: BTreeMap<StateId, StateFactors<T>>,
}

impl<T: Scalar> FactorReport<T> {
    pub fn get(&self, s: StateId) -> Result<&StateFactors<T>> {
        self.states.get(&s).ok_or(Error::NotCritical(s))
    }
}

/// ω, ζ and ε for one state, whether or not it is critical.
pub fn state_factors<T: Scalar>(
    mdp: &Mdp<T>,
    values: &ValueTable<T>,
    policy: &Policy,
    critical: &CriticalSet<T>,
    s: StateId,
) -> Result<StateFactors<T>> {
    let bounds = impact_bounds(mdp, values, s)?;
    let mut responsibility = BTreeMap::new();
    let mut constrict = BTreeMap::new();
    let mut footprint = BTreeMap::new();
    for (&a, &omega) in &bounds.per_action {
        responsibility.insert(a, zeta(omega, bounds.lambda_min));
        let states = tree_footprint(mdp, values, s, a)?;
        constrict.insert(a, footprint_constrictiveness(&states, critical, mdp));
        footprint.insert(a, states.into_iter().collect());
    }
    Ok(StateFactors {
        state: s,
        bounds,
        chosen: policy.action(s),
        responsibility,
        constrictiveness: constrict,
        footprint,
    })
}

pub fn factor_report<T: Scalar>(
    mdp: &Mdp<T>,
    values: &ValueTable<T>,
    policy: &Policy,
    alpha: T,
) -> Result<FactorReport<T>> {
    let critical = critical_states(mdp, values, alpha)?;
    let states = critical
        .members
        .iter()
        .map(|&s| Ok((s, state_factors(mdp, values, policy, &critical, s)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    Ok(FactorReport {
        direction: values.property.direction,
        critical,
        states,
    })
}
