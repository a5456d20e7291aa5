//! Sparse MDP model: states, enabled actions, probabilistic transitions with
//! per-transition rewards, and an absorbing target set.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// State index. For grid maps this is `row * width + col`, so ids of
/// building cells are simply absent from the model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateId(pub usize);

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Index into the model's action universe.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionId(pub usize);

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome<T> {
    pub next: StateId,
    pub probability: T,
    pub reward: T,
}

/// One enabled action and its successor distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct Choice<T> {
    pub action: ActionId,
    pub outcomes: Vec<Outcome<T>>,
}

impl<T: Scalar> Choice<T> {
    /// Successors carrying positive probability.
    pub fn support(&self) -> impl Iterator<Item = &Outcome<T>> {
        self.outcomes.iter().filter(|o| o.probability > T::zero())
    }
}

/// Immutable, validated MDP. Build one with [`MdpBuilder`] or from a grid map.
#[derive(Clone, Debug, PartialEq)]
pub struct Mdp<T> {
    states: Vec<StateId>,
    present: Vec<bool>,
    initial: StateId,
    actions: Vec<String>,
    choices: Vec<Vec<Choice<T>>>,
    targets: BTreeSet<StateId>,
    is_target: Vec<bool>,
}

impl<T: Scalar> Mdp<T> {
    /// Number of states in the model.
    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    /// One past the largest state id; per-state tables are indexed up to this.
    pub fn capacity(&self) -> usize {
        self.present.len()
    }

    /// State ids in ascending order.
    pub fn states(&self) -> &[StateId] {
        &self.states
    }

    pub fn contains(&self, s: StateId) -> bool {
        self.present.get(s.0).copied().unwrap_or(false)
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn targets(&self) -> &BTreeSet<StateId> {
        &self.targets
    }

    pub fn is_target(&self, s: StateId) -> bool {
        self.is_target.get(s.0).copied().unwrap_or(false)
    }

    /// The action universe, indexed by [`ActionId`].
    pub fn action_labels(&self) -> &[String] {
        &self.actions
    }

    pub fn action_label(&self, a: ActionId) -> &str {
        self.actions.get(a.0).map(String::as_str).unwrap_or("?")
    }

    pub fn action_by_label(&self, label: &str) -> Result<ActionId> {
        self.actions
            .iter()
            .position(|l| l.eq_ignore_ascii_case(label))
            .map(ActionId)
            .ok_or_else(|| Error::UnknownAction(label.to_string()))
    }

    fn check(&self, s: StateId) -> Result<()> {
        if self.contains(s) {
            Ok(())
        } else {
            Err(Error::UnknownState(s))
        }
    }

    /// Enabled choices of `s`, sorted by action index. Empty for targets.
    pub fn choices(&self, s: StateId) -> Result<&[Choice<T>]> {
        self.check(s)?;
        Ok(&self.choices[s.0])
    }

    /// `A(s)`, sorted by action index.
    pub fn enabled_actions(&self, s: StateId) -> Result<Vec<ActionId>> {
        Ok(self.choices(s)?.iter().map(|c| c.action).collect())
    }

    pub fn choice(&self, s: StateId, a: ActionId) -> Result<&Choice<T>> {
        self.choices(s)?
            .iter()
            .find(|c| c.action == a)
            .ok_or(Error::ActionNotEnabled { state: s, action: a })
    }

    /// `δ(s, a, s')`, zero for absent transitions.
    pub fn probability(&self, s: StateId, a: ActionId, next: StateId) -> Result<T> {
        Ok(self
            .choice(s, a)?
            .outcomes
            .iter()
            .filter(|o| o.next == next)
            .fold(T::zero(), |acc, o| acc + o.probability))
    }

    /// `r(s, a, s')`, if the transition exists.
    pub fn reward(&self, s: StateId, a: ActionId, next: StateId) -> Result<Option<T>> {
        Ok(self
            .choice(s, a)?
            .outcomes
            .iter()
            .find(|o| o.next == next)
            .map(|o| o.reward))
    }

    /// Largest self-loop probability over all transitions.
    pub fn max_self_loop(&self) -> T {
        let mut best = T::zero();
        for &s in &self.states {
            for c in &self.choices[s.0] {
                for o in &c.outcomes {
                    if o.next == s && o.probability > best {
                        best = o.probability;
                    }
                }
            }
        }
        best
    }
}

/// Incremental constructor for [`Mdp`]; `build` checks every model invariant.
#[derive(Clone, Debug)]
pub struct MdpBuilder<T> {
    actions: Vec<String>,
    states: BTreeSet<StateId>,
    initial: Option<StateId>,
    targets: BTreeSet<StateId>,
    choices: Vec<(StateId, ActionId, Vec<Outcome<T>>)>,
}

impl<T: Scalar> MdpBuilder<T> {
    pub fn new<I, S>(actions: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        MdpBuilder {
            actions: actions.into_iter().map(Into::into).collect(),
            states: BTreeSet::new(),
            initial: None,
            targets: BTreeSet::new(),
            choices: Vec::new(),
        }
    }

    pub fn state(&mut self, s: StateId) -> &mut Self {
        self.states.insert(s);
        self
    }

    pub fn initial(&mut self, s: StateId) -> &mut Self {
        self.initial = Some(s);
        self
    }

    pub fn target(&mut self, s: StateId) -> &mut Self {
        self.targets.insert(s);
        self
    }

    /// Enables `a` in `s` with successor triples `(next, probability, reward)`.
    pub fn choice<I>(&mut self, s: StateId, a: ActionId, outcomes: I) -> &mut Self
    where
        I: IntoIterator<Item = (StateId, T, T)>,
    {
        let outcomes = outcomes
            .into_iter()
            .map(|(next, probability, reward)| Outcome {
                next,
                probability,
                reward,
            })
            .collect();
        self.choices.push((s, a, outcomes));
        self
    }

    pub fn build(&self) -> Result<Mdp<T>> {
        let invalid = |msg: String| Err(Error::InvalidModel(msg));
        if self.states.is_empty() {
            return invalid("model has no states".into());
        }
        let capacity = self.states.iter().next_back().map_or(0, |s| s.0 + 1);
        let mut present = vec![false; capacity];
        for s in &self.states {
            present[s.0] = true;
        }
        let known = |s: StateId| present.get(s.0).copied().unwrap_or(false);

        let Some(initial) = self.initial else {
            return invalid("no initial state".into());
        };
        if !known(initial) {
            return invalid(format!("initial state {initial} is not a state"));
        }
        let mut is_target = vec![false; capacity];
        for &t in &self.targets {
            if !known(t) {
                return invalid(format!("target {t} is not a state"));
            }
            is_target[t.0] = true;
        }

        let tol = T::stochastic_tolerance();
        let mut choices: Vec<Vec<Choice<T>>> = vec![Vec::new(); capacity];
        for (s, a, outcomes) in &self.choices {
            if !known(*s) {
                return invalid(format!("choice for unknown state {s}"));
            }
            if a.0 >= self.actions.len() {
                return invalid(format!("action {a} outside the action universe"));
            }
            if is_target[s.0] {
                return invalid(format!("target state {s} must not enable actions"));
            }
            if choices[s.0].iter().any(|c| c.action == *a) {
                return invalid(format!("action {a} enabled twice in state {s}"));
            }
            if outcomes.is_empty() {
                return invalid(format!("action {a} in state {s} has no successors"));
            }
            let mut total = T::zero();
            for (i, o) in outcomes.iter().enumerate() {
                if !known(o.next) {
                    return invalid(format!("transition {s} -> {} leaves the model", o.next));
                }
                if outcomes[..i].iter().any(|p| p.next == o.next) {
                    return invalid(format!("duplicate successor {} for ({s}, {a})", o.next));
                }
                if !(o.probability >= T::zero() && o.probability <= T::one()) {
                    return invalid(format!("probability {} out of [0,1] at ({s}, {a})", o.probability));
                }
                if !o.reward.is_finite() {
                    return invalid(format!("non-finite reward at ({s}, {a}, {})", o.next));
                }
                total = total + o.probability;
            }
            if (total - T::one()).abs() > tol {
                return invalid(format!("successor probabilities of ({s}, {a}) sum to {total}"));
            }
            choices[s.0].push(Choice {
                action: *a,
                outcomes: outcomes.clone(),
            });
        }
        for list in &mut choices {
            list.sort_by_key(|c| c.action);
        }

        Ok(Mdp {
            states: self.states.iter().copied().collect(),
            present,
            initial,
            actions: self.actions.clone(),
            choices,
            targets: self.targets.clone(),
            is_target,
        })
    }
}
