//! Template-based English explanations of a route.
//!
//! Sentence shape: `"{Connective}, we move {direction} at [critical ]grid {id}
//! [because it leads to the {justification}]."`; single-state explanations
//! drop the connective and start with "We move".

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factors::{FactorReport, StateFactors};
use crate::mdp::{ActionId, Mdp, StateId};
use crate::scalar::Scalar;
use crate::solver::{Direction, Route};
use crate::value::ExtValue;

/// Closing sentence of the selective and contrastive explanations.
pub const TRAILING_SENTENCE: &str = "All other decisions result in equivalent routes.";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExplanationType {
    #[serde(rename = "none")]
    NoExplanation,
    #[serde(rename = "naive-one")]
    NaiveOneState,
    #[serde(rename = "responsibility")]
    Responsibility,
    #[serde(rename = "constrictive")]
    Constrictive,
    #[serde(rename = "naive-path")]
    NaivePath,
    #[serde(rename = "selective")]
    Selective,
    #[serde(rename = "contrastive")]
    ContrastiveAll,
}

impl ExplanationType {
    pub const ALL: [ExplanationType; 7] = [
        ExplanationType::NoExplanation,
        ExplanationType::NaiveOneState,
        ExplanationType::Responsibility,
        ExplanationType::Constrictive,
        ExplanationType::NaivePath,
        ExplanationType::Selective,
        ExplanationType::ContrastiveAll,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExplanationType::NoExplanation => "none",
            ExplanationType::NaiveOneState => "naive-one",
            ExplanationType::Responsibility => "responsibility",
            ExplanationType::Constrictive => "constrictive",
            ExplanationType::NaivePath => "naive-path",
            ExplanationType::Selective => "selective",
            ExplanationType::ContrastiveAll => "contrastive",
        }
    }

    /// Whether the type explains a single focus state.
    pub fn needs_focus(self) -> bool {
        matches!(
            self,
            ExplanationType::NaiveOneState | ExplanationType::Responsibility | ExplanationType::Constrictive
        )
    }
}

impl fmt::Display for ExplanationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExplanationType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown explanation type `{s}`")))
    }
}

/// Reasons an action is preferred at a critical state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JustificationSet {
    pub shortest: bool,
    pub most_flexible: bool,
}

impl JustificationSet {
    pub fn phrase(self) -> Option<&'static str> {
        match (self.shortest, self.most_flexible) {
            (true, true) => Some("shortest and most flexible future route"),
            (true, false) => Some("shortest route"),
            (false, true) => Some("most flexible future route"),
            (false, false) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub text: String,
    pub state: Option<StateId>,
    pub action: Option<String>,
    pub justification: Option<JustificationSet>,
    pub connective: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplanationDoc {
    #[serde(rename = "type")]
    pub kind: ExplanationType,
    pub sentences: Vec<Sentence>,
    /// Critical route states for which no justification applied.
    pub unjustified: Vec<StateId>,
}

impl ExplanationDoc {
    /// Sentences joined by single spaces.
    pub fn text(&self) -> String {
        self.sentences.iter().map(|s| s.text.as_str()).collect::<Vec<_>>().join(" ")
    }
}

/// Word for an action: the lowercase compass direction for grid moves,
/// otherwise the model's label verbatim.
pub fn action_phrase<T: Scalar>(mdp: &Mdp<T>, a: ActionId) -> &str {
    mdp.action_label(a)
}

/// "First", then alternating "Next"/"Then", and "Finally" for the last of
/// several sentences.
pub fn connective(position: usize, total: usize) -> &'static str {
    if position == 0 {
        "First"
    } else if position + 1 == total {
        "Finally"
    } else if position % 2 == 1 {
        "Next"
    } else {
        "Then"
    }
}

fn near<T: Scalar>(a: T, b: T) -> bool {
    (a - b).abs() <= T::tie_tolerance() * (T::one() + a.abs().max(b.abs()))
}

fn is_best<T: Scalar>(f: &StateFactors<T>, direction: Direction, a: ActionId) -> bool {
    let best = match direction {
        Direction::Minimize => f.bounds.lambda_min,
        Direction::Maximize => f.bounds.lambda_max,
    };
    match (f.omega(a), best) {
        (Some(ExtValue::Finite(w)), ExtValue::Finite(b)) => near(w, b),
        (Some(w), b) => w == b,
        (None, _) => false,
    }
}

/// Which justifications hold for `chosen` at a critical state.
pub fn justification<T: Scalar>(report: &FactorReport<T>, state: StateId, chosen: ActionId) -> Result<JustificationSet> {
    let f = report.get(state)?;
    if f.omega(chosen).is_none() {
        return Err(Error::ActionNotEnabled { state, action: chosen });
    }
    let alternatives: Vec<ActionId> = f.bounds.per_action.keys().copied().filter(|a| *a != chosen).collect();
    let shortest = is_best(f, report.direction, chosen)
        && alternatives.iter().any(|a| !is_best(f, report.direction, *a));
    let own = f.epsilon(chosen).unwrap_or(0);
    let finite: Vec<ActionId> = alternatives
        .into_iter()
        .filter(|a| f.omega(*a).is_some_and(|w| w.is_finite()))
        .collect();
    let most_flexible = !finite.is_empty() && finite.iter().all(|a| own > f.epsilon(*a).unwrap_or(0));
    Ok(JustificationSet { shortest, most_flexible })
}

fn step_sentence(connective: Option<&str>, dir: &str, critical: bool, id: StateId, because: Option<&str>) -> String {
    let mut text = match connective {
        Some(c) => format!("{c}, we move {dir} at "),
        None => format!("We move {dir} at "),
    };
    if critical {
        text.push_str("critical ");
    }
    text.push_str(&format!("grid {id}"));
    if let Some(reason) = because {
        text.push_str(&format!(" because it leads to the {reason}"));
    }
    text.push('.');
    text
}

fn trailing() -> Sentence {
    Sentence {
        text: TRAILING_SENTENCE.to_string(),
        state: None,
        action: None,
        justification: None,
        connective: None,
    }
}

/// Renders one explanation of `route`.
pub fn generate<T: Scalar>(
    kind: ExplanationType,
    mdp: &Mdp<T>,
    route: &Route,
    report: &FactorReport<T>,
    focus: Option<StateId>,
) -> Result<ExplanationDoc> {
    let mut doc = ExplanationDoc {
        kind,
        sentences: Vec::new(),
        unjustified: Vec::new(),
    };
    match kind {
        ExplanationType::NoExplanation => {}
        ExplanationType::NaiveOneState | ExplanationType::Responsibility | ExplanationType::Constrictive => {
            let focus = focus.ok_or_else(|| Error::InvalidArgument(format!("explanation `{kind}` needs a focus state")))?;
            let step = route
                .steps
                .iter()
                .find(|st| st.state == focus)
                .ok_or(Error::NotOnRoute(focus))?;
            let dir = action_phrase(mdp, step.action);
            let reason = match kind {
                ExplanationType::Responsibility => Some("shortest route"),
                ExplanationType::Constrictive => Some("most flexible future route"),
                _ => None,
            };
            doc.sentences.push(Sentence {
                text: step_sentence(None, dir, false, focus, reason),
                state: Some(focus),
                action: Some(dir.to_string()),
                justification: None,
                connective: None,
            });
        }
        ExplanationType::NaivePath => {
            let total = route.steps.len();
            for (i, step) in route.steps.iter().enumerate() {
                let c = connective(i, total);
                let dir = action_phrase(mdp, step.action);
                doc.sentences.push(Sentence {
                    text: step_sentence(Some(c), dir, false, step.state, None),
                    state: Some(step.state),
                    action: Some(dir.to_string()),
                    justification: None,
                    connective: Some(c.to_string()),
                });
            }
        }
        ExplanationType::Selective | ExplanationType::ContrastiveAll => {
            let critical: Vec<_> = route.steps.iter().filter(|st| report.critical.contains(st.state)).collect();
            let total = critical.len();
            for (i, step) in critical.into_iter().enumerate() {
                let c = connective(i, total);
                let dir = action_phrase(mdp, step.action);
                let just = if kind == ExplanationType::ContrastiveAll {
                    let j = justification(report, step.state, step.action)?;
                    if j.phrase().is_none() {
                        doc.unjustified.push(step.state);
                    }
                    Some(j)
                } else {
                    None
                };
                doc.sentences.push(Sentence {
                    text: step_sentence(Some(c), dir, true, step.state, just.and_then(JustificationSet::phrase)),
                    state: Some(step.state),
                    action: Some(dir.to_string()),
                    justification: just,
                    connective: Some(c.to_string()),
                });
            }
            doc.sentences.push(trailing());
        }
    }
    Ok(doc)
}

/// Decimal with at most three places and no trailing zeros.
pub fn format_number(x: f64) -> String {
    let s = format!("{x:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

/// Answers "why `chosen` rather than `alternative` at `state`?".
pub fn contrast_sentence<T: Scalar>(
    mdp: &Mdp<T>,
    report: &FactorReport<T>,
    state: StateId,
    chosen: ActionId,
    alternative: ActionId,
) -> Result<String> {
    if chosen == alternative {
        return Err(Error::InvalidArgument("the alternative must differ from the chosen action".into()));
    }
    let f = report.get(state)?;
    let lookup = |a: ActionId| -> Result<(ExtValue<T>, usize)> {
        match (f.zeta(a), f.epsilon(a)) {
            (Some(z), Some(e)) => Ok((z, e)),
            _ => Err(Error::ActionNotEnabled { state, action: a }),
        }
    };
    let (z_c, e_c) = lookup(chosen)?;
    let (z_a, e_a) = lookup(alternative)?;
    let c = action_phrase(mdp, chosen);
    let alt = action_phrase(mdp, alternative);
    let head = format!("We move {c} at grid {state} instead of {alt}");
    let flex = format!("{e_c} future decision points versus {e_a}");
    let body = match (z_c, z_a) {
        (ExtValue::Unreachable, ExtValue::Unreachable) => "because both lead to a dead end".to_string(),
        (ExtValue::Finite(_), ExtValue::Unreachable) => {
            format!("because {alt} leads to a dead end and {c} offers {flex}")
        }
        (ExtValue::Unreachable, ExtValue::Finite(_)) => {
            format!("although {c} leads to a dead end and offers {flex}")
        }
        (ExtValue::Finite(zc), ExtValue::Finite(za)) => {
            let delta = (za - zc).as_f64();
            let delta_text = format_number(delta.abs());
            if delta_text == "0" && e_c == e_a {
                format!("because {alt} leads to an equivalent route")
            } else if delta < 0.0 && delta_text != "0" {
                format!("although {c} leads to a route that is {delta_text} grids longer in expectation and offers {flex}")
            } else {
                format!("because {c} leads to a route that is {delta_text} grids shorter in expectation and offers {flex}")
            }
        }
    };
    Ok(format!("{head} {body}."))
}
