use cplanner::factors::{factor_report, FactorReport};
use cplanner::grid::{build_grid_mdp, GridMap};
use cplanner::mdp::Mdp;
use cplanner::solver::{extract_policy, nominal_route, value_iteration, Direction, Policy, PropertySpec, Route, SolverConfig, ValueTable};
use cplanner::{Error, Result};

/// Which quantity the session optimizes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PropertyChoice {
    #[default]
    MinCost,
    MaxReach,
    MinReach,
}

impl PropertyChoice {
    pub fn spec(self, mdp: &Mdp<f64>) -> PropertySpec {
        match self {
            PropertyChoice::MinCost => PropertySpec::min_expected_distance(mdp),
            PropertyChoice::MaxReach => PropertySpec::reachability(mdp, Direction::Maximize),
            PropertyChoice::MinReach => PropertySpec::reachability(mdp, Direction::Minimize),
        }
    }
}

/// A solved map. Immutable; changes produce a new session.
#[derive(Clone, Debug)]
pub struct Session {
    pub map: GridMap,
    pub mdp: Mdp<f64>,
    pub values: ValueTable<f64>,
    pub policy: Policy,
    /// `None` when the start cannot reach the destination under the policy.
    pub route: Option<Route>,
    pub report: FactorReport<f64>,
    pub alpha: f64,
    pub revision: u64,
}

impl Session {
    pub fn solve(map: GridMap, property: PropertyChoice, alpha: f64, cfg: &SolverConfig) -> Result<Session> {
        check_alpha(alpha)?;
        let mdp = build_grid_mdp(&map)?;
        let values = value_iteration(&mdp, &property.spec(&mdp), cfg)?;
        let policy = extract_policy(&mdp, &values);
        let route = nominal_route(&mdp, &policy, mdp.initial()).ok();
        let report = factor_report(&mdp, &values, &policy, alpha)?;
        Ok(Session {
            map,
            mdp,
            values,
            policy,
            route,
            report,
            alpha,
            revision: 1,
        })
    }

    /// Same solution, new threshold. Values and policy do not depend on α.
    pub fn with_alpha(&self, alpha: f64) -> Result<Session> {
        check_alpha(alpha)?;
        let report = factor_report(&self.mdp, &self.values, &self.policy, alpha)?;
        Ok(Session {
            report,
            alpha,
            revision: self.revision + 1,
            ..self.clone()
        })
    }

    pub fn route(&self) -> Result<&Route> {
        self.route.as_ref().ok_or_else(|| Error::Route {
            state: self.mdp.initial(),
            reason: "the destination is not reachable from the start".into(),
        })
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("alpha must be a non-negative number, got {alpha}")))
    }
}
