//! Route planning over Markov decision processes with contrastive
//! explanations.
//!
//! The pipeline is: a [`GridMap`](grid::GridMap) (or any hand-built
//! [`Mdp`](mdp::Mdp)) is solved by [`value_iteration`](solver::value_iteration),
//! an optimal [`Policy`](solver::Policy) and its nominal
//! [`Route`](solver::Route) are extracted, the three explanation factors are
//! computed per critical state ([`factors`], [`tree`]), and [`textgen`] turns
//! them into English.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! and `*32` aliases below fix the type.

pub mod error;
pub mod factors;
pub mod grid;
pub mod mapfile;
pub mod mdp;
pub mod montecarlo;
pub mod scalar;
pub mod solver;
pub mod textgen;
pub mod tree;
pub mod value;

pub use error::{Error, MapError, Result};
pub use mdp::{ActionId, StateId};
pub use scalar::Scalar;
pub use value::ExtValue;

pub type Mdp64 = mdp::Mdp<f64>;
pub type Mdp32 = mdp::Mdp<f32>;
pub type ExtValue64 = value::ExtValue<f64>;
pub type ExtValue32 = value::ExtValue<f32>;
pub type ValueTable64 = solver::ValueTable<f64>;
pub type ValueTable32 = solver::ValueTable<f32>;
pub type ImpactBounds64 = factors::ImpactBounds<f64>;
pub type CriticalSet64 = factors::CriticalSet<f64>;
pub type StateFactors64 = factors::StateFactors<f64>;
pub type FactorReport64 = factors::FactorReport<f64>;
pub type FactorReport32 = factors::FactorReport<f32>;
