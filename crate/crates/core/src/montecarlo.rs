//! Seeded Monte-Carlo estimation of a policy's property value, used as an
//! independent check on value iteration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{Mdp, StateId};
use crate::scalar::Scalar;
use crate::solver::{Policy, PropertyKind, PropertySpec};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    /// Sample mean over completed episodes (NaN when none completed).
    pub mean: f64,
    pub stderr: f64,
    pub completed: usize,
    /// Episodes cut off at `max_steps` or stuck without an action. Excluded
    /// from cost estimates; counted as misses for reachability estimates.
    pub censored: usize,
    pub max_steps: usize,
}

/// Step cap `10·|S| / (1 − p_stay)` with `p_stay` the largest self-loop
/// probability of the model.
pub fn default_step_cap<T: Scalar>(mdp: &Mdp<T>) -> usize {
    let stay = mdp.max_self_loop().as_f64().min(0.999);
    (10.0 * mdp.num_states() as f64 / (1.0 - stay)).ceil() as usize
}

enum Episode {
    Done(f64),
    Censored,
}

fn run_episode<T: Scalar>(
    mdp: &Mdp<T>,
    policy: &Policy,
    property: &PropertySpec,
    start: StateId,
    max_steps: usize,
    rng: &mut ChaCha8Rng,
) -> Episode {
    let mut s = start;
    let mut total = 0.0;
    for _ in 0..=max_steps {
        if property.targets.contains(&s) {
            return Episode::Done(match property.kind {
                PropertyKind::ExpectedCumulativeReward => total,
                PropertyKind::ReachabilityProbability => 1.0,
            });
        }
        let Some(choice) = policy.action(s).and_then(|a| mdp.choice(s, a).ok()) else {
            return Episode::Censored;
        };
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut picked = None;
        for o in choice.support() {
            acc += o.probability.as_f64();
            picked = Some(o);
            if u < acc {
                break;
            }
        }
        let o = picked.expect("validated choices have support");
        total += o.reward.as_f64();
        s = o.next;
    }
    Episode::Censored
}

/// Simulates `episodes` runs of `policy` from `start`.
///
/// Episode `i` draws from its own ChaCha stream `i` under `seed`, so results
/// do not depend on scheduling.
pub fn monte_carlo_estimate<T: Scalar>(
    mdp: &Mdp<T>,
    policy: &Policy,
    property: &PropertySpec,
    start: StateId,
    episodes: usize,
    seed: u64,
) -> Result<McEstimate> {
    if episodes == 0 {
        return Err(Error::InvalidArgument("at least one episode is required".into()));
    }
    if !mdp.contains(start) {
        return Err(Error::UnknownState(start));
    }
    let max_steps = default_step_cap(mdp);
    let outcomes: Vec<Episode> = (0..episodes)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            run_episode(mdp, policy, property, start, max_steps, &mut rng)
        })
        .collect();

    let reach = property.kind == PropertyKind::ReachabilityProbability;
    let mut samples = Vec::with_capacity(episodes);
    let mut censored = 0;
    for e in outcomes {
        match e {
            Episode::Done(x) => samples.push(x),
            Episode::Censored => {
                censored += 1;
                if reach {
                    samples.push(0.0);
                }
            }
        }
    }
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let stderr = if n > 1 {
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    Ok(McEstimate {
        mean,
        stderr,
        completed: episodes - censored,
        censored,
        max_steps,
    })
}
