//! Soft actor-critic controller for the exploration weight.

pub mod adam;
pub mod agent;
pub mod mlp;
pub mod replay;
pub mod state;

pub use agent::{
    actor_objective, agent_reward, critic_objective, sac_update, sample_action, squash,
    squashed_log_prob, SacAgent, SacConfig, SacController, UpdateStats,
};
pub use mlp::{mlp_backward, mlp_forward, ForwardCache, Gradients, Layer, Mlp};
pub use replay::{ReplayBuffer, Transition};
pub use state::{build_state, StateVector, STATE_DIM, STATE_FEATURES_VERSION};

use crate::error::Result;

/// Trains a controller on a stateless task with reward `1 − |a − target|` until `updates`
/// gradient steps have run, and returns the final deterministic action.
pub fn train_on_target_task(
    config: SacConfig,
    seed: u64,
    target: f64,
    updates: u64,
) -> Result<f64> {
    let mut ctrl = SacController::new(config, seed)?;
    let s = StateVector::new([1.0, 0.5, 0.0, 0.0, 0.0]);
    while ctrl.agent().updates() < updates {
        let a = ctrl.act(&s)?;
        ctrl.observe(1.0 - (a - target).abs(), &s)?;
    }
    let mut rng = crate::rng::rng_from_seed(seed);
    Ok(sample_action(ctrl.agent(), &s, &mut rng, true)?.0)
}
