//! Soft actor-critic with a squashed Gaussian policy over `[0, 1]` and twin critics.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::mlp::{mlp_backward, mlp_forward, Gradients, Mlp};
use super::replay::{ReplayBuffer, Transition};
use super::state::{StateVector, STATE_DIM};
use crate::error::{Error, Result};
use crate::rng::{self, Rng, Stream};

const LN_2: f64 = std::f64::consts::LN_2;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SacConfig {
    pub hidden_sizes: Vec<usize>,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub gamma: f64,
    pub tau: f64,
    pub alpha_entropy: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub updates_per_iteration: usize,
    pub log_std_min: f64,
    pub log_std_max: f64,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            hidden_sizes: vec![64, 64],
            learning_rate: 3e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            gamma: 0.99,
            tau: 0.005,
            alpha_entropy: 0.2,
            batch_size: 64,
            buffer_capacity: 10_000,
            updates_per_iteration: 1,
            log_std_min: -20.0,
            log_std_max: 2.0,
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("sac: {m}")));
        if self.hidden_sizes.is_empty() || self.hidden_sizes.contains(&0) {
            return bad("hidden_sizes must be non-empty and positive");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if !(self.adam_eps > 0.0) {
            return bad("adam_eps must be positive");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau must lie in (0, 1]");
        }
        if !(self.alpha_entropy >= 0.0) {
            return bad("alpha_entropy must be non-negative");
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 {
            return bad("batch_size and buffer_capacity must be positive");
        }
        if !(self.log_std_min < self.log_std_max) {
            return bad("log_std_min must be below log_std_max");
        }
        Ok(())
    }

    fn sizes(&self, input: usize, output: usize) -> Vec<usize> {
        let mut v = vec![input];
        v.extend(&self.hidden_sizes);
        v.push(output);
        v
    }
}

#[derive(Debug, Clone)]
pub struct SacAgent {
    config: SacConfig,
    actor: Mlp,
    critics: [Mlp; 2],
    targets: [Mlp; 2],
    actor_opt: Adam,
    critic_opts: [Adam; 2],
    updates: u64,
    skipped_updates: u64,
}

/// Losses from one update; `performed` is false when the buffer was too small.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateStats {
    pub performed: bool,
    pub critic_losses: [f64; 2],
    pub actor_loss: f64,
}

impl SacAgent {
    pub fn new(config: SacConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let actor = Mlp::new(&config.sizes(STATE_DIM, 2), rng)?;
        let c1 = Mlp::new(&config.sizes(STATE_DIM + 1, 1), rng)?;
        let c2 = Mlp::new(&config.sizes(STATE_DIM + 1, 1), rng)?;
        let adam = |n: usize| {
            Adam::new(
                n,
                config.learning_rate,
                config.adam_beta1,
                config.adam_beta2,
                config.adam_eps,
            )
        };
        Ok(Self {
            actor_opt: adam(actor.n_params()),
            critic_opts: [adam(c1.n_params()), adam(c2.n_params())],
            targets: [c1.clone(), c2.clone()],
            critics: [c1, c2],
            actor,
            config,
            updates: 0,
            skipped_updates: 0,
        })
    }

    pub fn config(&self) -> &SacConfig {
        &self.config
    }

    pub fn actor(&self) -> &Mlp {
        &self.actor
    }

    pub fn actor_mut(&mut self) -> &mut Mlp {
        &mut self.actor
    }

    pub fn critic(&self, i: usize) -> &Mlp {
        &self.critics[i]
    }

    pub fn critic_mut(&mut self, i: usize) -> &mut Mlp {
        &mut self.critics[i]
    }

    pub fn target(&self, i: usize) -> &Mlp {
        &self.targets[i]
    }

    /// Completed gradient updates.
    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// Update calls that were no-ops because the buffer held fewer than a batch.
    pub fn skipped_updates(&self) -> u64 {
        self.skipped_updates
    }

    /// Mean and clamped log-std for each state, plus whether the clamp was inactive.
    fn policy_heads(
        &self,
        states: &DMatrix<f64>,
    ) -> Result<(super::mlp::ForwardCache, Vec<(f64, f64, bool)>)> {
        let cache = mlp_forward(&self.actor, states)?;
        let out = cache.output();
        let heads = (0..out.nrows())
            .map(|r| {
                let raw = out[(r, 1)];
                let ls = raw.clamp(self.config.log_std_min, self.config.log_std_max);
                (out[(r, 0)], ls, raw == ls)
            })
            .collect();
        Ok((cache, heads))
    }

    /// Mean and clamped log-std of the pre-squash Gaussian for one state.
    pub fn policy(&self, state: &StateVector) -> Result<(f64, f64)> {
        let (_, heads) = self.policy_heads(&state_matrix(&[*state]))?;
        Ok((heads[0].0, heads[0].1))
    }
}

fn state_matrix(states: &[StateVector]) -> DMatrix<f64> {
    DMatrix::from_fn(states.len(), STATE_DIM, |r, c| states[r].values()[c])
}

fn state_action_matrix(states: &[StateVector], actions: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(states.len(), STATE_DIM + 1, |r, c| {
        if c < STATE_DIM {
            states[r].values()[c]
        } else {
            actions[r]
        }
    })
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `ln(1 − tanh²u)` without cancellation for large `|u|`.
fn log_one_minus_tanh2(u: f64) -> f64 {
    2.0 * (LN_2 - u - softplus(-2.0 * u))
}

/// Maps a pre-squash sample to the action interval.
pub fn squash(u: f64) -> f64 {
    (u.tanh() + 1.0) / 2.0
}

/// Log-density of `a = (tanh(u) + 1)/2` at the pre-squash value `u` for `u ~ N(μ, e^{2·log_std})`.
pub fn squashed_log_prob(u: f64, mu: f64, log_std: f64) -> f64 {
    let z = (u - mu) / log_std.exp();
    -0.5 * z * z - log_std - HALF_LN_2PI - log_one_minus_tanh2(u) + LN_2
}

/// Action in `[0, 1]` and its log-probability.
pub fn sample_action(
    agent: &SacAgent,
    state: &StateVector,
    rng: &mut Rng,
    deterministic: bool,
) -> Result<(f64, f64)> {
    let (mu, log_std) = agent.policy(state)?;
    let u = if deterministic {
        mu
    } else {
        let z: f64 = StandardNormal.sample(rng);
        mu + log_std.exp() * z
    };
    Ok((squash(u), squashed_log_prob(u, mu, log_std)))
}

/// `r_t = CV_{t−1} − CV_t`.
pub fn agent_reward(cv_prev: f64, cv_now: f64) -> f64 {
    cv_prev - cv_now
}

/// Critic loss `mean(½(Q(s, a) − y)²)` and its gradient.
pub fn critic_objective(critic: &Mlp, sa: &DMatrix<f64>, y: &[f64]) -> Result<(f64, Gradients)> {
    let cache = mlp_forward(critic, sa)?;
    let q = cache.output();
    let b = y.len() as f64;
    let resid = DMatrix::from_fn(y.len(), 1, |r, _| q[(r, 0)] - y[r]);
    let loss = 0.5 * resid.iter().map(|e| e * e).sum::<f64>() / b;
    let (g, _) = mlp_backward(critic, &(resid / b), &cache)?;
    Ok((loss, g))
}

/// Actor loss `mean(α·logπ(a|s) − min_i Q_i(s, a))` and its gradient for fixed standard-normal
/// draws `z`.
pub fn actor_objective(
    agent: &SacAgent,
    states: &[StateVector],
    z: &[f64],
) -> Result<(f64, Gradients)> {
    let alpha = agent.config.alpha_entropy;
    let b = states.len();
    let (cache, heads) = agent.policy_heads(&state_matrix(states))?;
    let mut us = Vec::with_capacity(b);
    let mut actions = Vec::with_capacity(b);
    let mut logps = Vec::with_capacity(b);
    for (r, &(mu, ls, _)) in heads.iter().enumerate() {
        let u = mu + ls.exp() * z[r];
        us.push(u);
        actions.push(squash(u));
        logps.push(squashed_log_prob(u, mu, ls));
    }
    let sa = state_action_matrix(states, &actions);
    let c0 = mlp_forward(&agent.critics[0], &sa)?;
    let c1 = mlp_forward(&agent.critics[1], &sa)?;
    let mut pick0 = DMatrix::zeros(b, 1);
    let mut pick1 = DMatrix::zeros(b, 1);
    let mut loss = 0.0;
    for r in 0..b {
        let (q0, q1) = (c0.output()[(r, 0)], c1.output()[(r, 0)]);
        if q0 <= q1 {
            pick0[(r, 0)] = 1.0;
        } else {
            pick1[(r, 0)] = 1.0;
        }
        loss += alpha * logps[r] - q0.min(q1);
    }
    loss /= b as f64;
    let (_, dsa0) = mlp_backward(&agent.critics[0], &pick0, &c0)?;
    let (_, dsa1) = mlp_backward(&agent.critics[1], &pick1, &c1)?;
    let mut upstream = DMatrix::zeros(b, 2);
    for r in 0..b {
        let (_, ls, free) = heads[r];
        let t = us[r].tanh();
        let dq_da = dsa0[(r, STATE_DIM)] + dsa1[(r, STATE_DIM)];
        let g_u = alpha * 2.0 * t - dq_da * 0.5 * (1.0 - t * t);
        upstream[(r, 0)] = g_u / b as f64;
        upstream[(r, 1)] = if free {
            (-alpha + g_u * ls.exp() * z[r]) / b as f64
        } else {
            0.0
        };
    }
    let (g, _) = mlp_backward(&agent.actor, &upstream, &cache)?;
    Ok((loss, g))
}

/// One critic step, one actor step, then the soft target update.
pub fn sac_update(
    agent: &mut SacAgent,
    buffer: &ReplayBuffer,
    rng: &mut Rng,
) -> Result<UpdateStats> {
    let cfg = agent.config.clone();
    if buffer.len() < cfg.batch_size {
        agent.skipped_updates += 1;
        return Ok(UpdateStats::default());
    }
    let batch: Vec<Transition> = buffer.sample(cfg.batch_size, rng);
    let states: Vec<StateVector> = batch.iter().map(|t| t.state).collect();
    let next: Vec<StateVector> = batch.iter().map(|t| t.next_state).collect();
    let actions: Vec<f64> = batch.iter().map(|t| t.action).collect();

    // critic targets use the current policy at s′ and the target critics
    let (_, heads) = agent.policy_heads(&state_matrix(&next))?;
    let mut next_actions = Vec::with_capacity(batch.len());
    let mut next_logps = Vec::with_capacity(batch.len());
    for &(mu, ls, _) in &heads {
        let z: f64 = StandardNormal.sample(rng);
        let u = mu + ls.exp() * z;
        next_actions.push(squash(u));
        next_logps.push(squashed_log_prob(u, mu, ls));
    }
    let sa_next = state_action_matrix(&next, &next_actions);
    let tq0 = mlp_forward(&agent.targets[0], &sa_next)?;
    let tq1 = mlp_forward(&agent.targets[1], &sa_next)?;
    let y: Vec<f64> = (0..batch.len())
        .map(|r| {
            let qmin = tq0.output()[(r, 0)].min(tq1.output()[(r, 0)]);
            batch[r].reward + cfg.gamma * (qmin - cfg.alpha_entropy * next_logps[r])
        })
        .collect();

    let sa = state_action_matrix(&states, &actions);
    let mut critic_losses = [0.0; 2];
    for i in 0..2 {
        let (loss, g) = critic_objective(&agent.critics[i], &sa, &y)?;
        agent.critic_opts[i].step(&mut agent.critics[i], &g);
        critic_losses[i] = loss;
    }

    let z: Vec<f64> = (0..batch.len())
        .map(|_| StandardNormal.sample(rng))
        .collect();
    let (actor_loss, g) = actor_objective(agent, &states, &z)?;
    agent.actor_opt.step(&mut agent.actor, &g);

    for i in 0..2 {
        agent.targets[i].soft_update_from(&agent.critics[i], cfg.tau);
    }
    agent.updates += 1;
    if !agent.actor.is_finite() || !agent.critics.iter().all(Mlp::is_finite) {
        return Err(Error::Numerical("SAC parameters became non-finite".into()));
    }
    Ok(UpdateStats {
        performed: true,
        critic_losses,
        actor_loss,
    })
}

/// Agent, replay memory and random stream for one replication.
#[derive(Debug, Clone)]
pub struct SacController {
    agent: SacAgent,
    buffer: ReplayBuffer,
    rng: Rng,
    pending: Option<(StateVector, f64)>,
    last_stats: UpdateStats,
}

impl SacController {
    pub fn new(config: SacConfig, seed: u64) -> Result<Self> {
        let mut init = rng::stream_rng(seed, Stream::SacInit, 0);
        let buffer = ReplayBuffer::new(config.buffer_capacity);
        Ok(Self {
            agent: SacAgent::new(config, &mut init)?,
            buffer,
            rng: rng::stream_rng(seed, Stream::SacSample, 0),
            pending: None,
            last_stats: UpdateStats::default(),
        })
    }

    pub fn agent(&self) -> &SacAgent {
        &self.agent
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn last_stats(&self) -> UpdateStats {
        self.last_stats
    }

    /// Samples a weight from the stochastic policy and remembers it for the next reward.
    pub fn act(&mut self, state: &StateVector) -> Result<f64> {
        let (a, _) = sample_action(&self.agent, state, &mut self.rng, false)?;
        self.pending = Some((*state, a));
        Ok(a)
    }

    /// Stores the transition for the last action and runs the configured number of updates.
    pub fn observe(&mut self, reward: f64, next_state: &StateVector) -> Result<()> {
        let (state, action) = self
            .pending
            .take()
            .ok_or_else(|| Error::invalid("SAC reward without a preceding action"))?;
        if !reward.is_finite() {
            return Err(Error::Numerical(format!("non-finite SAC reward {reward}")));
        }
        self.buffer.push(Transition {
            state,
            action,
            reward,
            next_state: *next_state,
        });
        for _ in 0..self.agent.config.updates_per_iteration {
            self.last_stats = sac_update(&mut self.agent, &self.buffer, &mut self.rng)?;
        }
        Ok(())
    }
}
