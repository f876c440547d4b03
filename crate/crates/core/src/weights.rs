//! Weight controllers producing the exploration weight `w_x` for each iteration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sac::{SacConfig, SacController, StateVector};

pub const DEFAULT_ARMS: [f64; 3] = [0.25, 0.5, 0.75];
pub const DEFAULT_C_EXPLORE: f64 = 2.0;

fn check_unit(w: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&w) {
        Ok(w)
    } else {
        Err(Error::invalid(format!("weight {w} outside [0, 1]")))
    }
}

fn check_schedule(t: usize, horizon: usize, c: f64) -> Result<()> {
    if horizon == 0 {
        return Err(Error::invalid("decay horizon must be at least 1"));
    }
    if t > horizon {
        return Err(Error::invalid(format!(
            "iteration {t} beyond horizon {horizon}"
        )));
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::invalid(format!(
            "decay constant {c} must be positive"
        )));
    }
    Ok(())
}

pub fn weight_static(w: f64) -> Result<f64> {
    check_unit(w)
}

/// `max(0, 1 − c·t/T)`.
pub fn weight_linear_decay(t: usize, horizon: usize, c: f64) -> Result<f64> {
    check_schedule(t, horizon, c)?;
    Ok((1.0 - c * t as f64 / horizon as f64).max(0.0))
}

/// `exp(−c·t/T)`.
pub fn weight_exp_decay(t: usize, horizon: usize, c: f64) -> Result<f64> {
    check_schedule(t, horizon, c)?;
    Ok((-c * t as f64 / horizon as f64).exp())
}

/// UCB1 over a fixed set of candidate weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditState {
    arms: Vec<f64>,
    counts: Vec<u64>,
    means: Vec<f64>,
    total: u64,
    c_explore: f64,
}

impl BanditState {
    pub fn new(arms: Vec<f64>, c_explore: f64) -> Result<Self> {
        if arms.is_empty() {
            return Err(Error::invalid("bandit needs at least one arm"));
        }
        for &a in &arms {
            check_unit(a)?;
        }
        if !(c_explore >= 0.0) || !c_explore.is_finite() {
            return Err(Error::invalid(format!(
                "exploration constant {c_explore} must be >= 0"
            )));
        }
        let n = arms.len();
        Ok(Self {
            arms,
            counts: vec![0; n],
            means: vec![0.0; n],
            total: 0,
            c_explore,
        })
    }

    pub fn arms(&self) -> &[f64] {
        &self.arms
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn c_explore(&self) -> f64 {
        self.c_explore
    }
}

/// Lowest unpulled arm first, then `argmax mean_i + c·√(ln n / n_i)`.
pub fn mab_select(state: &BanditState) -> usize {
    if let Some(i) = state.counts.iter().position(|&c| c == 0) {
        return i;
    }
    let ln_n = (state.total as f64).ln();
    let ucb = |i: usize| state.means[i] + state.c_explore * (ln_n / state.counts[i] as f64).sqrt();
    let mut best = 0;
    let mut best_v = ucb(0);
    for i in 1..state.arms.len() {
        let v = ucb(i);
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

pub fn mab_update(state: &mut BanditState, arm: usize, reward: f64) -> Result<()> {
    if arm >= state.arms.len() {
        return Err(Error::invalid(format!("unknown arm {arm}")));
    }
    if !reward.is_finite() {
        return Err(Error::Numerical(format!(
            "non-finite bandit reward {reward}"
        )));
    }
    state.counts[arm] += 1;
    state.total += 1;
    state.means[arm] += (reward - state.means[arm]) / state.counts[arm] as f64;
    Ok(())
}

/// Configuration of a weight controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PolicySpec {
    Static {
        weight: f64,
    },
    LinearDecay {
        c: f64,
    },
    ExpDecay {
        c: f64,
    },
    Mab {
        #[serde(default = "default_arms")]
        arms: Vec<f64>,
        #[serde(default = "default_c_explore")]
        c_explore: f64,
    },
    Sac,
}

fn default_arms() -> Vec<f64> {
    DEFAULT_ARMS.to_vec()
}

fn default_c_explore() -> f64 {
    DEFAULT_C_EXPLORE
}

impl PolicySpec {
    pub fn default_mab() -> Self {
        PolicySpec::Mab {
            arms: default_arms(),
            c_explore: DEFAULT_C_EXPLORE,
        }
    }

    pub fn label(&self) -> String {
        match self {
            PolicySpec::Static { weight } => format!("WiGS-S({weight})"),
            PolicySpec::LinearDecay { c } => format!("WiGS-Lin(c={c})"),
            PolicySpec::ExpDecay { c } => format!("WiGS-Exp(c={c})"),
            PolicySpec::Mab { c_explore, .. } => format!("WiGS-MAB(c={c_explore})"),
            PolicySpec::Sac => "WiGS-SAC".into(),
        }
    }

    /// Whether the controller learns from the CV reward.
    pub fn is_adaptive(&self) -> bool {
        matches!(self, PolicySpec::Mab { .. } | PolicySpec::Sac)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PolicySpec::Static { weight } => check_unit(*weight).map(|_| ()),
            PolicySpec::LinearDecay { c } | PolicySpec::ExpDecay { c } => check_schedule(0, 1, *c),
            PolicySpec::Mab { arms, c_explore } => {
                BanditState::new(arms.clone(), *c_explore).map(|_| ())
            }
            PolicySpec::Sac => Ok(()),
        }
    }
}

/// A running weight controller for one replication.
#[derive(Debug, Clone)]
pub enum WeightPolicy {
    Static(f64),
    LinearDecay {
        c: f64,
        horizon: usize,
    },
    ExpDecay {
        c: f64,
        horizon: usize,
    },
    Mab {
        bandit: BanditState,
        last_arm: Option<usize>,
    },
    Sac(Box<SacController>),
}

impl WeightPolicy {
    /// `horizon` is the number of acquisitions in the run; `seed` feeds the SAC streams.
    pub fn from_spec(
        spec: &PolicySpec,
        horizon: usize,
        sac: &SacConfig,
        seed: u64,
    ) -> Result<Self> {
        spec.validate()?;
        Ok(match spec {
            PolicySpec::Static { weight } => WeightPolicy::Static(*weight),
            PolicySpec::LinearDecay { c } => WeightPolicy::LinearDecay { c: *c, horizon },
            PolicySpec::ExpDecay { c } => WeightPolicy::ExpDecay { c: *c, horizon },
            PolicySpec::Mab { arms, c_explore } => WeightPolicy::Mab {
                bandit: BanditState::new(arms.clone(), *c_explore)?,
                last_arm: None,
            },
            PolicySpec::Sac => WeightPolicy::Sac(Box::new(SacController::new(sac.clone(), seed)?)),
        })
    }

    /// Weight for iteration `t`. The SAC controller requires the current state.
    pub fn next_weight(&mut self, t: usize, state: Option<&StateVector>) -> Result<f64> {
        match self {
            WeightPolicy::Static(w) => Ok(*w),
            WeightPolicy::LinearDecay { c, horizon } => weight_linear_decay(t, *horizon, *c),
            WeightPolicy::ExpDecay { c, horizon } => weight_exp_decay(t, *horizon, *c),
            WeightPolicy::Mab { bandit, last_arm } => {
                let arm = mab_select(bandit);
                *last_arm = Some(arm);
                Ok(bandit.arms()[arm])
            }
            WeightPolicy::Sac(ctrl) => {
                let s = state.ok_or_else(|| Error::invalid("SAC policy needs a state"))?;
                ctrl.act(s)
            }
        }
    }

    /// Reward for the weight most recently returned, with the state reached afterwards.
    pub fn feedback(&mut self, reward: f64, next_state: Option<&StateVector>) -> Result<()> {
        match self {
            WeightPolicy::Mab { bandit, last_arm } => {
                let arm = last_arm
                    .take()
                    .ok_or_else(|| Error::invalid("bandit feedback without a pull"))?;
                mab_update(bandit, arm, reward)
            }
            WeightPolicy::Sac(ctrl) => {
                let s = next_state
                    .ok_or_else(|| Error::invalid("SAC feedback needs the next state"))?;
                ctrl.observe(reward, s)
            }
            _ => Ok(()),
        }
    }

    pub fn is_adaptive(&self) -> bool {
        matches!(self, WeightPolicy::Mab { .. } | WeightPolicy::Sac(_))
    }
}
