//! One active-learning run from the initial split to pool exhaustion.

use std::time::Instant;

use super::config::ExperimentConfig;
use crate::data::{initial_split, Dataset, SplitState};
use crate::error::{Error, Result};
use crate::geometry::DistanceCache;
use crate::metrics::{
    correlation_coefficient, full_pool_rmse, hybrid_predictions, Trace, TraceRow,
};
use crate::model::{cv_rmse, fit_bootstrap_committee, fit_ridge, RidgeModel};
use crate::rng::{derive_seed, stream_rng, Stream};
use crate::sac::{agent_reward, build_state, StateVector};
use crate::selectors::{self, EgalDensity, SelectionResult, SelectorKind};
use crate::weights::{PolicySpec, WeightPolicy};

/// A finished run with its per-iteration wall-clock times.
#[derive(Debug, Clone)]
pub struct Replication {
    pub trace: Trace,
    pub wall_ms: Vec<f64>,
}

struct LoopState<'a> {
    dataset: &'a Dataset,
    config: &'a ExperimentConfig,
    seed: u64,
    split: SplitState,
    model: RidgeModel,
    pool_preds: Vec<f64>,
    cache: DistanceCache,
}

impl LoopState<'_> {
    fn labeled_data(&self) -> (Vec<f64>, Vec<f64>) {
        self.dataset.gather(&self.split.labeled)
    }

    fn refit(&mut self) -> Result<()> {
        let (x, y) = self.labeled_data();
        self.model = fit_ridge(&x, self.dataset.n_features(), &y, self.config.model.alpha)?;
        let (px, _) = self.dataset.gather(&self.split.pool);
        self.pool_preds = self.model.predict_rows(&px);
        Ok(())
    }

    fn cv(&self, index: u64) -> Result<f64> {
        let (x, y) = self.labeled_data();
        let m = &self.config.model;
        let score = cv_rmse(
            &x,
            self.dataset.n_features(),
            &y,
            m.alpha,
            m.cv_folds,
            derive_seed(self.seed, Stream::CvFolds, index),
        )?;
        if let Some(w) = &score.warning {
            log::debug!("{w}");
        }
        Ok(score.rmse)
    }

    fn state(&self, cv_now: f64, cv_initial: f64, t: usize, horizon: usize) -> Result<StateVector> {
        let (x, y) = self.labeled_data();
        build_state(
            cv_now,
            cv_initial,
            t,
            horizon,
            &y,
            &x,
            self.dataset.n_features(),
        )
    }

    fn record(&self) -> (f64, Option<f64>) {
        let rmse = full_pool_rmse(self.dataset, &self.split, &self.model);
        let hybrid = hybrid_predictions(self.dataset, &self.split, &self.model);
        (
            rmse,
            correlation_coefficient(&hybrid, self.dataset.targets()),
        )
    }
}

/// Runs `method` on `dataset` with every random choice derived from `seed`.
pub fn run_replication(
    config: &ExperimentConfig,
    dataset: &Dataset,
    method: &SelectorKind,
    seed: u64,
) -> Result<Replication> {
    let label = method.label();
    run_inner(config, dataset, method, seed, &label).map_err(|(iteration, e)| Error::Replication {
        method: label.clone(),
        seed,
        iteration,
        source: Box::new(e),
    })
}

fn run_inner(
    config: &ExperimentConfig,
    dataset: &Dataset,
    method: &SelectorKind,
    seed: u64,
    label: &str,
) -> std::result::Result<Replication, (usize, Error)> {
    let at = |t: usize| move |e: Error| (t, e);
    let split = initial_split(
        dataset,
        config.experiment.initial_fraction,
        derive_seed(seed, Stream::Split, 0),
    )
    .map_err(at(0))?;
    let horizon = split.pool.len();
    let (x, y) = dataset.gather(&split.labeled);
    let model = fit_ridge(&x, dataset.n_features(), &y, config.model.alpha).map_err(at(0))?;
    let (px, _) = dataset.gather(&split.pool);
    let pool_preds = model.predict_rows(&px);
    let cache = DistanceCache::build(dataset, &split, &pool_preds).map_err(at(0))?;
    let mut st = LoopState {
        dataset,
        config,
        seed,
        split,
        model,
        pool_preds,
        cache,
    };
    let (initial_rmse, initial_cc) = st.record();

    let mut policy = match method {
        SelectorKind::Wigs { policy } => {
            Some(WeightPolicy::from_spec(policy, horizon, &config.sac, seed).map_err(at(0))?)
        }
        _ => None,
    };
    let adaptive = policy.as_ref().is_some_and(WeightPolicy::is_adaptive);
    let uses_state = matches!(
        method,
        SelectorKind::Wigs {
            policy: PolicySpec::Sac
        }
    );
    let mut cv_prev = if adaptive {
        st.cv(0).map_err(at(0))?
    } else {
        0.0
    };
    let cv_scale = if cv_prev > 0.0 { cv_prev } else { 1.0 };
    let mut state = if uses_state {
        Some(st.state(cv_prev, cv_scale, 0, horizon).map_err(at(0))?)
    } else {
        None
    };

    let mut egal = if matches!(method, SelectorKind::Egal) {
        let mut rng = stream_rng(seed, Stream::Egal, 0);
        let bw = selectors::egal_bandwidth(dataset, config.egal.bandwidth_sample, &mut rng);
        Some(EgalDensity::build(dataset, &st.split.pool, bw))
    } else {
        None
    };
    let mut passive_rng = stream_rng(seed, Stream::Passive, 0);

    let mut rows = Vec::with_capacity(horizon);
    let mut wall_ms = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let started = Instant::now();
        let weight = match policy.as_mut() {
            Some(p) => Some(p.next_weight(t, state.as_ref()).map_err(at(t))?),
            None => None,
        };
        let pick =
            select(&st, method, weight, egal.as_ref(), &mut passive_rng, t).map_err(at(t))?;
        debug_assert_eq!(st.cache.pool(), st.split.pool.as_slice());
        let row = st.split.acquire(pick.chosen).map_err(at(t))?;
        st.refit().map_err(at(t))?;
        st.cache
            .update_after_acquisition(dataset, row, &st.pool_preds)
            .map_err(at(t))?;
        if let Some(e) = egal.as_mut() {
            e.remove(dataset, row).map_err(at(t))?;
        }
        let (rmse, cc) = st.record();

        if let Some(p) = policy.as_mut().filter(|_| adaptive) {
            let cv_now = st.cv(t as u64 + 1).map_err(at(t))?;
            let next = if uses_state {
                Some(st.state(cv_now, cv_scale, t + 1, horizon).map_err(at(t))?)
            } else {
                None
            };
            p.feedback(agent_reward(cv_prev, cv_now), next.as_ref())
                .map_err(at(t))?;
            cv_prev = cv_now;
            state = next;
        }

        rows.push(TraceRow {
            iteration: t,
            labeled_count: st.split.labeled.len(),
            rmse,
            cc,
            weight: pick.weight_used.or(weight),
            selector_score: pick.score,
            chosen_index: row,
            x_position: dataset.row(row)[0],
        });
        wall_ms.push(started.elapsed().as_secs_f64() * 1e3);
    }

    if rows.last().is_some_and(|r| r.rmse != 0.0) {
        return Err((
            horizon.saturating_sub(1),
            Error::Numerical("full-pool RMSE is not zero after exhausting the pool".into()),
        ));
    }
    Ok(Replication {
        trace: Trace {
            dataset: dataset.name().to_string(),
            method: label.to_string(),
            seed,
            pool_size: horizon,
            initial_rmse,
            initial_cc,
            rows,
        },
        wall_ms,
    })
}

fn select(
    st: &LoopState<'_>,
    method: &SelectorKind,
    weight: Option<f64>,
    egal: Option<&EgalDensity>,
    passive_rng: &mut crate::rng::Rng,
    t: usize,
) -> Result<SelectionResult> {
    let ds = st.dataset;
    let p = ds.n_features();
    match method {
        SelectorKind::Passive => selectors::select_passive(st.split.pool.len(), passive_rng),
        SelectorKind::Gsx => selectors::select_gsx(&st.cache),
        SelectorKind::Gsy => selectors::select_gsy(&st.cache),
        SelectorKind::Igs => selectors::select_igs(&st.cache.pairwise(ds, &st.pool_preds)?),
        SelectorKind::Wigs { .. } => {
            let w = weight.ok_or_else(|| Error::invalid("WiGS needs a weight"))?;
            selectors::select_wigs(&st.cache.pairwise(ds, &st.pool_preds)?, w)
        }
        SelectorKind::Uncertainty => {
            let (px, _) = ds.gather(&st.split.pool);
            selectors::select_uncertainty(&st.model, &px)
        }
        SelectorKind::Qbc | SelectorKind::Emcm => {
            let (x, y) = st.labeled_data();
            let committee = fit_bootstrap_committee(
                &x,
                p,
                &y,
                st.config.model.alpha,
                st.config.model.committee_size,
                derive_seed(st.seed, Stream::Bootstrap, t as u64),
            )?;
            let (px, _) = ds.gather(&st.split.pool);
            if matches!(method, SelectorKind::Qbc) {
                selectors::select_qbc(&committee, &px, p)
            } else {
                selectors::select_emcm(&st.model, &committee, &px)
            }
        }
        SelectorKind::Egal => {
            let e = egal.ok_or_else(|| Error::invalid("EGAL density missing"))?;
            selectors::select_egal(
                st.cache.dx_min(),
                e.density(),
                st.config.egal.diversity_quantile,
            )
        }
    }
}
