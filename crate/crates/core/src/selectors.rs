//! Query strategies.
//!
//! Every selector scores the current candidates and returns the highest-scoring pool position.
//! Ties are always broken towards the lowest position, so a selection is a deterministic function
//! of the state (and, for the passive baseline, of the seed).

use serde::{Deserialize, Serialize};

use crate::data::{quantile_midpoint, Dataset};
use crate::error::{Error, Result};
use crate::geometry::{euclidean, normalize_phi, DistanceCache, PairwiseDistances};
use crate::model::{predictive_variance, Committee, RidgeModel};
use crate::rng::{self, Rng};
use crate::weights::PolicySpec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionResult {
    /// Position of the winner in the current pool list.
    pub chosen: usize,
    pub score: f64,
    pub weight_used: Option<f64>,
}

/// The query strategy used by one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SelectorKind {
    Passive,
    Gsx,
    Gsy,
    Igs,
    Wigs { policy: PolicySpec },
    Uncertainty,
    Qbc,
    Emcm,
    Egal,
}

impl SelectorKind {
    /// Short display name used in output files.
    pub fn label(&self) -> String {
        match self {
            SelectorKind::Passive => "Passive".into(),
            SelectorKind::Gsx => "GSx".into(),
            SelectorKind::Gsy => "GSy".into(),
            SelectorKind::Igs => "iGS".into(),
            SelectorKind::Wigs { policy } => policy.label(),
            SelectorKind::Uncertainty => "Uncertainty".into(),
            SelectorKind::Qbc => "QBC".into(),
            SelectorKind::Emcm => "EMCM".into(),
            SelectorKind::Egal => "EGAL".into(),
        }
    }

    pub fn is_wigs(&self) -> bool {
        matches!(self, SelectorKind::Wigs { .. })
    }

    /// The fourteen strategies of the benchmark, with their default parameters.
    pub fn benchmark_suite() -> Vec<SelectorKind> {
        let mut v = vec![
            SelectorKind::Passive,
            SelectorKind::Gsx,
            SelectorKind::Gsy,
            SelectorKind::Igs,
        ];
        v.extend(
            [
                PolicySpec::Static { weight: 0.25 },
                PolicySpec::Static { weight: 0.75 },
                PolicySpec::LinearDecay { c: 1.0 },
                PolicySpec::ExpDecay { c: 5.0 },
                PolicySpec::default_mab(),
                PolicySpec::Sac,
            ]
            .into_iter()
            .map(|policy| SelectorKind::Wigs { policy }),
        );
        v.extend([
            SelectorKind::Qbc,
            SelectorKind::Uncertainty,
            SelectorKind::Egal,
            SelectorKind::Emcm,
        ]);
        v
    }
}

/// Index of the maximum, first occurrence wins.
fn argmax(scores: &[f64]) -> Result<(usize, f64)> {
    let mut it = scores.iter().copied().enumerate();
    let (mut best, mut best_score) = it.next().ok_or(Error::EmptyPool)?;
    for (i, s) in it {
        if s > best_score {
            best = i;
            best_score = s;
        }
    }
    Ok((best, best_score))
}

fn pick(scores: &[f64]) -> Result<SelectionResult> {
    let (chosen, score) = argmax(scores)?;
    Ok(SelectionResult {
        chosen,
        score,
        weight_used: None,
    })
}

pub fn select_passive(pool_len: usize, rng: &mut Rng) -> Result<SelectionResult> {
    if pool_len == 0 {
        return Err(Error::EmptyPool);
    }
    Ok(SelectionResult {
        chosen: rng::uniform_index(rng, pool_len),
        score: 0.0,
        weight_used: None,
    })
}

/// Furthest nearest neighbour in feature space.
pub fn select_gsx(cache: &DistanceCache) -> Result<SelectionResult> {
    pick(cache.dx_min())
}

/// Furthest nearest known label in output space.
pub fn select_gsy(cache: &DistanceCache) -> Result<SelectionResult> {
    pick(cache.dy_min())
}

/// `s_n = min_m d^x_nm · d^y_nm` on raw distances.
pub fn igs_scores(pw: &PairwiseDistances) -> Vec<f64> {
    (0..pw.n_candidates())
        .map(|c| {
            pw.dx_row(c)
                .iter()
                .zip(pw.dy_row(c))
                .map(|(a, b)| a * b)
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

pub fn select_igs(pw: &PairwiseDistances) -> Result<SelectionResult> {
    if pw.n_labeled() == 0 {
        return Err(Error::invalid("iGS needs a non-empty labeled set"));
    }
    pick(&igs_scores(pw))
}

/// `s_n = min_m w·φ(d^x_nm) + (1 − w)·φ(d^y_nm)`, with φ the min–max map over each full pairwise
/// matrix.
pub fn wigs_scores(pw: &PairwiseDistances, w: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::invalid(format!("WiGS weight {w} outside [0, 1]")));
    }
    if pw.n_candidates() == 0 {
        return Err(Error::EmptyPool);
    }
    let phx = normalize_phi(pw.dx())?;
    let phy = normalize_phi(pw.dy())?;
    Ok(wigs_scores_normalized(&phx, &phy, pw.n_labeled(), w))
}

/// Scores from already-normalised row-major matrices.
pub fn wigs_scores_normalized(phx: &[f64], phy: &[f64], n_labeled: usize, w: f64) -> Vec<f64> {
    phx.chunks(n_labeled)
        .zip(phy.chunks(n_labeled))
        .map(|(rx, ry)| {
            rx.iter()
                .zip(ry)
                .map(|(a, b)| w * a + (1.0 - w) * b)
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

pub fn select_wigs(pw: &PairwiseDistances, w: f64) -> Result<SelectionResult> {
    let scores = wigs_scores(pw, w)?;
    let mut r = pick(&scores)?;
    r.weight_used = Some(w);
    Ok(r)
}

/// Analytic ridge variance for every candidate row.
pub fn uncertainty_scores(model: &RidgeModel, pool_features: &[f64]) -> Result<Vec<f64>> {
    pool_features
        .chunks(model.n_features())
        .map(|x| predictive_variance(model, x))
        .collect()
}

pub fn select_uncertainty(model: &RidgeModel, pool_features: &[f64]) -> Result<SelectionResult> {
    pick(&uncertainty_scores(model, pool_features)?)
}

/// Population variance of the committee's predictions for every candidate row.
pub fn qbc_scores(committee: &Committee, pool_features: &[f64], p: usize) -> Vec<f64> {
    pool_features
        .chunks(p)
        .map(|x| {
            let preds = committee.predictions(x);
            let b = preds.len() as f64;
            let mean = preds.iter().sum::<f64>() / b;
            preds.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / b
        })
        .collect()
}

pub fn select_qbc(
    committee: &Committee,
    pool_features: &[f64],
    p: usize,
) -> Result<SelectionResult> {
    if committee.size() < 2 {
        return Err(Error::invalid("QBC needs at least 2 committee members"));
    }
    pick(&qbc_scores(committee, pool_features, p))
}

/// Expected gradient norm `(1/B) Σ_k ‖(f − y_k) · x̃‖` for one candidate.
pub fn emcm_score(prediction: f64, committee_predictions: &[f64], x_tilde: &[f64]) -> f64 {
    let norm = x_tilde.iter().map(|v| v * v).sum::<f64>().sqrt();
    committee_predictions
        .iter()
        .map(|yk| (prediction - yk).abs() * norm)
        .sum::<f64>()
        / committee_predictions.len() as f64
}

/// `x̃` is the candidate centred by the model's training means with a trailing 1 for the
/// intercept.
pub fn emcm_scores(model: &RidgeModel, committee: &Committee, pool_features: &[f64]) -> Vec<f64> {
    pool_features
        .chunks(model.n_features())
        .map(|x| {
            let mut xt = model.center(x);
            xt.push(1.0);
            emcm_score(model.predict(x), &committee.predictions(x), &xt)
        })
        .collect()
}

pub fn select_emcm(
    model: &RidgeModel,
    committee: &Committee,
    pool_features: &[f64],
) -> Result<SelectionResult> {
    if committee.size() < 2 {
        return Err(Error::invalid("EMCM needs at least 2 committee members"));
    }
    pick(&emcm_scores(model, committee, pool_features))
}

/// EGAL constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EgalConfig {
    /// Maximum number of rows sampled to estimate the kernel bandwidth.
    pub bandwidth_sample: usize,
    /// Candidates whose nearest-labeled distance falls below this quantile are filtered out.
    pub diversity_quantile: f64,
}

impl Default for EgalConfig {
    fn default() -> Self {
        Self {
            bandwidth_sample: 500,
            diversity_quantile: 0.25,
        }
    }
}

/// Mean pairwise feature distance over a seeded sample of at most `sample_size` rows.
pub fn egal_bandwidth(dataset: &Dataset, sample_size: usize, rng: &mut Rng) -> f64 {
    let mut idx: Vec<usize> = (0..dataset.len()).collect();
    rng::shuffle(rng, &mut idx);
    idx.truncate(sample_size.max(2));
    let mut total = 0.0;
    let mut count = 0usize;
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            total += euclidean(dataset.row(i), dataset.row(j));
            count += 1;
        }
    }
    let delta = if count == 0 {
        0.0
    } else {
        total / count as f64
    };
    if delta > 0.0 {
        delta
    } else {
        1.0
    }
}

/// Gaussian similarity `exp(−‖a − b‖² / (2δ²))`.
pub fn egal_similarity(a: &[f64], b: &[f64], bandwidth: f64) -> f64 {
    let d = euclidean(a, b);
    (-(d * d) / (2.0 * bandwidth * bandwidth)).exp()
}

/// Per-candidate density (summed similarity to the rest of the pool), maintained as candidates
/// leave the pool.
#[derive(Debug, Clone, PartialEq)]
pub struct EgalDensity {
    bandwidth: f64,
    pool: Vec<usize>,
    density: Vec<f64>,
}

impl EgalDensity {
    pub fn build(dataset: &Dataset, pool: &[usize], bandwidth: f64) -> Self {
        let density = pool
            .iter()
            .map(|&c| {
                pool.iter()
                    .filter(|&&o| o != c)
                    .map(|&o| egal_similarity(dataset.row(c), dataset.row(o), bandwidth))
                    .sum()
            })
            .collect();
        Self {
            bandwidth,
            pool: pool.to_vec(),
            density,
        }
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn remove(&mut self, dataset: &Dataset, row: usize) -> Result<()> {
        let pos = self
            .pool
            .iter()
            .position(|&r| r == row)
            .ok_or(Error::NotInPool(row))?;
        self.pool.remove(pos);
        self.density.remove(pos);
        let gone = dataset.row(row);
        for (d, &c) in self.density.iter_mut().zip(&self.pool) {
            *d -= egal_similarity(dataset.row(c), gone, self.bandwidth);
        }
        Ok(())
    }
}

/// Densest candidate among those passing the diversity filter.
pub fn select_egal(
    dx_min: &[f64],
    density: &[f64],
    diversity_quantile: f64,
) -> Result<SelectionResult> {
    if dx_min.is_empty() {
        return Err(Error::EmptyPool);
    }
    if dx_min.len() != density.len() {
        return Err(Error::DimensionMismatch {
            expected: dx_min.len(),
            got: density.len(),
        });
    }
    let threshold = quantile_midpoint(dx_min, diversity_quantile);
    let mut kept: Vec<usize> = (0..dx_min.len())
        .filter(|&i| dx_min[i] >= threshold)
        .collect();
    if kept.is_empty() {
        kept = (0..dx_min.len()).collect();
    }
    let mut best = kept[0];
    for &i in &kept[1..] {
        if density[i] > density[best] {
            best = i;
        }
    }
    Ok(SelectionResult {
        chosen: best,
        score: density[best],
        weight_used: None,
    })
}

/// Outcome of comparing a dense high-uncertainty target with a sparse low-uncertainty distractor
/// under multiplicative and additive scoring.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VetoReport {
    pub d_star: f64,
    pub u_star: f64,
    pub d_prime: f64,
    pub u_prime: f64,
    pub igs_target: f64,
    pub igs_distractor: f64,
    pub igs_prefers_distractor: bool,
    /// `K = (d′ − d*) / (u* − u′) + 1`.
    pub k: f64,
    /// Open interval of weights for which the additive score ranks the target first.
    pub additive_weight_window: (f64, f64),
}

impl VetoReport {
    pub fn additive_scores(&self, w: f64) -> (f64, f64) {
        (
            w * self.d_star + (1.0 - w) * self.u_star,
            w * self.d_prime + (1.0 - w) * self.u_prime,
        )
    }

    pub fn additive_prefers_target(&self, w: f64) -> bool {
        let (t, d) = self.additive_scores(w);
        t > d
    }

    pub fn window_is_empty(&self) -> bool {
        !(self.additive_weight_window.1 > self.additive_weight_window.0)
    }
}

pub fn verify_density_veto(
    d_star: f64,
    u_star: f64,
    d_prime: f64,
    u_prime: f64,
) -> Result<VetoReport> {
    for (name, v) in [
        ("d*", d_star),
        ("u*", u_star),
        ("d'", d_prime),
        ("u'", u_prime),
    ] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::invalid(format!("{name} = {v} outside [0, 1]")));
        }
    }
    if !(u_star > u_prime) {
        return Err(Error::invalid(
            "the target must have higher uncertainty (u* > u')",
        ));
    }
    if !(d_prime > d_star) {
        return Err(Error::invalid(
            "the distractor must be more diverse (d' > d*)",
        ));
    }
    let igs_target = d_star * u_star;
    let igs_distractor = d_prime * u_prime;
    let k = (d_prime - d_star) / (u_star - u_prime) + 1.0;
    Ok(VetoReport {
        d_star,
        u_star,
        d_prime,
        u_prime,
        igs_target,
        igs_distractor,
        igs_prefers_distractor: igs_distractor > igs_target,
        k,
        additive_weight_window: (0.0, 1.0 / k),
    })
}
