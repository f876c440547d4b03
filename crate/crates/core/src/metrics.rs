//! Learning-curve metrics and paired statistics.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SplitState};
use crate::error::{Error, Result};
use crate::model::RidgeModel;

/// One row per acquisition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub labeled_count: usize,
    pub rmse: f64,
    pub cc: Option<f64>,
    pub weight: Option<f64>,
    pub selector_score: f64,
    /// Dataset row that was acquired.
    pub chosen_index: usize,
    /// First feature of the acquired row, kept for weight-versus-position diagnostics.
    pub x_position: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub dataset: String,
    pub method: String,
    pub seed: u64,
    pub pool_size: usize,
    /// Full-pool RMSE before the first acquisition; identical for every method on a seed.
    pub initial_rmse: f64,
    pub initial_cc: Option<f64>,
    pub rows: Vec<TraceRow>,
}

impl Trace {
    /// `[RMSE₀, RMSE₁, …, RMSE_P]`, the curve used for AUC and milestones.
    pub fn curve(&self) -> Vec<f64> {
        std::iter::once(self.initial_rmse)
            .chain(self.rows.iter().map(|r| r.rmse))
            .collect()
    }

    pub fn mean_rmse(&self) -> f64 {
        let c = self.curve();
        c.iter().sum::<f64>() / c.len() as f64
    }

    pub fn acquisition_order(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.chosen_index).collect()
    }
}

/// True labels on the labeled set, model predictions on the pool.
pub fn hybrid_predictions(dataset: &Dataset, split: &SplitState, model: &RidgeModel) -> Vec<f64> {
    let mut out = dataset.targets().to_vec();
    for &i in &split.pool {
        out[i] = model.predict(dataset.row(i));
    }
    out
}

/// `√(Σ_pool residual² / N)`.
pub fn full_pool_rmse(dataset: &Dataset, split: &SplitState, model: &RidgeModel) -> f64 {
    let sse: f64 = split
        .pool
        .iter()
        .map(|&i| (model.predict(dataset.row(i)) - dataset.target(i)).powi(2))
        .sum();
    (sse / dataset.len() as f64).sqrt()
}

/// Pearson correlation; `None` when either vector has zero variance.
pub fn correlation_coefficient(predictions: &[f64], truth: &[f64]) -> Option<f64> {
    let n = predictions.len();
    if n < 2 || truth.len() != n {
        return None;
    }
    let mp = predictions.iter().sum::<f64>() / n as f64;
    let mt = truth.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (p, t) in predictions.iter().zip(truth) {
        sxy += (p - mp) * (t - mt);
        sxx += (p - mp) * (p - mp);
        syy += (t - mt) * (t - mt);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Unit-spaced trapezoid rule.
pub fn auc_trapezoid(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::invalid("AUC needs at least 2 points"));
    }
    Ok(values.windows(2).map(|w| 0.5 * (w[0] + w[1])).sum())
}

pub fn relative_auc(method: &[f64], igs: &[f64]) -> Result<f64> {
    if method.len() != igs.len() {
        return Err(Error::DimensionMismatch {
            expected: igs.len(),
            got: method.len(),
        });
    }
    let base = auc_trapezoid(igs)?;
    if base <= 0.0 {
        return Err(Error::Numerical("baseline AUC is zero".into()));
    }
    Ok(auc_trapezoid(method)? / base)
}

/// Mean of per-seed ratios over paired curves.
pub fn mean_relative_auc(pairs: &[(&[f64], &[f64])]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::invalid("no seeds to average"));
    }
    let mut total = 0.0;
    for (m, b) in pairs {
        total += relative_auc(m, b)?;
    }
    Ok(total / pairs.len() as f64)
}

/// First index whose value is at or below `(1 − q)·curve[0]`.
pub fn milestone_index(curve: &[f64], q: f64) -> Option<usize> {
    let threshold = (1.0 - q) * curve.first()?;
    curve.iter().position(|&v| v <= threshold)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelEfficiency {
    pub n_method: usize,
    pub n_igs: usize,
    pub n_rel: f64,
}

/// Labels needed to close a fraction `q` of the gap between `RMSE₀` and zero, relative to iGS.
pub fn label_efficiency(method: &[f64], igs: &[f64], q: f64) -> Result<LabelEfficiency> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::invalid(format!(
            "milestone fraction {q} outside (0, 1)"
        )));
    }
    let (Some(&m0), Some(&b0)) = (method.first(), igs.first()) else {
        return Err(Error::invalid("empty curve"));
    };
    if !(b0 > 0.0) || !(m0 > 0.0) {
        return Err(Error::Numerical("initial RMSE must be positive".into()));
    }
    let unreached = || Error::Numerical(format!("milestone q={q} never reached"));
    let n_method = milestone_index(method, q).ok_or_else(unreached)?;
    let n_igs = milestone_index(igs, q).ok_or_else(unreached)?;
    Ok(LabelEfficiency {
        n_method,
        n_igs,
        n_rel: n_method as f64 / n_igs as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Non-zero differences.
    pub n: usize,
    pub w_plus: f64,
    pub p_value: f64,
    pub exact: bool,
}

/// Largest sample size handled by exact enumeration.
pub const WILCOXON_EXACT_MAX: usize = 12;

/// Average ranks of `values` (1-based), ties sharing their mean rank.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Two-sided paired signed-rank test of `a − b`.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let d: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|v| *v != 0.0)
        .collect();
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite difference".into()));
    }
    let n = d.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            n,
            w_plus: 0.0,
            p_value: 1.0,
            exact: true,
        });
    }
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks = average_ranks(&abs);
    let w_plus: f64 = ranks
        .iter()
        .zip(&d)
        .filter(|(_, v)| **v > 0.0)
        .map(|(r, _)| r)
        .sum();
    if n <= WILCOXON_EXACT_MAX {
        return Ok(WilcoxonResult {
            n,
            w_plus,
            p_value: exact_p(&ranks, w_plus),
            exact: true,
        });
    }
    let nf = n as f64;
    let mut tie_term = 0.0;
    let mut sorted = abs.clone();
    sorted.sort_by(f64::total_cmp);
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|&&v| v == sorted[i]).count();
        let t = j as f64;
        tie_term += t * t * t - t;
        i += j;
    }
    let mean = nf * (nf + 1.0) / 4.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let p_value = if var <= 0.0 {
        1.0
    } else {
        let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
        libm::erfc(z / std::f64::consts::SQRT_2).min(1.0)
    };
    Ok(WilcoxonResult {
        n,
        w_plus,
        p_value,
        exact: false,
    })
}

/// Exact two-sided p-value from the sign-flip distribution of the (doubled, hence integral)
/// ranks.
fn exact_p(ranks: &[f64], w_plus: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0u64; total + 1];
    counts[0] = 1;
    for &r in &doubled {
        for s in (r..=total).rev() {
            counts[s] += counts[s - r];
        }
    }
    let w = (2.0 * w_plus).round() as usize;
    let all = (1u64 << ranks.len()) as f64;
    let lower: u64 = counts[..=w].iter().sum();
    let upper: u64 = counts[w..].iter().sum();
    (2.0 * lower.min(upper) as f64 / all).min(1.0)
}

/// Pointwise summaries of one method's curves across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedAggregate {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    /// Mean of per-seed `method − iGS` differences.
    pub delta_mean: Vec<f64>,
    /// Population std of the per-seed differences.
    pub delta_std: Vec<f64>,
}

/// `method` and `igs` are curves paired by seed.
pub fn aggregate_seeds(method: &[Vec<f64>], igs: &[Vec<f64>]) -> Result<SeedAggregate> {
    if method.is_empty() || method.len() != igs.len() {
        return Err(Error::invalid(
            "aggregation needs equal, non-zero numbers of method and iGS curves",
        ));
    }
    let len = method[0].len();
    if method.iter().chain(igs).any(|c| c.len() != len) {
        return Err(Error::invalid("curves have different lengths"));
    }
    let s = method.len() as f64;
    let moments = |cols: &dyn Fn(usize) -> Vec<f64>| -> (Vec<f64>, Vec<f64>) {
        (0..len)
            .map(|t| {
                let v = cols(t);
                let m = v.iter().sum::<f64>() / s;
                (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / s)
            })
            .unzip()
    };
    let (mean, variance) = moments(&|t| method.iter().map(|c| c[t]).collect());
    let (delta_mean, delta_var) =
        moments(&|t| method.iter().zip(igs).map(|(m, b)| m[t] - b[t]).collect());
    Ok(SeedAggregate {
        mean,
        variance,
        delta_mean,
        delta_std: delta_var.into_iter().map(f64::sqrt).collect(),
    })
}
