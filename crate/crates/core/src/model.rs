//! Ridge regression: closed-form fit, analytic predictive variance, K-fold CV RMSE and bootstrap
//! committees.
//!
//! Feature matrices are passed row-major as `(&[f64], n_features)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::rng::{self, uniform_index};

pub const DEFAULT_ALPHA: f64 = 0.01;
pub const DEFAULT_COMMITTEE_SIZE: usize = 10;

/// A fitted ridge model. The intercept is unpenalised: features and targets are centred before
/// solving `(XcᵀXc + αI) β = Xcᵀ yc`.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeModel {
    coefficients: Vec<f64>,
    intercept: f64,
    alpha: f64,
    sigma2_hat: f64,
    gram_inverse: DMatrix<f64>,
    feature_means: Vec<f64>,
}

impl RidgeModel {
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Residual variance estimate `RSS / max(k − p − 1, 1)`.
    pub fn sigma2_hat(&self) -> f64 {
        self.sigma2_hat
    }

    /// `(XcᵀXc + αI)⁻¹`.
    pub fn gram_inverse(&self) -> &DMatrix<f64> {
        &self.gram_inverse
    }

    pub fn feature_means(&self) -> &[f64] {
        &self.feature_means
    }

    pub fn n_features(&self) -> usize {
        self.coefficients.len()
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept
            + self
                .coefficients
                .iter()
                .zip(x)
                .map(|(b, v)| b * v)
                .sum::<f64>()
    }

    /// Predictions for every row of a row-major matrix.
    pub fn predict_rows(&self, x: &[f64]) -> Vec<f64> {
        x.chunks(self.n_features())
            .map(|r| self.predict(r))
            .collect()
    }

    /// `x − x̄_train`.
    pub fn center(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.feature_means)
            .map(|(v, m)| v - m)
            .collect()
    }

    /// Returns a copy with the residual variance replaced.
    pub fn with_sigma2(&self, sigma2_hat: f64) -> Self {
        Self {
            sigma2_hat,
            ..self.clone()
        }
    }
}

fn validate(x: &[f64], p: usize, y: &[f64], alpha: f64, min_rows: usize) -> Result<()> {
    if p == 0 {
        return Err(Error::invalid("ridge needs at least one feature"));
    }
    if x.len() != y.len() * p {
        return Err(Error::DimensionMismatch {
            expected: y.len() * p,
            got: x.len(),
        });
    }
    if y.len() < min_rows {
        return Err(Error::invalid(format!(
            "ridge needs at least {min_rows} training rows, got {}",
            y.len()
        )));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!(
            "ridge penalty must be positive, got {alpha}"
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite training data"));
    }
    Ok(())
}

/// Closed-form ridge fit on `k ≥ 2` rows.
pub fn fit_ridge(x: &[f64], p: usize, y: &[f64], alpha: f64) -> Result<RidgeModel> {
    validate(x, p, y, alpha, 2)?;
    fit_unchecked(x, p, y, alpha)
}

// Also used for CV folds and bootstrap members, where a single training row is legitimate.
fn fit_unchecked(x: &[f64], p: usize, y: &[f64], alpha: f64) -> Result<RidgeModel> {
    let k = y.len();
    let kf = k as f64;
    let mut feature_means = vec![0.0; p];
    for row in x.chunks(p) {
        for (m, v) in feature_means.iter_mut().zip(row) {
            *m += v;
        }
    }
    feature_means.iter_mut().for_each(|m| *m /= kf);
    let y_mean = y.iter().sum::<f64>() / kf;

    let xc = DMatrix::from_fn(k, p, |i, j| x[i * p + j] - feature_means[j]);
    let yc = DVector::from_iterator(k, y.iter().map(|v| v - y_mean));
    let mut gram = xc.transpose() * &xc;
    for j in 0..p {
        gram[(j, j)] += alpha;
    }
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Numerical("ridge Gram matrix is not positive definite".into()))?;
    let beta = chol.solve(&(xc.transpose() * &yc));
    let gram_inverse = chol.inverse();

    let coefficients: Vec<f64> = beta.iter().copied().collect();
    let intercept = y_mean
        - coefficients
            .iter()
            .zip(&feature_means)
            .map(|(b, m)| b * m)
            .sum::<f64>();
    let rss = (&xc * &beta - &yc).norm_squared();
    let dof = (k as i64 - p as i64 - 1).max(1) as f64;

    Ok(RidgeModel {
        coefficients,
        intercept,
        alpha,
        sigma2_hat: rss / dof,
        gram_inverse,
        feature_means,
    })
}

/// Analytic predictive variance `σ̂² · x_cᵀ (XcᵀXc + αI)⁻¹ x_c`.
pub fn predictive_variance(model: &RidgeModel, x: &[f64]) -> Result<f64> {
    if x.len() != model.n_features() {
        return Err(Error::DimensionMismatch {
            expected: model.n_features(),
            got: x.len(),
        });
    }
    let xc = DVector::from_vec(model.center(x));
    let quad = xc.dot(&(&model.gram_inverse * &xc));
    Ok((model.sigma2_hat * quad).max(0.0))
}

/// Outcome of [`cv_rmse`].
#[derive(Debug, Clone, PartialEq)]
pub struct CvScore {
    pub rmse: f64,
    /// Folds actually used (fewer than requested when there are fewer rows than folds).
    pub folds: usize,
    pub warning: Option<String>,
}

/// Fold membership: the row indices `0..k` are shuffled with a [`ChaCha8Rng`](rand_chacha::ChaCha8Rng)
/// seeded by `seed`, then cut into `folds` contiguous chunks, the first `k % folds` of which get
/// one extra row.
pub fn fold_assignment(k: usize, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..k).collect();
    rng::shuffle(&mut rng::rng_from_seed(seed), &mut idx);
    let base = k / folds;
    let extra = k % folds;
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let len = base + usize::from(f < extra);
        out.push(idx[start..start + len].to_vec());
        start += len;
    }
    out
}

/// K-fold cross-validated RMSE, pooled over all held-out residuals.
pub fn cv_rmse(
    x: &[f64],
    p: usize,
    y: &[f64],
    alpha: f64,
    folds: usize,
    seed: u64,
) -> Result<CvScore> {
    validate(x, p, y, alpha, 2)?;
    if folds < 2 {
        return Err(Error::invalid(format!(
            "cross-validation needs at least 2 folds, got {folds}"
        )));
    }
    let k = y.len();
    let (folds, warning) = if k < folds {
        let msg = format!("only {k} labeled rows for {folds}-fold CV; using leave-one-out");
        log::debug!("{msg}");
        (k, Some(msg))
    } else {
        (folds, None)
    };

    let assignment = fold_assignment(k, folds, seed);
    let mut in_fold = vec![usize::MAX; k];
    for (f, members) in assignment.iter().enumerate() {
        for &i in members {
            in_fold[i] = f;
        }
    }
    let mut sse = 0.0;
    for (f, held_out) in assignment.iter().enumerate() {
        let mut xt = Vec::with_capacity((k - held_out.len()) * p);
        let mut yt = Vec::with_capacity(k - held_out.len());
        for i in (0..k).filter(|&i| in_fold[i] != f) {
            xt.extend_from_slice(&x[i * p..(i + 1) * p]);
            yt.push(y[i]);
        }
        let model = fit_unchecked(&xt, p, &yt, alpha)?;
        for &i in held_out {
            let r = y[i] - model.predict(&x[i * p..(i + 1) * p]);
            sse += r * r;
        }
    }
    Ok(CvScore {
        rmse: (sse / k as f64).sqrt(),
        folds,
        warning,
    })
}

/// Bootstrap ensemble of ridge models.
#[derive(Debug, Clone, PartialEq)]
pub struct Committee {
    members: Vec<RidgeModel>,
}

impl Committee {
    pub fn members(&self) -> &[RidgeModel] {
        &self.members
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    /// One prediction per member.
    pub fn predictions(&self, x: &[f64]) -> Vec<f64> {
        self.members.iter().map(|m| m.predict(x)).collect()
    }
}

/// Bootstrap row indices for member `member` of a committee seeded with `seed`: `k` uniform draws
/// with replacement from a generator seeded with `seed + member`.
pub fn bootstrap_indices(k: usize, seed: u64, member: usize) -> Vec<usize> {
    let mut r = rng::rng_from_seed(seed.wrapping_add(member as u64));
    (0..k).map(|_| uniform_index(&mut r, k)).collect()
}

pub fn fit_bootstrap_committee(
    x: &[f64],
    p: usize,
    y: &[f64],
    alpha: f64,
    size: usize,
    seed: u64,
) -> Result<Committee> {
    if size < 2 {
        return Err(Error::invalid(format!(
            "committee needs at least 2 members, got {size}"
        )));
    }
    validate(x, p, y, alpha, 2)?;
    let k = y.len();
    let members = (0..size)
        .map(|b| {
            let idx = bootstrap_indices(k, seed, b);
            let mut xb = Vec::with_capacity(k * p);
            let mut yb = Vec::with_capacity(k);
            for &i in &idx {
                xb.extend_from_slice(&x[i * p..(i + 1) * p]);
                yb.push(y[i]);
            }
            fit_unchecked(&xb, p, &yb, alpha)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Committee { members })
}
