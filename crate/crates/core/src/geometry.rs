//! Nearest-labeled distances in feature and output space.
//!
//! For a candidate `n` and labeled point `m` the feature distance is `‖x_n − x_m‖` and the output
//! distance is `|f(x_n) − y_m|`, where `f` is the current model and `y_m` the true label.
//! [`DistanceCache`] keeps the per-candidate minima; the feature minima are maintained
//! incrementally as points are acquired, the output minima are rebuilt after every refit.

use crate::data::{Dataset, SplitState};
use crate::error::{Error, Result};

/// Euclidean distance, summed in coordinate order.
#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceCache {
    pool: Vec<usize>,
    labeled: Vec<usize>,
    dx_min: Vec<f64>,
    dy_min: Vec<f64>,
}

impl DistanceCache {
    /// `predictions[i]` is the model prediction for `split.pool[i]`.
    pub fn build(dataset: &Dataset, split: &SplitState, predictions: &[f64]) -> Result<Self> {
        if split.labeled.is_empty() {
            return Err(Error::invalid(
                "distance cache needs a non-empty labeled set",
            ));
        }
        check_len(split.pool.len(), predictions)?;
        let dx_min = split
            .pool
            .iter()
            .map(|&n| {
                split
                    .labeled
                    .iter()
                    .map(|&m| euclidean(dataset.row(n), dataset.row(m)))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let mut cache = Self {
            pool: split.pool.clone(),
            labeled: split.labeled.clone(),
            dx_min,
            dy_min: Vec::new(),
        };
        cache.refresh_predictions(dataset, predictions)?;
        Ok(cache)
    }

    /// Moves `acquired_row` from the pool to the labeled set. Feature minima are updated in
    /// `O(|pool| · p)`; output minima are recomputed from `predictions` (one per remaining
    /// candidate, in pool order).
    pub fn update_after_acquisition(
        &mut self,
        dataset: &Dataset,
        acquired_row: usize,
        predictions: &[f64],
    ) -> Result<()> {
        let pos = self
            .pool
            .iter()
            .position(|&r| r == acquired_row)
            .ok_or(Error::NotInPool(acquired_row))?;
        check_len(self.pool.len() - 1, predictions)?;
        self.pool.remove(pos);
        self.dx_min.remove(pos);
        self.labeled.push(acquired_row);
        let new_x = dataset.row(acquired_row);
        for (d, &n) in self.dx_min.iter_mut().zip(&self.pool) {
            *d = d.min(euclidean(dataset.row(n), new_x));
        }
        self.refresh_predictions(dataset, predictions)
    }

    /// Recomputes the output-space minima for a refitted model.
    pub fn refresh_predictions(&mut self, dataset: &Dataset, predictions: &[f64]) -> Result<()> {
        check_len(self.pool.len(), predictions)?;
        self.dy_min = predictions
            .iter()
            .map(|&f| {
                self.labeled
                    .iter()
                    .map(|&m| (f - dataset.target(m)).abs())
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        Ok(())
    }

    pub fn pool(&self) -> &[usize] {
        &self.pool
    }

    pub fn labeled(&self) -> &[usize] {
        &self.labeled
    }

    pub fn dx_min(&self) -> &[f64] {
        &self.dx_min
    }

    pub fn dy_min(&self) -> &[f64] {
        &self.dy_min
    }

    pub fn len(&self) -> usize {
        self.pool.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pool.is_empty()
    }

    /// Full candidate × labeled distance matrices for the current state.
    pub fn pairwise(&self, dataset: &Dataset, predictions: &[f64]) -> Result<PairwiseDistances> {
        check_len(self.pool.len(), predictions)?;
        PairwiseDistances::compute(dataset, &self.pool, &self.labeled, predictions)
    }
}

fn check_len(expected: usize, predictions: &[f64]) -> Result<()> {
    if predictions.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: predictions.len(),
        });
    }
    Ok(())
}

/// Row-major `candidates × labeled` matrices of feature and output distances.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseDistances {
    n_candidates: usize,
    n_labeled: usize,
    dx: Vec<f64>,
    dy: Vec<f64>,
}

impl PairwiseDistances {
    pub fn compute(
        dataset: &Dataset,
        pool: &[usize],
        labeled: &[usize],
        predictions: &[f64],
    ) -> Result<Self> {
        check_len(pool.len(), predictions)?;
        let mut dx = Vec::with_capacity(pool.len() * labeled.len());
        let mut dy = Vec::with_capacity(pool.len() * labeled.len());
        for (&n, &f) in pool.iter().zip(predictions) {
            let xn = dataset.row(n);
            for &m in labeled {
                dx.push(euclidean(xn, dataset.row(m)));
                dy.push((f - dataset.target(m)).abs());
            }
        }
        Self::from_matrices(pool.len(), labeled.len(), dx, dy)
    }

    /// Wraps precomputed matrices (row-major, one row per candidate).
    pub fn from_matrices(
        n_candidates: usize,
        n_labeled: usize,
        dx: Vec<f64>,
        dy: Vec<f64>,
    ) -> Result<Self> {
        let expected = n_candidates * n_labeled;
        for m in [&dx, &dy] {
            if m.len() != expected {
                return Err(Error::DimensionMismatch {
                    expected,
                    got: m.len(),
                });
            }
        }
        if dx.iter().chain(&dy).any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("distances must be finite and non-negative"));
        }
        Ok(Self {
            n_candidates,
            n_labeled,
            dx,
            dy,
        })
    }

    pub fn n_candidates(&self) -> usize {
        self.n_candidates
    }

    pub fn n_labeled(&self) -> usize {
        self.n_labeled
    }

    pub fn dx(&self) -> &[f64] {
        &self.dx
    }

    pub fn dy(&self) -> &[f64] {
        &self.dy
    }

    pub fn dx_row(&self, c: usize) -> &[f64] {
        &self.dx[c * self.n_labeled..(c + 1) * self.n_labeled]
    }

    pub fn dy_row(&self, c: usize) -> &[f64] {
        &self.dy[c * self.n_labeled..(c + 1) * self.n_labeled]
    }
}

/// `(min, max)` of a non-empty collection.
pub fn value_range(values: &[f64]) -> Option<(f64, f64)> {
    let first = *values.first()?;
    Some(
        values
            .iter()
            .fold((first, first), |(lo, hi), &v| (lo.min(v), hi.max(v))),
    )
}

/// Min–max normalisation `φ(d) = (d − d_min) / (d_max − d_min)`; all zeros when the range is
/// degenerate.
pub fn normalize_phi(values: &[f64]) -> Result<Vec<f64>> {
    let (lo, hi) = value_range(values)
        .ok_or_else(|| Error::invalid("cannot normalise an empty collection"))?;
    if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::invalid("φ expects finite non-negative distances"));
    }
    if hi == lo {
        return Ok(vec![0.0; values.len()]);
    }
    let span = hi - lo;
    Ok(values.iter().map(|v| (v - lo) / span).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{initial_split, sample_two_regime};
    use crate::rng;
    use rand::Rng as _;

    fn line(points: &[f64], targets: &[f64]) -> Dataset {
        let rows: Vec<Vec<f64>> = points.iter().map(|&x| vec![x]).collect();
        Dataset::from_rows("line", &rows, targets.to_vec()).unwrap()
    }

    #[test]
    fn one_dimensional_minima() {
        // rows: 0 -> x=0, 1 -> x=1, 2 -> x=0.4, 3 -> x=1 (coincident)
        let ds = line(&[0.0, 1.0, 0.4, 1.0], &[0.0, 2.0, 0.0, 0.0]);
        let split = SplitState {
            labeled: vec![0, 1],
            pool: vec![2, 3],
            seed: 0,
        };
        let cache = DistanceCache::build(&ds, &split, &[1.5, 2.0]).unwrap();
        assert!((cache.dx_min()[0] - 0.4).abs() < 1e-15);
        assert_eq!(cache.dx_min()[1], 0.0);
        assert!((cache.dy_min()[0] - 0.5).abs() < 1e-15);
        assert_eq!(cache.dy_min()[1], 0.0);
    }

    #[test]
    fn build_errors() {
        let ds = line(&[0.0, 1.0, 2.0], &[0.0, 1.0, 2.0]);
        let split = SplitState {
            labeled: vec![0],
            pool: vec![1, 2],
            seed: 0,
        };
        assert!(DistanceCache::build(&ds, &split, &[0.0]).is_err());
        let empty = SplitState {
            labeled: vec![],
            pool: vec![0, 1, 2],
            seed: 0,
        };
        assert!(DistanceCache::build(&ds, &empty, &[0.0; 3]).is_err());
    }

    fn random_dataset(n: usize, p: usize, seed: u64) -> Dataset {
        let mut r = rng::rng_from_seed(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|_| r.random::<f64>()).collect())
            .collect();
        let y = (0..n).map(|_| r.random::<f64>() * 4.0 - 2.0).collect();
        Dataset::from_rows("rand", &rows, y).unwrap()
    }

    fn brute_dx(ds: &Dataset, pool: &[usize], labeled: &[usize]) -> Vec<f64> {
        pool.iter()
            .map(|&n| {
                let mut best = f64::INFINITY;
                for &m in labeled {
                    let d: f64 = (0..ds.n_features())
                        .map(|j| (ds.row(n)[j] - ds.row(m)[j]).powi(2))
                        .sum::<f64>()
                        .sqrt();
                    if d < best {
                        best = d;
                    }
                }
                best
            })
            .collect()
    }

    #[test]
    fn incremental_matches_rebuild() {
        let ds = random_dataset(20, 3, 77);
        let mut split = initial_split(&ds, 0.15, 5).unwrap();
        let preds = vec![0.3; split.pool.len()];
        let mut cache = DistanceCache::build(&ds, &split, &preds).unwrap();
        let mut r = rng::rng_from_seed(1);
        while !split.pool.is_empty() {
            let pos = r.random_range(0..split.pool.len());
            let before: Vec<(usize, f64)> = cache
                .pool()
                .iter()
                .copied()
                .zip(cache.dx_min().iter().copied())
                .collect();
            let row = split.acquire(pos).unwrap();
            let preds: Vec<f64> = split.pool.iter().map(|&i| ds.target(i) * 0.5).collect();
            cache.update_after_acquisition(&ds, row, &preds).unwrap();
            let rebuilt = DistanceCache::build(&ds, &split, &preds).unwrap();
            assert_eq!(cache.dx_min(), rebuilt.dx_min());
            assert_eq!(cache.dy_min(), rebuilt.dy_min());
            assert_eq!(
                cache.dx_min(),
                brute_dx(&ds, &split.pool, &split.labeled).as_slice()
            );
            // non-increasing for survivors
            for (&row, &d) in cache.pool().iter().zip(cache.dx_min()) {
                let old = before.iter().find(|(r, _)| *r == row).unwrap().1;
                assert!(d <= old);
            }
        }
        assert!(cache.is_empty());
    }

    #[test]
    fn acquiring_a_duplicate_leaves_minima_unchanged() {
        let ds = line(&[0.0, 1.0, 0.0, 0.3, 0.7], &[0.0; 5]);
        let split = SplitState {
            labeled: vec![0, 1],
            pool: vec![2, 3, 4],
            seed: 0,
        };
        let mut cache = DistanceCache::build(&ds, &split, &[0.0; 3]).unwrap();
        let before = cache.dx_min()[1..].to_vec();
        cache.update_after_acquisition(&ds, 2, &[0.0; 2]).unwrap();
        assert_eq!(cache.dx_min(), before.as_slice());
        assert!(matches!(
            cache.update_after_acquisition(&ds, 2, &[0.0]),
            Err(Error::NotInPool(2))
        ));
    }

    #[test]
    fn last_candidate_leaves_empty_cache() {
        let ds = line(&[0.0, 1.0, 0.5], &[0.0; 3]);
        let split = SplitState {
            labeled: vec![0, 1],
            pool: vec![2],
            seed: 0,
        };
        let mut cache = DistanceCache::build(&ds, &split, &[0.0]).unwrap();
        cache.update_after_acquisition(&ds, 2, &[]).unwrap();
        assert_eq!(cache.len(), 0);
    }

    #[test]
    fn phi_examples() {
        assert_eq!(
            normalize_phi(&[2.0, 4.0, 6.0]).unwrap(),
            vec![0.0, 0.5, 1.0]
        );
        assert_eq!(normalize_phi(&[3.0, 3.0, 3.0]).unwrap(), vec![0.0; 3]);
        assert_eq!(normalize_phi(&[5.0]).unwrap(), vec![0.0]);
        assert!(normalize_phi(&[]).is_err());
        assert!(normalize_phi(&[1.0, -1.0]).is_err());
    }

    #[test]
    fn pairwise_matches_cache_minima() {
        let ds = sample_two_regime(40, 3).unwrap();
        let split = initial_split(&ds, 0.2, 8).unwrap();
        let preds: Vec<f64> = split.pool.iter().map(|&i| ds.row(i)[0]).collect();
        let cache = DistanceCache::build(&ds, &split, &preds).unwrap();
        let pw = cache.pairwise(&ds, &preds).unwrap();
        for c in 0..pw.n_candidates() {
            let mx = pw.dx_row(c).iter().copied().fold(f64::INFINITY, f64::min);
            let my = pw.dy_row(c).iter().copied().fold(f64::INFINITY, f64::min);
            assert_eq!(mx, cache.dx_min()[c]);
            assert_eq!(my, cache.dy_min()[c]);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn phi_is_monotone_and_bounded(v in proptest::collection::vec(0.0f64..100.0, 1..40)) {
                let out = normalize_phi(&v).unwrap();
                for (i, a) in v.iter().enumerate() {
                    prop_assert!((0.0..=1.0).contains(&out[i]));
                    for (j, b) in v.iter().enumerate() {
                        if a <= b {
                            prop_assert!(out[i] <= out[j]);
                        }
                    }
                }
            }

            #[test]
            fn phi_preserves_argmax_of_minima(seed in 0u64..10_000) {
                let mut r = rng::rng_from_seed(seed);
                let (nc, nl) = (r.random_range(1..12usize), r.random_range(1..8usize));
                let d: Vec<f64> = (0..nc * nl).map(|_| r.random::<f64>() * 3.0).collect();
                let phi = normalize_phi(&d).unwrap();
                let (lo, hi) = value_range(&d).unwrap();
                prop_assume!(hi > lo);
                let argmax = |m: &[f64]| {
                    let mins: Vec<f64> = m.chunks(nl).map(|row| row.iter().copied().fold(f64::INFINITY, f64::min)).collect();
                    let mut best = 0;
                    for (i, v) in mins.iter().enumerate() {
                        if *v > mins[best] { best = i; }
                    }
                    best
                };
                prop_assert_eq!(argmax(&d), argmax(&phi));
            }
        }
    }
}
