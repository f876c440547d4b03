//! Datasets, preprocessing, initial splits and the synthetic data-generating processes.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Rng};

/// Feature scaling applied to continuous columns.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    /// `(x - mean) / std`, population standard deviation.
    #[default]
    Zscore,
    /// `(x - median) / IQR`, quartiles by the midpoint rule.
    Robust,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub scaling: Scaling,
    /// Header names that are always one-hot encoded.
    pub categorical_columns: Vec<String>,
    /// Treat any column with a non-numeric cell as categorical.
    pub auto_detect: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self::new(Scaling::Zscore)
    }
}

impl PreprocessConfig {
    pub fn new(scaling: Scaling) -> Self {
        Self {
            scaling,
            categorical_columns: Vec::new(),
            auto_detect: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnKind {
    /// `scaled = (raw - center) / scale`.
    Continuous { center: f64, scale: f64 },
    /// One-hot encoded, one output column per category in this order.
    Categorical { categories: Vec<String> },
    /// Degenerate continuous column removed during preprocessing.
    Dropped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub name: String,
    pub kind: ColumnKind,
}

/// Immutable ground truth for one task: an `N x p` feature matrix (row-major) and `N` targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    n_features: usize,
    features: Vec<f64>,
    targets: Vec<f64>,
    columns: Vec<ColumnMeta>,
    warnings: Vec<String>,
}

impl Dataset {
    /// Builds a dataset from already-preprocessed rows.
    pub fn from_rows(
        name: impl Into<String>,
        rows: &[Vec<f64>],
        targets: Vec<f64>,
    ) -> Result<Self> {
        let n_features = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_features) {
            return Err(Error::invalid("ragged feature rows"));
        }
        let columns = (0..n_features)
            .map(|j| ColumnMeta {
                name: format!("x{j}"),
                kind: ColumnKind::Continuous {
                    center: 0.0,
                    scale: 1.0,
                },
            })
            .collect();
        Self::from_parts(
            name,
            n_features,
            rows.iter().flatten().copied().collect(),
            targets,
            columns,
            Vec::new(),
        )
    }

    pub(crate) fn from_parts(
        name: impl Into<String>,
        n_features: usize,
        features: Vec<f64>,
        targets: Vec<f64>,
        columns: Vec<ColumnMeta>,
        warnings: Vec<String>,
    ) -> Result<Self> {
        let n = targets.len();
        if n < 2 {
            return Err(Error::invalid(format!(
                "dataset needs at least 2 rows, got {n}"
            )));
        }
        if n_features == 0 {
            return Err(Error::invalid("dataset needs at least one feature column"));
        }
        if features.len() != n * n_features {
            return Err(Error::DimensionMismatch {
                expected: n * n_features,
                got: features.len(),
            });
        }
        if features.iter().chain(&targets).any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite value in dataset"));
        }
        Ok(Self {
            name: name.into(),
            n_features,
            features,
            targets,
            columns,
            warnings,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn target(&self, i: usize) -> f64 {
        self.targets[i]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn columns(&self) -> &[ColumnMeta] {
        &self.columns
    }

    /// Preprocessing warnings (dropped columns and the like).
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Names of the expanded feature columns, in matrix order.
    pub fn feature_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.n_features);
        for col in &self.columns {
            match &col.kind {
                ColumnKind::Continuous { .. } => names.push(col.name.clone()),
                ColumnKind::Categorical { categories } => {
                    names.extend(categories.iter().map(|c| format!("{}={}", col.name, c)))
                }
                ColumnKind::Dropped => {}
            }
        }
        names
    }

    /// Gathers the given rows into a row-major matrix and a target vector.
    pub fn gather(&self, idx: &[usize]) -> (Vec<f64>, Vec<f64>) {
        let mut x = Vec::with_capacity(idx.len() * self.n_features);
        let mut y = Vec::with_capacity(idx.len());
        for &i in idx {
            x.extend_from_slice(self.row(i));
            y.push(self.targets[i]);
        }
        (x, y)
    }

    /// Writes the dataset as CSV: a header row, the feature columns, then the target `y`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = self.feature_names();
        header.push("y".to_string());
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec: Vec<String> = self.row(i).iter().map(|v| v.to_string()).collect();
            rec.push(self.targets[i].to_string());
            w.write_record(&rec)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::io(path, e.into_error()))?;
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&bytes).map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Quantile by the midpoint rule: the average of the two order statistics bracketing
/// position `q * (n - 1)`.
pub fn quantile_midpoint(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of an empty slice");
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_midpoint_sorted(&sorted, q)
}

pub(crate) fn quantile_midpoint_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    (sorted[lo] + sorted[hi]) / 2.0
}

fn population_mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Loads a CSV file (header row, last column is the target) and preprocesses it.
pub fn load_csv(path: &Path, config: &PreprocessConfig) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    parse_csv(&name, &text, config)
}

/// Parses CSV text; see [`load_csv`].
pub fn parse_csv(name: &str, text: &str, config: &PreprocessConfig) -> Result<Dataset> {
    if text.trim().is_empty() {
        return Err(Error::invalid("empty CSV file"));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.len() < 2 {
        return Err(Error::invalid(
            "CSV needs at least one feature column and a target column",
        ));
    }
    let mut cells: Vec<Vec<String>> = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::invalid(format!(
                "row {} has {} cells, header has {}",
                cells.len() + 2,
                rec.len(),
                header.len()
            )));
        }
        cells.push(rec.iter().map(str::to_string).collect());
    }
    if cells.len() < 2 {
        return Err(Error::invalid(format!(
            "CSV needs at least 2 data rows, got {}",
            cells.len()
        )));
    }

    let n = cells.len();
    let target_col = header.len() - 1;
    let targets = cells
        .iter()
        .enumerate()
        .map(|(i, row)| match row[target_col].parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(Error::invalid(format!(
                "unparseable target {:?} on data row {}",
                row[target_col],
                i + 1
            ))),
        })
        .collect::<Result<Vec<f64>>>()?;

    let mut warnings = Vec::new();
    let mut columns = Vec::with_capacity(target_col);
    // column-major blocks of the expanded output
    let mut blocks: Vec<Vec<f64>> = Vec::new();

    for (j, col_name) in header.iter().enumerate().take(target_col) {
        let raw: Vec<&str> = cells.iter().map(|r| r[j].as_str()).collect();
        let parsed: Vec<Option<f64>> = raw.iter().map(|s| s.parse::<f64>().ok()).collect();
        let declared = config.categorical_columns.iter().any(|c| c == col_name);
        let non_numeric = parsed.iter().any(Option::is_none);
        if declared || non_numeric {
            if non_numeric && !declared && !config.auto_detect {
                return Err(Error::invalid(format!(
                    "column {col_name:?} has non-numeric cells and categorical auto-detection is off"
                )));
            }
            let categories: Vec<String> = raw
                .iter()
                .map(|s| s.to_string())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            for cat in &categories {
                blocks.push(raw.iter().map(|s| f64::from(u8::from(s == cat))).collect());
            }
            columns.push(ColumnMeta {
                name: col_name.clone(),
                kind: ColumnKind::Categorical { categories },
            });
            continue;
        }

        let values: Vec<f64> = parsed.into_iter().map(Option::unwrap).collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite value in column {col_name:?}"
            )));
        }
        let (center, scale) = match config.scaling {
            Scaling::Zscore => population_mean_std(&values),
            Scaling::Robust => {
                let mut sorted = values.clone();
                sorted.sort_by(f64::total_cmp);
                let median = quantile_midpoint_sorted(&sorted, 0.5);
                let iqr = quantile_midpoint_sorted(&sorted, 0.75)
                    - quantile_midpoint_sorted(&sorted, 0.25);
                (median, iqr)
            }
        };
        if !(scale > 0.0) {
            let msg = format!(
                "column {col_name:?} dropped: zero spread under {:?} scaling",
                config.scaling
            );
            log::warn!("{msg}");
            warnings.push(msg);
            columns.push(ColumnMeta {
                name: col_name.clone(),
                kind: ColumnKind::Dropped,
            });
            continue;
        }
        blocks.push(values.iter().map(|v| (v - center) / scale).collect());
        columns.push(ColumnMeta {
            name: col_name.clone(),
            kind: ColumnKind::Continuous { center, scale },
        });
    }

    let p = blocks.len();
    if p == 0 {
        return Err(Error::invalid(
            "no usable feature columns after preprocessing",
        ));
    }
    let mut features = Vec::with_capacity(n * p);
    for i in 0..n {
        features.extend(blocks.iter().map(|b| b[i]));
    }
    Dataset::from_parts(name, p, features, targets, columns, warnings)
}

/// Labeled/pool partition of a dataset's row indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitState {
    pub labeled: Vec<usize>,
    pub pool: Vec<usize>,
    pub seed: u64,
}

impl SplitState {
    /// Moves the candidate at pool position `pos` into the labeled set; returns its row index.
    pub fn acquire(&mut self, pos: usize) -> Result<usize> {
        if pos >= self.pool.len() {
            return Err(Error::invalid(format!(
                "pool position {pos} out of range for pool of {}",
                self.pool.len()
            )));
        }
        let row = self.pool.remove(pos);
        self.labeled.push(row);
        Ok(row)
    }
}

/// Number of initially labeled rows for a fraction `frac` of `n`: `ceil(frac * n)`.
pub fn initial_labeled_count(n: usize, frac: f64) -> usize {
    // guard against 0.05 * 100 = 5.000000000000001 style rounding
    (frac * n as f64 - 1e-9).ceil().max(0.0) as usize
}

/// Uniformly random labeled/pool split driven only by `seed`. Both lists are returned sorted.
pub fn initial_split(dataset: &Dataset, frac: f64, seed: u64) -> Result<SplitState> {
    if !(frac > 0.0 && frac < 1.0) {
        return Err(Error::invalid(format!(
            "initial fraction {frac} outside (0, 1)"
        )));
    }
    let n = dataset.len();
    let k = initial_labeled_count(n, frac);
    if k < 2 {
        return Err(Error::invalid(format!(
            "initial labeled set would have {k} rows (need at least 2)"
        )));
    }
    if k >= n {
        return Err(Error::invalid(
            "initial split leaves an empty candidate pool",
        ));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = rng::rng_from_seed(seed);
    rng::shuffle(&mut rng, &mut idx);
    let mut labeled = idx[..k].to_vec();
    let mut pool = idx[k..].to_vec();
    labeled.sort_unstable();
    pool.sort_unstable();
    Ok(SplitState {
        labeled,
        pool,
        seed,
    })
}

/// Weights, means and standard deviations of the feature mixture shared by both DGPs.
pub const MIXTURE: [(f64, f64, f64); 3] = [(0.4, 0.2, 0.07), (0.3, 0.5, 0.1), (0.3, 0.85, 0.05)];

/// Draws `x` from the truncated mixture, redrawing (component and value) until `x` lies in
/// `[0, 1]`. Returns the value and the index of the generating component.
pub fn sample_mixture(rng: &mut Rng) -> (f64, usize) {
    loop {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut comp = MIXTURE.len() - 1;
        for (k, &(w, _, _)) in MIXTURE.iter().enumerate() {
            acc += w;
            if u < acc {
                comp = k;
                break;
            }
        }
        let (_, mu, sd) = MIXTURE[comp];
        let x = Normal::new(mu, sd).expect("valid sd").sample(rng);
        if (0.0..=1.0).contains(&x) {
            return (x, comp);
        }
    }
}

/// Built-in synthetic data-generating processes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dgp {
    TwoRegime,
    ThreeRegime,
}

impl Dgp {
    pub fn name(self) -> &'static str {
        match self {
            Dgp::TwoRegime => "two_regime",
            Dgp::ThreeRegime => "three_regime",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "two_regime" => Some(Dgp::TwoRegime),
            "three_regime" => Some(Dgp::ThreeRegime),
            _ => None,
        }
    }

    /// Noise-free response.
    pub fn mean(self, x: f64) -> f64 {
        match self {
            Dgp::TwoRegime => {
                if x < 0.5 {
                    (10.0 * PI * x).sin()
                } else {
                    2.0 * x - 1.0
                }
            }
            Dgp::ThreeRegime => {
                if x < 0.4 {
                    (8.0 * PI * x).sin()
                } else if x < 0.7 {
                    3.0 * x - 1.5
                } else {
                    2.0 * (6.0 * PI * x).cos()
                }
            }
        }
    }

    /// Standard deviation of the additive Gaussian noise at `x`.
    pub fn noise_sd(self, x: f64) -> f64 {
        match self {
            Dgp::TwoRegime => {
                if x > 0.8 && x < 0.9 {
                    1.0
                } else {
                    0.1
                }
            }
            Dgp::ThreeRegime => {
                if x > 0.6 && x < 0.65 {
                    1.5
                } else if x >= 0.7 {
                    0.15
                } else {
                    0.1
                }
            }
        }
    }

    pub fn sample(self, n: usize, seed: u64) -> Result<Dataset> {
        if n < 2 {
            return Err(Error::invalid(format!("need at least 2 samples, got {n}")));
        }
        let mut rng = rng::rng_from_seed(seed);
        let mut features = Vec::with_capacity(n);
        let mut targets = Vec::with_capacity(n);
        for _ in 0..n {
            let (x, _) = sample_mixture(&mut rng);
            let eps = Normal::new(0.0, self.noise_sd(x))
                .expect("valid sd")
                .sample(&mut rng);
            features.push(x);
            targets.push(self.mean(x) + eps);
        }
        let columns = vec![ColumnMeta {
            name: "x".to_string(),
            kind: ColumnKind::Continuous {
                center: 0.0,
                scale: 1.0,
            },
        }];
        Dataset::from_parts(self.name(), 1, features, targets, columns, Vec::new())
    }
}

pub fn sample_two_regime(n: usize, seed: u64) -> Result<Dataset> {
    Dgp::TwoRegime.sample(n, seed)
}

pub fn sample_three_regime(n: usize, seed: u64) -> Result<Dataset> {
    Dgp::ThreeRegime.sample(n, seed)
}
