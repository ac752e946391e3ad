//! Feature and label containers, CSV loading, synthetic data, splitting.
//!
//! Feature files are plain CSV: one sample per line, comma-separated decimal
//! reals, no header. Label files use the same layout with entries restricted
//! to 0 or 1; every sample must carry at least one category.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Dense n x d feature matrix, one sample per row.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: DMatrix<f64>,
    centered: bool,
}

impl FeatureMatrix {
    /// Wraps a raw matrix. Rejects empty shapes and non-finite entries.
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::InvalidArgument(
                "feature matrix must have at least one row and one column".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "feature matrix contains a non-finite entry".into(),
            ));
        }
        Ok(Self {
            values,
            centered: false,
        })
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// True once every column mean has been subtracted.
    pub fn is_centered(&self) -> bool {
        self.centered
    }

    /// Per-column arithmetic means.
    pub fn column_means(&self) -> Vec<f64> {
        let n = self.values.nrows() as f64;
        (0..self.values.ncols())
            .map(|j| self.values.column(j).sum() / n)
            .collect()
    }

    fn select_rows(&self, indices: &[usize]) -> Self {
        let rows: Vec<_> = indices.iter().map(|&i| self.values.row(i)).collect();
        Self {
            values: DMatrix::from_rows(&rows),
            centered: self.centered,
        }
    }
}

/// Binary n x c label matrix; row i marks the categories of sample i.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMatrix {
    values: DMatrix<f64>,
}

impl LabelMatrix {
    /// Validates that entries are 0/1, no row is empty, and c >= 2.
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.ncols() < 2 {
            return Err(Error::InvalidArgument(
                "label matrix needs at least two category columns".into(),
            ));
        }
        for i in 0..values.nrows() {
            for j in 0..values.ncols() {
                let v = values[(i, j)];
                if v != 0.0 && v != 1.0 {
                    return Err(Error::NonBinaryLabel { row: i, column: j });
                }
            }
            if values.row(i).iter().all(|&v| v == 0.0) {
                return Err(Error::ZeroLabelRow(i));
            }
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn classes(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    fn select_rows(&self, indices: &[usize]) -> Self {
        let rows: Vec<_> = indices.iter().map(|&i| self.values.row(i)).collect();
        Self {
            values: DMatrix::from_rows(&rows),
        }
    }
}

/// Paired two-modality dataset with shared labels.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub modality1: FeatureMatrix,
    pub modality2: FeatureMatrix,
    pub labels: LabelMatrix,
}

impl Dataset {
    /// Pairs the three matrices; all must describe the same samples.
    pub fn new(modality1: FeatureMatrix, modality2: FeatureMatrix, labels: LabelMatrix) -> Result<Self> {
        if modality2.len() != modality1.len() {
            return Err(Error::DimensionMismatch {
                context: "modality 2 sample count",
                expected: modality1.len(),
                found: modality2.len(),
            });
        }
        if labels.len() != modality1.len() {
            return Err(Error::DimensionMismatch {
                context: "label sample count",
                expected: modality1.len(),
                found: labels.len(),
            });
        }
        Ok(Self {
            modality1,
            modality2,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.modality1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modality1.is_empty()
    }

    fn select_rows(&self, indices: &[usize]) -> Self {
        Self {
            modality1: self.modality1.select_rows(indices),
            modality2: self.modality2.select_rows(indices),
            labels: self.labels.select_rows(indices),
        }
    }
}

fn parse_csv(path: &Path) -> Result<DMatrix<f64>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = 0usize;
    for (idx, line) in text.lines().enumerate() {
        let row = idx + 1;
        let mut entries = Vec::new();
        for (col, token) in line.split(',').enumerate() {
            let token = token.trim();
            let value: f64 = token.parse().map_err(|_| Error::UnparseableNumber {
                row,
                column: col + 1,
                token: token.to_string(),
            })?;
            entries.push(value);
        }
        if rows.is_empty() {
            width = entries.len();
        } else if entries.len() != width {
            return Err(Error::InconsistentColumns {
                row,
                expected: width,
                found: entries.len(),
            });
        }
        rows.push(entries);
    }
    if rows.is_empty() {
        return Err(Error::EmptyFeatureFile(path.display().to_string()));
    }
    Ok(DMatrix::from_row_iterator(
        rows.len(),
        width,
        rows.iter().flatten().copied(),
    ))
}

/// Loads a feature CSV. When `expected_dim` is given, the file width must
/// match it exactly.
pub fn load_features(path: &Path, expected_dim: Option<usize>) -> Result<FeatureMatrix> {
    let values = parse_csv(path)?;
    if let Some(expected) = expected_dim {
        if values.ncols() != expected {
            return Err(Error::DimensionMismatch {
                context: "feature dimension",
                expected,
                found: values.ncols(),
            });
        }
    }
    FeatureMatrix::new(values)
}

/// Loads a binary label CSV.
pub fn load_labels(path: &Path) -> Result<LabelMatrix> {
    LabelMatrix::new(parse_csv(path)?)
}

/// Subtracts each column mean. Idempotent up to rounding.
pub fn zero_center(x: &FeatureMatrix) -> FeatureMatrix {
    let means = x.column_means();
    let mut values = x.values.clone();
    for j in 0..values.ncols() {
        let mut col = values.column_mut(j);
        col.add_scalar_mut(-means[j]);
    }
    FeatureMatrix {
        values,
        centered: true,
    }
}

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = rng.sample(StandardNormal);
        }
    }
    m
}

/// Builds a paired dataset with a shared class structure.
///
/// Each class gets one latent point; both modalities see it through their own
/// random linear map plus isotropic Gaussian noise of scale `noise_sigma`.
/// With `noise_sigma = 0` all samples of a class are identical within each
/// modality. Labels are one-hot and samples are ordered class by class. The
/// same seed always reproduces the same dataset.
pub fn generate_synthetic(
    n_per_class: usize,
    classes: usize,
    d1: usize,
    d2: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<Dataset> {
    if n_per_class == 0 {
        return Err(Error::InvalidArgument("n_per_class must be positive".into()));
    }
    if classes < 2 {
        return Err(Error::InvalidArgument("at least two classes required".into()));
    }
    if !noise_sigma.is_finite() || noise_sigma < 0.0 {
        return Err(Error::InvalidArgument(
            "noise_sigma must be finite and non-negative".into(),
        ));
    }
    if d1 < classes {
        return Err(Error::DimensionBelowClassCount {
            modality: 1,
            dim: d1,
            classes,
        });
    }
    if d2 < classes {
        return Err(Error::DimensionBelowClassCount {
            modality: 2,
            dim: d2,
            classes,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = gaussian_matrix(classes, classes, &mut rng);
    let scale = 1.0 / (classes as f64).sqrt();
    let map1 = gaussian_matrix(d1, classes, &mut rng) * scale;
    let map2 = gaussian_matrix(d2, classes, &mut rng) * scale;

    let n = n_per_class * classes;
    let mut x1 = DMatrix::zeros(n, d1);
    let mut x2 = DMatrix::zeros(n, d2);
    let mut y = DMatrix::zeros(n, classes);
    for class in 0..classes {
        let latent = centers.row(class).transpose();
        let clean1 = (&map1 * &latent).transpose();
        let clean2 = (&map2 * &latent).transpose();
        for s in 0..n_per_class {
            let i = class * n_per_class + s;
            for j in 0..d1 {
                let noise: f64 = rng.sample(StandardNormal);
                x1[(i, j)] = clean1[j] + noise_sigma * noise;
            }
            for j in 0..d2 {
                let noise: f64 = rng.sample(StandardNormal);
                x2[(i, j)] = clean2[j] + noise_sigma * noise;
            }
            y[(i, class)] = 1.0;
        }
    }

    Dataset::new(
        FeatureMatrix::new(x1)?,
        FeatureMatrix::new(x2)?,
        LabelMatrix::new(y)?,
    )
}

/// Splits a dataset into train and test parts, stratified by the first
/// active category of each sample.
///
/// The global train size is `round(train_fraction * n)`, distributed over
/// strata by largest remainder. The shuffle is driven by the seed alone, so
/// identical inputs always split identically.
pub fn split(ds: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(
            "train fraction must lie strictly between 0 and 1".into(),
        ));
    }
    let n = ds.len();
    let total_train = (train_fraction * n as f64).round() as usize;
    if total_train < 2 || total_train >= n {
        return Err(Error::DegenerateSplit {
            train: total_train,
            test: n - total_train.min(n),
            total: n,
        });
    }

    let mut strata: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let key = ds
            .labels
            .values()
            .row(i)
            .iter()
            .position(|&v| v != 0.0)
            .expect("label rows are validated non-empty");
        strata.entry(key).or_default().push(i);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts: Vec<(usize, usize, f64)> = Vec::new(); // (key, floor, remainder)
    for (&key, members) in &strata {
        let exact = train_fraction * members.len() as f64;
        let floor = exact.floor() as usize;
        counts.push((key, floor, exact - exact.floor()));
    }
    let assigned: usize = counts.iter().map(|&(_, f, _)| f).sum();
    let mut leftover = total_train - assigned;
    counts.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap().then(a.0.cmp(&b.0)));
    for entry in counts.iter_mut() {
        if leftover == 0 {
            break;
        }
        entry.1 += 1;
        leftover -= 1;
    }
    let take: BTreeMap<usize, usize> = counts.iter().map(|&(k, f, _)| (k, f)).collect();

    let mut train_idx = Vec::with_capacity(total_train);
    let mut test_idx = Vec::with_capacity(n - total_train);
    for (&key, members) in strata.iter_mut() {
        members.shuffle(&mut rng);
        let cut = take[&key];
        train_idx.extend_from_slice(&members[..cut]);
        test_idx.extend_from_slice(&members[cut..]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();

    if train_idx.len() < 2 || test_idx.is_empty() {
        return Err(Error::DegenerateSplit {
            train: train_idx.len(),
            test: test_idx.len(),
            total: n,
        });
    }
    let train = ds.select_rows(&train_idx);
    let distinct = {
        let mut rows: Vec<Vec<u8>> = (0..train.labels.len())
            .map(|i| {
                train
                    .labels
                    .values()
                    .row(i)
                    .iter()
                    .map(|&v| v as u8)
                    .collect()
            })
            .collect();
        rows.sort();
        rows.dedup();
        rows.len()
    };
    if distinct < 2 {
        return Err(Error::InvalidArgument(
            "train split needs at least two distinct label rows".into(),
        ));
    }
    Ok((train, ds.select_rows(&test_idx)))
}
