//! Dataset generation, CSV ingestion, and deterministic splitting.
//!
//! The search never sees test indices: [`split_views`] hands it a
//! [`TrainValData`] while the holdout stays inside [`TestData`].

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex;
use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qstate::{feature_map_encode, FeatureVector, StateVector};
use crate::scalar::Real;
use crate::util::{shuffle, uniform_f64};

/// Labeled classification data with {0,1} outputs.
#[derive(Debug, Clone)]
pub struct Dataset<R> {
    name: String,
    feature_dim: usize,
    x: Vec<FeatureVector<R>>,
    y: Vec<u8>,
}

impl<R: Real> Dataset<R> {
    pub fn new(name: impl Into<String>, x: Vec<FeatureVector<R>>, y: Vec<u8>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Dataset(format!(
                "{} feature rows with {} labels",
                x.len(),
                y.len()
            )));
        }
        if x.is_empty() {
            return Err(Error::Dataset("empty dataset".into()));
        }
        let feature_dim = x[0].dim();
        for (i, row) in x.iter().enumerate() {
            if row.dim() != feature_dim {
                return Err(Error::Dataset(format!(
                    "row {i} has {} features, expected {feature_dim}",
                    row.dim()
                )));
            }
            if row.components().iter().any(|v| !v.is_finite()) {
                return Err(Error::Dataset(format!("row {i} has a non-finite feature")));
            }
        }
        let pos = y.iter().filter(|l| **l == 1).count();
        if y.iter().any(|l| *l > 1) {
            return Err(Error::Dataset("labels must be 0 or 1".into()));
        }
        if pos == 0 || pos == y.len() {
            return Err(Error::Dataset("dataset must contain both classes".into()));
        }
        Ok(Self {
            name: name.into(),
            feature_dim,
            x,
            y,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn x(&self) -> &[FeatureVector<R>] {
        &self.x
    }

    pub fn y(&self) -> &[u8] {
        &self.y
    }
}

/// Disjoint index sets of one experiment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataSplit {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded shuffle split: the first `n_train` shuffled indices train, the
/// next `n_valid` validate, the rest are the holdout.
pub fn split(dataset_len: usize, n_train: usize, n_valid: usize, seed: u64) -> Result<DataSplit> {
    if dataset_len < n_train + n_valid + 1 {
        return Err(Error::Dataset(format!(
            "{dataset_len} samples cannot supply {n_train} train + {n_valid} validation + a holdout"
        )));
    }
    let mut indices: Vec<usize> = (0..dataset_len).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffle(&mut indices, &mut rng);
    let train = indices[..n_train].to_vec();
    let validation = indices[n_train..n_train + n_valid].to_vec();
    let test = indices[n_train + n_valid..].to_vec();
    Ok(DataSplit {
        train,
        validation,
        test,
    })
}

/// The data a search is allowed to touch.
#[derive(Debug, Clone)]
pub struct TrainValData<R> {
    pub train_x: Vec<FeatureVector<R>>,
    pub train_y: Vec<u8>,
    pub valid_x: Vec<FeatureVector<R>>,
    pub valid_y: Vec<u8>,
}

/// The holdout, kept apart from the search.
#[derive(Debug, Clone)]
pub struct TestData<R> {
    pub x: Vec<FeatureVector<R>>,
    pub y: Vec<u8>,
}

/// Materialize the split as separate owned views.
pub fn split_views<R: Real>(dataset: &Dataset<R>, split: &DataSplit) -> (TrainValData<R>, TestData<R>) {
    let gather_x = |idx: &[usize]| idx.iter().map(|i| dataset.x[*i].clone()).collect();
    let gather_y = |idx: &[usize]| idx.iter().map(|i| dataset.y[*i]).collect();
    (
        TrainValData {
            train_x: gather_x(&split.train),
            train_y: gather_y(&split.train),
            valid_x: gather_x(&split.validation),
            valid_y: gather_y(&split.validation),
        },
        TestData {
            x: gather_x(&split.test),
            y: gather_y(&split.test),
        },
    )
}

/// Feature preprocessing applied before phase encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingMode {
    None,
    /// Affine map sending the fit-set minimum to 0 and maximum to 2π(1-1e-6).
    To0TwoPi,
    /// Zero mean, unit variance on the fit set.
    Standardize,
}

/// Rescale features with constants fitted on `fit_indices` only and applied
/// to every row.
pub fn scale_features<R: Real>(
    dataset: &Dataset<R>,
    mode: ScalingMode,
    fit_indices: &[usize],
) -> Result<Dataset<R>> {
    if mode == ScalingMode::None {
        return Ok(dataset.clone());
    }
    if fit_indices.is_empty() {
        return Err(Error::Dataset("scaling needs a non-empty fit set".into()));
    }
    let dim = dataset.feature_dim;
    let mut scaled_rows: Vec<Vec<R>> = dataset
        .x
        .iter()
        .map(|row| row.components().to_vec())
        .collect();
    for j in 0..dim {
        let fit_values: Vec<R> = fit_indices.iter().map(|i| dataset.x[*i][j]).collect();
        match mode {
            ScalingMode::None => unreachable!(),
            ScalingMode::To0TwoPi => {
                let min = fit_values.iter().copied().fold(R::infinity(), R::min);
                let max = fit_values.iter().copied().fold(R::neg_infinity(), R::max);
                let span = max - min;
                let target = R::cast(std::f64::consts::TAU * (1.0 - 1e-6));
                for row in &mut scaled_rows {
                    row[j] = if span > R::zero() {
                        (row[j] - min) / span * target
                    } else {
                        R::zero()
                    };
                }
            }
            ScalingMode::Standardize => {
                let n = R::cast(fit_values.len() as f64);
                let mean = fit_values.iter().copied().sum::<R>() / n;
                let var = fit_values
                    .iter()
                    .map(|v| (*v - mean) * (*v - mean))
                    .sum::<R>()
                    / n;
                if !(var > R::zero()) {
                    return Err(Error::Dataset(format!(
                        "feature {j} has zero variance on the fit set"
                    )));
                }
                let std = var.sqrt();
                for row in &mut scaled_rows {
                    row[j] = (row[j] - mean) / std;
                }
            }
        }
    }
    Dataset::new(
        dataset.name.clone(),
        scaled_rows.into_iter().map(FeatureVector::new).collect(),
        dataset.y.clone(),
    )
}

/// Load a dataset from CSV with named feature columns and a {0,1} label
/// column. Rows with missing or non-numeric cells are rejected with their
/// row number (1-based, excluding the header).
pub fn load_csv<R: Real>(
    path: impl AsRef<Path>,
    label_column: &str,
    feature_columns: &[String],
) -> Result<Dataset<R>> {
    let path_str = path.as_ref().display().to_string();
    let ingest = |row: Option<usize>, message: String| Error::CsvIngest {
        path: path_str.clone(),
        row,
        message,
    };
    let mut reader = csv::Reader::from_path(path.as_ref())
        .map_err(|e| ingest(None, e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| ingest(None, e.to_string()))?
        .clone();
    let column_index = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| ingest(None, format!("column {name:?} not found in header")))
    };
    let label_idx = column_index(label_column)?;
    let feature_idx: Vec<usize> = feature_columns
        .iter()
        .map(|c| column_index(c))
        .collect::<Result<_>>()?;

    let mut x = Vec::new();
    let mut y = Vec::new();
    for (row_number, record) in reader.records().enumerate() {
        let row = row_number + 1;
        let record = record.map_err(|e| ingest(Some(row), e.to_string()))?;
        let mut features = Vec::with_capacity(feature_idx.len());
        for (k, idx) in feature_idx.iter().enumerate() {
            let cell = record.get(*idx).unwrap_or("");
            if cell.trim().is_empty() {
                return Err(ingest(
                    Some(row),
                    format!("missing value in column {:?}", feature_columns[k]),
                ));
            }
            let value: f64 = cell.trim().parse().map_err(|_| {
                ingest(
                    Some(row),
                    format!("non-numeric cell {cell:?} in column {:?}", feature_columns[k]),
                )
            })?;
            if !value.is_finite() {
                return Err(ingest(
                    Some(row),
                    format!("non-finite value in column {:?}", feature_columns[k]),
                ));
            }
            features.push(R::cast(value));
        }
        let label_cell = record.get(label_idx).unwrap_or("").trim();
        let label = match label_cell {
            "0" => 0u8,
            "1" => 1u8,
            other => {
                return Err(ingest(
                    Some(row),
                    format!("label {other:?} in column {label_column:?} is not 0 or 1"),
                ))
            }
        };
        x.push(FeatureVector::new(features));
        y.push(label);
    }
    Dataset::new(format!("csv:{path_str}"), x, y).map_err(|e| match e {
        Error::Dataset(message) => ingest(None, message),
        other => other,
    })
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller on two uniforms from the seeded stream.
    let u1 = uniform_f64(rng).max(f64::MIN_POSITIVE);
    let u2 = uniform_f64(rng);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Haar-distributed unitary of the given dimension: QR of a complex
/// Ginibre matrix with the phase correction that makes the distribution
/// uniform.
fn haar_unitary(dim: usize, rng: &mut ChaCha8Rng) -> Vec<Complex<f64>> {
    let mut columns: Vec<Vec<Complex<f64>>> = (0..dim)
        .map(|_| {
            (0..dim)
                .map(|_| Complex::new(standard_normal(rng), standard_normal(rng)))
                .collect()
        })
        .collect();
    let mut diag_phase = Vec::with_capacity(dim);
    for j in 0..dim {
        for k in 0..j {
            let (head, tail) = columns.split_at_mut(j);
            let against = &head[k];
            let target = &mut tail[0];
            let proj: Complex<f64> = against
                .iter()
                .zip(target.iter())
                .map(|(a, b)| a.conj() * b)
                .sum();
            for (t, a) in target.iter_mut().zip(against) {
                *t -= proj * a;
            }
        }
        let norm: f64 = columns[j].iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        for c in &mut columns[j] {
            *c /= norm;
        }
        // The sign convention of the QR diagonal; without it the measure
        // over-weights certain phases.
        let pivot = columns[j][j];
        let phase = if pivot.norm() > 0.0 {
            pivot / pivot.norm()
        } else {
            Complex::new(1.0, 0.0)
        };
        diag_phase.push(phase.conj());
    }
    let mut u = vec![Complex::new(0.0, 0.0); dim * dim];
    for j in 0..dim {
        for i in 0..dim {
            u[i * dim + j] = columns[j][i] * diag_phase[j];
        }
    }
    u
}

fn apply_unitary<R: Real>(u: &[Complex<f64>], state: &StateVector<R>) -> Vec<Complex<R>> {
    let dim = state.amplitudes().len();
    (0..dim)
        .map(|i| {
            let mut acc = Complex::new(R::zero(), R::zero());
            for (j, amp) in state.amplitudes().iter().enumerate() {
                let w = u[i * dim + j];
                let w = Complex::new(R::cast(w.re), R::cast(w.im));
                acc += w * *amp;
            }
            acc
        })
        .collect()
}

/// Expectation of the all-qubits parity operator after rotating the encoded
/// state by the fixed unitary `u`.
pub(crate) fn parity_expectation<R: Real>(
    x: &FeatureVector<R>,
    u: &[Complex<f64>],
) -> Result<R> {
    let encoded = feature_map_encode(x)?;
    let rotated = apply_unitary(u, &encoded);
    Ok(rotated
        .iter()
        .enumerate()
        .map(|(b, amp)| {
            let sign = if (b.count_ones() & 1) == 0 {
                R::one()
            } else {
                -R::one()
            };
            sign * amp.norm_sqr()
        })
        .sum())
}

/// Number of grid divisions per axis used by [`adhoc_generate`].
pub const ADHOC_GRID: usize = 100;

/// Synthetic classification data labeled by the sign of a fixed observable.
///
/// Points are drawn from a uniform grid over [0, 2π)^n; each is kept only
/// if the parity expectation of its encoded state, rotated by a seeded
/// Haar-random unitary, clears the margin `gap`. Classes are filled to an
/// even quota so the output is balanced by construction.
pub fn adhoc_generate<R: Real>(n: usize, gap: f64, count: usize, seed: u64) -> Result<Dataset<R>> {
    if n != 2 && n != 3 {
        return Err(Error::Generation(format!(
            "ad hoc generator supports 2 or 3 features, got {n}"
        )));
    }
    if !(gap > 0.0) {
        return Err(Error::Generation("gap must be positive".into()));
    }
    if count < 2 {
        return Err(Error::Generation("need at least 2 points".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = haar_unitary(1 << n, &mut rng);
    let neg_quota = count / 2;
    let pos_quota = count - neg_quota;
    let mut x = Vec::with_capacity(count);
    let mut y = Vec::with_capacity(count);
    let (mut neg, mut pos) = (0usize, 0usize);
    let max_attempts = 1000 * count.max(64);
    let gap_r = R::cast(gap);
    for _ in 0..max_attempts {
        if neg == neg_quota && pos == pos_quota {
            break;
        }
        let point = FeatureVector::new(
            (0..n)
                .map(|_| {
                    let cell = (rng.next_u64() % ADHOC_GRID as u64) as f64;
                    R::cast(std::f64::consts::TAU * cell / ADHOC_GRID as f64)
                })
                .collect(),
        );
        let e = parity_expectation(&point, &u)?;
        if e >= gap_r && pos < pos_quota {
            x.push(point);
            y.push(1);
            pos += 1;
        } else if e <= -gap_r && neg < neg_quota {
            x.push(point);
            y.push(0);
            neg += 1;
        }
    }
    if neg < neg_quota || pos < pos_quota {
        return Err(Error::Generation(format!(
            "gap {gap} too demanding: found {pos} positive and {neg} negative points of {count}"
        )));
    }
    Dataset::new(format!("adhoc{n}d"), x, y)
}

/// Deterministic 4-feature surrogate dataset on [0, π)^4.
///
/// The label is 1 where
/// `sin(u0 + u1/2)·cos(u2 - 3u3/10) + 2sin(u1 + u3)/5 - 1/10 > 0`
/// and 0 elsewhere: a smooth surface that mixes all four features along
/// non-axis directions and splits the box roughly in half.
pub fn synthetic_4d_generate<R: Real>(count: usize, seed: u64) -> Result<Dataset<R>> {
    if count < 4 {
        return Err(Error::Generation("need at least 4 points".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::with_capacity(count);
    let mut y = Vec::with_capacity(count);
    for _ in 0..count {
        let u: Vec<f64> = (0..4)
            .map(|_| std::f64::consts::PI * uniform_f64(&mut rng))
            .collect();
        let value = synthetic_4d_surface(&u);
        x.push(FeatureVector::new(u.iter().map(|v| R::cast(*v)).collect()));
        y.push(if value > 0.0 { 1 } else { 0 });
    }
    Dataset::new("synthetic4d", x, y)
}

/// The decision surface of [`synthetic_4d_generate`].
pub fn synthetic_4d_surface(u: &[f64]) -> f64 {
    (u[0] + 0.5 * u[1]).sin() * (u[2] - 0.3 * u[3]).cos() + 0.4 * (u[1] + u[3]).sin() - 0.1
}

/// Serialized form of a dataset, with seed provenance.
#[derive(Debug, Serialize, Deserialize)]
pub struct DatasetJson {
    pub name: String,
    pub feature_dim: usize,
    pub provenance: String,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<u8>,
}

pub fn save_json<R: Real>(
    dataset: &Dataset<R>,
    provenance: &str,
    writer: impl Write,
) -> Result<()> {
    let doc = DatasetJson {
        name: dataset.name.clone(),
        feature_dim: dataset.feature_dim,
        provenance: provenance.to_string(),
        x: dataset
            .x
            .iter()
            .map(|row| row.components().iter().map(|v| v.as_f64()).collect())
            .collect(),
        y: dataset.y.clone(),
    };
    serde_json::to_writer_pretty(writer, &doc)?;
    Ok(())
}

pub fn load_json<R: Real>(reader: impl Read) -> Result<Dataset<R>> {
    let doc: DatasetJson = serde_json::from_reader(reader)?;
    Dataset::new(
        doc.name,
        doc.x
            .into_iter()
            .map(|row| FeatureVector::new(row.into_iter().map(R::cast).collect()))
            .collect(),
        doc.y,
    )
}
