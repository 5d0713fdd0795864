//! Classical-kernel SVM baselines with validation-set hyperparameter grids.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::TrainValData;
use crate::error::{Error, Result};
use crate::kernelmat::KernelMatrix;
use crate::metrics::ConfusionCounts;
use crate::qstate::FeatureVector;
use crate::scalar::Real;
use crate::svm::{predict, train_dual, SvmModel};

/// The four baseline kernel families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassicalKind {
    Rbf,
    Linear,
    Poly3,
    Sigmoid,
}

impl ClassicalKind {
    pub const ALL: [ClassicalKind; 4] = [
        ClassicalKind::Rbf,
        ClassicalKind::Linear,
        ClassicalKind::Poly3,
        ClassicalKind::Sigmoid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClassicalKind::Rbf => "rbf",
            ClassicalKind::Linear => "linear",
            ClassicalKind::Poly3 => "poly3",
            ClassicalKind::Sigmoid => "sigmoid",
        }
    }

    fn uses_gamma(self) -> bool {
        !matches!(self, ClassicalKind::Linear)
    }

    fn uses_coef0(self) -> bool {
        matches!(self, ClassicalKind::Poly3 | ClassicalKind::Sigmoid)
    }

    /// Sigmoid kernels are not positive semidefinite in general, so the
    /// Gram eigenvalue floor is advisory for them.
    pub fn psd_guaranteed(self) -> bool {
        !matches!(self, ClassicalKind::Sigmoid)
    }
}

/// A fully specified classical kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalKernelSpec {
    pub kind: ClassicalKind,
    pub gamma: f64,
    pub coef0: f64,
}

impl ClassicalKernelSpec {
    pub fn new(kind: ClassicalKind, gamma: f64, coef0: f64) -> Result<Self> {
        if kind.uses_gamma() && !(gamma > 0.0) {
            return Err(Error::Config(format!(
                "{} kernel needs gamma > 0, got {gamma}",
                kind.name()
            )));
        }
        Ok(Self { kind, gamma, coef0 })
    }

    fn value<R: Real>(&self, a: &[R], b: &[R]) -> R {
        let dot = a.iter().zip(b).map(|(x, y)| *x * *y).sum::<R>();
        let gamma = R::cast(self.gamma);
        let coef0 = R::cast(self.coef0);
        match self.kind {
            ClassicalKind::Linear => dot,
            ClassicalKind::Poly3 => {
                let base = gamma * dot + coef0;
                base * base * base
            }
            ClassicalKind::Sigmoid => (gamma * dot + coef0).tanh(),
            ClassicalKind::Rbf => {
                let dist2 = a
                    .iter()
                    .zip(b)
                    .map(|(x, y)| (*x - *y) * (*x - *y))
                    .sum::<R>();
                (-gamma * dist2).exp()
            }
        }
    }
}

/// Kernel matrix k(x_i, x'_j) for a classical kernel.
pub fn classical_gram<R: Real>(
    x: &[FeatureVector<R>],
    x_prime: &[FeatureVector<R>],
    spec: &ClassicalKernelSpec,
) -> Result<KernelMatrix<R>> {
    if let (Some(a), Some(b)) = (x.first(), x_prime.first()) {
        if a.dim() != b.dim() {
            return Err(Error::DimensionMismatch {
                what: "classical kernel operands",
                expected: a.dim(),
                got: b.dim(),
            });
        }
    }
    Ok(KernelMatrix::from_fn(x.len(), x_prime.len(), |i, j| {
        spec.value(x[i].components(), x_prime[j].components())
    }))
}

/// The grid searched by [`tune_baseline`]; every value combination is
/// evaluated and the selection is recorded in the run output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineGrid {
    pub gamma: Vec<f64>,
    pub coef0: Vec<f64>,
    pub c: Vec<f64>,
}

impl Default for BaselineGrid {
    fn default() -> Self {
        // Log-spaced gamma over [1e-3, 1e3] and C over [1e-2, 1e2], half a
        // decade apart.
        let half_decades = |lo: i32, hi: i32| -> Vec<f64> {
            (lo..=hi).map(|e| 10f64.powf(e as f64 / 2.0)).collect()
        };
        Self {
            gamma: half_decades(-6, 6),
            coef0: vec![-1.0, 0.0, 1.0],
            c: half_decades(-4, 4),
        }
    }
}

/// One evaluated grid point: position, validation score and confusion,
/// the kernel, and the box constraint.
type GridEvaluation<R> = (usize, R, ConfusionCounts, ClassicalKernelSpec, f64);

/// A tuned baseline: the winning kernel, its box constraint, and the
/// validation score that won.
#[derive(Debug, Clone)]
pub struct TunedBaseline<R> {
    pub spec: ClassicalKernelSpec,
    pub c: f64,
    pub model: SvmModel<R>,
    pub validation_confusion: ConfusionCounts,
    pub validation_balanced_accuracy: R,
}

/// Grid-search a classical kernel on the training set, maximizing balanced
/// accuracy on the validation set. Grid points whose SVM fails to train are
/// skipped. Ties keep the earliest grid point, so the result is
/// deterministic for a fixed grid.
pub fn tune_baseline<R: Real>(
    data: &TrainValData<R>,
    kind: ClassicalKind,
    grid: &BaselineGrid,
    svm_tol: R,
) -> Result<TunedBaseline<R>> {
    let gammas: Vec<f64> = if kind.uses_gamma() {
        grid.gamma.clone()
    } else {
        vec![1.0]
    };
    let coef0s: Vec<f64> = if kind.uses_coef0() {
        grid.coef0.clone()
    } else {
        vec![0.0]
    };
    let mut points = Vec::new();
    for c in &grid.c {
        for gamma in &gammas {
            for coef0 in &coef0s {
                points.push((*c, *gamma, *coef0));
            }
        }
    }

    let scored: Vec<Option<GridEvaluation<R>>> = points
        .par_iter()
        .enumerate()
        .map(|(idx, (c, gamma, coef0))| {
            let spec = ClassicalKernelSpec::new(kind, *gamma, *coef0).ok()?;
            let gram = classical_gram(&data.train_x, &data.train_x, &spec).ok()?;
            let model = train_dual(&gram, &data.train_y, R::cast(*c), svm_tol).ok()?;
            let k_val = classical_gram(&data.valid_x, &data.train_x, &spec).ok()?;
            let predictions = predict(&model, &k_val).ok()?;
            let confusion = ConfusionCounts::from_labels(&data.valid_y, &predictions).ok()?;
            let score = confusion.balanced_accuracy::<R>().ok()?;
            Some((idx, score, confusion, spec, *c))
        })
        .collect();

    let best = scored
        .into_iter()
        .flatten()
        .fold(None::<GridEvaluation<R>>, |best, cand| {
            match best {
                None => Some(cand),
                Some(b) => {
                    // Strictly better score wins; equal scores keep the
                    // earlier grid point.
                    if cand.1 > b.1 {
                        Some(cand)
                    } else {
                        Some(b)
                    }
                }
            }
        })
        .ok_or_else(|| {
            Error::Training(format!(
                "no {} grid point produced a usable model",
                kind.name()
            ))
        })?;

    let (_, score, confusion, spec, c) = best;
    let gram = classical_gram(&data.train_x, &data.train_x, &spec)?;
    let model = train_dual(&gram, &data.train_y, R::cast(c), svm_tol)?;
    Ok(TunedBaseline {
        spec,
        c,
        model,
        validation_confusion: confusion,
        validation_balanced_accuracy: score,
    })
}
