//! Probability calibration and information-criterion scoring of SVM models.
//!
//! Decision values are mapped to class probabilities through the
//! two-parameter sigmoid p = 1/(1 + exp(a·f + b)), with (a, b) fitted by
//! maximum likelihood on out-of-fold decision values from a stratified
//! cross-validation over the training set. The calibrated model's
//! log-likelihood on the validation set then yields
//! BIC = -2 log L + d log N, the score that ranks candidate circuits.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::circuit::{CircuitDescriptor, ParamVector};
use crate::error::{Error, Result};
use crate::kernelmat::{cross_from_states, gram_from_states};
use crate::metrics::ConfusionCounts;
use crate::qstate::{FeatureVector, StateVector};
use crate::scalar::Real;
use crate::svm::{decision_function, train_dual, SvmModel};
use crate::util::shuffle;

/// Sigmoid parameters of p = 1/(1 + exp(a·f + b)).
///
/// For a classifier where larger decision values mean class 1, the fitted
/// `a` comes out non-positive; an unexpected orientation is left to the
/// caller to inspect rather than treated as an error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlattCoefficients<R> {
    pub a: R,
    pub b: R,
}

impl<R: Real> PlattCoefficients<R> {
    /// Probability of class 1 for decision value `f`, clamped away from 0
    /// and 1 so log-likelihoods stay finite.
    pub fn probability(&self, f: R) -> R {
        let z = self.a * f + self.b;
        let p = if z >= R::zero() {
            let e = (-z).exp();
            e / (R::one() + e)
        } else {
            R::one() / (R::one() + z.exp())
        };
        let eps = R::cast(1e-12).max(R::epsilon());
        p.max(eps).min(R::one() - eps)
    }
}

fn class_counts(y: &[u8]) -> Result<(usize, usize)> {
    let mut neg = 0usize;
    let mut pos = 0usize;
    for label in y {
        match label {
            0 => neg += 1,
            1 => pos += 1,
            other => {
                return Err(Error::Calibration(format!(
                    "label {other} is not 0 or 1"
                )))
            }
        }
    }
    if neg == 0 || pos == 0 {
        return Err(Error::Calibration(
            "calibration needs samples of both classes".into(),
        ));
    }
    Ok((neg, pos))
}

/// log(1 + e^u) without overflow.
fn softplus<R: Real>(u: R) -> R {
    u.max(R::zero()) + (-u.abs()).exp().ln_1p()
}

fn platt_nll<R: Real>(f: &[R], targets: &[R], a: R, b: R) -> R {
    f.iter()
        .zip(targets)
        .map(|(fi, t)| {
            let z = a * *fi + b;
            *t * softplus(z) + (R::one() - *t) * softplus(-z)
        })
        .sum()
}

/// Fit (a, b) by maximizing the likelihood of `y` under the sigmoid, with
/// optional prior-count smoothing of the targets.
pub fn fit_platt_with_options<R: Real>(
    f_hat: &[R],
    y: &[u8],
    smoothing: bool,
) -> Result<PlattCoefficients<R>> {
    if f_hat.len() != y.len() {
        return Err(Error::DimensionMismatch {
            what: "decision values",
            expected: y.len(),
            got: f_hat.len(),
        });
    }
    let (neg, pos) = class_counts(y)?;
    let (target_pos, target_neg) = if smoothing {
        (
            R::cast((pos as f64 + 1.0) / (pos as f64 + 2.0)),
            R::cast(1.0 / (neg as f64 + 2.0)),
        )
    } else {
        (R::one(), R::zero())
    };
    let targets: Vec<R> = y
        .iter()
        .map(|label| if *label == 1 { target_pos } else { target_neg })
        .collect();
    let t_mean = targets.iter().copied().sum::<R>() / R::cast(targets.len() as f64);
    // Intercept-only maximum likelihood; also the starting point.
    let b_prior = ((R::one() - t_mean) / t_mean).ln();

    let f_min = f_hat.iter().copied().fold(R::infinity(), R::min);
    let f_max = f_hat.iter().copied().fold(R::neg_infinity(), R::max);
    if !(f_min.is_finite() && f_max.is_finite()) {
        return Err(Error::Calibration("non-finite decision values".into()));
    }
    if f_max - f_min <= R::epsilon() * (R::one() + f_max.abs()) {
        // The slope is unidentifiable on constant scores.
        return Ok(PlattCoefficients {
            a: R::zero(),
            b: b_prior,
        });
    }

    let mut a = R::zero();
    let mut b = b_prior;
    let mut nll = platt_nll(f_hat, &targets, a, b);
    let grad_tol = R::cast(1e-10);
    let ridge = R::cast(1e-12);

    for _ in 0..200 {
        // Gradient and Hessian of the negative log-likelihood.
        let mut g_a = R::zero();
        let mut g_b = R::zero();
        let mut h_aa = ridge;
        let mut h_ab = R::zero();
        let mut h_bb = ridge;
        for (fi, t) in f_hat.iter().zip(&targets) {
            let z = a * *fi + b;
            let p = if z >= R::zero() {
                let e = (-z).exp();
                e / (R::one() + e)
            } else {
                R::one() / (R::one() + z.exp())
            };
            let residual = *t - p;
            let w = p * (R::one() - p);
            g_a += residual * *fi;
            g_b += residual;
            h_aa += w * *fi * *fi;
            h_ab += w * *fi;
            h_bb += w;
        }
        if g_a.abs().max(g_b.abs()) < grad_tol {
            break;
        }
        // Damped Newton: escalate the ridge until the step decreases the
        // objective, degrading towards a scaled gradient step.
        let mut lambda = R::zero();
        let mut improved = false;
        'damping: for _ in 0..16 {
            let haa = h_aa + lambda;
            let hbb = h_bb + lambda;
            let det = haa * hbb - h_ab * h_ab;
            if det > R::zero() {
                let da = -(hbb * g_a - h_ab * g_b) / det;
                let db = -(haa * g_b - h_ab * g_a) / det;
                let mut step = R::one();
                for _ in 0..30 {
                    let trial_a = a + step * da;
                    let trial_b = b + step * db;
                    let trial = platt_nll(f_hat, &targets, trial_a, trial_b);
                    if trial < nll {
                        a = trial_a;
                        b = trial_b;
                        nll = trial;
                        improved = true;
                        break 'damping;
                    }
                    step *= R::cast(0.5);
                }
            }
            lambda = if lambda == R::zero() {
                (h_aa + h_bb) * R::cast(1e-8) + R::cast(1e-12)
            } else {
                lambda * R::cast(10.0)
            };
        }
        if !improved {
            break;
        }
    }
    Ok(PlattCoefficients { a, b })
}

/// Fit (a, b) on raw {0,1} targets.
pub fn fit_platt<R: Real>(f_hat: &[R], y: &[u8]) -> Result<PlattCoefficients<R>> {
    fit_platt_with_options(f_hat, y, false)
}

/// Deterministic stratified fold assignment: each class is shuffled with
/// the seeded generator and dealt round-robin, so every fold mirrors the
/// class balance. Folds are returned as sorted index sets.
pub fn stratified_folds(y: &[u8], n_folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if n_folds < 2 {
        return Err(Error::Calibration(format!(
            "cross-validation needs at least 2 folds, got {n_folds}"
        )));
    }
    class_counts(y)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); n_folds];
    for class in [0u8, 1] {
        let mut indices: Vec<usize> = (0..y.len()).filter(|i| y[*i] == class).collect();
        shuffle(&mut indices, &mut rng);
        for (pos, idx) in indices.into_iter().enumerate() {
            // Class 1 is dealt in reverse fold order so the remainders of
            // the two classes land on different folds and sizes stay even.
            let fold = match class {
                0 => pos % n_folds,
                _ => n_folds - 1 - pos % n_folds,
            };
            folds[fold].push(idx);
        }
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(folds)
}

/// Fit Platt coefficients on pooled out-of-fold decision values.
///
/// `oof_scores` must return decision values for `eval` produced by a model
/// trained only on `train`; the two index sets are always disjoint.
pub fn fit_platt_cv<R: Real>(
    y: &[u8],
    folds: &[Vec<usize>],
    smoothing: bool,
    mut oof_scores: impl FnMut(&[usize], &[usize]) -> Result<Vec<R>>,
) -> Result<PlattCoefficients<R>> {
    let n = y.len();
    let mut pooled_scores = Vec::with_capacity(n);
    let mut pooled_labels = Vec::with_capacity(n);
    for fold in folds {
        if fold.is_empty() {
            continue;
        }
        let mut in_fold = vec![false; n];
        for idx in fold {
            in_fold[*idx] = true;
        }
        let train: Vec<usize> = (0..n).filter(|i| !in_fold[*i]).collect();
        let scores = oof_scores(&train, fold)?;
        if scores.len() != fold.len() {
            return Err(Error::Calibration(format!(
                "producer returned {} scores for a fold of {}",
                scores.len(),
                fold.len()
            )));
        }
        for (idx, score) in fold.iter().zip(scores) {
            pooled_scores.push(score);
            pooled_labels.push(y[*idx]);
        }
    }
    fit_platt_with_options(&pooled_scores, &pooled_labels, smoothing)
}

/// Signed log-likelihood Σ y log p + (1-y) log(1-p); at most 0.
pub fn log_likelihood<R: Real>(p: &[R], y: &[u8]) -> Result<R> {
    if p.len() != y.len() {
        return Err(Error::DimensionMismatch {
            what: "probability vector",
            expected: y.len(),
            got: p.len(),
        });
    }
    let mut total = R::zero();
    for (pi, label) in p.iter().zip(y) {
        if !(*pi > R::zero() && *pi < R::one()) {
            return Err(Error::Calibration(format!(
                "probability {pi} outside (0, 1); clamp before the log"
            )));
        }
        total += match label {
            1 => pi.ln(),
            0 => (R::one() - *pi).ln(),
            other => {
                return Err(Error::Calibration(format!(
                    "label {other} is not 0 or 1"
                )))
            }
        };
    }
    Ok(total)
}

/// BIC = -2 log L + d log n. Requires n >= 1.
pub fn bic<R: Real>(log_lik: R, d: usize, n: usize) -> R {
    -R::cast(2.0) * log_lik + R::cast(d as f64) * R::cast(n as f64).ln()
}

/// Selection probabilities exp(-BIC_m/2) / Σ exp(-BIC_i/2), computed with
/// max-subtraction. An empty input yields an empty output.
pub fn model_probabilities<R: Real>(bics: &[R]) -> Vec<R> {
    if bics.is_empty() {
        return Vec::new();
    }
    let half = R::cast(0.5);
    let scores: Vec<R> = bics.iter().map(|b| -*b * half).collect();
    let max = scores.iter().copied().fold(R::neg_infinity(), R::max);
    let exps: Vec<R> = scores.iter().map(|s| (*s - max).exp()).collect();
    let sum: R = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Which set size plays the role of N in the BIC penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BicN {
    /// Size of the validation set the log-likelihood is computed on.
    Validation,
    /// Size of the training set.
    Train,
}

/// Knobs of the candidate evaluation pipeline, held fixed across all
/// candidates of a search so scores compare like for like.
#[derive(Debug, Clone)]
pub struct EvalSettings<R> {
    pub svm_c: R,
    pub svm_tol: R,
    pub platt_folds: usize,
    pub fold_seed: u64,
    pub bic_n: BicN,
    pub platt_smoothing: bool,
    pub validate_grams: bool,
}

impl<R: Real> Default for EvalSettings<R> {
    fn default() -> Self {
        Self {
            svm_c: R::one(),
            svm_tol: R::cast(1e-3),
            platt_folds: 4,
            fold_seed: 0,
            bic_n: BicN::Validation,
            platt_smoothing: false,
            validate_grams: false,
        }
    }
}

/// A trained SVM with its calibration and information-criterion score.
#[derive(Debug, Clone)]
pub struct CalibratedModel<R> {
    pub svm: SvmModel<R>,
    pub platt: PlattCoefficients<R>,
    pub log_likelihood: R,
    pub bic: R,
    pub d: usize,
    pub n_eval: usize,
}

/// Everything the search records about one evaluated candidate.
#[derive(Debug, Clone)]
pub struct CandidateEvaluation<R> {
    pub model: CalibratedModel<R>,
    pub val_confusion: ConfusionCounts,
    pub val_balanced_accuracy: Option<R>,
    pub val_f1: Option<R>,
}

/// Evaluate a candidate from already-prepared circuit states.
///
/// `d_params` is the number of rotation gates, i.e. the BIC parameter
/// count of the circuit the states came from.
pub fn evaluate_candidate_with_states<R: Real>(
    d_params: usize,
    train_states: &[StateVector<R>],
    train_y: &[u8],
    valid_states: &[StateVector<R>],
    valid_y: &[u8],
    settings: &EvalSettings<R>,
) -> Result<CandidateEvaluation<R>> {
    let gram = gram_from_states(train_states)?;
    if settings.validate_grams {
        gram.validate_gram(R::cast(1e-10), R::cast(1e-10), R::cast(-1e-8))?;
    }
    let svm = train_dual(&gram, train_y, settings.svm_c, settings.svm_tol)?;

    let folds = stratified_folds(train_y, settings.platt_folds, settings.fold_seed)?;
    let platt = fit_platt_cv(train_y, &folds, settings.platt_smoothing, |train, eval| {
        let sub_y: Vec<u8> = train.iter().map(|i| train_y[*i]).collect();
        let sub_gram = gram.select(train, train);
        let fold_model = train_dual(&sub_gram, &sub_y, settings.svm_c, settings.svm_tol)?;
        let eval_rows = gram.select(eval, train);
        decision_function(&fold_model, &eval_rows)
    })?;

    let k_val = cross_from_states(valid_states, train_states)?;
    let f_val = decision_function(&svm, &k_val)?;
    let p: Vec<R> = f_val.iter().map(|f| platt.probability(*f)).collect();
    let ll = log_likelihood(&p, valid_y)?;
    let n_eval = match settings.bic_n {
        BicN::Validation => valid_y.len(),
        BicN::Train => train_y.len(),
    };
    let bic_value = bic(ll, d_params, n_eval);

    let predictions: Vec<u8> = f_val
        .iter()
        .map(|f| if *f >= R::zero() { 1 } else { 0 })
        .collect();
    let val_confusion = ConfusionCounts::from_labels(valid_y, &predictions)?;

    Ok(CandidateEvaluation {
        model: CalibratedModel {
            svm,
            platt,
            log_likelihood: ll,
            bic: bic_value,
            d: d_params,
            n_eval,
        },
        val_confusion,
        val_balanced_accuracy: val_confusion.balanced_accuracy().ok(),
        val_f1: val_confusion.f1().ok(),
    })
}

/// Evaluate a candidate circuit end to end: kernel on the training set,
/// SVM, cross-validated calibration, validation log-likelihood, BIC.
pub fn evaluate_candidate<R: Real>(
    descriptor: &CircuitDescriptor,
    theta: &ParamVector<R>,
    train_x: &[FeatureVector<R>],
    train_y: &[u8],
    valid_x: &[FeatureVector<R>],
    valid_y: &[u8],
    settings: &EvalSettings<R>,
) -> Result<CandidateEvaluation<R>> {
    let train_states = crate::kernelmat::circuit_states(train_x, descriptor, theta)?;
    let valid_states = crate::kernelmat::circuit_states(valid_x, descriptor, theta)?;
    evaluate_candidate_with_states(
        descriptor.param_count(),
        &train_states,
        train_y,
        &valid_states,
        valid_y,
        settings,
    )
}
