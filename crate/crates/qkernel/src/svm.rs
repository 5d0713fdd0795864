//! Soft-margin kernel SVM trained on a precomputed kernel.
//!
//! The dual problem
//!
//! ```text
//! max_α Σ α_i - ½ Σ_ij α_i α_j y_i y_j K_ij,  0 ≤ α_i ≤ C,  Σ α_i y_i = 0
//! ```
//!
//! is solved by pairwise coordinate ascent on the maximal violating pair,
//! with convergence declared when the largest KKT violation drops below
//! `tol`. [`SmoSolver`] exposes single steps so callers can observe the
//! iterate; [`train_dual`] is the plain loop around it.

use crate::error::{Error, Result};
use crate::kernelmat::KernelMatrix;
use crate::scalar::Real;

/// Fallback curvature for numerically flat (or indefinite) directions.
const TAU: f64 = 1e-12;

/// An index with its selection score, when the candidate set is non-empty.
type ScoredIndex<R> = Option<(usize, R)>;

/// Hard cap on pairwise updates per training run.
pub const MAX_SMO_STEPS: usize = 100_000;

/// Trained SVM: dual coefficients, bias, and the ±1 training labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel<R> {
    alpha: Vec<R>,
    bias: R,
    labels_pm: Vec<i8>,
    c: R,
}

impl<R: Real> SvmModel<R> {
    /// Assemble a model from raw parts; lengths must agree.
    pub fn from_parts(alpha: Vec<R>, bias: R, labels_pm: Vec<i8>, c: R) -> Result<Self> {
        if alpha.len() != labels_pm.len() {
            return Err(Error::Training(format!(
                "{} alphas for {} labels",
                alpha.len(),
                labels_pm.len()
            )));
        }
        if labels_pm.iter().any(|y| *y != 1 && *y != -1) {
            return Err(Error::Training("labels must be plus or minus one".into()));
        }
        Ok(Self {
            alpha,
            bias,
            labels_pm,
            c,
        })
    }

    pub fn alpha(&self) -> &[R] {
        &self.alpha
    }

    pub fn bias(&self) -> R {
        self.bias
    }

    pub fn labels_pm(&self) -> &[i8] {
        &self.labels_pm
    }

    pub fn c(&self) -> R {
        self.c
    }

    pub fn training_size(&self) -> usize {
        self.alpha.len()
    }

    /// Indices with nonzero dual coefficient.
    pub fn support_indices(&self) -> Vec<usize> {
        self.alpha
            .iter()
            .enumerate()
            .filter(|(_, a)| **a > R::zero())
            .map(|(i, _)| i)
            .collect()
    }

    pub fn with_bias(mut self, bias: R) -> Self {
        self.bias = bias;
        self
    }
}

/// Map {0,1} class labels to the ±1 convention used internally.
fn to_pm(y: &[u8]) -> Result<Vec<i8>> {
    let mut pos = 0usize;
    let mut neg = 0usize;
    let pm = y
        .iter()
        .map(|label| match label {
            0 => {
                neg += 1;
                Ok(-1i8)
            }
            1 => {
                pos += 1;
                Ok(1i8)
            }
            other => Err(Error::Training(format!("label {other} is not 0 or 1"))),
        })
        .collect::<Result<Vec<i8>>>()?;
    if pos == 0 || neg == 0 {
        return Err(Error::Training(
            "training set must contain both classes".into(),
        ));
    }
    Ok(pm)
}

/// Sequential minimal optimization on a precomputed kernel.
pub struct SmoSolver<'k, R> {
    kernel: &'k KernelMatrix<R>,
    y: Vec<R>,
    labels_pm: Vec<i8>,
    alpha: Vec<R>,
    /// Gradient of the minimized form: G_i = Σ_j y_i y_j K_ij α_j - 1.
    grad: Vec<R>,
    c: R,
    tol: R,
    steps: usize,
    converged: bool,
}

impl<'k, R: Real> SmoSolver<'k, R> {
    pub fn new(kernel: &'k KernelMatrix<R>, y: &[u8], c: R, tol: R) -> Result<Self> {
        if !kernel.is_square() {
            return Err(Error::Training(format!(
                "training kernel is {}x{}, not square",
                kernel.rows(),
                kernel.cols()
            )));
        }
        if kernel.rows() != y.len() {
            return Err(Error::Training(format!(
                "kernel has {} rows for {} labels",
                kernel.rows(),
                y.len()
            )));
        }
        if c <= R::zero() {
            return Err(Error::Training("box constraint C must be positive".into()));
        }
        let labels_pm = to_pm(y)?;
        let n = y.len();
        Ok(Self {
            kernel,
            y: labels_pm.iter().map(|v| R::cast(*v as f64)).collect(),
            labels_pm,
            alpha: vec![R::zero(); n],
            grad: vec![-R::one(); n],
            c,
            tol,
            steps: 0,
            converged: false,
        })
    }

    pub fn alpha(&self) -> &[R] {
        &self.alpha
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    /// Dual objective Σα - ½ αᵀQα, written via the gradient as
    /// ½ Σ α_i (1 - G_i).
    pub fn dual_objective(&self) -> R {
        let half = R::cast(0.5);
        self.alpha
            .iter()
            .zip(&self.grad)
            .map(|(a, g)| *a * (R::one() - *g))
            .sum::<R>()
            * half
    }

    /// Residual of the equality constraint Σ α_i y_i.
    pub fn equality_residual(&self) -> R {
        self.alpha
            .iter()
            .zip(&self.y)
            .map(|(a, y)| *a * *y)
            .sum()
    }

    fn in_up(&self, i: usize) -> bool {
        (self.labels_pm[i] == 1 && self.alpha[i] < self.c)
            || (self.labels_pm[i] == -1 && self.alpha[i] > R::zero())
    }

    fn in_low(&self, i: usize) -> bool {
        (self.labels_pm[i] == 1 && self.alpha[i] > R::zero())
            || (self.labels_pm[i] == -1 && self.alpha[i] < self.c)
    }

    /// (max over the up set, min over the low set) of -y_i G_i, with the
    /// indices attaining them.
    fn violating_pair(&self) -> (ScoredIndex<R>, ScoredIndex<R>) {
        let mut up: Option<(usize, R)> = None;
        let mut low: Option<(usize, R)> = None;
        for i in 0..self.alpha.len() {
            let score = -self.y[i] * self.grad[i];
            if self.in_up(i) && up.is_none_or(|(_, m)| score > m) {
                up = Some((i, score));
            }
            if self.in_low(i) && low.is_none_or(|(_, m)| score < m) {
                low = Some((i, score));
            }
        }
        (up, low)
    }

    /// Largest KKT violation, m(α) - M(α); non-positive means optimal.
    pub fn max_kkt_violation(&self) -> R {
        match self.violating_pair() {
            (Some((_, m)), Some((_, mm))) => m - mm,
            _ => R::neg_infinity(),
        }
    }

    /// One maximal-violating-pair update. Returns false once the KKT gap is
    /// below tolerance (no update performed).
    pub fn step(&mut self) -> bool {
        let (up, low) = self.violating_pair();
        let (Some((i, m)), Some((j, mm))) = (up, low) else {
            self.converged = true;
            return false;
        };
        if m - mm < self.tol {
            self.converged = true;
            return false;
        }
        let quad = {
            let q = self.kernel.get(i, i) + self.kernel.get(j, j)
                - R::cast(2.0) * self.kernel.get(i, j);
            if q > R::zero() {
                q
            } else {
                R::cast(TAU)
            }
        };
        // Move along α_i += y_i t, α_j -= y_j t, which keeps Σ α y fixed.
        let t_star = (m - mm) / quad;
        let t_hi_i = if self.labels_pm[i] == 1 {
            self.c - self.alpha[i]
        } else {
            self.alpha[i]
        };
        let t_hi_j = if self.labels_pm[j] == 1 {
            self.alpha[j]
        } else {
            self.c - self.alpha[j]
        };
        let t = t_star.min(t_hi_i).min(t_hi_j);
        let delta_i = self.y[i] * t;
        let delta_j = -self.y[j] * t;
        self.alpha[i] = (self.alpha[i] + delta_i).max(R::zero()).min(self.c);
        self.alpha[j] = (self.alpha[j] + delta_j).max(R::zero()).min(self.c);
        for k in 0..self.grad.len() {
            let dk = self.y[k] * t * (self.kernel.get(k, i) - self.kernel.get(k, j));
            self.grad[k] += dk;
        }
        self.steps += 1;
        true
    }

    /// Bias from the free support vectors, or the midpoint of the KKT
    /// interval when every coefficient sits on a bound.
    fn bias(&self) -> R {
        let mut sum = R::zero();
        let mut count = 0usize;
        for i in 0..self.alpha.len() {
            if self.alpha[i] > R::zero() && self.alpha[i] < self.c {
                sum += -self.y[i] * self.grad[i];
                count += 1;
            }
        }
        if count > 0 {
            return sum / R::cast(count as f64);
        }
        match self.violating_pair() {
            (Some((_, m)), Some((_, mm))) => (m + mm) * R::cast(0.5),
            _ => R::zero(),
        }
    }

    pub fn into_model(self) -> SvmModel<R> {
        let bias = self.bias();
        SvmModel {
            alpha: self.alpha,
            bias,
            labels_pm: self.labels_pm,
            c: self.c,
        }
    }
}

/// Train to convergence (or the step cap) and return the model.
pub fn train_dual<R: Real>(
    kernel: &KernelMatrix<R>,
    y: &[u8],
    c: R,
    tol: R,
) -> Result<SvmModel<R>> {
    let mut solver = SmoSolver::new(kernel, y, c, tol)?;
    while solver.steps() < MAX_SMO_STEPS && solver.step() {}
    Ok(solver.into_model())
}

/// Decision values f_i = Σ_j α_j y_j K_eval(i, j) + b.
pub fn decision_function<R: Real>(
    model: &SvmModel<R>,
    k_eval: &KernelMatrix<R>,
) -> Result<Vec<R>> {
    if k_eval.cols() != model.alpha.len() {
        return Err(Error::DimensionMismatch {
            what: "evaluation kernel columns",
            expected: model.alpha.len(),
            got: k_eval.cols(),
        });
    }
    let weighted: Vec<R> = model
        .alpha
        .iter()
        .zip(&model.labels_pm)
        .map(|(a, y)| *a * R::cast(*y as f64))
        .collect();
    Ok((0..k_eval.rows())
        .map(|i| {
            k_eval
                .row(i)
                .iter()
                .zip(&weighted)
                .map(|(k, w)| *k * *w)
                .sum::<R>()
                + model.bias
        })
        .collect())
}

/// Class predictions in {0,1}; a decision value of exactly zero maps to
/// class 1.
pub fn predict<R: Real>(model: &SvmModel<R>, k_eval: &KernelMatrix<R>) -> Result<Vec<u8>> {
    Ok(decision_function(model, k_eval)?
        .into_iter()
        .map(|f| if f >= R::zero() { 1 } else { 0 })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kernel_from(values: &[&[f64]]) -> KernelMatrix<f64> {
        KernelMatrix::from_fn(values.len(), values[0].len(), |i, j| values[i][j])
    }

    #[test]
    fn two_point_problem_is_symmetric() {
        let k = kernel_from(&[&[1.0, 0.5], &[0.5, 1.0]]);
        let model = train_dual(&k, &[0, 1], 1.0, 1e-3).unwrap();
        assert!((model.alpha()[0] - model.alpha()[1]).abs() < 1e-12);
        assert!(model.bias().abs() < 1e-12);
        let f = decision_function(&model, &k).unwrap();
        assert!(f[0] < 0.0 && f[1] > 0.0);
        assert!((f[0] + f[1]).abs() < 1e-12);
        assert_eq!(model.support_indices(), vec![0, 1]);
    }

    #[test]
    fn separable_problem_recovers_training_labels() {
        // Block kernel: strong similarity within each class.
        let k = kernel_from(&[
            &[1.0, 0.9, 0.1, 0.1],
            &[0.9, 1.0, 0.1, 0.1],
            &[0.1, 0.1, 1.0, 0.9],
            &[0.1, 0.1, 0.9, 1.0],
        ]);
        let y = [0, 0, 1, 1];
        let model = train_dual(&k, &y, 1.0, 1e-4).unwrap();
        let predicted = predict(&model, &k).unwrap();
        assert_eq!(predicted, y);
    }

    #[test]
    fn free_support_vectors_sit_on_the_margin() {
        let k = kernel_from(&[
            &[1.0, 0.3, 0.2, 0.1],
            &[0.3, 1.0, 0.1, 0.2],
            &[0.2, 0.1, 1.0, 0.3],
            &[0.1, 0.2, 0.3, 1.0],
        ]);
        let y = [0, 0, 1, 1];
        let model = train_dual(&k, &y, 10.0, 1e-5).unwrap();
        let f = decision_function(&model, &k).unwrap();
        for i in 0..4 {
            let a = model.alpha()[i];
            if a > 0.0 && a < model.c() {
                assert!(
                    (f[i].abs() - 1.0).abs() < 1e-3,
                    "free vector {i} has |f| = {}",
                    f[i].abs()
                );
            }
        }
    }

    #[test]
    fn bias_shift_moves_decisions_uniformly() {
        let k = kernel_from(&[&[1.0, 0.5], &[0.5, 1.0]]);
        let model = train_dual(&k, &[0, 1], 1.0, 1e-3).unwrap();
        let base = decision_function(&model, &k).unwrap();
        let shifted_model = model.clone().with_bias(model.bias() + 0.7);
        let shifted = decision_function(&shifted_model, &k).unwrap();
        for (a, b) in base.iter().zip(&shifted) {
            assert!((b - a - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn predict_breaks_ties_toward_class_one() {
        let model =
            SvmModel::from_parts(vec![0.0, 0.0], 0.0, vec![-1, 1], 1.0).unwrap();
        let k = kernel_from(&[&[0.2, 0.2]]);
        assert_eq!(predict(&model, &k).unwrap(), vec![1]);

        let up = model.clone().with_bias(0.7);
        assert_eq!(predict(&up, &k).unwrap(), vec![1]);
        let down = model.with_bias(-0.7);
        assert_eq!(predict(&down, &k).unwrap(), vec![0]);
    }

    #[test]
    fn rejects_single_class_and_bad_shapes() {
        let k = kernel_from(&[&[1.0, 0.5], &[0.5, 1.0]]);
        assert!(matches!(
            train_dual(&k, &[1, 1], 1.0, 1e-3),
            Err(Error::Training(_))
        ));
        assert!(train_dual(&k, &[0, 1], -1.0, 1e-3).is_err());

        let rect = KernelMatrix::from_fn(2, 3, |_, _| 0.0);
        assert!(train_dual(&rect, &[0, 1], 1.0, 1e-3).is_err());

        let model = train_dual(&k, &[0, 1], 1.0, 1e-3).unwrap();
        assert!(decision_function(&model, &rect).is_err());
    }

    #[test]
    fn feasibility_holds_at_every_step() {
        let k = kernel_from(&[
            &[1.0, 0.8, 0.3, 0.2, 0.5],
            &[0.8, 1.0, 0.2, 0.4, 0.3],
            &[0.3, 0.2, 1.0, 0.7, 0.6],
            &[0.2, 0.4, 0.7, 1.0, 0.5],
            &[0.5, 0.3, 0.6, 0.5, 1.0],
        ]);
        let y = [0, 1, 0, 1, 1];
        let mut solver = SmoSolver::new(&k, &y, 0.7, 1e-6).unwrap();
        let mut last_objective = solver.dual_objective();
        while solver.step() {
            for a in solver.alpha() {
                assert!(*a >= 0.0 && *a <= 0.7);
            }
            assert!(solver.equality_residual().abs() < 1e-8);
            let objective = solver.dual_objective();
            assert!(objective >= last_objective - 1e-12);
            last_objective = objective;
            assert!(solver.steps() < MAX_SMO_STEPS);
        }
        assert!(solver.converged());
        assert!(solver.max_kkt_violation() < 1e-6);
    }
}
