//! Gaussian-process surrogate optimization of circuit parameters.
//!
//! The loop evaluates the objective at seeded random points, fits an exact
//! GP with an RBF kernel to the negated values (the surrogate models the
//! quantity being maximized), and proposes the next evaluation at the
//! maximum of the upper-confidence-bound acquisition μ + κσ over the
//! bounds box. Everything is deterministic given the seed.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::circuit::ParamVector;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::util::uniform_f64;

/// RBF kernel hyperparameters and the diagonal jitter of the GP.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpHyperParams<R> {
    pub lengthscale: R,
    pub signal_variance: R,
    pub jitter: R,
}

impl<R: Real> Default for GpHyperParams<R> {
    fn default() -> Self {
        Self {
            lengthscale: R::one(),
            signal_variance: R::one(),
            jitter: R::cast(1e-8),
        }
    }
}

/// Exact GP regression model with an RBF kernel. Targets are standardized
/// internally and de-standardized on prediction.
#[derive(Debug, Clone)]
pub struct GpModel<R> {
    inputs: Vec<Vec<R>>,
    y_mean: R,
    y_scale: R,
    /// Lower-triangular Cholesky factor of K + jitter·I, row-major.
    chol: Vec<R>,
    /// (K + jitter·I)^{-1} applied to the standardized targets.
    weights: Vec<R>,
    hp: GpHyperParams<R>,
    jitter_used: R,
}

fn squared_distance<R: Real>(a: &[R], b: &[R]) -> R {
    a.iter()
        .zip(b)
        .map(|(x, y)| (*x - *y) * (*x - *y))
        .sum()
}

fn rbf<R: Real>(a: &[R], b: &[R], hp: &GpHyperParams<R>, jitter: R) -> R {
    let two = R::cast(2.0);
    let value = hp.signal_variance
        * (-squared_distance(a, b) / (two * hp.lengthscale * hp.lengthscale)).exp();
    if std::ptr::eq(a, b) {
        value + jitter
    } else {
        value
    }
}

/// In-place Cholesky factorization of a row-major symmetric matrix.
/// Returns the lower factor, or None if a pivot is not positive.
fn cholesky<R: Real>(mut a: Vec<R>, n: usize) -> Option<Vec<R>> {
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= a[i * n + k] * a[j * n + k];
            }
            if i == j {
                if !(sum > R::zero()) || !sum.is_finite() {
                    return None;
                }
                a[i * n + j] = sum.sqrt();
            } else {
                a[i * n + j] = sum / a[j * n + j];
            }
        }
        for j in (i + 1)..n {
            a[i * n + j] = R::zero();
        }
    }
    Some(a)
}

fn solve_lower<R: Real>(l: &[R], n: usize, rhs: &[R]) -> Vec<R> {
    let mut x = rhs.to_vec();
    for i in 0..n {
        for k in 0..i {
            let lik = l[i * n + k];
            x[i] = x[i] - lik * x[k];
        }
        x[i] /= l[i * n + i];
    }
    x
}

fn solve_upper_from_lower<R: Real>(l: &[R], n: usize, rhs: &[R]) -> Vec<R> {
    let mut x = rhs.to_vec();
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            let lki = l[k * n + i];
            x[i] = x[i] - lki * x[k];
        }
        x[i] /= l[i * n + i];
    }
    x
}

/// Fit an exact GP to (input, target) samples. On a factorization failure
/// the jitter escalates by factors of ten up to 1e-2 before giving up.
pub fn gp_fit<R: Real>(
    inputs: Vec<Vec<R>>,
    targets: &[R],
    hp: GpHyperParams<R>,
) -> Result<GpModel<R>> {
    let n = inputs.len();
    if n == 0 || targets.len() != n {
        return Err(Error::BayesOpt(format!(
            "{n} inputs with {} targets",
            targets.len()
        )));
    }
    if targets.iter().any(|t| !t.is_finite()) {
        return Err(Error::BayesOpt("non-finite GP target".into()));
    }
    if !(hp.lengthscale > R::zero()) || !(hp.signal_variance > R::zero()) {
        return Err(Error::BayesOpt(
            "lengthscale and signal variance must be positive".into(),
        ));
    }
    let y_mean = targets.iter().copied().sum::<R>() / R::cast(n as f64);
    let variance = targets
        .iter()
        .map(|t| (*t - y_mean) * (*t - y_mean))
        .sum::<R>()
        / R::cast(n as f64);
    let y_scale = if variance > R::cast(1e-24) {
        variance.sqrt()
    } else {
        R::one()
    };
    let standardized: Vec<R> = targets.iter().map(|t| (*t - y_mean) / y_scale).collect();

    let mut jitter = hp.jitter.max(R::cast(1e-12));
    let jitter_cap = R::cast(1e-2);
    loop {
        let mut cov = vec![R::zero(); n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = if i == j {
                    hp.signal_variance + jitter
                } else {
                    rbf(&inputs[i], &inputs[j], &hp, R::zero())
                };
                cov[i * n + j] = v;
                cov[j * n + i] = v;
            }
        }
        if let Some(chol) = cholesky(cov, n) {
            let half = solve_lower(&chol, n, &standardized);
            let weights = solve_upper_from_lower(&chol, n, &half);
            return Ok(GpModel {
                inputs,
                y_mean,
                y_scale,
                chol,
                weights,
                hp,
                jitter_used: jitter,
            });
        }
        jitter *= R::cast(10.0);
        if jitter > jitter_cap {
            return Err(Error::BayesOpt(
                "covariance factorization failed at maximum jitter".into(),
            ));
        }
    }
}

impl<R: Real> GpModel<R> {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn jitter_used(&self) -> R {
        self.jitter_used
    }

    /// Posterior mean and standard deviation at `theta`.
    pub fn predict(&self, theta: &[R]) -> Result<(R, R)> {
        let n = self.inputs.len();
        if theta.len() != self.inputs[0].len() {
            return Err(Error::DimensionMismatch {
                what: "GP query point",
                expected: self.inputs[0].len(),
                got: theta.len(),
            });
        }
        let k_star: Vec<R> = self
            .inputs
            .iter()
            .map(|x| rbf(x, theta, &self.hp, R::zero()))
            .collect();
        let mean_std = k_star
            .iter()
            .zip(&self.weights)
            .map(|(k, w)| *k * *w)
            .sum::<R>();
        let v = solve_lower(&self.chol, n, &k_star);
        let reduction = v.iter().map(|x| *x * *x).sum::<R>();
        let var = (self.hp.signal_variance - reduction).max(R::zero());
        Ok((
            self.y_mean + self.y_scale * mean_std,
            self.y_scale * var.sqrt(),
        ))
    }
}

/// Upper confidence bound μ(θ) + κ·σ(θ) of the fitted surrogate.
pub fn ucb_acquisition<R: Real>(model: &GpModel<R>, theta: &[R], kappa: R) -> Result<R> {
    let (mean, std) = model.predict(theta)?;
    Ok(mean + kappa * std)
}

/// Configuration of one optimization run. `iterations` defaults to 10·d
/// when unset; `bounds` is the same closed-open interval on every
/// coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct BoConfig<R> {
    pub n_init: usize,
    pub iterations: Option<usize>,
    pub kappa: R,
    pub bounds: (R, R),
    pub seed: u64,
}

impl<R: Real> Default for BoConfig<R> {
    fn default() -> Self {
        Self {
            n_init: 50,
            iterations: None,
            kappa: R::one(),
            bounds: (R::zero(), R::cast(std::f64::consts::TAU)),
            seed: 0,
        }
    }
}

/// One objective evaluation of the run.
#[derive(Debug, Clone, PartialEq)]
pub struct BoTraceEntry<R> {
    pub theta: Vec<R>,
    pub value: R,
}

#[derive(Debug, Clone)]
pub struct BoResult<R> {
    pub best_theta: ParamVector<R>,
    pub best_value: R,
    pub trace: Vec<BoTraceEntry<R>>,
}

fn uniform_point<R: Real>(rng: &mut ChaCha8Rng, d: usize, bounds: (R, R)) -> Vec<R> {
    (0..d)
        .map(|_| {
            let u = R::cast(uniform_f64(rng));
            bounds.0 + (bounds.1 - bounds.0) * u
        })
        .collect()
}

/// Minimize `objective` over a d-dimensional box.
///
/// Warm starts are evaluated first, then `n_init` seeded uniform points;
/// each subsequent round fits the GP on the negated finite values and
/// evaluates the objective at the acquisition maximizer. Non-finite
/// objective values are recorded as +∞ and excluded from the surrogate.
pub fn bo_minimize<R: Real>(
    objective: impl Fn(&[R]) -> R,
    d: usize,
    config: &BoConfig<R>,
    warm_starts: &[Vec<R>],
) -> Result<BoResult<R>> {
    if d == 0 {
        return Err(Error::BayesOpt("dimension must be at least 1".into()));
    }
    if config.n_init == 0 {
        return Err(Error::BayesOpt("n_init must be at least 1".into()));
    }
    if !(config.bounds.1 > config.bounds.0) {
        return Err(Error::BayesOpt("empty bounds box".into()));
    }
    if config.kappa < R::zero() {
        return Err(Error::BayesOpt("kappa must be non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut trace: Vec<BoTraceEntry<R>> = Vec::new();

    let evaluate = |theta: Vec<R>, trace: &mut Vec<BoTraceEntry<R>>| {
        let raw = objective(&theta);
        let value = if raw.is_finite() { raw } else { R::infinity() };
        trace.push(BoTraceEntry { theta, value });
    };

    for warm in warm_starts {
        if warm.len() != d {
            return Err(Error::DimensionMismatch {
                what: "warm start point",
                expected: d,
                got: warm.len(),
            });
        }
        evaluate(warm.clone(), &mut trace);
    }
    for _ in 0..config.n_init {
        let theta = uniform_point(&mut rng, d, config.bounds);
        evaluate(theta, &mut trace);
    }

    // Lengthscale from the median pairwise distance of the initial design,
    // fixed for the rest of the run.
    let lengthscale = median_pairwise_distance(&trace, d, config.bounds);

    let iterations = config.iterations.unwrap_or(10 * d);
    for _ in 0..iterations {
        let finite: Vec<(&Vec<R>, R)> = trace
            .iter()
            .filter(|e| e.value.is_finite())
            .map(|e| (&e.theta, -e.value))
            .collect();
        let proposal = if finite.is_empty() {
            uniform_point(&mut rng, d, config.bounds)
        } else {
            let inputs: Vec<Vec<R>> = finite.iter().map(|(t, _)| (*t).clone()).collect();
            let targets: Vec<R> = finite.iter().map(|(_, v)| *v).collect();
            let hp = GpHyperParams {
                lengthscale,
                ..GpHyperParams::default()
            };
            let gp = gp_fit(inputs, &targets, hp)?;
            let candidate = maximize_acquisition(&gp, config, d, &mut rng)?;
            let too_close = trace.iter().any(|e| {
                squared_distance(&e.theta, &candidate) < R::cast(1e-18)
            });
            if too_close {
                uniform_point(&mut rng, d, config.bounds)
            } else {
                candidate
            }
        };
        evaluate(proposal, &mut trace);
    }

    let (best_idx, best_value) = trace
        .iter()
        .enumerate()
        .fold((0usize, R::infinity()), |(bi, bv), (i, e)| {
            if e.value < bv {
                (i, e.value)
            } else {
                (bi, bv)
            }
        });
    Ok(BoResult {
        best_theta: ParamVector::new(trace[best_idx].theta.clone()),
        best_value,
        trace,
    })
}

fn median_pairwise_distance<R: Real>(
    trace: &[BoTraceEntry<R>],
    _d: usize,
    bounds: (R, R),
) -> R {
    let points: Vec<&Vec<R>> = trace.iter().map(|e| &e.theta).collect();
    let mut distances = Vec::new();
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            distances.push(squared_distance(points[i], points[j]).sqrt());
        }
    }
    if distances.is_empty() {
        return (bounds.1 - bounds.0) * R::cast(0.5);
    }
    distances.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let median = distances[distances.len() / 2];
    if median > R::zero() {
        median
    } else {
        (bounds.1 - bounds.0) * R::cast(0.5)
    }
}

/// Seeded multi-start acquisition maximization: 256 uniform candidates,
/// the best 16 refined by per-coordinate golden-section sweeps.
fn maximize_acquisition<R: Real>(
    gp: &GpModel<R>,
    config: &BoConfig<R>,
    d: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<R>> {
    const CANDIDATES: usize = 256;
    const REFINED: usize = 16;
    const SWEEPS: usize = 2;

    let mut scored: Vec<(R, Vec<R>)> = (0..CANDIDATES)
        .map(|_| {
            let theta = uniform_point(rng, d, config.bounds);
            ucb_acquisition(gp, &theta, config.kappa).map(|a| (a, theta))
        })
        .collect::<Result<_>>()?;
    scored.sort_by(|(a, _), (b, _)| b.partial_cmp(a).expect("finite acquisition"));
    scored.truncate(REFINED);

    let mut best = scored[0].clone();
    for (_, start) in scored {
        let mut point = start;
        for _ in 0..SWEEPS {
            for coord in 0..d {
                refine_coordinate(gp, config, &mut point, coord)?;
            }
        }
        let score = ucb_acquisition(gp, &point, config.kappa)?;
        if score > best.0 {
            best = (score, point);
        }
    }
    Ok(best.1)
}

fn refine_coordinate<R: Real>(
    gp: &GpModel<R>,
    config: &BoConfig<R>,
    point: &mut Vec<R>,
    coord: usize,
) -> Result<()> {
    let ratio = R::cast(0.618_033_988_749_894_9);
    let (mut lo, mut hi) = config.bounds;
    let eval = |x: R, point: &mut Vec<R>| -> Result<R> {
        let saved = point[coord];
        point[coord] = x;
        let a = ucb_acquisition(gp, point, config.kappa);
        point[coord] = saved;
        a
    };
    let mut x1 = hi - (hi - lo) * ratio;
    let mut x2 = lo + (hi - lo) * ratio;
    let mut f1 = eval(x1, point)?;
    let mut f2 = eval(x2, point)?;
    for _ in 0..28 {
        if f1 > f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - (hi - lo) * ratio;
            f1 = eval(x1, point)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + (hi - lo) * ratio;
            f2 = eval(x2, point)?;
        }
    }
    let candidate = if f1 > f2 { x1 } else { x2 };
    let current = ucb_acquisition(gp, point, config.kappa)?;
    let best = if f1 > f2 { f1 } else { f2 };
    if best > current {
        point[coord] = candidate;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hp(lengthscale: f64) -> GpHyperParams<f64> {
        GpHyperParams {
            lengthscale,
            signal_variance: 1.0,
            jitter: 1e-8,
        }
    }

    #[test]
    fn single_sample_interpolates_its_target() {
        let gp = gp_fit(vec![vec![1.5]], &[42.0], hp(1.0)).unwrap();
        let (mean, std) = gp.predict(&[1.5]).unwrap();
        assert!((mean - 42.0).abs() < 1e-8);
        assert!(std.abs() < 1e-3);
    }

    #[test]
    fn posterior_variance_at_training_point_is_jitter_level() {
        let gp = gp_fit(
            vec![vec![0.0], vec![2.0], vec![4.5]],
            &[1.0, -0.5, 2.0],
            hp(1.0),
        )
        .unwrap();
        let (_, std) = gp.predict(&[2.0]).unwrap();
        // Standardized posterior variance at a sample is about the jitter.
        assert!(std < 1e-3, "std = {std}");
    }

    #[test]
    fn far_queries_revert_to_the_prior() {
        let targets = [3.0, 5.0, 4.0];
        let gp = gp_fit(
            vec![vec![0.0], vec![0.5], vec![1.0]],
            &targets,
            hp(0.3),
        )
        .unwrap();
        let (mean, std) = gp.predict(&[100.0]).unwrap();
        let target_mean = targets.iter().sum::<f64>() / 3.0;
        assert!((mean - target_mean).abs() < 1e-6);
        // De-standardized prior std is the target scale times σ_f = 1.
        let target_std =
            (targets.iter().map(|t| (t - target_mean).powi(2)).sum::<f64>() / 3.0).sqrt();
        assert!((std - target_std).abs() < 1e-6);
    }

    #[test]
    fn equidistant_queries_get_equal_predictions() {
        let gp = gp_fit(vec![vec![1.0, 1.0]], &[2.5], hp(0.8)).unwrap();
        let (m1, s1) = gp.predict(&[0.5, 1.0]).unwrap();
        let (m2, s2) = gp.predict(&[1.5, 1.0]).unwrap();
        assert!((m1 - m2).abs() < 1e-12);
        assert!((s1 - s2).abs() < 1e-12);
    }

    #[test]
    fn conflicting_duplicates_average_out() {
        let gp = gp_fit(
            vec![vec![1.0], vec![1.0]],
            &[0.0, 1.0],
            GpHyperParams {
                jitter: 1e-12,
                ..hp(1.0)
            },
        )
        .unwrap();
        assert!(gp.jitter_used() >= 1e-12);
        let (mean, _) = gp.predict(&[1.0]).unwrap();
        assert!((mean - 0.5).abs() < 0.1);
    }

    #[test]
    fn cholesky_rejects_indefinite_matrices() {
        // [[1, 2], [2, 1]] has a negative eigenvalue.
        assert!(cholesky(vec![1.0f64, 2.0, 2.0, 1.0], 2).is_none());
        let l = cholesky(vec![4.0f64, 2.0, 2.0, 5.0], 2).unwrap();
        assert!((l[0] - 2.0).abs() < 1e-15);
        assert!((l[2] - 1.0).abs() < 1e-15);
        assert!((l[3] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn ucb_reduces_to_mean_at_kappa_zero() {
        let gp = gp_fit(vec![vec![0.0], vec![1.0]], &[1.0, 3.0], hp(0.7)).unwrap();
        let theta = [0.4];
        let (mean, std) = gp.predict(&theta).unwrap();
        assert_eq!(ucb_acquisition(&gp, &theta, 0.0).unwrap(), mean);
        let ucb1 = ucb_acquisition(&gp, &theta, 1.0).unwrap();
        assert!((ucb1 - (mean + std)).abs() < 1e-14);
    }

    #[test]
    fn zero_iterations_returns_best_initial_point() {
        let config = BoConfig {
            n_init: 50,
            iterations: Some(0),
            seed: 11,
            ..BoConfig::default()
        };
        let result = bo_minimize(|t: &[f64]| (t[0] - 2.0).powi(2), 1, &config, &[]).unwrap();
        assert_eq!(result.trace.len(), 50);
        let manual_best = result
            .trace
            .iter()
            .map(|e| e.value)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(result.best_value, manual_best);
    }

    #[test]
    fn same_seed_gives_identical_traces() {
        let config = BoConfig {
            n_init: 12,
            iterations: Some(4),
            seed: 7,
            ..BoConfig::default()
        };
        let f = |t: &[f64]| (t[0] - 3.0).powi(2) + t[1].sin();
        let a = bo_minimize(f, 2, &config, &[]).unwrap();
        let b = bo_minimize(f, 2, &config, &[]).unwrap();
        assert_eq!(a.trace.len(), b.trace.len());
        for (x, y) in a.trace.iter().zip(&b.trace) {
            assert_eq!(x.theta, y.theta);
            assert_eq!(x.value.to_bits(), y.value.to_bits());
        }
    }

    #[test]
    fn proposals_stay_inside_bounds() {
        let config = BoConfig {
            n_init: 10,
            iterations: Some(8),
            bounds: (1.0, 2.0),
            seed: 3,
            ..BoConfig::default()
        };
        let result = bo_minimize(|t: &[f64]| t[0].cos(), 1, &config, &[]).unwrap();
        for entry in &result.trace {
            assert!(entry.theta[0] >= 1.0 && entry.theta[0] < 2.0 + 1e-12);
        }
    }

    #[test]
    fn non_finite_objective_values_become_infinite() {
        let config = BoConfig {
            n_init: 5,
            iterations: Some(2),
            seed: 1,
            ..BoConfig::default()
        };
        let result = bo_minimize(
            |t: &[f64]| {
                if t[0] < 3.0 {
                    f64::NAN
                } else {
                    (t[0] - 4.0).powi(2)
                }
            },
            1,
            &config,
            &[],
        )
        .unwrap();
        for entry in &result.trace {
            assert!(entry.value.is_finite() || entry.value == f64::INFINITY);
        }
        assert!(result.best_value.is_finite());
    }

    #[test]
    fn warm_start_is_evaluated_first() {
        let config = BoConfig {
            n_init: 4,
            iterations: Some(0),
            seed: 19,
            ..BoConfig::default()
        };
        let result =
            bo_minimize(|t: &[f64]| (t[0] - 2.0).powi(2), 1, &config, &[vec![2.0]]).unwrap();
        assert_eq!(result.trace[0].theta, vec![2.0]);
        assert_eq!(result.best_value, 0.0);
    }
}
