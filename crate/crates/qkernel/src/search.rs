//! Compositional circuit growth.
//!
//! Starting from the bare encoding circuit, each round appends every valid
//! layer to every beam member, scores the children end to end (kernel,
//! SVM, calibration, BIC on the validation set), keeps the best K, and
//! optionally tunes the parameters of the M lowest-BIC survivors with
//! Gaussian-process optimization before the next round.
//!
//! The identity layer is always among the appended candidates, so every
//! parent survives into the next pool unchanged and the best score can
//! never get worse as depth grows.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::bayesopt::{bo_minimize, BoConfig, BoTraceEntry};
use crate::calibration::{evaluate_candidate, CandidateEvaluation, EvalSettings};
use crate::circuit::{
    apply_layer_in_place, enumerate_layers, CircuitDescriptor, LayerSpec, ParamVector,
};
use crate::data::{TestData, TrainValData};
use crate::error::{Error, Result};
use crate::kernelmat::circuit_states;
use crate::metrics::{ConfusionCounts, MetricsReport};
use crate::qstate::{feature_map_encode, StateVector, MAX_QUBITS};
use crate::scalar::Real;
use crate::svm::predict;
use crate::util::mix_seed;

/// How the growth loop treats parameter optimization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchVariant {
    /// Refine the M lowest-BIC beam members every layer; refined
    /// parameters re-enter the beam.
    Full,
    /// Pure compositional growth, no parameter optimization.
    MZero,
    /// Growth with fixed parameters, plus a reporting-only refinement of
    /// the single best circuit at every depth.
    MZeroOne,
}

/// The score that ranks the beam.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMetric {
    /// Lower is better.
    Bic,
    /// Balanced validation accuracy, higher is better; ties fall back to
    /// lower BIC.
    ValidationAccuracy,
    /// Validation F1, higher is better; ties fall back to lower BIC.
    F1,
}

#[derive(Debug, Clone)]
pub struct SearchConfig<R> {
    /// Beam width.
    pub k: usize,
    /// Beam members whose parameters are tuned each layer (Full variant).
    pub m: usize,
    /// Number of layers to grow.
    pub l_max: usize,
    pub variant: SearchVariant,
    pub bo: BoConfig<R>,
    pub eval: EvalSettings<R>,
    /// Master seed; per-layer optimization seeds derive from it.
    pub seed: u64,
}

impl<R: Real> Default for SearchConfig<R> {
    fn default() -> Self {
        Self {
            k: 5,
            m: 2,
            l_max: 4,
            variant: SearchVariant::Full,
            bo: BoConfig::default(),
            eval: EvalSettings::default(),
            seed: 0,
        }
    }
}

impl<R: Real> SearchConfig<R> {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("beam width K must be at least 1".into()));
        }
        if self.l_max == 0 {
            return Err(Error::Config("L_max must be at least 1".into()));
        }
        if self.m > self.k {
            return Err(Error::Config(format!(
                "M = {} exceeds beam width K = {}",
                self.m, self.k
            )));
        }
        Ok(())
    }

    /// M as the growth loop sees it: the reduced variants force 0.
    pub fn effective_m(&self) -> usize {
        match self.variant {
            SearchVariant::Full => self.m,
            SearchVariant::MZero | SearchVariant::MZeroOne => 0,
        }
    }
}

/// One ranked circuit of a layer's beam.
#[derive(Debug, Clone)]
pub struct BeamEntry<R> {
    pub descriptor: CircuitDescriptor,
    pub theta: ParamVector<R>,
    pub evaluation: CandidateEvaluation<R>,
}

impl<R: Real> BeamEntry<R> {
    pub fn bic(&self) -> R {
        self.evaluation.model.bic
    }
}

/// A refined beam entry together with its optimization trace.
pub type Refined<R> = (BeamEntry<R>, Vec<BoTraceEntry<R>>);

/// The optimization trace of one refined beam member.
#[derive(Debug, Clone)]
pub struct LayerBoTrace<R> {
    /// Index into the beam at the time the refinement ran.
    pub rank: usize,
    pub trace: Vec<BoTraceEntry<R>>,
}

/// Reporting-only refinement of the best circuit (MZeroOne variant).
#[derive(Debug, Clone)]
pub struct RefinedBest<R> {
    pub entry: BeamEntry<R>,
    pub trace: Vec<BoTraceEntry<R>>,
}

/// Everything recorded about one layer of growth.
#[derive(Debug, Clone)]
pub struct SearchRecord<R> {
    pub layer: usize,
    /// Sorted by the active metric, best first, at most K entries.
    pub beam: Vec<BeamEntry<R>>,
    /// Children evaluated this layer (parents × layers minus duplicates).
    pub evaluations: usize,
    pub dedup_dropped: usize,
    /// Evaluations that errored; they are logged and never enter the beam.
    pub failed: usize,
    /// Objective evaluations spent in parameter optimization this layer.
    pub bo_evaluations: usize,
    pub bo_traces: Vec<LayerBoTrace<R>>,
    pub refined_best: Option<RefinedBest<R>>,
}

struct Parent<R> {
    descriptor: CircuitDescriptor,
    theta: Vec<R>,
    train_states: Vec<StateVector<R>>,
    valid_states: Vec<StateVector<R>>,
}

struct Candidate<R> {
    parent: usize,
    layer: LayerSpec,
    descriptor: CircuitDescriptor,
    theta: Vec<R>,
}

fn theta_key<R: Real>(theta: &[R]) -> Vec<u64> {
    theta.iter().map(|t| t.as_f64().to_bits()).collect()
}

fn cmp_r<R: Real>(a: R, b: R) -> Ordering {
    a.partial_cmp(&b).unwrap_or(Ordering::Equal)
}

fn rank_cmp<R: Real>(metric: SelectionMetric, a: &BeamEntry<R>, b: &BeamEntry<R>) -> Ordering {
    let by_bic = |x: &BeamEntry<R>, y: &BeamEntry<R>| {
        cmp_r(x.bic(), y.bic())
            .then_with(|| x.descriptor.cmp(&y.descriptor))
            .then_with(|| theta_key(x.theta.values()).cmp(&theta_key(y.theta.values())))
    };
    let maximized = |va: Option<R>, vb: Option<R>| {
        let a_score = va.unwrap_or_else(R::neg_infinity);
        let b_score = vb.unwrap_or_else(R::neg_infinity);
        cmp_r(b_score, a_score)
    };
    match metric {
        SelectionMetric::Bic => by_bic(a, b),
        SelectionMetric::ValidationAccuracy => maximized(
            a.evaluation.val_balanced_accuracy,
            b.evaluation.val_balanced_accuracy,
        )
        .then_with(|| by_bic(a, b)),
        SelectionMetric::F1 => maximized(a.evaluation.val_f1, b.evaluation.val_f1)
            .then_with(|| by_bic(a, b)),
    }
}

fn check_data<R: Real>(data: &TrainValData<R>) -> Result<usize> {
    let n = data
        .train_x
        .first()
        .map(|x| x.dim())
        .ok_or_else(|| Error::Dataset("empty training set".into()))?;
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::QubitCount(n));
    }
    for x in data.train_x.iter().chain(&data.valid_x) {
        if x.dim() != n {
            return Err(Error::DimensionMismatch {
                what: "feature vector",
                expected: n,
                got: x.dim(),
            });
        }
    }
    if data.train_y.len() != data.train_x.len() || data.valid_y.len() != data.valid_x.len() {
        return Err(Error::Dataset("feature and label lengths differ".into()));
    }
    Ok(n)
}

/// Grow circuits ranked by BIC.
pub fn compositional_search<R: Real>(
    data: &TrainValData<R>,
    config: &SearchConfig<R>,
) -> Result<Vec<SearchRecord<R>>> {
    run_search(data, config, SelectionMetric::Bic)
}

/// Grow circuits ranked by an alternative metric, for selection-metric
/// comparisons. `SelectionMetric::Bic` reproduces
/// [`compositional_search`] exactly. Parameter refinement always minimizes
/// BIC regardless of the ranking metric.
pub fn metric_ablation_search<R: Real>(
    data: &TrainValData<R>,
    config: &SearchConfig<R>,
    metric: SelectionMetric,
) -> Result<Vec<SearchRecord<R>>> {
    run_search(data, config, metric)
}

fn run_search<R: Real>(
    data: &TrainValData<R>,
    config: &SearchConfig<R>,
    metric: SelectionMetric,
) -> Result<Vec<SearchRecord<R>>> {
    config.validate()?;
    let n = check_data(data)?;
    let layer_set = enumerate_layers(n)?;

    let encode_all = |xs: &[crate::qstate::FeatureVector<R>]| -> Result<Vec<StateVector<R>>> {
        xs.iter().map(feature_map_encode).collect()
    };
    let mut parents = vec![Parent {
        descriptor: CircuitDescriptor::empty(n)?,
        theta: Vec::new(),
        train_states: encode_all(&data.train_x)?,
        valid_states: encode_all(&data.valid_x)?,
    }];

    let mut records: Vec<SearchRecord<R>> = Vec::with_capacity(config.l_max);
    for layer_index in 1..=config.l_max {
        // Expand every parent by every layer, dropping exact duplicates of
        // (descriptor, theta); the earliest (best-ranked parent) copy wins.
        let mut seen: BTreeSet<(String, Vec<u64>)> = BTreeSet::new();
        let mut candidates: Vec<Candidate<R>> = Vec::new();
        let mut dedup_dropped = 0usize;
        for (parent_idx, parent) in parents.iter().enumerate() {
            for layer in &layer_set {
                let descriptor = parent.descriptor.with_layer(layer.clone())?;
                let mut theta = parent.theta.clone();
                theta.extend(std::iter::repeat_n(R::one(), layer.rz_count()));
                let key = (descriptor.to_text(), theta_key(&theta));
                if !seen.insert(key) {
                    dedup_dropped += 1;
                    continue;
                }
                candidates.push(Candidate {
                    parent: parent_idx,
                    layer: layer.clone(),
                    descriptor,
                    theta,
                });
            }
        }
        let evaluations = candidates.len();

        let results: Vec<Result<CandidateEvaluation<R>>> = candidates
            .par_iter()
            .map(|candidate| {
                let parent = &parents[candidate.parent];
                let new_theta = &candidate.theta[parent.theta.len()..];
                let extend = |states: &[StateVector<R>],
                              xs: &[crate::qstate::FeatureVector<R>]|
                 -> Result<Vec<StateVector<R>>> {
                    states
                        .iter()
                        .zip(xs)
                        .map(|(state, x)| {
                            let mut child = state.clone();
                            apply_layer_in_place(&mut child, &candidate.layer, new_theta, x)?;
                            Ok(child)
                        })
                        .collect()
                };
                let train_states = extend(&parent.train_states, &data.train_x)?;
                let valid_states = extend(&parent.valid_states, &data.valid_x)?;
                crate::calibration::evaluate_candidate_with_states(
                    candidate.descriptor.param_count(),
                    &train_states,
                    &data.train_y,
                    &valid_states,
                    &data.valid_y,
                    &config.eval,
                )
            })
            .collect();

        let mut failed = 0usize;
        let mut pool: Vec<BeamEntry<R>> = Vec::with_capacity(results.len());
        for (candidate, result) in candidates.into_iter().zip(results) {
            match result {
                Ok(evaluation) => pool.push(BeamEntry {
                    descriptor: candidate.descriptor,
                    theta: ParamVector::new(candidate.theta),
                    evaluation,
                }),
                Err(_) => failed += 1,
            }
        }
        if pool.is_empty() {
            return Err(Error::Training(format!(
                "every candidate at layer {layer_index} failed to evaluate"
            )));
        }
        pool.sort_by(|a, b| rank_cmp(metric, a, b));
        pool.truncate(config.k);

        // Parameter refinement of the lowest-BIC members.
        let mut bo_traces: Vec<LayerBoTrace<R>> = Vec::new();
        let mut bo_evaluations = 0usize;
        let m_eff = config.effective_m();
        if m_eff > 0 {
            let mut by_bic: Vec<usize> = (0..pool.len()).collect();
            by_bic.sort_by(|a, b| cmp_r(pool[*a].bic(), pool[*b].bic()));
            let chosen: Vec<usize> = by_bic
                .into_iter()
                .take(m_eff)
                .filter(|idx| !pool[*idx].theta.is_empty())
                .collect();
            let refined: Vec<(usize, Result<Refined<R>>)> = chosen
                .par_iter()
                .map(|idx| {
                    let seed = mix_seed(config.seed, (layer_index as u64) << 20 | *idx as u64);
                    let bo = BoConfig {
                        seed,
                        ..config.bo.clone()
                    };
                    (*idx, refine_entry(data, &pool[*idx], &bo, &config.eval))
                })
                .collect();
            for (idx, result) in refined {
                let (entry, trace) = result?;
                bo_evaluations += trace.len();
                bo_traces.push(LayerBoTrace { rank: idx, trace });
                pool[idx] = entry;
            }
            pool.sort_by(|a, b| rank_cmp(metric, a, b));
        }

        // Reporting-only refinement of the single lowest-BIC circuit.
        let refined_best = if config.variant == SearchVariant::MZeroOne {
            let best_idx = (0..pool.len())
                .min_by(|a, b| cmp_r(pool[*a].bic(), pool[*b].bic()))
                .expect("non-empty beam");
            let seed = mix_seed(config.seed, (layer_index as u64) << 20 | 0xFFFF);
            let bo = BoConfig {
                seed,
                ..config.bo.clone()
            };
            let (entry, trace) = refine_entry(data, &pool[best_idx], &bo, &config.eval)?;
            bo_evaluations += trace.len();
            Some(RefinedBest { entry, trace })
        } else {
            None
        };

        // Survivors carry their circuit states into the next round.
        parents = pool
            .iter()
            .map(|entry| {
                Ok(Parent {
                    descriptor: entry.descriptor.clone(),
                    theta: entry.theta.values().to_vec(),
                    train_states: circuit_states(&data.train_x, &entry.descriptor, &entry.theta)?,
                    valid_states: circuit_states(&data.valid_x, &entry.descriptor, &entry.theta)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        records.push(SearchRecord {
            layer: layer_index,
            beam: pool,
            evaluations,
            dedup_dropped,
            failed,
            bo_evaluations,
            bo_traces,
            refined_best,
        });
    }
    Ok(records)
}

/// Tune the parameters of a record's lowest-BIC circuit, warm-started at
/// the incumbent values; the returned score can only improve because the
/// incumbent is part of the optimizer's initial design.
pub fn refine_best<R: Real>(
    data: &TrainValData<R>,
    record: &SearchRecord<R>,
    bo: &BoConfig<R>,
    eval: &EvalSettings<R>,
) -> Result<Refined<R>> {
    let best = record
        .beam
        .iter()
        .min_by(|a, b| cmp_r(a.bic(), b.bic()))
        .ok_or_else(|| Error::Training("record has an empty beam".into()))?;
    refine_entry(data, best, bo, eval)
}

/// Tune one circuit's parameters against the BIC objective, warm-started
/// at its current values. A circuit without rotation gates is returned
/// unchanged with an empty trace.
pub fn refine_entry<R: Real>(
    data: &TrainValData<R>,
    entry: &BeamEntry<R>,
    bo: &BoConfig<R>,
    eval: &EvalSettings<R>,
) -> Result<Refined<R>> {
    let d = entry.theta.len();
    if d == 0 {
        return Ok((entry.clone(), Vec::new()));
    }
    let objective = |theta: &[R]| -> R {
        let theta = ParamVector::new(theta.to_vec());
        match evaluate_candidate(
            &entry.descriptor,
            &theta,
            &data.train_x,
            &data.train_y,
            &data.valid_x,
            &data.valid_y,
            eval,
        ) {
            Ok(evaluation) => evaluation.model.bic,
            Err(_) => R::infinity(),
        }
    };
    let result = bo_minimize(objective, d, bo, &[entry.theta.values().to_vec()])?;
    if result.best_value < entry.bic() {
        let theta = result.best_theta;
        let evaluation = evaluate_candidate(
            &entry.descriptor,
            &theta,
            &data.train_x,
            &data.train_y,
            &data.valid_x,
            &data.valid_y,
            eval,
        )?;
        Ok((
            BeamEntry {
                descriptor: entry.descriptor.clone(),
                theta,
                evaluation,
            },
            result.trace,
        ))
    } else {
        Ok((entry.clone(), result.trace))
    }
}

/// Test-set metrics of a beam entry's model; the holdout never feeds back
/// into the search.
pub fn evaluate_final<R: Real>(
    data: &TrainValData<R>,
    test: &TestData<R>,
    entry: &BeamEntry<R>,
) -> Result<MetricsReport<R>> {
    let k_test = crate::kernelmat::cross_kernel(
        &test.x,
        &data.train_x,
        &entry.descriptor,
        &entry.theta,
    )?;
    let predictions = predict(&entry.evaluation.model.svm, &k_test)?;
    ConfusionCounts::from_labels(&test.y, &predictions)?.report()
}

/// The entry a run reports as its final model: the refined best for the
/// MZeroOne variant, the beam head otherwise.
pub fn final_entry<R: Real>(
    records: &[SearchRecord<R>],
    variant: SearchVariant,
) -> Option<&BeamEntry<R>> {
    let last = records.last()?;
    match variant {
        SearchVariant::MZeroOne => last
            .refined_best
            .as_ref()
            .map(|r| &r.entry)
            .or_else(|| last.beam.first()),
        _ => last.beam.first(),
    }
}
