//! Run configuration and the command implementations behind the binary.
//!
//! Every command materializes its dataset and split from the seeds in
//! [`RunConfig`], so a config file plus a seed pins the whole experiment.
//! Reports embed the resolved config and the crate version; nothing in an
//! output file depends on wall-clock time, which keeps reruns
//! byte-identical.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bayesopt::{BoConfig, BoTraceEntry};
use crate::calibration::{BicN, EvalSettings};
use crate::circuit::{layer_space_size_formula, CircuitDescriptor, ParamVector};
use crate::classical::{classical_gram, tune_baseline, BaselineGrid, ClassicalKind};
use crate::data::{
    adhoc_generate, load_csv, scale_features, split, split_views, synthetic_4d_generate, DataSplit,
    Dataset, ScalingMode, TestData, TrainValData,
};
use crate::error::{Error, Result};
use crate::kernelmat::gram_matrix;
use crate::metrics::{ConfusionCounts, MetricsReport};
use crate::search::{
    compositional_search, evaluate_final, final_entry, metric_ablation_search, BeamEntry,
    SearchConfig, SearchRecord, SearchVariant, SelectionMetric,
};
use crate::svm::{predict, train_dual};
use crate::util::mix_seed;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

const SALT_DATA: u64 = 1;
const SALT_SPLIT: u64 = 2;
const SALT_FOLDS: u64 = 3;
const SALT_SEARCH: u64 = 4;

/// Where the features come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    /// Synthetic data labeled by a quantum observable; `n` is 2 or 3.
    Adhoc {
        n: usize,
        gap: f64,
        count: usize,
        #[serde(default)]
        scaling: Option<ScalingMode>,
    },
    /// Fixed 4-feature surrogate surface.
    Synthetic4d {
        count: usize,
        #[serde(default)]
        scaling: Option<ScalingMode>,
    },
    /// CSV file with named feature columns and a {0,1} label column.
    Csv {
        path: String,
        label_column: String,
        feature_columns: Vec<String>,
        #[serde(default)]
        scaling: Option<ScalingMode>,
    },
}

impl DatasetSpec {
    /// Generated features already live on [0, 2π); external CSV data is
    /// rescaled there unless the config says otherwise.
    fn resolved_scaling(&self) -> ScalingMode {
        match self {
            DatasetSpec::Adhoc { scaling, .. } | DatasetSpec::Synthetic4d { scaling, .. } => {
                scaling.unwrap_or(ScalingMode::None)
            }
            DatasetSpec::Csv { scaling, .. } => scaling.unwrap_or(ScalingMode::To0TwoPi),
        }
    }
}

fn default_n_train() -> usize {
    100
}

fn default_n_valid() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    #[serde(default = "default_n_train")]
    pub n_train: usize,
    #[serde(default = "default_n_valid")]
    pub n_valid: usize,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            n_train: default_n_train(),
            n_valid: default_n_valid(),
        }
    }
}

fn default_n_init() -> usize {
    50
}

fn default_kappa() -> f64 {
    1.0
}

fn default_theta_max() -> f64 {
    std::f64::consts::TAU
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoSpec {
    #[serde(default = "default_n_init")]
    pub n_init: usize,
    /// Defaults to 10·d when unset.
    #[serde(default)]
    pub iterations: Option<usize>,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default)]
    pub theta_min: f64,
    #[serde(default = "default_theta_max")]
    pub theta_max: f64,
}

impl Default for BoSpec {
    fn default() -> Self {
        Self {
            n_init: default_n_init(),
            iterations: None,
            kappa: default_kappa(),
            theta_min: 0.0,
            theta_max: default_theta_max(),
        }
    }
}

fn default_k() -> usize {
    5
}

fn default_m() -> usize {
    2
}

fn default_l_max() -> usize {
    4
}

fn default_svm_c() -> f64 {
    1.0
}

fn default_svm_tol() -> f64 {
    1e-3
}

fn default_platt_folds() -> usize {
    4
}

fn default_variant() -> SearchVariant {
    SearchVariant::Full
}

fn default_bic_n() -> BicN {
    BicN::Validation
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpec {
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_l_max")]
    pub l_max: usize,
    #[serde(default = "default_variant")]
    pub variant: SearchVariant,
    #[serde(default = "default_svm_c")]
    pub svm_c: f64,
    #[serde(default = "default_svm_tol")]
    pub svm_tol: f64,
    #[serde(default = "default_platt_folds")]
    pub platt_folds: usize,
    #[serde(default)]
    pub platt_smoothing: bool,
    #[serde(default = "default_bic_n")]
    pub bic_n: BicN,
    #[serde(default)]
    pub validate_grams: bool,
    #[serde(default)]
    pub bo: BoSpec,
}

impl Default for SearchSpec {
    fn default() -> Self {
        Self {
            k: default_k(),
            m: default_m(),
            l_max: default_l_max(),
            variant: default_variant(),
            svm_c: default_svm_c(),
            svm_tol: default_svm_tol(),
            platt_folds: default_platt_folds(),
            platt_smoothing: false,
            bic_n: default_bic_n(),
            validate_grams: false,
            bo: BoSpec::default(),
        }
    }
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

/// The whole experiment, serializable and echoed into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub dump_gram: bool,
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default)]
    pub search: SearchSpec,
    #[serde(default)]
    pub baselines: BaselineGrid,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            threads: None,
            out_dir: default_out_dir(),
            dump_gram: false,
            dataset: DatasetSpec::Adhoc {
                n: 3,
                gap: 0.3,
                count: 1300,
                scaling: None,
            },
            split: SplitSpec::default(),
            search: SearchSpec::default(),
            baselines: BaselineGrid::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path.as_ref()).map_err(|e| {
            Error::Config(format!(
                "cannot read config {}: {e}",
                path.as_ref().display()
            ))
        })?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.as_ref().display())))
    }
}

/// Dataset, split, and views, all derived from the config seeds.
pub struct PreparedData {
    pub dataset_name: String,
    pub feature_dim: usize,
    pub split: DataSplit,
    pub split_digest: String,
    pub data: TrainValData<f64>,
    pub test: TestData<f64>,
}

fn fnv1a(bytes: impl Iterator<Item = u8>) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

pub fn prepare_data(config: &RunConfig) -> Result<PreparedData> {
    let data_seed = mix_seed(config.seed, SALT_DATA);
    let dataset: Dataset<f64> = match &config.dataset {
        DatasetSpec::Adhoc { n, gap, count, .. } => adhoc_generate(*n, *gap, *count, data_seed)?,
        DatasetSpec::Synthetic4d { count, .. } => synthetic_4d_generate(*count, data_seed)?,
        DatasetSpec::Csv {
            path,
            label_column,
            feature_columns,
            ..
        } => load_csv(path, label_column, feature_columns)?,
    };
    let split = split(
        dataset.len(),
        config.split.n_train,
        config.split.n_valid,
        mix_seed(config.seed, SALT_SPLIT),
    )?;
    let scaled = scale_features(&dataset, config.dataset.resolved_scaling(), &split.train)?;
    let digest = fnv1a(
        split
            .train
            .iter()
            .chain(&split.validation)
            .chain(&split.test)
            .flat_map(|i| (*i as u64).to_le_bytes()),
    );
    let (data, test) = split_views(&scaled, &split);
    Ok(PreparedData {
        dataset_name: scaled.name().to_string(),
        feature_dim: scaled.feature_dim(),
        split_digest: format!("{digest:016x}"),
        split,
        data,
        test,
    })
}

/// Build the library-level search configuration with derived seeds.
pub fn search_config(config: &RunConfig, k: usize, m: usize) -> SearchConfig<f64> {
    SearchConfig {
        k,
        m,
        l_max: config.search.l_max,
        variant: config.search.variant,
        bo: BoConfig {
            n_init: config.search.bo.n_init,
            iterations: config.search.bo.iterations,
            kappa: config.search.bo.kappa,
            bounds: (config.search.bo.theta_min, config.search.bo.theta_max),
            seed: 0,
        },
        eval: EvalSettings {
            svm_c: config.search.svm_c,
            svm_tol: config.search.svm_tol,
            platt_folds: config.search.platt_folds,
            fold_seed: mix_seed(config.seed, SALT_FOLDS),
            bic_n: config.search.bic_n,
            platt_smoothing: config.search.platt_smoothing,
            validate_grams: config.search.validate_grams,
        },
        seed: mix_seed(config.seed, SALT_SEARCH),
    }
}

pub fn init_threads(config: &RunConfig) {
    if let Some(threads) = config.threads {
        // The global pool can only be installed once per process; later
        // calls keep the first configuration.
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .ok();
    }
}

// ---------------------------------------------------------------------------
// Report schema

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsJson {
    pub tpr: f64,
    pub tnr: f64,
    pub balanced_accuracy: f64,
    pub f1: f64,
    pub lowest_class_accuracy: f64,
}

impl From<MetricsReport<f64>> for MetricsJson {
    fn from(r: MetricsReport<f64>) -> Self {
        Self {
            tpr: r.tpr,
            tnr: r.tnr,
            balanced_accuracy: r.balanced_accuracy,
            f1: r.f1,
            lowest_class_accuracy: r.lowest_class_accuracy,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelJson {
    pub descriptor: String,
    pub theta: Vec<f64>,
    pub d: usize,
    pub a: f64,
    pub b: f64,
    pub log_likelihood: f64,
    pub bic: f64,
    pub n_eval: usize,
    pub val_balanced_accuracy: Option<f64>,
    pub val_f1: Option<f64>,
}

impl ModelJson {
    fn from_entry(entry: &BeamEntry<f64>) -> Self {
        Self {
            descriptor: entry.descriptor.to_text(),
            theta: entry.theta.values().to_vec(),
            d: entry.evaluation.model.d,
            a: entry.evaluation.model.platt.a,
            b: entry.evaluation.model.platt.b,
            log_likelihood: entry.evaluation.model.log_likelihood,
            bic: entry.evaluation.model.bic,
            n_eval: entry.evaluation.model.n_eval,
            val_balanced_accuracy: entry.evaluation.val_balanced_accuracy,
            val_f1: entry.evaluation.val_f1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoTraceJson {
    pub iteration: usize,
    pub theta: Vec<f64>,
    /// None when the objective evaluation failed.
    pub objective: Option<f64>,
}

fn trace_json(trace: &[BoTraceEntry<f64>]) -> Vec<BoTraceJson> {
    trace
        .iter()
        .enumerate()
        .map(|(iteration, e)| BoTraceJson {
            iteration,
            theta: e.theta.clone(),
            objective: e.value.is_finite().then_some(e.value),
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerBoTraceJson {
    pub rank: usize,
    pub trace: Vec<BoTraceJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RefinedBestJson {
    pub model: ModelJson,
    pub trace: Vec<BoTraceJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerJson {
    pub layer: usize,
    pub evaluations: usize,
    pub dedup_dropped: usize,
    pub failed: usize,
    pub bo_evaluations: usize,
    pub beam: Vec<ModelJson>,
    /// Softmax of -BIC/2 over the beam: each member's selection
    /// probability within this layer's survivors.
    pub selection_probabilities: Vec<f64>,
    pub bo_traces: Vec<LayerBoTraceJson>,
    pub refined_best: Option<RefinedBestJson>,
}

fn layer_json(record: &SearchRecord<f64>) -> LayerJson {
    let bics: Vec<f64> = record.beam.iter().map(|e| e.evaluation.model.bic).collect();
    LayerJson {
        layer: record.layer,
        evaluations: record.evaluations,
        dedup_dropped: record.dedup_dropped,
        failed: record.failed,
        bo_evaluations: record.bo_evaluations,
        beam: record.beam.iter().map(ModelJson::from_entry).collect(),
        selection_probabilities: crate::calibration::model_probabilities(&bics),
        bo_traces: record
            .bo_traces
            .iter()
            .map(|t| LayerBoTraceJson {
                rank: t.rank,
                trace: trace_json(&t.trace),
            })
            .collect(),
        refined_best: record.refined_best.as_ref().map(|r| RefinedBestJson {
            model: ModelJson::from_entry(&r.entry),
            trace: trace_json(&r.trace),
        }),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchOutput {
    pub version: String,
    pub config: RunConfig,
    pub dataset_name: String,
    pub feature_dim: usize,
    pub split_digest: String,
    pub sizes: (usize, usize, usize),
    pub layers: Vec<LayerJson>,
    /// Total candidate evaluations across all layers, excluding parameter
    /// optimization.
    pub explored_evaluations: usize,
    /// The closed-form circuit count for 5 gate types, K circuits, and
    /// L_max layers, for context on how little of the space was touched.
    pub candidate_space_formula: Option<String>,
    pub final_model: ModelJson,
    pub test_metrics: MetricsJson,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaselineJson {
    pub kind: String,
    pub gamma: f64,
    pub coef0: f64,
    pub c: f64,
    pub validation_balanced_accuracy: f64,
    pub test_metrics: MetricsJson,
    pub test_predictions: Vec<u8>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaselinesOutput {
    pub version: String,
    pub config: RunConfig,
    pub dataset_name: String,
    pub split_digest: String,
    pub entries: Vec<BaselineJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub k: usize,
    pub m: usize,
    pub test_metrics: MetricsJson,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceOutput {
    pub version: String,
    pub config: RunConfig,
    pub split_digest: String,
    pub rows: Vec<ConvergenceRow>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationSeries {
    pub metric: String,
    /// One entry per layer: the selected model and its holdout metrics.
    pub per_layer: Vec<(usize, ModelJson, MetricsJson)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationOutput {
    pub version: String,
    pub config: RunConfig,
    pub split_digest: String,
    pub series: Vec<AblationSeries>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixedKernelRow {
    pub train_size: usize,
    pub test_metrics: MetricsJson,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixedKernelOutput {
    pub version: String,
    pub config: RunConfig,
    pub split_digest: String,
    pub descriptor: String,
    pub theta: Vec<f64>,
    pub rows: Vec<FixedKernelRow>,
}

// ---------------------------------------------------------------------------
// File helpers

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn csv_writer(path: &Path, config: &RunConfig) -> Result<fs::File> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut file = fs::File::create(path)?;
    writeln!(file, "# version: {VERSION}")?;
    writeln!(file, "# config: {}", serde_json::to_string(config)?)?;
    Ok(file)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

// ---------------------------------------------------------------------------
// Commands

/// Run the compositional search and write `search.json` and `search.csv`.
pub fn cmd_search(config: &RunConfig) -> Result<SearchOutput> {
    init_threads(config);
    let prepared = prepare_data(config)?;
    let search_cfg = search_config(config, config.search.k, config.search.m);
    search_cfg.validate()?;
    let records = compositional_search(&prepared.data, &search_cfg)?;
    let entry = final_entry(&records, search_cfg.variant)
        .ok_or_else(|| Error::Training("search produced no model".into()))?;
    let test_metrics = evaluate_final(&prepared.data, &prepared.test, entry)?;

    let formula = layer_space_size_formula(
        5,
        prepared.feature_dim as u64,
        config.search.k as u64,
        config.search.l_max as u64,
    )
    .ok()
    .map(|v| v.to_string());
    let output = SearchOutput {
        version: VERSION.to_string(),
        config: config.clone(),
        dataset_name: prepared.dataset_name.clone(),
        feature_dim: prepared.feature_dim,
        split_digest: prepared.split_digest.clone(),
        sizes: (
            prepared.split.train.len(),
            prepared.split.validation.len(),
            prepared.split.test.len(),
        ),
        layers: records.iter().map(layer_json).collect(),
        explored_evaluations: records.iter().map(|r| r.evaluations).sum(),
        candidate_space_formula: formula,
        final_model: ModelJson::from_entry(entry),
        test_metrics: test_metrics.into(),
    };
    write_json(&config.out_dir.join("search.json"), &output)?;

    let mut csv = csv_writer(&config.out_dir.join("search.csv"), config)?;
    writeln!(csv, "layer,rank,descriptor_text,d,bic,val_balanced_acc,val_f1")?;
    {
        let mut writer = csv::Writer::from_writer(&mut csv);
        for record in &records {
            for (rank, entry) in record.beam.iter().enumerate() {
                writer.write_record([
                    record.layer.to_string(),
                    rank.to_string(),
                    entry.descriptor.to_text(),
                    entry.evaluation.model.d.to_string(),
                    entry.evaluation.model.bic.to_string(),
                    fmt_opt(entry.evaluation.val_balanced_accuracy),
                    fmt_opt(entry.evaluation.val_f1),
                ])?;
            }
        }
        writer.flush()?;
    }

    if config.dump_gram {
        let gram = gram_matrix(&prepared.data.train_x, &entry.descriptor, &entry.theta)?;
        let path = config.out_dir.join("gram_train.csv");
        let file = fs::File::create(&path)?;
        gram.write_csv(file)?;
    }

    println!("search on {} (seed {})", prepared.dataset_name, config.seed);
    println!("layer  best_bic      d  val_bal_acc");
    for record in &records {
        let best = &record.beam[0];
        println!(
            "{:>5}  {:>12.4}  {:>2}  {}",
            record.layer,
            best.evaluation.model.bic,
            best.evaluation.model.d,
            fmt_opt(best.evaluation.val_balanced_accuracy),
        );
    }
    println!(
        "final test: balanced_accuracy={:.4} lowest_class={:.4} f1={:.4}",
        output.test_metrics.balanced_accuracy,
        output.test_metrics.lowest_class_accuracy,
        output.test_metrics.f1
    );
    Ok(output)
}

/// Tune the four classical baselines on the same split and write
/// `baselines.json`.
pub fn cmd_baselines(config: &RunConfig) -> Result<BaselinesOutput> {
    init_threads(config);
    let prepared = prepare_data(config)?;
    let mut entries = Vec::new();
    for kind in ClassicalKind::ALL {
        let tuned = tune_baseline(
            &prepared.data,
            kind,
            &config.baselines,
            config.search.svm_tol,
        )?;
        let k_test = classical_gram(&prepared.test.x, &prepared.data.train_x, &tuned.spec)?;
        let predictions = predict(&tuned.model, &k_test)?;
        let report = ConfusionCounts::from_labels(&prepared.test.y, &predictions)?
            .report::<f64>()?;
        entries.push(BaselineJson {
            kind: kind.name().to_string(),
            gamma: tuned.spec.gamma,
            coef0: tuned.spec.coef0,
            c: tuned.c,
            validation_balanced_accuracy: tuned.validation_balanced_accuracy,
            test_metrics: report.into(),
            test_predictions: predictions,
        });
    }
    let output = BaselinesOutput {
        version: VERSION.to_string(),
        config: config.clone(),
        dataset_name: prepared.dataset_name.clone(),
        split_digest: prepared.split_digest.clone(),
        entries,
    };
    write_json(&config.out_dir.join("baselines.json"), &output)?;
    for entry in &output.entries {
        println!(
            "{:<8} gamma={:<10} coef0={:<4} C={:<8} val_bal={:.4} test_lowest={:.4}",
            entry.kind,
            entry.gamma,
            entry.coef0,
            entry.c,
            entry.validation_balanced_accuracy,
            entry.test_metrics.lowest_class_accuracy
        );
    }
    Ok(output)
}

/// Pair up the K and M sweeps: a single K fans out over every M, equal
/// lengths zip. Every pair must satisfy M <= K.
pub fn convergence_pairs(k_list: &[usize], m_list: &[usize]) -> Result<Vec<(usize, usize)>> {
    if k_list.is_empty() || m_list.is_empty() {
        return Err(Error::Config("k-list and m-list must be non-empty".into()));
    }
    let pairs: Vec<(usize, usize)> = if k_list.len() == 1 {
        m_list.iter().map(|m| (k_list[0], *m)).collect()
    } else if k_list.len() == m_list.len() {
        k_list.iter().copied().zip(m_list.iter().copied()).collect()
    } else {
        return Err(Error::Config(
            "k-list must have one entry or match m-list in length".into(),
        ));
    };
    for (k, m) in &pairs {
        if m > k {
            return Err(Error::Config(format!("pair (K={k}, M={m}) has M > K")));
        }
    }
    Ok(pairs)
}

/// Sweep (K, M) pairs and write `convergence.json` and `convergence.csv`
/// with the holdout accuracy per pair.
pub fn cmd_convergence(
    config: &RunConfig,
    k_list: &[usize],
    m_list: &[usize],
) -> Result<ConvergenceOutput> {
    init_threads(config);
    let pairs = convergence_pairs(k_list, m_list)?;
    let prepared = prepare_data(config)?;
    let mut rows = Vec::new();
    for (k, m) in pairs {
        let search_cfg = search_config(config, k, m);
        search_cfg.validate()?;
        let records = compositional_search(&prepared.data, &search_cfg)?;
        let entry = final_entry(&records, search_cfg.variant)
            .ok_or_else(|| Error::Training("search produced no model".into()))?;
        let metrics = evaluate_final(&prepared.data, &prepared.test, entry)?;
        println!(
            "K={k:<3} M={m:<3} lowest_class_test_accuracy={:.4}",
            metrics.lowest_class_accuracy
        );
        rows.push(ConvergenceRow {
            k,
            m,
            test_metrics: metrics.into(),
        });
    }
    let output = ConvergenceOutput {
        version: VERSION.to_string(),
        config: config.clone(),
        split_digest: prepared.split_digest.clone(),
        rows,
    };
    write_json(&config.out_dir.join("convergence.json"), &output)?;
    let mut csv = csv_writer(&config.out_dir.join("convergence.csv"), config)?;
    writeln!(csv, "k,m,lowest_class_test_accuracy,balanced_accuracy,tpr,tnr,f1")?;
    for row in &output.rows {
        writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            row.k,
            row.m,
            row.test_metrics.lowest_class_accuracy,
            row.test_metrics.balanced_accuracy,
            row.test_metrics.tpr,
            row.test_metrics.tnr,
            row.test_metrics.f1
        )?;
    }
    Ok(output)
}

/// Run the search under each selection metric and write
/// `metric_ablation.json` and `metric_ablation.csv`.
pub fn cmd_metric_ablation(config: &RunConfig) -> Result<AblationOutput> {
    init_threads(config);
    let prepared = prepare_data(config)?;
    let search_cfg = search_config(config, config.search.k, config.search.m);
    search_cfg.validate()?;
    let metrics = [
        (SelectionMetric::Bic, "bic"),
        (SelectionMetric::ValidationAccuracy, "validation_accuracy"),
        (SelectionMetric::F1, "f1"),
    ];
    let mut series = Vec::new();
    for (metric, name) in metrics {
        let records = metric_ablation_search(&prepared.data, &search_cfg, metric)?;
        let mut per_layer = Vec::new();
        for record in &records {
            let entry = &record.beam[0];
            let test = evaluate_final(&prepared.data, &prepared.test, entry)?;
            per_layer.push((record.layer, ModelJson::from_entry(entry), test.into()));
        }
        series.push(AblationSeries {
            metric: name.to_string(),
            per_layer,
        });
    }
    let output = AblationOutput {
        version: VERSION.to_string(),
        config: config.clone(),
        split_digest: prepared.split_digest.clone(),
        series,
    };
    write_json(&config.out_dir.join("metric_ablation.json"), &output)?;
    let mut csv = csv_writer(&config.out_dir.join("metric_ablation.csv"), config)?;
    writeln!(csv, "metric,layer,bic,test_balanced_accuracy,test_lowest_class")?;
    for s in &output.series {
        for (layer, model, test) in &s.per_layer {
            writeln!(
                csv,
                "{},{},{},{},{}",
                s.metric, layer, model.bic, test.balanced_accuracy, test.lowest_class_accuracy
            )?;
        }
    }
    for s in &output.series {
        let last = s.per_layer.last().expect("at least one layer");
        println!(
            "{:<20} final-layer test balanced accuracy {:.4}",
            s.metric, last.2.balanced_accuracy
        );
    }
    Ok(output)
}

/// Parse a circuit argument: a path to a descriptor file, or inline text
/// with `/` separating qubit rows.
pub fn read_circuit_arg(arg: &str) -> Result<CircuitDescriptor> {
    let path = Path::new(arg);
    let text = if path.exists() {
        fs::read_to_string(path)?
    } else {
        arg.replace('/', "\n")
    };
    CircuitDescriptor::from_text(&text)
}

/// Retrain the SVM for one fixed circuit at growing training sizes and
/// write `fixed_kernel.json` and `fixed_kernel.csv`. Sizes draw from the
/// train+validation pool in split order, so each size extends the last.
pub fn cmd_fixed_kernel(
    config: &RunConfig,
    descriptor: &CircuitDescriptor,
    train_sizes: &[usize],
) -> Result<FixedKernelOutput> {
    init_threads(config);
    if train_sizes.is_empty() {
        return Err(Error::Config("train-sizes must be non-empty".into()));
    }
    let prepared = prepare_data(config)?;
    if descriptor.n_qubits() != prepared.feature_dim {
        return Err(Error::Config(format!(
            "circuit has {} qubits but the dataset has {} features",
            descriptor.n_qubits(),
            prepared.feature_dim
        )));
    }
    let theta = ParamVector::ones(descriptor.param_count());
    let pool_x: Vec<_> = prepared
        .data
        .train_x
        .iter()
        .chain(&prepared.data.valid_x)
        .cloned()
        .collect();
    let pool_y: Vec<u8> = prepared
        .data
        .train_y
        .iter()
        .chain(&prepared.data.valid_y)
        .copied()
        .collect();
    let mut rows = Vec::new();
    for size in train_sizes {
        if *size > pool_x.len() {
            return Err(Error::Config(format!(
                "train size {size} exceeds the {} available non-test samples",
                pool_x.len()
            )));
        }
        if *size < 2 {
            return Err(Error::Config("train size must be at least 2".into()));
        }
        let x = &pool_x[..*size];
        let y = &pool_y[..*size];
        let gram = gram_matrix(x, descriptor, &theta)?;
        let model = train_dual(&gram, y, config.search.svm_c, config.search.svm_tol)?;
        let k_test = crate::kernelmat::cross_kernel(&prepared.test.x, x, descriptor, &theta)?;
        let predictions = predict(&model, &k_test)?;
        let report = ConfusionCounts::from_labels(&prepared.test.y, &predictions)?.report()?;
        println!(
            "train_size={size:<5} tpr={:.4} tnr={:.4}",
            report.tpr, report.tnr
        );
        rows.push(FixedKernelRow {
            train_size: *size,
            test_metrics: report.into(),
        });
    }
    let output = FixedKernelOutput {
        version: VERSION.to_string(),
        config: config.clone(),
        split_digest: prepared.split_digest.clone(),
        descriptor: descriptor.to_text(),
        theta: theta.values().to_vec(),
        rows,
    };
    write_json(&config.out_dir.join("fixed_kernel.json"), &output)?;
    let mut csv = csv_writer(&config.out_dir.join("fixed_kernel.csv"), config)?;
    writeln!(csv, "train_size,tpr,tnr,balanced_accuracy,f1,lowest_class_accuracy")?;
    for row in &output.rows {
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            row.train_size,
            row.test_metrics.tpr,
            row.test_metrics.tnr,
            row.test_metrics.balanced_accuracy,
            row.test_metrics.f1,
            row.test_metrics.lowest_class_accuracy
        )?;
    }
    Ok(output)
}
