//! Data-adapted quantum kernels for support vector machines.
//!
//! This crate builds kernel functions for binary classification by
//! simulating small parametrized quantum circuits exactly, scoring the
//! resulting SVM models with the Bayesian information criterion, and
//! growing circuits layer by layer with a beam search whose gate
//! parameters are tuned by Gaussian-process optimization.
//!
//! The pipeline, bottom to top:
//!
//! * [`qstate`] - dense statevector simulation and the phase-encoding
//!   feature map;
//! * [`circuit`] - integer matrix descriptors of gate sequences, layer
//!   enumeration, and circuit application;
//! * [`kernelmat`] - Gram and cross-kernel assembly from squared state
//!   overlaps;
//! * [`svm`] - a sequential-minimal-optimization dual solver over a
//!   precomputed kernel;
//! * [`calibration`] - sigmoid probability calibration, validation
//!   log-likelihood, and the information criterion that ranks circuits;
//! * [`metrics`] - confusion-matrix accuracy measures;
//! * [`bayesopt`] - Gaussian-process surrogate optimization of gate
//!   parameters;
//! * [`search`] - the compositional growth loop;
//! * [`data`] / [`classical`] / [`cli`] - datasets, classical-kernel
//!   baselines, and the experiment commands behind the `qkernel` binary.
//!
//! The numerical core is generic over the scalar type (`f32` or `f64`)
//! through the [`scalar::Real`] trait; the `*64` aliases below fix the
//! double-precision instantiation the CLI uses.

// Guards written as !(x > 0) are deliberate: they reject NaN along with
// the out-of-range values, which x <= 0 would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bayesopt;
pub mod calibration;
pub mod circuit;
pub mod classical;
pub mod cli;
pub mod data;
pub mod error;
pub mod kernelmat;
pub mod metrics;
pub mod qstate;
pub mod scalar;
pub mod search;
pub mod svm;
pub(crate) mod util;

pub use error::{Error, Result};
pub use scalar::Real;

/// Double-precision complex amplitude.
pub type Complex64 = num_complex::Complex<f64>;
/// Double-precision statevector.
pub type StateVector64 = qstate::StateVector<f64>;
/// Double-precision feature vector.
pub type FeatureVector64 = qstate::FeatureVector<f64>;
/// Double-precision circuit parameters.
pub type ParamVector64 = circuit::ParamVector<f64>;
/// Double-precision kernel matrix.
pub type KernelMatrix64 = kernelmat::KernelMatrix<f64>;
/// Double-precision SVM model.
pub type SvmModel64 = svm::SvmModel<f64>;
/// Double-precision calibrated model.
pub type CalibratedModel64 = calibration::CalibratedModel<f64>;
/// Double-precision Gaussian-process surrogate.
pub type GpModel64 = bayesopt::GpModel<f64>;
/// Double-precision dataset.
pub type Dataset64 = data::Dataset<f64>;
/// Double-precision search configuration.
pub type SearchConfig64 = search::SearchConfig<f64>;
