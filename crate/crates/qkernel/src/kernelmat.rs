//! Gram and cross-kernel assembly from cached statevectors.
//!
//! Each dataset point is prepared once as a statevector; kernel entries are
//! squared overlaps of cached states. Gram matrices compute the upper
//! triangle and mirror it, so symmetry holds bit-for-bit.

use std::io::Write;

use rayon::prelude::*;

use crate::circuit::{apply_parametrized_circuit, CircuitDescriptor, ParamVector};
use crate::error::{Error, Result};
use crate::qstate::{feature_map_encode, fidelity, FeatureVector, StateVector};
use crate::scalar::Real;

/// Dense real matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix<R> {
    values: Vec<R>,
    rows: usize,
    cols: usize,
}

impl<R: Real> KernelMatrix<R> {
    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> R) -> Self {
        let mut values = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                values.push(f(i, j));
            }
        }
        Self { values, rows, cols }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> R {
        self.values[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[R] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    /// Submatrix with the given rows and columns, in the given order.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        Self::from_fn(rows.len(), cols.len(), |i, j| self.get(rows[i], cols[j]))
    }

    /// Smallest eigenvalue of a symmetric matrix, by cyclic Jacobi sweeps.
    pub fn min_symmetric_eigenvalue(&self) -> R {
        assert!(self.is_square(), "eigenvalues need a square matrix");
        let n = self.rows;
        if n == 0 {
            return R::zero();
        }
        let mut a = self.values.clone();
        let idx = |i: usize, j: usize| i * n + j;
        let tol = R::epsilon() * R::cast(16.0);
        for _sweep in 0..100 {
            let mut off = R::zero();
            for i in 0..n {
                for j in (i + 1)..n {
                    off += a[idx(i, j)] * a[idx(i, j)];
                }
            }
            let scale: R = (0..n).map(|i| a[idx(i, i)].abs()).sum::<R>() + R::one();
            if off.sqrt() < tol * scale {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[idx(p, q)];
                    if apq == R::zero() {
                        continue;
                    }
                    let app = a[idx(p, p)];
                    let aqq = a[idx(q, q)];
                    let theta = (aqq - app) / (R::cast(2.0) * apq);
                    let t = {
                        let sign = if theta >= R::zero() { R::one() } else { -R::one() };
                        sign / (theta.abs() + (theta * theta + R::one()).sqrt())
                    };
                    let c = R::one() / (t * t + R::one()).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[idx(k, p)];
                        let akq = a[idx(k, q)];
                        a[idx(k, p)] = c * akp - s * akq;
                        a[idx(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[idx(p, k)];
                        let aqk = a[idx(q, k)];
                        a[idx(p, k)] = c * apk - s * aqk;
                        a[idx(q, k)] = s * apk + c * aqk;
                    }
                }
            }
        }
        (0..n)
            .map(|i| a[idx(i, i)])
            .fold(R::infinity(), |m, v| if v < m { v } else { m })
    }

    /// Check the square Gram invariants: symmetry, unit diagonal, and a
    /// floor on the smallest eigenvalue.
    pub fn validate_gram(&self, sym_tol: R, diag_tol: R, eig_floor: R) -> Result<()> {
        if !self.is_square() {
            return Err(Error::GramDefect(format!(
                "matrix is {}x{}, not square",
                self.rows, self.cols
            )));
        }
        for i in 0..self.rows {
            let d = self.get(i, i);
            if (d - R::one()).abs() > diag_tol {
                return Err(Error::GramDefect(format!(
                    "diagonal entry ({i},{i}) = {d} differs from 1"
                )));
            }
            for j in (i + 1)..self.cols {
                let delta = (self.get(i, j) - self.get(j, i)).abs();
                if delta > sym_tol {
                    return Err(Error::GramDefect(format!(
                        "asymmetry {delta} at ({i},{j})"
                    )));
                }
            }
        }
        let min_eig = self.min_symmetric_eigenvalue();
        if min_eig < eig_floor {
            return Err(Error::GramDefect(format!(
                "smallest eigenvalue {min_eig} below floor {eig_floor}"
            )));
        }
        Ok(())
    }

    /// Write the matrix as bare CSV rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for i in 0..self.rows {
            let line = self
                .row(i)
                .iter()
                .map(|v| format!("{}", v.as_f64()))
                .collect::<Vec<_>>()
                .join(",");
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// Prepare the circuit state for every feature vector: encode, then run the
/// parametrized circuit.
pub fn circuit_states<R: Real>(
    xs: &[FeatureVector<R>],
    descriptor: &CircuitDescriptor,
    theta: &ParamVector<R>,
) -> Result<Vec<StateVector<R>>> {
    xs.par_iter()
        .map(|x| {
            let encoded = feature_map_encode(x)?;
            apply_parametrized_circuit(descriptor, theta, x, &encoded)
        })
        .collect()
}

/// Gram matrix of squared overlaps between cached states. Entry (i, j) for
/// j > i is computed once and mirrored; the diagonal is the self-overlap.
pub fn gram_from_states<R: Real>(states: &[StateVector<R>]) -> Result<KernelMatrix<R>> {
    let n = states.len();
    let rows: Vec<Vec<R>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i..n)
                .map(|j| fidelity(&states[i], &states[j]))
                .collect::<Result<Vec<R>>>()
        })
        .collect::<Result<_>>()?;
    let mut values = vec![R::zero(); n * n];
    for (i, row) in rows.iter().enumerate() {
        for (off, v) in row.iter().enumerate() {
            let j = i + off;
            values[i * n + j] = *v;
            values[j * n + i] = *v;
        }
    }
    Ok(KernelMatrix {
        values,
        rows: n,
        cols: n,
    })
}

/// Rectangular kernel between two cached state sets: entry (i, j) is the
/// squared overlap of eval state i with train state j.
pub fn cross_from_states<R: Real>(
    eval_states: &[StateVector<R>],
    train_states: &[StateVector<R>],
) -> Result<KernelMatrix<R>> {
    let rows: Vec<Vec<R>> = eval_states
        .par_iter()
        .map(|e| {
            train_states
                .iter()
                .map(|t| fidelity(e, t))
                .collect::<Result<Vec<R>>>()
        })
        .collect::<Result<_>>()?;
    let cols = train_states.len();
    let mut values = Vec::with_capacity(eval_states.len() * cols);
    for row in rows {
        values.extend(row);
    }
    Ok(KernelMatrix {
        values,
        rows: eval_states.len(),
        cols,
    })
}

/// Gram matrix of the quantum kernel over `xs`.
pub fn gram_matrix<R: Real>(
    xs: &[FeatureVector<R>],
    descriptor: &CircuitDescriptor,
    theta: &ParamVector<R>,
) -> Result<KernelMatrix<R>> {
    let states = circuit_states(xs, descriptor, theta)?;
    gram_from_states(&states)
}

/// Rectangular kernel k(x_eval_i, x_train_j) of the quantum kernel.
pub fn cross_kernel<R: Real>(
    x_eval: &[FeatureVector<R>],
    x_train: &[FeatureVector<R>],
    descriptor: &CircuitDescriptor,
    theta: &ParamVector<R>,
) -> Result<KernelMatrix<R>> {
    let eval_states = circuit_states(x_eval, descriptor, theta)?;
    let train_states = circuit_states(x_train, descriptor, theta)?;
    cross_from_states(&eval_states, &train_states)
}
