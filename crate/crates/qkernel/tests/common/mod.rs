//! Independent oracles shared by the integration and acceptance suites.
//!
//! Everything here recomputes results through a different route than the
//! library: dense matrices instead of index sweeps, exhaustive active-set
//! enumeration instead of coordinate ascent, Gauss-Jordan solves instead
//! of Cholesky factors.

#![allow(dead_code)]

use num_complex::Complex;
use qkernel::circuit::{CircuitDescriptor, GateCode};
use qkernel::kernelmat::KernelMatrix;

pub type C64 = Complex<f64>;

fn czero() -> C64 {
    Complex::new(0.0, 0.0)
}

fn cone() -> C64 {
    Complex::new(1.0, 0.0)
}

/// Dense n-qubit matrix of a single-qubit gate on `qubit`.
pub fn embed_single(gate: [[C64; 2]; 2], qubit: usize, n: usize) -> Vec<C64> {
    let dim = 1usize << n;
    let mask = 1usize << qubit;
    let mut u = vec![czero(); dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            if (i & !mask) == (j & !mask) {
                let bi = usize::from(i & mask != 0);
                let bj = usize::from(j & mask != 0);
                u[i * dim + j] = gate[bi][bj];
            }
        }
    }
    u
}

/// Dense n-qubit matrix of CNOT(target, control).
pub fn embed_cnot(target: usize, control: usize, n: usize) -> Vec<C64> {
    let dim = 1usize << n;
    let mut u = vec![czero(); dim * dim];
    for j in 0..dim {
        let i = if j & (1 << control) != 0 {
            j ^ (1 << target)
        } else {
            j
        };
        u[i * dim + j] = cone();
    }
    u
}

pub fn hadamard_gate() -> [[C64; 2]; 2] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    [
        [Complex::new(h, 0.0), Complex::new(h, 0.0)],
        [Complex::new(h, 0.0), Complex::new(-h, 0.0)],
    ]
}

pub fn rz_gate(angle: f64) -> [[C64; 2]; 2] {
    [
        [Complex::from_polar(1.0, -angle), czero()],
        [czero(), Complex::from_polar(1.0, angle)],
    ]
}

pub fn matmul(a: &[C64], b: &[C64], dim: usize) -> Vec<C64> {
    let mut out = vec![czero(); dim * dim];
    for i in 0..dim {
        for k in 0..dim {
            let aik = a[i * dim + k];
            if aik == czero() {
                continue;
            }
            for j in 0..dim {
                out[i * dim + j] += aik * b[k * dim + j];
            }
        }
    }
    out
}

pub fn matvec(a: &[C64], v: &[C64]) -> Vec<C64> {
    let dim = v.len();
    (0..dim)
        .map(|i| (0..dim).map(|j| a[i * dim + j] * v[j]).sum())
        .collect()
}

pub fn identity_matrix(dim: usize) -> Vec<C64> {
    let mut u = vec![czero(); dim * dim];
    for i in 0..dim {
        u[i * dim + i] = cone();
    }
    u
}

/// Dense matrix of one descriptor layer. Gates multiply in ascending
/// qubit order; `thetas` are the rotation multipliers of this layer.
pub fn dense_layer_matrix(
    layer: &qkernel::circuit::LayerSpec,
    thetas: &[f64],
    x: &[f64],
    n: usize,
) -> Vec<C64> {
    let dim = 1usize << n;
    let mut u = identity_matrix(dim);
    let mut used = 0;
    for (q, gate) in layer.gates().iter().enumerate() {
        let g = match gate {
            GateCode::None => continue,
            GateCode::Hadamard => embed_single(hadamard_gate(), q, n),
            GateCode::RotZ => {
                let angle = thetas[used] * x[q];
                used += 1;
                embed_single(rz_gate(angle), q, n)
            }
            cnot => {
                let offset = cnot.control_offset().unwrap();
                embed_cnot(q, q - offset, n)
            }
        };
        u = matmul(&g, &u, dim);
    }
    u
}

/// Dense matrix of a whole descriptor (excluding the encoding).
pub fn dense_circuit_matrix(descriptor: &CircuitDescriptor, theta: &[f64], x: &[f64]) -> Vec<C64> {
    let n = descriptor.n_qubits();
    let dim = 1usize << n;
    let mut u = identity_matrix(dim);
    let mut next = 0;
    for layer in descriptor.layers() {
        let d = layer.rz_count();
        let l = dense_layer_matrix(layer, &theta[next..next + d], x, n);
        next += d;
        u = matmul(&l, &u, dim);
    }
    u
}

/// The encoded state by the per-qubit closed form: qubit k contributes
/// (e^{i x_k}, e^{-i x_k})/√2, assembled by explicit tensor product.
pub fn dense_encoded_state(x: &[f64]) -> Vec<C64> {
    let n = x.len();
    let dim = 1usize << n;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    (0..dim)
        .map(|b| {
            let mut amp = cone();
            for (k, xk) in x.iter().enumerate() {
                let sign = if b & (1 << k) == 0 { 1.0 } else { -1.0 };
                amp *= Complex::from_polar(h, sign * xk);
            }
            amp
        })
        .collect()
}

/// The full pipeline through dense matrices: encode by the closed form,
/// then multiply the circuit matrix.
pub fn dense_pipeline_state(descriptor: &CircuitDescriptor, theta: &[f64], x: &[f64]) -> Vec<C64> {
    let u = dense_circuit_matrix(descriptor, theta, x);
    matvec(&u, &dense_encoded_state(x))
}

// ---------------------------------------------------------------------------
// Exhaustive QP oracle for the SVM dual

#[derive(Clone, Copy, PartialEq)]
enum Slot {
    Lower,
    Upper,
    Free,
}

/// Global maximum of the SVM dual by enumerating every active set and
/// solving the stationarity system of the free block. Exact for a PSD
/// kernel; feasible only for small problems (3^n assignments).
pub fn qp_dual_oracle(kernel: &KernelMatrix<f64>, y_pm: &[f64], c: f64) -> (f64, Vec<f64>) {
    let n = y_pm.len();
    assert!(n <= 10, "oracle is exponential in n");
    let q = |i: usize, j: usize| y_pm[i] * y_pm[j] * kernel.get(i, j);
    let objective = |alpha: &[f64]| {
        let mut linear = 0.0;
        let mut quad = 0.0;
        for i in 0..n {
            linear += alpha[i];
            for j in 0..n {
                quad += alpha[i] * alpha[j] * q(i, j);
            }
        }
        linear - 0.5 * quad
    };

    let mut best = (f64::NEG_INFINITY, vec![0.0; n]);
    let mut slots = vec![Slot::Lower; n];
    enumerate_slots(&mut slots, 0, &mut |assignment| {
        let mut alpha = vec![0.0; n];
        let mut free = Vec::new();
        for i in 0..n {
            match assignment[i] {
                Slot::Lower => alpha[i] = 0.0,
                Slot::Upper => alpha[i] = c,
                Slot::Free => free.push(i),
            }
        }
        if free.is_empty() {
            let residual: f64 = (0..n).map(|i| y_pm[i] * alpha[i]).sum();
            if residual.abs() > 1e-12 {
                return;
            }
        } else {
            // Stationarity of the free block with the equality multiplier:
            // [Q_FF y_F; y_F' 0] [alpha_F; nu] = [1 - Q_FB alpha_B; -y_B' alpha_B]
            let m = free.len();
            let mut a = vec![0.0; (m + 1) * (m + 1)];
            let mut rhs = vec![0.0; m + 1];
            for (r, i) in free.iter().enumerate() {
                for (s, j) in free.iter().enumerate() {
                    a[r * (m + 1) + s] = q(*i, *j);
                }
                a[r * (m + 1) + m] = y_pm[*i];
                a[m * (m + 1) + r] = y_pm[*i];
                let mut bound_term = 0.0;
                for j in 0..n {
                    if assignment[j] == Slot::Upper {
                        bound_term += q(*i, j) * c;
                    }
                }
                rhs[r] = 1.0 - bound_term;
            }
            let mut bound_eq = 0.0;
            for j in 0..n {
                if assignment[j] == Slot::Upper {
                    bound_eq += y_pm[j] * c;
                }
            }
            rhs[m] = -bound_eq;
            let Some(solution) = gauss_solve(a, rhs, m + 1) else {
                return;
            };
            for (r, i) in free.iter().enumerate() {
                alpha[*i] = solution[r];
            }
            if free
                .iter()
                .any(|i| alpha[*i] < -1e-9 || alpha[*i] > c + 1e-9)
            {
                return;
            }
        }
        let value = objective(&alpha);
        if value > best.0 {
            best = (value, alpha.to_vec());
        }
    });
    best
}

fn enumerate_slots(slots: &mut Vec<Slot>, at: usize, visit: &mut impl FnMut(&[Slot])) {
    if at == slots.len() {
        visit(slots);
        return;
    }
    for slot in [Slot::Lower, Slot::Upper, Slot::Free] {
        slots[at] = slot;
        enumerate_slots(slots, at + 1, visit);
    }
}

/// Gaussian elimination with partial pivoting; None on a singular system.
pub fn gauss_solve(mut a: Vec<f64>, mut b: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|r, s| {
                a[r * n + col]
                    .abs()
                    .partial_cmp(&a[s * n + col].abs())
                    .unwrap()
            })
            .unwrap();
        if a[pivot_row * n + col].abs() < 1e-12 {
            return None;
        }
        if pivot_row != col {
            for k in 0..n {
                a.swap(col * n + k, pivot_row * n + k);
            }
            b.swap(col, pivot_row);
        }
        let pivot = a[col * n + col];
        for row in (col + 1)..n {
            let factor = a[row * n + col] / pivot;
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row * n + k] -= factor * a[col * n + k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut sum = b[row];
        for k in (row + 1)..n {
            sum -= a[row * n + k] * x[k];
        }
        x[row] = sum / a[row * n + row];
    }
    Some(x)
}

// ---------------------------------------------------------------------------
// Dense GP oracle

/// Posterior mean and standard deviation by explicit inversion, with the
/// same target standardization the library documents.
pub fn gp_dense_oracle(
    inputs: &[Vec<f64>],
    targets: &[f64],
    lengthscale: f64,
    signal_variance: f64,
    jitter: f64,
    query: &[f64],
) -> (f64, f64) {
    let n = inputs.len();
    let y_mean = targets.iter().sum::<f64>() / n as f64;
    let variance = targets.iter().map(|t| (t - y_mean).powi(2)).sum::<f64>() / n as f64;
    let y_scale = if variance > 1e-24 { variance.sqrt() } else { 1.0 };
    let standardized: Vec<f64> = targets.iter().map(|t| (t - y_mean) / y_scale).collect();
    let rbf = |a: &[f64], b: &[f64]| {
        let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
        signal_variance * (-d2 / (2.0 * lengthscale * lengthscale)).exp()
    };
    let mut cov = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            cov[i * n + j] = rbf(&inputs[i], &inputs[j]) + if i == j { jitter } else { 0.0 };
        }
    }
    let inv = gauss_jordan_inverse(cov, n).expect("covariance invertible");
    let k_star: Vec<f64> = inputs.iter().map(|p| rbf(p, query)).collect();
    let weights: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| inv[i * n + j] * standardized[j]).sum())
        .collect();
    let mean_std: f64 = k_star.iter().zip(&weights).map(|(k, w)| k * w).sum();
    let mut reduction = 0.0;
    for i in 0..n {
        for j in 0..n {
            reduction += k_star[i] * inv[i * n + j] * k_star[j];
        }
    }
    let var = (signal_variance - reduction).max(0.0);
    (y_mean + y_scale * mean_std, y_scale * var.sqrt())
}

pub fn gauss_jordan_inverse(mut a: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|r, s| {
                a[r * n + col]
                    .abs()
                    .partial_cmp(&a[s * n + col].abs())
                    .unwrap()
            })
            .unwrap();
        if a[pivot_row * n + col].abs() < 1e-14 {
            return None;
        }
        if pivot_row != col {
            for k in 0..n {
                a.swap(col * n + k, pivot_row * n + k);
                inv.swap(col * n + k, pivot_row * n + k);
            }
        }
        let pivot = a[col * n + col];
        for k in 0..n {
            a[col * n + k] /= pivot;
            inv[col * n + k] /= pivot;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = a[row * n + col];
            if factor == 0.0 {
                continue;
            }
            for k in 0..n {
                a[row * n + k] -= factor * a[col * n + k];
                inv[row * n + k] -= factor * inv[col * n + k];
            }
        }
    }
    Some(inv)
}

// ---------------------------------------------------------------------------
// Deterministic pseudo-random helpers for test data

/// xorshift-based deterministic f64 stream in [0, 1); independent of the
/// library's generators.
pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        Self(seed.max(1))
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.0 = x;
        x
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }
}
