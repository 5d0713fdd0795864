//! Exact statevector simulation of small qubit registers.
//!
//! States are dense arrays of 2^n complex amplitudes. Qubit 0 is the least
//! significant bit of the basis-state index. Gates sweep index pairs in
//! place, so a single-qubit gate costs O(2^n) without building matrices.
//! The public gate operations are pure (state in, state out); callers that
//! need to chain many gates on one register go through
//! [`crate::circuit::apply_parametrized_circuit`], which reuses the in-place
//! kernels internally.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Largest register the dense representation supports (4096 amplitudes).
pub const MAX_QUBITS: usize = 12;

/// Input feature vector; components are phase angles in radians.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector<R>(Vec<R>);

impl<R: Real> FeatureVector<R> {
    pub fn new(components: Vec<R>) -> Self {
        Self(components)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn components(&self) -> &[R] {
        &self.0
    }
}

impl<R: Real> From<Vec<R>> for FeatureVector<R> {
    fn from(components: Vec<R>) -> Self {
        Self(components)
    }
}

impl<R: Real> std::ops::Index<usize> for FeatureVector<R> {
    type Output = R;

    fn index(&self, i: usize) -> &R {
        &self.0[i]
    }
}

/// Pure state of an n-qubit register: 2^n complex amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector<R> {
    n_qubits: usize,
    amps: Vec<Complex<R>>,
}

impl<R: Real> StateVector<R> {
    /// The all-zeros computational basis state |0...0⟩.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::QubitCount(n_qubits));
        }
        let mut amps = vec![Complex::new(R::zero(), R::zero()); 1 << n_qubits];
        amps[0] = Complex::new(R::one(), R::zero());
        Ok(Self { n_qubits, amps })
    }

    /// Build a state from raw amplitudes; the length must be a power of two
    /// matching a supported qubit count. Amplitudes are taken as-is.
    pub fn from_amplitudes(amps: Vec<Complex<R>>) -> Result<Self> {
        let len = amps.len();
        if !len.is_power_of_two() {
            return Err(Error::DimensionMismatch {
                what: "amplitude vector length must be a power of two",
                expected: len.next_power_of_two(),
                got: len,
            });
        }
        let n_qubits = len.trailing_zeros() as usize;
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::QubitCount(n_qubits));
        }
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex<R>] {
        &self.amps
    }

    /// Σ|a_i|², which is 1 for a normalized state.
    pub fn norm_sqr(&self) -> R {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn check_qubit(&self, qubit: usize) -> Result<()> {
        if qubit >= self.n_qubits {
            return Err(Error::QubitIndex {
                index: qubit,
                n_qubits: self.n_qubits,
            });
        }
        Ok(())
    }

    /// Hadamard on `qubit`.
    pub fn apply_hadamard(&self, qubit: usize) -> Result<Self> {
        self.check_qubit(qubit)?;
        let mut out = self.clone();
        out.hadamard_in_place(qubit);
        Ok(out)
    }

    /// Phase rotation `diag(e^{-i·angle}, e^{+i·angle})` on `qubit`.
    pub fn apply_rz(&self, qubit: usize, angle: R) -> Result<Self> {
        self.check_qubit(qubit)?;
        if !angle.is_finite() {
            return Err(Error::NonFiniteAngle);
        }
        let mut out = self.clone();
        out.rz_in_place(qubit, angle);
        Ok(out)
    }

    /// CNOT flipping `target` where `control` is set.
    pub fn apply_cnot(&self, target: usize, control: usize) -> Result<Self> {
        self.check_qubit(target)?;
        self.check_qubit(control)?;
        if target == control {
            return Err(Error::CnotQubits { target, control });
        }
        let mut out = self.clone();
        out.cnot_in_place(target, control);
        Ok(out)
    }

    pub(crate) fn hadamard_in_place(&mut self, qubit: usize) {
        let mask = 1usize << qubit;
        let inv_sqrt2 = R::cast(std::f64::consts::FRAC_1_SQRT_2);
        for base in 0..self.amps.len() / 2 {
            let low = ((base >> qubit) << (qubit + 1)) | (base & (mask - 1));
            let high = low | mask;
            let a = self.amps[low];
            let b = self.amps[high];
            self.amps[low] = (a + b).scale(inv_sqrt2);
            self.amps[high] = (a - b).scale(inv_sqrt2);
        }
    }

    pub(crate) fn rz_in_place(&mut self, qubit: usize, angle: R) {
        let mask = 1usize << qubit;
        let phase0 = Complex::from_polar(R::one(), -angle);
        let phase1 = Complex::from_polar(R::one(), angle);
        for (i, amp) in self.amps.iter_mut().enumerate() {
            *amp *= if i & mask == 0 { phase0 } else { phase1 };
        }
    }

    pub(crate) fn cnot_in_place(&mut self, target: usize, control: usize) {
        let tmask = 1usize << target;
        let cmask = 1usize << control;
        for i in 0..self.amps.len() {
            if i & cmask != 0 && i & tmask == 0 {
                self.amps.swap(i, i | tmask);
            }
        }
    }
}

/// Encode features into phases: Hadamard each qubit, then give the |0⟩ and
/// |1⟩ components of qubit k the phases e^{+i x_k} and e^{-i x_k}.
pub fn feature_map_encode<R: Real>(x: &FeatureVector<R>) -> Result<StateVector<R>> {
    let n = x.dim();
    let mut state = StateVector::zero(n)?;
    for k in 0..n {
        if !x[k].is_finite() {
            return Err(Error::NonFiniteAngle);
        }
        state.hadamard_in_place(k);
        state.rz_in_place(k, -x[k]);
    }
    Ok(state)
}

/// Squared overlap |⟨bra|ket⟩|² of two states of equal size.
pub fn fidelity<R: Real>(bra: &StateVector<R>, ket: &StateVector<R>) -> Result<R> {
    if bra.n_qubits != ket.n_qubits {
        return Err(Error::DimensionMismatch {
            what: "fidelity operands",
            expected: bra.n_qubits,
            got: ket.n_qubits,
        });
    }
    let mut overlap = Complex::new(R::zero(), R::zero());
    for (a, b) in bra.amps.iter().zip(&ket.amps) {
        overlap += a.conj() * *b;
    }
    Ok(overlap.norm_sqr())
}
