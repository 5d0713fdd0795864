//! Integer matrix descriptors of parametrized circuits.
//!
//! A circuit is a grid of gate codes with one row per qubit and one column
//! per layer. Code 0 is an empty cell, 1 a Hadamard, 2 a parametrized
//! rotation, and 3/4/5 a CNOT recorded on its target row whose control sits
//! 1/2/3 rows below. A CNOT's control row must be empty in the same layer.
//!
//! Within a layer, gates are applied in ascending target-qubit order, and
//! rotation parameters are numbered layer-major, qubit-minor. Both orders
//! are fixed so that a descriptor plus a parameter vector always reproduces
//! the same kernel.

use std::fmt;

use crate::error::{Error, Result};
use crate::qstate::{FeatureVector, StateVector};
use crate::scalar::Real;

/// Gate at one (qubit, layer) cell of a descriptor.
///
/// Variant order matches the numeric codes, so the derived `Ord` is the
/// canonical code order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GateCode {
    /// 0: empty cell.
    None,
    /// 1: Hadamard.
    Hadamard,
    /// 2: parametrized rotation; the angle is θ_j · x_k on qubit k.
    RotZ,
    /// 3: CNOT targeting this row, control one row below.
    CnotPrev1,
    /// 4: CNOT targeting this row, control two rows below.
    CnotPrev2,
    /// 5: CNOT targeting this row, control three rows below.
    CnotPrev3,
}

impl GateCode {
    /// All codes in canonical (numeric) order.
    pub const ALL: [GateCode; 6] = [
        GateCode::None,
        GateCode::Hadamard,
        GateCode::RotZ,
        GateCode::CnotPrev1,
        GateCode::CnotPrev2,
        GateCode::CnotPrev3,
    ];

    pub fn code(self) -> u8 {
        match self {
            GateCode::None => 0,
            GateCode::Hadamard => 1,
            GateCode::RotZ => 2,
            GateCode::CnotPrev1 => 3,
            GateCode::CnotPrev2 => 4,
            GateCode::CnotPrev3 => 5,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        GateCode::ALL.get(code as usize).copied()
    }

    /// Distance down to the control row, for CNOT codes.
    pub fn control_offset(self) -> Option<usize> {
        match self {
            GateCode::CnotPrev1 => Some(1),
            GateCode::CnotPrev2 => Some(2),
            GateCode::CnotPrev3 => Some(3),
            _ => None,
        }
    }

    pub fn is_rz(self) -> bool {
        self == GateCode::RotZ
    }
}

/// One column of a descriptor: the gate on every qubit row.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LayerSpec {
    gates: Vec<GateCode>,
}

impl LayerSpec {
    /// Validate CNOT placement: the control row must exist and must carry
    /// code 0 in this layer.
    pub fn new(gates: Vec<GateCode>) -> Result<Self> {
        for (q, gate) in gates.iter().enumerate() {
            if let Some(offset) = gate.control_offset() {
                if q < offset {
                    return Err(Error::InvalidLayer(format!(
                        "cnot code {} on qubit {q} has no control row",
                        gate.code()
                    )));
                }
                if gates[q - offset] != GateCode::None {
                    return Err(Error::InvalidLayer(format!(
                        "cnot on qubit {q} collides with gate on control row {}",
                        q - offset
                    )));
                }
            }
        }
        Ok(Self { gates })
    }

    /// The all-empty layer on `n_qubits` rows.
    pub fn identity(n_qubits: usize) -> Self {
        Self {
            gates: vec![GateCode::None; n_qubits],
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.gates.len()
    }

    pub fn gates(&self) -> &[GateCode] {
        &self.gates
    }

    pub fn is_identity(&self) -> bool {
        self.gates.iter().all(|g| *g == GateCode::None)
    }

    pub fn rz_count(&self) -> usize {
        self.gates.iter().filter(|g| g.is_rz()).count()
    }
}

/// Every valid layer on `n_qubits` qubits, in lexicographic code order.
/// The all-empty layer is always element 0.
pub fn enumerate_layers(n_qubits: usize) -> Result<Vec<LayerSpec>> {
    if n_qubits == 0 || n_qubits > crate::qstate::MAX_QUBITS {
        return Err(Error::QubitCount(n_qubits));
    }
    let mut out = Vec::new();
    let mut partial = Vec::with_capacity(n_qubits);
    fill_layers(n_qubits, &mut partial, &mut out);
    Ok(out)
}

fn fill_layers(n_qubits: usize, partial: &mut Vec<GateCode>, out: &mut Vec<LayerSpec>) {
    if partial.len() == n_qubits {
        out.push(LayerSpec {
            gates: partial.clone(),
        });
        return;
    }
    let q = partial.len();
    for gate in GateCode::ALL {
        if let Some(offset) = gate.control_offset() {
            if q < offset || partial[q - offset] != GateCode::None {
                continue;
            }
        }
        partial.push(gate);
        fill_layers(n_qubits, partial, out);
        partial.pop();
    }
}

/// Multiset coefficient C(g+n-1, n) times K times L, in exact integer
/// arithmetic. Errors on overflow.
pub fn layer_space_size_formula(g: u64, n: u64, k: u64, l: u64) -> Result<u128> {
    if g < 1 || n < 1 || k < 1 || l < 1 {
        return Err(Error::Config(
            "layer space formula requires g, n, K, L >= 1".into(),
        ));
    }
    let mut coeff: u128 = 1;
    // C(g+n-1, n) = prod_{i=1..n} (g-1+i)/i, exact at every step.
    for i in 1..=n as u128 {
        coeff = coeff
            .checked_mul(g as u128 - 1 + i)
            .ok_or(Error::Overflow("layer space formula"))?
            / i;
    }
    coeff
        .checked_mul(k as u128)
        .and_then(|v| v.checked_mul(l as u128))
        .ok_or(Error::Overflow("layer space formula"))
}

/// Matrix descriptor of a parametrized circuit: rows are qubits, columns
/// are layers. Derived `Ord` compares layer sequences lexicographically,
/// which is the canonical tie-break order used by the search.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CircuitDescriptor {
    n_qubits: usize,
    layers: Vec<LayerSpec>,
}

impl CircuitDescriptor {
    /// A circuit with no layers (the identity).
    pub fn empty(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > crate::qstate::MAX_QUBITS {
            return Err(Error::QubitCount(n_qubits));
        }
        Ok(Self {
            n_qubits,
            layers: Vec::new(),
        })
    }

    pub fn from_layers(n_qubits: usize, layers: Vec<LayerSpec>) -> Result<Self> {
        let mut descriptor = Self::empty(n_qubits)?;
        for layer in layers {
            descriptor.push_layer(layer)?;
        }
        Ok(descriptor)
    }

    pub fn push_layer(&mut self, layer: LayerSpec) -> Result<()> {
        if layer.n_qubits() != self.n_qubits {
            return Err(Error::DimensionMismatch {
                what: "layer width",
                expected: self.n_qubits,
                got: layer.n_qubits(),
            });
        }
        self.layers.push(layer);
        Ok(())
    }

    /// A copy of this circuit with one more layer appended.
    pub fn with_layer(&self, layer: LayerSpec) -> Result<Self> {
        let mut child = self.clone();
        child.push_layer(layer)?;
        Ok(child)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    /// Number of parametrized rotation gates, i.e. the length of the
    /// parameter vector this circuit expects.
    pub fn param_count(&self) -> usize {
        self.layers.iter().map(LayerSpec::rz_count).sum()
    }

    /// Text form: one line per qubit, comma-separated codes, columns are
    /// layers. A circuit with no layers serializes to one empty line per
    /// qubit. (The single-qubit zero-layer circuit serializes to an empty
    /// string, which [`CircuitDescriptor::from_text`] rejects as empty
    /// input; every other descriptor round-trips.)
    pub fn to_text(&self) -> String {
        (0..self.n_qubits)
            .map(|q| {
                self.layers
                    .iter()
                    .map(|layer| layer.gates[q].code().to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            })
            .collect::<Vec<_>>()
            .join("\n")
    }

    /// Parse the text form. Rows and columns in errors are 1-based.
    ///
    /// A trailing empty line is treated as a file's final newline and
    /// dropped, unless every line is empty (a circuit with zero layers).
    pub fn from_text(text: &str) -> Result<Self> {
        if text.is_empty() {
            return Err(Error::DescriptorParse {
                row: 1,
                col: 1,
                message: "empty descriptor text".into(),
            });
        }
        let mut lines: Vec<&str> = text.split('\n').map(|l| l.trim_end_matches('\r')).collect();
        if lines.len() > 1
            && lines.last().is_some_and(|l| l.trim().is_empty())
            && lines.iter().any(|l| !l.trim().is_empty())
        {
            lines.pop();
        }
        let n_qubits = lines.len();
        if n_qubits > crate::qstate::MAX_QUBITS {
            return Err(Error::DescriptorParse {
                row: n_qubits,
                col: 1,
                message: format!("{n_qubits} qubit rows exceed the supported maximum"),
            });
        }
        let mut rows: Vec<Vec<GateCode>> = Vec::with_capacity(n_qubits);
        let mut n_layers = None;
        for (r, line) in lines.iter().enumerate() {
            let cells: Vec<GateCode> = if line.trim().is_empty() {
                Vec::new()
            } else {
                line.split(',')
                    .enumerate()
                    .map(|(c, cell)| {
                        let code: u8 = cell.trim().parse().map_err(|_| Error::DescriptorParse {
                            row: r + 1,
                            col: c + 1,
                            message: format!("cannot parse {:?} as a gate code", cell.trim()),
                        })?;
                        GateCode::from_code(code).ok_or(Error::DescriptorParse {
                            row: r + 1,
                            col: c + 1,
                            message: format!("gate code {code} outside 0..=5"),
                        })
                    })
                    .collect::<Result<_>>()?
            };
            match n_layers {
                None => n_layers = Some(cells.len()),
                Some(expected) if expected != cells.len() => {
                    return Err(Error::DescriptorParse {
                        row: r + 1,
                        col: cells.len(),
                        message: format!(
                            "row has {} columns, previous rows have {expected}",
                            cells.len()
                        ),
                    });
                }
                _ => {}
            }
            rows.push(cells);
        }
        let n_layers = n_layers.unwrap_or(0);
        let mut layers = Vec::with_capacity(n_layers);
        for l in 0..n_layers {
            let gates: Vec<GateCode> = rows.iter().map(|row| row[l]).collect();
            let layer = LayerSpec::new(gates).map_err(|e| {
                let offending = match &e {
                    Error::InvalidLayer(msg) => msg.clone(),
                    other => other.to_string(),
                };
                Error::DescriptorParse {
                    row: 0,
                    col: l + 1,
                    message: offending,
                }
            })?;
            layers.push(layer);
        }
        CircuitDescriptor::from_layers(n_qubits, layers)
    }
}

impl fmt::Display for CircuitDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Rotation multipliers θ for a circuit, one per rotation gate, in
/// layer-major, qubit-minor order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector<R>(Vec<R>);

impl<R: Real> ParamVector<R> {
    pub fn new(theta: Vec<R>) -> Self {
        Self(theta)
    }

    /// The default parameter vector: every multiplier 1, so each rotation
    /// angle is exactly the matching feature component.
    pub fn ones(d: usize) -> Self {
        Self(vec![R::one(); d])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[R] {
        &self.0
    }
}

impl<R: Real> From<Vec<R>> for ParamVector<R> {
    fn from(theta: Vec<R>) -> Self {
        Self(theta)
    }
}

impl<R: Real> std::ops::Index<usize> for ParamVector<R> {
    type Output = R;

    fn index(&self, i: usize) -> &R {
        &self.0[i]
    }
}

/// Apply one layer in place. `rz_multipliers` are the θ values for this
/// layer's rotation gates in ascending qubit order; returns how many were
/// consumed.
pub(crate) fn apply_layer_in_place<R: Real>(
    state: &mut StateVector<R>,
    layer: &LayerSpec,
    rz_multipliers: &[R],
    x: &FeatureVector<R>,
) -> Result<usize> {
    let mut used = 0;
    for (q, gate) in layer.gates().iter().enumerate() {
        match gate {
            GateCode::None => {}
            GateCode::Hadamard => state.hadamard_in_place(q),
            GateCode::RotZ => {
                let theta = *rz_multipliers.get(used).ok_or(Error::ThetaLength {
                    expected: layer.rz_count(),
                    got: rz_multipliers.len(),
                })?;
                let angle = theta * x[q];
                if !angle.is_finite() {
                    return Err(Error::NonFiniteAngle);
                }
                state.rz_in_place(q, angle);
                used += 1;
            }
            cnot => {
                let offset = cnot.control_offset().expect("cnot code");
                state.cnot_in_place(q, q - offset);
            }
        }
    }
    Ok(used)
}

/// Apply a whole descriptor to `state`: layers in order, gates within a
/// layer in ascending qubit order, rotation j using angle θ_j · x_k.
pub fn apply_parametrized_circuit<R: Real>(
    descriptor: &CircuitDescriptor,
    theta: &ParamVector<R>,
    x: &FeatureVector<R>,
    state: &StateVector<R>,
) -> Result<StateVector<R>> {
    if theta.len() != descriptor.param_count() {
        return Err(Error::ThetaLength {
            expected: descriptor.param_count(),
            got: theta.len(),
        });
    }
    if x.dim() != descriptor.n_qubits {
        return Err(Error::DimensionMismatch {
            what: "feature vector",
            expected: descriptor.n_qubits,
            got: x.dim(),
        });
    }
    if state.n_qubits() != descriptor.n_qubits {
        return Err(Error::DimensionMismatch {
            what: "state register",
            expected: descriptor.n_qubits,
            got: state.n_qubits(),
        });
    }
    let mut out = state.clone();
    let mut next = 0;
    for layer in &descriptor.layers {
        next += apply_layer_in_place(&mut out, layer, &theta.values()[next..], x)?;
    }
    Ok(out)
}
