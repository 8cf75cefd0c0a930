//! Dense statevector simulation for 2- and 3-qubit registers.
//!
//! # Qubit ordering
//!
//! Qubit `q` is bit `q` of the basis index, so qubit 0 is the least
//! significant bit: `|q1 q0>` has index `2*q1 + q0`. A [`Unitary4`] acting on
//! the qubit pair `(low, high)` sees the local index `2*bit(high) + bit(low)`,
//! which makes the Kronecker product `A ⊗ B` act with `A` on `high` and `B` on
//! `low`. In particular `X ⊗ I` flips qubit 1 and maps `|00>` to `|10>`
//! (index 2).
//!
//! All operations are pure: they borrow the input state and return a new one.

use std::fmt;
use std::ops::Mul;

use num_complex::Complex64;
use thiserror::Error;

/// Tolerance for algebraic identities (unitarity, gate-matrix agreement).
pub const ALGEBRAIC_TOL: f64 = 1e-12;
/// Tolerance for norms accumulated over a sequence of operations.
pub const NORM_TOL: f64 = 1e-10;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StateError {
    #[error("unsupported qubit count {0}, expected 2 or 3")]
    UnsupportedQubits(usize),
    #[error("expected {expected} amplitudes, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("amplitudes are not finite")]
    NonFinite,
    #[error("state norm {0} is not 1")]
    NotNormalized(f64),
    #[error("matrix is not unitary (max deviation {0:e})")]
    NotUnitary(f64),
    #[error("qubit index {index} out of range for {n_qubits} qubits")]
    QubitOutOfRange { index: usize, n_qubits: usize },
    #[error("invalid gate: {0}")]
    InvalidGate(&'static str),
    #[error("basis index {index} out of range for dimension {dim}")]
    BasisOutOfRange { index: usize, dim: usize },
}

/// Dense 4x4 complex matrix on a two-qubit register.
///
/// Construction is unchecked; [`StateVector::apply_unitary`] verifies
/// unitarity before use.
#[derive(Clone, Copy, PartialEq)]
pub struct Unitary4 {
    m: [[Complex64; 4]; 4],
}

impl Unitary4 {
    pub fn identity() -> Self {
        let mut m = [[ZERO; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = ONE;
        }
        Self { m }
    }

    pub fn from_entries(m: [[Complex64; 4]; 4]) -> Self {
        Self { m }
    }

    pub fn from_real(m: [[f64; 4]; 4]) -> Self {
        Self {
            m: m.map(|row| row.map(|x| Complex64::new(x, 0.0))),
        }
    }

    /// `a ⊗ b`: `a` acts on the high qubit of the pair, `b` on the low one.
    pub fn kron(a: &[[Complex64; 2]; 2], b: &[[Complex64; 2]; 2]) -> Self {
        let mut m = [[ZERO; 4]; 4];
        for (r, row) in m.iter_mut().enumerate() {
            for (c, entry) in row.iter_mut().enumerate() {
                *entry = a[r >> 1][c >> 1] * b[r & 1][c & 1];
            }
        }
        Self { m }
    }

    pub fn entries(&self) -> &[[Complex64; 4]; 4] {
        &self.m
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.m[row][col]
    }

    pub fn column(&self, col: usize) -> [Complex64; 4] {
        [self.m[0][col], self.m[1][col], self.m[2][col], self.m[3][col]]
    }

    pub fn row(&self, row: usize) -> [Complex64; 4] {
        self.m[row]
    }

    pub fn adjoint(&self) -> Self {
        let mut m = [[ZERO; 4]; 4];
        for (r, row) in m.iter_mut().enumerate() {
            for (c, entry) in row.iter_mut().enumerate() {
                *entry = self.m[c][r].conj();
            }
        }
        Self { m }
    }

    pub fn transpose(&self) -> Self {
        let mut m = [[ZERO; 4]; 4];
        for (r, row) in m.iter_mut().enumerate() {
            for (c, entry) in row.iter_mut().enumerate() {
                *entry = self.m[c][r];
            }
        }
        Self { m }
    }

    /// Largest entrywise deviation of `U U†` from the identity.
    pub fn unitarity_deviation(&self) -> f64 {
        let prod = *self * self.adjoint();
        let mut worst: f64 = 0.0;
        for r in 0..4 {
            for c in 0..4 {
                let expected = if r == c { ONE } else { ZERO };
                let d = (prod.m[r][c] - expected).norm();
                worst = if d.is_nan() { f64::INFINITY } else { worst.max(d) };
            }
        }
        worst
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_deviation() <= tol
    }

    /// Largest entrywise distance to `other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..4 {
            for c in 0..4 {
                worst = worst.max((self.m[r][c] - other.m[r][c]).norm());
            }
        }
        worst
    }

    pub fn apply_to(&self, v: &[Complex64; 4]) -> [Complex64; 4] {
        let mut out = [ZERO; 4];
        for (r, o) in out.iter_mut().enumerate() {
            *o = self.m[r][0] * v[0] + self.m[r][1] * v[1] + self.m[r][2] * v[2] + self.m[r][3] * v[3];
        }
        out
    }

    /// Matrix-vector product on a real vector, returning the real part.
    pub fn apply_real(&self, v: &[f64; 4]) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (r, o) in out.iter_mut().enumerate() {
            *o = (0..4).map(|c| self.m[r][c].re * v[c]).sum();
        }
        out
    }
}

impl Mul for Unitary4 {
    type Output = Unitary4;

    fn mul(self, rhs: Unitary4) -> Unitary4 {
        let mut m = [[ZERO; 4]; 4];
        for (r, row) in m.iter_mut().enumerate() {
            for (c, entry) in row.iter_mut().enumerate() {
                *entry = (0..4).map(|k| self.m[r][k] * rhs.m[k][c]).sum();
            }
        }
        Unitary4 { m }
    }
}

impl fmt::Debug for Unitary4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Unitary4 [")?;
        for row in &self.m {
            write!(f, "  ")?;
            for z in row {
                write!(f, "{:>9.5}{:+.5}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Single-qubit gate matrix, row-major.
pub type Matrix2 = [[Complex64; 2]; 2];

pub fn pauli_x() -> Matrix2 {
    [[ZERO, ONE], [ONE, ZERO]]
}

pub fn identity2() -> Matrix2 {
    [[ONE, ZERO], [ZERO, ONE]]
}

/// The gate kinds the circuits in this crate are built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GateKind {
    X,
    /// Controlled-X with exactly one control.
    Cx,
    /// Controlled one-qubit Euler rotation with exactly one control.
    Cu3 { theta: f64, phi: f64, lambda: f64 },
    /// X on the target when every control is set.
    Mcx,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateOp {
    pub kind: GateKind,
    pub target: usize,
    pub controls: Vec<usize>,
}

impl GateOp {
    pub fn x(target: usize) -> Self {
        Self { kind: GateKind::X, target, controls: Vec::new() }
    }

    pub fn cx(control: usize, target: usize) -> Self {
        Self { kind: GateKind::Cx, target, controls: vec![control] }
    }

    pub fn cu3(control: usize, target: usize, theta: f64, phi: f64, lambda: f64) -> Self {
        Self {
            kind: GateKind::Cu3 { theta, phi, lambda },
            target,
            controls: vec![control],
        }
    }

    pub fn mcx(controls: Vec<usize>, target: usize) -> Self {
        Self { kind: GateKind::Mcx, target, controls }
    }

    /// The 2x2 matrix applied to the target when the controls are satisfied.
    pub fn target_matrix(&self) -> Matrix2 {
        match self.kind {
            GateKind::X | GateKind::Cx | GateKind::Mcx => pauli_x(),
            GateKind::Cu3 { theta, phi, lambda } => crate::blocks::u3_matrix(theta, phi, lambda),
        }
    }

    pub fn validate(&self, n_qubits: usize) -> Result<(), StateError> {
        let arity_ok = match self.kind {
            GateKind::X => self.controls.is_empty(),
            GateKind::Cx | GateKind::Cu3 { .. } => self.controls.len() == 1,
            GateKind::Mcx => !self.controls.is_empty(),
        };
        if !arity_ok {
            return Err(StateError::InvalidGate("wrong number of controls for gate kind"));
        }
        if let GateKind::Cu3 { theta, phi, lambda } = self.kind {
            if !(theta.is_finite() && phi.is_finite() && lambda.is_finite()) {
                return Err(StateError::InvalidGate("non-finite rotation angle"));
            }
        }
        for &q in self.controls.iter().chain(std::iter::once(&self.target)) {
            if q >= n_qubits {
                return Err(StateError::QubitOutOfRange { index: q, n_qubits });
            }
        }
        if self.controls.contains(&self.target) {
            return Err(StateError::InvalidGate("target is also a control"));
        }
        for (i, c) in self.controls.iter().enumerate() {
            if self.controls[..i].contains(c) {
                return Err(StateError::InvalidGate("duplicate control"));
            }
        }
        Ok(())
    }

    /// Explicit matrix of a gate on qubits `(0, 1)` of a two-qubit register.
    pub fn to_unitary4(&self) -> Result<Unitary4, StateError> {
        self.validate(2)?;
        let mut m = [[ZERO; 4]; 4];
        for col in 0..4 {
            let mut basis = [ZERO; 4];
            basis[col] = ONE;
            let out = apply_gate_to(&basis, self);
            for row in 0..4 {
                m[row][col] = out[row];
            }
        }
        Ok(Unitary4 { m })
    }
}

fn apply_gate_to(amps: &[Complex64], gate: &GateOp) -> Vec<Complex64> {
    let g = gate.target_matrix();
    let control_mask: usize = gate.controls.iter().map(|&c| 1 << c).sum();
    let target_bit = 1 << gate.target;
    let mut out = amps.to_vec();
    for k in 0..amps.len() {
        if k & target_bit != 0 || k & control_mask != control_mask {
            continue;
        }
        let k1 = k | target_bit;
        let (a0, a1) = (amps[k], amps[k1]);
        out[k] = g[0][0] * a0 + g[0][1] * a1;
        out[k1] = g[1][0] * a0 + g[1][1] * a1;
    }
    out
}

/// Pure state of a 2- or 3-qubit register.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

fn check_qubits(n_qubits: usize) -> Result<(), StateError> {
    if matches!(n_qubits, 2 | 3) {
        Ok(())
    } else {
        Err(StateError::UnsupportedQubits(n_qubits))
    }
}

impl StateVector {
    /// `|0...0>` on `n_qubits` qubits.
    pub fn zero_state(n_qubits: usize) -> Result<Self, StateError> {
        check_qubits(n_qubits)?;
        let mut amps = vec![ZERO; 1 << n_qubits];
        amps[0] = ONE;
        Ok(Self { n_qubits, amps })
    }

    /// Wraps explicit amplitudes, rejecting states whose norm is off by more than [`NORM_TOL`].
    pub fn from_amplitudes(n_qubits: usize, amps: Vec<Complex64>) -> Result<Self, StateError> {
        check_qubits(n_qubits)?;
        let expected = 1 << n_qubits;
        if amps.len() != expected {
            return Err(StateError::Dimension { expected, got: amps.len() });
        }
        if amps.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(StateError::NonFinite);
        }
        let norm = amps.iter().map(|z| z.norm_sqr()).sum::<f64>();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(StateError::NotNormalized(norm));
        }
        Ok(Self { n_qubits, amps })
    }

    pub fn from_real(n_qubits: usize, amps: &[f64]) -> Result<Self, StateError> {
        Self::from_amplitudes(n_qubits, amps.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Applies `u` to the qubit pair `(low, high)`, identity elsewhere.
    pub fn apply_unitary(&self, u: &Unitary4, data_qubits: (usize, usize)) -> Result<Self, StateError> {
        let dev = u.unitarity_deviation();
        if dev > ALGEBRAIC_TOL {
            return Err(StateError::NotUnitary(dev));
        }
        self.apply_unitary_unchecked(u, data_qubits)
    }

    /// As [`apply_unitary`](Self::apply_unitary) without the unitarity check,
    /// for matrices already known to be unitary.
    pub(crate) fn apply_unitary_unchecked(
        &self,
        u: &Unitary4,
        (low, high): (usize, usize),
    ) -> Result<Self, StateError> {
        for q in [low, high] {
            if q >= self.n_qubits {
                return Err(StateError::QubitOutOfRange { index: q, n_qubits: self.n_qubits });
            }
        }
        if low == high {
            return Err(StateError::InvalidGate("unitary applied to a repeated qubit"));
        }
        let (lo_bit, hi_bit) = (1usize << low, 1usize << high);
        let mut out = self.amps.clone();
        for base in 0..self.amps.len() {
            if base & (lo_bit | hi_bit) != 0 {
                continue;
            }
            let idx = [base, base | lo_bit, base | hi_bit, base | lo_bit | hi_bit];
            let local = idx.map(|k| self.amps[k]);
            let result = u.apply_to(&local);
            for (k, z) in idx.iter().zip(result) {
                out[*k] = z;
            }
        }
        Ok(Self { n_qubits: self.n_qubits, amps: out })
    }

    pub fn apply_gate(&self, gate: &GateOp) -> Result<Self, StateError> {
        gate.validate(self.n_qubits)?;
        Ok(Self {
            n_qubits: self.n_qubits,
            amps: apply_gate_to(&self.amps, gate),
        })
    }

    /// `|amp_k|^2` for basis index `k`.
    pub fn probability(&self, basis_index: usize) -> Result<f64, StateError> {
        self.amps
            .get(basis_index)
            .map(|z| z.norm_sqr())
            .ok_or(StateError::BasisOutOfRange { index: basis_index, dim: self.amps.len() })
    }

    /// Probability that `qubit` reads 1.
    pub fn qubit_one_probability(&self, qubit: usize) -> Result<f64, StateError> {
        if qubit >= self.n_qubits {
            return Err(StateError::QubitOutOfRange { index: qubit, n_qubits: self.n_qubits });
        }
        Ok(self
            .amps
            .iter()
            .enumerate()
            .filter(|(k, _)| k & (1 << qubit) != 0)
            .map(|(_, z)| z.norm_sqr())
            .sum())
    }
}
