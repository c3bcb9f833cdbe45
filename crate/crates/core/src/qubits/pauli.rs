//! Pauli strings in symplectic (x, z) bit-mask form and weighted sums of them.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{invalid, Result};

const I1: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

/// `i^{|x∧z|} X^x Z^z`, so a qubit with both bits set carries `Y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    pub x: u64,
    pub z: u64,
}

fn i_pow(k: u32) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => I1,
        2 => Complex64::new(-1.0, 0.0),
        _ => -I1,
    }
}

impl PauliString {
    pub const IDENTITY: PauliString = PauliString { x: 0, z: 0 };

    pub fn single(q: usize, p: Pauli) -> Self {
        let b = 1u64 << q;
        match p {
            Pauli::I => Self::IDENTITY,
            Pauli::X => Self { x: b, z: 0 },
            Pauli::Y => Self { x: b, z: b },
            Pauli::Z => Self { x: 0, z: b },
        }
    }

    pub fn from_ops(ops: &[(usize, Pauli)]) -> Self {
        ops.iter().fold(Self::IDENTITY, |acc, &(q, p)| {
            let s = Self::single(q, p);
            Self { x: acc.x | s.x, z: acc.z | s.z }
        })
    }

    pub fn get(&self, q: usize) -> Pauli {
        match ((self.x >> q) & 1, (self.z >> q) & 1) {
            (0, 0) => Pauli::I,
            (1, 0) => Pauli::X,
            (1, 1) => Pauli::Y,
            _ => Pauli::Z,
        }
    }

    pub fn support(&self) -> u64 {
        self.x | self.z
    }

    pub fn is_identity(&self) -> bool {
        self.support() == 0
    }

    pub fn is_diagonal(&self) -> bool {
        self.x == 0
    }

    fn n_y(&self) -> u32 {
        (self.x & self.z).count_ones()
    }

    /// `P|b⟩ = phase · |b ⊕ x⟩`.
    #[inline]
    pub fn apply_basis(&self, b: u64) -> (u64, Complex64) {
        let sign = if (b & self.z).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
        (b ^ self.x, i_pow(self.n_y()) * sign)
    }

    /// Product `self · other` as `(phase, string)`.
    pub fn mul(&self, other: &PauliString) -> (Complex64, PauliString) {
        let out = PauliString { x: self.x ^ other.x, z: self.z ^ other.z };
        let sign = if (self.z & other.x).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
        let k = self.n_y() + other.n_y() + 4 - out.n_y() % 4;
        (i_pow(k) * sign, out)
    }

    pub fn label(&self, n_qubits: usize) -> String {
        (0..n_qubits)
            .map(|q| match self.get(q) {
                Pauli::I => 'I',
                Pauli::X => 'X',
                Pauli::Y => 'Y',
                Pauli::Z => 'Z',
            })
            .collect()
    }

    /// Dense `2^n × 2^n` matrix, qubit `q` being bit `q` of the basis index.
    pub fn to_dense(&self, n_qubits: usize) -> DMatrix<Complex64> {
        let dim = 1usize << n_qubits;
        let mut m = DMatrix::zeros(dim, dim);
        for b in 0..dim as u64 {
            let (b2, ph) = self.apply_basis(b);
            m[(b2 as usize, b as usize)] += ph;
        }
        m
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let top = 64 - self.support().leading_zeros() as usize;
        write!(f, "{}", self.label(top.max(1)))
    }
}

/// All `4^m − 1` non-identity strings on qubits `0..m`, ordered by the
/// base-4 index with digit `k` (I,X,Y,Z = 0..3) acting on qubit `k`.
pub fn pauli_basis(m: usize) -> Vec<PauliString> {
    let total = 1usize << (2 * m);
    (1..total)
        .map(|idx| {
            let ops: Vec<(usize, Pauli)> = (0..m)
                .map(|k| {
                    let d = (idx >> (2 * k)) & 3;
                    let p = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z][d];
                    (k, p)
                })
                .collect();
            PauliString::from_ops(&ops)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PauliOperator {
    pub n_qubits: usize,
    pub terms: Vec<(Complex64, PauliString)>,
}

impl PauliOperator {
    pub fn zero(n_qubits: usize) -> Self {
        Self { n_qubits, terms: Vec::new() }
    }

    pub fn identity(n_qubits: usize, c: f64) -> Self {
        Self { n_qubits, terms: vec![(Complex64::new(c, 0.0), PauliString::IDENTITY)] }
    }

    pub fn from_terms(n_qubits: usize, terms: Vec<(Complex64, PauliString)>) -> Result<Self> {
        if n_qubits > 63 {
            return invalid("at most 63 qubits are representable");
        }
        let limit = if n_qubits == 63 { u64::MAX >> 1 } else { (1u64 << n_qubits) - 1 };
        if terms.iter().any(|(_, s)| s.support() & !limit != 0) {
            return invalid("Pauli string acts outside the register");
        }
        Ok(Self { n_qubits, terms }.canonicalize(0.0))
    }

    /// Merges duplicate strings, drops coefficients with modulus `≤ tol`,
    /// and sorts by string.
    pub fn canonicalize(mut self, tol: f64) -> Self {
        let mut acc: BTreeMap<PauliString, Complex64> = BTreeMap::new();
        for (c, s) in self.terms.drain(..) {
            *acc.entry(s).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
        self.terms = acc.into_iter().filter(|(_, c)| c.norm() > tol).map(|(s, c)| (c, s)).collect();
        self
    }

    pub fn add(&self, other: &PauliOperator) -> PauliOperator {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        PauliOperator { n_qubits: self.n_qubits.max(other.n_qubits), terms }.canonicalize(0.0)
    }

    pub fn scale(&self, c: Complex64) -> PauliOperator {
        PauliOperator { n_qubits: self.n_qubits, terms: self.terms.iter().map(|(a, s)| (a * c, *s)).collect() }
    }

    pub fn mul(&self, other: &PauliOperator) -> PauliOperator {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for (a, s) in &self.terms {
            for (b, t) in &other.terms {
                let (ph, u) = s.mul(t);
                terms.push((a * b * ph, u));
            }
        }
        PauliOperator { n_qubits: self.n_qubits.max(other.n_qubits), terms }.canonicalize(0.0)
    }

    pub fn adjoint(&self) -> PauliOperator {
        PauliOperator { n_qubits: self.n_qubits, terms: self.terms.iter().map(|(c, s)| (c.conj(), *s)).collect() }
    }

    /// Largest coefficient imaginary part; zero for a Hermitian operator.
    pub fn hermiticity_violation(&self) -> f64 {
        self.terms.iter().map(|(c, _)| c.im.abs()).fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let dim = 1usize << self.n_qubits;
        let mut m = DMatrix::zeros(dim, dim);
        for (c, s) in &self.terms {
            for b in 0..dim as u64 {
                let (b2, ph) = s.apply_basis(b);
                m[(b2 as usize, b as usize)] += c * ph;
            }
        }
        m
    }

    /// `y = O x` on the full register.
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); x.len()];
        for (c, s) in &self.terms {
            for (b, &amp) in x.iter().enumerate() {
                if amp == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let (b2, ph) = s.apply_basis(b as u64);
                y[b2 as usize] += c * ph * amp;
            }
        }
        y
    }
}

/// Jordan–Wigner annihilator `a_q = Z_0⋯Z_{q−1}(X_q + iY_q)/2`.
pub fn jw_annihilator(q: usize, n_qubits: usize) -> PauliOperator {
    let zs = (1u64 << q) - 1;
    let b = 1u64 << q;
    PauliOperator {
        n_qubits,
        terms: vec![
            (Complex64::new(0.5, 0.0), PauliString { x: b, z: zs }),
            (Complex64::new(0.0, 0.5), PauliString { x: b, z: zs | b }),
        ],
    }
}

pub fn jw_creator(q: usize, n_qubits: usize) -> PauliOperator {
    jw_annihilator(q, n_qubits).adjoint()
}
