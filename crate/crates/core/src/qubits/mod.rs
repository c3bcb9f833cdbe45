//! Qubit representation of embedding Hamiltonians: Jordan–Wigner operators,
//! sector ground states, qubit reduced density matrices and fermionic 1-RDMs.

mod pauli;
mod sector;

pub use pauli::{jw_annihilator, jw_creator, pauli_basis, Pauli, PauliOperator, PauliString};
pub use sector::{
    annihilate, create, excite, excite2, fock_space_hamiltonian, sector_ground_state, sector_hamiltonian, spin_orbital,
    SectorBasis, SectorHamiltonian, DENSE_SECTOR_LIMIT,
};

use std::collections::HashMap;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{invalid, QbeError, Result};
use crate::fragment::EmbeddingHamiltonian;

/// Largest register handled by the qubit mapping.
pub const MAX_QUBITS: usize = 16;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Jordan–Wigner image of the embedding Hamiltonian, `E_core` included as
/// an identity term.
pub fn jordan_wigner(emb: &EmbeddingHamiltonian) -> Result<PauliOperator> {
    let n = emb.n_emb;
    let nq = 2 * n;
    if nq > MAX_QUBITS {
        return Err(QbeError::Resource(format!("{nq} qubits exceed the limit of {MAX_QUBITS}")));
    }
    let ann: Vec<PauliOperator> = (0..nq).map(|q| jw_annihilator(q, nq)).collect();
    let cre: Vec<PauliOperator> = ann.iter().map(|a| a.adjoint()).collect();
    // Spin-orbital excitation operators E_{pq} = a†_p a_q for equal spins.
    let mut exc: HashMap<(usize, usize), PauliOperator> = HashMap::new();
    for p in 0..nq {
        for q in (p % 2..nq).step_by(2) {
            exc.insert((p, q), cre[p].mul(&ann[q]));
        }
    }
    let mut terms = vec![(c(emb.e_core), PauliString::IDENTITY)];
    for ((p, q), e) in &exc {
        let hv = emb.h[(p / 2, q / 2)];
        if hv != 0.0 {
            terms.extend(e.terms.iter().map(|(a, s)| (a * hv, *s)));
        }
    }
    // a†_p a†_r a_s a_q = E_pq E_rs − δ_qr E_ps
    for ((p, q), epq) in &exc {
        for ((r, s), ers) in &exc {
            let val = emb.v.get(p / 2, q / 2, r / 2, s / 2);
            if val == 0.0 {
                continue;
            }
            let prod = epq.mul(ers);
            terms.extend(prod.terms.iter().map(|(a, st)| (a * 0.5 * val, *st)));
            if q == r {
                let eps = &exc[&(*p, *s)];
                terms.extend(eps.terms.iter().map(|(a, st)| (a * -0.5 * val, *st)));
            }
        }
    }
    Ok(PauliOperator { n_qubits: nq, terms }.canonicalize(1e-14))
}

/// Complex amplitudes over `2^n` computational basis states.
#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    pub n_qubits: usize,
    pub amplitudes: Vec<Complex64>,
}

impl Statevector {
    pub fn new(n_qubits: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != 1usize << n_qubits {
            return invalid("amplitude count must be 2^n_qubits");
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-12 {
            return invalid(format!("statevector norm² is {norm}, expected 1"));
        }
        Ok(Self { n_qubits, amplitudes })
    }

    /// Embeds real sector coefficients into the full register.
    pub fn from_sector(sector: &SectorBasis, coeffs: &[f64]) -> Result<Self> {
        let nq = sector.n_qubits();
        if nq > MAX_QUBITS {
            return Err(QbeError::Resource(format!("{nq} qubits exceed the limit of {MAX_QUBITS}")));
        }
        let mut amps = vec![c(0.0); 1 << nq];
        let norm = coeffs.iter().map(|x| x * x).sum::<f64>().sqrt();
        for (&d, &x) in sector.dets.iter().zip(coeffs) {
            amps[d as usize] = c(x / norm);
        }
        Self::new(nq, amps)
    }

    pub fn basis_state(n_qubits: usize, b: u64) -> Self {
        let mut amps = vec![c(0.0); 1 << n_qubits];
        amps[b as usize] = c(1.0);
        Self { n_qubits, amplitudes: amps }
    }

    pub fn expectation(&self, op: &PauliOperator) -> Complex64 {
        let y = op.apply(&self.amplitudes);
        self.amplitudes.iter().zip(&y).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }
}

/// Exact sector ground state of an embedding Hamiltonian.
#[derive(Debug, Clone)]
pub struct GroundState {
    pub energy: f64,
    pub coeffs: Vec<f64>,
    pub residual: f64,
}

pub fn ground_state(emb: &EmbeddingHamiltonian, n_elec: usize, ms2: i32) -> Result<(GroundState, SectorHamiltonian)> {
    let sector = SectorBasis::for_electrons(emb.n_emb, n_elec, ms2)?;
    if sector.dim() == 0 {
        return invalid("empty sector");
    }
    let ham = SectorHamiltonian::new(emb, sector)?;
    let ep = sector_ground_state(&ham, &[], None)?;
    Ok((GroundState { energy: ep.value, coeffs: ep.vector, residual: ep.residual }, ham))
}

/// Ground state of an arbitrary Pauli operator within a number/`S_z` sector.
pub fn ground_state_of_operator(op: &PauliOperator, sector: &SectorBasis) -> Result<(f64, Statevector)> {
    let n = sector.dim();
    if n == 0 {
        return invalid("empty sector");
    }
    let m = operator_in_sector(op, sector)?;
    let ep = crate::linalg::dense_lowest(&m);
    Ok((ep.value, Statevector::from_sector(sector, &ep.vector)?))
}

/// Real sector block of a Pauli operator; fails if it has complex entries.
pub fn operator_in_sector(op: &PauliOperator, sector: &SectorBasis) -> Result<DMatrix<f64>> {
    let n = sector.dim();
    let mut m = DMatrix::<Complex64>::zeros(n, n);
    for (j, &d) in sector.dets.iter().enumerate() {
        for (coef, s) in &op.terms {
            let (d2, ph) = s.apply_basis(d);
            if let Some(i) = sector.index_of(d2) {
                m[(i, j)] += coef * ph;
            }
        }
    }
    if m.iter().any(|z| z.im.abs() > 1e-12) {
        return invalid("operator has complex matrix elements in the sector");
    }
    Ok(m.map(|z| z.re))
}

/// Reduced density matrix of a qubit region.
#[derive(Debug, Clone, PartialEq)]
pub struct QubitRDM {
    pub qubits: Vec<usize>,
    /// Local basis index bit `k` is qubit `qubits[k]`.
    pub matrix: DMatrix<Complex64>,
}

impl QubitRDM {
    pub fn new(qubits: Vec<usize>, matrix: DMatrix<Complex64>) -> Result<Self> {
        let dim = 1usize << qubits.len();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return invalid("RDM dimension must be 2^m");
        }
        Ok(Self { qubits, matrix })
    }

    /// Diagonal RDM from basis-state probabilities.
    pub fn from_diagonal(qubits: Vec<usize>, probs: &[f64]) -> Result<Self> {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(probs.len(), probs.iter().map(|&p| c(p))));
        Self::new(qubits, m)
    }

    pub fn m(&self) -> usize {
        self.qubits.len()
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    /// `Tr[ρ P]` for a string on local qubits `0..m`.
    pub fn expectation(&self, p: &PauliString) -> f64 {
        let mut acc = c(0.0);
        for b in 0..self.dim() as u64 {
            let (b2, ph) = p.apply_basis(b);
            acc += self.matrix[(b as usize, b2 as usize)] * ph;
        }
        acc.re
    }

    pub fn hermiticity_violation(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Smallest eigenvalue of the (Hermitian) matrix.
    pub fn min_eigenvalue(&self) -> f64 {
        // Real symmetric embedding of a Hermitian matrix doubles each eigenvalue.
        let n = self.dim();
        let mut r = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                let z = self.matrix[(i, j)];
                r[(i, j)] = z.re;
                r[(i + n, j + n)] = z.re;
                r[(i, j + n)] = -z.im;
                r[(i + n, j)] = z.im;
            }
        }
        SymmetricEigen::new(r).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Partial trace of `|ψ⟩⟨ψ|` onto `region`.
pub fn qubit_rdm(psi: &Statevector, region: &[usize]) -> Result<QubitRDM> {
    let mut sorted = region.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != region.len() {
        return invalid("duplicate qubit in region");
    }
    if region.iter().any(|&q| q >= psi.n_qubits) {
        return invalid("region qubit out of range");
    }
    let mask = region.iter().fold(0u64, |m, &q| m | 1 << q);
    let m = region.len();
    let mut groups: HashMap<u64, Vec<(usize, Complex64)>> = HashMap::new();
    for (b, &a) in psi.amplitudes.iter().enumerate() {
        if a.norm_sqr() == 0.0 {
            continue;
        }
        let b = b as u64;
        let local = region.iter().enumerate().fold(0usize, |l, (k, &q)| l | (((b >> q) & 1) as usize) << k);
        groups.entry(b & !mask).or_default().push((local, a));
    }
    let mut rho = DMatrix::zeros(1 << m, 1 << m);
    for entries in groups.values() {
        for &(i, ai) in entries {
            for &(j, aj) in entries {
                rho[(i, j)] += ai * aj.conj();
            }
        }
    }
    QubitRDM::new(region.to_vec(), rho)
}

/// Diagonal of the qubit RDM of `region` for a real sector state; exact
/// whenever every pair of region configurations differs in `N` or `S_z`.
pub fn sector_region_probabilities(sector: &SectorBasis, coeffs: &[f64], region: &[usize]) -> Vec<f64> {
    let mut p = vec![0.0; 1 << region.len()];
    for (&d, &x) in sector.dets.iter().zip(coeffs) {
        let local = region.iter().enumerate().fold(0usize, |l, (k, &q)| l | (((d >> q) & 1) as usize) << k);
        p[local] += x * x;
    }
    p
}

/// Spin-orbital one-particle density matrix `P_pq = ⟨a†_p a_q⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct OneRDM {
    pub p: DMatrix<f64>,
}

impl OneRDM {
    pub fn trace(&self) -> f64 {
        self.p.trace()
    }

    /// Spin-summed spatial-orbital density.
    pub fn spin_summed(&self) -> DMatrix<f64> {
        let n = self.p.nrows() / 2;
        DMatrix::from_fn(n, n, |i, j| self.p[(2 * i, 2 * j)] + self.p[(2 * i + 1, 2 * j + 1)])
    }
}

pub fn fermionic_1rdm(psi: &Statevector) -> OneRDM {
    let nq = psi.n_qubits;
    let mut p = DMatrix::<f64>::zeros(nq, nq);
    for (b, &a) in psi.amplitudes.iter().enumerate() {
        if a.norm_sqr() == 0.0 {
            continue;
        }
        for q in 0..nq {
            for r in 0..nq {
                if let Some((d, s)) = excite(b as u64, r, q) {
                    // ⟨ψ|a†_r a_q|ψ⟩ accumulates into P_rq
                    p[(r, q)] += (psi.amplitudes[d as usize].conj() * a * s).re;
                }
            }
        }
    }
    OneRDM { p }
}

/// Spin-orbital 1-RDM of a real sector state.
pub fn sector_1rdm(sector: &SectorBasis, coeffs: &[f64]) -> OneRDM {
    let nq = sector.n_qubits();
    let mut p = DMatrix::<f64>::zeros(nq, nq);
    for (j, &d) in sector.dets.iter().enumerate() {
        let cj = coeffs[j];
        if cj == 0.0 {
            continue;
        }
        for q in 0..nq {
            if d >> q & 1 == 0 {
                continue;
            }
            for r in (q % 2..nq).step_by(2) {
                if let Some((d2, s)) = excite(d, r, q) {
                    if let Some(i) = sector.index_of(d2) {
                        p[(r, q)] += coeffs[i] * cj * s;
                    }
                }
            }
        }
    }
    OneRDM { p }
}
