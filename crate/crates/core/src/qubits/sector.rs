//! Fixed `(N_α, N_β)` determinant spaces and second-quantized Hamiltonians
//! built directly on them.

use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::error::{invalid, QbeError, Result};
use crate::fragment::EmbeddingHamiltonian;
use crate::linalg::{dense_lowest, lanczos_lowest, CsrMatrix, EigenPair, LanczosOptions, Tensor4};

/// Spin orbital `2p + σ` (σ = 0 for α, 1 for β) is qubit `2p + σ`.
#[inline]
pub fn spin_orbital(p: usize, spin: usize) -> usize {
    2 * p + spin
}

/// Removes an electron from spin orbital `q`; sign counts occupied orbitals below `q`.
#[inline]
pub fn annihilate(det: u64, q: usize) -> Option<(u64, f64)> {
    let b = 1u64 << q;
    if det & b == 0 {
        return None;
    }
    let sign = if (det & (b - 1)).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
    Some((det ^ b, sign))
}

#[inline]
pub fn create(det: u64, q: usize) -> Option<(u64, f64)> {
    let b = 1u64 << q;
    if det & b != 0 {
        return None;
    }
    let sign = if (det & (b - 1)).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
    Some((det | b, sign))
}

/// `a†_p a_q |det⟩`.
#[inline]
pub fn excite(det: u64, p: usize, q: usize) -> Option<(u64, f64)> {
    let (d1, s1) = annihilate(det, q)?;
    let (d2, s2) = create(d1, p)?;
    Some((d2, s1 * s2))
}

/// `a†_p a†_r a_s a_q |det⟩`.
#[inline]
pub fn excite2(det: u64, p: usize, q: usize, r: usize, s: usize) -> Option<(u64, f64)> {
    let (d1, s1) = annihilate(det, q)?;
    let (d2, s2) = annihilate(d1, s)?;
    let (d3, s3) = create(d2, r)?;
    let (d4, s4) = create(d3, p)?;
    Some((d4, s1 * s2 * s3 * s4))
}

/// Determinants with fixed α and β electron counts over `n_orb` spatial orbitals.
#[derive(Debug, Clone)]
pub struct SectorBasis {
    pub n_orb: usize,
    pub n_alpha: usize,
    pub n_beta: usize,
    pub dets: Vec<u64>,
    index: HashMap<u64, usize>,
}

impl SectorBasis {
    pub fn new(n_orb: usize, n_alpha: usize, n_beta: usize) -> Result<Self> {
        if n_orb > 31 {
            return Err(QbeError::Resource(format!("{n_orb} spatial orbitals exceed the register limit")));
        }
        if n_alpha > n_orb || n_beta > n_orb {
            return invalid(format!("sector (N_alpha={n_alpha}, N_beta={n_beta}) is empty for {n_orb} orbitals"));
        }
        let strings = |k: usize| -> Vec<u64> { (0u64..1 << n_orb).filter(|s| s.count_ones() as usize == k).collect() };
        let (sa, sb) = (strings(n_alpha), strings(n_beta));
        let spread = |s: u64, spin: usize| -> u64 {
            (0..n_orb).filter(|p| s >> p & 1 == 1).fold(0u64, |acc, p| acc | 1 << spin_orbital(p, spin))
        };
        let mut dets = Vec::with_capacity(sa.len() * sb.len());
        for &a in &sa {
            for &b in &sb {
                dets.push(spread(a, 0) | spread(b, 1));
            }
        }
        dets.sort_unstable();
        let index = dets.iter().enumerate().map(|(i, &d)| (d, i)).collect();
        Ok(Self { n_orb, n_alpha, n_beta, dets, index })
    }

    /// Sector of a closed- or open-shell state with `n_elec` electrons and `2·S_z = ms2`.
    pub fn for_electrons(n_orb: usize, n_elec: usize, ms2: i32) -> Result<Self> {
        let twice_a = n_elec as i64 + ms2 as i64;
        if twice_a < 0 || twice_a % 2 != 0 || twice_a as usize > 2 * n_elec {
            return invalid(format!("inconsistent electron count {n_elec} and MS2 {ms2}"));
        }
        let na = (twice_a / 2) as usize;
        Self::new(n_orb, na, n_elec - na)
    }

    pub fn dim(&self) -> usize {
        self.dets.len()
    }

    pub fn n_qubits(&self) -> usize {
        2 * self.n_orb
    }

    pub fn n_elec(&self) -> usize {
        self.n_alpha + self.n_beta
    }

    #[inline]
    pub fn index_of(&self, det: u64) -> Option<usize> {
        self.index.get(&det).copied()
    }

    /// Diagonal of a qubit number operator `n_q` over the sector.
    pub fn occupation_diagonal(&self, q: usize) -> Vec<f64> {
        self.dets.iter().map(|d| ((d >> q) & 1) as f64).collect()
    }

    /// Diagonal of a product of Pauli-Z operators on the listed qubits.
    pub fn z_diagonal(&self, qubits: &[usize]) -> Vec<f64> {
        let mask = qubits.iter().fold(0u64, |m, &q| m | 1 << q);
        self.dets.iter().map(|d| if (d & mask).count_ones() % 2 == 1 { -1.0 } else { 1.0 }).collect()
    }
}

/// Matrix elements of `Σ h_pq a†a + ½ Σ (pq|rs) a†_p a†_r a_s a_q` between
/// determinants, emitted as `(row_det, col, value)` for column determinant `det`.
fn hamiltonian_column(h: &DMatrix<f64>, v: &Tensor4, det: u64, n_orb: usize, out: &mut Vec<(u64, f64)>) {
    let nso = 2 * n_orb;
    for q in 0..nso {
        if det >> q & 1 == 0 {
            continue;
        }
        for p in (q % 2..nso).step_by(2) {
            let hv = h[(p / 2, q / 2)];
            if hv == 0.0 {
                continue;
            }
            if let Some((d, s)) = excite(det, p, q) {
                out.push((d, hv * s));
            }
        }
    }
    for q in 0..nso {
        if det >> q & 1 == 0 {
            continue;
        }
        for s in 0..nso {
            if s == q || det >> s & 1 == 0 {
                continue;
            }
            for p in (q % 2..nso).step_by(2) {
                for r in (s % 2..nso).step_by(2) {
                    let val = v.get(p / 2, q / 2, r / 2, s / 2);
                    if val == 0.0 {
                        continue;
                    }
                    if let Some((d, sg)) = excite2(det, p, q, r, s) {
                        out.push((d, 0.5 * val * sg));
                    }
                }
            }
        }
    }
}

/// Sparse Hamiltonian of one-/two-electron integrals restricted to a sector.
pub fn sector_hamiltonian(h: &DMatrix<f64>, v: &Tensor4, constant: f64, sector: &SectorBasis) -> CsrMatrix {
    let n = sector.dim();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut col = Vec::new();
    for (j, &det) in sector.dets.iter().enumerate() {
        col.clear();
        hamiltonian_column(h, v, det, sector.n_orb, &mut col);
        for &(d, val) in &col {
            let i = sector.index_of(d).expect("number-conserving term stays in sector");
            rows[i].push((j, val));
        }
        if constant != 0.0 {
            rows[j].push((j, constant));
        }
    }
    CsrMatrix::from_rows(rows, 0.0)
}

/// Dense Hamiltonian on the full Fock space of `n_orb` spatial orbitals.
pub fn fock_space_hamiltonian(h: &DMatrix<f64>, v: &Tensor4, constant: f64) -> DMatrix<f64> {
    let n_orb = h.nrows();
    let dim = 1usize << (2 * n_orb);
    let mut m = DMatrix::zeros(dim, dim);
    let mut col = Vec::new();
    for det in 0..dim as u64 {
        col.clear();
        hamiltonian_column(h, v, det, n_orb, &mut col);
        for &(d, val) in &col {
            m[(d as usize, det as usize)] += val;
        }
        m[(det as usize, det as usize)] += constant;
    }
    m
}

/// Sector representation of an embedding Hamiltonian including `E_core`.
#[derive(Debug, Clone)]
pub struct SectorHamiltonian {
    pub sector: SectorBasis,
    pub matrix: CsrMatrix,
}

impl SectorHamiltonian {
    pub fn new(emb: &EmbeddingHamiltonian, sector: SectorBasis) -> Result<Self> {
        if sector.n_orb != emb.n_emb {
            return invalid("sector orbital count does not match embedding");
        }
        let matrix = sector_hamiltonian(&emb.h, &emb.v, emb.e_core, &sector);
        Ok(Self { sector, matrix })
    }

    /// Sector of the embedding's closed-shell electron count.
    pub fn for_embedding(emb: &EmbeddingHamiltonian) -> Result<Self> {
        Self::new(emb, SectorBasis::for_electrons(emb.n_emb, emb.n_elec_emb, 0)?)
    }

    pub fn dim(&self) -> usize {
        self.sector.dim()
    }

    /// `y = (H + diag(shift)) x`; `shift` may be empty.
    pub fn apply(&self, shift: &[f64], x: &[f64], y: &mut [f64]) {
        self.matrix.matvec_into(x, y);
        for ((yi, si), xi) in y.iter_mut().zip(shift).zip(x) {
            *yi += si * xi;
        }
    }

    pub fn expectation(&self, psi: &[f64]) -> f64 {
        let mut y = vec![0.0; psi.len()];
        self.matrix.matvec_into(psi, &mut y);
        crate::linalg::dot(psi, &y)
    }
}

/// Sector dimension at or below which the ground state is found densely.
pub const DENSE_SECTOR_LIMIT: usize = 160;

/// Lowest eigenpair of `H + diag(shift)` in the sector.
pub fn sector_ground_state(ham: &SectorHamiltonian, shift: &[f64], start: Option<&[f64]>) -> Result<EigenPair> {
    let n = ham.dim();
    if n == 0 {
        return invalid("empty sector");
    }
    if n <= DENSE_SECTOR_LIMIT {
        let mut m = ham.matrix.to_dense();
        for (i, s) in shift.iter().enumerate() {
            m[(i, i)] += s;
        }
        return Ok(dense_lowest(&m));
    }
    let opts = LanczosOptions { tol: 1e-10, ..Default::default() };
    lanczos_lowest(n, |x, y| ham.apply(shift, x, y), start, &opts)
}
