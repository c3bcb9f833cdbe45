//! Exact ground-state preparation modelled as a counted sampling oracle.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use rand_distr::{Binomial, Distribution};

use crate::error::Result;
use crate::linalg::EigenPair;
use crate::qubits::{sector_ground_state, PauliOperator, SectorHamiltonian, Statevector};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Energy,
    Swap,
    Amplification,
    /// Per-Pauli measurements of an overlap region.
    Tomography,
}

/// State-preparation counters, safe to share between threads.
#[derive(Debug, Default)]
pub struct OracleLedger {
    energy: AtomicU64,
    swap: AtomicU64,
    amplification: AtomicU64,
    tomography: AtomicU64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LedgerSnapshot {
    pub energy: u64,
    pub swap: u64,
    pub amplification: u64,
    pub tomography: u64,
}

impl LedgerSnapshot {
    pub fn total(&self) -> u64 {
        self.energy + self.swap + self.amplification + self.tomography
    }
}

impl OracleLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&self, purpose: Purpose, count: u64) {
        let c = match purpose {
            Purpose::Energy => &self.energy,
            Purpose::Swap => &self.swap,
            Purpose::Amplification => &self.amplification,
            Purpose::Tomography => &self.tomography,
        };
        c.fetch_add(count, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> LedgerSnapshot {
        LedgerSnapshot {
            energy: self.energy.load(Ordering::Relaxed),
            swap: self.swap.load(Ordering::Relaxed),
            amplification: self.amplification.load(Ordering::Relaxed),
            tomography: self.tomography.load(Ordering::Relaxed),
        }
    }

    pub fn total(&self) -> u64 {
        self.snapshot().total()
    }
}

/// Ground-state oracle for one sector Hamiltonian. The state is computed once;
/// every declared preparation is counted.
pub struct GroundStateOracle<'a> {
    ham: &'a SectorHamiltonian,
    ledger: &'a OracleLedger,
    cache: Mutex<Option<EigenPair>>,
}

impl<'a> GroundStateOracle<'a> {
    pub fn new(ham: &'a SectorHamiltonian, ledger: &'a OracleLedger) -> Self {
        Self { ham, ledger, cache: Mutex::new(None) }
    }

    pub fn prepare_ground(&self, purpose: Purpose) -> Result<Statevector> {
        let mut guard = self.cache.lock().expect("oracle cache poisoned");
        if guard.is_none() {
            *guard = Some(sector_ground_state(self.ham, &[], None)?);
        }
        self.ledger.record(purpose, 1);
        let ep = guard.as_ref().expect("filled above");
        Statevector::from_sector(&self.ham.sector, &ep.vector)
    }

    pub fn ground_energy(&self) -> Result<f64> {
        let mut guard = self.cache.lock().expect("oracle cache poisoned");
        if guard.is_none() {
            *guard = Some(sector_ground_state(self.ham, &[], None)?);
        }
        Ok(guard.as_ref().expect("filled above").value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShotModel {
    Exact,
    /// Shots per measurement group.
    Sampled {
        shots: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub preparations: u64,
}

/// `⟨ψ|O|ψ⟩`. Sampled mode measures all diagonal strings together in the
/// computational basis and every other string separately.
pub fn energy_expectation(
    op: &PauliOperator,
    psi: &Statevector,
    model: ShotModel,
    rng: &mut Rng,
    ledger: Option<&OracleLedger>,
) -> Result<EnergyEstimate> {
    let exact = psi.expectation(op).re;
    let shots = match model {
        ShotModel::Exact => return Ok(EnergyEstimate { mean: exact, std_error: 0.0, preparations: 0 }),
        ShotModel::Sampled { shots } => shots.max(1),
    };
    let mut mean = 0.0;
    let mut var = 0.0;
    let mut groups = 0u64;

    let diag: Vec<_> = op.terms.iter().filter(|(_, s)| s.is_diagonal() && !s.is_identity()).collect();
    mean += op.terms.iter().filter(|(_, s)| s.is_identity()).map(|(c, _)| c.re).sum::<f64>();
    if !diag.is_empty() {
        groups += 1;
        let probs: Vec<f64> = psi.amplitudes.iter().map(|a| a.norm_sqr()).collect();
        let dist =
            rand::distr::weighted::WeightedIndex::new(&probs).map_err(|e| crate::QbeError::Numerical(e.to_string()))?;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..shots {
            let b = dist.sample(rng) as u64;
            let val: f64 = diag.iter().map(|(c, s)| if (b & s.z).count_ones() % 2 == 1 { -c.re } else { c.re }).sum();
            s1 += val;
            s2 += val * val;
        }
        let n = shots as f64;
        let m = s1 / n;
        mean += m;
        var += ((s2 / n - m * m).max(0.0)) / n;
    }
    for (c, s) in op.terms.iter().filter(|(_, s)| !s.is_diagonal()) {
        groups += 1;
        let single = PauliOperator { n_qubits: op.n_qubits, terms: vec![(num_complex::Complex64::new(1.0, 0.0), *s)] };
        let e = psi.expectation(&single).re.clamp(-1.0, 1.0);
        let plus =
            Binomial::new(shots, 0.5 * (1.0 + e)).map_err(|e| crate::QbeError::Numerical(e.to_string()))?.sample(rng);
        let f = plus as f64 / shots as f64;
        mean += c.re * (2.0 * f - 1.0);
        var += c.re * c.re * 4.0 * f * (1.0 - f) / shots as f64;
    }
    let preparations = groups * shots;
    if let Some(l) = ledger {
        l.record(Purpose::Energy, preparations);
    }
    Ok(EnergyEstimate { mean, std_error: var.sqrt(), preparations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fragment::EmbeddingHamiltonian;
    use crate::integrals::h_chain_integrals;
    use crate::qubits::{jordan_wigner, SectorBasis};
    use crate::rng::seeded;

    #[test]
    fn declared_preparations_are_counted() {
        let ints = h_chain_integrals(2, 1.4).unwrap();
        let emb = EmbeddingHamiltonian::from_integrals(&ints, 2);
        let ham = SectorHamiltonian::new(&emb, SectorBasis::new(2, 1, 1).unwrap()).unwrap();
        let ledger = OracleLedger::new();
        let oracle = GroundStateOracle::new(&ham, &ledger);
        let a = oracle.prepare_ground(Purpose::Energy).unwrap();
        let b = oracle.prepare_ground(Purpose::Energy).unwrap();
        assert_eq!(a, b);
        assert_eq!(ledger.total(), 2);
        assert_eq!(ledger.snapshot().energy, 2);
    }

    #[test]
    fn exact_and_zero_operator() {
        let ints = h_chain_integrals(2, 1.4).unwrap();
        let emb = EmbeddingHamiltonian::from_integrals(&ints, 2);
        let ham = SectorHamiltonian::new(&emb, SectorBasis::new(2, 1, 1).unwrap()).unwrap();
        let ledger = OracleLedger::new();
        let oracle = GroundStateOracle::new(&ham, &ledger);
        let psi = oracle.prepare_ground(Purpose::Energy).unwrap();
        let op = jordan_wigner(&emb).unwrap();
        let mut rng = seeded(0);
        let e = energy_expectation(&op, &psi, ShotModel::Exact, &mut rng, None).unwrap();
        assert!((e.mean - oracle.ground_energy().unwrap()).abs() < 1e-10);
        let zero = PauliOperator::zero(4);
        let z = energy_expectation(&zero, &psi, ShotModel::Sampled { shots: 100 }, &mut rng, None).unwrap();
        assert_eq!((z.mean, z.std_error), (0.0, 0.0));
    }
}
