//! Density-matrix matching primitives: SWAP-test statistics, the quadratic
//! and linear mismatch measures, sample-count formulas and amplitude
//! estimation.

mod amplitude;

pub use amplitude::{amplitude_estimate_bs, amplitude_estimate_with, amplitude_estimation_calls, AeSchedule};

use rand::Rng as _;
use rand_distr::{Binomial, Distribution};

use crate::error::{invalid, Result};
use crate::qubits::{pauli_basis, QubitRDM};
use crate::rng::{seeded, Rng};

/// Result of an overlap measurement.
///
/// `value` estimates `Tr[ρ_A ρ_B]`; `amplitude` estimates `√p₀`, the
/// ancilla amplitude `√((1 + Tr[ρ_A ρ_B])/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapEstimate {
    pub value: f64,
    pub std_error: f64,
    pub amplitude: f64,
    pub amplitude_std_error: f64,
    pub shots_used: u64,
    pub eigensolver_calls: u64,
}

/// `Re Tr[ρ_A ρ_B]`.
pub fn overlap_trace(a: &QubitRDM, b: &QubitRDM) -> Result<f64> {
    if a.dim() != b.dim() {
        return invalid(format!("RDM dimensions differ: {} vs {}", a.dim(), b.dim()));
    }
    let n = a.dim();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += (a.matrix[(i, j)] * b.matrix[(j, i)]).re;
        }
    }
    Ok(acc)
}

/// Probability of the SWAP-test ancilla reading 0.
pub fn swap_probability(a: &QubitRDM, b: &QubitRDM) -> Result<f64> {
    Ok(0.5 * (1.0 + overlap_trace(a, b)?))
}

/// Draws `shots` SWAP-test outcomes at ancilla probability `p0`.
pub fn sample_swap_p0(p0: f64, shots: u64, rng: &mut Rng) -> Result<OverlapEstimate> {
    if shots == 0 {
        return invalid("SWAP test needs at least one shot");
    }
    let p0 = p0.clamp(0.0, 1.0);
    let zeros = Binomial::new(shots, p0).map_err(|e| crate::QbeError::InvalidArgument(e.to_string()))?.sample(rng);
    let n = shots as f64;
    let f = zeros as f64 / n;
    Ok(OverlapEstimate {
        value: 2.0 * f - 1.0,
        std_error: 2.0 * (f * (1.0 - f) / n).sqrt(),
        amplitude: f.sqrt(),
        amplitude_std_error: ((1.0 - f) / (4.0 * n)).sqrt(),
        shots_used: shots,
        eigensolver_calls: shots,
    })
}

pub fn sample_overlap_swap(a: &QubitRDM, b: &QubitRDM, shots: u64, seed: u64) -> Result<OverlapEstimate> {
    let p0 = swap_probability(a, b)?;
    sample_swap_p0(p0, shots, &mut seeded(seed))
}

/// Quadratic mismatch of one overlap region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MismatchEntry {
    pub q_quad: f64,
    pub std_error: f64,
    pub shots_used: u64,
    pub eigensolver_calls: u64,
}

/// `Tr[(ρ_A − ρ_B)²]` computed exactly.
pub fn quad_constraint_exact(a: &QubitRDM, b: &QubitRDM) -> Result<f64> {
    Ok(overlap_trace(a, a)? + overlap_trace(b, b)? - 2.0 * overlap_trace(a, b)?)
}

/// Estimates `Tr[ρ_A²] + Tr[ρ_B²] − 2 Tr[ρ_A ρ_B]` from three independent SWAP tests.
pub fn quad_constraint_sampled(a: &QubitRDM, b: &QubitRDM, shots_each: u64, rng: &mut Rng) -> Result<MismatchEntry> {
    let paa = sample_swap_p0(swap_probability(a, a)?, shots_each, rng)?;
    let pbb = sample_swap_p0(swap_probability(b, b)?, shots_each, rng)?;
    let pab = sample_swap_p0(swap_probability(a, b)?, shots_each, rng)?;
    Ok(combine(paa, pbb, pab))
}

/// Same as [`quad_constraint_sampled`] with amplitude estimation for each overlap.
pub fn quad_constraint_ae(
    a: &QubitRDM,
    b: &QubitRDM,
    epsilon: f64,
    delta: f64,
    rng: &mut Rng,
) -> Result<MismatchEntry> {
    let paa = amplitude_estimate_bs(swap_probability(a, a)?, epsilon, delta, rng)?;
    let pbb = amplitude_estimate_bs(swap_probability(b, b)?, epsilon, delta, rng)?;
    let pab = amplitude_estimate_bs(swap_probability(a, b)?, epsilon, delta, rng)?;
    Ok(combine(paa, pbb, pab))
}

fn combine(paa: OverlapEstimate, pbb: OverlapEstimate, pab: OverlapEstimate) -> MismatchEntry {
    MismatchEntry {
        q_quad: paa.value + pbb.value - 2.0 * pab.value,
        std_error: (paa.std_error.powi(2) + pbb.std_error.powi(2) + 4.0 * pab.std_error.powi(2)).sqrt(),
        shots_used: paa.shots_used + pbb.shots_used + pab.shots_used,
        eigensolver_calls: paa.eigensolver_calls + pbb.eigensolver_calls + pab.eigensolver_calls,
    }
}

/// `⟨Σ_α⟩_A − ⟨Σ_α⟩_B` over the non-identity Pauli strings of the region.
pub fn linear_constraints(a: &QubitRDM, b: &QubitRDM) -> Result<Vec<f64>> {
    if a.dim() != b.dim() {
        return invalid("RDM dimensions differ");
    }
    Ok(pauli_basis(a.m()).iter().map(|p| a.expectation(p) - b.expectation(p)).collect())
}

/// Per-Pauli tomography cost `⌈D (4^m − 1) / ε²⌉`.
pub fn nsamp_tomography(epsilon: f64, m: u32, d: f64) -> u64 {
    let terms = 4f64.powi(m as i32) - 1.0;
    ceil_count(d * terms / (epsilon * epsilon))
}

/// SWAP-test cost `⌈(1 − S²)/(8ε²)⌉`.
pub fn nsamp_swap(s: f64, epsilon: f64) -> u64 {
    ceil_count((1.0 - s * s).max(0.0) / 8.0 / (epsilon * epsilon))
}

/// Amplitude-estimation cost `⌈√2 ln²(1/ε) / (2 ln2 ε)⌉`.
pub fn nsamp_swap_ae(epsilon: f64) -> u64 {
    let l = (1.0 / epsilon).ln();
    ceil_count(std::f64::consts::SQRT_2 / (2.0 * std::f64::consts::LN_2 * epsilon) * l * l)
}

/// Ceiling that ignores floating-point noise just above an integer.
fn ceil_count(x: f64) -> u64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r as u64
    } else {
        x.ceil() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingMethod {
    Swap,
    SwapAe,
}

/// Shot budget for the next iteration given the previous overlap estimate.
pub fn adaptive_shots(prev_s: Option<f64>, target_eps: f64, method: SamplingMethod) -> u64 {
    match method {
        SamplingMethod::Swap => nsamp_swap(prev_s.unwrap_or(0.0).clamp(0.0, 1.0), target_eps),
        SamplingMethod::SwapAe => nsamp_swap_ae(target_eps),
    }
}

/// Random `2^m`-dimensional density matrix (mixture of random pure states).
pub fn random_density_matrix(m: usize, rng: &mut Rng) -> QubitRDM {
    use nalgebra::DMatrix;
    use num_complex::Complex64;
    let dim = 1usize << m;
    let rank = rng.random_range(1..=dim);
    let g = DMatrix::from_fn(dim, rank, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let mut rho = &g * g.adjoint();
    let tr = rho.trace();
    rho /= tr;
    QubitRDM::new((0..m).collect(), rho).expect("square 2^m matrix")
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use num_complex::Complex64;

    fn diag(p: &[f64]) -> QubitRDM {
        let m = p.len().trailing_zeros() as usize;
        QubitRDM::from_diagonal((0..m).collect(), p).unwrap()
    }

    #[test]
    fn swap_probability_limits() {
        assert!((swap_probability(&diag(&[1.0, 0.0]), &diag(&[1.0, 0.0])).unwrap() - 1.0).abs() < 1e-15);
        assert!((swap_probability(&diag(&[1.0, 0.0]), &diag(&[0.0, 1.0])).unwrap() - 0.5).abs() < 1e-15);
        assert!((swap_probability(&diag(&[0.5, 0.5]), &diag(&[0.5, 0.5])).unwrap() - 0.75).abs() < 1e-15);
        assert!(swap_probability(&diag(&[1.0, 0.0]), &diag(&[1.0, 0.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn certain_outcome_is_exact() {
        let a = diag(&[1.0, 0.0]);
        let est = sample_overlap_swap(&a, &a, 1000, 3).unwrap();
        assert_eq!(est.value, 1.0);
        assert_eq!(est.eigensolver_calls, 1000);
        assert!(sample_overlap_swap(&a, &a, 0, 3).is_err());
    }

    #[test]
    fn seeded_runs_are_identical() {
        let a = diag(&[0.7, 0.3]);
        let b = diag(&[0.2, 0.8]);
        assert_eq!(sample_overlap_swap(&a, &b, 5000, 11).unwrap(), sample_overlap_swap(&a, &b, 5000, 11).unwrap());
    }

    #[test]
    fn linear_constraint_single_qubit() {
        let d = linear_constraints(&diag(&[1.0, 0.0]), &diag(&[0.0, 1.0])).unwrap();
        assert_eq!(d, vec![0.0, 0.0, 2.0]);
        let z = linear_constraints(&diag(&[0.3, 0.7]), &diag(&[0.3, 0.7])).unwrap();
        assert!(z.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn sample_count_formulas() {
        assert_eq!(nsamp_tomography(0.1, 1, 1.0), 300);
        assert_eq!(nsamp_tomography(0.05, 1, 1.0), 1200);
        assert_eq!(nsamp_swap(0.0, 0.1), 13);
        assert_eq!(nsamp_swap(1.0, 0.1), 0);
        assert_eq!(nsamp_swap(0.4, 0.001), 105_000);
        assert_eq!(nsamp_swap_ae(0.1), 55);
        assert_eq!(nsamp_swap_ae(0.001), 48_679);
        let mut prev = u64::MAX;
        for k in 1..60 {
            let e = k as f64 / 61.0;
            let n = nsamp_swap_ae(e);
            assert!(n <= prev);
            prev = n;
        }
    }

    #[test]
    fn adaptive_defaults() {
        assert_eq!(adaptive_shots(None, 0.01, SamplingMethod::Swap), nsamp_swap(0.0, 0.01));
        assert!(
            adaptive_shots(Some(0.9), 0.01, SamplingMethod::Swap)
                < adaptive_shots(Some(0.1), 0.01, SamplingMethod::Swap)
        );
        assert_eq!(
            adaptive_shots(Some(0.1), 0.01, SamplingMethod::SwapAe),
            adaptive_shots(Some(0.9), 0.01, SamplingMethod::SwapAe)
        );
    }

    #[test]
    fn exact_quadratic_matches_dense() {
        let mut rng = seeded(5);
        for _ in 0..20 {
            let a = random_density_matrix(2, &mut rng);
            let b = random_density_matrix(2, &mut rng);
            let d: DMatrix<Complex64> = &a.matrix - &b.matrix;
            let dense = (&d * &d).trace().re;
            assert!((quad_constraint_exact(&a, &b).unwrap() - dense).abs() < 1e-12);
        }
        let a = random_density_matrix(2, &mut rng);
        assert!(quad_constraint_exact(&a, &a).unwrap().abs() < 1e-15);
    }
}
