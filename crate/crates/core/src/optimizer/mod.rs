//! Bootstrap-embedding optimization: edge potentials, the per-fragment
//! penalty cost and its gradients, the density mismatch, the partitioned
//! total energy, and the quadratic-penalty and linear-constraint loops.

mod inner;
mod outer;

pub use inner::{lbfgs, nelder_mead, InnerOptions, Minimum};
pub use outer::{
    minimize_fragment, qbe_linear, qbe_quadratic, BEState, FragmentMinimum, IterationRecord, LinearOptions, QbeOptions,
    QbeTrace,
};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{invalid, QbeError, Result};
use crate::fragment::{embed_all, fragment_chain, EmbeddingHamiltonian, Fragment};
use crate::integrals::{h_chain_integrals, IntegralSet};
use crate::linalg::{dot, projected_cg};
use crate::matching::{nsamp_swap, quad_constraint_ae, quad_constraint_sampled, MismatchEntry};
use crate::oracle::{OracleLedger, Purpose};
use crate::qubits::pauli_basis;
use crate::qubits::{
    excite2, sector_1rdm, sector_ground_state, sector_region_probabilities, Pauli, PauliOperator, PauliString,
    QubitRDM, SectorHamiltonian, Statevector, MAX_QUBITS,
};
use crate::rng::Rng;
use crate::scf::{restricted_hartree_fock, veff, MeanFieldSolution};
use rand_distr::{Binomial, Distribution};

/// Diagonal of a one-site (α, β) qubit RDM in the order `|00⟩, |α⟩, |β⟩, |αβ⟩`.
/// Off-diagonal elements vanish for states of fixed `N` and `S_z`.
pub type SiteRdm = [f64; 4];

const CG_TOL: f64 = 1e-12;
const CG_MAX_ITER: usize = 2000;

fn c1(x: f64) -> num_complex::Complex64 {
    num_complex::Complex64::new(x, 0.0)
}

/// `Tr[(ρ_A − ρ_B)²]` for two site RDMs.
pub fn site_mismatch(a: &SiteRdm, b: &SiteRdm) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn site_rdm_to_qubit(qubits: Vec<usize>, p: &SiteRdm) -> QubitRDM {
    QubitRDM::from_diagonal(qubits, p).expect("four probabilities on two qubits")
}

/// Edge potential `Σ_α v_α Σ_α` on the edge-site qubits of one fragment.
#[derive(Debug, Clone, PartialEq)]
pub struct VbePotential {
    pub fragment: usize,
    pub generators: Vec<PauliString>,
    pub coefficients: Vec<f64>,
}

impl VbePotential {
    /// X, Y, Z on each spin qubit of every edge site plus `Z_α Z_β` per site.
    pub fn for_edges(fragment: usize, local_edges: &[usize]) -> Self {
        let mut generators = Vec::with_capacity(7 * local_edges.len());
        for &e in local_edges {
            let (a, b) = (2 * e, 2 * e + 1);
            for q in [a, b] {
                generators.extend([Pauli::X, Pauli::Y, Pauli::Z].map(|p| PauliString::single(q, p)));
            }
            generators.push(PauliString::from_ops(&[(a, Pauli::Z), (b, Pauli::Z)]));
        }
        let n = generators.len();
        Self { fragment, generators, coefficients: vec![0.0; n] }
    }

    pub fn m(&self) -> usize {
        self.generators.len()
    }

    pub fn norm_inf(&self) -> f64 {
        self.coefficients.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_operator(&self, n_qubits: usize) -> PauliOperator {
        let terms = self
            .generators
            .iter()
            .zip(&self.coefficients)
            .filter(|(_, &v)| v != 0.0)
            .map(|(g, &v)| (c1(v), *g))
            .collect();
        PauliOperator { n_qubits, terms }
    }
}

/// `H + V_BE` as a canonical Pauli operator.
pub fn apply_vbe(op: &PauliOperator, v: &VbePotential) -> Result<PauliOperator> {
    if v.generators.iter().any(|g| g.support() >> op.n_qubits != 0) {
        return invalid("potential acts outside the operator's register");
    }
    if v.coefficients.len() != v.generators.len() {
        return invalid("potential has mismatched coefficient count");
    }
    Ok(op.add(&v.to_operator(op.n_qubits)).canonicalize(0.0))
}

/// One matched site: an edge of this fragment that is a center of `neighbor`.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub neighbor: usize,
    pub site: usize,
    /// Embedding-orbital index of the site inside this fragment.
    pub local: usize,
}

impl Region {
    pub fn qubits(&self) -> [usize; 2] {
        [2 * self.local, 2 * self.local + 1]
    }
}

/// A fragment's sector Hamiltonian with everything the optimizer needs
/// precomputed on the determinant basis.
#[derive(Debug, Clone)]
pub struct FragmentProblem {
    pub fragment: Fragment,
    pub emb: EmbeddingHamiltonian,
    pub ham: SectorHamiltonian,
    pub regions: Vec<Region>,
    template: VbePotential,
    /// Generator indices that act within the particle-number sector.
    active: Vec<usize>,
    /// Diagonals of the active generators.
    gen_diag: Vec<Vec<f64>>,
    center_number: Vec<f64>,
}

/// Ground state of `H + V_BE + μ N_C` and the quantities read off it.
#[derive(Debug, Clone, PartialEq)]
pub struct FragmentSolution {
    pub coeffs: Vec<f64>,
    /// Eigenvalue of `H + V_BE + μ N_C`.
    pub eigenvalue: f64,
    /// `⟨H + μ N_C⟩` without the edge potential.
    pub h0_energy: f64,
    pub edge_rdms: Vec<SiteRdm>,
    pub center_count: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShotPolicy {
    Exact,
    /// Plain SWAP tests sized for precision `epsilon` on each overlap.
    Swap {
        epsilon: f64,
    },
    /// Amplitude-estimated SWAP tests.
    SwapAe {
        epsilon: f64,
        delta: f64,
    },
    /// Per-Pauli estimation of the fragment's region RDM with `⌈D/ε²⌉`
    /// shots per string.
    Tomography {
        epsilon: f64,
        d: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostValue {
    pub value: f64,
    pub energy: f64,
    pub penalty: f64,
    pub std_error: f64,
    pub eigensolver_calls: u64,
    pub shots: u64,
}

impl FragmentProblem {
    pub fn new(fragment: Fragment, emb: EmbeddingHamiltonian) -> Result<Self> {
        if 2 * emb.n_emb > MAX_QUBITS {
            return Err(QbeError::Resource(format!(
                "fragment {} needs {} qubits (limit {MAX_QUBITS})",
                fragment.id,
                2 * emb.n_emb
            )));
        }
        let ham = SectorHamiltonian::for_embedding(&emb)?;
        let mut regions = Vec::new();
        for o in &fragment.overlaps {
            for &s in &o.sites {
                let local = fragment
                    .local_index(s)
                    .ok_or_else(|| QbeError::InvalidArgument(format!("overlap site {s} outside fragment")))?;
                regions.push(Region { neighbor: o.neighbor, site: s, local });
            }
        }
        let template = VbePotential::for_edges(fragment.id, &fragment.local_edges());
        let active: Vec<usize> = (0..template.m()).filter(|&i| template.generators[i].is_diagonal()).collect();
        let gen_diag = active
            .iter()
            .map(|&i| {
                let z = template.generators[i].z;
                let qs: Vec<usize> = (0..64).filter(|q| z >> q & 1 == 1).collect();
                ham.sector.z_diagonal(&qs)
            })
            .collect();
        let mut center_number = vec![0.0; ham.dim()];
        for c in fragment.local_centers() {
            for q in [2 * c, 2 * c + 1] {
                for (x, n) in center_number.iter_mut().zip(ham.sector.occupation_diagonal(q)) {
                    *x += n;
                }
            }
        }
        Ok(Self { fragment, emb, ham, regions, template, active, gen_diag, center_number })
    }

    /// Zero potential with this fragment's generator set.
    pub fn zero_potential(&self) -> VbePotential {
        self.template.clone()
    }

    pub fn n_active(&self) -> usize {
        self.active.len()
    }

    /// Active coefficients of a full potential.
    pub fn active_coefficients(&self, v: &VbePotential) -> Vec<f64> {
        self.active.iter().map(|&i| v.coefficients[i]).collect()
    }

    pub fn with_active(&self, x: &[f64]) -> VbePotential {
        let mut v = self.template.clone();
        for (&i, &xi) in self.active.iter().zip(x) {
            v.coefficients[i] = xi;
        }
        v
    }

    fn check_potential(&self, v: &VbePotential) -> Result<()> {
        if v.generators != self.template.generators || v.coefficients.len() != v.generators.len() {
            return invalid("potential does not belong to this fragment");
        }
        for (i, &c) in v.coefficients.iter().enumerate() {
            if c != 0.0 && !self.template.generators[i].is_diagonal() {
                return invalid(format!(
                    "generator {} does not conserve particle number",
                    self.template.generators[i].label(2 * self.emb.n_emb)
                ));
            }
        }
        Ok(())
    }

    fn shift(&self, x: &[f64], mu: f64) -> Vec<f64> {
        let mut s: Vec<f64> = self.center_number.iter().map(|n| mu * n).collect();
        for (d, &xi) in self.gen_diag.iter().zip(x) {
            if xi != 0.0 {
                for (si, di) in s.iter_mut().zip(d) {
                    *si += xi * di;
                }
            }
        }
        s
    }

    /// Probabilities of the site configurations of a local orbital.
    pub fn site_rdm(&self, coeffs: &[f64], local: usize) -> SiteRdm {
        let p = sector_region_probabilities(&self.ham.sector, coeffs, &[2 * local, 2 * local + 1]);
        [p[0], p[1], p[2], p[3]]
    }

    /// Site RDM of a global orbital that is a center of this fragment.
    pub fn center_rdm(&self, coeffs: &[f64], site: usize) -> Result<SiteRdm> {
        if !self.fragment.centers.contains(&site) {
            return invalid(format!("site {site} is not a center of fragment {}", self.fragment.id));
        }
        Ok(self.site_rdm(coeffs, self.fragment.local_index(site).expect("center inside fragment")))
    }

    /// Ground state at active coefficients `x` and chemical potential `mu`.
    pub fn solve_active(&self, x: &[f64], mu: f64, start: Option<&[f64]>) -> Result<FragmentSolution> {
        let shift = self.shift(x, mu);
        let ep = sector_ground_state(&self.ham, &shift, start)?;
        let coeffs = ep.vector;
        let vexp: f64 = self
            .gen_diag
            .iter()
            .zip(x)
            .map(|(d, xi)| xi * coeffs.iter().zip(d).map(|(c, di)| c * c * di).sum::<f64>())
            .sum();
        let edge_rdms = self.regions.iter().map(|r| self.site_rdm(&coeffs, r.local)).collect();
        let center_count = coeffs.iter().zip(&self.center_number).map(|(c, n)| c * c * n).sum();
        Ok(FragmentSolution { eigenvalue: ep.value, h0_energy: ep.value - vexp, edge_rdms, center_count, coeffs })
    }

    pub fn solve(&self, v: &VbePotential, mu: f64, start: Option<&[f64]>) -> Result<FragmentSolution> {
        self.check_potential(v)?;
        self.solve_active(&self.active_coefficients(v), mu, start)
    }

    pub fn statevector(&self, sol: &FragmentSolution) -> Result<Statevector> {
        Statevector::from_sector(&self.ham.sector, &sol.coeffs)
    }

    /// Exact penalty `Σ_r Tr[(ρ_r − ρ_r^target)²]`.
    pub fn exact_penalty(&self, sol: &FragmentSolution, targets: &[SiteRdm]) -> f64 {
        sol.edge_rdms.iter().zip(targets).map(|(a, b)| site_mismatch(a, b)).sum()
    }

    /// Solves `(H' − E₀) y = Q b ψ` for a diagonal `b`.
    fn response(&self, x: &[f64], mu: f64, sol: &FragmentSolution, b: &[f64]) -> Result<Vec<f64>> {
        let shift = self.shift(x, mu);
        let psi = &sol.coeffs;
        let mut rhs: Vec<f64> = psi.iter().zip(b).map(|(p, bi)| p * bi).collect();
        let proj = dot(&rhs, psi);
        for (r, p) in rhs.iter_mut().zip(psi) {
            *r -= proj * p;
        }
        let (y, _) = projected_cg(|u, w| self.ham.apply(&shift, u, w), sol.eigenvalue, psi, &rhs, CG_TOL, CG_MAX_ITER)?;
        Ok(y)
    }

    /// Diagonal of `F = ∂L/∂⟨ψ|` beyond `H₀`: `Σ_r Σ_k 2λ (p_rk − t_rk) Π_rk`.
    fn penalty_diagonal(&self, sol: &FragmentSolution, lambda: f64, targets: &[SiteRdm]) -> Vec<f64> {
        let mut f = vec![0.0; self.ham.dim()];
        for ((r, p), t) in self.regions.iter().zip(&sol.edge_rdms).zip(targets) {
            let w: [f64; 4] = std::array::from_fn(|k| 2.0 * lambda * (p[k] - t[k]));
            let (qa, qb) = (2 * r.local, 2 * r.local + 1);
            for (fi, &d) in f.iter_mut().zip(&self.ham.sector.dets) {
                let k = ((d >> qa) & 1 | ((d >> qb) & 1) << 1) as usize;
                *fi += w[k];
            }
        }
        f
    }

    /// Gradient of the exact-mode cost with respect to the active
    /// coefficients, by one linear-response solve.
    pub fn cost_gradient(
        &self,
        x: &[f64],
        mu: f64,
        lambda: f64,
        targets: &[SiteRdm],
        sol: &FragmentSolution,
    ) -> Result<Vec<f64>> {
        // F ψ = (H' − V + f) ψ; the H' part is parallel to ψ and drops out.
        let mut b = self.penalty_diagonal(sol, lambda, targets);
        for (d, &xi) in self.gen_diag.iter().zip(x) {
            for (bi, di) in b.iter_mut().zip(d) {
                *bi -= xi * di;
            }
        }
        let y = self.response(x, mu, sol, &b)?;
        Ok(self
            .gen_diag
            .iter()
            .map(|d| -2.0 * sol.coeffs.iter().zip(d).zip(&y).map(|((p, di), yi)| p * di * yi).sum::<f64>())
            .collect())
    }

    /// Static response `∂⟨Σ_α⟩/∂v_β` of the active generators.
    pub fn generator_response(&self, x: &[f64], mu: f64, sol: &FragmentSolution) -> Result<DMatrix<f64>> {
        let n = self.n_active();
        let mut chi = DMatrix::zeros(n, n);
        for b in 0..n {
            let y = self.response(x, mu, sol, &self.gen_diag[b])?;
            for a in 0..n {
                chi[(a, b)] =
                    -2.0 * sol.coeffs.iter().zip(&self.gen_diag[a]).zip(&y).map(|((p, d), yi)| p * d * yi).sum::<f64>();
            }
        }
        Ok((&chi + chi.transpose()) * 0.5)
    }

    /// `∂⟨N_C⟩/∂μ`.
    pub fn number_response(&self, x: &[f64], mu: f64, sol: &FragmentSolution) -> Result<f64> {
        let y = self.response(x, mu, sol, &self.center_number)?;
        Ok(-2.0 * sol.coeffs.iter().zip(&self.center_number).zip(&y).map(|((p, n), yi)| p * n * yi).sum::<f64>())
    }

    /// `⟨Σ_α⟩` of the active generators.
    pub fn generator_expectations(&self, coeffs: &[f64]) -> Vec<f64> {
        self.gen_diag.iter().map(|d| coeffs.iter().zip(d).map(|(c, di)| c * c * di).sum()).collect()
    }

    /// `⟨Σ_α⟩` of the active generators evaluated on target site RDMs.
    pub fn generator_targets(&self, targets: &[SiteRdm]) -> Result<Vec<f64>> {
        self.active
            .iter()
            .map(|&i| {
                let g = self.template.generators[i];
                let r = self
                    .regions
                    .iter()
                    .position(|r| g.z & !(0b11 << (2 * r.local)) == 0)
                    .ok_or_else(|| QbeError::InvalidArgument("generator without a matched region".into()))?;
                let za = g.z >> (2 * self.regions[r].local) & 1 == 1;
                let zb = g.z >> (2 * self.regions[r].local + 1) & 1 == 1;
                let t = &targets[r];
                Ok((0..4)
                    .map(|k| {
                        let mut s = 1.0;
                        if za && k & 1 == 1 {
                            s = -s;
                        }
                        if zb && k & 2 == 2 {
                            s = -s;
                        }
                        s * t[k]
                    })
                    .sum())
            })
            .collect()
    }
}

/// Quadratic-penalty cost of one fragment:
/// `⟨H + μN_C⟩ + λ Σ_r Q_quad(ρ_r, ρ_r^target)`.
#[allow(clippy::too_many_arguments)]
pub fn cost_function(
    problem: &FragmentProblem,
    v: &VbePotential,
    mu: f64,
    lambda: f64,
    targets: &[SiteRdm],
    policy: ShotPolicy,
    rng: &mut Rng,
    ledger: Option<&OracleLedger>,
) -> Result<CostValue> {
    let sol = problem.solve(v, mu, None)?;
    evaluate_cost(problem, &sol, lambda, targets, policy, rng, ledger)
}

/// `Tr[(ρ̂_A − ρ_B)²] = 2^{-m} Σ_α (⟨Σ_α⟩_A − ⟨Σ_α⟩_B)²` with every
/// `⟨Σ_α⟩_A` estimated from its own binomial sample; the target is taken as known.
fn tomography_mismatch(a: &QubitRDM, b: &QubitRDM, epsilon: f64, d: f64, rng: &mut Rng) -> Result<MismatchEntry> {
    if !(epsilon > 0.0) || !(d > 0.0) {
        return invalid(format!("tomography needs positive epsilon and D, got {epsilon} and {d}"));
    }
    let per = ((d / (epsilon * epsilon)).ceil() as u64).max(1);
    let mut sum = 0.0;
    let mut var = 0.0;
    let strings = pauli_basis(a.m());
    for s in &strings {
        let e = a.expectation(s).clamp(-1.0, 1.0);
        let plus = Binomial::new(per, 0.5 * (1.0 + e)).map_err(|err| QbeError::Numerical(err.to_string()))?.sample(rng);
        let est = 2.0 * plus as f64 / per as f64 - 1.0;
        let diff = est - b.expectation(s);
        sum += diff * diff;
        var += 4.0 * diff * diff * (1.0 - est * est).max(0.0) / per as f64;
    }
    let scale = 1.0 / a.dim() as f64;
    let n = per * strings.len() as u64;
    Ok(MismatchEntry { q_quad: scale * sum, std_error: scale * var.sqrt(), shots_used: n, eigensolver_calls: n })
}

pub(crate) fn evaluate_cost(
    problem: &FragmentProblem,
    sol: &FragmentSolution,
    lambda: f64,
    targets: &[SiteRdm],
    policy: ShotPolicy,
    rng: &mut Rng,
    ledger: Option<&OracleLedger>,
) -> Result<CostValue> {
    if targets.len() != problem.regions.len() {
        return invalid(format!(
            "fragment {} has {} matched sites but {} targets were given",
            problem.fragment.id,
            problem.regions.len(),
            targets.len()
        ));
    }
    let mut calls = 1;
    let mut shots = 0;
    let mut var = 0.0;
    if let Some(l) = ledger {
        l.record(Purpose::Energy, 1);
    }
    let penalty: f64 = match policy {
        ShotPolicy::Exact => problem.exact_penalty(sol, targets),
        _ => {
            let mut total = 0.0;
            for ((r, p), t) in problem.regions.iter().zip(&sol.edge_rdms).zip(targets) {
                let a = site_rdm_to_qubit(r.qubits().to_vec(), p);
                let b = site_rdm_to_qubit(r.qubits().to_vec(), t);
                let (entry, purpose) = match policy {
                    ShotPolicy::SwapAe { epsilon, delta } => {
                        (quad_constraint_ae(&a, &b, epsilon, delta, rng)?, Purpose::Amplification)
                    }
                    ShotPolicy::Tomography { epsilon, d } => {
                        (tomography_mismatch(&a, &b, epsilon, d, rng)?, Purpose::Tomography)
                    }
                    ShotPolicy::Swap { epsilon } => {
                        let purity: f64 = t.iter().map(|x| x * x).sum();
                        (quad_constraint_sampled(&a, &b, nsamp_swap(purity, epsilon).max(1), rng)?, Purpose::Swap)
                    }
                    ShotPolicy::Exact => unreachable!("handled above"),
                };
                if let Some(l) = ledger {
                    l.record(purpose, entry.eigensolver_calls);
                }
                calls += entry.eigensolver_calls;
                shots += entry.shots_used;
                var += entry.std_error * entry.std_error;
                total += entry.q_quad;
            }
            total
        }
    };
    Ok(CostValue {
        value: sol.h0_energy + lambda * penalty,
        energy: sol.h0_energy,
        penalty,
        std_error: lambda * var.sqrt(),
        eigensolver_calls: calls,
        shots,
    })
}

/// Cost gradient from the full spectrum of the sector Hamiltonian:
/// `g_α = −2 Σ_{n>0} ⟨ψ|Σ_α|n⟩⟨n|F|ψ⟩ / (E_n − E₀)` with
/// `F = H + μN_C + Σ_r 2λ (ρ_r − ρ_r^target) ⊗ I`. Entries for generators
/// that change particle number are zero: their matrix elements connect only
/// to other sectors, where `⟨n|F|ψ⟩` vanishes.
pub fn exact_penalty_gradient(
    problem: &FragmentProblem,
    v: &VbePotential,
    mu: f64,
    lambda: f64,
    targets: &[SiteRdm],
) -> Result<Vec<f64>> {
    const MAX_EXACT_QUBITS: usize = 8;
    const GAP_GUARD: f64 = 1e-10;
    if problem.ham.sector.n_qubits() > MAX_EXACT_QUBITS {
        return Err(QbeError::Resource(format!(
            "full diagonalization limited to {MAX_EXACT_QUBITS} qubits, fragment has {}",
            problem.ham.sector.n_qubits()
        )));
    }
    problem.check_potential(v)?;
    if targets.len() != problem.regions.len() {
        return invalid("target count does not match matched sites");
    }
    let x = problem.active_coefficients(v);
    let shift = problem.shift(&x, mu);
    let mut h = problem.ham.matrix.to_dense();
    for (i, s) in shift.iter().enumerate() {
        h[(i, i)] += s;
    }
    let eig = SymmetricEigen::new(h.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let e0 = eig.eigenvalues[order[0]];
    if order.len() > 1 && eig.eigenvalues[order[1]] - e0 < GAP_GUARD {
        return Err(QbeError::Numerical(format!(
            "ground state is degenerate to within {GAP_GUARD:e}; the gradient is undefined"
        )));
    }
    let psi: Vec<f64> = eig.eigenvectors.column(order[0]).iter().copied().collect();
    let sol = FragmentSolution {
        edge_rdms: problem.regions.iter().map(|r| problem.site_rdm(&psi, r.local)).collect(),
        coeffs: psi.clone(),
        eigenvalue: e0,
        h0_energy: 0.0,
        center_count: 0.0,
    };
    // F ψ with H₀ = H' − V
    let mut fdiag = problem.penalty_diagonal(&sol, lambda, targets);
    for (d, &xi) in problem.gen_diag.iter().zip(&x) {
        for (f, di) in fdiag.iter_mut().zip(d) {
            *f -= xi * di;
        }
    }
    let hpsi = &h * nalgebra::DVector::from_column_slice(&psi);
    let fpsi: Vec<f64> = hpsi.iter().zip(&psi).zip(&fdiag).map(|((hp, p), f)| hp + f * p).collect();

    let mut g_active = vec![0.0; x.len()];
    for &n in &order[1..] {
        let cn = eig.eigenvectors.column(n);
        let denom = eig.eigenvalues[n] - e0;
        let nf: f64 = cn.iter().zip(&fpsi).map(|(a, b)| a * b).sum();
        for (ga, d) in g_active.iter_mut().zip(&problem.gen_diag) {
            let w: f64 = cn.iter().zip(d).zip(&psi).map(|((a, di), p)| a * di * p).sum();
            *ga -= 2.0 * w * nf / denom;
        }
    }
    let mut g = vec![0.0; v.m()];
    for (&i, gi) in problem.active.iter().zip(g_active) {
        g[i] = gi;
    }
    Ok(g)
}

/// Fragments of a molecule with their embedding problems.
#[derive(Debug, Clone)]
pub struct BeSystem {
    pub problems: Vec<FragmentProblem>,
    pub n_elec: usize,
    pub e_nuc: f64,
    pub mean_field: MeanFieldSolution,
}

impl BeSystem {
    pub fn new(ints: &IntegralSet, mf: MeanFieldSolution, fragments: Vec<Fragment>) -> Result<Self> {
        let embs = embed_all(ints, &mf, &fragments)?;
        let problems =
            fragments.into_iter().zip(embs).map(|(f, e)| FragmentProblem::new(f, e)).collect::<Result<Vec<_>>>()?;
        for p in &problems {
            for r in &p.regions {
                if r.neighbor >= problems.len() || problems[r.neighbor].fragment.id != r.neighbor {
                    return invalid("fragment ids must equal their positions");
                }
            }
        }
        Ok(Self { problems, n_elec: mf.n_elec, e_nuc: ints.e_nuc, mean_field: mf })
    }

    /// Hydrogen chain with restricted Hartree–Fock embedding.
    pub fn h_chain(n_atoms: usize, spacing: f64, window: usize) -> Result<Self> {
        let ints = h_chain_integrals(n_atoms, spacing)?;
        let mf = restricted_hartree_fock(&ints, n_atoms)?;
        Self::new(&ints, mf, fragment_chain(n_atoms, window)?)
    }

    /// Center-site RDMs of the neighbors, per matched site of every fragment.
    pub fn targets(&self, solutions: &[FragmentSolution]) -> Result<Vec<Vec<SiteRdm>>> {
        self.problems
            .iter()
            .map(|p| {
                p.regions
                    .iter()
                    .map(|r| self.problems[r.neighbor].center_rdm(&solutions[r.neighbor].coeffs, r.site))
                    .collect()
            })
            .collect()
    }

    /// Edge/center RDM pairs over every matched site.
    pub fn mismatch_pairs(&self, solutions: &[FragmentSolution]) -> Result<Vec<(SiteRdm, SiteRdm)>> {
        let targets = self.targets(solutions)?;
        Ok(solutions
            .iter()
            .zip(&targets)
            .flat_map(|(s, t)| s.edge_rdms.iter().copied().zip(t.iter().copied()))
            .collect())
    }

    pub fn delta_rho(&self, solutions: &[FragmentSolution]) -> Result<f64> {
        let pairs = self.mismatch_pairs(solutions)?;
        if pairs.is_empty() {
            return Ok(0.0);
        }
        let s: f64 = pairs.iter().map(|(a, b)| site_mismatch(a, b)).sum();
        Ok((s / pairs.len() as f64).sqrt())
    }

    pub fn total_center_count(&self, solutions: &[FragmentSolution]) -> f64 {
        solutions.iter().map(|s| s.center_count).sum()
    }

    pub fn total_energy(&self, solutions: &[FragmentSolution]) -> EnergyReport {
        let parts: Vec<(f64, f64)> =
            self.problems.iter().zip(solutions).map(|(p, s)| fragment_energy(p, &s.coeffs)).collect();
        EnergyReport {
            total: parts.iter().map(|p| p.0).sum::<f64>() + self.e_nuc,
            fragment_contributions: parts.iter().map(|p| p.0).collect(),
            core_contributions: parts.iter().map(|p| p.1).collect(),
            e_nuc: self.e_nuc,
        }
    }
}

/// Root-mean-square mismatch `√(Σ Tr[(ρ_B − ρ_A)²] / N_sites)` over region pairs.
pub fn delta_rho(pairs: &[(QubitRDM, QubitRDM)]) -> Result<f64> {
    if pairs.is_empty() {
        return Ok(0.0);
    }
    let mut s = 0.0;
    for (a, b) in pairs {
        if a.dim() != b.dim() {
            return invalid("paired RDMs have different dimensions");
        }
        let d = &a.matrix - &b.matrix;
        s += (&d * &d).trace().re;
    }
    Ok((s / pairs.len() as f64).sqrt())
}

/// Total energy assembled from center-site rows of each fragment.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub total: f64,
    /// Center-row energy of each fragment (electronic, without `E_nuc`).
    pub fragment_contributions: Vec<f64>,
    /// Part of each contribution due to the frozen core potential.
    pub core_contributions: Vec<f64>,
    pub e_nuc: f64,
}

/// Center-row one-body energy `Σ_{p∈C} Σ_q (h + ½V_core)_pq γ_qp` and the
/// core part of it.
pub fn center_one_body(emb: &EmbeddingHamiltonian, centers: &[usize], gamma: &DMatrix<f64>) -> (f64, f64) {
    let (mut e, mut core) = (0.0, 0.0);
    for &p in centers {
        for q in 0..emb.n_emb {
            e += (emb.h_bare[(p, q)] + 0.5 * emb.veff_core[(p, q)]) * gamma[(q, p)];
            core += 0.5 * emb.veff_core[(p, q)] * gamma[(q, p)];
        }
    }
    (e, core)
}

/// Center-row energy of a mean-field density: two-body rows are `½ (V_eff[γ] γ)_pp`.
pub fn mean_field_center_energy(emb: &EmbeddingHamiltonian, centers: &[usize], gamma: &DMatrix<f64>) -> f64 {
    let (e1, _) = center_one_body(emb, centers, gamma);
    let g = veff(&emb.v, gamma) * gamma;
    e1 + centers.iter().map(|&p| 0.5 * g[(p, p)]).sum::<f64>()
}

/// `(E_A, core part)` for a fragment state given by sector coefficients.
pub fn fragment_energy(problem: &FragmentProblem, coeffs: &[f64]) -> (f64, f64) {
    let centers = problem.fragment.local_centers();
    let sector = &problem.ham.sector;
    let gamma = sector_1rdm(sector, coeffs).spin_summed();
    let (e1, core) = center_one_body(&problem.emb, &centers, &gamma);

    let nso = sector.n_qubits();
    let v = &problem.emb.v;
    let mut e2 = 0.0;
    for (j, &d) in sector.dets.iter().enumerate() {
        let cj = coeffs[j];
        if cj == 0.0 {
            continue;
        }
        for q in 0..nso {
            if d >> q & 1 == 0 {
                continue;
            }
            for s in 0..nso {
                if s == q || d >> s & 1 == 0 {
                    continue;
                }
                for &pc in &centers {
                    let p = 2 * pc + q % 2;
                    for r in (s % 2..nso).step_by(2) {
                        let val = v.get(p / 2, q / 2, r / 2, s / 2);
                        if val == 0.0 {
                            continue;
                        }
                        if let Some((d2, sg)) = excite2(d, p, q, r, s) {
                            if let Some(i) = sector.index_of(d2) {
                                e2 += 0.5 * val * coeffs[i] * cj * sg;
                            }
                        }
                    }
                }
            }
        }
    }
    (e1 + e2, core)
}

#[cfg(test)]
mod tests;
