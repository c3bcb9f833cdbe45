//! Restricted Hartree–Fock in an orthonormal orbital basis.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{invalid, QbeError, Result};
use crate::integrals::IntegralSet;
use crate::linalg::Tensor4;

#[derive(Debug, Clone)]
pub struct MeanFieldSolution {
    /// Occupied orbital coefficients, `N × N_occ`.
    pub c_occ: DMatrix<f64>,
    /// All orbital coefficients, columns sorted by orbital energy.
    pub mo_coeff: DMatrix<f64>,
    pub orbital_energies: DVector<f64>,
    pub e_hf: f64,
    /// Spin-summed density matrix.
    pub density: DMatrix<f64>,
    pub n_elec: usize,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct ScfOptions {
    pub max_cycles: usize,
    pub e_tol: f64,
    pub d_tol: f64,
    pub damping: f64,
    pub damping_cycles: usize,
    pub diis_space: usize,
}

impl Default for ScfOptions {
    fn default() -> Self {
        Self { max_cycles: 200, e_tol: 1e-10, d_tol: 1e-8, damping: 0.3, damping_cycles: 3, diis_space: 8 }
    }
}

/// Coulomb and exchange matrices `J_pq = Σ (pq|rs) P_rs`, `K_pq = Σ (pr|qs) P_rs`.
pub fn coulomb_exchange(v: &Tensor4, p: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = v.dim();
    let mut j = DMatrix::zeros(n, n);
    let mut k = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            let (mut ja, mut ka) = (0.0, 0.0);
            for r in 0..n {
                for s in 0..n {
                    let d = p[(r, s)];
                    ja += v.get(a, b, r, s) * d;
                    ka += v.get(a, r, b, s) * d;
                }
            }
            j[(a, b)] = ja;
            k[(a, b)] = ka;
        }
    }
    (j, k)
}

/// Closed-shell mean-field potential `J − K/2` of a spin-summed density.
pub fn veff(v: &Tensor4, p: &DMatrix<f64>) -> DMatrix<f64> {
    let (j, k) = coulomb_exchange(v, p);
    j - k * 0.5
}

pub fn fock(ints: &IntegralSet, p: &DMatrix<f64>) -> DMatrix<f64> {
    &ints.h + veff(&ints.v, p)
}

/// `½ Tr[P(h + F)] + E_nuc`.
pub fn rhf_energy(ints: &IntegralSet, p: &DMatrix<f64>) -> f64 {
    let f = fock(ints, p);
    0.5 * p.component_mul(&(&ints.h + f)).sum() + ints.e_nuc
}

fn sorted_eigen(f: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(f.clone());
    let mut order: Vec<usize> = (0..f.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vecs = DMatrix::zeros(f.nrows(), f.ncols());
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).clone_owned();
        // deterministic sign: largest component positive
        let imax = col.iamax();
        if col[imax] < 0.0 {
            col = -col;
        }
        vecs.set_column(dst, &col);
    }
    (vals, vecs)
}

fn density_from(c: &DMatrix<f64>, nocc: usize) -> DMatrix<f64> {
    let occ = c.columns(0, nocc);
    occ * occ.transpose() * 2.0
}

struct Diis {
    focks: Vec<DMatrix<f64>>,
    errors: Vec<DMatrix<f64>>,
    cap: usize,
}

impl Diis {
    fn push(&mut self, f: DMatrix<f64>, e: DMatrix<f64>) {
        if self.focks.len() == self.cap {
            self.focks.remove(0);
            self.errors.remove(0);
        }
        self.focks.push(f);
        self.errors.push(e);
    }

    fn extrapolate(&self) -> Option<DMatrix<f64>> {
        let m = self.focks.len();
        if m < 2 {
            return None;
        }
        let mut b = DMatrix::zeros(m + 1, m + 1);
        let mut rhs = DVector::zeros(m + 1);
        for i in 0..m {
            for j in 0..m {
                b[(i, j)] = self.errors[i].dot(&self.errors[j]);
            }
            b[(i, m)] = -1.0;
            b[(m, i)] = -1.0;
        }
        rhs[m] = -1.0;
        let coef = b.lu().solve(&rhs)?;
        if coef.iter().any(|c| !c.is_finite()) {
            return None;
        }
        let mut f = DMatrix::zeros(self.focks[0].nrows(), self.focks[0].ncols());
        for i in 0..m {
            f += &self.focks[i] * coef[i];
        }
        Some(f)
    }
}

pub fn restricted_hartree_fock(ints: &IntegralSet, n_elec: usize) -> Result<MeanFieldSolution> {
    restricted_hartree_fock_with(ints, n_elec, &ScfOptions::default())
}

pub fn restricted_hartree_fock_with(ints: &IntegralSet, n_elec: usize, opts: &ScfOptions) -> Result<MeanFieldSolution> {
    let n = ints.n_orb();
    if !n_elec.is_multiple_of(2) {
        return invalid(format!("restricted HF needs an even electron count, got {n_elec}"));
    }
    if n_elec > 2 * n {
        return invalid(format!("{n_elec} electrons do not fit in {n} orbitals"));
    }
    let nocc = n_elec / 2;

    let (_, c0) = sorted_eigen(&ints.h);
    let mut p = density_from(&c0, nocc);
    let mut e_old = rhf_energy(ints, &p);
    let mut diis = Diis { focks: Vec::new(), errors: Vec::new(), cap: opts.diis_space.max(1) };
    let mut last_residual = f64::INFINITY;

    for cycle in 1..=opts.max_cycles {
        let f = fock(ints, &p);
        let err = &f * &p - &p * &f;
        last_residual = err.abs().max();
        diis.push(f.clone(), err);
        let f_use = if cycle > opts.damping_cycles { diis.extrapolate().unwrap_or(f) } else { f };
        let (_, c) = sorted_eigen(&f_use);
        let mut p_new = density_from(&c, nocc);
        if cycle <= opts.damping_cycles {
            p_new = &p_new * (1.0 - opts.damping) + &p * opts.damping;
        }
        let e_new = rhf_energy(ints, &p_new);
        let dp = (&p_new - &p).abs().max();
        let de = (e_new - e_old).abs();
        p = p_new;
        e_old = e_new;
        if cycle > opts.damping_cycles && de < opts.e_tol && dp < opts.d_tol {
            let f = fock(ints, &p);
            let (eps, c) = sorted_eigen(&f);
            let p_final = density_from(&c, nocc);
            return Ok(MeanFieldSolution {
                c_occ: c.columns(0, nocc).clone_owned(),
                e_hf: rhf_energy(ints, &p_final),
                density: p_final,
                mo_coeff: c,
                orbital_energies: eps,
                n_elec,
                iterations: cycle,
            });
        }
    }
    Err(QbeError::NotConverged {
        what: "restricted Hartree-Fock",
        iterations: opts.max_cycles,
        residual: last_residual,
    })
}
