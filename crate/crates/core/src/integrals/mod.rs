//! Hydrogen-chain integrals over contracted STO-3G 1s functions and their
//! Löwdin-orthogonalized counterparts.

mod fcidump;

pub use fcidump::{fcidump_read, fcidump_read_str, fcidump_write, fcidump_write_string, Fcidump};

use std::f64::consts::PI;

use nalgebra::{DMatrix, Vector3};

use crate::error::{invalid, QbeError, Result};
use crate::linalg::{inv_sqrt_sym, Tensor4};

const STO3G_H_EXPONENTS: [f64; 3] = [3.42525091, 0.62391373, 0.16885540];
const STO3G_H_COEFFS: [f64; 3] = [0.15432897, 0.53532814, 0.44463454];

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub element: String,
    /// Position in Bohr.
    pub position: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Molecule {
    pub atoms: Vec<Atom>,
    pub charge: i32,
    pub multiplicity: u32,
}

impl Molecule {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        if atoms.iter().any(|a| !a.position.iter().all(|x| x.is_finite())) {
            return invalid("atom position is not finite");
        }
        Ok(Self { atoms, charge: 0, multiplicity: 1 })
    }

    /// Total nuclear charge minus the molecular charge.
    pub fn n_electrons(&self) -> usize {
        let z: i64 = self.atoms.iter().map(|a| nuclear_charge(&a.element) as i64).sum();
        (z - self.charge as i64).max(0) as usize
    }

    pub fn nuclear_repulsion(&self) -> f64 {
        let mut e = 0.0;
        for (i, a) in self.atoms.iter().enumerate() {
            for b in &self.atoms[i + 1..] {
                let r = (a.position - b.position).norm();
                e += nuclear_charge(&a.element) * nuclear_charge(&b.element) / r;
            }
        }
        e
    }

    pub fn translated(&self, shift: Vector3<f64>) -> Self {
        let mut m = self.clone();
        for a in &mut m.atoms {
            a.position += shift;
        }
        m
    }
}

fn nuclear_charge(element: &str) -> f64 {
    if element.eq_ignore_ascii_case("H") {
        1.0
    } else {
        0.0
    }
}

/// `n` hydrogen atoms on the x axis, `spacing` Bohr apart, starting at the origin.
pub fn build_h_chain(n: usize, spacing: f64) -> Result<Molecule> {
    if n == 0 {
        return invalid("hydrogen chain needs at least one atom");
    }
    if !(spacing > 0.0) || !spacing.is_finite() {
        return invalid(format!("spacing must be positive and finite, got {spacing}"));
    }
    let atoms =
        (0..n).map(|i| Atom { element: "H".into(), position: Vector3::new(i as f64 * spacing, 0.0, 0.0) }).collect();
    Molecule::new(atoms)
}

/// Integrals in the non-orthogonal atomic-orbital basis.
#[derive(Debug, Clone)]
pub struct AOIntegrals {
    pub overlap: DMatrix<f64>,
    pub kinetic: DMatrix<f64>,
    pub nuclear: DMatrix<f64>,
    pub eri: Tensor4,
    pub e_nuc: f64,
}

impl AOIntegrals {
    pub fn n_basis(&self) -> usize {
        self.overlap.nrows()
    }

    pub fn core_hamiltonian(&self) -> DMatrix<f64> {
        &self.kinetic + &self.nuclear
    }
}

/// Integrals in an orthonormal orbital basis.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralSet {
    pub h: DMatrix<f64>,
    pub v: Tensor4,
    pub e_nuc: f64,
}

impl IntegralSet {
    pub fn new(h: DMatrix<f64>, v: Tensor4, e_nuc: f64) -> Result<Self> {
        if !h.is_square() || h.nrows() != v.dim() {
            return invalid("one- and two-electron integral dimensions differ");
        }
        Ok(Self { h, v, e_nuc })
    }

    pub fn n_orb(&self) -> usize {
        self.h.nrows()
    }
}

/// Zeroth-order Boys function.
pub fn boys_f0(t: f64) -> f64 {
    if t < 1e-8 {
        1.0 - t / 3.0
    } else {
        let st = t.sqrt();
        0.5 * (PI / t).sqrt() * libm::erf(st)
    }
}

#[derive(Clone, Copy)]
struct Primitive {
    alpha: f64,
    coef: f64,
}

fn contracted_1s() -> Vec<Primitive> {
    let prims: Vec<Primitive> = STO3G_H_EXPONENTS
        .iter()
        .zip(STO3G_H_COEFFS)
        .map(|(&a, c)| Primitive { alpha: a, coef: c * (2.0 * a / PI).powf(0.75) })
        .collect();
    let mut self_ov = 0.0;
    for a in &prims {
        for b in &prims {
            let p = a.alpha + b.alpha;
            self_ov += a.coef * b.coef * (PI / p).powf(1.5);
        }
    }
    let scale = 1.0 / self_ov.sqrt();
    prims.into_iter().map(|p| Primitive { alpha: p.alpha, coef: p.coef * scale }).collect()
}

/// STO-3G integrals for an all-hydrogen molecule.
pub fn sto3g_integrals(mol: &Molecule) -> Result<AOIntegrals> {
    if let Some(a) = mol.atoms.iter().find(|a| !a.element.eq_ignore_ascii_case("H")) {
        return Err(QbeError::UnsupportedElement(a.element.clone()));
    }
    let n = mol.atoms.len();
    let basis = contracted_1s();
    let centers: Vec<Vector3<f64>> = mol.atoms.iter().map(|a| a.position).collect();

    let mut s = DMatrix::zeros(n, n);
    let mut t = DMatrix::zeros(n, n);
    let mut vne = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let (a, b) = (centers[i], centers[j]);
            let rab2 = (a - b).norm_squared();
            let (mut sij, mut tij, mut vij) = (0.0, 0.0, 0.0);
            for pa in &basis {
                for pb in &basis {
                    let p = pa.alpha + pb.alpha;
                    let mu = pa.alpha * pb.alpha / p;
                    let k = (-mu * rab2).exp();
                    let c = pa.coef * pb.coef;
                    let ov = (PI / p).powf(1.5) * k;
                    sij += c * ov;
                    tij += c * mu * (3.0 - 2.0 * mu * rab2) * ov;
                    let pc = (a * pa.alpha + b * pb.alpha) / p;
                    for (atom, cpos) in mol.atoms.iter().zip(&centers) {
                        let z = nuclear_charge(&atom.element);
                        let t_arg = p * (pc - cpos).norm_squared();
                        vij -= c * z * 2.0 * PI / p * k * boys_f0(t_arg);
                    }
                }
            }
            s[(i, j)] = sij;
            t[(i, j)] = tij;
            vne[(i, j)] = vij;
        }
    }

    let sym = |m: DMatrix<f64>| (&m + m.transpose()) * 0.5;
    let (s, t, vne) = (sym(s), sym(t), sym(vne));

    let mut eri = Tensor4::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            for k in 0..n {
                for l in 0..=k {
                    if i * (i + 1) / 2 + j < k * (k + 1) / 2 + l {
                        continue;
                    }
                    let v = eri_contracted(&basis, [centers[i], centers[j], centers[k], centers[l]]);
                    eri.set_sym(i, j, k, l, v);
                }
            }
        }
    }

    Ok(AOIntegrals { overlap: s, kinetic: t, nuclear: vne, eri, e_nuc: mol.nuclear_repulsion() })
}

fn eri_contracted(basis: &[Primitive], c: [Vector3<f64>; 4]) -> f64 {
    let rab2 = (c[0] - c[1]).norm_squared();
    let rcd2 = (c[2] - c[3]).norm_squared();
    let mut acc = 0.0;
    for pa in basis {
        for pb in basis {
            let p = pa.alpha + pb.alpha;
            let kab = (-pa.alpha * pb.alpha / p * rab2).exp();
            let pc = (c[0] * pa.alpha + c[1] * pb.alpha) / p;
            for pcn in basis {
                for pd in basis {
                    let q = pcn.alpha + pd.alpha;
                    let kcd = (-pcn.alpha * pd.alpha / q * rcd2).exp();
                    let qc = (c[2] * pcn.alpha + c[3] * pd.alpha) / q;
                    let t = p * q / (p + q) * (pc - qc).norm_squared();
                    let pref = 2.0 * PI.powf(2.5) / (p * q * (p + q).sqrt());
                    acc += pa.coef * pb.coef * pcn.coef * pd.coef * pref * kab * kcd * boys_f0(t);
                }
            }
        }
    }
    acc
}

/// Transforms to the symmetric (Löwdin) orthonormal basis `S^{-1/2}`.
pub fn lowdin_orthogonalize(ao: &AOIntegrals) -> Result<IntegralSet> {
    let x = inv_sqrt_sym(&ao.overlap, 1e-10)?;
    let h = &x * ao.core_hamiltonian() * &x;
    let h = (&h + h.transpose()) * 0.5;
    let v = ao.eri.transform(&x).symmetrized();
    IntegralSet::new(h, v, ao.e_nuc)
}

/// Löwdin-orthogonalized STO-3G integrals of a uniform hydrogen chain.
pub fn h_chain_integrals(n: usize, spacing: f64) -> Result<IntegralSet> {
    let mol = build_h_chain(n, spacing)?;
    lowdin_orthogonalize(&sto3g_integrals(&mol)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_atom_is_normalized() {
        let mol = build_h_chain(1, 1.0).unwrap();
        let ao = sto3g_integrals(&mol).unwrap();
        assert!((ao.overlap[(0, 0)] - 1.0).abs() < 1e-10);
        assert_eq!(ao.e_nuc, 0.0);
    }

    #[test]
    fn rejects_bad_chains() {
        assert!(build_h_chain(0, 1.4).is_err());
        assert!(build_h_chain(3, 0.0).is_err());
        assert!(build_h_chain(3, -1.0).is_err());
    }

    #[test]
    fn rejects_other_elements() {
        let mol = Molecule::new(vec![Atom { element: "He".into(), position: Vector3::zeros() }]).unwrap();
        assert!(matches!(sto3g_integrals(&mol), Err(QbeError::UnsupportedElement(_))));
    }

    #[test]
    fn boys_branches_agree() {
        let t0: f64 = 1e-8;
        let closed = 0.5 * (PI / t0).sqrt() * libm::erf(t0.sqrt());
        assert!((boys_f0(0.999_999_9 * t0) - closed).abs() < 1e-14);
        assert!((boys_f0(t0) - closed).abs() < 1e-14);
        assert_eq!(boys_f0(0.0), 1.0);
        // F0(t) → √π/(2√t) for large t
        let t: f64 = 50.0;
        assert!((boys_f0(t) - 0.5 * (PI / t).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn identity_overlap_leaves_h_unchanged() {
        let mut ao = sto3g_integrals(&build_h_chain(2, 1.4).unwrap()).unwrap();
        ao.overlap = DMatrix::identity(2, 2);
        let ints = lowdin_orthogonalize(&ao).unwrap();
        assert!((ints.h - ao.core_hamiltonian()).abs().max() < 1e-14);
        assert!((ints.v.as_slice().iter().zip(ao.eri.as_slice())).all(|(a, b)| (a - b).abs() < 1e-14));
    }
}
