//! Integrals, mean-field and embedding checks against reference values
//! produced by an independent quantum-chemistry package (PySCF 2.14,
//! STO-3G, H–H spacing 1.4 Bohr).

use nalgebra::{DMatrix, Vector3};
use qbe::fragment::{project_embedding_hamiltonian, schmidt_bath, EmbeddingHamiltonian, Fragment};
use qbe::integrals::{
    build_h_chain, fcidump_read, fcidump_read_str, fcidump_write_string, h_chain_integrals, lowdin_orthogonalize,
    sto3g_integrals,
};
use qbe::qubits::ground_state;
use qbe::scf::restricted_hartree_fock;

const REF_H2_S12: f64 = 0.659318206134864;
const REF_H2_EHF: f64 = -1.116714325062551;
const REF_H2_EFCI: f64 = -1.1372759436170439;
const REF_H4_EHF: f64 = -2.098382406129802;
const REF_H4_EFCI: f64 = -2.1394425490600475;
const REF_H8_EHF: f64 = -4.06498398520522;
const REF_H8_EFCI: f64 = -4.14942419459936;

fn fci(ints: &qbe::integrals::IntegralSet, n_elec: usize) -> f64 {
    let emb = EmbeddingHamiltonian::from_integrals(ints, n_elec);
    ground_state(&emb, n_elec, 0).unwrap().0.energy
}

#[test]
fn chain_geometry_and_nuclear_repulsion() {
    let mol = build_h_chain(8, 1.4).unwrap();
    for w in mol.atoms.windows(2) {
        assert!(((w[1].position - w[0].position).norm() - 1.4).abs() < 1e-14);
    }
    let mol4 = build_h_chain(4, 1.4).unwrap();
    let mut brute = 0.0;
    for i in 0..4 {
        for j in i + 1..4 {
            brute += 1.0 / (1.4 * (j - i) as f64);
        }
    }
    assert!((mol4.nuclear_repulsion() - brute).abs() < 1e-14);
    assert_eq!(build_h_chain(1, 3.0).unwrap().atoms[0].position, Vector3::zeros());
}

#[test]
fn h2_overlap_matches_reference() {
    let ao = sto3g_integrals(&build_h_chain(2, 1.4).unwrap()).unwrap();
    assert!((ao.overlap[(0, 1)] - REF_H2_S12).abs() < 1e-8);
    assert!(ao.eri.symmetry_violation() < 1e-12);
}

#[test]
fn lowdin_basis_is_orthonormal() {
    let ao = sto3g_integrals(&build_h_chain(4, 1.4).unwrap()).unwrap();
    let ints = lowdin_orthogonalize(&ao).unwrap();
    let x = qbe::linalg::inv_sqrt_sym(&ao.overlap, 1e-10).unwrap();
    let s_t = &x * &ao.overlap * &x;
    assert!((s_t - DMatrix::identity(4, 4)).abs().max() < 1e-10);
    // S^{1/2} h S^{1/2} recovers T + V; traces agree under the S^{-1} metric
    let sqrt_s = x.clone().try_inverse().unwrap();
    let back = &sqrt_s * &ints.h * &sqrt_s;
    assert!((back - ao.core_hamiltonian()).abs().max() < 1e-10);
    let s_inv = ao.overlap.clone().try_inverse().unwrap();
    assert!((ints.h.trace() - (ao.core_hamiltonian() * s_inv).trace()).abs() < 1e-10);
    assert!(ints.v.symmetry_violation() < 1e-12);
    assert!((&ints.h - ints.h.transpose()).abs().max() < 1e-12);
}

#[test]
fn translation_invariance() {
    let mol = build_h_chain(3, 1.4).unwrap();
    let a = sto3g_integrals(&mol).unwrap();
    let b = sto3g_integrals(&mol.translated(Vector3::new(0.3, -1.7, 2.2))).unwrap();
    assert!((a.overlap - b.overlap).abs().max() < 1e-10);
    assert!((a.kinetic - b.kinetic).abs().max() < 1e-10);
    assert!((a.nuclear - b.nuclear).abs().max() < 1e-10);
    let d = a.eri.as_slice().iter().zip(b.eri.as_slice()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(d < 1e-10);
    assert!((a.e_nuc - b.e_nuc).abs() < 1e-10);
}

#[test]
fn hartree_fock_matches_reference() {
    for (n, e_ref, tol) in [(2, REF_H2_EHF, 1e-6), (4, REF_H4_EHF, 1e-6), (8, REF_H8_EHF, 1e-6)] {
        let ints = h_chain_integrals(n, 1.4).unwrap();
        let mf = restricted_hartree_fock(&ints, n).unwrap();
        assert!((mf.e_hf - e_ref).abs() < tol, "H{n}: {} vs {}", mf.e_hf, e_ref);
        let ctc = mf.c_occ.transpose() * &mf.c_occ;
        assert!((ctc - DMatrix::identity(n / 2, n / 2)).abs().max() < 1e-10);
        assert!((&mf.density * &mf.density - &mf.density * 2.0).abs().max() < 1e-8);
        assert!((mf.density.trace() - n as f64).abs() < 1e-10);
    }
}

#[test]
fn fci_matches_reference_and_bounds_hf() {
    for (n, e_ref) in [(2, REF_H2_EFCI), (4, REF_H4_EFCI), (8, REF_H8_EFCI)] {
        let ints = h_chain_integrals(n, 1.4).unwrap();
        let e = fci(&ints, n);
        assert!((e - e_ref).abs() < 1e-6, "H{n}: {e} vs {e_ref}");
        let mf = restricted_hartree_fock(&ints, n).unwrap();
        assert!(mf.e_hf >= e);
    }
}

#[test]
fn hf_energy_is_stationary() {
    let ints = h_chain_integrals(4, 1.4).unwrap();
    let mf = restricted_hartree_fock(&ints, 4).unwrap();
    let delta: f64 = 1e-4;
    let c = &mf.mo_coeff;
    // rotate occupied orbital 1 with virtual orbital 2
    let mut rot = c.clone();
    let (co, cv) = (c.column(1).clone_owned(), c.column(2).clone_owned());
    rot.set_column(1, &(&co * delta.cos() + &cv * delta.sin()));
    rot.set_column(2, &(&cv * delta.cos() - &co * delta.sin()));
    let occ = rot.columns(0, 2);
    let p = occ * occ.transpose() * 2.0;
    let e = qbe::scf::rhf_energy(&ints, &p);
    assert!(e >= mf.e_hf - 1e-12);
    assert!(e - mf.e_hf < 10.0 * delta * delta);
}

#[test]
fn fcidump_roundtrip_and_external_file() {
    let ints = h_chain_integrals(2, 1.4).unwrap();
    let text = fcidump_write_string(&ints, 2, 0);
    let back = fcidump_read_str(&text).unwrap();
    assert!((back.ints.h.clone() - &ints.h).abs().max() < 1e-12);
    let dv = back.ints.v.as_slice().iter().zip(ints.v.as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(dv < 1e-12);
    assert_eq!(back.ints.e_nuc, ints.e_nuc);

    let ext = fcidump_read(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/h2_sto3g.fcidump")).unwrap();
    assert_eq!((ext.ints.n_orb(), ext.n_elec, ext.ms2), (2, 2, 0));
    assert!((fci(&ext.ints, 2) - REF_H2_EFCI).abs() < 1e-8);
}

#[test]
fn whole_molecule_fragment_is_identity_embedding() {
    let ints4 = h_chain_integrals(4, 1.4).unwrap();
    let mf = restricted_hartree_fock(&ints4, 4).unwrap();
    let frag = Fragment::new(0, vec![0, 1, 2, 3], vec![0, 1, 2, 3]).unwrap();
    let bath = schmidt_bath(&mf, &frag).unwrap();
    assert_eq!(bath.n_bath, 0);
    assert!((bath.basis.clone() - DMatrix::identity(4, 4)).abs().max() < 1e-15);
    let emb = project_embedding_hamiltonian(&ints4, &bath).unwrap();
    assert!((emb.h.clone() - &ints4.h).abs().max() < 1e-12);
    assert!((emb.e_core - ints4.e_nuc).abs() < 1e-12);
}

#[test]
fn h2_one_atom_fragment_is_exact() {
    let ints = h_chain_integrals(2, 1.4).unwrap();
    let mf = restricted_hartree_fock(&ints, 2).unwrap();
    let frag = Fragment::new(0, vec![0], vec![0]).unwrap();
    let bath = schmidt_bath(&mf, &frag).unwrap();
    assert_eq!(bath.n_bath, 1);
    for (a, b) in &bath.schmidt_coefficients {
        assert!((a * a + b * b - 1.0).abs() < 1e-12);
    }
    let emb = project_embedding_hamiltonian(&ints, &bath).unwrap();
    let e = ground_state(&emb, emb.n_elec_emb, 0).unwrap().0.energy;
    assert!((e - fci(&ints, 2)).abs() < 1e-8);
}

#[test]
fn embedding_reproduces_hartree_fock() {
    let ints = h_chain_integrals(4, 1.4).unwrap();
    let mf = restricted_hartree_fock(&ints, 4).unwrap();
    for frag in [Fragment::new(0, vec![0, 1], vec![0]).unwrap(), Fragment::new(1, vec![1, 2], vec![1]).unwrap()] {
        let bath = schmidt_bath(&mf, &frag).unwrap();
        assert!(bath.n_bath <= frag.n_orbitals());
        let b = &bath.basis;
        let m = b.ncols();
        assert!((b.transpose() * b - DMatrix::identity(m, m)).abs().max() < 1e-10);
        let gamma = b.transpose() * &mf.density * b;
        for (i, &oi) in frag.orbitals.iter().enumerate() {
            for (j, &oj) in frag.orbitals.iter().enumerate() {
                assert!((gamma[(i, j)] - mf.density[(oi, oj)]).abs() < 1e-10);
            }
        }
        let emb = project_embedding_hamiltonian(&ints, &bath).unwrap();
        assert!((emb.determinant_energy(&gamma) - mf.e_hf).abs() < 1e-8);
        assert!((gamma.trace() - emb.n_elec_emb as f64).abs() < 1e-10);
        assert!(emb.v.symmetry_violation() < 1e-12);
    }
}
