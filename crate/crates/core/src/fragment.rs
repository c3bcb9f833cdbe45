//! Overlapping chain fragments, Schmidt bath orbitals of the mean-field
//! determinant, and projected embedding Hamiltonians.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{invalid, Result};
use crate::integrals::IntegralSet;
use crate::linalg::Tensor4;
use crate::scf::{veff, MeanFieldSolution};

/// Singular values at or below this are treated as unentangled.
pub const BATH_THRESHOLD: f64 = 1e-8;

/// Edge sites of one fragment that are centers of a neighbor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Overlap {
    pub neighbor: usize,
    /// Local-orbital indices shared as (edge of self, center of neighbor).
    pub sites: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fragment {
    pub id: usize,
    /// Local-orbital indices; their order fixes the embedding-orbital order.
    pub orbitals: Vec<usize>,
    pub edges: Vec<usize>,
    pub centers: Vec<usize>,
    pub overlaps: Vec<Overlap>,
}

impl Fragment {
    /// Fragment whose non-center orbitals are edges; overlaps are filled by
    /// [`link_overlaps`].
    pub fn new(id: usize, orbitals: Vec<usize>, centers: Vec<usize>) -> Result<Self> {
        let mut seen = orbitals.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != orbitals.len() || orbitals.is_empty() {
            return invalid("fragment orbitals must be non-empty and distinct");
        }
        if centers.iter().any(|c| !orbitals.contains(c)) {
            return invalid("center site outside fragment");
        }
        let edges = orbitals.iter().copied().filter(|o| !centers.contains(o)).collect();
        Ok(Self { id, orbitals, edges, centers, overlaps: Vec::new() })
    }

    pub fn n_orbitals(&self) -> usize {
        self.orbitals.len()
    }

    /// Position of a local orbital inside the fragment (its embedding index).
    pub fn local_index(&self, orbital: usize) -> Option<usize> {
        self.orbitals.iter().position(|&o| o == orbital)
    }

    pub fn local_centers(&self) -> Vec<usize> {
        self.centers.iter().filter_map(|&c| self.local_index(c)).collect()
    }

    pub fn local_edges(&self) -> Vec<usize> {
        self.edges.iter().filter_map(|&c| self.local_index(c)).collect()
    }
}

/// Pairs every edge site with the fragment that owns it as a center.
pub fn link_overlaps(frags: &mut [Fragment]) -> Result<()> {
    let owners: Vec<(usize, usize)> = frags.iter().flat_map(|f| f.centers.iter().map(move |&c| (c, f.id))).collect();
    for f in frags.iter_mut() {
        let mut overlaps: Vec<Overlap> = Vec::new();
        for &e in &f.edges {
            let Some(&(_, owner)) = owners.iter().find(|(c, _)| *c == e) else {
                return invalid(format!("edge site {e} of fragment {} has no center owner", f.id));
            };
            match overlaps.iter_mut().find(|o| o.neighbor == owner) {
                Some(o) => o.sites.push(e),
                None => overlaps.push(Overlap { neighbor: owner, sites: vec![e] }),
            }
        }
        f.overlaps = overlaps;
    }
    Ok(())
}

/// Fragments of `window` consecutive sites centred on each interior site.
/// The first and last fragments also take the chain-end sites as centers.
pub fn fragment_chain(n_atoms: usize, window: usize) -> Result<Vec<Fragment>> {
    if window == 0 || window.is_multiple_of(2) {
        return invalid(format!("fragment window must be odd, got {window}"));
    }
    if window > n_atoms {
        return invalid(format!("window {window} exceeds chain length {n_atoms}"));
    }
    let nfrag = n_atoms - window + 1;
    let half = window / 2;
    let mut frags = Vec::with_capacity(nfrag);
    for k in 0..nfrag {
        let orbitals: Vec<usize> = (k..k + window).collect();
        let mid = k + half;
        let mut centers = vec![mid];
        if k == 0 {
            centers = (0..=mid).collect();
        }
        if k == nfrag - 1 {
            let lo = if k == 0 { 0 } else { mid };
            centers = (lo..n_atoms).collect();
        }
        frags.push(Fragment::new(k, orbitals, centers)?);
    }
    link_overlaps(&mut frags)?;
    Ok(frags)
}

/// Embedding space of one fragment: fragment orbitals plus Schmidt bath.
#[derive(Debug, Clone)]
pub struct SchmidtBath {
    /// `N × (N_A + n_bath)`; fragment unit vectors first.
    pub basis: DMatrix<f64>,
    pub n_frag: usize,
    pub n_bath: usize,
    /// Per-pair Schmidt coefficients `(√n_i, √(1−n_i))`.
    pub schmidt_coefficients: Vec<(f64, f64)>,
    /// Spin-summed density of the frozen environment determinant.
    pub core_density: DMatrix<f64>,
    pub n_elec_emb: usize,
}

pub fn schmidt_bath(mf: &MeanFieldSolution, frag: &Fragment) -> Result<SchmidtBath> {
    let n = mf.density.nrows();
    if frag.orbitals.iter().any(|&o| o >= n) {
        return invalid("fragment orbital index exceeds basis size");
    }
    let d = &mf.density * 0.5;
    let env: Vec<usize> = (0..n).filter(|i| !frag.orbitals.contains(i)).collect();
    let na = frag.n_orbitals();

    let dff = DMatrix::from_fn(na, na, |i, j| d[(frag.orbitals[i], frag.orbitals[j])]);
    let occ = SymmetricEigen::new(dff).eigenvalues;
    let mut schmidt: Vec<(f64, f64)> = occ
        .iter()
        .map(|&x| {
            let x = x.clamp(0.0, 1.0);
            (x.sqrt(), (1.0 - x).sqrt())
        })
        .collect();
    schmidt.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut bath_cols: Vec<Vec<f64>> = Vec::new();
    if !env.is_empty() {
        let def = DMatrix::from_fn(env.len(), na, |i, j| d[(env[i], frag.orbitals[j])]);
        let svd = def.svd(true, false);
        let u = svd.u.expect("left singular vectors requested");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        for &k in &order {
            if svd.singular_values[k] > BATH_THRESHOLD {
                let mut col = vec![0.0; n];
                for (row, &e) in env.iter().enumerate() {
                    col[e] = u[(row, k)];
                }
                let imax = (0..n).fold(0, |b, i| if col[i].abs() > col[b].abs() + 1e-12 { i } else { b });
                if col[imax] < 0.0 {
                    col.iter_mut().for_each(|x| *x = -*x);
                }
                bath_cols.push(col);
            }
        }
    }

    let nb = bath_cols.len();
    let mut basis = DMatrix::zeros(n, na + nb);
    for (j, &o) in frag.orbitals.iter().enumerate() {
        basis[(o, j)] = 1.0;
    }
    for (k, col) in bath_cols.iter().enumerate() {
        for i in 0..n {
            basis[(i, na + k)] = col[i];
        }
    }

    let q = DMatrix::identity(n, n) - &basis * basis.transpose();
    let core = &q * &mf.density * &q;
    let core = (&core + core.transpose()) * 0.5;
    let n_core = core.trace();
    let n_emb = mf.n_elec as f64 - n_core;
    let n_elec_emb = n_emb.round();
    if (n_emb - n_elec_emb).abs() > 1e-6 {
        return invalid(format!("embedding electron count {n_emb} is not integral"));
    }
    Ok(SchmidtBath {
        basis,
        n_frag: na,
        n_bath: nb,
        schmidt_coefficients: schmidt,
        core_density: core,
        n_elec_emb: n_elec_emb as usize,
    })
}

/// Fragment-plus-bath Hamiltonian with the environment mean field folded in.
#[derive(Debug, Clone)]
pub struct EmbeddingHamiltonian {
    pub n_emb: usize,
    pub n_frag: usize,
    /// `h + V_eff[core]` in the embedding basis.
    pub h: DMatrix<f64>,
    /// Bare one-electron integrals in the embedding basis.
    pub h_bare: DMatrix<f64>,
    /// Core mean-field potential in the embedding basis.
    pub veff_core: DMatrix<f64>,
    pub v: Tensor4,
    pub e_core: f64,
    pub basis: DMatrix<f64>,
    pub n_elec_emb: usize,
}

impl EmbeddingHamiltonian {
    /// Trivial embedding: the full integral set with no frozen core.
    pub fn from_integrals(ints: &IntegralSet, n_elec: usize) -> Self {
        let n = ints.n_orb();
        Self {
            n_emb: n,
            n_frag: n,
            h: ints.h.clone(),
            h_bare: ints.h.clone(),
            veff_core: DMatrix::zeros(n, n),
            v: ints.v.clone(),
            e_core: ints.e_nuc,
            basis: DMatrix::identity(n, n),
            n_elec_emb: n_elec,
        }
    }

    /// Energy of a determinant with spin-summed embedding density `gamma`,
    /// including `E_core`.
    pub fn determinant_energy(&self, gamma: &DMatrix<f64>) -> f64 {
        let f = &self.h + veff(&self.v, gamma) * 0.5;
        f.component_mul(gamma).sum() + self.e_core
    }
}

pub fn project_embedding_hamiltonian(ints: &IntegralSet, bath: &SchmidtBath) -> Result<EmbeddingHamiltonian> {
    let b = &bath.basis;
    if b.nrows() != ints.n_orb() {
        return invalid("embedding basis rows do not match orbital count");
    }
    let m = b.ncols();
    let gram = b.transpose() * b;
    if (gram - DMatrix::identity(m, m)).abs().max() > 1e-10 {
        return invalid("embedding basis is not orthonormal");
    }
    let vc = veff(&ints.v, &bath.core_density);
    let h_full = &ints.h + &vc;
    let sym = |x: DMatrix<f64>| (&x + x.transpose()) * 0.5;
    let h = sym(b.transpose() * &h_full * b);
    let h_bare = sym(b.transpose() * &ints.h * b);
    let veff_core = sym(b.transpose() * &vc * b);
    let v = ints.v.transform(b);
    let e_core = ints.e_nuc + (&ints.h + &vc * 0.5).component_mul(&bath.core_density).sum();
    Ok(EmbeddingHamiltonian {
        n_emb: m,
        n_frag: bath.n_frag,
        h,
        h_bare,
        veff_core,
        v,
        e_core,
        basis: b.clone(),
        n_elec_emb: bath.n_elec_emb,
    })
}

/// Bath plus projected Hamiltonian for every fragment.
pub fn embed_all(ints: &IntegralSet, mf: &MeanFieldSolution, frags: &[Fragment]) -> Result<Vec<EmbeddingHamiltonian>> {
    frags.iter().map(|f| project_embedding_hamiltonian(ints, &schmidt_bath(mf, f)?)).collect()
}
