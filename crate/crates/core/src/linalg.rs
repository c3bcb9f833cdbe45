//! Dense and iterative linear-algebra kernels: four-index tensors,
//! symmetric inverse square roots, a CSR matrix, Lanczos ground states
//! and a projected conjugate-gradient solver.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{QbeError, Result};

/// Dense real four-index tensor `(pq|rs)` stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    n: usize,
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n * n * n] }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, p: usize, q: usize, r: usize, s: usize) -> usize {
        ((p * self.n + q) * self.n + r) * self.n + s
    }

    #[inline]
    pub fn get(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        self.data[self.idx(p, q, r, s)]
    }

    #[inline]
    pub fn set(&mut self, p: usize, q: usize, r: usize, s: usize, v: f64) {
        let i = self.idx(p, q, r, s);
        self.data[i] = v;
    }

    /// Writes `v` into all eight symmetry-equivalent slots.
    pub fn set_sym(&mut self, p: usize, q: usize, r: usize, s: usize, v: f64) {
        for (a, b, c, d) in [
            (p, q, r, s),
            (q, p, r, s),
            (p, q, s, r),
            (q, p, s, r),
            (r, s, p, q),
            (s, r, p, q),
            (r, s, q, p),
            (s, r, q, p),
        ] {
            self.set(a, b, c, d, v);
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Largest deviation from `(pq|rs)=(qp|rs)=(pq|sr)=(rs|pq)`.
    pub fn symmetry_violation(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        let v = self.get(p, q, r, s);
                        worst = worst
                            .max((v - self.get(q, p, r, s)).abs())
                            .max((v - self.get(p, q, s, r)).abs())
                            .max((v - self.get(r, s, p, q)).abs());
                    }
                }
            }
        }
        worst
    }

    /// Average over the eight permutational images of every element.
    pub fn symmetrized(&self) -> Tensor4 {
        let n = self.n;
        let mut out = Tensor4::zeros(n);
        for p in 0..n {
            for q in 0..=p {
                for r in 0..n {
                    for s in 0..=r {
                        if p * (p + 1) / 2 + q < r * (r + 1) / 2 + s {
                            continue;
                        }
                        // pairwise, so already symmetric input is reproduced bit for bit
                        let sum = ((self.get(p, q, r, s) + self.get(q, p, r, s))
                            + (self.get(p, q, s, r) + self.get(q, p, s, r)))
                            + ((self.get(r, s, p, q) + self.get(s, r, p, q))
                                + (self.get(r, s, q, p) + self.get(s, r, q, p)));
                        out.set_sym(p, q, r, s, sum / 8.0);
                    }
                }
            }
        }
        out
    }

    /// `(ij|kl) = Σ C_pi C_qj C_rk C_sl (pq|rs)` for an `n × m` matrix `c`.
    pub fn transform(&self, c: &DMatrix<f64>) -> Tensor4 {
        let n = self.n;
        assert_eq!(c.nrows(), n, "transform: row count must match tensor dimension");
        let m = c.ncols();
        // Four quarter transformations, each contracting the leading index
        // and rotating it to the back.
        let mut cur = self.data.clone();
        let mut dims = [n, n, n, n];
        for _ in 0..4 {
            let (d0, rest) = (dims[0], dims[1] * dims[2] * dims[3]);
            let mut next = vec![0.0; rest * m];
            for x in 0..rest {
                for i in 0..m {
                    let mut acc = 0.0;
                    for p in 0..d0 {
                        acc += c[(p, i)] * cur[p * rest + x];
                    }
                    next[x * m + i] = acc;
                }
            }
            dims = [dims[1], dims[2], dims[3], m];
            cur = next;
        }
        Tensor4 { n: m, data: cur }
    }
}

/// Symmetric inverse square root; fails when an eigenvalue falls below `min_eig`.
pub fn inv_sqrt_sym(s: &DMatrix<f64>, min_eig: f64) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(s.clone());
    let smallest = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if smallest < min_eig {
        return Err(QbeError::LinearDependence(smallest));
    }
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|x| 1.0 / x.sqrt()));
    Ok(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row `(col, value)` lists; duplicate columns are summed
    /// and entries below `drop_tol` in magnitude are discarded.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>, drop_tol: f64) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < row.len() {
                let c = row[k].0;
                let mut v = 0.0;
                while k < row.len() && row[k].0 == c {
                    v += row[k].1;
                    k += 1;
                }
                if v.abs() > drop_tol {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { n, row_ptr, cols, vals }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            y[i] = acc;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for (i, di) in d.iter_mut().enumerate() {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.cols[k] == i {
                    *di += self.vals[k];
                }
            }
        }
        d
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[(i, self.cols[k])] += self.vals[k];
            }
        }
        m
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Flips the sign so that the largest-magnitude entry (lowest index on ties)
/// is positive.
pub fn fix_phase(v: &mut [f64]) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() + 1e-12 {
            best = i;
        }
    }
    if v.get(best).copied().unwrap_or(0.0) < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions {
    pub tol: f64,
    pub krylov_dim: usize,
    pub max_restarts: usize,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self { tol: 1e-10, krylov_dim: 60, max_restarts: 200 }
    }
}

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
    pub matvecs: usize,
}

/// Lowest eigenpair of a symmetric operator by restarted Lanczos with full
/// reorthogonalization.
pub fn lanczos_lowest<F>(n: usize, apply: F, start: Option<&[f64]>, opts: &LanczosOptions) -> Result<EigenPair>
where
    F: Fn(&[f64], &mut [f64]),
{
    if n == 0 {
        return Err(QbeError::InvalidArgument("empty operator".into()));
    }
    let mut x: Vec<f64> = match start {
        Some(s) if s.len() == n && norm(s) > 1e-12 => s.to_vec(),
        _ => (0..n).map(|i| 1.0 + 0.01 * ((i * 7919) % 101) as f64).collect(),
    };
    let nx = norm(&x);
    x.iter_mut().for_each(|v| *v /= nx);

    let kmax = opts.krylov_dim.min(n).max(1);
    let mut matvecs = 0;
    let mut w = vec![0.0; n];
    let mut last_res = f64::INFINITY;

    for _restart in 0..opts.max_restarts {
        let mut basis: Vec<Vec<f64>> = vec![x.clone()];
        let mut alpha = Vec::with_capacity(kmax);
        let mut beta: Vec<f64> = Vec::with_capacity(kmax);
        let mut ritz: Option<(f64, Vec<f64>, f64)> = None;

        for j in 0..kmax {
            apply(&basis[j], &mut w);
            matvecs += 1;
            let a = dot(&w, &basis[j]);
            alpha.push(a);
            for _ in 0..2 {
                for b in &basis {
                    let c = dot(&w, b);
                    axpy(-c, b, &mut w);
                }
            }
            let bnorm = norm(&w);
            let k = j + 1;
            let check = k == kmax || bnorm < 1e-13 || k % 8 == 0 || k == n;
            if check {
                let t = tridiag(&alpha, &beta);
                let eig = SymmetricEigen::new(t);
                let (imin, theta) =
                    eig.eigenvalues
                        .iter()
                        .enumerate()
                        .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
                let y = eig.eigenvectors.column(imin);
                let res = (bnorm * y[k - 1]).abs();
                ritz = Some((theta, y.iter().cloned().collect(), res));
                if res <= opts.tol || bnorm < 1e-13 || k == n {
                    break;
                }
            }
            if k < kmax {
                beta.push(bnorm);
                basis.push(w.iter().map(|v| v / bnorm).collect());
            }
        }

        let (_, y, _) = ritz.expect("at least one Ritz check per cycle");
        let mut nx = vec![0.0; n];
        for (yi, b) in y.iter().zip(&basis) {
            axpy(*yi, b, &mut nx);
        }
        let nn = norm(&nx);
        nx.iter_mut().for_each(|v| *v /= nn);
        apply(&nx, &mut w);
        matvecs += 1;
        let e = dot(&nx, &w);
        axpy(-e, &nx, &mut w);
        let res = norm(&w);
        x = nx;
        last_res = res;
        if res <= opts.tol {
            fix_phase(&mut x);
            return Ok(EigenPair { value: e, vector: x, residual: res, matvecs });
        }
    }
    Err(QbeError::NotConverged { what: "Lanczos", iterations: opts.max_restarts, residual: last_res })
}

fn tridiag(alpha: &[f64], beta: &[f64]) -> DMatrix<f64> {
    let k = alpha.len();
    let mut t = DMatrix::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alpha[i];
        if i + 1 < k {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    t
}

/// Lowest eigenpair of a dense symmetric matrix.
pub fn dense_lowest(m: &DMatrix<f64>) -> EigenPair {
    let eig = SymmetricEigen::new(m.clone());
    let (imin, e) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
    let mut v: Vec<f64> = eig.eigenvectors.column(imin).iter().cloned().collect();
    fix_phase(&mut v);
    let mv = m * DVector::from_column_slice(&v);
    let res = (mv - DVector::from_column_slice(&v) * e).norm();
    EigenPair { value: e, vector: v, residual: res, matvecs: 0 }
}

/// Solves `(A − shift) y = b` on the orthogonal complement of the unit
/// vector `psi` by conjugate gradients. `b` must be orthogonal to `psi`.
pub fn projected_cg<F>(
    apply: F,
    shift: f64,
    psi: &[f64],
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize)>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let project = |v: &mut [f64]| {
        let c = dot(v, psi);
        axpy(-c, psi, v);
    };
    let mut y = vec![0.0; n];
    let mut r = b.to_vec();
    project(&mut r);
    let bnorm = norm(&r);
    if bnorm == 0.0 {
        return Ok((y, 0));
    }
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    for it in 0..max_iter {
        apply(&p, &mut ap);
        axpy(-shift, &p, &mut ap);
        project(&mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(QbeError::Numerical("response operator is not positive on the excited subspace".into()));
        }
        let a = rr / pap;
        axpy(a, &p, &mut y);
        axpy(-a, &ap, &mut r);
        let rr_new = dot(&r, &r);
        if rr_new.sqrt() <= tol * bnorm.max(1.0) {
            project(&mut y);
            return Ok((y, it + 1));
        }
        let beta = rr_new / rr;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
        rr = rr_new;
    }
    Err(QbeError::NotConverged { what: "conjugate gradient", iterations: max_iter, residual: rr.sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_sym(n: usize, seed: u64) -> DMatrix<f64> {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let a = DMatrix::from_fn(n, n, |_, _| next());
        &a + a.transpose()
    }

    #[test]
    fn inv_sqrt_squares_back() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 1.0]);
        let x = inv_sqrt_sym(&s, 1e-10).unwrap();
        let id = &x * &s * &x;
        assert!((id - DMatrix::identity(2, 2)).abs().max() < 1e-12);
    }

    #[test]
    fn inv_sqrt_rejects_singular() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(inv_sqrt_sym(&s, 1e-10), Err(QbeError::LinearDependence(_))));
    }

    #[test]
    fn transform_identity_is_noop() {
        let mut t = Tensor4::zeros(3);
        t.set_sym(0, 1, 2, 2, 0.3);
        t.set_sym(1, 1, 0, 0, -0.2);
        let u = t.transform(&DMatrix::identity(3, 3));
        assert_eq!(u, t);
        assert!(u.symmetry_violation() < 1e-15);
    }

    #[test]
    fn symmetrized_projects_onto_symmetric_tensors() {
        let mut t = Tensor4::zeros(2);
        t.set(0, 1, 1, 1, 0.8);
        let s = t.symmetrized();
        assert_eq!(s.symmetry_violation(), 0.0);
        assert_eq!(s.get(1, 1, 1, 0), 0.2);
        assert_eq!(s.symmetrized(), s);
    }

    #[test]
    fn lanczos_matches_dense() {
        let m = random_sym(90, 3);
        let dense = dense_lowest(&m);
        let apply = |x: &[f64], y: &mut [f64]| {
            let r = &m * DVector::from_column_slice(x);
            y.copy_from_slice(r.as_slice());
        };
        let opts = LanczosOptions { krylov_dim: 25, ..Default::default() };
        let lz = lanczos_lowest(90, apply, None, &opts).unwrap();
        assert!((lz.value - dense.value).abs() < 1e-10);
        assert!(lz.residual <= 1e-10);
        let overlap = dot(&lz.vector, &dense.vector).abs();
        assert!((overlap - 1.0).abs() < 1e-9);
    }

    #[test]
    fn cg_solves_projected_system() {
        let m = random_sym(40, 5);
        let g = dense_lowest(&m);
        let apply = |x: &[f64], y: &mut [f64]| {
            let r = &m * DVector::from_column_slice(x);
            y.copy_from_slice(r.as_slice());
        };
        let mut b: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin()).collect();
        let c = dot(&b, &g.vector);
        axpy(-c, &g.vector, &mut b);
        let (y, _) = projected_cg(apply, g.value, &g.vector, &b, 1e-13, 500).unwrap();
        let mut ay = vec![0.0; 40];
        apply(&y, &mut ay);
        axpy(-g.value, &y, &mut ay);
        let diff: f64 = ay.iter().zip(&b).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(diff < 1e-10);
        assert!(dot(&y, &g.vector).abs() < 1e-12);
    }

    #[test]
    fn csr_roundtrip() {
        let rows = vec![vec![(1, 2.0), (0, 1.0), (1, 1.0)], vec![(0, 3.0), (1, 1e-20)]];
        let c = CsrMatrix::from_rows(rows, 1e-15);
        assert_eq!(c.nnz(), 3);
        let d = c.to_dense();
        assert_eq!(d, DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 3.0, 0.0]));
        assert_eq!(c.diagonal(), vec![1.0, 0.0]);
    }
}
