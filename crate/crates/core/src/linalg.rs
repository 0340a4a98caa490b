//! Sparse storage and the linear solvers used by the drivers.
//!
//! Meshes are structured, so a banded LU with partial pivoting is an
//! effective direct method: the bandwidth of a row-major numbering is about
//! one mesh row of DoFs.

use std::collections::BTreeMap;

use crate::{Error, Result};

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

/// Coordinate-format accumulator; duplicate entries are summed.
#[derive(Clone, Debug, Default)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    rows: Vec<BTreeMap<usize, f64>>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            rows: vec![BTreeMap::new(); nrows],
        }
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.nrows && j < self.ncols);
        *self.rows[i].entry(j).or_insert(0.0) += v;
    }

    pub fn build(self) -> CsrMatrix {
        let mut row_ptr = Vec::with_capacity(self.nrows + 1);
        let nnz: usize = self.rows.iter().map(BTreeMap::len).sum();
        let mut col_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for row in self.rows {
            for (j, v) in row {
                col_idx.push(j);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr,
            col_idx,
            values,
        }
    }
}

impl CsrMatrix {
    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows).map(|i| self.get(i, i)).collect()
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        (0..self.nrows)
            .map(|i| x[i] * self.row(i).map(|(j, v)| v * y[j]).sum::<f64>())
            .sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest `|a_ij − a_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let mut worst: f64 = 0.0;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst / scale
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        self.nrows == self.ncols && self.asymmetry() <= rel_tol
    }

    /// Lower and upper bandwidth.
    pub fn bandwidth(&self) -> (usize, usize) {
        let (mut kl, mut ku) = (0, 0);
        for i in 0..self.nrows {
            for (j, _) in self.row(i) {
                if j < i {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
            }
        }
        (kl, ku)
    }

    /// Rows and columns restricted to `keep` (sorted, distinct indices).
    pub fn submatrix(&self, keep: &[usize]) -> CsrMatrix {
        let mut map = vec![usize::MAX; self.ncols];
        for (k, &i) in keep.iter().enumerate() {
            map[i] = k;
        }
        let mut b = TripletBuilder::new(keep.len(), keep.len());
        for (k, &i) in keep.iter().enumerate() {
            for (j, v) in self.row(i) {
                if map[j] != usize::MAX {
                    b.add(k, map[j], v);
                }
            }
        }
        b.build()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        d
    }
}

/// LU factorization of a banded matrix with partial pivoting
/// (row interchanges within the band).
#[derive(Clone, Debug)]
pub struct BandLu {
    n: usize,
    kl: usize,
    width: usize,
    /// Row `r` stores columns `r − kl ..= r + 2·kl + ku`.
    data: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandLu {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        assert_eq!(a.nrows, a.ncols, "LU needs a square matrix");
        let n = a.nrows;
        let (kl, ku) = a.bandwidth();
        let width = 2 * kl + ku + 1;
        let mut data = vec![0.0; n * width];
        for i in 0..n {
            for (j, v) in a.row(i) {
                data[i * width + (j + kl - i)] = v;
            }
        }
        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        let mut lu = Self {
            n,
            kl,
            width,
            data,
            pivots: vec![0; n],
        };
        let reach = kl + ku; // columns right of the diagonal after pivoting
        for i in 0..n {
            let last_row = (i + kl).min(n - 1);
            let mut p = i;
            let mut best = lu.at(i, i).abs();
            for r in i + 1..=last_row {
                let v = lu.at(r, i).abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best <= 1e-14 * scale {
                return Err(Error::SingularMatrix { row: i });
            }
            lu.pivots[i] = p;
            let last_col = (i + reach).min(n - 1);
            if p != i {
                for c in i..=last_col {
                    let a_ic = lu.idx(i, c);
                    let a_pc = lu.idx(p, c);
                    lu.data.swap(a_ic, a_pc);
                }
            }
            let piv = lu.at(i, i);
            for r in i + 1..=last_row {
                let k = lu.idx(r, i);
                if lu.data[k] == 0.0 {
                    continue;
                }
                let l = lu.data[k] / piv;
                lu.data[k] = l;
                for c in i + 1..=last_col {
                    let u = lu.data[lu.idx(i, c)];
                    if u != 0.0 {
                        let k2 = lu.idx(r, c);
                        lu.data[k2] -= l * u;
                    }
                }
            }
        }
        Ok(lu)
    }

    #[inline]
    fn idx(&self, r: usize, c: usize) -> usize {
        r * self.width + (c + self.kl - r)
    }

    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[self.idx(r, c)]
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = b.to_vec();
        let reach = self.width - self.kl - 1;
        for i in 0..n {
            let p = self.pivots[i];
            if p != i {
                x.swap(i, p);
            }
            let xi = x[i];
            if xi != 0.0 {
                for r in i + 1..=(i + self.kl).min(n - 1) {
                    x[r] -= self.at(r, i) * xi;
                }
            }
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for c in i + 1..=(i + reach).min(n - 1) {
                s -= self.at(i, c) * x[c];
            }
            x[i] = s / self.at(i, i);
        }
        x
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Iterative solve outcome.
#[derive(Clone, Debug)]
pub struct KrylovResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients.
pub fn conjugate_gradient(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<KrylovResult> {
    if !a.is_symmetric(1e-10) {
        return Err(Error::Breakdown {
            method: "cg",
            reason: format!("matrix is not symmetric (relative asymmetry {:.2e})", a.asymmetry()),
        });
    }
    let n = a.nrows;
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok(KrylovResult {
            x: vec![0.0; n],
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let diag = a.diagonal();
    if diag.iter().any(|&d| d <= 0.0) {
        return Err(Error::Breakdown {
            method: "cg",
            reason: "non-positive diagonal entry; matrix is not positive definite".into(),
        });
    }
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::Breakdown {
                method: "cg",
                reason: format!("pᵀAp = {pap:.3e} ≤ 0; matrix is not positive definite"),
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rel = norm2(&r) / bnorm;
        if rel <= tol {
            return Ok(KrylovResult {
                x,
                iterations: it,
                relative_residual: rel,
            });
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::LinearNotConverged {
        method: "cg",
        iterations: max_iter,
        residual: norm2(&r) / bnorm,
    })
}

/// Jacobi-preconditioned BiCGSTAB for general square systems.
pub fn bicgstab(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<KrylovResult> {
    let n = a.nrows;
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok(KrylovResult {
            x: vec![0.0; n],
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut t = vec![0.0; n];
    for it in 1..=max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new.abs() < 1e-300 {
            return Err(Error::Breakdown {
                method: "bicgstab",
                reason: "ρ vanished".into(),
            });
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
            y[i] = p[i] * inv_diag[i];
        }
        a.mul_vec_into(&y, &mut v);
        alpha = rho / dot(&r_hat, &v);
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm2(&s) / bnorm <= tol {
            for i in 0..n {
                x[i] += alpha * y[i];
            }
            return Ok(KrylovResult {
                x,
                iterations: it,
                relative_residual: norm2(&s) / bnorm,
            });
        }
        for i in 0..n {
            z[i] = s[i] * inv_diag[i];
        }
        a.mul_vec_into(&z, &mut t);
        let tt = dot(&t, &t);
        if tt == 0.0 {
            return Err(Error::Breakdown {
                method: "bicgstab",
                reason: "tᵀt vanished".into(),
            });
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * y[i] + omega * z[i];
            r[i] = s[i] - omega * t[i];
        }
        let rel = norm2(&r) / bnorm;
        if rel <= tol {
            return Ok(KrylovResult {
                x,
                iterations: it,
                relative_residual: rel,
            });
        }
    }
    let rel = norm2(&r) / bnorm;
    Err(Error::LinearNotConverged {
        method: "bicgstab",
        iterations: max_iter,
        residual: rel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tridiag(n: usize, lo: f64, d: f64, up: f64) -> CsrMatrix {
        let mut b = TripletBuilder::new(n, n);
        for i in 0..n {
            b.add(i, i, d);
            if i > 0 {
                b.add(i, i - 1, lo);
            }
            if i + 1 < n {
                b.add(i, i + 1, up);
            }
        }
        b.build()
    }

    #[test]
    fn triplets_sum_duplicates() {
        let mut b = TripletBuilder::new(2, 2);
        b.add(0, 1, 1.0);
        b.add(0, 1, 2.5);
        b.add(1, 0, -1.0);
        let m = b.build();
        assert_eq!(m.get(0, 1), 3.5);
        assert_eq!(m.get(0, 0), 0.0);
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.bandwidth(), (1, 1));
    }

    #[test]
    fn identity_solves() {
        let id = CsrMatrix::identity(5);
        let b = vec![1.0, -2.0, 3.0, 0.5, 7.0];
        assert_eq!(BandLu::factor(&id).unwrap().solve(&b), b);
        let cg = conjugate_gradient(&id, &b, 1e-14, 10).unwrap();
        assert_eq!(cg.x, b);
    }

    #[test]
    fn lu_needs_pivoting() {
        // [[0, 1], [1, 0]] has a zero leading pivot.
        let mut b = TripletBuilder::new(2, 2);
        b.add(0, 1, 1.0);
        b.add(1, 0, 1.0);
        let m = b.build();
        let x = BandLu::factor(&m).unwrap().solve(&[2.0, 3.0]);
        assert_eq!(x, vec![3.0, 2.0]);
    }

    #[test]
    fn singular_is_reported() {
        let mut b = TripletBuilder::new(2, 2);
        b.add(0, 0, 1.0);
        b.add(0, 1, 1.0);
        b.add(1, 0, 1.0);
        b.add(1, 1, 1.0);
        assert!(matches!(BandLu::factor(&b.build()), Err(Error::SingularMatrix { .. })));
    }

    #[test]
    fn cg_rejects_nonsymmetric() {
        let m = tridiag(6, -1.0, 4.0, -2.0);
        let err = conjugate_gradient(&m, &[1.0; 6], 1e-10, 100).unwrap_err();
        assert!(matches!(err, Error::Breakdown { method: "cg", .. }));
    }

    #[test]
    fn cg_rejects_indefinite() {
        let m = tridiag(4, 1.0, 0.5, 1.0);
        assert!(conjugate_gradient(&m, &[1.0; 4], 1e-10, 100).is_err());
    }

    #[test]
    fn cg_iteration_cap() {
        let m = tridiag(200, -1.0, 2.0, -1.0);
        let err = conjugate_gradient(&m, &vec![1.0; 200], 1e-14, 3).unwrap_err();
        assert!(matches!(err, Error::LinearNotConverged { iterations: 3, .. }));
    }

    #[test]
    fn submatrix_keeps_selected() {
        let m = tridiag(4, -1.0, 2.0, -1.0);
        let s = m.submatrix(&[0, 2, 3]);
        assert_eq!(s.to_dense(), vec![vec![2.0, 0.0, 0.0], vec![0.0, 2.0, -1.0], vec![0.0, -1.0, 2.0]]);
    }

    proptest! {
        #[test]
        fn band_lu_matches_krylov(n in 2usize..40, seed in 0u64..1000) {
            // Random banded, diagonally weighted nonsymmetric matrix.
            let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let mut rnd = || {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
            };
            let mut b = TripletBuilder::new(n, n);
            for i in 0..n {
                for j in i.saturating_sub(3)..(i + 3).min(n) {
                    b.add(i, j, rnd());
                }
                b.add(i, i, 4.0);
            }
            let a = b.build();
            let rhs: Vec<f64> = (0..n).map(|_| rnd()).collect();
            let x = BandLu::factor(&a).unwrap().solve(&rhs);
            let r: Vec<f64> = a.mul_vec(&x).iter().zip(&rhs).map(|(ax, b)| ax - b).collect();
            prop_assert!(norm2(&r) <= 1e-12 * (1.0 + norm2(&rhs)));
            let k = bicgstab(&a, &rhs, 1e-12, 500).unwrap();
            let diff: Vec<f64> = k.x.iter().zip(&x).map(|(a, b)| a - b).collect();
            prop_assert!(norm2(&diff) <= 1e-9 * (1.0 + norm2(&x)));
        }
    }
}
