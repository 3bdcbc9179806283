//! Compressed-row sparse matrices, Jacobi-preconditioned conjugate gradients,
//! and a skyline `LDLᵀ` factorization for symmetric (possibly indefinite)
//! systems under a Cuthill–McKee ordering.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Relative residual guaranteed by [`ldlt_solve`].
pub const LDLT_TOLERANCE: f64 = 1e-10;

/// Pivots smaller than this multiple of `max|A|` are treated as zero.
pub const PIVOT_THRESHOLD: f64 = 1e-14;

/// Compressed sparse row matrix with sorted, unique column indices per row.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut indptr = vec![0; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut data: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *data.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                data.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        Self { nrows, ncols, indptr, indices, data }
    }

    pub fn from_dense(a: &[Vec<f64>]) -> Self {
        let nrows = a.len();
        let ncols = a.first().map_or(0, Vec::len);
        let mut t = Vec::new();
        for (i, row) in a.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(nrows, ncols, t)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0)).collect())
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()].iter().copied().zip(self.data[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.indptr[i]..self.indptr[i + 1];
        match self.indices[r.clone()].binary_search(&j) {
            Ok(k) => self.data[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    /// `Aᵀ x`.
    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            for (j, v) in self.row(i) {
                y[j] += v * xi;
            }
        }
        y
    }

    pub fn transpose(&self) -> Self {
        let mut t = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                t.push((j, i, v));
            }
        }
        Self::from_triplets(self.ncols, self.nrows, t)
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        (0..self.nrows).map(|i| x[i] * self.row(i).map(|(j, v)| v * y[j]).sum::<f64>()).sum()
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        if self.nrows != self.ncols {
            return false;
        }
        let tol = rel_tol * self.max_abs();
        (0..self.nrows).all(|i| self.row(i).all(|(j, v)| (v - self.get(j, i)).abs() <= tol))
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, row) in a.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        a
    }

    /// Replaces the rows and columns of `fixed` dofs with identity rows.
    pub fn with_identity_rows(&self, fixed: &[bool]) -> Self {
        let mut t = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            if fixed[i] {
                t.push((i, i, 1.0));
                continue;
            }
            for (j, v) in self.row(i) {
                if !fixed[j] {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(self.nrows, self.ncols, t)
    }
}

pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[derive(Clone, Debug)]
pub struct CgResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final relative residual `‖Ax − b‖/‖b‖`.
    pub residual: f64,
}

/// Jacobi-preconditioned conjugate gradients for SPD systems.
pub fn cg_solve(a: &SparseMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<CgResult> {
    let n = b.len();
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(CgResult { x, iterations: 0, residual: 0.0 });
    }
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 1..=max_iter {
        let ap = a.matvec(&p);
        let curvature = dot(&p, &ap);
        if curvature <= 0.0 {
            return Err(Error::Indefinite(it));
        }
        let alpha = rz / curvature;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let res = norm2(&r) / bnorm;
        if res <= tol {
            return Ok(CgResult { x, iterations: it, residual: res });
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let residual = norm2(&a.matvec(&x).iter().zip(b).map(|(ax, b)| ax - b).collect::<Vec<_>>()) / bnorm;
    Err(Error::CgNotConverged { iterations: max_iter, residual })
}

/// Cuthill–McKee ordering. Each connected component starts from a node with a
/// nonzero diagonal and minimal degree, so that in saddle-point systems every
/// zero-diagonal node is eliminated after at least one of its neighbours.
pub fn cuthill_mckee(a: &SparseMatrix) -> Vec<usize> {
    let n = a.nrows();
    let adj: Vec<Vec<usize>> = (0..n).map(|i| a.row(i).filter(|&(j, v)| j != i && v != 0.0).map(|(j, _)| j).collect()).collect();
    let has_diag: Vec<bool> = (0..n).map(|i| a.get(i, i) != 0.0).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut candidates: Vec<usize> = (0..n).collect();
    candidates.sort_by_key(|&i| (!has_diag[i], adj[i].len(), i));
    for &start in &candidates {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (adj[w].len(), w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order
}

/// Symmetric Ruiz equilibration: a few sweeps of `s_i ← s_i / √(max_j |s_i a_ij s_j|)`.
fn ruiz_scaling(a: &SparseMatrix) -> Vec<f64> {
    let n = a.nrows();
    let mut s = vec![1.0; n];
    for _ in 0..5 {
        let row_max: Vec<f64> = (0..n)
            .map(|i| a.row(i).map(|(j, v)| (s[i] * v * s[j]).abs()).fold(0.0, f64::max))
            .collect();
        for (s, m) in s.iter_mut().zip(row_max) {
            if m > 0.0 && m.is_finite() {
                *s /= m.sqrt();
            }
        }
    }
    s
}

/// Skyline `LDLᵀ` factor of `P S A S Pᵀ`, where the diagonal `S` equilibrates
/// blocks of very different magnitude before pivots are judged.
#[derive(Clone, Debug)]
pub struct LdltFactor {
    n: usize,
    perm: Vec<usize>,
    scale: Vec<f64>,
    /// `first[i]`: first column stored in row `i` of `L`.
    first: Vec<usize>,
    start: Vec<usize>,
    /// Strictly lower part of `L`, row by row from `first[i]` to `i - 1`.
    lower: Vec<f64>,
    diag: Vec<f64>,
}

impl LdltFactor {
    pub fn new(a: &SparseMatrix) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Dimension(format!("LDLT needs a square matrix, got {}x{}", n, a.ncols())));
        }
        let perm = cuthill_mckee(a);
        let scale = ruiz_scaling(a);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for old in 0..n {
            let i = inv[old];
            for (j_old, _) in a.row(old) {
                let j = inv[j_old];
                if j < i {
                    first[i] = first[i].min(j);
                }
            }
        }
        let mut start = vec![0; n + 1];
        for i in 0..n {
            start[i + 1] = start[i] + (i - first[i]);
        }
        let mut lower = vec![0.0; start[n]];
        let mut diag = vec![0.0; n];
        let mut max_abs: f64 = 0.0;
        for old in 0..n {
            let i = inv[old];
            for (j_old, v) in a.row(old) {
                let j = inv[j_old];
                let v = v * scale[old] * scale[j_old];
                max_abs = max_abs.max(v.abs());
                if j < i {
                    lower[start[i] + j - first[i]] += v;
                } else if j == i {
                    diag[i] += v;
                }
            }
        }
        let threshold = PIVOT_THRESHOLD * max_abs;
        // Row-oriented Crout: t_j = a_ij − Σ_k L_jk t_k, L_ij = t_j / d_j.
        let mut t = vec![0.0; n];
        for i in 0..n {
            let fi = first[i];
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let mut s = lower[start[i] + j - fi];
                let row_j = &lower[start[j]..start[j + 1]];
                for k in k0..j {
                    s -= row_j[k - fj] * t[k];
                }
                t[j] = s;
            }
            let mut d = diag[i];
            for j in fi..i {
                let l = t[j] / diag[j];
                d -= l * t[j];
                lower[start[i] + j - fi] = l;
            }
            if !(d.abs() > threshold) {
                return Err(Error::ZeroPivot { row: perm[i], pivot: d.abs(), threshold });
            }
            diag[i] = d;
        }
        Ok(Self { n, perm, scale, first, start, lower, diag })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of stored off-diagonal factor entries.
    pub fn profile(&self) -> usize {
        self.lower.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old] * self.scale[old]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.lower[self.start[i]..self.start[i + 1]];
            let s: f64 = row.iter().zip(&y[fi..i]).map(|(l, y)| l * y).sum();
            y[i] -= s;
        }
        for i in 0..n {
            y[i] /= self.diag[i];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let yi = y[i];
            let row = &self.lower[self.start[i]..self.start[i + 1]];
            for (k, l) in row.iter().enumerate() {
                y[fi + k] -= l * yi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new] * self.scale[old];
        }
        x
    }

    /// Relative residual `‖S(b − A x)‖ / ‖S b‖` in the equilibrated norm, so
    /// that rows of very different physical units are weighted comparably.
    pub fn scaled_residual(&self, a: &SparseMatrix, x: &[f64], b: &[f64]) -> f64 {
        let ax = a.matvec(x);
        let mut rn = 0.0;
        let mut bn = 0.0;
        for i in 0..self.n {
            let s = self.scale[i];
            rn += (s * (b[i] - ax[i])).powi(2);
            bn += (s * b[i]).powi(2);
        }
        if bn == 0.0 {
            rn.sqrt()
        } else {
            (rn / bn).sqrt()
        }
    }

    /// Solves with up to two steps of iterative refinement, then checks the
    /// equilibrated residual against [`LDLT_TOLERANCE`].
    pub fn solve_checked(&self, a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
        let mut x = self.solve(b);
        if b.iter().all(|&v| v == 0.0) {
            return Ok(x);
        }
        let mut res = 0.0;
        for pass in 0..3 {
            res = self.scaled_residual(a, &x, b);
            if res <= 1e-14 || pass == 2 {
                break;
            }
            let r: Vec<f64> = b.iter().zip(a.matvec(&x)).map(|(b, ax)| b - ax).collect();
            let dx = self.solve(&r);
            for (x, d) in x.iter_mut().zip(dx) {
                *x += d;
            }
        }
        if res > LDLT_TOLERANCE {
            return Err(Error::Residual { residual: res, tolerance: LDLT_TOLERANCE });
        }
        Ok(x)
    }
}

/// Factor-and-solve for a symmetric, nonsingular (possibly indefinite) system.
pub fn ldlt_solve(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    LdltFactor::new(a)?.solve_checked(a, b)
}
