//! Sparse storage and direct band factorization.
//!
//! All systems in this crate are small (at most a few 10^4 unknowns), so a
//! reverse Cuthill-McKee reordering followed by a band factorization is both
//! deterministic and fast enough. SPD matrices get a band Cholesky, general
//! matrices a band LU with partial pivoting.

use std::collections::BTreeMap;
use std::io::Write;

use crate::error::{HessdiscError, Result};

/// Compressed sparse row matrix; duplicates are summed at construction and
/// column indices are strictly increasing within each row.
#[derive(Clone, Debug)]
pub struct SparseMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        for &(r, c, _) in triplets {
            if r >= n_rows || c >= n_cols {
                return Err(HessdiscError::IndexOutOfRange {
                    row: r,
                    col: c,
                    n_rows,
                    n_cols,
                });
            }
        }
        let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n_rows];
        for &(r, c, v) in triplets {
            *rows[r].entry(c).or_insert(0.0) += v;
        }
        Ok(Self::from_rows(n_rows, n_cols, rows))
    }

    fn from_rows(n_rows: usize, n_cols: usize, rows: Vec<BTreeMap<usize, f64>>) -> Self {
        let nnz: usize = rows.iter().map(|r| r.len()).sum();
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut col_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for row in rows {
            for (c, v) in row {
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        SparseMatrix {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[a..b], &self.values[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols);
        let mut y = vec![0.0; self.n_rows];
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            let mut s = 0.0;
            for (&c, &v) in cols.iter().zip(vals) {
                s += v * x[c];
            }
            y[i] = s;
        }
        y
    }

    pub fn transpose_matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_rows);
        let mut y = vec![0.0; self.n_cols];
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                y[c] += v * x[i];
            }
        }
        y
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut b = SparseBuilder::new(self.n_cols, self.n_rows);
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                b.add(c, i, v);
            }
        }
        b.build()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest |A_ij - A_ji| relative to max(1, |A_ij|) over stored entries.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let d = (v - self.get(j, i)).abs() / 1.0f64.max(v.abs());
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Writes the matrix in MatrixMarket coordinate format (debug aid).
    pub fn write_matrix_market(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(out, "{} {} {}", self.n_rows, self.n_cols, self.nnz())?;
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                writeln!(out, "{} {} {:.16e}", i + 1, c + 1, v)?;
            }
        }
        Ok(())
    }
}

/// Incremental row-wise assembly helper; entries added to the same slot sum.
pub struct SparseBuilder {
    n_rows: usize,
    n_cols: usize,
    rows: Vec<BTreeMap<usize, f64>>,
}

impl SparseBuilder {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        SparseBuilder {
            n_rows,
            n_cols,
            rows: vec![BTreeMap::new(); n_rows],
        }
    }

    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.n_rows && c < self.n_cols);
        *self.rows[r].entry(c).or_insert(0.0) += v;
    }

    pub fn build(self) -> SparseMatrix {
        SparseMatrix::from_rows(self.n_rows, self.n_cols, self.rows)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FactorKind {
    /// Symmetric positive definite: band Cholesky.
    Spd,
    /// General square: band LU with partial pivoting.
    General,
}

/// Reusable direct factorization of a square [`SparseMatrix`], preceded by a
/// reverse Cuthill-McKee reordering.
pub struct Factorization {
    n: usize,
    kind: FactorKind,
    /// perm[new] = old.
    perm: Vec<usize>,
    kl: usize,
    width: usize,
    band: Vec<f64>,
    /// LU row interchanges (empty for Cholesky).
    piv: Vec<usize>,
}

const PIVOT_REL_TOL: f64 = 1e-14;

pub fn factorize(a: &SparseMatrix, kind: FactorKind) -> Result<Factorization> {
    if a.n_rows != a.n_cols {
        return Err(HessdiscError::NotSquare {
            n_rows: a.n_rows,
            n_cols: a.n_cols,
        });
    }
    if kind == FactorKind::Spd {
        check_symmetric(a)?;
    }
    let n = a.n_rows;
    let perm = reverse_cuthill_mckee(a);
    let mut iperm = vec![0usize; n];
    for (new, &old) in perm.iter().enumerate() {
        iperm[old] = new;
    }
    // Half bandwidth of the permuted matrix.
    let mut kl = 0usize;
    for i in 0..n {
        let (cols, _) = a.row(i);
        for &j in cols {
            kl = kl.max(iperm[i].abs_diff(iperm[j]));
        }
    }
    let max_diag = (0..n).map(|i| a.get(i, i).abs()).fold(0.0f64, f64::max);
    let pivot_tol = PIVOT_REL_TOL * max_diag.max(f64::MIN_POSITIVE);

    match kind {
        FactorKind::Spd => {
            let width = kl + 1;
            // Lower band, row-major: entry (i, j), j in [i-kl, i].
            let mut band = vec![0.0; n * width];
            for i in 0..n {
                let (cols, vals) = a.row(i);
                for (&j, &v) in cols.iter().zip(vals) {
                    let (pi, pj) = (iperm[i], iperm[j]);
                    if pj <= pi {
                        band[pi * width + (kl - (pi - pj))] = v;
                    }
                }
            }
            band_cholesky(&mut band, n, kl, pivot_tol, &perm)?;
            Ok(Factorization {
                n,
                kind,
                perm,
                kl,
                width,
                band,
                piv: Vec::new(),
            })
        }
        FactorKind::General => {
            // Row i covers columns [i-kl, i+2*kl]: the extra kl columns
            // absorb fill from row interchanges.
            let width = 3 * kl + 1;
            let mut band = vec![0.0; n * width];
            for i in 0..n {
                let (cols, vals) = a.row(i);
                for (&j, &v) in cols.iter().zip(vals) {
                    let (pi, pj) = (iperm[i], iperm[j]);
                    band[pi * width + (pj + kl - pi)] = v;
                }
            }
            let piv = band_lu(&mut band, n, kl, pivot_tol, &perm)?;
            Ok(Factorization {
                n,
                kind,
                perm,
                kl,
                width,
                band,
                piv,
            })
        }
    }
}

impl Factorization {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> FactorKind {
        self.kind
    }

    /// Identifier of the fill-reducing ordering, recorded in run metadata.
    pub fn ordering_id(&self) -> &'static str {
        "reverse-cuthill-mckee"
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let kl = self.kl;
        let w = self.width;
        let mut x: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        match self.kind {
            FactorKind::Spd => {
                // L y = b, then L^T x = y, with L unit off-diagonal scaling
                // stored as plain Cholesky factors.
                for i in 0..n {
                    let lo = i.saturating_sub(kl);
                    let mut s = x[i];
                    for j in lo..i {
                        s -= self.band[i * w + (kl - (i - j))] * x[j];
                    }
                    x[i] = s / self.band[i * w + kl];
                }
                for i in (0..n).rev() {
                    let hi = (i + kl).min(n - 1);
                    let mut s = x[i];
                    for j in i + 1..=hi {
                        s -= self.band[j * w + (kl - (j - i))] * x[j];
                    }
                    x[i] = s / self.band[i * w + kl];
                }
            }
            FactorKind::General => {
                for k in 0..n {
                    let p = self.piv[k];
                    if p != k {
                        x.swap(k, p);
                    }
                    let hi = (k + kl).min(n - 1);
                    for i in k + 1..=hi {
                        let m = self.band[i * w + (k + kl - i)];
                        if m != 0.0 {
                            x[i] -= m * x[k];
                        }
                    }
                }
                for i in (0..n).rev() {
                    let hi = (i + 2 * kl).min(n - 1);
                    let mut s = x[i];
                    for j in i + 1..=hi {
                        s -= self.band[i * w + (j + kl - i)] * x[j];
                    }
                    x[i] = s / self.band[i * w + kl];
                }
            }
        }
        let mut out = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            out[old] = x[new];
        }
        out
    }
}

fn check_symmetric(a: &SparseMatrix) -> Result<()> {
    for i in 0..a.n_rows {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            let d = (v - a.get(j, i)).abs();
            if d > 1e-12 * 1.0f64.max(v.abs()) {
                return Err(HessdiscError::NotSymmetric {
                    row: i,
                    col: j,
                    defect: d,
                });
            }
        }
    }
    Ok(())
}

/// In-place band Cholesky; `band` is row-major lower band of width kl+1.
fn band_cholesky(band: &mut [f64], n: usize, kl: usize, tol: f64, perm: &[usize]) -> Result<()> {
    let w = kl + 1;
    for i in 0..n {
        let lo = i.saturating_sub(kl);
        for j in lo..=i {
            let mut s = band[i * w + (kl - (i - j))];
            let kstart = lo.max(j.saturating_sub(kl));
            for k in kstart..j {
                s -= band[i * w + (kl - (i - k))] * band[j * w + (kl - (j - k))];
            }
            if j < i {
                band[i * w + (kl - (i - j))] = s / band[j * w + kl];
            } else {
                if s <= tol * tol.max(1.0) || s <= 0.0 {
                    return Err(HessdiscError::Singular {
                        row: perm[i],
                        pivot: s,
                    });
                }
                band[i * w + kl] = s.sqrt();
            }
        }
    }
    Ok(())
}

/// In-place band LU with partial pivoting; rows cover [i-kl, i+2kl].
fn band_lu(band: &mut [f64], n: usize, kl: usize, tol: f64, perm: &[usize]) -> Result<Vec<usize>> {
    let w = 3 * kl + 1;
    let mut piv = vec![0usize; n];
    for k in 0..n {
        let ihi = (k + kl).min(n - 1);
        // Pivot search in column k.
        let mut p = k;
        let mut best = 0.0f64;
        for i in k..=ihi {
            let off = k + kl;
            if off >= i && off - i < w {
                let v = band[i * w + (off - i)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
        }
        if best < tol {
            return Err(HessdiscError::Singular {
                row: perm[k],
                pivot: best,
            });
        }
        piv[k] = p;
        if p != k {
            // Swap the column ranges [k, k+2kl] of rows k and p.
            let jhi = (k + 2 * kl).min(n - 1);
            for j in k..=jhi {
                let ok = j + kl >= k && j + kl - k < w;
                let op = j + kl >= p && j + kl - p < w;
                let vk = if ok { band[k * w + (j + kl - k)] } else { 0.0 };
                let vp = if op { band[p * w + (j + kl - p)] } else { 0.0 };
                if ok {
                    band[k * w + (j + kl - k)] = vp;
                }
                if op {
                    band[p * w + (j + kl - p)] = vk;
                }
            }
        }
        let pivot = band[k * w + kl];
        let jhi = (k + 2 * kl).min(n - 1);
        for i in k + 1..=ihi {
            let m = band[i * w + (k + kl - i)] / pivot;
            band[i * w + (k + kl - i)] = m;
            if m != 0.0 {
                for j in k + 1..=jhi {
                    band[i * w + (j + kl - i)] -= m * band[k * w + (j + kl - k)];
                }
            }
        }
    }
    Ok(piv)
}

/// Reverse Cuthill-McKee ordering on the symmetrized pattern; ties are broken
/// by vertex index so the result is reproducible.
fn reverse_cuthill_mckee(a: &SparseMatrix) -> Vec<usize> {
    let n = a.n_rows;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        let (cols, _) = a.row(i);
        for &j in cols {
            if j != i {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for l in adj.iter_mut() {
        l.sort_unstable();
        l.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(|l| l.len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    loop {
        // Lowest-degree unvisited vertex seeds the next component.
        let seed = match (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| (degree[i], i))
        {
            Some(s) => s,
            None => break,
        };
        visited[seed] = true;
        let mut queue = std::collections::VecDeque::from([seed]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = adj[v].iter().copied().filter(|&u| !visited[u]).collect();
            nbrs.sort_by_key(|&u| (degree[u], u));
            for u in nbrs {
                visited[u] = true;
                queue.push_back(u);
            }
        }
    }
    order.reverse();
    order
}

/// Solves the coupled system [[A11, A12], [A21, A22]] [x1; x2] = [b1; b2]
/// through one monolithic band LU.
pub fn solve_block_2x2(
    a11: &SparseMatrix,
    a12: &SparseMatrix,
    a21: &SparseMatrix,
    a22: &SparseMatrix,
    b1: &[f64],
    b2: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n1 = a11.n_rows;
    let n2 = a22.n_rows;
    let conformable = a11.n_cols == n1
        && a22.n_cols == n2
        && a12.n_rows == n1
        && a12.n_cols == n2
        && a21.n_rows == n2
        && a21.n_cols == n1
        && b1.len() == n1
        && b2.len() == n2;
    if !conformable {
        return Err(HessdiscError::BlockShape(format!(
            "A11 {}x{}, A12 {}x{}, A21 {}x{}, A22 {}x{}, b1 {}, b2 {}",
            a11.n_rows,
            a11.n_cols,
            a12.n_rows,
            a12.n_cols,
            a21.n_rows,
            a21.n_cols,
            a22.n_rows,
            a22.n_cols,
            b1.len(),
            b2.len()
        )));
    }
    let mut builder = SparseBuilder::new(n1 + n2, n1 + n2);
    let insert = |m: &SparseMatrix, ro: usize, co: usize, builder: &mut SparseBuilder| {
        for i in 0..m.n_rows {
            let (cols, vals) = m.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                builder.add(ro + i, co + c, v);
            }
        }
    };
    insert(a11, 0, 0, &mut builder);
    insert(a12, 0, n1, &mut builder);
    insert(a21, n1, 0, &mut builder);
    insert(a22, n1, n1, &mut builder);
    let coupled = builder.build();
    let factor = factorize(&coupled, FactorKind::General)?;
    let mut rhs = Vec::with_capacity(n1 + n2);
    rhs.extend_from_slice(b1);
    rhs.extend_from_slice(b2);
    let x = factor.solve(&rhs);
    Ok((x[..n1].to_vec(), x[n1..].to_vec()))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
