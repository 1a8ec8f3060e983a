//! Sparse superoperators and a banded LU used for stationary states.
//!
//! Density matrices are vectorized column-major (`k = i + j*d`), which is
//! nalgebra's storage order, so `DMatrix::as_slice` is the vectorization.
//! With that ordering every generator built from one ladder operator has
//! bandwidth `d + 1`.

use crate::fock::ComplexMatrix;
use crate::C64;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<C64>,
}

impl CsrMatrix {
    /// Build from unsorted triplets; duplicates are summed and exact zeros
    /// dropped.
    pub fn from_triplets(n_rows: usize, n_cols: usize, mut triplets: Vec<(usize, usize, C64)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut rows: Vec<usize> = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            debug_assert!(r < n_rows && c < n_cols);
            if let (Some(&lr), Some(&lc)) = (rows.last(), col_idx.last()) {
                if lr == r && lc == c {
                    *values.last_mut().unwrap() += v;
                    continue;
                }
            }
            rows.push(r);
            col_idx.push(c);
            values.push(v);
        }
        let keep: Vec<bool> = values.iter().map(|v| *v != ZERO).collect();
        let mut k = 0;
        rows.retain(|_| {
            k += 1;
            keep[k - 1]
        });
        k = 0;
        col_idx.retain(|_| {
            k += 1;
            keep[k - 1]
        });
        values.retain(|v| *v != ZERO);
        for &r in &rows {
            row_ptr[r + 1] += 1;
        }
        for r in 0..n_rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
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

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[C64], y: &mut [C64]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(y.len(), self.n_rows);
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = ZERO;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *out = acc;
        }
    }

    /// `y += scale * A x`.
    pub fn mul_vec_add(&self, scale: f64, x: &[C64], y: &mut [C64]) {
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = ZERO;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *out += acc * scale;
        }
    }

    /// Induced 1-norm (largest absolute column sum).
    pub fn norm_one(&self) -> f64 {
        let mut sums = vec![0.0; self.n_cols];
        for (c, v) in self.col_idx.iter().zip(&self.values) {
            sums[*c] += v.norm();
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    /// Lower and upper bandwidths.
    pub fn bandwidths(&self) -> (usize, usize) {
        let mut lower = 0;
        let mut upper = 0;
        for r in 0..self.n_rows {
            for (c, _) in self.row(r) {
                if c < r {
                    lower = lower.max(r - c);
                } else {
                    upper = upper.max(c - r);
                }
            }
        }
        (lower, upper)
    }

    /// `B[r][c] = A[perm[r]][perm[c]]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut inv = vec![0; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut t = Vec::with_capacity(self.nnz());
        for (new, &old) in perm.iter().enumerate() {
            t.extend(self.row(old).map(|(c, v)| (new, inv[c], v)));
        }
        Self::from_triplets(self.n_rows, self.n_cols, t)
    }

    pub fn to_dense(&self) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(self.n_rows, self.n_cols);
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                m[(r, c)] += v;
            }
        }
        m
    }
}

/// Nonzero entries of a dense operator.
pub(crate) fn nonzeros(m: &ComplexMatrix) -> Vec<(usize, usize, C64)> {
    let mut out = Vec::new();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let v = m[(i, j)];
            if v != ZERO {
                out.push((i, j, v));
            }
        }
    }
    out
}

/// Accumulates the vectorized form of maps `rho -> A rho B`.
pub(crate) struct SuperopBuilder {
    d: usize,
    triplets: Vec<(usize, usize, C64)>,
}

impl SuperopBuilder {
    pub(crate) fn new(d: usize) -> Self {
        Self {
            d,
            triplets: Vec::new(),
        }
    }

    /// `rho -> s * A rho`.
    pub(crate) fn left(&mut self, a: &ComplexMatrix, s: C64) {
        let d = self.d;
        for (i, k, v) in nonzeros(a) {
            for j in 0..d {
                self.triplets.push((i + j * d, k + j * d, v * s));
            }
        }
    }

    /// `rho -> s * rho B`.
    pub(crate) fn right(&mut self, b: &ComplexMatrix, s: C64) {
        let d = self.d;
        for (k, j, v) in nonzeros(b) {
            for i in 0..d {
                self.triplets.push((i + j * d, i + k * d, v * s));
            }
        }
    }

    /// `rho -> s * A rho B`.
    pub(crate) fn sandwich(&mut self, a: &ComplexMatrix, b: &ComplexMatrix, s: C64) {
        let d = self.d;
        let bz = nonzeros(b);
        for (i, k, va) in nonzeros(a) {
            for &(l, j, vb) in &bz {
                self.triplets.push((i + j * d, k + l * d, va * vb * s));
            }
        }
    }

    pub(crate) fn build(self) -> CsrMatrix {
        let n = self.d * self.d;
        CsrMatrix::from_triplets(n, n, self.triplets)
    }
}

/// LU factorization with partial pivoting of a banded matrix.
///
/// Row `r` stores columns `r - kl ..= r + kl + ku`, which holds the upper
/// factor's fill-in; multipliers are kept separately.
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<C64>,
    multipliers: Vec<C64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    /// Factor `a`. Exactly zero pivots are replaced by `eps * ||a||_1` so a
    /// singular matrix still factors, which is what inverse iteration needs.
    pub fn factor(a: &CsrMatrix) -> Self {
        assert_eq!(a.n_rows(), a.n_cols(), "banded LU needs a square matrix");
        let n = a.n_rows();
        let (kl, ku) = a.bandwidths();
        let width = 2 * kl + ku + 1;
        let mut lu = Self {
            n,
            kl,
            ku,
            width,
            data: vec![ZERO; n * width],
            multipliers: vec![ZERO; n * kl.max(1)],
            pivots: vec![0; n],
        };
        for r in 0..n {
            for (c, v) in a.row(r) {
                *lu.at_mut(r, c) = v;
            }
        }
        let floor = f64::EPSILON * a.norm_one().max(f64::MIN_POSITIVE);
        for i in 0..n {
            let last_row = (i + kl).min(n - 1);
            let last_col = (i + kl + ku).min(n - 1);
            let mut p = i;
            let mut best = lu.at(i, i).norm();
            for r in (i + 1)..=last_row {
                let v = lu.at(r, i).norm();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            lu.pivots[i] = p;
            if p != i {
                for j in i..=last_col {
                    let a_ij = lu.at(i, j);
                    let a_pj = lu.at(p, j);
                    *lu.at_mut(i, j) = a_pj;
                    *lu.at_mut(p, j) = a_ij;
                }
            }
            if lu.at(i, i).norm() < floor {
                *lu.at_mut(i, i) = C64::new(floor, 0.0);
            }
            let pivot = lu.at(i, i);
            for r in (i + 1)..=last_row {
                let f = lu.at(r, i) / pivot;
                lu.multipliers[i * kl + (r - i - 1)] = f;
                *lu.at_mut(r, i) = ZERO;
                if f != ZERO {
                    for j in (i + 1)..=last_col {
                        let u = lu.at(i, j);
                        *lu.at_mut(r, j) -= f * u;
                    }
                }
            }
        }
        lu
    }

    #[inline]
    fn offset(&self, r: usize, c: usize) -> usize {
        debug_assert!(c + self.kl >= r && c <= r + self.kl + self.ku);
        r * self.width + (c + self.kl - r)
    }

    #[inline]
    fn at(&self, r: usize, c: usize) -> C64 {
        self.data[self.offset(r, c)]
    }

    #[inline]
    fn at_mut(&mut self, r: usize, c: usize) -> &mut C64 {
        let k = self.offset(r, c);
        &mut self.data[k]
    }

    /// Solve `A x = b` in place.
    pub fn solve(&self, b: &mut [C64]) {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        for i in 0..n {
            let p = self.pivots[i];
            if p != i {
                b.swap(i, p);
            }
            let bi = b[i];
            if bi != ZERO {
                for r in (i + 1)..=(i + kl).min(n - 1) {
                    b[r] -= self.multipliers[i * kl + (r - i - 1)] * bi;
                }
            }
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in (i + 1)..=(i + kl + ku).min(n - 1) {
                s -= self.at(i, j) * b[j];
            }
            b[i] = s / self.at(i, i);
        }
    }
}

/// Right null vector of a (numerically) singular matrix by inverse iteration,
/// scaled to unit max-norm.
pub fn null_vector(a: &CsrMatrix, iterations: usize) -> Vec<C64> {
    let lu = BandedLu::factor(a);
    let n = a.n_rows();
    let mut x: Vec<C64> = (0..n)
        .map(|k| C64::new(1.0 + (k % 7) as f64 * 0.1, 0.0))
        .collect();
    for _ in 0..iterations.max(1) {
        lu.solve(&mut x);
        let scale = x.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if scale > 0.0 && scale.is_finite() {
            for v in &mut x {
                *v /= scale;
            }
        }
    }
    x
}

/// Column-major `d x d` indices sorted by diagonal offset `j - i`, then row.
/// Phase-covariant generators become block tridiagonal in this order.
pub fn diagonal_ordering(d: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..d * d).collect();
    idx.sort_by_key(|&k| {
        let (i, j) = (k % d, k / d);
        (j as isize - i as isize, i)
    });
    idx
}
