//! Row-major dense matrices and the few factorizations the solver needs.

use std::ops::{Index, IndexMut};

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_diag(d: &[T]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, v) in d.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    /// Builds a matrix from row slices. All rows must have equal length.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.as_ref().len(), cols, "ragged rows");
            data.extend_from_slice(r.as_ref());
        }
        Mat {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Mat { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Mutable views of two distinct rows, `a < b`.
    pub fn rows_pair_mut(&mut self, a: usize, b: usize) -> (&mut [T], &mut [T]) {
        assert!(a < b && b < self.rows);
        let cols = self.cols;
        let (head, tail) = self.data.split_at_mut(b * cols);
        (&mut head[a * cols..(a + 1) * cols], &mut tail[..cols])
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(x)
                    .filter(|(a, _)| !a.is_zero())
                    .map(|(a, b)| *a * *b)
                    .sum()
            })
            .collect()
    }

    /// `selfᵀ · y`.
    pub fn tr_mul_vec(&self, y: &[T]) -> Vec<T> {
        assert_eq!(y.len(), self.rows);
        let mut out = vec![T::zero(); self.cols];
        for (i, yi) in y.iter().enumerate() {
            if yi.is_zero() {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += *a * *yi;
            }
        }
        out
    }

    /// `self · other`, skipping zero entries of `self` (the constraint
    /// matrices assembled by the controllers are very sparse).
    pub fn mul(&self, other: &Mat<T>) -> Mat<T> {
        assert_eq!(self.cols, other.rows);
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                let src = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += a * *s;
                }
            }
        }
        out
    }

    pub fn max_abs(&self) -> T {
        crate::scalar::norm_inf(&self.data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Swaps columns `a` and `b` in place.
    pub fn swap_cols(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for i in 0..self.rows {
            self.data.swap(i * self.cols + a, i * self.cols + b);
        }
    }

    /// Copy with the listed rows and columns kept, in the given order.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Mat<T> {
        let mut out = Mat::zeros(rows.len(), cols.len());
        for (oi, &i) in rows.iter().enumerate() {
            for (oj, &j) in cols.iter().enumerate() {
                out[(oi, oj)] = self[(i, j)];
            }
        }
        out
    }
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Lower Cholesky factor `L` with `A = L Lᵀ`, or `None` when `A` is not
/// numerically positive definite.
/// Compressed sparse rows, for repeated products with a fixed matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr<T> {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    idx: Vec<usize>,
    val: Vec<T>,
}

impl<T: Scalar> Csr<T> {
    pub fn from_dense(m: &Mat<T>) -> Self {
        let mut indptr = Vec::with_capacity(m.rows() + 1);
        let mut idx = Vec::new();
        let mut val = Vec::new();
        indptr.push(0);
        for i in 0..m.rows() {
            for (j, v) in m.row(i).iter().enumerate() {
                if !v.is_zero() {
                    idx.push(j);
                    val.push(*v);
                }
            }
            indptr.push(idx.len());
        }
        Csr {
            rows: m.rows(),
            cols: m.cols(),
            indptr,
            idx,
            val,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let r = self.indptr[i]..self.indptr[i + 1];
        (&self.idx[r.clone()], &self.val[r])
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                let (idx, val) = self.row(i);
                idx.iter()
                    .zip(val)
                    .fold(T::zero(), |acc, (&j, &v)| acc + v * x[j])
            })
            .collect()
    }

    pub fn tr_mul_vec(&self, y: &[T]) -> Vec<T> {
        debug_assert_eq!(y.len(), self.rows);
        let mut out = vec![T::zero(); self.cols];
        for (i, &yi) in y.iter().enumerate() {
            if yi.is_zero() {
                continue;
            }
            let (idx, val) = self.row(i);
            for (&j, &v) in idx.iter().zip(val) {
                out[j] += v * yi;
            }
        }
        out
    }
}

pub fn cholesky<T: Scalar>(a: &Mat<T>) -> Option<Mat<T>> {
    let n = a.rows();
    assert_eq!(n, a.cols());
    let mut l = Mat::zeros(n, n);
    let scale = a.max_abs().max(T::min_positive_value());
    let tiny = T::epsilon() * T::lit(16.0) * scale * T::from_usize_lossy(n.max(1));
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > tiny) {
            return None;
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Some(l)
}

/// Inverse of a nonsingular lower-triangular matrix (itself lower triangular).
pub fn lower_inverse<T: Scalar>(l: &Mat<T>) -> Mat<T> {
    let n = l.rows();
    // Solve L X = I column by column; X is lower triangular.
    let mut x = Mat::zeros(n, n);
    for c in 0..n {
        for i in c..n {
            let mut s = if i == c { T::one() } else { T::zero() };
            for k in c..i {
                s -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    x
}

/// LU factorization with partial pivoting of a square matrix.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    lu: Mat<T>,
    perm: Vec<usize>,
}

impl<T: Scalar> Lu<T> {
    pub fn new(mut a: Mat<T>) -> Option<Self> {
        let n = a.rows();
        assert_eq!(n, a.cols());
        let mut perm: Vec<usize> = (0..n).collect();
        let tiny = T::epsilon() * a.max_abs();
        for k in 0..n {
            let (p, pv) = (k..n)
                .map(|i| (i, a[(i, k)].abs()))
                .fold(
                    (k, -T::one()),
                    |best, c| if c.1 > best.1 { c } else { best },
                );
            if !(pv > tiny) {
                return None;
            }
            if p != k {
                for j in 0..n {
                    let t = a[(k, j)];
                    a[(k, j)] = a[(p, j)];
                    a[(p, j)] = t;
                }
                perm.swap(k, p);
            }
            let piv = a[(k, k)];
            for i in k + 1..n {
                let f = a[(i, k)] / piv;
                if f.is_zero() {
                    continue;
                }
                a[(i, k)] = f;
                for j in k + 1..n {
                    let v = a[(k, j)];
                    a[(i, j)] -= f * v;
                }
            }
        }
        Some(Lu { lu: a, perm })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.lu.rows();
        let mut y: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for k in 0..i {
                let l = self.lu[(i, k)];
                y[i] = y[i] - l * y[k];
            }
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                let u = self.lu[(i, k)];
                y[i] = y[i] - u * y[k];
            }
            y[i] = y[i] / self.lu[(i, i)];
        }
        y
    }
}

/// Least-squares solution of `A w ≈ b` by Householder QR with column
/// pivoting. Rank-deficient columns get a zero coefficient.
pub fn lstsq<T: Scalar>(a: &Mat<T>, b: &[T]) -> Vec<T> {
    let (m, k) = (a.rows(), a.cols());
    assert_eq!(b.len(), m);
    let mut r = a.clone();
    let mut rhs = b.to_vec();
    let mut perm: Vec<usize> = (0..k).collect();
    let tol = T::epsilon() * T::lit(1e3) * a.max_abs().max(T::min_positive_value());
    let mut rank = 0;
    for j in 0..m.min(k) {
        let col_norm =
            |r: &Mat<T>, c: usize| -> T { (j..m).map(|i| r[(i, c)] * r[(i, c)]).sum::<T>().sqrt() };
        let (best, bn) = (j..k)
            .map(|c| (c, col_norm(&r, c)))
            .fold((j, -T::one()), |acc, c| if c.1 > acc.1 { c } else { acc });
        if !(bn > tol) {
            break;
        }
        r.swap_cols(j, best);
        perm.swap(j, best);
        let alpha = if r[(j, j)] > T::zero() { -bn } else { bn };
        let mut v: Vec<T> = (j..m).map(|i| r[(i, j)]).collect();
        v[0] -= alpha;
        let vnorm2: T = v.iter().map(|x| *x * *x).sum();
        if vnorm2 > T::zero() {
            for c in j..k {
                let s: T = (j..m).map(|i| v[i - j] * r[(i, c)]).sum();
                let f = T::two() * s / vnorm2;
                for i in j..m {
                    r[(i, c)] -= f * v[i - j];
                }
            }
            let s: T = (j..m).map(|i| v[i - j] * rhs[i]).sum();
            let f = T::two() * s / vnorm2;
            for i in j..m {
                rhs[i] -= f * v[i - j];
            }
        }
        rank = j + 1;
    }
    let mut w_perm = vec![T::zero(); k];
    for i in (0..rank).rev() {
        let mut s = rhs[i];
        for c in i + 1..rank {
            s -= r[(i, c)] * w_perm[c];
        }
        w_perm[i] = s / r[(i, i)];
    }
    let mut w = vec![T::zero(); k];
    for (pos, &orig) in perm.iter().enumerate() {
        w[orig] = w_perm[pos];
    }
    w
}
