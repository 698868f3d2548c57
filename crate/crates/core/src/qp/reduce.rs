//! Equality elimination: `x = x_p(b_eq) + Z·y` with `Z` spanning the
//! nullspace of `A_eq`, followed by the reduced Hessian factorization.
//!
//! Everything here depends only on `P`, `A_eq` and `A_in`, so the result is
//! cached and reused while those matrices stay bit-identical (the planning
//! and tracking layers re-solve the same structure with new vectors).

use super::dense::{cholesky, lower_inverse, Csr, Lu, Mat};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub(crate) struct Reduction<T> {
    p: Mat<T>,
    a_eq: Mat<T>,
    a_in: Mat<T>,
    /// Sparse copies of `P`, `A_eq` and `A_in`.
    pub p_s: Csr<T>,
    pub a_eq_s: Csr<T>,
    pub a_in_s: Csr<T>,
    /// n × nr nullspace basis.
    pub z: Csr<T>,
    /// n × me map from `b_eq` to the particular solution.
    pub xp_map: Csr<T>,
    /// Row combinations of `b_eq` that must vanish for consistency.
    pub consistency: Csr<T>,
    /// nr × me map from `b_eq` to the reduced linear term.
    pub g_map: Csr<T>,
    /// mi × me map from `b_eq` to `A_in x_p`.
    pub ain_xp_map: Csr<T>,
    /// Nonzeros of the reduced constraint matrix `A_in Z`, by row.
    pub c_rows: Vec<Vec<(usize, T)>>,
    /// `L⁻¹` for the reduced Hessian `ZᵀPZ = L Lᵀ`.
    pub l_inv: Mat<T>,
    /// Original indices of the independent equality rows and basic columns.
    pub kept_rows: Vec<usize>,
    pub basis: Vec<usize>,
    /// Factorization of `A_eq[kept, basis]ᵀ` for equality multipliers.
    pub basis_lu: Option<Lu<T>>,
}

pub(crate) enum ReduceError {
    /// `P` is not positive definite on the nullspace of `A_eq`.
    NotStrictlyConvex,
}

impl<T: Scalar> Reduction<T> {
    pub fn matches(&self, p: &Mat<T>, a_eq: &Mat<T>, a_in: &Mat<T>) -> bool {
        self.p == *p && self.a_eq == *a_eq && self.a_in == *a_in
    }

    pub fn new(p: &Mat<T>, a_eq: &Mat<T>, a_in: &Mat<T>) -> Result<Self, ReduceError> {
        let n = p.rows();
        let me = a_eq.rows();

        // Reduced row echelon form of [A_eq | I] with complete pivoting.
        let mut w = Mat::zeros(me, n + me);
        for i in 0..me {
            w.row_mut(i)[..n].copy_from_slice(a_eq.row(i));
            w[(i, n + i)] = T::one();
        }
        let mut row_origin: Vec<usize> = (0..me).collect();
        let mut is_basic = vec![false; n];
        let mut pivots: Vec<usize> = Vec::new();
        let tol = T::epsilon() * T::lit(1e3) * a_eq.max_abs().max(T::one());
        for k in 0..me {
            let mut best = (k, 0usize, T::zero());
            for i in k..me {
                let row = &w.row(i)[..n];
                for (j, v) in row.iter().enumerate() {
                    if !is_basic[j] && v.abs() > best.2 {
                        best = (i, j, v.abs());
                    }
                }
            }
            let (pi, pj, pv) = best;
            if !(pv > tol) {
                break;
            }
            if pi != k {
                for j in 0..n + me {
                    let t = w[(k, j)];
                    w[(k, j)] = w[(pi, j)];
                    w[(pi, j)] = t;
                }
                row_origin.swap(k, pi);
            }
            let inv = T::one() / w[(k, pj)];
            for v in w.row_mut(k) {
                *v *= inv;
            }
            w[(k, pj)] = T::one();
            let pivot_row = w.row(k).to_vec();
            for i in 0..me {
                if i == k {
                    continue;
                }
                let f = w[(i, pj)];
                if f.is_zero() {
                    continue;
                }
                for (d, s) in w.row_mut(i).iter_mut().zip(&pivot_row) {
                    if !s.is_zero() {
                        *d -= f * *s;
                    }
                }
                w[(i, pj)] = T::zero();
            }
            is_basic[pj] = true;
            pivots.push(pj);
        }
        let rank = pivots.len();
        let free: Vec<usize> = (0..n).filter(|&j| !is_basic[j]).collect();
        let nr = free.len();

        let mut z = Mat::zeros(n, nr);
        for (c, &j) in free.iter().enumerate() {
            z[(j, c)] = T::one();
        }
        let mut xp_map = Mat::zeros(n, me);
        for (k, &pj) in pivots.iter().enumerate() {
            for (c, &j) in free.iter().enumerate() {
                z[(pj, c)] = -w[(k, j)];
            }
            xp_map.row_mut(pj).copy_from_slice(&w.row(k)[n..]);
        }
        let mut consistency = Mat::zeros(me - rank, me);
        for k in rank..me {
            consistency
                .row_mut(k - rank)
                .copy_from_slice(&w.row(k)[n..]);
        }

        let pz = p.mul(&z);
        let zt = z.transpose();
        let h = zt.mul(&pz);
        let g_map = zt.mul(&p.mul(&xp_map));
        let l = cholesky(&h).ok_or(ReduceError::NotStrictlyConvex)?;
        let l_inv = lower_inverse(&l);

        let kept_rows: Vec<usize> = row_origin[..rank].to_vec();
        let basis = pivots;
        let basis_lu = if rank > 0 {
            Lu::new(a_eq.select(&kept_rows, &basis).transpose())
        } else {
            None
        };

        let c = a_in.mul(&z);
        let c_rows = (0..c.rows())
            .map(|i| {
                c.row(i)
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| !v.is_zero())
                    .map(|(j, v)| (j, *v))
                    .collect()
            })
            .collect();

        Ok(Reduction {
            p: p.clone(),
            a_eq: a_eq.clone(),
            a_in: a_in.clone(),
            c_rows,
            ain_xp_map: Csr::from_dense(&a_in.mul(&xp_map)),
            z: Csr::from_dense(&z),
            xp_map: Csr::from_dense(&xp_map),
            consistency: Csr::from_dense(&consistency),
            g_map: Csr::from_dense(&g_map),
            p_s: Csr::from_dense(p),
            a_eq_s: Csr::from_dense(a_eq),
            a_in_s: Csr::from_dense(a_in),
            l_inv,
            kept_rows,
            basis,
            basis_lu,
        })
    }

    /// Equality multipliers from the residual `r = Px + q + A_inᵀλ`.
    pub fn equality_multipliers(&self, r: &[T], me: usize) -> Vec<T> {
        let mut nu = vec![T::zero(); me];
        if let Some(lu) = &self.basis_lu {
            let rhs: Vec<T> = self.basis.iter().map(|&j| -r[j]).collect();
            let sol = lu.solve(&rhs);
            for (k, &row) in self.kept_rows.iter().enumerate() {
                nu[row] = sol[k];
            }
        }
        nu
    }
}
