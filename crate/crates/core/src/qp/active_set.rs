//! Goldfarb–Idnani dual active-set method for
//! `min ½ yᵀHy + gᵀy  s.t.  lo ≤ C y ≤ hi` with `H` positive definite.
//!
//! Starts from the unconstrained minimizer and adds violated constraints
//! one at a time, keeping the iterate dual feasible. `J = L⁻ᵀQ` and the
//! upper-triangular `R` are updated with Givens rotations, so each add or
//! drop costs O(nr²). `J` is stored transposed so that its columns are
//! contiguous rows.

use super::dense::Mat;
use super::{PivotRule, QpStatus};
use crate::scalar::Scalar;

pub(crate) struct ActiveSetOutput<T> {
    pub y: Vec<T>,
    pub status: QpStatus,
    pub iterations: usize,
    /// Signed multiplier per constraint row: `upper − lower`, so that the
    /// reduced stationarity reads `H y + g + Cᵀλ = 0`.
    pub lambda: Vec<T>,
}

/// One side of a two-sided row, written as `sign · c_rowᵀ y ≥ bound`.
#[derive(Clone, Copy)]
struct Side<T> {
    row: usize,
    sign: T,
    bound: T,
    tol: T,
}

pub(crate) struct Problem<'a, T> {
    pub l_inv: &'a Mat<T>,
    pub g: &'a [T],
    /// Rows of the reduced constraint matrix as `(column, value)` pairs.
    pub c: &'a [Vec<(usize, T)>],
    pub lo: &'a [T],
    pub hi: &'a [T],
    pub feas_tol: T,
    pub max_iterations: usize,
    pub pivot: PivotRule,
}

pub(crate) fn solve<T: Scalar>(pb: &Problem<'_, T>) -> ActiveSetOutput<T> {
    let nr = pb.g.len();
    let mi = pb.c.len();

    let mut sides: Vec<Side<T>> = Vec::with_capacity(2 * mi);
    for r in 0..mi {
        if pb.c[r].is_empty() {
            // Constant row: feasibility is decided outside the iteration.
            continue;
        }
        if pb.lo[r].is_finite() {
            sides.push(Side {
                row: r,
                sign: T::one(),
                bound: pb.lo[r],
                tol: pb.feas_tol * (T::one() + pb.lo[r].abs()),
            });
        }
        if pb.hi[r].is_finite() {
            sides.push(Side {
                row: r,
                sign: -T::one(),
                bound: -pb.hi[r],
                tol: pb.feas_tol * (T::one() + pb.hi[r].abs()),
            });
        }
    }

    // Jᵀ = L⁻¹ (rows of `jt` are the columns of J).
    let mut jt = pb.l_inv.clone();
    let w = jt.mul_vec(pb.g);
    let mut y = jt.tr_mul_vec(&w);
    for v in y.iter_mut() {
        *v = -*v;
    }

    let mut active: Vec<usize> = Vec::new();
    let mut u: Vec<T> = Vec::new();
    let mut r_mat = Mat::zeros(nr, nr);
    let mut is_active = vec![false; sides.len()];
    let mut iterations = 0usize;
    let mut d = vec![T::zero(); nr];
    let mut z = vec![T::zero(); nr];
    let mut rr: Vec<T> = Vec::with_capacity(nr);
    let mut cy = vec![T::zero(); mi];

    let eps = T::epsilon();
    let status = 'outer: loop {
        // Step 1: pick a violated constraint.
        for (r, v) in cy.iter_mut().enumerate() {
            *v = sparse_dot(&pb.c[r], &y);
        }
        let slack = |k: usize, cy: &[T]| sides[k].sign * cy[sides[k].row] - sides[k].bound;
        let chosen = match pb.pivot {
            PivotRule::MostViolated => {
                let mut best: Option<(usize, T)> = None;
                for k in 0..sides.len() {
                    if is_active[k] {
                        continue;
                    }
                    let s = slack(k, &cy);
                    if s < -sides[k].tol && best.map_or(true, |(_, b)| s < b) {
                        best = Some((k, s));
                    }
                }
                best.map(|b| b.0)
            }
            PivotRule::FirstViolated { start } => {
                let ns = sides.len();
                (0..ns)
                    .map(|i| (start + i) % ns.max(1))
                    .find(|&k| !is_active[k] && slack(k, &cy) < -sides[k].tol)
            }
        };
        let Some(p) = chosen else {
            break QpStatus::Optimal;
        };
        let sp = sides[p];
        let cp = &pb.c[sp.row];

        let mut u_plus = u.clone();
        u_plus.push(T::zero());
        loop {
            iterations += 1;
            if iterations > pb.max_iterations {
                break 'outer QpStatus::MaxIterations;
            }
            let q = active.len();
            // Step 2a: primal and dual directions.
            for (i, di) in d.iter_mut().enumerate() {
                *di = sp.sign * sparse_dot(cp, jt.row(i));
            }
            let dnorm2: T = d.iter().map(|v| *v * *v).sum();
            let zn: T = d[q..].iter().map(|v| *v * *v).sum();
            z.iter_mut().for_each(|v| *v = T::zero());
            for j in q..nr {
                let dj = d[j];
                if dj.is_zero() {
                    continue;
                }
                for (zi, ji) in z.iter_mut().zip(jt.row(j)) {
                    *zi += dj * *ji;
                }
            }
            rr.clear();
            rr.resize(q, T::zero());
            for i in (0..q).rev() {
                let mut s = d[i];
                for k in i + 1..q {
                    s -= r_mat[(i, k)] * rr[k];
                }
                rr[i] = s / r_mat[(i, i)];
            }

            // Step 2b: step lengths.
            let rmax = crate::scalar::norm_inf(&rr);
            let rtiny = eps * T::lit(100.0) * rmax.max(T::one());
            let mut t1 = T::infinity();
            let mut drop_at = None;
            for (j, &rj) in rr.iter().enumerate() {
                if rj > rtiny {
                    let ratio = u_plus[j] / rj;
                    if ratio < t1 {
                        t1 = ratio;
                        drop_at = Some(j);
                    }
                }
            }
            let s_p = sp.sign * sparse_dot(cp, &y) - sp.bound;
            let t2 = if zn > eps * T::lit(1e3) * dnorm2 {
                -s_p / zn
            } else {
                T::infinity()
            };

            if t1.is_infinite() && t2.is_infinite() {
                break 'outer QpStatus::Infeasible;
            }
            if t2.is_infinite() {
                // Dual step only, then drop the blocking constraint.
                for j in 0..q {
                    u_plus[j] -= t1 * rr[j];
                }
                u_plus[q] += t1;
                let l = drop_at.expect("finite t1 has an index");
                drop_constraint(
                    l,
                    &mut active,
                    &mut u_plus,
                    &mut is_active,
                    &mut r_mat,
                    &mut jt,
                );
                continue;
            }
            let t = t1.min(t2);
            for (yi, zi) in y.iter_mut().zip(&z) {
                *yi += t * *zi;
            }
            for j in 0..q {
                u_plus[j] -= t * rr[j];
            }
            u_plus[q] += t;

            if t2 <= t1 {
                // Full step: p becomes active.
                for j in (q + 1..nr).rev() {
                    let (a, b) = (d[j - 1], d[j]);
                    if b.is_zero() {
                        continue;
                    }
                    let h = a.hypot(b);
                    let (c, s) = (a / h, b / h);
                    d[j - 1] = h;
                    d[j] = T::zero();
                    rotate_rows(&mut jt, j - 1, j, c, s, 0);
                }
                for i in 0..=q {
                    r_mat[(i, q)] = d[i];
                }
                active.push(p);
                is_active[p] = true;
                u = u_plus;
                continue 'outer;
            }
            let l = drop_at.expect("partial step has an index");
            drop_constraint(
                l,
                &mut active,
                &mut u_plus,
                &mut is_active,
                &mut r_mat,
                &mut jt,
            );
        }
    };

    let mut lambda = vec![T::zero(); mi];
    for (k, &a) in active.iter().enumerate() {
        let s = sides[a];
        // sign·cᵀy ≥ b with multiplier u ≥ 0 contributes −sign·u·c to ∇.
        lambda[s.row] -= s.sign * u[k];
    }
    ActiveSetOutput {
        y,
        status,
        iterations,
        lambda,
    }
}

fn drop_constraint<T: Scalar>(
    l: usize,
    active: &mut Vec<usize>,
    u_plus: &mut Vec<T>,
    is_active: &mut [bool],
    r_mat: &mut Mat<T>,
    jt: &mut Mat<T>,
) {
    let q = active.len();
    is_active[active[l]] = false;
    active.remove(l);
    u_plus.remove(l);
    // Shift columns l+1.. of R left by one.
    for c in l..q - 1 {
        for i in 0..=c + 1 {
            r_mat[(i, c)] = r_mat[(i, c + 1)];
        }
    }
    for i in 0..q {
        r_mat[(i, q - 1)] = T::zero();
    }
    // Restore triangularity of the Hessenberg part.
    for j in l..q - 1 {
        let (a, b) = (r_mat[(j, j)], r_mat[(j + 1, j)]);
        if b.is_zero() {
            continue;
        }
        let h = a.hypot(b);
        let (c, s) = (a / h, b / h);
        for col in j..q - 1 {
            let (x, y) = (r_mat[(j, col)], r_mat[(j + 1, col)]);
            r_mat[(j, col)] = c * x + s * y;
            r_mat[(j + 1, col)] = -s * x + c * y;
        }
        r_mat[(j + 1, j)] = T::zero();
        rotate_rows(jt, j, j + 1, c, s, 0);
    }
}

#[inline]
fn sparse_dot<T: Scalar>(row: &[(usize, T)], x: &[T]) -> T {
    row.iter().fold(T::zero(), |acc, &(j, v)| acc + v * x[j])
}

#[inline]
fn rotate_rows<T: Scalar>(m: &mut Mat<T>, a: usize, b: usize, c: T, s: T, from: usize) {
    let (ra, rb) = m.rows_pair_mut(a, b);
    for (x, y) in ra[from..].iter_mut().zip(rb[from..].iter_mut()) {
        let (xa, yb) = (*x, *y);
        *x = c * xa + s * yb;
        *y = -s * xa + c * yb;
    }
}
