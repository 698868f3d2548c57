//! Strongly convex quadratic programs with linear equality and two-sided
//! inequality constraints:
//!
//! ```text
//! minimize    ½ xᵀPx + qᵀx
//! subject to  A_eq x = b_eq
//!             l_in ≤ A_in x ≤ u_in
//! ```
//!
//! Equalities are eliminated through a nullspace basis, and the reduced
//! problem is solved exactly by a dual active-set method (Goldfarb–Idnani).
//! Bounds may be infinite.

mod active_set;
pub mod dense;
mod kkt;
mod reduce;

use std::fmt;
use std::time::Instant;

pub use dense::Mat;
pub use kkt::{check_kkt, KktReport};

use crate::error::{Error, Result};
use crate::scalar::{norm_inf, Scalar};
use reduce::{ReduceError, Reduction};

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem<T> {
    pub p: Mat<T>,
    pub q: Vec<T>,
    pub a_eq: Mat<T>,
    pub b_eq: Vec<T>,
    pub a_in: Mat<T>,
    pub l_in: Vec<T>,
    pub u_in: Vec<T>,
}

impl<T: Scalar> QpProblem<T> {
    /// Unconstrained problem; add constraints with the `with_*` builders.
    pub fn new(p: Mat<T>, q: Vec<T>) -> Self {
        let n = q.len();
        QpProblem {
            p,
            q,
            a_eq: Mat::zeros(0, n),
            b_eq: Vec::new(),
            a_in: Mat::zeros(0, n),
            l_in: Vec::new(),
            u_in: Vec::new(),
        }
    }

    pub fn with_equalities(mut self, a_eq: Mat<T>, b_eq: Vec<T>) -> Self {
        self.a_eq = a_eq;
        self.b_eq = b_eq;
        self
    }

    pub fn with_inequalities(mut self, a_in: Mat<T>, l_in: Vec<T>, u_in: Vec<T>) -> Self {
        self.a_in = a_in;
        self.l_in = l_in;
        self.u_in = u_in;
        self
    }

    pub fn num_vars(&self) -> usize {
        self.q.len()
    }

    pub fn objective(&self, x: &[T]) -> T {
        let px = self.p.mul_vec(x);
        x.iter()
            .zip(&px)
            .zip(&self.q)
            .map(|((xi, pi), qi)| T::half() * *xi * *pi + *qi * *xi)
            .sum()
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_vectors()?;
        self.validate_matrices()
    }

    /// Dimensions, vector data and bounds.
    fn validate_vectors(&self) -> Result<()> {
        let n = self.q.len();
        if self.p.rows() != n || self.p.cols() != n {
            return Err(Error::contract(format!(
                "P is {}x{} but q has length {n}",
                self.p.rows(),
                self.p.cols()
            )));
        }
        if self.a_eq.cols() != n || self.a_eq.rows() != self.b_eq.len() {
            return Err(Error::contract("A_eq/b_eq dimensions inconsistent"));
        }
        if self.a_in.cols() != n
            || self.a_in.rows() != self.l_in.len()
            || self.a_in.rows() != self.u_in.len()
        {
            return Err(Error::contract("A_in/l_in/u_in dimensions inconsistent"));
        }
        let finite = |v: &[T]| v.iter().all(|x| x.is_finite());
        if !finite(&self.q) || !finite(&self.b_eq) {
            return Err(Error::contract("non-finite problem data"));
        }
        for (r, (l, u)) in self.l_in.iter().zip(&self.u_in).enumerate() {
            if l.is_nan() || u.is_nan() || *l == T::infinity() || *u == T::neg_infinity() {
                return Err(Error::contract(format!("invalid bounds on row {r}")));
            }
            if l > u {
                return Err(Error::contract(format!("l_in > u_in on row {r}")));
            }
        }
        Ok(())
    }

    /// Finite matrices and a symmetric `P`.
    fn validate_matrices(&self) -> Result<()> {
        let n = self.q.len();
        if !self.p.is_finite() || !self.a_eq.is_finite() || !self.a_in.is_finite() {
            return Err(Error::contract("non-finite problem data"));
        }
        let sym_tol = T::epsilon() * T::lit(1e3) * self.p.max_abs().max(T::one());
        for i in 0..n {
            for j in i + 1..n {
                if (self.p[(i, j)] - self.p[(j, i)]).abs() > sym_tol {
                    return Err(Error::contract(format!("P is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    MaxIterations,
    /// The active-set iteration finished but the KKT residuals exceed the
    /// configured tolerances (severe ill-conditioning).
    Inaccurate,
}

impl fmt::Display for QpStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            QpStatus::Optimal => "optimal",
            QpStatus::Infeasible => "infeasible",
            QpStatus::MaxIterations => "max_iterations",
            QpStatus::Inaccurate => "inaccurate",
        };
        f.write_str(s)
    }
}

/// Order in which violated constraints enter the active set. Every rule
/// reaches the same optimum; the choice only changes the path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PivotRule {
    #[default]
    MostViolated,
    /// Scan constraints cyclically from `start` and take the first violated.
    FirstViolated { start: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpSettings<T> {
    pub abs_tol: T,
    pub rel_tol: T,
    pub max_iterations: usize,
    pub pivot: PivotRule,
}

impl<T: Scalar> Default for QpSettings<T> {
    fn default() -> Self {
        QpSettings {
            abs_tol: T::lit(1e-6),
            rel_tol: T::lit(1e-6),
            max_iterations: 20_000,
            pivot: PivotRule::MostViolated,
        }
    }
}

impl<T: Scalar> QpSettings<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > T::zero()) || !(self.rel_tol > T::zero()) {
            return Err(Error::contract("solver tolerances must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::contract("max_iterations must be at least 1"));
        }
        Ok(())
    }
}

/// Scalar-free summary of a solve, carried by plan/track results and errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveDiagnostics {
    pub status: QpStatus,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub duality_gap: f64,
    /// Wall-clock seconds.
    pub solve_time: f64,
}

impl fmt::Display for SolveDiagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "status {}, {} iterations, primal {:.2e}, dual {:.2e}",
            self.status, self.iterations, self.primal_residual, self.dual_residual
        )
    }
}

#[derive(Debug, Clone)]
pub struct QpSolution<T> {
    pub x: Vec<T>,
    pub status: QpStatus,
    pub objective: T,
    /// Multipliers of `A_eq x = b_eq`.
    pub y_eq: Vec<T>,
    /// Signed multipliers of the inequality rows: negative when the lower
    /// bound is active, positive for the upper bound.
    pub y_in: Vec<T>,
    pub primal_residual: T,
    pub dual_residual: T,
    pub duality_gap: T,
    pub iterations: usize,
    pub solve_time: f64,
}

impl<T: Scalar> QpSolution<T> {
    pub fn diagnostics(&self) -> SolveDiagnostics {
        SolveDiagnostics {
            status: self.status,
            iterations: self.iterations,
            primal_residual: self.primal_residual.to_f64_lossy(),
            dual_residual: self.dual_residual.to_f64_lossy(),
            duality_gap: self.duality_gap.to_f64_lossy(),
            solve_time: self.solve_time,
        }
    }
}

/// Solver with a cached factorization. Re-solving a problem whose `P`,
/// `A_eq` and `A_in` are unchanged skips the elimination and Cholesky steps.
#[derive(Debug, Clone, Default)]
pub struct QpSolver<T> {
    cache: Option<Reduction<T>>,
}

/// Solves `problem` from scratch.
pub fn solve<T: Scalar>(problem: &QpProblem<T>, settings: &QpSettings<T>) -> Result<QpSolution<T>> {
    QpSolver::new().solve(problem, settings)
}

impl<T: Scalar> QpSolver<T> {
    pub fn new() -> Self {
        QpSolver { cache: None }
    }

    pub fn solve(&mut self, pb: &QpProblem<T>, settings: &QpSettings<T>) -> Result<QpSolution<T>> {
        let started = Instant::now();
        pb.validate_vectors()?;
        settings.validate()?;

        let hit = self
            .cache
            .as_ref()
            .is_some_and(|c| c.matches(&pb.p, &pb.a_eq, &pb.a_in));
        if !hit {
            self.cache = None;
            pb.validate_matrices()?;
            let red = Reduction::new(&pb.p, &pb.a_eq, &pb.a_in).map_err(|e| match e {
                ReduceError::NotStrictlyConvex => Error::contract(
                    "P is not positive definite on the nullspace of A_eq (optimum not unique)",
                ),
            })?;
            self.cache = Some(red);
        }
        let red = self.cache.as_ref().expect("cache populated");
        let n = pb.num_vars();
        let me = pb.b_eq.len();
        let mi = pb.l_in.len();

        let infeasible = |iterations| {
            let mut sol = QpSolution {
                x: vec![T::nan(); n],
                status: QpStatus::Infeasible,
                objective: T::nan(),
                y_eq: vec![T::zero(); me],
                y_in: vec![T::zero(); mi],
                primal_residual: T::infinity(),
                dual_residual: T::infinity(),
                duality_gap: T::infinity(),
                iterations,
                solve_time: 0.0,
            };
            sol.solve_time = started.elapsed().as_secs_f64();
            sol
        };

        let feas_tol = (settings.abs_tol * T::lit(1e-3)).max(T::epsilon() * T::lit(1e3));
        let beq_scale = norm_inf(&pb.b_eq).max(T::one());
        if red
            .consistency
            .mul_vec(&pb.b_eq)
            .iter()
            .any(|v| v.abs() > feas_tol * beq_scale * T::lit(1e3))
        {
            return Ok(infeasible(0));
        }

        let xp = red.xp_map.mul_vec(&pb.b_eq);
        let ain_xp = red.ain_xp_map.mul_vec(&pb.b_eq);
        let mut g = red.g_map.mul_vec(&pb.b_eq);
        for (gi, zq) in g.iter_mut().zip(red.z.tr_mul_vec(&pb.q)) {
            *gi += zq;
        }
        let lo: Vec<T> = pb.l_in.iter().zip(&ain_xp).map(|(l, a)| *l - *a).collect();
        let hi: Vec<T> = pb.u_in.iter().zip(&ain_xp).map(|(u, a)| *u - *a).collect();
        for r in 0..mi {
            if red.c_rows[r].is_empty() {
                let tl = feas_tol * (T::one() + pb.l_in[r].abs().min(pb.u_in[r].abs()));
                if lo[r] > tl || hi[r] < -tl {
                    return Ok(infeasible(0));
                }
            }
        }

        let out = active_set::solve(&active_set::Problem {
            l_inv: &red.l_inv,
            g: &g,
            c: &red.c_rows,
            lo: &lo,
            hi: &hi,
            feas_tol,
            max_iterations: settings.max_iterations,
            pivot: settings.pivot,
        });
        if out.status == QpStatus::Infeasible {
            return Ok(infeasible(out.iterations));
        }

        let mut x = red.z.mul_vec(&out.y);
        for (xi, pi) in x.iter_mut().zip(&xp) {
            *xi += *pi;
        }
        let y_in = out.lambda;
        let px = red.p_s.mul_vec(&x);
        let mut grad: Vec<T> = px.iter().zip(&pb.q).map(|(a, b)| *a + *b).collect();
        for (gi, v) in grad.iter_mut().zip(red.a_in_s.tr_mul_vec(&y_in)) {
            *gi += v;
        }
        let y_eq = red.equality_multipliers(&grad, me);
        for (gi, v) in grad.iter_mut().zip(red.a_eq_s.tr_mul_vec(&y_eq)) {
            *gi += v;
        }
        let dual_residual = norm_inf(&grad);

        let (primal_residual, ax_scale) = primal_residual(pb, red, &x);
        let ain_x = red.a_in_s.mul_vec(&x);
        let mut gap = T::zero();
        for r in 0..mi {
            let lam = y_in[r];
            if lam < T::zero() {
                gap += (lam * (ain_x[r] - pb.l_in[r])).abs();
            } else if lam > T::zero() {
                gap += (lam * (pb.u_in[r] - ain_x[r])).abs();
            }
        }

        let mut status = out.status;
        if status == QpStatus::Optimal {
            let bscale = norm_inf(&pb.b_eq)
                .max(
                    pb.l_in
                        .iter()
                        .chain(&pb.u_in)
                        .filter(|v| v.is_finite())
                        .fold(T::zero(), |m, v| m.max(v.abs())),
                )
                .max(ax_scale);
            let dscale = norm_inf(&px).max(norm_inf(&pb.q));
            let primal_ok = primal_residual <= settings.abs_tol + settings.rel_tol * bscale;
            let dual_ok = dual_residual <= settings.abs_tol + settings.rel_tol * dscale;
            if !(primal_ok && dual_ok) {
                status = QpStatus::Inaccurate;
            }
        }

        Ok(QpSolution {
            objective: x
                .iter()
                .zip(&px)
                .zip(&pb.q)
                .map(|((xi, pi), qi)| T::half() * *xi * *pi + *qi * *xi)
                .sum(),
            x,
            status,
            y_eq,
            y_in,
            primal_residual,
            dual_residual,
            duality_gap: gap,
            iterations: out.iterations,
            solve_time: started.elapsed().as_secs_f64(),
        })
    }
}

/// Largest equality or bound violation at `x`, and `‖[A_eq; A_in] x‖∞`.
fn primal_residual<T: Scalar>(pb: &QpProblem<T>, red: &Reduction<T>, x: &[T]) -> (T, T) {
    let aeq_x = red.a_eq_s.mul_vec(x);
    let ain_x = red.a_in_s.mul_vec(x);
    let mut res = T::zero();
    for (a, b) in aeq_x.iter().zip(&pb.b_eq) {
        res = res.max((*a - *b).abs());
    }
    for ((a, l), u) in ain_x.iter().zip(&pb.l_in).zip(&pb.u_in) {
        res = res.max(*l - *a).max(*a - *u);
    }
    (res, norm_inf(&aeq_x).max(norm_inf(&ain_x)))
}
