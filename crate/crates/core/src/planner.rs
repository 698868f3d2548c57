//! Long-horizon planning layer.
//!
//! Decision vector layout (`m` steps):
//!
//! ```text
//! [s_0, v_0, …, s_m, v_m | a_0 … a_{m-1} | ξ_1 … ξ_m | ζ_1 … ζ_m]
//! ```
//!
//! Inequality rows come in blocks of `m`: min-envelope, `ξ ≥ 0`,
//! max-envelope, `ζ ≥ 0`, speed boxes on `v_1 … v_m`, acceleration boxes.
//! The tracker uses the same layout without the `ζ` columns and rows.

use serde::{Deserialize, Serialize};

use crate::dynamics::{discretize, rollout, VehicleState};
use crate::envelope::HeadwayEnvelope;
use crate::error::{Error, Layer, Result};
use crate::qp::{Mat, QpProblem, QpSettings, QpSolution, QpSolver, QpStatus, SolveDiagnostics};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerParams<T> {
    pub alpha: T,
    pub beta: T,
    pub gamma: T,
    pub v_min: T,
    pub v_max: T,
    pub a_min: T,
    pub a_max: T,
    pub dt_p: T,
    pub m: usize,
}

impl<T: Scalar> PlannerParams<T> {
    pub fn validate(&self) -> Result<()> {
        let pos = |x: T| x.is_finite() && x > T::zero();
        if !(pos(self.alpha) && pos(self.beta) && pos(self.gamma)) {
            return Err(Error::contract("planner weights must be positive"));
        }
        let sum = self.alpha + self.beta + self.gamma;
        if (sum - T::one()).abs() > T::lit(1e-6) {
            return Err(Error::contract(format!(
                "planner weights must sum to 1, got {sum}"
            )));
        }
        self.validate_structure()
    }

    /// Checks everything except the weight normalization; `γ = 0` passes.
    pub(crate) fn validate_structure(&self) -> Result<()> {
        if !(self.alpha > T::zero() && self.beta > T::zero() && self.gamma >= T::zero()) {
            return Err(Error::contract("planner weights must be nonnegative"));
        }
        check_limits(self.v_min, self.v_max, self.a_min, self.a_max)?;
        if !(self.dt_p > T::zero()) || !self.dt_p.is_finite() {
            return Err(Error::contract("dt_p must be positive"));
        }
        if self.m == 0 {
            return Err(Error::contract("planning horizon m must be at least 1"));
        }
        Ok(())
    }
}

pub(crate) fn check_limits<T: Scalar>(v_min: T, v_max: T, a_min: T, a_max: T) -> Result<()> {
    if !(v_min.is_finite() && v_max.is_finite() && v_min < v_max) {
        return Err(Error::contract(format!(
            "need v_min < v_max, got {v_min}, {v_max}"
        )));
    }
    if !(a_min.is_finite() && a_max.is_finite() && a_min < T::zero() && T::zero() < a_max) {
        return Err(Error::contract(format!(
            "need a_min < 0 < a_max, got {a_min}, {a_max}"
        )));
    }
    Ok(())
}

/// Optimal plan on the grid `t0 + j·dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult<T> {
    pub t0: T,
    pub dt: T,
    pub states: Vec<VehicleState<T>>,
    pub accels: Vec<T>,
    pub slack_min: Vec<T>,
    pub slack_max: Vec<T>,
    pub objective: T,
    pub diagnostics: SolveDiagnostics,
}

impl<T: Scalar> PlanResult<T> {
    pub fn t_end(&self) -> T {
        self.t0 + T::from_usize_lossy(self.accels.len()) * self.dt
    }

    /// Index of the step containing `t` (left-closed intervals).
    fn step_index(&self, t: T) -> Result<usize> {
        // Absorb rounding in `t0 + k·dt` so grid points land in their own step.
        let u = (t - self.t0) / self.dt + T::lit(1e-9);
        if !(u >= T::zero()) || !(t < self.t_end()) {
            return Err(Error::OutOfDomain {
                t: t.to_f64_lossy(),
                start: self.t0.to_f64_lossy(),
            });
        }
        let k = u.floor().to_usize().unwrap_or(usize::MAX);
        Ok(k.min(self.accels.len() - 1))
    }

    /// Planned acceleration held at time `t`.
    pub fn accel_at(&self, t: T) -> Result<T> {
        Ok(self.accels[self.step_index(t)?])
    }

    /// Planned speed at time `t`, exact under the hold.
    pub fn speed_at(&self, t: T) -> Result<T> {
        let k = self.step_index(t)?;
        let tau = t - (self.t0 + T::from_usize_lossy(k) * self.dt);
        Ok(self.states[k].v + self.accels[k] * tau)
    }

    pub fn state_at(&self, t: T) -> Result<VehicleState<T>> {
        let k = self.step_index(t)?;
        let tau = t - (self.t0 + T::from_usize_lossy(k) * self.dt);
        let (x, a) = (self.states[k], self.accels[k]);
        Ok(VehicleState::new(
            x.s + x.v * tau + T::half() * a * tau * tau,
            x.v + a * tau,
        ))
    }
}

/// Column offsets of the stacked decision vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub steps: usize,
    pub with_max: bool,
}

impl Layout {
    pub fn s(&self, j: usize) -> usize {
        2 * j
    }
    pub fn v(&self, j: usize) -> usize {
        2 * j + 1
    }
    pub fn a(&self, k: usize) -> usize {
        2 * (self.steps + 1) + k
    }
    /// `j` in `1..=steps`.
    pub fn xi(&self, j: usize) -> usize {
        2 * (self.steps + 1) + self.steps + j - 1
    }
    /// `j` in `1..=steps`; only with `with_max`.
    pub fn zeta(&self, j: usize) -> usize {
        2 * (self.steps + 1) + 2 * self.steps + j - 1
    }
    pub fn num_vars(&self) -> usize {
        2 * (self.steps + 1) + self.steps * if self.with_max { 3 } else { 2 }
    }
    pub fn num_eq(&self) -> usize {
        2 * (self.steps + 1)
    }
    pub fn num_in(&self) -> usize {
        self.steps * if self.with_max { 6 } else { 4 }
    }
}

/// Inputs of the shared LCQP assembly.
pub(crate) struct Spec<'a, T> {
    pub x0: VehicleState<T>,
    pub dt: T,
    pub steps: usize,
    pub accel_weight: T,
    pub accel_ref: Option<&'a [T]>,
    pub min_weight: T,
    /// Weight and envelope values for the max-headway side, if present.
    pub max_side: Option<(T, &'a [T])>,
    pub s_min: &'a [T],
    pub v_bounds: (T, T),
    pub a_bounds: (T, T),
}

pub(crate) fn assemble<T: Scalar>(sp: &Spec<'_, T>) -> Result<QpProblem<T>> {
    let lay = Layout {
        steps: sp.steps,
        with_max: sp.max_side.is_some(),
    };
    let m = sp.steps;
    let n = lay.num_vars();
    let (z, o, two, inf) = (T::zero(), T::one(), T::two(), T::infinity());

    let mut pdiag = vec![z; n];
    let mut q = vec![z; n];
    for k in 0..m {
        pdiag[lay.a(k)] = two * sp.accel_weight;
        if let Some(r) = sp.accel_ref {
            q[lay.a(k)] = -two * sp.accel_weight * r[k];
        }
    }
    for j in 1..=m {
        pdiag[lay.xi(j)] = two * sp.min_weight;
        if let Some((g, _)) = sp.max_side {
            pdiag[lay.zeta(j)] = two * g;
        }
    }

    let zoh = discretize(sp.dt)?;
    let mut a_eq = Mat::zeros(lay.num_eq(), n);
    let mut b_eq = vec![z; lay.num_eq()];
    a_eq[(0, lay.s(0))] = o;
    a_eq[(1, lay.v(0))] = o;
    b_eq[0] = sp.x0.s;
    b_eq[1] = sp.x0.v;
    for k in 0..m {
        let r = 2 + 2 * k;
        a_eq[(r, lay.s(k + 1))] = o;
        a_eq[(r, lay.s(k))] = -zoh.ad[0][0];
        a_eq[(r, lay.v(k))] = -zoh.ad[0][1];
        a_eq[(r, lay.a(k))] = -zoh.bd[0];
        a_eq[(r + 1, lay.v(k + 1))] = o;
        a_eq[(r + 1, lay.v(k))] = -zoh.ad[1][1];
        a_eq[(r + 1, lay.a(k))] = -zoh.bd[1];
    }

    let mi = lay.num_in();
    let mut a_in = Mat::zeros(mi, n);
    let mut l_in = vec![-inf; mi];
    let mut u_in = vec![inf; mi];
    let mut row = 0;
    let mut block = |f: &mut dyn FnMut(usize, &mut Mat<T>, &mut T, &mut T)| {
        for i in 0..m {
            f(i, &mut a_in, &mut l_in[row], &mut u_in[row]);
            row += 1;
        }
        row
    };
    // Rows reference `row` through the closure's running offset.
    let mut r0 = 0;
    let mut next = |f: &mut dyn FnMut(usize, usize, &mut Mat<T>, &mut T, &mut T)| {
        let base = r0;
        block(&mut |i, a, l, u| f(base + i, i, a, l, u));
        r0 += m;
    };
    next(&mut |r, i, a, _, u| {
        a[(r, lay.s(i + 1))] = o;
        a[(r, lay.xi(i + 1))] = -o;
        *u = sp.s_min[i];
    });
    next(&mut |r, i, a, l, _| {
        a[(r, lay.xi(i + 1))] = o;
        *l = z;
    });
    if let Some((_, s_max)) = sp.max_side {
        next(&mut |r, i, a, l, _| {
            a[(r, lay.s(i + 1))] = o;
            a[(r, lay.zeta(i + 1))] = o;
            *l = s_max[i];
        });
        next(&mut |r, i, a, l, _| {
            a[(r, lay.zeta(i + 1))] = o;
            *l = z;
        });
    }
    next(&mut |r, i, a, l, u| {
        a[(r, lay.v(i + 1))] = o;
        *l = sp.v_bounds.0;
        *u = sp.v_bounds.1;
    });
    next(&mut |r, i, a, l, u| {
        a[(r, lay.a(i))] = o;
        *l = sp.a_bounds.0;
        *u = sp.a_bounds.1;
    });

    Ok(QpProblem::new(Mat::from_diag(&pdiag), q)
        .with_equalities(a_eq, b_eq)
        .with_inequalities(a_in, l_in, u_in))
}

/// Envelope samples at `t0 + j·dt`, `j = 1..=m`.
fn sample_envelopes<T: Scalar, E: HeadwayEnvelope<T> + ?Sized>(
    env: &E,
    t0: T,
    dt: T,
    m: usize,
) -> Result<(Vec<T>, Vec<T>)> {
    let mut lo = Vec::with_capacity(m);
    let mut hi = Vec::with_capacity(m);
    for j in 1..=m {
        let t = t0 + T::from_usize_lossy(j) * dt;
        lo.push(env.s_min(t)?);
        hi.push(env.s_max(t)?);
    }
    Ok((lo, hi))
}

/// Builds the planning QP. Accepts `γ = 0` so that the tracking problem can
/// be expressed as a special case; [`plan`] requires normalized weights.
pub fn build_lcqp<T: Scalar, E: HeadwayEnvelope<T> + ?Sized>(
    x0: VehicleState<T>,
    env: &E,
    params: &PlannerParams<T>,
    t0: T,
) -> Result<QpProblem<T>> {
    params.validate_structure()?;
    if !x0.is_finite() || !t0.is_finite() {
        return Err(Error::contract("non-finite initial state or time"));
    }
    let (s_min, s_max) = sample_envelopes(env, t0, params.dt_p, params.m)?;
    assemble(&Spec {
        x0,
        dt: params.dt_p,
        steps: params.m,
        accel_weight: params.alpha,
        accel_ref: None,
        min_weight: params.beta,
        max_side: Some((params.gamma, &s_max)),
        s_min: &s_min,
        v_bounds: (params.v_min, params.v_max),
        a_bounds: (params.a_min, params.a_max),
    })
}

/// Maps solver statuses onto errors for `layer`.
pub(crate) fn accept<T: Scalar>(sol: &QpSolution<T>, layer: Layer) -> Result<()> {
    match sol.status {
        QpStatus::Optimal | QpStatus::Inaccurate => Ok(()),
        QpStatus::Infeasible => Err(Error::Infeasible {
            layer,
            diagnostics: sol.diagnostics(),
        }),
        QpStatus::MaxIterations => Err(Error::Degraded {
            layer,
            diagnostics: sol.diagnostics(),
        }),
    }
}

fn unpack<T: Scalar>(sol: &QpSolution<T>, lay: Layout, t0: T, dt: T) -> PlanResult<T> {
    let m = lay.steps;
    let x = &sol.x;
    PlanResult {
        t0,
        dt,
        states: (0..=m)
            .map(|j| VehicleState::new(x[lay.s(j)], x[lay.v(j)]))
            .collect(),
        accels: (0..m).map(|k| x[lay.a(k)]).collect(),
        slack_min: (1..=m).map(|j| x[lay.xi(j)]).collect(),
        slack_max: if lay.with_max {
            (1..=m).map(|j| x[lay.zeta(j)]).collect()
        } else {
            Vec::new()
        },
        objective: sol.objective,
        diagnostics: sol.diagnostics(),
    }
}

pub(crate) fn unpack_track<T: Scalar>(sol: &QpSolution<T>, steps: usize, dt: T) -> PlanResult<T> {
    unpack(
        sol,
        Layout {
            steps,
            with_max: false,
        },
        T::zero(),
        dt,
    )
}

/// Planning layer with a cached QP factorization.
#[derive(Debug, Clone)]
pub struct Planner<T> {
    params: PlannerParams<T>,
    settings: QpSettings<T>,
    solver: QpSolver<T>,
}

impl<T: Scalar> Planner<T> {
    pub fn new(params: PlannerParams<T>, settings: QpSettings<T>) -> Result<Self> {
        params.validate()?;
        settings.validate()?;
        Ok(Planner {
            params,
            settings,
            solver: QpSolver::new(),
        })
    }

    pub fn params(&self) -> &PlannerParams<T> {
        &self.params
    }

    pub fn plan<E: HeadwayEnvelope<T> + ?Sized>(
        &mut self,
        x0: VehicleState<T>,
        env: &E,
        t0: T,
    ) -> Result<PlanResult<T>> {
        let pb = build_lcqp(x0, env, &self.params, t0)?;
        let sol = self.solver.solve(&pb, &self.settings)?;
        accept(&sol, Layer::Planning)?;
        let lay = Layout {
            steps: self.params.m,
            with_max: true,
        };
        Ok(unpack(&sol, lay, t0, self.params.dt_p))
    }
}

pub fn plan<T: Scalar, E: HeadwayEnvelope<T> + ?Sized>(
    x0: VehicleState<T>,
    env: &E,
    params: &PlannerParams<T>,
    t0: T,
    qp: &QpSettings<T>,
) -> Result<PlanResult<T>> {
    Planner::new(*params, *qp)?.plan(x0, env, t0)
}

/// The all-zero-acceleration point with slacks set to their resulting
/// violations. Feasible whenever `x0.v` lies within the speed box.
pub fn zero_accel_candidate<T: Scalar, E: HeadwayEnvelope<T> + ?Sized>(
    x0: VehicleState<T>,
    env: &E,
    params: &PlannerParams<T>,
    t0: T,
) -> Result<Vec<T>> {
    let m = params.m;
    let lay = Layout {
        steps: m,
        with_max: true,
    };
    let (s_min, s_max) = sample_envelopes(env, t0, params.dt_p, m)?;
    let states = rollout(x0, &vec![T::zero(); m], params.dt_p)?;
    let mut x = vec![T::zero(); lay.num_vars()];
    for (j, st) in states.iter().enumerate() {
        x[lay.s(j)] = st.s;
        x[lay.v(j)] = st.v;
    }
    for j in 1..=m {
        let s = states[j].s;
        x[lay.xi(j)] = (s - s_min[j - 1]).max(T::zero());
        x[lay.zeta(j)] = (s_max[j - 1] - s).max(T::zero());
    }
    Ok(x)
}

/// Largest constraint violation of `x` in `pb`.
pub fn max_violation<T: Scalar>(pb: &QpProblem<T>, x: &[T]) -> T {
    let mut worst = T::zero();
    for (ax, b) in pb.a_eq.mul_vec(x).iter().zip(&pb.b_eq) {
        worst = worst.max((*ax - *b).abs());
    }
    for ((ax, l), u) in pb.a_in.mul_vec(x).iter().zip(&pb.l_in).zip(&pb.u_in) {
        worst = worst.max(*l - *ax).max(*ax - *u);
    }
    worst
}
