//! Short-horizon tracking layer.
//!
//! Follows the planned accelerations while keeping behind a safety envelope
//! derived from the measured lead state. Times inside the tracking problem
//! are relative to the measurement instant.

use serde::{Deserialize, Serialize};

use crate::dynamics::VehicleState;
use crate::envelope::{safety_envelope, HeadwayParams};
use crate::error::{Error, Layer, Result};
use crate::planner::{accept, assemble, check_limits, unpack_track, PlanResult, Spec};
use crate::qp::{QpProblem, QpSettings, QpSolver, SolveDiagnostics};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackerParams<T> {
    pub lambda: T,
    pub mu: T,
    pub v_min: T,
    pub v_max: T,
    pub a_min: T,
    pub a_max: T,
    pub dt_c: T,
    pub n: usize,
}

impl<T: Scalar> TrackerParams<T> {
    pub fn validate(&self) -> Result<()> {
        let pos = |x: T| x.is_finite() && x > T::zero();
        if !(pos(self.lambda) && pos(self.mu)) {
            return Err(Error::contract("tracker weights must be positive"));
        }
        let sum = self.lambda + self.mu;
        if (sum - T::one()).abs() > T::lit(1e-6) {
            return Err(Error::contract(format!(
                "tracker weights must sum to 1, got {sum}"
            )));
        }
        check_limits(self.v_min, self.v_max, self.a_min, self.a_max)?;
        if !pos(self.dt_c) {
            return Err(Error::contract("dt_c must be positive"));
        }
        if self.n == 0 {
            return Err(Error::contract("tracking horizon n must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackResult<T> {
    pub states: Vec<VehicleState<T>>,
    pub accels: Vec<T>,
    pub slack_min: Vec<T>,
    pub objective: T,
    pub diagnostics: SolveDiagnostics,
}

impl<T: Scalar> TrackResult<T> {
    /// The command applied to the vehicle.
    pub fn command(&self) -> T {
        self.accels[0]
    }
}

/// Samples the plan's held accelerations at `t0 + i·dt_c`, `i < n`.
pub fn reference_accels<T: Scalar>(
    plan: &PlanResult<T>,
    t0: T,
    dt_c: T,
    n: usize,
) -> Result<Vec<T>> {
    (0..n)
        .map(|i| plan.accel_at(t0 + T::from_usize_lossy(i) * dt_c))
        .collect()
}

pub fn build_lcqp<T: Scalar>(
    x0: VehicleState<T>,
    reference: &[T],
    lead_now: VehicleState<T>,
    a_lead: T,
    params: &TrackerParams<T>,
    headway: &HeadwayParams<T>,
) -> Result<QpProblem<T>> {
    params.validate()?;
    if reference.len() != params.n {
        return Err(Error::contract(format!(
            "reference has {} entries, horizon is {}",
            reference.len(),
            params.n
        )));
    }
    if !x0.is_finite() || reference.iter().any(|r| !r.is_finite()) {
        return Err(Error::contract("non-finite tracker input"));
    }
    let horizon = T::from_usize_lossy(params.n) * params.dt_c;
    let env = safety_envelope(lead_now, a_lead, *headway, horizon)?;
    let s_min: Vec<T> = (1..=params.n)
        .map(|j| env.s_min(T::from_usize_lossy(j) * params.dt_c))
        .collect();
    assemble(&Spec {
        x0,
        dt: params.dt_c,
        steps: params.n,
        accel_weight: params.lambda,
        accel_ref: Some(reference),
        min_weight: params.mu,
        max_side: None,
        s_min: &s_min,
        v_bounds: (params.v_min, params.v_max),
        a_bounds: (params.a_min, params.a_max),
    })
}

/// Tracking layer with a cached QP factorization.
#[derive(Debug, Clone)]
pub struct Tracker<T> {
    params: TrackerParams<T>,
    headway: HeadwayParams<T>,
    settings: QpSettings<T>,
    solver: QpSolver<T>,
}

impl<T: Scalar> Tracker<T> {
    pub fn new(
        params: TrackerParams<T>,
        headway: HeadwayParams<T>,
        settings: QpSettings<T>,
    ) -> Result<Self> {
        params.validate()?;
        headway.validate()?;
        settings.validate()?;
        Ok(Tracker {
            params,
            headway,
            settings,
            solver: QpSolver::new(),
        })
    }

    pub fn params(&self) -> &TrackerParams<T> {
        &self.params
    }

    pub fn track(
        &mut self,
        x0: VehicleState<T>,
        reference: &[T],
        lead_now: VehicleState<T>,
        a_lead: T,
    ) -> Result<TrackResult<T>> {
        let pb = build_lcqp(x0, reference, lead_now, a_lead, &self.params, &self.headway)?;
        let sol = self.solver.solve(&pb, &self.settings)?;
        accept(&sol, Layer::Tracking)?;
        let r = unpack_track(&sol, self.params.n, self.params.dt_c);
        Ok(TrackResult {
            states: r.states,
            accels: r.accels,
            slack_min: r.slack_min,
            objective: r.objective,
            diagnostics: r.diagnostics,
        })
    }
}

pub fn track<T: Scalar>(
    x0: VehicleState<T>,
    reference: &[T],
    lead_now: VehicleState<T>,
    a_lead: T,
    params: &TrackerParams<T>,
    headway: &HeadwayParams<T>,
    qp: &QpSettings<T>,
) -> Result<TrackResult<T>> {
    Tracker::new(*params, *headway, *qp)?.track(x0, reference, lead_now, a_lead)
}
