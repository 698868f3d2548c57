//! Reference controllers: the intelligent driver model and the planner fed
//! with the exact lead trajectory.

use serde::{Deserialize, Serialize};

use crate::dynamics::VehicleState;
use crate::envelope::{build_envelopes, HeadwayParams};
use crate::error::{Error, Result};
use crate::planner::{PlanResult, Planner, PlannerParams};
use crate::prediction::{LeadTrace, PredictedTrajectory};
use crate::qp::QpSettings;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdmParams<T> {
    /// Maximum acceleration (m/s²).
    pub a_idm: T,
    /// Comfortable deceleration (m/s²).
    pub b_idm: T,
    pub delta: T,
    /// Jam distance (m).
    pub s0: T,
    /// Vehicle length (m).
    pub veh_len: T,
    /// Desired speed (m/s).
    pub v0: T,
    /// Desired time headway (s).
    pub t_headway: T,
}

impl<T: Scalar> IdmParams<T> {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.a_idm,
            self.b_idm,
            self.delta,
            self.s0,
            self.veh_len,
            self.v0,
            self.t_headway,
        ];
        if all.iter().any(|x| !x.is_finite() || *x <= T::zero()) {
            return Err(Error::contract("IDM parameters must be positive"));
        }
        if self.delta < T::one() {
            return Err(Error::contract("IDM exponent must be at least 1"));
        }
        Ok(())
    }
}

/// IDM acceleration clamped to `[a_lo, a_hi]`. A non-positive bumper gap
/// returns `a_lo`.
pub fn idm_accel<T: Scalar>(
    ego: VehicleState<T>,
    lead: VehicleState<T>,
    p: &IdmParams<T>,
    a_lo: T,
    a_hi: T,
) -> T {
    let gap = lead.s - ego.s - p.veh_len;
    if !(gap > T::zero()) {
        return a_lo;
    }
    let v = ego.v.max(T::zero());
    let dv = v - lead.v;
    let dynamic = v * p.t_headway + v * dv / (T::two() * (p.a_idm * p.b_idm).sqrt());
    let s_star = p.s0 + dynamic.max(T::zero());
    let free = (v / p.v0).powf(p.delta);
    let a = p.a_idm * (T::one() - free - (s_star / gap).powi(2));
    a.max(a_lo).min(a_hi)
}

/// Open-loop receding-horizon planning with perfect foresight: a plan every
/// `dt_p` from the trace start, each starting where the previous plan
/// placed the vehicle one step later.
pub fn oracle_plan<T: Scalar>(
    trace: &LeadTrace<T>,
    params: &PlannerParams<T>,
    headway: &HeadwayParams<T>,
    x0: VehicleState<T>,
    qp: &QpSettings<T>,
) -> Result<Vec<PlanResult<T>>> {
    let env = build_envelopes(PredictedTrajectory::from_trace(trace), *headway)?;
    let mut planner = Planner::new(*params, *qp)?;
    let t_start = trace.start_time();
    let count = ((trace.end_time() - t_start) / params.dt_p + T::lit(1e-9))
        .floor()
        .to_usize()
        .unwrap_or(0);
    let mut plans = Vec::with_capacity(count);
    let mut x = x0;
    for k in 0..count {
        let t0 = t_start + T::from_usize_lossy(k) * params.dt_p;
        let p = planner.plan(x, &env, t0)?;
        x = p.states[1];
        plans.push(p);
    }
    Ok(plans)
}

/// Planned speed of a consecutive plan sequence at each time in `times`,
/// using the plan whose first step contains the time.
pub fn plan_speed_profile<T: Scalar>(plans: &[PlanResult<T>], times: &[T]) -> Result<Vec<T>> {
    let first = plans.first().ok_or_else(|| Error::contract("no plans"))?;
    times
        .iter()
        .map(|&t| {
            let k = ((t - first.t0) / first.dt + T::lit(1e-9)).floor();
            let k = k.to_usize().unwrap_or(0).min(plans.len() - 1);
            plans[k].speed_at(t)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prediction::TraceSample;
    use proptest::prelude::*;

    fn idm() -> IdmParams<f64> {
        IdmParams {
            a_idm: 1.5,
            b_idm: 3.0,
            delta: 4.0,
            s0: 3.5,
            veh_len: 4.65,
            v0: 35.0,
            t_headway: 1.0,
        }
    }

    fn at(s: f64, v: f64) -> VehicleState<f64> {
        VehicleState::new(s, v)
    }

    #[test]
    fn idm_examples() {
        let p = idm();
        let a = idm_accel(at(0.0, 0.0), at(3.5 + 4.65, 0.0), &p, -8.0, 3.0);
        assert!(a.abs() < 1e-12);
        let a = idm_accel(at(0.0, 35.0), at(1e9, 35.0), &p, -8.0, 3.0);
        assert!(a.abs() < 1e-6);
        let a = idm_accel(at(0.0, 10.0), at(1e9, 10.0), &p, -8.0, 3.0);
        assert!((a - 1.5 * (1.0 - (10.0f64 / 35.0).powi(4))).abs() < 1e-6);
        assert_eq!(idm_accel(at(0.0, 10.0), at(4.0, 0.0), &p, -8.0, 3.0), -8.0);
    }

    proptest! {
        #[test]
        fn idm_monotone(gap in 1.0..200.0f64, v in 0.0..34.0f64, dv in 0.01..1.0f64, dg in 0.01..5.0f64) {
            let p = idm();
            let f = |v: f64, gap: f64| {
                let lead = at(gap + p.veh_len, v);
                idm_accel(at(0.0, v), lead, &p, f64::NEG_INFINITY, f64::INFINITY)
            };
            prop_assert!(f(v + dv, gap) < f(v, gap));
            prop_assert!(f(v, gap + dg) > f(v, gap));
        }
    }

    fn constant_trace(v: f64, secs: usize) -> LeadTrace<f64> {
        let samples = (0..=secs * 10)
            .map(|k| {
                let t = k as f64 * 0.1;
                TraceSample {
                    t,
                    s: 100.0 + v * t,
                    v,
                    a: 0.0,
                }
            })
            .collect();
        LeadTrace::new(samples).unwrap()
    }

    fn planner_params() -> PlannerParams<f64> {
        PlannerParams {
            alpha: 0.2,
            beta: 0.7,
            gamma: 0.1,
            v_min: 0.0,
            v_max: 35.0,
            a_min: -1.5,
            a_max: 3.0,
            dt_p: 1.0,
            m: 60,
        }
    }

    fn headway() -> HeadwayParams<f64> {
        HeadwayParams {
            ds_minus: 5.0,
            ds_plus: 100.0,
            dt_minus: 0.6,
            dt_plus: 3.0,
        }
    }

    #[test]
    fn oracle_on_constant_lead_is_idle() {
        let tr = constant_trace(10.0, 30);
        // Band center 18 m behind the lead.
        let plans = oracle_plan(
            &tr,
            &planner_params(),
            &headway(),
            at(82.0, 10.0),
            &QpSettings::default(),
        )
        .unwrap();
        assert_eq!(plans.len(), 30);
        for p in &plans {
            assert!(p.accels.iter().all(|a| a.abs() < 1e-6));
        }
        let times: Vec<f64> = (0..300).map(|k| k as f64 * 0.1).collect();
        let v = plan_speed_profile(&plans, &times).unwrap();
        assert!(v.iter().all(|x| (x - 10.0).abs() < 1e-6));
    }
}
