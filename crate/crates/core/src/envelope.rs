//! Headway envelopes.
//!
//! Positions are measured along the lane, so the *minimum headway* envelope
//! `s_min` is the position bound closest to the lead (ego must stay behind
//! it) and the *maximum headway* envelope `s_max` is the far bound (ego
//! should stay ahead of it).

use serde::{Deserialize, Serialize};

use crate::dynamics::VehicleState;
use crate::error::{Error, Result};
use crate::prediction::PredictedTrajectory;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadwayParams<T> {
    /// Minimal space headway (m).
    pub ds_minus: T,
    /// Maximal space headway (m).
    pub ds_plus: T,
    /// Minimal time headway (s).
    pub dt_minus: T,
    /// Maximal time headway (s).
    pub dt_plus: T,
}

impl<T: Scalar> HeadwayParams<T> {
    pub fn validate(&self) -> Result<()> {
        let ok = |x: T| x.is_finite() && x > T::zero();
        if !(ok(self.ds_minus) && ok(self.ds_plus) && self.ds_minus < self.ds_plus) {
            return Err(Error::contract(format!(
                "space headways need 0 < ds_minus < ds_plus, got {} and {}",
                self.ds_minus, self.ds_plus
            )));
        }
        if !(ok(self.dt_minus) && ok(self.dt_plus) && self.dt_minus < self.dt_plus) {
            return Err(Error::contract(format!(
                "time headways need 0 < dt_minus < dt_plus, got {} and {}",
                self.dt_minus, self.dt_plus
            )));
        }
        Ok(())
    }
}

/// Position envelopes sampled by the planner.
pub trait HeadwayEnvelope<T> {
    /// Nearest admissible position behind the lead.
    fn s_min(&self, t: T) -> Result<T>;
    /// Farthest desired position behind the lead.
    fn s_max(&self, t: T) -> Result<T>;
}

/// Envelopes built from a predicted lead trajectory.
#[derive(Debug, Clone)]
pub struct EnvelopePair<T> {
    pred: PredictedTrajectory<T>,
    params: HeadwayParams<T>,
}

pub fn build_envelopes<T: Scalar>(
    pred: PredictedTrajectory<T>,
    params: HeadwayParams<T>,
) -> Result<EnvelopePair<T>> {
    params.validate()?;
    Ok(EnvelopePair { pred, params })
}

impl<T: Scalar> EnvelopePair<T> {
    pub fn prediction(&self) -> &PredictedTrajectory<T> {
        &self.pred
    }

    pub fn params(&self) -> &HeadwayParams<T> {
        &self.params
    }

    /// Start of the valid range; the end is unbounded via extrapolation.
    pub fn valid_from(&self) -> T {
        self.pred.start_time()
    }

    pub fn h_min(&self, t: T) -> Result<T> {
        Ok(self.pred.eval(t)? - self.s_min(t)?)
    }

    pub fn h_max(&self, t: T) -> Result<T> {
        Ok(self.pred.eval(t)? - self.s_max(t)?)
    }
}

impl<T: Scalar> HeadwayEnvelope<T> for EnvelopePair<T> {
    fn s_min(&self, t: T) -> Result<T> {
        let p = self.pred.eval(t)?;
        let hp = &self.params;
        let timed = self.pred.eval_clamped(t - hp.dt_minus);
        Ok((p - hp.ds_minus).min(timed).max(p - hp.ds_plus))
    }

    fn s_max(&self, t: T) -> Result<T> {
        let p = self.pred.eval(t)?;
        let hp = &self.params;
        let timed = self.pred.eval_clamped(t - hp.dt_plus);
        Ok((p - hp.ds_plus).max(timed).min(p - hp.ds_minus))
    }
}

/// Minimum-headway bound from a lead that keeps its current acceleration.
/// Time is relative to the measurement instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyEnvelope<T> {
    lead: VehicleState<T>,
    a_lead: T,
    params: HeadwayParams<T>,
    horizon: T,
}

pub fn safety_envelope<T: Scalar>(
    lead: VehicleState<T>,
    a_lead: T,
    params: HeadwayParams<T>,
    horizon: T,
) -> Result<SafetyEnvelope<T>> {
    if !lead.is_finite() || !a_lead.is_finite() {
        return Err(Error::contract("lead state must be finite"));
    }
    if !(horizon > T::zero()) || !horizon.is_finite() {
        return Err(Error::contract(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    params.validate()?;
    Ok(SafetyEnvelope {
        lead,
        a_lead,
        params,
        horizon,
    })
}

impl<T: Scalar> SafetyEnvelope<T> {
    pub fn horizon(&self) -> T {
        self.horizon
    }

    /// Extrapolated lead position. Speed is clamped at zero going forward;
    /// before the measurement the lead is taken at its current speed.
    pub fn lead_position(&self, t: T) -> T {
        let VehicleState { s, v } = self.lead;
        let v = v.max(T::zero());
        if t <= T::zero() {
            return s + v * t;
        }
        let a = self.a_lead;
        if a < T::zero() {
            let t_stop = v / -a;
            if t >= t_stop {
                return s + v * t_stop * T::half();
            }
        }
        s + v * t + a * t * t * T::half()
    }

    pub fn s_min(&self, t: T) -> T {
        let p = self.lead_position(t);
        let hp = &self.params;
        (p - hp.ds_minus)
            .min(self.lead_position(t - hp.dt_minus))
            .max(p - hp.ds_plus)
    }
}
