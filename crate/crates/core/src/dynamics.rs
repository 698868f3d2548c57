//! Double-integrator kinematics under zero-order hold.
//!
//! With `A = [[0, 1], [0, 0]]` nilpotent, `e^{A·dt} = I + A·dt`, so the
//! discrete pair is exact and closed form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Position (m) and speed (m/s) of one vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState<T> {
    pub s: T,
    pub v: T,
}

impl<T: Scalar> VehicleState<T> {
    pub fn new(s: T, v: T) -> Self {
        VehicleState { s, v }
    }

    pub fn is_finite(&self) -> bool {
        self.s.is_finite() && self.v.is_finite()
    }
}

/// Acceleration command (m/s²), held constant over a step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlInput<T> {
    pub a: T,
}

/// Discrete state transition `x' = Ad·x + Bd·u` for one hold interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZohPair<T> {
    pub ad: [[T; 2]; 2],
    pub bd: [T; 2],
    pub dt: T,
}

impl<T: Scalar> ZohPair<T> {
    pub fn apply(&self, x: VehicleState<T>, u: ControlInput<T>) -> VehicleState<T> {
        VehicleState {
            s: self.ad[0][0] * x.s + self.ad[0][1] * x.v + self.bd[0] * u.a,
            v: self.ad[1][0] * x.s + self.ad[1][1] * x.v + self.bd[1] * u.a,
        }
    }
}

pub fn discretize<T: Scalar>(dt: T) -> Result<ZohPair<T>> {
    if !dt.is_finite() || dt < T::zero() {
        return Err(Error::contract(format!(
            "time step must be finite and ≥ 0, got {dt}"
        )));
    }
    let (o, z) = (T::one(), T::zero());
    Ok(ZohPair {
        ad: [[o, dt], [z, o]],
        bd: [T::half() * dt * dt, dt],
        dt,
    })
}

pub fn step<T: Scalar>(x: VehicleState<T>, u: ControlInput<T>, dt: T) -> Result<VehicleState<T>> {
    if !x.is_finite() || !u.a.is_finite() {
        return Err(Error::contract("non-finite state or input"));
    }
    let zoh = discretize(dt)?;
    Ok(VehicleState {
        s: x.s + x.v * dt + zoh.bd[0] * u.a,
        v: x.v + u.a * dt,
    })
}

/// Forward simulation of a control sequence; returns `accels.len() + 1` states.
pub fn rollout<T: Scalar>(
    x0: VehicleState<T>,
    accels: &[T],
    dt: T,
) -> Result<Vec<VehicleState<T>>> {
    let mut out = Vec::with_capacity(accels.len() + 1);
    out.push(x0);
    let mut x = x0;
    for &a in accels {
        x = step(x, ControlInput { a }, dt)?;
        out.push(x);
    }
    Ok(out)
}
