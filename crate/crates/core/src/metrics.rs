//! Tracking error and fuel metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Instantaneous fuel rate as a function of speed and acceleration.
pub trait FuelModel {
    /// Fuel rate (g/s) at speed `v` (m/s) and acceleration `a` (m/s²).
    fn rate(&self, v: f64, a: f64) -> f64;
}

/// `max(0, c0 + c1·v + c2·v² + c3·v³ + c4·max(a, 0)·v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolynomialFuel {
    pub c: [f64; 5],
}

impl Default for PolynomialFuel {
    /// Mid-size passenger car, g/s.
    fn default() -> Self {
        PolynomialFuel {
            c: [0.1569, 2.450e-2, -7.415e-4, 5.975e-5, 0.07224],
        }
    }
}

impl FuelModel for PolynomialFuel {
    fn rate(&self, v: f64, a: f64) -> f64 {
        let [c0, c1, c2, c3, c4] = self.c;
        let v = v.max(0.0);
        (c0 + v * (c1 + v * (c2 + v * c3)) + c4 * a.max(0.0) * v).max(0.0)
    }
}

/// Population standard deviation of `reference − actual`.
pub fn tracking_error(reference: &[f64], actual: &[f64]) -> Result<f64> {
    if reference.len() != actual.len() {
        return Err(Error::contract(format!(
            "series lengths differ: {} vs {}",
            reference.len(),
            actual.len()
        )));
    }
    if reference.is_empty() {
        return Err(Error::contract("empty series"));
    }
    let n = reference.len() as f64;
    let diff: Vec<f64> = reference.iter().zip(actual).map(|(r, a)| r - a).collect();
    let mean = diff.iter().sum::<f64>() / n;
    let var = diff.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n;
    Ok(var.sqrt())
}

/// Left Riemann sum of the fuel rate over uniformly sampled `(v, a)`.
pub fn fuel_total(speeds: &[f64], accels: &[f64], dt: f64, model: &dyn FuelModel) -> Result<f64> {
    if speeds.len() != accels.len() {
        return Err(Error::contract(
            "speed and acceleration series differ in length",
        ));
    }
    if !(dt > 0.0) {
        return Err(Error::contract("sample period must be positive"));
    }
    if speeds.iter().chain(accels).any(|x| !x.is_finite()) {
        return Err(Error::contract("non-finite sample"));
    }
    Ok(speeds
        .iter()
        .zip(accels)
        .map(|(v, a)| model.rate(*v, *a) * dt)
        .sum())
}

/// `100 · fuel(IDM) / fuel(MPC)` in percent.
pub fn fuel_saving(idm_fuel: f64, mpc_fuel: f64) -> Result<f64> {
    if !(mpc_fuel > 0.0) {
        return Err(Error::contract("MPC fuel must be positive"));
    }
    Ok(100.0 * idm_fuel / mpc_fuel)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsReport {
    pub e: f64,
    pub f: f64,
    pub fuel_mpc: f64,
    pub fuel_idm: f64,
    pub collision: bool,
    pub min_gap: f64,
    pub max_gap: f64,
}
