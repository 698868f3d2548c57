//! Synthetic lead traces sampled at 10 Hz.
//!
//! Every trace is produced by a speed-target follower with piecewise-constant
//! accelerations held over each sample interval, so positions are exact
//! under zero-order hold.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prediction::{LeadTrace, TraceSample};

pub const SAMPLE_DT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceKind {
    Constant {
        v: f64,
    },
    /// Ramps between `v_low` and `v_high` at `±accel`, starting upward.
    Sawtooth {
        v_low: f64,
        v_high: f64,
        accel: f64,
    },
    /// Seeded stop-and-go waves.
    StopAndGo {
        seed: u64,
    },
    /// Cruise, brake to a standstill at `decel`, wait, then pull away.
    FullStop {
        v_cruise: f64,
        decel: f64,
        brake_at: f64,
        stop_for: f64,
    },
}

const V_CAP: f64 = 35.0;
const A_CAP: f64 = 3.0;

/// Target speed, acceleration magnitudes towards it, and hold time once reached.
#[derive(Debug, Clone, Copy)]
struct Phase {
    target: f64,
    rise: f64,
    fall: f64,
    hold: f64,
}

impl Phase {
    fn new(target: f64, rate: f64, hold: f64) -> Self {
        Phase {
            target,
            rise: rate,
            fall: rate,
            hold,
        }
    }
}

pub fn synth_trace(kind: &TraceKind, duration: f64) -> Result<LeadTrace<f64>> {
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(Error::contract(format!(
            "duration must be positive, got {duration}"
        )));
    }
    let n = (duration / SAMPLE_DT).round() as usize;
    let (v0, mut phases): (f64, Box<dyn FnMut() -> Phase>) = match *kind {
        TraceKind::Constant { v } => {
            check_speed(v)?;
            (v, Box::new(move || Phase::new(v, 0.0, f64::INFINITY)))
        }
        TraceKind::Sawtooth {
            v_low,
            v_high,
            accel,
        } => {
            check_speed(v_low)?;
            check_speed(v_high)?;
            check_rate(accel)?;
            if !(v_low < v_high) {
                return Err(Error::contract("sawtooth needs v_low < v_high"));
            }
            let mut up = false;
            (
                v_low,
                Box::new(move || {
                    up = !up;
                    let target = if up { v_high } else { v_low };
                    Phase::new(target, accel, 0.0)
                }),
            )
        }
        TraceKind::StopAndGo { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v0 = rng.gen_range(15.0..25.0);
            (
                v0,
                Box::new(move || {
                    let stop = rng.gen_bool(0.2);
                    let target = if stop { 0.0 } else { rng.gen_range(5.0..30.0) };
                    // Braking stays within what a comfort-limited follower can match.
                    let rise = rng.gen_range(0.5..2.0);
                    let fall = rng.gen_range(0.3..1.2);
                    let hold = if stop {
                        rng.gen_range(2.0..8.0)
                    } else {
                        rng.gen_range(3.0..20.0)
                    };
                    Phase {
                        target,
                        rise,
                        fall,
                        hold,
                    }
                }),
            )
        }
        TraceKind::FullStop {
            v_cruise,
            decel,
            brake_at,
            stop_for,
        } => {
            check_speed(v_cruise)?;
            check_rate(decel)?;
            if !(brake_at >= 0.0 && stop_for >= 0.0) {
                return Err(Error::contract("full-stop times must be nonnegative"));
            }
            let mut stage = 0;
            (
                v_cruise,
                Box::new(move || {
                    stage += 1;
                    match stage {
                        1 => Phase::new(v_cruise, 0.0, brake_at),
                        2 => Phase::new(0.0, decel, stop_for),
                        _ => Phase::new(v_cruise, 1.5, f64::INFINITY),
                    }
                }),
            )
        }
    };

    let mut samples = Vec::with_capacity(n + 1);
    let (mut s, mut v) = (0.0f64, v0);
    let mut phase = phases();
    let mut held = 0.0;
    for k in 0..=n {
        let t = k as f64 * SAMPLE_DT;
        let mut a = 0.0;
        if k < n {
            loop {
                let diff = phase.target - v;
                if diff.abs() > 1e-12 {
                    a = (diff / SAMPLE_DT).clamp(-phase.fall, phase.rise);
                    break;
                }
                v = phase.target;
                if held + 1e-9 < phase.hold {
                    held += SAMPLE_DT;
                    break;
                }
                held = 0.0;
                phase = phases();
            }
        }
        samples.push(TraceSample { t, s, v, a });
        s += v * SAMPLE_DT + 0.5 * a * SAMPLE_DT * SAMPLE_DT;
        v = (v + a * SAMPLE_DT).max(0.0);
    }
    LeadTrace::new(samples)
}

fn check_speed(v: f64) -> Result<()> {
    if !(0.0..=V_CAP).contains(&v) {
        return Err(Error::contract(format!("speed {v} outside [0, {V_CAP}]")));
    }
    Ok(())
}

fn check_rate(a: f64) -> Result<()> {
    if !(a > 0.0 && a <= A_CAP) {
        return Err(Error::contract(format!(
            "acceleration {a} outside (0, {A_CAP}]"
        )));
    }
    Ok(())
}
