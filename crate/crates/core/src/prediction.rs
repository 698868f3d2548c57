//! ETA-based prediction of the lead vehicle.
//!
//! Waypoints are laid every `Δs` ahead of the lead's current position; an
//! ETA estimator reports when the lead will reach each one. The estimator is
//! emulated from the recorded lead trace with a uniform relative error on
//! every inter-waypoint travel time. Arrival times are then interpolated
//! piecewise linearly into a position-vs-time prediction.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::VehicleState;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Seconds of constant-speed history assumed before a trace starts.
const HISTORY_EXTENSION: f64 = 3600.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSample<T> {
    pub t: T,
    pub s: T,
    pub v: T,
    /// Acceleration held over `[t, t_next)`.
    pub a: T,
}

/// Sampled trajectory of the lead vehicle.
#[derive(Debug, Clone, PartialEq)]
pub struct LeadTrace<T> {
    samples: Vec<TraceSample<T>>,
}

impl<T: Scalar> LeadTrace<T> {
    pub fn new(samples: Vec<TraceSample<T>>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::contract("a lead trace needs at least two samples"));
        }
        for (i, w) in samples.iter().enumerate() {
            check_sample(w, i.checked_sub(1).map(|j| &samples[j])).map_err(Error::contract)?;
        }
        Ok(LeadTrace { samples })
    }

    pub fn samples(&self) -> &[TraceSample<T>] {
        &self.samples
    }

    pub fn start_time(&self) -> T {
        self.samples[0].t
    }

    pub fn end_time(&self) -> T {
        self.samples[self.samples.len() - 1].t
    }

    pub fn end_position(&self) -> T {
        self.samples[self.samples.len() - 1].s
    }

    fn last(&self) -> &TraceSample<T> {
        &self.samples[self.samples.len() - 1]
    }

    /// Index `k` with `t_k ≤ t < t_{k+1}`, clamped to the sample range.
    fn segment(&self, t: T) -> usize {
        let k = self.samples.partition_point(|w| w.t <= t);
        k.saturating_sub(1).min(self.samples.len() - 2)
    }

    /// Position by linear interpolation between samples. Before the first
    /// sample the trace is held; past the end it continues at final speed.
    pub fn position_at(&self, t: T) -> T {
        if t <= self.start_time() {
            return self.samples[0].s;
        }
        if t >= self.end_time() {
            let l = self.last();
            return l.s + l.v * (t - l.t);
        }
        let k = self.segment(t);
        let (a, b) = (&self.samples[k], &self.samples[k + 1]);
        a.s + (b.s - a.s) * (t - a.t) / (b.t - a.t)
    }

    /// Lead state and acceleration at `t` (the RADAR view).
    pub fn state_at(&self, t: T) -> (VehicleState<T>, T) {
        if t >= self.end_time() {
            let l = self.last();
            return (VehicleState::new(self.position_at(t), l.v), T::zero());
        }
        if t <= self.start_time() {
            let f = &self.samples[0];
            return (VehicleState::new(f.s, f.v), f.a);
        }
        let k = self.segment(t);
        let (a, b) = (&self.samples[k], &self.samples[k + 1]);
        let w = (t - a.t) / (b.t - a.t);
        let v = a.v + (b.v - a.v) * w;
        (VehicleState::new(self.position_at(t), v), a.a)
    }

    /// Parses `t,s,v,a` CSV text. `origin` names the source in errors.
    pub fn from_csv_str(text: &str, origin: &str) -> Result<Self> {
        let perr = |line: usize, message: String| Error::Parse {
            path: origin.to_string(),
            line,
            message,
        };
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let Some((hl, header)) = lines.next() else {
            return Err(perr(1, "empty trace".into()));
        };
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols != ["t", "s", "v", "a"] {
            return Err(perr(
                hl + 1,
                format!("expected header `t,s,v,a`, found `{header}`"),
            ));
        }
        let mut samples: Vec<TraceSample<T>> = Vec::new();
        for (i, line) in lines {
            let lineno = i + 1;
            let vals: Vec<&str> = line.split(',').map(str::trim).collect();
            if vals.len() != 4 {
                return Err(perr(
                    lineno,
                    format!("expected 4 fields, found {}", vals.len()),
                ));
            }
            let mut parsed = [T::zero(); 4];
            for (slot, raw) in parsed.iter_mut().zip(&vals) {
                let x: f64 = raw
                    .parse()
                    .map_err(|_| perr(lineno, format!("`{raw}` is not a number")))?;
                if !x.is_finite() {
                    return Err(perr(lineno, format!("non-finite value `{raw}`")));
                }
                *slot = T::lit(x);
            }
            let w = TraceSample {
                t: parsed[0],
                s: parsed[1],
                v: parsed[2],
                a: parsed[3],
            };
            check_sample(&w, samples.last()).map_err(|m| perr(lineno, m))?;
            samples.push(w);
        }
        if samples.len() < 2 {
            return Err(perr(
                hl + 1,
                "a lead trace needs at least two samples".into(),
            ));
        }
        Ok(LeadTrace { samples })
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_str(&text, &path.display().to_string())
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("t,s,v,a\n");
        for w in &self.samples {
            let _ = writeln!(out, "{},{},{},{}", w.t, w.s, w.v, w.a);
        }
        out
    }
}

fn check_sample<T: Scalar>(
    w: &TraceSample<T>,
    prev: Option<&TraceSample<T>>,
) -> Result<(), String> {
    if !(w.t.is_finite() && w.s.is_finite() && w.v.is_finite() && w.a.is_finite()) {
        return Err("non-finite sample".into());
    }
    if w.v < T::zero() {
        return Err(format!("negative speed {}", w.v));
    }
    if let Some(p) = prev {
        if !(w.t > p.t) {
            return Err(format!("time {} does not increase (previous {})", w.t, p.t));
        }
        if w.s < p.s {
            return Err(format!("position {} decreases (previous {})", w.s, p.s));
        }
    }
    Ok(())
}

/// Positions `w_1 … w_{l+1}` spaced `Δs` ahead of the lead.
#[derive(Debug, Clone, PartialEq)]
pub struct WaypointGrid<T> {
    pub waypoints: Vec<T>,
    pub spacing: T,
}

impl<T: Scalar> WaypointGrid<T> {
    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    /// Drops waypoints beyond `max_position` (the first one is always kept).
    pub fn truncated_to(&self, max_position: T) -> Self {
        let keep = self
            .waypoints
            .iter()
            .take_while(|w| **w <= max_position)
            .count()
            .max(1);
        WaypointGrid {
            waypoints: self.waypoints[..keep].to_vec(),
            spacing: self.spacing,
        }
    }
}

pub fn make_waypoints<T: Scalar>(
    lead_position: T,
    spacing: T,
    horizon: T,
) -> Result<WaypointGrid<T>> {
    if !(spacing > T::zero()) || !spacing.is_finite() {
        return Err(Error::contract(format!(
            "waypoint spacing must be positive, got {spacing}"
        )));
    }
    if !(horizon >= spacing) || !horizon.is_finite() || !lead_position.is_finite() {
        return Err(Error::contract(format!(
            "spatial horizon {horizon} must be at least the spacing {spacing}"
        )));
    }
    let ratio = horizon / spacing;
    // Absorb rounding like 3000/500 = 5.999…; the grid never extends past the horizon.
    let l = (ratio + T::lit(1e-9) * ratio.max(T::one()))
        .floor()
        .to_usize()
        .ok_or_else(|| Error::contract("waypoint count overflow"))?;
    let waypoints = (0..=l)
        .map(|i| lead_position + T::from_usize_lossy(i) * spacing)
        .collect();
    Ok(WaypointGrid { waypoints, spacing })
}

/// Arrival times aligned with a [`WaypointGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct EtaSequence<T> {
    pub times: Vec<T>,
}

/// For each waypoint, the earliest time the trace position reaches it.
pub fn true_arrival_times<T: Scalar>(
    trace: &LeadTrace<T>,
    grid: &WaypointGrid<T>,
) -> Result<EtaSequence<T>> {
    let smp = trace.samples();
    let end = trace.end_position();
    let mut times = Vec::with_capacity(grid.len());
    for &w in &grid.waypoints {
        if w > end {
            return Err(Error::HorizonExceedsTrace {
                waypoint: w.to_f64_lossy(),
                trace_end: end.to_f64_lossy(),
            });
        }
        let k = smp.partition_point(|x| x.s < w);
        let t = if k == 0 {
            smp[0].t
        } else {
            let (a, b) = (&smp[k - 1], &smp[k]);
            a.t + (w - a.s) / (b.s - a.s) * (b.t - a.t)
        };
        times.push(t);
    }
    Ok(EtaSequence { times })
}

/// Relative-error model of the ETA estimator: every inter-waypoint travel
/// time is scaled by an independent draw from `U(1 − σ, 1 + σ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma: f64,
    pub rng_seed: u64,
}

impl NoiseModel {
    pub fn exact() -> Self {
        NoiseModel {
            sigma: 0.0,
            rng_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.sigma) {
            return Err(Error::contract(format!(
                "noise radius sigma must lie in [0, 1), got {}",
                self.sigma
            )));
        }
        Ok(())
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.rng_seed)
    }
}

/// Applies the ETA noise model. The first arrival time is kept; with
/// `σ = 0` the input is returned unchanged and no randomness is consumed.
pub fn corrupt_etas<T: Scalar, R: Rng + ?Sized>(
    truth: &EtaSequence<T>,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<EtaSequence<T>> {
    noise.validate()?;
    if truth.times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::contract(
            "true arrival times must be strictly increasing",
        ));
    }
    if noise.sigma == 0.0 || truth.times.is_empty() {
        return Ok(truth.clone());
    }
    let mut times = Vec::with_capacity(truth.times.len());
    times.push(truth.times[0]);
    for w in truth.times.windows(2) {
        // 1 + σ·U(−1, 1) ~ U(1 − σ, 1 + σ); shared draws across σ values
        // keep sweeps over the noise radius on common random numbers.
        let u: f64 = rng.gen_range(-1.0..=1.0);
        let ratio = T::lit(1.0 + noise.sigma * u);
        let prev = *times.last().expect("non-empty");
        times.push(prev + ratio * (w[1] - w[0]));
    }
    Ok(EtaSequence { times })
}

/// Piecewise-linear predicted lead trajectory `t ↦ ŝ⁰(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedTrajectory<T> {
    knots: Vec<(T, T)>,
    extrapolation_speed: T,
}

impl<T: Scalar> PredictedTrajectory<T> {
    pub fn new(knots: Vec<(T, T)>, extrapolation_speed: T) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::contract(
                "a predicted trajectory needs at least one knot",
            ));
        }
        for w in knots.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::contract("knot times must be strictly increasing"));
            }
            if w[1].1 < w[0].1 {
                return Err(Error::contract("knot positions must be nondecreasing"));
            }
        }
        if !(extrapolation_speed >= T::zero()) || !extrapolation_speed.is_finite() {
            return Err(Error::contract(
                "extrapolation speed must be finite and ≥ 0",
            ));
        }
        Ok(PredictedTrajectory {
            knots,
            extrapolation_speed,
        })
    }

    /// The exact trace as a prediction (perfect foresight). Before the
    /// first sample the lead is taken to have cruised at its initial speed.
    pub fn from_trace(trace: &LeadTrace<T>) -> Self {
        let first = trace.samples()[0];
        let back = T::lit(HISTORY_EXTENSION);
        let mut knots = vec![(first.t - back, first.s - first.v * back)];
        knots.extend(trace.samples().iter().map(|w| (w.t, w.s)));
        let speed = trace.samples()[trace.samples().len() - 1].v;
        PredictedTrajectory {
            knots,
            extrapolation_speed: speed,
        }
    }

    /// Prepends observed lead positions on `[t − span, t)` to a prediction
    /// starting at `t`, so that time-shifted envelope queries see the past.
    pub fn with_history(self, trace: &LeadTrace<T>, span: T) -> Result<Self> {
        let t = self.start_time();
        let from = t - span;
        let smp = trace.samples();
        let mut knots = Vec::new();
        let first = smp[0];
        if from < first.t {
            knots.push((from, first.s - first.v * (first.t - from)));
        } else {
            knots.push((from, trace.position_at(from)));
        }
        for w in smp.iter().filter(|w| w.t > from && w.t < t) {
            knots.push((w.t, w.s));
        }
        knots.extend(self.knots.iter().copied());
        PredictedTrajectory::new(knots, self.extrapolation_speed)
    }

    pub fn knots(&self) -> &[(T, T)] {
        &self.knots
    }

    pub fn extrapolation_speed(&self) -> T {
        self.extrapolation_speed
    }

    pub fn with_extrapolation_speed(mut self, speed: T) -> Self {
        self.extrapolation_speed = speed.max(T::zero());
        self
    }

    pub fn start_time(&self) -> T {
        self.knots[0].0
    }

    pub fn eval(&self, t: T) -> Result<T> {
        if !(t >= self.start_time()) {
            return Err(Error::OutOfDomain {
                t: t.to_f64_lossy(),
                start: self.start_time().to_f64_lossy(),
            });
        }
        Ok(self.eval_unchecked(t))
    }

    /// Like [`eval`](Self::eval) but queries before the first knot return
    /// the first knot's position.
    pub fn eval_clamped(&self, t: T) -> T {
        if t <= self.start_time() {
            self.knots[0].1
        } else {
            self.eval_unchecked(t)
        }
    }

    fn eval_unchecked(&self, t: T) -> T {
        let last = self.knots[self.knots.len() - 1];
        if t >= last.0 {
            return last.1 + self.extrapolation_speed * (t - last.0);
        }
        let k = self.knots.partition_point(|kn| kn.0 <= t).saturating_sub(1);
        let (a, b) = (self.knots[k], self.knots[k + 1]);
        a.1 + (b.1 - a.1) * (t - a.0) / (b.0 - a.0)
    }
}

/// Linear interpolation through `(t̂_i, w_i)`; past the last knot the final
/// segment's average speed continues (zero for a single knot).
pub fn interpolate<T: Scalar>(
    grid: &WaypointGrid<T>,
    etas: &EtaSequence<T>,
) -> Result<PredictedTrajectory<T>> {
    if grid.len() != etas.times.len() {
        return Err(Error::contract(format!(
            "{} waypoints but {} arrival times",
            grid.len(),
            etas.times.len()
        )));
    }
    let knots: Vec<(T, T)> = etas
        .times
        .iter()
        .copied()
        .zip(grid.waypoints.iter().copied())
        .collect();
    let speed = match knots.len() {
        0 | 1 => T::zero(),
        n => {
            let (a, b) = (knots[n - 2], knots[n - 1]);
            (b.1 - a.1) / (b.0 - a.0)
        }
    };
    PredictedTrajectory::new(knots, speed.max(T::zero()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn kinematic_trace(v0: f64, a: f64, n: usize, dt: f64) -> LeadTrace<f64> {
        let samples = (0..n)
            .map(|k| {
                let t = k as f64 * dt;
                TraceSample {
                    t,
                    s: v0 * t + 0.5 * a * t * t,
                    v: v0 + a * t,
                    a,
                }
            })
            .collect();
        LeadTrace::new(samples).unwrap()
    }

    #[test]
    fn waypoint_examples() {
        assert_eq!(
            make_waypoints(0.0, 10.0, 30.0).unwrap().waypoints,
            vec![0.0, 10.0, 20.0, 30.0]
        );
        assert_eq!(
            make_waypoints(100.0, 10.0, 25.0).unwrap().waypoints,
            vec![100.0, 110.0, 120.0]
        );
        let g = make_waypoints(0.0, 500.0, 3000.0).unwrap();
        assert_eq!(g.len(), 7);
        assert_eq!(g.waypoints[6], 3000.0);
        assert!(make_waypoints(0.0, 0.0, 30.0).is_err());
        assert!(make_waypoints(0.0, -1.0, 30.0).is_err());
    }

    #[test]
    fn arrival_time_examples() {
        let tr = kinematic_trace(10.0, 0.0, 101, 0.1);
        let g = make_waypoints(0.0, 10.0, 20.0).unwrap();
        let eta = true_arrival_times(&tr, &g).unwrap();
        for (got, want) in eta.times.iter().zip([0.0, 1.0, 2.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        let tr = kinematic_trace(0.0, 2.0, 51, 0.1);
        let g = WaypointGrid {
            waypoints: vec![9.0],
            spacing: 1.0,
        };
        assert!((true_arrival_times(&tr, &g).unwrap().times[0] - 3.0).abs() < 1e-9);
        let g = make_waypoints(0.0, 5.0, 10.0).unwrap();
        assert!(true_arrival_times(&kinematic_trace(1.0, 0.0, 11, 1.0), &g).is_ok());
        let g = make_waypoints(0.0, 10.0, 40.0).unwrap();
        assert!(matches!(
            true_arrival_times(&kinematic_trace(1.0, 0.0, 11, 1.0), &g),
            Err(Error::HorizonExceedsTrace { .. })
        ));
    }

    /// Lead drives to s = 20, waits 5 s, drives on. Waypoint 20 is reached
    /// when the stop begins.
    #[test]
    fn stop_on_waypoint_resolves_to_earliest_arrival() {
        let mut samples = Vec::new();
        for k in 0..=300 {
            let t = k as f64 * 0.1;
            let (s, v) = if t <= 2.0 {
                (10.0 * t, 10.0)
            } else if t <= 7.0 {
                (20.0, 0.0)
            } else {
                (20.0 + 10.0 * (t - 7.0), 10.0)
            };
            samples.push(TraceSample { t, s, v, a: 0.0 });
        }
        let tr = LeadTrace::new(samples).unwrap();
        let g = WaypointGrid {
            waypoints: vec![15.0, 20.0, 25.0],
            spacing: 5.0,
        };
        let eta = true_arrival_times(&tr, &g).unwrap();
        // Oracle: scan a dense resampling for the first crossing.
        for (w, got) in g.waypoints.iter().zip(&eta.times) {
            let first = (0..=300_000)
                .map(|i| i as f64 * 1e-4)
                .find(|&t| tr.position_at(t) >= *w - 1e-12)
                .unwrap();
            assert!((got - first).abs() < 2e-4, "w = {w}: {got} vs {first}");
        }
        assert!((eta.times[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn corrupt_examples() {
        let truth = EtaSequence {
            times: vec![0.0, 10.0, 20.0],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let same = corrupt_etas(&truth, &NoiseModel::exact(), &mut rng).unwrap();
        assert_eq!(same, truth);

        let noise = NoiseModel {
            sigma: 0.25,
            rng_seed: 4,
        };
        let out = corrupt_etas(&truth, &noise, &mut noise.rng()).unwrap();
        assert_eq!(out.times[0], 0.0);
        let g1 = out.times[1];
        let g2 = out.times[2] - out.times[1];
        assert!((7.5..=12.5).contains(&g1) && (7.5..=12.5).contains(&g2));

        let bad = NoiseModel {
            sigma: 1.0,
            rng_seed: 0,
        };
        assert!(corrupt_etas(&truth, &bad, &mut rng).is_err());
    }

    #[test]
    fn noise_ratio_distribution() {
        let n = 100_000;
        let truth = EtaSequence {
            times: (0..=n).map(|i| i as f64).collect(),
        };
        let noise = NoiseModel {
            sigma: 0.1,
            rng_seed: 99,
        };
        let out = corrupt_etas(&truth, &noise, &mut noise.rng()).unwrap();
        let ratios: Vec<f64> = out.times.windows(2).map(|w| w[1] - w[0]).collect();
        let mean = ratios.iter().sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.002, "mean {mean}");
        let (lo, hi) = ratios
            .iter()
            .fold((f64::MAX, f64::MIN), |(a, b), r| (a.min(*r), b.max(*r)));
        assert!(lo >= 0.9 - 1e-9 && hi <= 1.1 + 1e-9);
    }

    #[test]
    fn interpolation_examples() {
        let g = WaypointGrid {
            waypoints: vec![0.0, 100.0],
            spacing: 100.0,
        };
        let p = interpolate(
            &g,
            &EtaSequence {
                times: vec![0.0f64, 10.0],
            },
        )
        .unwrap();
        assert_eq!(p.eval(5.0).unwrap(), 50.0);
        assert_eq!(p.eval(0.0).unwrap(), 0.0);
        assert!((p.eval(12.0).unwrap() - 120.0).abs() < 1e-12);
        assert!(matches!(p.eval(-0.1), Err(Error::OutOfDomain { .. })));
        assert_eq!(p.eval_clamped(-3.0), 0.0);
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let tr = kinematic_trace(3.0, 0.5, 20, 0.1);
        let back = LeadTrace::<f64>::from_csv_str(&tr.to_csv_string(), "mem").unwrap();
        assert_eq!(back, tr);
        let err =
            LeadTrace::<f64>::from_csv_str("t,s,v,a\n0,0,1,0\n0.1,0.1,1,0\n0.1,0.2,1,0\n", "x.csv")
                .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }), "{err}");
        let err =
            LeadTrace::<f64>::from_csv_str("t,s,v,a\n0,0,1,0\n0.1,nan,1,0\n", "x.csv").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = LeadTrace::<f64>::from_csv_str("time,s,v,a\n", "x.csv").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    fn arb_trace() -> impl Strategy<Value = LeadTrace<f64>> {
        prop::collection::vec((0.0..30.0f64, 0.2..2.0f64), 3..40).prop_map(|segs| {
            let mut t = 0.0;
            let mut s = 0.0;
            let mut samples = vec![TraceSample {
                t,
                s,
                v: 0.0,
                a: 0.0,
            }];
            for (v, dt) in segs {
                t += dt;
                s += v * dt;
                samples.push(TraceSample { t, s, v, a: 0.0 });
            }
            LeadTrace::new(samples).unwrap()
        })
    }

    proptest! {
        #[test]
        fn corrupted_etas_stay_increasing(
            tr in arb_trace(), sigma in 0.0..0.99f64, seed in any::<u64>(), spacing in 1.0..50.0f64
        ) {
            let end = tr.end_position();
            prop_assume!(end > spacing);
            let g = make_waypoints(0.0, spacing, end).unwrap().truncated_to(end);
            let truth = true_arrival_times(&tr, &g).unwrap();
            prop_assume!(truth.times.windows(2).all(|w| w[1] > w[0]));
            let noise = NoiseModel { sigma, rng_seed: seed };
            let out = corrupt_etas(&truth, &noise, &mut noise.rng()).unwrap();
            prop_assert!(out.times.windows(2).all(|w| w[1] > w[0]));
            prop_assert_eq!(out.times[0], truth.times[0]);
        }

        #[test]
        fn exact_prediction_reproduces_trace(tr in arb_trace(), spacing in 1.0..20.0f64) {
            let end = tr.end_position();
            prop_assume!(end > 2.0 * spacing);
            let g = make_waypoints(0.0, spacing, end).unwrap().truncated_to(end);
            let truth = true_arrival_times(&tr, &g).unwrap();
            prop_assume!(truth.times.windows(2).all(|w| w[1] > w[0]));
            let pred = interpolate(&g, &truth).unwrap();
            for (w, t) in g.waypoints.iter().zip(&truth.times) {
                prop_assert!((pred.eval(*t).unwrap() - w).abs() < 1e-9);
            }
            // Between knots the chord error is bounded by one spacing.
            let mut t = truth.times[0];
            let t_end = *truth.times.last().unwrap();
            let mut prev = pred.eval(t).unwrap();
            while t < t_end {
                let p = pred.eval(t).unwrap();
                prop_assert!((p - tr.position_at(t)).abs() <= spacing + 1e-9);
                prop_assert!(p >= prev - 1e-12);
                prev = p;
                t += 0.05;
            }
        }
    }
}
