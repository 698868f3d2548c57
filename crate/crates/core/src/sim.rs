//! Closed-loop simulation against a replayed lead trace.
//!
//! Prediction and planning run every `plan_period`, tracking every
//! `track_period`. Both vehicles advance by exact zero-order hold.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand_chacha::ChaCha8Rng;

use crate::baselines::{idm_accel, IdmParams};
use crate::dynamics::{step, ControlInput, VehicleState};
use crate::envelope::{build_envelopes, EnvelopePair, HeadwayEnvelope, HeadwayParams};
use crate::error::{Error, Result};
use crate::planner::{
    build_lcqp, max_violation, zero_accel_candidate, PlanResult, Planner, PlannerParams,
};
use crate::prediction::{
    corrupt_etas, interpolate, make_waypoints, true_arrival_times, LeadTrace, NoiseModel,
    PredictedTrajectory,
};
use crate::qp::{QpSettings, QpStatus};
use crate::tracker::{reference_accels, Tracker, TrackerParams};

/// Which controller drives the ego vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Controller {
    /// Hierarchical MPC fed with noisy ETA predictions.
    Mpc,
    /// Hierarchical MPC fed with the exact lead trajectory.
    Oracle,
    Idm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub planner: PlannerParams<f64>,
    pub tracker: TrackerParams<f64>,
    pub headway: HeadwayParams<f64>,
    pub noise: NoiseModel,
    /// Waypoint spacing Δs (m).
    pub spacing: f64,
    pub spatial_horizon: f64,
    pub plan_period: f64,
    pub track_period: f64,
    /// Lead position minus ego position at the start (m).
    pub initial_headway: f64,
    pub initial_speed: f64,
    pub idm: IdmParams<f64>,
    /// Hardest braking the plant can deliver (IDM emergency value).
    pub plant_a_min: f64,
    pub qp: QpSettings<f64>,
    pub controller: Controller,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.planner.validate()?;
        self.tracker.validate()?;
        self.headway.validate()?;
        self.noise.validate()?;
        self.idm.validate()?;
        self.qp.validate()?;
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(1.0);
        if !close(self.plan_period, self.planner.dt_p) {
            return Err(Error::contract(
                "plan period must equal the planning resolution",
            ));
        }
        if !close(self.track_period, self.tracker.dt_c) {
            return Err(Error::contract(
                "track period must equal the tracking resolution",
            ));
        }
        let ratio = self.plan_period / self.track_period;
        if !(ratio >= 1.0 && close(ratio, ratio.round())) {
            return Err(Error::contract(
                "plan period must be a whole number of track periods",
            ));
        }
        if !(self.spacing > 0.0 && self.spatial_horizon >= self.spacing) {
            return Err(Error::contract("need 0 < spacing ≤ spatial horizon"));
        }
        if !(self.initial_headway > self.idm.veh_len) {
            return Err(Error::contract("initial bumper gap must be positive"));
        }
        if !(self.initial_speed >= 0.0) || !self.initial_speed.is_finite() {
            return Err(Error::contract("initial speed must be finite and ≥ 0"));
        }
        if !(self.plant_a_min <= self.planner.a_min.min(self.tracker.a_min)) {
            return Err(Error::contract(
                "plant braking limit must cover the controller limits",
            ));
        }
        Ok(())
    }

    fn ticks_per_plan(&self) -> usize {
        (self.plan_period / self.track_period).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickRow {
    pub t: f64,
    pub lead: VehicleState<f64>,
    pub a_lead: f64,
    pub ego: VehicleState<f64>,
    /// Acceleration applied to the ego vehicle over the tick.
    pub a_ego: f64,
    /// Envelopes of the active plan at `t`; NaN without a plan.
    pub s_min: f64,
    pub s_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanOutcome {
    Solved(QpStatus),
    /// Planner failed; the previous plan or emergency braking was used.
    Fallback,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanRow {
    pub t: f64,
    pub outcome: PlanOutcome,
    pub iterations: usize,
    pub solve_time: f64,
    pub objective: f64,
    pub xi_norm: f64,
    pub zeta_norm: f64,
    /// Largest constraint violation of the zero-acceleration candidate.
    pub candidate_violation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimRecord {
    pub ticks: Vec<TickRow>,
    pub plans: Vec<PlanRow>,
    pub track_solve_times: Vec<f64>,
    pub limits: [f64; 4],
    pub veh_len: f64,
    pub collided: bool,
    pub planner_fallbacks: usize,
    pub tracker_fallbacks: usize,
    pub events: Vec<String>,
}

pub const TICK_HEADER: &str = "t,s0,v0,a0,s1,v1,a1,s_min,s_max,v_min,v_max,a_min,a_max";
pub const PLAN_HEADER: &str =
    "t,outcome,iterations,solve_time,objective,xi_norm,zeta_norm,candidate_violation";

impl SimRecord {
    pub fn times(&self) -> Vec<f64> {
        self.ticks.iter().map(|r| r.t).collect()
    }

    pub fn ego_speeds(&self) -> Vec<f64> {
        self.ticks.iter().map(|r| r.ego.v).collect()
    }

    pub fn ego_accels(&self) -> Vec<f64> {
        self.ticks.iter().map(|r| r.a_ego).collect()
    }

    /// Smallest bumper-to-bumper gap over the run.
    pub fn min_gap(&self) -> f64 {
        self.ticks
            .iter()
            .map(|r| r.lead.s - r.ego.s - self.veh_len)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn mean_plan_time(&self) -> f64 {
        mean(
            self.plans
                .iter()
                .filter(|p| p.outcome != PlanOutcome::Fallback)
                .map(|p| p.solve_time),
        )
    }

    pub fn mean_track_time(&self) -> f64 {
        mean(self.track_solve_times.iter().copied())
    }

    pub fn ticks_csv(&self) -> String {
        let [v_min, v_max, a_min, a_max] = self.limits;
        let mut out = String::with_capacity(self.ticks.len() * 120);
        out.push_str(TICK_HEADER);
        out.push('\n');
        for r in &self.ticks {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{v_min},{v_max},{a_min},{a_max}",
                r.t, r.lead.s, r.lead.v, r.a_lead, r.ego.s, r.ego.v, r.a_ego, r.s_min, r.s_max
            );
        }
        out
    }

    /// Per-plan diagnostics. Includes wall-clock solve times, so it is not
    /// reproducible byte-for-byte.
    pub fn plans_csv(&self) -> String {
        let mut out = String::from(PLAN_HEADER);
        out.push('\n');
        for p in &self.plans {
            let outcome = match p.outcome {
                PlanOutcome::Solved(s) => s.to_string(),
                PlanOutcome::Fallback => "fallback".into(),
            };
            let _ = writeln!(
                out,
                "{},{outcome},{},{:.6e},{},{},{},{}",
                p.t,
                p.iterations,
                p.solve_time,
                p.objective,
                p.xi_norm,
                p.zeta_norm,
                p.candidate_violation
            );
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let ticks = dir.join("record.csv");
        std::fs::write(&ticks, self.ticks_csv()).map_err(|e| Error::io(&ticks, e))?;
        let plans = dir.join("plans.csv");
        std::fs::write(&plans, self.plans_csv()).map_err(|e| Error::io(&plans, e))?;
        Ok(())
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = it.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Noisy ETA prediction of the lead from time `t`.
fn eta_prediction(
    cfg: &SimConfig,
    trace: &LeadTrace<f64>,
    t: f64,
    lead_s: f64,
    rng: &mut ChaCha8Rng,
) -> Result<PredictedTrajectory<f64>> {
    let full = make_waypoints(lead_s, cfg.spacing, cfg.spatial_horizon)?;
    let grid = full.truncated_to(trace.end_position());
    let final_speed = trace.samples()[trace.samples().len() - 1].v;
    let pred = if grid.len() < 2 {
        PredictedTrajectory::new(vec![(t, lead_s)], final_speed)?
    } else {
        let mut truth = true_arrival_times(trace, &grid)?;
        // The lead is at the first waypoint now.
        truth.times[0] = t;
        let etas = corrupt_etas(&truth, &cfg.noise, rng)?;
        let pred = interpolate(&grid, &etas)?;
        if grid.len() < full.len() {
            pred.with_extrapolation_speed(final_speed)
        } else {
            pred
        }
    };
    pred.with_history(trace, cfg.headway.dt_plus + cfg.plan_period)
}

pub fn run(cfg: &SimConfig, trace: &LeadTrace<f64>) -> Result<SimRecord> {
    cfg.validate()?;
    let dt = cfg.track_period;
    let t_start = trace.start_time();
    let n_ticks = ((trace.end_time() - t_start) / dt + 1e-9).floor() as usize;
    let per_plan = cfg.ticks_per_plan();
    let limits = [
        cfg.tracker.v_min,
        cfg.tracker.v_max,
        cfg.tracker.a_min,
        cfg.tracker.a_max,
    ];

    let mut planner = Planner::new(cfg.planner, cfg.qp)?;
    let mut tracker = Tracker::new(cfg.tracker, cfg.headway, cfg.qp)?;
    let mut rng = cfg.noise.rng();
    let oracle_env = match cfg.controller {
        Controller::Oracle => Some(build_envelopes(
            PredictedTrajectory::from_trace(trace),
            cfg.headway,
        )?),
        _ => None,
    };

    let (lead0, _) = trace.state_at(t_start);
    let mut ego = VehicleState::new(lead0.s - cfg.initial_headway, cfg.initial_speed);
    let mut rec = SimRecord {
        ticks: Vec::with_capacity(n_ticks),
        plans: Vec::with_capacity(n_ticks / per_plan + 1),
        track_solve_times: Vec::with_capacity(n_ticks),
        limits,
        veh_len: cfg.idm.veh_len,
        collided: false,
        planner_fallbacks: 0,
        tracker_fallbacks: 0,
        events: Vec::new(),
    };
    let mut plan: Option<PlanResult<f64>> = None;
    let mut env: Option<EnvelopePair<f64>> = None;
    let n = cfg.tracker.n;

    for k in 0..n_ticks {
        let t = t_start + k as f64 * dt;
        let (lead, a_lead) = trace.state_at(t);

        if cfg.controller != Controller::Idm && k % per_plan == 0 {
            let e = match &oracle_env {
                Some(e) => e.clone(),
                None => build_envelopes(
                    eta_prediction(cfg, trace, t, lead.s, &mut rng)?,
                    cfg.headway,
                )?,
            };
            let candidate_violation = {
                let pb = build_lcqp(ego, &e, &cfg.planner, t)?;
                max_violation(&pb, &zero_accel_candidate(ego, &e, &cfg.planner, t)?)
            };
            let started = Instant::now();
            match planner.plan(ego, &e, t) {
                Ok(p) => {
                    rec.plans.push(PlanRow {
                        t,
                        outcome: PlanOutcome::Solved(p.diagnostics.status),
                        iterations: p.diagnostics.iterations,
                        solve_time: p.diagnostics.solve_time,
                        objective: p.objective,
                        xi_norm: norm2(&p.slack_min),
                        zeta_norm: norm2(&p.slack_max),
                        candidate_violation,
                    });
                    plan = Some(p);
                }
                Err(err @ (Error::Infeasible { .. } | Error::Degraded { .. })) => {
                    rec.planner_fallbacks += 1;
                    rec.events
                        .push(format!("t = {t:.1}: {err}; reusing previous plan"));
                    rec.plans.push(PlanRow {
                        t,
                        outcome: PlanOutcome::Fallback,
                        iterations: 0,
                        solve_time: started.elapsed().as_secs_f64(),
                        objective: f64::NAN,
                        xi_norm: f64::NAN,
                        zeta_norm: f64::NAN,
                        candidate_violation,
                    });
                }
                Err(err) => return Err(err),
            }
            env = Some(e);
        }

        let brake = cfg.tracker.a_min.max(-ego.v / dt);
        let a_cmd = match cfg.controller {
            Controller::Idm => idm_accel(ego, lead, &cfg.idm, cfg.plant_a_min, cfg.tracker.a_max),
            Controller::Mpc | Controller::Oracle => {
                let reference = plan
                    .as_ref()
                    .and_then(|p| reference_accels(p, t, dt, n).ok())
                    .unwrap_or_else(|| vec![brake; n]);
                match tracker.track(ego, &reference, lead, a_lead) {
                    Ok(r) => {
                        rec.track_solve_times.push(r.diagnostics.solve_time);
                        r.command().clamp(cfg.tracker.a_min, cfg.tracker.a_max)
                    }
                    Err(err @ (Error::Infeasible { .. } | Error::Degraded { .. })) => {
                        rec.tracker_fallbacks += 1;
                        rec.events.push(format!("t = {t:.1}: {err}; braking"));
                        brake
                    }
                    Err(err) => return Err(err),
                }
            }
        };
        // The plant does not reverse.
        let a = a_cmd.max(-ego.v.max(0.0) / dt);

        let (s_min, s_max) = match &env {
            Some(e) => (
                e.s_min(t).unwrap_or(f64::NAN),
                e.s_max(t).unwrap_or(f64::NAN),
            ),
            None => (f64::NAN, f64::NAN),
        };
        rec.ticks.push(TickRow {
            t,
            lead,
            a_lead,
            ego,
            a_ego: a,
            s_min,
            s_max,
        });
        if lead.s - ego.s - cfg.idm.veh_len <= 0.0 {
            rec.collided = true;
            rec.events.push(format!("t = {t:.1}: collision"));
            break;
        }
        ego = step(ego, ControlInput { a }, dt)?;
    }
    Ok(rec)
}
