//! TOML configuration.
//!
//! The default file under `fixtures/` is embedded at build time and is the
//! only place default parameter values live.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::baselines::IdmParams;
use crate::envelope::HeadwayParams;
use crate::error::{Error, Result};
use crate::planner::PlannerParams;
use crate::prediction::{LeadTrace, NoiseModel};
use crate::qp::QpSettings;
use crate::sim::{Controller, SimConfig};
use crate::synth::{synth_trace, TraceKind};
use crate::tracker::TrackerParams;

pub const DEFAULT_CONFIG: &str = include_str!("../fixtures/default_config.toml");

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct File {
    planner: PlannerSection,
    tracker: TrackerSection,
    limits: Limits,
    headway: HeadwayParams<f64>,
    prediction: PredictionSection,
    idm: IdmSection,
    plant: PlantSection,
    initial: InitialSection,
    lead: LeadSection,
    #[serde(default)]
    solver: SolverSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlannerSection {
    alpha: f64,
    beta: f64,
    gamma: f64,
    dt_p: f64,
    m: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrackerSection {
    lambda: f64,
    mu: f64,
    dt_c: f64,
    n: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct Limits {
    v_min: f64,
    v_max: f64,
    a_min: f64,
    a_max: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct PredictionSection {
    spacing: f64,
    spatial_horizon: f64,
    sigma: f64,
    seed: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct IdmSection {
    a: f64,
    b: f64,
    delta: f64,
    s0: f64,
    length: f64,
    v0: Option<f64>,
    time_headway: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlantSection {
    a_min: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct InitialSection {
    headway: f64,
    speed: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverSection {
    #[serde(default = "default_tol")]
    abs_tol: f64,
    #[serde(default = "default_tol")]
    rel_tol: f64,
    #[serde(default = "default_iters")]
    max_iterations: usize,
}

fn default_tol() -> f64 {
    QpSettings::<f64>::default().abs_tol
}

fn default_iters() -> usize {
    QpSettings::<f64>::default().max_iterations
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            abs_tol: default_tol(),
            rel_tol: default_tol(),
            max_iterations: default_iters(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
enum LeadSection {
    File {
        path: PathBuf,
    },
    Constant {
        v: f64,
        duration: f64,
    },
    Sawtooth {
        v_low: f64,
        v_high: f64,
        accel: f64,
        duration: f64,
    },
    StopAndGo {
        seed: u64,
        duration: f64,
    },
    FullStop {
        v_cruise: f64,
        decel: f64,
        brake_at: f64,
        stop_for: f64,
        duration: f64,
    },
}

/// Where the lead trajectory comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum LeadSource {
    File(PathBuf),
    Synthetic { kind: TraceKind, duration: f64 },
}

impl LeadSource {
    pub fn load(&self) -> Result<LeadTrace<f64>> {
        match self {
            LeadSource::File(p) => LeadTrace::read_csv(p),
            LeadSource::Synthetic { kind, duration } => synth_trace(kind, *duration),
        }
    }
}

/// A parsed configuration: simulation settings plus the lead source.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub sim: SimConfig,
    /// Initial ego speed; `None` starts at the lead's initial speed.
    pub initial_speed: Option<f64>,
    pub lead: LeadSource,
}

impl Config {
    pub fn default_config() -> Self {
        Config::from_toml_str(DEFAULT_CONFIG, "default_config.toml")
            .expect("embedded default config is valid")
    }

    /// Parses TOML; relative trace paths resolve against `base`.
    pub fn from_toml_str_in(text: &str, origin: &str, base: Option<&Path>) -> Result<Self> {
        let file: File = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
                .unwrap_or(0);
            Error::Parse {
                path: origin.to_string(),
                line,
                message: e.message().to_string(),
            }
        })?;
        let cfg = file.into_config(base)?;
        Ok(cfg)
    }

    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self> {
        Self::from_toml_str_in(text, origin, None)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str_in(&text, &path.display().to_string(), path.parent())
    }

    /// Simulation settings with the initial speed resolved against `trace`.
    pub fn sim_for(&self, trace: &LeadTrace<f64>) -> SimConfig {
        let mut sim = self.sim.clone();
        sim.initial_speed = self.initial_speed.unwrap_or(trace.samples()[0].v);
        sim
    }

    pub fn load_trace(&self) -> Result<LeadTrace<f64>> {
        self.lead.load()
    }
}

fn positive(field: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::validation(
            field,
            format!("must be positive, got {x}"),
        ))
    }
}

fn finite(field: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(field, format!("must be finite, got {x}")))
    }
}

impl File {
    fn into_config(self, base: Option<&Path>) -> Result<Config> {
        let File {
            planner: p,
            tracker: t,
            limits: l,
            headway: h,
            prediction: pr,
            idm,
            plant,
            initial,
            lead,
            solver,
        } = self;

        for (f, x) in [
            ("planner.alpha", p.alpha),
            ("planner.beta", p.beta),
            ("planner.gamma", p.gamma),
            ("planner.dt_p", p.dt_p),
            ("tracker.lambda", t.lambda),
            ("tracker.mu", t.mu),
            ("tracker.dt_c", t.dt_c),
            ("headway.ds_minus", h.ds_minus),
            ("headway.ds_plus", h.ds_plus),
            ("headway.dt_minus", h.dt_minus),
            ("headway.dt_plus", h.dt_plus),
            ("prediction.spacing", pr.spacing),
            ("prediction.spatial_horizon", pr.spatial_horizon),
            ("idm.a", idm.a),
            ("idm.b", idm.b),
            ("idm.delta", idm.delta),
            ("idm.s0", idm.s0),
            ("idm.length", idm.length),
            ("idm.time_headway", idm.time_headway),
            ("initial.headway", initial.headway),
            ("solver.abs_tol", solver.abs_tol),
            ("solver.rel_tol", solver.rel_tol),
        ] {
            positive(f, x)?;
        }
        for (f, x) in [
            ("limits.v_min", l.v_min),
            ("limits.v_max", l.v_max),
            ("limits.a_min", l.a_min),
            ("limits.a_max", l.a_max),
        ] {
            finite(f, x)?;
        }
        let sum = p.alpha + p.beta + p.gamma;
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::validation(
                "planner.alpha/beta/gamma",
                format!("weights must sum to 1, got {sum}"),
            ));
        }
        let sum = t.lambda + t.mu;
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::validation(
                "tracker.lambda/mu",
                format!("weights must sum to 1, got {sum}"),
            ));
        }
        if p.m == 0 {
            return Err(Error::validation("planner.m", "must be at least 1"));
        }
        if t.n == 0 {
            return Err(Error::validation("tracker.n", "must be at least 1"));
        }
        if l.v_min >= l.v_max {
            return Err(Error::validation(
                "limits.v_max",
                "must exceed limits.v_min",
            ));
        }
        if !(l.a_min < 0.0) {
            return Err(Error::validation("limits.a_min", "must be negative"));
        }
        if !(l.a_max > 0.0) {
            return Err(Error::validation("limits.a_max", "must be positive"));
        }
        if h.ds_minus >= h.ds_plus {
            return Err(Error::validation(
                "headway.ds_plus",
                "must exceed headway.ds_minus",
            ));
        }
        if h.dt_minus >= h.dt_plus {
            return Err(Error::validation(
                "headway.dt_plus",
                "must exceed headway.dt_minus",
            ));
        }
        if pr.spatial_horizon < pr.spacing {
            return Err(Error::validation(
                "prediction.spatial_horizon",
                "must be at least prediction.spacing",
            ));
        }
        if !(0.0..1.0).contains(&pr.sigma) {
            return Err(Error::validation(
                "prediction.sigma",
                format!("must lie in [0, 1), got {}", pr.sigma),
            ));
        }
        let ratio = p.dt_p / t.dt_c;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio || ratio < 1.0 {
            return Err(Error::validation(
                "planner.dt_p",
                "must be a whole multiple of tracker.dt_c",
            ));
        }
        if idm.delta < 1.0 {
            return Err(Error::validation("idm.delta", "must be at least 1"));
        }
        if let Some(v0) = idm.v0 {
            positive("idm.v0", v0)?;
        }
        if !(plant.a_min <= l.a_min) {
            return Err(Error::validation(
                "plant.a_min",
                "must not exceed limits.a_min",
            ));
        }
        if initial.headway <= idm.length {
            return Err(Error::validation(
                "initial.headway",
                "must exceed the vehicle length",
            ));
        }
        if let Some(v) = initial.speed {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::validation("initial.speed", "must be finite and ≥ 0"));
            }
        }
        if solver.max_iterations == 0 {
            return Err(Error::validation(
                "solver.max_iterations",
                "must be at least 1",
            ));
        }

        let lead = match lead {
            LeadSection::File { path } => {
                let path = match base {
                    Some(b) if path.is_relative() => b.join(path),
                    _ => path,
                };
                LeadSource::File(path)
            }
            LeadSection::Constant { v, duration } => {
                synthetic(TraceKind::Constant { v }, duration)?
            }
            LeadSection::Sawtooth {
                v_low,
                v_high,
                accel,
                duration,
            } => synthetic(
                TraceKind::Sawtooth {
                    v_low,
                    v_high,
                    accel,
                },
                duration,
            )?,
            LeadSection::StopAndGo { seed, duration } => {
                synthetic(TraceKind::StopAndGo { seed }, duration)?
            }
            LeadSection::FullStop {
                v_cruise,
                decel,
                brake_at,
                stop_for,
                duration,
            } => synthetic(
                TraceKind::FullStop {
                    v_cruise,
                    decel,
                    brake_at,
                    stop_for,
                },
                duration,
            )?,
        };

        let sim = SimConfig {
            planner: PlannerParams {
                alpha: p.alpha,
                beta: p.beta,
                gamma: p.gamma,
                v_min: l.v_min,
                v_max: l.v_max,
                a_min: l.a_min,
                a_max: l.a_max,
                dt_p: p.dt_p,
                m: p.m,
            },
            tracker: TrackerParams {
                lambda: t.lambda,
                mu: t.mu,
                v_min: l.v_min,
                v_max: l.v_max,
                a_min: l.a_min,
                a_max: l.a_max,
                dt_c: t.dt_c,
                n: t.n,
            },
            headway: h,
            noise: NoiseModel {
                sigma: pr.sigma,
                rng_seed: pr.seed,
            },
            spacing: pr.spacing,
            spatial_horizon: pr.spatial_horizon,
            plan_period: p.dt_p,
            track_period: t.dt_c,
            initial_headway: initial.headway,
            initial_speed: initial.speed.unwrap_or(0.0),
            idm: IdmParams {
                a_idm: idm.a,
                b_idm: idm.b,
                delta: idm.delta,
                s0: idm.s0,
                veh_len: idm.length,
                v0: idm.v0.unwrap_or(l.v_max),
                t_headway: idm.time_headway,
            },
            plant_a_min: plant.a_min,
            qp: QpSettings {
                abs_tol: solver.abs_tol,
                rel_tol: solver.rel_tol,
                max_iterations: solver.max_iterations,
                ..QpSettings::default()
            },
            controller: Controller::Mpc,
        };
        Ok(Config {
            sim,
            initial_speed: initial.speed,
            lead,
        })
    }
}

fn synthetic(kind: TraceKind, duration: f64) -> Result<LeadSource> {
    positive("lead.duration", duration)?;
    // Surface bad generator parameters now, attributed to the section.
    synth_trace(&kind, duration.min(1.0)).map_err(|e| Error::validation("lead", e.to_string()))?;
    Ok(LeadSource::Synthetic { kind, duration })
}
