//! Parameter sweep over waypoint spacing and ETA noise.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Deserialize;

use crate::baselines::{oracle_plan, plan_speed_profile};
use crate::config::{Config, LeadSource};
use crate::error::{Error, Result};
use crate::metrics::{fuel_saving, fuel_total, tracking_error, FuelModel, PolynomialFuel};
use crate::prediction::{LeadTrace, NoiseModel};
use crate::sim::{run, Controller, SimConfig, SimRecord};

pub const DEFAULT_DS: [f64; 6] = [10.0, 100.0, 200.0, 300.0, 400.0, 500.0];
pub const DEFAULT_SIGMA: [f64; 6] = [0.01, 0.05, 0.1, 0.15, 0.2, 0.25];

pub const METRICS_HEADER: &str = "ds,sigma,seed,e,f,min_gap,collision";
pub const AGGREGATE_HEADER: &str = "ds,sigma,seeds,e_mean,f_mean,min_gap,collisions";

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default = "default_ds")]
    pub ds: Vec<f64>,
    #[serde(default = "default_sigma")]
    pub sigma: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Base configuration file; the embedded default when absent.
    #[serde(default)]
    pub config: Option<PathBuf>,
    /// Lead trace CSV overriding the configuration's lead source.
    #[serde(default)]
    pub trace: Option<PathBuf>,
    /// Lifts the default bounds on `ds` and `sigma`.
    #[serde(default)]
    pub allow_out_of_range: bool,
}

fn default_ds() -> Vec<f64> {
    DEFAULT_DS.to_vec()
}

fn default_sigma() -> Vec<f64> {
    DEFAULT_SIGMA.to_vec()
}

impl SweepSpec {
    pub fn new(seeds: Vec<u64>) -> Self {
        SweepSpec {
            ds: default_ds(),
            sigma: default_sigma(),
            seeds,
            config: None,
            trace: None,
            allow_out_of_range: false,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut spec: SweepSpec = toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
                .unwrap_or(0),
            message: e.message().to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut spec.config, &mut spec.trace].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ds.is_empty() {
            return Err(Error::validation("ds", "must not be empty"));
        }
        if self.sigma.is_empty() {
            return Err(Error::validation("sigma", "must not be empty"));
        }
        if self.seeds.is_empty() {
            return Err(Error::validation("seeds", "must not be empty"));
        }
        for &d in &self.ds {
            let ok = if self.allow_out_of_range {
                d > 0.0 && d.is_finite()
            } else {
                (10.0..=500.0).contains(&d)
            };
            if !ok {
                return Err(Error::validation("ds", format!("{d} outside [10, 500]")));
            }
        }
        for &s in &self.sigma {
            let ok = if self.allow_out_of_range {
                (0.0..1.0).contains(&s)
            } else {
                (0.01..=0.25).contains(&s)
            };
            if !ok {
                return Err(Error::validation(
                    "sigma",
                    format!("{s} outside [0.01, 0.25]"),
                ));
            }
        }
        Ok(())
    }

    /// The base configuration with the trace override applied.
    pub fn base_config(&self) -> Result<Config> {
        let mut cfg = match &self.config {
            Some(p) => Config::load(p)?,
            None => Config::default_config(),
        };
        if let Some(t) = &self.trace {
            cfg.lead = LeadSource::File(t.clone());
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricRow {
    pub ds: f64,
    pub sigma: f64,
    pub seed: u64,
    pub e: f64,
    pub f: f64,
    pub min_gap: f64,
    pub collision: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateRow {
    pub ds: f64,
    pub sigma: f64,
    pub seeds: usize,
    pub e_mean: f64,
    pub f_mean: f64,
    pub min_gap: f64,
    pub collisions: usize,
}

/// Metrics of a single controller run against the shared references.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    pub e: f64,
    pub f: f64,
    pub fuel: f64,
    pub min_gap: f64,
    pub collision: bool,
    pub mean_plan_time: f64,
    pub mean_track_time: f64,
}

/// Quantities computed once per trace and shared by every cell.
#[derive(Debug, Clone)]
pub struct Baselines {
    /// Oracle planned speed at every tick.
    pub reference_speeds: Vec<f64>,
    /// IDM speeds and accelerations at every tick, for fuel over matching windows.
    pub idm_speeds: Vec<f64>,
    pub idm_accels: Vec<f64>,
    pub idm: RunSummary,
    pub oracle: RunSummary,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub rows: Vec<MetricRow>,
    pub aggregate: Vec<AggregateRow>,
    pub baselines: Baselines,
}

/// Scores `rec`; `idm` holds the IDM speeds and accelerations. A run that
/// halted early is compared against the IDM over the same window.
fn summarize(
    rec: &SimRecord,
    reference: &[f64],
    idm: Option<(&[f64], &[f64])>,
    dt: f64,
) -> Result<RunSummary> {
    let model = PolynomialFuel::default();
    let speeds = rec.ego_speeds();
    let n = speeds.len();
    let fuel = fuel_total(&speeds, &rec.ego_accels(), dt, &model as &dyn FuelModel)?;
    let e = tracking_error(&reference[..n], &speeds)?;
    let f = match idm {
        Some((v, a)) => fuel_saving(fuel_total(&v[..n], &a[..n], dt, &model)?, fuel)?,
        None => 100.0,
    };
    Ok(RunSummary {
        e,
        f,
        fuel,
        min_gap: rec.min_gap(),
        collision: rec.collided,
        mean_plan_time: rec.mean_plan_time(),
        mean_track_time: rec.mean_track_time(),
    })
}

/// Runs the IDM baseline, the open-loop oracle reference and the
/// closed-loop oracle once for `trace`.
pub fn compute_baselines(sim: &SimConfig, trace: &LeadTrace<f64>) -> Result<Baselines> {
    let dt = sim.track_period;
    let plans = oracle_plan(
        trace,
        &sim.planner,
        &sim.headway,
        crate::dynamics::VehicleState::new(
            trace.samples()[0].s - sim.initial_headway,
            sim.initial_speed,
        ),
        &sim.qp,
    )?;
    let n_ticks = ((trace.end_time() - trace.start_time()) / dt + 1e-9).floor() as usize;
    let times: Vec<f64> = (0..n_ticks)
        .map(|k| trace.start_time() + k as f64 * dt)
        .collect();
    let reference_speeds = plan_speed_profile(&plans, &times)?;

    let idm_rec = run(
        &SimConfig {
            controller: Controller::Idm,
            ..sim.clone()
        },
        trace,
    )?;
    let idm = summarize(&idm_rec, &reference_speeds, None, dt)?;
    let (idm_speeds, idm_accels) = (idm_rec.ego_speeds(), idm_rec.ego_accels());
    if idm_speeds.len() != n_ticks {
        return Err(Error::contract(
            "the IDM baseline collided; no fuel reference",
        ));
    }
    let oracle_rec = run(
        &SimConfig {
            controller: Controller::Oracle,
            ..sim.clone()
        },
        trace,
    )?;
    let oracle = summarize(
        &oracle_rec,
        &reference_speeds,
        Some((&idm_speeds, &idm_accels)),
        dt,
    )?;
    Ok(Baselines {
        reference_speeds,
        idm_speeds,
        idm_accels,
        idm,
        oracle,
    })
}

/// Runs one MPC cell and scores it against the baselines.
pub fn run_cell(
    sim: &SimConfig,
    trace: &LeadTrace<f64>,
    baselines: &Baselines,
    ds: f64,
    sigma: f64,
    seed: u64,
) -> Result<(MetricRow, SimRecord)> {
    let cfg = SimConfig {
        spacing: ds,
        noise: NoiseModel {
            sigma,
            rng_seed: seed,
        },
        controller: Controller::Mpc,
        ..sim.clone()
    };
    let rec = run(&cfg, trace)?;
    let s = summarize(
        &rec,
        &baselines.reference_speeds,
        Some((&baselines.idm_speeds, &baselines.idm_accels)),
        cfg.track_period,
    )?;
    Ok((
        MetricRow {
            ds,
            sigma,
            seed,
            e: s.e,
            f: s.f,
            min_gap: s.min_gap,
            collision: s.collision,
        },
        rec,
    ))
}

pub fn run_sweep(spec: &SweepSpec, base: &Config, jobs: usize) -> Result<SweepOutput> {
    spec.validate()?;
    let trace = base.load_trace()?;
    let sim = base.sim_for(&trace);
    sim.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::contract(format!("cannot start worker pool: {e}")))?;

    let baselines = compute_baselines(&sim, &trace)?;
    let cells: Vec<(f64, f64, u64)> = spec
        .ds
        .iter()
        .flat_map(|&d| {
            spec.sigma
                .iter()
                .flat_map(move |&s| spec.seeds.iter().map(move |&k| (d, s, k)))
        })
        .collect();
    let rows: Vec<MetricRow> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(d, s, k)| run_cell(&sim, &trace, &baselines, d, s, k).map(|(row, _)| row))
            .collect::<Result<Vec<_>>>()
    })?;
    let aggregate = aggregate(&rows, spec);
    Ok(SweepOutput {
        rows,
        aggregate,
        baselines,
    })
}

pub fn aggregate(rows: &[MetricRow], spec: &SweepSpec) -> Vec<AggregateRow> {
    let mut out = Vec::with_capacity(spec.ds.len() * spec.sigma.len());
    for &d in &spec.ds {
        for &s in &spec.sigma {
            let cell: Vec<&MetricRow> = rows.iter().filter(|r| r.ds == d && r.sigma == s).collect();
            let n = cell.len().max(1) as f64;
            out.push(AggregateRow {
                ds: d,
                sigma: s,
                seeds: cell.len(),
                e_mean: cell.iter().map(|r| r.e).sum::<f64>() / n,
                f_mean: cell.iter().map(|r| r.f).sum::<f64>() / n,
                min_gap: cell.iter().map(|r| r.min_gap).fold(f64::INFINITY, f64::min),
                collisions: cell.iter().filter(|r| r.collision).count(),
            });
        }
    }
    out
}

impl SweepOutput {
    pub fn metrics_csv(&self) -> String {
        let mut out = String::from(METRICS_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.ds, r.sigma, r.seed, r.e, r.f, r.min_gap, r.collision as u8
            );
        }
        out
    }

    pub fn aggregate_csv(&self) -> String {
        let mut out = String::from(AGGREGATE_HEADER);
        out.push('\n');
        for r in &self.aggregate {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.ds, r.sigma, r.seeds, r.e_mean, r.f_mean, r.min_gap, r.collisions
            );
        }
        out
    }

    pub fn baselines_csv(&self) -> String {
        let mut out = String::from("controller,e,f,fuel,min_gap,collision\n");
        for (name, s) in [
            ("idm", &self.baselines.idm),
            ("oracle", &self.baselines.oracle),
        ] {
            let _ = writeln!(
                out,
                "{name},{},{},{},{},{}",
                s.e, s.f, s.fuel, s.min_gap, s.collision as u8
            );
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, body) in [
            ("metrics.csv", self.metrics_csv()),
            ("aggregate.csv", self.aggregate_csv()),
            ("baselines.csv", self.baselines_csv()),
        ] {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }
}
