use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use hmpc::config::{Config, LeadSource};
use hmpc::fixtures::{check_fixtures, regenerate_fixtures, FixtureParams};
use hmpc::metrics::{fuel_total, PolynomialFuel};
use hmpc::sim::{run, Controller, SimRecord};
use hmpc::sweep::{run_sweep, SweepSpec};
use hmpc::Error;

#[derive(Parser)]
#[command(
    name = "hmpc",
    version,
    about = "Hierarchical MPC car-following simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one closed-loop simulation with the MPC controller.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        /// ETA noise level, overriding the config.
        #[arg(long)]
        sigma: Option<f64>,
        /// ETA noise seed, overriding the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a baseline controller.
    Baseline {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum)]
        controller: BaselineKind,
    },
    /// Sweep waypoint spacing and ETA noise.
    Sweep {
        /// Sweep description (TOML). Defaults to the full grid with seeds 1-5.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value = "sweep_out")]
        out: PathBuf,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Regenerate the fixture set, or check it for drift.
    Fixtures {
        #[arg(long, default_value = "crates/core/fixtures")]
        dir: PathBuf,
        /// Report drift without rewriting anything.
        #[arg(long)]
        check: bool,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    /// Configuration file (TOML). Defaults to the built-in configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Lead trace CSV (`t,s,v,a`), overriding the configured lead.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Output directory for record.csv and plans.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineKind {
    Idm,
    Oracle,
}

fn load_config(args: &RunArgs) -> hmpc::Result<Config> {
    let mut cfg = match &args.config {
        Some(p) => Config::load(p)?,
        None => Config::default_config(),
    };
    if let Some(t) = &args.trace {
        cfg.lead = LeadSource::File(t.clone());
    }
    Ok(cfg)
}

/// Returns `false` when the run ended in a collision.
fn simulate(
    args: &RunArgs,
    controller: Controller,
    sigma: Option<f64>,
    seed: Option<u64>,
) -> hmpc::Result<bool> {
    let cfg = load_config(args)?;
    let trace = cfg.load_trace()?;
    let mut sim = cfg.sim_for(&trace);
    sim.controller = controller;
    if let Some(s) = sigma {
        sim.noise.sigma = s;
    }
    if let Some(s) = seed {
        sim.noise.rng_seed = s;
    }
    sim.validate()?;
    let rec = run(&sim, &trace)?;
    if let Some(dir) = &args.out {
        rec.write(dir)?;
    }
    print_summary(&rec, sim.track_period)?;
    if rec.collided {
        eprintln!(
            "error: collision at t = {:.1} s",
            rec.ticks.last().map_or(0.0, |r| r.t)
        );
    }
    Ok(!rec.collided)
}

fn print_summary(rec: &SimRecord, dt: f64) -> hmpc::Result<()> {
    let fuel = fuel_total(
        &rec.ego_speeds(),
        &rec.ego_accels(),
        dt,
        &PolynomialFuel::default(),
    )?;
    let duration =
        rec.ticks.last().map_or(0.0, |r| r.t) - rec.ticks.first().map_or(0.0, |r| r.t) + dt;
    println!("ticks            {}", rec.ticks.len());
    println!("duration         {duration:.1} s");
    println!("plans            {}", rec.plans.len());
    println!("min bumper gap   {:.3} m", rec.min_gap());
    println!(
        "collision        {}",
        if rec.collided { "yes" } else { "no" }
    );
    println!("fuel             {fuel:.3}");
    println!("planner fallback {}", rec.planner_fallbacks);
    println!("tracker fallback {}", rec.tracker_fallbacks);
    if !rec.plans.is_empty() {
        println!("mean plan solve  {:.3} ms", rec.mean_plan_time() * 1e3);
    }
    if !rec.track_solve_times.is_empty() {
        println!("mean track solve {:.3} ms", rec.mean_track_time() * 1e3);
    }
    Ok(())
}

fn sweep(spec: Option<&Path>, out: &Path, jobs: usize) -> hmpc::Result<()> {
    let spec = match spec {
        Some(p) => SweepSpec::load(p)?,
        None => SweepSpec::new(vec![1, 2, 3, 4, 5]),
    };
    let base = spec.base_config()?;
    let res = run_sweep(&spec, &base, jobs)?;
    res.write(out)?;
    println!(
        "{:>6} {:>6} {:>9} {:>9} {:>9} {:>4}",
        "ds", "sigma", "e_mean", "f_mean", "min_gap", "coll"
    );
    for r in &res.aggregate {
        println!(
            "{:>6} {:>6} {:>9.4} {:>9.3} {:>9.3} {:>4}",
            r.ds, r.sigma, r.e_mean, r.f_mean, r.min_gap, r.collisions
        );
    }
    println!(
        "idm fuel {:.3}, oracle e {:.4}",
        res.baselines.idm.fuel, res.baselines.oracle.e
    );
    println!("wrote {}", out.display());
    Ok(())
}

fn fixtures(dir: &Path, check: bool) -> hmpc::Result<bool> {
    let params = FixtureParams::default();
    let report = if check {
        check_fixtures(dir, &params)?
    } else {
        regenerate_fixtures(dir, &params)?
    };
    if report.is_clean() {
        println!("{report}");
    } else if check {
        eprint!("{report}");
    } else {
        print!("regenerated:\n{report}");
        return Ok(true);
    }
    Ok(report.is_clean())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Simulate { run, sigma, seed } => simulate(run, Controller::Mpc, *sigma, *seed),
        Command::Baseline { run, controller } => {
            let c = match controller {
                BaselineKind::Idm => Controller::Idm,
                BaselineKind::Oracle => Controller::Oracle,
            };
            simulate(run, c, None, None)
        }
        Command::Sweep { spec, out, jobs } => sweep(spec.as_deref(), out, *jobs).map(|_| true),
        Command::Fixtures { dir, check } => fixtures(dir, *check),
    };
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> ExitCode {
    if e.is_input_error() {
        ExitCode::from(2)
    } else {
        ExitCode::from(1)
    }
}
