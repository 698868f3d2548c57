//! Checked-in fixture data and its regeneration.
//!
//! Layout under the fixture directory:
//!
//! ```text
//! default_config.toml         default parameters (input, never rewritten)
//! traces/constant.csv         20 m/s constant lead, 120 s
//! traces/sawtooth.csv         10-25 m/s sawtooth at 1 m/s², 300 s
//! traces/stop_and_go.csv      seeded stop-and-go lead, 700 s
//! golden/constant_record.csv  closed-loop record, constant lead, σ = 0
//! golden/constant_plans.csv   per-plan log of the same run, timings dropped
//! MANIFEST                    config hash and sha256 of every generated file
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::sim::run;
use crate::synth::{synth_trace, TraceKind};

pub const CONFIG_FILE: &str = "default_config.toml";
pub const MANIFEST_FILE: &str = "MANIFEST";

/// Knobs of the generated fixtures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixtureParams {
    pub constant_speed: f64,
    pub constant_duration: f64,
    pub sawtooth_duration: f64,
    pub stop_and_go_seed: u64,
    pub stop_and_go_duration: f64,
    /// Initial lead-minus-ego distance of the golden run, mid-band at 20 m/s.
    pub golden_headway: f64,
}

impl Default for FixtureParams {
    fn default() -> Self {
        FixtureParams {
            constant_speed: 20.0,
            constant_duration: 120.0,
            sawtooth_duration: 300.0,
            stop_and_go_seed: 42,
            stop_and_go_duration: 700.0,
            golden_headway: 36.0,
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Generated fixture files keyed by relative path.
pub fn generate(config_text: &str, params: &FixtureParams) -> Result<BTreeMap<String, String>> {
    let cfg = Config::from_toml_str(config_text, CONFIG_FILE)?;
    let mut out = BTreeMap::new();

    let constant = synth_trace(
        &TraceKind::Constant {
            v: params.constant_speed,
        },
        params.constant_duration,
    )?;
    let sawtooth = synth_trace(
        &TraceKind::Sawtooth {
            v_low: 10.0,
            v_high: 25.0,
            accel: 1.0,
        },
        params.sawtooth_duration,
    )?;
    let stop_and_go = synth_trace(
        &TraceKind::StopAndGo {
            seed: params.stop_and_go_seed,
        },
        params.stop_and_go_duration,
    )?;
    out.insert("traces/constant.csv".into(), constant.to_csv_string());
    out.insert("traces/sawtooth.csv".into(), sawtooth.to_csv_string());
    out.insert("traces/stop_and_go.csv".into(), stop_and_go.to_csv_string());

    let mut sim = cfg.sim_for(&constant);
    sim.noise.sigma = 0.0;
    sim.initial_speed = params.constant_speed;
    sim.initial_headway = params.golden_headway;
    let rec = run(&sim, &constant)?;
    out.insert("golden/constant_record.csv".into(), rec.ticks_csv());
    out.insert(
        "golden/constant_plans.csv".into(),
        drop_column(&rec.plans_csv(), "solve_time"),
    );
    Ok(out)
}

fn drop_column(csv: &str, name: &str) -> String {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let Some(idx) = header.iter().position(|h| *h == name) else {
        return csv.to_string();
    };
    let mut out = String::new();
    for line in csv.lines() {
        let kept: Vec<&str> = line
            .split(',')
            .enumerate()
            .filter(|(i, _)| *i != idx)
            .map(|(_, f)| f)
            .collect();
        out.push_str(&kept.join(","));
        out.push('\n');
    }
    out
}

pub fn manifest(config_text: &str, files: &BTreeMap<String, String>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "config {}", sha256_hex(config_text.as_bytes()));
    for (path, body) in files {
        let _ = writeln!(out, "{}  {path}", sha256_hex(body.as_bytes()));
    }
    out
}

/// Differences between checked-in fixtures and a fresh regeneration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DriftReport {
    /// Generated files whose checked-in copy differs or is missing.
    pub differing: Vec<String>,
    /// The config file no longer matches the hash recorded in the manifest.
    pub config_hash_mismatch: bool,
    /// The manifest itself is missing or stale.
    pub manifest_stale: bool,
}

impl DriftReport {
    pub fn is_clean(&self) -> bool {
        self.differing.is_empty() && !self.config_hash_mismatch && !self.manifest_stale
    }
}

impl std::fmt::Display for DriftReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_clean() {
            return f.write_str("fixtures up to date");
        }
        if self.config_hash_mismatch {
            writeln!(
                f,
                "config hash mismatch: {CONFIG_FILE} changed since the manifest was written"
            )?;
        }
        if self.manifest_stale {
            writeln!(f, "{MANIFEST_FILE} is missing or stale")?;
        }
        for p in &self.differing {
            writeln!(f, "differs: {p}")?;
        }
        Ok(())
    }
}

fn read_config(dir: &Path) -> Result<String> {
    let p = dir.join(CONFIG_FILE);
    std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))
}

fn recorded_config_hash(manifest: &str) -> Option<&str> {
    manifest.lines().find_map(|l| l.strip_prefix("config "))
}

/// Compares the fixtures in `dir` against a regeneration with `params`.
pub fn check_fixtures(dir: &Path, params: &FixtureParams) -> Result<DriftReport> {
    let config = read_config(dir)?;
    let files = generate(&config, params)?;
    let recorded = std::fs::read_to_string(dir.join(MANIFEST_FILE)).ok();
    let mut report = DriftReport::default();
    if let Some(m) = &recorded {
        report.config_hash_mismatch =
            recorded_config_hash(m) != Some(sha256_hex(config.as_bytes()).as_str());
    }
    report.manifest_stale = recorded.as_deref() != Some(manifest(&config, &files).as_str());
    for (path, body) in &files {
        match std::fs::read_to_string(dir.join(path)) {
            Ok(on_disk) if on_disk == *body => {}
            _ => report.differing.push(path.clone()),
        }
    }
    Ok(report)
}

/// Rewrites every generated file and the manifest; returns the report of
/// what differed before the rewrite.
pub fn regenerate_fixtures(dir: &Path, params: &FixtureParams) -> Result<DriftReport> {
    let before = check_fixtures(dir, params)?;
    let config = read_config(dir)?;
    let files = generate(&config, params)?;
    for (path, body) in &files {
        let p = dir.join(path);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
    }
    let m = dir.join(MANIFEST_FILE);
    std::fs::write(&m, manifest(&config, &files)).map_err(|e| Error::io(&m, e))?;
    Ok(before)
}
