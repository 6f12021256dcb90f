//! Scenario runner behind the `demon` command line tool.
//!
//! Every scenario is a pure function of its `RunConfig`; trials are spread over
//! a rayon pool (size from `DEMON_THREADS`) and reduced in input order so the
//! output bytes do not depend on scheduling.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coding::binary_entropy;
use crate::demon::search::{enumerate_policies, SearchConfig, SearchError, SearchReport};
use crate::demon::{
    extract_first_expected_work, run_delayed_erasure_trial, run_demon_of_choice_extract_first,
    run_demon_of_choice_undo_first, run_policy, run_standard_demon, Placement, Policy,
    PolicyError, RunOptions, Termination,
};
use crate::engine::{
    expected_cycle_work, measurement_z_balance, EngineGeometry, MeasurementZReport, Side,
    TraceRecord,
};
use crate::info::{
    measurement_entropy_audit, DensityMatrix, InfoError, MeasurementAudit, ProjectorSet, C64,
};
use crate::stats::RunningStats;

/// Band for the delayed-erasure demon's mean net work per cycle.
pub const DELAYED_BAND: (f64, f64) = (-0.005, 0.0);

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Info(#[from] InfoError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    /// 2 for usage and configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_)
            | HarnessError::Policy(_)
            | HarnessError::Search(_)
            | HarnessError::Json(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Sweep,
    Cycle,
    Livelock,
    ExtractFirst,
    Delayed,
    Quantum,
    PolicySearch,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Jsonl,
}

/// Optional settings as read from a JSON config file or the command line.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    pub ell_over_l: Option<Vec<f64>>,
    pub cycles: Option<u64>,
    pub n: Option<u64>,
    pub seed: Option<u64>,
    pub seeds: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub horizon: Option<u64>,
    pub states: Option<usize>,
    pub policy: Option<String>,
}

impl ConfigLayer {
    pub fn from_json_file(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
    }

    /// Fields set in `over` win.
    pub fn overlay(self, over: ConfigLayer) -> ConfigLayer {
        ConfigLayer {
            ell_over_l: over.ell_over_l.or(self.ell_over_l),
            cycles: over.cycles.or(self.cycles),
            n: over.n.or(self.n),
            seed: over.seed.or(self.seed),
            seeds: over.seeds.or(self.seeds),
            out: over.out.or(self.out),
            format: over.format.or(self.format),
            horizon: over.horizon.or(self.horizon),
            states: over.states.or(self.states),
            policy: over.policy.or(self.policy),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub ell_over_l: Vec<f64>,
    pub cycles: u64,
    pub n: u64,
    pub seeds: Vec<u64>,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub horizon: u64,
    pub states: usize,
    pub policy: String,
}

impl RunConfig {
    /// Fills scenario defaults and validates.
    pub fn resolve(scenario: Scenario, layer: ConfigLayer) -> Result<Self, HarnessError> {
        let default_ell = match scenario {
            Scenario::Sweep => vec![0.5, 0.25, 0.125],
            Scenario::Delayed => vec![0.25, 0.5],
            _ => vec![0.25],
        };
        let default_seeds = match scenario {
            Scenario::Delayed => 20,
            Scenario::Livelock => 100,
            Scenario::PolicySearch => 1000,
            _ => 1,
        };
        let default_cycles = match scenario {
            Scenario::Cycle => 10,
            _ => 100_000,
        };
        let json_only = matches!(scenario, Scenario::Quantum | Scenario::PolicySearch);
        let seed = layer.seed.unwrap_or(0);
        let count = layer.seeds.unwrap_or(default_seeds);
        let cfg = RunConfig {
            scenario,
            ell_over_l: layer.ell_over_l.unwrap_or(default_ell),
            cycles: layer.cycles.unwrap_or(default_cycles),
            n: layer.n.unwrap_or(10_000),
            seeds: (0..count).map(|i| seed.wrapping_add(i)).collect(),
            out: layer.out,
            format: layer.format.unwrap_or(if json_only { Format::Jsonl } else { Format::Csv }),
            horizon: layer.horizon.unwrap_or(50),
            states: layer.states.unwrap_or(2),
            policy: layer.policy.unwrap_or_else(|| "standard".to_string()),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.ell_over_l.is_empty() {
            return Err(HarnessError::Config("no ell/L values".into()));
        }
        if let Some(r) = self.ell_over_l.iter().find(|r| !(**r > 0.0 && **r < 1.0)) {
            return Err(HarnessError::Config(format!("ell/L = {r} outside (0, 1)")));
        }
        if self.cycles == 0 || self.n == 0 {
            return Err(HarnessError::Config("cycles and n must be at least 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::Config("at least one seed is required".into()));
        }
        let json_only = matches!(self.scenario, Scenario::Quantum | Scenario::PolicySearch);
        if json_only && self.format == Format::Csv {
            return Err(HarnessError::Config(
                "this scenario produces nested reports; use --format jsonl".into(),
            ));
        }
        Ok(())
    }
}

fn geometry(r: f64) -> Result<EngineGeometry, HarnessError> {
    EngineGeometry::from_ratio(r).map_err(|e| HarnessError::Config(e.to_string()))
}

/// Worker pool capped by `DEMON_THREADS`.
pub fn thread_pool() -> Result<rayon::ThreadPool, HarnessError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("DEMON_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| HarnessError::Config(format!("DEMON_THREADS={v:?}")))?;
        b = b.num_threads(n);
    }
    b.build()
        .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))
}

/// One row of the fixed CSV schema.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    #[serde(rename = "ell_over_L")]
    pub ell_over_l: f64,
    pub empirical: f64,
    pub stderr: f64,
    pub analytic: f64,
    pub gap: f64,
    pub pass: bool,
}

pub const CSV_HEADER: [&str; 6] = ["ell_over_L", "empirical", "stderr", "analytic", "gap", "pass"];

fn point(ell: f64, stats: &RunningStats, analytic: f64) -> SweepPoint {
    let gap = (stats.mean() - analytic).abs();
    SweepPoint {
        ell_over_l: ell,
        empirical: stats.mean(),
        stderr: stats.stderr(),
        analytic,
        gap,
        pass: gap <= 3.0 * stats.stderr(),
    }
}

fn per_point_stats<F>(cfg: &RunConfig, run: F) -> Result<Vec<RunningStats>, HarnessError>
where
    F: Fn(EngineGeometry, u64) -> RunningStats + Sync,
{
    let geoms = cfg
        .ell_over_l
        .iter()
        .map(|&r| geometry(r))
        .collect::<Result<Vec<_>, _>>()?;
    let jobs: Vec<(usize, u64)> = (0..geoms.len())
        .flat_map(|i| cfg.seeds.iter().map(move |&s| (i, s)))
        .collect();
    let results: Vec<RunningStats> =
        thread_pool()?.install(|| jobs.par_iter().map(|&(i, s)| run(geoms[i], s)).collect());
    let mut merged = vec![RunningStats::new(); geoms.len()];
    for (&(i, _), r) in jobs.iter().zip(&results) {
        merged[i].merge(r);
    }
    Ok(merged)
}

/// Standard demon at each ell/L: per-cycle net work against the closed form.
pub fn run_sweep(cfg: &RunConfig) -> Result<Vec<SweepPoint>, HarnessError> {
    let cycles = cfg.cycles;
    let stats = per_point_stats(cfg, |g, s| run_standard_demon(g, cycles, s).per_cycle)?;
    Ok(cfg
        .ell_over_l
        .iter()
        .zip(&stats)
        .map(|(&r, st)| point(r, st, expected_cycle_work(&geometry(r).expect("validated"))))
        .collect())
}

/// Extract-first demon of choice against its branch-accounting value.
pub fn run_extract_first(cfg: &RunConfig) -> Result<Vec<SweepPoint>, HarnessError> {
    let cycles = cfg.cycles;
    let stats = per_point_stats(cfg, |g, s| run_demon_of_choice_extract_first(g, cycles, s).per_cycle)?;
    Ok(cfg
        .ell_over_l
        .iter()
        .zip(&stats)
        .map(|(&r, st)| point(r, st, extract_first_expected_work(&geometry(r).expect("validated"))))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DelayedPoint {
    #[serde(rename = "ell_over_L")]
    pub ell_over_l: f64,
    pub n: u64,
    pub seeds: usize,
    /// Mean over seeds of net work per cycle.
    pub empirical: f64,
    pub stderr: f64,
    pub mean_work_per_cycle: f64,
    pub mean_k_estimate: f64,
    /// Largest `|k_estimate/N - h(k/N)|` over seeds.
    pub max_rate_gap: f64,
    /// `(lg(N+1) + 2) / N`.
    pub rate_bound: f64,
    pub in_band: bool,
    pub pass: bool,
}

/// Delayed-erasure demon: one trial per seed, all drawn from stream `seed`.
pub fn run_delayed(cfg: &RunConfig) -> Result<Vec<DelayedPoint>, HarnessError> {
    let n = cfg.n;
    let pool = thread_pool()?;
    let mut out = Vec::new();
    for &r in &cfg.ell_over_l {
        let g = geometry(r)?;
        let reports: Vec<_> = pool.install(|| {
            cfg.seeds
                .par_iter()
                .map(|&s| run_delayed_erasure_trial(g, n, s, 0))
                .collect()
        });
        let nets: RunningStats = reports.iter().map(|d| d.net_per_cycle).collect();
        let work: RunningStats = reports.iter().map(|d| d.work_per_cycle).collect();
        let kest: RunningStats = reports.iter().map(|d| d.k_estimate as f64).collect();
        let max_rate_gap = reports
            .iter()
            .map(|d| (d.k_estimate as f64 / n as f64 - binary_entropy(d.k as f64 / n as f64)).abs())
            .fold(0.0, f64::max);
        let rate_bound = (((n + 1) as f64).log2() + 2.0) / n as f64;
        let complete = reports
            .iter()
            .all(|d| d.run.ledger.cycles == n && d.run.memory.occupied_bits() == 0);
        let in_band = nets.mean() >= DELAYED_BAND.0 && nets.mean() <= DELAYED_BAND.1;
        out.push(DelayedPoint {
            ell_over_l: r,
            n,
            seeds: reports.len(),
            empirical: nets.mean(),
            stderr: nets.stderr(),
            mean_work_per_cycle: work.mean(),
            mean_k_estimate: kest.mean(),
            max_rate_gap,
            rate_bound,
            in_band,
            pass: in_band && complete && max_rate_gap <= rate_bound,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LivelockRecord {
    pub seed: u64,
    #[serde(rename = "ell_over_L")]
    pub ell_over_l: f64,
    pub termination: String,
    pub steps: u64,
    pub period: Option<u64>,
    /// Steps from the first unprofitable measurement to the detected repeat.
    pub steps_after_measurement: Option<u64>,
    pub extracted: f64,
    pub erasure_paid: f64,
    pub pass: bool,
}

/// Undo-first demon with the particle forced onto the unprofitable side.
pub fn run_livelock(cfg: &RunConfig) -> Result<Vec<LivelockRecord>, HarnessError> {
    let mut out = Vec::new();
    for &r in &cfg.ell_over_l {
        let g = geometry(r)?;
        let unprofitable = if r <= 0.5 { Side::Right } else { Side::Left };
        for &seed in &cfg.seeds {
            let rep = run_demon_of_choice_undo_first(g, cfg.cycles.max(4), seed, Placement::Forced(unprofitable));
            let period = rep.livelock_witness.as_ref().map(|w| w.period);
            // insert and measure come first, so the measurement is step 2
            let after = rep.livelock_witness.as_ref().map(|w| w.repeated_at.saturating_sub(2));
            let pass = rep.termination == Termination::Livelock
                && period == Some(2)
                && after.is_some_and(|a| a <= 4);
            out.push(LivelockRecord {
                seed,
                ell_over_l: r,
                termination: format!("{:?}", rep.termination),
                steps: rep.steps,
                period,
                steps_after_measurement: after,
                extracted: rep.ledger.extracted,
                erasure_paid: rep.ledger.erasure_paid,
                pass,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct QuantumReport {
    pub commuting: MeasurementAudit,
    pub non_commuting: MeasurementAudit,
    pub z_balance: MeasurementZReport,
    pub pass: bool,
}

/// Audits a diagonal state and `|+>` against a z-basis measurement.
pub fn run_quantum(cfg: &RunConfig) -> Result<QuantumReport, HarnessError> {
    let projs = ProjectorSet::computational(2)?;
    let diag = DensityMatrix::diagonal(&[0.25, 0.75])?;
    let a = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let plus = DensityMatrix::pure(&[a, a])?;
    let commuting = measurement_entropy_audit(&diag, &projs, 3)?;
    let non_commuting = measurement_entropy_audit(&plus, &projs, 3)?;
    let chi_ok = non_commuting.chi.is_some_and(|c| (c - 1.0).abs() < 1e-12);
    let pass = [&commuting, &non_commuting].iter().all(|a| {
        a.involution_error < 1e-12
            && a.unitarity_error < 1e-12
            && (a.delta_h_d - a.delta_i_sd).abs() < 1e-10
    }) && commuting.commuting
        && (commuting.h_after - commuting.h_before).abs() < 1e-10
        && chi_ok;
    Ok(QuantumReport {
        commuting,
        non_commuting,
        z_balance: measurement_z_balance(&geometry(cfg.ell_over_l[0])?),
        pass,
    })
}

pub fn run_policy_search(cfg: &RunConfig) -> Result<SearchReport, HarnessError> {
    let search = SearchConfig {
        max_control_states: cfg.states,
        horizon: cfg.horizon,
        seeds: cfg.seeds.len() as u64,
        base_seed: cfg.seeds[0],
    };
    Ok(enumerate_policies(geometry(cfg.ell_over_l[0])?, search)?)
}

/// Loads a preset by name or a policy document from a path.
pub fn load_policy(name_or_path: &str) -> Result<Policy, HarnessError> {
    match Policy::preset(name_or_path) {
        Ok(p) => Ok(p),
        Err(PolicyError::UnknownPreset(_)) if Path::new(name_or_path).is_file() => {
            let text = std::fs::read_to_string(name_or_path)?;
            Ok(Policy::from_json(&text)?)
        }
        Err(e) => Err(e.into()),
    }
}

/// Traced run of one policy for `cycles` cycles.
pub fn run_cycle(cfg: &RunConfig) -> Result<Vec<TraceRecord>, HarnessError> {
    let policy = load_policy(&cfg.policy)?;
    let mut opts = RunOptions::cycles(cfg.cycles, cfg.seeds[0]);
    opts.trace = true;
    Ok(run_policy(&policy, geometry(cfg.ell_over_l[0])?, opts).trace)
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| HarnessError::Io(e.into_error()))
}

// Six decimals, without a sign on values that round to zero.
fn fixed6(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        s[1..].to_string()
    } else {
        s
    }
}

fn sweep_csv(rows: &[SweepPoint]) -> Result<Vec<u8>, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            fixed6(r.ell_over_l),
            fixed6(r.empirical),
            fixed6(r.stderr),
            fixed6(r.analytic),
            fixed6(r.gap),
            r.pass.to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| HarnessError::Io(e.into_error()))
}

fn jsonl_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, HarnessError> {
    let mut out = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut out, r)?;
        out.push(b'\n');
    }
    Ok(out)
}

fn rows_bytes<T: Serialize>(rows: &[T], format: Format) -> Result<Vec<u8>, HarnessError> {
    match format {
        Format::Csv => csv_bytes(rows),
        Format::Jsonl => jsonl_bytes(rows),
    }
}

/// Rendered output of one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub pass: bool,
    pub bytes: Vec<u8>,
}

pub fn run_scenario(cfg: &RunConfig) -> Result<Outcome, HarnessError> {
    cfg.validate()?;
    let (pass, bytes) = match cfg.scenario {
        Scenario::Sweep | Scenario::ExtractFirst => {
            let rows = if cfg.scenario == Scenario::Sweep {
                run_sweep(cfg)?
            } else {
                run_extract_first(cfg)?
            };
            let bytes = match cfg.format {
                Format::Csv => sweep_csv(&rows)?,
                Format::Jsonl => jsonl_bytes(&rows)?,
            };
            (rows.iter().all(|r| r.pass), bytes)
        }
        Scenario::Delayed => {
            let rows = run_delayed(cfg)?;
            (rows.iter().all(|r| r.pass), rows_bytes(&rows, cfg.format)?)
        }
        Scenario::Livelock => {
            let rows = run_livelock(cfg)?;
            (rows.iter().all(|r| r.pass), rows_bytes(&rows, cfg.format)?)
        }
        Scenario::Cycle => (true, rows_bytes(&run_cycle(cfg)?, cfg.format)?),
        Scenario::Quantum => {
            let rep = run_quantum(cfg)?;
            (rep.pass, jsonl_bytes(&[&rep])?)
        }
        Scenario::PolicySearch => {
            let rep = run_policy_search(cfg)?;
            (rep.pass, jsonl_bytes(&[&rep])?)
        }
    };
    Ok(Outcome { pass, bytes })
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| HarnessError::Io(e.error))?;
    Ok(())
}
