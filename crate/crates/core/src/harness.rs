//! Monte Carlo experiment runner and command-line front end.
//!
//! A single JSON config describes the link, the channel model, and the
//! sweep axes (transmit power allowance × interference level × algorithm).
//! Each sweep point averages over seeded trials; trial `t` always draws the
//! channel from `base_seed + t`, so every algorithm and every sweep point
//! sees identical realizations (paired comparison) and the whole run is a
//! pure function of the config file.
//!
//! Infeasible trials contribute zero capacity to the spectral-efficiency
//! mean but are excluded from the splitting-ratio and harvested-power
//! means, which cover feasible trials only; `infeasible_fraction` reports
//! how many were excluded. Trials run on a worker pool (`SWIPT_THREADS`
//! caps its width); per-trial results are reduced in trial order, so the
//! output is identical for any worker count.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channelgen::{generate_channel, tgn_path_loss, ChannelGenConfig};
use crate::error::{Error, Result};
use crate::model::{
    dbm_to_watt, effective_power_budget, watt_to_dbm, ChannelRealization, SolveResult,
    SystemParams,
};
use crate::oracle::{
    check_instance, compare_with_solver, suggested_power_grid, OracleConfig,
    SOLVER_DEFICIT_TOL, SOLVER_EXCESS_TOL,
};
use crate::solvers::{
    solve_coordinate_ascent, solve_high_sinr, solve_optimal, CoordAscentConfig, OptimalConfig,
};

/// The three solvers, by what they do.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// Exhaustive splitting-ratio grid with exact power subproblems.
    Optimal,
    /// Alternating power / splitting-ratio updates.
    CoordinateAscent,
    /// Closed form from the high-SINR approximation.
    HighSinr,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Optimal => "optimal",
            Algorithm::CoordinateAscent => "coordinate-ascent",
            Algorithm::HighSinr => "high-sinr",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One full experiment: link parameters, channel model, sweep axes.
///
/// `base.p_max` and `base.sigma_i2` act as single-solve defaults; sweep
/// points override them from `p_max_sweep_dbm` and `inr_db_levels`
/// (interference level = `10^(inr/10) * sigma_zs2`).
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub base: SystemParams,
    pub channel: ChannelGenConfig,
    pub algorithms: Vec<Algorithm>,
    pub p_max_sweep_dbm: Vec<f64>,
    pub inr_db_levels: Vec<f64>,
    pub trials: usize,
    pub base_seed: u64,
    pub output_path: PathBuf,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        self.channel.validate()?;
        if self.trials < 1 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if self.p_max_sweep_dbm.is_empty() {
            return Err(Error::Config("p_max_dbm sweep list must not be empty".into()));
        }
        if self.inr_db_levels.is_empty() {
            return Err(Error::Config("inr_db level list must not be empty".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::Config("algorithm list must not be empty".into()));
        }
        let unique: BTreeSet<&str> = self.algorithms.iter().map(|a| a.name()).collect();
        if unique.len() != self.algorithms.len() {
            return Err(Error::Config("algorithm list contains duplicates".into()));
        }
        if self.output_path.as_os_str().is_empty() {
            return Err(Error::Config("output_path must not be empty".into()));
        }
        Ok(())
    }

    /// Link parameters at one sweep point.
    pub fn params_at(&self, p_max_dbm: f64, inr_db: f64) -> SystemParams {
        let mut params = self.base.clone();
        params.p_max = dbm_to_watt(p_max_dbm);
        params.sigma_i2 = 10f64.powf(inr_db / 10.0) * params.sigma_zs2;
        params
    }
}

// ---------------------------------------------------------------------------
// JSON config schema: dB/dBm at the human boundary, watts inside
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    system: RawSystem,
    channel: RawChannel,
    sweep: RawSweep,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    bandwidth_hz: f64,
    n_subcarriers: usize,
    sigma_zs2_dbm: f64,
    sigma_za2_dbm: f64,
    p_max_dbm: f64,
    p_pg_dbm: f64,
    p_c_dbm: f64,
    epsilon: f64,
    eta: f64,
    /// Minimum harvested power; `null` or absent means no requirement.
    p_min_req_dbm: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    rician_k_db: f64,
    distance_m: f64,
    carrier_freq_hz: f64,
    #[serde(default)]
    shadowing_db: f64,
    #[serde(default = "default_breakpoint_m")]
    breakpoint_m: f64,
    #[serde(default = "default_pathloss_exponent")]
    pathloss_exponent: f64,
}

fn default_breakpoint_m() -> f64 {
    5.0
}

fn default_pathloss_exponent() -> f64 {
    3.5
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    p_max_dbm: Vec<f64>,
    inr_db: Vec<f64>,
    algorithms: Vec<Algorithm>,
    trials: usize,
    base_seed: u64,
    output_path: String,
}

/// Loads and validates an experiment config from a JSON file.
///
/// dB/dBm fields are converted to linear watts exactly once, here. Unknown
/// keys are rejected so a typo cannot silently fall back to a default.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    let raw: RawConfig = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("cannot parse config {}: {e}", path.display())))?;

    let base = SystemParams {
        bandwidth_total: raw.system.bandwidth_hz,
        n_subcarriers: raw.system.n_subcarriers,
        sigma_zs2: dbm_to_watt(raw.system.sigma_zs2_dbm),
        sigma_za2: dbm_to_watt(raw.system.sigma_za2_dbm),
        sigma_i2: 0.0, // set per sweep point from the INR axis
        sigma_i2_per_subcarrier: None,
        p_max: dbm_to_watt(raw.system.p_max_dbm),
        p_pg: dbm_to_watt(raw.system.p_pg_dbm),
        p_c: dbm_to_watt(raw.system.p_c_dbm),
        epsilon: raw.system.epsilon,
        eta: raw.system.eta,
        p_min_req: raw.system.p_min_req_dbm.map(dbm_to_watt).unwrap_or(0.0),
        carrier_freq: raw.channel.carrier_freq_hz,
        distance: raw.channel.distance_m,
        rician_k: raw.channel.rician_k_db,
    };
    let channel = ChannelGenConfig {
        rician_k_db: raw.channel.rician_k_db,
        distance_m: raw.channel.distance_m,
        carrier_freq_hz: raw.channel.carrier_freq_hz,
        shadowing_linear: 10f64.powf(raw.channel.shadowing_db / 10.0),
        breakpoint_m: raw.channel.breakpoint_m,
        pathloss_exponent: raw.channel.pathloss_exponent,
        seed: raw.sweep.base_seed,
    };
    let cfg = ExperimentConfig {
        base,
        channel,
        algorithms: raw.sweep.algorithms,
        p_max_sweep_dbm: raw.sweep.p_max_dbm,
        inr_db_levels: raw.sweep.inr_db,
        trials: raw.sweep.trials,
        base_seed: raw.sweep.base_seed,
        output_path: PathBuf::from(raw.sweep.output_path),
    };
    cfg.validate()?;
    Ok(cfg)
}

// ---------------------------------------------------------------------------
// Sweep execution
// ---------------------------------------------------------------------------

/// Averages of one (power allowance, interference level, algorithm) cell.
#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub p_max_dbm: f64,
    pub inr_db: f64,
    pub algorithm: Algorithm,
    /// Mean over all trials; infeasible trials count as zero capacity.
    pub mean_spectral_efficiency: f64,
    /// Mean over feasible trials only; NaN when none were feasible.
    pub mean_rho: f64,
    /// Mean harvested power over feasible trials, converted to dBm;
    /// NaN when none were feasible or nothing was harvested.
    pub mean_harvested_dbm: f64,
    pub infeasible_fraction: f64,
    pub trials: usize,
}

/// Runs one solver on one realization with default solver tuning.
pub fn solve_single(
    channel: &ChannelRealization,
    params: &SystemParams,
    algorithm: Algorithm,
) -> Result<SolveResult> {
    match algorithm {
        Algorithm::Optimal => solve_optimal(channel, params, &OptimalConfig::default()),
        Algorithm::CoordinateAscent => {
            solve_coordinate_ascent(channel, params, &CoordAscentConfig::default())
        }
        Algorithm::HighSinr => solve_high_sinr(channel, params),
    }
}

struct TrialOutcome {
    feasible: bool,
    spectral_efficiency: f64,
    rho: f64,
    harvested: f64,
}

/// Runs the full sweep: every (p_max, inr, algorithm) cell × every trial.
///
/// Rows come back in sweep order (p_max outermost, then inr, then
/// algorithm). Deterministic for a fixed config, whatever the worker count.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepPoint>> {
    cfg.validate()?;
    let channels: Vec<ChannelRealization> = (0..cfg.trials)
        .map(|t| generate_channel(&cfg.base, &cfg.channel, cfg.base_seed + t as u64))
        .collect::<Result<_>>()?;

    let mut points = Vec::with_capacity(
        cfg.p_max_sweep_dbm.len() * cfg.inr_db_levels.len() * cfg.algorithms.len(),
    );
    for &p_max_dbm in &cfg.p_max_sweep_dbm {
        for &inr_db in &cfg.inr_db_levels {
            let params = cfg.params_at(p_max_dbm, inr_db);
            for &algorithm in &cfg.algorithms {
                let outcomes: Vec<TrialOutcome> = channels
                    .par_iter()
                    .map(|channel| {
                        solve_single(channel, &params, algorithm).map(|r| TrialOutcome {
                            feasible: r.feasible,
                            spectral_efficiency: r.spectral_efficiency,
                            rho: r.policy.rho,
                            harvested: r.harvested,
                        })
                    })
                    .collect::<Result<_>>()?;
                points.push(summarize(p_max_dbm, inr_db, algorithm, &outcomes));
            }
        }
    }
    Ok(points)
}

fn summarize(
    p_max_dbm: f64,
    inr_db: f64,
    algorithm: Algorithm,
    outcomes: &[TrialOutcome],
) -> SweepPoint {
    let trials = outcomes.len();
    let mean_spectral_efficiency = outcomes
        .iter()
        .map(|o| if o.feasible { o.spectral_efficiency } else { 0.0 })
        .sum::<f64>()
        / trials as f64;
    let feasible_count = outcomes.iter().filter(|o| o.feasible).count();
    let (mean_rho, mean_harvested_dbm) = if feasible_count > 0 {
        let k = feasible_count as f64;
        let rho = outcomes.iter().filter(|o| o.feasible).map(|o| o.rho).sum::<f64>() / k;
        let harvested_w =
            outcomes.iter().filter(|o| o.feasible).map(|o| o.harvested).sum::<f64>() / k;
        let harvested_dbm = watt_to_dbm(harvested_w).unwrap_or(f64::NAN);
        (rho, harvested_dbm)
    } else {
        (f64::NAN, f64::NAN)
    };
    SweepPoint {
        p_max_dbm,
        inr_db,
        algorithm,
        mean_spectral_efficiency,
        mean_rho,
        mean_harvested_dbm,
        infeasible_fraction: (trials - feasible_count) as f64 / trials as f64,
        trials,
    }
}

// ---------------------------------------------------------------------------
// CSV output
// ---------------------------------------------------------------------------

const CSV_HEADER: &str = "p_max_dbm,inr_db,algorithm,mean_spectral_efficiency,mean_rho,\
                          mean_harvested_dbm,infeasible_fraction,trials";

/// Writes sweep points as CSV: a header row plus one row per point, floats
/// in scientific notation with 10 significant digits (so a parse rounds
/// back to within 1e-9 relative), UTF-8, LF line endings. Refuses an empty
/// point list without touching the filesystem.
pub fn emit_csv(points: &[SweepPoint], path: &Path) -> Result<()> {
    if points.is_empty() {
        return Err(Error::Config("refusing to write a CSV with no sweep points".into()));
    }
    let with_path = |e: std::io::Error| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    };
    let mut out = Vec::with_capacity(64 * (points.len() + 1));
    out.extend_from_slice(CSV_HEADER.as_bytes());
    out.push(b'\n');
    for p in points {
        writeln!(
            out,
            "{:.9e},{:.9e},{},{:.9e},{:.9e},{:.9e},{:.9e},{}",
            p.p_max_dbm,
            p.inr_db,
            p.algorithm,
            p.mean_spectral_efficiency,
            p.mean_rho,
            p.mean_harvested_dbm,
            p.infeasible_fraction,
            p.trials
        )
        .expect("writing to a Vec cannot fail");
    }
    fs::write(path, out).map_err(with_path)
}

// ---------------------------------------------------------------------------
// Command-line interface
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "swipt",
    version,
    about = "Power allocation experiments for an OFDM link that sends data and \
             harvestable energy through the same signal"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured sweep and write its CSV.
    Sweep {
        /// Experiment config (JSON).
        #[arg(long)]
        config: PathBuf,
    },
    /// Solve one seeded realization and print the result as JSON.
    Solve {
        /// Experiment config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Channel seed.
        #[arg(long)]
        seed: u64,
        /// Which solver to run.
        #[arg(long, value_enum)]
        algorithm: Algorithm,
        /// Override the transmit power allowance; default is the config's base value.
        #[arg(long)]
        p_max_dbm: Option<f64>,
        /// Override the interference level; default is the config's first sweep level.
        #[arg(long)]
        inr_db: Option<f64>,
    },
    /// Check a config and print its derived quantities.
    Validate {
        /// Experiment config (JSON).
        #[arg(long)]
        config: PathBuf,
    },
    /// Cross-check the grid solver against the brute-force oracle.
    OracleCheck {
        /// Largest subcarrier count to exercise (2..=4).
        #[arg(long, default_value_t = 4)]
        subcarriers: usize,
        /// Number of deterministic instances.
        #[arg(long, default_value_t = 12)]
        instances: u64,
        /// Oracle power-grid override; default scales with the subcarrier count.
        #[arg(long)]
        power_grid: Option<usize>,
        /// Oracle splitting-ratio grid; the default matches the solver's grid.
        #[arg(long, default_value_t = 1000)]
        rho_grid: usize,
    },
}

/// Entry point behind the `swipt` binary. Exit codes: 0 success, 1 an
/// infeasible single solve or a failed oracle check (or any runtime
/// failure), 2 a config or usage error.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    configure_worker_pool();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Json(_) => 2,
                _ => 1,
            }
        }
    }
}

/// Applies `SWIPT_THREADS` to the global worker pool. Silently keeps the
/// existing pool when one is already installed (e.g. repeated calls).
fn configure_worker_pool() {
    if let Ok(raw) = std::env::var("SWIPT_THREADS") {
        if let Ok(threads) = raw.parse::<usize>() {
            if threads >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Sweep { config } => {
            let cfg = load_config(&config)?;
            let points = run_sweep(&cfg)?;
            emit_csv(&points, &cfg.output_path)?;
            println!("wrote {} sweep points to {}", points.len(), cfg.output_path.display());
            Ok(0)
        }
        Command::Solve { config, seed, algorithm, p_max_dbm, inr_db } => {
            let cfg = load_config(&config)?;
            let mut params = cfg.base.clone();
            if let Some(dbm) = p_max_dbm {
                params.p_max = dbm_to_watt(dbm);
            }
            let inr = inr_db.unwrap_or(cfg.inr_db_levels[0]);
            params.sigma_i2 = 10f64.powf(inr / 10.0) * params.sigma_zs2;
            let channel = generate_channel(&params, &cfg.channel, seed)?;
            let result = solve_single(&channel, &params, algorithm)?;
            println!("{}", serde_json::to_string_pretty(&result)?);
            Ok(if result.feasible { 0 } else { 1 })
        }
        Command::Validate { config } => {
            let cfg = load_config(&config)?;
            let l = tgn_path_loss(cfg.channel.carrier_freq_hz, cfg.channel.distance_m, &cfg.channel);
            let sigma_i2_w: serde_json::Map<String, serde_json::Value> = cfg
                .inr_db_levels
                .iter()
                .map(|inr| {
                    let w = 10f64.powf(inr / 10.0) * cfg.base.sigma_zs2;
                    (format!("{inr}"), serde_json::json!(w))
                })
                .collect();
            let echo = serde_json::json!({
                "effective_budget_w": effective_power_budget(&cfg.base),
                "subcarrier_bandwidth_hz": cfg.base.subcarrier_bandwidth(),
                "sigma_zs2_w": cfg.base.sigma_zs2,
                "sigma_za2_w": cfg.base.sigma_za2,
                "sigma_i2_w_by_inr_db": sigma_i2_w,
                "p_min_req_w": cfg.base.p_min_req,
                "path_loss_linear": l,
                "path_loss_db": -10.0 * l.log10(),
                "sweep_rows": cfg.p_max_sweep_dbm.len() * cfg.inr_db_levels.len() * cfg.algorithms.len(),
                "trials": cfg.trials,
                "output_path": cfg.output_path,
            });
            println!("{}", serde_json::to_string_pretty(&echo)?);
            Ok(0)
        }
        Command::OracleCheck { subcarriers, instances, power_grid, rho_grid } => {
            if !(2..=4).contains(&subcarriers) {
                return Err(Error::Config(format!(
                    "oracle check supports 2..=4 subcarriers, got {subcarriers}"
                )));
            }
            if instances == 0 {
                return Err(Error::Config("oracle check needs at least 1 instance".into()));
            }
            let mut failures = 0usize;
            for index in 0..instances {
                let (params, channel) = check_instance(index, subcarriers)?;
                let oracle_cfg = OracleConfig {
                    power_grid_points: power_grid
                        .unwrap_or_else(|| suggested_power_grid(params.n_subcarriers)),
                    rho_grid_points: rho_grid,
                    max_subcarriers: subcarriers,
                };
                let cmp = compare_with_solver(
                    &channel,
                    &params,
                    &oracle_cfg,
                    &OptimalConfig::default(),
                )?;
                let ok = cmp.feasibility_agrees()
                    && cmp.solver_deficit_rel() <= SOLVER_DEFICIT_TOL
                    && cmp.solver_excess_rel() <= SOLVER_EXCESS_TOL;
                if !ok {
                    failures += 1;
                }
                println!(
                    "instance {index}: n={} target={:.3e} W solver={:.6e} oracle={:.6e} \
                     deficit={:.2e} excess={:.2e} {}",
                    params.n_subcarriers,
                    params.p_min_req,
                    cmp.solver.capacity_bps,
                    cmp.oracle.capacity_bps,
                    cmp.solver_deficit_rel(),
                    cmp.solver_excess_rel(),
                    if ok { "ok" } else { "MISMATCH" }
                );
            }
            if failures > 0 {
                println!("{failures}/{instances} instances disagreed beyond tolerance");
                Ok(1)
            } else {
                println!("all {instances} instances agree within tolerance");
                Ok(0)
            }
        }
    }
}

// ---------------------------------------------------------------------------
