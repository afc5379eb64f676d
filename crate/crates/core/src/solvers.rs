//! The three allocation algorithms for the joint power / splitting-ratio
//! problem on one channel realization:
//!
//! * [`solve_optimal`] — exhaustive grid over the splitting ratio, with the
//!   harvest-constrained water-filler solving the power subproblem exactly
//!   at each grid point; globally optimal up to the grid resolution.
//! * [`solve_coordinate_ascent`] — alternates the power subproblem at fixed
//!   splitting ratio with the closed-form ratio update at fixed powers;
//!   the objective never decreases, so a handful of rounds suffice.
//! * [`solve_high_sinr`] — drops the `1+` inside the log, which makes equal
//!   power across subcarriers optimal and the splitting ratio a closed
//!   form from harvest tightness; evaluated capacity is still exact.
//!
//! All three return a [`SolveResult`] whose `duals` and `residuals` let a
//! caller verify optimality claims without rerunning the solver.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    capacity_from_gammas, effective_power_budget, gamma_vector, harvest_weights,
    harvested_power, system_capacity, AllocationPolicy, ChannelRealization, SolveResult,
    SystemParams, FEASIBILITY_REL_SLACK,
};
use crate::waterfill::{
    kkt_residual, water_fill_with_harvest, water_fill_with_harvest_hinted, LevelHints,
    WaterfillProblem, WaterfillSolution,
};

const LN2: f64 = std::f64::consts::LN_2;

/// Tuning of the exhaustive splitting-ratio search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimalConfig {
    /// Grid points over the splitting ratio in `[0, 1]`.
    pub rho_grid_points: usize,
    /// Place points on 0 and 1 themselves (0 is still skipped when the SINR
    /// is undefined there, i.e. with zero signal-processing noise).
    pub include_endpoints: bool,
}

impl Default for OptimalConfig {
    fn default() -> Self {
        Self { rho_grid_points: 1000, include_endpoints: true }
    }
}

impl OptimalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rho_grid_points < 2 {
            return Err(Error::Config(format!(
                "rho grid needs at least 2 points, got {}",
                self.rho_grid_points
            )));
        }
        Ok(())
    }
}

/// Tuning of the coordinate-ascent solver.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoordAscentConfig {
    /// Iteration cap.
    pub n_max: usize,
    /// Absolute stop tolerance on the objective, bit/s. `None` picks
    /// 1e-6 of the total bandwidth — one millionth of a bit/s/Hz.
    pub delta_bps: Option<f64>,
    /// Starting policy; `None` spreads the budget equally and sets the
    /// splitting ratio from harvest tightness at those powers.
    pub init_policy: Option<AllocationPolicy>,
}

impl Default for CoordAscentConfig {
    fn default() -> Self {
        Self { n_max: 5, delta_bps: None, init_policy: None }
    }
}

impl CoordAscentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_max < 1 {
            return Err(Error::Config("coordinate ascent needs n_max >= 1".into()));
        }
        if let Some(d) = self.delta_bps {
            if !(d > 0.0) {
                return Err(Error::Config(format!("delta_bps must be > 0, got {d}")));
            }
        }
        Ok(())
    }

    fn resolved_delta(&self, params: &SystemParams) -> f64 {
        self.delta_bps.unwrap_or(1e-6 * params.bandwidth_total)
    }
}

/// Objective history of one coordinate-ascent run.
#[derive(Debug, Clone)]
pub struct AscentTrace {
    /// Objective after initialization and after each iteration, bit/s.
    pub objective_bps: Vec<f64>,
    /// True when the stop tolerance fired before the iteration cap.
    pub converged: bool,
}

/// Exhaustive search over the splitting ratio; exact power subproblem at
/// each grid point. Ties in capacity resolve toward the smaller ratio,
/// which harvests more.
///
/// `iterations` counts evaluated grid points. `duals` carries the budget
/// and harvest multipliers at the winning point; `residuals` its KKT
/// residual and harvest slack in watts. Returns the canonical infeasible
/// result when no grid point admits a feasible allocation.
pub fn solve_optimal(
    channel: &ChannelRealization,
    params: &SystemParams,
    cfg: &OptimalConfig,
) -> Result<SolveResult> {
    params.validate()?;
    channel.validate(params.n_subcarriers)?;
    cfg.validate()?;

    let budget = effective_power_budget(params);
    let w = params.subcarrier_bandwidth();
    let m = cfg.rho_grid_points;

    let mut hints = LevelHints::default();
    let mut best: Option<(f64, f64, WaterfillSolution)> = None;
    let mut evaluated = 0usize;

    for k in 0..m {
        let rho = if cfg.include_endpoints {
            k as f64 / (m - 1) as f64
        } else {
            (k + 1) as f64 / (m + 1) as f64
        };
        if rho == 0.0 && params.sigma_zs2 == 0.0 {
            continue; // SINR undefined at this single point; capacity -> 0 anyway
        }
        let gammas = gamma_vector(params, channel, rho)?;
        let problem = WaterfillProblem {
            harvest_weights: harvest_weights(params, channel, rho),
            gammas,
            budget,
            harvest_min: params.p_min_req,
            w,
        };
        evaluated += 1;
        match water_fill_with_harvest_hinted(&problem, &mut hints) {
            Ok(sol) => {
                let cap = capacity_from_gammas(&sol.powers, &problem.gammas, w);
                let improves = match &best {
                    None => true,
                    Some((best_cap, _, _)) => cap > *best_cap,
                };
                if improves {
                    best = Some((cap, rho, sol));
                }
            }
            Err(Error::HarvestInfeasible { .. }) => continue,
            Err(e) => return Err(e),
        }
    }

    let Some((capacity, rho, sol)) = best else {
        let mut out = SolveResult::infeasible(params.n_subcarriers);
        out.iterations = evaluated;
        return Ok(out);
    };

    let policy = AllocationPolicy { powers: sol.powers.clone(), rho };
    let harvested = harvested_power(&policy, channel, params);
    let mut duals = BTreeMap::new();
    duals.insert("mu".into(), sol.budget_multiplier);
    duals.insert("gamma".into(), sol.harvest_multiplier);
    let mut residuals = BTreeMap::new();
    residuals.insert("kkt".into(), sol.kkt_residual);
    residuals.insert("c1_slack_w".into(), sol.c1_slack);

    Ok(SolveResult {
        policy,
        capacity_bps: capacity,
        spectral_efficiency: capacity / params.bandwidth_total,
        harvested,
        feasible: true,
        iterations: evaluated,
        duals,
        residuals,
    })
}

/// Best splitting ratio for a fixed power vector.
///
/// Capacity is strictly increasing in the ratio, so the optimum sits where
/// the harvest constraint becomes tight:
/// `rho* = clamp(1 - p_min_req / (eta*g*l*sum P_i|H_i|^2), 0, 1)`.
/// Errors when even routing everything to the harvester cannot meet the
/// target — the caller must change the powers or declare infeasibility.
pub fn rho_update(
    powers: &[f64],
    channel: &ChannelRealization,
    params: &SystemParams,
) -> Result<f64> {
    if powers.len() != params.n_subcarriers {
        return Err(Error::Config(format!(
            "rho_update got {} powers for {} subcarriers",
            powers.len(),
            params.n_subcarriers
        )));
    }
    if params.p_min_req == 0.0 {
        return Ok(1.0);
    }
    // Harvest with everything routed to the harvester (rho = 0).
    let harvestable = {
        let policy = AllocationPolicy { powers: powers.to_vec(), rho: 0.0 };
        harvested_power(&policy, channel, params)
    };
    if harvestable < params.p_min_req * (1.0 - FEASIBILITY_REL_SLACK) {
        return Err(Error::InfeasibleAtFixedPowers(format!(
            "harvest target {:.6e} W exceeds the {:.6e} W available at these powers",
            params.p_min_req, harvestable
        )));
    }
    Ok((1.0 - params.p_min_req / harvestable).clamp(0.0, 1.0))
}

/// Coordinate ascent on (powers, splitting ratio): water-fill at the fixed
/// ratio, retighten the ratio at the fixed powers, repeat until the
/// objective moves less than the tolerance or the iteration cap hits.
///
/// An infeasible starting point yields the canonical infeasible result
/// rather than an error; the solver cannot recover from it.
pub fn solve_coordinate_ascent(
    channel: &ChannelRealization,
    params: &SystemParams,
    cfg: &CoordAscentConfig,
) -> Result<SolveResult> {
    solve_coordinate_ascent_traced(channel, params, cfg).map(|(result, _)| result)
}

/// As [`solve_coordinate_ascent`], also returning the objective history.
pub fn solve_coordinate_ascent_traced(
    channel: &ChannelRealization,
    params: &SystemParams,
    cfg: &CoordAscentConfig,
) -> Result<(SolveResult, AscentTrace)> {
    params.validate()?;
    channel.validate(params.n_subcarriers)?;
    cfg.validate()?;

    let n = params.n_subcarriers;
    let budget = effective_power_budget(params);
    let w = params.subcarrier_bandwidth();
    let delta = cfg.resolved_delta(params);

    let mut policy = match &cfg.init_policy {
        Some(p) => {
            if p.powers.len() != n {
                return Err(Error::Config(format!(
                    "init policy has {} powers for {n} subcarriers",
                    p.powers.len()
                )));
            }
            p.clone()
        }
        None => {
            let powers = vec![budget / n as f64; n];
            match rho_update(&powers, channel, params) {
                Ok(rho) => AllocationPolicy { powers, rho },
                Err(Error::InfeasibleAtFixedPowers(_)) => {
                    let result = SolveResult::infeasible(n);
                    let trace = AscentTrace { objective_bps: vec![], converged: false };
                    return Ok((result, trace));
                }
                Err(e) => return Err(e),
            }
        }
    };

    let mut objective = system_capacity(&policy, channel, params)?;
    let mut trace = vec![objective];
    let mut converged = false;
    let mut iterations = 0usize;
    let mut last_wf: Option<WaterfillSolution> = None;

    for _ in 0..cfg.n_max {
        let gammas = gamma_vector(params, channel, policy.rho)?;
        let problem = WaterfillProblem {
            harvest_weights: harvest_weights(params, channel, policy.rho),
            gammas,
            budget,
            harvest_min: params.p_min_req,
            w,
        };
        let wf = match water_fill_with_harvest(&problem) {
            Ok(sol) => sol,
            Err(Error::HarvestInfeasible { .. }) if iterations == 0 => {
                // Only a caller-supplied starting ratio can land here; the
                // default initialization is feasible whenever it exists.
                let result = SolveResult::infeasible(n);
                let trace = AscentTrace { objective_bps: trace, converged: false };
                return Ok((result, trace));
            }
            Err(e) => return Err(e),
        };
        let rho = rho_update(&wf.powers, channel, params)?;
        let candidate = AllocationPolicy { powers: wf.powers.clone(), rho };
        let updated = system_capacity(&candidate, channel, params)?;
        iterations += 1;

        if updated < objective - delta {
            // Both subproblems are solved to optimality, so a real decrease
            // is a defect, not a property of the instance.
            return Err(Error::Numerical(format!(
                "coordinate ascent objective fell from {objective:.6e} to {updated:.6e} bit/s"
            )));
        }
        let gain = updated - objective;
        if updated > objective {
            policy = candidate;
            objective = updated;
            last_wf = Some(wf);
        }
        // else: keep the incumbent; the step is within float wobble of flat
        // and |gain| < delta necessarily holds below.
        trace.push(objective);
        if gain.abs() < delta {
            converged = true;
            break;
        }
    }

    let harvested = harvested_power(&policy, channel, params);
    let mut duals = BTreeMap::new();
    let mut residuals = BTreeMap::new();
    if let Some(wf) = &last_wf {
        duals.insert("mu".into(), wf.budget_multiplier);
        duals.insert("gamma".into(), wf.harvest_multiplier);
        // Residual of the final *power* subproblem, re-evaluated at the
        // returned ratio so it reflects the reported policy.
        let problem = WaterfillProblem {
            gammas: gamma_vector(params, channel, policy.rho)?,
            harvest_weights: harvest_weights(params, channel, policy.rho),
            budget,
            harvest_min: params.p_min_req,
            w,
        };
        residuals.insert("kkt_power_subproblem".into(), kkt_residual(&problem, wf));
    }
    residuals.insert("c1_slack_w".into(), harvested - params.p_min_req);

    let result = SolveResult {
        capacity_bps: objective,
        spectral_efficiency: objective / params.bandwidth_total,
        harvested,
        feasible: true,
        iterations,
        duals,
        residuals,
        policy,
    };
    Ok((result, AscentTrace { objective_bps: trace, converged }))
}

/// High-SINR capacity of one subcarrier, bit/s: the `1+` inside the log is
/// dropped, so the value can go negative when the SINR is below one.
///
/// `rho_i` is the decoder share of the received power. Errors on `p = 0`
/// or `rho_i = 0`, where the approximation takes log of zero.
pub fn approx_capacity(
    p: f64,
    rho_i: f64,
    channel: &ChannelRealization,
    params: &SystemParams,
    i: usize,
) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::Domain(format!(
            "high-SINR approximation needs positive power, got {p}"
        )));
    }
    if !(rho_i > 0.0) {
        return Err(Error::Domain(format!(
            "high-SINR approximation needs a positive decoder share, got {rho_i}"
        )));
    }
    let gamma = crate::model::sinr_coefficient(params, channel, rho_i, i)?;
    Ok(params.subcarrier_bandwidth() * (p * gamma).log2())
}

/// Closed-form solver in the high-SINR regime: equal power on every
/// subcarrier, splitting ratio from harvest tightness. The reported
/// capacity is exact (not the approximation the derivation used).
///
/// `duals` carries `mu_e`, the budget multiplier of the approximate
/// problem. `residuals` verifies the closed forms at the returned point:
/// `power_stationarity` (equal marginal utility of the approximate
/// objective), `rho_closed_form` (the ratio solves its own stationarity
/// quadratic), and `c1_tightness` (harvest meets the target exactly).
pub fn solve_high_sinr(
    channel: &ChannelRealization,
    params: &SystemParams,
) -> Result<SolveResult> {
    params.validate()?;
    channel.validate(params.n_subcarriers)?;

    let n = params.n_subcarriers;
    let budget = effective_power_budget(params);
    let w = params.subcarrier_bandwidth();
    let per = budget / n as f64;
    let powers = vec![per; n];

    // Harvest with everything routed to the harvester.
    let harvestable =
        harvested_power(&AllocationPolicy { powers: powers.clone(), rho: 0.0 }, channel, params);
    let rho_e = if params.p_min_req == 0.0 { 0.0 } else { params.p_min_req / harvestable };
    if rho_e > 1.0 {
        return Ok(SolveResult::infeasible(n));
    }
    let rho_i = (1.0 - rho_e).clamp(0.0, 1.0);

    let policy = AllocationPolicy { powers, rho: rho_i };
    let capacity = if rho_i == 0.0 && params.sigma_zs2 == 0.0 {
        0.0 // SINR is undefined at this boundary point; no decoder share, no rate
    } else {
        system_capacity(&policy, channel, params)?
    };
    let harvested = harvested_power(&policy, channel, params);

    let mu_e = w / (LN2 * per);
    let mut duals = BTreeMap::new();
    duals.insert("mu_e".into(), mu_e);

    let mut residuals = BTreeMap::new();
    let stationarity = policy
        .powers
        .iter()
        .map(|p| (w / (LN2 * p) - mu_e).abs() / mu_e)
        .fold(0.0, f64::max);
    residuals.insert("power_stationarity".into(), stationarity);
    residuals.insert("rho_closed_form".into(), rho_residual(params, rho_i));
    let c1 = (harvested - params.p_min_req).abs() / params.p_min_req.max(1e-12);
    residuals.insert("c1_tightness".into(), c1);

    Ok(SolveResult {
        capacity_bps: capacity,
        spectral_efficiency: capacity / params.bandwidth_total,
        harvested,
        feasible: true,
        iterations: 0,
        duals,
        residuals,
        policy,
    })
}

/// Round-trip check of the decoder share against its own stationarity
/// condition. The approximate objective's derivative in the share is
/// `delta = n*w*s / (ln2 * rho*(rho*a + s))` with `s` the signal-processing
/// noise and `a` the antenna-plus-interference noise; solving that quadratic
/// for the share and comparing with the returned value is exact up to
/// rounding whenever the closed forms are implemented consistently.
fn rho_residual(params: &SystemParams, rho_i: f64) -> f64 {
    if rho_i <= 0.0 {
        return 0.0; // boundary: no stationarity condition to check
    }
    let s = params.sigma_zs2;
    let a = params.sigma_za2 + params.sigma_i2;
    let nw = params.bandwidth_total; // n * w
    if s == 0.0 {
        return 0.0; // derivative is identically zero; any share is stationary
    }
    let delta = nw * s / (LN2 * rho_i * (rho_i * a + s));
    let recovered = if a == 0.0 {
        nw / (LN2 * delta)
    } else {
        ((s * s + 4.0 * a * nw * s / (delta * LN2)).sqrt() - s) / (2.0 * a)
    };
    (recovered - rho_i).abs() / rho_i
}

// ---------------------------------------------------------------------------
