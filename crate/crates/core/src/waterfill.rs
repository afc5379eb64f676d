//! Water-filling power allocation over parallel subchannels, with an
//! optional minimum-harvest side constraint.
//!
//! The unconstrained problem is `max sum_i w*log2(1 + P_i*Gamma_i)` subject
//! to `sum P_i = budget`, `P >= 0`; its solution is the classic water level
//! `P_i = [w/(ln2 * mu) - 1/Gamma_i]+` with the budget multiplier `mu` found
//! by bisection.
//!
//! Adding `sum_i P_i * h_i >= harvest_min` (each `h_i` is the DC power
//! harvested per transmitted watt) introduces a second multiplier
//! `gamma >= 0` that tilts the level per subcarrier:
//!
//! ```text
//! P_i = [ w / (ln2 * (mu - gamma*h_i)) - 1/Gamma_i ]+
//! ```
//!
//! An outer bisection raises `gamma` until the harvest meets the target; the
//! harvested power is provably nondecreasing in `gamma` (the objective is
//! capacity plus `gamma` times a linear term), and that monotonicity is also
//! asserted at runtime. The inner level search works with the offset
//! `nu = mu - gamma*max(h)` so the per-subcarrier denominators
//! `nu + gamma*(max(h) - h_i)` never suffer cancellation. When the
//! highest-harvest subcarrier carries no information (`Gamma_i = 0`), the
//! boundary `mu = gamma*max(h)` is handled by dumping the residual budget
//! into that subcarrier, which is exactly the KKT solution there.
//!
//! Tolerances: the budget is met to 1e-10 relative, the harvest target to
//! 1e-9 relative, both within 200 bisection steps per level.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::marginal_utility;

const LN2: f64 = std::f64::consts::LN_2;

/// Relative tolerance on budget exhaustion of the inner level search.
pub const BUDGET_REL_TOL: f64 = 1e-10;
/// Relative tolerance on the harvest target of the outer multiplier search.
pub const HARVEST_REL_TOL: f64 = 1e-9;
/// Iteration cap of each bisection.
const MAX_BISECT: usize = 200;

/// One harvest-constrained allocation instance over parallel subchannels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WaterfillProblem {
    /// SINR per transmitted watt on each subchannel (`>= 0`).
    pub gammas: Vec<f64>,
    /// Harvested DC watts per transmitted watt on each subchannel (`>= 0`).
    pub harvest_weights: Vec<f64>,
    /// Total transmit power to spend, W.
    pub budget: f64,
    /// Minimum harvested power, W. Zero disables the side constraint.
    pub harvest_min: f64,
    /// Subchannel bandwidth, Hz.
    pub w: f64,
}

impl WaterfillProblem {
    pub fn validate(&self) -> Result<()> {
        if self.gammas.is_empty() {
            return Err(Error::Config("waterfill problem needs at least one subchannel".into()));
        }
        if self.harvest_weights.len() != self.gammas.len() {
            return Err(Error::Config(format!(
                "waterfill problem has {} harvest weights for {} subchannels",
                self.harvest_weights.len(),
                self.gammas.len()
            )));
        }
        if self.gammas.iter().any(|g| !(*g >= 0.0)) {
            return Err(Error::Config("gammas must be >= 0 and finite".into()));
        }
        if self.harvest_weights.iter().any(|h| !(*h >= 0.0)) {
            return Err(Error::Config("harvest weights must be >= 0 and finite".into()));
        }
        if !(self.budget >= 0.0) || !self.budget.is_finite() {
            return Err(Error::Config(format!("budget must be >= 0 W, got {}", self.budget)));
        }
        if !(self.harvest_min >= 0.0) || !self.harvest_min.is_finite() {
            return Err(Error::Config(format!(
                "harvest_min must be >= 0 W, got {}",
                self.harvest_min
            )));
        }
        if !(self.w > 0.0) {
            return Err(Error::Config(format!("subchannel bandwidth must be > 0 Hz, got {}", self.w)));
        }
        Ok(())
    }
}

/// Allocation returned by the kernel, with the multipliers that certify it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WaterfillSolution {
    /// Power per subchannel, W; sums to the budget (relative tol 1e-10).
    pub powers: Vec<f64>,
    /// Budget multiplier `mu` (utility per watt).
    pub budget_multiplier: f64,
    /// Harvest multiplier `gamma >= 0`; zero when the side constraint is slack.
    pub harvest_multiplier: f64,
    /// Normalized stationarity + complementary-slackness residual.
    pub kkt_residual: f64,
    /// Harvested power minus the target, W (>= about -1e-9 relative).
    pub c1_slack: f64,
    /// True when every subchannel had zero SINR slope, so any allocation is
    /// capacity-optimal and powers were chosen for the harvest alone.
    pub degenerate: bool,
}

/// Warm-start hints threaded through repeated solves on nearby problems
/// (e.g. adjacent points of a splitting-ratio grid). Purely an accelerator:
/// brackets seeded from hints are verified and expanded before use.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct LevelHints {
    pub nu: Option<f64>,
    pub gamma: Option<f64>,
}

/// Classic water-filling without the harvest constraint.
pub fn water_fill(gammas: &[f64], w: f64, budget: f64) -> Result<WaterfillSolution> {
    let problem = WaterfillProblem {
        gammas: gammas.to_vec(),
        harvest_weights: vec![0.0; gammas.len()],
        budget,
        harvest_min: 0.0,
        w,
    };
    water_fill_with_harvest(&problem)
}

/// Water-filling with the minimum-harvest side constraint.
///
/// Errors with [`Error::HarvestInfeasible`] when even the whole budget on
/// the best-harvesting subchannel falls short of `harvest_min`.
pub fn water_fill_with_harvest(problem: &WaterfillProblem) -> Result<WaterfillSolution> {
    water_fill_with_harvest_hinted(problem, &mut LevelHints::default())
}

/// As [`water_fill_with_harvest`], reusing and updating warm-start hints.
pub(crate) fn water_fill_with_harvest_hinted(
    problem: &WaterfillProblem,
    hints: &mut LevelHints,
) -> Result<WaterfillSolution> {
    problem.validate()?;
    let b = problem.budget;
    let hmin = problem.harvest_min;
    let n = problem.gammas.len();
    let c1_tol = HARVEST_REL_TOL * hmin.max(1e-12);

    let h_top = problem.harvest_weights.iter().cloned().fold(0.0, f64::max);
    let max_possible = b * h_top;

    // Nothing to allocate: feasible only when no harvest is demanded.
    if b == 0.0 {
        if hmin > 0.0 {
            return Err(Error::HarvestInfeasible { required: hmin, max_possible: 0.0 });
        }
        let mu = problem
            .gammas
            .iter()
            .map(|g| problem.w * g / LN2)
            .fold(0.0, f64::max);
        return Ok(finish(problem, vec![0.0; n], mu, 0.0, false));
    }

    let any_gamma = problem.gammas.iter().any(|g| *g > 0.0);

    // Zero SINR slope everywhere: capacity is 0 whatever we transmit, so the
    // powers only serve the harvest constraint.
    if !any_gamma {
        if hmin == 0.0 {
            return Ok(finish(problem, vec![0.0; n], 0.0, 0.0, true));
        }
        if max_possible < hmin * (1.0 - HARVEST_REL_TOL) {
            return Err(Error::HarvestInfeasible { required: hmin, max_possible });
        }
        let mut powers = vec![0.0; n];
        powers[dump_target(problem)] = b;
        return Ok(finish(problem, powers, 0.0, 0.0, true));
    }

    if hmin > 0.0 {
        if max_possible < hmin * (1.0 - HARVEST_REL_TOL) {
            return Err(Error::HarvestInfeasible { required: hmin, max_possible });
        }
        // Target sits on the boundary of what is reachable: only
        // (near-)vertex allocations on the best-harvesting subchannels are
        // feasible. Fill those optimally and read the multipliers straight
        // from the KKT system.
        if hmin >= max_possible * (1.0 - HARVEST_REL_TOL) {
            return Ok(solve_vertex(problem, h_top));
        }
    }

    // Unconstrained level first; done if the harvest already clears the bar.
    let base = solve_level(problem, 0.0, hints.nu);
    let harvest0 = dot(&base.powers, &problem.harvest_weights);
    if harvest0 >= hmin - c1_tol {
        hints.nu = Some(base.nu);
        hints.gamma = None;
        return Ok(finish(problem, base.powers, base.nu, 0.0, false));
    }

    // Interior case: bisect the harvest multiplier. Bracket below from the
    // unconstrained solve, above by doubling (harvest tends to b*h_top).
    let mut nu_hint = Some(base.nu);
    let eval = |gamma: f64, nu_hint: &mut Option<f64>| {
        let out = solve_level(problem, gamma, *nu_hint);
        *nu_hint = Some(out.nu);
        let harvest = dot(&out.powers, &problem.harvest_weights);
        (out, harvest)
    };

    let mut lo = (0.0, harvest0);
    let mut lo_sol = base;
    let mut hi_gamma = match hints.gamma {
        Some(g) if g > 0.0 && g.is_finite() => g,
        _ => (lo_sol.nu / h_top).max(f64::MIN_POSITIVE),
    };
    // The hint may overshoot the bracket's low side; walk it back down.
    if hints.gamma.is_some() {
        let mut lo_gamma = hi_gamma / 4.0;
        for _ in 0..MAX_BISECT {
            if lo_gamma <= 0.0 || lo_gamma < 1e-290 {
                break;
            }
            let (sol, harvest) = eval(lo_gamma, &mut nu_hint);
            if harvest < hmin {
                lo = (lo_gamma, harvest);
                lo_sol = sol;
                break;
            }
            lo_gamma /= 4.0;
        }
    }
    let mut hi = None;
    for _ in 0..300 {
        let (sol, harvest) = eval(hi_gamma, &mut nu_hint);
        if harvest >= hmin {
            hi = Some((hi_gamma, harvest, sol));
            break;
        }
        lo = (hi_gamma, harvest);
        lo_sol = sol;
        if hi_gamma > 1e290 {
            break;
        }
        hi_gamma *= 2.0;
    }
    let Some(mut hi) = hi else {
        // Unreachable in exact arithmetic (feasibility was established
        // above); fall back to the closest solution rather than panic.
        let mu = lo_sol.nu + lo.0 * h_top;
        return Ok(finish(problem, lo_sol.powers, mu, lo.0, false));
    };

    monotone_guard(lo.1, hi.1, c1_tol)?;

    let mut accepted: Option<(f64, LevelOutcome, f64)> = None;
    for _ in 0..MAX_BISECT {
        if (hi.1 - hmin).abs() <= c1_tol {
            break;
        }
        let mid_gamma = 0.5 * (lo.0 + hi.0);
        if mid_gamma <= lo.0 || mid_gamma >= hi.0 {
            break; // bracket exhausted at f64 resolution
        }
        let (sol, harvest) = eval(mid_gamma, &mut nu_hint);
        if (harvest - hmin).abs() <= c1_tol {
            accepted = Some((mid_gamma, sol, harvest));
            break;
        }
        if harvest < hmin {
            lo = (mid_gamma, harvest);
        } else {
            hi = (mid_gamma, harvest, sol);
        }
        monotone_guard(lo.1, hi.1, c1_tol)?;
    }

    let (gamma, out) = match accepted {
        Some((gamma, sol, _)) => (gamma, sol),
        // Harvest still above target within bracket resolution: the high
        // side is feasible and as close as the search got.
        None => (hi.0, hi.2),
    };
    hints.gamma = Some(gamma);
    hints.nu = Some(out.nu);
    let mu = out.nu + gamma * h_top;
    Ok(finish(problem, out.powers, mu, gamma, false))
}

/// Stationarity and complementary-slackness residual of a candidate
/// solution, normalized by the budget multiplier so 1e-6 means "six digits
/// of optimality". Recomputed from scratch — independent of how the
/// solution was produced — so perturbing an optimum visibly raises it.
pub fn kkt_residual(problem: &WaterfillProblem, solution: &WaterfillSolution) -> f64 {
    let mu = solution.budget_multiplier;
    let gamma = solution.harvest_multiplier;
    let scale = mu.abs().max(1e-300);
    let mut residual: f64 = 0.0;

    for i in 0..problem.gammas.len() {
        let cost = mu - gamma * problem.harvest_weights[i];
        let util = marginal_utility(solution.powers[i], problem.gammas[i], problem.w);
        let violation = if solution.powers[i] > 0.0 {
            (util - cost).abs()
        } else {
            (util - cost).max(0.0)
        };
        residual = residual.max(violation / scale);
    }

    let total: f64 = solution.powers.iter().sum();
    if problem.budget > 0.0 {
        // |mu * budget_slack| / (mu * budget)
        residual = residual.max((total - problem.budget).abs() / problem.budget);
        let harvest = dot(&solution.powers, &problem.harvest_weights);
        let comp_c1 = gamma * (harvest - problem.harvest_min).abs();
        residual = residual.max(comp_c1 / (scale * problem.budget));
    }
    residual
}

// ---------------------------------------------------------------------------
// Internals
// ---------------------------------------------------------------------------

struct LevelOutcome {
    powers: Vec<f64>,
    /// Offset water level `nu = mu - gamma * max(h)`.
    nu: f64,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn monotone_guard(harvest_lo: f64, harvest_hi: f64, tol: f64) -> Result<()> {
    if harvest_lo > harvest_hi + tol + 1e-300 {
        return Err(Error::Numerical(format!(
            "harvested power not monotone in the harvest multiplier: \
             {harvest_lo:.12e} at the lower end vs {harvest_hi:.12e} above"
        )));
    }
    Ok(())
}

/// Subchannel that receives any budget the water level cannot place:
/// best harvest weight, ties broken by SINR slope, then by index.
fn dump_target(problem: &WaterfillProblem) -> usize {
    let mut best = 0usize;
    for i in 1..problem.harvest_weights.len() {
        let better = problem.harvest_weights[i] > problem.harvest_weights[best]
            || (problem.harvest_weights[i] == problem.harvest_weights[best]
                && problem.gammas[i] > problem.gammas[best]);
        if better {
            best = i;
        }
    }
    best
}

/// Budget-exhausting allocation at a fixed harvest multiplier `gamma`.
///
/// Bisects the offset level `nu`; at `nu -> 0` either the sum diverges (the
/// best-harvest subchannel also carries information) or the leftover budget
/// is dumped into the best-harvest subchannel, matching the KKT boundary
/// `mu = gamma * max(h)`.
fn solve_level(problem: &WaterfillProblem, gamma: f64, nu_hint: Option<f64>) -> LevelOutcome {
    let b = problem.budget;
    let h_top = problem.harvest_weights.iter().cloned().fold(0.0, f64::max);

    let sum_at = |nu: f64| -> f64 {
        let mut total = 0.0;
        for i in 0..problem.gammas.len() {
            let g = problem.gammas[i];
            if g > 0.0 {
                let den = nu + gamma * (h_top - problem.harvest_weights[i]);
                let p = problem.w / (LN2 * den) - 1.0 / g;
                if p > 0.0 {
                    total += p;
                }
            }
        }
        total
    };
    let powers_at = |nu: f64| -> Vec<f64> {
        problem
            .gammas
            .iter()
            .enumerate()
            .map(|(i, g)| {
                if *g > 0.0 {
                    let den = nu + gamma * (h_top - problem.harvest_weights[i]);
                    (problem.w / (LN2 * den) - 1.0 / g).max(0.0)
                } else {
                    0.0
                }
            })
            .collect()
    };

    // Level at which every subchannel is priced out.
    let nu_hi_cap = problem
        .gammas
        .iter()
        .enumerate()
        .filter(|(_, g)| **g > 0.0)
        .map(|(i, g)| problem.w * g / LN2 - gamma * (h_top - problem.harvest_weights[i]))
        .fold(f64::NEG_INFINITY, f64::max);

    // Boundary case: the level cannot spend the budget because the
    // best-harvest subchannel carries no information; park the rest there.
    let dump = dump_target(problem);
    if gamma > 0.0 && problem.gammas[dump] == 0.0 {
        let spendable = if nu_hi_cap <= 0.0 { 0.0 } else { sum_at(0.0) };
        if spendable < b {
            let mut powers = powers_at(0.0);
            powers[dump] += b - spendable;
            return LevelOutcome { powers, nu: 0.0 };
        }
    }

    let mut hi = nu_hi_cap.max(f64::MIN_POSITIVE);
    let mut lo = 0.0f64;
    // Verified warm bracket: shrink/grow around the hint until it straddles.
    if let Some(hint) = nu_hint {
        if hint > 0.0 && hint < hi {
            let mut l = hint / 4.0;
            let mut ok_lo = false;
            for _ in 0..80 {
                if l < 1e-290 {
                    break;
                }
                if sum_at(l) >= b {
                    ok_lo = true;
                    break;
                }
                l /= 4.0;
            }
            let mut h = (hint * 4.0).min(hi);
            let mut ok_hi = sum_at(h) <= b;
            while !ok_hi {
                h = (h * 4.0).min(hi);
                ok_hi = sum_at(h) <= b || h >= hi;
            }
            if ok_lo {
                lo = l;
            }
            if ok_hi {
                hi = h;
            }
        }
    }

    let tol = BUDGET_REL_TOL * b;
    let mut nu = 0.5 * (lo + hi);
    for _ in 0..MAX_BISECT {
        nu = 0.5 * (lo + hi);
        let s = sum_at(nu);
        if (s - b).abs() <= tol {
            break;
        }
        if s > b {
            lo = nu;
        } else {
            hi = nu;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    LevelOutcome { powers: powers_at(nu), nu }
}

/// Feasibility boundary: the harvest target needs (essentially) the whole
/// budget on the best-harvesting subchannels. Water-fill within that tied
/// set and pick the smallest harvest multiplier that prices everyone else out.
fn solve_vertex(problem: &WaterfillProblem, h_top: f64) -> WaterfillSolution {
    let n = problem.gammas.len();
    let tied: Vec<usize> =
        (0..n).filter(|i| problem.harvest_weights[*i] == h_top).collect();

    let sub = WaterfillProblem {
        gammas: tied.iter().map(|i| problem.gammas[*i]).collect(),
        harvest_weights: vec![0.0; tied.len()],
        budget: problem.budget,
        harvest_min: 0.0,
        w: problem.w,
    };
    let mut powers = vec![0.0; n];
    let mu_tied = if sub.gammas.iter().any(|g| *g > 0.0) {
        let inner = solve_level(&sub, 0.0, None);
        for (slot, p) in tied.iter().zip(&inner.powers) {
            powers[*slot] = *p;
        }
        inner.nu
    } else {
        // No information flows through the tied set; any split harvests the
        // same, so park the budget on its first subchannel.
        powers[tied[0]] = problem.budget;
        0.0
    };

    // Smallest gamma making every untied subchannel unattractive at level mu.
    let mut gamma: f64 = 0.0;
    for i in 0..n {
        let h = problem.harvest_weights[i];
        if h == h_top {
            continue;
        }
        let want = problem.w * problem.gammas[i] / LN2 - mu_tied;
        if want > 0.0 {
            gamma = gamma.max(want / (h_top - h));
        }
    }
    let mu = mu_tied + gamma * h_top;
    finish(problem, powers, mu, gamma, false)
}

fn finish(
    problem: &WaterfillProblem,
    powers: Vec<f64>,
    mu: f64,
    gamma: f64,
    degenerate: bool,
) -> WaterfillSolution {
    let harvest = dot(&powers, &problem.harvest_weights);
    let mut solution = WaterfillSolution {
        powers,
        budget_multiplier: mu,
        harvest_multiplier: gamma,
        kkt_residual: 0.0,
        c1_slack: harvest - problem.harvest_min,
        degenerate,
    };
    solution.kkt_residual = kkt_residual(problem, &solution);
    solution
}

// ---------------------------------------------------------------------------
