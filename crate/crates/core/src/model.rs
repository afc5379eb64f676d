//! System model for a point-to-point OFDM link with simultaneous wireless
//! information and power transfer (SWIPT).
//!
//! The receiver splits the signal on every subcarrier by a common power
//! ratio `rho`: a fraction `rho` of the received power feeds the information
//! decoder, the remaining `1 - rho` feeds the energy harvester. For
//! subcarrier `i` with transmit power `P_i`, fading power gain `|H_i|^2`,
//! path loss `l` and shadowing `g`:
//!
//! - SINR slope: `Gamma_i = rho * l * g * |H_i|^2 / (rho * (sigma_za2 +
//!   sigma_i2) + sigma_zs2)`
//! - capacity: `C_i = w * log2(1 + P_i * Gamma_i)` with `w` the subcarrier
//!   bandwidth, summed into the system capacity
//! - harvested power: `(1 - rho) * eta * g * l * sum_i P_i |H_i|^2`
//!
//! Antenna noise `sigma_za2` is split by the receiver along with the signal;
//! signal-processing noise `sigma_zs2` enters after the splitter and is why
//! `rho` trades capacity against harvest. All quantities are SI (W, Hz,
//! bit/s); dB/dBm values are converted at the edges via [`dbm_to_watt`] /
//! [`watt_to_dbm`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack used when checking constraint satisfaction, so that
/// boundary solutions produced by the iterative solvers count as feasible.
pub const FEASIBILITY_REL_SLACK: f64 = 1e-9;

const LN2: f64 = std::f64::consts::LN_2;

// ---------------------------------------------------------------------------
// Unit conversions
// ---------------------------------------------------------------------------

/// Converts a power level in dBm to watts: `W = 10^((dBm - 30) / 10)`.
#[inline]
pub fn dbm_to_watt(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Converts a power in watts to dBm. Zero or negative power has no dBm
/// representation and is a domain error.
#[inline]
pub fn watt_to_dbm(watt: f64) -> Result<f64> {
    if watt <= 0.0 || !watt.is_finite() {
        return Err(Error::Domain(format!(
            "watt_to_dbm requires a positive finite power, got {watt}"
        )));
    }
    Ok(10.0 * watt.log10() + 30.0)
}

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

/// Static link and constraint parameters. All powers in W, frequencies in Hz.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemParams {
    /// Total occupied bandwidth in Hz, shared equally by the subcarriers.
    pub bandwidth_total: f64,
    /// Number of OFDM subcarriers.
    pub n_subcarriers: usize,
    /// Signal-processing noise power per subcarrier (after the splitter), W.
    pub sigma_zs2: f64,
    /// Antenna noise power per subcarrier (split together with the signal), W.
    pub sigma_za2: f64,
    /// Interference power per subcarrier, W; uniform unless overridden.
    pub sigma_i2: f64,
    /// Optional per-subcarrier interference override (length `n_subcarriers`).
    pub sigma_i2_per_subcarrier: Option<Vec<f64>>,
    /// Regulatory transmit power cap, W.
    pub p_max: f64,
    /// Power-grid draw limit of the transmitter, W.
    pub p_pg: f64,
    /// Constant circuit power consumed by the transmitter, W.
    pub p_c: f64,
    /// Power-amplifier inefficiency: grid draw is `p_c + epsilon * sum(P_i)`.
    pub epsilon: f64,
    /// RF-to-DC conversion efficiency of the harvester, in (0, 1].
    pub eta: f64,
    /// Minimum required harvested power, W. Zero disables the constraint.
    pub p_min_req: f64,
    /// Carrier frequency, Hz (used by the channel generator).
    pub carrier_freq: f64,
    /// Transmitter-receiver distance, m (used by the channel generator).
    pub distance: f64,
    /// Rician K-factor, linear (not dB).
    pub rician_k: f64,
}

impl SystemParams {
    /// Bandwidth of a single subcarrier, Hz. Derived, never stored.
    #[inline]
    pub fn subcarrier_bandwidth(&self) -> f64 {
        self.bandwidth_total / self.n_subcarriers as f64
    }

    /// Interference power on subcarrier `i`, honoring the per-subcarrier
    /// override when present.
    #[inline]
    pub fn sigma_i2_at(&self, i: usize) -> f64 {
        match &self.sigma_i2_per_subcarrier {
            Some(v) => v[i],
            None => self.sigma_i2,
        }
    }

    /// Validates every field, returning a distinct diagnostic per failure.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.bandwidth_total > 0.0) {
            return bad(format!("bandwidth_total must be > 0 Hz, got {}", self.bandwidth_total));
        }
        if self.n_subcarriers == 0 {
            return bad("n_subcarriers must be >= 1".into());
        }
        if !(self.sigma_zs2 >= 0.0) {
            return bad(format!("sigma_zs2 must be >= 0 W, got {}", self.sigma_zs2));
        }
        if !(self.sigma_za2 >= 0.0) {
            return bad(format!("sigma_za2 must be >= 0 W, got {}", self.sigma_za2));
        }
        if !(self.sigma_i2 >= 0.0) {
            return bad(format!("sigma_i2 must be >= 0 W, got {}", self.sigma_i2));
        }
        if let Some(v) = &self.sigma_i2_per_subcarrier {
            if v.len() != self.n_subcarriers {
                return bad(format!(
                    "sigma_i2_per_subcarrier has {} entries for {} subcarriers",
                    v.len(),
                    self.n_subcarriers
                ));
            }
            if v.iter().any(|s| !(*s >= 0.0)) {
                return bad("sigma_i2_per_subcarrier entries must be >= 0 W".into());
            }
        }
        if !(self.p_max >= 0.0) {
            return bad(format!("p_max must be >= 0 W, got {}", self.p_max));
        }
        if !(self.p_pg > self.p_c) {
            return bad(format!(
                "grid limit p_pg ({}) must exceed circuit power p_c ({})",
                self.p_pg, self.p_c
            ));
        }
        if !(self.p_c >= 0.0) {
            return bad(format!("p_c must be >= 0 W, got {}", self.p_c));
        }
        if !(self.epsilon >= 1.0) {
            return bad(format!("amplifier inefficiency epsilon must be >= 1, got {}", self.epsilon));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return bad(format!("harvester efficiency eta must be in (0, 1], got {}", self.eta));
        }
        if !(self.p_min_req >= 0.0) {
            return bad(format!("p_min_req must be >= 0 W, got {}", self.p_min_req));
        }
        if !(self.carrier_freq > 0.0) {
            return bad(format!("carrier_freq must be > 0 Hz, got {}", self.carrier_freq));
        }
        if !(self.distance > 0.0) {
            return bad(format!("distance must be > 0 m, got {}", self.distance));
        }
        if !(self.rician_k >= 0.0) {
            return bad(format!("rician_k must be >= 0 (linear), got {}", self.rician_k));
        }
        Ok(())
    }
}

/// One multipath channel draw: per-subcarrier fading power plus the
/// large-scale gains, with the seed kept for exact replay.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelRealization {
    /// RNG seed this realization was drawn from.
    pub seed: u64,
    /// Per-subcarrier fading power `|H_i|^2` (unit mean), dimensionless.
    pub fading_power: Vec<f64>,
    /// Path loss `l` as a linear power gain (< 1), dimensionless.
    pub path_loss: f64,
    /// Shadowing `g` as a linear power gain, dimensionless.
    pub shadowing: f64,
}

impl ChannelRealization {
    /// Checks structural invariants against the expected subcarrier count.
    pub fn validate(&self, n_subcarriers: usize) -> Result<()> {
        if self.fading_power.len() != n_subcarriers {
            return Err(Error::Config(format!(
                "channel has {} fading entries for {} subcarriers",
                self.fading_power.len(),
                n_subcarriers
            )));
        }
        if self.fading_power.iter().any(|x| !(*x > 0.0)) {
            return Err(Error::Config("fading_power entries must be > 0".into()));
        }
        if !(self.path_loss > 0.0) || !(self.shadowing > 0.0) {
            return Err(Error::Config("path_loss and shadowing must be > 0".into()));
        }
        Ok(())
    }
}

/// A candidate operating point: per-subcarrier transmit powers plus the
/// common power-splitting ratio.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AllocationPolicy {
    /// Transmit power per subcarrier, W.
    pub powers: Vec<f64>,
    /// Fraction of received power routed to the information decoder, in [0,1].
    pub rho: f64,
}

impl AllocationPolicy {
    /// All-zero powers with the given splitting ratio.
    pub fn zero(n_subcarriers: usize, rho: f64) -> Self {
        Self { powers: vec![0.0; n_subcarriers], rho }
    }

    /// Total transmit power, W.
    #[inline]
    pub fn total_power(&self) -> f64 {
        self.powers.iter().sum()
    }
}

/// Signed satisfaction margin of one constraint; `slack >= 0` means held.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ConstraintSlack {
    pub satisfied: bool,
    /// Margin in the constraint's own units (W for power constraints).
    pub slack: f64,
}

/// Per-constraint outcome of [`check_feasibility`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstraintReport {
    /// Harvested power at least `p_min_req`.
    pub harvest: ConstraintSlack,
    /// Total transmit power within `p_max`.
    pub transmit_budget: ConstraintSlack,
    /// Grid draw `p_c + epsilon * sum(P_i)` within `p_pg`.
    pub grid_draw: ConstraintSlack,
    /// Splitting ratio inside [0, 1].
    pub rho_range: ConstraintSlack,
    /// Every per-subcarrier power non-negative.
    pub power_signs: ConstraintSlack,
}

impl ConstraintReport {
    /// True when every constraint is satisfied (within the relative slack).
    pub fn feasible(&self) -> bool {
        self.harvest.satisfied
            && self.transmit_budget.satisfied
            && self.grid_draw.satisfied
            && self.rho_range.satisfied
            && self.power_signs.satisfied
    }
}

/// Outcome of one solver run on one channel realization.
///
/// Serializes with stable snake_case keys; `duals` and `residuals` are
/// ordered maps so the JSON output is deterministic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveResult {
    pub policy: AllocationPolicy,
    /// System capacity, bit/s. Zero whenever `feasible` is false.
    pub capacity_bps: f64,
    /// Capacity normalized by the total bandwidth, bit/s/Hz.
    pub spectral_efficiency: f64,
    /// Harvested power at the returned policy, W.
    pub harvested: f64,
    pub feasible: bool,
    /// Solver-specific iteration count (grid points scanned, ascent steps, ...).
    pub iterations: usize,
    /// Named dual multipliers at the returned point.
    pub duals: BTreeMap<String, f64>,
    /// Named optimality / consistency residual magnitudes.
    pub residuals: BTreeMap<String, f64>,
}

impl SolveResult {
    /// Canonical infeasible outcome: zero capacity, zero policy.
    pub fn infeasible(n_subcarriers: usize) -> Self {
        Self {
            policy: AllocationPolicy::zero(n_subcarriers, 0.0),
            capacity_bps: 0.0,
            spectral_efficiency: 0.0,
            harvested: 0.0,
            feasible: false,
            iterations: 0,
            duals: BTreeMap::new(),
            residuals: BTreeMap::new(),
        }
    }
}

// ---------------------------------------------------------------------------
// Link equations
// ---------------------------------------------------------------------------

/// SINR per transmitted watt on subcarrier `i` at splitting ratio `rho`:
/// the received SINR is `P_i * sinr_coefficient(...)`.
///
/// Errors when the denominator is exactly zero, which needs both `rho = 0`
/// and `sigma_zs2 = 0`.
pub fn sinr_coefficient(
    params: &SystemParams,
    channel: &ChannelRealization,
    rho: f64,
    i: usize,
) -> Result<f64> {
    let num = rho * channel.path_loss * channel.shadowing * channel.fading_power[i];
    let den = rho * (params.sigma_za2 + params.sigma_i2_at(i)) + params.sigma_zs2;
    if den == 0.0 {
        return Err(Error::Domain(
            "SINR undefined: rho = 0 with zero signal-processing noise".into(),
        ));
    }
    Ok(num / den)
}

/// SINR coefficients for all subcarriers at a common `rho`.
pub fn gamma_vector(
    params: &SystemParams,
    channel: &ChannelRealization,
    rho: f64,
) -> Result<Vec<f64>> {
    (0..params.n_subcarriers)
        .map(|i| sinr_coefficient(params, channel, rho, i))
        .collect()
}

/// Shannon capacity of one subcarrier, bit/s: `w * log2(1 + p * gamma)`.
#[inline]
pub fn subcarrier_capacity(p: f64, gamma: f64, w: f64) -> f64 {
    w * (1.0 + p * gamma).log2()
}

/// System capacity of a policy, bit/s: sum of the per-subcarrier capacities.
pub fn system_capacity(
    policy: &AllocationPolicy,
    channel: &ChannelRealization,
    params: &SystemParams,
) -> Result<f64> {
    let w = params.subcarrier_bandwidth();
    let mut total = 0.0;
    for i in 0..params.n_subcarriers {
        let gamma = sinr_coefficient(params, channel, policy.rho, i)?;
        total += subcarrier_capacity(policy.powers[i], gamma, w);
    }
    Ok(total)
}

/// Harvest conversion per transmitted watt on each subcarrier:
/// `h_i = |H_i|^2 * g * l * eta * (1 - rho)`.
pub fn harvest_weights(
    params: &SystemParams,
    channel: &ChannelRealization,
    rho: f64,
) -> Vec<f64> {
    let scale = channel.shadowing * channel.path_loss * params.eta * (1.0 - rho);
    channel.fading_power.iter().map(|x| x * scale).collect()
}

/// DC power delivered by the harvester for a policy, W.
pub fn harvested_power(
    policy: &AllocationPolicy,
    channel: &ChannelRealization,
    params: &SystemParams,
) -> f64 {
    let scale = channel.shadowing * channel.path_loss * params.eta * (1.0 - policy.rho);
    let received: f64 = policy
        .powers
        .iter()
        .zip(&channel.fading_power)
        .map(|(p, x)| p * x)
        .sum();
    scale * received
}

/// Largest total transmit power the transmitter can radiate: the smaller of
/// the regulatory cap and what the power grid leaves after circuit power,
/// `min(p_max, (p_pg - p_c) / epsilon)`.
#[inline]
pub fn effective_power_budget(params: &SystemParams) -> f64 {
    params.p_max.min((params.p_pg - params.p_c) / params.epsilon)
}

/// Evaluates every constraint of the allocation problem at a policy, with
/// relative slack [`FEASIBILITY_REL_SLACK`] so boundary points pass.
pub fn check_feasibility(
    policy: &AllocationPolicy,
    channel: &ChannelRealization,
    params: &SystemParams,
) -> ConstraintReport {
    let tol = FEASIBILITY_REL_SLACK;
    let total = policy.total_power();

    let harvested = harvested_power(policy, channel, params);
    let harvest_slack = harvested - params.p_min_req;
    let harvest = ConstraintSlack {
        satisfied: harvested >= params.p_min_req - tol * params.p_min_req.max(1e-12),
        slack: harvest_slack,
    };

    let budget_slack = params.p_max - total;
    let transmit_budget = ConstraintSlack {
        satisfied: total <= params.p_max * (1.0 + tol) + 1e-300,
        slack: budget_slack,
    };

    let draw = params.p_c + params.epsilon * total;
    let grid_slack = params.p_pg - draw;
    let grid_draw = ConstraintSlack {
        satisfied: draw <= params.p_pg * (1.0 + tol),
        slack: grid_slack,
    };

    let rho_range = ConstraintSlack {
        satisfied: (-tol..=1.0 + tol).contains(&policy.rho),
        slack: policy.rho.min(1.0 - policy.rho),
    };

    let min_power = policy.powers.iter().cloned().fold(f64::INFINITY, f64::min);
    let power_signs = ConstraintSlack {
        satisfied: policy.powers.iter().all(|p| *p >= 0.0),
        slack: if min_power.is_finite() { min_power } else { 0.0 },
    };

    ConstraintReport { harvest, transmit_budget, grid_draw, rho_range, power_signs }
}

/// Quick capacity evaluation against a precomputed SINR-coefficient vector.
/// Same formula as [`system_capacity`], used by the hot solver loops.
#[inline]
pub(crate) fn capacity_from_gammas(powers: &[f64], gammas: &[f64], w: f64) -> f64 {
    let mut total = 0.0;
    for (p, g) in powers.iter().zip(gammas) {
        total += (1.0 + p * g).log2();
    }
    w * total
}

/// Marginal capacity per watt at power `p`: `w * gamma / (ln2 * (1 + p*gamma))`.
/// Used by the KKT checks.
#[inline]
pub(crate) fn marginal_utility(p: f64, gamma: f64, w: f64) -> f64 {
    w * gamma / (LN2 * (1.0 + p * gamma))
}

// ---------------------------------------------------------------------------
