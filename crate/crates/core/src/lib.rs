// `!(x > 0.0)`-style comparisons are deliberate throughout: unlike `x <= 0.0`
// they also reject NaN, which is exactly what the input validators need.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Power allocation for an OFDM point-to-point link whose receiver splits
//! the incoming signal between an information decoder and an energy
//! harvester.
//!
//! The transmitter spreads a bounded power budget over parallel subcarriers;
//! the receiver routes a fraction `rho` of the received power to the decoder
//! and the rest to the harvester, which must collect at least a required
//! minimum. Capacity is the objective; the coupling between the power vector
//! and the common splitting ratio is what makes the problem interesting.
//!
//! Module map:
//!
//! * [`model`] — link equations, parameter/result types, feasibility checks;
//! * [`channelgen`] — seeded Rician fading over a two-slope indoor path loss;
//! * [`waterfill`] — harvest-constrained water-filling, the shared kernel;
//! * [`solvers`] — the optimal grid solver and the two fast algorithms;
//! * [`oracle`] — brute-force reference for small instances (tests, CLI);
//! * [`harness`] — config files, Monte Carlo sweeps, CSV output, the CLI.

pub mod channelgen;
pub mod error;
pub mod harness;
pub mod model;
pub mod oracle;
pub mod solvers;
pub mod waterfill;

pub use error::{Error, Result};
pub use model::{
    effective_power_budget, AllocationPolicy, ChannelRealization, SolveResult, SystemParams,
};
pub use solvers::{
    solve_coordinate_ascent, solve_high_sinr, solve_optimal, CoordAscentConfig, OptimalConfig,
};
pub use waterfill::{
    water_fill, water_fill_with_harvest, WaterfillProblem, WaterfillSolution,
};
