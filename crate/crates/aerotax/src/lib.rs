//! Demand-side carbon-tax scenarios for Brazilian domestic aviation.
//!
//! The toolkit chains four stages, usable separately or through the
//! [`engine`] pipeline and the `aerotax` binary:
//!
//! 1. [`market`] — route-month panel data: loading, validation, and a
//!    seeded synthetic generator with a documented data-generating process.
//! 2. [`econ`] — a log-log demand model with route fixed effects and
//!    robust standard errors; the fare coefficient and its interactions
//!    give each route's price elasticity.
//! 3. [`emissions`] — per-passenger CO₂ by the standard great-circle /
//!    distance-correction / fuel-interpolation methodology.
//! 4. [`tax`] — a €/tCO₂ tax converted to a per-ticket cost, passed
//!    through to fares (Cournot, full, or fixed), and projected onto
//!    demand along the constant-elasticity curve.
//!
//! Everything downstream of input files is deterministic: fixed seeds,
//! stable orderings, and byte-reproducible outputs.

// Validation deliberately writes `!(x > 0.0)` instead of `x <= 0.0`: the
// negated form also rejects NaN, which `str::parse::<f64>` accepts.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod econ;
pub mod emissions;
pub mod engine;
pub mod market;
pub mod tax;
