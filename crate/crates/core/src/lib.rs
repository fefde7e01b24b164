//! Adequacy assessment of cyber-physical multi-microgrid (CPMMG) distribution
//! systems using sequential Monte Carlo simulation.
//!
//! The crate models a radial multi-microgrid feeder together with its control
//! and communication infrastructure (DMS, MGCCs, device controllers, cyber
//! links), samples two-state repairable component histories, maps cyber
//! failures to element availabilities, partitions the network into operation
//! zones (normal / joint / island / shutdown), dispatches each zone with
//! linear-programming or rule-based strategies, and accumulates the adequacy
//! indices EENS (by microgrid, load segment and operation mode), IbGC and
//! SbER.
//!
//! Numeric kernels (the simplex solver, the proportional-shares congestion
//! rule, the IbGC/SbER greedy and running statistics) are generic over the
//! scalar type via [`scalar::Scalar`]; the simulator itself runs on [`Real`].

pub mod adequacy;
pub mod casemodel;
pub mod cybernet;
pub mod dispatch;
pub mod engine;
pub mod sampler;
pub mod scalar;
pub mod simplex;
pub mod zoning;

/// Scalar type used by the simulator.
pub type Real = f64;

/// Hours per sample year.
pub const HOURS_PER_YEAR: u64 = 8760;




