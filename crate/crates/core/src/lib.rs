//! Two-vendor customization game on a Hotelling line.
//!
//! Two vendors customize a shared open-source base platform located at `Z_A`
//! on the unit segment. Each vendor picks a location (how far it moves away
//! from the base) and a security-patch quality in a first stage, then both set
//! prices in a second stage. Consumers are spread uniformly on `[0, 1]` and
//! buy from whichever vendor gives them the highest utility.
//!
//! The crate solves the game by backward induction:
//!
//! * [`pricing`] has the closed-form stage-2 price equilibria, with and
//!   without a regulatory fine.
//! * [`best_response`] has the stage-1 best responses in quality and
//!   location, including the piecewise closed forms for naive consumers.
//! * [`equilibrium`] runs damped best-response iteration from a lattice of
//!   starting profiles and certifies the result against a brute-force grid.
//! * [`regulation`] holds the fine instrument and its compliance conditions.
//! * [`calibration`] recovers model constants from observed device data.
//! * [`oracle`] has independent brute-force and Monte-Carlo checks.
//! * [`experiments`] drives parameter sweeps, scenario files and tabular
//!   output for the `vendor-game` binary.

pub mod best_response;
pub mod calibration;
pub mod demand;
pub mod equilibrium;
pub mod error;
pub mod experiments;
pub mod model;
pub mod oracle;
pub mod pricing;
pub mod regulation;

pub use error::{GameError, Result};
pub use model::{MarketOutcome, ModelParams, PriceVector, StrategyProfile, Vendor, EPS_LOC};
pub use regulation::FinePolicy;
