//! Indifferent consumer and market shares.

use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};
use crate::model::{ModelParams, PriceVector, StrategyProfile, Vendor};

/// A consumer's taste point on the line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Consumer {
    pub x: f64,
}

impl Consumer {
    pub fn new(x: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&x) {
            return Err(GameError::domain(
                "x",
                x,
                "consumer location must lie in [0, 1]",
            ));
        }
        Ok(Consumer { x })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketShares {
    pub d1: f64,
    pub d2: f64,
    /// Set when the indifference point fell outside `[0, 1]` and was clamped.
    pub clamped: bool,
}

impl MarketShares {
    pub fn get(&self, vendor: Vendor) -> f64 {
        match vendor {
            Vendor::One => self.d1,
            Vendor::Two => self.d2,
        }
    }
}

/// Location of the consumer who is indifferent between the two products:
///
/// `x = a + (1-a-b)/2 + beta (q1-q2) / (2T(1-a-b)) + (p2-p1) / (2T(1-a-b))`.
///
/// The value is not clamped and may leave `[0, 1]`.
pub fn indifference_point(
    params: &ModelParams,
    profile: &StrategyProfile,
    prices: &PriceVector,
) -> Result<f64> {
    let gap = profile.gap()?;
    let denom = 2.0 * params.t * gap;
    Ok(profile.a
        + gap / 2.0
        + params.beta * (profile.q1 - profile.q2) / denom
        + (prices.p2 - prices.p1) / denom)
}

/// Market shares `D1 = clamp(x, 0, 1)` and `D2 = 1 - D1`.
pub fn market_shares(
    params: &ModelParams,
    profile: &StrategyProfile,
    prices: &PriceVector,
) -> Result<MarketShares> {
    let x = indifference_point(params, profile, prices)?;
    let d1 = x.clamp(0.0, 1.0);
    Ok(MarketShares {
        d1,
        d2: 1.0 - d1,
        clamped: d1 != x,
    })
}
