//! Closed-form stage-2 price equilibria.
//!
//! Given first-stage locations and qualities, each vendor's stage-2 utility is
//! concave in its own price, so the price game has a unique equilibrium where
//! both reaction functions cross.

use serde::{Deserialize, Serialize};

use crate::demand::market_shares;
use crate::error::Result;
use crate::model::{
    vendor_utility, MarketOutcome, ModelParams, PriceVector, StrategyProfile, Vendor,
};
use crate::regulation::{fine_amount, FinePolicy};

/// Equilibrium prices plus a flag per vendor for a negative analytic price.
/// Negative prices are reported as-is, never clamped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceEquilibrium {
    pub prices: PriceVector,
    pub negative: [bool; 2],
}

impl PriceEquilibrium {
    fn new(prices: PriceVector) -> Self {
        PriceEquilibrium {
            prices,
            negative: [prices.p1 < 0.0, prices.p2 < 0.0],
        }
    }

    pub fn has_negative_price(&self) -> bool {
        self.negative[0] || self.negative[1]
    }
}

/// Price equilibrium without a fine:
///
/// `p1* = beta/3 (q1 - q2) + T (1-a-b) (1 + (a-b)/3)` and symmetrically for `p2*`.
pub fn price_equilibrium(
    params: &ModelParams,
    profile: &StrategyProfile,
) -> Result<PriceEquilibrium> {
    let gap = profile.gap()?;
    let quality_term = params.beta / 3.0 * (profile.q1 - profile.q2);
    let p1 = quality_term + params.t * gap * (1.0 + (profile.a - profile.b) / 3.0);
    let p2 = -quality_term + params.t * gap * (1.0 + (profile.b - profile.a) / 3.0);
    Ok(PriceEquilibrium::new(PriceVector { p1, p2 }))
}

/// Price equilibrium for naive consumers: `p1* = T (1-a-b)(1 + (a-b)/3)`.
/// Independent of qualities; equals [`price_equilibrium`] at `beta = 0`.
pub fn naive_price_equilibrium(
    params: &ModelParams,
    profile: &StrategyProfile,
) -> Result<PriceEquilibrium> {
    let gap = profile.gap()?;
    Ok(PriceEquilibrium::new(PriceVector {
        p1: params.t * gap * (1.0 + (profile.a - profile.b) / 3.0),
        p2: params.t * gap * (1.0 + (profile.b - profile.a) / 3.0),
    }))
}

/// Price equilibrium with explicit per-unit-share fines `(f1, f2)`: the
/// fine-free prices plus `2 f_i / 3 + f_j / 3`.
pub fn price_equilibrium_with_fines(
    params: &ModelParams,
    profile: &StrategyProfile,
    fines: (f64, f64),
) -> Result<PriceEquilibrium> {
    let base = price_equilibrium(params, profile)?.prices;
    let (f1, f2) = fines;
    Ok(PriceEquilibrium::new(PriceVector {
        p1: base.p1 + 2.0 * f1 / 3.0 + f2 / 3.0,
        p2: base.p2 + 2.0 * f2 / 3.0 + f1 / 3.0,
    }))
}

/// Price equilibrium under a fine policy; fines follow from the qualities.
pub fn price_equilibrium_with_fine(
    params: &ModelParams,
    policy: &FinePolicy,
    profile: &StrategyProfile,
) -> Result<PriceEquilibrium> {
    price_equilibrium_with_fines(params, profile, fines_for(policy, profile))
}

/// Fines owed by both vendors at a profile.
pub fn fines_for(policy: &FinePolicy, profile: &StrategyProfile) -> (f64, f64) {
    (
        fine_amount(policy, profile.q1),
        fine_amount(policy, profile.q2),
    )
}

/// Stage-2 reaction function: the own price maximizing stage-2 utility given
/// the rival price,
///
/// `p1 = p2/2 + T/2 (1-a-b)(1+a-b) + beta/2 (q1-q2) + f1/2`.
pub fn price_reaction(
    params: &ModelParams,
    profile: &StrategyProfile,
    vendor: Vendor,
    rival_price: f64,
    own_fine: f64,
) -> Result<f64> {
    let gap = profile.gap()?;
    let (own_offset, rival_offset) = match vendor {
        Vendor::One => (profile.a, profile.b),
        Vendor::Two => (profile.b, profile.a),
    };
    let quality_gap = profile.quality(vendor) - profile.quality(vendor.other());
    Ok(rival_price / 2.0
        + params.t / 2.0 * gap * (1.0 + own_offset - rival_offset)
        + params.beta / 2.0 * quality_gap
        + own_fine / 2.0)
}

/// Own-price derivative of stage-2 utility, `D_i + (p_i - f_i) dD_i/dp_i`,
/// using the unclamped linear demand.
pub fn price_first_order_condition(
    params: &ModelParams,
    profile: &StrategyProfile,
    prices: &PriceVector,
    fines: (f64, f64),
    vendor: Vendor,
) -> Result<f64> {
    let gap = profile.gap()?;
    let x = crate::demand::indifference_point(params, profile, prices)?;
    let slope = -1.0 / (2.0 * params.t * gap);
    Ok(match vendor {
        Vendor::One => x + (prices.p1 - fines.0) * slope,
        Vendor::Two => (1.0 - x) + (prices.p2 - fines.1) * slope,
    })
}

/// Shares, fines and utilities at arbitrary prices. The boolean reports
/// whether demand had to be clamped.
pub fn market_outcome(
    params: &ModelParams,
    profile: &StrategyProfile,
    prices: &PriceVector,
    fines: (f64, f64),
) -> Result<(MarketOutcome, bool)> {
    let shares = market_shares(params, profile, prices)?;
    let (pi1, pi2) = vendor_utility(params, profile, prices, (shares.d1, shares.d2), fines);
    Ok((
        MarketOutcome {
            d1: shares.d1,
            d2: shares.d2,
            f1: fines.0,
            f2: fines.1,
            pi1,
            pi2,
        },
        shares.clamped,
    ))
}

/// Stage-2 utility of one vendor at arbitrary prices.
pub fn stage_two_utility(
    params: &ModelParams,
    profile: &StrategyProfile,
    prices: &PriceVector,
    fines: (f64, f64),
    vendor: Vendor,
) -> Result<f64> {
    Ok(market_outcome(params, profile, prices, fines)?
        .0
        .utility(vendor))
}
