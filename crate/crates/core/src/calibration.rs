//! Recovering model constants from one observed market.
//!
//! Raw device data map to locations and qualities; the observed profile and
//! prices are then assumed to be an equilibrium, which pins down `T` and
//! `beta` through the stage-2 prices and the four cost coefficients through
//! the stage-1 stationarity conditions.

use serde::{Deserialize, Serialize};

use crate::best_response::{location_utility_derivative, quality_utility_derivative};
use crate::error::{GameError, Result};
use crate::model::{ModelParams, StrategyProfile, Vendor};
use crate::pricing::price_equilibrium;

/// Raw provenance and vulnerability counts for one device.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceObservation {
    pub vendor_loc_added: u64,
    pub thirdparty_loc: u64,
    pub total_loc: u64,
    pub customization_vulns: u64,
    pub max_vulns_in_cohort: u64,
    /// Price group on a 1 to 10 scale, used directly as the money unit.
    pub price_group: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// Vendor 1, measured as `a`.
    Left,
    /// Vendor 2, measured as `b`.
    Right,
}

/// Share of the device's code that did not come from the base platform:
/// `(vendor + third-party LoC) / total LoC`.
pub fn customization_share(obs: &DeviceObservation) -> Result<f64> {
    if obs.total_loc == 0 {
        return Err(GameError::domain("total_loc", 0.0, "must be positive"));
    }
    let added = obs.vendor_loc_added + obs.thirdparty_loc;
    if added > obs.total_loc {
        return Err(GameError::domain(
            "total_loc",
            obs.total_loc as f64,
            "must be at least vendor plus third-party lines of code",
        ));
    }
    Ok(added as f64 / obs.total_loc as f64)
}

/// Offset from a customization share: `a = Z_A - pct/2` on the left,
/// `b = 1 - Z_A - pct/2` on the right.
pub fn location_from_share(share: f64, z_a: f64, side: Side) -> Result<f64> {
    let room = match side {
        Side::Left => z_a,
        Side::Right => 1.0 - z_a,
    };
    let offset = room - share / 2.0;
    if offset < 0.0 {
        return Err(GameError::domain(
            "customization share",
            share,
            "customization exceeds the representable range",
        ));
    }
    Ok(offset)
}

pub fn quantify_location(obs: &DeviceObservation, z_a: f64, side: Side) -> Result<f64> {
    location_from_share(customization_share(obs)?, z_a, side)
}

/// `q = 1 - customization_vulns / max_vulns_in_cohort`.
pub fn quantify_quality(obs: &DeviceObservation) -> Result<f64> {
    if obs.max_vulns_in_cohort == 0 {
        return Err(GameError::domain(
            "max_vulns_in_cohort",
            0.0,
            "must be positive",
        ));
    }
    if obs.customization_vulns > obs.max_vulns_in_cohort {
        return Err(GameError::domain(
            "customization_vulns",
            obs.customization_vulns as f64,
            "cannot exceed the cohort maximum",
        ));
    }
    // Dividing the complement avoids the rounding of `1 - 33/40`.
    Ok((obs.max_vulns_in_cohort - obs.customization_vulns) as f64 / obs.max_vulns_in_cohort as f64)
}

/// An observed market assumed to be in equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservedMarket {
    pub a: f64,
    pub b: f64,
    pub q1: f64,
    pub q2: f64,
    pub p1: f64,
    pub p2: f64,
}

impl ObservedMarket {
    pub fn from_devices(
        left: &DeviceObservation,
        right: &DeviceObservation,
        z_a: f64,
    ) -> Result<Self> {
        Ok(ObservedMarket {
            a: quantify_location(left, z_a, Side::Left)?,
            b: quantify_location(right, z_a, Side::Right)?,
            q1: quantify_quality(left)?,
            q2: quantify_quality(right)?,
            p1: left.price_group,
            p2: right.price_group,
        })
    }

    pub fn profile(&self) -> StrategyProfile {
        StrategyProfile {
            a: self.a,
            b: self.b,
            q1: self.q1,
            q2: self.q2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibratedConstants {
    #[serde(rename = "T")]
    pub t: f64,
    pub beta: f64,
    #[serde(rename = "S1")]
    pub s1: f64,
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "S2")]
    pub s2: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
}

impl CalibratedConstants {
    pub fn params(&self, z_a: f64, q_max: f64) -> ModelParams {
        ModelParams {
            z_a,
            t: self.t,
            beta: self.beta,
            c1: self.c1,
            c2: self.c2,
            s1: self.s1,
            s2: self.s2,
            q_max,
        }
    }
}

/// Inverts the stage-2 equilibrium prices. Their sum gives
/// `T = (p1 + p2) / (2 (1-a-b))`; their difference
/// `p1 - p2 = 2 beta (q1-q2) / 3 + 2 T (1-a-b)(a-b) / 3` then gives `beta`.
pub fn calibrate_preferences(obs: &ObservedMarket) -> Result<(f64, f64)> {
    let g = obs.profile().gap()?;
    let t = (obs.p1 + obs.p2) / (2.0 * g);
    if t.is_nan() || t <= 0.0 {
        return Err(GameError::InconsistentObservation(format!(
            "prices {} and {} imply T = {t}",
            obs.p1, obs.p2
        )));
    }
    let dq = obs.q1 - obs.q2;
    if dq == 0.0 {
        return Err(GameError::Unidentifiable {
            param: "beta",
            reason: "equal qualities leave the price difference without a quality term",
        });
    }
    let beta = (1.5 * (obs.p1 - obs.p2) - t * g * (obs.a - obs.b)) / dq;
    if beta < 0.0 {
        return Err(GameError::InconsistentObservation(format!(
            "price difference implies negative security importance {beta}"
        )));
    }
    Ok((t, beta))
}

/// Left vendor's `(S, C)` from its two stationarity conditions. Both
/// derivatives are affine in the unknown, so each is solved from its value at
/// a zero coefficient and its known slope.
fn left_costs(
    params: &ModelParams,
    profile: &StrategyProfile,
    names: [&'static str; 2],
) -> Result<(f64, f64)> {
    let d = profile.a - params.z_a;
    if d == 0.0 {
        return Err(GameError::Unidentifiable {
            param: names[0],
            reason: "a vendor at the base platform pays no customization cost",
        });
    }
    if profile.q1 == 0.0 {
        return Err(GameError::Unidentifiable {
            param: names[0],
            reason: "zero quality carries no security cost",
        });
    }
    let free = ModelParams {
        c1: 0.0,
        s1: 0.0,
        ..*params
    };
    // dpi/dq = dpi/dq|_{S=0} - 2 S q d^2
    let s = quality_utility_derivative(&free, Vendor::One, profile)? / (2.0 * profile.q1 * d * d);
    // dpi/da = dpi/da|_{C=0,S=0} - 2 (C + S q^2) d
    let c = location_utility_derivative(&free, Vendor::One, profile)? / (2.0 * d)
        - s * profile.q1 * profile.q1;
    Ok((s, c))
}

/// Cost coefficients `(S1, C1, S2, C2)` that make the observed profile
/// stationary for both vendors at the given `T` and `beta`.
pub fn calibrate_costs(
    obs: &ObservedMarket,
    t: f64,
    beta: f64,
    z_a: f64,
) -> Result<(f64, f64, f64, f64)> {
    let params = ModelParams {
        z_a,
        t,
        beta,
        ..Default::default()
    };
    let profile = obs.profile();
    let (s1, c1) = left_costs(&params, &profile, ["S1", "C1"])?;
    let (s2, c2) = left_costs(&params.mirrored(), &profile.mirrored(), ["S2", "C2"])?;
    Ok((s1, c1, s2, c2))
}

/// Full calibration: preferences first, then costs.
pub fn calibrate(obs: &ObservedMarket, z_a: f64) -> Result<CalibratedConstants> {
    let (t, beta) = calibrate_preferences(obs)?;
    let (s1, c1, s2, c2) = calibrate_costs(obs, t, beta, z_a)?;
    Ok(CalibratedConstants {
        t,
        beta,
        s1,
        c1,
        s2,
        c2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationarityResiduals {
    pub quality1: f64,
    pub location1: f64,
    pub quality2: f64,
    pub location2: f64,
    /// Calibrated equilibrium prices minus observed prices.
    pub price1: f64,
    pub price2: f64,
}

impl StationarityResiduals {
    pub fn max_abs(&self) -> f64 {
        [
            self.quality1,
            self.location1,
            self.quality2,
            self.location2,
            self.price1,
            self.price2,
        ]
        .iter()
        .fold(0.0, |m, r| m.max(r.abs()))
    }
}

/// How far the observation is from being an equilibrium under `params`.
pub fn stationarity_residuals(
    params: &ModelParams,
    obs: &ObservedMarket,
) -> Result<StationarityResiduals> {
    let profile = obs.profile();
    let prices = price_equilibrium(params, &profile)?.prices;
    Ok(StationarityResiduals {
        quality1: quality_utility_derivative(params, Vendor::One, &profile)?,
        location1: location_utility_derivative(params, Vendor::One, &profile)?,
        quality2: quality_utility_derivative(params, Vendor::Two, &profile)?,
        location2: location_utility_derivative(params, Vendor::Two, &profile)?,
        price1: prices.p1 - obs.p1,
        price2: prices.p2 - obs.p2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn observed() -> ObservedMarket {
        ObservedMarket {
            a: 0.1203,
            b: 0.1830,
            q1: 0.75,
            q2: 0.175,
            p1: 4.0,
            p2: 4.0,
        }
    }

    fn device(added: u64, third: u64, total: u64, vulns: u64) -> DeviceObservation {
        DeviceObservation {
            vendor_loc_added: added,
            thirdparty_loc: third,
            total_loc: total,
            customization_vulns: vulns,
            max_vulns_in_cohort: 40,
            price_group: 4.0,
        }
    }

    #[test]
    fn preferences_from_the_observed_market() {
        let (t, beta) = calibrate_preferences(&observed()).unwrap();
        assert!((t - 5.7414).abs() < 1e-3, "{t}");
        assert!((beta - 0.4362).abs() < 1e-3, "{beta}");
    }

    #[test]
    fn costs_from_the_observed_market() {
        let c = calibrate(&observed(), 0.5).unwrap();
        assert!((c.s1 - 0.6723).abs() < 2e-3, "{c:?}");
        assert!((c.c1 - 1.4882).abs() < 2e-3, "{c:?}");
        assert!((c.s2 - 4.1338).abs() < 2e-3, "{c:?}");
        assert!((c.c2 - 2.4875).abs() < 2e-3, "{c:?}");
    }

    #[test]
    fn calibrated_market_is_stationary() {
        let obs = observed();
        let params = calibrate(&obs, 0.5).unwrap().params(0.5, 1.0);
        let r = stationarity_residuals(&params, &obs).unwrap();
        assert!(r.max_abs() < 1e-9, "{r:?}");
    }

    #[test]
    fn symmetric_locations_mean_zero_beta() {
        let obs = ObservedMarket {
            a: 0.2,
            b: 0.2,
            q1: 0.9,
            q2: 0.1,
            p1: 3.0,
            p2: 3.0,
        };
        let (t, beta) = calibrate_preferences(&obs).unwrap();
        assert_eq!(beta, 0.0);
        assert!((t - 3.0 / 0.6).abs() < 1e-12);
    }

    #[test]
    fn equal_qualities_are_unidentifiable() {
        let obs = ObservedMarket {
            q2: 0.75,
            p2: 3.0,
            ..observed()
        };
        assert!(matches!(
            calibrate_preferences(&obs),
            Err(GameError::Unidentifiable { param: "beta", .. })
        ));
    }

    #[test]
    fn negative_prices_are_inconsistent() {
        let obs = ObservedMarket {
            p1: -4.0,
            ..observed()
        };
        assert!(matches!(
            calibrate_preferences(&obs),
            Err(GameError::InconsistentObservation(_))
        ));
    }

    #[test]
    fn base_platform_location_is_unidentifiable() {
        let obs = ObservedMarket {
            a: 0.5,
            ..observed()
        };
        assert!(matches!(
            calibrate_costs(&obs, 5.0, 0.4, 0.5),
            Err(GameError::Unidentifiable { param: "S1", .. })
        ));
        let obs = ObservedMarket {
            q2: 0.0,
            ..observed()
        };
        assert!(matches!(
            calibrate_costs(&obs, 5.0, 0.4, 0.5),
            Err(GameError::Unidentifiable { param: "S2", .. })
        ));
    }

    #[test]
    fn stated_shares_map_to_locations() {
        assert!((location_from_share(0.7595, 0.5, Side::Left).unwrap() - 0.1203).abs() < 1e-4);
        assert!((location_from_share(0.6341, 0.5, Side::Right).unwrap() - 0.1830).abs() < 1e-4);
        assert!(location_from_share(1.2, 0.5, Side::Left).is_err());
    }

    #[test]
    fn location_round_trip() {
        for a in [0.0, 0.1203, 0.37, 0.5] {
            let pct = 2.0 * (0.5 - a);
            assert!((location_from_share(pct, 0.5, Side::Left).unwrap() - a).abs() < 1e-15);
        }
    }

    #[test]
    fn untouched_device_sits_at_the_base() {
        assert_eq!(
            quantify_location(&device(0, 0, 1000, 0), 0.5, Side::Left).unwrap(),
            0.5
        );
        assert!(quantify_location(&device(0, 0, 0, 0), 0.5, Side::Left).is_err());
        assert!(quantify_location(&device(900, 200, 1000, 0), 0.5, Side::Left).is_err());
    }

    #[test]
    fn vulnerability_counts_to_quality() {
        assert_eq!(quantify_quality(&device(0, 0, 1, 10)).unwrap(), 0.75);
        assert_eq!(quantify_quality(&device(0, 0, 1, 33)).unwrap(), 0.175);
        assert_eq!(quantify_quality(&device(0, 0, 1, 0)).unwrap(), 1.0);
        let none = DeviceObservation {
            max_vulns_in_cohort: 0,
            ..device(0, 0, 1, 0)
        };
        assert!(quantify_quality(&none).is_err());
    }
}
