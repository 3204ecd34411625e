//! Regulatory fine on under-investment in security and the conditions under
//! which it forces both vendors to the minimum quality.

use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};
use crate::model::{ModelParams, StrategyProfile, Vendor};

/// Fine of `F` per unit of quality shortfall below `q_min`, charged per unit
/// of market share.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinePolicy {
    #[serde(rename = "F")]
    pub fine_rate: f64,
    pub q_min: f64,
}

impl FinePolicy {
    pub fn new(fine_rate: f64, q_min: f64, params: &ModelParams) -> Result<Self> {
        let policy = FinePolicy { fine_rate, q_min };
        policy.validate(params)?;
        Ok(policy)
    }

    /// A policy that never fines anybody.
    pub fn none() -> Self {
        FinePolicy {
            fine_rate: 0.0,
            q_min: 0.0,
        }
    }

    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        if !self.fine_rate.is_finite() || self.fine_rate < 0.0 {
            return Err(GameError::domain(
                "F",
                self.fine_rate,
                "must be finite and non-negative",
            ));
        }
        if !(0.0..=params.q_max).contains(&self.q_min) {
            return Err(GameError::domain("q_min", self.q_min, "must lie in [0, Q]"));
        }
        Ok(())
    }
}

/// `F (q_min - q)` below the minimum, zero at or above it.
pub fn fine_amount(policy: &FinePolicy, quality: f64) -> f64 {
    if policy.q_min >= quality {
        policy.fine_rate * (policy.q_min - quality)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub holds: bool,
    pub slack: f64,
}

impl Condition {
    fn from_slack(slack: f64) -> Self {
        Condition {
            holds: slack >= 0.0,
            slack,
        }
    }
}

/// Sufficient conditions for both vendors to invest exactly `q_min` when
/// consumers ignore security.
///
/// * `cond1`: `F^2 - 18 T S1 (1-a-b)(a - Z_A)^2 >= 0`
/// * `cond2`: `F^2 - 18 T S2 (1-a-b)(1-b-Z_A)^2 >= 0`
/// * `cond3`: `3 + a - b - F q_min / (T(1-a-b)) >= 0`
/// * `cond3_vendor2`: `3 - a + b - F q_min / (T(1-a-b)) >= 0`, the same
///   price-positivity requirement seen from vendor 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityConditions {
    pub cond1: Condition,
    pub cond2: Condition,
    pub cond3: Condition,
    pub cond3_vendor2: Condition,
}

impl QualityConditions {
    pub fn all_hold(&self) -> bool {
        self.cond1.holds && self.cond2.holds && self.cond3.holds && self.cond3_vendor2.holds
    }
}

pub fn min_quality_conditions(
    params: &ModelParams,
    policy: &FinePolicy,
    a: f64,
    b: f64,
) -> Result<QualityConditions> {
    let gap = StrategyProfile {
        a,
        b,
        q1: 0.0,
        q2: 0.0,
    }
    .gap()?;
    let f2 = policy.fine_rate * policy.fine_rate;
    let d1 = a - params.z_a;
    let d2 = 1.0 - b - params.z_a;
    let pressure = policy.fine_rate * policy.q_min / (params.t * gap);
    Ok(QualityConditions {
        cond1: Condition::from_slack(f2 - 18.0 * params.t * params.s1 * gap * d1 * d1),
        cond2: Condition::from_slack(f2 - 18.0 * params.t * params.s2 * gap * d2 * d2),
        cond3: Condition::from_slack(3.0 + a - b - pressure),
        cond3_vendor2: Condition::from_slack(3.0 - a + b - pressure),
    })
}

/// Slope `(A, B)` of a naive-consumer vendor's utility in its own quality on
/// `[0, q_min]`, where `dpi/dq = A q + B`:
///
/// `A = -2 S (d)^2 + F^2 / (9 T g)`, `B = F/9 (3 + own - opp + (f_opp - F q_min) / (T g))`.
pub fn fine_quality_slope(
    params: &ModelParams,
    policy: &FinePolicy,
    vendor: Vendor,
    a: f64,
    b: f64,
    opp_fine: f64,
) -> Result<(f64, f64)> {
    let gap = StrategyProfile {
        a,
        b,
        q1: 0.0,
        q2: 0.0,
    }
    .gap()?;
    let (own, opp, distance) = match vendor {
        Vendor::One => (a, b, a - params.z_a),
        Vendor::Two => (b, a, 1.0 - b - params.z_a),
    };
    let (_, s) = params.cost_coefficients(vendor);
    let rate = policy.fine_rate;
    let slope_q = -2.0 * s * distance * distance + rate * rate / (9.0 * params.t * gap);
    let slope_0 =
        rate / 9.0 * (3.0 + own - opp + (opp_fine - rate * policy.q_min) / (params.t * gap));
    Ok((slope_q, slope_0))
}

/// Quality best response of a vendor facing naive consumers under a fine.
///
/// Above `q_min` utility strictly falls with quality, so the maximizer lies in
/// `[0, q_min]`, where utility is quadratic with slope `A q + B` (the fine's
/// subgradient at `q_min` is taken as `-F`). Exact ties resolve to the lower
/// quality.
pub fn fine_quality_best_response_naive(
    params: &ModelParams,
    policy: &FinePolicy,
    vendor: Vendor,
    a: f64,
    b: f64,
    opp_fine: f64,
) -> Result<f64> {
    if params.beta != 0.0 {
        return Err(GameError::domain(
            "beta",
            params.beta,
            "the closed-form fine quality response assumes naive consumers",
        ));
    }
    let q_min = policy.q_min;
    if q_min == 0.0 {
        return Ok(0.0);
    }
    let (slope_q, slope_0) = fine_quality_slope(params, policy, vendor, a, b, opp_fine)?;
    let q = if slope_q == 0.0 && slope_0 == 0.0 {
        0.0
    } else if slope_q >= 0.0 && slope_0 >= 0.0 {
        q_min
    } else if slope_q < 0.0 && slope_0 >= 0.0 {
        (-slope_0 / slope_q).min(q_min)
    } else if slope_q >= 0.0 {
        let gain = slope_0 * q_min + 0.5 * slope_q * q_min * q_min;
        if gain > 0.0 {
            q_min
        } else {
            0.0
        }
    } else {
        0.0
    };
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn forcing_fine_params() -> ModelParams {
        ModelParams {
            t: 8.0,
            s1: 0.602,
            s2: 1.54,
            ..Default::default()
        }
    }

    #[test]
    fn fine_amount_examples() {
        let params = ModelParams::default();
        let policy = FinePolicy::new(10.0, 0.4, &params).unwrap();
        assert_eq!(fine_amount(&policy, 0.7), 0.0);
        assert!((fine_amount(&policy, 0.0) - 4.0).abs() < 1e-15);
        assert_eq!(fine_amount(&policy, 0.4), 0.0);
    }

    #[test]
    fn policy_validation() {
        let params = ModelParams::default();
        assert!(FinePolicy::new(-1.0, 0.4, &params).is_err());
        assert!(FinePolicy::new(1.0, 1.4, &params).is_err());
        assert!(FinePolicy::new(0.0, 0.0, &params).is_ok());
    }

    #[test]
    fn conditions_at_symmetric_interior_point() {
        let params = forcing_fine_params();
        let policy = FinePolicy::new(10.0, 0.4, &params).unwrap();
        let c = min_quality_conditions(&params, &policy, 0.2, 0.2).unwrap();
        assert!(c.cond1.holds);
        assert!((c.cond1.slack - (100.0 - 18.0 * 8.0 * 0.602 * 0.6 * 0.09)).abs() < 1e-12);
        assert!((100.0 - c.cond1.slack - 4.681).abs() < 1e-3);
        assert!(c.cond3.holds);
        assert!((c.cond3.slack - (3.0 - 4.0 / 4.8)).abs() < 1e-12);
        assert!((c.cond3.slack - 2.167).abs() < 1e-3);
        assert!(c.all_hold());
    }

    #[test]
    fn zero_fine_cannot_force_investment() {
        let params = forcing_fine_params();
        let policy = FinePolicy::new(0.0, 0.4, &params).unwrap();
        let c = min_quality_conditions(&params, &policy, 0.1, 0.2).unwrap();
        assert!(!c.cond1.holds);
    }

    #[test]
    fn compliant_response_when_conditions_hold() {
        let params = forcing_fine_params();
        let policy = FinePolicy::new(10.0, 0.4, &params).unwrap();
        for v in Vendor::BOTH {
            let q = fine_quality_best_response_naive(&params, &policy, v, 0.2, 0.2, 0.0).unwrap();
            assert_eq!(q, 0.4);
        }
    }

    #[test]
    fn zero_fine_means_zero_quality() {
        let params = forcing_fine_params();
        let policy = FinePolicy::new(0.0, 0.4, &params).unwrap();
        for v in Vendor::BOTH {
            assert_eq!(
                fine_quality_best_response_naive(&params, &policy, v, 0.1, 0.3, 0.0).unwrap(),
                0.0
            );
        }
        // No customization: quality is free, ties resolve low.
        let q =
            fine_quality_best_response_naive(&params, &policy, Vendor::One, 0.5, 0.2, 0.0).unwrap();
        assert_eq!(q, 0.0);
    }

    #[test]
    fn weak_fine_gives_interior_quality() {
        // A < 0, B > 0: the vendor pays part of the fine.
        let params = ModelParams {
            t: 8.0,
            s1: 50.0,
            ..Default::default()
        };
        let policy = FinePolicy::new(2.0, 0.6, &params).unwrap();
        let (sq, s0) = fine_quality_slope(&params, &policy, Vendor::One, 0.0, 0.0, 0.0).unwrap();
        assert!(sq < 0.0 && s0 > 0.0);
        let q =
            fine_quality_best_response_naive(&params, &policy, Vendor::One, 0.0, 0.0, 0.0).unwrap();
        assert!((q - (-s0 / sq)).abs() < 1e-15);
        assert!(q > 0.0 && q < 0.6);
    }

    #[test]
    fn closed_form_requires_naive_consumers() {
        let params = ModelParams {
            beta: 0.2,
            ..forcing_fine_params()
        };
        let policy = FinePolicy::new(10.0, 0.4, &params).unwrap();
        assert!(
            fine_quality_best_response_naive(&params, &policy, Vendor::One, 0.2, 0.2, 0.0).is_err()
        );
    }
}
