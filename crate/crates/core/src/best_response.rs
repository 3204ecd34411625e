//! Stage-1 best responses in quality and location.
//!
//! Everything is computed for the left vendor (vendor 1). Vendor 2's problem
//! is the same problem in the mirrored game, where the line is reflected and
//! the two vendors swap roles, so vendor-2 queries are answered by mirroring.

use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};
use crate::model::{ModelParams, StrategyProfile, Vendor, EPS_LOC};
use crate::pricing::{fines_for, market_outcome, price_equilibrium, price_equilibrium_with_fines};
use crate::regulation::{fine_amount, FinePolicy};

/// Default number of location grid points scanned by the joint best response.
pub const DEFAULT_GRID_POINTS: usize = 2001;

/// Prices this far below zero still count as zero (rounding at `q_bar`).
const PRICE_FLOOR: f64 = -1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QualityCase {
    AposBpos,
    AnegBpos,
    AposBneg,
    AnegBneg,
    /// `beta = 0`: quality does not move demand, so the response is zero.
    Naive,
}

/// Coefficients of `dpi/dq = A q + B` and the price-zeroing quality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityBrDiagnostics {
    #[serde(rename = "A")]
    pub a_coef: f64,
    #[serde(rename = "B")]
    pub b_coef: f64,
    /// Quality that makes the own equilibrium price zero, clamped to `[0, Q]`.
    /// Undefined for naive consumers.
    pub q_bar: Option<f64>,
    pub case_tag: QualityCase,
    /// `(quality, utility)` pairs compared when the case requires an argmax.
    pub candidates: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LocationCase {
    /// Cost at most `T / (12 Z)`: maximal customization whatever the rival does.
    CheapCustomization,
    /// Cost at least `T / (9 Z)`: the positive stationary root.
    CostlyCustomization,
    /// Intermediate cost and the rival offset is at least the threshold `b_bar`.
    IntermediateRivalFar,
    /// Intermediate cost and the rival offset is below `b_bar`.
    IntermediateRivalClose,
}

/// Stationarity quadratic `A x^2 + B x + C = 0` of a naive-consumer location
/// response, its roots and the chosen offset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationBrDiagnostics {
    pub coefficients: [f64; 3],
    pub roots: Option<(f64, f64)>,
    pub case: LocationCase,
    /// Rival-offset threshold of the intermediate-cost case, when defined.
    pub rival_threshold: Option<f64>,
    pub chosen: f64,
    pub utility: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointBestResponse {
    /// Own offset (`a` for vendor 1, `b` for vendor 2).
    pub location: f64,
    pub quality: f64,
    pub utility: f64,
    pub price: f64,
}

fn frame(params: &ModelParams, vendor: Vendor) -> ModelParams {
    match vendor {
        Vendor::One => *params,
        Vendor::Two => params.mirrored(),
    }
}

fn left_profile(profile: &StrategyProfile, vendor: Vendor) -> StrategyProfile {
    match vendor {
        Vendor::One => *profile,
        Vendor::Two => profile.mirrored(),
    }
}

fn fines_or_zero(policy: Option<&FinePolicy>, profile: &StrategyProfile) -> (f64, f64) {
    policy.map_or((0.0, 0.0), |p| fines_for(p, profile))
}

/// Left vendor's stage-1 utility and equilibrium price.
fn left_outcome(
    params: &ModelParams,
    policy: Option<&FinePolicy>,
    profile: &StrategyProfile,
) -> Result<(f64, f64)> {
    let fines = fines_or_zero(policy, profile);
    let prices = price_equilibrium_with_fines(params, profile, fines)?.prices;
    let (outcome, _) = market_outcome(params, profile, &prices, fines)?;
    Ok((outcome.pi1, prices.p1))
}

/// Stage-1 utility of a vendor: stage-2 equilibrium prices (with fines if a
/// policy is given) plugged into the vendor's utility.
pub fn stage_one_utility(
    params: &ModelParams,
    policy: Option<&FinePolicy>,
    vendor: Vendor,
    profile: &StrategyProfile,
) -> Result<f64> {
    let fines = fines_or_zero(policy, profile);
    let prices = price_equilibrium_with_fines(params, profile, fines)?.prices;
    Ok(market_outcome(params, profile, &prices, fines)?
        .0
        .utility(vendor))
}

fn left_quality_br(
    params: &ModelParams,
    a: f64,
    b: f64,
    q2: f64,
) -> Result<(f64, QualityBrDiagnostics)> {
    let g = StrategyProfile { a, b, q1: 0.0, q2 }.gap()?;
    let d = a - params.z_a;
    let (t, beta) = (params.t, params.beta);
    if beta == 0.0 {
        return Ok((
            0.0,
            QualityBrDiagnostics {
                a_coef: -2.0 * params.s1 * d * d,
                b_coef: 0.0,
                q_bar: None,
                case_tag: QualityCase::Naive,
                candidates: Vec::new(),
            },
        ));
    }
    let a_coef = -2.0 * params.s1 * d * d + beta * beta / (9.0 * t * g);
    let b_coef = beta / 9.0 * (3.0 + a - b - beta * q2 / (t * g));
    let q_bar = (q2 - t / beta * g * (3.0 + a - b)).clamp(0.0, params.q_max);
    let q_max = params.q_max;
    let mut candidates = Vec::new();
    let (q, case_tag) = match (a_coef >= 0.0, b_coef >= 0.0) {
        (true, true) => (q_max, QualityCase::AposBpos),
        (false, true) => ((-b_coef / a_coef).min(q_max), QualityCase::AnegBpos),
        (true, false) => {
            let at = |q1: f64| {
                left_outcome(params, None, &StrategyProfile { a, b, q1, q2 }).map(|o| o.0)
            };
            let (u_bar, u_max) = (at(q_bar)?, at(q_max)?);
            candidates.push((q_bar, u_bar));
            candidates.push((q_max, u_max));
            (
                if u_max > u_bar { q_max } else { q_bar },
                QualityCase::AposBneg,
            )
        }
        (false, false) => (q_bar, QualityCase::AnegBneg),
    };
    Ok((
        q.clamp(0.0, q_max),
        QualityBrDiagnostics {
            a_coef,
            b_coef,
            q_bar: Some(q_bar),
            case_tag,
            candidates,
        },
    ))
}

/// Closed-form quality best response without a fine.
///
/// With `dpi/dq = A q + B` the four sign cases give `Q`, `min(-B/A, Q)`, the
/// better of `q_bar` and `Q`, or `q_bar`. For naive consumers it is zero.
pub fn quality_best_response(
    params: &ModelParams,
    vendor: Vendor,
    own_location: f64,
    opp_location: f64,
    opp_quality: f64,
) -> Result<(f64, QualityBrDiagnostics)> {
    left_quality_br(
        &frame(params, vendor),
        own_location,
        opp_location,
        opp_quality,
    )
}

/// Left vendor's `dpi/da` along the price-equilibrium manifold with fines:
/// `(p1 - f1)[1/2 + (beta dq + p2 - p1) / (2 T g^2) + (a - 2) / (3 g)] - 2 (C + S q^2)(a - Z_A)`.
fn left_location_derivative(
    params: &ModelParams,
    policy: Option<&FinePolicy>,
    profile: &StrategyProfile,
) -> Result<f64> {
    let g = profile.gap()?;
    let fines = fines_or_zero(policy, profile);
    let prices = price_equilibrium_with_fines(params, profile, fines)?.prices;
    let t = params.t;
    let margin = prices.p1 - fines.0;
    let shift = params.beta * (profile.q1 - profile.q2) + prices.p2 - prices.p1;
    let demand_side = margin * (0.5 + shift / (2.0 * t * g * g) + (profile.a - 2.0) / (3.0 * g));
    let d = profile.a - params.z_a;
    Ok(demand_side - 2.0 * (params.c1 + params.s1 * profile.q1 * profile.q1) * d)
}

fn left_quality_derivative(
    params: &ModelParams,
    policy: Option<&FinePolicy>,
    profile: &StrategyProfile,
) -> Result<f64> {
    let g = profile.gap()?;
    let fines = fines_or_zero(policy, profile);
    let prices = price_equilibrium_with_fines(params, profile, fines)?.prices;
    let fine_slope = match policy {
        Some(p) if profile.q1 <= p.q_min => -p.fine_rate,
        _ => 0.0,
    };
    let d = profile.a - params.z_a;
    Ok(
        (prices.p1 - fines.0) * (params.beta - fine_slope) / (3.0 * params.t * g)
            - 2.0 * params.s1 * profile.q1 * d * d,
    )
}

/// Total derivative of a vendor's stage-1 utility in its own offset without a
/// fine, with prices re-equilibrated:
///
/// `p1* ((-1-3a-b) / (6g) + beta (q1-q2) / (6 T g^2)) - 2 C1 (a-Z_A) - 2 S1 q1^2 (a-Z_A)`.
///
/// For vendor 2 the derivative is taken in `b`.
pub fn location_utility_derivative(
    params: &ModelParams,
    vendor: Vendor,
    profile: &StrategyProfile,
) -> Result<f64> {
    let params = frame(params, vendor);
    let pr = left_profile(profile, vendor);
    let g = pr.gap()?;
    let p1 = price_equilibrium(&params, &pr)?.prices.p1;
    let d = pr.a - params.z_a;
    let slope = (-1.0 - 3.0 * pr.a - pr.b) / (6.0 * g)
        + params.beta * (pr.q1 - pr.q2) / (6.0 * params.t * g * g);
    Ok(p1 * slope - 2.0 * params.c1 * d - 2.0 * params.s1 * pr.q1 * pr.q1 * d)
}

/// As [`location_utility_derivative`] with fines inside the utility.
pub fn location_utility_derivative_with_fine(
    params: &ModelParams,
    policy: &FinePolicy,
    vendor: Vendor,
    profile: &StrategyProfile,
) -> Result<f64> {
    left_location_derivative(
        &frame(params, vendor),
        Some(policy),
        &left_profile(profile, vendor),
    )
}

/// Derivative of stage-1 utility in the vendor's own quality:
/// `beta p* / (3 T g) - 2 S q d^2`.
pub fn quality_utility_derivative(
    params: &ModelParams,
    vendor: Vendor,
    profile: &StrategyProfile,
) -> Result<f64> {
    left_quality_derivative(&frame(params, vendor), None, &left_profile(profile, vendor))
}

/// Quality derivative with a fine: `(p - f)(beta - f') / (3 T g) - 2 S q d^2`,
/// where `f' = -F` at and below `q_min`.
pub fn quality_utility_derivative_with_fine(
    params: &ModelParams,
    policy: &FinePolicy,
    vendor: Vendor,
    profile: &StrategyProfile,
) -> Result<f64> {
    left_quality_derivative(
        &frame(params, vendor),
        Some(policy),
        &left_profile(profile, vendor),
    )
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    offset: f64,
    quality: f64,
    utility: f64,
    feasible: bool,
}

impl Candidate {
    /// Feasible first, then utility, then larger offset, then lower quality.
    fn beats(&self, other: &Candidate) -> bool {
        if self.feasible != other.feasible {
            return self.feasible;
        }
        if self.utility != other.utility {
            return self.utility > other.utility;
        }
        if self.offset != other.offset {
            return self.offset > other.offset;
        }
        self.quality < other.quality
    }
}

/// Largest offset the left vendor may take against a rival at `opp_offset`.
fn offset_ceiling(params: &ModelParams, opp_offset: f64) -> Result<f64> {
    let upper = params.z_a.min(1.0 - opp_offset - 2.0 * EPS_LOC);
    if upper < 0.0 {
        return Err(GameError::CoLocation {
            gap: 1.0 - opp_offset,
        });
    }
    Ok(upper)
}

/// Scans offsets on a uniform grid over `[0, upper]`, then refines around the
/// best grid point by bisecting the envelope derivative wherever it changes
/// sign from positive to non-positive.
fn scan_offsets<E, D>(upper: f64, grid_points: usize, eval: E, derivative: D) -> Result<Candidate>
where
    E: Fn(f64) -> Result<Candidate>,
    D: Fn(&Candidate) -> Result<f64>,
{
    let n = grid_points.max(2);
    let grid: Vec<Candidate> = (0..n)
        .map(|k| eval(upper * k as f64 / (n - 1) as f64))
        .collect::<Result<_>>()?;
    let mut best_k = 0;
    for (k, c) in grid.iter().enumerate().skip(1) {
        if c.beats(&grid[best_k]) {
            best_k = k;
        }
    }
    let mut best = grid[best_k];
    let lo_k = best_k.saturating_sub(1);
    let hi_k = (best_k + 1).min(n - 1);
    for (l, h) in [(lo_k, best_k), (best_k, hi_k)] {
        if l == h || !grid[l].feasible || !grid[h].feasible {
            continue;
        }
        let (mut lo, mut hi) = (grid[l], grid[h]);
        if !(derivative(&lo)? > 0.0 && derivative(&hi)? <= 0.0) {
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo.offset + hi.offset);
            if mid <= lo.offset || mid >= hi.offset {
                break;
            }
            let c = eval(mid)?;
            if derivative(&c)? > 0.0 {
                lo = c;
            } else {
                hi = c;
            }
        }
        for c in [lo, hi] {
            if c.beats(&best) {
                best = c;
            }
        }
    }
    Ok(best)
}

fn left_joint_br(
    params: &ModelParams,
    opp_offset: f64,
    opp_quality: f64,
    grid_points: usize,
) -> Result<Candidate> {
    let upper = offset_ceiling(params, opp_offset)?;
    let eval = |a: f64| -> Result<Candidate> {
        let (q, _) = left_quality_br(params, a, opp_offset, opp_quality)?;
        let (utility, price) = left_outcome(
            params,
            None,
            &StrategyProfile {
                a,
                b: opp_offset,
                q1: q,
                q2: opp_quality,
            },
        )?;
        Ok(Candidate {
            offset: a,
            quality: q,
            utility,
            feasible: price >= PRICE_FLOOR,
        })
    };
    let derivative = |c: &Candidate| {
        left_location_derivative(
            params,
            None,
            &StrategyProfile {
                a: c.offset,
                b: opp_offset,
                q1: c.quality,
                q2: opp_quality,
            },
        )
    };
    scan_offsets(upper, grid_points, eval, derivative)
}

fn into_response(
    c: Candidate,
    params: &ModelParams,
    policy: Option<&FinePolicy>,
    opp_offset: f64,
    opp_quality: f64,
) -> Result<JointBestResponse> {
    let (_, price) = left_outcome(
        params,
        policy,
        &StrategyProfile {
            a: c.offset,
            b: opp_offset,
            q1: c.quality,
            q2: opp_quality,
        },
    )?;
    Ok(JointBestResponse {
        location: c.offset,
        quality: c.quality,
        utility: c.utility,
        price,
    })
}

/// Joint location and quality best response without a fine.
///
/// Quality follows its closed form at every location; location is scanned on
/// a grid that includes both boundaries and refined near the best grid point.
/// Locations with a negative equilibrium price are infeasible.
pub fn joint_best_response(
    params: &ModelParams,
    vendor: Vendor,
    opp_location: f64,
    opp_quality: f64,
) -> Result<JointBestResponse> {
    joint_best_response_on(
        params,
        vendor,
        opp_location,
        opp_quality,
        DEFAULT_GRID_POINTS,
    )
}

/// [`joint_best_response`] with an explicit number of location grid points.
pub fn joint_best_response_on(
    params: &ModelParams,
    vendor: Vendor,
    opp_location: f64,
    opp_quality: f64,
    grid_points: usize,
) -> Result<JointBestResponse> {
    let params = frame(params, vendor);
    let best = left_joint_br(&params, opp_location, opp_quality, grid_points)?;
    into_response(best, &params, None, opp_location, opp_quality)
}

/// Best quality for the left vendor at a fixed location under a fine.
///
/// The margin `p1 - f1` is linear in `q1` on `[0, q_min]` and on `[q_min, Q]`,
/// so utility is piecewise quadratic. Every breakpoint, stationary point and
/// price or demand boundary is a candidate; each is scored by the exact
/// stage-1 utility and candidates with a negative price are infeasible.
fn left_fine_quality(
    params: &ModelParams,
    policy: &FinePolicy,
    a: f64,
    b: f64,
    q2: f64,
) -> Result<Candidate> {
    let g = StrategyProfile { a, b, q1: 0.0, q2 }.gap()?;
    let (t, beta) = (params.t, params.beta);
    let (rate, q_min, q_max) = (policy.fine_rate, policy.q_min, params.q_max);
    let curvature = params.s1 * (a - params.z_a).powi(2);
    let base = -beta / 3.0 * q2 + t * g * (3.0 + a - b) / 3.0;
    let f2 = fine_amount(policy, q2);

    let mut qs = vec![0.0, q_min, q_max];
    // (lo, hi, margin at q = 0, margin slope, price at q = 0, price slope)
    let pieces = [
        (
            0.0,
            q_min,
            base + f2 / 3.0 - rate * q_min / 3.0,
            (beta + rate) / 3.0,
            base + f2 / 3.0 + 2.0 * rate * q_min / 3.0,
            (beta - 2.0 * rate) / 3.0,
        ),
        (
            q_min,
            q_max,
            base + f2 / 3.0,
            beta / 3.0,
            base + f2 / 3.0,
            beta / 3.0,
        ),
    ];
    for (lo, hi, m0, s, p0, ps) in pieces {
        let mut push = |q: f64| {
            if q.is_finite() && q > lo && q < hi {
                qs.push(q);
            }
        };
        let concavity = 2.0 * curvature - s * s / (t * g);
        if concavity > 0.0 {
            push(s * m0 / (t * g) / concavity);
        }
        if curvature > 0.0 {
            push(s / (2.0 * curvature));
        }
        if s != 0.0 {
            push(-m0 / s);
            push((2.0 * t * g - m0) / s);
        }
        if ps != 0.0 {
            push(-p0 / ps);
        }
    }

    let mut best: Option<Candidate> = None;
    for q1 in qs {
        let (utility, price) =
            left_outcome(params, Some(policy), &StrategyProfile { a, b, q1, q2 })?;
        let c = Candidate {
            offset: a,
            quality: q1,
            utility,
            feasible: price >= PRICE_FLOOR,
        };
        if best.as_ref().is_none_or(|bst| c.beats(bst)) {
            best = Some(c);
        }
    }
    Ok(best.expect("candidate list is never empty"))
}

/// Joint location and quality best response with the fine inside the
/// utility, valid for any `beta`. This is the numeric path used when the
/// closed-form fine regime does not apply.
pub fn joint_best_response_with_fine(
    params: &ModelParams,
    policy: &FinePolicy,
    vendor: Vendor,
    opp_location: f64,
    opp_quality: f64,
    grid_points: usize,
) -> Result<JointBestResponse> {
    let params = frame(params, vendor);
    let upper = offset_ceiling(&params, opp_location)?;
    let eval = |a: f64| left_fine_quality(&params, policy, a, opp_location, opp_quality);
    let derivative = |c: &Candidate| {
        left_location_derivative(
            &params,
            Some(policy),
            &StrategyProfile {
                a: c.offset,
                b: opp_location,
                q1: c.quality,
                q2: opp_quality,
            },
        )
    };
    let best = scan_offsets(upper, grid_points, eval, derivative)?;
    into_response(best, &params, Some(policy), opp_location, opp_quality)
}

/// Left-vendor location response for naive consumers with per-unit
/// customization cost `cost` (which may include a fixed security term).
fn left_naive_location(
    params: &ModelParams,
    cost: f64,
    b: f64,
    quality: f64,
) -> Result<(f64, LocationBrDiagnostics)> {
    let (t, z) = (params.t, params.z_a);
    let qa = -3.0 * t;
    let qb = 2.0 * t * b - 10.0 * t - 36.0 * cost;
    let qc = t * (b * b - 2.0 * b - 3.0) + 36.0 * cost * z;
    let disc = qb * qb - 4.0 * qa * qc;
    let roots = (disc >= 0.0).then(|| {
        let h = -0.5 * (qb + qb.signum() * disc.sqrt());
        let (r1, r2) = (h / qa, qc / h);
        (r1.min(r2), r1.max(r2))
    });

    let low = t / (12.0 * z);
    let high = t / (9.0 * z);
    let bar_arg = 4.0 - 36.0 * cost * z / t;
    let rival_threshold = (cost > low && cost < high).then(|| 1.0 - bar_arg.sqrt());
    let case = if z == 0.0 || cost <= low {
        LocationCase::CheapCustomization
    } else if cost >= high {
        LocationCase::CostlyCustomization
    } else if b >= rival_threshold.unwrap_or(0.0) {
        LocationCase::IntermediateRivalFar
    } else {
        LocationCase::IntermediateRivalClose
    };

    let chosen = match case {
        LocationCase::CheapCustomization | LocationCase::IntermediateRivalFar => 0.0,
        LocationCase::CostlyCustomization | LocationCase::IntermediateRivalClose => {
            let (_, r2) = roots.ok_or_else(|| {
                GameError::Internal(format!(
                    "location quadratic has no real root (discriminant {disc:e})"
                ))
            })?;
            r2.clamp(0.0, z)
        }
    };

    let profile = StrategyProfile {
        a: chosen,
        b,
        q1: quality,
        q2: 0.0,
    };
    let g = profile.gap()?;
    let p1 = t * g * (3.0 + chosen - b) / 3.0;
    let d = chosen - z;
    let utility = p1 * p1 / (2.0 * t * g) - cost * d * d;
    Ok((
        chosen,
        LocationBrDiagnostics {
            coefficients: [qa, qb, qc],
            roots,
            case,
            rival_threshold,
            chosen,
            utility,
        },
    ))
}

fn require_naive(params: &ModelParams) -> Result<()> {
    if params.beta != 0.0 {
        return Err(GameError::domain(
            "beta",
            params.beta,
            "closed-form location responses assume naive consumers",
        ));
    }
    Ok(())
}

/// Location best response for naive consumers without a fine.
///
/// The own offset solves `-3T a^2 + a(2Tb - 10T - 36C) + T(b^2 - 2b - 3) + 36 C Z_A = 0`
/// (mirrored for vendor 2). Cost at most `T/(12 Z_A)` gives 0, at least
/// `T/(9 Z_A)` gives the positive root capped at `Z_A`, and in between the
/// rival offset decides against `1 - sqrt(4 - 36 C Z_A / T)`.
pub fn naive_location_best_response(
    params: &ModelParams,
    vendor: Vendor,
    opp_location: f64,
) -> Result<(f64, LocationBrDiagnostics)> {
    require_naive(params)?;
    let params = frame(params, vendor);
    left_naive_location(&params, params.c1, opp_location, 0.0)
}

/// Naive-consumer location best response when the vendor complies with a
/// fine: the same rule with cost `C + S q_min^2`.
pub fn naive_location_best_response_with_fine(
    params: &ModelParams,
    policy: &FinePolicy,
    vendor: Vendor,
    opp_location: f64,
) -> Result<(f64, LocationBrDiagnostics)> {
    require_naive(params)?;
    let params = frame(params, vendor);
    let cost = params.c1 + params.s1 * policy.q_min * policy.q_min;
    left_naive_location(&params, cost, opp_location, policy.q_min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn security_aware(c1: f64) -> ModelParams {
        ModelParams {
            t: 1.6,
            beta: 0.6,
            c1,
            c2: 1.3,
            s1: 1.0,
            s2: 1.0,
            ..Default::default()
        }
    }

    fn naive(c1: f64, c2: f64) -> ModelParams {
        ModelParams {
            t: 8.0,
            c1,
            c2,
            s1: 0.602,
            s2: 1.54,
            ..Default::default()
        }
    }

    #[test]
    fn naive_consumers_buy_no_security() {
        let params = naive(1.0, 1.0);
        let (q, diag) = quality_best_response(&params, Vendor::One, 0.1, 0.2, 0.7).unwrap();
        assert_eq!(q, 0.0);
        assert_eq!(diag.case_tag, QualityCase::Naive);
        assert!(diag.q_bar.is_none());
    }

    #[test]
    fn interior_quality_response() {
        let params = ModelParams {
            t: 1.6,
            beta: 0.6,
            s1: 1.0,
            ..Default::default()
        };
        let (q, diag) = quality_best_response(&params, Vendor::One, 0.0, 0.5, 1.0).unwrap();
        assert!((diag.a_coef + 0.45).abs() < 1e-12);
        assert!((diag.b_coef - 0.116667).abs() < 1e-6);
        assert_eq!(diag.case_tag, QualityCase::AnegBpos);
        assert!((q - 0.25926).abs() < 1e-5, "{q}");
    }

    #[test]
    fn vendor_two_invests_fully_at_its_base() {
        let params = ModelParams {
            t: 1.6,
            beta: 0.6,
            s2: 1.0,
            ..Default::default()
        };
        let (q, diag) = quality_best_response(&params, Vendor::Two, 0.5, 0.0, 0.259).unwrap();
        assert_eq!(diag.case_tag, QualityCase::AposBpos);
        assert_eq!(q, 1.0);
    }

    #[test]
    fn negative_intercept_picks_the_better_endpoint() {
        // A rival with far higher quality drives vendor 1's price negative at q1 = 0.
        let params = ModelParams {
            t: 0.05,
            beta: 3.0,
            s1: 0.01,
            ..Default::default()
        };
        let (q, diag) = quality_best_response(&params, Vendor::One, 0.4, 0.0, 1.0).unwrap();
        assert!(diag.b_coef < 0.0);
        assert!(matches!(
            diag.case_tag,
            QualityCase::AposBneg | QualityCase::AnegBneg
        ));
        let q_bar = diag.q_bar.unwrap();
        assert!(q == q_bar || q == params.q_max);
        let p = price_equilibrium(
            &params,
            &StrategyProfile {
                a: 0.4,
                b: 0.0,
                q1: q,
                q2: 1.0,
            },
        )
        .unwrap();
        assert!(p.prices.p1 >= -1e-12);
    }

    #[test]
    fn fine_free_derivative_matches_general_form() {
        let params = security_aware(0.7);
        let profile = StrategyProfile {
            a: 0.21,
            b: 0.33,
            q1: 0.8,
            q2: 0.4,
        };
        let none = FinePolicy::none();
        for v in Vendor::BOTH {
            let fine_free = location_utility_derivative(&params, v, &profile).unwrap();
            let general =
                location_utility_derivative_with_fine(&params, &none, v, &profile).unwrap();
            assert!(
                (fine_free - general).abs() < 1e-12,
                "{v}: {fine_free} vs {general}"
            );
        }
    }

    #[test]
    fn location_derivative_negative_at_base_without_security() {
        let params = naive(1.0, 1.0);
        let profile = StrategyProfile {
            a: 0.5,
            b: 0.2,
            q1: 0.3,
            q2: 0.3,
        };
        let d = location_utility_derivative(&params, Vendor::One, &profile).unwrap();
        let p1 = price_equilibrium(&params, &profile).unwrap().prices.p1;
        assert!((d - p1 * (-1.0 - 1.5 - 0.2) / (6.0 * 0.3)).abs() < 1e-12);
        assert!(d < 0.0);
    }

    #[test]
    fn interior_location_best_response() {
        let params = security_aware(0.7368);
        let br = joint_best_response(&params, Vendor::One, 0.3639, 1.0).unwrap();
        assert!((br.location - 0.3195).abs() < 1e-2, "{br:?}");
        assert_eq!(br.quality, 1.0);
        let d = location_utility_derivative(
            &params,
            Vendor::One,
            &StrategyProfile {
                a: br.location,
                b: 0.3639,
                q1: 1.0,
                q2: 1.0,
            },
        )
        .unwrap();
        assert!(d.abs() < 1e-9, "{d}");
    }

    #[test]
    fn cheap_customization_is_maximal() {
        let params = naive(1.0, 1.0);
        let br = joint_best_response(&params, Vendor::One, 0.2, 0.0).unwrap();
        assert_eq!((br.location, br.quality), (0.0, 0.0));
        for b in [0.0, 0.25, 0.5] {
            let (a, diag) = naive_location_best_response(&params, Vendor::One, b).unwrap();
            assert_eq!(a, 0.0);
            assert_eq!(diag.case, LocationCase::CheapCustomization);
        }
    }

    #[test]
    fn costly_customization_root() {
        let params = naive(3.0, 0.0);
        let (a, diag) = naive_location_best_response(&params, Vendor::One, 0.3).unwrap();
        assert_eq!(diag.coefficients[0], -24.0);
        assert!((diag.coefficients[1] + 183.2).abs() < 1e-12);
        assert!((diag.coefficients[2] - 25.92).abs() < 1e-12);
        assert_eq!(diag.case, LocationCase::CostlyCustomization);
        assert!((a - 0.1390).abs() < 1e-4, "{a}");
        let numeric = joint_best_response(&params, Vendor::One, 0.3, 0.0).unwrap();
        assert!((numeric.location - a).abs() < 1e-9);
    }

    #[test]
    fn free_customization_for_vendor_two() {
        let params = naive(3.0, 0.0);
        for a in [0.0, 0.2, 0.45] {
            let (b, _) = naive_location_best_response(&params, Vendor::Two, a).unwrap();
            assert_eq!(b, 0.0);
        }
    }

    #[test]
    fn intermediate_cost_depends_on_rival() {
        // T/12Z = 4/3 < C = 1.6 < T/9Z = 16/9; threshold 1 - sqrt(4 - 3.6) ~ 0.3675.
        let params = naive(1.6, 0.0);
        let (far, d_far) = naive_location_best_response(&params, Vendor::One, 0.45).unwrap();
        assert_eq!(d_far.case, LocationCase::IntermediateRivalFar);
        assert_eq!(far, 0.0);
        let (close, d_close) = naive_location_best_response(&params, Vendor::One, 0.1).unwrap();
        assert_eq!(d_close.case, LocationCase::IntermediateRivalClose);
        assert!(close > 0.0);
        assert!((d_close.rival_threshold.unwrap() - (1.0 - 0.4f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn compliant_fine_response_uses_effective_cost() {
        let params = naive(3.0, 0.0);
        let policy = FinePolicy::new(10.0, 0.4, &params).unwrap();
        let (a, diag) =
            naive_location_best_response_with_fine(&params, &policy, Vendor::One, 0.3).unwrap();
        assert!((diag.coefficients[1] + 186.668).abs() < 1e-3);
        assert!((diag.coefficients[2] - 27.654).abs() < 1e-3);
        // Positive root of -24a^2 - 186.668a + 27.654.
        assert!((a - 0.14543).abs() < 1e-5, "{a}");
        let (a0, _) = naive_location_best_response(&params, Vendor::One, 0.3).unwrap();
        assert!(a >= a0);
    }

    #[test]
    fn zero_minimum_quality_reduces_to_plain_rule() {
        let params = naive(1.7, 2.5);
        let policy = FinePolicy::new(10.0, 0.0, &params).unwrap();
        for v in Vendor::BOTH {
            for opp in [0.0, 0.1, 0.3] {
                assert_eq!(
                    naive_location_best_response_with_fine(&params, &policy, v, opp).unwrap(),
                    naive_location_best_response(&params, v, opp).unwrap()
                );
            }
        }
    }

    #[test]
    fn naive_rules_reject_aware_consumers() {
        assert!(naive_location_best_response(&security_aware(1.0), Vendor::One, 0.2).is_err());
    }

    #[test]
    fn fine_joint_response_complies_in_the_forcing_regime() {
        let params = naive(1.0, 1.0);
        let policy = FinePolicy::new(10.0, 0.4, &params).unwrap();
        for v in Vendor::BOTH {
            let br = joint_best_response_with_fine(&params, &policy, v, 0.0, 0.4, 401).unwrap();
            assert_eq!(br.quality, 0.4);
            let (closed, _) =
                naive_location_best_response_with_fine(&params, &policy, v, 0.0).unwrap();
            assert!(
                (br.location - closed).abs() < 1e-9,
                "{v}: {} vs {closed}",
                br.location
            );
        }
    }

    #[test]
    fn mirrored_queries_agree() {
        let params = ModelParams {
            c2: 0.7368,
            c1: 1.3,
            z_a: 0.5,
            ..security_aware(0.0)
        };
        let v2 = joint_best_response(&params, Vendor::Two, 0.3639, 1.0).unwrap();
        let v1 = joint_best_response(&params.mirrored(), Vendor::One, 0.3639, 1.0).unwrap();
        assert_eq!(v1, v2);
    }
}
