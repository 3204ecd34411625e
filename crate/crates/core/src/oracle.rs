//! Brute-force verifiers.
//!
//! Nothing here calls the closed-form demand, pricing or best-response code
//! when producing its own answers: consumers are sampled and choose by direct
//! utility comparison, stage-2 prices come from solving the two first-order
//! conditions of this module's own demand, and best responses are found by
//! exhaustive lattice search. The analytic code is only called to obtain the
//! value being checked.

use serde::{Deserialize, Serialize};

use crate::best_response;
use crate::equilibrium::Mode;
use crate::error::{GameError, Result};
use crate::model::{ModelParams, PriceVector, StrategyProfile, Vendor};
use crate::pricing;

/// SplitMix64 (Steele, Lea and Flood 2014): a 64-bit state advanced by the
/// golden-ratio increment and finalized with two xor-shift-multiply rounds.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloShare {
    pub share: f64,
    pub std_error: f64,
    /// Set when the standard error is zero (every sample chose one vendor).
    pub degenerate: bool,
}

/// Empirical share of vendor 1 among `n_samples` uniform consumers, each
/// buying whichever product gives it higher utility. Ties go to vendor 1.
pub fn monte_carlo_share(
    params: &ModelParams,
    profile: &StrategyProfile,
    prices: &PriceVector,
    n_samples: usize,
    seed: u64,
) -> Result<MonteCarloShare> {
    if n_samples == 0 {
        return Err(GameError::Config(
            "Monte Carlo needs at least one sample".into(),
        ));
    }
    let z1 = profile.a;
    let z2 = 1.0 - profile.b;
    let v1 = params.beta * profile.q1 - prices.p1;
    let v2 = params.beta * profile.q2 - prices.p2;
    let mut rng = SplitMix64::new(seed);
    let mut ones = 0usize;
    for _ in 0..n_samples {
        let x = rng.next_f64();
        let u1 = v1 - params.t * (x - z1) * (x - z1);
        let u2 = v2 - params.t * (x - z2) * (x - z2);
        if u1 >= u2 {
            ones += 1;
        }
    }
    let share = ones as f64 / n_samples as f64;
    let std_error = (share * (1.0 - share) / n_samples as f64).sqrt();
    Ok(MonteCarloShare {
        share,
        std_error,
        degenerate: std_error == 0.0,
    })
}

fn shortfall_fine(mode: &Mode, quality: f64) -> f64 {
    match mode {
        Mode::WithFine(p) if quality < p.q_min => p.fine_rate * (p.q_min - quality),
        _ => 0.0,
    }
}

/// Vendor-1 share from the position of the indifferent consumer, found by
/// equating the two consumer utilities (linear in `x` once the quadratic
/// terms cancel).
fn indifferent_share(params: &ModelParams, profile: &StrategyProfile, p1: f64, p2: f64) -> f64 {
    let z1 = profile.a;
    let z2 = 1.0 - profile.b;
    // beta q1 - p1 - T (x - z1)^2 = beta q2 - p2 - T (x - z2)^2
    let lhs = params.beta * (profile.q1 - profile.q2) - p1 + p2 - params.t * (z1 * z1 - z2 * z2);
    lhs / (2.0 * params.t * (z2 - z1))
}

struct Stage2 {
    p: [f64; 2],
    share: [f64; 2],
    fines: [f64; 2],
}

/// Stage-2 equilibrium from the two first-order conditions `D_i + (p_i - f_i) dD_i/dp_i = 0`
/// of the affine demand above, solved as a 2x2 linear system.
fn stage_two(params: &ModelParams, mode: &Mode, profile: &StrategyProfile) -> Result<Stage2> {
    if 1.0 - profile.a - profile.b < crate::model::EPS_LOC {
        return Err(GameError::CoLocation {
            gap: 1.0 - profile.a - profile.b,
        });
    }
    let f = [
        shortfall_fine(mode, profile.q1),
        shortfall_fine(mode, profile.q2),
    ];
    let x0 = indifferent_share(params, profile, 0.0, 0.0);
    let k1 = x0 - indifferent_share(params, profile, 1.0, 0.0); // -dx/dp1
    let k2 = indifferent_share(params, profile, 0.0, 1.0) - x0; //  dx/dp2
                                                                // Vendor 1: x0 - k1 p1 + k2 p2 - k1 (p1 - f1) = 0
                                                                // Vendor 2: 1 - x0 + k1 p1 - k2 p2 - k2 (p2 - f2) = 0
    let m = [[-2.0 * k1, k2], [k1, -2.0 * k2]];
    let r = [-x0 - k1 * f[0], -(1.0 - x0) - k2 * f[1]];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let p1 = (r[0] * m[1][1] - m[0][1] * r[1]) / det;
    let p2 = (m[0][0] * r[1] - r[0] * m[1][0]) / det;
    let x = indifferent_share(params, profile, p1, p2).clamp(0.0, 1.0);
    Ok(Stage2 {
        p: [p1, p2],
        share: [x, 1.0 - x],
        fines: f,
    })
}

fn cost(params: &ModelParams, vendor: Vendor, profile: &StrategyProfile) -> f64 {
    let (c, s, z, q) = match vendor {
        Vendor::One => (params.c1, params.s1, profile.a, profile.q1),
        Vendor::Two => (params.c2, params.s2, 1.0 - profile.b, profile.q2),
    };
    let d = z - params.z_a;
    (c + s * q * q) * d * d
}

/// Stage-1 utility and own equilibrium price, computed independently.
fn evaluate(
    params: &ModelParams,
    mode: &Mode,
    vendor: Vendor,
    profile: &StrategyProfile,
) -> Result<(f64, f64)> {
    let s = stage_two(params, mode, profile)?;
    let i = vendor.index();
    Ok((
        (s.p[i] - s.fines[i]) * s.share[i] - cost(params, vendor, profile),
        s.p[i],
    ))
}

/// A vendor's stage-1 utility at a profile, as computed by the oracle.
pub fn profile_utility(
    params: &ModelParams,
    mode: &Mode,
    vendor: Vendor,
    profile: &StrategyProfile,
) -> Result<f64> {
    evaluate(params, mode, vendor, profile).map(|(u, _)| u)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub locations: usize,
    pub qualities: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            locations: 400,
            qualities: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridBestResponse {
    pub location: f64,
    pub quality: f64,
    pub utility: f64,
    /// Lattice spacing along each axis.
    pub location_step: f64,
    pub quality_step: f64,
}

/// Exhaustive best response on a `locations x qualities` lattice spanning the
/// vendor's admissible offsets and `[0, Q]`. Lattice points with a negative
/// own price are infeasible. Ties prefer the larger offset, then the lower
/// quality.
pub fn grid_best_response(
    params: &ModelParams,
    mode: &Mode,
    vendor: Vendor,
    opp_location: f64,
    opp_quality: f64,
    grid: &GridSpec,
) -> Result<GridBestResponse> {
    if grid.locations < 2 || grid.qualities < 2 {
        return Err(GameError::Config(
            "oracle grid needs at least 2 points per axis".into(),
        ));
    }
    let bound = match vendor {
        Vendor::One => params.z_a,
        Vendor::Two => 1.0 - params.z_a,
    };
    let upper = bound.min(1.0 - opp_location - 2e-9);
    if upper < 0.0 {
        return Err(GameError::CoLocation {
            gap: 1.0 - opp_location,
        });
    }
    let location_step = upper / (grid.locations - 1) as f64;
    let quality_step = params.q_max / (grid.qualities - 1) as f64;

    // (feasible, utility, offset, quality)
    let mut best: Option<(bool, f64, f64, f64)> = None;
    for i in 0..grid.locations {
        let own = upper * i as f64 / (grid.locations - 1) as f64;
        for j in 0..grid.qualities {
            let q = params.q_max * j as f64 / (grid.qualities - 1) as f64;
            let profile = match vendor {
                Vendor::One => StrategyProfile {
                    a: own,
                    b: opp_location,
                    q1: q,
                    q2: opp_quality,
                },
                Vendor::Two => StrategyProfile {
                    a: opp_location,
                    b: own,
                    q1: opp_quality,
                    q2: q,
                },
            };
            let (u, p) = evaluate(params, mode, vendor, &profile)?;
            let cand = (p >= -1e-12, u, own, q);
            let better = match best {
                None => true,
                Some((bf, bu, bo, bq)) => {
                    if cand.0 != bf {
                        cand.0
                    } else if u != bu {
                        u > bu
                    } else if own != bo {
                        own > bo
                    } else {
                        q < bq
                    }
                }
            };
            if better {
                best = Some(cand);
            }
        }
    }
    let (_, utility, location, quality) = best.expect("grid is non-empty");
    Ok(GridBestResponse {
        location,
        quality,
        utility,
        location_step,
        quality_step,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeTarget {
    /// Own-price derivative of stage-2 utility at the stage-2 equilibrium.
    PriceFoc(Vendor),
    /// Own-offset derivative of stage-1 utility.
    LocationDerivative(Vendor),
    /// Own-quality derivative of stage-1 utility.
    QualityDerivative(Vendor),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeCheck {
    pub analytic: f64,
    pub numeric: f64,
    pub relative_error: f64,
    pub step: f64,
    pub one_sided: bool,
}

/// Finite difference of `f` at `x` inside `[lo, hi]`: central where the step
/// fits, second-order one-sided at a boundary, halving the step up to ten
/// times when neither fits.
fn difference<F>(f: F, x: f64, lo: f64, hi: f64, step: f64) -> Result<(f64, f64, bool)>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut h = step;
    for _ in 0..=10 {
        if x - h >= lo && x + h <= hi {
            return Ok(((f(x + h)? - f(x - h)?) / (2.0 * h), h, false));
        }
        if x + 2.0 * h <= hi {
            return Ok((
                (-3.0 * f(x)? + 4.0 * f(x + h)? - f(x + 2.0 * h)?) / (2.0 * h),
                h,
                true,
            ));
        }
        if x - 2.0 * h >= lo {
            return Ok((
                (3.0 * f(x)? - 4.0 * f(x - h)? + f(x - 2.0 * h)?) / (2.0 * h),
                h,
                true,
            ));
        }
        h /= 2.0;
    }
    Err(GameError::domain(
        "step",
        step,
        "point is too close to the boundary for a finite difference",
    ))
}

/// Compares an analytic derivative against a finite difference of the
/// oracle's own utility. The default step is `1e-5 * max(1, |x|)`.
pub fn numeric_derivative_check(
    params: &ModelParams,
    mode: &Mode,
    target: DerivativeTarget,
    profile: &StrategyProfile,
    step: Option<f64>,
) -> Result<DerivativeCheck> {
    profile.validate(params)?;
    let scaled = |x: f64| step.unwrap_or(1e-5) * x.abs().max(1.0);
    let (analytic, (numeric, h, one_sided)) = match target {
        DerivativeTarget::PriceFoc(v) => {
            let fines = mode
                .policy()
                .map_or((0.0, 0.0), |p| pricing::fines_for(p, profile));
            let prices = pricing::price_equilibrium_with_fines(params, profile, fines)?.prices;
            let analytic =
                pricing::price_first_order_condition(params, profile, &prices, fines, v)?;
            let s = stage_two(params, mode, profile)?;
            let i = v.index();
            let own = |p: f64| -> Result<f64> {
                let (p1, p2) = match v {
                    Vendor::One => (p, s.p[1]),
                    Vendor::Two => (s.p[0], p),
                };
                let x = indifferent_share(params, profile, p1, p2).clamp(0.0, 1.0);
                let share = if i == 0 { x } else { 1.0 - x };
                Ok((p - s.fines[i]) * share)
            };
            let x = s.p[i];
            (
                analytic,
                difference(own, x, f64::NEG_INFINITY, f64::INFINITY, scaled(x))?,
            )
        }
        DerivativeTarget::LocationDerivative(v) => {
            let analytic = match mode.policy() {
                None => best_response::location_utility_derivative(params, v, profile)?,
                Some(p) => {
                    best_response::location_utility_derivative_with_fine(params, p, v, profile)?
                }
            };
            let opp = profile.offset(v.other());
            let hi = params.max_offset(v).min(1.0 - opp - 2e-9);
            let x = profile.offset(v);
            let f = |o: f64| {
                profile_utility(
                    params,
                    mode,
                    v,
                    &profile.with_choice(v, o, profile.quality(v)),
                )
            };
            (analytic, difference(f, x, 0.0, hi, scaled(x))?)
        }
        DerivativeTarget::QualityDerivative(v) => {
            let analytic = match mode.policy() {
                None => best_response::quality_utility_derivative(params, v, profile)?,
                Some(p) => {
                    best_response::quality_utility_derivative_with_fine(params, p, v, profile)?
                }
            };
            let x = profile.quality(v);
            let f = |q: f64| {
                profile_utility(
                    params,
                    mode,
                    v,
                    &profile.with_choice(v, profile.offset(v), q),
                )
            };
            (analytic, difference(f, x, 0.0, params.q_max, scaled(x))?)
        }
    };
    Ok(DerivativeCheck {
        analytic,
        numeric,
        relative_error: (analytic - numeric).abs() / analytic.abs().max(1.0),
        step: h,
        one_sided,
    })
}
