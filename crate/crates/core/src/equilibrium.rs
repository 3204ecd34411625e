//! Stage-1 Nash equilibrium search.
//!
//! Damped best-response iteration from several starting profiles. Each start
//! alternates the two vendors' responses until the profile stops moving; the
//! distinct fixed points found are reported, best total utility first.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::best_response::{
    joint_best_response_on, joint_best_response_with_fine, naive_location_best_response,
    naive_location_best_response_with_fine, DEFAULT_GRID_POINTS,
};
use crate::error::{GameError, Result};
use crate::model::{MarketOutcome, ModelParams, PriceVector, StrategyProfile, Vendor, EPS_LOC};
use crate::oracle::{grid_best_response, profile_utility, GridBestResponse, GridSpec};
use crate::pricing::{fines_for, market_outcome, price_equilibrium_with_fines};
use crate::regulation::{min_quality_conditions, FinePolicy};

/// Profiles closer than this are treated as the same equilibrium.
pub const DEDUP_DISTANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Mode {
    NoFine,
    WithFine(FinePolicy),
}

impl Mode {
    pub fn policy(&self) -> Option<&FinePolicy> {
        match self {
            Mode::NoFine => None,
            Mode::WithFine(p) => Some(p),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Mode::NoFine => "no_fine",
            Mode::WithFine(_) => "with_fine",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Starts {
    /// `n x n` lattice over `(a, b)` with both qualities at `Q / 2`.
    Lattice(usize),
    Profiles(Vec<StrategyProfile>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub damping: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub starts: Starts,
    /// Location grid points for numeric best responses.
    pub grid_points: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            damping: 0.5,
            tolerance: 1e-9,
            max_iterations: 10_000,
            starts: Starts::Lattice(5),
            grid_points: DEFAULT_GRID_POINTS,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(GameError::domain(
                "damping",
                self.damping,
                "must lie in (0, 1]",
            ));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(GameError::domain(
                "tolerance",
                self.tolerance,
                "must be positive",
            ));
        }
        if self.grid_points < 2 {
            return Err(GameError::Config("grid_points must be at least 2".into()));
        }
        if let Starts::Lattice(0) = self.starts {
            return Err(GameError::Config(
                "start lattice needs at least one point per axis".into(),
            ));
        }
        Ok(())
    }

    pub fn start_profiles(&self, params: &ModelParams) -> Vec<StrategyProfile> {
        match &self.starts {
            Starts::Profiles(p) => p.clone(),
            Starts::Lattice(n) => {
                let n = *n;
                let axis = |hi: f64, k: usize| {
                    if n == 1 {
                        0.0
                    } else {
                        hi * k as f64 / (n - 1) as f64
                    }
                };
                let q = params.q_max / 2.0;
                let mut out = Vec::with_capacity(n * n);
                for i in 0..n {
                    for j in 0..n {
                        out.push(StrategyProfile {
                            a: axis(params.z_a, i),
                            b: axis(1.0 - params.z_a, j),
                            q1: q,
                            q2: q,
                        });
                    }
                }
                out
            }
        }
    }
}

/// Which best-response machinery produced the equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Naive consumers, no fine: closed-form locations, zero quality.
    ClosedForm,
    /// Security-aware consumers: closed-form quality with a location scan.
    LocationScan,
    /// Naive consumers under a fine that forces compliance everywhere.
    FineClosedForm,
    /// Fine inside a numeric joint search.
    FineNumeric,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::ClosedForm => "closed form",
            Regime::LocationScan => "closed-form quality, scanned location",
            Regime::FineClosedForm => "closed form under fine",
            Regime::FineNumeric => "numeric, outside the analytic fine regime",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumPoint {
    pub profile: StrategyProfile,
    pub prices: PriceVector,
    pub outcome: MarketOutcome,
    pub iterations: usize,
    /// Sup-norm distance between the profile and both undamped best responses.
    pub residual: f64,
    pub converged: bool,
    pub regime: Regime,
    pub clamped: bool,
    pub negative_price: bool,
}

impl EquilibriumPoint {
    pub fn total_utility(&self) -> f64 {
        self.outcome.pi1 + self.outcome.pi2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    pub n_equilibria: usize,
    pub rejected_starts: usize,
    pub regime: Regime,
    pub clamped: bool,
    pub negative_price: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumResult {
    pub mode: Mode,
    pub profile: StrategyProfile,
    pub prices: PriceVector,
    pub outcome: MarketOutcome,
    pub diagnostics: Diagnostics,
    /// Every distinct equilibrium found, in reporting order. Empty when no
    /// start converged.
    pub equilibria: Vec<EquilibriumPoint>,
}

/// True when a vendor's compliance conditions hold at every own offset on
/// the grid and the rival already complies, so the closed-form fine response
/// is exact.
fn fine_closed_form_applies(
    params: &ModelParams,
    policy: &FinePolicy,
    vendor: Vendor,
    opp_offset: f64,
    opp_quality: f64,
    grid_points: usize,
) -> Result<bool> {
    if params.beta != 0.0 || opp_quality < policy.q_min {
        return Ok(false);
    }
    let upper = params
        .max_offset(vendor)
        .min(1.0 - opp_offset - 2.0 * EPS_LOC);
    if upper < 0.0 {
        return Ok(false);
    }
    let n = grid_points.max(2);
    for k in 0..n {
        let own = upper * k as f64 / (n - 1) as f64;
        let (a, b) = match vendor {
            Vendor::One => (own, opp_offset),
            Vendor::Two => (opp_offset, own),
        };
        let c = min_quality_conditions(params, policy, a, b)?;
        let holds = match vendor {
            Vendor::One => c.cond1.holds && c.cond3.holds,
            Vendor::Two => c.cond2.holds && c.cond3_vendor2.holds,
        };
        if !holds {
            return Ok(false);
        }
    }
    Ok(true)
}

/// One vendor's undamped best response `(offset, quality)` and whether the
/// closed-form path produced it.
fn respond(
    params: &ModelParams,
    mode: &Mode,
    vendor: Vendor,
    profile: &StrategyProfile,
    grid_points: usize,
) -> Result<(f64, f64, bool)> {
    let opp = vendor.other();
    let (opp_offset, opp_quality) = (profile.offset(opp), profile.quality(opp));
    match mode {
        Mode::NoFine if params.beta == 0.0 => {
            let (offset, _) = naive_location_best_response(params, vendor, opp_offset)?;
            Ok((offset, 0.0, true))
        }
        Mode::NoFine => {
            let br = joint_best_response_on(params, vendor, opp_offset, opp_quality, grid_points)?;
            Ok((br.location, br.quality, false))
        }
        Mode::WithFine(policy) => {
            if fine_closed_form_applies(
                params,
                policy,
                vendor,
                opp_offset,
                opp_quality,
                grid_points,
            )? {
                let (offset, _) =
                    naive_location_best_response_with_fine(params, policy, vendor, opp_offset)?;
                Ok((offset, policy.q_min, true))
            } else {
                let br = joint_best_response_with_fine(
                    params,
                    policy,
                    vendor,
                    opp_offset,
                    opp_quality,
                    grid_points,
                )?;
                Ok((br.location, br.quality, false))
            }
        }
    }
}

/// Both undamped best responses to `profile`, the largest move either vendor
/// would make, and whether both responses came from closed forms.
fn fixed_point_residual(
    params: &ModelParams,
    mode: &Mode,
    profile: &StrategyProfile,
    grid_points: usize,
) -> Result<(StrategyProfile, f64, bool)> {
    let mut response = *profile;
    let mut analytic = true;
    for v in Vendor::BOTH {
        let (offset, quality, closed) = respond(params, mode, v, profile, grid_points)?;
        response = response.with_choice(v, offset, quality);
        analytic &= closed;
    }
    Ok((response, response.distance(profile), analytic))
}

struct Run {
    profile: StrategyProfile,
    iterations: usize,
    residual: f64,
    converged: bool,
    analytic: bool,
}

fn iterate(
    params: &ModelParams,
    mode: &Mode,
    config: &SolverConfig,
    start: StrategyProfile,
) -> Result<Run> {
    start.validate(params)?;
    let lambda = config.damping;
    let mut x = start;
    let mut residual = f64::INFINITY;
    let mut analytic = false;
    for it in 1..=config.max_iterations {
        let prev = x;
        for v in Vendor::BOTH {
            let (offset, quality, _) = respond(params, mode, v, &x, config.grid_points)?;
            let (o, q) = (x.offset(v), x.quality(v));
            x = x.with_choice(v, o + lambda * (offset - o), q + lambda * (quality - q));
        }
        let step = x.distance(&prev);
        if step <= config.tolerance {
            let response;
            (response, residual, analytic) =
                fixed_point_residual(params, mode, &x, config.grid_points)?;
            if residual < config.tolerance {
                // Damping approaches the fixed point geometrically; one
                // undamped response lands on it when that is closer.
                if let Ok((_, polished, closed)) =
                    fixed_point_residual(params, mode, &response, config.grid_points)
                {
                    if polished <= residual {
                        (x, residual, analytic) = (response, polished, closed);
                    }
                }
                return Ok(Run {
                    profile: x,
                    iterations: it,
                    residual,
                    converged: true,
                    analytic,
                });
            }
        } else {
            residual = step / lambda;
        }
    }
    if residual.is_finite() {
        (_, residual, analytic) = fixed_point_residual(params, mode, &x, config.grid_points)?;
    }
    Ok(Run {
        profile: x,
        iterations: config.max_iterations,
        residual,
        converged: false,
        analytic,
    })
}

fn regime_of(params: &ModelParams, mode: &Mode, analytic: bool) -> Regime {
    match (mode, analytic) {
        (Mode::NoFine, _) if params.beta == 0.0 => Regime::ClosedForm,
        (Mode::NoFine, _) => Regime::LocationScan,
        (Mode::WithFine(_), true) => Regime::FineClosedForm,
        (Mode::WithFine(_), false) => Regime::FineNumeric,
    }
}

/// Stage-2 equilibrium prices and the resulting outcome at a profile.
pub fn settle(
    params: &ModelParams,
    mode: &Mode,
    profile: &StrategyProfile,
) -> Result<(PriceVector, MarketOutcome, bool, bool)> {
    let fines = mode.policy().map_or((0.0, 0.0), |p| fines_for(p, profile));
    let eq = price_equilibrium_with_fines(params, profile, fines)?;
    let (outcome, clamped) = market_outcome(params, profile, &eq.prices, fines)?;
    Ok((eq.prices, outcome, clamped, eq.has_negative_price()))
}

fn point(params: &ModelParams, mode: &Mode, run: &Run) -> Result<EquilibriumPoint> {
    let (prices, outcome, clamped, negative_price) = settle(params, mode, &run.profile)?;
    Ok(EquilibriumPoint {
        profile: run.profile,
        prices,
        outcome,
        iterations: run.iterations,
        residual: run.residual,
        converged: run.converged,
        regime: regime_of(params, mode, run.analytic),
        clamped,
        negative_price,
    })
}

fn profile_order(x: &StrategyProfile, y: &StrategyProfile) -> std::cmp::Ordering {
    [x.a, x.b, x.q1, x.q2]
        .iter()
        .zip([y.a, y.b, y.q1, y.q2].iter())
        .map(|(u, v)| u.total_cmp(v))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

/// Solves the two-stage game by damped best-response iteration.
///
/// Starts that run into co-location are rejected. Converged fixed points
/// within [`DEDUP_DISTANCE`] of each other count once; the rest are sorted by
/// total vendor utility (then by profile). When nothing converges the start
/// with the smallest residual is reported with `converged = false`.
pub fn solve_equilibrium(
    params: &ModelParams,
    mode: &Mode,
    config: &SolverConfig,
) -> Result<EquilibriumResult> {
    params.validate()?;
    config.validate()?;
    if let Some(policy) = mode.policy() {
        policy.validate(params)?;
    }

    let mut runs = Vec::new();
    let mut rejected = 0;
    for start in config.start_profiles(params) {
        match iterate(params, mode, config, start) {
            Ok(run) => runs.push(run),
            Err(GameError::CoLocation { .. }) => rejected += 1,
            Err(e @ GameError::Domain { .. }) if matches!(config.starts, Starts::Profiles(_)) => {
                return Err(e)
            }
            Err(GameError::Domain { .. }) => rejected += 1,
            Err(e) => return Err(e),
        }
    }
    if runs.is_empty() {
        return Err(GameError::CoLocation { gap: 0.0 });
    }

    let mut equilibria: Vec<EquilibriumPoint> = Vec::new();
    for run in runs.iter().filter(|r| r.converged) {
        if equilibria
            .iter()
            .any(|e| e.profile.distance(&run.profile) < DEDUP_DISTANCE)
        {
            continue;
        }
        equilibria.push(point(params, mode, run)?);
    }
    equilibria.sort_by(|x, y| {
        y.total_utility()
            .total_cmp(&x.total_utility())
            .then_with(|| profile_order(&x.profile, &y.profile))
    });

    let head = match equilibria.first() {
        Some(p) => p.clone(),
        None => {
            let closest = runs
                .iter()
                .min_by(|x, y| x.residual.total_cmp(&y.residual))
                .expect("runs is non-empty");
            point(params, mode, closest)?
        }
    };
    Ok(EquilibriumResult {
        mode: *mode,
        profile: head.profile,
        prices: head.prices,
        outcome: head.outcome,
        diagnostics: Diagnostics {
            iterations: head.iterations,
            residual: head.residual,
            converged: head.converged,
            n_equilibria: equilibria.len(),
            rejected_starts: rejected,
            regime: head.regime,
            clamped: head.clamped,
            negative_price: head.negative_price,
        },
        equilibria,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifyTolerances {
    /// Largest grid improvement still accepted as "no profitable deviation".
    pub improvement: f64,
    pub grid: GridSpec,
}

impl Default for CertifyTolerances {
    fn default() -> Self {
        CertifyTolerances {
            improvement: 1e-6,
            grid: GridSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutualBestResponseReport {
    /// Per vendor: best lattice deviation utility minus utility at the profile.
    pub improvements: [f64; 2],
    pub deviations: [GridBestResponse; 2],
    pub certified: bool,
}

/// Checks a profile against exhaustive lattice deviations for both vendors.
pub fn is_mutual_best_response(
    params: &ModelParams,
    mode: &Mode,
    profile: &StrategyProfile,
    tolerances: &CertifyTolerances,
) -> Result<MutualBestResponseReport> {
    profile.validate(params)?;
    let mut improvements = [0.0; 2];
    let mut deviations = Vec::with_capacity(2);
    for v in Vendor::BOTH {
        let opp = v.other();
        let dev = grid_best_response(
            params,
            mode,
            v,
            profile.offset(opp),
            profile.quality(opp),
            &tolerances.grid,
        )?;
        let here = profile_utility(params, mode, v, profile)?;
        improvements[v.index()] = dev.utility - here;
        deviations.push(dev);
    }
    let deviations: [GridBestResponse; 2] = deviations.try_into().expect("two vendors");
    Ok(MutualBestResponseReport {
        improvements,
        deviations,
        certified: improvements.iter().all(|&i| i < tolerances.improvement),
    })
}

/// Whether naive consumers make `a* = b* = 0` the location equilibrium:
/// `C1 <= T / (12 Z_A)` and `C2 <= T / (12 (1 - Z_A))`.
pub fn maximal_differentiation_check(params: &ModelParams) -> Result<bool> {
    if params.beta != 0.0 {
        return Err(GameError::domain(
            "beta",
            params.beta,
            "the maximal-differentiation threshold assumes naive consumers",
        ));
    }
    Ok(12.0 * params.c1 * params.z_a <= params.t
        && 12.0 * params.c2 * (1.0 - params.z_a) <= params.t)
}

#[cfg(test)]
mod tests {
    use super::*;

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
    fn maximal_differentiation_when_customization_is_cheap() {
        let params = naive(1.0, 4.0 / 3.0);
        let res = solve_equilibrium(&params, &Mode::NoFine, &SolverConfig::default()).unwrap();
        assert!(res.diagnostics.converged);
        assert_eq!(
            res.profile,
            StrategyProfile {
                a: 0.0,
                b: 0.0,
                q1: 0.0,
                q2: 0.0
            }
        );
        assert_eq!(res.prices, PriceVector { p1: 8.0, p2: 8.0 });
        assert_eq!(res.diagnostics.n_equilibria, 1);
        assert_eq!(res.diagnostics.regime, Regime::ClosedForm);
    }

    #[test]
    fn threshold_check() {
        assert!(maximal_differentiation_check(&naive(1.0, 1.0)).unwrap());
        assert!(!maximal_differentiation_check(&naive(2.0, 1.0)).unwrap());
        assert!(maximal_differentiation_check(&naive(0.0, 0.0)).unwrap());
        let aware = ModelParams {
            beta: 0.1,
            ..naive(0.0, 0.0)
        };
        assert!(maximal_differentiation_check(&aware).is_err());
    }

    #[test]
    fn fine_with_free_customization_keeps_vendor_two_at_the_edge() {
        let params = naive(0.0, 0.0);
        let policy = FinePolicy::new(10.0, 0.4, &params).unwrap();
        let res =
            solve_equilibrium(&params, &Mode::WithFine(policy), &SolverConfig::default()).unwrap();
        assert!(res.diagnostics.converged);
        assert_eq!(res.profile.b, 0.0);
        assert_eq!((res.profile.q1, res.profile.q2), (0.4, 0.4));
        assert_eq!(res.diagnostics.regime, Regime::FineClosedForm);
        assert_eq!((res.outcome.f1, res.outcome.f2), (0.0, 0.0));
    }

    #[test]
    fn lattice_starts_cover_the_box() {
        let params = ModelParams {
            z_a: 0.4,
            q_max: 2.0,
            ..Default::default()
        };
        let starts = SolverConfig::default().start_profiles(&params);
        assert_eq!(starts.len(), 25);
        assert_eq!(
            starts[0],
            StrategyProfile {
                a: 0.0,
                b: 0.0,
                q1: 1.0,
                q2: 1.0
            }
        );
        let last = starts[24];
        assert!((last.a - 0.4).abs() < 1e-15 && (last.b - 0.6).abs() < 1e-15);
    }

    #[test]
    fn co_located_start_is_rejected() {
        let params = naive(3.0, 3.0);
        let res = solve_equilibrium(&params, &Mode::NoFine, &SolverConfig::default()).unwrap();
        assert_eq!(res.diagnostics.rejected_starts, 1);
        assert!(res.diagnostics.converged);
    }

    #[test]
    fn perturbed_equilibrium_is_not_certified() {
        let params = naive(1.0, 1.0);
        let eq = StrategyProfile {
            a: 0.0,
            b: 0.0,
            q1: 0.0,
            q2: 0.0,
        };
        let tol = CertifyTolerances::default();
        let report = is_mutual_best_response(&params, &Mode::NoFine, &eq, &tol).unwrap();
        assert!(report.certified, "{report:?}");
        let moved = StrategyProfile { a: 0.1, ..eq };
        let report = is_mutual_best_response(&params, &Mode::NoFine, &moved, &tol).unwrap();
        assert!(report.improvements[0] > 0.0);
        assert!(!report.certified);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let cfg = SolverConfig {
            damping: 0.0,
            ..Default::default()
        };
        let err = solve_equilibrium(&naive(1.0, 1.0), &Mode::NoFine, &cfg).unwrap_err();
        assert!(err.is_config());
    }
}
