//! Scenario files, parameter sweeps and tabular output.
//!
//! A scenario is a flat TOML document. Unknown keys are rejected so that a
//! typo fails loudly instead of silently falling back to a default.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{DeviceObservation, ObservedMarket};
use crate::equilibrium::{
    is_mutual_best_response, solve_equilibrium, CertifyTolerances, EquilibriumResult, Mode,
    SolverConfig, Starts,
};
use crate::error::{GameError, Result};
use crate::model::{ModelParams, StrategyProfile};
use crate::oracle::GridSpec;
use crate::regulation::{min_quality_conditions, FinePolicy, QualityConditions};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// `no_fine` (default) or `with_fine`.
    pub mode: Option<String>,
    #[serde(rename = "Z_A")]
    pub z_a: Option<f64>,
    #[serde(rename = "T")]
    pub t: Option<f64>,
    pub beta: Option<f64>,
    #[serde(rename = "C1")]
    pub c1: Option<f64>,
    #[serde(rename = "C2")]
    pub c2: Option<f64>,
    #[serde(rename = "S1")]
    pub s1: Option<f64>,
    #[serde(rename = "S2")]
    pub s2: Option<f64>,
    #[serde(rename = "Q")]
    pub q_max: Option<f64>,
    #[serde(rename = "F")]
    pub fine_rate: Option<f64>,
    pub q_min: Option<f64>,

    pub damping: Option<f64>,
    pub tolerance: Option<f64>,
    pub max_iterations: Option<usize>,
    /// Points per axis of the start lattice.
    pub start_lattice: Option<usize>,
    pub grid_points: Option<usize>,
    /// Certify every sweep row against the lattice oracle (default true).
    pub certify: Option<bool>,
    pub certify_locations: Option<usize>,
    pub certify_qualities: Option<usize>,
    pub certify_tolerance: Option<f64>,

    pub sweep1_param: Option<String>,
    pub sweep1_min: Option<f64>,
    pub sweep1_max: Option<f64>,
    pub sweep1_steps: Option<usize>,
    pub sweep1_values: Option<Vec<f64>>,
    pub sweep2_param: Option<String>,
    pub sweep2_min: Option<f64>,
    pub sweep2_max: Option<f64>,
    pub sweep2_steps: Option<usize>,
    pub sweep2_values: Option<Vec<f64>>,

    pub a: Option<f64>,
    pub b: Option<f64>,
    pub q1: Option<f64>,
    pub q2: Option<f64>,
    pub p1: Option<f64>,
    pub p2: Option<f64>,

    pub v1_vendor_loc: Option<u64>,
    pub v1_thirdparty_loc: Option<u64>,
    pub v1_total_loc: Option<u64>,
    pub v1_customization_vulns: Option<u64>,
    pub v1_price_group: Option<f64>,
    pub v2_vendor_loc: Option<u64>,
    pub v2_thirdparty_loc: Option<u64>,
    pub v2_total_loc: Option<u64>,
    pub v2_customization_vulns: Option<u64>,
    pub v2_price_group: Option<f64>,
    pub max_vulns_in_cohort: Option<u64>,

    /// Monte-Carlo sample count for `verify`.
    pub samples: Option<usize>,
}

fn missing(key: &str) -> GameError {
    GameError::Config(format!("missing key `{key}`"))
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| GameError::Config(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GameError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn params(&self) -> Result<ModelParams> {
        let d = ModelParams::default();
        let params = ModelParams {
            z_a: self.z_a.unwrap_or(d.z_a),
            t: self.t.unwrap_or(d.t),
            beta: self.beta.unwrap_or(d.beta),
            c1: self.c1.unwrap_or(d.c1),
            c2: self.c2.unwrap_or(d.c2),
            s1: self.s1.unwrap_or(d.s1),
            s2: self.s2.unwrap_or(d.s2),
            q_max: self.q_max.unwrap_or(d.q_max),
        };
        params.validate()?;
        Ok(params)
    }

    /// The fine policy, if `F` or `q_min` is given.
    pub fn policy(&self, params: &ModelParams) -> Result<Option<FinePolicy>> {
        match (self.fine_rate, self.q_min) {
            (None, None) => Ok(None),
            (f, q) => FinePolicy::new(f.unwrap_or(0.0), q.unwrap_or(0.0), params).map(Some),
        }
    }

    pub fn mode(&self, params: &ModelParams) -> Result<Mode> {
        match self.mode.as_deref().unwrap_or("no_fine") {
            "no_fine" => Ok(Mode::NoFine),
            "with_fine" => {
                let policy = self.policy(params)?.ok_or_else(|| {
                    GameError::Config("mode `with_fine` needs `F` and `q_min`".into())
                })?;
                Ok(Mode::WithFine(policy))
            }
            other => Err(GameError::Config(format!(
                "unknown mode `{other}` (expected `no_fine` or `with_fine`)"
            ))),
        }
    }

    pub fn solver(&self) -> Result<SolverConfig> {
        let d = SolverConfig::default();
        let config = SolverConfig {
            damping: self.damping.unwrap_or(d.damping),
            tolerance: self.tolerance.unwrap_or(d.tolerance),
            max_iterations: self.max_iterations.unwrap_or(d.max_iterations),
            starts: self.start_lattice.map_or(d.starts, Starts::Lattice),
            grid_points: self.grid_points.unwrap_or(d.grid_points),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn certify_tolerances(&self) -> CertifyTolerances {
        let d = CertifyTolerances::default();
        CertifyTolerances {
            improvement: self.certify_tolerance.unwrap_or(d.improvement),
            grid: GridSpec {
                locations: self.certify_locations.unwrap_or(d.grid.locations),
                qualities: self.certify_qualities.unwrap_or(d.grid.qualities),
            },
        }
    }

    pub fn profile(&self, params: &ModelParams) -> Result<StrategyProfile> {
        StrategyProfile::new(
            params,
            self.a.ok_or_else(|| missing("a"))?,
            self.b.ok_or_else(|| missing("b"))?,
            self.q1.ok_or_else(|| missing("q1"))?,
            self.q2.ok_or_else(|| missing("q2"))?,
        )
    }

    fn has_raw_devices(&self) -> bool {
        self.v1_vendor_loc.is_some() || self.v2_vendor_loc.is_some()
    }

    fn device(&self, which: u8) -> Result<DeviceObservation> {
        let (added, third, total, vulns, price, prefix) = match which {
            1 => (
                self.v1_vendor_loc,
                self.v1_thirdparty_loc,
                self.v1_total_loc,
                self.v1_customization_vulns,
                self.v1_price_group,
                "v1",
            ),
            _ => (
                self.v2_vendor_loc,
                self.v2_thirdparty_loc,
                self.v2_total_loc,
                self.v2_customization_vulns,
                self.v2_price_group,
                "v2",
            ),
        };
        let need = |v: Option<u64>, key: &str| v.ok_or_else(|| missing(&format!("{prefix}_{key}")));
        Ok(DeviceObservation {
            vendor_loc_added: need(added, "vendor_loc")?,
            thirdparty_loc: need(third, "thirdparty_loc")?,
            total_loc: need(total, "total_loc")?,
            customization_vulns: need(vulns, "customization_vulns")?,
            max_vulns_in_cohort: self
                .max_vulns_in_cohort
                .ok_or_else(|| missing("max_vulns_in_cohort"))?,
            price_group: price.ok_or_else(|| missing(&format!("{prefix}_price_group")))?,
        })
    }

    /// The observed market: raw device data when present, otherwise the
    /// quantified `a, b, q1, q2, p1, p2` keys.
    pub fn observed_market(&self) -> Result<ObservedMarket> {
        let z_a = self.z_a.unwrap_or(0.5);
        if self.has_raw_devices() {
            return ObservedMarket::from_devices(&self.device(1)?, &self.device(2)?, z_a);
        }
        Ok(ObservedMarket {
            a: self.a.ok_or_else(|| missing("a"))?,
            b: self.b.ok_or_else(|| missing("b"))?,
            q1: self.q1.ok_or_else(|| missing("q1"))?,
            q2: self.q2.ok_or_else(|| missing("q2"))?,
            p1: self.p1.ok_or_else(|| missing("p1"))?,
            p2: self.p2.ok_or_else(|| missing("p2"))?,
        })
    }

    fn axis(
        &self,
        name: &Option<String>,
        min: Option<f64>,
        max: Option<f64>,
        steps: Option<usize>,
        values: &Option<Vec<f64>>,
        n: u8,
    ) -> Result<Option<SweepAxis>> {
        let Some(name) = name else {
            if min.is_some() || max.is_some() || steps.is_some() || values.is_some() {
                return Err(GameError::Config(format!(
                    "sweep{n} bounds given without `sweep{n}_param`"
                )));
            }
            return Ok(None);
        };
        let param = SweepParam::parse(name)?;
        let values = match (values, min, max, steps) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(lo), Some(hi), Some(steps)) => linspace(lo, hi, steps)?,
            _ => {
                return Err(GameError::Config(format!(
                    "sweep{n} needs either `sweep{n}_values` or all of `sweep{n}_min`, `sweep{n}_max`, `sweep{n}_steps`"
                )))
            }
        };
        if values.len() < 2 {
            return Err(GameError::Config(format!(
                "sweep{n} needs at least 2 points"
            )));
        }
        Ok(Some(SweepAxis { param, values }))
    }

    pub fn sweep_spec(&self) -> Result<SweepSpec> {
        let params = self.params()?;
        let mode = self.mode(&params)?;
        let mut axes = Vec::new();
        let first = self.axis(
            &self.sweep1_param,
            self.sweep1_min,
            self.sweep1_max,
            self.sweep1_steps,
            &self.sweep1_values,
            1,
        )?;
        let second = self.axis(
            &self.sweep2_param,
            self.sweep2_min,
            self.sweep2_max,
            self.sweep2_steps,
            &self.sweep2_values,
            2,
        )?;
        axes.extend(first);
        axes.extend(second);
        let spec = SweepSpec {
            params,
            policy: self.policy(&params)?,
            mode_is_fine: matches!(mode, Mode::WithFine(_)),
            axes,
            solver: self.solver()?,
            certify: self.certify.unwrap_or(true),
            tolerances: self.certify_tolerances(),
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn linspace(lo: f64, hi: f64, steps: usize) -> Result<Vec<f64>> {
    if steps < 2 {
        return Err(GameError::Config("sweep steps must be at least 2".into()));
    }
    Ok((0..steps)
        .map(|k| {
            if k == steps - 1 {
                hi
            } else {
                lo + (hi - lo) * k as f64 / (steps - 1) as f64
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParam {
    ZA,
    T,
    Beta,
    C1,
    C2,
    S1,
    S2,
    Q,
    F,
    QMin,
}

impl SweepParam {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "Z_A" => SweepParam::ZA,
            "T" => SweepParam::T,
            "beta" => SweepParam::Beta,
            "C1" => SweepParam::C1,
            "C2" => SweepParam::C2,
            "S1" => SweepParam::S1,
            "S2" => SweepParam::S2,
            "Q" => SweepParam::Q,
            "F" => SweepParam::F,
            "q_min" => SweepParam::QMin,
            other => {
                return Err(GameError::Config(format!(
                    "`{other}` is not a sweepable parameter"
                )))
            }
        })
    }

    fn apply(
        self,
        params: &mut ModelParams,
        policy: &mut Option<FinePolicy>,
        value: f64,
    ) -> Result<()> {
        match self {
            SweepParam::ZA => params.z_a = value,
            SweepParam::T => params.t = value,
            SweepParam::Beta => params.beta = value,
            SweepParam::C1 => params.c1 = value,
            SweepParam::C2 => params.c2 = value,
            SweepParam::S1 => params.s1 = value,
            SweepParam::S2 => params.s2 = value,
            SweepParam::Q => params.q_max = value,
            SweepParam::F | SweepParam::QMin => {
                let p = policy.as_mut().ok_or_else(|| {
                    GameError::Config("fine parameters swept without a fine policy".into())
                })?;
                if self == SweepParam::F {
                    p.fine_rate = value;
                } else {
                    p.q_min = value;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub params: ModelParams,
    /// Baseline fine policy; used by fine-mode sweeps and by comparisons.
    pub policy: Option<FinePolicy>,
    pub mode_is_fine: bool,
    pub axes: Vec<SweepAxis>,
    pub solver: SolverConfig,
    pub certify: bool,
    pub tolerances: CertifyTolerances,
}

/// One grid point: parameters, policy and the mode to solve in.
#[derive(Debug, Clone, Copy, PartialEq)]
struct GridPoint {
    params: ModelParams,
    policy: Option<FinePolicy>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.axes.len() > 2 {
            return Err(GameError::Config(
                "at most two sweep axes are supported".into(),
            ));
        }
        if self.mode_is_fine && self.policy.is_none() {
            return Err(GameError::Config(
                "fine-mode sweep without `F` and `q_min`".into(),
            ));
        }
        self.solver.validate()?;
        for point in self.points()? {
            point.params.validate()?;
            if let Some(p) = point.policy {
                p.validate(&point.params)?;
            }
        }
        Ok(())
    }

    /// Grid points in lexicographic axis order (first axis outermost).
    fn points(&self) -> Result<Vec<GridPoint>> {
        let base = GridPoint {
            params: self.params,
            policy: self.policy,
        };
        let mut points = vec![base];
        for axis in &self.axes {
            let mut next = Vec::with_capacity(points.len() * axis.values.len());
            for p in &points {
                for &v in &axis.values {
                    let mut q = *p;
                    axis.param.apply(&mut q.params, &mut q.policy, v)?;
                    next.push(q);
                }
            }
            points = next;
        }
        Ok(points)
    }

    fn mode_for(&self, point: &GridPoint, fine: bool) -> Mode {
        match (fine, point.policy) {
            (true, Some(p)) => Mode::WithFine(p),
            _ => Mode::NoFine,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub params: ModelParams,
    pub mode: Mode,
    pub result: Option<EquilibriumResult>,
    /// Oracle certification of the reported equilibrium, when requested.
    pub certified: Option<bool>,
    /// Solver converged and, when requested, the oracle certified the result.
    pub converged: bool,
    pub error: Option<String>,
}

fn solve_point(spec: &SweepSpec, point: &GridPoint, fine: bool) -> SweepRow {
    let mode = spec.mode_for(point, fine);
    let solved = solve_equilibrium(&point.params, &mode, &spec.solver).and_then(|res| {
        let certified = if spec.certify && res.diagnostics.converged {
            Some(
                is_mutual_best_response(&point.params, &mode, &res.profile, &spec.tolerances)?
                    .certified,
            )
        } else {
            None
        };
        Ok((res, certified))
    });
    match solved {
        Ok((res, certified)) => SweepRow {
            params: point.params,
            mode,
            converged: res.diagnostics.converged && certified.unwrap_or(true),
            result: Some(res),
            certified,
            error: None,
        },
        Err(e) => SweepRow {
            params: point.params,
            mode,
            result: None,
            certified: None,
            converged: false,
            error: Some(e.to_string()),
        },
    }
}

fn map_points<T, F>(points: &[GridPoint], jobs: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&GridPoint) -> T + Sync + Send,
{
    match jobs {
        Some(n) if n > 1 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| GameError::Internal(format!("thread pool: {e}")))?;
            Ok(pool.install(|| points.par_iter().map(&f).collect()))
        }
        _ => Ok(points.iter().map(f).collect()),
    }
}

/// Solves every grid point. Rows come back in lexicographic axis order;
/// failed or non-converged points are kept and flagged. `jobs > 1` solves
/// points in parallel without changing the output.
pub fn run_sweep(spec: &SweepSpec, jobs: Option<usize>) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let points = spec.points()?;
    map_points(&points, jobs, |p| solve_point(spec, p, spec.mode_is_fine))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub no_fine: SweepRow,
    pub with_fine: SweepRow,
    /// Compliance conditions at the with-fine equilibrium locations.
    pub conditions: Option<QualityConditions>,
}

impl ComparisonRow {
    fn profiles(&self) -> Option<(&EquilibriumResult, &EquilibriumResult)> {
        Some((
            self.no_fine.result.as_ref()?,
            self.with_fine.result.as_ref()?,
        ))
    }

    /// With-fine minus no-fine `(a, b, p1, p2)`.
    pub fn deltas(&self) -> Option<[f64; 4]> {
        let (n, f) = self.profiles()?;
        Some([
            f.profile.a - n.profile.a,
            f.profile.b - n.profile.b,
            f.prices.p1 - n.prices.p1,
            f.prices.p2 - n.prices.p2,
        ])
    }
}

/// Solves every grid point with and without the spec's fine policy.
/// Only defined for naive consumers.
pub fn compare_fine_no_fine(spec: &SweepSpec, jobs: Option<usize>) -> Result<Vec<ComparisonRow>> {
    spec.validate()?;
    if spec.policy.is_none() {
        return Err(GameError::Config("comparison needs `F` and `q_min`".into()));
    }
    let points = spec.points()?;
    if let Some(p) = points.iter().find(|p| p.params.beta != 0.0) {
        return Err(GameError::domain(
            "beta",
            p.params.beta,
            "the fine comparison assumes naive consumers",
        ));
    }
    map_points(&points, jobs, |p| {
        let no_fine = solve_point(spec, p, false);
        let with_fine = solve_point(spec, p, true);
        let conditions = match (&with_fine.result, &p.policy) {
            (Some(r), Some(policy)) => {
                min_quality_conditions(&p.params, policy, r.profile.a, r.profile.b).ok()
            }
            _ => None,
        };
        ComparisonRow {
            no_fine,
            with_fine,
            conditions,
        }
    })
}

pub const SWEEP_HEADER: &str =
    "mode,C1,C2,T,beta,S1,S2,Q,F,q_min,a,b,q1,q2,p1,p2,D1,D2,f1,f2,pi1,pi2,converged,iterations,n_equilibria";

pub const COMPARISON_HEADER: &str = "C1,C2,T,beta,S1,S2,Q,F,q_min,\
a_nofine,b_nofine,q1_nofine,q2_nofine,p1_nofine,p2_nofine,\
a_fine,b_fine,q1_fine,q2_fine,p1_fine,p2_fine,\
delta_a,delta_b,delta_p1,delta_p2,cond1,cond2,cond3,cond3_vendor2,converged_nofine,converged_fine";

/// Renders a number with 10 significant digits, trailing zeros removed.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{x:.9e}");
    let (mantissa, exp) = sci
        .split_once('e')
        .expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    if (-5..10).contains(&exp) {
        let rounded: f64 = sci.parse().expect("round trip");
        let decimals = (9 - exp).max(0) as usize;
        let s = format!("{rounded:.decimals$}");
        trim_zeros(&s).to_string()
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn policy_cells(mode: &Mode) -> (f64, f64) {
    mode.policy().map_or((0.0, 0.0), |p| (p.fine_rate, p.q_min))
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for row in rows {
        let p = &row.params;
        let (f, q_min) = policy_cells(&row.mode);
        let mut cells: Vec<String> = vec![row.mode.label().into()];
        cells.extend([p.c1, p.c2, p.t, p.beta, p.s1, p.s2, p.q_max, f, q_min].map(fmt_num));
        match &row.result {
            Some(r) => {
                let o = &r.outcome;
                cells.extend(
                    [
                        r.profile.a,
                        r.profile.b,
                        r.profile.q1,
                        r.profile.q2,
                        r.prices.p1,
                        r.prices.p2,
                        o.d1,
                        o.d2,
                        o.f1,
                        o.f2,
                        o.pi1,
                        o.pi2,
                    ]
                    .map(fmt_num),
                );
                cells.push(row.converged.to_string());
                cells.push(r.diagnostics.iterations.to_string());
                cells.push(r.diagnostics.n_equilibria.to_string());
            }
            None => {
                cells.extend(std::iter::repeat_n("NaN".to_string(), 12));
                cells.extend(["false".into(), "0".into(), "0".into()]);
            }
        }
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut out = String::from(COMPARISON_HEADER);
    out.push('\n');
    for row in rows {
        let p = &row.no_fine.params;
        let (f, q_min) = policy_cells(&row.with_fine.mode);
        let mut cells: Vec<String> = [p.c1, p.c2, p.t, p.beta, p.s1, p.s2, p.q_max, f, q_min]
            .map(fmt_num)
            .to_vec();
        for side in [&row.no_fine, &row.with_fine] {
            match &side.result {
                Some(r) => cells.extend(
                    [
                        r.profile.a,
                        r.profile.b,
                        r.profile.q1,
                        r.profile.q2,
                        r.prices.p1,
                        r.prices.p2,
                    ]
                    .map(fmt_num),
                ),
                None => cells.extend(std::iter::repeat_n("NaN".to_string(), 6)),
            }
        }
        match row.deltas() {
            Some(d) => cells.extend(d.map(fmt_num)),
            None => cells.extend(std::iter::repeat_n("NaN".to_string(), 4)),
        }
        match &row.conditions {
            Some(c) => cells
                .extend([c.cond1, c.cond2, c.cond3, c.cond3_vendor2].map(|x| x.holds.to_string())),
            None => cells.extend(std::iter::repeat_n("NaN".to_string(), 4)),
        }
        cells.push(row.no_fine.converged.to_string());
        cells.push(row.with_fine.converged.to_string());
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_formatting() {
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(8.0), "8");
        assert_eq!(fmt_num(0.5), "0.5");
        assert_eq!(fmt_num(1.0 / 3.0), "0.3333333333");
        assert_eq!(fmt_num(-2.0 / 3.0), "-0.6666666667");
        assert_eq!(fmt_num(123456.789012345), "123456.789");
        assert_eq!(fmt_num(9.99999999999), "10");
        assert_eq!(fmt_num(1.5e-7), "1.5e-7");
        assert_eq!(fmt_num(2.5e12), "2.5e12");
        assert_eq!(fmt_num(f64::NAN), "NaN");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = Scenario::from_toml("T = 8.0\nbeta_typo = 1.0\n").unwrap_err();
        assert!(err.is_config());
    }

    #[test]
    fn scenario_parses_params_and_policy() {
        let s = Scenario::from_toml(
            "mode = \"with_fine\"\nT = 8.0\nS1 = 0.602\nF = 10.0\nq_min = 0.4\n",
        )
        .unwrap();
        let params = s.params().unwrap();
        assert_eq!(params.t, 8.0);
        assert_eq!(params.z_a, 0.5);
        assert_eq!(
            s.mode(&params).unwrap(),
            Mode::WithFine(FinePolicy {
                fine_rate: 10.0,
                q_min: 0.4
            })
        );
        let bad = Scenario::from_toml("mode = \"with_fine\"\n").unwrap();
        assert!(bad.mode(&bad.params().unwrap()).is_err());
    }

    #[test]
    fn sweep_axes_in_lexicographic_order() {
        let s = Scenario::from_toml(
            "T = 8.0\nsweep1_param = \"C1\"\nsweep1_values = [0.0, 1.0]\n\
             sweep2_param = \"C2\"\nsweep2_min = 0.0\nsweep2_max = 1.0\nsweep2_steps = 3\n",
        )
        .unwrap();
        let spec = s.sweep_spec().unwrap();
        let pts: Vec<(f64, f64)> = spec
            .points()
            .unwrap()
            .iter()
            .map(|p| (p.params.c1, p.params.c2))
            .collect();
        assert_eq!(
            pts,
            vec![
                (0.0, 0.0),
                (0.0, 0.5),
                (0.0, 1.0),
                (1.0, 0.0),
                (1.0, 0.5),
                (1.0, 1.0)
            ]
        );
    }

    #[test]
    fn invalid_sweeps_fail_before_solving() {
        for text in [
            "sweep1_param = \"X\"\nsweep1_values = [0.0, 1.0]\n",
            "sweep1_param = \"C1\"\nsweep1_values = [0.0]\n",
            "sweep1_param = \"C1\"\nsweep1_min = 0.0\nsweep1_max = 1.0\nsweep1_steps = 1\n",
            "sweep1_param = \"T\"\nsweep1_values = [1.0, -1.0]\n",
            "sweep1_param = \"F\"\nsweep1_values = [1.0, 2.0]\n",
            "sweep1_min = 0.0\n",
        ] {
            let err = Scenario::from_toml(text).unwrap().sweep_spec().unwrap_err();
            assert!(err.is_config(), "{text}: {err}");
        }
    }

    #[test]
    fn two_point_sweep_gives_two_rows() {
        let s = Scenario::from_toml("T = 8.0\nsweep1_param = \"C1\"\nsweep1_values = [0.0, 1.0]\n")
            .unwrap();
        let rows = run_sweep(&s.sweep_spec().unwrap(), None).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.converged));
        let csv = sweep_csv(&rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], SWEEP_HEADER);
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("no_fine,0,0,8,0,0,0,1,0,0,0,0,0,0,8,8,0.5,0.5,0,0,4,4,true,"));
    }

    #[test]
    fn null_policy_changes_nothing() {
        let s = Scenario::from_toml(
            "T = 8.0\nC1 = 2.0\nF = 0.0\nq_min = 0.0\nsweep1_param = \"C2\"\nsweep1_values = [0.0, 2.5]\n",
        )
        .unwrap();
        let rows = compare_fine_no_fine(&s.sweep_spec().unwrap(), None).unwrap();
        for row in rows {
            assert_eq!(row.deltas().unwrap(), [0.0; 4]);
        }
    }
}
