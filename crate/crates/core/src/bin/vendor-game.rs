use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use vendor_game::best_response::{
    joint_best_response_on, joint_best_response_with_fine, naive_location_best_response,
    naive_location_best_response_with_fine, quality_best_response,
};
use vendor_game::calibration::{calibrate, stationarity_residuals};
use vendor_game::demand::{indifference_point, market_shares};
use vendor_game::equilibrium::{is_mutual_best_response, settle, solve_equilibrium, Mode};
use vendor_game::experiments::{
    compare_fine_no_fine, comparison_csv, fmt_num, run_sweep, sweep_csv, Scenario,
};
use vendor_game::oracle::{monte_carlo_share, numeric_derivative_check, DerivativeTarget};
use vendor_game::regulation::min_quality_conditions;
use vendor_game::{GameError, PriceVector, Vendor};

/// Two-vendor customization game: equilibria, calibration and sweeps.
#[derive(Parser)]
#[command(name = "vendor-game", version)]
struct Cli {
    /// Flat TOML scenario; flags below override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for Monte-Carlo checks.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Exit 0 even when some solve did not converge.
    #[arg(long, global = true)]
    allow_nonconverged: bool,
    /// Worker threads for sweeps (sequential by default).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Default)]
struct Overrides {
    /// `no_fine` or `with_fine`.
    #[arg(long, global = true)]
    mode: Option<String>,
    #[arg(long = "z-a", global = true, allow_hyphen_values = true)]
    z_a: Option<f64>,
    #[arg(long = "t", global = true, allow_hyphen_values = true)]
    t: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    beta: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    c1: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    c2: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    s1: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    s2: Option<f64>,
    #[arg(long = "q-max", global = true, allow_hyphen_values = true)]
    q_max: Option<f64>,
    /// Fine rate per unit of quality shortfall.
    #[arg(long, global = true, allow_hyphen_values = true)]
    fine: Option<f64>,
    #[arg(long = "q-min", global = true, allow_hyphen_values = true)]
    q_min: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    a: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    b: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    q1: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    q2: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    p1: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    p2: Option<f64>,
    #[arg(long, global = true)]
    damping: Option<f64>,
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    #[arg(long, global = true)]
    max_iterations: Option<usize>,
    /// Points per axis of the start lattice.
    #[arg(long, global = true)]
    starts: Option<usize>,
    /// Location grid points in the joint best response.
    #[arg(long, global = true)]
    grid_points: Option<usize>,
    /// Skip the lattice certification of solved equilibria.
    #[arg(long, global = true)]
    no_certify: bool,
    /// Monte-Carlo sample count for `verify`.
    #[arg(long, global = true)]
    samples: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Subgame-perfect equilibrium, or stage-2 prices at a fixed profile.
    Solve {
        #[arg(long, value_enum, default_value_t = Stage::Full)]
        stage: Stage,
    },
    /// Recover T, beta and cost coefficients from an observed market.
    Calibrate,
    /// Solve over a one- or two-parameter grid.
    Sweep,
    /// Solve each grid point with and without the fine.
    CompareFine,
    /// Oracle checks at the equilibrium, or diagnostics at a profile.
    Verify {
        /// Best-response diagnostics at the given profile.
        #[arg(long)]
        best_response: bool,
        /// Compliance conditions at the given locations.
        #[arg(long)]
        fine_conditions: bool,
    },
    /// Indifferent consumer and market shares at a profile.
    Demand,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Stage {
    Full,
    Prices,
}

enum Failure {
    Game(GameError),
    NotConverged(String),
    ChecksFailed(String),
    Io(String),
}

impl From<GameError> for Failure {
    fn from(e: GameError) -> Self {
        Failure::Game(e)
    }
}

/// Whether every solve converged and every check passed.
type Outcome = std::result::Result<(String, Status), Failure>;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Status {
    Ok,
    NotConverged,
    ChecksFailed,
}

impl From<bool> for Status {
    fn from(converged: bool) -> Self {
        if converged {
            Status::Ok
        } else {
            Status::NotConverged
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(&cli).and_then(|(text, status)| {
        match &cli.out {
            Some(path) => std::fs::write(path, &text)
                .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?,
            None => print!("{text}"),
        }
        match status {
            Status::NotConverged if !cli.allow_nonconverged => Err(Failure::NotConverged(
                "at least one solve did not converge".into(),
            )),
            Status::ChecksFailed => Err(Failure::ChecksFailed("some oracle checks failed".into())),
            _ => Ok(()),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Game(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 1 })
        }
        Err(Failure::NotConverged(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::ChecksFailed(msg)) | Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn scenario(cli: &Cli) -> Result<Scenario, GameError> {
    let mut s = match &cli.config {
        Some(path) => Scenario::load(path)?,
        None => Scenario::default(),
    };
    let o = &cli.overrides;
    macro_rules! set {
        ($($field:ident <- $flag:ident),* $(,)?) => {
            $(if o.$flag.is_some() { s.$field = o.$flag.clone(); })*
        };
    }
    set!(
        mode <- mode, z_a <- z_a, t <- t, beta <- beta, c1 <- c1, c2 <- c2, s1 <- s1, s2 <- s2,
        q_max <- q_max, fine_rate <- fine, q_min <- q_min, a <- a, b <- b, q1 <- q1, q2 <- q2,
        p1 <- p1, p2 <- p2, damping <- damping, tolerance <- tolerance,
        max_iterations <- max_iterations, start_lattice <- starts, grid_points <- grid_points,
        samples <- samples,
    );
    if o.no_certify {
        s.certify = Some(false);
    }
    Ok(s)
}

fn to_json(value: &impl serde::Serialize) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("plain data serializes");
    text.push('\n');
    text
}

fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn run(cli: &Cli) -> Outcome {
    let s = scenario(cli)?;
    match cli.command {
        Command::Solve { stage: Stage::Full } => solve(cli, &s),
        Command::Solve {
            stage: Stage::Prices,
        } => prices(cli, &s),
        Command::Calibrate => calibrate_cmd(cli, &s),
        Command::Sweep => {
            let rows = run_sweep(&s.sweep_spec()?, cli.jobs)?;
            let ok = rows.iter().all(|r| r.converged);
            let text = match cli.format {
                Format::Csv => sweep_csv(&rows),
                Format::Json => to_json(&rows),
            };
            Ok((text, ok.into()))
        }
        Command::CompareFine => {
            let rows = compare_fine_no_fine(&s.sweep_spec()?, cli.jobs)?;
            let ok = rows
                .iter()
                .all(|r| r.no_fine.converged && r.with_fine.converged);
            let text = match cli.format {
                Format::Csv => comparison_csv(&rows),
                Format::Json => to_json(&rows),
            };
            Ok((text, ok.into()))
        }
        Command::Verify {
            best_response: true,
            ..
        } => best_response_cmd(cli, &s),
        Command::Verify {
            fine_conditions: true,
            ..
        } => fine_conditions_cmd(cli, &s),
        Command::Verify { .. } => verify(cli, &s),
        Command::Demand => demand_cmd(cli, &s),
    }
}

fn solve(cli: &Cli, s: &Scenario) -> Outcome {
    let mut single = s.clone();
    for field in [&mut single.sweep1_param, &mut single.sweep2_param] {
        if field.is_some() {
            return Err(
                GameError::Config("`solve` does not take sweep axes; use `sweep`".into()).into(),
            );
        }
    }
    let rows = run_sweep(&single.sweep_spec()?, None)?;
    let row = &rows[0];
    if let Some(err) = &row.error {
        return Err(Failure::NotConverged(err.clone()));
    }
    let text = match cli.format {
        Format::Csv => sweep_csv(&rows),
        Format::Json => to_json(row),
    };
    Ok((text, row.converged.into()))
}

fn prices(cli: &Cli, s: &Scenario) -> Outcome {
    let params = s.params()?;
    let mode = s.mode(&params)?;
    let profile = s.profile(&params)?;
    let (prices, outcome, clamped, negative) = settle(&params, &mode, &profile)?;
    let text = match cli.format {
        Format::Json => to_json(&json!({
            "mode": mode.label(), "profile": profile, "prices": prices, "outcome": outcome,
            "clamped": clamped, "negative_price": negative,
        })),
        Format::Csv => table(
            &[
                "mode",
                "a",
                "b",
                "q1",
                "q2",
                "p1",
                "p2",
                "D1",
                "D2",
                "f1",
                "f2",
                "pi1",
                "pi2",
                "clamped",
                "negative_price",
            ],
            &[std::iter::once(mode.label().to_string())
                .chain(
                    [
                        profile.a,
                        profile.b,
                        profile.q1,
                        profile.q2,
                        prices.p1,
                        prices.p2,
                        outcome.d1,
                        outcome.d2,
                        outcome.f1,
                        outcome.f2,
                        outcome.pi1,
                        outcome.pi2,
                    ]
                    .map(fmt_num),
                )
                .chain([clamped.to_string(), negative.to_string()])
                .collect()],
        ),
    };
    Ok((text, Status::Ok))
}

fn calibrate_cmd(cli: &Cli, s: &Scenario) -> Outcome {
    let obs = s.observed_market()?;
    let z_a = s.z_a.unwrap_or(0.5);
    let constants = calibrate(&obs, z_a)?;
    let residuals = stationarity_residuals(&constants.params(z_a, s.q_max.unwrap_or(1.0)), &obs)?;
    let text = match cli.format {
        Format::Json => {
            to_json(&json!({ "observed": obs, "constants": constants, "residuals": residuals }))
        }
        Format::Csv => table(
            &[
                "a",
                "b",
                "q1",
                "q2",
                "p1",
                "p2",
                "T",
                "beta",
                "S1",
                "C1",
                "S2",
                "C2",
                "max_residual",
            ],
            &[[
                obs.a,
                obs.b,
                obs.q1,
                obs.q2,
                obs.p1,
                obs.p2,
                constants.t,
                constants.beta,
                constants.s1,
                constants.c1,
                constants.s2,
                constants.c2,
                residuals.max_abs(),
            ]
            .map(fmt_num)
            .to_vec()],
        ),
    };
    Ok((text, Status::Ok))
}

fn demand_cmd(cli: &Cli, s: &Scenario) -> Outcome {
    let params = s.params()?;
    let profile = s.profile(&params)?;
    let prices = match (s.p1, s.p2) {
        (Some(p1), Some(p2)) => PriceVector { p1, p2 },
        (None, None) => settle(&params, &s.mode(&params)?, &profile)?.0,
        _ => return Err(GameError::Config("give both `p1` and `p2` or neither".into()).into()),
    };
    let x = indifference_point(&params, &profile, &prices)?;
    let shares = market_shares(&params, &profile, &prices)?;
    let text = match cli.format {
        Format::Json => {
            to_json(&json!({ "prices": prices, "indifferent_consumer": x, "shares": shares }))
        }
        Format::Csv => table(
            &["p1", "p2", "x", "D1", "D2", "clamped"],
            &[[prices.p1, prices.p2, x, shares.d1, shares.d2]
                .map(fmt_num)
                .into_iter()
                .chain([shares.clamped.to_string()])
                .collect()],
        ),
    };
    Ok((text, Status::Ok))
}

fn fine_conditions_cmd(cli: &Cli, s: &Scenario) -> Outcome {
    let params = s.params()?;
    let policy = s
        .policy(&params)?
        .ok_or_else(|| GameError::Config("fine conditions need `F` and `q_min`".into()))?;
    let a =
        s.a.ok_or_else(|| GameError::Config("missing key `a`".into()))?;
    let b =
        s.b.ok_or_else(|| GameError::Config("missing key `b`".into()))?;
    let c = min_quality_conditions(&params, &policy, a, b)?;
    let text = match cli.format {
        Format::Json => {
            to_json(&json!({ "a": a, "b": b, "conditions": c, "all_hold": c.all_hold() }))
        }
        Format::Csv => table(
            &["condition", "holds", "slack"],
            &[
                ("cond1", c.cond1),
                ("cond2", c.cond2),
                ("cond3", c.cond3),
                ("cond3_vendor2", c.cond3_vendor2),
            ]
            .map(|(name, k)| vec![name.to_string(), k.holds.to_string(), fmt_num(k.slack)]),
        ),
    };
    Ok((text, Status::Ok))
}

fn best_response_cmd(cli: &Cli, s: &Scenario) -> Outcome {
    let params = s.params()?;
    let mode = s.mode(&params)?;
    let profile = s.profile(&params)?;
    let grid = s
        .grid_points
        .unwrap_or(vendor_game::best_response::DEFAULT_GRID_POINTS);
    let mut records = Vec::new();
    for v in Vendor::BOTH {
        let opp = v.other();
        let (opp_loc, opp_q) = (profile.offset(opp), profile.quality(opp));
        let joint = match &mode {
            Mode::NoFine => joint_best_response_on(&params, v, opp_loc, opp_q, grid)?,
            Mode::WithFine(p) => {
                joint_best_response_with_fine(&params, p, v, opp_loc, opp_q, grid)?
            }
        };
        let quality = match mode {
            Mode::NoFine => {
                Some(quality_best_response(&params, v, profile.offset(v), opp_loc, opp_q)?.1)
            }
            Mode::WithFine(_) => None,
        };
        let location = if params.beta == 0.0 {
            Some(
                match &mode {
                    Mode::NoFine => naive_location_best_response(&params, v, opp_loc)?,
                    Mode::WithFine(p) => {
                        naive_location_best_response_with_fine(&params, p, v, opp_loc)?
                    }
                }
                .1,
            )
        } else {
            None
        };
        records.push((v, joint, quality, location));
    }
    let text = match cli.format {
        Format::Json => to_json(&Value::Array(
            records
                .iter()
                .map(|(v, joint, quality, location)| {
                    json!({ "vendor": v.index() + 1, "joint": joint, "quality": quality, "location": location })
                })
                .collect(),
        )),
        Format::Csv => table(
            &["vendor", "location", "quality", "utility", "price", "quality_case", "q_bar", "location_case"],
            &records
                .iter()
                .map(|(v, joint, quality, location)| {
                    vec![
                        (v.index() + 1).to_string(),
                        fmt_num(joint.location),
                        fmt_num(joint.quality),
                        fmt_num(joint.utility),
                        fmt_num(joint.price),
                        quality.as_ref().map_or(String::new(), |d| format!("{:?}", d.case_tag)),
                        quality.as_ref().and_then(|d| d.q_bar).map_or(String::new(), fmt_num),
                        location.as_ref().map_or(String::new(), |d| format!("{:?}", d.case)),
                    ]
                })
                .collect::<Vec<_>>(),
        ),
    };
    Ok((text, Status::Ok))
}

/// Solves the scenario and checks the result against the independent oracle.
fn verify(cli: &Cli, s: &Scenario) -> Outcome {
    let params = s.params()?;
    let mode = s.mode(&params)?;
    let res = solve_equilibrium(&params, &mode, &s.solver()?)?;
    let profile = res.profile;
    let mut checks: Vec<(String, f64, f64, bool)> = Vec::new();

    let report = is_mutual_best_response(&params, &mode, &profile, &s.certify_tolerances())?;
    for v in Vendor::BOTH {
        let gain = report.improvements[v.index()];
        checks.push((
            format!("lattice_improvement_{}", v.index() + 1),
            gain,
            s.certify_tolerances().improvement,
            gain <= s.certify_tolerances().improvement,
        ));
    }
    for v in Vendor::BOTH {
        let c = numeric_derivative_check(
            &params,
            &mode,
            DerivativeTarget::PriceFoc(v),
            &profile,
            None,
        )?;
        checks.push((
            format!("price_foc_{}", v.index() + 1),
            c.relative_error,
            1e-4,
            c.relative_error <= 1e-4,
        ));
    }
    let samples = s.samples.unwrap_or(100_000);
    let mc = monte_carlo_share(&params, &profile, &res.prices, samples, cli.seed)?;
    let gap = (mc.share - res.outcome.d1).abs();
    let bound = 3.0 * mc.std_error + 1.0 / samples as f64;
    checks.push(("monte_carlo_share_1".into(), gap, bound, gap <= bound));

    let all = checks.iter().all(|c| c.3);
    let text = match cli.format {
        Format::Json => to_json(&json!({
            "equilibrium": res,
            "checks": checks.iter().map(|(n, v, t, ok)| json!({"check": n, "value": v, "tolerance": t, "pass": ok})).collect::<Vec<_>>(),
        })),
        Format::Csv => table(
            &["check", "value", "tolerance", "pass"],
            &checks
                .iter()
                .map(|(n, v, t, ok)| vec![n.clone(), fmt_num(*v), fmt_num(*t), ok.to_string()])
                .collect::<Vec<_>>(),
        ),
    };
    let status = if !res.diagnostics.converged {
        Status::NotConverged
    } else if all {
        Status::Ok
    } else {
        Status::ChecksFailed
    };
    Ok((text, status))
}
