//! End-to-end runs of the `vendor-game` binary.

use std::io::Write;
use std::process::{Command, Output};

use tempfile::{NamedTempFile, TempDir};

use vendor_game::experiments::{COMPARISON_HEADER, SWEEP_HEADER};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vendor-game"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn scenario(text: &str) -> NamedTempFile {
    let mut f = NamedTempFile::new().unwrap();
    f.write_all(text.as_bytes()).unwrap();
    f
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn solve_prints_one_csv_row() {
    let out = run(&["--t", "8", "solve"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], SWEEP_HEADER);
    assert!(lines[1].starts_with("no_fine,0,0,8,0,0,0,1,0,0,0,0,0,0,8,8,0.5,0.5,0,0,4,4,true,"));
}

#[test]
fn config_file_and_flags_combine() {
    let cfg =
        scenario("mode = \"with_fine\"\nT = 8.0\nS1 = 0.602\nS2 = 1.54\nF = 10.0\nq_min = 0.4\n");
    let out = run(&[
        "--config",
        cfg.path().to_str().unwrap(),
        "--c1",
        "1",
        "--c2",
        "1",
        "--format",
        "json",
        "solve",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let row: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(row["converged"], true);
    let profile = &row["result"]["profile"];
    assert!((profile["q1"].as_f64().unwrap() - 0.4).abs() < 1e-9);
    assert!((profile["q2"].as_f64().unwrap() - 0.4).abs() < 1e-9);
    assert_eq!(row["params"]["C1"], 1.0);
}

#[test]
fn sweep_writes_to_the_output_file_deterministically() {
    let cfg = scenario("T = 8.0\nsweep1_param = \"C1\"\nsweep1_values = [0.0, 2.0]\nsweep2_param = \"C2\"\nsweep2_values = [0.0, 2.0]\n");
    let dir = TempDir::new().unwrap();
    let serial = dir.path().join("serial.csv");
    let parallel = dir.path().join("parallel.csv");
    let path = cfg.path().to_str().unwrap();
    assert_eq!(
        run(&["--config", path, "--out", serial.to_str().unwrap(), "sweep"])
            .status
            .code(),
        Some(0)
    );
    assert_eq!(
        run(&[
            "--config",
            path,
            "--out",
            parallel.to_str().unwrap(),
            "--jobs",
            "4",
            "sweep"
        ])
        .status
        .code(),
        Some(0)
    );
    let a = std::fs::read(&serial).unwrap();
    assert_eq!(a, std::fs::read(&parallel).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().count(), 5);
    let c1_c2: Vec<String> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').skip(1).take(2).collect::<Vec<_>>().join(","))
        .collect();
    assert_eq!(c1_c2, ["0,0", "0,2", "2,0", "2,2"]);
}

#[test]
fn compare_fine_reports_both_regimes() {
    let cfg = scenario(
        "T = 8.0\nS1 = 0.602\nS2 = 1.54\nF = 10.0\nq_min = 0.4\nC1 = 1.0\nsweep1_param = \"C2\"\nsweep1_values = [0.0, 1.0]\n",
    );
    let out = run(&["--config", cfg.path().to_str().unwrap(), "compare-fine"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = stdout(&out);
    assert_eq!(text.lines().next().unwrap(), COMPARISON_HEADER);
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn calibrate_from_raw_devices() {
    let cfg = scenario(
        "v1_vendor_loc = 7354468\nv1_thirdparty_loc = 7550704\nv1_total_loc = 19000000\nv1_customization_vulns = 10\nv1_price_group = 4.0\n\
         v2_vendor_loc = 5660569\nv2_thirdparty_loc = 5334152\nv2_total_loc = 17000000\nv2_customization_vulns = 33\nv2_price_group = 4.0\n\
         max_vulns_in_cohort = 40\n",
    );
    let out = run(&[
        "--config",
        cfg.path().to_str().unwrap(),
        "--format",
        "json",
        "calibrate",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["observed"]["q1"], 0.75);
    assert_eq!(v["observed"]["q2"], 0.175);
    assert!(v["residuals"]["quality1"].as_f64().unwrap().abs() < 1e-9);
}

#[test]
fn calibrate_from_quantified_market() {
    let out = run(&[
        "--a",
        "0.1203",
        "--b",
        "0.1830",
        "--q1",
        "0.75",
        "--q2",
        "0.175",
        "--p1",
        "4",
        "--p2",
        "4",
        "calibrate",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let t: f64 = row[6].parse().unwrap();
    assert!((t - 5.7414).abs() < 1e-3);
}

#[test]
fn price_stage_and_demand_agree() {
    let profile = [
        "--t", "8", "--a", "0.1", "--b", "0.2", "--q1", "0", "--q2", "0",
    ];
    let prices = stdout(&run(
        &[&profile[..], &["solve", "--stage", "prices"]].concat()
    ));
    let demand = stdout(&run(&[&profile[..], &["demand"]].concat()));
    let p: Vec<&str> = prices.lines().nth(1).unwrap().split(',').collect();
    let d: Vec<&str> = demand.lines().nth(1).unwrap().split(',').collect();
    assert_eq!((p[5], p[6], p[7]), (d[0], d[1], d[3]));
}

#[test]
fn verify_subcommands() {
    let base = [
        "--t", "8", "--c1", "1", "--c2", "1", "--beta", "0.5", "--s1", "1", "--s2", "1",
    ];
    let out = run(&[&base[..], &["--samples", "20000", "verify"]].concat());
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).lines().skip(1).all(|l| l.ends_with(",true")));

    let out = run(&[
        &base[..],
        &[
            "--a",
            "0.1",
            "--b",
            "0.2",
            "--q1",
            "0.5",
            "--q2",
            "0.5",
            "verify",
            "--best-response",
        ],
    ]
    .concat());
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).lines().count(), 3);

    let out = run(&[
        "--t",
        "8",
        "--c1",
        "1",
        "--fine",
        "10",
        "--q-min",
        "0.4",
        "--a",
        "0",
        "--b",
        "0",
        "verify",
        "--fine-conditions",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("cond3_vendor2,true"));
}

#[test]
fn config_errors_exit_with_two() {
    assert_eq!(run(&["--t", "-1", "solve"]).status.code(), Some(2));
    assert_eq!(
        run(&["--mode", "sometimes", "solve"]).status.code(),
        Some(2)
    );
    assert_eq!(run(&["solve", "--stage", "prices"]).status.code(), Some(2));
    let typo = scenario("T = 8.0\nbta = 0.5\n");
    assert_eq!(
        run(&["--config", typo.path().to_str().unwrap(), "solve"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&["--config", "/nonexistent/scenario.toml", "solve"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&[
            "--t",
            "8",
            "--beta",
            "1",
            "compare-fine",
            "--fine",
            "1",
            "--q-min",
            "0.2"
        ])
        .status
        .code(),
        Some(2)
    );
}

#[test]
fn nonconvergence_exits_with_three_unless_allowed() {
    let args = [
        "--t",
        "8",
        "--c1",
        "1",
        "--max-iterations",
        "1",
        "--starts",
        "1",
        "solve",
    ];
    let out = run(&args);
    assert_eq!(out.status.code(), Some(3));
    assert!(stdout(&out).contains(",false,"));
    let allowed = run(&[&["--allow-nonconverged"][..], &args[..]].concat());
    assert_eq!(allowed.status.code(), Some(0));
}

#[test]
fn shipped_scenarios_load() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let s = vendor_game::experiments::Scenario::load(&path).unwrap();
        let usable =
            s.sweep_spec().is_ok() && (s.sweep1_param.is_some() || s.observed_market().is_ok());
        assert!(usable, "{}", path.display());
        seen += 1;
    }
    assert!(seen >= 5);
}
