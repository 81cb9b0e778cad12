//! End-to-end tests of the command line binary, including the final
//! acceptance criterion: byte-identical output for identical invocations.
//! Every test spawns the real binary and checks exit codes and output.

use std::process::{Command, Output};

use serde_json::Value;

use renyi_maxent_cli::canonical_json;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_renyi-maxent"));
    // Keep the ambient environment from influencing thread selection.
    cmd.env_remove("RENYI_MAXENT_THREADS");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary should spawn")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal expected")
}

fn stdout_str(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout is UTF-8")
}

fn parse(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("stdout is not JSON ({e}): {:?}", stdout_str(out));
    })
}

fn field(v: &Value, key: &str) -> f64 {
    v[key].as_f64().unwrap_or_else(|| panic!("field {key} missing or non-numeric in {v}"))
}

#[test]
fn criterion_9_solve_output_is_byte_identical_across_runs() {
    let args =
        ["solve", "--ref", "uniform:0,1", "--alpha", "0.5", "--kind", "G", "--m", "0.7"];
    let first = run(&args);
    let second = run(&args);
    assert_eq!(code(&first), 0, "stderr: {}", String::from_utf8_lossy(&first.stderr));
    assert_eq!(code(&second), 0);
    let verdict = if first.stdout == second.stdout { "PASS" } else { "FAIL" };
    println!("criterion 9 (cli determinism): {verdict} ({} bytes)", first.stdout.len());
    assert_eq!(first.stdout, second.stdout, "two identical invocations must emit equal bytes");
}

#[test]
fn json_report_round_trips_through_parse_and_reserialize() {
    let out = run(&[
        "solve", "--ref", "exponential:1", "--alpha", "0.8", "--kind", "C", "--m", "0.9",
    ]);
    assert_eq!(code(&out), 0);
    let value = parse(&out);
    assert_eq!(
        canonical_json(&value).into_bytes(),
        out.stdout,
        "parsing and re-serializing must reproduce the emitted bytes"
    );
}

#[test]
fn solve_at_the_reference_mean_is_the_untilted_solution() {
    let out = run(&[
        "solve", "--ref", "uniform:0,1", "--alpha", "0.5", "--kind", "C", "--m", "0.5",
    ]);
    assert_eq!(code(&out), 0);
    let v = parse(&out);
    assert!(field(&v, "gamma_star").abs() <= 1e-6, "gamma_star: {v}");
    assert!(field(&v, "divergence").abs() <= 1e-9, "divergence: {v}");
    assert!((field(&v, "achieved_mean") - 0.5).abs() <= 1e-6);
    assert_eq!(v["kind"], "C");
    assert_eq!(v["density_samples"].as_array().unwrap().len(), 512);
}

#[test]
fn generalized_solve_meets_its_escort_constraint() {
    let out = run(&[
        "solve", "--ref", "uniform:0,1", "--alpha", "0.5", "--kind", "G", "--m", "0.7",
        "--format", "json",
    ]);
    assert_eq!(code(&out), 0);
    let v = parse(&out);
    assert!((field(&v, "achieved_mean") - 0.7).abs() <= 1e-6, "achieved_mean: {v}");
    assert_eq!(v["kind"], "G");
    // ξ = 1/(α−1) and the multiplier of the generalized kind is ξ·γ*.
    assert!((field(&v, "xi") + 2.0).abs() <= 1e-12);
    let expected_lambda = -2.0 * field(&v, "gamma_star");
    assert!((field(&v, "lambda") - expected_lambda).abs() <= 1e-12);
}

#[test]
fn explicit_gamma_range_is_honored() {
    let out = run(&[
        "solve", "--ref", "uniform:0,1", "--alpha", "0.5", "--kind", "C", "--m", "0.55",
        "--gamma-lo", "-1.5", "--gamma-hi", "1.5",
    ]);
    assert_eq!(code(&out), 0);
    let v = parse(&out);
    let g = field(&v, "gamma_star");
    assert!((-1.5..=1.5).contains(&g));
    assert!((field(&v, "achieved_mean") - 0.55).abs() <= 1e-6);
}

#[test]
fn usage_problems_exit_with_code_1() {
    let order_one = run(&[
        "solve", "--ref", "uniform:0,1", "--alpha", "1.0", "--kind", "C", "--m", "0.5",
    ]);
    assert_eq!(code(&order_one), 1, "order 1 is excluded");

    let bad_family = run(&[
        "solve", "--ref", "cauchy:0,1", "--alpha", "0.5", "--kind", "C", "--m", "0.5",
    ]);
    assert_eq!(code(&bad_family), 1);

    let missing_file = run(&[
        "solve", "--ref", "@/no/such/file", "--alpha", "0.5", "--kind", "C", "--m", "0.5",
    ]);
    assert_eq!(code(&missing_file), 1);

    let half_range = run(&[
        "solve", "--ref", "uniform:0,1", "--alpha", "0.5", "--kind", "C", "--m", "0.5",
        "--gamma-lo", "-1.0",
    ]);
    assert_eq!(code(&half_range), 1, "half a gamma range is a usage error");

    let missing_flag = run(&["solve", "--ref", "uniform:0,1", "--alpha", "0.5"]);
    assert_eq!(code(&missing_flag), 1, "clap errors must map to exit 1");

    let unknown_suite = run(&["verify", "--suite", "nonexistent"]);
    assert_eq!(code(&unknown_suite), 1);

    let bad_threads = bin()
        .args(["solve", "--ref", "uniform:0,1", "--alpha", "0.5", "--kind", "C", "--m", "0.5"])
        .env("RENYI_MAXENT_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(bad_threads.status.code().unwrap(), 1);

    let small_grid = run(&[
        "sweep", "--ref", "uniform:0,1", "--alpha", "0.5", "--kind", "C", "--m", "0.5",
        "--gamma-lo", "-1", "--gamma-hi", "1", "--n", "10",
    ]);
    assert_eq!(code(&small_grid), 1, "sweep grids below 64 points are rejected");
}

#[test]
fn computational_failures_exit_with_code_2() {
    let unattainable = run(&[
        "solve", "--ref", "uniform:0,1", "--alpha", "0.5", "--kind", "C", "--m", "1.5",
    ]);
    assert_eq!(code(&unattainable), 2);
    let msg = String::from_utf8_lossy(&unattainable.stderr).to_string();
    assert!(msg.contains("unattainable"), "stderr names the failure: {msg}");

    let undefined_range = run(&[
        "sweep", "--ref", "uniform:0,1", "--alpha", "0.5", "--kind", "C", "--m", "0.5",
        "--gamma-lo", "3", "--gamma-hi", "8", "--n", "64",
    ]);
    assert_eq!(code(&undefined_range), 2, "a fully undefined dual grid is a compute failure");
}

#[test]
fn help_and_version_exit_cleanly() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
    assert_eq!(code(&run(&["solve", "--help"])), 0);
}

#[test]
fn sweep_reports_a_monotone_mean_on_the_central_interval() {
    let out = run(&[
        "sweep", "--ref", "uniform:0,1", "--alpha", "0.5", "--kind", "C", "--m", "0.5",
        "--gamma-lo", "-3", "--gamma-hi", "3", "--n", "64",
    ]);
    assert_eq!(code(&out), 0);
    let v = parse(&out);
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 64);

    // The bracket zero 0.5 − 1/γ enters [0, 1] at |γ| = 2, so exactly the
    // grid points strictly inside (−2, 2) carry a defined dual.
    let defined: Vec<&Value> = rows.iter().filter(|r| r["defined"] == true).collect();
    assert!(!defined.is_empty());
    let intervals = v["intervals"].as_array().unwrap();
    assert_eq!(intervals.len(), 1);
    assert!((intervals[0][0].as_f64().unwrap() + 2.0).abs() <= 1e-6);
    assert!((intervals[0][1].as_f64().unwrap() - 2.0).abs() <= 1e-6);

    let means: Vec<f64> =
        defined.iter().map(|r| r["mean_classical"].as_f64().expect("defined row has mean")).collect();
    assert!(
        means.windows(2).all(|w| w[0] > w[1]),
        "constraint mean must be strictly monotone across the central interval"
    );
    assert_eq!(v["non_injective"], false);
    assert_eq!(v["coincident_pairs_total"], 0);

    // The refined maximum of the centered problem is the untilted point.
    let maxima = v["maxima"].as_array().unwrap();
    assert_eq!(maxima.len(), 1);
    assert!(maxima[0]["gamma"].as_f64().unwrap().abs() <= 1e-6);
    assert_eq!(v["selected"], 0);
}

#[test]
fn sweep_on_an_unbounded_reference_emits_a_full_table() {
    let out = run(&[
        "sweep", "--ref", "gamma:1.2,1", "--alpha", "0.5", "--kind", "G", "--m", "1.2",
        "--gamma-lo", "-1", "--gamma-hi", "1", "--n", "64",
    ]);
    assert_eq!(code(&out), 0);
    let v = parse(&out);
    assert_eq!(v["rows"].as_array().unwrap().len(), 64);
    assert!(v["non_injective"].is_boolean());
}

#[test]
fn sweep_csv_has_metadata_header_and_rows() {
    let out = run(&[
        "sweep", "--ref", "uniform:0,1", "--alpha", "0.5", "--kind", "C", "--m", "0.5",
        "--gamma-lo", "-3", "--gamma-hi", "3", "--n", "64", "--format", "csv",
    ]);
    assert_eq!(code(&out), 0);
    let text = stdout_str(&out);
    let lines: Vec<&str> = text.lines().collect();
    let header = lines
        .iter()
        .position(|l| *l == "gamma,dual,Z,mean_classical,mean_generalized,defined")
        .expect("header row present");
    let data: Vec<&&str> =
        lines[header + 1..].iter().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data.len(), 64);
    // 12 significant digits: one leading digit plus 11 decimals.
    let gamma = data[0].split(',').next().unwrap();
    let mantissa = gamma.trim_start_matches('-').split('e').next().unwrap();
    assert_eq!(mantissa.len(), 13, "d.ddddddddddd expected, got {gamma}");
    assert!(text.contains("# selected="));
    assert!(text.contains("# non_injective="));
}

#[test]
fn tabulated_references_load_through_the_file_spec() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("density.tsv");
    let mut rows = String::from("# piecewise-linear test density\n");
    for i in 0..=16 {
        let x = i as f64 / 16.0;
        rows += &format!("{x}\t{}\n", 0.5 + x);
    }
    std::fs::write(&path, rows).unwrap();
    let spec = format!("@{}", path.display());

    let out = run(&["solve", "--ref", &spec, "--alpha", "0.5", "--kind", "C", "--m", "0.6"]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let v = parse(&out);
    assert!((field(&v, "achieved_mean") - 0.6).abs() <= 1e-6);
    assert!(v["reference"].as_str().unwrap().starts_with("tabulated"));

    let malformed = dir.path().join("broken.tsv");
    std::fs::write(&malformed, "0.0 1.0\nnot numbers\n").unwrap();
    let bad = run(&[
        "solve", "--ref", &format!("@{}", malformed.display()), "--alpha", "0.5", "--kind",
        "C", "--m", "0.5",
    ]);
    assert_eq!(code(&bad), 1);
}

#[test]
fn output_file_flag_redirects_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let out = run(&[
        "divergence", "--ref", "gaussian:0,1", "--ref2", "gaussian:0.5,1", "--alpha", "0.5",
        "--out", path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty(), "report must go to the file, not stdout");
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert!((field(&v, "renyi") - 0.0625).abs() <= 1e-6);
}

#[test]
fn divergences_match_the_gaussian_closed_forms() {
    // Equal-variance normals: Rényi = α Δ²/2, KL = Δ²/2,
    // Tsallis = (exp((α−1) α Δ²/2) − 1)/(α−1), here Δ = 1/2 and α = 1/2.
    let out = run(&[
        "divergence", "--ref", "gaussian:0,1", "--ref2", "gaussian:0.5,1", "--alpha", "0.5",
    ]);
    assert_eq!(code(&out), 0);
    let v = parse(&out);
    assert!((field(&v, "renyi") - 0.0625).abs() <= 1e-9, "renyi: {v}");
    assert!((field(&v, "kl") - 0.125).abs() <= 1e-9, "kl: {v}");
    let tsallis_expected = ((-0.5f64 * 0.0625).exp() - 1.0) / (-0.5);
    assert!((field(&v, "tsallis") - tsallis_expected).abs() <= 1e-9, "tsallis: {v}");
}

#[test]
fn duality_command_confirms_the_order_inversion() {
    let out = run(&["duality", "--alpha", "2", "--m", "0.6"]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let v = parse(&out);
    assert_eq!(v["pass"], true);
    assert!(field(&v, "gamma_gap") <= 1e-6);
    assert!(field(&v, "escort_gap_c_to_g") <= 1e-6);
    assert!(field(&v, "escort_gap_g_to_c") <= 1e-6);
    assert!(field(&v, "divergence_gap") <= 1e-8);
    assert!((field(&v, "alpha_classical") - 0.5).abs() <= 1e-12);
    assert!((field(&v, "alpha_generalized") - 2.0).abs() <= 1e-12);

    // Passing the classical order of the same pair names the same problem.
    let inverted = run(&["duality", "--alpha", "0.5", "--m", "0.6"]);
    assert_eq!(code(&inverted), 0);
    assert_eq!(out.stdout, inverted.stdout, "α and 1/α select the same pair");
}

#[test]
fn thermo_command_reports_passing_legendre_residuals() {
    let out = run(&[
        "thermo", "--ref", "uniform:0,1", "--alpha", "0.5", "--kind", "C", "--m-lo", "0.55",
        "--m-hi", "0.63", "--points", "9",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let v = parse(&out);
    assert_eq!(v["pass"], true);
    assert_eq!(v["triples"], 7);
    assert_eq!(v["rows"].as_array().unwrap().len(), 9);
    let tol = field(&v, "tolerance");
    for key in
        ["residual_euler", "residual_ds_dx", "residual_dphi_dlam", "residual_dphi_dx"]
    {
        assert!(field(&v, key) <= tol, "{key} over budget: {v}");
    }
    // Means above the reference mean force negative multipliers.
    assert_eq!(v["lambda_all_positive"], false);

    let degenerate = run(&[
        "thermo", "--ref", "uniform:0,1", "--alpha", "0.5", "--kind", "C", "--m-lo", "0.55",
        "--m-hi", "0.63", "--points", "3",
    ]);
    assert_eq!(code(&degenerate), 1, "families below five points are a usage error");
}

#[test]
fn verify_single_suites_pass_quickly() {
    for suite in ["normalization", "solutions", "duality"] {
        let out = run(&["verify", "--suite", suite]);
        assert_eq!(code(&out), 0, "suite {suite}: {}", stdout_str(&out));
        let text = stdout_str(&out);
        assert!(text.contains(&format!("suite {suite}: PASS")), "{text}");
        assert!(text.contains("verification: all 1 suite(s) pass"), "{text}");
    }
}

#[test]
fn verify_narrowed_duality_accepts_an_explicit_pair() {
    let out = run(&["verify", "--suite", "duality", "--alpha", "2", "--m", "0.6"]);
    assert_eq!(code(&out), 0, "{}", stdout_str(&out));
    let text = stdout_str(&out);
    assert!(text.contains("suite duality: PASS (3 cases"), "{text}");

    let misapplied = run(&["verify", "--suite", "normalization", "--alpha", "2"]);
    assert_eq!(code(&misapplied), 1, "narrowing flags only fit the duality suite");
}

#[test]
fn verify_default_run_passes_every_suite() {
    let out = run(&["verify"]);
    let text = stdout_str(&out);
    assert_eq!(code(&out), 0, "default verify failed:\n{text}");
    for suite in [
        "normalization",
        "convexity",
        "solutions",
        "oracle",
        "duality",
        "legendre",
        "classical-limit",
        "theta",
    ] {
        assert!(text.contains(&format!("suite {suite}: PASS")), "missing {suite}:\n{text}");
    }
    assert!(text.contains("verification: all 8 suite(s) pass"), "{text}");
}

#[test]
fn seeded_suites_are_reproducible() {
    let first = run(&["verify", "--suite", "convexity", "--seed", "7"]);
    let second = run(&["verify", "--suite", "convexity", "--seed", "7"]);
    assert_eq!(code(&first), 0);
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn thread_count_does_not_change_the_bytes() {
    let single = run(&[
        "sweep", "--ref", "uniform:0,1", "--alpha", "0.5", "--kind", "C", "--m", "0.5",
        "--gamma-lo", "-3", "--gamma-hi", "3", "--n", "64", "--threads", "1",
    ]);
    let several = run(&[
        "sweep", "--ref", "uniform:0,1", "--alpha", "0.5", "--kind", "C", "--m", "0.5",
        "--gamma-lo", "-3", "--gamma-hi", "3", "--n", "64", "--threads", "4",
    ]);
    assert_eq!(code(&single), 0);
    assert_eq!(code(&several), 0);
    assert_eq!(single.stdout, several.stdout);

    let via_env = bin()
        .args([
            "sweep", "--ref", "uniform:0,1", "--alpha", "0.5", "--kind", "C", "--m", "0.5",
            "--gamma-lo", "-3", "--gamma-hi", "3", "--n", "64",
        ])
        .env("RENYI_MAXENT_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(via_env.status.code().unwrap(), 0);
    assert_eq!(via_env.stdout, single.stdout);
}
