use std::io::Write;

use xxz_efp::cli::{self, FitMode, Route, RunConfig, Suite, CSV_HEADER};

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = cli::run(std::iter::once("efp").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

/// Data rows of a CSV output as column vectors.
fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .filter(|l| !l.starts_with('#') && *l != CSV_HEADER)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn col(csv: &str, k: usize) -> Vec<f64> {
    rows(csv).iter().map(|r| r[k].parse().unwrap()).collect()
}

#[test]
fn tracial_efp_table() {
    let (code, out, _) = run(&["efp", "--n", "4", "--delta", "0", "--beta", "0", "--l", "0..2", "--reproducible"]);
    assert_eq!(code, 0);
    let mut lines = out.lines();
    let comment = lines.next().unwrap();
    assert!(comment.starts_with("# route=exact;") && comment.contains("wall_ms in milliseconds"));
    assert_eq!(lines.next().unwrap(), CSV_HEADER);
    assert_eq!(col(&out, 1), vec![1.0, 0.5, 0.25]);
    for r in rows(&out) {
        assert_eq!(r.len(), 10);
        assert_eq!(r[2], "");
        assert_eq!(r[3], "exact");
        assert_eq!(r[9], "");
    }
}

#[test]
fn wall_time_is_recorded_unless_reproducible() {
    let (_, out, _) = run(&["efp", "--n", "4", "--delta", "0", "--beta", "1", "--l", "1"]);
    assert!(rows(&out)[0][9].parse::<u64>().is_ok());
}

#[test]
fn output_is_byte_identical_for_fixed_seed() {
    let args = ["efp", "--route", "mc", "--n", "4", "--delta", "-1", "--beta", "1", "--l", "1..2", "--samples", "5000", "--seed", "9", "--reproducible", "--threads", "2"];
    let (c1, a, _) = run(&args);
    let (c2, b, _) = run(&args);
    assert_eq!((c1, c2), (0, 0));
    assert_eq!(a, b);
    assert!(a.lines().next().unwrap().contains("threads=2"));
}

#[test]
fn mc_agrees_with_exact() {
    for delta in ["0", "-1"] {
        let (_, ex, _) = run(&["efp", "--n", "4", "--delta", delta, "--beta", "1", "--l", "1..3", "--reproducible"]);
        let (_, mc, _) = run(&["efp", "--route", "mc", "--n", "4", "--delta", delta, "--beta", "1", "--l", "1..3", "--samples", "40000", "--reproducible"]);
        let (e, m, s) = (col(&ex, 1), col(&mc, 1), col(&mc, 2));
        for k in 0..3 {
            assert!((e[k] - m[k]).abs() <= 3.0 * s[k] + 1e-12, "delta {delta} row {k}: {} vs {} +- {}", e[k], m[k], s[k]);
        }
    }
}

#[test]
fn sixvertex_agrees_with_exact_ground_sector() {
    let (_, sv, _) = run(&["efp", "--route", "sixvertex", "--kappa", "0", "--n", "8", "--l", "1..3"]);
    let (_, ex, _) = run(&["efp", "--delta", "0.5", "--m2", "0", "--n", "8", "--l", "1..3"]);
    for (a, b) in col(&sv, 1).iter().zip(col(&ex, 1)) {
        assert!((a - b).abs() < 1e-8);
    }
    assert_eq!(rows(&sv)[0][4], "0.5");
    let (_, via_delta, _) = run(&["efp", "--route", "sixvertex", "--delta", "0.5", "--n", "8", "--l", "1..3"]);
    assert_eq!(col(&via_delta, 1), col(&sv, 1));
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = std::env::temp_dir().join(format!("efp-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("run.cfg");
    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(f, "# tracial table\nroute = exact\nn = 6\ndelta = 0\nbeta = 0\nl = 1..3\nreproducible = true").unwrap();
    let p = path.to_str().unwrap();
    let (code, out, _) = run(&["efp", "--config", p]);
    assert_eq!(code, 0);
    assert_eq!(col(&out, 1), vec![0.5, 0.25, 0.125]);
    let (_, out, _) = run(&["efp", "--config", p, "--l", "2", "--n", "8"]);
    assert_eq!(rows(&out), vec![vec!["2", "0.25", "", "exact", "0", "0", "8", "1", "0", ""]]);

    let bad = dir.join("bad.cfg");
    std::fs::write(&bad, "colour = blue\n").unwrap();
    assert_eq!(run(&["efp", "--config", bad.to_str().unwrap()]).0, 2);
    let out_path = dir.join("table.csv");
    let (code, stdout, _) = run(&["efp", "--config", p, "--output", out_path.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(stdout.is_empty());
    assert!(std::fs::read_to_string(&out_path).unwrap().contains(CSV_HEADER));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn json_format() {
    let (code, out, _) = run(&["efp", "--n", "4", "--delta", "0", "--beta", "0", "--l", "1..2", "--format", "json", "--reproducible"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["config"]["route"], "exact");
    assert_eq!(v["rows"][1]["efp"], 0.25);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["efp", "--n", "4", "--delta", "0", "--kappa", "0", "--l", "1"]).0, 2);
    assert_eq!(run(&["efp", "--n", "4", "--kappa", "0", "--beta", "0", "--l", "1"]).0, 2);
    assert_eq!(run(&["efp", "--n", "4", "--delta", "0", "--l", "1"]).0, 2);
    assert_eq!(run(&["efp", "--n", "4", "--delta", "0", "--beta", "0"]).0, 2);
    assert_eq!(run(&["efp", "--route", "mc", "--n", "4", "--delta", "0", "--m2", "0", "--beta", "1", "--l", "1"]).0, 2);
    assert_eq!(run(&["scan", "--n", "4", "--delta", "0", "--beta", "0", "--l", "3..1"]).0, 2);
    assert_eq!(run(&["scan", "--n", "4", "--delta", "0", "--beta", "0", "--l", "1..2"]).0, 2);
    assert_eq!(run(&["bogus"]).0, 2);
    assert_eq!(run(&["efp", "--n", "4", "--delta", "0", "--beta", "0", "--l", "1", "--threads", "0"]).0, 2);
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("opc-demo"));
}

#[test]
fn budget_errors_exit_3() {
    let (code, _, err) = run(&["efp", "--n", "30", "--delta", "0", "--beta", "1", "--l", "1"]);
    assert_eq!(code, 3);
    assert!(err.contains("hint:"));
}

#[test]
fn scan_fits_free_fermion_decay() {
    let (code, out, _) = run(&["scan", "--n", "12", "--delta", "0", "--m2", "0", "--l", "1..6", "--reproducible"]);
    assert_eq!(code, 0);
    let footer = out.lines().last().unwrap().strip_prefix("# fit=").unwrap();
    let v: serde_json::Value = serde_json::from_str(footer).unwrap();
    let nu = v["scaling_fit"]["nu"].as_f64().unwrap();
    assert!((1.5..=2.5).contains(&nu) && v["scaling_fit"]["c"].as_f64().unwrap() > 0.0);
    assert_eq!(rows(&out).len(), 6);

    let (code, out, _) = run(&["scan", "--n", "12", "--delta", "0", "--m2", "0", "--l", "1..6", "--fit", "fixed", "--reproducible"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(out.lines().last().unwrap().strip_prefix("# fit=").unwrap()).unwrap();
    assert_eq!(v["scaling_fit"]["nu"], 2.0);
}

#[test]
fn scan_failure_when_nothing_to_fit() {
    let (code, out, _) = run(&["scan", "--n", "6", "--delta", "0", "--m2", "-6", "--l", "1..4", "--reproducible"]);
    assert_eq!(code, 1);
    assert!(out.lines().last().unwrap().contains("error"));
}

#[test]
fn beta_scan_is_roughly_linear() {
    let (code, out, _) = run(&["scan", "--n", "8", "--delta", "-1", "--l", "2", "--betas", "0.1,0.2,0.3,0.4", "--reproducible"]);
    assert_eq!(code, 0);
    let betas = col(&out, 5);
    assert_eq!(betas, vec![0.1, 0.2, 0.3, 0.4]);
    let neg_log: Vec<f64> = col(&out, 1).iter().map(|e| -e.ln()).collect();
    let slopes: Vec<f64> = neg_log.windows(2).map(|w| (w[1] - w[0]) / 0.1).collect();
    for s in &slopes {
        assert!((s - slopes[0]).abs() < 0.2 * slopes[0].abs(), "{slopes:?}");
    }
    assert!(out.lines().last().unwrap().contains("beta_fit"));
}

#[test]
fn verify_suites_pass() {
    for suite in ["holder", "chessboard", "rp", "den", "sutherland", "opc", "sixvertex-structure"] {
        let (code, out, _) = run(&["verify", suite]);
        assert_eq!(code, 0, "{suite}: {out}");
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["failures"], 0);
        assert!(v["checks"].as_u64().unwrap() > 0);
    }
    let total: usize = [Suite::Holder, Suite::Chessboard, Suite::Rp, Suite::Den]
        .iter()
        .map(|&s| cli::cmd_verify(s, 0, false).unwrap().checks)
        .sum();
    assert!(total >= 300);
}

#[test]
fn opc_demo_is_deterministic() {
    let (code, a, _) = run(&["opc-demo", "--width", "5", "--height", "4", "--seed", "3", "--trace"]);
    assert_eq!(code, 0);
    assert_eq!(a, run(&["opc-demo", "--width", "5", "--height", "4", "--seed", "3", "--trace"]).1);
    assert!(a.contains("highest") && a.contains("blockades") && a.contains('+'));
    assert_eq!(run(&["opc-demo", "--width", "1"]).0, 2);
}

#[test]
fn library_entry_points() {
    let cfg = RunConfig { route: Route::Exact, n: 4, delta: Some(0.0), beta: Some(0.0), ls: vec![0, 1, 2], reproducible: true, ..RunConfig::default() };
    cfg.validate().unwrap();
    let r = cli::cmd_efp(&cfg).unwrap();
    assert_eq!(r.iter().map(|x| x.efp).collect::<Vec<_>>(), vec![1.0, 0.5, 0.25]);
    let csv = cli::render_csv(&cfg, &r);
    assert_eq!(csv.lines().nth(1).unwrap(), CSV_HEADER);
    assert!(cli::cmd_scan(&cfg, FitMode::Free, None).is_err());
    assert_eq!(cli::parse_l_range("1..=3").unwrap(), vec![1, 2, 3]);
    assert_eq!(cli::parse_l_range("4,1").unwrap(), vec![4, 1]);
    assert!(cli::parse_l_range("").is_err());
    assert_eq!(cli::resolve_threads(Some(3)).unwrap(), 3);
}
