//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::collections::HashSet;
use std::time::{Duration, Instant};

use xxz_efp::bounds::{self, ChessboardExponent};
use xxz_efp::cli::{self, Route, RunConfig, Suite};
use xxz_efp::exact::{build_hamiltonian, efp_ground_sector, spectrum};
use xxz_efp::lattice::build_torus;
use xxz_efp::loops::{estimate_efp_mc, estimate_partition_mc};
use xxz_efp::opc::{self, OscPathConfig};
use xxz_efp::sixvertex::{self, brute_force_partition, for_each_config, row_structure_checks, transfer_trace_power};

const TRACIAL_TOL: f64 = 1e-14;
const CONCORDANCE_TOL: f64 = 1e-8;
const SIGMAS: f64 = 3.0;
const MC_SAMPLES: usize = 100_000;
const COMMUTATOR_TOL: f64 = 1e-10;
const CONTROL_FLOOR: f64 = 1e-3;
const MIN_INEQUALITY_CHECKS: usize = 300;
const NU_WINDOW: (f64, f64) = (1.5, 2.5);
const OPC_FIXTURES: usize = 1000;
const TRACE_REL_TOL: f64 = 1e-9;
const SEED: u64 = 0;

type Outcome = Result<String, String>;
type Criterion = (&'static str, Option<Duration>, fn() -> Outcome);

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> Outcome {
    let t0 = Instant::now();
    let r = f();
    let dt = t0.elapsed();
    let r = match (r, limit) {
        (Ok(msg), Some(lim)) if dt > lim => Err(format!("{msg}; took {dt:.2?} > {lim:?}")),
        (r, _) => r,
    };
    r.map(|m| format!("{m}; {dt:.2?}"))
}

fn tracial_baseline() -> Outcome {
    let mut worst = 0.0f64;
    let mut count = 0;
    for d in [1usize, 2] {
        for n in [4usize, 6] {
            let cfg = RunConfig { route: Route::Exact, d, n, delta: Some(0.0), beta: Some(0.0), ls: (1..=n / 2).collect(), reproducible: true, ..RunConfig::default() };
            for row in cli::cmd_efp(&cfg).map_err(|e| e.to_string())? {
                let want = 0.5f64.powi((row.l as i32).pow(d as u32));
                worst = worst.max((row.efp - want).abs());
                count += 1;
            }
        }
    }
    // Cross-check the d = 1 rows against a full thermal trace.
    for n in [4usize, 6] {
        let torus = build_torus(1, n).unwrap();
        let spec = spectrum(&build_hamiltonian(&torus, 0.3).unwrap()).unwrap();
        for l in 1..=n / 2 {
            let v = spec.expectation(&xxz_efp::exact::projector_q(&torus, l).unwrap(), 0.0).unwrap();
            worst = worst.max((v - 0.5f64.powi(l as i32)).abs());
        }
    }
    let msg = format!("{count} rows, max |<Q_L> - 2^-L^d| = {worst:.1e} (tol {TRACIAL_TOL:.0e})");
    if worst <= TRACIAL_TOL { Ok(msg) } else { Err(msg) }
}

fn three_route_concordance() -> Outcome {
    let torus = build_torus(1, 8).unwrap();
    let mut worst = 0.0f64;
    for l in 1..=3 {
        let ex = efp_ground_sector(&torus, 0.5, 0, l).map_err(|e| e.to_string())?;
        let sv = sixvertex::efp_sixvertex(8, 0.0, 0, l).map_err(|e| e.to_string())?;
        worst = worst.max((ex - sv).abs());
    }
    let mut z_worst = 0.0f64;
    let t4 = build_torus(1, 4).unwrap();
    for delta in [0.0, -1.0] {
        let spec = spectrum(&build_hamiltonian(&t4, delta).unwrap()).unwrap();
        for l in 1..=3 {
            let ex = spec.expectation(&xxz_efp::exact::projector_q(&t4, l).unwrap(), 1.0).unwrap();
            let mc = estimate_efp_mc(&t4, delta, 1.0, l, MC_SAMPLES, SEED).map_err(|e| e.to_string())?;
            let z = if mc.stderr > 0.0 { (mc.value - ex).abs() / mc.stderr } else if (mc.value - ex).abs() < 1e-12 { 0.0 } else { f64::INFINITY };
            z_worst = z_worst.max(z);
        }
    }
    let msg = format!("exact vs six-vertex max diff {worst:.1e} (tol {CONCORDANCE_TOL:.0e}); loop MC max |z| = {z_worst:.2} (limit {SIGMAS})");
    if worst <= CONCORDANCE_TOL && z_worst <= SIGMAS { Ok(msg) } else { Err(msg) }
}

fn partition_identity() -> Outcome {
    let t4 = build_torus(1, 4).unwrap();
    let mut z_worst = 0.0f64;
    for beta in [0.5, 1.0] {
        for delta in [-1.0, 0.0, 1.0] {
            let exact = spectrum(&build_hamiltonian(&t4, delta).unwrap()).unwrap().log_partition(beta).exp();
            let est = estimate_partition_mc(&t4, delta, beta, MC_SAMPLES, SEED).map_err(|e| e.to_string())?;
            z_worst = z_worst.max((est.value - exact).abs() / est.stderr);
        }
    }
    let msg = format!("6 cases, max |z| = {z_worst:.2} (limit {SIGMAS})");
    if z_worst <= SIGMAS { Ok(msg) } else { Err(msg) }
}

fn sutherland() -> Outcome {
    let (mut worst, mut control) = (0.0f64, f64::INFINITY);
    for n in [4usize, 6] {
        for kappa in [-0.5, 0.0, 0.4] {
            worst = worst.max(sixvertex::sutherland_check(n, kappa).map_err(|e| e.to_string())?);
            let wrong = sixvertex::commutator_residual(n, kappa, sixvertex::delta_of_kappa(kappa) + 0.25).map_err(|e| e.to_string())?;
            control = control.min(wrong);
        }
    }
    let msg = format!("max ||[A, H]||_F = {worst:.1e} (tol {COMMUTATOR_TOL:.0e}); mismatched min = {control:.2e} (floor {CONTROL_FLOOR:.0e})");
    if worst < COMMUTATOR_TOL && control > CONTROL_FLOOR { Ok(msg) } else { Err(msg) }
}

fn inequality_suite() -> Outcome {
    let mut total = 0;
    let mut failures = Vec::new();
    let mut parts = Vec::new();
    for suite in [Suite::Holder, Suite::Chessboard, Suite::Den, Suite::Rp] {
        let s = cli::cmd_verify(suite, SEED, false).map_err(|e| e.to_string())?;
        total += s.checks;
        parts.push(format!("{suite:?} {}", s.checks));
        failures.extend(s.failed.into_iter().map(|c| c.name));
    }
    let msg = format!("{total} checks ({}), {} violations (slack {:.0e})", parts.join(", "), failures.len(), bounds::SLACK);
    if failures.is_empty() && total >= MIN_INEQUALITY_CHECKS { Ok(msg) } else { Err(format!("{msg}: {:?}", failures.iter().take(5).collect::<Vec<_>>())) }
}

fn scaling() -> Outcome {
    let torus = build_torus(1, 12).unwrap();
    let pts: Vec<(usize, f64)> = (1..=6).map(|l| efp_ground_sector(&torus, 0.0, 0, l).map(|e| (l, e))).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    let fit = bounds::fit_scaling(&pts, None, SEED).map_err(|e| e.to_string())?;
    let msg = format!("nu = {:.3} (window [{}, {}]), c = {:.4}, interval {:?}", fit.nu, NU_WINDOW.0, NU_WINDOW.1, fit.c, fit.nu_interval.map(|(a, b)| (format!("{a:.2}"), format!("{b:.2}"))));
    if (NU_WINDOW.0..=NU_WINDOW.1).contains(&fit.nu) && fit.c > 0.0 { Ok(msg) } else { Err(msg) }
}

fn bools(a: &[&[i8]]) -> Vec<Vec<bool>> {
    a.iter().map(|r| r.iter().map(|&x| x == -1).collect()).collect()
}

fn figure_rectangle() -> OscPathConfig {
    let h: [&[i8]; 6] = [&[1, 1, -1, -1, 1], &[-1, 1, -1, 1, -1], &[-1, -1, 1, -1, 1], &[-1, 1, -1, -1, 1], &[1, -1, -1, 1, -1], &[1, -1, -1, 1, -1]];
    let v: [&[i8]; 5] = [&[-1, 1, 1, 1, -1, 1], &[-1, -1, 1, -1, 1, -1], &[1, 1, -1, 1, 1, 1], &[1, -1, 1, 1, -1, 1], &[1, 1, 1, 1, 1, 1]];
    OscPathConfig::rectangle(5, 5, bools(&h), bools(&v)).unwrap()
}

fn path_set(p: Vec<Vec<(i64, i64)>>) -> HashSet<Vec<(i64, i64)>> {
    p.into_iter().collect()
}

fn opc_confluence_and_blockades() -> Outcome {
    let checks = cli::suite_opc(SEED, OPC_FIXTURES).map_err(|e| e.to_string())?;
    let failed: Vec<_> = checks.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect();
    let x = figure_rectangle();
    let osc = path_set(vec![
        vec![(1, 0), (1, 1), (2, 1), (2, 2), (3, 2), (3, 3), (6, 3)],
        vec![(2, 0), (2, 1), (4, 1), (4, 2), (6, 2)],
        vec![(0, 3), (2, 3), (2, 4), (4, 4), (4, 5), (6, 5)],
        vec![(0, 4), (1, 4), (1, 5), (2, 5), (2, 6)],
    ]);
    let highest = path_set(vec![
        vec![(2, 0), (2, 2), (6, 2)],
        vec![(1, 0), (1, 3), (6, 3)],
        vec![(0, 3), (1, 3), (1, 4), (2, 4), (2, 5), (6, 5)],
        vec![(0, 4), (1, 4), (1, 5), (2, 5), (2, 6)],
    ]);
    let top = opc::highest_opc(&x).map_err(|e| e.to_string())?;
    let figs_ok = path_set(x.polylines().map_err(|e| e.to_string())?) == osc
        && path_set(top.polylines().map_err(|e| e.to_string())?) == highest
        && top.count_minus() == 0
        && opc::blockade_check(&top).map(|b| b.passed()).unwrap_or(false);
    let msg = format!("{OPC_FIXTURES} fixtures, {} checks, {} failures; figure fixtures {}", checks.len(), failed.len(), if figs_ok { "reproduced" } else { "MISMATCH" });
    if failed.is_empty() && figs_ok { Ok(msg) } else { Err(format!("{msg}: {:?}", failed.iter().take(5).collect::<Vec<_>>())) }
}

fn sixvertex_structure() -> Outcome {
    let mut worst = 0.0f64;
    let (mut configs, mut alt, mut win) = (0usize, 0usize, 0usize);
    for t in 2..=4 {
        for kappa in [-0.3, 0.0, 0.3] {
            let tr = transfer_trace_power(4, t, kappa).map_err(|e| e.to_string())?;
            let z = brute_force_partition(4, t, kappa).map_err(|e| e.to_string())?;
            worst = worst.max((tr - z).abs() / z);
        }
        for_each_config(4, t, |c| {
            let rep = row_structure_checks(c).expect("enumerated configurations are valid");
            configs += 1;
            alt += rep.alternation_violations.len();
            win += rep.window_violations.len();
        })
        .map_err(|e| e.to_string())?;
    }
    let msg = format!("max rel |tr A^T - Z| = {worst:.1e} (tol {TRACE_REL_TOL:.0e}); {configs} configurations, {alt} alternation and {win} window violations");
    if worst <= TRACE_REL_TOL && alt == 0 && win == 0 { Ok(msg) } else { Err(msg) }
}

fn bound_evaluators() -> Outcome {
    let mut bad = Vec::new();
    let mut check = |name: &str, ok: bool| {
        if !ok {
            bad.push(name.to_string());
        }
    };
    let k = |n, l, d| bounds::chessboard_exponent(n, l, d).unwrap();
    check("K(8,4,1)=4", k(8, 4, 1) == ChessboardExponent { k: 4, lossy: false });
    check("K(16,4,2)=64", k(16, 4, 2) == ChessboardExponent { k: 64, lossy: false });
    check("K(8,2,1)=8", k(8, 2, 1) == ChessboardExponent { k: 8, lossy: false });
    check("K rejects l>n/2", bounds::chessboard_exponent(8, 5, 1).is_err());
    let ln2 = std::f64::consts::LN_2;
    check("entropy(1/2,1)=2ln2", bounds::entropy_bound(0.5, 1).unwrap() == 2.0 * ln2);
    check("entropy(1/2,inf)->ln2", (bounds::entropy_bound(0.5, 1 << 40).unwrap() - ln2).abs() < 1e-12);
    let s = bounds::window_count(4, 1).unwrap() as f64;
    check("window count within entropy bound", s.ln() / 12.0 <= bounds::entropy_bound(0.5, 4).unwrap());
    check("pf(8,2,0)=ln2/4", bounds::pf_lower_bound(8, 2, 0.0).unwrap() == 0.25 * ln2);
    check("pf negative for large negative kappa", bounds::pf_lower_bound(8, 2, -2.0).unwrap() < 0.0);
    let e = std::f64::consts::E;
    let dt = 24.0 / (1536.0 * e);
    let nb = bounds::num_bound(0.0, 1, 32, 24, dt).unwrap();
    let (a, b) = (-(32.0 * dt) / 64.0, (0.25 - 1.0) * 32.0 * dt);
    check("num_bound at M=e", (nb.inputs["second_exponent"] - b).abs() < 1e-15 && (nb.inputs["first_exponent"] - a).abs() < 1e-15 && (nb.value - (a.exp() + b.exp()).ln()).abs() < 1e-15);
    let nb2 = bounds::num_bound(0.0, 1, 64, 24, dt).unwrap();
    check("num_bound doubles with n^d", (nb2.inputs["first_exponent"] - 2.0 * a).abs() < 1e-15 && (nb2.inputs["second_exponent"] - 2.0 * b).abs() < 1e-15);
    let near = bounds::num_bound(1.0 - 1e-12, 1, 32, 24, 1e-3).unwrap().value;
    check("num_bound near Delta=1", near > 0.0 && near <= ln2 + 1e-9);
    check("V bound (1,8,2,1)=24", bounds::boundary_volume_bound(1, 8, 2, 1).unwrap() == 24.0);
    check("V exact (1,8,2,1)=8", bounds::boundary_volume_exact(&build_torus(1, 8).unwrap(), 2, 1).unwrap() == 8);
    check("V bound linear in r", bounds::boundary_volume_bound(1, 8, 2, 3).unwrap() == 72.0);
    let mut pf_cases = 0;
    for (n, t) in [(4usize, 2usize), (4, 3), (4, 4), (6, 2), (6, 3)] {
        for kappa in [-0.5, 0.0, 0.4] {
            let per_site = brute_force_partition(n, t, kappa).unwrap().ln() / (n * t) as f64;
            for r in 1..=n / 2 {
                pf_cases += 1;
                check(&format!("pf <= lnZ/NT at n={n} t={t} kappa={kappa} R={r}"), bounds::pf_lower_bound(n, r, kappa).unwrap() <= per_site);
            }
        }
    }
    let msg = format!("hand-computable examples plus {pf_cases} enumeration comparisons, {} failures", bad.len());
    if bad.is_empty() { Ok(msg) } else { Err(format!("{msg}: {bad:?}")) }
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("tracial baseline", Some(Duration::from_secs(1)), tracial_baseline),
        ("three-route concordance", Some(Duration::from_secs(120)), three_route_concordance),
        ("partition identity", None, partition_identity),
        ("commutation with the XXZ chain", None, sutherland),
        ("inequality suite", None, inequality_suite),
        ("EFP scaling", Some(Duration::from_secs(60)), scaling),
        ("OPC confluence and blockades", None, opc_confluence_and_blockades),
        ("six-vertex structure", None, sixvertex_structure),
        ("bound evaluators", None, bound_evaluators),
    ];
    let mut failed = 0;
    for (i, (name, limit, f)) in criteria.into_iter().enumerate() {
        match timed(limit, f) {
            Ok(msg) => println!("PASS {}. {name}: {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL {}. {name}: {msg}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
