//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use hardy_kpz::construct::{damped_supersolution, exact_radial_solution, exact_residual};
use hardy_kpz::radialop::{
    assemble_operator, assemble_operator_with, build_grid, oracle_refinement, AssemblyOptions,
    RadialField, ORACLE_TOLERANCE,
};
use hardy_kpz::solver::{
    mu_threshold_probe, reference_supersolution, solve_damped, solve_kpz, SolveStatus,
    SolverControls, Source,
};
use hardy_kpz::specfun::{
    alpha_of_lambda, exponents, hardy_constant, lambda_of_alpha, ProblemParams,
};
use hardy_kpz::sweep::{run_sweep, SweepPlan, DESK_RADIUS};
use hardy_kpz::Error;
use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::TestRunner;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const N: u32 = 3;
const S: f64 = 0.75;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn sample<T: Strategy>(runner: &mut TestRunner, strategy: &T, count: usize) -> Vec<T::Value> {
    (0..count)
        .map(|_| strategy.new_tree(runner).expect("sample").current())
        .collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn desk_params(p_factor: f64, mu: f64) -> ProblemParams {
    let lambda = 0.5 * hardy_constant(N, S).unwrap();
    let p = p_factor * exponents(N, S, lambda).unwrap().p_plus;
    ProblemParams {
        n: N,
        s: S,
        lambda,
        p,
        mu,
    }
}

fn hardy_source() -> Source {
    Source::Power {
        exponent: 2.0 * S,
        constant: 1.0,
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut runner = TestRunner::deterministic();
    for &(n, s) in &[(2, 0.6), (3, 0.75), (4, 0.9), (7, 0.55)] {
        let big = hardy_constant(n, s).map_err(|e| e.to_string())?;
        let v = lambda_of_alpha(0.0, n, s).map_err(|e| e.to_string())?;
        check(rel(v, big) <= 1e-12, || {
            format!("λ(0) = {v} vs Λ = {big} at N={n} s={s}")
        })?;
    }
    let points = sample(&mut runner, &(2u32..=7, 0.51f64..0.99, 0.01f64..0.99), 50);
    let mut worst_trip: f64 = 0.0;
    for &(n, s, frac) in &points {
        let big = hardy_constant(n, s).unwrap();
        let alpha = frac * (n as f64 - 2.0 * s) / 2.0;
        check(
            lambda_of_alpha(alpha, n, s).unwrap() == lambda_of_alpha(-alpha, n, s).unwrap(),
            || format!("evenness fails at N={n} s={s} α={alpha}"),
        )?;
        let lambda = frac * big;
        let back = lambda_of_alpha(alpha_of_lambda(lambda, n, s).unwrap(), n, s).unwrap();
        worst_trip = worst_trip.max(rel(back, lambda));
        let e = exponents(n, s, lambda).unwrap();
        let nf = n as f64;
        let mid = (nf + 2.0 * s) / (nf - 2.0 * s + 2.0);
        check(
            e.p_star < e.p_minus && e.p_minus < mid && mid < e.p_plus && e.p_plus < 2.0 * s,
            || format!("exponent chain fails: {e:?}"),
        )?;
        let next = exponents(n, s, (frac + 0.5 * (1.0 - frac)) * big).unwrap();
        check(next.p_plus < e.p_plus && next.p_minus > e.p_minus, || {
            format!("p± not monotone in λ at N={n} s={s}")
        })?;
    }
    check(worst_trip <= 1e-10, || {
        format!("α↔λ round trip error {worst_trip:e}")
    })?;
    let s1 = 1.0 - 1e-4;
    let mut worst_local: f64 = 0.0;
    for n in 3..=6u32 {
        let classical = ((n as f64 - 2.0) / 2.0).powi(2);
        for frac in [0.1, 0.5, 0.9] {
            let alpha = alpha_of_lambda(frac * classical, n, s1).unwrap();
            worst_local = worst_local.max((alpha - (classical * (1.0 - frac)).sqrt()).abs());
        }
    }
    check(worst_local <= 1e-2, || {
        format!("s→1 deviation {worst_local:e}")
    })?;
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(1), || {
        format!("runtime {elapsed:?}")
    })?;
    Ok(format!(
        "round trip {worst_trip:.1e}, s→1 deviation {worst_local:.1e}, {elapsed:.2?}"
    ))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let lambda = 0.5 * hardy_constant(N, S).unwrap();
    let theta = exponents(N, S, lambda).unwrap().mu_lambda;
    let grid = build_grid(DESK_RADIUS, 200, 2.0).map_err(|e| e.to_string())?;
    let op = assemble_operator(&grid, N, S).map_err(|e| e.to_string())?;
    let rep = op
        .oracle_power_test(theta, DESK_RADIUS / 10.0)
        .map_err(|e| e.to_string())?;
    check(rep.passes(ORACLE_TOLERANCE), || format!("oracle {rep:?}"))?;
    let refine = oracle_refinement(
        &grid,
        N,
        S,
        &AssemblyOptions::default(),
        theta,
        DESK_RADIUS / 10.0,
    )
    .map_err(|e| e.to_string())?;
    check(refine.ratio >= 1.5, || format!("refinement {refine:?}"))?;
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(30), || {
        format!("runtime {elapsed:?}")
    })?;
    Ok(format!(
        "max rel error {:.4} at θ = μ(λ) = {theta:.4}, refinement {:.4} → {:.4} (ratio {:.2}), {elapsed:.2?}",
        rep.max_rel_error, refine.coarse_error, refine.fine_error, refine.ratio
    ))
}

fn criterion_3() -> Outcome {
    let big = hardy_constant(N, S).unwrap();
    let grid = build_grid(DESK_RADIUS, 200, 2.0).unwrap();
    let op = assemble_operator(&grid, N, S).unwrap();
    let mut runner = TestRunner::deterministic();
    let family = sample(
        &mut runner,
        &(
            0.0f64..1.0,
            0.0f64..1.0,
            0.1f64..2.0,
            0.0f64..0.8,
            0.05f64..0.5,
        ),
        20,
    );
    let mut lowest = f64::INFINITY;
    for &(a, b, c, centre, width) in &family {
        let u = RadialField::from_fn(&grid, |r| {
            let x = r / DESK_RADIUS;
            (1.0 - x * x).max(0.0).powi(2)
                * (a + b * x * x + c * (-((x - centre) / width).powi(2)).exp())
        })
        .unwrap();
        lowest = lowest.min(op.rayleigh_quotient(&u).unwrap() / big);
    }
    check(lowest >= 0.95, || format!("lowest quotient {lowest:.4}·Λ"))?;
    let theta = exponents(N, S, 0.9999 * big).unwrap().mu_lambda;
    let weighted = assemble_operator_with(
        &grid,
        N,
        S,
        &AssemblyOptions {
            singular_exponent: theta,
            ..AssemblyOptions::default()
        },
    )
    .unwrap();
    let near = RadialField::from_fn(&grid, |r| {
        r.powf(-theta) * (1.0 - (r / DESK_RADIUS).powi(2)).powi(2)
    })
    .unwrap();
    let q = weighted.rayleigh_quotient(&near).unwrap() / big;
    check((1.0..=1.1).contains(&q), || {
        format!("near-optimizer quotient {q:.4}·Λ")
    })?;
    Ok(format!(
        "random family min {lowest:.4}·Λ, near-optimizer {q:.4}·Λ"
    ))
}

fn criterion_4() -> Outcome {
    let mut runner = TestRunner::deterministic();
    let points = sample(
        &mut runner,
        &(2u32..=6, 0.55f64..0.99, 0.05f64..0.95, 0.02f64..0.98),
        100,
    );
    let mut worst: f64 = 0.0;
    for &(n, s, frac, t) in &points {
        let lambda = frac * hardy_constant(n, s).unwrap();
        let e = exponents(n, s, lambda).unwrap();
        let params = ProblemParams {
            n,
            s,
            lambda,
            p: e.p_minus + t * (e.p_plus - e.p_minus),
            mu: 0.0,
        };
        let spec = exact_radial_solution(&params).map_err(|e| e.to_string())?;
        worst = worst.max(exact_residual(&spec, &params).unwrap().abs() / lambda);
    }
    check(worst <= 1e-10, || format!("worst residual {worst:e}·λ"))?;
    let lambda = 0.5 * hardy_constant(N, S).unwrap();
    let e = exponents(N, S, lambda).unwrap();
    let amp = |p: f64| {
        exact_radial_solution(&ProblemParams {
            n: N,
            s: S,
            lambda,
            p,
            mu: 0.0,
        })
        .unwrap()
        .amplitude
    };
    let width = e.p_plus - e.p_minus;
    let mut edges = (0.0, 0.0);
    for (k, t) in [1e-2, 1e-4, 1e-6].into_iter().enumerate() {
        let next = (amp(e.p_minus + t * width), amp(e.p_plus - t * width));
        check(k == 0 || (next.0 < edges.0 && next.1 < edges.1), || {
            "amplitude not decreasing toward the edges".to_string()
        })?;
        edges = next;
    }
    check(edges.0 < 1e-3 && edges.1 < 1e-3, || {
        format!("edge amplitudes {edges:?}")
    })?;
    Ok(format!(
        "worst residual {worst:.1e}·λ, edge amplitudes {:.1e} / {:.1e}",
        edges.0, edges.1
    ))
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let grid = build_grid(DESK_RADIUS, 200, 2.0).unwrap();
    let op = assemble_operator(&grid, N, S).unwrap();
    let controls = SolverControls::default();
    let below = desk_params(0.9, 1e-3);
    let spec =
        reference_supersolution(&below, &hardy_source(), DESK_RADIUS).map_err(|e| e.to_string())?;
    let spec = spec.ok_or("no supersolution at 0.9 p+")?;
    let a = solve_kpz(&below, &hardy_source(), &op, &controls, Some(&spec))
        .map_err(|e| e.to_string())?;
    check(a.status == SolveStatus::Converged, || {
        format!("(a) status {:?}", a.status)
    })?;
    check(a.monotonicity_violations == 0, || {
        format!("(a) {} violations", a.monotonicity_violations)
    })?;
    let w = spec.field(&grid).unwrap();
    let under = a.field.values().iter().zip(w.values()).all(|(u, w)| u <= w);
    check(under, || "(a) u exceeds w at some node".to_string())?;
    let above = desk_params(1.1, 1e-3);
    let spec_b =
        reference_supersolution(&above, &hardy_source(), DESK_RADIUS).map_err(|e| e.to_string())?;
    let b = solve_kpz(&above, &hardy_source(), &op, &controls, spec_b.as_ref())
        .map_err(|e| e.to_string())?;
    check(b.status == SolveStatus::BlowUp, || {
        format!("(b) status {:?}", b.status)
    })?;
    let map =
        run_sweep(&SweepPlan::desk_p_sweep().unwrap(), None, None).map_err(|e| e.to_string())?;
    let band = map.band.ok_or("(c) no transition band")?;
    check(band.contains_p_plus && band.width <= 0.1, || {
        format!("(c) band {band:?}")
    })?;
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(300), || {
        format!("runtime {elapsed:?}")
    })?;
    Ok(format!(
        "(a) Converged, sup {:.4} ≤ w; (b) BlowUp; (c) band [{:.4}, {:.4}] width {:.4} ∋ p+ = {:.4}; {elapsed:.2?}",
        a.field.sup_norm(),
        band.last_converged,
        band.first_blowup,
        band.width,
        band.p_plus
    ))
}

fn criterion_6() -> Outcome {
    let grid = build_grid(DESK_RADIUS, 200, 2.0).unwrap();
    let op = assemble_operator(&grid, N, S).unwrap();
    let controls = SolverControls::default();
    let params = desk_params(0.9, 1e-3);
    let one =
        mu_threshold_probe(&params, &hardy_source(), &op, &controls).map_err(|e| e.to_string())?;
    let two = mu_threshold_probe(&params, &hardy_source().scaled(2.0), &op, &controls)
        .map_err(|e| e.to_string())?;
    check(one.bracketed && two.bracketed, || {
        format!("not bracketed: {:?} / {:?}", one.note, two.note)
    })?;
    let (m1, m2) = (one.estimate.unwrap(), two.estimate.unwrap());
    let ratio = m1 / m2;
    check((ratio / 2.0 - 1.0).abs() <= 0.1, || {
        format!("midpoint ratio {ratio:.4}")
    })?;
    Ok(format!(
        "μ* ∈ [{:.5}, {:.5}], doubled f: [{:.5}, {:.5}], ratio {ratio:.3}",
        one.mu_lo.unwrap(),
        one.mu_hi.unwrap(),
        two.mu_lo.unwrap(),
        two.mu_hi.unwrap()
    ))
}

fn criterion_7() -> Outcome {
    let grid = build_grid(DESK_RADIUS, 200, 2.0).unwrap();
    let op = assemble_operator(&grid, N, S).unwrap();
    let lambda = 0.5 * hardy_constant(N, S).unwrap();
    let p = 2.0 * S - 0.05;
    let alpha = 2.0 * S - 1.0 + 0.5;
    let c = 0.03;
    let params = ProblemParams {
        n: N,
        s: S,
        lambda,
        p,
        mu: c,
    };
    let spec =
        damped_supersolution(N, S, lambda, p, alpha, DESK_RADIUS).map_err(|e| e.to_string())?;
    let rep = solve_damped(
        &params,
        alpha,
        &hardy_source(),
        &op,
        &SolverControls::default(),
        Some(&spec),
    )
    .map_err(|e| e.to_string())?;
    check(rep.status == SolveStatus::Converged, || {
        format!("status {:?} ({:?})", rep.status, rep.reason)
    })?;
    let edge = damped_supersolution(N, S, lambda, p, 2.0 * S - 1.0, DESK_RADIUS);
    check(matches!(edge, Err(Error::Domain(_))), || {
        format!("α = 2s−1 not rejected: {edge:?}")
    })?;
    Ok(format!(
        "α = {alpha}, p = {p}, c = {c}: Converged, sup {:.4}; α = 2s−1 rejected",
        rep.field.sup_norm()
    ))
}

fn run_bin(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_hardy-kpz"))
        .args(args)
        .env_remove("HARDY_KPZ_OUT_DIR")
        .output()
        .map_err(|e| e.to_string())?;
    check(out.status.success(), || {
        format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr))
    })
}

fn same_tree(a: &Path, b: &Path) -> Result<usize, String> {
    let mut names: Vec<_> = fs::read_dir(a)
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    for name in &names {
        let x = fs::read(a.join(name)).map_err(|e| e.to_string())?;
        let y = fs::read(b.join(name)).map_err(|e| format!("{name:?}: {e}"))?;
        check(x == y, || format!("{} differs", a.join(name).display()))?;
    }
    Ok(names.len())
}

fn criterion_8() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let t = tmp.path();
    let solve = r#"{"problem":{"N":3,"s":0.75,"lambda":0.2232147999812825,"p":1.2709560829942758,"mu":0.001},
 "source":{"type":"power","exponent":1.5,"constant":1.0}}"#;
    let damped = r#"{"problem":{"N":3,"s":0.75,"lambda":0.2232147999812825,"p":1.45,"mu":0.03},"alpha_damp":1.0,
 "source":{"type":"power","exponent":1.5,"constant":1.0}}"#;
    let sweep = r#"{"problem":{"N":3,"s":0.75,"lambda":0.2232147999812825,"p":1.4,"mu":0.001},
 "axes":[{"param":"p","start":0.9,"stop":1.1,"steps":9,"scale":"p-plus"}],
 "source":{"type":"power","exponent":1.5,"constant":1.0}}"#;
    for (name, text) in [
        ("solve.json", solve),
        ("damped.json", damped),
        ("sweep.json", sweep),
    ] {
        fs::write(t.join(name), text).map_err(|e| e.to_string())?;
    }
    let cfg = |name: &str| t.join(name).to_str().unwrap().to_string();
    let cases: Vec<(&str, Vec<String>)> = vec![
        (
            "constants",
            vec!["--N".into(), "3".into(), "--s".into(), "0.75".into()],
        ),
        (
            "exponents",
            vec![
                "--N".into(),
                "3".into(),
                "--s".into(),
                "0.75".into(),
                "--lambda".into(),
                "0.2".into(),
            ],
        ),
        (
            "oracle",
            vec![
                "--N".into(),
                "3".into(),
                "--s".into(),
                "0.75".into(),
                "--lambda".into(),
                "0.2".into(),
                "--refine".into(),
            ],
        ),
        ("solve", vec!["--config".into(), cfg("solve.json")]),
        ("damped", vec!["--config".into(), cfg("damped.json")]),
        ("sweep", vec!["--config".into(), cfg("sweep.json")]),
        ("probe", vec!["--config".into(), cfg("solve.json")]),
    ];
    let mut files = 0;
    for (cmd, args) in &cases {
        let first = t.join(format!("{cmd}-1"));
        let second = t.join(format!("{cmd}-2"));
        let mut a: Vec<&str> = vec![cmd];
        a.extend(args.iter().map(String::as_str));
        a.extend(["--out", first.to_str().unwrap()]);
        run_bin(&a)?;
        let emitted = first.join("config.json");
        run_bin(&[
            cmd,
            "--config",
            emitted.to_str().unwrap(),
            "--out",
            second.to_str().unwrap(),
        ])?;
        files += same_tree(&first, &second)?;
    }
    Ok(format!(
        "{} commands rerun from emitted config, {files} files byte-identical",
        cases.len()
    ))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("special functions", criterion_1),
        ("operator oracle", criterion_2),
        ("Hardy bound", criterion_3),
        ("exact-solution identity", criterion_4),
        ("solver dichotomy", criterion_5),
        ("source threshold", criterion_6),
        ("damped solver", criterion_7),
        ("reproducibility", criterion_8),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let outcome =
            catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".to_string()));
        match outcome {
            Ok(detail) => println!("criterion {} ({name}): PASS: {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} ({name}): FAIL: {detail}", k + 1);
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
