//! Acceptance suite: one test per criterion, each printing a pass/fail
//! line (run with `cargo test --test acceptance -- --nocapture` to see
//! them on success).

use lyapcert::analyze::{bisect_rate, sweep, BisectOutcome, SweepFamily};
use lyapcert::certify::{self, Certificate, LowerBound, PresetKind};
use lyapcert::model::{build, validate, Family, FunctionClass, Method};
use lyapcert::sdp::{InteriorPoint, SdpSolver};
use lyapcert::simulate::{self, ComponentOracle, Oracle};
use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};
use std::time::Instant;

const INF: f64 = f64::INFINITY;

fn cls(sigma: f64, beta: f64) -> FunctionClass {
    FunctionClass::new(sigma, beta).unwrap()
}

fn solver() -> InteriorPoint {
    InteriorPoint::new()
}

fn certified_rate(rep: &Method, kind: PresetKind) -> (f64, Certificate, LowerBound) {
    let lb = certify::preset(kind, rep).unwrap();
    match bisect_rate(rep, &lb, 0.001, None, &solver()).unwrap() {
        BisectOutcome::Certified { rho, certificate } => (rho, certificate, lb),
        other => panic!("expected a certified rate, got {other:?}"),
    }
}

/// Worst observed per-step squared contraction of the first output's
/// distance to the fixed point, over random separable quadratic instances.
fn empirical_contraction(
    rep: &Method,
    draw: impl Fn(&mut StdRng) -> Vec<ComponentOracle>,
    instances: usize,
    seed: u64,
) -> f64 {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let inst = draw(&mut rng);
        let x0 = vec![vec![0.0]; rep.n];
        let star = simulate::find_fixed_point(rep, &inst, &x0, 1_000_000).unwrap();
        let traj = {
            let start: Vec<Vec<f64>> = star.x.iter().map(|v| vec![v[0] + 1.0]).collect();
            simulate::run(rep, &inst, &start, 60).unwrap()
        };
        for k in 0..traj.len() - 1 {
            let d0 = (traj[k].y[0][0] - star.y[0][0]).abs();
            let d1 = (traj[k + 1].y[0][0] - star.y[0][0]).abs();
            if d0 > 1e-9 {
                worst = worst.max((d1 / d0).powi(2));
            }
        }
    }
    worst
}

fn quad(curv: f64, center: f64, class: FunctionClass) -> ComponentOracle {
    ComponentOracle {
        class,
        oracle: Oracle::Quadratic { curv: vec![curv], center: vec![center], lin: vec![0.0] },
    }
}

#[test]
fn criterion_01_gradient_method_tightness() {
    let start = Instant::now();
    let rep = build(Family::HeavyBall, &[0.1, 0.0], &[cls(1.0, 10.0)]).unwrap();
    let (rho, _, _) = certified_rate(&rep, PresetKind::DistanceToSolution(1));
    // Independent oracle: the worst one-dimensional quadratic contracts by
    // max(|1 - 0.1*1|, |1 - 0.1*10|)^2 = 0.81 per step.
    assert!((0.808..=0.812).contains(&rho), "rho = {rho}");
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    println!("criterion 01 gradient-method tightness: PASS (rho = {rho:.4}, {elapsed:?})");
}

#[test]
fn criterion_02_chambolle_pock_rates() {
    let start = Instant::now();
    let c = cls(0.05, 50.0);
    for (tau, theta, expected) in
        [(0.99, 1.0, 0.9266), (1.6, 0.22, 0.8812), (1.5, 0.35, 0.8891)]
    {
        let rep = build(Family::ChambollePock, &[tau, tau, theta], &[c, c]).unwrap();
        let (rho, _, _) = certified_rate(&rep, PresetKind::DistanceToSolution(1));
        assert!(
            (rho - expected).abs() <= 0.003,
            "tau={tau} theta={theta}: rho {rho:.4} vs {expected}"
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");
    println!("criterion 02 primal-dual rates: PASS ({elapsed:?})");
}

/// Rate-one duality-gap feasibility of one primal-dual cell.
fn cp_cell(tau: f64, theta: f64, restricted: bool) -> bool {
    let family = SweepFamily::ChambollePock { classes: [cls(0.0, INF), cls(0.0, INF)] };
    let cells = sweep(&family, &[tau], &[theta], PresetKind::DualityGap, restricted, &solver());
    cells[0].feasible == Some(true)
}

#[test]
fn criterion_03_chambolle_pock_region() {
    // Claimed-feasible points may retreat one 0.01 cell toward the region
    // interior; claimed-infeasible points may advance one cell outward.
    let feasible_claims = [(1.15, 1.0, 1.14, 1.0), (1.5, 0.35, 1.49, 0.35), (0.5, 7.5, 0.5, 7.49)];
    for (t, th, t2, th2) in feasible_claims {
        assert!(
            cp_cell(t, th, false) || cp_cell(t2, th2, false),
            "expected feasible near ({t}, {th})"
        );
    }
    let infeasible_claims = [(1.25, 1.0, 1.26, 1.0), (0.5, 8.0, 0.5, 8.01)];
    for (t, th, t2, th2) in infeasible_claims {
        assert!(
            !cp_cell(t, th, false) || !cp_cell(t2, th2, false),
            "expected infeasible near ({t}, {th})"
        );
    }
    println!("criterion 03 primal-dual region verdicts: PASS");
}

#[test]
fn criterion_04_restricted_mask_recovers_classical_region() {
    // With the state-only restriction, the feasible set must collapse to
    // theta within one cell of 1 and tau * tau < 1, up to one boundary
    // cell in tau.
    for tau in [0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.98] {
        assert!(cp_cell(tau, 1.0, true), "restricted should admit tau = {tau}");
    }
    for tau in [1.01, 1.02, 1.1, 1.25, 1.5] {
        assert!(!cp_cell(tau, 1.0, true), "restricted should reject tau = {tau}");
    }
    // Rows more than one cell away from theta = 1 are empty.
    for theta in [0.98, 1.02, 0.5, 2.0, 5.0] {
        for tau in [0.5, 0.7, 0.9, 0.99] {
            assert!(
                !cp_cell(tau, theta, true),
                "restricted should reject (tau, theta) = ({tau}, {theta})"
            );
        }
    }
    println!("criterion 04 restricted-mask classical region: PASS");
}

#[test]
fn criterion_05_douglas_rachford_curve_with_empirical_oracle() {
    let classes = [cls(1.0, 2.0), cls(0.0, INF)];
    for gamma in [0.25, 0.5, 1.0, 2.0, 4.0] {
        let rep = build(Family::DouglasRachford, &[gamma, 1.0], &classes).unwrap();
        let (rho, _, _) = certified_rate(&rep, PresetKind::DistanceToSolution(1));
        assert!(rho < 1.0, "gamma={gamma}: rho {rho}");
        let worst = empirical_contraction(
            &rep,
            |rng| {
                vec![
                    quad(rng.random_range(1.0..=2.0), rng.random_range(-2.0..2.0), classes[0]),
                    quad(rng.random_range(0.0..=10.0), rng.random_range(-2.0..2.0), classes[1]),
                ]
            },
            200,
            7,
        );
        assert!(
            worst <= rho + 1e-6,
            "gamma={gamma}: empirical {worst:.6} exceeds certified {rho:.6}"
        );
    }
    println!("criterion 05 two-prox splitting curve: PASS");
}

#[test]
fn criterion_06_davis_yin_rates_dominate_observations() {
    for beta1 in [5.0, 10.0, 20.0] {
        let classes = [cls(0.0, beta1), cls(1.0, 2.0), cls(0.0, INF)];
        let rep = build(Family::DavisYin, &[0.5, 1.0], &classes).unwrap();
        let (rho, _, _) = certified_rate(&rep, PresetKind::DistanceToSolution(1));
        assert!(rho < 1.0, "beta1={beta1}: rho {rho}");
        let worst = empirical_contraction(
            &rep,
            |rng| {
                vec![
                    quad(rng.random_range(0.0..=beta1), rng.random_range(-2.0..2.0), classes[0]),
                    quad(rng.random_range(1.0..=2.0), rng.random_range(-2.0..2.0), classes[1]),
                    quad(rng.random_range(0.0..=10.0), rng.random_range(-2.0..2.0), classes[2]),
                ]
            },
            200,
            11,
        );
        assert!(
            worst <= rho + 1e-6,
            "beta1={beta1}: empirical {worst:.6} exceeds certified {rho:.6}"
        );
    }
    println!("criterion 06 three-operator splitting dominance: PASS");
}

/// Every zoo method with the parameters used across criteria 1-6.
fn certified_zoo() -> Vec<(&'static str, Method, f64, Certificate, LowerBound)> {
    let mut out = Vec::new();
    let gd = build(Family::HeavyBall, &[0.1, 0.0], &[cls(1.0, 10.0)]).unwrap();
    let (rho, cert, lb) = certified_rate(&gd, PresetKind::DistanceToSolution(1));
    out.push(("heavy_ball", gd, rho, cert, lb));
    let phb =
        build(Family::ProxHeavyBall, &[0.1, 0.1, 0.0], &[cls(1.0, 10.0), cls(0.0, INF)]).unwrap();
    let (rho, cert, lb) = certified_rate(&phb, PresetKind::DistanceToSolution(1));
    out.push(("prox_heavy_ball", phb, rho, cert, lb));
    let dr =
        build(Family::DouglasRachford, &[1.0, 1.0], &[cls(1.0, 2.0), cls(0.0, INF)]).unwrap();
    let (rho, cert, lb) = certified_rate(&dr, PresetKind::DistanceToSolution(1));
    out.push(("douglas_rachford", dr, rho, cert, lb));
    let dy = build(
        Family::DavisYin,
        &[0.5, 1.0],
        &[cls(0.0, 10.0), cls(1.0, 2.0), cls(0.0, INF)],
    )
    .unwrap();
    let (rho, cert, lb) = certified_rate(&dy, PresetKind::DistanceToSolution(1));
    out.push(("davis_yin", dy, rho, cert, lb));
    let cp = build(
        Family::ChambollePock,
        &[0.99, 0.99, 1.0],
        &[cls(0.05, 50.0), cls(0.05, 50.0)],
    )
    .unwrap();
    let (rho, cert, lb) = certified_rate(&cp, PresetKind::DistanceToSolution(1));
    out.push(("chambolle_pock", cp, rho, cert, lb));
    out
}

#[test]
fn criterion_07_weak_duality_cross_checks() {
    let solver = solver();
    let mut count = 0;
    for (name, rep, _, cert, lb) in certified_zoo() {
        let peps = certify::matched_peps(&rep, &lb, &cert, 1e4).unwrap();
        for (k, pep) in peps.iter().enumerate() {
            let out = solver.solve_max(pep).unwrap_or_else(|e| panic!("{name} C{}: {e}", k + 1));
            assert!(
                out.value <= 1e-2,
                "{name} C{} cross-check optimum {:.3e}",
                k + 1,
                out.value
            );
            count += 1;
        }
    }
    // The curves of criteria 5 and 6 at their remaining parameters.
    for gamma in [0.25, 0.5, 2.0, 4.0] {
        let rep =
            build(Family::DouglasRachford, &[gamma, 1.0], &[cls(1.0, 2.0), cls(0.0, INF)]).unwrap();
        let (_, cert, lb) = certified_rate(&rep, PresetKind::DistanceToSolution(1));
        let peps = certify::matched_peps(&rep, &lb, &cert, 1e4).unwrap();
        for (k, pep) in peps.iter().enumerate() {
            let out = solver.solve_max(pep).unwrap();
            assert!(out.value <= 1e-2, "dr gamma={gamma} C{}: {:.3e}", k + 1, out.value);
            count += 1;
        }
    }
    for beta1 in [5.0, 20.0] {
        let rep = build(
            Family::DavisYin,
            &[0.5, 1.0],
            &[cls(0.0, beta1), cls(1.0, 2.0), cls(0.0, INF)],
        )
        .unwrap();
        let (_, cert, lb) = certified_rate(&rep, PresetKind::DistanceToSolution(1));
        let peps = certify::matched_peps(&rep, &lb, &cert, 1e4).unwrap();
        for (k, pep) in peps.iter().enumerate() {
            let out = solver.solve_max(pep).unwrap();
            assert!(out.value <= 1e-2, "dy beta1={beta1} C{}: {:.3e}", k + 1, out.value);
            count += 1;
        }
    }
    println!("criterion 07 weak-duality cross-checks: PASS ({count} problems, all <= 1e-2)");
}

#[test]
fn criterion_08_trajectory_audits() {
    for (name, rep, rho, cert, lb) in certified_zoo() {
        let mut violations = 0;
        for i in 0..100u64 {
            let mut rng = StdRng::seed_from_u64(1000 + i);
            let inst = simulate::random_instance(&rep, 2, &mut rng);
            let x0 = simulate::random_state(rep.n, 2, &mut rng);
            let star = simulate::find_fixed_point(&rep, &inst, &x0, 1_000_000)
                .unwrap_or_else(|e| panic!("{name} instance {i}: {e}"));
            let traj = simulate::run(&rep, &inst, &x0, 200).unwrap();
            let report =
                simulate::audit(&traj, &star, &cert, &lb, rho, Some(PresetKind::DistanceToSolution(1)));
            if !report.ok {
                violations += 1;
            }
        }
        assert_eq!(violations, 0, "{name}: {violations} of 100 audits failed");
    }
    println!("criterion 08 trajectory audits: PASS (5 methods x 100 instances x 200 steps)");
}

#[test]
fn criterion_09_validation_suite() {
    let start = Instant::now();
    let methods = [
        build(Family::DouglasRachford, &[1.0, 1.0], &[cls(0.0, INF), cls(0.0, INF)]).unwrap(),
        build(Family::HeavyBall, &[0.1, 0.3], &[cls(1.0, 10.0)]).unwrap(),
        build(Family::ProxHeavyBall, &[0.1, 0.2, 0.1], &[cls(0.0, 1.0), cls(0.0, INF)]).unwrap(),
        build(Family::DavisYin, &[0.5, 1.0], &[cls(0.0, INF), cls(1.0, 2.0), cls(0.0, INF)])
            .unwrap(),
        build(Family::ChambollePock, &[0.99, 0.99, 1.0], &[cls(0.0, INF), cls(0.0, INF)]).unwrap(),
    ];
    for rep in &methods {
        let report = validate(rep);
        assert!(report.all_pass(), "{report}");
    }
    // Identity dynamics with no input: fixed points carry no solution.
    let counterexample = Method::new(
        lyapcert::linalg::Mat::from_rows(&[&[1.0]]),
        lyapcert::linalg::Mat::from_rows(&[&[0.0]]),
        lyapcert::linalg::Mat::from_rows(&[&[1.0]]),
        lyapcert::linalg::Mat::from_rows(&[&[0.0]]),
        vec![cls(0.0, 1.0)],
    )
    .unwrap();
    assert!(!validate(&counterexample).fixed_point_encoding);
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!("criterion 09 validation suite: PASS ({elapsed:?})");
}

#[test]
fn criterion_10_heavy_ball_ergodic_region() {
    let family = SweepFamily::HeavyBall { class: cls(0.0, 1.0) };
    let feasible = |delta: f64, gamma: f64| {
        let cells = sweep(&family, &[delta], &[gamma], PresetKind::FunctionValue, false, &solver());
        cells[0].feasible == Some(true)
    };
    // Baseline points plus one with negative momentum that the wider
    // region must contain; verdicts may move one 0.01 cell inward.
    for (delta, gamma) in [(0.0, 1.0), (0.2, 0.8), (-0.5, 0.5)] {
        assert!(
            feasible(delta, gamma) || feasible(delta, gamma - 0.01),
            "expected feasible near ({delta}, {gamma})"
        );
    }
    println!("criterion 10 momentum ergodic region: PASS");
}
