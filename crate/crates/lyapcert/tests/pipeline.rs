//! Cross-module integration: Slater probes, certificate perturbations,
//! preset scaling, bisection monotonicity, mask monotonicity, worst-case
//! witnesses, and the rate-one telescoping bound.

use lyapcert::analyze::{bisect_rate, sweep, BisectOutcome, SweepFamily};
use lyapcert::certify::{self, Certificate, LowerBound, PresetKind};
use lyapcert::linalg::SymMat;
use lyapcert::model::{build, Family, FunctionClass};
use lyapcert::sdp::{InteriorPoint, SdpSolver, SdpStatus};
use lyapcert::simulate;
use rand::rngs::StdRng;
use rand::SeedableRng;

const INF: f64 = f64::INFINITY;

fn cls(sigma: f64, beta: f64) -> FunctionClass {
    FunctionClass::new(sigma, beta).unwrap()
}

fn gradient_method() -> lyapcert::Method {
    build(Family::HeavyBall, &[0.1, 0.0], &[cls(1.0, 10.0)]).unwrap()
}

fn feasibility_status(
    rep: &lyapcert::Method,
    lb: &LowerBound,
    rho: f64,
) -> (SdpStatus, Option<Certificate>) {
    let solver = InteriorPoint::new();
    let problem = certify::assemble(rep, lb, rho, None).unwrap();
    let out = solver.solve_feasibility(&problem).unwrap();
    let cert = out.point.as_ref().and_then(|point| {
        let cert = certify::certificate_from_point(rep, rho, point);
        certify::verify(rep, lb, rho, &cert).ok().filter(|r| r.ok).map(|_| cert)
    });
    (out.status, cert)
}

#[test]
fn gradient_method_feasibility_flips_at_the_tight_rate() {
    let rep = gradient_method();
    let lb = certify::preset(PresetKind::DistanceToSolution(1), &rep).unwrap();
    // Clearly above the tight contraction 0.81: a verified certificate.
    let (_, cert_above) = feasibility_status(&rep, &lb, 0.82);
    assert!(cert_above.is_some());
    // Clearly below: infeasible and no verifiable point.
    let (status, cert_below) = feasibility_status(&rep, &lb, 0.80);
    assert_eq!(status, SdpStatus::Infeasible);
    assert!(cert_below.is_none());
}

#[test]
fn feasibility_is_monotone_in_the_rate() {
    let rep = gradient_method();
    let lb = certify::preset(PresetKind::DistanceToSolution(1), &rep).unwrap();
    let mut seen_feasible = false;
    for rho in [0.70, 0.78, 0.80, 0.815, 0.85, 0.95, 0.999] {
        let (_, cert) = feasibility_status(&rep, &lb, rho);
        if seen_feasible {
            assert!(cert.is_some(), "feasible set must grow with rho; lost at {rho}");
        }
        seen_feasible = seen_feasible || cert.is_some();
    }
    assert!(seen_feasible);
}

#[test]
fn slater_margin_holds_for_tested_methods() {
    let solver = InteriorPoint::new();
    let dr = build(Family::DouglasRachford, &[1.0, 1.0], &[cls(1.0, 2.0), cls(0.0, INF)]).unwrap();
    let report = certify::slater_margin(&dr, &solver).unwrap();
    assert!(report.holds, "margin {}", report.margin);
    assert_eq!(report.dim_requirement, 1 + 3 * 2 - 1);

    let gd = gradient_method();
    let report = certify::slater_margin(&gd, &solver).unwrap();
    assert!(report.holds, "margin {}", report.margin);
    assert_eq!(report.dim_requirement, 2 + 3 - 1);
}

#[test]
fn verify_rejects_perturbed_certificates() {
    let rep = gradient_method();
    let lb = certify::preset(PresetKind::DistanceToSolution(1), &rep).unwrap();
    let (_, cert) = feasibility_status(&rep, &lb, 0.82);
    let cert = cert.unwrap();

    let mut negated = cert.clone();
    negated.lambda_c1[0] = -negated.lambda_c1[0] - 1e-6;
    let report = certify::verify(&rep, &lb, 0.82, &negated).unwrap();
    assert!(!report.ok);
    assert!(report.violations.iter().any(|v| v.contains("multiplier") || v.contains("C1")));

    let mut scaled = cert.clone();
    scaled.q_mat = SymMat::symmetrize(&cert.q_mat.mat().scale(2.0));
    let report = certify::verify(&rep, &lb, 0.82, &scaled).unwrap();
    assert!(!report.ok, "doubling Q alone must break the system");
}

#[test]
fn preset_scaling_scales_the_certificate_set() {
    let rep = gradient_method();
    let lb = certify::preset(PresetKind::DistanceToSolution(1), &rep).unwrap();
    let (_, cert) = feasibility_status(&rep, &lb, 0.82);
    let cert = cert.unwrap();
    let alpha = 2.5;
    let scaled_lb = LowerBound {
        p_mat: SymMat::symmetrize(&lb.p_mat.mat().scale(alpha)),
        p_vec: lb.p_vec.iter().map(|v| alpha * v).collect(),
        t_mat: SymMat::symmetrize(&lb.t_mat.mat().scale(alpha)),
        t_vec: lb.t_vec.iter().map(|v| alpha * v).collect(),
    };
    let scaled_cert = Certificate {
        rho: cert.rho,
        q_mat: SymMat::symmetrize(&cert.q_mat.mat().scale(alpha)),
        q: cert.q.iter().map(|v| alpha * v).collect(),
        s_mat: SymMat::symmetrize(&cert.s_mat.mat().scale(alpha)),
        s: cert.s.iter().map(|v| alpha * v).collect(),
        lambda_c1: cert.lambda_c1.iter().map(|v| alpha * v).collect(),
        lambda_c2: cert.lambda_c2.iter().map(|v| alpha * v).collect(),
        lambda_c3: cert.lambda_c3.iter().map(|v| alpha * v).collect(),
    };
    let report = certify::verify(&rep, &scaled_lb, 0.82, &scaled_cert).unwrap();
    assert!(report.ok, "{:?}", report.violations);
}

#[test]
fn mask_only_removes_feasible_points() {
    // Any cell feasible under the restriction stays feasible without it.
    let family = SweepFamily::ChambollePock { classes: [cls(0.0, INF), cls(0.0, INF)] };
    let solver = InteriorPoint::new();
    let taus = [0.6, 0.8, 0.95, 1.05, 1.2];
    let restricted = sweep(&family, &taus, &[1.0], PresetKind::DualityGap, true, &solver);
    let plain = sweep(&family, &taus, &[1.0], PresetKind::DualityGap, false, &solver);
    for (r, p) in restricted.iter().zip(&plain) {
        if r.feasible == Some(true) {
            assert_eq!(p.feasible, Some(true), "mask added a point at tau {}", r.p1);
        }
    }
}

#[test]
fn masked_certificates_have_exact_zero_blocks() {
    let rep =
        build(Family::ChambollePock, &[0.8, 0.8, 1.0], &[cls(0.0, INF), cls(0.0, INF)]).unwrap();
    let (mask, p_override) = certify::restricted_state_mask(&rep);
    let mut lb = certify::preset(PresetKind::DualityGap, &rep).unwrap();
    lb.p_mat = p_override;
    let problem = certify::assemble(&rep, &lb, 1.0, Some(&mask)).unwrap();
    let out = InteriorPoint::new().solve_feasibility(&problem).unwrap();
    let point = out.point.expect("solver returns its best point");
    let cert = mask.apply(&certify::certificate_from_point(&rep, 1.0, &point));
    let report = certify::verify(&rep, &lb, 1.0, &cert).unwrap();
    assert!(report.ok, "{:?}", report.violations);
    let n = rep.n;
    let dim = rep.n + 2 * rep.m;
    for i in 0..dim {
        for j in 0..dim {
            if i >= n || j >= n {
                assert_eq!(cert.q_mat.get(i, j), 0.0, "Q[{i},{j}] must be exactly zero");
            }
        }
    }
    assert!(cert.q.iter().all(|&v| v == 0.0));
}

#[test]
fn zero_objective_pep_has_zero_optimum() {
    let rep = gradient_method();
    let dim = rep.n + 2 * rep.m;
    let zero = SymMat::zeros(dim);
    let pep = certify::primal_pep(&rep, &zero, &[0.0], &zero, &[0.0], 1e4).unwrap();
    let out = InteriorPoint::new().solve_max(&pep).unwrap();
    assert_eq!(out.value, 0.0);
}

#[test]
fn worst_case_witness_below_the_tight_rate() {
    // The worst case of |y_next - y_star|^2 - rho |y - y_star|^2 is
    // positive for rho below the tight squared contraction 0.81.
    let rep = gradient_method();
    let lb = certify::preset(PresetKind::DistanceToSolution(1), &rep).unwrap();
    let rho = 0.80;
    let base = SymMat::symmetrize(&lb.p_mat.mat().scale(-rho));
    let pep = certify::primal_pep(&rep, &base, &[0.0], &lb.p_mat, &[0.0], 1e4).unwrap();
    let out = InteriorPoint::new().solve_max(&pep).unwrap();
    assert!(out.value > 1e-3, "expected a positive worst case, got {}", out.value);

    // And nonpositive (up to tolerance) above the tight rate.
    let rho = 0.82;
    let base = SymMat::symmetrize(&lb.p_mat.mat().scale(-rho));
    let pep = certify::primal_pep(&rep, &base, &[0.0], &lb.p_mat, &[0.0], 1e4).unwrap();
    let out = InteriorPoint::new().solve_max(&pep).unwrap();
    assert!(out.value <= 1e-2, "expected a nonpositive worst case, got {}", out.value);
}

#[test]
fn rate_one_certificate_telescopes_along_trajectories() {
    // Ergodic certificate for the primal-dual method: partial sums of the
    // residual stay below the initial Lyapunov value.
    let rep =
        build(Family::ChambollePock, &[0.99, 0.99, 1.0], &[cls(0.0, INF), cls(0.0, INF)]).unwrap();
    let lb = certify::preset(PresetKind::DualityGap, &rep).unwrap();
    let (_, cert) = feasibility_status(&rep, &lb, 1.0);
    let cert = cert.expect("classical parameters admit the ergodic certificate");
    let mut rng = StdRng::seed_from_u64(99);
    for _ in 0..10 {
        let inst = simulate::random_instance(&rep, 2, &mut rng);
        let x0 = simulate::random_state(rep.n, 2, &mut rng);
        let star = simulate::find_fixed_point(&rep, &inst, &x0, 1_000_000).unwrap();
        let traj = simulate::run(&rep, &inst, &x0, 300).unwrap();
        let report = simulate::audit(&traj, &star, &cert, &lb, 1.0, Some(PresetKind::DualityGap));
        assert!(report.ok, "{report:?}");
        let v0 = simulate::lyapunov_value(&cert, &traj[0], &star);
        let mut partial = 0.0;
        for point in &traj {
            partial += simulate::residual_value(&cert, point, &star);
            assert!(partial <= v0 + 1e-6 * (1.0 + v0.abs()), "{partial} vs {v0}");
        }
    }
}

#[test]
fn certificate_survives_json_round_trip_and_reverification() {
    let rep = gradient_method();
    let lb = certify::preset(PresetKind::DistanceToSolution(1), &rep).unwrap();
    let solver = InteriorPoint::new();
    let outcome = bisect_rate(&rep, &lb, 0.001, None, &solver).unwrap();
    let (rho, cert) = match outcome {
        BisectOutcome::Certified { rho, certificate } => (rho, certificate),
        other => panic!("{other:?}"),
    };
    let json = cert.to_json();
    let back = Certificate::from_json(&json).unwrap();
    assert_eq!(back.rho, rho);
    let report = certify::verify(&rep, &lb, rho, &back).unwrap();
    assert!(report.ok);
}
