//! Command-line front end: structural validation, rate bisection,
//! parameter-region sweeps, certificate emission, trajectory audits, and
//! batch reproduction of the reference figure datasets.
//!
//! Exit codes: 0 success, 1 infeasible or failed claim, 2 usage error,
//! 3 numerically inconclusive (marginal solves).

use clap::{Parser, Subcommand};
use lyapcert::analyze::{
    bisect_rate, fmt_sig6, grid, sweep, write_rate_csv, write_region_csv, BisectOutcome,
    RatePoint, SweepFamily, DEFAULT_BISECT_TOL,
};
use lyapcert::certify::{self, Certificate, PresetKind};
use lyapcert::model::{build, validate, Family, FunctionClass, Method};
use lyapcert::sdp::InteriorPoint;
use lyapcert::simulate;
use rayon::prelude::*;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_OK: u8 = 0;
const EXIT_FAILED_CLAIM: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_INCONCLUSIVE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "lyapcert",
    version,
    about = "Certify convergence of fixed-parameter first-order methods via quadratic Lyapunov inequalities"
)]
struct Cli {
    /// Worker threads for sweeps and audits (overridden by LYAPCERT_JOBS).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the structural assumptions of a method description.
    Validate {
        /// Method description (JSON).
        method: PathBuf,
    },
    /// Bisect for the smallest certifiable linear rate.
    Rate {
        method: PathBuf,
        /// Lower-bound preset: distance[:i], function_value, duality_gap.
        #[arg(long, default_value = "distance:1")]
        preset: String,
        #[arg(long, default_value_t = DEFAULT_BISECT_TOL)]
        tol: f64,
        /// Write a one-row rate CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also dump the certificate JSON here.
        #[arg(long)]
        cert: Option<PathBuf>,
    },
    /// Map the parameter region admitting a rate-one certificate.
    Region {
        /// Family: heavy_ball, prox_heavy_ball_d1, prox_heavy_ball_d2,
        /// chambolle_pock.
        family: String,
        /// First parameter range as a:b:step.
        #[arg(long)]
        p1: String,
        /// Second parameter range as a:b:step.
        #[arg(long)]
        p2: String,
        /// Preset override (defaults to function_value for m = 1 families,
        /// duality_gap otherwise).
        #[arg(long)]
        preset: Option<String>,
        /// "restricted" applies the state-only Lyapunov restriction
        /// (chambolle_pock only).
        #[arg(long)]
        mask: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve one feasibility instance and emit a verified certificate.
    Certify {
        method: PathBuf,
        #[arg(long)]
        rho: f64,
        #[arg(long, default_value = "distance:1")]
        preset: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay a certificate against simulated random instances.
    Audit {
        method: PathBuf,
        cert: PathBuf,
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "distance:1")]
        preset: String,
        /// Iterations simulated per instance.
        #[arg(long, default_value_t = 200)]
        iterations: usize,
        /// Dump the first instance's trajectory as CSV.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Regenerate a reference figure dataset as CSV.
    Repro {
        /// One of fig1, fig2a, fig2b, fig2c, fig3, fig4a, fig4b.
        target: String,
        #[arg(long, default_value = "repro_out")]
        out_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let jobs = std::env::var("LYAPCERT_JOBS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .or(cli.jobs);
    if let Some(n) = jobs {
        if rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global().is_err() {
            eprintln!("warning: thread pool already initialized; --jobs ignored");
        }
    }
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn load_method(path: &Path) -> Result<Method, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Method::from_json(&text)
}

fn parse_preset(text: &str) -> Result<PresetKind, String> {
    PresetKind::parse(text).ok_or_else(|| {
        format!("unknown preset '{text}' (use distance[:i], function_value, duality_gap)")
    })
}

fn parse_range(text: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("range '{text}' must be a:b:step"));
    }
    let nums: Result<Vec<f64>, _> = parts.iter().map(|p| p.parse::<f64>()).collect();
    let nums = nums.map_err(|e| format!("range '{text}': {e}"))?;
    if nums[2] <= 0.0 || nums[1] < nums[0] {
        return Err(format!("range '{text}' must have b >= a and step > 0"));
    }
    Ok(grid(nums[0], nums[1], nums[2]))
}

fn run(command: Command) -> Result<u8, String> {
    let solver = InteriorPoint::new();
    match command {
        Command::Validate { method } => {
            let rep = load_method(&method)?;
            let report = validate(&rep);
            print!("{report}");
            Ok(if report.fixed_point_encoding && report.well_posed {
                EXIT_OK
            } else {
                EXIT_FAILED_CLAIM
            })
        }
        Command::Rate { method, preset, tol, out, cert } => {
            let rep = load_method(&method)?;
            let kind = parse_preset(&preset)?;
            let lb = certify::preset(kind, &rep).map_err(|e| e.to_string())?;
            let outcome = bisect_rate(&rep, &lb, tol, None, &solver)?;
            match outcome {
                BisectOutcome::Certified { rho, certificate } => {
                    println!("rho={rho:.3}");
                    if let Some(path) = out {
                        let points =
                            [RatePoint { param: 0.0, rho: Some(rho), inconclusive: false }];
                        write_csv_file(&path, |f| write_rate_csv(&points, f))?;
                    }
                    if let Some(path) = cert {
                        fs::write(&path, certificate.to_json())
                            .map_err(|e| format!("{}: {e}", path.display()))?;
                    }
                    Ok(EXIT_OK)
                }
                BisectOutcome::NotCertified { inconclusive, diagnostics } => {
                    println!("rho=none ({diagnostics})");
                    if let Some(path) = out {
                        let points = [RatePoint { param: 0.0, rho: None, inconclusive }];
                        write_csv_file(&path, |f| write_rate_csv(&points, f))?;
                    }
                    Ok(if inconclusive { EXIT_INCONCLUSIVE } else { EXIT_FAILED_CLAIM })
                }
            }
        }
        Command::Region { family, p1, p2, preset, mask, out } => {
            let sweep_family = region_family(&family)?;
            let p1_grid = parse_range(&p1)?;
            let p2_grid = parse_range(&p2)?;
            let kind = match preset {
                Some(text) => parse_preset(&text)?,
                None => sweep_family.default_preset(),
            };
            let restricted = match mask.as_deref() {
                None => false,
                Some("restricted") => {
                    if !matches!(sweep_family, SweepFamily::ChambollePock { .. }) {
                        return Err("--mask restricted is defined only for chambolle_pock".into());
                    }
                    true
                }
                Some(other) => return Err(format!("unknown mask '{other}'")),
            };
            let cells = sweep(&sweep_family, &p1_grid, &p2_grid, kind, restricted, &solver);
            write_csv_file(&out, |f| write_region_csv(&cells, f))?;
            let feasible = cells.iter().filter(|c| c.feasible == Some(true)).count();
            let errors = cells.iter().filter(|c| c.feasible.is_none()).count();
            println!(
                "region: {} cells, {} feasible, {} solver failures -> {}",
                cells.len(),
                feasible,
                errors,
                out.display()
            );
            Ok(EXIT_OK)
        }
        Command::Certify { method, rho, preset, out } => {
            let rep = load_method(&method)?;
            let kind = parse_preset(&preset)?;
            let lb = certify::preset(kind, &rep).map_err(|e| e.to_string())?;
            let problem = certify::assemble(&rep, &lb, rho, None).map_err(|e| e.to_string())?;
            let outcome = lyapcert::sdp::SdpSolver::solve_feasibility(&solver, &problem)
                .map_err(|e| e.to_string())?;
            let verified = outcome.point.as_ref().and_then(|point| {
                let cert = certify::certificate_from_point(&rep, rho, point);
                match certify::verify(&rep, &lb, rho, &cert) {
                    Ok(report) if report.ok => Some(cert),
                    _ => None,
                }
            });
            match verified {
                Some(cert) => {
                    fs::write(&out, cert.to_json())
                        .map_err(|e| format!("{}: {e}", out.display()))?;
                    println!(
                        "feasible at rho={rho} (margin {:.3e}); certificate -> {}",
                        outcome.margin,
                        out.display()
                    );
                    Ok(EXIT_OK)
                }
                None => {
                    println!(
                        "status {:?} at rho={rho} (margin {:.3e})",
                        outcome.status, outcome.margin
                    );
                    Ok(match outcome.status {
                        lyapcert::sdp::SdpStatus::Infeasible => EXIT_FAILED_CLAIM,
                        _ => EXIT_INCONCLUSIVE,
                    })
                }
            }
        }
        Command::Audit { method, cert, instances, seed, preset, iterations, dump } => {
            let rep = load_method(&method)?;
            let text =
                fs::read_to_string(&cert).map_err(|e| format!("{}: {e}", cert.display()))?;
            let certificate = Certificate::from_json(&text)?;
            let kind = parse_preset(&preset)?;
            let lb = certify::preset(kind, &rep).map_err(|e| e.to_string())?;
            let verify_report = certify::verify(&rep, &lb, certificate.rho, &certificate)
                .map_err(|e| e.to_string())?;
            if !verify_report.ok {
                println!(
                    "certificate fails static verification: {:?}",
                    verify_report.violations
                );
                return Ok(EXIT_FAILED_CLAIM);
            }
            let failures = run_audits(
                &rep,
                &certificate,
                &lb,
                kind,
                instances,
                seed,
                iterations,
                dump.as_deref(),
            )?;
            if failures.is_empty() {
                println!("audit: {instances} instances, 0 violations");
                Ok(EXIT_OK)
            } else {
                println!("audit: {} of {instances} instances violated bounds", failures.len());
                for f in failures.iter().take(5) {
                    println!("  {f}");
                }
                Ok(EXIT_FAILED_CLAIM)
            }
        }
        Command::Repro { target, out_dir } => {
            fs::create_dir_all(&out_dir).map_err(|e| format!("{}: {e}", out_dir.display()))?;
            repro(&target, &out_dir, &solver)
        }
    }
}

fn region_family(name: &str) -> Result<SweepFamily, String> {
    let inf = f64::INFINITY;
    let f01 = FunctionClass::new(0.0, 1.0).expect("valid class");
    let f0inf = FunctionClass::new(0.0, inf).expect("valid class");
    match name {
        "heavy_ball" => Ok(SweepFamily::HeavyBall { class: f01 }),
        "prox_heavy_ball_d1" => Ok(SweepFamily::ProxHeavyBallInner { smooth: f01, prox: f0inf }),
        "prox_heavy_ball_d2" => Ok(SweepFamily::ProxHeavyBallOuter { smooth: f01, prox: f0inf }),
        "chambolle_pock" => Ok(SweepFamily::ChambollePock { classes: [f0inf, f0inf] }),
        other => Err(format!(
            "unknown region family '{other}' (heavy_ball, prox_heavy_ball_d1, prox_heavy_ball_d2, chambolle_pock)"
        )),
    }
}

#[allow(clippy::too_many_arguments)]
fn run_audits(
    rep: &Method,
    cert: &Certificate,
    lb: &certify::LowerBound,
    kind: PresetKind,
    instances: usize,
    seed: u64,
    iterations: usize,
    dump: Option<&Path>,
) -> Result<Vec<String>, String> {
    use rand::rngs::StdRng;
    use rand::SeedableRng;
    let reports: Vec<Result<(usize, simulate::AuditReport), String>> = (0..instances)
        .into_par_iter()
        .map(|i| {
            let mut rng = StdRng::seed_from_u64(seed.wrapping_add(i as u64));
            let inst = simulate::random_instance(rep, simulate::DEFAULT_DIM, &mut rng);
            let x0 = simulate::random_state(rep.n, simulate::DEFAULT_DIM, &mut rng);
            let star = simulate::find_fixed_point(rep, &inst, &x0, 1_000_000)
                .map_err(|e| format!("instance {i}: {e}"))?;
            let traj = simulate::run(rep, &inst, &x0, iterations)
                .map_err(|e| format!("instance {i}: {e}"))?;
            let report = simulate::audit(&traj, &star, cert, lb, cert.rho, Some(kind));
            Ok((i, report))
        })
        .collect();
    let mut failures = Vec::new();
    for entry in reports {
        match entry {
            Ok((i, report)) if !report.ok => failures.push(format!(
                "instance {i}: step violation {:.3e}, bound violation {:.3e}, gap identity {:.3e}",
                report.max_step_violation,
                report.max_bound_violation,
                report.max_gap_identity_error
            )),
            Ok(_) => {}
            Err(e) => failures.push(e),
        }
    }
    if let Some(path) = dump {
        let mut rng = StdRng::seed_from_u64(seed);
        let inst = simulate::random_instance(rep, simulate::DEFAULT_DIM, &mut rng);
        let x0 = simulate::random_state(rep.n, simulate::DEFAULT_DIM, &mut rng);
        let star =
            simulate::find_fixed_point(rep, &inst, &x0, 1_000_000).map_err(|e| e.to_string())?;
        let traj = simulate::run(rep, &inst, &x0, iterations).map_err(|e| e.to_string())?;
        let mut file = fs::File::create(path).map_err(|e| format!("{}: {e}", path.display()))?;
        simulate::write_trajectory_csv(&traj, &star, cert, &mut file).map_err(|e| e.to_string())?;
    }
    Ok(failures)
}

/// Bisects a family of methods over one parameter in parallel.
fn rate_curve(
    params: &[f64],
    build_rep: impl Fn(f64) -> Result<Method, String> + Sync,
    kind: PresetKind,
    solver: &InteriorPoint,
) -> Vec<RatePoint> {
    params
        .par_iter()
        .map(|&p| {
            let point = (|| -> Result<RatePoint, String> {
                let rep = build_rep(p)?;
                let lb = certify::preset(kind, &rep).map_err(|e| e.to_string())?;
                match bisect_rate(&rep, &lb, DEFAULT_BISECT_TOL, None, solver)? {
                    BisectOutcome::Certified { rho, .. } => {
                        Ok(RatePoint { param: p, rho: Some(rho), inconclusive: false })
                    }
                    BisectOutcome::NotCertified { inconclusive, .. } => {
                        Ok(RatePoint { param: p, rho: None, inconclusive })
                    }
                }
            })();
            point.unwrap_or(RatePoint { param: p, rho: None, inconclusive: true })
        })
        .collect()
}

fn write_csv_file(
    path: &Path,
    write: impl FnOnce(&mut fs::File) -> std::io::Result<()>,
) -> Result<(), String> {
    let mut file = fs::File::create(path).map_err(|e| format!("{}: {e}", path.display()))?;
    write(&mut file).map_err(|e| format!("{}: {e}", path.display()))
}

fn repro(target: &str, out_dir: &Path, solver: &InteriorPoint) -> Result<u8, String> {
    let inf = f64::INFINITY;
    let f01 = FunctionClass::new(0.0, 1.0).expect("valid class");
    let f0inf = FunctionClass::new(0.0, inf).expect("valid class");
    let f12 = FunctionClass::new(1.0, 2.0).expect("valid class");
    let f110 = FunctionClass::new(1.0, 10.0).expect("valid class");
    let f0550 = FunctionClass::new(0.05, 50.0).expect("valid class");
    match target {
        // Two-prox splitting, tight linear rate against the prox step size.
        "fig1" => {
            let gammas = grid(0.1, 5.0, 0.1);
            let points = rate_curve(
                &gammas,
                |g| {
                    build(Family::DouglasRachford, &[g, 1.0], &[f12, f0inf])
                        .map_err(|e| e.to_string())
                },
                PresetKind::DistanceToSolution(1),
                solver,
            );
            let path = out_dir.join("fig1.csv");
            write_csv_file(&path, |f| write_rate_csv(&points, f))?;
            println!("fig1: {} rates -> {}", points.len(), path.display());
        }
        // Momentum region admitting ergodic function-value convergence.
        "fig2a" => {
            let family = SweepFamily::HeavyBall { class: f01 };
            let cells = sweep(
                &family,
                &grid(-1.0, 1.0, 0.025),
                &grid(0.025, 3.0, 0.025),
                PresetKind::FunctionValue,
                false,
                solver,
            );
            let path = out_dir.join("fig2a.csv");
            write_csv_file(&path, |f| write_region_csv(&cells, f))?;
            println!("fig2a: {} cells -> {}", cells.len(), path.display());
        }
        // Same region with the momentum inside or outside the prox step.
        "fig2b" => {
            for (name, family) in [
                ("fig2b_inner.csv", SweepFamily::ProxHeavyBallInner { smooth: f01, prox: f0inf }),
                ("fig2b_outer.csv", SweepFamily::ProxHeavyBallOuter { smooth: f01, prox: f0inf }),
            ] {
                let cells = sweep(
                    &family,
                    &grid(-1.0, 1.0, 0.025),
                    &grid(0.05, 3.0, 0.05),
                    PresetKind::DualityGap,
                    false,
                    solver,
                );
                let path = out_dir.join(name);
                write_csv_file(&path, |f| write_region_csv(&cells, f))?;
                println!("fig2b: {} cells -> {}", cells.len(), path.display());
            }
        }
        // Tight momentum rates on a strongly convex smooth class.
        "fig2c" => {
            let deltas = grid(-0.6, 1.0, 0.01);
            let points = rate_curve(
                &deltas,
                |d| build(Family::HeavyBall, &[0.1, d], &[f110]).map_err(|e| e.to_string()),
                PresetKind::DistanceToSolution(1),
                solver,
            );
            let path = out_dir.join("fig2c.csv");
            write_csv_file(&path, |f| write_rate_csv(&points, f))?;
            println!("fig2c: {} rates -> {}", points.len(), path.display());
        }
        // Three-operator splitting rates against the smooth component.
        "fig3" => {
            let betas = grid(0.5, 40.0, 0.5);
            let points = rate_curve(
                &betas,
                |b| {
                    let classes =
                        [FunctionClass::new(0.0, b).map_err(|e| e.to_string())?, f12, f0inf];
                    build(Family::DavisYin, &[0.5, 1.0], &classes).map_err(|e| e.to_string())
                },
                PresetKind::DistanceToSolution(1),
                solver,
            );
            let path = out_dir.join("fig3.csv");
            write_csv_file(&path, |f| write_rate_csv(&points, f))?;
            println!("fig3: {} rates -> {}", points.len(), path.display());
        }
        // Primal-dual step-size region, plain and restricted Lyapunov.
        "fig4a" => {
            let family = SweepFamily::ChambollePock { classes: [f0inf, f0inf] };
            let taus = grid(0.5, 1.75, 0.05);
            let thetas = grid(-0.5, 8.0, 0.1);
            let cells = sweep(&family, &taus, &thetas, PresetKind::DualityGap, false, solver);
            let path = out_dir.join("fig4a.csv");
            write_csv_file(&path, |f| write_region_csv(&cells, f))?;
            let restricted = sweep(&family, &taus, &thetas, PresetKind::DualityGap, true, solver);
            let path_restricted = out_dir.join("fig4a_restricted.csv");
            write_csv_file(&path_restricted, |f| write_region_csv(&restricted, f))?;
            println!(
                "fig4a: {} cells -> {} and {}",
                cells.len(),
                path.display(),
                path_restricted.display()
            );
        }
        // Tight linear rates over the same primal-dual grid.
        "fig4b" => {
            let taus = grid(0.5, 1.75, 0.125);
            let thetas = grid(-0.5, 8.0, 0.25);
            let pairs: Vec<(f64, f64)> =
                taus.iter().flat_map(|&t| thetas.iter().map(move |&th| (t, th))).collect();
            let rows: Vec<(f64, f64, Option<f64>)> = pairs
                .par_iter()
                .map(|&(t, th)| {
                    let rho = build(Family::ChambollePock, &[t, t, th], &[f0550, f0550])
                        .ok()
                        .and_then(|rep| {
                            let lb =
                                certify::preset(PresetKind::DistanceToSolution(1), &rep).ok()?;
                            match bisect_rate(&rep, &lb, DEFAULT_BISECT_TOL, None, solver) {
                                Ok(BisectOutcome::Certified { rho, .. }) => Some(rho),
                                _ => None,
                            }
                        });
                    (t, th, rho)
                })
                .collect();
            let path = out_dir.join("fig4b.csv");
            write_csv_file(&path, |f| {
                use std::io::Write;
                writeln!(f, "tau,theta,rho")?;
                for (t, th, rho) in &rows {
                    match rho {
                        Some(r) => {
                            writeln!(f, "{},{},{}", fmt_sig6(*t), fmt_sig6(*th), fmt_sig6(*r))?
                        }
                        None => writeln!(f, "{},{},nan", fmt_sig6(*t), fmt_sig6(*th))?,
                    }
                }
                Ok(())
            })?;
            println!("fig4b: {} rates -> {}", rows.len(), path.display());
        }
        other => {
            return Err(format!(
                "unknown repro target '{other}' (fig1, fig2a, fig2b, fig2c, fig3, fig4a, fig4b)"
            ))
        }
    }
    Ok(EXIT_OK)
}
