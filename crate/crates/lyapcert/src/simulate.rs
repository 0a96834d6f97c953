//! Trajectory simulation and empirical certificate audits.
//!
//! The simulator is the independent numerical oracle of the crate: it
//! builds concrete problem instances whose class membership is provable,
//! executes the causal inner loop of the method representation, locates
//! fixed points by iteration, and evaluates the certified Lyapunov and
//! residual functions along trajectories.
//!
//! Trajectory audits are necessary evidence only: the Lyapunov inequality
//! is required at every method-consistent point, not just reachable
//! iterates, so the sufficient check remains `certify::verify`.

use crate::certify::{Certificate, LowerBound, PresetKind};
use crate::interp::{interpolates, Triplet};
use crate::linalg::SymMat;
use crate::model::{validate, FunctionClass, Method};
use rand::{Rng, RngExt};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulateError {
    #[error("method is not well-posed: {0}")]
    NotWellPosed(String),
    #[error("component {component} needs a gradient oracle but its class has beta = inf")]
    MissingGradient { component: usize },
    #[error("trajectory diverged (non-finite state) at iteration {iteration}")]
    Diverged { iteration: usize },
    #[error("fixed-point iteration did not converge: state residual {state_residual:.3e}, output spread {output_spread:.3e}, subgradient sum {subgradient_sum:.3e}")]
    NoFixedPoint { state_residual: f64, output_spread: f64, subgradient_sum: f64 },
    #[error("instance has {got} components, method needs {expected}")]
    ComponentCount { expected: usize, got: usize },
}

/// A concrete functional component with exact value, gradient, and prox.
#[derive(Debug, Clone)]
pub enum Oracle {
    /// f(x) = 1/2 sum_j curv_j (x_j - center_j)^2 + lin . x
    Quadratic { curv: Vec<f64>, center: Vec<f64>, lin: Vec<f64> },
    /// f(x) = curv/2 ||x - center||^2 + weight ||x - center||_1
    L1Quadratic { curv: f64, weight: f64, center: Vec<f64> },
    /// Indicator of the box [lo, hi]^d.
    Box { lo: f64, hi: f64 },
}

#[derive(Debug, Clone)]
pub struct ComponentOracle {
    pub class: FunctionClass,
    pub oracle: Oracle,
}

impl ComponentOracle {
    pub fn value(&self, x: &[f64]) -> f64 {
        match &self.oracle {
            Oracle::Quadratic { curv, center, lin } => {
                let mut acc = 0.0;
                for j in 0..x.len() {
                    let d = x[j] - center[j];
                    acc += 0.5 * curv[j] * d * d + lin[j] * x[j];
                }
                acc
            }
            Oracle::L1Quadratic { curv, weight, center } => {
                let mut acc = 0.0;
                for j in 0..x.len() {
                    let d = x[j] - center[j];
                    acc += 0.5 * curv * d * d + weight * d.abs();
                }
                acc
            }
            Oracle::Box { lo, hi } => {
                let inside = x.iter().all(|&v| v >= lo - 1e-9 && v <= hi + 1e-9);
                if inside {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    pub fn grad(&self, x: &[f64]) -> Option<Vec<f64>> {
        match &self.oracle {
            Oracle::Quadratic { curv, center, lin } => Some(
                (0..x.len()).map(|j| curv[j] * (x[j] - center[j]) + lin[j]).collect(),
            ),
            _ => None,
        }
    }

    /// prox_{step f}(v), exact per oracle kind.
    pub fn prox(&self, v: &[f64], step: f64) -> Vec<f64> {
        assert!(step > 0.0, "prox step must be positive");
        match &self.oracle {
            Oracle::Quadratic { curv, center, lin } => (0..v.len())
                .map(|j| (v[j] + step * (curv[j] * center[j] - lin[j])) / (1.0 + step * curv[j]))
                .collect(),
            Oracle::L1Quadratic { curv, weight, center } => (0..v.len())
                .map(|j| {
                    let shifted = v[j] - center[j];
                    let thresholded = (shifted.abs() - step * weight).max(0.0) * shifted.signum();
                    center[j] + thresholded / (1.0 + step * curv)
                })
                .collect(),
            Oracle::Box { lo, hi } => v.iter().map(|&x| x.clamp(*lo, *hi)).collect(),
        }
    }
}

/// One point of a trajectory: state, subgradients, outputs, and values,
/// each entry a vector of the simulation dimension d.
#[derive(Debug, Clone)]
pub struct TrajectoryPoint {
    pub x: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    pub f: Vec<f64>,
}

fn all_finite(point: &TrajectoryPoint) -> bool {
    point.x.iter().chain(&point.u).chain(&point.y).all(|v| v.iter().all(|e| e.is_finite()))
        && point.f.iter().all(|e| e.is_finite())
}

struct Runner<'a> {
    rep: &'a Method,
    instance: &'a [ComponentOracle],
    /// Processing order making D lower triangular.
    order: Vec<usize>,
}

impl<'a> Runner<'a> {
    fn new(rep: &'a Method, instance: &'a [ComponentOracle]) -> Result<Self, SimulateError> {
        if instance.len() != rep.m {
            return Err(SimulateError::ComponentCount { expected: rep.m, got: instance.len() });
        }
        let report = validate(rep);
        if !report.well_posed {
            return Err(SimulateError::NotWellPosed(report.to_string()));
        }
        let order = report.permutation.expect("well-posed implies an ordering");
        for (i, comp) in instance.iter().enumerate() {
            let needs_grad = rep.d.get(i, i) >= 0.0;
            if needs_grad && comp.grad(&[0.0; 1]).is_none() {
                return Err(SimulateError::MissingGradient { component: i + 1 });
            }
        }
        Ok(Runner { rep, instance, order })
    }

    /// One pass of the causal inner loop at state x, then the state update.
    fn step(&self, x: &[Vec<f64>]) -> (TrajectoryPoint, Vec<Vec<f64>>) {
        let rep = self.rep;
        let d = x[0].len();
        let m = rep.m;
        let n = rep.n;
        let mut y = vec![vec![0.0; d]; m];
        let mut u = vec![vec![0.0; d]; m];
        let mut f = vec![0.0; m];
        let mut done = vec![false; m];
        for &c in &self.order {
            // v_c = C_c x + sum over already-processed c' of D[c,c'] u_c'.
            let mut v = vec![0.0; d];
            for j in 0..n {
                let w = rep.c.get(c, j);
                if w != 0.0 {
                    for k in 0..d {
                        v[k] += w * x[j][k];
                    }
                }
            }
            for cj in 0..m {
                if done[cj] {
                    let w = rep.d.get(c, cj);
                    if w != 0.0 {
                        for k in 0..d {
                            v[k] += w * u[cj][k];
                        }
                    }
                }
            }
            let dcc = rep.d.get(c, c);
            if dcc < 0.0 {
                let step = -dcc;
                let yc = self.instance[c].prox(&v, step);
                for k in 0..d {
                    u[c][k] = (v[k] - yc[k]) / step;
                }
                y[c] = yc;
            } else {
                u[c] = self.instance[c].grad(&v).expect("checked at construction");
                y[c] = v;
            }
            f[c] = self.instance[c].value(&y[c]);
            done[c] = true;
        }
        let mut x_next = vec![vec![0.0; d]; n];
        for j in 0..n {
            for jj in 0..n {
                let w = rep.a.get(j, jj);
                if w != 0.0 {
                    for k in 0..d {
                        x_next[j][k] += w * x[jj][k];
                    }
                }
            }
            for c in 0..m {
                let w = rep.b.get(j, c);
                if w != 0.0 {
                    for k in 0..d {
                        x_next[j][k] += w * u[c][k];
                    }
                }
            }
        }
        (TrajectoryPoint { x: x.to_vec(), u, y, f }, x_next)
    }
}

/// Runs the method for `iterations` steps from state `x0` (n vectors of
/// the simulation dimension), producing iterations + 1 trajectory points.
pub fn run(
    rep: &Method,
    instance: &[ComponentOracle],
    x0: &[Vec<f64>],
    iterations: usize,
) -> Result<Vec<TrajectoryPoint>, SimulateError> {
    assert_eq!(x0.len(), rep.n, "x0 must have n state vectors");
    let runner = Runner::new(rep, instance)?;
    let mut points = Vec::with_capacity(iterations + 1);
    let mut x = x0.to_vec();
    for k in 0..=iterations {
        let (point, x_next) = runner.step(&x);
        if !all_finite(&point) || x_next.iter().any(|v| v.iter().any(|e| !e.is_finite())) {
            return Err(SimulateError::Diverged { iteration: k });
        }
        points.push(point);
        x = x_next;
    }
    Ok(points)
}

fn norm(vs: &[Vec<f64>]) -> f64 {
    vs.iter().flat_map(|v| v.iter()).map(|e| e * e).sum::<f64>().sqrt()
}

/// Iterates to a fixed point (state residual below 1e-12 relative), then
/// checks that the fixed point encodes a solution: all outputs agree and
/// the subgradients sum to zero, both to 1e-8.
pub fn find_fixed_point(
    rep: &Method,
    instance: &[ComponentOracle],
    x0: &[Vec<f64>],
    max_iterations: usize,
) -> Result<TrajectoryPoint, SimulateError> {
    let runner = Runner::new(rep, instance)?;
    let mut x = x0.to_vec();
    let mut residual = f64::INFINITY;
    for k in 0..max_iterations {
        let (point, x_next) = runner.step(&x);
        if !all_finite(&point) || x_next.iter().any(|v| v.iter().any(|e| !e.is_finite())) {
            return Err(SimulateError::Diverged { iteration: k });
        }
        let diff: Vec<Vec<f64>> = x_next
            .iter()
            .zip(&x)
            .map(|(a, b)| a.iter().zip(b).map(|(p, q)| p - q).collect())
            .collect();
        residual = norm(&diff);
        if residual <= 1e-12 * (1.0 + norm(&x)) {
            let d = x[0].len();
            let m = rep.m;
            let output_spread = (0..m)
                .map(|i| {
                    (0..d)
                        .map(|k| (point.y[i][k] - point.y[m - 1][k]).powi(2))
                        .sum::<f64>()
                        .sqrt()
                })
                .fold(0.0_f64, f64::max);
            let mut usum = vec![0.0; d];
            for ui in &point.u {
                for k in 0..d {
                    usum[k] += ui[k];
                }
            }
            let subgradient_sum = usum.iter().map(|e| e * e).sum::<f64>().sqrt();
            if output_spread > 1e-8 || subgradient_sum > 1e-8 {
                return Err(SimulateError::NoFixedPoint {
                    state_residual: residual,
                    output_spread,
                    subgradient_sum,
                });
            }
            return Ok(point);
        }
        x = x_next;
    }
    Err(SimulateError::NoFixedPoint {
        state_residual: residual,
        output_spread: f64::NAN,
        subgradient_sum: f64::NAN,
    })
}

/// Quadratic form sum_{a,b} W_ab <z_a, z_b> over stacked vectors.
fn qform(w: &SymMat, z: &[Vec<f64>]) -> f64 {
    let dim = w.dim();
    debug_assert_eq!(z.len(), dim);
    let d = z[0].len();
    let mut acc = 0.0;
    for a in 0..dim {
        for b in 0..dim {
            let wab = w.get(a, b);
            if wab != 0.0 {
                let mut inner = 0.0;
                for k in 0..d {
                    inner += z[a][k] * z[b][k];
                }
                acc += wab * inner;
            }
        }
    }
    acc
}

fn stacked<'a>(
    point: &'a TrajectoryPoint,
    star: &'a TrajectoryPoint,
) -> Vec<Vec<f64>> {
    let mut z = Vec::with_capacity(point.x.len() + 2 * point.u.len());
    for (xa, xs) in point.x.iter().zip(&star.x) {
        z.push(xa.iter().zip(xs).map(|(a, b)| a - b).collect());
    }
    for ua in &point.u {
        z.push(ua.clone());
    }
    for us in &star.u {
        z.push(us.clone());
    }
    z
}

/// Evaluates the Lyapunov function of a certificate at one point pair.
pub fn lyapunov_value(cert: &Certificate, point: &TrajectoryPoint, star: &TrajectoryPoint) -> f64 {
    let z = stacked(point, star);
    let mut v = qform(&cert.q_mat, &z);
    for (i, qi) in cert.q.iter().enumerate() {
        v += qi * (point.f[i] - star.f[i]);
    }
    v
}

/// Evaluates the residual function of a certificate at one point pair.
pub fn residual_value(cert: &Certificate, point: &TrajectoryPoint, star: &TrajectoryPoint) -> f64 {
    let z = stacked(point, star);
    let mut r = qform(&cert.s_mat, &z);
    for (i, si) in cert.s.iter().enumerate() {
        r += si * (point.f[i] - star.f[i]);
    }
    r
}

#[derive(Debug, Clone)]
pub struct AuditReport {
    pub ok: bool,
    /// Worst violation of V_next <= rho V - R + tol over the trajectory.
    pub max_step_violation: f64,
    /// Worst violation of the two lower-bound chains.
    pub max_bound_violation: f64,
    /// Worst mismatch between the residual lower bound and the directly
    /// accumulated duality gap; zero unless the duality-gap preset is on.
    pub max_gap_identity_error: f64,
    pub steps: usize,
}

/// Checks the certified inequalities along a simulated trajectory.
pub fn audit(
    trajectory: &[TrajectoryPoint],
    fixed_point: &TrajectoryPoint,
    cert: &Certificate,
    lb: &LowerBound,
    rho: f64,
    preset_kind: Option<PresetKind>,
) -> AuditReport {
    let mut max_step_violation = 0.0_f64;
    let mut max_bound_violation = 0.0_f64;
    let mut max_gap_identity_error = 0.0_f64;
    let m = fixed_point.u.len();
    let d = fixed_point.u[0].len();
    for k in 0..trajectory.len() {
        let point = &trajectory[k];
        let z = stacked(point, fixed_point);
        let v = lyapunov_value(cert, point, fixed_point);
        let r = residual_value(cert, point, fixed_point);
        let tol = 1e-7 * (1.0 + v.abs());

        if k + 1 < trajectory.len() {
            let v_next = lyapunov_value(cert, &trajectory[k + 1], fixed_point);
            max_step_violation = max_step_violation.max(v_next - (rho * v - r + tol));
        }

        let mut p_form = qform(&lb.p_mat, &z);
        let mut t_form = qform(&lb.t_mat, &z);
        for i in 0..m {
            p_form += lb.p_vec[i] * (point.f[i] - fixed_point.f[i]);
            t_form += lb.t_vec[i] * (point.f[i] - fixed_point.f[i]);
        }
        max_bound_violation = max_bound_violation
            .max(p_form - v - tol)
            .max(-p_form - tol)
            .max(t_form - r - tol)
            .max(-t_form - tol);

        if preset_kind == Some(PresetKind::DualityGap) {
            // Direct evaluation: sum_i f_i(y_i) - f_i(y_star) - <u_star_i, y_i - y_star_i>.
            let mut gap = 0.0;
            for i in 0..m {
                gap += point.f[i] - fixed_point.f[i];
                for kk in 0..d {
                    gap -= fixed_point.u[i][kk] * (point.y[i][kk] - fixed_point.y[i][kk]);
                }
            }
            max_gap_identity_error =
                max_gap_identity_error.max((gap - t_form).abs() / (1.0 + gap.abs()));
        }
    }
    AuditReport {
        ok: max_step_violation <= 0.0
            && max_bound_violation <= 0.0
            && max_gap_identity_error <= 1e-7,
        max_step_violation,
        max_bound_violation,
        max_gap_identity_error,
        steps: trajectory.len(),
    }
}

/// Writes a trajectory as CSV, one row per iteration: the iteration
/// counter, the flattened state, outputs, subgradients, values, and the
/// certified Lyapunov and residual values against the fixed point.
pub fn write_trajectory_csv(
    trajectory: &[TrajectoryPoint],
    fixed_point: &TrajectoryPoint,
    cert: &Certificate,
    out: &mut dyn std::io::Write,
) -> std::io::Result<()> {
    let n = fixed_point.x.len();
    let m = fixed_point.u.len();
    let d = fixed_point.u[0].len();
    let mut header = vec!["k".to_string()];
    for (name, count) in [("x", n), ("y", m), ("u", m)] {
        for i in 1..=count {
            for j in 1..=d {
                header.push(format!("{name}{i}_{j}"));
            }
        }
    }
    for i in 1..=m {
        header.push(format!("F{i}"));
    }
    header.push("V".into());
    header.push("R".into());
    writeln!(out, "{}", header.join(","))?;
    for (k, point) in trajectory.iter().enumerate() {
        let mut row = vec![k.to_string()];
        for group in [&point.x, &point.y, &point.u] {
            for v in group.iter().flat_map(|w| w.iter()) {
                row.push(format!("{v:.12e}"));
            }
        }
        for f in &point.f {
            row.push(format!("{f:.12e}"));
        }
        row.push(format!("{:.12e}", lyapunov_value(cert, point, fixed_point)));
        row.push(format!("{:.12e}", residual_value(cert, point, fixed_point)));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Default simulation dimension.
pub const DEFAULT_DIM: usize = 2;

/// Draws a random instance whose components provably belong to the
/// declared classes. Gradient components always get smooth quadratics;
/// prox components draw from quadratics, l1-regularized quadratics, and
/// box indicators where the class permits.
///
/// Construction constraints: the first component anchors a strictly
/// positive curvature and at most one component is an indicator, so the
/// summed objective always has a minimizer. Component minimizers cluster
/// around a shared anchor point, scaled by the curvature, which keeps the
/// solution subgradients of stiff classes at moderate magnitude.
pub fn random_instance(rep: &Method, dim: usize, rng: &mut impl Rng) -> Vec<ComponentOracle> {
    let mut out = Vec::with_capacity(rep.m);
    let mut box_used = false;
    let anchor_point: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    for i in 0..rep.m {
        let class = rep.classes[i];
        let needs_grad = rep.d.get(i, i) >= 0.0;
        let beta_cap = if class.beta.is_finite() { class.beta } else { class.sigma + 10.0 };
        let anchor = i == 0;
        let anchor_point = &anchor_point;
        let quadratic = |rng: &mut dyn rand::Rng| {
            let floor =
                if anchor { class.sigma.max((0.05_f64).min(0.5 * beta_cap)) } else { class.sigma };
            let curv: Vec<f64> = (0..dim).map(|_| rng.random_range(floor..=beta_cap)).collect();
            let center: Vec<f64> = (0..dim)
                .map(|j| anchor_point[j] + rng.random_range(-2.0..2.0) / curv[j].max(1.0))
                .collect();
            let lin: Vec<f64> = (0..dim).map(|_| rng.random_range(-0.5..0.5)).collect();
            Oracle::Quadratic { curv, center, lin }
        };
        let oracle = if anchor || needs_grad || class.beta.is_finite() {
            quadratic(rng)
        } else {
            match rng.random_range(0..3) {
                0 => quadratic(rng),
                1 => Oracle::L1Quadratic {
                    curv: rng.random_range(class.sigma..class.sigma + 5.0),
                    weight: rng.random_range(0.0..2.0),
                    center: (0..dim)
                        .map(|j| anchor_point[j] + rng.random_range(-2.0..2.0))
                        .collect(),
                },
                _ => {
                    if class.sigma == 0.0 && !box_used {
                        box_used = true;
                        let lo = anchor_point.iter().fold(f64::INFINITY, |a, &b| a.min(b))
                            - rng.random_range(0.5..3.0);
                        let hi = anchor_point.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
                            + rng.random_range(0.5..3.0);
                        Oracle::Box { lo, hi }
                    } else {
                        quadratic(rng)
                    }
                }
            }
        };
        out.push(ComponentOracle { class, oracle });
    }
    out
}

pub fn random_state(n: usize, dim: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect()).collect()
}

/// Checks the defining prox inclusion and the output equation on sampled
/// trajectory points; used by tests and the audit CLI.
pub fn trajectory_consistency(
    rep: &Method,
    instance: &[ComponentOracle],
    trajectory: &[TrajectoryPoint],
    fixed_point: &TrajectoryPoint,
) -> Result<(), String> {
    let d = fixed_point.u[0].len();
    for point in trajectory {
        // y = C x + D u, coordinate-wise.
        for i in 0..rep.m {
            for k in 0..d {
                let mut v = 0.0;
                for j in 0..rep.n {
                    v += rep.c.get(i, j) * point.x[j][k];
                }
                for j in 0..rep.m {
                    v += rep.d.get(i, j) * point.u[j][k];
                }
                if (v - point.y[i][k]).abs() > 1e-9 * (1.0 + v.abs()) {
                    return Err(format!("output equation violated at component {}", i + 1));
                }
            }
        }
        // Pairwise interpolation with the fixed point, per component.
        for i in 0..rep.m {
            let family = vec![
                Triplet { y: point.y[i].clone(), f: point.f[i], u: point.u[i].clone() },
                Triplet {
                    y: fixed_point.y[i].clone(),
                    f: fixed_point.f[i],
                    u: fixed_point.u[i].clone(),
                },
            ];
            if !interpolates(&family, &instance[i].class) {
                return Err(format!("interpolation violated at component {}", i + 1));
            }
        }
    }
    Ok(())
}
