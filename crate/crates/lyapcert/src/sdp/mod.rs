//! Dense semidefinite feasibility and optimization for small LMI systems.
//!
//! The problem container holds affine PSD blocks, affine equality rows,
//! sign constraints, and an optional linear objective over one shared
//! decision vector. Feasibility is decided by a phase-I problem that
//! maximizes a uniform margin t: every PSD block must dominate t times the
//! identity and every sign-constrained variable must be at least t. The
//! margin is capped at one, which keeps phase-I bounded on homogeneous
//! systems without changing any verdict (the feasibility threshold sits
//! far below the cap).
//!
//! The built-in backend is the interior-point engine in `ipm`; the
//! `SdpSolver` trait is the seam for swapping in an external conic solver.

mod ipm;

use crate::linalg::{Mat, SymMat};
use thiserror::Error;

pub(crate) use ipm::{EqRow, LmiBlock, LmiProblem};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdpError {
    #[error("problem has no decision variables")]
    NoVariables,
    #[error("coefficient index {index} out of range for {nvars} variables")]
    IndexOutOfRange { index: usize, nvars: usize },
    #[error("block labels must be unique, duplicate: {0}")]
    DuplicateLabel(String),
    #[error("objective is unbounded above")]
    Unbounded,
    #[error("solver did not reach the requested accuracy ({0})")]
    Inaccurate(String),
    #[error("equality constraints are inconsistent")]
    InconsistentEqualities,
}

/// Affine map from the decision vector to a symmetric matrix that must be
/// positive semidefinite.
#[derive(Debug, Clone)]
pub struct PsdBlock {
    pub label: String,
    pub dim: usize,
    pub constant: SymMat,
    pub coeffs: Vec<(usize, SymMat)>,
}

/// Affine row required to equal zero: sum coeffs * z + constant = 0.
#[derive(Debug, Clone)]
pub struct EqConstraint {
    pub label: String,
    pub coeffs: Vec<(usize, f64)>,
    pub constant: f64,
}

/// Dense LMI feasibility or optimization instance.
#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub var_count: usize,
    pub psd_blocks: Vec<PsdBlock>,
    pub eq_constraints: Vec<EqConstraint>,
    pub nonneg_vars: Vec<usize>,
    /// Maximized; all zeros means pure feasibility.
    pub objective: Vec<f64>,
}

impl SdpProblem {
    pub fn new(var_count: usize) -> Self {
        SdpProblem {
            var_count,
            psd_blocks: vec![],
            eq_constraints: vec![],
            nonneg_vars: vec![],
            objective: vec![0.0; var_count],
        }
    }

    fn check(&self) -> Result<(), SdpError> {
        if self.var_count == 0 {
            return Err(SdpError::NoVariables);
        }
        let mut labels: Vec<&str> = self.psd_blocks.iter().map(|b| b.label.as_str()).collect();
        labels.sort_unstable();
        for w in labels.windows(2) {
            if w[0] == w[1] {
                return Err(SdpError::DuplicateLabel(w[0].to_string()));
            }
        }
        for b in &self.psd_blocks {
            for (idx, c) in &b.coeffs {
                if *idx >= self.var_count {
                    return Err(SdpError::IndexOutOfRange { index: *idx, nvars: self.var_count });
                }
                assert_eq!(c.dim(), b.dim, "coefficient dimension mismatch in {}", b.label);
            }
            assert_eq!(b.constant.dim(), b.dim);
        }
        for e in &self.eq_constraints {
            for (idx, _) in &e.coeffs {
                if *idx >= self.var_count {
                    return Err(SdpError::IndexOutOfRange { index: *idx, nvars: self.var_count });
                }
            }
        }
        for &idx in &self.nonneg_vars {
            if idx >= self.var_count {
                return Err(SdpError::IndexOutOfRange { index: idx, nvars: self.var_count });
            }
        }
        Ok(())
    }

    /// Evaluates one PSD block at a point.
    pub fn eval_block(&self, block: usize, z: &[f64]) -> Mat {
        let b = &self.psd_blocks[block];
        let mut s = b.constant.mat().clone();
        for (idx, c) in &b.coeffs {
            if z[*idx] != 0.0 {
                s = s.add(&c.mat().scale(z[*idx]));
            }
        }
        s
    }

    /// Smallest margin over all constraints at a point: block eigenvalues,
    /// sign constraints, and negated absolute equality residuals.
    pub fn margin_at(&self, z: &[f64]) -> f64 {
        let mut margin = f64::INFINITY;
        for b in 0..self.psd_blocks.len() {
            margin = margin.min(SymMat::symmetrize(&self.eval_block(b, z)).min_eig());
        }
        for &i in &self.nonneg_vars {
            margin = margin.min(z[i]);
        }
        for e in &self.eq_constraints {
            let v: f64 =
                e.coeffs.iter().map(|(i, c)| c * z[*i]).sum::<f64>() + e.constant;
            margin = margin.min(-v.abs());
        }
        margin
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Feasible,
    Infeasible,
    Marginal,
    MaxIterations,
}

/// Verdict of a feasibility solve, with the phase-I margin and, when the
/// margin clears the threshold, the interior point that witnesses it.
#[derive(Debug, Clone)]
pub struct SdpOutcome {
    pub status: SdpStatus,
    pub point: Option<Vec<f64>>,
    pub margin: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct MaxOutcome {
    pub value: f64,
    pub point: Vec<f64>,
    pub iterations: usize,
}

/// Margin threshold separating Feasible / Marginal / Infeasible.
pub const FEAS_EPS: f64 = 1e-8;

/// Backend seam: any conic solver able to answer the two queries can
/// replace the built-in interior-point method.
pub trait SdpSolver {
    fn solve_feasibility(&self, problem: &SdpProblem) -> Result<SdpOutcome, SdpError>;
    fn solve_max(&self, problem: &SdpProblem) -> Result<MaxOutcome, SdpError>;
}

/// The built-in dense interior-point backend.
#[derive(Debug, Clone, Default)]
pub struct InteriorPoint {
    pub max_iterations: usize,
}

impl InteriorPoint {
    pub fn new() -> Self {
        InteriorPoint { max_iterations: 200 }
    }
}

fn to_lmi(problem: &SdpProblem) -> LmiProblem {
    let mut blocks: Vec<LmiBlock> = problem
        .psd_blocks
        .iter()
        .map(|b| LmiBlock {
            dim: b.dim,
            f0: b.constant.mat().clone(),
            coeffs: b.coeffs.iter().map(|(i, c)| (*i, c.mat().clone())).collect(),
        })
        .collect();
    for &i in &problem.nonneg_vars {
        blocks.push(LmiBlock {
            dim: 1,
            f0: Mat::zeros(1, 1),
            coeffs: vec![(i, Mat::from_rows(&[&[1.0]]))],
        });
    }
    let eq = problem
        .eq_constraints
        .iter()
        .map(|e| EqRow { coeffs: e.coeffs.clone(), constant: e.constant })
        .collect();
    LmiProblem { nvars: problem.var_count, objective: problem.objective.clone(), blocks, eq }
}

impl SdpSolver for InteriorPoint {
    /// Phase-I margin maximization. The extra variable t is appended after
    /// the problem variables; its start value is low enough that every
    /// block begins strictly inside the cone.
    fn solve_feasibility(&self, problem: &SdpProblem) -> Result<SdpOutcome, SdpError> {
        problem.check()?;
        let n = problem.var_count;
        let mut lmi = to_lmi(problem);
        let t = n;
        lmi.nvars = n + 1;
        for b in &mut lmi.blocks {
            let dim = b.dim;
            b.coeffs.push((t, Mat::identity(dim).scale(-1.0)));
        }
        // Margin cap: keeps phase-I bounded when the system is a cone.
        lmi.blocks.push(LmiBlock {
            dim: 1,
            f0: Mat::from_rows(&[&[1.0]]),
            coeffs: vec![(t, Mat::from_rows(&[&[-1.0]]))],
        });
        lmi.objective = vec![0.0; n + 1];
        lmi.objective[t] = 1.0;

        let mut z0 = vec![0.0; n + 1];
        let mut t0 = -1.0_f64;
        for b in &lmi.blocks[..problem.psd_blocks.len()] {
            t0 = t0.min(SymMat::symmetrize(&b.f0).min_eig() - 1.0);
        }
        z0[t] = t0;

        let params = ipm::IpmParams {
            max_iterations: self.max_iterations.max(1),
            ..Default::default()
        };
        let res = ipm::solve(&lmi, &z0, &params);
        match res.status {
            ipm::IpmStatus::InconsistentEqualities => Ok(SdpOutcome {
                status: SdpStatus::Infeasible,
                point: None,
                margin: f64::NEG_INFINITY,
                iterations: res.iterations,
            }),
            ipm::IpmStatus::Unbounded => unreachable!("phase-I margin is capped"),
            ipm::IpmStatus::Optimal | ipm::IpmStatus::MaxIterations => {
                let margin = res.z[t];
                // A stalled solve still supports a verdict when its best
                // iterate is accurate enough for the margin sign to be
                // meaningful: near zero that means full accuracy, while a
                // margin far from the band tolerates a residual plateau.
                let tol = 1e-6_f64.max(1e-4 * margin.abs());
                let trusted = res.status == ipm::IpmStatus::Optimal
                    || (res.max_residual <= tol && res.gap <= tol);
                let status = if !trusted {
                    SdpStatus::MaxIterations
                } else if margin >= FEAS_EPS {
                    SdpStatus::Feasible
                } else if margin <= -FEAS_EPS {
                    SdpStatus::Infeasible
                } else {
                    SdpStatus::Marginal
                };
                // The best phase-I point is returned for every verdict;
                // callers on the margin boundary can still round it and
                // run the independent certificate checks.
                Ok(SdpOutcome {
                    status,
                    point: Some(res.z[..n].to_vec()),
                    margin,
                    iterations: res.iterations,
                })
            }
        }
    }

    fn solve_max(&self, problem: &SdpProblem) -> Result<MaxOutcome, SdpError> {
        problem.check()?;
        if problem.objective.iter().all(|&v| v == 0.0) {
            // Pure feasibility: the optimum of the zero objective is zero
            // at any feasible point.
            let out = self.solve_feasibility(problem)?;
            return match (out.status, out.point) {
                (SdpStatus::Infeasible, _) | (_, None) => Err(SdpError::Inaccurate(
                    "zero objective over an infeasible region".into(),
                )),
                (_, Some(point)) => {
                    Ok(MaxOutcome { value: 0.0, point, iterations: out.iterations })
                }
            };
        }
        let lmi = to_lmi(problem);
        let z0 = vec![0.0; problem.var_count];
        let scale = problem.objective.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let params = ipm::IpmParams {
            max_iterations: self.max_iterations.max(1),
            tol_feas: 1e-10,
            tol_gap: 1e-10,
            unbounded_guard: 1e12 * scale.max(1.0),
        };
        let res = ipm::solve(&lmi, &z0, &params);
        match res.status {
            ipm::IpmStatus::Optimal => Ok(MaxOutcome {
                value: res.objective,
                point: res.z,
                iterations: res.iterations,
            }),
            ipm::IpmStatus::Unbounded => Err(SdpError::Unbounded),
            ipm::IpmStatus::InconsistentEqualities => Err(SdpError::InconsistentEqualities),
            ipm::IpmStatus::MaxIterations => {
                // Relative accuracy 1e-7 is the contract; the default
                // target is stricter, so a near miss still qualifies.
                if res.max_residual < 1e-6 && res.gap < 1e-6 {
                    Ok(MaxOutcome { value: res.objective, point: res.z, iterations: res.iterations })
                } else {
                    Err(SdpError::Inaccurate(format!(
                        "residual {:.2e}, gap {:.2e} after {} iterations",
                        res.max_residual, res.gap, res.iterations
                    )))
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(dim: usize, i: usize, j: usize) -> SymMat {
        let mut m = Mat::zeros(dim, dim);
        if i == j {
            m.set(i, i, 1.0);
        } else {
            m.set(i, j, 1.0);
            m.set(j, i, 1.0);
        }
        SymMat::new(m).unwrap()
    }

    #[test]
    fn feasible_interval_lmi() {
        // [[x, 0], [0, 1-x]] PSD admits any x in [0, 1].
        let mut p = SdpProblem::new(1);
        p.psd_blocks.push(PsdBlock {
            label: "diag".into(),
            dim: 2,
            constant: SymMat::new(Mat::from_rows(&[&[0.0, 0.0], &[0.0, 1.0]])).unwrap(),
            coeffs: vec![(
                0,
                SymMat::new(Mat::from_rows(&[&[1.0, 0.0], &[0.0, -1.0]])).unwrap(),
            )],
        });
        let out = InteriorPoint::new().solve_feasibility(&p).unwrap();
        assert_eq!(out.status, SdpStatus::Feasible);
        let x = out.point.unwrap()[0];
        assert!((0.0..=1.0).contains(&x), "x = {x}");
        assert!(out.margin > FEAS_EPS);
    }

    #[test]
    fn infeasible_indefinite_lmi() {
        // [[x, 1], [1, -x]] has determinant -x^2 - 1 < 0 for every x.
        let mut p = SdpProblem::new(1);
        p.psd_blocks.push(PsdBlock {
            label: "indef".into(),
            dim: 2,
            constant: SymMat::new(Mat::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap(),
            coeffs: vec![(
                0,
                SymMat::new(Mat::from_rows(&[&[1.0, 0.0], &[0.0, -1.0]])).unwrap(),
            )],
        });
        let out = InteriorPoint::new().solve_feasibility(&p).unwrap();
        assert_eq!(out.status, SdpStatus::Infeasible);
        // Best uniform margin is attained at x = 0 with eigenvalues +-1.
        assert!((out.margin + 1.0).abs() < 1e-6, "margin {}", out.margin);
    }

    #[test]
    fn no_variables_is_an_input_error() {
        let p = SdpProblem::new(0);
        assert!(matches!(
            InteriorPoint::new().solve_feasibility(&p),
            Err(SdpError::NoVariables)
        ));
    }

    #[test]
    fn max_simple_diag() {
        let mut p = SdpProblem::new(1);
        p.psd_blocks.push(PsdBlock {
            label: "diag".into(),
            dim: 2,
            constant: SymMat::new(Mat::from_rows(&[&[0.0, 0.0], &[0.0, 1.0]])).unwrap(),
            coeffs: vec![(
                0,
                SymMat::new(Mat::from_rows(&[&[1.0, 0.0], &[0.0, -1.0]])).unwrap(),
            )],
        });
        p.objective = vec![1.0];
        let out = InteriorPoint::new().solve_max(&p).unwrap();
        assert!((out.value - 1.0).abs() < 1e-7);
    }

    #[test]
    fn max_trace_with_cap_and_nonneg() {
        // maximize g11 + g22 with G PSD and trace capped at 5.
        let mut p = SdpProblem::new(3);
        p.psd_blocks.push(PsdBlock {
            label: "G".into(),
            dim: 2,
            constant: SymMat::zeros(2),
            coeffs: vec![(0, unit(2, 0, 0)), (1, unit(2, 0, 1)), (2, unit(2, 1, 1))],
        });
        p.psd_blocks.push(PsdBlock {
            label: "cap".into(),
            dim: 1,
            constant: SymMat::new(Mat::from_rows(&[&[5.0]])).unwrap(),
            coeffs: vec![
                (0, SymMat::new(Mat::from_rows(&[&[-1.0]])).unwrap()),
                (2, SymMat::new(Mat::from_rows(&[&[-1.0]])).unwrap()),
            ],
        });
        p.objective = vec![1.0, 0.0, 1.0];
        let out = InteriorPoint::new().solve_max(&p).unwrap();
        assert!((out.value - 5.0).abs() < 1e-6, "value {}", out.value);
    }

    #[test]
    fn feasible_point_passes_independent_margin_check() {
        let mut p = SdpProblem::new(2);
        p.psd_blocks.push(PsdBlock {
            label: "b".into(),
            dim: 2,
            constant: SymMat::new(Mat::from_rows(&[&[2.0, 0.0], &[0.0, 2.0]])).unwrap(),
            coeffs: vec![(0, unit(2, 0, 1))],
        });
        p.eq_constraints.push(EqConstraint {
            label: "fix".into(),
            coeffs: vec![(1, 1.0)],
            constant: -0.25,
        });
        p.nonneg_vars = vec![1];
        let out = InteriorPoint::new().solve_feasibility(&p).unwrap();
        assert_eq!(out.status, SdpStatus::Feasible);
        let z = out.point.unwrap();
        assert!(p.margin_at(&z) > -1e-9);
        assert!((z[1] - 0.25).abs() < 1e-8);
    }

    #[test]
    fn determinism_bit_for_bit() {
        let mut p = SdpProblem::new(2);
        p.psd_blocks.push(PsdBlock {
            label: "b".into(),
            dim: 2,
            constant: SymMat::new(Mat::from_rows(&[&[1.0, 0.3], &[0.3, 0.7]])).unwrap(),
            coeffs: vec![(0, unit(2, 0, 0)), (1, unit(2, 0, 1))],
        });
        let a = InteriorPoint::new().solve_feasibility(&p).unwrap();
        let b = InteriorPoint::new().solve_feasibility(&p).unwrap();
        assert_eq!(a.margin.to_bits(), b.margin.to_bits());
        assert_eq!(a.point.unwrap(), b.point.unwrap());
    }
}
