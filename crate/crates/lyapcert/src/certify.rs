//! Assembly and verification of quadratic Lyapunov certificates.
//!
//! The central object is a feasibility system over a Lyapunov function
//! V(xi, xi_star) = Q(Q, (dx, u, u_star)) + q.(F - F_star) and a residual
//! function R with the same shape in (S, s). Three PSD blocks encode,
//! respectively, the per-step decrease V_next <= rho V - R over all
//! method-consistent points, the lower bound V >= P-form >= 0, and the
//! lower bound R >= T-form >= 0; the interpolation multipliers tie the
//! blocks to the declared function classes.
//!
//! Everything here is pure assembly; solving happens in `sdp`, and
//! verification recomputes all residuals from scratch so a returned
//! certificate never has to be trusted.

use crate::interp::{StructureMatrices, Tag, PAIRS2, PAIRS3};
use crate::linalg::{Mat, SymMat};
use crate::model::{validate, Method};
use crate::sdp::{EqConstraint, PsdBlock, SdpProblem};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertifyError {
    #[error("method fails structural validation: {0}")]
    InvalidMethod(String),
    #[error("preset {preset} requires {requirement}")]
    PresetMismatch { preset: &'static str, requirement: String },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("rho must lie in [0, 1], got {0}")]
    BadRho(f64),
}

/// What the Lyapunov inequality is required to imply: quadratic lower
/// bounds on V (matrix P, vector p) and on R (matrix T, vector t).
#[derive(Debug, Clone)]
pub struct LowerBound {
    pub p_mat: SymMat,
    pub p_vec: Vec<f64>,
    pub t_mat: SymMat,
    pub t_vec: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PresetKind {
    /// Linear convergence of the squared distance of y^(i) to the solution
    /// (component index is 1-based).
    DistanceToSolution(usize),
    /// Ergodic function value suboptimality; single-component methods only.
    FunctionValue,
    /// Ergodic duality gap.
    DualityGap,
}

impl PresetKind {
    pub fn parse(text: &str) -> Option<PresetKind> {
        if let Some(rest) = text.strip_prefix("distance:") {
            return rest.parse::<usize>().ok().map(PresetKind::DistanceToSolution);
        }
        match text {
            "distance" => Some(PresetKind::DistanceToSolution(1)),
            "function_value" => Some(PresetKind::FunctionValue),
            "duality_gap" => Some(PresetKind::DualityGap),
            _ => None,
        }
    }

    pub fn name(&self) -> String {
        match self {
            PresetKind::DistanceToSolution(i) => format!("distance:{i}"),
            PresetKind::FunctionValue => "function_value".into(),
            PresetKind::DualityGap => "duality_gap".into(),
        }
    }
}

/// Builds the lower-bound data for a preset from the method's C and D.
pub fn preset(kind: PresetKind, rep: &Method) -> Result<LowerBound, CertifyError> {
    let n = rep.n;
    let m = rep.m;
    let dim = n + 2 * m;
    // J = [C  D  -D] maps (dx, u, u_star) to y - y_star.
    let j = Mat::hstack(&[&rep.c, &rep.d, &rep.d.neg()]);
    match kind {
        PresetKind::DistanceToSolution(i) => {
            if i == 0 || i > m {
                return Err(CertifyError::PresetMismatch {
                    preset: "distance_to_solution",
                    requirement: format!("component index in 1..={m}"),
                });
            }
            let mut sel = Mat::zeros(m, m);
            sel.set(i - 1, i - 1, 1.0);
            let p = Mat::congruence(&j, &sel);
            Ok(LowerBound {
                p_mat: SymMat::symmetrize(&p),
                p_vec: vec![0.0; m],
                t_mat: SymMat::zeros(dim),
                t_vec: vec![0.0; m],
            })
        }
        PresetKind::FunctionValue => {
            if m != 1 {
                return Err(CertifyError::PresetMismatch {
                    preset: "function_value",
                    requirement: "a single-component method".into(),
                });
            }
            Ok(LowerBound {
                p_mat: SymMat::zeros(dim),
                p_vec: vec![0.0; m],
                t_mat: SymMat::zeros(dim),
                t_vec: vec![1.0],
            })
        }
        PresetKind::DualityGap => {
            // K = [C D -D; 0 0 I], middle weight [[0, -I/2], [-I/2, 0]]:
            // the quadratic form evaluates to -<y - y_star, u_star>.
            let bottom = Mat::hstack(&[&Mat::zeros(m, n), &Mat::zeros(m, m), &Mat::identity(m)]);
            let k = Mat::vstack(&[&j, &bottom]);
            let mut w = Mat::zeros(2 * m, 2 * m);
            for r in 0..m {
                w.set(r, m + r, -0.5);
                w.set(m + r, r, -0.5);
            }
            let t = Mat::congruence(&k, &w);
            Ok(LowerBound {
                p_mat: SymMat::zeros(dim),
                p_vec: vec![0.0; m],
                t_mat: SymMat::symmetrize(&t),
                t_vec: vec![1.0; m],
            })
        }
    }
}

/// Entry pattern forced to zero in the decision variables. The patterns on
/// the two matrices must be symmetric.
#[derive(Debug, Clone, Default)]
pub struct StructureMask {
    pub q_mat_zero: Vec<(usize, usize)>,
    pub q_vec_zero: Vec<usize>,
    pub s_mat_zero: Vec<(usize, usize)>,
    pub s_vec_zero: Vec<usize>,
}

impl StructureMask {
    /// Pins the masked entries of a solved certificate to exactly zero
    /// (the solver satisfies the pinning rows only to its tolerance).
    pub fn apply(&self, cert: &Certificate) -> Certificate {
        let mut out = cert.clone();
        let mut q = cert.q_mat.mat().clone();
        for &(i, j) in &self.q_mat_zero {
            q.set(i, j, 0.0);
            q.set(j, i, 0.0);
        }
        out.q_mat = SymMat::symmetrize(&q);
        let mut s = cert.s_mat.mat().clone();
        for &(i, j) in &self.s_mat_zero {
            s.set(i, j, 0.0);
            s.set(j, i, 0.0);
        }
        out.s_mat = SymMat::symmetrize(&s);
        for &i in &self.q_vec_zero {
            out.q[i] = 0.0;
        }
        for &i in &self.s_vec_zero {
            out.s[i] = 0.0;
        }
        out
    }
}

/// The restriction that recovers the classical convergence region of the
/// primal-dual two-prox method: the Lyapunov matrix may only touch the
/// state block (Q = blkdiag(Q_xx, 0), q = 0) and the V lower bound is
/// raised from zero to the squared state distance (P = blkdiag(I_n, 0)).
pub fn restricted_state_mask(rep: &Method) -> (StructureMask, SymMat) {
    let n = rep.n;
    let m = rep.m;
    let dim = n + 2 * m;
    let mut mask = StructureMask::default();
    for i in 0..dim {
        for j in i..dim {
            if i >= n || j >= n {
                mask.q_mat_zero.push((i, j));
            }
        }
    }
    mask.q_vec_zero = (0..m).collect();
    let mut p = Mat::zeros(dim, dim);
    for i in 0..n {
        p.set(i, i, 1.0);
    }
    (mask, SymMat::new(p).unwrap())
}

/// A Lyapunov certificate: the function pair (Q, q, S, s) plus the three
/// interpolation multiplier families, serialized in the fixed pair order
/// (base,next), (next,base), (base,star), (star,base), (next,star),
/// (star,next) with the component index running fastest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Certificate {
    pub rho: f64,
    #[serde(rename = "Q", serialize_with = "ser_mat", deserialize_with = "de_mat")]
    pub q_mat: SymMat,
    pub q: Vec<f64>,
    #[serde(rename = "S", serialize_with = "ser_mat", deserialize_with = "de_mat")]
    pub s_mat: SymMat,
    pub s: Vec<f64>,
    #[serde(rename = "lambda_C1")]
    pub lambda_c1: Vec<f64>,
    #[serde(rename = "lambda_C2")]
    pub lambda_c2: Vec<f64>,
    #[serde(rename = "lambda_C3")]
    pub lambda_c3: Vec<f64>,
}

fn ser_mat<S: serde::Serializer>(m: &SymMat, s: S) -> Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> =
        (0..m.dim()).map(|i| (0..m.dim()).map(|j| m.get(i, j)).collect()).collect();
    rows.serialize(s)
}

fn de_mat<'de, D: serde::Deserializer<'de>>(d: D) -> Result<SymMat, D::Error> {
    let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
    let n = rows.len();
    for row in &rows {
        if row.len() != n {
            return Err(serde::de::Error::custom("matrix must be square"));
        }
    }
    let m = Mat::from_fn(n, n, |i, j| rows[i][j]);
    SymMat::new(m).map_err(serde::de::Error::custom)
}

impl Certificate {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| e.to_string())
    }
}

/// Index bookkeeping for the decision vector of the feasibility system:
/// upper triangles of Q and S (row-major, no scaling), then q, s, then the
/// three multiplier families.
#[derive(Debug, Clone, Copy)]
pub(crate) struct VarLayout {
    pub dim: usize,
    pub m: usize,
    pub sym_len: usize,
}

impl VarLayout {
    pub fn new(n: usize, m: usize) -> Self {
        let dim = n + 2 * m;
        VarLayout { dim, m, sym_len: dim * (dim + 1) / 2 }
    }

    pub fn total(&self) -> usize {
        2 * self.sym_len + 2 * self.m + 6 * self.m + 2 * self.m + 2 * self.m
    }

    pub fn sym_index(&self, i: usize, j: usize) -> usize {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        a * self.dim - a * (a + 1) / 2 + b
    }

    pub fn q_mat(&self, i: usize, j: usize) -> usize {
        self.sym_index(i, j)
    }

    pub fn q_vec(&self, i: usize) -> usize {
        self.sym_len + i
    }

    pub fn s_mat(&self, i: usize, j: usize) -> usize {
        self.sym_len + self.m + self.sym_index(i, j)
    }

    pub fn s_vec(&self, i: usize) -> usize {
        2 * self.sym_len + self.m + i
    }

    pub fn lambda_c1(&self, pair: usize, l: usize) -> usize {
        2 * self.sym_len + 2 * self.m + pair * self.m + l
    }

    pub fn lambda_c2(&self, pair: usize, l: usize) -> usize {
        2 * self.sym_len + 8 * self.m + pair * self.m + l
    }

    pub fn lambda_c3(&self, pair: usize, l: usize) -> usize {
        2 * self.sym_len + 10 * self.m + pair * self.m + l
    }

    pub fn unpack(&self, rho: f64, z: &[f64]) -> Certificate {
        let dim = self.dim;
        let m = self.m;
        let q_mat = SymMat::symmetrize(&Mat::from_fn(dim, dim, |i, j| z[self.q_mat(i, j)]));
        let s_mat = SymMat::symmetrize(&Mat::from_fn(dim, dim, |i, j| z[self.s_mat(i, j)]));
        Certificate {
            rho,
            q_mat,
            q: (0..m).map(|i| z[self.q_vec(i)]).collect(),
            s_mat,
            s: (0..m).map(|i| z[self.s_vec(i)]).collect(),
            lambda_c1: (0..6 * m).map(|k| z[self.lambda_c1(k / m, k % m)]).collect(),
            lambda_c2: (0..2 * m).map(|k| z[self.lambda_c2(k / m, k % m)]).collect(),
            lambda_c3: (0..2 * m).map(|k| z[self.lambda_c3(k / m, k % m)]).collect(),
        }
    }
}

fn require_valid(rep: &Method) -> Result<(), CertifyError> {
    let report = validate(rep);
    if !report.fixed_point_encoding || !report.well_posed {
        return Err(CertifyError::InvalidMethod(format!("{report}")));
    }
    Ok(())
}

fn check_dims(rep: &Method, lb: &LowerBound) -> Result<(), CertifyError> {
    let dim = rep.n + 2 * rep.m;
    if lb.p_mat.dim() != dim || lb.t_mat.dim() != dim {
        return Err(CertifyError::Dimension(format!(
            "lower-bound matrices must have dimension {dim}"
        )));
    }
    if lb.p_vec.len() != rep.m || lb.t_vec.len() != rep.m {
        return Err(CertifyError::Dimension(format!(
            "lower-bound vectors must have length {}",
            rep.m
        )));
    }
    Ok(())
}

/// Elementary symmetric matrix: ones at (i, j) and (j, i), one at (i, i)
/// on the diagonal.
fn sym_unit(dim: usize, i: usize, j: usize) -> SymMat {
    let mut u = Mat::zeros(dim, dim);
    if i == j {
        u.set(i, i, 1.0);
    } else {
        u.set(i, j, 1.0);
        u.set(j, i, 1.0);
    }
    SymMat::new(u).expect("unit matrix is symmetric")
}

/// Outer-product congruence of a selector with the elementary symmetric
/// matrix having ones at (i, j) and (j, i).
fn lifted_unit(selector: &Mat, i: usize, j: usize) -> Mat {
    let cols = selector.cols();
    let ri: Vec<f64> = (0..cols).map(|c| selector.get(i, c)).collect();
    let rj: Vec<f64> = (0..cols).map(|c| selector.get(j, c)).collect();
    let mut out = Mat::zeros(cols, cols);
    for a in 0..cols {
        for b in 0..cols {
            let mut v = ri[a] * rj[b];
            if i != j {
                v += rj[a] * ri[b];
            }
            out.set(a, b, v);
        }
    }
    out
}

/// Assembles the Lyapunov feasibility system for the given method, lower
/// bound, and rate as a dense LMI problem. The mask pins selected entries
/// of (Q, q, S, s) to zero through explicit equality rows.
pub fn assemble(
    rep: &Method,
    lb: &LowerBound,
    rho: f64,
    mask: Option<&StructureMask>,
) -> Result<SdpProblem, CertifyError> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(CertifyError::BadRho(rho));
    }
    require_valid(rep)?;
    check_dims(rep, lb)?;
    let structure =
        StructureMatrices::new(rep).map_err(|e| CertifyError::InvalidMethod(e.to_string()))?;
    let layout = VarLayout::new(rep.n, rep.m);
    let m = rep.m;
    let dim = layout.dim;
    let lifted = structure.lifted_dim;
    let mut problem = SdpProblem::new(layout.total());

    // PSD block for the per-step inequality.
    let mut c1 = PsdBlock {
        label: "C1".into(),
        dim: lifted,
        constant: SymMat::zeros(lifted),
        coeffs: vec![],
    };
    for i in 0..dim {
        for j in i..dim {
            let base = lifted_unit(&structure.sigma_base, i, j);
            let next = lifted_unit(&structure.sigma_next, i, j);
            c1.coeffs.push((
                layout.q_mat(i, j),
                SymMat::symmetrize(&base.scale(rho).sub(&next)),
            ));
            c1.coeffs.push((layout.s_mat(i, j), SymMat::symmetrize(&base.neg())));
        }
    }
    for (pair, &(pi, pj)) in PAIRS3.iter().enumerate() {
        for l in 0..m {
            c1.coeffs.push((layout.lambda_c1(pair, l), structure.m_lifted(l, pi, pj).clone()));
        }
    }

    // PSD blocks for the two lower bounds. These conditions never touch
    // the successor subgradients, so their lifted matrices carry a
    // structurally zero block there; the solver sees the equivalent
    // principal submatrix on the active coordinates so that a uniform
    // strict margin remains attainable.
    let active: Vec<usize> =
        (0..rep.n + m).chain(rep.n + 2 * m..lifted).collect();
    let mut c2 = PsdBlock {
        label: "C2".into(),
        dim: active.len(),
        constant: SymMat::symmetrize(
            &Mat::congruence(&structure.sigma_base, lb.p_mat.mat()).neg().select(&active),
        ),
        coeffs: vec![],
    };
    let mut c3 = PsdBlock {
        label: "C3".into(),
        dim: active.len(),
        constant: SymMat::symmetrize(
            &Mat::congruence(&structure.sigma_base, lb.t_mat.mat()).neg().select(&active),
        ),
        coeffs: vec![],
    };
    for i in 0..dim {
        for j in i..dim {
            let base =
                SymMat::symmetrize(&lifted_unit(&structure.sigma_base, i, j).select(&active));
            c2.coeffs.push((layout.q_mat(i, j), base.clone()));
            c3.coeffs.push((layout.s_mat(i, j), base));
        }
    }
    for (pair, &(pi, pj)) in PAIRS2.iter().enumerate() {
        for l in 0..m {
            let compressed =
                SymMat::symmetrize(&structure.m_lifted(l, pi, pj).mat().select(&active));
            c2.coeffs.push((layout.lambda_c2(pair, l), compressed.clone()));
            c3.coeffs.push((layout.lambda_c3(pair, l), compressed));
        }
    }
    problem.psd_blocks.push(c1);
    problem.psd_blocks.push(c2);
    problem.psd_blocks.push(c3);

    // Value-coordinate equalities, one vector in R^{2m} per condition.
    for r in 0..2 * m {
        let mut row = EqConstraint {
            label: format!("C1-eq[{r}]"),
            coeffs: vec![],
            constant: 0.0,
        };
        if r < m {
            row.coeffs.push((layout.q_vec(r), rho));
            row.coeffs.push((layout.s_vec(r), -1.0));
        } else {
            row.coeffs.push((layout.q_vec(r - m), -1.0));
        }
        for (pair, &(pi, pj)) in PAIRS3.iter().enumerate() {
            for l in 0..m {
                let a = structure.a_lifted(l, pi, pj)[r];
                if a != 0.0 {
                    row.coeffs.push((layout.lambda_c1(pair, l), a));
                }
            }
        }
        problem.eq_constraints.push(row);
    }
    for r in 0..2 * m {
        let mut row = EqConstraint {
            label: format!("C2-eq[{r}]"),
            coeffs: vec![],
            constant: if r < m { -lb.p_vec[r] } else { 0.0 },
        };
        if r < m {
            row.coeffs.push((layout.q_vec(r), 1.0));
        }
        for (pair, &(pi, pj)) in PAIRS2.iter().enumerate() {
            for l in 0..m {
                let a = structure.a_lifted(l, pi, pj)[r];
                if a != 0.0 {
                    row.coeffs.push((layout.lambda_c2(pair, l), a));
                }
            }
        }
        problem.eq_constraints.push(row);
    }
    for r in 0..2 * m {
        let mut row = EqConstraint {
            label: format!("C3-eq[{r}]"),
            coeffs: vec![],
            constant: if r < m { -lb.t_vec[r] } else { 0.0 },
        };
        if r < m {
            row.coeffs.push((layout.s_vec(r), 1.0));
        }
        for (pair, &(pi, pj)) in PAIRS2.iter().enumerate() {
            for l in 0..m {
                let a = structure.a_lifted(l, pi, pj)[r];
                if a != 0.0 {
                    row.coeffs.push((layout.lambda_c3(pair, l), a));
                }
            }
        }
        problem.eq_constraints.push(row);
    }

    for k in 0..6 * m {
        problem.nonneg_vars.push(layout.lambda_c1(k / m, k % m));
    }
    for k in 0..2 * m {
        problem.nonneg_vars.push(layout.lambda_c2(k / m, k % m));
        problem.nonneg_vars.push(layout.lambda_c3(k / m, k % m));
    }

    if let Some(mask) = mask {
        let mut pin = |label: String, idx: usize| {
            problem.eq_constraints.push(EqConstraint {
                label,
                coeffs: vec![(idx, 1.0)],
                constant: 0.0,
            });
        };
        for &(i, j) in &mask.q_mat_zero {
            pin(format!("mask-Q[{i},{j}]"), layout.q_mat(i, j));
        }
        for &i in &mask.q_vec_zero {
            pin(format!("mask-q[{i}]"), layout.q_vec(i));
        }
        for &(i, j) in &mask.s_mat_zero {
            pin(format!("mask-S[{i},{j}]"), layout.s_mat(i, j));
        }
        for &i in &mask.s_vec_zero {
            pin(format!("mask-s[{i}]"), layout.s_vec(i));
        }
    }

    Ok(problem)
}

/// Certificate extracted from a feasibility point of `assemble`'s problem.
///
/// Two deterministic rounding steps bring the solver point onto known
/// properties of exact certificates: multipliers that are negative by
/// less than the verification tolerance are set to zero, and the
/// quadratic forms of Q and S are projected to vanish exactly on the
/// pinched directions (0, w, w) with w summing to zero. Every exact
/// certificate satisfies both (combining the three conditions at a fixed
/// point forces V = R = 0 there), so the projection only removes solver
/// noise that trajectory audits would otherwise amplify by the squared
/// magnitude of the fixed-point subgradients.
pub fn certificate_from_point(rep: &Method, rho: f64, point: &[f64]) -> Certificate {
    let mut cert = VarLayout::new(rep.n, rep.m).unpack(rho, point);
    for lam in cert
        .lambda_c1
        .iter_mut()
        .chain(cert.lambda_c2.iter_mut())
        .chain(cert.lambda_c3.iter_mut())
    {
        if *lam < 0.0 && *lam > -1e-7 {
            *lam = 0.0;
        }
    }
    cert.q_mat = project_pinched_directions(rep, &cert.q_mat);
    cert.s_mat = project_pinched_directions(rep, &cert.s_mat);
    cert
}

/// Subtracts from the (u_star, u_star) block the defect that makes
/// w -> Q(W, (0, w, w)) nonzero on zero-sum w.
fn project_pinched_directions(rep: &Method, w: &SymMat) -> SymMat {
    let n = rep.n;
    let m = rep.m;
    if m < 2 {
        return w.clone();
    }
    let u = |i: usize| n + i;
    let us = |i: usize| n + m + i;
    // K_ij = W_uu + W_usus + W_uus + W_usu on the component indices.
    let k = Mat::from_fn(m, m, |i, j| {
        w.get(u(i), u(j)) + w.get(us(i), us(j)) + w.get(u(i), us(j)) + w.get(us(i), u(j))
    });
    // Projector onto zero-sum vectors.
    let proj = Mat::from_fn(m, m, |i, j| if i == j { 1.0 - 1.0 / m as f64 } else { -1.0 / m as f64 });
    let defect = Mat::congruence(&proj, &k);
    let mut out = w.mat().clone();
    for i in 0..m {
        for j in 0..m {
            out.add_at(us(i), us(j), -defect.get(i, j));
        }
    }
    SymMat::symmetrize(&out)
}

/// Independent recheck of a certificate: rebuilds the three LMI matrices
/// and equality residuals directly from the certificate data.
#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub ok: bool,
    pub min_eigs: [f64; 3],
    pub eq_residuals: [f64; 3],
    pub lambda_min: f64,
    pub violations: Vec<String>,
}

pub fn verify(
    rep: &Method,
    lb: &LowerBound,
    rho: f64,
    cert: &Certificate,
) -> Result<VerifyReport, CertifyError> {
    check_dims(rep, lb)?;
    let structure =
        StructureMatrices::new(rep).map_err(|e| CertifyError::InvalidMethod(e.to_string()))?;
    let m = rep.m;
    let dim = rep.n + 2 * m;
    if cert.q_mat.dim() != dim || cert.s_mat.dim() != dim {
        return Err(CertifyError::Dimension(format!("certificate matrices must be {dim}x{dim}")));
    }
    if cert.q.len() != m
        || cert.s.len() != m
        || cert.lambda_c1.len() != 6 * m
        || cert.lambda_c2.len() != 2 * m
        || cert.lambda_c3.len() != 2 * m
    {
        return Err(CertifyError::Dimension("certificate vector lengths".into()));
    }
    let mut violations = Vec::new();

    let combine = |base: Mat, lambdas: &[f64], pairs: &[(Tag, Tag)]| -> Mat {
        let mut acc = base;
        for (pair, &(pi, pj)) in pairs.iter().enumerate() {
            for l in 0..m {
                let w = lambdas[pair * m + l];
                if w != 0.0 {
                    acc = acc.add(&structure.m_lifted(l, pi, pj).mat().scale(w));
                }
            }
        }
        acc
    };

    let rho_q_minus_s = cert.q_mat.mat().scale(rho).sub(cert.s_mat.mat());
    let g1_base = Mat::congruence(&structure.sigma_base, &rho_q_minus_s)
        .sub(&Mat::congruence(&structure.sigma_next, cert.q_mat.mat()));
    let g1 = SymMat::symmetrize(&combine(g1_base, &cert.lambda_c1, &PAIRS3));
    let g2_base = Mat::congruence(&structure.sigma_base, &cert.q_mat.mat().sub(lb.p_mat.mat()));
    let g2 = SymMat::symmetrize(&combine(g2_base, &cert.lambda_c2, &PAIRS2));
    let g3_base = Mat::congruence(&structure.sigma_base, &cert.s_mat.mat().sub(lb.t_mat.mat()));
    let g3 = SymMat::symmetrize(&combine(g3_base, &cert.lambda_c3, &PAIRS2));

    let mut min_eigs = [0.0; 3];
    for (k, g) in [&g1, &g2, &g3].iter().enumerate() {
        let lam = g.min_eig();
        min_eigs[k] = lam;
        let floor = -1e-7 * (1.0 + g.spectral_radius());
        if lam < floor {
            violations.push(format!("C{} block has eigenvalue {lam:.3e}", k + 1));
        }
    }

    let eq_res = |head: &dyn Fn(usize) -> f64, lambdas: &[f64], pairs: &[(Tag, Tag)]| -> f64 {
        let mut worst = 0.0_f64;
        for r in 0..2 * m {
            let mut acc = head(r);
            for (pair, &(pi, pj)) in pairs.iter().enumerate() {
                for l in 0..m {
                    acc += lambdas[pair * m + l] * structure.a_lifted(l, pi, pj)[r];
                }
            }
            worst = worst.max(acc.abs());
        }
        worst
    };
    let c1_head = |r: usize| {
        if r < m {
            rho * cert.q[r] - cert.s[r]
        } else {
            -cert.q[r - m]
        }
    };
    let c2_head = |r: usize| if r < m { cert.q[r] - lb.p_vec[r] } else { 0.0 };
    let c3_head = |r: usize| if r < m { cert.s[r] - lb.t_vec[r] } else { 0.0 };
    let eq_residuals = [
        eq_res(&c1_head, &cert.lambda_c1, &PAIRS3),
        eq_res(&c2_head, &cert.lambda_c2, &PAIRS2),
        eq_res(&c3_head, &cert.lambda_c3, &PAIRS2),
    ];
    for (k, r) in eq_residuals.iter().enumerate() {
        if *r > 1e-7 {
            violations.push(format!("C{} equality residual {r:.3e}", k + 1));
        }
    }

    let lambda_min = cert
        .lambda_c1
        .iter()
        .chain(&cert.lambda_c2)
        .chain(&cert.lambda_c3)
        .fold(f64::INFINITY, |acc, &v| acc.min(v));
    if lambda_min < -1e-10 {
        violations.push(format!("negative multiplier {lambda_min:.3e}"));
    }

    Ok(VerifyReport { ok: violations.is_empty(), min_eigs, eq_residuals, lambda_min, violations })
}

/// The Gram-lifted worst-case maximization used as a cross-check oracle:
///
/// ```text
/// maximize   <bQ, G> + bq . chi
/// s.t.       a_{(l,i,j)} . chi + <M_{(l,i,j)}, G> <= 0   (all 6m pairs)
///            G PSD,  trace(G) <= trace_cap
/// ```
///
/// with bQ assembled from the base and successor objective pieces. Any
/// multiplier point feasible for the matching condition of the Lyapunov
/// system certifies a nonpositive optimum here by weak duality.
pub fn primal_pep(
    rep: &Method,
    q_base: &SymMat,
    q_base_lin: &[f64],
    q_next: &SymMat,
    q_next_lin: &[f64],
    trace_cap: f64,
) -> Result<SdpProblem, CertifyError> {
    assert!(trace_cap > 0.0, "trace cap must be positive");
    let structure =
        StructureMatrices::new(rep).map_err(|e| CertifyError::InvalidMethod(e.to_string()))?;
    let m = rep.m;
    let dim = rep.n + 2 * m;
    if q_base.dim() != dim || q_next.dim() != dim || q_base_lin.len() != m || q_next_lin.len() != m
    {
        return Err(CertifyError::Dimension("objective pieces".into()));
    }
    let lifted = structure.lifted_dim;
    let sym_len = lifted * (lifted + 1) / 2;
    let nvars = sym_len + 2 * m;
    let sym_index = |i: usize, j: usize| -> usize {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        a * lifted - a * (a + 1) / 2 + b
    };
    let chi = |r: usize| sym_len + r;

    let mut problem = SdpProblem::new(nvars);
    let mut gram = PsdBlock {
        label: "G".into(),
        dim: lifted,
        constant: SymMat::zeros(lifted),
        coeffs: vec![],
    };
    for i in 0..lifted {
        for j in i..lifted {
            gram.coeffs.push((sym_index(i, j), sym_unit(lifted, i, j)));
        }
    }
    problem.psd_blocks.push(gram);

    // One scalar block per interpolation constraint.
    for (pair, &(pi, pj)) in PAIRS3.iter().enumerate() {
        for l in 0..m {
            let mlij = structure.m_lifted(l, pi, pj);
            let alij = structure.a_lifted(l, pi, pj);
            let mut coeffs: Vec<(usize, SymMat)> = vec![];
            for i in 0..lifted {
                for j in i..lifted {
                    let w = if i == j { mlij.get(i, i) } else { 2.0 * mlij.get(i, j) };
                    if w != 0.0 {
                        coeffs.push((
                            sym_index(i, j),
                            SymMat::new(Mat::from_rows(&[&[-w]])).unwrap(),
                        ));
                    }
                }
            }
            for (r, &a) in alij.iter().enumerate() {
                if a != 0.0 {
                    coeffs.push((chi(r), SymMat::new(Mat::from_rows(&[&[-a]])).unwrap()));
                }
            }
            problem.psd_blocks.push(PsdBlock {
                label: format!("interp[{pair},{l}]"),
                dim: 1,
                constant: SymMat::zeros(1),
                coeffs,
            });
        }
    }

    let mut cap_coeffs: Vec<(usize, SymMat)> = vec![];
    for i in 0..lifted {
        cap_coeffs.push((sym_index(i, i), SymMat::new(Mat::from_rows(&[&[-1.0]])).unwrap()));
    }
    problem.psd_blocks.push(PsdBlock {
        label: "trace-cap".into(),
        dim: 1,
        constant: SymMat::new(Mat::from_rows(&[&[trace_cap]])).unwrap(),
        coeffs: cap_coeffs,
    });

    let bq = Mat::congruence(&structure.sigma_base, q_base.mat())
        .add(&Mat::congruence(&structure.sigma_next, q_next.mat()));
    for i in 0..lifted {
        for j in i..lifted {
            let w = if i == j { bq.get(i, i) } else { bq.get(i, j) + bq.get(j, i) };
            problem.objective[sym_index(i, j)] = w;
        }
    }
    for r in 0..m {
        problem.objective[chi(r)] = q_base_lin[r];
        problem.objective[chi(m + r)] = q_next_lin[r];
    }
    Ok(problem)
}

/// The three matched cross-check problems for a certificate: the per-step
/// condition and the two lower bounds, each as a primal maximization whose
/// optimum must be nonpositive when the certificate is valid.
///
/// The certificate and the lower bound are normalized jointly before the
/// objectives are formed (the feasibility system is linear in all of them
/// together), which keeps the cross-check problems well scaled; the sign
/// of each optimum is unchanged.
pub fn matched_peps(
    rep: &Method,
    lb: &LowerBound,
    cert: &Certificate,
    trace_cap: f64,
) -> Result<[SdpProblem; 3], CertifyError> {
    let m = rep.m;
    let mut magnitude = cert.q_mat.mat().max_abs().max(cert.s_mat.mat().max_abs());
    for v in cert.q.iter().chain(&cert.s) {
        magnitude = magnitude.max(v.abs());
    }
    let alpha = 1.0 / magnitude.max(1.0);
    let scale_vec = |v: &[f64]| -> Vec<f64> { v.iter().map(|x| alpha * x).collect() };

    let zero_mat = SymMat::zeros(rep.n + 2 * m);
    let zero_vec = vec![0.0; m];
    let q_scaled = SymMat::symmetrize(&cert.q_mat.mat().scale(alpha));
    let c1_base = SymMat::symmetrize(
        &cert.s_mat.mat().sub(&cert.q_mat.mat().scale(cert.rho)).scale(alpha),
    );
    let c1_base_lin: Vec<f64> =
        cert.s.iter().zip(&cert.q).map(|(s, q)| alpha * (s - cert.rho * q)).collect();
    let c1 = primal_pep(rep, &c1_base, &c1_base_lin, &q_scaled, &scale_vec(&cert.q), trace_cap)?;
    let c2_base =
        SymMat::symmetrize(&lb.p_mat.mat().sub(cert.q_mat.mat()).scale(alpha));
    let c2_base_lin: Vec<f64> =
        lb.p_vec.iter().zip(&cert.q).map(|(p, q)| alpha * (p - q)).collect();
    let c2 = primal_pep(rep, &c2_base, &c2_base_lin, &zero_mat, &zero_vec, trace_cap)?;
    let c3_base =
        SymMat::symmetrize(&lb.t_mat.mat().sub(cert.s_mat.mat()).scale(alpha));
    let c3_base_lin: Vec<f64> =
        lb.t_vec.iter().zip(&cert.s).map(|(t, s)| alpha * (t - s)).collect();
    let c3 = primal_pep(rep, &c3_base, &c3_base_lin, &zero_mat, &zero_vec, trace_cap)?;
    Ok([c1, c2, c3])
}

/// Strict feasibility probe for the worst-case side: maximizes a margin s
/// with G - sI PSD, every interpolation constraint at most -s, and the
/// trace of G normalized by the lifted dimension.
#[derive(Debug, Clone)]
pub struct SlaterReport {
    pub holds: bool,
    pub margin: f64,
    /// Theory caveat: necessity needs the underlying space dimension to be
    /// at least this large.
    pub dim_requirement: usize,
}

pub fn slater_margin(
    rep: &Method,
    solver: &dyn crate::sdp::SdpSolver,
) -> Result<SlaterReport, crate::sdp::SdpError> {
    let structure = StructureMatrices::new(rep).expect("validated method");
    let m = rep.m;
    let lifted = structure.lifted_dim;
    let sym_len = lifted * (lifted + 1) / 2;
    let nvars = sym_len + 2 * m + 1;
    let sym_index = |i: usize, j: usize| -> usize {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        a * lifted - a * (a + 1) / 2 + b
    };
    let chi = |r: usize| sym_len + r;
    let s_var = sym_len + 2 * m;

    let mut problem = SdpProblem::new(nvars);
    let mut gram = PsdBlock {
        label: "G-margin".into(),
        dim: lifted,
        constant: SymMat::zeros(lifted),
        coeffs: vec![],
    };
    for i in 0..lifted {
        for j in i..lifted {
            gram.coeffs.push((sym_index(i, j), sym_unit(lifted, i, j)));
        }
    }
    gram.coeffs.push((s_var, SymMat::new(Mat::identity(lifted).scale(-1.0)).unwrap()));
    problem.psd_blocks.push(gram);

    for (pair, &(pi, pj)) in PAIRS3.iter().enumerate() {
        for l in 0..m {
            let mlij = structure.m_lifted(l, pi, pj);
            let alij = structure.a_lifted(l, pi, pj);
            let mut coeffs: Vec<(usize, SymMat)> =
                vec![(s_var, SymMat::new(Mat::from_rows(&[&[-1.0]])).unwrap())];
            for i in 0..lifted {
                for j in i..lifted {
                    let w = if i == j { mlij.get(i, i) } else { 2.0 * mlij.get(i, j) };
                    if w != 0.0 {
                        coeffs.push((
                            sym_index(i, j),
                            SymMat::new(Mat::from_rows(&[&[-w]])).unwrap(),
                        ));
                    }
                }
            }
            for (r, &a) in alij.iter().enumerate() {
                if a != 0.0 {
                    coeffs.push((chi(r), SymMat::new(Mat::from_rows(&[&[-a]])).unwrap()));
                }
            }
            problem.psd_blocks.push(PsdBlock {
                label: format!("slater[{pair},{l}]"),
                dim: 1,
                constant: SymMat::zeros(1),
                coeffs,
            });
        }
    }
    let mut cap_coeffs: Vec<(usize, SymMat)> = vec![];
    for i in 0..lifted {
        cap_coeffs.push((sym_index(i, i), SymMat::new(Mat::from_rows(&[&[-1.0]])).unwrap()));
    }
    problem.psd_blocks.push(PsdBlock {
        label: "trace-norm".into(),
        dim: 1,
        constant: SymMat::new(Mat::from_rows(&[&[lifted as f64]])).unwrap(),
        coeffs: cap_coeffs,
    });
    problem.objective[s_var] = 1.0;

    let out = solver.solve_max(&problem)?;
    Ok(SlaterReport { holds: out.value > 1e-7, margin: out.value, dim_requirement: lifted })
}
