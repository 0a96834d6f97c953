//! Primal-dual interior-point engine for small dense LMI problems.
//!
//! Canonical form:
//!
//! ```text
//! maximize  g^T z
//! s.t.      F_b(z) = F0_b + sum_i z_i Fi_b  is PSD,  b = 1..p
//!           E z = e
//! ```
//!
//! The engine is an infeasible-start path-following method with
//! Nesterov-Todd scaling on every block. Each iteration solves one
//! quasi-definite augmented KKT system
//!
//! ```text
//! [ M + dI   E^T ] [dz ]   [rhs]
//! [ E       -dI  ] [dnu] = [r_e]
//! ```
//!
//! where M_ik = sum_b <Fi_b, W_b Fk_b W_b> is the Schur complement of the
//! scaled Newton system. The tiny static regularization d, followed by
//! iterative refinement against the unregularized operator, covers
//! variables that appear only in equality constraints (M is then singular
//! on a subspace that E controls).
//!
//! No randomized pivoting or ordering is used anywhere, so identical
//! inputs give bit-identical outcomes.

use crate::linalg::{Mat, SymMat};

#[derive(Debug, Clone)]
pub(crate) struct LmiBlock {
    pub dim: usize,
    pub f0: Mat,
    /// Sparse list of (variable index, symmetric coefficient matrix).
    pub coeffs: Vec<(usize, Mat)>,
}

impl LmiBlock {
    fn eval(&self, z: &[f64]) -> Mat {
        let mut s = self.f0.clone();
        for (idx, f) in &self.coeffs {
            let w = z[*idx];
            if w != 0.0 {
                s = s.add(&f.scale(w));
            }
        }
        s
    }
}

/// One equality row: sum coeffs * z + constant = 0.
#[derive(Debug, Clone)]
pub(crate) struct EqRow {
    pub coeffs: Vec<(usize, f64)>,
    pub constant: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct LmiProblem {
    pub nvars: usize,
    /// Maximized linear objective.
    pub objective: Vec<f64>,
    pub blocks: Vec<LmiBlock>,
    pub eq: Vec<EqRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum IpmStatus {
    Optimal,
    MaxIterations,
    /// The equality rows are mutually inconsistent.
    InconsistentEqualities,
    /// Objective exceeded the divergence guard while feasible.
    Unbounded,
}

#[derive(Debug, Clone)]
pub(crate) struct IpmResult {
    pub status: IpmStatus,
    pub z: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub gap: f64,
    pub max_residual: f64,
}

pub(crate) struct IpmParams {
    pub max_iterations: usize,
    pub tol_feas: f64,
    pub tol_gap: f64,
    /// Guard value for unboundedness detection; 0 disables.
    pub unbounded_guard: f64,
}

impl Default for IpmParams {
    fn default() -> Self {
        IpmParams { max_iterations: 200, tol_feas: 1e-9, tol_gap: 1e-9, unbounded_guard: 0.0 }
    }
}

/// Reduces the equality rows to an independent set by Gaussian elimination.
/// Returns None when the rows are inconsistent.
fn reduce_equalities(nvars: usize, eq: &[EqRow]) -> Option<(Mat, Vec<f64>)> {
    let q = eq.len();
    if q == 0 {
        return Some((Mat::zeros(0, nvars), vec![]));
    }
    let mut tab = Mat::zeros(q, nvars + 1);
    for (r, row) in eq.iter().enumerate() {
        for (idx, v) in &row.coeffs {
            tab.add_at(r, *idx, *v);
        }
        // E z = e with e = -constant
        tab.set(r, nvars, -row.constant);
    }
    let scale = tab.max_abs().max(1.0);
    let tol = 1e-12 * scale;
    let mut pivot_row = 0;
    for col in 0..nvars {
        if pivot_row >= q {
            break;
        }
        let mut best = pivot_row;
        for r in pivot_row + 1..q {
            if tab.get(r, col).abs() > tab.get(best, col).abs() {
                best = r;
            }
        }
        if tab.get(best, col).abs() <= tol {
            continue;
        }
        if best != pivot_row {
            for c in 0..=nvars {
                let tmp = tab.get(pivot_row, c);
                tab.set(pivot_row, c, tab.get(best, c));
                tab.set(best, c, tmp);
            }
        }
        let piv = tab.get(pivot_row, col);
        for r in 0..q {
            if r == pivot_row {
                continue;
            }
            let factor = tab.get(r, col) / piv;
            if factor != 0.0 {
                for c in 0..=nvars {
                    let v = tab.get(r, c) - factor * tab.get(pivot_row, c);
                    tab.set(r, c, v);
                }
            }
        }
        pivot_row += 1;
    }
    let mut rows = Vec::new();
    for r in 0..q {
        let coef_max = (0..nvars).fold(0.0_f64, |m, c| m.max(tab.get(r, c).abs()));
        if coef_max > tol {
            rows.push(r);
        } else if tab.get(r, nvars).abs() > 1e-9 * (1.0 + scale) {
            return None;
        }
    }
    let e_mat = Mat::from_fn(rows.len(), nvars, |i, j| tab.get(rows[i], j));
    let e_vec: Vec<f64> = rows.iter().map(|&r| tab.get(r, nvars)).collect();
    Some((e_mat, e_vec))
}

/// Symmetric inverse square root with eigenvalues clamped away from zero.
fn inv_sqrt(s: &SymMat, floor: f64) -> Mat {
    s.spectral_map(|v| 1.0 / v.max(floor).sqrt())
}

fn sqrt_psd(s: &SymMat, floor: f64) -> Mat {
    s.spectral_map(|v| v.max(floor).sqrt())
}

/// Largest step alpha <= cap with P + alpha * D staying PSD.
fn max_step(p: &SymMat, d: &Mat, cap: f64) -> f64 {
    let floor = 1e-14 * (1.0 + p.spectral_radius());
    let pi = inv_sqrt(p, floor);
    let y = SymMat::symmetrize(&pi.matmul(d).matmul(&pi));
    let lam = y.min_eig();
    if lam >= -1e-14 {
        cap
    } else {
        (-1.0 / lam).min(cap)
    }
}

/// LDL^T factorization without pivoting; valid for quasi-definite input.
struct Ldl {
    l: Mat,
    d: Vec<f64>,
}

impl Ldl {
    fn factor(k: &Mat) -> Option<Ldl> {
        let n = k.rows();
        let mut l = Mat::identity(n);
        let mut d = vec![0.0; n];
        for j in 0..n {
            let mut dj = k.get(j, j);
            for s in 0..j {
                dj -= l.get(j, s) * l.get(j, s) * d[s];
            }
            if dj.abs() < 1e-300 {
                return None;
            }
            d[j] = dj;
            for i in (j + 1)..n {
                let mut v = k.get(i, j);
                for s in 0..j {
                    v -= l.get(i, s) * l.get(j, s) * d[s];
                }
                l.set(i, j, v / dj);
            }
        }
        Some(Ldl { l, d })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.d.len();
        let mut y = b.to_vec();
        for i in 0..n {
            for s in 0..i {
                y[i] -= self.l.get(i, s) * y[s];
            }
        }
        for i in 0..n {
            y[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            for s in (i + 1)..n {
                y[i] -= self.l.get(s, i) * y[s];
            }
        }
        y
    }
}

pub(crate) fn solve(problem: &LmiProblem, z0: &[f64], params: &IpmParams) -> IpmResult {
    let n = problem.nvars;
    assert!(n > 0, "LMI problem must have at least one variable");
    assert_eq!(z0.len(), n);
    let (e_mat, e_vec) = match reduce_equalities(n, &problem.eq) {
        Some(pair) => pair,
        None => {
            return IpmResult {
                status: IpmStatus::InconsistentEqualities,
                z: z0.to_vec(),
                objective: f64::NEG_INFINITY,
                iterations: 0,
                gap: f64::INFINITY,
                max_residual: f64::INFINITY,
            }
        }
    };
    let q = e_mat.rows();
    let g = &problem.objective;

    let mut z = z0.to_vec();
    let mut nu = vec![0.0; q];
    // Slacks start at F(z0) pushed strictly inside the cone; multipliers at
    // a multiple of the identity. Primal block residuals F(z) - S then
    // shrink geometrically with the primal step length.
    let mut s_blocks: Vec<SymMat> = Vec::with_capacity(problem.blocks.len());
    for b in &problem.blocks {
        let f = b.eval(&z);
        let lam = SymMat::symmetrize(&f).min_eig();
        let shift = if lam > 1e-8 { 0.0 } else { -lam + 1.0 };
        s_blocks.push(SymMat::symmetrize(&f.add(&Mat::identity(b.dim).scale(shift))));
    }
    let mut x_blocks: Vec<SymMat> =
        problem.blocks.iter().map(|b| SymMat::identity(b.dim)).collect();

    let total_dim: usize = problem.blocks.iter().map(|b| b.dim).sum();
    let data_scale = {
        let mut s = g.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for b in &problem.blocks {
            s = s.max(b.f0.max_abs());
            for (_, f) in &b.coeffs {
                s = s.max(f.max_abs());
            }
        }
        s.max(1.0)
    };

    let mut best = IpmResult {
        status: IpmStatus::MaxIterations,
        z: z.clone(),
        objective: g.iter().zip(&z).map(|(a, b)| a * b).sum(),
        iterations: 0,
        gap: f64::INFINITY,
        max_residual: f64::INFINITY,
    };
    let mut best_merit = f64::INFINITY;
    let mut best_mu = f64::INFINITY;
    let mut stall = 0usize;
    let mut sigma_floor = 0.01_f64;

    for iter in 0..params.max_iterations {
        if !z.iter().all(|v| v.is_finite())
            || !s_blocks.iter().all(|s| s.mat().all_finite())
            || !x_blocks.iter().all(|x| x.mat().all_finite())
        {
            break;
        }
        // Residuals.
        let r_e: Vec<f64> = {
            let ez = e_mat.matvec(&z);
            (0..q).map(|r| e_vec[r] - ez[r]).collect()
        };
        let r_p: Vec<Mat> = problem
            .blocks
            .iter()
            .zip(&s_blocks)
            .map(|(b, s)| b.eval(&z).sub(s.mat()))
            .collect();
        let mut r_d = vec![0.0; n];
        for i in 0..n {
            r_d[i] = -g[i];
        }
        for r in 0..q {
            for i in 0..n {
                r_d[i] += e_mat.get(r, i) * nu[r];
            }
        }
        for (b, x) in problem.blocks.iter().zip(&x_blocks) {
            for (idx, f) in &b.coeffs {
                r_d[*idx] -= f.dot(x.mat());
            }
        }

        let gap: f64 = s_blocks.iter().zip(&x_blocks).map(|(s, x)| s.mat().dot(x.mat())).sum();
        let mu = gap / total_dim.max(1) as f64;
        let pobj: f64 = g.iter().zip(&z).map(|(a, b)| a * b).sum();
        let dobj: f64 = e_vec.iter().zip(&nu).map(|(a, b)| a * b).sum::<f64>()
            + problem.blocks.iter().zip(&x_blocks).map(|(b, x)| b.f0.dot(x.mat())).sum::<f64>();

        let feas = r_e
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
            .max(r_p.iter().fold(0.0_f64, |m, p| m.max(p.max_abs())))
            .max(r_d.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
        let rel_feas = feas / data_scale;
        let rel_gap = gap.abs() / (1.0 + pobj.abs() + dobj.abs());

        let merit = (rel_feas / params.tol_feas).max(rel_gap / params.tol_gap);
        // Progress means either the combined merit or the barrier
        // parameter shrank meaningfully; near the f64 floor further
        // iterations only erode the iterate.
        if merit < 0.9 * best_merit || mu.abs() < 0.9 * best_mu {
            stall = 0;
        } else {
            stall += 1;
        }
        best_mu = best_mu.min(mu.abs());
        if merit < best_merit {
            best_merit = merit;
            best = IpmResult {
                status: IpmStatus::MaxIterations,
                z: z.clone(),
                objective: pobj,
                iterations: iter,
                gap: rel_gap,
                max_residual: rel_feas,
            };
        }

        if rel_feas <= params.tol_feas && rel_gap <= params.tol_gap {
            return IpmResult {
                status: IpmStatus::Optimal,
                z,
                objective: pobj,
                iterations: iter,
                gap: rel_gap,
                max_residual: rel_feas,
            };
        }
        if stall >= 15 {
            break;
        }
        if params.unbounded_guard > 0.0
            && pobj > params.unbounded_guard
            && rel_feas <= 1e-6
        {
            return IpmResult {
                status: IpmStatus::Unbounded,
                z,
                objective: pobj,
                iterations: iter,
                gap: rel_gap,
                max_residual: rel_feas,
            };
        }

        // Nesterov-Todd scaling point per block: W S W = X.
        let mut w_blocks: Vec<Mat> = Vec::with_capacity(problem.blocks.len());
        for (s, x) in s_blocks.iter().zip(&x_blocks) {
            let xh = sqrt_psd(x, 1e-16 * (1.0 + x.spectral_radius()));
            let t = SymMat::symmetrize(&xh.matmul(s.mat()).matmul(&xh));
            let ti = inv_sqrt(&t, 1e-16 * (1.0 + t.spectral_radius()));
            w_blocks.push(SymMat::symmetrize(&xh.matmul(&ti).matmul(&xh)).mat().clone());
        }

        // Schur complement M_ik = sum_b <Fi, W Fk W>.
        let mut m_schur = Mat::zeros(n, n);
        let mut scaled_res = vec![0.0; n];
        for ((b, w), rp) in problem.blocks.iter().zip(&w_blocks).zip(&r_p) {
            let scaled: Vec<(usize, Mat)> = b
                .coeffs
                .iter()
                .map(|(idx, f)| (*idx, w.matmul(f).matmul(w)))
                .collect();
            for (ki, (i, fi)) in b.coeffs.iter().enumerate() {
                for (k, (jdx, _)) in b.coeffs.iter().enumerate() {
                    if *jdx < *i {
                        continue;
                    }
                    let v = fi.dot(&scaled[k].1);
                    m_schur.add_at(*i, *jdx, v);
                    if *jdx != *i {
                        m_schur.add_at(*jdx, *i, v);
                    }
                }
                let _ = ki;
                scaled_res[*i] += fi.dot(&w.matmul(rp).matmul(w));
            }
        }

        // Augmented KKT with static regularization and refinement.
        let dim_k = n + q;
        let reg = 1e-11 * (1.0 + m_schur.max_abs());
        let mut kmat = Mat::zeros(dim_k, dim_k);
        for i in 0..n {
            for j in 0..n {
                kmat.set(i, j, m_schur.get(i, j));
            }
            kmat.add_at(i, i, reg);
        }
        for r in 0..q {
            for i in 0..n {
                kmat.set(n + r, i, e_mat.get(r, i));
                kmat.set(i, n + r, e_mat.get(r, i));
            }
            kmat.set(n + r, n + r, -reg);
        }
        let ldl = match Ldl::factor(&kmat) {
            Some(l) => l,
            None => break,
        };
        let solve_kkt = |rhs1: &[f64], rhs2: &[f64]| -> (Vec<f64>, Vec<f64>) {
            let mut rhs = Vec::with_capacity(dim_k);
            rhs.extend_from_slice(rhs1);
            rhs.extend_from_slice(rhs2);
            let mut sol = ldl.solve(&rhs);
            // Refine against the unregularized operator.
            for _ in 0..2 {
                let mut resid = rhs.clone();
                for i in 0..n {
                    let mut acc = 0.0;
                    for j in 0..n {
                        acc += m_schur.get(i, j) * sol[j];
                    }
                    for r in 0..q {
                        acc += e_mat.get(r, i) * sol[n + r];
                    }
                    resid[i] -= acc;
                }
                for r in 0..q {
                    let mut acc = 0.0;
                    for i in 0..n {
                        acc += e_mat.get(r, i) * sol[i];
                    }
                    resid[n + r] -= acc;
                }
                let corr = ldl.solve(&resid);
                for i in 0..dim_k {
                    sol[i] += corr[i];
                }
            }
            (sol[..n].to_vec(), sol[n..].to_vec())
        };

        // Direction for a given centering target T_b = sigma mu S^-1 - X.
        let direction = |sigma_mu: f64| -> (Vec<f64>, Vec<f64>, Vec<Mat>, Vec<Mat>) {
            let mut rhs1 = vec![0.0; n];
            for i in 0..n {
                rhs1[i] = -r_d[i] - scaled_res[i];
            }
            for ((b, s), x) in problem.blocks.iter().zip(&s_blocks).zip(&x_blocks) {
                let target = if sigma_mu > 0.0 {
                    let floor = 1e-14 * (1.0 + s.spectral_radius());
                    s.spectral_map(|v| sigma_mu / v.max(floor)).sub(x.mat())
                } else {
                    x.mat().neg()
                };
                for (idx, f) in &b.coeffs {
                    rhs1[*idx] += f.dot(&target);
                }
            }
            let (dz, dnu) = solve_kkt(&rhs1, &r_e);
            let mut ds = Vec::with_capacity(problem.blocks.len());
            let mut dx = Vec::with_capacity(problem.blocks.len());
            for (bi, b) in problem.blocks.iter().enumerate() {
                let mut dsb = r_p[bi].clone();
                for (idx, f) in &b.coeffs {
                    if dz[*idx] != 0.0 {
                        dsb = dsb.add(&f.scale(dz[*idx]));
                    }
                }
                let target = if sigma_mu > 0.0 {
                    let floor = 1e-14 * (1.0 + s_blocks[bi].spectral_radius());
                    s_blocks[bi]
                        .spectral_map(|v| sigma_mu / v.max(floor))
                        .sub(x_blocks[bi].mat())
                } else {
                    x_blocks[bi].mat().neg()
                };
                let w = &w_blocks[bi];
                let dxb = target.sub(&w.matmul(&dsb).matmul(w));
                ds.push(SymMat::symmetrize(&dsb).mat().clone());
                dx.push(SymMat::symmetrize(&dxb).mat().clone());
            }
            (dz, dnu, ds, dx)
        };

        // Predictor to pick the centering weight.
        let (_, _, ds_aff, dx_aff) = direction(0.0);
        let mut ap_aff = 1.0_f64;
        let mut ad_aff = 1.0_f64;
        for (bi, _) in problem.blocks.iter().enumerate() {
            ap_aff = ap_aff.min(max_step(&s_blocks[bi], &ds_aff[bi], 1.0));
            ad_aff = ad_aff.min(max_step(&x_blocks[bi], &dx_aff[bi], 1.0));
        }
        let mut gap_aff = 0.0;
        for (bi, _) in problem.blocks.iter().enumerate() {
            let s_new = s_blocks[bi].mat().add(&ds_aff[bi].scale(ap_aff));
            let x_new = x_blocks[bi].mat().add(&dx_aff[bi].scale(ad_aff));
            gap_aff += s_new.dot(&x_new);
        }
        let mu_aff = gap_aff / total_dim.max(1) as f64;
        let sigma = ((mu_aff / mu.max(1e-300)).powi(3)).clamp(sigma_floor, 0.9);

        // Combined step.
        let (dz, dnu, ds, dx) = direction(sigma * mu);
        let mut ap = 1.0_f64;
        let mut ad = 1.0_f64;
        for (bi, _) in problem.blocks.iter().enumerate() {
            ap = ap.min(0.99 * max_step(&s_blocks[bi], &ds[bi], 1.0 / 0.99));
            ad = ad.min(0.99 * max_step(&x_blocks[bi], &dx[bi], 1.0 / 0.99));
        }
        ap = ap.min(1.0);
        ad = ad.min(1.0);

        for i in 0..n {
            z[i] += ap * dz[i];
        }
        for r in 0..q {
            nu[r] += ad * dnu[r];
        }
        for (bi, _) in problem.blocks.iter().enumerate() {
            s_blocks[bi] =
                SymMat::symmetrize(&s_blocks[bi].mat().add(&ds[bi].scale(ap)));
            x_blocks[bi] =
                SymMat::symmetrize(&x_blocks[bi].mat().add(&dx[bi].scale(ad)));
        }

        // Short steps mean the low-sigma direction is too greedy.
        if ap.min(ad) < 0.2 {
            sigma_floor = (sigma_floor * 4.0).min(0.5);
        } else {
            sigma_floor = 0.01;
        }
        if std::env::var_os("LYAPCERT_IPM_TRACE").is_some() {
            eprintln!(
                "iter {iter:3}  mu {mu:10.3e}  feas {rel_feas:10.3e}  gap {rel_gap:10.3e}  ap {ap:6.3}  ad {ad:6.3}  sigma {sigma:6.3}  obj {pobj:12.6e}"
            );
        }
        best.iterations = iter + 1;
    }

    if best.max_residual <= params.tol_feas && best.gap <= params.tol_gap {
        best.status = IpmStatus::Optimal;
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(dim: usize, i: usize, j: usize) -> Mat {
        let mut m = Mat::zeros(dim, dim);
        if i == j {
            m.set(i, i, 1.0);
        } else {
            m.set(i, j, 1.0);
            m.set(j, i, 1.0);
        }
        m
    }

    #[test]
    fn maximizes_simple_diag_lmi() {
        // maximize x s.t. diag(x, 1-x) PSD: optimum 1.
        let problem = LmiProblem {
            nvars: 1,
            objective: vec![1.0],
            blocks: vec![LmiBlock {
                dim: 2,
                f0: Mat::from_rows(&[&[0.0, 0.0], &[0.0, 1.0]]),
                coeffs: vec![(0, Mat::from_rows(&[&[1.0, 0.0], &[0.0, -1.0]]))],
            }],
            eq: vec![],
        };
        let res = solve(&problem, &[0.5], &IpmParams::default());
        assert_eq!(res.status, IpmStatus::Optimal);
        assert!((res.objective - 1.0).abs() < 1e-8, "obj {}", res.objective);
    }

    #[test]
    fn maximizes_trace_under_cap() {
        // maximize tr(G), G PSD 2x2, tr(G) <= 5: optimum 5.
        let gvars = 3; // g11, g12, g22
        let mut gblock = LmiBlock { dim: 2, f0: Mat::zeros(2, 2), coeffs: vec![] };
        gblock.coeffs.push((0, unit(2, 0, 0)));
        gblock.coeffs.push((1, unit(2, 0, 1)));
        gblock.coeffs.push((2, unit(2, 1, 1)));
        let cap = LmiBlock {
            dim: 1,
            f0: Mat::from_rows(&[&[5.0]]),
            coeffs: vec![(0, Mat::from_rows(&[&[-1.0]])), (2, Mat::from_rows(&[&[-1.0]]))],
        };
        let problem = LmiProblem {
            nvars: gvars,
            objective: vec![1.0, 0.0, 1.0],
            blocks: vec![gblock, cap],
            eq: vec![],
        };
        let res = solve(&problem, &[0.1, 0.0, 0.1], &IpmParams::default());
        assert_eq!(res.status, IpmStatus::Optimal);
        assert!((res.objective - 5.0).abs() < 1e-7, "obj {}", res.objective);
    }

    #[test]
    fn handles_equalities_and_free_variables() {
        // maximize y s.t. [x, y; y, 1] PSD, x + t = 2, t = 1 (t in no block).
        // Then x = 1 and optimum y = 1.
        let problem = LmiProblem {
            nvars: 3,
            objective: vec![0.0, 1.0, 0.0],
            blocks: vec![LmiBlock {
                dim: 2,
                f0: Mat::from_rows(&[&[0.0, 0.0], &[0.0, 1.0]]),
                coeffs: vec![(0, unit(2, 0, 0)), (1, unit(2, 0, 1))],
            }],
            eq: vec![
                EqRow { coeffs: vec![(0, 1.0), (2, 1.0)], constant: -2.0 },
                EqRow { coeffs: vec![(2, 1.0)], constant: -1.0 },
            ],
        };
        let res = solve(&problem, &[0.5, 0.0, 0.0], &IpmParams::default());
        assert_eq!(res.status, IpmStatus::Optimal);
        assert!((res.objective - 1.0).abs() < 1e-7, "obj {}", res.objective);
        assert!((res.z[0] - 1.0).abs() < 1e-6);
        assert!((res.z[2] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn detects_inconsistent_equalities() {
        let problem = LmiProblem {
            nvars: 1,
            objective: vec![0.0],
            blocks: vec![LmiBlock {
                dim: 1,
                f0: Mat::from_rows(&[&[1.0]]),
                coeffs: vec![(0, Mat::from_rows(&[&[1.0]]))],
            }],
            eq: vec![
                EqRow { coeffs: vec![(0, 1.0)], constant: 0.0 },
                EqRow { coeffs: vec![(0, 1.0)], constant: 1.0 },
            ],
        };
        let res = solve(&problem, &[0.0], &IpmParams::default());
        assert_eq!(res.status, IpmStatus::InconsistentEqualities);
    }

    #[test]
    fn redundant_equalities_are_dropped() {
        // Same row twice plus a zero row must not break the KKT solve.
        let problem = LmiProblem {
            nvars: 2,
            objective: vec![1.0, 0.0],
            blocks: vec![LmiBlock {
                dim: 1,
                f0: Mat::from_rows(&[&[3.0]]),
                coeffs: vec![(0, Mat::from_rows(&[&[-1.0]]))],
            }],
            eq: vec![
                EqRow { coeffs: vec![(1, 1.0)], constant: -0.5 },
                EqRow { coeffs: vec![(1, 1.0)], constant: -0.5 },
                EqRow { coeffs: vec![], constant: 0.0 },
            ],
        };
        let res = solve(&problem, &[0.0, 0.0], &IpmParams::default());
        assert_eq!(res.status, IpmStatus::Optimal);
        assert!((res.objective - 3.0).abs() < 1e-7);
        assert!((res.z[1] - 0.5).abs() < 1e-8);
    }
}
