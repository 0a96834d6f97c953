//! Method representations and their structural validation.
//!
//! A first-order method is modeled as a linear system in state-space form,
//!
//! ```text
//! x_{k+1} = A x_k + B u_k
//! y_k     = C x_k + D u_k,    u_k a subgradient of component i at y_k^(i)
//! ```
//!
//! together with one function class per component. Validation checks that
//! fixed points of the recursion encode problem solutions (all y components
//! equal, subgradients summing to zero), that the recursion is causally
//! implementable with prox and gradient oracles only, and that the state
//! dimension is minimal (controllability and observability rank tests).

use crate::linalg::Mat;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("function class requires 0 <= sigma < beta, got sigma={sigma}, beta={beta}")]
    BadClass { sigma: f64, beta: f64 },
    #[error("{0}")]
    BadParameter(String),
    #[error("expected {expected} classes, got {got}")]
    ClassCount { expected: usize, got: usize },
    #[error("matrix {name} must be {rows}x{cols}")]
    BadShape { name: &'static str, rows: usize, cols: usize },
    #[error("method representation contains non-finite entries")]
    NonFinite,
}

/// The class of sigma-strongly-convex functions that are beta-smooth when
/// beta is finite and lower semicontinuous when beta is infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionClass {
    pub sigma: f64,
    pub beta: f64,
}

impl FunctionClass {
    pub fn new(sigma: f64, beta: f64) -> Result<Self, ModelError> {
        if !(sigma >= 0.0 && sigma < beta) || sigma.is_nan() || beta.is_nan() {
            return Err(ModelError::BadClass { sigma, beta });
        }
        Ok(FunctionClass { sigma, beta })
    }

    pub fn smooth(&self) -> bool {
        self.beta.is_finite()
    }
}

impl fmt::Display for FunctionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.beta.is_finite() {
            write!(f, "F({},{})", self.sigma, self.beta)
        } else {
            write!(f, "F({},inf)", self.sigma)
        }
    }
}

impl Serialize for FunctionClass {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("FunctionClass", 2)?;
        st.serialize_field("sigma", &self.sigma)?;
        if self.beta.is_finite() {
            st.serialize_field("beta", &self.beta)?;
        } else {
            st.serialize_field("beta", "inf")?;
        }
        st.end()
    }
}

impl<'de> Deserialize<'de> for FunctionClass {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            sigma: f64,
            beta: serde_json::Value,
        }
        let raw = Raw::deserialize(d)?;
        let beta = match &raw.beta {
            serde_json::Value::Number(n) => {
                n.as_f64().ok_or_else(|| D::Error::custom("beta must be a number or \"inf\""))?
            }
            serde_json::Value::String(s) if s == "inf" => f64::INFINITY,
            _ => return Err(D::Error::custom("beta must be a number or \"inf\"")),
        };
        FunctionClass::new(raw.sigma, beta).map_err(D::Error::custom)
    }
}

/// State-space representation of a fixed-parameter first-order method.
#[derive(Debug, Clone, PartialEq)]
pub struct Method {
    pub n: usize,
    pub m: usize,
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
    pub d: Mat,
    pub classes: Vec<FunctionClass>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MethodJson {
    n: usize,
    m: usize,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    c: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    d: Vec<Vec<f64>>,
    classes: Vec<FunctionClass>,
}

fn mat_to_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| (0..m.cols()).map(|j| m.get(i, j)).collect()).collect()
}

fn rows_to_mat(rows: &[Vec<f64>], r: usize, c: usize, name: &'static str) -> Result<Mat, ModelError> {
    if rows.len() != r || rows.iter().any(|row| row.len() != c) {
        return Err(ModelError::BadShape { name, rows: r, cols: c });
    }
    Ok(Mat::from_fn(r, c, |i, j| rows[i][j]))
}

impl Method {
    pub fn new(
        a: Mat,
        b: Mat,
        c: Mat,
        d: Mat,
        classes: Vec<FunctionClass>,
    ) -> Result<Self, ModelError> {
        let n = a.rows();
        let m = d.rows();
        if a.cols() != n {
            return Err(ModelError::BadShape { name: "A", rows: n, cols: n });
        }
        if b.rows() != n || b.cols() != m {
            return Err(ModelError::BadShape { name: "B", rows: n, cols: m });
        }
        if c.rows() != m || c.cols() != n {
            return Err(ModelError::BadShape { name: "C", rows: m, cols: n });
        }
        if d.cols() != m {
            return Err(ModelError::BadShape { name: "D", rows: m, cols: m });
        }
        if classes.len() != m {
            return Err(ModelError::ClassCount { expected: m, got: classes.len() });
        }
        for mat in [&a, &b, &c, &d] {
            if !mat.all_finite() {
                return Err(ModelError::NonFinite);
            }
        }
        Ok(Method { n, m, a, b, c, d, classes })
    }

    pub fn to_json(&self) -> String {
        let raw = MethodJson {
            n: self.n,
            m: self.m,
            a: mat_to_rows(&self.a),
            b: mat_to_rows(&self.b),
            c: mat_to_rows(&self.c),
            d: mat_to_rows(&self.d),
            classes: self.classes.clone(),
        };
        serde_json::to_string_pretty(&raw).expect("method serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let raw: MethodJson = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let a = rows_to_mat(&raw.a, raw.n, raw.n, "A").map_err(|e| e.to_string())?;
        let b = rows_to_mat(&raw.b, raw.n, raw.m, "B").map_err(|e| e.to_string())?;
        let c = rows_to_mat(&raw.c, raw.m, raw.n, "C").map_err(|e| e.to_string())?;
        let d = rows_to_mat(&raw.d, raw.m, raw.m, "D").map_err(|e| e.to_string())?;
        Method::new(a, b, c, d, raw.classes).map_err(|e| e.to_string())
    }
}

/// The built-in method families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    DouglasRachford,
    HeavyBall,
    ProxHeavyBall,
    DavisYin,
    ChambollePock,
}

impl Family {
    pub fn component_count(&self) -> usize {
        match self {
            Family::DouglasRachford => 2,
            Family::HeavyBall => 1,
            Family::ProxHeavyBall => 2,
            Family::DavisYin => 3,
            Family::ChambollePock => 2,
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Family::DouglasRachford => 2,
            Family::HeavyBall => 2,
            Family::ProxHeavyBall => 3,
            Family::DavisYin => 2,
            Family::ChambollePock => 3,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::DouglasRachford => "douglas_rachford",
            Family::HeavyBall => "heavy_ball",
            Family::ProxHeavyBall => "prox_heavy_ball",
            Family::DavisYin => "davis_yin",
            Family::ChambollePock => "chambolle_pock",
        }
    }

    pub fn parse(name: &str) -> Option<Family> {
        match name {
            "douglas_rachford" => Some(Family::DouglasRachford),
            "heavy_ball" => Some(Family::HeavyBall),
            "prox_heavy_ball" => Some(Family::ProxHeavyBall),
            "davis_yin" => Some(Family::DavisYin),
            "chambolle_pock" => Some(Family::ChambollePock),
            _ => None,
        }
    }
}

/// Builds a zoo method from family parameters and component classes.
///
/// Parameter conventions:
/// - douglas_rachford: (gamma > 0, lambda != 0), 2 prox components
/// - heavy_ball: (gamma > 0, delta), 1 gradient component (finite beta)
/// - prox_heavy_ball: (gamma > 0, delta1, delta2), gradient then prox
/// - davis_yin: (gamma > 0, lambda > 0), prox / gradient / prox; the middle
///   component carries the gradient oracle and needs finite beta
/// - chambolle_pock: (tau1 > 0, tau2 > 0, theta), 2 prox components
pub fn build(family: Family, params: &[f64], classes: &[FunctionClass]) -> Result<Method, ModelError> {
    if params.len() != family.param_count() {
        return Err(ModelError::BadParameter(format!(
            "{} takes {} parameters, got {}",
            family.name(),
            family.param_count(),
            params.len()
        )));
    }
    if classes.len() != family.component_count() {
        return Err(ModelError::ClassCount {
            expected: family.component_count(),
            got: classes.len(),
        });
    }
    let positive = |v: f64, what: &str| -> Result<f64, ModelError> {
        if v > 0.0 {
            Ok(v)
        } else {
            Err(ModelError::BadParameter(format!("{what} must be positive, got {v}")))
        }
    };
    let finite_beta = |i: usize| -> Result<(), ModelError> {
        if classes[i].smooth() {
            Ok(())
        } else {
            Err(ModelError::BadParameter(format!(
                "{} evaluates a gradient of component {}, which needs beta < infinity",
                family.name(),
                i + 1
            )))
        }
    };
    match family {
        Family::DouglasRachford => {
            let gamma = positive(params[0], "gamma")?;
            let lambda = params[1];
            if lambda == 0.0 {
                return Err(ModelError::BadParameter("lambda must be nonzero".into()));
            }
            Method::new(
                Mat::from_rows(&[&[1.0]]),
                Mat::from_rows(&[&[-gamma * lambda, -gamma * lambda]]),
                Mat::from_rows(&[&[1.0], &[1.0]]),
                Mat::from_rows(&[&[-gamma, 0.0], &[-2.0 * gamma, -gamma]]),
                classes.to_vec(),
            )
        }
        Family::HeavyBall => {
            let gamma = positive(params[0], "gamma")?;
            let delta = params[1];
            finite_beta(0)?;
            Method::new(
                Mat::from_rows(&[&[1.0 + delta, -delta], &[1.0, 0.0]]),
                Mat::from_rows(&[&[-gamma], &[0.0]]),
                Mat::from_rows(&[&[1.0, 0.0]]),
                Mat::from_rows(&[&[0.0]]),
                classes.to_vec(),
            )
        }
        Family::ProxHeavyBall => {
            let gamma = positive(params[0], "gamma")?;
            let (d1, d2) = (params[1], params[2]);
            finite_beta(0)?;
            Method::new(
                Mat::from_rows(&[&[1.0 + d1 + d2, -d1 - d2], &[1.0, 0.0]]),
                Mat::from_rows(&[&[-gamma, -gamma], &[0.0, 0.0]]),
                Mat::from_rows(&[&[1.0, 0.0], &[1.0 + d1, -d1]]),
                Mat::from_rows(&[&[0.0, 0.0], &[-gamma, -gamma]]),
                classes.to_vec(),
            )
        }
        Family::DavisYin => {
            let gamma = positive(params[0], "gamma")?;
            let lambda = positive(params[1], "lambda")?;
            finite_beta(1)?;
            Method::new(
                Mat::from_rows(&[&[1.0]]),
                Mat::from_rows(&[&[-gamma * lambda, -gamma * lambda, -gamma * lambda]]),
                Mat::from_rows(&[&[1.0], &[1.0], &[1.0]]),
                Mat::from_rows(&[
                    &[-gamma, 0.0, 0.0],
                    &[-gamma, 0.0, 0.0],
                    &[-2.0 * gamma, -gamma, -gamma],
                ]),
                classes.to_vec(),
            )
        }
        Family::ChambollePock => {
            let t1 = positive(params[0], "tau1")?;
            let t2 = positive(params[1], "tau2")?;
            let theta = params[2];
            Method::new(
                Mat::from_rows(&[&[1.0, -t1], &[0.0, 0.0]]),
                Mat::from_rows(&[&[-t1, 0.0], &[0.0, 1.0]]),
                Mat::from_rows(&[&[1.0, -t1], &[1.0, 1.0 / t2 - t1 * (1.0 + theta)]]),
                Mat::from_rows(&[&[-t1, 0.0], &[-t1 * (1.0 + theta), -1.0 / t2]]),
                classes.to_vec(),
            )
        }
    }
}

/// Outcome of the structural checks on a method representation.
///
/// Failures are reported, never thrown: every field records a verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    /// Fixed points encode solutions and every solution has a fixed point.
    pub fixed_point_encoding: bool,
    /// The recursion generates a unique infinite sequence using only prox
    /// and gradient oracles, possibly after reordering components.
    pub well_posed: bool,
    /// rank [I-A  -B] = n.
    pub controllable: bool,
    /// rank [I-A; -C] = n.
    pub observable: bool,
    /// Components solved by an implicit prox step (negative D diagonal).
    pub i_d: Vec<usize>,
    /// Components with a finite smoothness constant.
    pub i_differentiable: Vec<usize>,
    /// Component order that makes D lower triangular, when one exists.
    pub permutation: Option<Vec<usize>>,
    pub diagnostics: Vec<String>,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.fixed_point_encoding && self.well_posed && self.controllable && self.observable
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let flag = |b: bool| if b { "ok" } else { "FAIL" };
        writeln!(f, "fixed-point encoding: {}", flag(self.fixed_point_encoding))?;
        writeln!(f, "well-posed:           {}", flag(self.well_posed))?;
        writeln!(f, "controllable:         {}", flag(self.controllable))?;
        writeln!(f, "observable:           {}", flag(self.observable))?;
        writeln!(f, "prox components:      {:?}", self.i_d.iter().map(|i| i + 1).collect::<Vec<_>>())?;
        writeln!(
            f,
            "smooth components:    {:?}",
            self.i_differentiable.iter().map(|i| i + 1).collect::<Vec<_>>()
        )?;
        if let Some(p) = &self.permutation {
            writeln!(f, "component order:      {:?}", p.iter().map(|i| i + 1).collect::<Vec<_>>())?;
        }
        for d in &self.diagnostics {
            writeln!(f, "note: {d}")?;
        }
        Ok(())
    }
}

/// The sum-to-zero parameterization matrix [I; -1^T], of size m x (m-1).
pub fn sum_to_zero(m: usize) -> Mat {
    assert!(m >= 2);
    let mut n = Mat::zeros(m, m - 1);
    for i in 0..m - 1 {
        n.set(i, i, 1.0);
    }
    for j in 0..m - 1 {
        n.set(m - 1, j, -1.0);
    }
    n
}

fn permutations(m: usize) -> Vec<Vec<usize>> {
    if m == 1 {
        return vec![vec![0]];
    }
    let mut out = Vec::new();
    for sub in permutations(m - 1) {
        for pos in 0..m {
            let mut p = sub.clone();
            p.insert(pos, m - 1);
            out.push(p);
        }
    }
    out
}

/// Reorders the method components according to `perm`, where `perm[k]` is
/// the original index of the component in new position k.
pub fn permute_components(rep: &Method, perm: &[usize]) -> Method {
    let m = rep.m;
    assert_eq!(perm.len(), m);
    let p = Mat::from_fn(m, m, |i, j| if perm[i] == j { 1.0 } else { 0.0 });
    let b = rep.b.matmul(&p.transpose());
    let c = p.matmul(&rep.c);
    let d = p.matmul(&rep.d).matmul(&p.transpose());
    let classes = perm.iter().map(|&i| rep.classes[i]).collect();
    Method { n: rep.n, m, a: rep.a.clone(), b, c, d, classes }
}

fn is_lower_triangular(d: &Mat) -> bool {
    for i in 0..d.rows() {
        for j in (i + 1)..d.cols() {
            if d.get(i, j) != 0.0 {
                return false;
            }
        }
    }
    true
}

/// Runs every structural check. Rank inclusions are tested as rank
/// equalities with the shared numerical tolerance; the component ordering
/// search is exhaustive, which is fine for m <= 6.
pub fn validate(rep: &Method) -> ValidationReport {
    let n = rep.n;
    let m = rep.m;
    let mut diagnostics = Vec::new();

    let i_minus_a = Mat::identity(n).sub(&rep.a);

    // Fixed-point encoding, range part: ran X subset of ran Y for
    // Y = [I-A; -C] and X = [BN 0; DN -1] (N column absent when m = 1).
    let y = Mat::vstack(&[&i_minus_a, &rep.c.neg()]);
    let ones = Mat::from_fn(m, 1, |_, _| 1.0);
    let x_range = if m == 1 {
        Mat::vstack(&[&Mat::zeros(n, 1), &ones.neg()])
    } else {
        let nmat = sum_to_zero(m);
        let bn = rep.b.matmul(&nmat);
        let dn = rep.d.matmul(&nmat);
        let top = Mat::hstack(&[&bn, &Mat::zeros(n, 1)]);
        let bottom = Mat::hstack(&[&dn, &ones.neg()]);
        Mat::vstack(&[&top, &bottom])
    };
    let range_ok = match (Mat::hstack(&[&y, &x_range]).rank(), y.rank()) {
        (Ok(r_aug), Ok(r_y)) => r_aug == r_y,
        _ => {
            diagnostics.push("range condition rank test failed numerically".into());
            false
        }
    };

    // Null part: null [I-A -B] subset of null [N^T C, N^T D; 0, 1^T]
    // (N^T row absent when m = 1).
    let x_null = Mat::hstack(&[&i_minus_a, &rep.b.neg()]);
    let k = if m == 1 {
        Mat::hstack(&[&Mat::zeros(1, n), &ones.transpose()])
    } else {
        let nt = sum_to_zero(m).transpose();
        let top = Mat::hstack(&[&nt.matmul(&rep.c), &nt.matmul(&rep.d)]);
        let bottom = Mat::hstack(&[&Mat::zeros(1, n), &ones.transpose()]);
        Mat::vstack(&[&top, &bottom])
    };
    let null_ok = match (Mat::vstack(&[&x_null, &k]).rank(), x_null.rank()) {
        (Ok(r_aug), Ok(r_x)) => r_aug == r_x,
        _ => {
            diagnostics.push("null condition rank test failed numerically".into());
            false
        }
    };

    let fixed_point_encoding = range_ok && null_ok;
    if !range_ok {
        diagnostics.push("some solutions have no corresponding fixed point".into());
    }
    if !null_ok {
        diagnostics.push("some fixed points do not encode a solution".into());
    }

    // Well-posedness: nonpositive D diagonal, prox or gradient oracle for
    // every component, and some ordering making D lower triangular.
    let i_d: Vec<usize> = (0..m).filter(|&i| rep.d.get(i, i) < 0.0).collect();
    let i_differentiable: Vec<usize> = (0..m).filter(|&i| rep.classes[i].smooth()).collect();
    let diag_nonpos = (0..m).all(|i| rep.d.get(i, i) <= 0.0);
    let covered = (0..m).all(|i| i_d.contains(&i) || i_differentiable.contains(&i));
    let permutation = permutations(m)
        .into_iter()
        .find(|p| is_lower_triangular(&permute_components(rep, p).d));
    let well_posed = diag_nonpos && covered && permutation.is_some();
    if !diag_nonpos {
        diagnostics.push("D has a positive diagonal entry".into());
    }
    if !covered {
        diagnostics.push("a component has neither a prox step nor a gradient oracle".into());
    }
    if permutation.is_none() {
        diagnostics.push("no component ordering makes D lower triangular".into());
    }

    let controllable = x_null.rank().map(|r| r == n).unwrap_or(false);
    let observable = y.rank().map(|r| r == n).unwrap_or(false);

    ValidationReport {
        fixed_point_encoding,
        well_posed,
        controllable,
        observable,
        i_d,
        i_differentiable,
        permutation,
        diagnostics,
    }
}
