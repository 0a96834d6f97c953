//! Python bindings: the method zoo, structural validation, rate
//! bisection, region sweeps, certificate emission, and trajectory audits.

use lyapcert::analyze::{bisect_rate, grid, sweep, BisectOutcome, SweepFamily};
use lyapcert::certify::{self, Certificate, PresetKind};
use lyapcert::model::{self, build, Family, FunctionClass};
use lyapcert::sdp::{InteriorPoint, SdpSolver};
use lyapcert::simulate;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

fn value_err(message: impl ToString) -> PyErr {
    PyValueError::new_err(message.to_string())
}

fn parse_classes(classes: Vec<(f64, f64)>) -> PyResult<Vec<FunctionClass>> {
    classes
        .into_iter()
        .map(|(sigma, beta)| FunctionClass::new(sigma, beta).map_err(value_err))
        .collect()
}

fn parse_preset(text: &str) -> PyResult<PresetKind> {
    PresetKind::parse(text)
        .ok_or_else(|| value_err(format!("unknown preset '{text}'")))
}

/// A first-order method in state-space form with its component classes.
#[pyclass(name = "Method", from_py_object)]
#[derive(Clone)]
struct PyMethod {
    inner: model::Method,
}

#[pymethods]
impl PyMethod {
    /// Douglas-Rachford splitting with prox step gamma and relaxation lam.
    #[staticmethod]
    fn douglas_rachford(gamma: f64, lam: f64, classes: Vec<(f64, f64)>) -> PyResult<Self> {
        let classes = parse_classes(classes)?;
        build(Family::DouglasRachford, &[gamma, lam], &classes)
            .map(|inner| PyMethod { inner })
            .map_err(value_err)
    }

    /// Gradient descent with heavy-ball momentum delta.
    #[staticmethod]
    fn heavy_ball(gamma: f64, delta: f64, classes: Vec<(f64, f64)>) -> PyResult<Self> {
        let classes = parse_classes(classes)?;
        build(Family::HeavyBall, &[gamma, delta], &classes)
            .map(|inner| PyMethod { inner })
            .map_err(value_err)
    }

    /// Proximal gradient with momentum inside (delta1) and outside
    /// (delta2) the prox step.
    #[staticmethod]
    fn prox_heavy_ball(
        gamma: f64,
        delta1: f64,
        delta2: f64,
        classes: Vec<(f64, f64)>,
    ) -> PyResult<Self> {
        let classes = parse_classes(classes)?;
        build(Family::ProxHeavyBall, &[gamma, delta1, delta2], &classes)
            .map(|inner| PyMethod { inner })
            .map_err(value_err)
    }

    /// Three-operator splitting; the middle class needs a finite beta.
    #[staticmethod]
    fn davis_yin(gamma: f64, lam: f64, classes: Vec<(f64, f64)>) -> PyResult<Self> {
        let classes = parse_classes(classes)?;
        build(Family::DavisYin, &[gamma, lam], &classes)
            .map(|inner| PyMethod { inner })
            .map_err(value_err)
    }

    /// Primal-dual two-prox method with step sizes tau1, tau2 and
    /// extrapolation theta.
    #[staticmethod]
    fn chambolle_pock(
        tau1: f64,
        tau2: f64,
        theta: f64,
        classes: Vec<(f64, f64)>,
    ) -> PyResult<Self> {
        let classes = parse_classes(classes)?;
        build(Family::ChambollePock, &[tau1, tau2, theta], &classes)
            .map(|inner| PyMethod { inner })
            .map_err(value_err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        model::Method::from_json(text).map(|inner| PyMethod { inner }).map_err(value_err)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m
    }

    /// Runs the structural checks; returns a dict of booleans plus notes.
    fn validate(&self, py: Python<'_>) -> PyResult<Py<pyo3::types::PyAny>> {
        let report = model::validate(&self.inner);
        let dict = pyo3::types::PyDict::new(py);
        dict.set_item("fixed_point_encoding", report.fixed_point_encoding)?;
        dict.set_item("well_posed", report.well_posed)?;
        dict.set_item("controllable", report.controllable)?;
        dict.set_item("observable", report.observable)?;
        dict.set_item("prox_components", report.i_d.iter().map(|i| i + 1).collect::<Vec<_>>())?;
        dict.set_item(
            "smooth_components",
            report.i_differentiable.iter().map(|i| i + 1).collect::<Vec<_>>(),
        )?;
        dict.set_item("diagnostics", report.diagnostics.clone())?;
        Ok(dict.into_any().unbind())
    }

    fn __repr__(&self) -> String {
        format!("Method(n={}, m={})", self.inner.n, self.inner.m)
    }
}

/// Bisection for the smallest certifiable linear rate. Returns
/// (rho, certificate_json) or None when no rate below one is certifiable.
#[pyfunction]
#[pyo3(signature = (method, preset = "distance:1", tol = 0.001))]
fn rate(method: &PyMethod, preset: &str, tol: f64) -> PyResult<Option<(f64, String)>> {
    let kind = parse_preset(preset)?;
    let lb = certify::preset(kind, &method.inner).map_err(value_err)?;
    let solver = InteriorPoint::new();
    match bisect_rate(&method.inner, &lb, tol, None, &solver)
        .map_err(PyRuntimeError::new_err)?
    {
        BisectOutcome::Certified { rho, certificate } => Ok(Some((rho, certificate.to_json()))),
        BisectOutcome::NotCertified { .. } => Ok(None),
    }
}

/// Emits a verified certificate at a fixed rate, or None.
#[pyfunction]
#[pyo3(signature = (method, rho, preset = "distance:1"))]
fn certify_at(method: &PyMethod, rho: f64, preset: &str) -> PyResult<Option<String>> {
    let kind = parse_preset(preset)?;
    let lb = certify::preset(kind, &method.inner).map_err(value_err)?;
    let problem = certify::assemble(&method.inner, &lb, rho, None).map_err(value_err)?;
    let solver = InteriorPoint::new();
    let outcome = solver.solve_feasibility(&problem).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    if let Some(point) = outcome.point.as_ref() {
        let cert = certify::certificate_from_point(&method.inner, rho, point);
        if let Ok(report) = certify::verify(&method.inner, &lb, rho, &cert) {
            if report.ok {
                return Ok(Some(cert.to_json()));
            }
        }
    }
    Ok(None)
}

/// Replays a certificate on random instances; returns the number of
/// instances with a violated bound (zero means the audit passed).
#[pyfunction]
#[pyo3(signature = (method, certificate_json, preset = "distance:1", instances = 20, seed = 0, iterations = 200))]
fn audit(
    method: &PyMethod,
    certificate_json: &str,
    preset: &str,
    instances: usize,
    seed: u64,
    iterations: usize,
) -> PyResult<usize> {
    let cert = Certificate::from_json(certificate_json).map_err(value_err)?;
    let kind = parse_preset(preset)?;
    let lb = certify::preset(kind, &method.inner).map_err(value_err)?;
    let report = certify::verify(&method.inner, &lb, cert.rho, &cert).map_err(value_err)?;
    if !report.ok {
        return Err(PyRuntimeError::new_err(format!(
            "certificate fails static verification: {:?}",
            report.violations
        )));
    }
    let mut failures = 0;
    for i in 0..instances {
        let mut rng = StdRng::seed_from_u64(seed.wrapping_add(i as u64));
        let inst = simulate::random_instance(&method.inner, simulate::DEFAULT_DIM, &mut rng);
        let x0 = simulate::random_state(method.inner.n, simulate::DEFAULT_DIM, &mut rng);
        let star = simulate::find_fixed_point(&method.inner, &inst, &x0, 1_000_000)
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        let traj = simulate::run(&method.inner, &inst, &x0, iterations)
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        if !simulate::audit(&traj, &star, &cert, &lb, cert.rho, Some(kind)).ok {
            failures += 1;
        }
    }
    Ok(failures)
}

/// Rate-one feasibility over a parameter grid. Returns a list of
/// (p1, p2, feasible) with feasible None on a per-cell solver failure.
#[pyfunction]
#[pyo3(signature = (family, p1, p2, preset = None, restricted = false))]
fn region(
    family: &str,
    p1: (f64, f64, f64),
    p2: (f64, f64, f64),
    preset: Option<&str>,
    restricted: bool,
) -> PyResult<Vec<(f64, f64, Option<bool>)>> {
    let inf = f64::INFINITY;
    let f01 = FunctionClass::new(0.0, 1.0).expect("valid class");
    let f0inf = FunctionClass::new(0.0, inf).expect("valid class");
    let sweep_family = match family {
        "heavy_ball" => SweepFamily::HeavyBall { class: f01 },
        "prox_heavy_ball_d1" => SweepFamily::ProxHeavyBallInner { smooth: f01, prox: f0inf },
        "prox_heavy_ball_d2" => SweepFamily::ProxHeavyBallOuter { smooth: f01, prox: f0inf },
        "chambolle_pock" => SweepFamily::ChambollePock { classes: [f0inf, f0inf] },
        other => return Err(value_err(format!("unknown region family '{other}'"))),
    };
    if restricted && !matches!(sweep_family, SweepFamily::ChambollePock { .. }) {
        return Err(value_err("restricted mask is defined only for chambolle_pock"));
    }
    let kind = match preset {
        Some(text) => parse_preset(text)?,
        None => sweep_family.default_preset(),
    };
    let p1_grid = grid(p1.0, p1.1, p1.2);
    let p2_grid = grid(p2.0, p2.1, p2.2);
    let solver = InteriorPoint::new();
    let cells = sweep(&sweep_family, &p1_grid, &p2_grid, kind, restricted, &solver);
    Ok(cells.into_iter().map(|c| (c.p1, c.p2, c.feasible)).collect())
}

/// Strict-feasibility margin of the worst-case side for a method.
#[pyfunction]
fn slater_margin(method: &PyMethod) -> PyResult<(bool, f64)> {
    let solver = InteriorPoint::new();
    let report = certify::slater_margin(&method.inner, &solver)
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok((report.holds, report.margin))
}

#[pymodule]
fn lyapcert_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMethod>()?;
    m.add_function(wrap_pyfunction!(rate, m)?)?;
    m.add_function(wrap_pyfunction!(certify_at, m)?)?;
    m.add_function(wrap_pyfunction!(audit, m)?)?;
    m.add_function(wrap_pyfunction!(region, m)?)?;
    m.add_function(wrap_pyfunction!(slater_margin, m)?)?;
    Ok(())
}
