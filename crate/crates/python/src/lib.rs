//! Python bindings: learning problems, schedules, the smart rule, expected
//! error curves and the verification suites. Structured results come back
//! as plain Python dicts and lists.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use smart_rule::cli::{errfn_table, parse_config, verify as run_suite, ScheduleConfig, Suite, VerifyOptions};
use smart_rule::error_function::{binomial_inside as inside, find_n as search, FindNOptions};
use smart_rule::harness::{audit_monotonicity, expected_error_curve as curve};
use smart_rule::{
    ArcPartition, CyclicPoint, Hypothesis, LabeledSample, LearningProblem, PracticalParams, Rule, RuleState,
    Schedule, SmartRule,
};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Hands a JSON value to Python's `json` module.
fn to_py(py: Python<'_>, value: serde_json::Result<serde_json::Value>) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(&value.map_err(value_err)?).map_err(value_err)?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn point(x: f64) -> PyResult<CyclicPoint> {
    CyclicPoint::new(x).map_err(value_err)
}

fn sample_from(pairs: Vec<(f64, u8)>) -> PyResult<LabeledSample> {
    let mut s = LabeledSample::with_capacity(pairs.len());
    for (x, y) in pairs {
        if y > 1 {
            return Err(value_err(format!("label {y} is not 0 or 1")));
        }
        s.push(point(x)?, y);
    }
    Ok(s)
}

/// A distribution of labelled points on the circle.
#[pyclass(name = "LearningProblem", frozen)]
struct PyProblem {
    inner: LearningProblem,
}

#[pymethods]
impl PyProblem {
    /// Parses the JSON problem schema.
    #[new]
    fn new(json: &str) -> PyResult<Self> {
        Ok(PyProblem {
            inner: LearningProblem::from_json(json).map_err(value_err)?,
        })
    }

    #[staticmethod]
    fn uniform(eta: f64) -> PyResult<Self> {
        Ok(PyProblem {
            inner: LearningProblem::uniform(eta).map_err(value_err)?,
        })
    }

    #[staticmethod]
    fn halves(eta_first: f64, eta_second: f64) -> PyResult<Self> {
        Ok(PyProblem {
            inner: LearningProblem::halves(eta_first, eta_second).map_err(value_err)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn bayes_error(&self) -> f64 {
        self.inner.bayes_error()
    }

    /// `n` labelled points as `(position, label)` pairs.
    fn sample(&self, seed: u64, n: usize) -> Vec<(f64, u8)> {
        self.inner
            .sample(seed, n)
            .entries()
            .iter()
            .map(|e| (e.point.position(), e.label))
            .collect()
    }

    /// Exact risk of the classifier with cells cut at `points` and one
    /// label per cell, in the order of the sorted points.
    fn risk(&self, points: Vec<f64>, labels: Vec<u8>) -> PyResult<f64> {
        let pts = points.into_iter().map(point).collect::<PyResult<Vec<_>>>()?;
        let h = Hypothesis::new(ArcPartition::from_points(pts), labels).map_err(value_err)?;
        Ok(self.inner.risk(&h))
    }

    fn __repr__(&self) -> String {
        format!("LearningProblem({})", self.inner.to_json())
    }
}

/// Block sizes of the smart rule.
#[pyclass(name = "Schedule", frozen)]
struct PySchedule {
    inner: Schedule,
    /// Why an exact schedule stopped early, if it did.
    #[pyo3(get)]
    failure: Option<String>,
}

#[pymethods]
impl PySchedule {
    /// Builds a schedule from the JSON used by the `schedule` command.
    #[staticmethod]
    fn from_config(json: &str) -> PyResult<Self> {
        let cfg: ScheduleConfig = parse_config(json).map_err(value_err)?;
        let out = cfg.build("").map_err(value_err)?;
        Ok(PySchedule {
            inner: out.schedule,
            failure: out.failure.map(|(k, e)| format!("stage {k}: {e}")),
        })
    }

    #[staticmethod]
    fn exact(stages: usize) -> PyResult<Self> {
        Self::from_config(&format!(r#"{{"mode": "exact", "stages": {stages}}}"#))
    }

    #[staticmethod]
    #[pyo3(signature = (stages, a_coef = 1.0, a_power = 2.0, b_coef = 20.0, b_power = 4.0, test_min = 1))]
    fn polynomial(
        stages: usize,
        a_coef: f64,
        a_power: f64,
        b_coef: f64,
        b_power: f64,
        test_min: u64,
    ) -> PyResult<Self> {
        let params = PracticalParams::Polynomial {
            a_coef,
            a_power,
            b_coef,
            b_power,
            stages,
            test_min,
        };
        Ok(PySchedule {
            inner: smart_rule::practical_schedule(&params, None).map_err(value_err)?,
            failure: None,
        })
    }

    #[getter]
    fn mode(&self) -> &'static str {
        self.inner.mode.as_str()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn horizon(&self) -> u64 {
        self.inner.horizon()
    }

    /// The sample sizes `n_k` at which the rule may update.
    fn update_points(&self) -> Vec<u64> {
        self.inner.stages().iter().map(|s| s.n).collect()
    }

    fn stages(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, serde_json::to_value(self.inner.stages()))
    }
}

/// State of the smart rule after some number of stages.
#[pyclass(name = "RuleState", frozen)]
struct PyRuleState {
    inner: RuleState,
}

#[pymethods]
impl PyRuleState {
    #[getter]
    fn stage(&self) -> usize {
        self.inner.stage()
    }

    #[getter]
    fn last_update_stage(&self) -> usize {
        self.inner.last_update_stage()
    }

    fn partitioning_set(&self) -> Vec<f64> {
        self.inner.partitioning_set().iter().map(|p| p.position()).collect()
    }

    /// Label at `x`; `None` before stage 1.
    fn predict(&self, x: f64) -> PyResult<Option<u8>> {
        Ok(self.inner.predict(point(x)?))
    }

    /// Exact risk of the current hypothesis under `problem`.
    fn risk(&self, problem: &PyProblem) -> Option<f64> {
        self.inner.hypothesis().map(|h| problem.inner.risk(h))
    }

    /// Per-stage audit records.
    fn log(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, serde_json::to_value(self.inner.log()))
    }
}

/// The smart rule for a fixed schedule.
#[pyclass(name = "SmartRule", frozen)]
struct PySmartRule {
    inner: SmartRule,
}

#[pymethods]
impl PySmartRule {
    #[new]
    fn new(schedule: &PySchedule) -> Self {
        PySmartRule {
            inner: SmartRule::new(schedule.inner.clone()),
        }
    }

    /// Runs every stage whose update point is at most `n` (default: the
    /// whole sample) on `(position, label)` pairs.
    #[pyo3(signature = (sample, n = None))]
    fn fit(&self, sample: Vec<(f64, u8)>, n: Option<usize>) -> PyResult<PyRuleState> {
        let s = sample_from(sample)?;
        let n = n.unwrap_or(s.len());
        Ok(PyRuleState {
            inner: self.inner.fit_prefix(&s, n).map_err(value_err)?,
        })
    }
}

#[pyfunction]
fn majority_error(p: f64, n: u64) -> PyResult<f64> {
    smart_rule::majority_error(p, n).map_err(value_err)
}

#[pyfunction]
fn monotone_gap(p: f64, n: u64) -> PyResult<f64> {
    smart_rule::monotone_gap(p, n).map_err(value_err)
}

#[pyfunction]
fn bayes_binary(p: f64) -> PyResult<f64> {
    smart_rule::bayes_binary(p).map_err(value_err)
}

#[pyfunction]
fn taylor_coeff(n: u64) -> PyResult<u128> {
    smart_rule::taylor_coeff(n).map_err(value_err)
}

#[pyfunction]
fn binomial_inside(p: f64, big_n: u64, t: f64) -> PyResult<f64> {
    inside(p, big_n, t).map_err(value_err)
}

#[pyfunction]
fn vc_sample_size(k: u64, big_n: u64, delta: f64) -> PyResult<u64> {
    smart_rule::vc_sample_size(k, big_n, delta).map_err(value_err)
}

/// Smallest odd `N >= n + 2` certified for `(n, t)`, with the certificate.
#[pyfunction]
#[pyo3(signature = (n, t, grid_size = None, cap = None))]
fn find_n(py: Python<'_>, n: u64, t: f64, grid_size: Option<usize>, cap: Option<u64>) -> PyResult<Py<PyAny>> {
    let mut options = FindNOptions::default();
    if let Some(g) = grid_size {
        options.grid_size = g;
    }
    if let Some(c) = cap {
        options.cap = c;
    }
    let r = search(n, t, &options).map_err(value_err)?;
    to_py(py, serde_json::to_value(r))
}

/// The `errfn` table as CSV text.
#[pyfunction]
#[pyo3(signature = (ns, grid = 1001))]
fn errfn_csv(ns: Vec<u64>, grid: usize) -> PyResult<String> {
    errfn_table(&ns, grid).and_then(|t| t.to_csv()).map_err(value_err)
}

/// Mean exact risk over `trials` samples at each size in `ns`, with the
/// monotonicity audit. `rule` is `"smart"` (needs `schedule`) or `"nn1"`.
#[pyfunction]
#[pyo3(signature = (problem, ns, trials, seed, schedule = None, rule = "smart"))]
fn expected_error_curve(
    py: Python<'_>,
    problem: &PyProblem,
    ns: Vec<usize>,
    trials: usize,
    seed: u64,
    schedule: Option<&PySchedule>,
    rule: &str,
) -> PyResult<Py<PyAny>> {
    let rule = match (rule, schedule) {
        ("smart", Some(s)) => Rule::Smart {
            schedule: s.inner.clone(),
        },
        ("smart", None) => return Err(value_err("the smart rule needs a schedule")),
        ("nn1", _) => Rule::Nn1,
        (other, _) => return Err(value_err(format!("unknown rule {other:?}"))),
    };
    let c = py
        .detach(|| curve(&problem.inner, &rule, &ns, trials, seed))
        .map_err(value_err)?;
    let audit = audit_monotonicity(&c, 3.0);
    let value = serde_json::to_value(&c).and_then(|mut v| {
        v["monotonicity"] = serde_json::to_value(audit)?;
        Ok(v)
    });
    to_py(py, value)
}

/// Runs a verification suite; returns the report as a dict with a `pass` key.
#[pyfunction]
#[pyo3(signature = (suite, seed, trials = None))]
fn verify(py: Python<'_>, suite: &str, seed: u64, trials: Option<usize>) -> PyResult<Py<PyAny>> {
    let suite: Suite = serde_json::from_value(serde_json::Value::String(suite.into()))
        .map_err(|_| value_err(format!("unknown suite {suite:?}")))?;
    let opts = VerifyOptions {
        trials,
        ..VerifyOptions::default()
    };
    let report = py.detach(|| run_suite(suite, seed, &opts)).map_err(value_err)?;
    to_py(py, serde_json::to_value(report))
}

#[pymodule]
fn smart_rule_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", smart_rule::cli::VERSION)?;
    m.add_class::<PyProblem>()?;
    m.add_class::<PySchedule>()?;
    m.add_class::<PySmartRule>()?;
    m.add_class::<PyRuleState>()?;
    m.add_function(wrap_pyfunction!(majority_error, m)?)?;
    m.add_function(wrap_pyfunction!(monotone_gap, m)?)?;
    m.add_function(wrap_pyfunction!(bayes_binary, m)?)?;
    m.add_function(wrap_pyfunction!(taylor_coeff, m)?)?;
    m.add_function(wrap_pyfunction!(binomial_inside, m)?)?;
    m.add_function(wrap_pyfunction!(vc_sample_size, m)?)?;
    m.add_function(wrap_pyfunction!(find_n, m)?)?;
    m.add_function(wrap_pyfunction!(errfn_csv, m)?)?;
    m.add_function(wrap_pyfunction!(expected_error_curve, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
