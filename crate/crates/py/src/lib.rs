//! Python bindings: kinematics, animation and `.qanim` I/O, sign compilation,
//! sentence ordering and the recognition-statistics audit.

use std::collections::BTreeMap;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use signforge::animation as anim;
use signforge::kinematics::{self, IkGoal, IkOptions, JointVector, MirrorMap, Pose};
use signforge::lexicon::{self, CompileOptions, LexiconError};
use signforge::robot_model;
use signforge::{qanim, sentence, stats};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Converts anything serializable into plain Python objects via `json`.
fn to_py<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn pose_tuple(pose: &Pose) -> ([f64; 3], [f64; 4]) {
    let p = pose.position;
    let q = pose.orientation.coords;
    ([p.x, p.y, p.z], [q.w, q.x, q.y, q.z])
}

/// Serial revolute chain.
#[pyclass(name = "KinematicChain", module = "signforge_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyChain {
    inner: robot_model::KinematicChain,
}

#[pymethods]
impl PyChain {
    /// The bundled Pepper torso-to-right-hand chain.
    #[staticmethod]
    fn pepper_right_arm() -> Self {
        Self { inner: robot_model::KinematicChain::pepper_right_arm() }
    }

    #[staticmethod]
    fn from_urdf(urdf: &str, base: &str, tip: &str) -> PyResult<Self> {
        let model = robot_model::parse_urdf(urdf).map_err(value_err)?;
        Ok(Self { inner: robot_model::build_chain(&model, base, tip).map_err(value_err)? })
    }

    #[getter]
    fn dof(&self) -> usize {
        self.inner.dof()
    }

    #[getter]
    fn joint_names(&self) -> Vec<String> {
        self.inner.joint_names()
    }

    #[getter]
    fn limits(&self) -> Vec<(f64, f64)> {
        self.inner.limits()
    }

    /// Tip pose as `(position, orientation_wxyz)`.
    fn forward(&self, q: Vec<f64>) -> PyResult<([f64; 3], [f64; 4])> {
        kinematics::forward(&self.inner, &q).map(|p| pose_tuple(&p)).map_err(value_err)
    }

    /// 6 x n geometric Jacobian, angular rows first.
    fn jacobian(&self, q: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        let j = kinematics::jacobian(&self.inner, &q).map_err(value_err)?;
        Ok((0..6).map(|r| j.row(r).iter().copied().collect()).collect())
    }

    /// Solves IK and returns the solution as a dict.
    #[pyo3(signature = (position, orientation=[1.0, 0.0, 0.0, 0.0], weights=kinematics::DEFAULT_WEIGHTS, seed=0, initial_guess=None))]
    fn solve_ik(
        &self,
        py: Python<'_>,
        position: [f64; 3],
        orientation: [f64; 4],
        weights: [f64; 6],
        seed: u64,
        initial_guess: Option<Vec<f64>>,
    ) -> PyResult<Py<PyAny>> {
        let target = Pose::new(position.into(), kinematics::unit_quaternion_wxyz(orientation).map_err(value_err)?);
        let goal = IkGoal { seed, ..IkGoal::new(target, weights) };
        let options = IkOptions { initial_guess, ..Default::default() };
        let sol = py.detach(|| kinematics::solve_ik(&self.inner, &goal, &options)).map_err(value_err)?;
        to_py(py, &sol)
    }

    fn __repr__(&self) -> String {
        format!("KinematicChain({} -> {}, dof={})", self.inner.base, self.inner.tip, self.inner.dof())
    }
}

/// Mirrors right-arm joint values onto the left arm with the default Pepper map.
#[pyfunction]
fn mirror(names: Vec<String>, values: Vec<f64>) -> PyResult<(Vec<String>, Vec<f64>)> {
    let q = JointVector::new(names, values).map_err(value_err)?;
    let m = kinematics::mirror(&q, &MirrorMap::pepper_default()).map_err(value_err)?;
    Ok((m.names, m.values))
}

/// Keyframe animation with Bezier curves.
#[pyclass(name = "Animation", module = "signforge_py", from_py_object)]
#[derive(Clone)]
struct PyAnimation {
    inner: anim::Animation,
}

#[pymethods]
impl PyAnimation {
    #[new]
    fn new(fps: u32) -> Self {
        Self { inner: anim::Animation::new(fps) }
    }

    /// Appends a degree curve with auto tangents through `points` `[(frame, value), ...]`.
    fn add_curve(&mut self, actuator: &str, points: Vec<(u32, f64)>) -> PyResult<()> {
        if self.inner.curve(actuator).is_some() {
            return Err(PyValueError::new_err(format!("duplicate actuator `{actuator}`")));
        }
        self.inner.curves.push(anim::ActuatorCurve::auto(actuator, &points).map_err(value_err)?);
        Ok(())
    }

    #[staticmethod]
    fn from_qanim(text: &str) -> PyResult<Self> {
        Ok(Self { inner: qanim::parse_qanim(text).map_err(value_err)? })
    }

    fn to_qanim(&self) -> PyResult<String> {
        qanim::emit_qanim(&self.inner).map_err(value_err)
    }

    #[getter]
    fn fps(&self) -> u32 {
        self.inner.fps
    }

    #[getter]
    fn actuators(&self) -> Vec<String> {
        self.inner.actuators().into_iter().map(str::to_string).collect()
    }

    #[getter]
    fn last_frame(&self) -> u32 {
        self.inner.last_frame()
    }

    /// Keys of one curve as `[(frame, value), ...]`.
    fn points(&self, actuator: &str) -> PyResult<Vec<(u32, f64)>> {
        let curve = self.inner.curve(actuator).ok_or_else(|| PyValueError::new_err(format!("no curve `{actuator}`")))?;
        Ok(curve.points())
    }

    /// Every actuator's value at a (fractional) frame.
    fn sample(&self, frame: f64) -> PyResult<BTreeMap<String, f64>> {
        self.inner.sample(frame).map_err(value_err)
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner)
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!("Animation(fps={}, curves={}, last_frame={})", self.inner.fps, self.inner.curves.len(), self.inner.last_frame())
    }
}

/// Canonical `.qanim` number formatting.
#[pyfunction]
fn format_number(x: f64) -> PyResult<String> {
    qanim::format_number(x).map_err(value_err)
}

/// Compiles a sign document (JSON text) on the Pepper arm; returns `(animation, report)`.
#[pyfunction]
#[pyo3(signature = (document, fps=25, strict=false))]
fn compile_sign(py: Python<'_>, document: &str, fps: u32, strict: bool) -> PyResult<(PyAnimation, Py<PyAny>)> {
    let sign = lexicon::parse_sign(document).map_err(value_err)?;
    let chain = robot_model::KinematicChain::pepper_right_arm();
    let options = CompileOptions { fps, strict, ..Default::default() };
    let result = py.detach(|| lexicon::compile_sign(&sign, &chain, &MirrorMap::pepper_default(), &options));
    match result {
        Ok((animation, report)) => Ok((PyAnimation { inner: animation }, to_py(py, &report)?)),
        Err(LexiconError::FailedCompile(report)) => {
            Err(PyRuntimeError::new_err(format!("compile failed: {}", report.reasons.join("; "))))
        }
        Err(e) => Err(value_err(e)),
    }
}

/// Concatenates compiled signs, in gloss order, into one animation.
#[pyfunction]
#[pyo3(signature = (glosses, signs, transition=sentence::DEFAULT_TRANSITION_FRAMES, lead_in=sentence::DEFAULT_LEAD_FRAMES, lead_out=sentence::DEFAULT_LEAD_FRAMES))]
fn compose(
    glosses: Vec<String>,
    signs: BTreeMap<String, PyAnimation>,
    transition: u32,
    lead_in: u32,
    lead_out: u32,
) -> PyResult<PyAnimation> {
    let s = sentence::GlossSentence::uniform(glosses, transition, lead_in, lead_out);
    let signs: BTreeMap<String, anim::Animation> = signs.into_iter().map(|(k, v)| (k, v.inner)).collect();
    let out = sentence::compose(&s, &signs, &sentence::ComposeOptions::default()).map_err(value_err)?;
    Ok(PyAnimation { inner: out })
}

#[pyfunction]
fn sov_order(subject: &str, object: &str, verb: &str) -> Vec<String> {
    sentence::sov_order(subject, object, verb)
}

/// Exact `P(X >= k)` for `X ~ Binomial(n, p0)`.
#[pyfunction]
#[pyo3(signature = (k, n, p0=stats::CHANCE_LEVEL))]
fn binomial_tail(k: u64, n: u64, p0: f64) -> PyResult<f64> {
    stats::binomial_tail(k, n, p0).map_err(value_err)
}

/// Audits `sign,correct,total,paper_p,notes` CSV text; one dict per row.
#[pyfunction]
#[pyo3(signature = (csv_text, p0=stats::CHANCE_LEVEL))]
fn analyze_csv<'py>(py: Python<'py>, csv_text: &str, p0: f64) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let records = stats::load_records(csv_text).map_err(value_err)?;
    let rows = stats::analyze(&records, p0).map_err(value_err)?;
    rows.iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("label", &r.label)?;
            d.set_item("correct", r.correct)?;
            d.set_item("total", r.total)?;
            d.set_item("rate_percent", r.rate_percent)?;
            d.set_item("computed_p", r.computed_p)?;
            d.set_item("paper_p", r.paper_p.map(|p| p.to_string()))?;
            d.set_item("significant_at_05", r.significant_at_05)?;
            d.set_item("mismatch_flag", r.mismatch_flag)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn signforge_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyChain>()?;
    m.add_class::<PyAnimation>()?;
    m.add_function(wrap_pyfunction!(mirror, m)?)?;
    m.add_function(wrap_pyfunction!(format_number, m)?)?;
    m.add_function(wrap_pyfunction!(compile_sign, m)?)?;
    m.add_function(wrap_pyfunction!(compose, m)?)?;
    m.add_function(wrap_pyfunction!(sov_order, m)?)?;
    m.add_function(wrap_pyfunction!(binomial_tail, m)?)?;
    m.add_function(wrap_pyfunction!(analyze_csv, m)?)?;
    Ok(())
}
