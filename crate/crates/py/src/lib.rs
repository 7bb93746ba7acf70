//! Python module `pyratdyn`. Points are Python complex numbers, with `None`
//! standing for the point at infinity.

use num_complex::Complex64;
use pyo3::exceptions::{PyKeyError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyAny;
use ratdyn::bimodule::{inner_product, normalized_witness, simplicity_witness, GraphFunction, WitnessOptions};
use ratdyn::expr::parse_test_function;
use ratdyn::julia::{default_start, sample_inverse_iteration, JuliaCloud, DEFAULT_BURN_IN};
use ratdyn::measure::{lyubich_exact, lyubich_mc, WeightedCloud};
use ratdyn::registry::{self, VerifyOptions};
use ratdyn::transfer::{kms_iterate_many, Observable, KMS_BUDGET};
use ratdyn::{Error, SpherePoint};

/// `(point, branch_index, critical_value)`
type CriticalRow = (Option<Complex64>, usize, Option<Complex64>);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::UnknownExample(_) => PyKeyError::new_err(e.to_string()),
        Error::Parse(_) | Error::InvalidMap(_) | Error::Precondition(_) | Error::CommonFactor { .. } => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn point(z: Option<Complex64>) -> SpherePoint {
    z.map_or(SpherePoint::Infinity, SpherePoint::new)
}

fn json_to_py<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

fn cloud(map: &ratdyn::RationalMap, samples: usize, seed: u64) -> PyResult<JuliaCloud> {
    let start = default_start(map).map_err(to_py)?;
    sample_inverse_iteration(map, &start, DEFAULT_BURN_IN, samples, seed).map_err(to_py)
}

/// A rational map on the Riemann sphere, from a catalog name (`lattes`,
/// `power_map_n:3`), an expression (`(2z^2-1)/z`) or coefficient lists.
#[pyclass(name = "RationalMap", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyMap {
    inner: ratdyn::RationalMap,
}

#[pymethods]
impl PyMap {
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        Ok(PyMap {
            inner: registry::resolve_map(spec).map_err(to_py)?,
        })
    }

    #[getter]
    fn degree(&self) -> usize {
        self.inner.degree()
    }

    fn __call__(&self, z: Option<Complex64>) -> Option<Complex64> {
        self.inner.evaluate(&point(z)).finite()
    }

    fn __repr__(&self) -> String {
        format!("RationalMap('{}')", self.inner)
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn iterate(&self, n: u32) -> PyResult<PyMap> {
        Ok(PyMap {
            inner: self.inner.iterate(n).map_err(to_py)?,
        })
    }

    /// `[(point, branch_index, critical_value)]`
    fn critical_points(&self) -> PyResult<Vec<CriticalRow>> {
        let crit = self.inner.critical_points().map_err(to_py)?;
        Ok(crit
            .iter()
            .map(|c| (c.point.finite(), c.branch_index, c.critical_value.finite()))
            .collect())
    }

    /// Weighted fiber of `R^depth` over `w`: `[(point, index)]`.
    #[pyo3(signature = (w, depth = 1))]
    fn preimages(&self, py: Python<'_>, w: Option<Complex64>, depth: u32) -> PyResult<Vec<(Option<Complex64>, u64)>> {
        let fiber = py.detach(|| self.inner.preimage_tree(&point(w), depth)).map_err(to_py)?;
        Ok(fiber.entries.iter().map(|e| (e.point.finite(), e.index)).collect())
    }

    fn branch_index(&self, x: Option<Complex64>) -> PyResult<u64> {
        self.inner.branch_index(&point(x)).map_err(to_py)
    }

    /// `[(fixed point, multiplier)]` over the finite fixed points.
    fn fixed_points(&self) -> PyResult<Vec<(Complex64, Complex64)>> {
        self.inner.fixed_points().map_err(to_py)
    }
}

/// Atoms of a pullback measure.
#[pyclass(name = "Measure", frozen)]
struct PyMeasure {
    inner: WeightedCloud,
}

#[pymethods]
impl PyMeasure {
    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn points(&self) -> Vec<Option<Complex64>> {
        self.inner.atoms.iter().map(|a| a.point.finite()).collect()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.atoms.iter().map(|a| a.weight).collect()
    }

    /// `∫ a dμ` for a test-function expression such as `z*zbar`.
    fn integrate(&self, py: Python<'_>, test: &str) -> PyResult<Complex64> {
        let a = parse_test_function(test).map_err(to_py)?;
        py.detach(|| self.inner.integrate(&a)).map_err(to_py)
    }
}

/// Backward-orbit sample of the Julia set.
#[pyfunction]
#[pyo3(signature = (map, samples = 20_000, seed = 0))]
fn julia_cloud(py: Python<'_>, map: &PyMap, samples: usize, seed: u64) -> PyResult<Vec<Option<Complex64>>> {
    let c = py.detach(|| cloud(&map.inner, samples, seed))?;
    Ok(c.points.iter().map(|p| p.finite()).collect())
}

/// Uniform measure on the depth-`depth` preimage tree of `y`, weighted by
/// branch indices.
#[pyfunction]
fn lyubich_measure(py: Python<'_>, map: &PyMap, y: Option<Complex64>, depth: u32) -> PyResult<PyMeasure> {
    let inner = py.detach(|| lyubich_exact(&map.inner, &point(y), depth)).map_err(to_py)?;
    Ok(PyMeasure { inner })
}

/// Monte-Carlo version: endpoints of `samples` seeded backward walks.
#[pyfunction]
#[pyo3(signature = (map, y, depth, samples, seed = 0))]
fn lyubich_measure_mc(py: Python<'_>, map: &PyMap, y: Option<Complex64>, depth: u32, samples: usize, seed: u64) -> PyResult<PyMeasure> {
    let inner = py
        .detach(|| lyubich_mc(&map.inner, &point(y), depth, samples, seed))
        .map_err(to_py)?;
    Ok(PyMeasure { inner })
}

/// `(level, sup_variation, mean)` for each level of the normalised transfer
/// iteration on Julia probes.
#[pyfunction]
#[pyo3(signature = (map, test, levels, probes = 16, seed = 0))]
fn kms_iterate(py: Python<'_>, map: &PyMap, test: &str, levels: u32, probes: usize, seed: u64) -> PyResult<Vec<(u32, f64, Complex64)>> {
    let a = parse_test_function(test).map_err(to_py)?;
    py.detach(|| {
        let pts = cloud(&map.inner, 20_000, seed)?.strided(probes);
        let traces = kms_iterate_many(&map.inner, &[&a as &dyn Observable], levels, &pts, None, &KMS_BUDGET).map_err(to_py)?;
        Ok(traces[0].iter().map(|t| (t.level, t.sup_variation, t.mean())).collect())
    })
}

/// `(f|g)(y) = Σ_{R(x)=y} e(x) conj(f(x, y)) g(x, y)` for functions of `x`.
#[pyfunction]
fn inner_product_at(map: &PyMap, f: &str, g: &str, y: Option<Complex64>) -> PyResult<Complex64> {
    let f = GraphFunction::from_test(1, parse_test_function(f).map_err(to_py)?);
    let g = GraphFunction::from_test(1, parse_test_function(g).map_err(to_py)?);
    inner_product(&map.inner, &f, &g, &point(y)).map_err(to_py)
}

/// Report of the ε-witness (or the normalised one) for a positive `a`.
#[pyfunction]
#[pyo3(signature = (map, a, eps, normalized = false, seed = 0))]
fn witness<'py>(py: Python<'py>, map: &PyMap, a: &str, eps: f64, normalized: bool, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let a = parse_test_function(a).map_err(to_py)?;
    let text = py.detach(|| -> PyResult<String> {
        let c = cloud(&map.inner, 20_000, seed)?;
        let opts = WitnessOptions::default();
        let text = if normalized {
            serde_json::to_string(&normalized_witness(&map.inner, &a, eps, &c, &opts).map_err(to_py)?.report)
        } else {
            serde_json::to_string(&simplicity_witness(&map.inner, &a, eps, &c, &opts).map_err(to_py)?.report)
        };
        text.map_err(|e| PyRuntimeError::new_err(e.to_string()))
    })?;
    json_to_py(py, &text)
}

#[pyfunction]
fn examples() -> Vec<&'static str> {
    registry::list()
}

/// Catalog record with quoted facts and anchors, as a dict.
#[pyfunction]
fn example<'py>(py: Python<'py>, name: &str) -> PyResult<Bound<'py, PyAny>> {
    let rec = registry::get(name).map_err(to_py)?;
    let text = serde_json::to_string(rec).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    json_to_py(py, &text)
}

/// Runs the catalog checks for `name` (or `name:param`).
#[pyfunction]
#[pyo3(signature = (name, seed = 0))]
fn verify<'py>(py: Python<'py>, name: &str, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let opts = VerifyOptions {
        seed,
        ..VerifyOptions::default()
    };
    let report = py.detach(|| registry::verify(name, &opts)).map_err(to_py)?;
    let text = serde_json::to_string(&report).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    json_to_py(py, &text)
}

#[pymodule]
fn pyratdyn(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMap>()?;
    m.add_class::<PyMeasure>()?;
    m.add_function(wrap_pyfunction!(julia_cloud, m)?)?;
    m.add_function(wrap_pyfunction!(lyubich_measure, m)?)?;
    m.add_function(wrap_pyfunction!(lyubich_measure_mc, m)?)?;
    m.add_function(wrap_pyfunction!(kms_iterate, m)?)?;
    m.add_function(wrap_pyfunction!(inner_product_at, m)?)?;
    m.add_function(wrap_pyfunction!(witness, m)?)?;
    m.add_function(wrap_pyfunction!(examples, m)?)?;
    m.add_function(wrap_pyfunction!(example, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
