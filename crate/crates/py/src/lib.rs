//! Python bindings. Structured results cross the boundary as JSON text.

mod api;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use dsltrans_core::cutoff::{compute_cutoff as cutoff_formulas, CutoffParams};
use dsltrans_core::lang::{print_spec, Specification};

fn err(msg: String) -> PyErr {
    PyValueError::new_err(msg)
}

/// A parsed and resolved specification.
#[pyclass(name = "Specification", frozen, module = "dsltrans")]
struct PySpecification {
    spec: Specification,
}

#[pymethods]
impl PySpecification {
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(PySpecification { spec: api::parse(text).map_err(err)? })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| err(format!("{path}: {e}")))?;
        Self::parse(&text)
    }

    #[getter]
    fn properties(&self) -> Vec<String> {
        self.spec.properties.iter().map(|p| p.name.clone()).collect()
    }

    #[getter]
    fn transformations(&self) -> Vec<String> {
        self.spec.transformations.iter().map(|t| t.name.clone()).collect()
    }

    fn print(&self) -> String {
        print_spec(&self.spec)
    }

    fn check(&self) -> PyResult<String> {
        api::check(&self.spec).map_err(err)
    }

    #[pyo3(signature = (property, mode = "trace-attr"))]
    fn cutoff(&self, property: &str, mode: &str) -> PyResult<String> {
        api::cutoff(&self.spec, property, mode).map_err(err)
    }

    #[pyo3(signature = (properties = None, timeout = 600.0, fragment = "minimal", mode = "trace-attr", per_class = true, parallel = 1))]
    #[allow(clippy::too_many_arguments)]
    fn verify(
        &self,
        py: Python<'_>,
        properties: Option<Vec<String>>,
        timeout: f64,
        fragment: &str,
        mode: &str,
        per_class: bool,
        parallel: usize,
    ) -> PyResult<String> {
        let opts = api::VerifyOptions {
            properties: properties.unwrap_or_default(),
            timeout,
            fragment: fragment.to_string(),
            mode: mode.to_string(),
            per_class,
            parallel,
        };
        py.detach(|| api::verify(&self.spec, &opts)).map_err(err)
    }

    #[pyo3(signature = (model_json, transformation = None))]
    fn run(&self, model_json: &str, transformation: Option<&str>) -> PyResult<String> {
        api::run(&self.spec, model_json, transformation).map_err(err)
    }

    /// Proof specification text and map document.
    fn abstraction(&self) -> PyResult<(String, String)> {
        api::abstract_spec(&self.spec).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Specification(transformations={:?}, properties={})",
            self.transformations(),
            self.spec.properties.len()
        )
    }
}

/// Coarse, sharp and tight cutoffs and their minimum.
#[pyfunction]
fn compute_cutoff(c: u64, m: u64, p: u64, d: u64, a: u64, r: u64) -> (u64, u64, u64, u64) {
    let b = cutoff_formulas(&CutoffParams { c, m, p, d, a, r });
    (b.coarse, b.sharp, b.tight, b.k)
}

#[pymodule]
fn dsltrans(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySpecification>()?;
    m.add_function(wrap_pyfunction!(compute_cutoff, m)?)?;
    Ok(())
}
