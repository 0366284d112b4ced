//! Python bindings for the helper/service enforcement analyzer.

use std::path::PathBuf;

use helper_audit::corpusgen::{self, GenSpec};
use helper_audit::inconsistency::{self, AnalysisConfig, AnalysisReport, PermissionMap, RestrictionList};
use helper_audit::ir::{self, validate_corpus};
use helper_audit::mining::MiningParams;
use helper_audit::SeedConfig;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

type DiagnosticRow = (String, String, Option<String>, Option<usize>, String);
type FixtureRow = (String, Corpus, Option<(String, String, String)>);

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn read(path: PathBuf) -> PyResult<String> {
    std::fs::read_to_string(&path).map_err(|e| PyRuntimeError::new_err(format!("{}: {e}", path.display())))
}

#[pyclass(frozen, module = "helper_audit_py")]
pub struct Corpus {
    inner: ir::Corpus,
}

#[pymethods]
impl Corpus {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Corpus { inner: ir::parse_corpus(text).map_err(err)? })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Self::from_json(&read(path)?)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn digest(&self) -> String {
        self.inner.digest()
    }

    #[getter]
    fn class_count(&self) -> usize {
        self.inner.classes().len()
    }

    #[getter]
    fn method_count(&self) -> usize {
        self.inner.method_count()
    }

    /// Diagnostics as `(kind, class, method, statement, message)`.
    fn validate(&self) -> Vec<DiagnosticRow> {
        validate_corpus(&self.inner)
            .into_iter()
            .map(|d| {
                let kind = serde_json::to_value(d.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
                (kind, d.class, d.method, d.statement, d.message)
            })
            .collect()
    }

    /// Helper/IPC pairs under default settings.
    fn pairs(&self) -> PyResult<Vec<Pair>> {
        let prep = inconsistency::prepare(&self.inner, &AnalysisConfig::default()).map_err(err)?;
        Ok(prep
            .pairing
            .pairs
            .into_iter()
            .map(|p| Pair {
                ipc_signature: p.ipc_signature.to_string(),
                helper: p.helper.to_string(),
                service: p.service.to_string(),
                native: p.native,
            })
            .collect())
    }

    fn __repr__(&self) -> String {
        format!("Corpus(classes={}, digest={})", self.inner.classes().len(), &self.inner.digest()[..12])
    }
}

#[pyclass(frozen, get_all, skip_from_py_object, module = "helper_audit_py")]
#[derive(Clone)]
pub struct Pair {
    ipc_signature: String,
    helper: String,
    service: String,
    native: bool,
}

#[pymethods]
impl Pair {
    fn __repr__(&self) -> String {
        format!("Pair({} -> {})", self.helper, self.ipc_signature)
    }
}

#[pyclass(frozen, get_all, skip_from_py_object, module = "helper_audit_py")]
#[derive(Clone)]
pub struct Finding {
    ipc_signature: String,
    helper: String,
    service: String,
    vuln_class: String,
    hazard: bool,
    native: bool,
    suppressed: bool,
    restriction: Option<String>,
}

#[pymethods]
impl Finding {
    fn key(&self) -> (String, String, String) {
        (self.ipc_signature.clone(), self.helper.clone(), self.vuln_class.clone())
    }

    fn __repr__(&self) -> String {
        format!("Finding({} {} via {})", self.vuln_class, self.ipc_signature, self.helper)
    }
}

#[pyclass(frozen, module = "helper_audit_py")]
pub struct Report {
    inner: AnalysisReport,
}

#[pymethods]
impl Report {
    #[getter]
    fn findings(&self) -> Vec<Finding> {
        self.inner
            .findings
            .iter()
            .map(|f| Finding {
                ipc_signature: f.ipc_signature.to_string(),
                helper: f.helper.to_string(),
                service: f.service.to_string(),
                vuln_class: f.vuln_class.as_str().to_string(),
                hazard: f.hazard,
                native: f.native,
                suppressed: f.suppressed,
                restriction: f.restriction.and_then(|r| serde_json::to_value(r).ok()?.as_str().map(String::from)),
            })
            .collect()
    }

    #[getter]
    fn pair_count(&self) -> usize {
        self.inner.pairs.len()
    }

    #[getter]
    fn suppressed_count(&self) -> usize {
        self.inner.suppressed_count()
    }

    fn summary(&self) -> String {
        self.inner.summary_line()
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn to_markdown(&self) -> PyResult<String> {
        inconsistency::render_markdown(&self.inner.to_json()).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Report({})", self.inner.summary_line())
    }
}

#[allow(clippy::too_many_arguments)]
fn config(
    seeds: Option<&str>,
    permissions: Option<&str>,
    restrictions: Option<&str>,
    min_support: usize,
    seed_boost: usize,
    max_depth: usize,
    parallel: usize,
) -> PyResult<AnalysisConfig> {
    let mining = MiningParams { min_support, seed_boost, ..MiningParams::default() };
    mining.check().map_err(err)?;
    if parallel == 0 || max_depth == 0 {
        return Err(PyValueError::new_err("parallel and max_depth must be positive"));
    }
    Ok(AnalysisConfig {
        seeds: seeds.map(SeedConfig::from_json).transpose().map_err(err)?.unwrap_or_default(),
        permissions: permissions.map(serde_json::from_str::<PermissionMap>).transpose().map_err(err)?.unwrap_or_default(),
        restrictions: restrictions.map(serde_json::from_str::<RestrictionList>).transpose().map_err(err)?.unwrap_or_default(),
        mining,
        max_depth,
        parallel,
        ..AnalysisConfig::default()
    })
}

/// Runs the whole pipeline. Optional inputs are JSON texts.
#[pyfunction]
#[pyo3(signature = (corpus, *, seeds=None, permissions=None, restrictions=None, min_support=3, seed_boost=1000, max_depth=12, parallel=1))]
#[allow(clippy::too_many_arguments)]
fn analyze(
    py: Python<'_>,
    corpus: &Corpus,
    seeds: Option<&str>,
    permissions: Option<&str>,
    restrictions: Option<&str>,
    min_support: usize,
    seed_boost: usize,
    max_depth: usize,
    parallel: usize,
) -> PyResult<Report> {
    let cfg = config(seeds, permissions, restrictions, min_support, seed_boost, max_depth, parallel)?;
    let inner = py.detach(|| inconsistency::analyze(&corpus.inner, &cfg)).map_err(err)?;
    Ok(Report { inner })
}

/// Mined identity vocabulary as `(access, enforce)` name lists.
#[pyfunction]
#[pyo3(signature = (corpus, *, seeds=None, min_support=3, seed_boost=1000))]
fn mine(corpus: &Corpus, seeds: Option<&str>, min_support: usize, seed_boost: usize) -> PyResult<(Vec<String>, Vec<String>)> {
    let cfg = config(seeds, None, None, min_support, seed_boost, helper_audit::callgraph::DEFAULT_MAX_DEPTH, 1)?;
    let prep = inconsistency::prepare(&corpus.inner, &cfg).map_err(err)?;
    let v = inconsistency::mine_vocabulary(&prep, &cfg).map_err(err)?;
    Ok((v.identity_access_mined.into_iter().collect(), v.identity_enforce_mined.into_iter().collect()))
}

#[pyclass(frozen, module = "helper_audit_py")]
pub struct Generated {
    inner: corpusgen::Generated,
}

#[pymethods]
impl Generated {
    #[getter]
    fn corpus(&self) -> PyResult<Corpus> {
        Ok(Corpus { inner: ir::Corpus::from_document(self.inner.corpus.clone()).map_err(err)? })
    }

    /// Labelled `(ipc, helper, class)` triples.
    #[getter]
    fn labels(&self) -> Vec<(String, String, String)> {
        triples(&self.inner.truth.labels)
    }

    #[getter]
    fn suppressed(&self) -> Vec<(String, String, String)> {
        triples(&self.inner.truth.suppressed)
    }

    #[getter]
    fn permissions_json(&self) -> String {
        serde_json::to_string(&self.inner.permissions).expect("permission map serializes")
    }

    #[getter]
    fn restrictions_json(&self) -> String {
        serde_json::to_string(&self.inner.restrictions).expect("restriction list serializes")
    }

    /// `{file name: contents}` as written by the `gen` command.
    fn files(&self) -> Vec<(String, String)> {
        self.inner.files().into_iter().map(|(n, c)| (n.to_string(), c)).collect()
    }
}

fn triples<'a>(labels: impl IntoIterator<Item = &'a corpusgen::Label>) -> Vec<(String, String, String)> {
    labels.into_iter().map(|l| (l.ipc_signature.clone(), l.helper.clone(), l.vuln_class.as_str().to_string())).collect()
}

/// Labelled synthetic corpus from a JSON generator spec (defaults if omitted).
#[pyfunction]
#[pyo3(signature = (spec=None))]
fn generate(spec: Option<&str>) -> PyResult<Generated> {
    let spec = match spec {
        Some(s) => GenSpec::from_json(s).map_err(err)?,
        None => GenSpec::default(),
    };
    Ok(Generated { inner: corpusgen::generate(&spec).map_err(err)? })
}

/// Hand-built pattern corpora as `(name, corpus, expected finding or None)`.
#[pyfunction]
fn fixtures() -> PyResult<Vec<FixtureRow>> {
    corpusgen::fixture_patterns()
        .into_iter()
        .map(|f| {
            let inner = ir::Corpus::from_document(f.corpus).map_err(err)?;
            let expected = f.expected.map(|(i, h, c)| (i, h, c.as_str().to_string()));
            Ok((f.name.to_string(), Corpus { inner }, expected))
        })
        .collect()
}

#[pymodule]
fn helper_audit_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Corpus>()?;
    m.add_class::<Pair>()?;
    m.add_class::<Finding>()?;
    m.add_class::<Report>()?;
    m.add_class::<Generated>()?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(mine, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(fixtures, m)?)?;
    Ok(())
}
