//! Python bindings: `Gazetteer`, `Engine` and the artifact-building
//! operations. Results cross the boundary as plain dicts and lists.

use std::path::PathBuf;

use geonorm::config::Config;
use geonorm::embeddings::{train, EmbeddingTable};
use geonorm::pipeline::{evaluate as run_evaluate, hit_value as run_hit_value};
use geonorm::sequence::{read_corpus, read_sequences, write_sequences, LexiconRecognizer};
use geonorm::{fixtures, AdPath, Document, NormalizeOptions, RoiStore, SequenceExtractor};
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyModule;

fn to_py_err(e: geonorm::Error) -> PyErr {
    match e {
        geonorm::Error::Io { .. } => PyOSError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// Converts any serializable value to Python objects through `json.loads`.
fn to_py<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn load_config(path: Option<PathBuf>) -> PyResult<Config> {
    Config::resolve(path.as_deref()).map_err(to_py_err)
}

fn path_of(names: [Option<String>; 3]) -> AdPath {
    AdPath::from_names(names.each_ref().map(Option::as_deref))
}

#[pyclass(frozen, module = "geonorm_py")]
pub struct Gazetteer {
    inner: geonorm::Gazetteer,
}

#[pymethods]
impl Gazetteer {
    /// The fixture gazetteer shipped with the library.
    #[staticmethod]
    fn bundled() -> Self {
        Gazetteer {
            inner: geonorm::Gazetteer::bundled(),
        }
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let inner = geonorm::Gazetteer::load(path).map_err(to_py_err)?;
        Ok(Gazetteer { inner })
    }

    #[staticmethod]
    fn from_jsonl(text: &str) -> PyResult<Self> {
        let inner = geonorm::Gazetteer::from_jsonl(text).map_err(to_py_err)?;
        Ok(Gazetteer { inner })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Records whose name or alias equals `surface`.
    fn lookup(&self, py: Python<'_>, surface: &str) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.lookup_records(surface))
    }

    /// `[province, prefecture, county]` names for a division code.
    fn expand(&self, code: &str) -> PyResult<[Option<String>; 3]> {
        let id = self
            .inner
            .by_code(code)
            .ok_or_else(|| PyValueError::new_err(format!("unknown code {code:?}")))?;
        let path = self.inner.expand(id).map_err(to_py_err)?;
        Ok(path.names().map(|n| n.map(str::to_owned)))
    }

    /// Whether `names` is a valid chain of divisions.
    fn validates(&self, names: [Option<String>; 3]) -> bool {
        self.inner.validates(&path_of(names))
    }
}

#[pyclass(frozen, module = "geonorm_py")]
pub struct Engine {
    inner: geonorm::Engine,
}

#[pymethods]
impl Engine {
    /// Without paths, the bundled gazetteer, embeddings and ROI store are
    /// used; with a custom gazetteer, only the artifacts given are loaded.
    #[new]
    #[pyo3(signature = (
        gazetteer=None, embeddings=None, roi_store=None, *,
        use_inference=true, use_roi=true, min_similarity=None, iterative_inference=false
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        gazetteer: Option<&Bound<'_, Gazetteer>>,
        embeddings: Option<PathBuf>,
        roi_store: Option<PathBuf>,
        use_inference: bool,
        use_roi: bool,
        min_similarity: Option<f64>,
        iterative_inference: bool,
    ) -> PyResult<Self> {
        let options = NormalizeOptions {
            use_inference,
            use_roi,
            min_similarity,
            iterative_inference,
        };
        let bundled = gazetteer.is_none();
        let g = gazetteer.map_or_else(geonorm::Gazetteer::bundled, |g| g.get().inner.clone());
        let table = match embeddings {
            Some(p) => Some(EmbeddingTable::load(p).map_err(to_py_err)?),
            None if bundled => Some(fixtures::embeddings()),
            None => None,
        };
        let roi = match roi_store {
            Some(p) => Some(RoiStore::load(p, &g).map_err(to_py_err)?),
            None if bundled => Some(fixtures::roi_store(&g)),
            None => None,
        };
        Ok(Engine {
            inner: geonorm::Engine::new(g, table, roi, options),
        })
    }

    /// Normalizes one text; returns the result as a dict.
    #[pyo3(signature = (text, timings=false))]
    fn normalize(&self, py: Python<'_>, text: &str, timings: bool) -> PyResult<Py<PyAny>> {
        let r = py.detach(|| self.inner.normalize(text));
        let r = if timings { r } else { r.without_timings() };
        to_py(py, &r)
    }

    /// Normalizes `(doc_id, text)` pairs in order.
    #[pyo3(signature = (documents, workers=1))]
    fn normalize_batch(&self, py: Python<'_>, documents: Vec<(String, String)>, workers: usize) -> PyResult<Py<PyAny>> {
        let docs: Vec<Document> = documents.into_iter().map(|(id, t)| Document::new(id, t)).collect();
        let results: Vec<_> = py
            .detach(|| self.inner.normalize_batch(&docs, workers))
            .into_iter()
            .map(|r| r.without_timings())
            .collect();
        to_py(py, &results)
    }

    fn __repr__(&self) -> String {
        format!(
            "Engine(records={}, embeddings={}, roi_entries={})",
            self.inner.gazetteer().len(),
            self.inner.embeddings().map_or(0, |t| t.len()),
            self.inner.roi_store().map_or(0, |s| s.len()),
        )
    }
}

/// Extracts geographic sequences from corpus JSONL. Returns the count.
#[pyfunction]
#[pyo3(signature = (corpus, output, gazetteer=None, lexicon=None, config=None))]
fn extract_sequences(
    py: Python<'_>,
    corpus: PathBuf,
    output: PathBuf,
    gazetteer: Option<&Bound<'_, Gazetteer>>,
    lexicon: Option<Vec<String>>,
    config: Option<PathBuf>,
) -> PyResult<usize> {
    let config = load_config(config)?;
    let g = gazetteer.map_or_else(geonorm::Gazetteer::bundled, |g| g.get().inner.clone());
    let words: Vec<String> = lexicon.unwrap_or_else(|| fixtures::locations().into_iter().map(str::to_owned).collect());
    py.detach(|| {
        let docs = read_corpus(&corpus)?;
        let recognizer = LexiconRecognizer::new(&g, &words);
        let seqs = SequenceExtractor::new(&g, Box::new(recognizer), config.extract.clone())?
            .with_splitter(config.text.splitter())
            .extract_corpus(&docs);
        write_sequences(&output, &seqs)?;
        Ok(seqs.len())
    })
    .map_err(to_py_err)
}

/// Trains skip-gram embeddings and writes them to `output`. Returns the
/// objective trace.
#[pyfunction]
#[pyo3(signature = (sequences, output, config=None))]
fn train_embeddings(
    py: Python<'_>,
    sequences: PathBuf,
    output: PathBuf,
    config: Option<PathBuf>,
) -> PyResult<Vec<f64>> {
    let config = load_config(config)?;
    py.detach(|| {
        let seqs = read_sequences(&sequences)?;
        let (table, report) = train(&seqs, &config.train)?;
        table.save(&output)?;
        Ok(report.objective)
    })
    .map_err(to_py_err)
}

/// Mines the ROI store and writes it to `output`. Returns its metadata.
#[pyfunction]
#[pyo3(signature = (sequences, output, gazetteer=None, config=None))]
fn build_roi(
    py: Python<'_>,
    sequences: PathBuf,
    output: PathBuf,
    gazetteer: Option<&Bound<'_, Gazetteer>>,
    config: Option<PathBuf>,
) -> PyResult<Py<PyAny>> {
    let config = load_config(config)?;
    let g = gazetteer.map_or_else(geonorm::Gazetteer::bundled, |g| g.get().inner.clone());
    let store = py
        .detach(|| {
            let seqs = read_sequences(&sequences)?;
            let store = geonorm::roi::build_roi(&seqs, &g, &config.roi)?;
            store.save(&output)?;
            Ok(store)
        })
        .map_err(to_py_err)?;
    to_py(py, &store.meta)
}

/// Shannon entropy (nats) of a list of positive scores.
#[pyfunction]
fn entropy(scores: Vec<f64>) -> PyResult<f64> {
    geonorm::roi::entropy(&scores).map_err(to_py_err)
}

/// 1, 0.5 or 0 for a predicted path against a gold path.
#[pyfunction]
fn hit_value(gold: [Option<String>; 3], predicted: [Option<String>; 3]) -> f64 {
    run_hit_value(&path_of(gold), &path_of(predicted))
}

/// Variant F1 over `(doc_id, [l1, l2, l3])` pairs.
#[pyfunction]
fn evaluate(
    py: Python<'_>,
    predictions: Vec<(String, [Option<String>; 3])>,
    gold: Vec<(String, [Option<String>; 3])>,
) -> PyResult<Py<PyAny>> {
    let conv = |rows: Vec<(String, [Option<String>; 3])>| -> Vec<(String, AdPath)> {
        rows.into_iter().map(|(id, p)| (id, path_of(p))).collect()
    };
    let mut report = run_evaluate(&conv(predictions), &conv(gold)).map_err(to_py_err)?;
    report.records.clear();
    to_py(py, &report)
}

#[pymodule]
fn geonorm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Gazetteer>()?;
    m.add_class::<Engine>()?;
    m.add_function(wrap_pyfunction!(extract_sequences, m)?)?;
    m.add_function(wrap_pyfunction!(train_embeddings, m)?)?;
    m.add_function(wrap_pyfunction!(build_roi, m)?)?;
    m.add_function(wrap_pyfunction!(entropy, m)?)?;
    m.add_function(wrap_pyfunction!(hit_value, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
