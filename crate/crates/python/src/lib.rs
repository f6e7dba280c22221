//! Python bindings: clustering, statistics, sampling, persona labelling and
//! the full pipeline.

use std::path::PathBuf;

use persona_miner::classify::{self, ActivityRules, KeywordTable};
use persona_miner::cluster::{self, ClusterLabels};
use persona_miner::ingest::RepoSlug;
use persona_miner::metrics;
use persona_miner::personas;
use persona_miner::sampling;
use persona_miner::simgen;
use persona_miner::stats;
use persona_miner_cli::{Overrides, RunConfig};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn rcs6(v: &[f64]) -> PyResult<[f64; 6]> {
    v.try_into().map_err(|_| value_err(format!("expected 6 RC values, got {}", v.len())))
}

/// Ward merges as `(a, b, height, size)` tuples; leaves are `0..n`, the
/// node made by merge `i` is `n + i`.
#[pyfunction]
fn agglomerate(rows: Vec<Vec<f64>>) -> PyResult<Vec<(usize, usize, f64, usize)>> {
    let d = cluster::agglomerate(&rows).map_err(value_err)?;
    Ok(d.merges.iter().map(|m| (m.a, m.b, m.height, m.size)).collect())
}

/// Cluster labels for a `k`-way cut of the Ward tree of `rows`.
#[pyfunction]
fn cut(rows: Vec<Vec<f64>>, k: usize) -> PyResult<Vec<usize>> {
    let d = cluster::agglomerate(&rows).map_err(value_err)?;
    Ok(cluster::cut(&d, k).map_err(value_err)?.labels)
}

#[pyfunction]
fn ch_index(rows: Vec<Vec<f64>>, labels: Vec<usize>) -> PyResult<f64> {
    let labels = ClusterLabels::new(labels).map_err(value_err)?;
    cluster::ch_index(&rows, &labels).map_err(value_err)
}

/// Best k by CH and the score of every k tried.
#[pyfunction]
#[pyo3(signature = (rows, k_min = 2, k_max = 10))]
fn select_k(rows: Vec<Vec<f64>>, k_min: usize, k_max: usize) -> PyResult<(usize, Vec<(usize, f64)>)> {
    let (sel, _) = cluster::select_k(&rows, k_min, k_max).map_err(value_err)?;
    Ok((sel.k_best, sel.scores.iter().map(|s| (s.k, s.ch)).collect()))
}

#[pyclass(frozen, get_all, skip_from_py_object)]
struct Pca {
    components: Vec<Vec<f64>>,
    explained_variance: Vec<f64>,
    explained_variance_ratio: Vec<f64>,
    mean: Vec<f64>,
}

#[pyfunction]
#[pyo3(signature = (rows, n_components = 3))]
fn pca(rows: Vec<Vec<f64>>, n_components: usize) -> PyResult<Pca> {
    let p = stats::pca(&rows, n_components).map_err(value_err)?;
    Ok(Pca {
        components: p.components,
        explained_variance: p.explained_variance,
        explained_variance_ratio: p.explained_variance_ratio,
        mean: p.mean,
    })
}

#[pyclass(frozen, get_all, skip_from_py_object)]
struct Anova {
    f_statistic: f64,
    p_value: f64,
    df_between: usize,
    df_within: usize,
}

#[pyfunction]
fn one_way_anova(groups: Vec<Vec<f64>>) -> PyResult<Anova> {
    let r = stats::one_way_anova(&groups).map_err(value_err)?;
    Ok(Anova { f_statistic: r.f_statistic, p_value: r.p_value, df_between: r.df_between, df_within: r.df_within })
}

/// `(group_a, group_b, mean_b - mean_a, q, adjusted p, reject)` per pair.
#[pyfunction]
#[pyo3(signature = (groups, alpha = 0.05))]
fn tukey_hsd(groups: Vec<Vec<f64>>, alpha: f64) -> PyResult<Vec<(usize, usize, f64, f64, f64, bool)>> {
    let r = stats::tukey_hsd(&groups, alpha).map_err(value_err)?;
    Ok(r.pairs.iter().map(|p| (p.group_a, p.group_b, p.mean_diff, p.q_statistic, p.p_adjusted, p.reject)).collect())
}

/// P(Q <= q) for the studentized range with `k` groups and `df` error degrees of freedom.
#[pyfunction]
fn ptukey(q: f64, k: usize, df: f64) -> f64 {
    stats::ptukey(q, k, df)
}

#[pyfunction]
fn sample_size(n: usize, fraction: f64) -> usize {
    sampling::sample_size(n, fraction)
}

/// Seeded sample of `owner/name` slugs, returned sorted.
#[pyfunction]
fn subsample(slugs: Vec<String>, fraction: f64, seed: u64) -> PyResult<Vec<String>> {
    let parsed = slugs.iter().map(|s| s.parse::<RepoSlug>()).collect::<Result<Vec<_>, _>>().map_err(value_err)?;
    let out = sampling::subsample(&parsed, fraction, seed).map_err(value_err)?;
    Ok(out.iter().map(|s| s.to_string()).collect())
}

#[pyfunction]
fn compute_rc(individual_count: u64, repo_total: u64) -> PyResult<f64> {
    metrics::compute_rc(individual_count, repo_total).map_err(value_err)
}

#[pyfunction]
fn compute_mrc(rcs: Vec<f64>) -> PyResult<f64> {
    metrics::compute_mrc(&rcs).map_err(value_err)
}

#[pyclass(skip_from_py_object)]
struct PersonaTable {
    inner: personas::PersonaTable,
}

#[pymethods]
impl PersonaTable {
    /// The bundled reference profiles.
    #[new]
    fn new() -> Self {
        PersonaTable { inner: personas::PersonaTable::default() }
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(PersonaTable { inner: personas::PersonaTable::from_toml(text).map_err(value_err)? })
    }

    fn names(&self) -> Vec<String> {
        self.inner.profiles().iter().map(|p| p.name.clone()).collect()
    }

    fn centroid(&self, name: &str) -> PyResult<Vec<f64>> {
        self.inner.get(name).map(|p| p.centroid.to_vec()).ok_or_else(|| value_err(format!("unknown persona {name:?}")))
    }

    /// Nearest profile name and its Euclidean distance.
    fn nearest(&self, rcs: Vec<f64>) -> PyResult<(String, f64)> {
        let (p, d) = self.inner.nearest(&rcs6(&rcs)?);
        Ok((p.name.clone(), d))
    }

    /// Nearest profile, or the unmatched label beyond `threshold`.
    #[pyo3(signature = (centroid, threshold = personas::DEFAULT_MATCH_THRESHOLD))]
    fn label(&self, centroid: Vec<f64>, threshold: f64) -> PyResult<(String, f64)> {
        let (name, d) = personas::label_subcluster(&rcs6(&centroid)?, &self.inner);
        Ok((if d > threshold { personas::UNMATCHED_PERSONA.to_string() } else { name }, d))
    }

    fn __len__(&self) -> usize {
        self.inner.profiles().len()
    }
}

/// Synthetic six-RC rows around every reference persona and their labels.
#[pyfunction]
#[pyo3(signature = (count = 200, noise_sd = 2.0, seed = 0))]
fn simulate(count: usize, noise_sd: f64, seed: u64) -> PyResult<(Vec<Vec<f64>>, Vec<String>)> {
    let specs = simgen::specs_from_table(&personas::PersonaTable::default(), count, noise_sd);
    let sim = simgen::generate(&specs, seed).map_err(value_err)?;
    Ok((sim.vectors.iter().map(|v| v.rcs().to_vec()).collect(), sim.labels))
}

/// Development type of a commit message under the bundled keyword table.
#[pyfunction]
fn classify_message(message: &str) -> &'static str {
    classify::classify_message(message, &KeywordTable::default()).as_str()
}

/// Activity type of a changed-file list under the bundled rules.
#[pyfunction]
fn classify_files(paths: Vec<String>) -> String {
    classify::classify_files(&paths, &ActivityRules::default()).0
}

/// Runs every stage for a TOML config and returns the manifest as JSON text.
#[pyfunction]
#[pyo3(signature = (config, output_dir = None, seed = None))]
fn run_pipeline(py: Python<'_>, config: PathBuf, output_dir: Option<PathBuf>, seed: Option<u64>) -> PyResult<String> {
    let mut cfg = RunConfig::load(&config).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    cfg.apply(&Overrides { seed, output_dir, ..Overrides::default() });
    let manifest = py
        .detach(|| persona_miner_cli::run_pipeline(&cfg))
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    serde_json::to_string(&manifest).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pymodule]
pub fn persona_miner_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Pca>()?;
    m.add_class::<Anova>()?;
    m.add_class::<PersonaTable>()?;
    m.add_function(wrap_pyfunction!(agglomerate, m)?)?;
    m.add_function(wrap_pyfunction!(cut, m)?)?;
    m.add_function(wrap_pyfunction!(ch_index, m)?)?;
    m.add_function(wrap_pyfunction!(select_k, m)?)?;
    m.add_function(wrap_pyfunction!(pca, m)?)?;
    m.add_function(wrap_pyfunction!(one_way_anova, m)?)?;
    m.add_function(wrap_pyfunction!(tukey_hsd, m)?)?;
    m.add_function(wrap_pyfunction!(ptukey, m)?)?;
    m.add_function(wrap_pyfunction!(sample_size, m)?)?;
    m.add_function(wrap_pyfunction!(subsample, m)?)?;
    m.add_function(wrap_pyfunction!(compute_rc, m)?)?;
    m.add_function(wrap_pyfunction!(compute_mrc, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(classify_message, m)?)?;
    m.add_function(wrap_pyfunction!(classify_files, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    m.add("UNMATCHED_PERSONA", personas::UNMATCHED_PERSONA)?;
    Ok(())
}
