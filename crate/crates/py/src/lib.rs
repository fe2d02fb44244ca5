//! Python bindings: thin wrappers around the staged-construction engines.
//!
//! Conventions at the boundary: finite structures and quantifier-free types
//! travel as JSON strings in the crate's canonical format, exact rationals
//! as `"p/q"` strings, reports as CSV text with the standard header, and
//! every library error surfaces as `ValueError`.

use std::collections::BTreeMap;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use invforge_core::classes::metric::{metric_to_structure, rat, RationalMetricSpace};
use invforge_core::classes::AmalgamationClass;
use invforge_core::limit::{
    address_type, eta_report, exchangeability_report, materialize_stage, sample_invariant,
    verify_suite, LimitEngine, DEFAULT_STAGE_CAP,
};
use invforge_core::qftype::{qf_type_of, QfType};
use invforge_core::schedule::CyclicSchedule;
use invforge_core::signature::Signature;
use invforge_core::structure::{complete_graph, FinStructure};
use invforge_core::toy::reports::{delta_report, erdos_renyi, gamma_report, very_comb_lemma};
use invforge_core::toy::{lazy::LazyToy, ToyConfig, ToyRun};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_class(name: &str) -> PyResult<AmalgamationClass> {
    AmalgamationClass::from_name(name).map_err(err)
}

fn parse_structure(json: &str) -> PyResult<FinStructure> {
    let value: serde_json::Value = serde_json::from_str(json).map_err(err)?;
    FinStructure::from_json(&value).map_err(err)
}

/// The default seed structure of a class: a single edge for graph-like
/// classes, two points at distance one for the metric class.
fn default_seed(class: &AmalgamationClass) -> PyResult<FinStructure> {
    match class.thresholds() {
        Some(t) => {
            let mut d = BTreeMap::new();
            d.insert((0, 1), rat(1, 1));
            let space = RationalMetricSpace::new(2, d).map_err(err)?;
            Ok(metric_to_structure(&space, t))
        }
        None => Ok(complete_graph(2)),
    }
}

/// Names accepted by every `class_name` argument.
#[pyfunction]
fn class_names() -> Vec<String> {
    [
        "graphs",
        "triangle-free",
        "kaleidoscope:graphs",
        "kaleidoscope:triangle-free",
        "metric",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

/// Smallest box count with collision probability below `2^-n`.
#[pyfunction]
fn lambda_min(n: usize) -> PyResult<u64> {
    if n < 2 {
        return Err(err("lambda_min is defined for n >= 2"));
    }
    Ok(invforge_core::limit::lambda_min(n))
}

/// The complete graph on `n` vertices, as canonical structure JSON.
#[pyfunction]
fn complete_graph_json(n: usize) -> String {
    complete_graph(n).to_json().to_string()
}

/// A seeded random graph with edge probability `num/den`.
#[pyfunction]
fn erdos_renyi_json(k: usize, num: i64, den: i64, seed: u64) -> PyResult<String> {
    let g = erdos_renyi(k, &rat(num, den), seed).map_err(err)?;
    Ok(g.to_json().to_string())
}

/// Class membership of a structure given as JSON.
#[pyfunction]
fn contains(class_name: &str, structure_json: &str) -> PyResult<bool> {
    let class = parse_class(class_name)?;
    let s = parse_structure(structure_json)?;
    class.contains(&s).map_err(err)
}

/// Exact full homomorphism density `t(F, G)` as a rational string.
#[pyfunction]
fn hom_density(f_json: &str, g_json: &str) -> PyResult<String> {
    let f = parse_structure(f_json)?;
    let g = parse_structure(g_json)?;
    Ok(invforge_core::density::full_hom_density(&f, &g)
        .map_err(err)?
        .to_string())
}

/// Monte-Carlo density estimate: returns `(p_hat, sigma)`.
#[pyfunction]
fn mc_hom_density(f_json: &str, g_json: &str, trials: u64, seed: u64) -> PyResult<(f64, f64)> {
    let f = parse_structure(f_json)?;
    let g = parse_structure(g_json)?;
    let est = invforge_core::density::mc_full_hom_density(&f, &g, trials, seed).map_err(err)?;
    Ok((est.p_hat, est.sigma))
}

/// The quantifier-free type of labelled elements, as JSON.
#[pyfunction]
fn qf_type_json(structure_json: &str, labels: Vec<String>) -> PyResult<String> {
    let s = parse_structure(structure_json)?;
    Ok(qf_type_of(&s, &labels).map_err(err)?.to_json().to_string())
}

/// Split a non-redundant type in a class with a declared splitting order.
/// Returns `(relation_count, split_type_json)`.
#[pyfunction]
fn split_type(class_name: &str, type_json: &str) -> PyResult<(usize, String)> {
    let class = parse_class(class_name)?;
    let value: serde_json::Value = serde_json::from_str(type_json).map_err(err)?;
    let q = QfType::from_json(&value).map_err(err)?;
    let (layers, out) = class.split_type(&q).map_err(err)?;
    Ok((layers, out.to_json().to_string()))
}

/// Tail-product inequality check: returns `(k, product, rhs, pass)`.
#[pyfunction]
fn very_comb_lemma_check(c: u32) -> PyResult<(u32, f64, f64, bool)> {
    if c == 0 {
        return Err(err("constant must be positive"));
    }
    let chk = very_comb_lemma(c);
    Ok((chk.k, chk.product, chk.rhs, chk.pass))
}

/// Type-frequency drift report for the plain-graph staged construction,
/// sampled lazily up to `stages`, as CSV text.
#[pyfunction]
fn toy_delta_csv(stages: usize, max_arity: usize, trials: u64, seed: u64) -> PyResult<String> {
    let lazy =
        LazyToy::new(&complete_graph(2), CyclicSchedule::default_catalog(), stages).map_err(err)?;
    Ok(delta_report(&lazy, max_arity, stages, trials, seed, "py").to_csv())
}

/// Coverage report for the plain-graph staged construction, as CSV text.
#[pyfunction]
fn toy_gamma_csv(stages: usize, j_max: usize, trials: u64, seed: u64) -> PyResult<String> {
    let schedule = CyclicSchedule::default_catalog();
    let lazy = LazyToy::new(&complete_graph(2), schedule.clone(), stages).map_err(err)?;
    Ok(gamma_report(&lazy, &schedule, &[stages], j_max, trials, seed, "py").to_csv())
}

/// A materialized staged run over one amalgamation class.
#[pyclass(name = "ToyRun")]
struct PyToyRun {
    inner: ToyRun,
    class: AmalgamationClass,
}

#[pymethods]
impl PyToyRun {
    /// Run the staged construction from the class's default seed structure.
    #[new]
    #[pyo3(signature = (class_name, stages, element_cap=None))]
    fn new(class_name: &str, stages: usize, element_cap: Option<usize>) -> PyResult<Self> {
        let class = parse_class(class_name)?;
        let mut config = ToyConfig::new(class.clone(), CyclicSchedule::default_catalog());
        if let Some(cap) = element_cap {
            config.element_cap = cap;
        }
        let mut run = ToyRun::new(default_seed(&class)?, config).map_err(err)?;
        run.run_to(stages).map_err(err)?;
        Ok(PyToyRun { inner: run, class })
    }

    fn current_stage(&self) -> usize {
        self.inner.current_stage()
    }

    /// Continue the run to a later stage.
    fn run_to(&mut self, n: usize) -> PyResult<()> {
        self.inner.run_to(n).map_err(err)
    }

    fn check_stage(&self, n: usize) -> PyResult<()> {
        if n > self.inner.current_stage() {
            return Err(err(format!(
                "stage {n} not built, run stops at {}",
                self.inner.current_stage()
            )));
        }
        Ok(())
    }

    /// Number of elements at stage `n`.
    fn size(&self, n: usize) -> PyResult<usize> {
        self.check_stage(n)?;
        Ok(self.inner.stage(n).structure.size())
    }

    /// The stage-`n` structure as canonical JSON.
    fn structure_json(&self, n: usize) -> PyResult<String> {
        self.check_stage(n)?;
        Ok(self.inner.stage(n).structure.to_json().to_string())
    }

    /// Does the stage-`n` structure still belong to the class?
    fn in_class(&self, n: usize) -> PyResult<bool> {
        self.check_stage(n)?;
        self.class.contains(&self.inner.stage(n).structure).map_err(err)
    }
}

/// A staged inverse-limit run: exact bookkeeping plus samplers and reports.
#[pyclass(name = "LimitRun")]
struct PyLimitRun {
    inner: LimitEngine,
}

#[pymethods]
impl PyLimitRun {
    #[new]
    fn new(class_name: &str, stages: usize) -> PyResult<Self> {
        if stages < 2 {
            return Err(err("a limit run needs at least two stages"));
        }
        let class = parse_class(class_name)?;
        let engine = LimitEngine::build(class, CyclicSchedule::default_catalog(), stages)
            .map_err(err)?;
        Ok(PyLimitRun { inner: engine })
    }

    fn class_name(&self) -> String {
        self.inner.class.name()
    }

    fn current_stage(&self) -> usize {
        self.inner.current_stage()
    }

    /// Continue the run to a later stage.
    fn advance_to(&mut self, n: usize) -> PyResult<()> {
        self.inner.run_to(n).map_err(err)
    }

    fn check_stage(&self, n: usize) -> PyResult<()> {
        if n > self.inner.current_stage() {
            return Err(err(format!(
                "stage {n} not built, run stops at {}",
                self.inner.current_stage()
            )));
        }
        Ok(())
    }

    /// Duplication multiplicity at stage `n`.
    fn lambda(&self, n: usize) -> PyResult<u64> {
        self.check_stage(n)?;
        Ok(self.inner.stage(n).lambda)
    }

    /// Largest single-address mass at stage `n`, as an exact rational string.
    fn gamma(&self, n: usize) -> PyResult<String> {
        self.check_stage(n)?;
        Ok(self.inner.stage(n).gamma.to_string())
    }

    /// Total injected mass through stage `n`, as an exact rational string.
    fn total_mass(&self, n: usize) -> PyResult<String> {
        self.check_stage(n)?;
        Ok(self.inner.stage(n).total_mass.to_string())
    }

    /// Number of boundary addresses at stage `n` (decimal string).
    fn boundary_count(&self, n: usize) -> PyResult<String> {
        self.check_stage(n)?;
        Ok(self.inner.stage(n).boundary_count.to_string())
    }

    /// Language layer count at stage `n` (decimal string).
    fn alpha(&self, n: usize) -> PyResult<String> {
        self.check_stage(n)?;
        Ok(self.inner.stage(n).alpha.to_string())
    }

    /// Replayable generation log, one JSON line per event.
    fn gen_log(&self) -> Vec<String> {
        self.inner.gen_log().to_vec()
    }

    /// Exact bookkeeping verification; returns `(all_pass, csv)`.
    fn verify_csv(&self, seed: u64) -> PyResult<(bool, String)> {
        let report = verify_suite(&self.inner, "py", seed).map_err(err)?;
        Ok((report.all_pass(), report.to_csv()))
    }

    /// Target-type decay report at depths `3..=depth`, as CSV text.
    fn eta_csv(&self, depth: usize, trials: u64, seed: u64) -> PyResult<String> {
        Ok(eta_report(&self.inner, depth, trials, "py", seed)
            .map_err(err)?
            .to_csv())
    }

    /// Positional pair-type comparison at `depth` with `k` points, as CSV.
    fn exchangeability_csv(
        &self,
        depth: usize,
        k: usize,
        trials: u64,
        seed: u64,
    ) -> PyResult<String> {
        Ok(exchangeability_report(&self.inner, depth, k, trials, "py", seed)
            .map_err(err)?
            .to_csv())
    }

    /// Sample `k` mass-weighted addresses at stage `n` and pull back the
    /// boundary relations: `{"structure": ..., "addresses": [...],
    /// "collision": bool}` as JSON.
    fn sample_json(&self, n: usize, k: usize, seed: u64) -> PyResult<String> {
        let sampled = sample_invariant(&self.inner, n, k, seed).map_err(err)?;
        let addresses: Vec<String> = sampled.addresses.iter().map(|a| a.to_string()).collect();
        Ok(serde_json::json!({
            "structure": sampled.structure.to_json(),
            "addresses": addresses,
            "collision": sampled.collision_flag,
        })
        .to_string())
    }

    /// Enumerate the whole stage-`n` boundary (refusing above `cap`
    /// elements): `{"structure": ..., "addresses": [...]}` as JSON.
    #[pyo3(signature = (n, cap=None))]
    fn materialize_json(&self, n: usize, cap: Option<usize>) -> PyResult<String> {
        let mat =
            materialize_stage(&self.inner, n, cap.unwrap_or(DEFAULT_STAGE_CAP)).map_err(err)?;
        let addresses: Vec<String> = mat.addresses.iter().map(|a| a.to_string()).collect();
        Ok(serde_json::json!({
            "structure": mat.structure.to_json(),
            "addresses": addresses,
        })
        .to_string())
    }

    /// The exact quantifier-free type of distinct boundary addresses
    /// (written as slash-separated words), as JSON.
    fn address_type_json(&self, addresses: Vec<String>, n: usize) -> PyResult<String> {
        let addrs: Vec<invforge_core::address::Address> = addresses
            .iter()
            .map(|s| s.parse().map_err(err))
            .collect::<PyResult<_>>()?;
        Ok(address_type(&self.inner, &addrs, n)
            .map_err(err)?
            .to_json()
            .to_string())
    }
}

/// Staged constructions of exchangeable measures: Python surface.
#[pymodule]
fn invforge_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyToyRun>()?;
    m.add_class::<PyLimitRun>()?;
    m.add_function(wrap_pyfunction!(class_names, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_min, m)?)?;
    m.add_function(wrap_pyfunction!(complete_graph_json, m)?)?;
    m.add_function(wrap_pyfunction!(erdos_renyi_json, m)?)?;
    m.add_function(wrap_pyfunction!(contains, m)?)?;
    m.add_function(wrap_pyfunction!(hom_density, m)?)?;
    m.add_function(wrap_pyfunction!(mc_hom_density, m)?)?;
    m.add_function(wrap_pyfunction!(qf_type_json, m)?)?;
    m.add_function(wrap_pyfunction!(split_type, m)?)?;
    m.add_function(wrap_pyfunction!(very_comb_lemma_check, m)?)?;
    m.add_function(wrap_pyfunction!(toy_delta_csv, m)?)?;
    m.add_function(wrap_pyfunction!(toy_gamma_csv, m)?)?;
    Ok(())
}
