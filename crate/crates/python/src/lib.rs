//! Python bindings for the budgeted kernel SVM: datasets, models, lookup
//! grids, training, and the merge solver, as a `bsvm` extension module.

use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use bsvm_core::{
    evaluate as core_evaluate, generate_synthetic, load_libsvm, solve_merge_gss, train,
    BudgetModel, Hyperparams, LookupGrid, MergeInstance, SparseVector, TrainStats,
};

fn to_py_err(err: bsvm_core::Error) -> PyErr {
    PyValueError::new_err(err.to_string())
}

fn sparse_from_pairs(pairs: Vec<(usize, f64)>) -> SparseVector {
    SparseVector::from_pairs(pairs)
}

/// A labeled dataset in sparse feature form.
#[pyclass(name = "Dataset")]
struct PyDataset {
    inner: bsvm_core::Dataset,
}

#[pymethods]
impl PyDataset {
    /// Loads a LIBSVM-format text file.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyDataset {
            inner: load_libsvm(&path).map_err(to_py_err)?,
        })
    }

    /// Draws a reproducible two-Gaussian sample, labels alternating.
    #[staticmethod]
    #[pyo3(signature = (n, dim=2, separation=4.0, noise=1.0, seed=0))]
    fn synthetic(n: usize, dim: usize, separation: f64, noise: f64, seed: u64) -> PyResult<Self> {
        Ok(PyDataset {
            inner: generate_synthetic(n, dim, separation, noise, seed).map_err(to_py_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save_libsvm(&path).map_err(to_py_err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn dim(&self) -> usize {
        self.inner.dim
    }

    /// Label of example `i`, always +1.0 or -1.0.
    fn label(&self, i: usize) -> PyResult<f64> {
        self.example(i).map(|e| e.label)
    }

    /// Features of example `i` as `[(index, value), ...]`.
    fn features(&self, i: usize) -> PyResult<Vec<(usize, f64)>> {
        self.example(i).map(|e| e.features.iter().collect())
    }
}

impl PyDataset {
    fn example(&self, i: usize) -> PyResult<&bsvm_core::Example> {
        self.inner
            .examples
            .get(i)
            .ok_or_else(|| PyValueError::new_err(format!("example index {i} out of range")))
    }
}

/// A trained budgeted kernel expansion.
#[pyclass(name = "Model")]
struct PyModel {
    inner: BudgetModel,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyModel {
            inner: BudgetModel::load(&path).map_err(to_py_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(to_py_err)
    }

    /// Raw decision value for sparse features `[(index, value), ...]`.
    fn decision_function(&self, features: Vec<(usize, f64)>) -> f64 {
        self.inner.decision_function(&sparse_from_pairs(features))
    }

    /// Predicted label, +1.0 or -1.0.
    fn predict(&self, features: Vec<(usize, f64)>) -> f64 {
        self.inner.predict(&sparse_from_pairs(features))
    }

    /// Number of support vectors currently stored.
    fn __len__(&self) -> usize {
        self.inner.entries.len()
    }

    fn gamma(&self) -> f64 {
        self.inner.gamma()
    }

    fn bias(&self) -> f64 {
        self.inner.bias
    }

    /// Squared RKHS norm of the expansion.
    fn norm_sq(&self) -> f64 {
        self.inner.norm_sq()
    }
}

/// A precomputed merge table over (m, kappa) with bilinear interpolation.
#[pyclass(name = "Grid")]
struct PyGrid {
    inner: LookupGrid,
}

#[pymethods]
impl PyGrid {
    #[staticmethod]
    #[pyo3(signature = (size=400, eps=1e-10))]
    fn build(size: usize, eps: f64) -> PyResult<Self> {
        if size < 2 {
            return Err(PyValueError::new_err("grid size must be at least 2"));
        }
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(PyValueError::new_err("eps must be positive and finite"));
        }
        Ok(PyGrid {
            inner: LookupGrid::build(size, eps),
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyGrid {
            inner: LookupGrid::load(&path).map_err(to_py_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(to_py_err)
    }

    fn size(&self) -> usize {
        self.inner.size()
    }

    /// Interpolated merge location h for weights ratio `m` and kernel
    /// value `kappa`.
    fn lookup_h(&self, m: f64, kappa: f64) -> PyResult<f64> {
        Ok(self.inner.interp_h(instance(m, kappa)?))
    }

    /// Interpolated normalized weight degradation.
    fn lookup_wd(&self, m: f64, kappa: f64) -> PyResult<f64> {
        Ok(self.inner.interp_wd(instance(m, kappa)?))
    }
}

fn instance(m: f64, kappa: f64) -> PyResult<MergeInstance> {
    if !(0.0..=1.0).contains(&m) || !(kappa > 0.0 && kappa <= 1.0) {
        return Err(PyValueError::new_err(
            "m must lie in [0, 1] and kappa in (0, 1]",
        ));
    }
    Ok(MergeInstance::new(m, kappa))
}

fn stats_dict<'py>(py: Python<'py>, stats: &TrainStats) -> PyResult<Bound<'py, PyDict>> {
    let dict = PyDict::new(py);
    dict.set_item("sgd_iterations", stats.sgd_iterations)?;
    dict.set_item("margin_violations", stats.margin_violations)?;
    dict.set_item("merge_events", stats.merge_events)?;
    dict.set_item("removal_fallbacks", stats.removal_fallbacks)?;
    dict.set_item("merging_frequency", stats.merging_frequency())?;
    dict.set_item("time_total", stats.time_total)?;
    dict.set_item("time_merge_total", stats.time_merge_total)?;
    dict.set_item("time_section_a", stats.time_section_a)?;
    dict.set_item("time_section_b", stats.time_section_b)?;
    Ok(dict)
}

/// Trains a model, returning `(Model, stats_dict)`.
#[pyfunction(name = "train")]
#[pyo3(signature = (
    dataset,
    c=1.0,
    gamma=1.0,
    budget=100,
    epochs=20,
    solver="gss",
    gss_eps=0.01,
    precise_eps=1e-10,
    grid_size=400,
    bias=false,
    seed=0,
))]
#[allow(clippy::too_many_arguments)]
fn py_train<'py>(
    py: Python<'py>,
    dataset: &PyDataset,
    c: f64,
    gamma: f64,
    budget: usize,
    epochs: usize,
    solver: &str,
    gss_eps: f64,
    precise_eps: f64,
    grid_size: usize,
    bias: bool,
    seed: u64,
) -> PyResult<(PyModel, Bound<'py, PyDict>)> {
    let hp = Hyperparams {
        c,
        gamma,
        budget,
        epochs,
        solver_kind: solver.parse().map_err(to_py_err)?,
        gss_eps,
        precise_eps,
        grid_size,
        use_bias: bias,
        seed,
    };
    let (model, stats) = train(&dataset.inner, &hp).map_err(to_py_err)?;
    Ok((PyModel { inner: model }, stats_dict(py, &stats)?))
}

/// Fraction of examples the model labels correctly.
#[pyfunction(name = "evaluate")]
fn py_evaluate(model: &PyModel, dataset: &PyDataset) -> PyResult<f64> {
    core_evaluate(&model.inner, &dataset.inner).map_err(to_py_err)
}

/// Golden-section merge solve; returns `(h, wd_normalized)`.
#[pyfunction]
#[pyo3(signature = (m, kappa, eps=1e-10))]
fn gss_solve(m: f64, kappa: f64, eps: f64) -> PyResult<(f64, f64)> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(PyValueError::new_err("eps must be positive and finite"));
    }
    let sol = solve_merge_gss(instance(m, kappa)?, eps);
    Ok((sol.h, sol.wd_norm))
}

#[pymodule]
fn bsvm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyGrid>()?;
    m.add_function(wrap_pyfunction!(py_train, m)?)?;
    m.add_function(wrap_pyfunction!(py_evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(gss_solve, m)?)?;
    Ok(())
}
