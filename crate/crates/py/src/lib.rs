use std::path::PathBuf;

use ::l1tensor as core;
use core::format::{BasisFile, Encoding};
use core::pipeline::{self, Config};
use core::{distortion, dvoretzky, randbits, tensor, Error};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict, PyList};
use pyo3::IntoPyObjectExt;
use serde::Serialize;
use serde_json::Value;

create_exception!(
    l1tensor,
    BudgetExhaustedError,
    PyException,
    "The seed holds fewer bits than a stage needs."
);
create_exception!(
    l1tensor,
    InfeasibleError,
    PyException,
    "No parameter schedule satisfies the constraints."
);

fn to_py_err(e: Error) -> PyErr {
    match &e {
        Error::Domain(_)
        | Error::Shape { .. }
        | Error::NotOrthonormal { .. }
        | Error::Format(_) => PyValueError::new_err(e.to_string()),
        Error::BudgetExhausted { .. } => BudgetExhaustedError::new_err(e.to_string()),
        Error::Infeasible(_) => InfeasibleError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

trait IntoPy<T> {
    fn py_err(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for core::Result<T> {
    fn py_err(self) -> PyResult<T> {
        self.map_err(to_py_err)
    }
}

fn json_to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_bound_py_any(py)?,
        Value::Number(n) => match (n.as_u64(), n.as_i64()) {
            (Some(u), _) => u.into_bound_py_any(py)?,
            (None, Some(i)) => i.into_bound_py_any(py)?,
            _ => n.as_f64().unwrap_or(f64::NAN).into_bound_py_any(py)?,
        },
        Value::String(s) => s.into_bound_py_any(py)?,
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_any()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, item) in map {
                dict.set_item(k, json_to_py(py, item)?)?;
            }
            dict.into_any()
        }
    })
}

fn to_dict<'py>(py: Python<'py>, v: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let value = serde_json::to_value(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    json_to_py(py, &value)
}

fn shape(n: usize, b: usize) -> PyResult<core::BlockShape> {
    core::BlockShape::new(n, b).py_err()
}

/// Orthonormal basis of a subspace of the block space l1^n(l2^B).
#[pyclass(name = "Basis", module = "l1tensor", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyBasis {
    inner: core::SubspaceBasis,
}

#[pymethods]
impl PyBasis {
    /// Columns must already be orthonormal.
    #[new]
    #[pyo3(signature = (columns, n, B = 1))]
    #[allow(non_snake_case)]
    fn new(columns: Vec<Vec<f64>>, n: usize, B: usize) -> PyResult<Self> {
        let inner = core::SubspaceBasis::from_columns(shape(n, B)?, &columns).py_err()?;
        Ok(Self { inner })
    }

    /// Orthonormalizes arbitrary independent columns.
    #[staticmethod]
    #[pyo3(signature = (columns, n, B = 1))]
    #[allow(non_snake_case)]
    fn orthonormalized(columns: Vec<Vec<f64>>, n: usize, B: usize) -> PyResult<Self> {
        let s = shape(n, B)?;
        let m = columns.len();
        let q: Vec<f64> = columns.into_iter().flatten().collect();
        if q.len() != s.ambient_dim() * m {
            return Err(PyValueError::new_err("every column needs n * B entries"));
        }
        let inner = core::SubspaceBasis::orthonormalized(s, m, q).py_err()?;
        Ok(Self { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (n, B = 1))]
    #[allow(non_snake_case)]
    fn identity(n: usize, B: usize) -> PyResult<Self> {
        Ok(Self {
            inner: core::SubspaceBasis::identity(shape(n, B)?),
        })
    }

    /// `(n, B)`
    #[getter]
    fn shape(&self) -> (usize, usize) {
        let s = self.inner.shape();
        (s.blocks(), s.width())
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn rows(&self) -> usize {
        self.inner.rows()
    }

    fn columns(&self) -> Vec<Vec<f64>> {
        self.inner.columns().map(<[f64]>::to_vec).collect()
    }

    fn apply(&self, coeffs: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.apply(&coeffs).py_err()
    }

    fn residual(&self) -> f64 {
        self.inner.residual()
    }

    #[pyo3(signature = (other, cap = tensor::DEFAULT_ELEMENT_CAP))]
    fn tensor(&self, other: &PyBasis, cap: usize) -> PyResult<Self> {
        let inner = tensor::tensor_bases(&self.inner, &other.inner, cap).py_err()?;
        Ok(Self { inner })
    }

    #[pyo3(signature = (k, cap = tensor::DEFAULT_ELEMENT_CAP))]
    fn power(&self, k: usize, cap: usize) -> PyResult<Self> {
        let inner = tensor::tensor_power(&self.inner, k, cap).py_err()?;
        Ok(Self { inner })
    }

    #[pyo3(signature = (d, cap = tensor::DEFAULT_ELEMENT_CAP))]
    fn extend_with_full_block(&self, d: usize, cap: usize) -> PyResult<Self> {
        let inner = tensor::extend_with_full_block(&self.inner, d, cap).py_err()?;
        Ok(Self { inner })
    }

    fn zero_padded(&self, total: usize) -> PyResult<Self> {
        let inner = self.inner.zero_padded(total).py_err()?;
        Ok(Self { inner })
    }

    #[pyo3(signature = (count = 10_000, key = 0))]
    fn sample_ratios<'py>(
        &self,
        py: Python<'py>,
        count: usize,
        key: u64,
    ) -> PyResult<Bound<'py, PyAny>> {
        to_dict(
            py,
            &distortion::sample_ratios(&self.inner, count, key).py_err()?,
        )
    }

    #[pyo3(signature = (restarts = 8, iters = 200, key = 0))]
    fn minimize_ratio<'py>(
        &self,
        py: Python<'py>,
        restarts: usize,
        iters: usize,
        key: u64,
    ) -> PyResult<Bound<'py, PyAny>> {
        to_dict(
            py,
            &distortion::minimize_ratio(&self.inner, restarts, iters, key).py_err()?,
        )
    }

    fn grid_oracle<'py>(&self, py: Python<'py>, delta: f64) -> PyResult<Bound<'py, PyAny>> {
        let inner = self.inner.clone();
        let est = py
            .detach(move || distortion::grid_oracle(&inner, delta))
            .py_err()?;
        to_dict(py, &est)
    }

    fn __repr__(&self) -> String {
        let (n, b) = self.shape();
        format!("Basis(n={n}, B={b}, dim={})", self.inner.dim())
    }
}

/// Finite bit string consumed front to back, most significant bit first.
#[pyclass(name = "BitStream", module = "l1tensor")]
struct PyBitStream {
    inner: randbits::BitStream,
}

#[pymethods]
impl PyBitStream {
    #[new]
    #[pyo3(signature = (data, bits = None))]
    fn new(data: &[u8], bits: Option<u64>) -> PyResult<Self> {
        let inner = match bits {
            Some(bits) => randbits::BitStream::from_bytes_truncated(data, bits).py_err()?,
            None => randbits::BitStream::from_bytes(data),
        };
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_hex(hex: &str) -> PyResult<Self> {
        Ok(Self {
            inner: randbits::BitStream::from_hex(hex).py_err()?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len() as usize
    }

    #[getter]
    fn consumed(&self) -> u64 {
        self.inner.consumed()
    }

    #[getter]
    fn remaining(&self) -> u64 {
        self.inner.remaining()
    }

    fn read_bits(&mut self, count: u32) -> PyResult<u64> {
        self.inner.read_bits(count).py_err()
    }

    fn next_gaussian(&mut self, t: u32) -> PyResult<f64> {
        let spec = randbits::GaussianSpec::new(t).py_err()?;
        self.inner.next_gaussian(spec).py_err()
    }
}

#[pyclass(name = "ConstructionResult", module = "l1tensor", frozen)]
struct PyConstruction {
    inner: pipeline::ConstructionResult,
}

#[pymethods]
impl PyConstruction {
    /// Basis of the subspace of l1^{N_final}.
    #[getter]
    fn basis(&self) -> PyBasis {
        PyBasis {
            inner: self.inner.basis.clone(),
        }
    }

    /// Basis zero-padded to the target dimension N.
    fn padded_basis(&self) -> PyResult<PyBasis> {
        Ok(PyBasis {
            inner: self.inner.padded_basis().py_err()?,
        })
    }

    #[getter]
    fn bits_consumed(&self) -> u64 {
        self.inner.bits_consumed
    }

    #[getter]
    fn attempts(&self) -> u32 {
        self.inner.attempts
    }

    #[getter(scaling_M)]
    fn scaling_m(&self) -> f64 {
        self.inner.scaling_m
    }

    #[getter]
    fn plan<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_dict(py, &self.inner.plan)
    }

    #[getter]
    fn certificate<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_dict(py, &self.inner.certificate)
    }

    /// Writes the padded basis in the binary (default) or CSV format.
    #[pyo3(signature = (path, csv = false))]
    fn write(&self, path: PathBuf, csv: bool) -> PyResult<()> {
        let cert = serde_json::to_value(&self.inner.certificate)
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        let file = BasisFile::new(
            self.inner.padded_basis().py_err()?,
            self.inner.scaling_m,
            self.inner.bits_consumed,
            cert,
        );
        let encoding = if csv { Encoding::Csv } else { Encoding::Bin };
        file.write(&path, encoding).py_err()
    }
}

#[allow(clippy::too_many_arguments)]
fn config(
    c1: f64,
    c2: f64,
    c0: Option<f64>,
    c_univ: f64,
    retries: u32,
    samples: usize,
    restarts: usize,
    iters: usize,
    key: u64,
) -> Config {
    Config {
        c1,
        c2,
        c0,
        c_univ,
        retries,
        samples,
        restarts,
        iters,
        key,
        ..Config::default()
    }
}

#[pyfunction]
#[pyo3(signature = (x, n, B = 1))]
#[allow(non_snake_case)]
fn block_norm(x: Vec<f64>, n: usize, B: usize) -> PyResult<f64> {
    core::block_norm(&x, shape(n, B)?).py_err()
}

/// `block_norm(x) / (sqrt(n) |x|_2)`, in `(0, 1]`.
#[pyfunction]
#[pyo3(signature = (x, n, B = 1))]
#[allow(non_snake_case)]
fn normalized_ratio(x: Vec<f64>, n: usize, B: usize) -> PyResult<f64> {
    core::normalized_ratio(&x, shape(n, B)?).py_err()
}

/// Spherical mean of the block norm with its bounds.
#[pyfunction]
#[pyo3(signature = (n, B = 1))]
#[allow(non_snake_case)]
fn mean_norm<'py>(py: Python<'py>, n: usize, B: usize) -> PyResult<Bound<'py, PyAny>> {
    to_dict(py, &dvoretzky::mean_norm(shape(n, B)?))
}

#[pyfunction]
#[pyo3(signature = (N, eps, gamma, c_univ = 1.0))]
#[allow(non_snake_case)]
fn required_bits(N: u64, eps: f64, gamma: f64, c_univ: f64) -> PyResult<u64> {
    randbits::required_bits(N, eps, gamma, c_univ).py_err()
}

#[pyfunction]
#[pyo3(signature = (n, B, m, stream, t = None, eps = 0.5))]
#[allow(non_snake_case)]
fn random_subspace(
    n: usize,
    B: usize,
    m: usize,
    stream: &mut PyBitStream,
    t: Option<u32>,
    eps: f64,
) -> PyResult<PyBasis> {
    let spec = match t {
        Some(t) => randbits::GaussianSpec::new(t).py_err()?,
        None => randbits::GaussianSpec::for_params(m, n, B, eps),
    };
    let inner = dvoretzky::random_subspace(shape(n, B)?, m, &mut stream.inner, spec).py_err()?;
    Ok(PyBasis { inner })
}

#[pyfunction]
#[pyo3(signature = (N, eps, gamma, c1 = dvoretzky::DEFAULT_C, c2 = dvoretzky::DEFAULT_C, c0 = None, c_univ = 1.0))]
#[allow(non_snake_case, clippy::too_many_arguments)]
fn plan<'py>(
    py: Python<'py>,
    N: u64,
    eps: f64,
    gamma: f64,
    c1: f64,
    c2: f64,
    c0: Option<f64>,
    c_univ: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = config(c1, c2, c0, c_univ, 0, 0, 0, 0, 0);
    to_dict(py, &pipeline::plan(N, eps, gamma, &cfg).py_err()?)
}

#[pyfunction]
#[pyo3(signature = (
    N, eps, gamma, seed, c1 = dvoretzky::DEFAULT_C, c2 = dvoretzky::DEFAULT_C, c0 = None, c_univ = 1.0,
    retries = 0, samples = 10_000, restarts = 8, iters = 200, key = 0, seed_bits = None
))]
#[allow(non_snake_case, clippy::too_many_arguments)]
fn construct(
    py: Python<'_>,
    N: u64,
    eps: f64,
    gamma: f64,
    seed: &[u8],
    c1: f64,
    c2: f64,
    c0: Option<f64>,
    c_univ: f64,
    retries: u32,
    samples: usize,
    restarts: usize,
    iters: usize,
    key: u64,
    seed_bits: Option<u64>,
) -> PyResult<PyConstruction> {
    let cfg = config(c1, c2, c0, c_univ, retries, samples, restarts, iters, key);
    let mut stream = match seed_bits {
        Some(bits) => randbits::BitStream::from_bytes_truncated(seed, bits).py_err()?,
        None => randbits::BitStream::from_bytes(seed),
    };
    let inner = py
        .detach(move || pipeline::construct(N, eps, gamma, &mut stream, &cfg))
        .py_err()?;
    Ok(PyConstruction { inner })
}

/// Reads a basis file: returns `(basis, header)`.
#[pyfunction]
fn read_basis<'py>(py: Python<'py>, path: PathBuf) -> PyResult<(PyBasis, Bound<'py, PyAny>)> {
    let file = BasisFile::read(&path).py_err()?;
    Ok((PyBasis { inner: file.basis }, to_dict(py, &file.header)?))
}

/// The public reference byte source used for test seeds.
#[pyfunction]
fn reference_seed<'py>(py: Python<'py>, index: u64, length: usize) -> Bound<'py, PyBytes> {
    PyBytes::new(py, &randbits::reference_seed_bytes(index, length))
}

#[pymodule]
fn l1tensor(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyBasis>()?;
    m.add_class::<PyBitStream>()?;
    m.add_class::<PyConstruction>()?;
    m.add(
        "BudgetExhaustedError",
        m.py().get_type::<BudgetExhaustedError>(),
    )?;
    m.add("InfeasibleError", m.py().get_type::<InfeasibleError>())?;
    m.add_function(wrap_pyfunction!(block_norm, m)?)?;
    m.add_function(wrap_pyfunction!(normalized_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(mean_norm, m)?)?;
    m.add_function(wrap_pyfunction!(required_bits, m)?)?;
    m.add_function(wrap_pyfunction!(random_subspace, m)?)?;
    m.add_function(wrap_pyfunction!(plan, m)?)?;
    m.add_function(wrap_pyfunction!(construct, m)?)?;
    m.add_function(wrap_pyfunction!(read_basis, m)?)?;
    m.add_function(wrap_pyfunction!(reference_seed, m)?)?;
    Ok(())
}
