//! Python bindings. Matrices cross the boundary as lists of rows, tensor
//! frames as flat lists in first-index-fastest order.

use pyo3::exceptions::{PyArithmeticError, PyIndexError, PyValueError};
use pyo3::prelude::*;

use tensor_bss::bench::replicate_rng;
use tensor_bss::moments::IdentityShift;
use tensor_bss::simgen::{gen_latent_setting, gen_mixing, mix};
use tensor_bss::{BssError, LagSet, Matrix, Method, MixingKind, Setting, Tensor};

type Simulated = (PyTensorSeries, PyTensorSeries, Vec<Vec<Vec<f64>>>);

fn to_py_err(e: BssError) -> PyErr {
    if e.is_numerical() {
        PyArithmeticError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn parse_arg<T: std::str::FromStr>(value: &str, what: &str) -> PyResult<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| PyValueError::new_err(format!("{what}: {e}")))
}

fn matrix_from_rows(rows: Vec<Vec<f64>>) -> PyResult<Matrix> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 {
        return Err(PyValueError::new_err("matrix must be non-empty"));
    }
    if rows.iter().any(|row| row.len() != c) {
        return Err(PyValueError::new_err("matrix rows have different lengths"));
    }
    Ok(Matrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn matrix_to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|row| row.iter().copied().collect()).collect()
}

/// A time series of equally shaped real tensors.
#[pyclass(name = "TensorSeries", module = "tensor_bss_py", skip_from_py_object)]
#[derive(Clone)]
pub struct PyTensorSeries {
    inner: tensor_bss::TensorSeries,
}

#[pymethods]
impl PyTensorSeries {
    /// `frames` holds one flat list per time point.
    #[new]
    fn new(frames: Vec<Vec<f64>>, dims: Vec<usize>) -> PyResult<Self> {
        let frames = frames
            .into_iter()
            .map(|data| Tensor::new(dims.clone(), data))
            .collect::<tensor_bss::Result<Vec<_>>>()
            .map_err(to_py_err)?;
        let inner = tensor_bss::TensorSeries::new(frames).map_err(to_py_err)?;
        Ok(PyTensorSeries { inner })
    }

    /// Reads the plain-text series format written by the CLI.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let inner = tensor_bss::io::read_series(path).map_err(to_py_err)?;
        Ok(PyTensorSeries { inner })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        tensor_bss::io::write_series(path, &self.inner).map_err(to_py_err)
    }

    #[getter]
    fn dims(&self) -> Vec<usize> {
        self.inner.dims().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn frame(&self, t: usize) -> PyResult<Vec<f64>> {
        if t >= self.inner.len() {
            return Err(PyIndexError::new_err(format!("frame {t} out of range")));
        }
        Ok(self.inner.frame(t).data().to_vec())
    }

    /// The time series of one cell, addressed by its linear index.
    fn component(&self, index: usize) -> PyResult<Vec<f64>> {
        if index >= self.inner.frame_size() {
            return Err(PyIndexError::new_err(format!("component {index} out of range")));
        }
        Ok(self.inner.component(index))
    }

    fn to_list(&self) -> Vec<Vec<f64>> {
        self.inner.frames().iter().map(|f| f.data().to_vec()).collect()
    }

    fn __repr__(&self) -> String {
        format!("TensorSeries(dims={:?}, T={})", self.inner.dims(), self.inner.len())
    }
}

/// Output of `unmix`.
#[pyclass(name = "UnmixingResult", module = "tensor_bss_py")]
pub struct PyUnmixingResult {
    inner: tensor_bss::UnmixingResult,
    method: Method,
}

#[pymethods]
impl PyUnmixingResult {
    #[getter]
    fn method(&self) -> &'static str {
        self.method.name()
    }

    #[getter]
    fn mode_unmixers(&self) -> Vec<Vec<Vec<f64>>> {
        self.inner.mode_unmixers.iter().map(matrix_to_rows).collect()
    }

    #[getter]
    fn whitening(&self) -> Vec<Vec<Vec<f64>>> {
        self.inner.whitening.iter().map(matrix_to_rows).collect()
    }

    #[getter]
    fn rotations(&self) -> Vec<Vec<Vec<f64>>> {
        self.inner
            .rotations
            .iter()
            .map(|u| matrix_to_rows(u.as_matrix()))
            .collect()
    }

    #[getter]
    fn mean(&self) -> Vec<f64> {
        self.inner.mean.data().to_vec()
    }

    #[getter]
    fn recovered(&self) -> PyTensorSeries {
        PyTensorSeries {
            inner: self.inner.recovered.clone(),
        }
    }

    /// Per-mode diagonalizer objective, off-diagonal mass and sweep count.
    #[getter]
    fn diagnostics(&self) -> Vec<(usize, f64, f64, usize, bool)> {
        self.inner
            .diagnostics
            .iter()
            .map(|d| (d.mode, d.objective, d.off_diagonal, d.sweeps, d.converged))
            .collect()
    }

    /// Applies the stored mean and unmixers to another series of the same shape.
    fn apply(&self, series: PyRef<'_, PyTensorSeries>) -> PyResult<PyTensorSeries> {
        let inner = tensor_bss::apply_unmixing(&series.inner, &self.inner).map_err(to_py_err)?;
        Ok(PyTensorSeries { inner })
    }

    fn __repr__(&self) -> String {
        format!(
            "UnmixingResult(method={}, modes={})",
            self.method,
            self.inner.mode_unmixers.len()
        )
    }
}

/// Estimates the unmixing transform of `series` with `method`.
#[pyfunction]
#[pyo3(signature = (series, method, lags=None, diagonal_shift=false))]
fn unmix(
    series: PyRef<'_, PyTensorSeries>,
    method: &str,
    lags: Option<&str>,
    diagonal_shift: bool,
) -> PyResult<PyUnmixingResult> {
    let method: Method = parse_arg(method, "method")?;
    let lags: Option<LagSet> = lags.map(|l| parse_arg(l, "lags")).transpose()?;
    let mut cfg = method.config_with_lags(lags).map_err(to_py_err)?;
    if diagonal_shift {
        cfg.identity_shift = IdentityShift::DiagonalPairs;
    }
    let inner = tensor_bss::unmix(&series.inner, method, &cfg).map_err(to_py_err)?;
    Ok(PyUnmixingResult { inner, method })
}

/// Simulates `(Z, X, mixing)` exactly as the `simulate` subcommand does.
#[pyfunction]
#[pyo3(signature = (setting="arma", mixing="gaussian", dims=vec![3, 2, 2], length=1000, seed=0))]
fn simulate(setting: &str, mixing: &str, dims: Vec<usize>, length: usize, seed: u64) -> PyResult<Simulated> {
    let setting: Setting = parse_arg(setting, "setting")?;
    let kind: MixingKind = parse_arg(mixing, "mixing")?;
    let mut rng = replicate_rng(seed, 0, setting, kind, length);
    let z = gen_latent_setting(setting, &dims, length, &mut rng).map_err(to_py_err)?;
    let a = gen_mixing(&dims, kind, &mut rng);
    let x = mix(&z, &a).map_err(to_py_err)?;
    Ok((
        PyTensorSeries { inner: z },
        PyTensorSeries { inner: x },
        a.iter().map(matrix_to_rows).collect(),
    ))
}

/// Minimum distance index of `gamma` as an estimate of `inverse(omega)`.
#[pyfunction]
fn mdi(gamma: Vec<Vec<f64>>, omega: Vec<Vec<f64>>) -> PyResult<f64> {
    let g = matrix_from_rows(gamma)?;
    let o = matrix_from_rows(omega)?;
    Ok(tensor_bss::mdi(&g, &o).map_err(to_py_err)?.value)
}

/// `A_r ⊗ … ⊗ A_1`, the matrix acting on vectorized frames.
#[pyfunction]
fn kron_unmixing(mats: Vec<Vec<Vec<f64>>>) -> PyResult<Vec<Vec<f64>>> {
    let mats = mats.into_iter().map(matrix_from_rows).collect::<PyResult<Vec<_>>>()?;
    Ok(matrix_to_rows(&tensor_bss::kron_unmixing(&mats)))
}

/// `(multi_index, excess_kurtosis)` pairs in descending order of kurtosis.
#[pyfunction]
fn kurtosis_rank(series: PyRef<'_, PyTensorSeries>) -> PyResult<Vec<(Vec<usize>, f64)>> {
    let report = tensor_bss::kurtosis_rank(&series.inner).map_err(to_py_err)?;
    Ok(report.ranked.into_iter().map(|r| (r.multi_index, r.kurtosis)).collect())
}

#[pyfunction]
fn methods() -> Vec<&'static str> {
    Method::ALL.iter().map(|m| m.name()).collect()
}

#[pymodule]
fn tensor_bss_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", tensor_bss::VERSION)?;
    m.add_class::<PyTensorSeries>()?;
    m.add_class::<PyUnmixingResult>()?;
    m.add_function(wrap_pyfunction!(unmix, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(mdi, m)?)?;
    m.add_function(wrap_pyfunction!(kron_unmixing, m)?)?;
    m.add_function(wrap_pyfunction!(kurtosis_rank, m)?)?;
    m.add_function(wrap_pyfunction!(methods, m)?)?;
    Ok(())
}
