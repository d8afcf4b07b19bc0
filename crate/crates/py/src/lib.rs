//! Python bindings for the `deep-evidence` core crate.

use deep_evidence::datasets::{gen_synthetic as core_gen_synthetic, Dataset};
use deep_evidence::distributions::{digamma as core_digamma, log_gamma as core_log_gamma};
use deep_evidence::evidential_nig as nig;
use deep_evidence::evidential_weibull as ew;
use deep_evidence::trainer::{self, EvidentialModel, TrainConfig};
use deep_evidence::{fit_weibull_mle as core_fit, EvidentialParams, HeadKind, NigParams, WeibullParams};
use ndarray::{Array1, Array2};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn py_err(e: deep_evidence::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn ev(alpha: f64, beta: f64) -> PyResult<EvidentialParams> {
    EvidentialParams::relaxed(alpha, beta).map_err(py_err)
}

fn nig_params(gamma: f64, nu: f64, alpha: f64, beta: f64) -> PyResult<NigParams> {
    NigParams::new(gamma, nu, alpha, beta).map_err(py_err)
}

#[pyfunction]
fn log_gamma(x: f64) -> PyResult<f64> {
    core_log_gamma(x).map_err(py_err)
}

#[pyfunction]
fn digamma(x: f64) -> PyResult<f64> {
    core_digamma(x).map_err(py_err)
}

/// Marginal density of `y` under the Weibull likelihood with an inverse-gamma prior on `λᵏ`.
#[pyfunction]
fn marginal_likelihood(y: f64, k: f64, alpha: f64, beta: f64) -> PyResult<f64> {
    ew::marginal_likelihood(y, k, &ev(alpha, beta)?).map_err(py_err)
}

#[pyfunction]
fn nll(y: f64, k: f64, alpha: f64, beta: f64) -> PyResult<f64> {
    ew::nll(y, k, &ev(alpha, beta)?).map_err(py_err)
}

#[pyfunction]
fn mean_prediction(k: f64, alpha: f64, beta: f64) -> PyResult<f64> {
    ew::mean_prediction(k, &ev(alpha, beta)?).map_err(py_err)
}

/// `inf` when the second moment does not exist.
#[pyfunction]
fn predictive_variance(k: f64, alpha: f64, beta: f64) -> PyResult<f64> {
    ew::predictive_variance(k, &ev(alpha, beta)?).map_err(py_err)
}

#[pyfunction]
fn reg_loss(y: f64, z: f64, alpha: f64, beta: f64) -> PyResult<f64> {
    Ok(ew::reg_loss(y, z, &ev(alpha, beta)?))
}

/// `(loss, d_alpha, d_beta)` of `nll + c · reg`.
#[pyfunction]
fn loss_gradients(y: f64, k: f64, alpha: f64, beta: f64, c: f64) -> PyResult<(f64, f64, f64)> {
    let g = ew::loss_gradients(y, k, &ev(alpha, beta)?, c).map_err(py_err)?;
    Ok((g.loss, g.d_alpha, g.d_beta))
}

#[pyfunction]
fn nig_nll(y: f64, gamma: f64, nu: f64, alpha: f64, beta: f64) -> PyResult<f64> {
    Ok(nig::nig_nll(y, &nig_params(gamma, nu, alpha, beta)?))
}

#[pyfunction]
fn nig_reg(y: f64, gamma: f64, nu: f64, alpha: f64, beta: f64) -> PyResult<f64> {
    Ok(nig::nig_reg(y, &nig_params(gamma, nu, alpha, beta)?))
}

/// `(mean, variance)`; variance is `inf` for `alpha <= 1`.
#[pyfunction]
fn nig_predict(gamma: f64, nu: f64, alpha: f64, beta: f64) -> PyResult<(f64, f64)> {
    let s = nig::nig_predict(&nig_params(gamma, nu, alpha, beta)?);
    Ok((s.mean, s.variance))
}

/// `(loss, d_gamma, d_nu, d_alpha, d_beta)`.
#[pyfunction]
fn nig_loss_gradients(y: f64, gamma: f64, nu: f64, alpha: f64, beta: f64, c: f64) -> PyResult<(f64, f64, f64, f64, f64)> {
    let g = nig::nig_loss_gradients(y, &nig_params(gamma, nu, alpha, beta)?, c);
    Ok((g.loss, g.d_gamma, g.d_nu, g.d_alpha, g.d_beta))
}

/// `(k, lambda)` maximum-likelihood estimate.
#[pyfunction]
fn fit_weibull_mle(samples: Vec<f64>) -> PyResult<(f64, f64)> {
    let p = core_fit(&samples).map_err(py_err)?;
    Ok((p.k, p.lambda))
}

/// `(xs, ys, k_hat)` for `y = x² + ε`, `ε ~ Weibull(k, lambda)`.
#[pyfunction]
#[pyo3(signature = (lo, hi, n, k, lam, seed=0))]
fn gen_synthetic(lo: f64, hi: f64, n: usize, k: f64, lam: f64, seed: u64) -> PyResult<(Vec<f64>, Vec<f64>, Option<f64>)> {
    let noise = WeibullParams::new(k, lam).map_err(py_err)?;
    let d = core_gen_synthetic((lo, hi), n, noise, seed).map_err(py_err)?;
    Ok((d.features.column(0).to_vec(), d.targets.to_vec(), d.k_hat))
}

fn dataset(x: Vec<Vec<f64>>, y: Vec<f64>) -> PyResult<Dataset> {
    let cols = x.first().map_or(0, Vec::len);
    if x.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err("ragged feature rows"));
    }
    let rows = x.len();
    let flat: Vec<f64> = x.into_iter().flatten().collect();
    let features = Array2::from_shape_vec((rows, cols), flat).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let names = (0..cols).map(|j| format!("x{j}")).collect();
    let mut d = Dataset::new(features, Array1::from(y), names, "y").map_err(py_err)?;
    d.k_hat = d.fit_shape().ok().map(|p| p.k);
    Ok(d)
}

/// Trained evidential regressor. `head` is `"weibull"` or `"nig"`.
#[pyclass(name = "Model")]
struct PyModel {
    inner: EvidentialModel,
    history: Vec<f64>,
}

#[pymethods]
impl PyModel {
    /// Rows of `x` are observations.
    #[staticmethod]
    #[pyo3(signature = (x, y, head="weibull", epochs=100, c=0.0, learning_rate=None, batch_size=None, arch="synthetic", k=None, seed=0))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        x: Vec<Vec<f64>>,
        y: Vec<f64>,
        head: &str,
        epochs: usize,
        c: f64,
        learning_rate: Option<f64>,
        batch_size: Option<usize>,
        arch: &str,
        k: Option<f64>,
        seed: u64,
    ) -> PyResult<Self> {
        let head: HeadKind = head.parse().map_err(py_err)?;
        let defaults = TrainConfig::new(head);
        let cfg = TrainConfig {
            epochs,
            c,
            seed,
            k,
            learning_rate: learning_rate.unwrap_or(defaults.learning_rate),
            batch_size: batch_size.unwrap_or(defaults.batch_size),
            architecture: arch.parse().map_err(py_err)?,
            ..defaults
        };
        let out = trainer::train(&cfg, &dataset(x, y)?).map_err(py_err)?;
        Ok(Self {
            inner: out.model,
            history: out.history,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: EvidentialModel::load(path).map_err(py_err)?,
            history: Vec::new(),
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path).map_err(py_err)
    }

    #[getter]
    fn k(&self) -> Option<f64> {
        self.inner.k
    }

    #[getter]
    fn history(&self) -> Vec<f64> {
        self.history.clone()
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.inner.net.param_count()
    }

    /// `[(mean, variance)]` per row.
    fn predict(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<(f64, f64)>> {
        let y = vec![1.0; x.len()];
        let preds = self.inner.predict(&dataset(x, y)?).map_err(py_err)?;
        Ok(preds.into_iter().map(|p| (p.mean, p.variance)).collect())
    }

    /// `(mse, nll, inf_var_count)`.
    fn evaluate(&self, x: Vec<Vec<f64>>, y: Vec<f64>) -> PyResult<(f64, f64, usize)> {
        let r = trainer::evaluate(&self.inner, &dataset(x, y)?).map_err(py_err)?;
        Ok((r.mse, r.nll, r.inf_var_count))
    }
}

#[pymodule]
fn deep_evidence_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(log_gamma, m)?)?;
    m.add_function(wrap_pyfunction!(digamma, m)?)?;
    m.add_function(wrap_pyfunction!(marginal_likelihood, m)?)?;
    m.add_function(wrap_pyfunction!(nll, m)?)?;
    m.add_function(wrap_pyfunction!(mean_prediction, m)?)?;
    m.add_function(wrap_pyfunction!(predictive_variance, m)?)?;
    m.add_function(wrap_pyfunction!(reg_loss, m)?)?;
    m.add_function(wrap_pyfunction!(loss_gradients, m)?)?;
    m.add_function(wrap_pyfunction!(nig_nll, m)?)?;
    m.add_function(wrap_pyfunction!(nig_reg, m)?)?;
    m.add_function(wrap_pyfunction!(nig_predict, m)?)?;
    m.add_function(wrap_pyfunction!(nig_loss_gradients, m)?)?;
    m.add_function(wrap_pyfunction!(fit_weibull_mle, m)?)?;
    m.add_function(wrap_pyfunction!(gen_synthetic, m)?)?;
    m.add_class::<PyModel>()?;
    Ok(())
}
