//! Python bindings for the impedance toolkit: excitation design, the cell
//! simulator, detection, and the impedance estimators.

use eistk::cellsim::{simulate_response, volterra_single_sine_harmonics, CellModel};
use eistk::classical::{impedance_periodic, impedance_random, Taper};
use eistk::detect::{classify_record, DetectConfig};
use eistk::ecm::{ecm_impedance, fit_ecm, EcmBounds, EcmParams, FitConfig, SwarmConfig};
use eistk::nleis::leading_order_coeffs;
use eistk::signals::{design_multisine, render_multisine, AmplitudeProfile};
use eistk::tvimp::{dmfa, operando_eis, stft_eis, OperandoConfig};
use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use std::collections::HashMap;

fn err(e: eistk::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A designed multisine excitation.
#[pyclass(name = "MultisineSpec", from_py_object)]
#[derive(Clone)]
struct PyMultisineSpec {
    inner: eistk::signals::MultisineSpec,
}

#[pymethods]
impl PyMultisineSpec {
    #[getter]
    fn harmonics(&self) -> Vec<u32> {
        self.inner.excited_harmonics.clone()
    }

    #[getter]
    fn frequencies_hz(&self) -> Vec<f64> {
        self.inner.frequencies_hz()
    }

    #[getter]
    fn amplitudes(&self) -> Vec<f64> {
        self.inner.amplitudes.clone()
    }

    #[getter]
    fn phases(&self) -> Vec<f64> {
        self.inner.phases.clone()
    }

    #[getter]
    fn period_tp(&self) -> f64 {
        self.inner.period_tp
    }

    #[getter]
    fn fs(&self) -> f64 {
        self.inner.fs
    }

    fn to_json(&self) -> PyResult<String> {
        eistk::io::to_json_pretty(&self.inner).map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner: eistk::signals::MultisineSpec =
            serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        inner.validate().map_err(err)?;
        Ok(Self { inner })
    }

    /// Render `periods` periods of the excitation, optionally on a constant
    /// current offset.
    #[pyo3(signature = (periods, offset=0.0))]
    fn render(&self, periods: u32, offset: f64) -> PyResult<PyRecord> {
        let n = self.inner.samples_per_period() * periods as usize;
        let traj = vec![offset; n];
        let rec = render_multisine(&self.inner, periods, Some(&traj)).map_err(err)?;
        Ok(PyRecord { inner: rec })
    }

    fn __repr__(&self) -> String {
        format!(
            "MultisineSpec({} harmonics, Tp = {} s, fs = {} Hz)",
            self.inner.excited_harmonics.len(),
            self.inner.period_tp,
            self.inner.fs
        )
    }
}

/// A sampled current/voltage record.
#[pyclass(name = "Record", from_py_object)]
#[derive(Clone)]
struct PyRecord {
    inner: eistk::signals::TimeSeriesRecord,
}

#[pymethods]
impl PyRecord {
    #[getter]
    fn fs(&self) -> f64 {
        self.inner.fs
    }

    #[getter]
    fn n_periods(&self) -> u32 {
        self.inner.n_periods
    }

    #[getter]
    fn current(&self) -> Vec<f64> {
        self.inner.current.clone()
    }

    #[getter]
    fn voltage(&self) -> Vec<f64> {
        self.inner.voltage.clone()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Record({} samples at {} Hz, {} period(s))",
            self.inner.len(),
            self.inner.fs,
            self.inner.n_periods
        )
    }
}

/// An impedance curve as parallel lists.
#[pyclass(name = "ImpedanceCurve", from_py_object)]
#[derive(Clone)]
struct PyImpedanceCurve {
    inner: eistk::classical::ImpedanceCurve,
}

#[pymethods]
impl PyImpedanceCurve {
    #[getter]
    fn frequencies_hz(&self) -> Vec<f64> {
        self.inner.frequencies.clone()
    }

    #[getter]
    fn values(&self) -> Vec<Complex64> {
        self.inner.values.clone()
    }

    #[getter]
    fn std(&self) -> Option<Vec<f64>> {
        self.inner.std.clone()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// A time-varying impedance surface; masked cells are `None`.
#[pyclass(name = "TimeVaryingImpedance", from_py_object)]
#[derive(Clone)]
struct PyTimeVaryingImpedance {
    inner: eistk::tvimp::TimeVaryingImpedance,
}

#[pymethods]
impl PyTimeVaryingImpedance {
    #[getter]
    fn frequencies_hz(&self) -> Vec<f64> {
        self.inner.frequencies.clone()
    }

    #[getter]
    fn times_s(&self) -> Vec<f64> {
        self.inner.times.clone()
    }

    #[getter]
    fn values(&self) -> Vec<Vec<Option<Complex64>>> {
        self.inner.values.clone()
    }

    #[getter]
    fn method(&self) -> String {
        self.inner.method.clone()
    }

    /// Nearest frequency slice as an impedance curve.
    fn slice_at_time(&self, t: f64) -> PyResult<PyImpedanceCurve> {
        Ok(PyImpedanceCurve {
            inner: self.inner.slice_at_time(t).map_err(err)?,
        })
    }
}

/// Design a multisine excitation over `[f_min, f_max]` Hz.
#[pyfunction(name = "design_multisine")]
#[pyo3(signature = (f_min, f_max, n_freqs, period_tp, fs, rms=0.8, profile="flat", odd_only=true, seed=0))]
#[allow(clippy::too_many_arguments)]
fn py_design_multisine(
    f_min: f64,
    f_max: f64,
    n_freqs: usize,
    period_tp: f64,
    fs: f64,
    rms: f64,
    profile: &str,
    odd_only: bool,
    seed: u64,
) -> PyResult<PyMultisineSpec> {
    let profile = match profile {
        "flat" => AmplitudeProfile::Flat { rms },
        "invsqrtf" => AmplitudeProfile::InvSqrtF { rms },
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown profile {other:?} (flat | invsqrtf)"
            )))
        }
    };
    let inner = design_multisine(f_min, f_max, n_freqs, period_tp, fs, profile, odd_only, seed)
        .map_err(err)?;
    Ok(PyMultisineSpec { inner })
}

/// Drive a synthetic cell (JSON model) with an excitation record.
#[pyfunction(name = "simulate")]
#[pyo3(signature = (model_json, excitation, seed=0))]
fn py_simulate(model_json: &str, excitation: &PyRecord, seed: u64) -> PyResult<PyRecord> {
    let model: CellModel =
        serde_json::from_str(model_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let rec = simulate_response(&model, &excitation.inner, seed).map_err(err)?;
    Ok(PyRecord { inner: rec })
}

/// Classify a record as "LTI" / "NLTI" / "LTV" / "NLTV"; returns a dict with
/// the verdict, the distortion levels in dB, and per-harmonic SNR.
#[pyfunction(name = "classify")]
#[pyo3(signature = (record, spec, threshold_db=6.0))]
fn py_classify(
    py: Python<'_>,
    record: &PyRecord,
    spec: &PyMultisineSpec,
    threshold_db: f64,
) -> PyResult<Py<PyAny>> {
    let cfg = DetectConfig {
        threshold_db,
        ..DetectConfig::default()
    };
    let report = classify_record(&record.inner, &spec.inner, &cfg).map_err(err)?;
    let dict = pyo3::types::PyDict::new(py);
    dict.set_item("classification", report.classification.to_string())?;
    dict.set_item("even_nl_db", report.even_nl_db)?;
    dict.set_item("odd_nl_db", report.odd_nl_db)?;
    dict.set_item("skirt_db", report.skirt_db)?;
    dict.set_item("even_dominant", report.even_dominant)?;
    dict.set_item(
        "snr",
        report
            .snr_at_excited
            .iter()
            .map(|s| (s.harmonic, s.freq_hz, s.snr))
            .collect::<Vec<_>>(),
    )?;
    Ok(dict.into_any().unbind())
}

/// Classical impedance of a periodic record at the excited lines.
#[pyfunction(name = "impedance_periodic")]
fn py_impedance_periodic(record: &PyRecord, spec: &PyMultisineSpec) -> PyResult<PyImpedanceCurve> {
    let curve =
        impedance_periodic(&record.inner, &spec.inner, record.inner.n_periods).map_err(err)?;
    Ok(PyImpedanceCurve { inner: curve })
}

/// Cross/auto-spectra impedance from repeated records under random
/// excitation.
#[pyfunction(name = "impedance_random")]
#[pyo3(signature = (records, hann=true))]
fn py_impedance_random(records: Vec<PyRecord>, hann: bool) -> PyResult<PyImpedanceCurve> {
    let recs: Vec<eistk::signals::TimeSeriesRecord> =
        records.into_iter().map(|r| r.inner).collect();
    let taper = if hann { Taper::Hann } else { Taper::Rectangular };
    Ok(PyImpedanceCurve {
        inner: impedance_random(&recs, taper).map_err(err)?,
    })
}

/// Leading-order nonlinear impedance coefficients of a single-sine record;
/// returns `{h: Z_hh}`.
#[pyfunction(name = "nleis_coefficients")]
#[pyo3(signature = (record, h_max=5))]
fn py_nleis(record: &PyRecord, h_max: u32) -> PyResult<HashMap<u32, Complex64>> {
    let nl = leading_order_coeffs(&record.inner, h_max).map_err(err)?;
    Ok(nl.coeffs.into_iter().collect())
}

/// Short-time Fourier impedance estimate.
#[pyfunction(name = "stft_eis")]
fn py_stft_eis(
    record: &PyRecord,
    spec: &PyMultisineSpec,
    lambda: f64,
    n_w: usize,
    stride: usize,
) -> PyResult<PyTimeVaryingImpedance> {
    Ok(PyTimeVaryingImpedance {
        inner: stft_eis(&record.inner, &spec.inner, lambda, n_w, stride).map_err(err)?,
    })
}

/// Dynamic multi-frequency analysis with the roll-off quadrature filter.
#[pyfunction(name = "dmfa")]
#[pyo3(signature = (record, spec, q=8.0, n_w=None))]
fn py_dmfa(
    record: &PyRecord,
    spec: &PyMultisineSpec,
    q: f64,
    n_w: Option<usize>,
) -> PyResult<PyTimeVaryingImpedance> {
    let n = record.inner.len();
    let n_w = match n_w {
        Some(v) => v,
        None => eistk::spectra::default_band_bins(
            &spec.inner.excited_bins(record.inner.n_periods),
            n,
        )
        .map_err(err)?,
    };
    let bin_spacing = 2.0 * std::f64::consts::PI * record.inner.fs / n as f64;
    let filt = eistk::spectra::QuadratureFilter::new(q, bin_spacing * n_w as f64 / 4.0, n_w)
        .map_err(err)?;
    Ok(PyTimeVaryingImpedance {
        inner: dmfa(&record.inner, &spec.inner, &filt).map_err(err)?,
    })
}

/// Operando estimate: Legendre-expanded time-varying impedance with drift
/// modelling. Returns the surface; drift and distortion data come with the
/// CLI sidecar.
#[pyfunction(name = "operando_eis")]
#[pyo3(signature = (record, spec, n_p=2, n_q=4, output_times=100))]
fn py_operando(
    record: &PyRecord,
    spec: &PyMultisineSpec,
    n_p: usize,
    n_q: usize,
    output_times: usize,
) -> PyResult<PyTimeVaryingImpedance> {
    let cfg = OperandoConfig {
        n_p,
        n_q,
        output_times,
        ..OperandoConfig::default()
    };
    let res = operando_eis(&record.inner, &spec.inner, &cfg).map_err(err)?;
    Ok(PyTimeVaryingImpedance { inner: res.tvimp })
}

fn params_to_dict(py: Python<'_>, p: &EcmParams) -> PyResult<Py<PyAny>> {
    let dict = pyo3::types::PyDict::new(py);
    for (name, value) in eistk::ecm::PARAM_NAMES.iter().zip(p.as_array()) {
        dict.set_item(name, value)?;
    }
    Ok(dict.into_any().unbind())
}

fn params_from_dict(d: &HashMap<String, f64>) -> PyResult<EcmParams> {
    let get = |k: &str| -> PyResult<f64> {
        d.get(k)
            .copied()
            .ok_or_else(|| PyValueError::new_err(format!("missing parameter {k:?}")))
    };
    Ok(EcmParams {
        r0: get("R0")?,
        r1: get("R1")?,
        c1: get("C1")?,
        rct: get("Rct")?,
        cct: get("Cct")?,
        w: get("W")?,
        alpha: get("alpha")?,
    })
}

/// Equivalent-circuit impedance at the given frequencies (Hz).
#[pyfunction(name = "ecm_impedance")]
fn py_ecm_impedance(theta: HashMap<String, f64>, freqs_hz: Vec<f64>) -> PyResult<Vec<Complex64>> {
    let params = params_from_dict(&theta)?;
    let omegas: Vec<f64> = freqs_hz
        .iter()
        .map(|f| 2.0 * std::f64::consts::PI * f)
        .collect();
    ecm_impedance(&params, &omegas).map_err(err)
}

/// Fit the equivalent circuit to a curve; returns `(theta_dict, mre)`.
#[pyfunction(name = "fit_ecm")]
#[pyo3(signature = (curve, seed=0, particles=64, iters=200))]
fn py_fit_ecm(
    py: Python<'_>,
    curve: &PyImpedanceCurve,
    seed: u64,
    particles: usize,
    iters: usize,
) -> PyResult<(Py<PyAny>, f64)> {
    let bounds = EcmBounds::from_curve(&curve.inner).map_err(err)?;
    let cfg = FitConfig {
        swarm: SwarmConfig {
            particles,
            iters,
            seed,
        },
        ..FitConfig::default()
    };
    let fit = fit_ecm(&curve.inner, &bounds, &cfg).map_err(err)?;
    Ok((params_to_dict(py, &fit.params)?, fit.mean_rel_error))
}

/// Single-sine harmonic phasors of static Volterra kernels `{n: Z_n}`.
#[pyfunction(name = "volterra_harmonics")]
fn py_volterra(
    kernels: HashMap<u32, Complex64>,
    i_amp: f64,
    omega: f64,
) -> PyResult<HashMap<u32, Complex64>> {
    let map = kernels.into_iter().collect();
    let out = volterra_single_sine_harmonics(&map, i_amp, omega).map_err(err)?;
    Ok(out.phasors.into_iter().collect())
}

#[pymodule]
fn eistk_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMultisineSpec>()?;
    m.add_class::<PyRecord>()?;
    m.add_class::<PyImpedanceCurve>()?;
    m.add_class::<PyTimeVaryingImpedance>()?;
    m.add_function(wrap_pyfunction!(py_design_multisine, m)?)?;
    m.add_function(wrap_pyfunction!(py_simulate, m)?)?;
    m.add_function(wrap_pyfunction!(py_classify, m)?)?;
    m.add_function(wrap_pyfunction!(py_impedance_periodic, m)?)?;
    m.add_function(wrap_pyfunction!(py_impedance_random, m)?)?;
    m.add_function(wrap_pyfunction!(py_nleis, m)?)?;
    m.add_function(wrap_pyfunction!(py_stft_eis, m)?)?;
    m.add_function(wrap_pyfunction!(py_dmfa, m)?)?;
    m.add_function(wrap_pyfunction!(py_operando, m)?)?;
    m.add_function(wrap_pyfunction!(py_ecm_impedance, m)?)?;
    m.add_function(wrap_pyfunction!(py_fit_ecm, m)?)?;
    m.add_function(wrap_pyfunction!(py_volterra, m)?)?;
    Ok(())
}
