//! Classical LTI impedance estimation from periodic and random excitation,
//! and a fit-based Kramers-Kronig consistency check.

use crate::detect::{noise_floor, partition_bins, DetectConfig};
use crate::signals::{MultisineSpec, TimeSeriesRecord};
use crate::spectra::dft;
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Provenance of an impedance curve.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct EstimatorMeta {
    /// Estimator tag, e.g. "periodic", "random", "bla".
    pub estimator: String,
    /// Number of measured periods, when applicable.
    pub periods: u32,
    /// Identifier of the source record, free-form.
    pub source: Option<String>,
}

/// Impedance sampled at a set of strictly increasing positive frequencies.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImpedanceCurve {
    pub frequencies: Vec<f64>,
    pub values: Vec<Complex64>,
    /// Circular per-component standard deviation (same for real and
    /// imaginary parts), when an uncertainty estimate is available.
    pub std: Option<Vec<f64>>,
    pub meta: EstimatorMeta,
}

impl ImpedanceCurve {
    pub fn validate(&self) -> Result<()> {
        if self.frequencies.is_empty() {
            return Err(Error::invalid("impedance curve: empty"));
        }
        if self.frequencies.len() != self.values.len() {
            return Err(Error::invalid("impedance curve: length mismatch"));
        }
        if self.frequencies[0] <= 0.0 {
            return Err(Error::invalid(
                "impedance curve: impedance is not expressed at DC or negative f",
            ));
        }
        if self.frequencies.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(
                "impedance curve: frequencies must be strictly increasing",
            ));
        }
        if let Some(std) = &self.std {
            if std.len() != self.values.len() {
                return Err(Error::invalid("impedance curve: std length mismatch"));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }
}

/// Taper applied to each record before forming cross/auto spectra.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Taper {
    Rectangular,
    Hann,
}

impl Taper {
    fn weights(&self, n: usize) -> Vec<f64> {
        match self {
            Taper::Rectangular => vec![1.0; n],
            Taper::Hann => (0..n)
                .map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / n as f64).cos()))
                .collect(),
        }
    }
}

/// Impedance of a steady-state periodic record: `Z(w_k) = V(k) / I(k)` at the
/// excited bins `k = P h_m` only.
///
/// The per-point standard deviation is propagated from the local noise floors
/// of both spectra through the ratio; it is omitted when the record is too
/// short for a floor estimate.
pub fn impedance_periodic(
    rec: &TimeSeriesRecord,
    spec: &MultisineSpec,
    p: u32,
) -> Result<ImpedanceCurve> {
    if p < 1 || p != rec.n_periods {
        return Err(Error::invalid(format!(
            "impedance_periodic: record holds {} periods, caller claims {p}",
            rec.n_periods
        )));
    }
    let expect = spec.samples_per_period() * p as usize;
    if rec.current.len() != expect {
        return Err(Error::invalid(format!(
            "impedance_periodic: non-integer period count (N = {}, P Tp fs = {expect})",
            rec.current.len()
        )));
    }
    if rec.voltage.len() != rec.current.len() {
        return Err(Error::invalid("impedance_periodic: missing voltage channel"));
    }

    let i_spec = dft(&rec.current, rec.fs)?;
    let v_spec = dft(&rec.voltage, rec.fs)?;
    let bins = spec.excited_bins(p);
    let i_max = bins
        .iter()
        .map(|&k| i_spec.bins[k].norm())
        .fold(0.0, f64::max);
    let floor_amp = 1e-12 * i_max;

    let mut values = Vec::with_capacity(bins.len());
    for &k in &bins {
        let i_k = i_spec.bins[k];
        if i_k.norm() <= floor_amp {
            return Err(Error::numerical(format!(
                "impedance_periodic: current line at bin {k} below numerical floor"
            )));
        }
        values.push(v_spec.bins[k] / i_k);
    }

    // noise-based uncertainty, best effort
    let std = if p >= 2 {
        let parts = partition_bins(spec, p, rec.current.len(), &DetectConfig::default());
        let fv = noise_floor(&v_spec, &parts.floor_exclusion, p as usize, 8).ok();
        let fi = noise_floor(&i_spec, &parts.floor_exclusion, p as usize, 8).ok();
        match (fv, fi) {
            (Some(fv), Some(fi)) => Some(
                bins.iter()
                    .zip(&values)
                    .map(|(&k, z)| {
                        let denom = i_spec.bins[k].norm_sqr();
                        ((fv.at(k) + z.norm_sqr() * fi.at(k)) / denom).sqrt()
                    })
                    .collect(),
            ),
            _ => None,
        }
    } else {
        None
    };

    Ok(ImpedanceCurve {
        frequencies: spec.frequencies_hz(),
        values,
        std,
        meta: EstimatorMeta {
            estimator: "periodic".into(),
            periods: p,
            source: None,
        },
    })
}

/// Impedance from `M` repeated records under random excitation, as the ratio
/// of averaged cross- and auto-spectra of tapered records.
///
/// Reported on every bin where the auto-spectrum exceeds `1e-12` of its peak;
/// with `M = 1` and a periodic record this degenerates to the plain spectral
/// ratio at the excited bins.
pub fn impedance_random(records: &[TimeSeriesRecord], taper: Taper) -> Result<ImpedanceCurve> {
    if records.is_empty() {
        return Err(Error::invalid("impedance_random: no records"));
    }
    let n = records[0].current.len();
    if n == 0 {
        return Err(Error::invalid("impedance_random: empty record"));
    }
    let fs = records[0].fs;
    for r in records {
        if r.current.len() != n || r.voltage.len() != n {
            return Err(Error::invalid(
                "impedance_random: records must share a common length",
            ));
        }
        if (r.fs - fs).abs() > 1e-12 * fs {
            return Err(Error::invalid("impedance_random: sampling rates differ"));
        }
    }

    let w = taper.weights(n);
    let nyq = n / 2;
    let mut cross = vec![Complex64::new(0.0, 0.0); nyq + 1];
    let mut auto = vec![0.0f64; nyq + 1];
    for r in records {
        let iw: Vec<f64> = r.current.iter().zip(&w).map(|(x, wi)| x * wi).collect();
        let vw: Vec<f64> = r.voltage.iter().zip(&w).map(|(x, wi)| x * wi).collect();
        let is = dft(&iw, fs)?;
        let vs = dft(&vw, fs)?;
        for k in 1..=nyq {
            cross[k] += vs.bins[k] * is.bins[k].conj();
            auto[k] += is.bins[k].norm_sqr();
        }
    }

    let auto_max = auto.iter().cloned().fold(0.0, f64::max);
    if auto_max <= 0.0 {
        return Err(Error::numerical(
            "impedance_random: auto-spectrum is zero everywhere",
        ));
    }
    let floor = 1e-12 * auto_max;
    let mut frequencies = Vec::new();
    let mut values = Vec::new();
    for k in 1..=nyq {
        if auto[k] > floor {
            frequencies.push(k as f64 * fs / n as f64);
            values.push(cross[k] / auto[k]);
        }
    }
    if frequencies.is_empty() {
        return Err(Error::numerical(
            "impedance_random: denominator below floor at every bin",
        ));
    }

    Ok(ImpedanceCurve {
        frequencies,
        values,
        std: None,
        meta: EstimatorMeta {
            estimator: "random".into(),
            periods: records[0].n_periods,
            source: None,
        },
    })
}

/// Result of the fit-based Kramers-Kronig consistency check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KkReport {
    /// Worst-case residual of the Voigt fit to the real part, relative to |Z|.
    pub fit_error_real: f64,
    /// Worst-case mismatch of the predicted imaginary part, relative to |Z|.
    pub fit_error_imag: f64,
    /// True when the imaginary mismatch stays within the tolerance.
    pub pass: bool,
    pub tolerance: f64,
    pub n_voigt: usize,
    pub condition_number: f64,
}

/// Kramers-Kronig consistency via a Voigt-chain fit to the real part only.
///
/// A series `R_0 + sum_i R_i // C_i` with fixed log-spaced time constants is
/// linear in the resistances, so the real part is fitted by least squares and
/// the imaginary part it implies is compared against the measured one. LTI
/// data passes; curves whose real and imaginary parts are inconsistent fail.
pub fn kk_consistency(
    curve: &ImpedanceCurve,
    n_voigt: Option<usize>,
    tolerance: f64,
) -> Result<KkReport> {
    curve.validate()?;
    let m = curve.len();
    if m < 8 {
        return Err(Error::invalid("kk: need at least 8 frequency points"));
    }
    let f_min = curve.frequencies[0];
    let f_max = curve.frequencies[m - 1];
    if f_max / f_min < 100.0 {
        return Err(Error::invalid("kk: need at least 2 decades of frequency"));
    }
    let n_voigt = n_voigt.unwrap_or((m / 2).max(2));

    let tau_min = 1.0 / (2.0 * PI * f_max);
    let tau_max = 1.0 / (2.0 * PI * f_min);
    let taus: Vec<f64> = (0..n_voigt)
        .map(|i| {
            let frac = if n_voigt == 1 {
                0.0
            } else {
                i as f64 / (n_voigt - 1) as f64
            };
            tau_min * (tau_max / tau_min).powf(frac)
        })
        .collect();

    // design matrix on the real part: columns [1, 1/(1 + (w tau_i)^2)]
    let mut a = DMatrix::<f64>::zeros(m, n_voigt + 1);
    let mut b = DVector::<f64>::zeros(m);
    for (row, (&f, z)) in curve.frequencies.iter().zip(&curve.values).enumerate() {
        let w = 2.0 * PI * f;
        a[(row, 0)] = 1.0;
        for (i, &tau) in taus.iter().enumerate() {
            a[(row, i + 1)] = 1.0 / (1.0 + (w * tau).powi(2));
        }
        b[row] = z.re;
    }

    let svd = a.clone().svd(true, true);
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    let condition_number = s_max / s_min.max(f64::MIN_POSITIVE);
    if condition_number > 1e14 {
        return Err(Error::numerical(format!(
            "kk: design matrix ill-conditioned (cond = {condition_number:.3e})"
        )));
    }
    let r = svd
        .solve(&b, 1e-14 * s_max)
        .map_err(|e| Error::numerical(format!("kk: solve failed: {e}")))?;

    let mut fit_error_real = 0.0f64;
    let mut fit_error_imag = 0.0f64;
    for (&f, z) in curve.frequencies.iter().zip(&curve.values) {
        let w = 2.0 * PI * f;
        let mut re_pred = r[0];
        let mut im_pred = 0.0;
        for (i, &tau) in taus.iter().enumerate() {
            let denom = 1.0 + (w * tau).powi(2);
            re_pred += r[i + 1] / denom;
            im_pred += -r[i + 1] * w * tau / denom;
        }
        let scale = z.norm().max(f64::MIN_POSITIVE);
        fit_error_real = fit_error_real.max((re_pred - z.re).abs() / scale);
        fit_error_imag = fit_error_imag.max((im_pred - z.im).abs() / scale);
    }

    Ok(KkReport {
        fit_error_real,
        fit_error_imag,
        pass: fit_error_imag <= tolerance,
        tolerance,
        n_voigt,
        condition_number,
    })
}
