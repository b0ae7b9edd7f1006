//! Nonlinear impedance estimation: leading-order coefficients from
//! single-sine records, amplitude-sweep extrapolation toward the
//! small-signal limit, and the best linear approximation with a distortion
//! report for multisine records.

use crate::classical::{impedance_periodic, ImpedanceCurve};
use crate::detect::{noise_floor, partition_bins, DetectConfig};
use crate::signals::{MultisineSpec, TimeSeriesRecord};
use crate::spectra::dft;
use crate::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;

/// Leading-order nonlinear impedance coefficients at one frequency.
///
/// `coeffs[h]` estimates `Z_{h,h}` with units ohm / ampere^(h-1); the `h = 1`
/// entry is the classical (best linear) impedance at this amplitude.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NonlinearCoefficients {
    /// Excited angular frequency, rad/s.
    pub omega: f64,
    pub coeffs: BTreeMap<u32, Complex64>,
    /// Peak excitation amplitude the record was measured at, amperes.
    pub amplitude_used: f64,
    pub periods: u32,
    /// Set when harmonics beyond Nyquist were dropped.
    pub truncated: bool,
}

fn single_sine_layout(rec: &TimeSeriesRecord) -> Result<(MultisineSpec, usize)> {
    let spec = rec
        .spec
        .clone()
        .ok_or_else(|| Error::invalid("nleis: record carries no excitation spec"))?;
    if spec.excited_harmonics.len() != 1 {
        return Err(Error::invalid(
            "nleis: single-sine record required (multisine harmonics are ambiguous)",
        ));
    }
    let expect = spec.samples_per_period() * rec.n_periods as usize;
    if rec.current.len() != expect || rec.voltage.len() != expect {
        return Err(Error::invalid(
            "nleis: record does not hold an integer number of periods",
        ));
    }
    let base_bin = spec.excited_harmonics[0] as usize * rec.n_periods as usize;
    Ok((spec, base_bin))
}

/// Leading-order nonlinear impedance coefficients
/// `Z_hat_{h,h} = V(h k1) / I(k1)^h` for `h = 1..h_max` from a single-sine
/// record of `P` integer periods (`k1 = P h1`).
///
/// Harmonics whose line falls on or beyond the Nyquist bin are dropped with
/// a warning and the result is marked truncated.
pub fn leading_order_coeffs(rec: &TimeSeriesRecord, h_max: u32) -> Result<NonlinearCoefficients> {
    if h_max < 1 {
        return Err(Error::invalid("nleis: h_max must be at least 1"));
    }
    let (spec, base_bin) = single_sine_layout(rec)?;
    let i_spec = dft(&rec.current, rec.fs)?;
    let v_spec = dft(&rec.voltage, rec.fs)?;
    let nyq = i_spec.nyquist_bin();
    if base_bin >= nyq {
        return Err(Error::invalid("nleis: excited line at or beyond Nyquist"));
    }

    let i_line = i_spec.bins[base_bin];
    if i_line.norm() < 1e-300 {
        return Err(Error::numerical("nleis: no current energy at the excited line"));
    }
    // one-sided amplitude phasors: a cosine of amplitude A holds A/2 on its
    // DFT line, so the line values are doubled before forming V_h / I^h
    let i_phasor = 2.0 * i_line;
    let amplitude = i_phasor.norm();

    let mut coeffs = BTreeMap::new();
    let mut truncated = false;
    for h in 1..=h_max {
        let bin = base_bin * h as usize;
        if bin >= nyq {
            log::warn!("nleis: harmonic {h} beyond Nyquist, truncating at {}", h - 1);
            truncated = true;
            break;
        }
        let mut i_pow = Complex64::new(1.0, 0.0);
        for _ in 0..h {
            i_pow *= i_phasor;
        }
        coeffs.insert(h, 2.0 * v_spec.bins[bin] / i_pow);
    }

    Ok(NonlinearCoefficients {
        omega: 2.0 * PI * spec.excited_harmonics[0] as f64 / spec.period_tp,
        coeffs,
        amplitude_used: amplitude,
        periods: rec.n_periods,
        truncated,
    })
}

/// Small-signal limit of `Z_{h,h}` from records at several amplitudes:
/// fits `V_h / I^h = Z_{h,h} + c I^2` by linear regression in `I^2` and
/// returns the intercept.
pub fn amplitude_sweep_extrapolate(records: &[TimeSeriesRecord], h: u32) -> Result<Complex64> {
    if records.len() < 3 {
        return Err(Error::invalid(
            "amplitude sweep: need at least 3 amplitudes for the extrapolation",
        ));
    }
    let mut xs = Vec::with_capacity(records.len());
    let mut ys = Vec::with_capacity(records.len());
    for rec in records {
        let nl = leading_order_coeffs(rec, h)?;
        let z = nl.coeffs.get(&h).ok_or_else(|| {
            Error::invalid(format!("amplitude sweep: harmonic {h} truncated in a record"))
        })?;
        xs.push(nl.amplitude_used * nl.amplitude_used);
        ys.push(*z);
    }
    let x_mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();
    if sxx < 1e-12 * x_mean * x_mean {
        return Err(Error::invalid(
            "amplitude sweep: amplitudes are degenerate (no spread in I^2)",
        ));
    }
    let y_mean = ys.iter().sum::<Complex64>() / ys.len() as f64;
    let sxy: Complex64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - y_mean) * (x - x_mean))
        .sum();
    let slope = sxy / sxx;
    Ok(y_mean - slope * x_mean)
}

/// Energy found at the non-excited harmonic lines, split by parity.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistortionReport {
    /// `(bin, frequency Hz, |V|^2)` at even non-excited harmonic lines.
    pub even_lines: Vec<(usize, f64, f64)>,
    /// Same at odd non-excited harmonic lines.
    pub odd_lines: Vec<(usize, f64, f64)>,
    pub even_total_power: f64,
    pub odd_total_power: f64,
    /// Median per-line power relative to the local noise floor, dB.
    pub even_db_vs_floor: f64,
    pub odd_db_vs_floor: f64,
}

/// Best linear approximation from an ORP multisine record with distortion
/// accounting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlaEstimate {
    pub curve: ImpedanceCurve,
    pub distortion: DistortionReport,
}

/// Best linear approximation: the plain spectral ratio at excited lines,
/// with the energy at the non-excited harmonic lines reported as even/odd
/// nonlinear distortions.
///
/// Under odd-harmonic excitation, even distortions never land on the excited
/// lines; odd distortions do, so the std channel of the curve widens by the
/// local odd-distortion level.
pub fn bla_estimate(rec: &TimeSeriesRecord, spec: &MultisineSpec, p: u32) -> Result<BlaEstimate> {
    let mut curve = impedance_periodic(rec, spec, p)?;
    curve.meta.estimator = "bla".into();

    let v_spec = dft(&rec.voltage, rec.fs)?;
    let i_spec = dft(&rec.current, rec.fs)?;
    let cfg = DetectConfig::default();
    let parts = partition_bins(spec, p, rec.current.len(), &cfg);

    let collect = |bins: &[usize]| -> Vec<(usize, f64, f64)> {
        bins.iter()
            .map(|&k| (k, v_spec.freq_hz(k), v_spec.bins[k].norm_sqr()))
            .collect()
    };
    let even_lines = collect(&parts.even_nl);
    let odd_lines = collect(&parts.odd_nl);
    let even_total_power: f64 = even_lines.iter().map(|l| l.2).sum();
    let odd_total_power: f64 = odd_lines.iter().map(|l| l.2).sum();

    let floor = noise_floor(&v_spec, &parts.floor_exclusion, p as usize, cfg.floor_min_bins).ok();
    let level_db = |lines: &[(usize, f64, f64)]| -> f64 {
        let Some(floor) = &floor else {
            return f64::NAN;
        };
        if lines.is_empty() {
            return f64::NEG_INFINITY;
        }
        let mut ratios: Vec<f64> = lines
            .iter()
            .map(|&(k, _, pw)| pw / floor.at(k).max(1e-300))
            .collect();
        ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
        10.0 * (ratios[ratios.len() / 2] / std::f64::consts::LN_2).max(1e-300).log10()
    };
    let even_db_vs_floor = level_db(&even_lines);
    let odd_db_vs_floor = level_db(&odd_lines);

    // widen the std channel by the odd distortion level: those distortions
    // land on the excited (odd) lines and do not average down with P
    if !parts.odd_nl.is_empty() {
        let mut odd_powers: Vec<f64> = odd_lines.iter().map(|l| l.2).collect();
        odd_powers.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let odd_median = odd_powers[odd_powers.len() / 2];
        let bins = spec.excited_bins(p);
        let base = curve.std.take().unwrap_or_else(|| vec![0.0; bins.len()]);
        curve.std = Some(
            bins.iter()
                .zip(base)
                .map(|(&k, s)| {
                    let denom = i_spec.bins[k].norm_sqr().max(1e-300);
                    (s * s + odd_median / denom).sqrt()
                })
                .collect(),
        );
    }

    Ok(BlaEstimate {
        curve,
        distortion: DistortionReport {
            even_lines,
            odd_lines,
            even_total_power,
            odd_total_power,
            even_db_vs_floor,
            odd_db_vs_floor,
        },
    })
}
