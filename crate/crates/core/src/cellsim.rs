//! Synthetic electrochemical cells used as ground truth by every estimator:
//! static nonlinearities, the Butler-Volmer relation, LTI and time-varying
//! equivalent circuits, OCV/drift via Coulomb counting, and measurement
//! noise. Also hosts the combinatorial single-sine Volterra oracle.

use crate::ecm::{ecm_impedance_signed, EcmParams};
use crate::signals::TimeSeriesRecord;
use crate::spectra::{dft, idft_real, Spectrum};
use crate::{Error, Result};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;

pub const GAS_CONSTANT: f64 = 8.314; // J/(mol K)
pub const FARADAY: f64 = 96485.0; // C/mol

/// Butler-Volmer kinetics of a single electrode reaction.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ButlerVolmerParams {
    /// Exchange current density times electrode area, amperes.
    pub j0_s: f64,
    /// Absolute temperature, kelvin.
    pub t_kelvin: f64,
    /// Electrons transferred per reaction.
    pub n_electrons: u32,
    /// Anodic charge transfer coefficient.
    pub alpha_a: f64,
    /// Cathodic charge transfer coefficient.
    pub alpha_c: f64,
}

impl ButlerVolmerParams {
    pub fn validate(&self) -> Result<()> {
        if self.j0_s <= 0.0 || self.t_kelvin <= 0.0 || self.n_electrons < 1 {
            return Err(Error::invalid(
                "butler-volmer: j0*S and T must be positive, n >= 1",
            ));
        }
        if !(0.0..1.0).contains(&self.alpha_a) || !(0.0..1.0).contains(&self.alpha_c) {
            return Err(Error::invalid(
                "butler-volmer: transfer coefficients must lie in (0, 1)",
            ));
        }
        Ok(())
    }
}

/// Overpotential as a function of current for symmetric transfer
/// coefficients: `v = (2 R T / n F) asinh(i / (2 j0 S))`.
///
/// The closed-form inversion only exists for `alpha_a = alpha_c = 0.5`;
/// asymmetric coefficients are rejected.
pub fn butler_volmer_overpotential(i: f64, p: &ButlerVolmerParams) -> Result<f64> {
    p.validate()?;
    if (p.alpha_a - 0.5).abs() > 1e-12 || (p.alpha_c - 0.5).abs() > 1e-12 {
        return Err(Error::invalid(
            "butler-volmer: closed form requires alpha_a = alpha_c = 0.5",
        ));
    }
    let thermal = 2.0 * GAS_CONSTANT * p.t_kelvin / (p.n_electrons as f64 * FARADAY);
    Ok(thermal * (i / (2.0 * p.j0_s)).asinh())
}

/// Rest voltage model: either a constant OCV or a piecewise-linear
/// OCV-vs-SOC table with the SOC obtained by Coulomb counting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum OcvModel {
    Constant(f64),
    SocTable {
        /// SOC grid, ascending, in [0, 1].
        soc: Vec<f64>,
        /// OCV at each grid point, volts.
        ocv_v: Vec<f64>,
        /// Cell capacity in ampere-seconds.
        capacity_as: f64,
        /// SOC at the start of the record.
        initial_soc: f64,
    },
}

impl OcvModel {
    fn validate(&self) -> Result<()> {
        match self {
            OcvModel::Constant(_) => Ok(()),
            OcvModel::SocTable {
                soc,
                ocv_v,
                capacity_as,
                ..
            } => {
                if soc.len() < 2 || soc.len() != ocv_v.len() {
                    return Err(Error::invalid("ocv table: need matching grids, >= 2 points"));
                }
                if soc.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::invalid("ocv table: SOC grid must be increasing"));
                }
                if *capacity_as <= 0.0 {
                    return Err(Error::invalid("ocv table: capacity must be positive"));
                }
                Ok(())
            }
        }
    }

    /// OCV after `charge_as` ampere-seconds have flowed into the cell.
    pub fn voltage(&self, charge_as: f64) -> f64 {
        match self {
            OcvModel::Constant(v) => *v,
            OcvModel::SocTable {
                soc,
                ocv_v,
                capacity_as,
                initial_soc,
            } => {
                let s = (initial_soc + charge_as / capacity_as).clamp(soc[0], *soc.last().unwrap());
                let idx = soc.partition_point(|&g| g <= s).clamp(1, soc.len() - 1);
                let (s0, s1) = (soc[idx - 1], soc[idx]);
                let (v0, v1) = (ocv_v[idx - 1], ocv_v[idx]);
                v0 + (v1 - v0) * (s - s0) / (s1 - s0)
            }
        }
    }
}

/// A scalar circuit parameter evolving over the record duration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum ParamTrajectory {
    Constant(f64),
    /// Linear from `start` at t = 0 to `end` at the end of the record.
    Linear { start: f64, end: f64 },
}

impl ParamTrajectory {
    /// Value at normalized time `frac` in [0, 1].
    pub fn at(&self, frac: f64) -> f64 {
        match self {
            ParamTrajectory::Constant(v) => *v,
            ParamTrajectory::Linear { start, end } => start + (end - start) * frac,
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            ParamTrajectory::Constant(_) => true,
            ParamTrajectory::Linear { start, end } => start == end,
        }
    }
}

/// Equivalent-circuit parameters as trajectories over the record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EcmTrajectory {
    pub r0: ParamTrajectory,
    pub r1: ParamTrajectory,
    pub c1: ParamTrajectory,
    pub rct: ParamTrajectory,
    pub cct: ParamTrajectory,
    pub w: ParamTrajectory,
    pub alpha: ParamTrajectory,
    /// Substeps per sample for the time-domain branch integration.
    #[serde(default = "default_ode_refine")]
    pub ode_refine: usize,
}

fn default_ode_refine() -> usize {
    4
}

impl EcmTrajectory {
    pub fn constant(p: &EcmParams) -> Self {
        Self {
            r0: ParamTrajectory::Constant(p.r0),
            r1: ParamTrajectory::Constant(p.r1),
            c1: ParamTrajectory::Constant(p.c1),
            rct: ParamTrajectory::Constant(p.rct),
            cct: ParamTrajectory::Constant(p.cct),
            w: ParamTrajectory::Constant(p.w),
            alpha: ParamTrajectory::Constant(p.alpha),
            ode_refine: default_ode_refine(),
        }
    }

    /// Parameter snapshot at normalized time `frac` in [0, 1].
    pub fn params_at(&self, frac: f64) -> EcmParams {
        EcmParams {
            r0: self.r0.at(frac),
            r1: self.r1.at(frac),
            c1: self.c1.at(frac),
            rct: self.rct.at(frac),
            cct: self.cct.at(frac),
            w: self.w.at(frac),
            alpha: self.alpha.at(frac),
        }
    }

    fn validate(&self, duration: f64) -> Result<()> {
        if duration <= 0.0 {
            return Err(Error::invalid("trajectory: record duration must be positive"));
        }
        for frac in [0.0, 0.5, 1.0] {
            self.params_at(frac).validate()?;
        }
        if self.ode_refine < 1 {
            return Err(Error::invalid("trajectory: ode_refine must be >= 1"));
        }
        Ok(())
    }
}

/// The current-to-voltage map of the synthetic cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum CellVariant {
    /// `v = a1 i + a2 i^2 + a3 i^3`, applied pointwise.
    StaticPolynomial { a1: f64, a2: f64, a3: f64 },
    /// Butler-Volmer overpotential, applied pointwise.
    ButlerVolmerStatic(ButlerVolmerParams),
    /// Single parallel RC cell, `Z = R / (1 + j w R C)`.
    ParallelRc { r: f64, c: f64 },
    /// Full equivalent circuit with fixed parameters.
    EcmLti(EcmParams),
    /// Equivalent circuit with parameters moving along trajectories.
    EcmTimeVarying(EcmTrajectory),
}

/// A complete synthetic cell: response variant, rest-voltage model, and
/// per-channel measurement noise.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellModel {
    pub variant: CellVariant,
    pub ocv: OcvModel,
    /// Std of the Gaussian noise added to the measured current, amperes.
    pub noise_i: f64,
    /// Std of the Gaussian noise added to the measured voltage, volts.
    pub noise_v: f64,
}

impl CellModel {
    pub fn validate(&self) -> Result<()> {
        if self.noise_i < 0.0 || self.noise_v < 0.0 {
            return Err(Error::invalid("cell: noise stds must be non-negative"));
        }
        self.ocv.validate()
    }
}

/// Cumulative charge in ampere-seconds at each sample (trapezoidal).
fn cumulative_charge(current: &[f64], fs: f64) -> Vec<f64> {
    let dt = 1.0 / fs;
    let mut out = Vec::with_capacity(current.len());
    let mut acc = 0.0;
    for (idx, &i) in current.iter().enumerate() {
        if idx > 0 {
            acc += 0.5 * (current[idx - 1] + i) * dt;
        }
        out.push(acc);
    }
    out
}

/// Apply a frequency response to the zero-mean part of a periodic signal:
/// `v = IDFT(Z(w_k) I(k))` with the DC bin zeroed.
fn apply_frequency_response<F>(current: &[f64], fs: f64, z_of_omega: F) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Complex64,
{
    let spec = dft(current, fs)?;
    let n = spec.n;
    let nyq = spec.nyquist_bin();
    let mut bins = vec![Complex64::new(0.0, 0.0); n];
    for k in 1..=nyq {
        let omega = 2.0 * PI * spec.freq_hz(k);
        let v = z_of_omega(omega) * spec.bins[k];
        if k == nyq && n % 2 == 0 {
            bins[k] = Complex64::new(v.re, 0.0);
        } else {
            bins[k] = v;
            bins[n - k] = v.conj();
        }
    }
    idft_real(&Spectrum { n, fs, bins })
}

/// Significant spectral lines of the zero-mean part of the excitation,
/// used by the quasi-static time-varying branch evaluation.
fn significant_lines(spec: &Spectrum) -> Result<Vec<(usize, Complex64)>> {
    let nyq = spec.nyquist_bin();
    let max = (1..=nyq).map(|k| spec.bins[k].norm()).fold(0.0, f64::max);
    let lines: Vec<(usize, Complex64)> = (1..=nyq)
        .filter(|&k| spec.bins[k].norm() > 1e-9 * max)
        .map(|k| (k, spec.bins[k]))
        .collect();
    if lines.len() > 8192 {
        return Err(Error::invalid(
            "time-varying simulation: excitation has too many spectral lines for the \
             quasi-static branch evaluation (use a periodic multisine)",
        ));
    }
    Ok(lines)
}

/// First-order branch `C(t) du/dt = i - u / R(t)` integrated with the
/// trapezoidal rule, preceded by one warm-up period with frozen t = 0
/// parameters so the branch enters the record in steady state.
fn integrate_rc_branch(
    i_ac: &[f64],
    fs: f64,
    warmup_len: usize,
    r_of: impl Fn(f64) -> f64,
    c_of: impl Fn(f64) -> f64,
    refine: usize,
) -> Vec<f64> {
    let n = i_ac.len();
    let dt = 1.0 / (fs * refine as f64);
    let mut u = 0.0;

    let step = |u0: f64, i0: f64, i1: f64, r0: f64, r1: f64, cm: f64| -> f64 {
        let a = cm / dt + 0.5 / r1;
        let b = cm / dt - 0.5 / r0;
        (b * u0 + 0.5 * (i0 + i1)) / a
    };

    // warm-up with frozen parameters over the first period
    let r_init = r_of(0.0);
    let c_init = c_of(0.0);
    for idx in 0..warmup_len.min(n.saturating_sub(1)) {
        let (i0, i1) = (i_ac[idx], i_ac[idx + 1]);
        for s in 0..refine {
            let f0 = s as f64 / refine as f64;
            let f1 = (s + 1) as f64 / refine as f64;
            let ia = i0 + (i1 - i0) * f0;
            let ib = i0 + (i1 - i0) * f1;
            u = step(u, ia, ib, r_init, r_init, c_init);
        }
    }

    let total = (n - 1) as f64;
    let mut out = Vec::with_capacity(n);
    out.push(u);
    for idx in 0..n - 1 {
        let (i0, i1) = (i_ac[idx], i_ac[idx + 1]);
        for s in 0..refine {
            let f0 = (idx as f64 + s as f64 / refine as f64) / total;
            let f1 = (idx as f64 + (s + 1) as f64 / refine as f64) / total;
            let ia = i0 + (i1 - i0) * (s as f64 / refine as f64);
            let ib = i0 + (i1 - i0) * ((s + 1) as f64 / refine as f64);
            let cm = c_of(0.5 * (f0 + f1));
            u = step(u, ia, ib, r_of(f0), r_of(f1), cm);
        }
        out.push(u);
    }
    out
}

/// Simulate the measured voltage (and noisy current) of a cell driven by the
/// given excitation record.
///
/// The voltage is OCV/drift plus the cell response plus Gaussian noise; the
/// returned current is the excitation plus its own measurement noise (the
/// response is driven by the clean excitation). Equivalent-circuit variants
/// apply their impedance to the zero-mean part of the excitation in the
/// frequency domain; time-varying branches integrate a first-order ODE per
/// sample (kinetic branch) or evaluate a per-sample frozen-parameter
/// frequency response (diffusion branch), and constant branches take the
/// exact LTI path.
pub fn simulate_response(
    model: &CellModel,
    excitation: &TimeSeriesRecord,
    rng_seed: u64,
) -> Result<TimeSeriesRecord> {
    model.validate()?;
    if excitation.is_empty() {
        return Err(Error::invalid("simulate: empty excitation"));
    }
    if excitation.fs <= 0.0 {
        return Err(Error::invalid("simulate: fs must be positive"));
    }
    let current = &excitation.current;
    let n = current.len();
    let fs = excitation.fs;

    let response: Vec<f64> = match &model.variant {
        CellVariant::StaticPolynomial { a1, a2, a3 } => current
            .iter()
            .map(|&i| a1 * i + a2 * i * i + a3 * i * i * i)
            .collect(),
        CellVariant::ButlerVolmerStatic(p) => {
            p.validate()?;
            if (p.alpha_a - 0.5).abs() > 1e-12 || (p.alpha_c - 0.5).abs() > 1e-12 {
                return Err(Error::invalid(
                    "simulate: butler-volmer variant requires alpha_a = alpha_c = 0.5",
                ));
            }
            let thermal = 2.0 * GAS_CONSTANT * p.t_kelvin / (p.n_electrons as f64 * FARADAY);
            current
                .iter()
                .map(|&i| thermal * (i / (2.0 * p.j0_s)).asinh())
                .collect()
        }
        CellVariant::ParallelRc { r, c } => {
            if *r <= 0.0 || *c <= 0.0 {
                return Err(Error::invalid("simulate: R and C must be positive"));
            }
            let (r, c) = (*r, *c);
            apply_frequency_response(current, fs, move |w| r / Complex64::new(1.0, w * r * c))?
        }
        CellVariant::EcmLti(theta) => {
            theta.validate()?;
            let theta = *theta;
            apply_frequency_response(current, fs, move |w| ecm_impedance_signed(&theta, w))?
        }
        CellVariant::EcmTimeVarying(traj) => {
            let duration = n as f64 / fs;
            traj.validate(duration)?;
            let mean = current.iter().sum::<f64>() / n as f64;
            let i_ac: Vec<f64> = current.iter().map(|&i| i - mean).collect();
            let mut v = vec![0.0; n];

            // series resistance: memoryless
            if traj.r0.is_constant() {
                let r0 = traj.r0.at(0.0);
                for (vi, &i) in v.iter_mut().zip(&i_ac) {
                    *vi += r0 * i;
                }
            } else {
                let total = (n - 1) as f64;
                for (idx, (vi, &i)) in v.iter_mut().zip(&i_ac).enumerate() {
                    *vi += traj.r0.at(idx as f64 / total) * i;
                }
            }

            // kinetic branch Cct // Rct
            if traj.rct.is_constant() && traj.cct.is_constant() {
                let (r, c) = (traj.rct.at(0.0), traj.cct.at(0.0));
                let branch = apply_frequency_response(&i_ac, fs, move |w| {
                    r / Complex64::new(1.0, w * r * c)
                })?;
                for (vi, b) in v.iter_mut().zip(branch) {
                    *vi += b;
                }
            } else {
                let warmup = excitation
                    .spec
                    .as_ref()
                    .map(|s| s.samples_per_period())
                    .unwrap_or(n / excitation.n_periods.max(1) as usize)
                    .min(n - 1);
                let rct = traj.rct;
                let cct = traj.cct;
                let branch = integrate_rc_branch(
                    &i_ac,
                    fs,
                    warmup,
                    move |f| rct.at(f),
                    move |f| cct.at(f),
                    traj.ode_refine,
                );
                for (vi, b) in v.iter_mut().zip(branch) {
                    *vi += b;
                }
            }

            // diffusion branch C1 // (R1 + W)
            let diffusion_constant = traj.r1.is_constant()
                && traj.c1.is_constant()
                && traj.w.is_constant()
                && traj.alpha.is_constant();
            if diffusion_constant {
                let snap = traj.params_at(0.0);
                let branch = apply_frequency_response(&i_ac, fs, move |w| {
                    diffusion_branch(&snap, w)
                })?;
                for (vi, b) in v.iter_mut().zip(branch) {
                    *vi += b;
                }
            } else {
                // frozen parameters per sample, summed over the excitation lines
                let spec = dft(&i_ac, fs)?;
                let lines = significant_lines(&spec)?;
                let total = (n - 1) as f64;
                for (idx, vi) in v.iter_mut().enumerate() {
                    let snap = traj.params_at(idx as f64 / total);
                    let mut acc = 0.0;
                    for &(k, ik) in &lines {
                        let w = 2.0 * PI * spec.freq_hz(k);
                        let z = diffusion_branch(&snap, w);
                        let rot = Complex64::from_polar(
                            1.0,
                            2.0 * PI * (k * idx) as f64 / n as f64,
                        );
                        acc += 2.0 * (z * ik * rot).re;
                    }
                    *vi += acc;
                }
            }
            v
        }
    };

    let charge = cumulative_charge(current, fs);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut voltage = Vec::with_capacity(n);
    for (idx, r) in response.iter().enumerate() {
        let noise: f64 = rng.sample(StandardNormal);
        voltage.push(model.ocv.voltage(charge[idx]) + r + model.noise_v * noise);
    }
    let noisy_current: Vec<f64> = current
        .iter()
        .map(|&i| {
            let noise: f64 = rng.sample(StandardNormal);
            i + model.noise_i * noise
        })
        .collect();

    Ok(TimeSeriesRecord {
        fs,
        n_periods: excitation.n_periods,
        current: noisy_current,
        voltage,
        spec: excitation.spec.clone(),
    })
}

/// Impedance of the `C1 // (R1 + W)` branch alone.
fn diffusion_branch(p: &EcmParams, omega: f64) -> Complex64 {
    let jw = Complex64::new(0.0, omega);
    let z_c1 = 1.0 / (jw * p.c1);
    let mag = omega.abs().powf(p.alpha);
    let arg = p.alpha * PI / 2.0 * omega.signum();
    let z_w = p.w / Complex64::from_polar(mag, arg);
    let series = Complex64::new(p.r1, 0.0) + z_w;
    z_c1 * series / (z_c1 + series)
}

/// Harmonic phasors of a static-kernel Volterra series driven by a
/// zero-mean single sine `I cos(w t)`.
#[derive(Debug, Clone)]
pub struct SingleSineHarmonics {
    /// Fundamental angular frequency the phasors refer to, rad/s.
    pub omega: f64,
    /// Map `h -> V_h` with `v(t) = V_0 + sum_h |V_h| cos(h w t + arg V_h)`.
    pub phasors: BTreeMap<u32, Complex64>,
}

/// Combinatorial single-sine oracle for static (frequency-flat) Volterra
/// kernels: enumerates every sign vector in `{-1, 1}^n` and accumulates
///
/// ```text
/// V_{n,h} = |S_{n,h}| / 2^(n-1) * Z_n * I^n      (h > 0; 2^n at h = 0),
/// ```
///
/// where `S_{n,h}` is the set of sign vectors summing to `h`. Harmonics with
/// the wrong parity or `h > n` come out exactly zero.
pub fn volterra_single_sine_harmonics(
    kernels: &BTreeMap<u32, Complex64>,
    i_amp: f64,
    omega: f64,
) -> Result<SingleSineHarmonics> {
    let mut phasors: BTreeMap<u32, Complex64> = BTreeMap::new();
    for (&n, &z_n) in kernels {
        if n == 0 {
            return Err(Error::invalid("volterra oracle: kernel order 0 is not defined"));
        }
        if n > 12 {
            return Err(Error::invalid(
                "volterra oracle: kernel order above 12 (combinatorial explosion guard)",
            ));
        }
        let mut counts: BTreeMap<i64, u64> = BTreeMap::new();
        for mask in 0u64..(1u64 << n) {
            let sum: i64 = (0..n).map(|b| if mask >> b & 1 == 1 { 1 } else { -1 }).sum();
            *counts.entry(sum).or_insert(0) += 1;
        }
        let i_pow = i_amp.powi(n as i32);
        for (&h, &count) in counts.range(0..) {
            let factor = if h == 0 {
                1.0 / 2f64.powi(n as i32)
            } else {
                1.0 / 2f64.powi(n as i32 - 1)
            };
            let v = z_n * (count as f64 * factor * i_pow);
            *phasors.entry(h as u32).or_insert(Complex64::new(0.0, 0.0)) += v;
        }
    }
    Ok(SingleSineHarmonics { omega, phasors })
}
