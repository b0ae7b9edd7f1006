//! Multisine excitation design and rendering, crest factor, and the Legendre
//! basis used by the time-varying estimators.

use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Amplitude rule for the designed harmonics, normalized to a requested
/// total RMS of the rendered multisine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AmplitudeProfile {
    /// Equal amplitude at every harmonic.
    Flat { rms: f64 },
    /// Amplitudes proportional to `1/sqrt(f)`, emphasizing low frequencies.
    InvSqrtF { rms: f64 },
}

/// A designed multisine excitation: harmonics of the fundamental `1/Tp` with
/// per-harmonic amplitudes and phases.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultisineSpec {
    /// Period of the multisine in seconds.
    pub period_tp: f64,
    /// Excited harmonic numbers, strictly increasing, all >= 1.
    pub excited_harmonics: Vec<u32>,
    /// Amplitude of each harmonic in amperes.
    pub amplitudes: Vec<f64>,
    /// Phase of each harmonic in radians, in `[0, 2 pi)`.
    pub phases: Vec<f64>,
    /// Sampling rate in samples/second.
    pub fs: f64,
    /// Seed used to draw the phases.
    pub rng_seed: u64,
}

impl MultisineSpec {
    /// Construct with full invariant checking.
    pub fn new(
        period_tp: f64,
        excited_harmonics: Vec<u32>,
        amplitudes: Vec<f64>,
        phases: Vec<f64>,
        fs: f64,
        rng_seed: u64,
    ) -> Result<Self> {
        let spec = Self {
            period_tp,
            excited_harmonics,
            amplitudes,
            phases,
            fs,
            rng_seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.period_tp <= 0.0 {
            return Err(Error::invalid("multisine: period must be positive"));
        }
        if self.excited_harmonics.is_empty() {
            return Err(Error::invalid("multisine: at least one harmonic required"));
        }
        if self.excited_harmonics.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(
                "multisine: harmonics must be strictly increasing (distinct)",
            ));
        }
        if self.excited_harmonics[0] < 1 {
            return Err(Error::invalid("multisine: harmonics must be positive"));
        }
        let m = self.excited_harmonics.len();
        if self.amplitudes.len() != m || self.phases.len() != m {
            return Err(Error::invalid(
                "multisine: amplitudes/phases must match harmonic count",
            ));
        }
        if self.phases.iter().any(|&p| !(0.0..2.0 * PI).contains(&p)) {
            return Err(Error::invalid("multisine: phases must lie in [0, 2 pi)"));
        }
        let h_max = *self.excited_harmonics.last().unwrap() as f64;
        if self.fs <= 2.0 * h_max / self.period_tp {
            return Err(Error::invalid(format!(
                "multisine: fs = {} violates Shannon-Nyquist for f_max = {}",
                self.fs,
                h_max / self.period_tp
            )));
        }
        let spp = self.period_tp * self.fs;
        if (spp - spp.round()).abs() > 1e-9 * spp.max(1.0) || spp.round() < 1.0 {
            return Err(Error::invalid(
                "multisine: Tp * fs must be a positive integer (integer samples per period)",
            ));
        }
        Ok(())
    }

    /// Samples per period, `Tp * fs`.
    pub fn samples_per_period(&self) -> usize {
        (self.period_tp * self.fs).round() as usize
    }

    /// True when every excited harmonic is odd (ORP-compatible grid).
    pub fn is_odd_only(&self) -> bool {
        self.excited_harmonics.iter().all(|h| h % 2 == 1)
    }

    /// Excited frequencies in Hz.
    pub fn frequencies_hz(&self) -> Vec<f64> {
        self.excited_harmonics
            .iter()
            .map(|&h| h as f64 / self.period_tp)
            .collect()
    }

    /// DFT bins of the excited lines in a record of `p` periods.
    pub fn excited_bins(&self, p: u32) -> Vec<usize> {
        self.excited_harmonics
            .iter()
            .map(|&h| (h * p) as usize)
            .collect()
    }
}

/// Uniformly sampled current/voltage record, `P` periods when a spec is
/// attached.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimeSeriesRecord {
    /// Samples per second.
    pub fs: f64,
    /// Number of whole excitation periods in the record.
    pub n_periods: u32,
    /// Current samples in amperes.
    pub current: Vec<f64>,
    /// Voltage samples in volts (may be empty for a pure excitation record).
    pub voltage: Vec<f64>,
    /// The excitation design that produced the current channel, if known.
    pub spec: Option<MultisineSpec>,
}

impl TimeSeriesRecord {
    pub fn len(&self) -> usize {
        self.current.len()
    }

    pub fn is_empty(&self) -> bool {
        self.current.is_empty()
    }

    /// Record duration in seconds.
    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.fs
    }

    /// Sample times in seconds.
    pub fn timestamps(&self) -> Vec<f64> {
        (0..self.len()).map(|i| i as f64 / self.fs).collect()
    }

    /// Checks the length contract `N = P * Tp * fs` against the attached spec.
    pub fn validate_against_spec(&self) -> Result<()> {
        if let Some(spec) = &self.spec {
            let expect = spec.samples_per_period() * self.n_periods as usize;
            if self.current.len() != expect {
                return Err(Error::invalid(format!(
                    "record length {} != P * Tp * fs = {}",
                    self.current.len(),
                    expect
                )));
            }
            if !self.voltage.is_empty() && self.voltage.len() != self.current.len() {
                return Err(Error::invalid("record: current/voltage length mismatch"));
            }
        }
        Ok(())
    }
}

/// Design a multisine over `[f_min, f_max]` with `n_freqs` logarithmically
/// spaced target frequencies rounded to admissible harmonics of `1/Tp`.
///
/// With `odd_only` set, only odd harmonics are admissible (the grid of
/// odd-random-phase excitation). A target that rounds onto an already used
/// harmonic is moved up to the next free admissible one; if the band is
/// exhausted the design returns fewer lines. Phases are drawn uniformly from
/// `[0, 2 pi)` with the given seed, reproducibly.
#[allow(clippy::too_many_arguments)]
pub fn design_multisine(
    f_min: f64,
    f_max: f64,
    n_freqs: usize,
    period_tp: f64,
    fs: f64,
    amplitude_profile: AmplitudeProfile,
    odd_only: bool,
    rng_seed: u64,
) -> Result<MultisineSpec> {
    if period_tp <= 0.0 || fs <= 0.0 {
        return Err(Error::invalid("design: Tp and fs must be positive"));
    }
    if f_min > f_max {
        return Err(Error::invalid("design: infeasible band, f_min > f_max"));
    }
    if n_freqs < 1 {
        return Err(Error::invalid("design: need at least one frequency"));
    }
    if f_min < 1.0 / period_tp * (1.0 - 1e-9) {
        return Err(Error::invalid(
            "design: f_min below the fundamental frequency 1/Tp",
        ));
    }
    if f_max > fs / 2.0 - 1.0 / period_tp {
        return Err(Error::invalid(
            "design: f_max too close to the Nyquist frequency",
        ));
    }

    let step = 2.0; // admissible harmonics spaced by 2 in ORP mode, 1 otherwise
    let round_admissible = |target: f64| -> u32 {
        if odd_only {
            // nearest odd integer >= 1
            let h = 2.0 * ((target - 1.0) / step).round() + 1.0;
            h.max(1.0) as u32
        } else {
            target.round().max(1.0) as u32
        }
    };
    let h_limit = (f_max * period_tp).floor() as u32 + 1;

    let lo = (f_min * period_tp).ln();
    let hi = (f_max * period_tp).ln();
    let mut harmonics: Vec<u32> = Vec::with_capacity(n_freqs);
    for i in 0..n_freqs {
        let frac = if n_freqs == 1 {
            0.0
        } else {
            i as f64 / (n_freqs - 1) as f64
        };
        let target = (lo + frac * (hi - lo)).exp();
        let mut h = round_admissible(target);
        // bump collided targets to the next free admissible harmonic
        while harmonics.contains(&h) {
            h += if odd_only { 2 } else { 1 };
        }
        if h > h_limit {
            log::warn!(
                "design: band exhausted after {} of {} requested lines",
                harmonics.len(),
                n_freqs
            );
            break;
        }
        harmonics.push(h);
    }
    harmonics.sort_unstable();
    harmonics.dedup();
    if harmonics.is_empty() {
        return Err(Error::invalid("design: no admissible harmonic in band"));
    }

    let raw: Vec<f64> = match amplitude_profile {
        AmplitudeProfile::Flat { .. } => vec![1.0; harmonics.len()],
        AmplitudeProfile::InvSqrtF { .. } => harmonics
            .iter()
            .map(|&h| 1.0 / (h as f64 / period_tp).sqrt())
            .collect(),
    };
    let rms_target = match amplitude_profile {
        AmplitudeProfile::Flat { rms } | AmplitudeProfile::InvSqrtF { rms } => rms,
    };
    if rms_target <= 0.0 {
        return Err(Error::invalid("design: RMS target must be positive"));
    }
    // multisine RMS^2 = sum I_m^2 / 2
    let raw_rms = (raw.iter().map(|a| a * a).sum::<f64>() / 2.0).sqrt();
    let amplitudes: Vec<f64> = raw.iter().map(|a| a * rms_target / raw_rms).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let phases: Vec<f64> = (0..harmonics.len())
        .map(|_| rng.gen_range(0.0..2.0 * PI))
        .collect();

    MultisineSpec::new(period_tp, harmonics, amplitudes, phases, fs, rng_seed)
}

/// Render `p` periods of the multisine current, optionally superimposed on a
/// sampled offset trajectory `i0` of length `p * Tp * fs`. The voltage
/// channel of the returned record is empty.
pub fn render_multisine(
    spec: &MultisineSpec,
    p: u32,
    i0: Option<&[f64]>,
) -> Result<TimeSeriesRecord> {
    spec.validate()?;
    if p < 1 {
        return Err(Error::invalid("render: need at least one period"));
    }
    let n = spec.samples_per_period() * p as usize;
    if let Some(traj) = i0 {
        if traj.len() != n {
            return Err(Error::invalid(format!(
                "render: offset trajectory length {} != P * Tp * fs = {}",
                traj.len(),
                n
            )));
        }
    }
    let spp = spec.samples_per_period() as f64;
    let mut current = vec![0.0; n];
    for ((&h, &amp), &phase) in spec
        .excited_harmonics
        .iter()
        .zip(&spec.amplitudes)
        .zip(&spec.phases)
    {
        let w = 2.0 * PI * h as f64 / spp;
        for (idx, c) in current.iter_mut().enumerate() {
            // index within the period keeps the rendering exactly periodic
            let n_in = (idx % spec.samples_per_period()) as f64;
            *c += amp * (w * n_in + phase).cos();
        }
    }
    if let Some(traj) = i0 {
        for (c, &o) in current.iter_mut().zip(traj) {
            *c += o;
        }
    }
    Ok(TimeSeriesRecord {
        fs: spec.fs,
        n_periods: p,
        current,
        voltage: Vec::new(),
        spec: Some(spec.clone()),
    })
}

/// Crest factor `max|x| / rms(x)`, at least 1 for any non-trivial signal.
pub fn crest_factor(x: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::invalid("crest factor: empty signal"));
    }
    let peak = x.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt();
    if rms <= 0.0 {
        return Err(Error::invalid("crest factor: all-zero signal"));
    }
    Ok(peak / rms)
}

/// Legendre polynomials rescaled to `[0, T]`: column `p` holds
/// `b_p(t) = L_p(2 t / T - 1)` evaluated at the given timestamps.
///
/// Returns `p_max + 1` columns; every value satisfies `|b_p(t)| <= 1`.
pub fn legendre_basis(p_max: usize, t_total: f64, timestamps: &[f64]) -> Result<Vec<Vec<f64>>> {
    if t_total <= 0.0 {
        return Err(Error::invalid("legendre basis: T must be positive"));
    }
    let tol = 1e-9 * t_total;
    for &t in timestamps {
        if t < -tol || t > t_total + tol {
            return Err(Error::invalid(format!(
                "legendre basis: timestamp {t} outside [0, {t_total}]"
            )));
        }
    }
    let mut cols = vec![vec![0.0; timestamps.len()]; p_max + 1];
    for (i, &t) in timestamps.iter().enumerate() {
        let x = (2.0 * t / t_total - 1.0).clamp(-1.0, 1.0);
        let mut prev = 1.0; // L_0
        let mut cur = x; // L_1
        cols[0][i] = prev;
        if p_max >= 1 {
            cols[1][i] = cur;
        }
        for p in 1..p_max {
            // (p+1) L_{p+1}(x) = (2p+1) x L_p(x) - p L_{p-1}(x)
            let next = ((2 * p + 1) as f64 * x * cur - p as f64 * prev) / (p + 1) as f64;
            prev = cur;
            cur = next;
            cols[p + 1][i] = cur;
        }
    }
    Ok(cols)
}
