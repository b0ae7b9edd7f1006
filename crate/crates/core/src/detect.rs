//! Detection of nonlinearity and nonstationarity from the voltage spectrum of
//! an ORP multisine experiment.
//!
//! Under odd-harmonic excitation measured over `P` periods, the voltage
//! spectrum separates cleanly: the linear response lives on the excited bins
//! `P * h_m`, even and odd nonlinear distortions on the remaining harmonic
//! multiples of `P` (split by parity of the multiple), nonstationary "skirts"
//! on the off-harmonic bins around the excited lines, and noise everywhere
//! else. Comparing the energy of each group against the local noise floor
//! classifies the record as LTI, NLTI, LTV or NLTV.

use crate::signals::{MultisineSpec, TimeSeriesRecord};
use crate::spectra::{dft, Spectrum};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

/// Classification of the system that produced a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SystemClass {
    /// Linear time-invariant: content only at DC and excited lines.
    Lti,
    /// Nonlinear time-invariant: content at non-excited harmonic multiples.
    Nlti,
    /// Linear time-varying: skirts around the excited lines.
    Ltv,
    /// Nonlinear time-varying: both distortions and skirts.
    Nltv,
}

impl std::fmt::Display for SystemClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SystemClass::Lti => "LTI",
            SystemClass::Nlti => "NLTI",
            SystemClass::Ltv => "LTV",
            SystemClass::Nltv => "NLTV",
        };
        write!(f, "{s}")
    }
}

/// Tuning of the classifier. The separation itself is structural; the numeric
/// margins here are engineering defaults and fully configurable.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DetectConfig {
    /// Detection margin in dB above the local noise floor, applied to each of
    /// the even, odd and skirt levels.
    pub threshold_db: f64,
    /// Harmonic multiples are inspected up to `nl_span_factor * h_max`.
    pub nl_span_factor: f64,
    /// Half-width of the skirt window around each excited line, in bins.
    /// Defaults to `floor(P/2)` when unset.
    pub skirt_halfwidth: Option<usize>,
    /// Minimum number of non-excluded bins per noise-floor band.
    pub floor_min_bins: usize,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            threshold_db: 6.0,
            nl_span_factor: 3.0,
            skirt_halfwidth: None,
            floor_min_bins: 8,
        }
    }
}

/// Robust per-band noise power estimate on log-spaced frequency bands.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseFloor {
    /// Band edges in bins, length `bands + 1`.
    pub band_edges: Vec<usize>,
    /// Estimated noise power (`E |N(k)|^2`) per band.
    pub power: Vec<f64>,
}

impl NoiseFloor {
    /// Floor at bin `k`, clamped to the nearest covered band.
    pub fn at(&self, k: usize) -> f64 {
        if self.power.is_empty() {
            return 0.0;
        }
        let mut idx = 0;
        for (i, w) in self.band_edges.windows(2).enumerate() {
            if k >= w[0] {
                idx = i;
            }
            if k < w[1] {
                break;
            }
        }
        self.power[idx]
    }
}

/// Per-harmonic signal-to-noise ratio at an excited line.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HarmonicSnr {
    pub harmonic: u32,
    pub bin: usize,
    pub freq_hz: f64,
    /// `|X(k)| / sqrt(floor(k))`; infinite on noiseless data.
    pub snr: f64,
}

/// Outcome of [`classify_record`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectionReport {
    pub classification: SystemClass,
    /// Median power of even non-excited harmonic bins relative to the floor, dB.
    pub even_nl_db: f64,
    /// Median power of odd non-excited harmonic bins relative to the floor, dB.
    pub odd_nl_db: f64,
    /// Median power of off-harmonic bins around the excited lines, dB vs floor.
    pub skirt_db: f64,
    /// True when the even distortion level exceeds the odd one.
    pub even_dominant: bool,
    pub noise_floor: NoiseFloor,
    pub snr_at_excited: Vec<HarmonicSnr>,
    /// Set when the floor underflowed and SNR values are infinite sentinels.
    pub infinite_snr: bool,
    pub threshold_db: f64,
}

/// Robust (median-based) noise power per log-spaced band over the
/// non-excluded bins of `[k_min, N/2]`.
///
/// The median of `|X|^2` over noise-only bins is scaled by `1/ln 2` to unbias
/// it for circular complex Gaussian noise.
pub fn noise_floor(
    spec: &Spectrum,
    exclusion: &HashSet<usize>,
    k_min: usize,
    min_bins: usize,
) -> Result<NoiseFloor> {
    let nyq = spec.nyquist_bin();
    let min_bins = min_bins.max(1);
    let mut edges = vec![k_min.max(1)];
    let mut powers = Vec::new();
    let mut cursor = k_min.max(1);
    while cursor <= nyq {
        // log-spaced bands: each 60% wider than the last, at least min_bins wide
        let mut hi = ((cursor as f64 * 1.6).ceil() as usize).max(cursor + min_bins);
        let mut bins: Vec<f64> = Vec::new();
        loop {
            hi = hi.min(nyq + 1);
            bins.extend(
                (cursor..hi)
                    .filter(|k| !exclusion.contains(k))
                    .map(|k| spec.bins[k].norm_sqr()),
            );
            if bins.len() >= min_bins || hi > nyq {
                break;
            }
            bins.clear();
            hi += min_bins;
        }
        if bins.len() < min_bins {
            if powers.is_empty() {
                return Err(Error::invalid(format!(
                    "noise floor: fewer than {min_bins} non-excluded bins available"
                )));
            }
            // tail too sparse: fold into the previous band
            break;
        }
        bins.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = bins[bins.len() / 2];
        powers.push(median / std::f64::consts::LN_2);
        edges.push(hi);
        cursor = hi;
    }
    *edges.last_mut().unwrap() = nyq + 1;
    Ok(NoiseFloor {
        band_edges: edges,
        power: powers,
    })
}

/// Per-harmonic SNR `|X(k)| / sqrt(floor(k))` at the excited bins.
///
/// A floor that underflows to zero yields an infinite sentinel, flagged by
/// the second return value.
pub fn snr_at_excited(
    spec: &Spectrum,
    floor: &NoiseFloor,
    excited: &[(u32, usize)],
) -> (Vec<HarmonicSnr>, bool) {
    let mut flagged = false;
    let out = excited
        .iter()
        .map(|&(harmonic, bin)| {
            let f = floor.at(bin);
            let snr = if f > 1e-280 {
                spec.bins[bin].norm() / f.sqrt()
            } else {
                flagged = true;
                f64::INFINITY
            };
            HarmonicSnr {
                harmonic,
                bin,
                freq_hz: spec.freq_hz(bin),
                snr,
            }
        })
        .collect();
    (out, flagged)
}

/// Bin groups used by the classifier, exposed for reuse by the estimators
/// (noise-floor exclusions, distortion accounting).
#[derive(Debug, Clone)]
pub struct BinPartition {
    pub excited: Vec<usize>,
    pub even_nl: Vec<usize>,
    pub odd_nl: Vec<usize>,
    pub skirt: Vec<usize>,
    /// Everything to exclude when estimating the noise floor: drift region,
    /// harmonic multiples and skirt windows.
    pub floor_exclusion: HashSet<usize>,
}

/// Partition the bins of a `P`-period record on the grid of `spec`.
pub fn partition_bins(spec: &MultisineSpec, p: u32, n: usize, cfg: &DetectConfig) -> BinPartition {
    let nyq = n / 2;
    let pp = p as usize;
    let excited: Vec<usize> = spec.excited_bins(p);
    let excited_set: HashSet<usize> = excited.iter().copied().collect();
    let h_max = *spec.excited_harmonics.last().unwrap() as usize;
    let j_max = ((cfg.nl_span_factor * h_max as f64).ceil() as usize).min(nyq / pp);

    let mut even_nl = Vec::new();
    let mut odd_nl = Vec::new();
    for j in 1..=j_max {
        let k = pp * j;
        if k > nyq || excited_set.contains(&k) {
            continue;
        }
        if j % 2 == 0 {
            even_nl.push(k);
        } else {
            odd_nl.push(k);
        }
    }

    let hw = cfg.skirt_halfwidth.unwrap_or(pp / 2).min(pp / 2).max(1);
    let mut skirt = Vec::new();
    for &ke in &excited {
        for k in ke.saturating_sub(hw)..=(ke + hw).min(nyq) {
            if k % pp != 0 {
                skirt.push(k);
            }
        }
    }
    skirt.sort_unstable();
    skirt.dedup();

    let mut floor_exclusion: HashSet<usize> = (0..pp.min(nyq + 1)).collect();
    floor_exclusion.extend((1..=nyq / pp).map(|j| j * pp));
    floor_exclusion.extend(skirt.iter().copied());
    BinPartition {
        excited,
        even_nl,
        odd_nl,
        skirt,
        floor_exclusion,
    }
}

fn level_db(spec: &Spectrum, bins: &[usize], floor: &NoiseFloor) -> f64 {
    if bins.is_empty() {
        return f64::NEG_INFINITY;
    }
    let mut ratios: Vec<f64> = bins
        .iter()
        .map(|&k| spec.bins[k].norm_sqr() / floor.at(k).max(1e-300))
        .collect();
    ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // median with the same 1/ln2 unbias as the floor, so noise-only
    // categories sit at 0 dB
    let median = ratios[ratios.len() / 2] / std::f64::consts::LN_2;
    10.0 * median.max(1e-300).log10()
}

/// Classify a measured record as LTI / NLTI / LTV / NLTV.
///
/// Requires at least two measured periods: with a single period the
/// non-excited DFT grid is empty and nonlinear distortions cannot be told
/// apart from nonstationarity.
pub fn classify_record(
    rec: &TimeSeriesRecord,
    spec: &MultisineSpec,
    cfg: &DetectConfig,
) -> Result<DetectionReport> {
    if rec.n_periods < 2 {
        return Err(Error::invalid(
            "classify: at least 2 periods are needed to separate nonlinearity from nonstationarity",
        ));
    }
    if rec.voltage.len() != rec.current.len() {
        return Err(Error::invalid("classify: record has no voltage channel"));
    }
    let expect = spec.samples_per_period() * rec.n_periods as usize;
    if rec.current.len() != expect {
        return Err(Error::invalid(format!(
            "classify: record length {} does not match P * Tp * fs = {expect}",
            rec.current.len()
        )));
    }

    let v = dft(&rec.voltage, rec.fs)?;
    let parts = partition_bins(spec, rec.n_periods, rec.current.len(), cfg);
    let floor = noise_floor(
        &v,
        &parts.floor_exclusion,
        rec.n_periods as usize,
        cfg.floor_min_bins,
    )?;

    let even_nl_db = level_db(&v, &parts.even_nl, &floor);
    let odd_nl_db = level_db(&v, &parts.odd_nl, &floor);
    let skirt_db = level_db(&v, &parts.skirt, &floor);

    let nl = even_nl_db >= cfg.threshold_db || odd_nl_db >= cfg.threshold_db;
    let tv = skirt_db >= cfg.threshold_db;
    let classification = match (nl, tv) {
        (false, false) => SystemClass::Lti,
        (true, false) => SystemClass::Nlti,
        (false, true) => SystemClass::Ltv,
        (true, true) => SystemClass::Nltv,
    };

    let excited_pairs: Vec<(u32, usize)> = spec
        .excited_harmonics
        .iter()
        .zip(&parts.excited)
        .map(|(&h, &k)| (h, k))
        .collect();
    let (snr, infinite_snr) = snr_at_excited(&v, &floor, &excited_pairs);

    Ok(DetectionReport {
        classification,
        even_nl_db,
        odd_nl_db,
        skirt_db,
        even_dominant: even_nl_db > odd_nl_db,
        noise_floor: floor,
        snr_at_excited: snr,
        infinite_snr,
        threshold_db: cfg.threshold_db,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::{design_multisine, render_multisine, AmplitudeProfile};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn orp_spec(seed: u64) -> MultisineSpec {
        design_multisine(
            1.0,
            15.0,
            6,
            1.0,
            128.0,
            AmplitudeProfile::Flat { rms: 1.0 },
            true,
            seed,
        )
        .unwrap()
    }

    /// Record with voltage = a1 i + a2 i^2 + a3 i^3 + white noise.
    fn poly_record(
        spec: &MultisineSpec,
        p: u32,
        a: (f64, f64, f64),
        sigma: f64,
        seed: u64,
    ) -> TimeSeriesRecord {
        let mut rec = render_multisine(spec, p, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rec.voltage = rec
            .current
            .iter()
            .map(|&i| {
                let clean = a.0 * i + a.1 * i * i + a.2 * i * i * i;
                let noise: f64 = rng.sample(rand_distr::StandardNormal);
                clean + sigma * noise
            })
            .collect();
        rec
    }

    #[test]
    fn linear_record_classified_lti() {
        let spec = orp_spec(1);
        let rec = poly_record(&spec, 8, (0.05, 0.0, 0.0), 1e-6, 2);
        let report = classify_record(&rec, &spec, &DetectConfig::default()).unwrap();
        assert_eq!(report.classification, SystemClass::Lti);
        assert!(report.even_nl_db < 6.0);
        assert!(report.odd_nl_db < 6.0);
        assert!(report.skirt_db < 6.0);
    }

    #[test]
    fn odd_nonlinearity_dominates_odd_lines() {
        let spec = orp_spec(3);
        let rec = poly_record(&spec, 8, (0.05, 0.0, 0.02), 1e-7, 4);
        let report = classify_record(&rec, &spec, &DetectConfig::default()).unwrap();
        assert_eq!(report.classification, SystemClass::Nlti);
        assert!(
            report.odd_nl_db > report.even_nl_db + 10.0,
            "odd {} dB vs even {} dB",
            report.odd_nl_db,
            report.even_nl_db
        );
        assert!(!report.even_dominant);
    }

    #[test]
    fn even_nonlinearity_dominates_even_lines() {
        let spec = orp_spec(5);
        let rec = poly_record(&spec, 8, (0.05, 0.02, 0.0), 1e-7, 6);
        let report = classify_record(&rec, &spec, &DetectConfig::default()).unwrap();
        assert_eq!(report.classification, SystemClass::Nlti);
        assert!(report.even_dominant);
        assert!(report.even_nl_db > 20.0);
        assert!(report.odd_nl_db < 3.0, "odd level {} dB", report.odd_nl_db);
    }

    #[test]
    fn classification_monotone_in_cubic_strength() {
        let spec = orp_spec(7);
        let cfg = DetectConfig::default();
        let mut was_nlti = false;
        for &a3 in &[1e-8, 1e-5, 1e-3, 1e-2, 1e-1] {
            let rec = poly_record(&spec, 8, (0.05, 0.0, a3), 1e-6, 8);
            let report = classify_record(&rec, &spec, &cfg).unwrap();
            let is_nlti = report.classification == SystemClass::Nlti;
            if was_nlti {
                assert!(is_nlti, "classification regressed to LTI at a3 = {a3}");
            }
            was_nlti = is_nlti;
        }
        assert!(was_nlti, "largest cubic should be detected");
    }

    #[test]
    fn classification_stable_over_phase_seeds() {
        let cfg = DetectConfig::default();
        let mut levels = Vec::new();
        // dense tone set: the 6th moment of the multisine concentrates, so
        // distortion levels barely move when the phases are redrawn
        for seed in 0..10 {
            let spec = design_multisine(
                1.0,
                255.0,
                64,
                1.0,
                1024.0,
                AmplitudeProfile::Flat { rms: 1.0 },
                true,
                seed,
            )
            .unwrap();
            let rec = poly_record(&spec, 8, (0.05, 0.0, 0.01), 1e-6, 100 + seed);
            let report = classify_record(&rec, &spec, &cfg).unwrap();
            assert_eq!(report.classification, SystemClass::Nlti, "seed {seed}");
            levels.push(report.odd_nl_db);
        }
        let max = levels.iter().cloned().fold(f64::MIN, f64::max);
        let min = levels.iter().cloned().fold(f64::MAX, f64::min);
        assert!(max - min < 3.0, "levels varied {min}..{max} dB over seeds");
    }

    #[test]
    fn rejects_single_period() {
        let spec = orp_spec(1);
        let rec = poly_record(&spec, 1, (0.05, 0.0, 0.0), 0.0, 0);
        assert!(classify_record(&rec, &spec, &DetectConfig::default()).is_err());
    }

    #[test]
    fn noise_floor_flat_for_white_noise() {
        // Monte-Carlo average of the banded floor against sigma^2 / N.
        let n = 4096;
        let sigma = 1e-3;
        let mut ratios = Vec::new();
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..n)
                .map(|_| sigma * rng.sample::<f64, _>(rand_distr::StandardNormal))
                .collect();
            let s = dft(&x, 1.0).unwrap();
            let floor = noise_floor(&s, &HashSet::new(), 1, 8).unwrap();
            let expect = sigma * sigma / n as f64;
            for &p in &floor.power {
                ratios.push(p / expect);
            }
        }
        let mean: f64 = ratios.iter().sum::<f64>() / ratios.len() as f64;
        assert!(
            mean > 0.5 && mean < 2.0,
            "floor/expected mean ratio {mean} outside factor 2"
        );
    }

    #[test]
    fn noise_floor_unchanged_by_excluded_multisine() {
        let spec = orp_spec(2);
        let p = 4;
        let sigma = 1e-4;
        let noisy = poly_record(&spec, p, (0.05, 0.0, 0.0), sigma, 11);
        let s = dft(&noisy.voltage, noisy.fs).unwrap();
        let parts = partition_bins(&spec, p, noisy.len(), &DetectConfig::default());
        let floor = noise_floor(&s, &parts.floor_exclusion, p as usize, 8).unwrap();

        // noise-only record, same seed
        let quiet = poly_record(&spec, p, (0.0, 0.0, 0.0), sigma, 11);
        let s2 = dft(&quiet.voltage, quiet.fs).unwrap();
        let floor2 = noise_floor(&s2, &HashSet::new(), p as usize, 8).unwrap();
        for k in [40usize, 100, 200] {
            let r = floor.at(k) / floor2.at(k);
            assert!((0.5..2.0).contains(&r), "bin {k}: ratio {r}");
        }
    }

    #[test]
    fn noiseless_floor_is_numerically_zero() {
        let spec = orp_spec(9);
        let rec = poly_record(&spec, 4, (0.05, 0.0, 0.0), 0.0, 0);
        let s = dft(&rec.voltage, rec.fs).unwrap();
        let parts = partition_bins(&spec, 4, rec.len(), &DetectConfig::default());
        let floor = noise_floor(&s, &parts.floor_exclusion, 4, 8).unwrap();
        for &p in &floor.power {
            assert!(p < 1e-18, "noiseless floor {p}");
        }
    }

    #[test]
    fn snr_sentinel_and_unit_point() {
        let spec = orp_spec(4);
        let rec = poly_record(&spec, 4, (0.05, 0.0, 0.0), 0.0, 0);
        let report = classify_record(&rec, &spec, &DetectConfig::default()).unwrap();
        assert!(report.infinite_snr);
        assert!(report.snr_at_excited.iter().all(|s| s.snr.is_infinite()));

        // |X|^2 equal to the floor gives SNR 1 by construction.
        let floor = NoiseFloor {
            band_edges: vec![1, 100],
            power: vec![4.0],
        };
        let s = Spectrum {
            n: 64,
            fs: 64.0,
            bins: vec![num_complex::Complex64::new(2.0, 0.0); 64],
        };
        let (snr, flagged) = snr_at_excited(&s, &floor, &[(1, 10)]);
        assert!(!flagged);
        assert!((snr[0].snr - 1.0).abs() < 1e-12);
    }

    #[test]
    fn snr_grows_with_sqrt_periods() {
        // P = 4 vs P = 16 raises the median SNR by about 2.
        let spec = orp_spec(6);
        let sigma = 5e-4;
        let mut ratios = Vec::new();
        for seed in 0..40 {
            let mut med = [0.0; 2];
            for (slot, &p) in [4u32, 16].iter().enumerate() {
                let rec = poly_record(&spec, p, (0.05, 0.0, 0.0), sigma, 1000 + seed);
                let report = classify_record(&rec, &spec, &DetectConfig::default()).unwrap();
                let mut snrs: Vec<f64> = report.snr_at_excited.iter().map(|s| s.snr).collect();
                snrs.sort_by(|a, b| a.partial_cmp(b).unwrap());
                med[slot] = snrs[snrs.len() / 2];
            }
            ratios.push(med[1] / med[0]);
        }
        ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median_ratio = ratios[ratios.len() / 2];
        assert!(
            (1.5..2.5).contains(&median_ratio),
            "median SNR ratio {median_ratio}, expected about 2"
        );
    }
}
