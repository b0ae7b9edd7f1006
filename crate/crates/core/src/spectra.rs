//! Spectral primitives: DFT/IDFT with 1/N normalization, Gaussian windows
//! for short-time analysis, and quadrature band filters for complex envelope
//! extraction.
//!
//! The DFT convention used throughout the crate is
//!
//! ```text
//! X(k) = (1/N) sum_n x(n) exp(-j 2 pi k n / N),   f_k = k * fs / N,
//! ```
//!
//! so the line of a cosine of amplitude `A` measured over an integer number
//! of periods has magnitude `A/2`, independent of the record length.

use crate::{Error, Result};
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;

/// Complex spectrum on the grid `f_k = k * fs / N`.
#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Number of time-domain samples the spectrum was computed from.
    pub n: usize,
    /// Sampling rate in Hz.
    pub fs: f64,
    /// DFT bins, `bins[k]` at frequency `k * fs / n`.
    pub bins: Vec<Complex64>,
}

impl Spectrum {
    /// Frequency of bin `k` in Hz.
    pub fn freq_hz(&self, k: usize) -> f64 {
        k as f64 * self.fs / self.n as f64
    }

    /// Record duration in seconds.
    pub fn duration_s(&self) -> f64 {
        self.n as f64 / self.fs
    }

    /// Spacing between adjacent bins in Hz (`1/T`).
    pub fn bin_spacing_hz(&self) -> f64 {
        self.fs / self.n as f64
    }

    /// Spacing between adjacent bins in rad/s.
    pub fn bin_spacing_rad(&self) -> f64 {
        2.0 * PI * self.bin_spacing_hz()
    }

    /// Index of the highest non-negative frequency bin (`floor(N/2)`).
    pub fn nyquist_bin(&self) -> usize {
        self.n / 2
    }
}

/// Forward DFT of a real signal with 1/N normalization.
pub fn dft(x: &[f64], fs: f64) -> Result<Spectrum> {
    if x.is_empty() {
        return Err(Error::invalid("dft: empty input"));
    }
    if fs <= 0.0 {
        return Err(Error::invalid("dft: fs must be positive"));
    }
    let n = x.len();
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    for b in buf.iter_mut() {
        *b *= scale;
    }
    Ok(Spectrum { n, fs, bins: buf })
}

/// Forward DFT of a complex signal with 1/N normalization.
pub fn dft_complex(x: &[Complex64], fs: f64) -> Result<Spectrum> {
    if x.is_empty() {
        return Err(Error::invalid("dft: empty input"));
    }
    let n = x.len();
    let mut buf = x.to_vec();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    for b in buf.iter_mut() {
        *b *= scale;
    }
    Ok(Spectrum { n, fs, bins: buf })
}

/// Inverse DFT. Exact inverse of [`dft`] under the 1/N convention; the output
/// is complex so that asymmetric (quadrature) spectra are representable.
pub fn idft(spec: &Spectrum) -> Result<Vec<Complex64>> {
    if spec.bins.is_empty() {
        return Err(Error::invalid("idft: empty spectrum"));
    }
    let mut buf = spec.bins.clone();
    FftPlanner::new()
        .plan_fft_inverse(spec.n)
        .process(&mut buf);
    Ok(buf)
}

/// Inverse DFT of a conjugate-symmetric spectrum, returning the real part.
pub fn idft_real(spec: &Spectrum) -> Result<Vec<f64>> {
    Ok(idft(spec)?.into_iter().map(|c| c.re).collect())
}

/// Sampled Gaussian window `w(t) = exp(-lambda/2 * t^2)` centered on the
/// middle sample; length `2*half_width + 1`, peak value 1.
pub fn stft_window_gaussian(lambda: f64, half_width: usize, fs: f64) -> Result<Vec<f64>> {
    if lambda <= 0.0 {
        return Err(Error::invalid("gaussian window: lambda must be positive"));
    }
    if fs <= 0.0 {
        return Err(Error::invalid("gaussian window: fs must be positive"));
    }
    let n = 2 * half_width + 1;
    Ok((0..n)
        .map(|i| {
            let t = (i as f64 - half_width as f64) / fs;
            (-0.5 * lambda * t * t).exp()
        })
        .collect())
}

/// Time and frequency variances of a sampled window, about its center.
///
/// Returns `(sigma_t^2, sigma_omega^2)`; their product is bounded below by
/// 1/4 (Gabor limit), with equality for the Gaussian window. The frequency
/// variance is computed from a zero-padded DFT of the window.
pub fn window_gabor_product(w: &[f64], fs: f64) -> Result<(f64, f64)> {
    if w.is_empty() {
        return Err(Error::invalid("window_gabor_product: empty window"));
    }
    let n = w.len();
    let center = (n - 1) as f64 / 2.0;
    let mut num_t = 0.0;
    let mut den = 0.0;
    for (i, &wi) in w.iter().enumerate() {
        let t = (i as f64 - center) / fs;
        num_t += t * t * wi * wi;
        den += wi * wi;
    }
    if den <= 0.0 {
        return Err(Error::invalid("window_gabor_product: all-zero window"));
    }
    let sigma_t2 = num_t / den;

    // Dense spectrum by zero padding; 32x oversampling resolves the main lobe.
    let pad = (32 * n).next_power_of_two();
    let mut buf = vec![Complex64::new(0.0, 0.0); pad];
    for (i, &wi) in w.iter().enumerate() {
        buf[i] = Complex64::new(wi, 0.0);
    }
    FftPlanner::new().plan_fft_forward(pad).process(&mut buf);
    let mut num_w = 0.0;
    let mut den_w = 0.0;
    for (k, b) in buf.iter().enumerate() {
        let kk = if k <= pad / 2 {
            k as f64
        } else {
            k as f64 - pad as f64
        };
        let omega = 2.0 * PI * kk * fs / pad as f64;
        let p = b.norm_sqr();
        num_w += omega * omega * p;
        den_w += p;
    }
    Ok((sigma_t2, num_w / den_w))
}

/// Quadrature filter for complex demodulation of a frequency band.
///
/// `W(omega) = (1 + e^{-q^2})^2 / ((1 + e^{-q (omega+dw)/dw}) (1 + e^{q (omega-dw)/dw}))`
/// approaches a unit brick-wall of half-width `delta_omega` as `q` grows.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct QuadratureFilter {
    /// Roll-off steepness; larger is closer to an ideal rectangle.
    pub q: f64,
    /// Half bandwidth in rad/s.
    pub delta_omega: f64,
    /// Width of the extracted band in bins (even, at least 2).
    pub n_w: usize,
}

impl QuadratureFilter {
    pub fn new(q: f64, delta_omega: f64, n_w: usize) -> Result<Self> {
        if q <= 0.0 {
            return Err(Error::invalid("quadrature filter: q must be positive"));
        }
        if delta_omega <= 0.0 {
            return Err(Error::invalid(
                "quadrature filter: delta_omega must be positive",
            ));
        }
        if n_w < 2 || n_w % 2 != 0 {
            return Err(Error::invalid(
                "quadrature filter: n_w must be even and at least 2",
            ));
        }
        Ok(Self { q, delta_omega, n_w })
    }

    /// Filter response at angular frequency offset `omega` from the band center.
    pub fn response(&self, omega: f64) -> f64 {
        let q = self.q;
        let dw = self.delta_omega;
        let num = (1.0 + (-q * q).exp()).powi(2);
        let d1 = 1.0 + (-q * (omega + dw) / dw).exp();
        let d2 = 1.0 + (q * (omega - dw) / dw).exp();
        let den = d1 * d2;
        if den.is_infinite() {
            0.0
        } else {
            num / den
        }
    }
}

/// Filter weights sampled on the DFT grid: offsets `-n_w/2 ..= n_w/2 - 1`
/// scaled by `bin_spacing` rad/s.
pub fn quadrature_filter_weights(filt: &QuadratureFilter, bin_spacing: f64) -> Vec<f64> {
    let half = (filt.n_w / 2) as i64;
    (-half..half)
        .map(|d| filt.response(d as f64 * bin_spacing))
        .collect()
}

/// Gaussian filter weights `exp(-omega^2 / (2 lambda))` on the same grid; the
/// frequency-domain match of [`stft_window_gaussian`]. Any overall scale
/// cancels in envelope ratios.
pub fn gaussian_filter_weights(lambda: f64, n_w: usize, bin_spacing: f64) -> Vec<f64> {
    let half = (n_w / 2) as i64;
    (-half..half)
        .map(|d| {
            let omega = d as f64 * bin_spacing;
            (-omega * omega / (2.0 * lambda)).exp()
        })
        .collect()
}

/// Complex demodulated envelope of the band around `center_k`.
///
/// Implements the inverse DFT of a filtered frequency-domain subrecord,
///
/// ```text
/// x(m) = sum_{k'} W(k' - center_k) X(k') exp(j 2 pi k' m / N_W),
/// ```
///
/// for `m = 0..N_W`, i.e. the band-limited signal evaluated at `N_W` times
/// uniformly covering the full record duration. Bands that would cross DC or
/// the Nyquist bin are rejected rather than wrapped.
pub fn band_extract(
    spec: &Spectrum,
    center_k: usize,
    filt: &QuadratureFilter,
) -> Result<Vec<Complex64>> {
    let weights = quadrature_filter_weights(filt, spec.bin_spacing_rad());
    band_extract_weights(spec, center_k, &weights)
}

/// [`band_extract`] with caller-supplied weights, `weights[i]` applying to
/// bin offset `i - weights.len()/2`. The weight count must be even.
pub fn band_extract_weights(
    spec: &Spectrum,
    center_k: usize,
    weights: &[f64],
) -> Result<Vec<Complex64>> {
    let n_w = weights.len();
    if n_w < 2 || n_w % 2 != 0 {
        return Err(Error::invalid("band extract: weight count must be even, >= 2"));
    }
    let half = n_w / 2;
    if center_k < half || center_k - half < 1 {
        return Err(Error::invalid(format!(
            "band extract: band around bin {center_k} crosses DC"
        )));
    }
    if center_k + half - 1 > spec.nyquist_bin() {
        return Err(Error::invalid(format!(
            "band extract: band around bin {center_k} crosses the Nyquist bin"
        )));
    }
    let lo = center_k - half;
    let mut band: Vec<Complex64> = (0..n_w)
        .map(|i| spec.bins[lo + i] * weights[i])
        .collect();
    // x(m) = sum_i band[i] e^{j 2 pi (lo+i) m / n_w}
    //      = e^{j 2 pi lo m / n_w} * IDFT_{n_w}(band)(m)
    FftPlanner::new().plan_fft_inverse(n_w).process(&mut band);
    let rot = 2.0 * PI * lo as f64 / n_w as f64;
    Ok(band
        .into_iter()
        .enumerate()
        .map(|(m, v)| v * Complex64::from_polar(1.0, rot * m as f64))
        .collect())
}

/// Largest even band width (in bins) whose half-width stays strictly inside
/// the gap to the nearest excited neighbour line, DC, and Nyquist.
pub fn default_band_bins(excited_bins: &[usize], n: usize) -> Result<usize> {
    if excited_bins.is_empty() {
        return Err(Error::invalid("default_band_bins: no excited bins"));
    }
    let mut sorted = excited_bins.to_vec();
    sorted.sort_unstable();
    let mut gap = sorted[0]; // distance to DC
    for w in sorted.windows(2) {
        gap = gap.min(w[1] - w[0]);
    }
    gap = gap.min(n / 2 - sorted[sorted.len() - 1]);
    if gap < 3 {
        return Err(Error::invalid(
            "default_band_bins: excited lines too closely spaced for band extraction",
        ));
    }
    Ok(((gap - 1) / 2) * 2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cos_signal(n: usize, cycles: f64, amp: f64, phase: f64) -> Vec<f64> {
        (0..n)
            .map(|i| amp * (2.0 * PI * cycles * i as f64 / n as f64 + phase).cos())
            .collect()
    }

    #[test]
    fn dft_of_constant_is_dc_only() {
        let x = vec![3.25; 40];
        let s = dft(&x, 10.0).unwrap();
        assert!((s.bins[0].re - 3.25).abs() < 1e-12);
        assert!(s.bins[0].im.abs() < 1e-12);
        for k in 1..40 {
            assert!(s.bins[k].norm() < 1e-12, "bin {k} not empty");
        }
    }

    #[test]
    fn dft_of_unit_cosine_n8() {
        let x = cos_signal(8, 1.0, 1.0, 0.0);
        let s = dft(&x, 8.0).unwrap();
        assert!((s.bins[1] - Complex64::new(0.5, 0.0)).norm() < 1e-12);
        assert!((s.bins[7] - Complex64::new(0.5, 0.0)).norm() < 1e-12);
        for k in [0usize, 2, 3, 4, 5, 6] {
            assert!(s.bins[k].norm() < 1e-12);
        }
    }

    #[test]
    fn dft_two_tone_matches_direct_sum_oracle() {
        // Direct O(N^2) evaluation of the DFT definition as independent oracle.
        let n = 64;
        let x: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / n as f64;
                (2.0 * PI * t).cos() + (2.0 * PI * 3.0 * t).cos()
            })
            .collect();
        let s = dft(&x, 64.0).unwrap();
        for k in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for (i, &xi) in x.iter().enumerate() {
                acc += xi * Complex64::from_polar(1.0, -2.0 * PI * (k * i) as f64 / n as f64);
            }
            acc /= n as f64;
            assert!((s.bins[k] - acc).norm() < 1e-12, "bin {k}");
        }
        assert!((s.bins[1].norm() - 0.5).abs() < 1e-12);
        assert!((s.bins[3].norm() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn idft_dc_only_gives_constant() {
        let s = Spectrum {
            n: 16,
            fs: 4.0,
            bins: {
                let mut b = vec![Complex64::new(0.0, 0.0); 16];
                b[0] = Complex64::new(-1.5, 0.0);
                b
            },
        };
        let x = idft_real(&s).unwrap();
        for v in x {
            assert!((v + 1.5).abs() < 1e-12);
        }
    }

    #[test]
    fn idft_one_sided_line_gives_complex_exponential() {
        let n = 32;
        let mut bins = vec![Complex64::new(0.0, 0.0); n];
        bins[1] = Complex64::new(0.5, 0.0);
        let s = Spectrum { n, fs: 32.0, bins };
        let x = idft(&s).unwrap();
        for (m, v) in x.iter().enumerate() {
            let expect = 0.5 * Complex64::from_polar(1.0, 2.0 * PI * m as f64 / n as f64);
            assert!((v - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn round_trip_random_vector() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let x: Vec<f64> = (0..128).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s = dft(&x, 100.0).unwrap();
        let back = idft_real(&s).unwrap();
        let max_err = x
            .iter()
            .zip(&back)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max_err < 1e-10, "round trip error {max_err}");
    }

    #[test]
    fn conjugate_symmetry_for_real_input() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..50).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let s = dft(&x, 10.0).unwrap();
        for k in 1..50 {
            assert!((s.bins[50 - k] - s.bins[k].conj()).norm() < 1e-12);
        }
    }

    #[test]
    fn parseval_identity() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..200).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s = dft(&x, 1.0).unwrap();
        let time: f64 = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        let freq: f64 = s.bins.iter().map(|b| b.norm_sqr()).sum();
        assert!((time - freq).abs() / time < 1e-10);
    }

    #[test]
    fn gaussian_window_peak_and_symmetry() {
        let w = stft_window_gaussian(4.0, 100, 50.0).unwrap();
        assert_eq!(w.len(), 201);
        assert!((w[100] - 1.0).abs() < 1e-15);
        for i in 0..100 {
            assert!((w[i] - w[200 - i]).abs() < 1e-15);
        }
        assert!(stft_window_gaussian(0.0, 10, 50.0).is_err());
    }

    #[test]
    fn gaussian_window_transform_matches_analytic() {
        // Numeric DTFT (Riemann sum) against W(omega) = sqrt(2 pi / lambda) e^{-omega^2/(2 lambda)}.
        let lambda = 25.0_f64;
        let fs = 200.0;
        let half = (7.0 / lambda.sqrt() * fs).ceil() as usize;
        let w = stft_window_gaussian(lambda, half, fs).unwrap();
        let ts = 1.0 / fs;
        for &omega in &[0.0, 1.0, 2.5, 5.0] {
            let mut acc = Complex64::new(0.0, 0.0);
            for (i, &wi) in w.iter().enumerate() {
                let t = (i as f64 - half as f64) * ts;
                acc += wi * Complex64::from_polar(1.0, -omega * t);
            }
            let numeric = acc.re * ts;
            let analytic = (2.0 * PI / lambda).sqrt() * (-omega * omega / (2.0 * lambda)).exp();
            assert!(
                (numeric - analytic).abs() / analytic < 1e-6,
                "omega={omega}: numeric {numeric} vs analytic {analytic}"
            );
        }
    }

    #[test]
    fn gabor_product_of_gaussian_is_quarter() {
        let lambda = 9.0_f64;
        let fs = 100.0;
        let half = (8.0 / lambda.sqrt() * fs).ceil() as usize;
        let w = stft_window_gaussian(lambda, half, fs).unwrap();
        let (st2, sw2) = window_gabor_product(&w, fs).unwrap();
        let prod = st2 * sw2;
        assert!(
            (prod - 0.25).abs() < 1e-4,
            "sigma_t^2 sigma_w^2 = {prod}, expected 0.25"
        );
        // Doubling lambda halves the time variance.
        let w2 = stft_window_gaussian(2.0 * lambda, half, fs).unwrap();
        let (st2b, _) = window_gabor_product(&w2, fs).unwrap();
        assert!((st2b / st2 - 0.5).abs() < 1e-3);
    }

    #[test]
    fn gabor_inequality_for_other_windows() {
        // Hann-like raised cosine also satisfies the lower bound.
        let n = 401;
        let w: Vec<f64> = (0..n)
            .map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / (n - 1) as f64).cos()))
            .collect();
        let (st2, sw2) = window_gabor_product(&w, 100.0).unwrap();
        assert!(st2 * sw2 >= 0.25 - 1e-6);
    }

    #[test]
    fn quadrature_filter_frozen_values() {
        // Direct evaluation of the filter expression, frozen.
        let f = QuadratureFilter::new(5.0, 2.0, 8).unwrap();
        let w0 = f.response(0.0);
        let expected0 = (1.0 + (-25.0f64).exp()).powi(2)
            / ((1.0 + (-5.0f64).exp()) * (1.0 + (-5.0f64).exp()));
        assert!((w0 - expected0).abs() < 1e-12);
        assert!((w0 - 0.986_658_93).abs() < 1e-6);
        assert!((w0 - 1.0).abs() < 0.02);

        // Band edge: denominator (1 + e^{-2q}) * 2.
        let wedge = f.response(2.0);
        assert!((wedge - 0.5).abs() < 0.02);

        // Brick-wall limit far outside the band.
        let sharp = QuadratureFilter::new(50.0, 2.0, 8).unwrap();
        assert!(sharp.response(3.0) < 1e-10);
        assert!((sharp.response(0.0) - 1.0).abs() < 1e-12);
        assert!((sharp.response(-1.0) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn filter_decays_monotonically_outside_band() {
        let f = QuadratureFilter::new(5.0, 1.0, 8).unwrap();
        let mut prev = f.response(1.0);
        for i in 1..40 {
            let w = f.response(1.0 + i as f64 * 0.25);
            assert!(w <= prev + 1e-15);
            prev = w;
        }
    }

    #[test]
    fn band_extract_stationary_line_constant_envelope() {
        let n = 256;
        let mut bins = vec![Complex64::new(0.0, 0.0); n];
        let center = 32;
        bins[center] = Complex64::new(0.3, -0.4);
        let s = Spectrum { n, fs: 256.0, bins };
        let filt = QuadratureFilter::new(50.0, 4.0 * s.bin_spacing_rad(), 16).unwrap();
        let env = band_extract(&s, center, &filt).unwrap();
        assert_eq!(env.len(), 16);
        for v in &env {
            assert!((v.norm() - 0.5).abs() < 1e-9, "magnitude {}", v.norm());
        }
    }

    #[test]
    fn band_extract_zero_band_is_zero() {
        let n = 128;
        let s = Spectrum {
            n,
            fs: 64.0,
            bins: vec![Complex64::new(0.0, 0.0); n],
        };
        let filt = QuadratureFilter::new(10.0, 2.0, 8).unwrap();
        let env = band_extract(&s, 20, &filt).unwrap();
        assert!(env.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn band_extract_rejects_dc_and_nyquist_crossings() {
        let n = 128;
        let s = Spectrum {
            n,
            fs: 64.0,
            bins: vec![Complex64::new(0.0, 0.0); n],
        };
        let filt = QuadratureFilter::new(10.0, 2.0, 16).unwrap();
        assert!(band_extract(&s, 4, &filt).is_err());
        assert!(band_extract(&s, 62, &filt).is_err());
        assert!(band_extract(&s, 32, &filt).is_ok());
    }

    #[test]
    fn band_extract_tracks_amplitude_modulation() {
        // (1 + 0.1 b1(t)) cos(w_k t) with b1(t) = 2t/T - 1; the envelope
        // magnitude must follow the modulation away from the record edges.
        let n = 4096;
        let fs = 1.0;
        let carrier = 512; // cycles over the record
        let x: Vec<f64> = (0..n)
            .map(|i| {
                let frac = i as f64 / n as f64;
                let b1 = 2.0 * frac - 1.0;
                (1.0 + 0.1 * b1) * (2.0 * PI * carrier as f64 * frac).cos()
            })
            .collect();
        let s = dft(&x, fs).unwrap();
        let n_w = 128;
        let filt =
            QuadratureFilter::new(30.0, (n_w as f64 / 2.2) * s.bin_spacing_rad(), n_w).unwrap();
        let env = band_extract(&s, carrier, &filt).unwrap();
        for (m, v) in env.iter().enumerate() {
            let frac = m as f64 / n_w as f64;
            if !(0.15..0.85).contains(&frac) {
                continue;
            }
            let expect = 0.5 * (1.0 + 0.1 * (2.0 * frac - 1.0));
            let rel = (v.norm() - expect).abs() / expect;
            assert!(rel < 0.01, "m={m}: |env|={} expect {expect}", v.norm());
        }
    }

    #[test]
    fn dft_linearity() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (a, b) = (2.5, -1.25);
        let combo: Vec<f64> = x.iter().zip(&y).map(|(xi, yi)| a * xi + b * yi).collect();
        let sx = dft(&x, 1.0).unwrap();
        let sy = dft(&y, 1.0).unwrap();
        let sc = dft(&combo, 1.0).unwrap();
        for k in 0..64 {
            let expect = sx.bins[k] * a + sy.bins[k] * b;
            assert!((sc.bins[k] - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn default_band_width_stays_inside_gaps() {
        // Excited bins 40, 80, 200 on a 1024-bin grid: min gap 40.
        let nw = default_band_bins(&[40, 80, 200], 1024).unwrap();
        assert_eq!(nw % 2, 0);
        assert!(nw <= 39);
        assert!(nw >= 36);
    }
}
