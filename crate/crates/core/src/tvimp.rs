//! Time-varying impedance estimation: short-time Fourier analysis (STFT),
//! dynamic multi-frequency analysis (DMFA, quadrature filtering of the
//! full-record spectrum), and operando estimation by least squares on a
//! Legendre expansion with explicit drift and distortion terms.

use crate::classical::{EstimatorMeta, ImpedanceCurve};
use crate::signals::{legendre_basis, MultisineSpec, TimeSeriesRecord};
use crate::spectra::{
    band_extract_weights, dft, gaussian_filter_weights, quadrature_filter_weights,
    stft_window_gaussian, QuadratureFilter, Spectrum,
};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Impedance surface `Z(w_m, t_l)` on an excited-frequency by time grid.
/// Cells the estimator could not produce are masked (`None`), never
/// zero-filled.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimeVaryingImpedance {
    pub frequencies: Vec<f64>,
    pub times: Vec<f64>,
    /// `values[m][l]` at frequency `m`, time `l`.
    pub values: Vec<Vec<Option<Complex64>>>,
    /// Circular per-component std, same layout, when available.
    pub std: Option<Vec<Vec<Option<f64>>>>,
    pub method: String,
    /// `(N_p, N_q)` for the operando estimator.
    pub basis_order: Option<(usize, usize)>,
}

impl TimeVaryingImpedance {
    /// The frequency slice nearest to time `t` as an impedance curve
    /// (unmasked points only).
    pub fn slice_at_time(&self, t: f64) -> Result<ImpedanceCurve> {
        if self.times.is_empty() {
            return Err(Error::invalid("time-varying impedance: no time grid"));
        }
        let l = self
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (a.1 - t).abs().partial_cmp(&(b.1 - t).abs()).unwrap()
            })
            .map(|(i, _)| i)
            .unwrap();
        let mut frequencies = Vec::new();
        let mut values = Vec::new();
        let mut std = self.std.as_ref().map(|_| Vec::new());
        for (m, &f) in self.frequencies.iter().enumerate() {
            if let Some(z) = self.values[m][l] {
                frequencies.push(f);
                values.push(z);
                if let (Some(out), Some(grid)) = (std.as_mut(), self.std.as_ref()) {
                    out.push(grid[m][l].unwrap_or(f64::NAN));
                }
            }
        }
        if frequencies.is_empty() {
            return Err(Error::invalid(format!(
                "time-varying impedance: slice at t = {t} is fully masked"
            )));
        }
        Ok(ImpedanceCurve {
            frequencies,
            values,
            std,
            meta: EstimatorMeta {
                estimator: format!("{}-slice", self.method),
                periods: 0,
                source: None,
            },
        })
    }
}

fn validate_record(rec: &TimeSeriesRecord, spec: &MultisineSpec) -> Result<(usize, u32)> {
    let p = rec.n_periods;
    let expect = spec.samples_per_period() * p as usize;
    if rec.current.len() != expect {
        return Err(Error::invalid(format!(
            "record length {} does not match P * Tp * fs = {expect}",
            rec.current.len()
        )));
    }
    if rec.voltage.len() != rec.current.len() {
        return Err(Error::invalid("record has no voltage channel"));
    }
    Ok((rec.current.len(), p))
}

/// Short-time Fourier impedance: Gaussian-windowed subrecords of `n_w + 1`
/// samples centered on interior samples, ratioed at the exact excited
/// frequencies.
///
/// Frequencies whose period does not fit inside the window are masked with a
/// warning; estimates exist only at centers whose window lies fully inside
/// the record (no zero padding).
pub fn stft_eis(
    rec: &TimeSeriesRecord,
    spec: &MultisineSpec,
    lambda: f64,
    n_w: usize,
    stride: usize,
) -> Result<TimeVaryingImpedance> {
    let (n, _) = validate_record(rec, spec)?;
    if n_w % 2 != 0 || n_w == 0 {
        return Err(Error::invalid("stft: n_w must be even and positive"));
    }
    if n_w >= n {
        return Err(Error::invalid("stft: window longer than the record"));
    }
    if stride == 0 {
        return Err(Error::invalid("stft: stride must be positive"));
    }
    let half = n_w / 2;
    let window = stft_window_gaussian(lambda, half, rec.fs)?;

    let freqs = spec.frequencies_hz();
    let f_min_resolved = rec.fs / n_w as f64;
    let masked: Vec<bool> = freqs.iter().map(|&f| f < f_min_resolved).collect();
    if masked.iter().all(|&m| m) {
        return Err(Error::invalid(
            "stft: every excited frequency is below the window resolution",
        ));
    }
    if masked.iter().any(|&m| m) {
        log::warn!(
            "stft: masking {} excited frequencies below one period per window ({f_min_resolved} Hz)",
            masked.iter().filter(|&&m| m).count()
        );
    }

    let centers: Vec<usize> = (half..n - half).step_by(stride).collect();
    let times: Vec<f64> = centers.iter().map(|&c| c as f64 / rec.fs).collect();
    let ts = 1.0 / rec.fs;

    let w_sum: f64 = window.iter().sum();
    let mut values: Vec<Vec<Option<Complex64>>> =
        vec![vec![None; centers.len()]; freqs.len()];
    for (m, (&f, &is_masked)) in freqs.iter().zip(&masked).enumerate() {
        if is_masked {
            continue;
        }
        let omega = 2.0 * PI * f;
        // phase table relative to the window center
        let phase: Vec<Complex64> = (0..=n_w)
            .map(|d| Complex64::from_polar(1.0, -omega * (d as f64 - half as f64) * ts))
            .collect();
        let phase_sum: Complex64 = window.iter().zip(&phase).map(|(w, p)| w * p).sum();
        for (l, &c) in centers.iter().enumerate() {
            let mut v_acc = Complex64::new(0.0, 0.0);
            let mut i_acc = Complex64::new(0.0, 0.0);
            let mut v_mean = 0.0;
            let mut i_mean = 0.0;
            for d in 0..=n_w {
                let idx = c - half + d;
                let wphase = window[d] * phase[d];
                v_acc += wphase * rec.voltage[idx];
                i_acc += wphase * rec.current[idx];
                v_mean += window[d] * rec.voltage[idx];
                i_mean += window[d] * rec.current[idx];
            }
            // subtract the window-weighted mean: OCV and DC offsets would
            // otherwise leak through the Gaussian skirt into low tones
            v_acc -= phase_sum * (v_mean / w_sum);
            i_acc -= phase_sum * (i_mean / w_sum);
            let denom = i_acc.norm_sqr();
            if denom > 1e-300 {
                values[m][l] = Some(v_acc * i_acc.conj() / denom);
            }
        }
    }

    Ok(TimeVaryingImpedance {
        frequencies: freqs,
        times,
        values,
        std: None,
        method: "stft".into(),
        basis_order: None,
    })
}

fn dmfa_impl(
    rec: &TimeSeriesRecord,
    spec: &MultisineSpec,
    weights: &[f64],
    method: &str,
) -> Result<TimeVaryingImpedance> {
    let (n, p) = validate_record(rec, spec)?;
    if p < 4 {
        return Err(Error::invalid(
            "dmfa: need at least 4 periods to resolve the skirts",
        ));
    }
    let n_w = weights.len();
    let bins = spec.excited_bins(p);
    // bands must stay between the neighbouring excited lines
    for (i, &k) in bins.iter().enumerate() {
        let lo = k.saturating_sub(n_w / 2);
        let hi = k + n_w / 2 - 1;
        for (j, &other) in bins.iter().enumerate() {
            if i != j && other >= lo && other <= hi {
                return Err(Error::invalid(format!(
                    "dmfa: band of width {n_w} around bin {k} overlaps excited bin {other}",
                )));
            }
        }
    }

    let v_spec = dft(&rec.voltage, rec.fs)?;
    let i_spec = dft(&rec.current, rec.fs)?;

    let times: Vec<f64> = (0..n_w)
        .map(|j| j as f64 * n as f64 / (n_w as f64 * rec.fs))
        .collect();
    let mut values: Vec<Vec<Option<Complex64>>> = Vec::with_capacity(bins.len());
    for &k in &bins {
        let env_v = band_extract_weights(&v_spec, k, weights)?;
        let env_i = band_extract_weights(&i_spec, k, weights)?;
        values.push(
            env_v
                .iter()
                .zip(&env_i)
                .map(|(v, i)| {
                    let denom = i.norm_sqr();
                    if denom > 1e-300 {
                        Some(v * i.conj() / denom)
                    } else {
                        None
                    }
                })
                .collect(),
        );
    }

    Ok(TimeVaryingImpedance {
        frequencies: spec.frequencies_hz(),
        times,
        values,
        std: None,
        method: method.into(),
        basis_order: None,
    })
}

/// Dynamic multi-frequency analysis: one DFT of the entire record, then a
/// quadrature-filtered complex envelope per excited line, ratioed per time
/// sample on the decimated grid `t_j = j T / N_W`.
pub fn dmfa(
    rec: &TimeSeriesRecord,
    spec: &MultisineSpec,
    filt: &QuadratureFilter,
) -> Result<TimeVaryingImpedance> {
    let n = rec.current.len();
    let bin_spacing = 2.0 * PI * rec.fs / n as f64;
    let weights = quadrature_filter_weights(filt, bin_spacing);
    dmfa_impl(rec, spec, &weights, "dmfa")
}

/// DMFA with a Gaussian filter, the frequency-domain twin of the Gaussian
/// STFT window: `stft_eis` with the same `lambda` agrees with this at
/// interior times.
pub fn dmfa_gaussian(
    rec: &TimeSeriesRecord,
    spec: &MultisineSpec,
    lambda: f64,
    n_w: usize,
) -> Result<TimeVaryingImpedance> {
    if n_w % 2 != 0 || n_w < 2 {
        return Err(Error::invalid("dmfa: n_w must be even and at least 2"));
    }
    let n = rec.current.len();
    let bin_spacing = 2.0 * PI * rec.fs / n as f64;
    let weights = gaussian_filter_weights(lambda, n_w, bin_spacing);
    dmfa_impl(rec, spec, &weights, "dmfa-gaussian")
}

/// Settings for [`operando_eis`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OperandoConfig {
    /// Legendre order of the impedance expansion.
    pub n_p: usize,
    /// Legendre order of the drift model; must be at least `n_p`.
    pub n_q: usize,
    /// Half-width of each local band in bins. Defaults to half the gap
    /// between harmonic lines (`P/2`).
    pub band_halfwidth: Option<usize>,
    /// Number of output time samples of the assembled surface.
    pub output_times: usize,
    /// Distortion lines are modelled up to `nl_span_factor * h_max`.
    pub nl_span_factor: f64,
    /// Time origin of the basis interval (affine reparameterization; the
    /// assembled surface is invariant to it).
    pub basis_origin: f64,
    /// Length of the basis interval; defaults to the record duration.
    pub basis_span: Option<f64>,
}

impl Default for OperandoConfig {
    fn default() -> Self {
        Self {
            n_p: 2,
            n_q: 4,
            band_halfwidth: None,
            output_times: 100,
            nl_span_factor: 3.0,
            basis_origin: 0.0,
            basis_span: None,
        }
    }
}

/// Distortion coefficient `V_{s,p}` estimated at a non-excited harmonic line.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DistortionCoeff {
    pub bin: usize,
    pub harmonic: u32,
    pub order_p: usize,
    pub re: f64,
    pub im: f64,
}

/// Condition number of one local band solve.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BandCondition {
    pub center_bin: usize,
    pub condition: f64,
    pub skipped: bool,
}

/// Full output of the operando estimator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OperandoResult {
    pub tvimp: TimeVaryingImpedance,
    /// Basis coefficients `Z_p(w_m)` per excited frequency (`[m][p]`).
    pub z_p: Vec<Vec<Option<Complex64>>>,
    /// Variance of each `Z_p(w_m)` from the residual-based noise estimate.
    pub z_p_var: Vec<Vec<Option<f64>>>,
    /// Drift expansion coefficients, volts.
    pub drift_coeffs: Vec<Complex64>,
    pub distortion_coeffs: Vec<DistortionCoeff>,
    /// Least-squares residual per bin over all solved rows (length N/2 + 1).
    pub residual_spectrum: Vec<Complex64>,
    pub condition_numbers: Vec<BandCondition>,
}

/// Sampled Legendre basis of the record and its spectra, shared by the band
/// solves.
struct OperandoBasis {
    spectra: Vec<Spectrum>,
    peak: Vec<f64>,
    n: usize,
}

impl OperandoBasis {
    fn build(p_max: usize, span: f64, origin: f64, rec: &TimeSeriesRecord) -> Result<Self> {
        let shifted: Vec<f64> = rec.timestamps().iter().map(|t| t - origin).collect();
        let basis = legendre_basis(p_max, span, &shifted)?;
        let spectra: Vec<Spectrum> = basis
            .iter()
            .map(|col| dft(col, rec.fs))
            .collect::<Result<_>>()?;
        let peak = spectra
            .iter()
            .map(|s| s.bins.iter().map(|b| b.norm()).fold(0.0, f64::max))
            .collect();
        Ok(Self {
            spectra,
            peak,
            n: rec.current.len(),
        })
    }

    fn at(&self, order: usize, offset: i64) -> Complex64 {
        self.spectra[order].bins[offset.rem_euclid(self.n as i64) as usize]
    }

    /// Drift orders whose spectrum still matters on the given rows.
    fn live_drift_columns(&self, rows: &[usize], n_q: usize) -> Vec<usize> {
        (0..=n_q)
            .filter(|&q| {
                rows.iter()
                    .any(|&k| self.at(q, k as i64).norm() >= 1e-12 * self.peak[q])
            })
            .collect()
    }

    /// Regressor matrix and right-hand side of one local band: impedance /
    /// distortion columns `B_p(k - k_l)` per line, then drift columns `B_q(k)`.
    fn band_system(
        &self,
        v_bins: &[Complex64],
        rows: &[usize],
        band_lines: &[usize],
        n_p: usize,
        drift_cols: &[usize],
    ) -> (DMatrix<Complex64>, DVector<Complex64>) {
        let n_cols = band_lines.len() * (n_p + 1) + drift_cols.len();
        let mut k_mat = DMatrix::<Complex64>::zeros(rows.len(), n_cols);
        let mut rhs = DVector::<Complex64>::zeros(rows.len());
        for (r, &k) in rows.iter().enumerate() {
            rhs[r] = v_bins[k];
            for (li, &k_l) in band_lines.iter().enumerate() {
                for order in 0..=n_p {
                    k_mat[(r, li * (n_p + 1) + order)] = self.at(order, k as i64 - k_l as i64);
                }
            }
            for (ci, &q) in drift_cols.iter().enumerate() {
                k_mat[(r, band_lines.len() * (n_p + 1) + ci)] = self.at(q, k as i64);
            }
        }
        (k_mat, rhs)
    }
}

struct BandSolve {
    theta: DVector<Complex64>,
    var: DVector<f64>,
    condition: f64,
    residual: DVector<Complex64>,
}

fn solve_band(k_mat: DMatrix<Complex64>, rhs: DVector<Complex64>) -> Result<BandSolve> {
    let rows = k_mat.nrows();
    let cols = k_mat.ncols();
    let svd = k_mat.clone().svd(true, true);
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    if !(s_max > 0.0) {
        return Err(Error::numerical("band regressor matrix is zero"));
    }
    // Minimum-norm solution with small singular values truncated: redundant
    // drift directions (the 1/k tails of odd basis orders are collinear far
    // from DC) are harmless to the line coefficients.
    let cutoff = 1e-10 * s_max;
    let theta = svd
        .solve(&rhs, cutoff)
        .map_err(|e| Error::numerical(format!("band solve failed: {e}")))?;
    let residual = &rhs - &k_mat * &theta;
    let dof = rows.saturating_sub(cols);
    let sigma2 = if dof > 0 {
        residual.norm_squared() / dof as f64
    } else {
        0.0
    };
    // Var(theta_i) = sigma^2 sum_j |V[i,j]|^2 / s_j^2 from K = U S V^H,
    // truncated singular values excluded.
    let v_t = svd.v_t.as_ref().unwrap();
    let mut var = DVector::zeros(cols);
    for i in 0..cols {
        let mut acc = 0.0;
        for j in 0..v_t.nrows() {
            if svd.singular_values[j] > cutoff {
                acc += v_t[(j, i)].norm_sqr() / svd.singular_values[j].powi(2);
            }
        }
        var[i] = sigma2 * acc;
    }
    Ok(BandSolve {
        theta,
        var,
        condition: s_max / s_min.max(f64::MIN_POSITIVE),
        residual,
    })
}

/// Operando EIS: least-squares estimation of a Legendre-expanded
/// time-varying impedance with explicit drift and nonlinear-distortion
/// terms, solved in local frequency bands around the harmonic lines.
///
/// The voltage spectrum is modelled as
///
/// ```text
/// V(k) = sum_q theta_q B_q(k)
///      + sum_p sum_{k' in P H_nl} theta_p(k') B_p(k - k'),
/// ```
///
/// with `B_p` the DFT of the Legendre basis functions. At excited lines
/// `theta_p(k') = Z_p I(k')` gives the impedance expansion; at the remaining
/// harmonic lines it gives the distortion coefficients. Drift columns are
/// carried in every band and dropped where numerically negligible.
pub fn operando_eis(
    rec: &TimeSeriesRecord,
    spec: &MultisineSpec,
    cfg: &OperandoConfig,
) -> Result<OperandoResult> {
    let (n, p) = validate_record(rec, spec)?;
    if cfg.n_q < cfg.n_p {
        return Err(Error::invalid(
            "operando: drift order n_q must be at least the impedance order n_p",
        ));
    }
    let pp = p as usize;
    let nyq = n / 2;
    let hw = cfg.band_halfwidth.unwrap_or(pp / 2).max(1);
    let rows_per_band = 2 * hw + 1;
    let max_cols = (cfg.n_p + 1) + (cfg.n_q + 1);
    if rows_per_band <= cfg.n_p {
        return Err(Error::invalid(format!(
            "operando: band of {rows_per_band} rows cannot carry {} impedance columns; \
             measure more periods or lower n_p",
            cfg.n_p + 1
        )));
    }
    let _ = max_cols;

    let v_spec = dft(&rec.voltage, rec.fs)?;
    let i_spec = dft(&rec.current, rec.fs)?;

    // Legendre basis sampled on the record, then transformed
    let duration = n as f64 / rec.fs;
    let span = cfg.basis_span.unwrap_or(duration);
    if cfg.basis_origin > 0.0 || cfg.basis_origin + span < duration * (1.0 - 1e-12) {
        return Err(Error::invalid(
            "operando: basis interval must cover the record duration",
        ));
    }
    let p_max = cfg.n_p.max(cfg.n_q);
    let basis = OperandoBasis::build(p_max, span, cfg.basis_origin, rec)?;

    // harmonic lines of interest
    let h_max = *spec.excited_harmonics.last().unwrap() as usize;
    let j_cap = ((cfg.nl_span_factor * h_max as f64).ceil() as usize).max(h_max);
    let j_max = j_cap.min(nyq.saturating_sub(hw) / pp);
    if j_max < h_max {
        return Err(Error::invalid(
            "operando: record too short to carry bands around every excited line",
        ));
    }
    let excited_bins = spec.excited_bins(p);
    let lines: Vec<usize> = (1..=j_max).map(|j| j * pp).collect();

    // drift solve on the low-frequency rows below the first line band
    let first_band_lo = lines[0] - hw.min(lines[0] - 1);
    let drift_rows: Vec<usize> = (0..first_band_lo).collect();
    let mut drift_coeffs = Vec::new();
    if drift_rows.len() > cfg.n_q + 1 {
        let (k_mat, rhs) =
            basis.band_system(&v_spec.bins, &drift_rows, &[], cfg.n_p, &(0..=cfg.n_q).collect::<Vec<_>>());
        match solve_band(k_mat, rhs) {
            Ok(sol) => drift_coeffs = sol.theta.iter().copied().collect(),
            Err(e) => log::warn!("operando: drift band skipped: {e}"),
        }
    } else {
        log::warn!(
            "operando: only {} drift rows below the first excited band; drift \
             coefficients not reported",
            drift_rows.len()
        );
    }

    let excited_freqs = spec.frequencies_hz();
    let mut z_p: Vec<Vec<Option<Complex64>>> =
        vec![vec![None; cfg.n_p + 1]; excited_freqs.len()];
    let mut z_p_var: Vec<Vec<Option<f64>>> = vec![vec![None; cfg.n_p + 1]; excited_freqs.len()];
    let mut distortion_coeffs = Vec::new();
    let mut residual_spectrum = vec![Complex64::new(0.0, 0.0); nyq + 1];
    let mut condition_numbers = Vec::new();

    for &k_c in &lines {
        let lo = k_c - hw.min(k_c - 1);
        let hi = (k_c + hw).min(nyq);
        let band_lines: Vec<usize> = lines
            .iter()
            .copied()
            .filter(|&k| k >= lo && k <= hi)
            .collect();
        let rows: Vec<usize> = (lo..=hi).collect();

        // drift columns that still matter in this band
        let drift_cols = basis.live_drift_columns(&rows, cfg.n_q);

        let n_cols = band_lines.len() * (cfg.n_p + 1) + drift_cols.len();
        if rows.len() < n_cols {
            log::warn!(
                "operando: band at bin {k_c} has {} rows for {n_cols} columns; skipped",
                rows.len()
            );
            condition_numbers.push(BandCondition {
                center_bin: k_c,
                condition: f64::INFINITY,
                skipped: true,
            });
            continue;
        }

        let (k_mat, rhs) =
            basis.band_system(&v_spec.bins, &rows, &band_lines, cfg.n_p, &drift_cols);
        let sol = match solve_band(k_mat, rhs) {
            Ok(sol) => sol,
            Err(e) => {
                log::warn!("operando: band at bin {k_c} skipped: {e}");
                condition_numbers.push(BandCondition {
                    center_bin: k_c,
                    condition: f64::INFINITY,
                    skipped: true,
                });
                continue;
            }
        };
        condition_numbers.push(BandCondition {
            center_bin: k_c,
            condition: sol.condition,
            skipped: false,
        });
        for (r, &k) in rows.iter().enumerate() {
            residual_spectrum[k] = sol.residual[r];
        }

        // publish only the center line of this band
        let center_idx = band_lines.iter().position(|&k| k == k_c).unwrap();
        let base = center_idx * (cfg.n_p + 1);
        if let Some(m) = excited_bins.iter().position(|&k| k == k_c) {
            let i_line = i_spec.bins[k_c];
            if i_line.norm() < 1e-15 {
                log::warn!("operando: excited line at bin {k_c} has no current energy");
                continue;
            }
            for order in 0..=cfg.n_p {
                z_p[m][order] = Some(sol.theta[base + order] / i_line);
                z_p_var[m][order] = Some(sol.var[base + order] / i_line.norm_sqr());
            }
        } else {
            for order in 0..=cfg.n_p {
                let v = sol.theta[base + order];
                distortion_coeffs.push(DistortionCoeff {
                    bin: k_c,
                    harmonic: (k_c / pp) as u32,
                    order_p: order,
                    re: v.re,
                    im: v.im,
                });
            }
        }
    }

    // assemble the surface on a decimated time grid
    let l_out = cfg.output_times.max(2).min(n);
    let out_idx: Vec<usize> = (0..l_out)
        .map(|l| (l as f64 * (n - 1) as f64 / (l_out - 1) as f64).round() as usize)
        .collect();
    let times: Vec<f64> = out_idx.iter().map(|&i| i as f64 / rec.fs).collect();
    let shifted_out: Vec<f64> = times.iter().map(|t| t - cfg.basis_origin).collect();
    let basis_out = legendre_basis(cfg.n_p, span, &shifted_out)?;

    let mut values: Vec<Vec<Option<Complex64>>> = vec![vec![None; l_out]; excited_freqs.len()];
    let mut std: Vec<Vec<Option<f64>>> = vec![vec![None; l_out]; excited_freqs.len()];
    for m in 0..excited_freqs.len() {
        if z_p[m].iter().any(|c| c.is_none()) {
            continue; // band skipped: leave the row masked
        }
        for l in 0..l_out {
            let mut acc = Complex64::new(0.0, 0.0);
            let mut var_acc = 0.0;
            for order in 0..=cfg.n_p {
                let b = basis_out[order][l];
                acc += z_p[m][order].unwrap() * b;
                var_acc += z_p_var[m][order].unwrap() * b * b;
            }
            values[m][l] = Some(acc);
            std[m][l] = Some(var_acc.sqrt());
        }
    }

    Ok(OperandoResult {
        tvimp: TimeVaryingImpedance {
            frequencies: excited_freqs,
            times,
            values,
            std: Some(std),
            method: "operando".into(),
            basis_order: Some((cfg.n_p, cfg.n_q)),
        },
        z_p,
        z_p_var,
        drift_coeffs,
        distortion_coeffs,
        residual_spectrum,
        condition_numbers,
    })
}
