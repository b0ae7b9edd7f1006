//! Equivalent circuit model `R0 + C1 // (R1 + W) + Cct // Rct`: evaluation
//! and fitting to impedance curves by particle swarm plus derivative-based
//! local refinement.

use crate::classical::ImpedanceCurve;
use crate::tvimp::TimeVaryingImpedance;
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Circuit parameters `theta = [R0, R1, C1, Rct, Cct, W, alpha]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EcmParams {
    /// Series (electrolyte) resistance, ohm.
    pub r0: f64,
    /// Resistance of the diffusion branch, ohm.
    pub r1: f64,
    /// Capacitance across the diffusion branch, farad.
    pub c1: f64,
    /// Charge-transfer resistance, ohm.
    pub rct: f64,
    /// Double-layer capacitance across the charge-transfer branch, farad.
    pub cct: f64,
    /// Warburg magnitude, ohm * s^alpha.
    pub w: f64,
    /// Fractional order of the Warburg element, in (0, 1].
    pub alpha: f64,
}

pub const PARAM_NAMES: [&str; 7] = ["R0", "R1", "C1", "Rct", "Cct", "W", "alpha"];

impl EcmParams {
    pub fn validate(&self) -> Result<()> {
        let a = self.as_array();
        if a[..6].iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::invalid(
                "ecm: resistances, capacitances and W must be positive and finite",
            ));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::invalid("ecm: alpha must lie in (0, 1]"));
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 7] {
        [self.r0, self.r1, self.c1, self.rct, self.cct, self.w, self.alpha]
    }

    pub fn from_array(a: [f64; 7]) -> Self {
        Self {
            r0: a[0],
            r1: a[1],
            c1: a[2],
            rct: a[3],
            cct: a[4],
            w: a[5],
            alpha: a[6],
        }
    }
}

/// `(j omega)^alpha` on the principal branch, valid for either sign of
/// `omega` so that `Z(-omega) = conj(Z(omega))`.
fn j_omega_pow(omega: f64, alpha: f64) -> Complex64 {
    let mag = omega.abs().powf(alpha);
    let arg = alpha * PI / 2.0 * omega.signum();
    Complex64::from_polar(mag, arg)
}

fn parallel(a: Complex64, b: Complex64) -> Complex64 {
    a * b / (a + b)
}

pub(crate) fn ecm_impedance_signed(theta: &EcmParams, omega: f64) -> Complex64 {
    let jw = Complex64::new(0.0, omega);
    let z_c1 = 1.0 / (jw * theta.c1);
    let z_cct = 1.0 / (jw * theta.cct);
    let z_w = theta.w / j_omega_pow(omega, theta.alpha);
    Complex64::new(theta.r0, 0.0)
        + parallel(z_c1, Complex64::new(theta.r1, 0.0) + z_w)
        + parallel(z_cct, Complex64::new(theta.rct, 0.0))
}

/// Evaluate the circuit impedance at the given angular frequencies (rad/s).
///
/// The Warburg element uses the principal branch
/// `(j omega)^alpha = omega^alpha exp(j alpha pi / 2)`. The capacitors and
/// the Warburg element are singular at DC, so `omega` must be positive.
pub fn ecm_impedance(theta: &EcmParams, omegas: &[f64]) -> Result<Vec<Complex64>> {
    theta.validate()?;
    if omegas.iter().any(|&w| w <= 0.0) {
        return Err(Error::invalid("ecm: omega must be positive (singular at DC)"));
    }
    Ok(omegas
        .iter()
        .map(|&w| ecm_impedance_signed(theta, w))
        .collect())
}

/// Box bounds for the fit, per parameter.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EcmBounds {
    pub lo: EcmParams,
    pub hi: EcmParams,
}

impl EcmBounds {
    pub fn validate(&self) -> Result<()> {
        self.lo.validate()?;
        self.hi.validate()?;
        let lo = self.lo.as_array();
        let hi = self.hi.as_array();
        if lo.iter().zip(&hi).any(|(l, h)| l >= h) {
            return Err(Error::invalid("ecm bounds: lo must be strictly below hi"));
        }
        Ok(())
    }

    /// Bounds spanning `decades` decades around a center value in every
    /// positive parameter; alpha gets the full (0, 1] range.
    pub fn around(center: &EcmParams, decades: f64) -> Self {
        let f = 10f64.powf(decades / 2.0);
        let c = center.as_array();
        let mut lo = [0.0; 7];
        let mut hi = [0.0; 7];
        for i in 0..6 {
            lo[i] = c[i] / f;
            hi[i] = c[i] * f;
        }
        lo[6] = 0.05;
        hi[6] = 1.0;
        Self {
            lo: EcmParams::from_array(lo),
            hi: EcmParams::from_array(hi),
        }
    }

    /// Decade-wide default bounds seeded from gross features of the measured
    /// curve: the high-frequency plateau bounds `R0`, the real-axis spread
    /// bounds the resistive elements, and the frequency of the strongest
    /// capacitive response scales the capacitances.
    pub fn from_curve(curve: &ImpedanceCurve) -> Result<Self> {
        curve.validate()?;
        let min_mod = curve.values.iter().map(|z| z.norm()).fold(f64::MAX, f64::min);
        let re_min = curve.values.iter().map(|z| z.re).fold(f64::MAX, f64::min);
        let re_max = curve.values.iter().map(|z| z.re).fold(f64::MIN, f64::max);
        let spread = (re_max - re_min).max(0.1 * min_mod).max(1e-12);
        let (mut w_peak, mut best_im) = (1.0, 0.0);
        for (&f, z) in curve.frequencies.iter().zip(&curve.values) {
            if -z.im > best_im {
                best_im = -z.im;
                w_peak = 2.0 * PI * f;
            }
        }
        let rct = 0.5 * spread;
        let w_min = 2.0 * PI * curve.frequencies[0];
        let center = EcmParams {
            r0: min_mod.max(1e-12),
            r1: rct,
            c1: 10.0 / (w_peak * rct),
            rct,
            cct: 1.0 / (w_peak * rct),
            w: rct * w_min.sqrt(),
            alpha: 0.5,
        };
        Ok(Self::around(&center, 3.0))
    }
}

/// Particle swarm settings. Identical seeds give bit-identical fits.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SwarmConfig {
    pub particles: usize,
    pub iters: usize,
    pub seed: u64,
}

impl Default for SwarmConfig {
    fn default() -> Self {
        Self {
            particles: 64,
            iters: 200,
            seed: 0,
        }
    }
}

/// Full fit settings.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FitConfig {
    pub swarm: SwarmConfig,
    /// Weight residuals by `1/|Z_hat|` instead of the plain modulus residual.
    pub relative_weighting: bool,
    pub local_max_iters: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            swarm: SwarmConfig::default(),
            relative_weighting: false,
            local_max_iters: 200,
        }
    }
}

/// Result of a single fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EcmFit {
    pub params: EcmParams,
    /// Mean over frequency of `|Z_hat - Z_ecm| / |Z_hat|`.
    pub mean_rel_error: f64,
    pub per_freq_rel_error: Vec<f64>,
    /// Final value of the fit objective.
    pub cost: f64,
    /// Local refinement iterations actually used.
    pub local_iters: usize,
}

// Internal optimization space: log for the six positive parameters,
// direct for alpha (scale disparity between farads and ohms).
fn to_internal(p: &EcmParams) -> [f64; 7] {
    let a = p.as_array();
    [
        a[0].ln(),
        a[1].ln(),
        a[2].ln(),
        a[3].ln(),
        a[4].ln(),
        a[5].ln(),
        a[6],
    ]
}

fn from_internal(x: &[f64; 7]) -> EcmParams {
    EcmParams::from_array([
        x[0].exp(),
        x[1].exp(),
        x[2].exp(),
        x[3].exp(),
        x[4].exp(),
        x[5].exp(),
        x[6],
    ])
}

fn clamp_internal(x: &mut [f64; 7], lo: &[f64; 7], hi: &[f64; 7]) {
    for i in 0..7 {
        x[i] = x[i].clamp(lo[i], hi[i]);
    }
}

struct Objective<'a> {
    omegas: Vec<f64>,
    targets: &'a [Complex64],
    weights: Vec<f64>,
}

impl<'a> Objective<'a> {
    fn new(curve: &'a ImpedanceCurve, relative: bool) -> Self {
        let omegas: Vec<f64> = curve.frequencies.iter().map(|f| 2.0 * PI * f).collect();
        let weights = curve
            .values
            .iter()
            .map(|z| {
                if relative {
                    1.0 / z.norm().max(f64::MIN_POSITIVE)
                } else {
                    1.0
                }
            })
            .collect();
        Self {
            omegas,
            targets: &curve.values,
            weights,
        }
    }

    fn residuals(&self, x: &[f64; 7]) -> DVector<f64> {
        let theta = from_internal(x);
        let mut r = DVector::zeros(2 * self.omegas.len());
        for (i, &w) in self.omegas.iter().enumerate() {
            let d = (ecm_impedance_signed(&theta, w) - self.targets[i]) * self.weights[i];
            r[2 * i] = d.re;
            r[2 * i + 1] = d.im;
        }
        r
    }

    fn cost(&self, x: &[f64; 7]) -> f64 {
        self.residuals(x).norm_squared()
    }
}

fn one_swarm(
    obj: &Objective,
    lo: &[f64; 7],
    hi: &[f64; 7],
    particles: usize,
    iters: usize,
    rng: &mut ChaCha8Rng,
) -> [f64; 7] {
    const INERTIA: f64 = 0.7298;
    const COGNITIVE: f64 = 1.49618;
    const SOCIAL: f64 = 1.49618;

    let n = particles.max(1);
    let mut pos: Vec<[f64; 7]> = (0..n)
        .map(|_| {
            let mut x = [0.0; 7];
            for i in 0..7 {
                x[i] = rng.gen_range(lo[i]..=hi[i]);
            }
            x
        })
        .collect();
    let mut vel: Vec<[f64; 7]> = vec![[0.0; 7]; n];
    let mut best = pos.clone();
    let mut best_cost: Vec<f64> = pos.iter().map(|x| obj.cost(x)).collect();
    let mut g_idx = 0;
    for i in 1..n {
        if best_cost[i] < best_cost[g_idx] {
            g_idx = i;
        }
    }
    let mut g_best = best[g_idx];
    let mut g_cost = best_cost[g_idx];

    for _ in 0..iters {
        for p in 0..n {
            for d in 0..7 {
                let r1: f64 = rng.gen();
                let r2: f64 = rng.gen();
                vel[p][d] = INERTIA * vel[p][d]
                    + COGNITIVE * r1 * (best[p][d] - pos[p][d])
                    + SOCIAL * r2 * (g_best[d] - pos[p][d]);
                pos[p][d] += vel[p][d];
            }
            clamp_internal(&mut pos[p], lo, hi);
            let c = obj.cost(&pos[p]);
            if c < best_cost[p] {
                best_cost[p] = c;
                best[p] = pos[p];
                if c < g_cost {
                    g_cost = c;
                    g_best = pos[p];
                }
            }
        }
    }
    g_best
}

/// Particle swarm over the internal space, run as independent sub-swarms so
/// one prematurely converged basin cannot swallow the whole budget. Returns
/// each island's best as a refinement seed.
fn swarm_search(obj: &Objective, lo: &[f64; 7], hi: &[f64; 7], cfg: &SwarmConfig) -> Vec<[f64; 7]> {
    const ISLANDS: usize = 4;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let per_island = (cfg.particles / ISLANDS).max(4);
    let mut seeds: Vec<[f64; 7]> = (0..ISLANDS)
        .map(|_| one_swarm(obj, lo, hi, per_island, cfg.iters, &mut rng))
        .collect();
    seeds.sort_by(|a, b| obj.cost(a).partial_cmp(&obj.cost(b)).unwrap());
    seeds
}

/// Levenberg-Marquardt with a numerically differenced Jacobian, projected
/// onto the bounds. Only improving steps are accepted, so the objective is
/// non-increasing across iterations.
fn local_refine(
    obj: &Objective,
    start: [f64; 7],
    lo: &[f64; 7],
    hi: &[f64; 7],
    max_iters: usize,
) -> ([f64; 7], f64, usize) {
    let mut x = start;
    let mut cost = obj.cost(&x);
    let mut lambda = 1e-3;
    let m = 2 * obj.omegas.len();
    let mut iters_used = 0;

    for iter in 0..max_iters {
        iters_used = iter + 1;
        // central-difference Jacobian in the internal space
        let mut jac = DMatrix::<f64>::zeros(m, 7);
        for d in 0..7 {
            let h = 1e-6 * x[d].abs().max(1.0);
            let mut xp = x;
            xp[d] += h;
            let mut xm = x;
            xm[d] -= h;
            let rp = obj.residuals(&xp);
            let rm = obj.residuals(&xm);
            for row in 0..m {
                jac[(row, d)] = (rp[row] - rm[row]) / (2.0 * h);
            }
        }
        let r = obj.residuals(&x);
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &r;

        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for d in 0..7 {
                a[(d, d)] += lambda * jtj[(d, d)].max(1e-12);
            }
            let step = match a.cholesky() {
                Some(ch) => ch.solve(&(-&jtr)),
                None => break,
            };
            let mut x_try = x;
            for d in 0..7 {
                x_try[d] += step[d];
            }
            clamp_internal(&mut x_try, lo, hi);
            let c_try = obj.cost(&x_try);
            if c_try < cost {
                let delta: f64 = (0..7).map(|d| (x_try[d] - x[d]).powi(2)).sum::<f64>();
                x = x_try;
                let rel_drop = (cost - c_try) / cost.max(1e-300);
                cost = c_try;
                lambda = (lambda / 3.0).max(1e-12);
                improved = true;
                if rel_drop < 1e-14 || delta.sqrt() < 1e-13 {
                    return (x, cost, iters_used);
                }
                break;
            }
            lambda *= 4.0;
            if lambda > 1e12 {
                break;
            }
        }
        if !improved {
            break;
        }
    }
    (x, cost, iters_used)
}

fn finish_fit(obj: &Objective, curve: &ImpedanceCurve, x: [f64; 7], cost: f64, iters: usize) -> EcmFit {
    let params = from_internal(&x);
    let per_freq: Vec<f64> = curve
        .frequencies
        .iter()
        .zip(&curve.values)
        .map(|(&f, z)| {
            let zm = ecm_impedance_signed(&params, 2.0 * PI * f);
            (zm - z).norm() / z.norm().max(f64::MIN_POSITIVE)
        })
        .collect();
    let mean_rel_error = per_freq.iter().sum::<f64>() / per_freq.len() as f64;
    let _ = obj;
    EcmFit {
        params,
        mean_rel_error,
        per_freq_rel_error: per_freq,
        cost,
        local_iters: iters,
    }
}

/// Fit the circuit to an impedance curve: global particle swarm over
/// log-scaled parameters inside the bounds, then local least-squares
/// refinement from the swarm optimum.
pub fn fit_ecm(curve: &ImpedanceCurve, bounds: &EcmBounds, cfg: &FitConfig) -> Result<EcmFit> {
    curve.validate()?;
    bounds.validate()?;
    if curve.len() < 7 {
        return Err(Error::invalid(
            "fit_ecm: need at least 7 frequency points for 7 parameters",
        ));
    }
    if curve.values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::invalid("fit_ecm: curve contains non-finite values"));
    }
    let lo = to_internal(&bounds.lo);
    let hi = to_internal(&bounds.hi);
    let obj = Objective::new(curve, cfg.relative_weighting);
    let seeds = swarm_search(&obj, &lo, &hi, &cfg.swarm);
    let mut outcome: Option<([f64; 7], f64, usize)> = None;
    for seed in seeds {
        let (x, cost, iters) = local_refine(&obj, seed, &lo, &hi, cfg.local_max_iters);
        if outcome.as_ref().map_or(true, |(_, best, _)| cost < *best) {
            outcome = Some((x, cost, iters));
        }
    }
    let (x, cost, iters) = outcome.unwrap();
    Ok(finish_fit(&obj, curve, x, cost, iters))
}

/// Refit from a known starting point (no swarm), for warm-started
/// trajectory fitting.
pub fn fit_ecm_from(
    curve: &ImpedanceCurve,
    start: &EcmParams,
    bounds: &EcmBounds,
    cfg: &FitConfig,
) -> Result<EcmFit> {
    curve.validate()?;
    bounds.validate()?;
    start.validate()?;
    if curve.len() < 7 {
        return Err(Error::invalid(
            "fit_ecm: need at least 7 frequency points for 7 parameters",
        ));
    }
    let lo = to_internal(&bounds.lo);
    let hi = to_internal(&bounds.hi);
    let mut x0 = to_internal(start);
    clamp_internal(&mut x0, &lo, &hi);
    let obj = Objective::new(curve, cfg.relative_weighting);
    let (x, cost, iters) = local_refine(&obj, x0, &lo, &hi, cfg.local_max_iters);
    Ok(finish_fit(&obj, curve, x, cost, iters))
}

/// One fitted time point of a trajectory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryFit {
    pub t: f64,
    pub fit: EcmFit,
}

/// Fit the circuit to each requested time slice of a time-varying impedance
/// surface, warm-starting every fit (except the first) from the previous
/// optimum. Output is ordered by time.
pub fn fit_ecm_trajectory(
    tv: &TimeVaryingImpedance,
    times: &[f64],
    bounds: &EcmBounds,
    cfg: &FitConfig,
) -> Result<Vec<TrajectoryFit>> {
    if times.is_empty() {
        return Err(Error::invalid("fit_ecm_trajectory: no times requested"));
    }
    let mut order: Vec<f64> = times.to_vec();
    order.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut out = Vec::with_capacity(order.len());
    let mut previous: Option<EcmParams> = None;
    for &t in &order {
        let curve = tv.slice_at_time(t)?;
        if curve.len() < 7 {
            return Err(Error::invalid(format!(
                "fit_ecm_trajectory: slice at t = {t} has {} unmasked points (< 7)",
                curve.len()
            )));
        }
        let fit = match &previous {
            Some(p) => fit_ecm_from(&curve, p, bounds, cfg)?,
            None => fit_ecm(&curve, bounds, cfg)?,
        };
        previous = Some(fit.params);
        out.push(TrajectoryFit { t, fit });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::EstimatorMeta;

    fn battery_theta() -> EcmParams {
        EcmParams {
            r0: 0.02,
            r1: 0.008,
            c1: 600.0,
            rct: 0.03,
            cct: 3.0,
            w: 0.004,
            alpha: 0.55,
        }
    }

    fn log_freqs(f_min: f64, f_max: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| f_min * (f_max / f_min).powf(i as f64 / (n - 1) as f64))
            .collect()
    }

    fn curve_from(theta: &EcmParams, freqs: &[f64]) -> ImpedanceCurve {
        let omegas: Vec<f64> = freqs.iter().map(|f| 2.0 * PI * f).collect();
        ImpedanceCurve {
            frequencies: freqs.to_vec(),
            values: ecm_impedance(theta, &omegas).unwrap(),
            std: None,
            meta: EstimatorMeta::default(),
        }
    }

    #[test]
    fn warburg_at_unit_frequency() {
        // alpha = 0.5, W = 1, omega = 1: Z_W = 1/sqrt(j) = 0.7071 - 0.7071j
        let z = 1.0 / j_omega_pow(1.0, 0.5);
        assert!((z - Complex64::new(0.70710678, -0.70710678)).norm() < 1e-8);
    }

    #[test]
    fn randles_limit_when_diffusion_branch_vanishes() {
        // C1 -> 0 opens the C1 path, W -> 0 and R1 -> 0 short the series arm:
        // the model tends to R0 + Rct / (1 + j w Rct Cct).
        let theta = EcmParams {
            r0: 0.02,
            r1: 1e-12,
            c1: 1e-12,
            rct: 0.03,
            cct: 3.0,
            w: 1e-12,
            alpha: 0.5,
        };
        for f in [0.01, 0.1, 1.0, 10.0] {
            let w = 2.0 * PI * f;
            let z = ecm_impedance(&theta, &[w]).unwrap()[0];
            let expect = 0.02 + 0.03 / Complex64::new(1.0, w * 0.03 * 3.0);
            assert!((z - expect).norm() < 1e-6, "f = {f}");
        }
    }

    #[test]
    fn high_frequency_limit_is_r0() {
        let theta = battery_theta();
        let w_big = 100.0 / (theta.rct * theta.cct)
            * (100.0 * (theta.r1 / theta.w).powf(1.0 / theta.alpha)).max(1.0);
        let z = ecm_impedance(&theta, &[w_big]).unwrap()[0];
        assert!(
            (z.norm() - theta.r0).abs() / theta.r0 < 0.01,
            "Z({w_big}) = {z}"
        );
    }

    #[test]
    fn conjugate_symmetry_on_mirrored_frequency() {
        let theta = battery_theta();
        for f in [1e-3, 0.2, 5.0, 40.0] {
            let w = 2.0 * PI * f;
            let zp = ecm_impedance_signed(&theta, w);
            let zm = ecm_impedance_signed(&theta, -w);
            assert!((zm - zp.conj()).norm() < 1e-15 * zp.norm().max(1.0));
        }
    }

    #[test]
    fn capacitive_arc_has_negative_imaginary_part() {
        let theta = battery_theta();
        let f_kinetic = 1.0 / (2.0 * PI * theta.rct * theta.cct);
        for mult in [0.3, 1.0, 3.0] {
            let z = ecm_impedance(&theta, &[2.0 * PI * f_kinetic * mult]).unwrap()[0];
            assert!(z.im < 0.0, "Z at {mult} x kinetic corner: {z}");
        }
    }

    #[test]
    fn rejects_dc_and_bad_params() {
        let theta = battery_theta();
        assert!(ecm_impedance(&theta, &[0.0]).is_err());
        let mut bad = theta;
        bad.alpha = 1.5;
        assert!(ecm_impedance(&bad, &[1.0]).is_err());
        bad = theta;
        bad.rct = -1.0;
        assert!(ecm_impedance(&bad, &[1.0]).is_err());
    }

    #[test]
    fn noiseless_round_trip_recovers_parameters() {
        let truth = battery_theta();
        let curve = curve_from(&truth, &log_freqs(16.7e-3, 50.0, 60));
        let bounds = EcmBounds::around(&truth, 2.0);
        let fit = fit_ecm(&curve, &bounds, &FitConfig::default()).unwrap();
        let t = truth.as_array();
        let f = fit.params.as_array();
        for i in 0..7 {
            let rel = (f[i] - t[i]).abs() / t[i];
            assert!(
                rel < 1e-3,
                "{} off by {rel:.2e} ({} vs {})",
                PARAM_NAMES[i],
                f[i],
                t[i]
            );
        }
        assert!(fit.mean_rel_error < 1e-6, "mre = {}", fit.mean_rel_error);
    }

    #[test]
    fn noisy_fit_reaches_papers_error_scale() {
        use rand::{Rng, SeedableRng};
        let truth = battery_theta();
        let freqs = log_freqs(16.7e-3, 50.0, 60);
        let mut curve = curve_from(&truth, &freqs);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for z in curve.values.iter_mut() {
            let re: f64 = rng.sample(rand_distr::StandardNormal);
            let im: f64 = rng.sample(rand_distr::StandardNormal);
            *z *= Complex64::new(1.0 + 0.002 * re, 0.002 * im);
        }
        let bounds = EcmBounds::around(&truth, 2.0);
        let fit = fit_ecm(&curve, &bounds, &FitConfig::default()).unwrap();
        assert!(
            fit.mean_rel_error < 0.005,
            "mre = {} exceeds 0.5%",
            fit.mean_rel_error
        );
    }

    #[test]
    fn bounds_excluding_truth_return_best_in_bounds() {
        let truth = battery_theta();
        let curve = curve_from(&truth, &log_freqs(16.7e-3, 50.0, 40));
        // exclude the true R0
        let mut lo = truth;
        let mut hi = truth;
        let scale = 10f64;
        lo = EcmParams::from_array(lo.as_array().map(|v| v / scale));
        hi = EcmParams::from_array(hi.as_array().map(|v| v * scale));
        lo.alpha = 0.05;
        hi.alpha = 1.0;
        lo.r0 = truth.r0 * 2.0;
        hi.r0 = truth.r0 * 4.0;
        let bounds = EcmBounds { lo, hi };
        let fit = fit_ecm(&curve, &bounds, &FitConfig::default()).unwrap();
        assert!(fit.params.r0 >= truth.r0 * 2.0 * (1.0 - 1e-12));
        assert!(fit.mean_rel_error > 1e-4, "residual unexpectedly small");
    }

    #[test]
    fn swarm_identical_seed_is_bit_reproducible() {
        let truth = battery_theta();
        let curve = curve_from(&truth, &log_freqs(16.7e-3, 50.0, 30));
        let bounds = EcmBounds::around(&truth, 2.0);
        let cfg = FitConfig {
            swarm: SwarmConfig {
                particles: 24,
                iters: 40,
                seed: 5,
            },
            ..FitConfig::default()
        };
        let a = fit_ecm(&curve, &bounds, &cfg).unwrap();
        let b = fit_ecm(&curve, &bounds, &cfg).unwrap();
        assert_eq!(a.params.as_array().map(f64::to_bits), b.params.as_array().map(f64::to_bits));
    }

    #[test]
    fn curve_seeded_bounds_bracket_battery_parameters() {
        let truth = battery_theta();
        let curve = curve_from(&truth, &log_freqs(16.7e-3, 50.0, 60));
        let bounds = EcmBounds::from_curve(&curve).unwrap();
        let t = truth.as_array();
        let lo = bounds.lo.as_array();
        let hi = bounds.hi.as_array();
        for i in 0..7 {
            assert!(
                lo[i] <= t[i] && t[i] <= hi[i],
                "{}: {} outside [{}, {}]",
                PARAM_NAMES[i],
                t[i],
                lo[i],
                hi[i]
            );
        }
        let fit = fit_ecm(&curve, &bounds, &FitConfig::default()).unwrap();
        assert!(fit.mean_rel_error < 1e-4, "mre = {}", fit.mean_rel_error);
    }

    #[test]
    fn relative_weighting_option_runs() {
        let truth = battery_theta();
        let curve = curve_from(&truth, &log_freqs(16.7e-3, 50.0, 30));
        let bounds = EcmBounds::around(&truth, 2.0);
        let cfg = FitConfig {
            relative_weighting: true,
            ..FitConfig::default()
        };
        let fit = fit_ecm(&curve, &bounds, &cfg).unwrap();
        assert!(fit.mean_rel_error < 1e-4);
    }
}
