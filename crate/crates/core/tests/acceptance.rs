//! Acceptance suite: one test per release criterion, each printing a
//! PASS line once its tolerances hold. Run with
//! `cargo test --test acceptance -- --nocapture` to see the lines.

use eistk::cellsim::{
    simulate_response, volterra_single_sine_harmonics, CellModel, CellVariant, EcmTrajectory,
    OcvModel, ParamTrajectory,
};
use eistk::classical::{impedance_periodic, impedance_random, Taper};
use eistk::detect::{classify_record, DetectConfig, SystemClass};
use eistk::ecm::{ecm_impedance, fit_ecm, EcmBounds, EcmParams, FitConfig};
use eistk::nleis::{amplitude_sweep_extrapolate, leading_order_coeffs};
use eistk::signals::{
    design_multisine, render_multisine, AmplitudeProfile, MultisineSpec, TimeSeriesRecord,
};
use eistk::spectra::{dft, stft_window_gaussian, window_gabor_product};
use eistk::tvimp::{dmfa, dmfa_gaussian, operando_eis, stft_eis, OperandoConfig};
use num_complex::Complex64;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::Instant;

fn flat(rms: f64) -> AmplitudeProfile {
    AmplitudeProfile::Flat { rms }
}

fn quiet_cell(variant: CellVariant) -> CellModel {
    CellModel {
        variant,
        ocv: OcvModel::Constant(3.7),
        noise_i: 0.0,
        noise_v: 0.0,
    }
}

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

fn single_sine_cell_record(
    amp: f64,
    poly: (f64, f64, f64),
    extra_quintic: f64,
    periods: u32,
) -> TimeSeriesRecord {
    let spec = MultisineSpec::new(1.0, vec![1], vec![amp], vec![0.0], 256.0, 0).unwrap();
    let exc = render_multisine(&spec, periods, None).unwrap();
    let mut rec = exc.clone();
    rec.voltage = exc
        .current
        .iter()
        .map(|&i| poly.0 * i + poly.1 * i * i + poly.2 * i * i * i + extra_quintic * i.powi(5))
        .collect();
    rec
}

#[test]
fn criterion_01_classical_estimator_exactness() {
    // noiseless R // C multisine, N = 2e5 samples
    let (r, c) = (0.05, 1.0);
    let spec = design_multisine(0.01, 40.0, 40, 100.0, 100.0, flat(0.5), true, 1).unwrap();
    let p = 20u32;
    let exc = render_multisine(&spec, p, None).unwrap();
    assert_eq!(exc.len(), 200_000);
    let rec = simulate_response(&quiet_cell(CellVariant::ParallelRc { r, c }), &exc, 0).unwrap();

    let start = Instant::now();
    let curve = impedance_periodic(&rec, &spec, p).unwrap();
    let elapsed = start.elapsed();

    let mut worst = 0.0f64;
    for (&f, z) in curve.frequencies.iter().zip(&curve.values) {
        let w = 2.0 * PI * f;
        let expect = r / Complex64::new(1.0, w * r * c);
        worst = worst.max((z - expect).norm() / expect.norm());
    }
    assert!(worst < 1e-9, "max relative error {worst:.3e}");
    assert!(
        elapsed.as_secs_f64() < 5.0,
        "estimator took {:.2} s",
        elapsed.as_secs_f64()
    );
    println!(
        "PASS criterion 1: classical exactness, max rel err {worst:.2e}, {} ms at N = 2e5",
        elapsed.as_millis()
    );
}

#[test]
fn criterion_02_snr_scaling_law() {
    // median SNR ratio for P = 16 vs P = 4 equals 2 within +-25%
    let spec = design_multisine(1.0, 15.0, 5, 1.0, 64.0, flat(1.0), true, 6).unwrap();
    let sigma = 5e-4;
    let model = CellModel {
        variant: CellVariant::StaticPolynomial {
            a1: 0.05,
            a2: 0.0,
            a3: 0.0,
        },
        ocv: OcvModel::Constant(3.7),
        noise_i: 0.0,
        noise_v: sigma,
    };
    let cfg = DetectConfig::default();
    let mut ratios = Vec::new();
    for seed in 0..100u64 {
        let mut medians = [0.0f64; 2];
        for (slot, &p) in [4u32, 16].iter().enumerate() {
            let exc = render_multisine(&spec, p, None).unwrap();
            let rec = simulate_response(&model, &exc, 1000 + seed).unwrap();
            let report = classify_record(&rec, &spec, &cfg).unwrap();
            let mut snrs: Vec<f64> = report.snr_at_excited.iter().map(|s| s.snr).collect();
            snrs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            medians[slot] = snrs[snrs.len() / 2];
        }
        ratios.push(medians[1] / medians[0]);
    }
    ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median_ratio = ratios[ratios.len() / 2];
    assert!(
        (1.5..=2.5).contains(&median_ratio),
        "median SNR ratio {median_ratio}"
    );
    println!(
        "PASS criterion 2: SNR scaling, median ratio {median_ratio:.3} over {} runs (target 2.0 +- 25%)",
        ratios.len()
    );
}

#[test]
fn criterion_03_parity_separation() {
    // even-only static nonlinearity under ORP excitation
    let spec = design_multisine(1.0, 31.0, 10, 1.0, 256.0, flat(1.0), true, 2).unwrap();
    let exc = render_multisine(&spec, 8, None).unwrap();
    let model = CellModel {
        variant: CellVariant::StaticPolynomial {
            a1: 0.05,
            a2: 0.05,
            a3: 0.0,
        },
        ocv: OcvModel::Constant(3.7),
        noise_i: 0.0,
        noise_v: 1e-5,
    };
    let rec = simulate_response(&model, &exc, 3).unwrap();
    let report = classify_record(&rec, &spec, &DetectConfig::default()).unwrap();
    assert!(
        report.even_nl_db >= 20.0,
        "even level {:.1} dB below 20 dB",
        report.even_nl_db
    );
    assert!(
        report.odd_nl_db < 3.0,
        "odd level {:.1} dB above 3 dB",
        report.odd_nl_db
    );
    assert_eq!(report.classification, SystemClass::Nlti);
    assert!(report.even_dominant);
    println!(
        "PASS criterion 3: parity separation, even {:.1} dB / odd {:.1} dB, NLTI even-dominant",
        report.even_nl_db, report.odd_nl_db
    );
}

#[test]
fn criterion_04_nleis_oracle_match() {
    let a3 = 0.01;
    // noiseless cubic: Z_33 = a3 / 4 within 1e-6 relative
    let rec = single_sine_cell_record(1.0, (0.05, 0.0, a3), 0.0, 4);
    let nl = leading_order_coeffs(&rec, 3).unwrap();
    let z33 = nl.coeffs[&3];
    let expect = a3 / 4.0;
    let rel = (z33 - Complex64::new(expect, 0.0)).norm() / expect;
    assert!(rel < 1e-6, "Z_33 relative error {rel:.3e}");

    // amplitude sweep against an added quintic: intercept recovers a3 / 4
    let a5 = 0.004;
    let records: Vec<TimeSeriesRecord> = [0.4, 0.7, 1.0, 1.3]
        .iter()
        .map(|&amp| single_sine_cell_record(amp, (0.05, 0.0, a3), a5, 2))
        .collect();
    let intercept = amplitude_sweep_extrapolate(&records, 3).unwrap();
    let rel_sweep = (intercept.re - expect).abs() / expect;
    assert!(rel_sweep < 0.01, "sweep intercept error {rel_sweep:.3e}");
    println!(
        "PASS criterion 4: NLEIS, Z_33 rel err {rel:.1e}, sweep intercept err {rel_sweep:.1e}"
    );
}

#[test]
fn criterion_05_bla_amplitude_dependence() {
    let (a1, a3) = (0.05, 0.01);
    let amp = 0.6;
    let bla_at = |i_amp: f64| -> f64 {
        let rec = single_sine_cell_record(i_amp, (a1, 0.0, a3), 0.0, 4);
        leading_order_coeffs(&rec, 1).unwrap().coeffs[&1].re
    };
    let diff = bla_at(2.0 * amp) - bla_at(amp);
    let expect = 0.75 * a3 * 3.0 * amp * amp;
    let rel = (diff - expect).abs() / expect;
    assert!(rel < 0.01, "BLA difference error {rel:.3e}");
    println!(
        "PASS criterion 5: BLA amplitude dependence, (3/4) a3 3I^2 matched to {rel:.1e}"
    );
}

#[test]
fn criterion_06_stft_dmfa_equivalence_on_ltv() {
    // tones four harmonics apart; Gaussian pair with lambda = 0.02
    let spec = MultisineSpec::new(
        16.0,
        vec![5, 9, 13, 17, 21, 25],
        vec![0.2; 6],
        vec![0.3, 2.2, 4.1, 1.0, 5.5, 3.3],
        64.0,
        0,
    )
    .unwrap();
    let exc = render_multisine(&spec, 16, None).unwrap();
    let theta = battery_theta();
    let mut traj = EcmTrajectory::constant(&theta);
    traj.rct = ParamTrajectory::Linear {
        start: theta.rct,
        end: theta.rct * 1.5,
    };
    let mut model = quiet_cell(CellVariant::EcmTimeVarying(traj.clone()));
    model.ocv = OcvModel::Constant(0.0);
    let rec = simulate_response(&model, &exc, 0).unwrap();
    let n = rec.len();
    let duration = rec.duration_s();

    let lambda = 0.02;
    let n_w_filter = 64;
    let dm = dmfa_gaussian(&rec, &spec, lambda, n_w_filter).unwrap();
    let st = stft_eis(&rec, &spec, lambda, 4096, n / n_w_filter).unwrap();

    let mid_freqs = [2usize, 3]; // 13/16 and 17/16 Hz
    let mut worst_pair = 0.0f64;
    let mut worst_truth = 0.0f64;
    let mut compared = 0;
    for m in 0..spec.excited_harmonics.len() {
        for (ld, &td) in dm.times.iter().enumerate() {
            let frac = td / duration;
            if !(0.25..0.75).contains(&frac) {
                continue;
            }
            let Some(ls) = st.times.iter().position(|&ts| (ts - td).abs() < 0.5 / rec.fs)
            else {
                continue;
            };
            let (Some(zd), Some(zs)) = (dm.values[m][ld], st.values[m][ls]) else {
                continue;
            };
            worst_pair = worst_pair.max((zd - zs).norm() / zs.norm());
            compared += 1;
            if mid_freqs.contains(&m) {
                let truth =
                    eistk::ecm::ecm_impedance(&traj.params_at(frac), &[2.0 * PI * dm.frequencies[m]])
                        .unwrap()[0];
                worst_truth = worst_truth.max((zd - truth).norm() / truth.norm());
                worst_truth = worst_truth.max((zs - truth).norm() / truth.norm());
            }
        }
    }
    assert!(compared > 50, "only {compared} comparable interior points");
    assert!(worst_pair < 0.01, "pair disagreement {worst_pair:.3e}");
    assert!(worst_truth < 0.03, "ground-truth error {worst_truth:.3e}");
    println!(
        "PASS criterion 6: STFT/DMFA equivalence, pair {worst_pair:.2e}, truth {worst_truth:.2e} over {compared} points"
    );
}

#[test]
fn criterion_07_gabor_product() {
    let lambda = 4.0_f64;
    let fs = 200.0;
    let half = (8.0 / lambda.sqrt() * fs).ceil() as usize;
    let w = stft_window_gaussian(lambda, half, fs).unwrap();
    let (st2, sw2) = window_gabor_product(&w, fs).unwrap();
    let prod = st2 * sw2;
    assert!((prod - 0.25).abs() < 1e-4, "sigma_t^2 sigma_w^2 = {prod}");
    println!("PASS criterion 7: Gabor product {prod:.6} = 0.25 +- 1e-4");
}

#[test]
fn criterion_08_operando_low_frequency_recovery() {
    // charging cell: 2.4 A offset, OCV rising linearly with SOC, Rct +50%
    let start = Instant::now();
    let tp = 180.0;
    let fs = 16.0;
    let p = 16u32;
    let spec = design_multisine(1.0 / tp, 2.0, 20, tp, fs, flat(0.8), true, 4).unwrap();
    let n = spec.samples_per_period() * p as usize;
    assert!(n <= 400_000);
    let offset = vec![2.4; n];
    let exc = render_multisine(&spec, p, Some(&offset)).unwrap();

    let theta = battery_theta();
    let mut traj = EcmTrajectory::constant(&theta);
    traj.rct = ParamTrajectory::Linear {
        start: theta.rct,
        end: theta.rct * 1.5,
    };
    let capacity_as = 4.8 * 3600.0;
    let ocv_slope = 0.7; // volts per unit SOC, linear table
    let model = CellModel {
        variant: CellVariant::EcmTimeVarying(traj.clone()),
        ocv: OcvModel::SocTable {
            soc: vec![0.0, 1.0],
            ocv_v: vec![3.2, 3.9],
            capacity_as,
            initial_soc: 0.1,
        },
        noise_i: 0.0,
        noise_v: 2e-5,
    };
    let rec = simulate_response(&model, &exc, 9).unwrap();

    // true impedance: circuit plus the capacitance of the linearised OCV
    let c_ocv = capacity_as / ocv_slope;
    let truth = |m: usize, frac: f64| -> Complex64 {
        let w = 2.0 * PI * spec.frequencies_hz()[m];
        ecm_impedance(&traj.params_at(frac), &[w]).unwrap()[0]
            + 1.0 / (Complex64::new(0.0, w) * c_ocv)
    };
    let duration = rec.duration_s();
    let low_band: Vec<usize> = spec
        .frequencies_hz()
        .iter()
        .enumerate()
        .filter(|(_, &f)| f <= 10.0 / tp)
        .map(|(m, _)| m)
        .collect();
    assert!(low_band.len() >= 3, "lowest decade holds {} lines", low_band.len());

    // operando with drift modelling
    let cfg = OperandoConfig {
        n_p: 2,
        n_q: 6,
        ..OperandoConfig::default()
    };
    let res = operando_eis(&rec, &spec, &cfg).unwrap();
    let mut worst_op = 0.0f64;
    for &m in &low_band {
        for (l, &t) in res.tvimp.times.iter().enumerate() {
            let frac = t / duration;
            if !(0.1..0.9).contains(&frac) {
                continue;
            }
            let z = res.tvimp.values[m][l].expect("operando row masked");
            let tr = truth(m, frac);
            worst_op = worst_op.max((z - tr).norm() / tr.norm());
        }
    }
    assert!(
        worst_op < 0.02,
        "operando error {worst_op:.3e} at the lowest decade"
    );

    // naive STFT at the same lines
    let n_w = 2 * spec.samples_per_period(); // two fundamental periods
    let lambda = 1.0 / (2.0 * (n_w as f64 / (8.0 * fs)).powi(2));
    let st = stft_eis(&rec, &spec, lambda, n_w, n / 64).unwrap();
    let mut worst_stft = 0.0f64;
    for &m in &low_band {
        for (l, &t) in st.times.iter().enumerate() {
            let frac = t / duration;
            if !(0.1..0.9).contains(&frac) {
                continue;
            }
            if let Some(z) = st.values[m][l] {
                let tr = truth(m, frac);
                worst_stft = worst_stft.max((z - tr).norm() / tr.norm());
            }
        }
    }

    // naive DMFA: default band inside the inter-line gaps
    let n_bins = eistk::spectra::default_band_bins(&spec.excited_bins(p), n).unwrap();
    let filt = eistk::spectra::QuadratureFilter::new(
        8.0,
        2.0 * PI * fs / n as f64 * (n_bins as f64 / 4.0),
        n_bins,
    )
    .unwrap();
    let dm = dmfa(&rec, &spec, &filt).unwrap();
    let mut worst_dmfa = 0.0f64;
    for &m in &low_band {
        for (l, &t) in dm.times.iter().enumerate() {
            let frac = t / duration;
            if !(0.1..0.9).contains(&frac) {
                continue;
            }
            if let Some(z) = dm.values[m][l] {
                let tr = truth(m, frac);
                worst_dmfa = worst_dmfa.max((z - tr).norm() / tr.norm());
            }
        }
    }

    assert!(
        worst_stft > 0.10,
        "naive STFT unexpectedly accurate at the lowest decade: {worst_stft:.3e}"
    );
    assert!(
        worst_dmfa > 0.10,
        "naive DMFA unexpectedly accurate at the lowest decade: {worst_dmfa:.3e}"
    );
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 60.0, "criterion took {elapsed:.1} s");
    println!(
        "PASS criterion 8: operando {worst_op:.2e} vs naive STFT {worst_stft:.2} / DMFA {worst_dmfa:.2} relative error at the lowest decade ({elapsed:.1} s)"
    );
}

#[test]
fn criterion_09_ecm_round_trip() {
    use rand::{Rng, SeedableRng};
    let truth = battery_theta();
    let freqs: Vec<f64> = (0..60)
        .map(|i| 16.7e-3 * (50.0f64 / 16.7e-3).powf(i as f64 / 59.0))
        .collect();
    let omegas: Vec<f64> = freqs.iter().map(|f| 2.0 * PI * f).collect();
    let clean = eistk::classical::ImpedanceCurve {
        frequencies: freqs.clone(),
        values: ecm_impedance(&truth, &omegas).unwrap(),
        std: None,
        meta: eistk::classical::EstimatorMeta::default(),
    };
    let bounds = EcmBounds::around(&truth, 2.0);
    let fit = fit_ecm(&clean, &bounds, &FitConfig::default()).unwrap();
    let mut worst_param = 0.0f64;
    for (t, f) in truth.as_array().iter().zip(fit.params.as_array()) {
        worst_param = worst_param.max((f - t).abs() / t);
    }
    assert!(worst_param < 1e-3, "parameter error {worst_param:.3e}");
    assert!(fit.mean_rel_error < 1e-6, "clean mre {:.3e}", fit.mean_rel_error);

    let mut noisy = clean.clone();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
    for z in noisy.values.iter_mut() {
        let re: f64 = rng.sample(rand_distr::StandardNormal);
        let im: f64 = rng.sample(rand_distr::StandardNormal);
        *z *= Complex64::new(1.0 + 0.002 * re, 0.002 * im);
    }
    let fit_noisy = fit_ecm(&noisy, &bounds, &FitConfig::default()).unwrap();
    assert!(
        fit_noisy.mean_rel_error < 0.005,
        "noisy mre {:.3e}",
        fit_noisy.mean_rel_error
    );
    println!(
        "PASS criterion 9: ECM round trip, params {worst_param:.1e}, clean mre {:.1e}, noisy mre {:.2e}",
        fit.mean_rel_error, fit_noisy.mean_rel_error
    );
}

#[test]
fn criterion_10_degenerate_equivalences() {
    let spec = design_multisine(1.0 / 16.0, 8.0, 10, 16.0, 64.0, flat(0.5), true, 11).unwrap();
    let exc = render_multisine(&spec, 8, None).unwrap();
    let rec = simulate_response(
        &quiet_cell(CellVariant::ParallelRc { r: 0.05, c: 1.0 }),
        &exc,
        0,
    )
    .unwrap();
    let periodic = impedance_periodic(&rec, &spec, 8).unwrap();

    // operando with N_p = N_q = 0
    let cfg = OperandoConfig {
        n_p: 0,
        n_q: 0,
        ..OperandoConfig::default()
    };
    let res = operando_eis(&rec, &spec, &cfg).unwrap();
    let mut worst_op = 0.0f64;
    for (m, z_cl) in periodic.values.iter().enumerate() {
        for cell in &res.tvimp.values[m] {
            worst_op = worst_op.max((cell.unwrap() - z_cl).norm());
        }
    }
    assert!(worst_op < 1e-9, "operando deviation {worst_op:.3e}");

    // random estimator on a single periodic record
    let random = impedance_random(std::slice::from_ref(&rec), Taper::Hann).unwrap();
    let mut worst_rand = 0.0f64;
    for (&f, z_cl) in periodic.frequencies.iter().zip(&periodic.values) {
        let idx = random
            .frequencies
            .iter()
            .position(|&fr| (fr - f).abs() < 1e-9)
            .expect("excited bin missing from the random estimate");
        worst_rand = worst_rand.max((random.values[idx] - z_cl).norm());
    }
    assert!(worst_rand < 1e-10, "random deviation {worst_rand:.3e}");
    println!(
        "PASS criterion 10: degenerate equivalences, operando {worst_op:.1e}, random {worst_rand:.1e}"
    );
}

#[test]
fn criterion_11_volterra_oracle_brute_force() {
    // combinatorial oracle against pointwise polynomial + DFT, n <= 5, h <= 5;
    // adjudicates the V_31 prefactor in favour of the 2^(n-1) main-text rule
    let n_samples = 128;
    let i_amp = 0.75;
    let mut worst = 0.0f64;
    for order in 1..=5u32 {
        let mut kernels = BTreeMap::new();
        kernels.insert(order, Complex64::new(1.0, 0.0));
        let oracle = volterra_single_sine_harmonics(&kernels, i_amp, 1.0).unwrap();
        let x: Vec<f64> = (0..n_samples)
            .map(|idx| {
                let i = i_amp * (2.0 * PI * idx as f64 / n_samples as f64).cos();
                i.powi(order as i32)
            })
            .collect();
        let s = dft(&x, n_samples as f64).unwrap();
        for h in 0..=5u32 {
            let from_dft = if h == 0 {
                s.bins[0]
            } else {
                s.bins[h as usize] * 2.0
            };
            let from_oracle = oracle
                .phasors
                .get(&h)
                .copied()
                .unwrap_or(Complex64::new(0.0, 0.0));
            worst = worst.max((from_dft - from_oracle).norm());
        }
    }
    assert!(worst < 1e-9, "oracle mismatch {worst:.3e}");
    // the cubic's fundamental term carries 3/4, not 3/8
    let mut kernels = BTreeMap::new();
    kernels.insert(3u32, Complex64::new(1.0, 0.0));
    let v31 = volterra_single_sine_harmonics(&kernels, 1.0, 1.0).unwrap().phasors[&1];
    assert!((v31.re - 0.75).abs() < 1e-12);
    println!("PASS criterion 11: Volterra oracle vs brute force, worst {worst:.1e}; V_31 = 3/4 Z_3 I^3");
}
