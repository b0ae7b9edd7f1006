//! Command-line front end for the impedance toolkit: design an excitation,
//! simulate a synthetic cell (or ingest lab CSV data), detect nonlinearity
//! and nonstationarity, run the estimators, and fit the equivalent circuit.
//!
//! Every run writes its fully resolved configuration next to the outputs so
//! results are reproducible from the artifacts alone. Exit codes: 0 success,
//! 2 validation error, 3 numerical failure.

use clap::{Args, Parser, Subcommand};
use eistk::cellsim::{simulate_response, CellModel};
use eistk::classical::{impedance_periodic, impedance_random, kk_consistency, Taper};
use eistk::detect::{classify_record, DetectConfig};
use eistk::ecm::{fit_ecm, fit_ecm_trajectory, EcmBounds, FitConfig, SwarmConfig};
use eistk::io;
use eistk::nleis::{bla_estimate, leading_order_coeffs};
use eistk::signals::{design_multisine, render_multisine, AmplitudeProfile, MultisineSpec,
    TimeSeriesRecord};
use eistk::spectra::{default_band_bins, QuadratureFilter};
use eistk::tvimp::{dmfa, operando_eis, stft_eis, OperandoConfig};
use eistk::Error;
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "eistk", version, about = "Impedance estimation toolkit")]
struct Cli {
    /// JSON file with defaults for the subcommand's parameters (explicit
    /// flags win).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Design a multisine excitation and optionally render it to CSV.
    Design(DesignArgs),
    /// Simulate a synthetic cell driven by a designed excitation.
    Simulate(SimulateArgs),
    /// Classify a record as LTI / NLTI / LTV / NLTV.
    Detect(DetectArgs),
    /// Estimate impedance data from a record.
    Estimate(EstimateArgs),
    /// Fit the equivalent circuit to impedance data.
    Fit(FitArgs),
}

#[derive(Args)]
struct DesignArgs {
    #[arg(long)]
    fmin: Option<f64>,
    #[arg(long)]
    fmax: Option<f64>,
    /// Number of target frequencies (defaults to one per third-octave).
    #[arg(long)]
    n: Option<usize>,
    /// Period of the multisine in seconds.
    #[arg(long)]
    tp: Option<f64>,
    #[arg(long)]
    fs: Option<f64>,
    /// Excite odd harmonics only (ORP grid).
    #[arg(long)]
    odd: bool,
    /// Total RMS of the rendered current, amperes.
    #[arg(long)]
    rms: Option<f64>,
    /// Amplitude profile: "flat" or "invsqrtf".
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Periods to render into the CSV output.
    #[arg(long)]
    periods: Option<u32>,
    /// Constant current offset added to the rendered excitation, amperes.
    #[arg(long)]
    offset: Option<f64>,
    #[arg(long)]
    out_spec: Option<PathBuf>,
    #[arg(long)]
    out_csv: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Multisine spec JSON produced by `design`.
    #[arg(long)]
    spec: PathBuf,
    /// Cell model JSON.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    periods: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// Constant current offset, amperes (e.g. a charging current).
    #[arg(long)]
    offset: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DetectArgs {
    /// Time-series CSV (`t_s,i_a,v_v`).
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    periods: Option<u32>,
    #[arg(long)]
    threshold_db: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    /// periodic | random | stft | dmfa | operando | nleis | bla
    #[arg(long)]
    method: String,
    /// Input record(s); `random` accepts the flag repeatedly.
    #[arg(long, required = true)]
    input: Vec<PathBuf>,
    /// Multisine spec JSON (not needed for `random`).
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    periods: Option<u32>,
    /// Gaussian window parameter for stft, 1/s^2.
    #[arg(long)]
    lambda: Option<f64>,
    /// Window / band width in samples (stft) or bins (dmfa).
    #[arg(long)]
    nw: Option<usize>,
    /// Center stride in samples for stft.
    #[arg(long)]
    stride: Option<usize>,
    /// Quadrature filter roll-off for dmfa.
    #[arg(long)]
    q: Option<f64>,
    /// Impedance basis order for operando.
    #[arg(long)]
    np: Option<usize>,
    /// Drift basis order for operando.
    #[arg(long)]
    nq: Option<usize>,
    /// Local band half-width in bins for operando.
    #[arg(long)]
    half_width: Option<usize>,
    /// Output time samples for operando.
    #[arg(long)]
    points: Option<usize>,
    /// Highest harmonic for nleis.
    #[arg(long)]
    hmax: Option<u32>,
    /// Taper for `random`: "hann" or "rect".
    #[arg(long)]
    taper: Option<String>,
    /// Run the Voigt-chain consistency check on the estimated curve.
    #[arg(long)]
    kk: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    /// Impedance curve CSV, or a long-format time-varying CSV with
    /// `--trajectory`.
    #[arg(long)]
    input: PathBuf,
    /// Restrict the fit to `lo:hi` in Hz.
    #[arg(long)]
    band: Option<String>,
    /// Bounds JSON (`{"lo": {...}, "hi": {...}}`); defaults are seeded from
    /// the curve.
    #[arg(long)]
    bounds: Option<PathBuf>,
    #[arg(long)]
    particles: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Weight residuals relative to |Z|.
    #[arg(long)]
    relative: bool,
    /// Fit every time slice of a time-varying CSV.
    #[arg(long)]
    trajectory: bool,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let config = match load_config(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let result = match cli.command {
        Command::Design(args) => cmd_design(args, &config),
        Command::Simulate(args) => cmd_simulate(args, &config),
        Command::Detect(args) => cmd_detect(args, &config),
        Command::Estimate(args) => cmd_estimate(args, &config),
        Command::Fit(args) => cmd_fit(args, &config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        Error::Numerical(_) => ExitCode::from(3),
        _ => ExitCode::from(2),
    }
}

fn load_config(path: Option<&Path>) -> Result<Value, Error> {
    match path {
        Some(p) => io::read_json(p),
        None => Ok(Value::Null),
    }
}

fn cfg_f64(config: &Value, key: &str) -> Option<f64> {
    config.get(key).and_then(Value::as_f64)
}

fn cfg_u64(config: &Value, key: &str) -> Option<u64> {
    config.get(key).and_then(Value::as_u64)
}

fn cfg_bool(config: &Value, key: &str) -> Option<bool> {
    config.get(key).and_then(Value::as_bool)
}

fn cfg_str(config: &Value, key: &str) -> Option<String> {
    config
        .get(key)
        .and_then(Value::as_str)
        .map(str::to_string)
}

/// Write the resolved configuration next to an output file.
fn write_resolved_config(out: &Path, resolved: &Value) -> Result<(), Error> {
    let mut path = out.to_path_buf();
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "run".into());
    path.set_file_name(format!("{stem}.config.json"));
    io::write_json(&path, resolved)
}

fn load_record(
    path: &Path,
    spec: Option<&MultisineSpec>,
    periods: Option<u32>,
) -> Result<TimeSeriesRecord, Error> {
    let mut rec = io::read_timeseries_csv(path)?;
    if let Some(spec) = spec {
        let spp = spec.samples_per_period();
        let p = match periods {
            Some(p) => p,
            None => {
                if rec.len() % spp != 0 {
                    return Err(Error::invalid(format!(
                        "{}: {} samples is not an integer number of periods (Tp fs = {spp})",
                        path.display(),
                        rec.len()
                    )));
                }
                (rec.len() / spp) as u32
            }
        };
        if rec.len() != spp * p as usize {
            return Err(Error::invalid(format!(
                "{}: expected P Tp fs = {} samples, found {}",
                path.display(),
                spp * p as usize,
                rec.len()
            )));
        }
        rec.n_periods = p;
        rec.fs = spec.fs; // CSV timestamps are rounded; the spec is exact
        rec.spec = Some(spec.clone());
    }
    Ok(rec)
}

fn cmd_design(args: DesignArgs, config: &Value) -> Result<(), Error> {
    let fmin = args
        .fmin
        .or(cfg_f64(config, "fmin"))
        .ok_or_else(|| Error::invalid("design: --fmin required"))?;
    let fmax = args
        .fmax
        .or(cfg_f64(config, "fmax"))
        .ok_or_else(|| Error::invalid("design: --fmax required"))?;
    let tp = args
        .tp
        .or(cfg_f64(config, "tp"))
        .ok_or_else(|| Error::invalid("design: --tp required"))?;
    let fs = args.fs.or(cfg_f64(config, "fs")).unwrap_or(200.0);
    let n = args
        .n
        .or(cfg_u64(config, "n").map(|v| v as usize))
        .unwrap_or_else(|| {
            // dense log grid, about 18 lines per decade
            ((fmax / fmin).log10() * 18.3).round().max(1.0) as usize
        });
    let odd = args.odd || cfg_bool(config, "odd").unwrap_or(false);
    let rms = args.rms.or(cfg_f64(config, "rms")).unwrap_or(0.8);
    let profile_name = args
        .profile
        .or(cfg_str(config, "profile"))
        .unwrap_or_else(|| "invsqrtf".into());
    let profile = match profile_name.as_str() {
        "flat" => AmplitudeProfile::Flat { rms },
        "invsqrtf" => AmplitudeProfile::InvSqrtF { rms },
        other => {
            return Err(Error::invalid(format!(
                "design: unknown profile {other:?} (flat | invsqrtf)"
            )))
        }
    };
    let seed = args.seed.or(cfg_u64(config, "seed")).unwrap_or(0);
    let periods = args
        .periods
        .or(cfg_u64(config, "periods").map(|v| v as u32))
        .unwrap_or(1);
    let offset = args.offset.or(cfg_f64(config, "offset")).unwrap_or(0.0);

    let spec = design_multisine(fmin, fmax, n, tp, fs, profile, odd, seed)?;

    println!(
        "designed {} harmonics over [{:.4e}, {:.4e}] Hz (Tp = {tp} s, fs = {fs} Hz)",
        spec.excited_harmonics.len(),
        spec.frequencies_hz()[0],
        spec.frequencies_hz().last().unwrap()
    );
    println!("{:>8} {:>14} {:>12} {:>10}", "h", "f_hz", "amp_a", "phase_rad");
    for (((&h, &f), &a), &ph) in spec
        .excited_harmonics
        .iter()
        .zip(&spec.frequencies_hz())
        .zip(&spec.amplitudes)
        .zip(&spec.phases)
    {
        println!("{h:>8} {f:>14.6e} {a:>12.5e} {ph:>10.6}");
    }

    let resolved = json!({
        "command": "design", "fmin": fmin, "fmax": fmax, "n": n, "tp": tp,
        "fs": fs, "odd": odd, "rms": rms, "profile": profile_name,
        "seed": seed, "periods": periods, "offset": offset,
        "harmonics_designed": spec.excited_harmonics.len(),
    });
    if let Some(out_spec) = &args.out_spec {
        io::write_json(out_spec, &spec)?;
        write_resolved_config(out_spec, &resolved)?;
        println!("spec written to {}", out_spec.display());
    }
    if let Some(out_csv) = &args.out_csv {
        let n_total = spec.samples_per_period() * periods as usize;
        let offset_traj = vec![offset; n_total];
        let rec = render_multisine(&spec, periods, Some(&offset_traj))?;
        io::write_timeseries_csv(out_csv, &rec)?;
        if args.out_spec.is_none() {
            write_resolved_config(out_csv, &resolved)?;
        }
        println!("rendered {periods} period(s) to {}", out_csv.display());
    }
    Ok(())
}

fn cmd_simulate(args: SimulateArgs, config: &Value) -> Result<(), Error> {
    let spec: MultisineSpec = io::read_json(&args.spec)?;
    spec.validate()?;
    let model: CellModel = io::read_json(&args.model)?;
    let periods = args
        .periods
        .or(cfg_u64(config, "periods").map(|v| v as u32))
        .unwrap_or(1);
    let seed = args.seed.or(cfg_u64(config, "seed")).unwrap_or(0);
    let offset = args.offset.or(cfg_f64(config, "offset")).unwrap_or(0.0);

    let n_total = spec.samples_per_period() * periods as usize;
    let offset_traj = vec![offset; n_total];
    let excitation = render_multisine(&spec, periods, Some(&offset_traj))?;
    let rec = simulate_response(&model, &excitation, seed)?;
    io::write_timeseries_csv(&args.out, &rec)?;

    let resolved = json!({
        "command": "simulate", "spec": args.spec.display().to_string(),
        "model": args.model.display().to_string(), "periods": periods,
        "seed": seed, "offset": offset, "samples": rec.len(),
    });
    write_resolved_config(&args.out, &resolved)?;
    println!(
        "simulated {} samples ({periods} period(s)) to {}",
        rec.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_detect(args: DetectArgs, config: &Value) -> Result<(), Error> {
    let spec: MultisineSpec = io::read_json(&args.spec)?;
    spec.validate()?;
    let rec = load_record(&args.input, Some(&spec), args.periods)?;
    let mut det_cfg = DetectConfig::default();
    if let Some(th) = args.threshold_db.or(cfg_f64(config, "threshold_db")) {
        det_cfg.threshold_db = th;
    }
    let report = classify_record(&rec, &spec, &det_cfg)?;

    println!(
        "verdict: {} (even {:.1} dB, odd {:.1} dB, skirt {:.1} dB vs noise, threshold {:.1} dB)",
        report.classification,
        report.even_nl_db,
        report.odd_nl_db,
        report.skirt_db,
        report.threshold_db
    );
    println!("{:>8} {:>14} {:>12}", "h", "f_hz", "snr");
    for s in &report.snr_at_excited {
        println!("{:>8} {:>14.6e} {:>12.4e}", s.harmonic, s.freq_hz, s.snr);
    }

    if let Some(out) = &args.out {
        io::write_json(out, &report)?;
        let resolved = json!({
            "command": "detect", "input": args.input.display().to_string(),
            "spec": args.spec.display().to_string(),
            "periods": rec.n_periods, "threshold_db": det_cfg.threshold_db,
        });
        write_resolved_config(out, &resolved)?;
    }
    Ok(())
}

fn cmd_estimate(args: EstimateArgs, config: &Value) -> Result<(), Error> {
    let spec: Option<MultisineSpec> = match &args.spec {
        Some(p) => {
            let s: MultisineSpec = io::read_json(p)?;
            s.validate()?;
            Some(s)
        }
        None => None,
    };
    let need_spec = || {
        spec.clone()
            .ok_or_else(|| Error::invalid("estimate: --spec required for this method"))
    };
    let mut resolved = json!({
        "command": "estimate", "method": args.method,
        "input": args.input.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "spec": args.spec.as_ref().map(|p| p.display().to_string()),
    });
    let kk_requested = args.kk || cfg_bool(config, "kk").unwrap_or(false);
    let run_kk = |curve: &eistk::classical::ImpedanceCurve| -> Result<(), Error> {
        if kk_requested {
            let report = kk_consistency(curve, None, 0.01)?;
            println!(
                "kk consistency: {} (imag residual {:.3e}, real {:.3e}, {} elements)",
                if report.pass { "PASS" } else { "FAIL" },
                report.fit_error_imag,
                report.fit_error_real,
                report.n_voigt
            );
        }
        Ok(())
    };

    match args.method.as_str() {
        "periodic" => {
            let spec = need_spec()?;
            let rec = load_record(&args.input[0], Some(&spec), args.periods)?;
            let curve = impedance_periodic(&rec, &spec, rec.n_periods)?;
            io::write_impedance_csv(&args.out, &curve)?;
            run_kk(&curve)?;
            resolved["periods"] = json!(rec.n_periods);
            println!("{} impedance points to {}", curve.len(), args.out.display());
        }
        "random" => {
            let records: Vec<TimeSeriesRecord> = args
                .input
                .iter()
                .map(|p| load_record(p, None, None))
                .collect::<Result<_, _>>()?;
            let taper_name = args
                .taper
                .clone()
                .or(cfg_str(config, "taper"))
                .unwrap_or_else(|| "hann".into());
            let taper = match taper_name.as_str() {
                "hann" => Taper::Hann,
                "rect" => Taper::Rectangular,
                other => {
                    return Err(Error::invalid(format!(
                        "estimate: unknown taper {other:?} (hann | rect)"
                    )))
                }
            };
            let curve = impedance_random(&records, taper)?;
            io::write_impedance_csv(&args.out, &curve)?;
            run_kk(&curve)?;
            resolved["taper"] = json!(taper_name);
            resolved["records"] = json!(records.len());
            println!("{} impedance points to {}", curve.len(), args.out.display());
        }
        "stft" => {
            let spec = need_spec()?;
            let rec = load_record(&args.input[0], Some(&spec), args.periods)?;
            let lambda = args
                .lambda
                .or(cfg_f64(config, "lambda"))
                .ok_or_else(|| Error::invalid("estimate stft: --lambda required"))?;
            let n_w = args
                .nw
                .or(cfg_u64(config, "nw").map(|v| v as usize))
                .unwrap_or(rec.len() / 4 / 2 * 2);
            let stride = args
                .stride
                .or(cfg_u64(config, "stride").map(|v| v as usize))
                .unwrap_or_else(|| (rec.len() / 100).max(1));
            let tv = stft_eis(&rec, &spec, lambda, n_w, stride)?;
            io::write_tv_csv(&args.out, &tv)?;
            resolved["lambda"] = json!(lambda);
            resolved["nw"] = json!(n_w);
            resolved["stride"] = json!(stride);
            println!(
                "stft surface {} x {} to {}",
                tv.frequencies.len(),
                tv.times.len(),
                args.out.display()
            );
        }
        "dmfa" => {
            let spec = need_spec()?;
            let rec = load_record(&args.input[0], Some(&spec), args.periods)?;
            let n = rec.len();
            let n_w = match args.nw.or(cfg_u64(config, "nw").map(|v| v as usize)) {
                Some(v) => v,
                None => default_band_bins(&spec.excited_bins(rec.n_periods), n)?,
            };
            let q = args.q.or(cfg_f64(config, "q")).unwrap_or(8.0);
            let bin_spacing = 2.0 * std::f64::consts::PI * rec.fs / n as f64;
            let filt = QuadratureFilter::new(q, bin_spacing * (n_w as f64 / 4.0), n_w)?;
            let tv = dmfa(&rec, &spec, &filt)?;
            io::write_tv_csv(&args.out, &tv)?;
            resolved["q"] = json!(q);
            resolved["nw"] = json!(n_w);
            println!(
                "dmfa surface {} x {} to {}",
                tv.frequencies.len(),
                tv.times.len(),
                args.out.display()
            );
        }
        "operando" => {
            let spec = need_spec()?;
            let rec = load_record(&args.input[0], Some(&spec), args.periods)?;
            let mut op_cfg = OperandoConfig::default();
            if let Some(v) = args.np.or(cfg_u64(config, "np").map(|v| v as usize)) {
                op_cfg.n_p = v;
            }
            if let Some(v) = args.nq.or(cfg_u64(config, "nq").map(|v| v as usize)) {
                op_cfg.n_q = v;
            } else {
                op_cfg.n_q = op_cfg.n_q.max(op_cfg.n_p);
            }
            op_cfg.band_halfwidth = args
                .half_width
                .or(cfg_u64(config, "half_width").map(|v| v as usize));
            if let Some(v) = args.points.or(cfg_u64(config, "points").map(|v| v as usize)) {
                op_cfg.output_times = v;
            }
            let res = operando_eis(&rec, &spec, &op_cfg)?;
            io::write_tv_csv(&args.out, &res.tvimp)?;
            // JSON sidecar with drift, distortion and conditioning data
            let mut sidecar_path = args.out.clone();
            let stem = sidecar_path
                .file_stem()
                .map(|s| s.to_string_lossy().to_string())
                .unwrap_or_else(|| "operando".into());
            sidecar_path.set_file_name(format!("{stem}.sidecar.json"));
            let sidecar = json!({
                "drift_coeffs": res.drift_coeffs.iter()
                    .map(|c| json!({"re": c.re, "im": c.im})).collect::<Vec<_>>(),
                "distortion_coeffs": res.distortion_coeffs,
                "condition_numbers": res.condition_numbers,
                "basis_order": res.tvimp.basis_order,
            });
            io::write_json(&sidecar_path, &sidecar)?;
            resolved["np"] = json!(op_cfg.n_p);
            resolved["nq"] = json!(op_cfg.n_q);
            resolved["points"] = json!(op_cfg.output_times);
            println!(
                "operando surface {} x {} to {} (sidecar {})",
                res.tvimp.frequencies.len(),
                res.tvimp.times.len(),
                args.out.display(),
                sidecar_path.display()
            );
        }
        "nleis" => {
            let spec = need_spec()?;
            let rec = load_record(&args.input[0], Some(&spec), args.periods)?;
            let h_max = args
                .hmax
                .or(cfg_u64(config, "hmax").map(|v| v as u32))
                .unwrap_or(5);
            let nl = leading_order_coeffs(&rec, h_max)?;
            io::atomic_write(&args.out, &io::nlcoeffs_csv(&nl))?;
            resolved["hmax"] = json!(h_max);
            println!(
                "{} nonlinear coefficients to {}",
                nl.coeffs.len(),
                args.out.display()
            );
        }
        "bla" => {
            let spec = need_spec()?;
            let rec = load_record(&args.input[0], Some(&spec), args.periods)?;
            let bla = bla_estimate(&rec, &spec, rec.n_periods)?;
            io::write_impedance_csv(&args.out, &bla.curve)?;
            let mut sidecar_path = args.out.clone();
            let stem = sidecar_path
                .file_stem()
                .map(|s| s.to_string_lossy().to_string())
                .unwrap_or_else(|| "bla".into());
            sidecar_path.set_file_name(format!("{stem}.distortion.json"));
            io::write_json(&sidecar_path, &bla.distortion)?;
            run_kk(&bla.curve)?;
            println!(
                "bla curve to {} (even {:.1} dB, odd {:.1} dB vs noise)",
                args.out.display(),
                bla.distortion.even_db_vs_floor,
                bla.distortion.odd_db_vs_floor
            );
        }
        other => {
            return Err(Error::invalid(format!(
                "estimate: unknown method {other:?} \
                 (periodic | random | stft | dmfa | operando | nleis | bla)"
            )))
        }
    }
    write_resolved_config(&args.out, &resolved)?;
    Ok(())
}

fn parse_band(band: &str) -> Result<(f64, f64), Error> {
    let parts: Vec<&str> = band.split(':').collect();
    if parts.len() != 2 {
        return Err(Error::invalid("fit: --band must be lo:hi in Hz"));
    }
    let lo: f64 = parts[0]
        .parse()
        .map_err(|_| Error::invalid("fit: cannot parse band lower edge"))?;
    let hi: f64 = parts[1]
        .parse()
        .map_err(|_| Error::invalid("fit: cannot parse band upper edge"))?;
    if lo >= hi {
        return Err(Error::invalid("fit: band lower edge must be below upper"));
    }
    Ok((lo, hi))
}

fn restrict_band(
    curve: &eistk::classical::ImpedanceCurve,
    band: Option<(f64, f64)>,
) -> eistk::classical::ImpedanceCurve {
    let Some((lo, hi)) = band else {
        return curve.clone();
    };
    let keep: Vec<usize> = curve
        .frequencies
        .iter()
        .enumerate()
        .filter(|(_, &f)| f >= lo && f <= hi)
        .map(|(i, _)| i)
        .collect();
    eistk::classical::ImpedanceCurve {
        frequencies: keep.iter().map(|&i| curve.frequencies[i]).collect(),
        values: keep.iter().map(|&i| curve.values[i]).collect(),
        std: curve
            .std
            .as_ref()
            .map(|s| keep.iter().map(|&i| s[i]).collect()),
        meta: curve.meta.clone(),
    }
}

fn cmd_fit(args: FitArgs, config: &Value) -> Result<(), Error> {
    let band = match args.band.clone().or(cfg_str(config, "band")) {
        Some(b) => Some(parse_band(&b)?),
        None => Some((16.7e-3, 50.0)),
    };
    let mut fit_cfg = FitConfig {
        relative_weighting: args.relative || cfg_bool(config, "relative").unwrap_or(false),
        ..FitConfig::default()
    };
    fit_cfg.swarm = SwarmConfig {
        particles: args
            .particles
            .or(cfg_u64(config, "particles").map(|v| v as usize))
            .unwrap_or(64),
        iters: args
            .iters
            .or(cfg_u64(config, "iters").map(|v| v as usize))
            .unwrap_or(200),
        seed: args.seed.or(cfg_u64(config, "seed")).unwrap_or(0),
    };

    let resolved = json!({
        "command": "fit", "input": args.input.display().to_string(),
        "band": band.map(|(lo, hi)| format!("{lo}:{hi}")),
        "particles": fit_cfg.swarm.particles, "iters": fit_cfg.swarm.iters,
        "seed": fit_cfg.swarm.seed, "relative": fit_cfg.relative_weighting,
        "trajectory": args.trajectory,
    });

    if args.trajectory {
        let tv = io::read_tv_csv(&args.input)?;
        let first = tv.slice_at_time(tv.times[0])?;
        let first = restrict_band(&first, band);
        let bounds = match &args.bounds {
            Some(p) => io::read_json::<EcmBounds>(p)?,
            None => EcmBounds::from_curve(&first)?,
        };
        // restrict every slice to the band by filtering the surface rows
        let keep: Vec<usize> = tv
            .frequencies
            .iter()
            .enumerate()
            .filter(|(_, &f)| band.map_or(true, |(lo, hi)| f >= lo && f <= hi))
            .map(|(i, _)| i)
            .collect();
        let restricted = eistk::tvimp::TimeVaryingImpedance {
            frequencies: keep.iter().map(|&i| tv.frequencies[i]).collect(),
            times: tv.times.clone(),
            values: keep.iter().map(|&i| tv.values[i].clone()).collect(),
            std: tv
                .std
                .as_ref()
                .map(|s| keep.iter().map(|&i| s[i].clone()).collect()),
            method: tv.method.clone(),
            basis_order: tv.basis_order,
        };
        let fits = fit_ecm_trajectory(&restricted, &tv.times, &bounds, &fit_cfg)?;
        io::atomic_write(&args.out, &io::trajectory_csv(&fits))?;
        write_resolved_config(&args.out, &resolved)?;
        let worst = fits
            .iter()
            .map(|f| f.fit.mean_rel_error)
            .fold(0.0, f64::max);
        println!(
            "fitted {} time slices to {} (worst mre {:.3e})",
            fits.len(),
            args.out.display(),
            worst
        );
    } else {
        let curve = io::read_impedance_csv(&args.input)?;
        let curve = restrict_band(&curve, band);
        let bounds = match &args.bounds {
            Some(p) => io::read_json::<EcmBounds>(p)?,
            None => EcmBounds::from_curve(&curve)?,
        };
        let fit = fit_ecm(&curve, &bounds, &fit_cfg)?;
        io::atomic_write(&args.out, &io::theta_json(&fit.params, fit.mean_rel_error)?)?;
        write_resolved_config(&args.out, &resolved)?;
        println!(
            "theta to {} (mre {:.3e}, {} local iterations)",
            args.out.display(),
            fit.mean_rel_error,
            fit.local_iters
        );
    }
    Ok(())
}
