//! File exchange formats: tidy CSV (UTF-8, `.` decimal, LF endings, 12
//! significant digits) and JSON sidecars, written atomically.

use crate::classical::{EstimatorMeta, ImpedanceCurve};
use crate::ecm::{EcmParams, TrajectoryFit};
use crate::nleis::NonlinearCoefficients;
use crate::signals::TimeSeriesRecord;
use crate::spectra::Spectrum;
use crate::tvimp::TimeVaryingImpedance;
use crate::{Error, Result};
use num_complex::Complex64;
use std::path::Path;

/// Format with 12 significant digits; round-trips through `f64` parsing.
pub fn fmt12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    format!("{x:.11e}")
}

/// Write a file atomically: temp file in the target directory, then rename.
pub fn atomic_write(path: &Path, content: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = match dir {
        Some(d) => tempfile::NamedTempFile::new_in(d)?,
        None => tempfile::NamedTempFile::new_in(".")?,
    };
    use std::io::Write;
    tmp.write_all(content.as_bytes())?;
    tmp.persist(path)
        .map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn parse_field(s: &str, line: usize, what: &str) -> Result<f64> {
    match s.trim() {
        "nan" => Ok(f64::NAN),
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        v => v.parse().map_err(|_| {
            Error::Parse(format!("line {line}: cannot parse {what} from {v:?}"))
        }),
    }
}

fn read_rows(content: &str, header: &str, path_hint: &str) -> Result<Vec<Vec<f64>>> {
    let mut lines = content.lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::Parse(format!("{path_hint}: empty file")))?;
    if first.trim() != header {
        return Err(Error::Parse(format!(
            "{path_hint}: expected header {header:?}, found {first:?}"
        )));
    }
    let n_cols = header.split(',').count();
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != n_cols {
            return Err(Error::Parse(format!(
                "{path_hint} line {}: expected {n_cols} columns, found {}",
                idx + 2,
                fields.len()
            )));
        }
        let mut row = Vec::with_capacity(n_cols);
        for f in fields {
            row.push(parse_field(f, idx + 2, "value")?);
        }
        rows.push(row);
    }
    Ok(rows)
}

pub const TIMESERIES_HEADER: &str = "t_s,i_a,v_v";
pub const IMPEDANCE_HEADER: &str = "f_hz,re_ohm,im_ohm,std_re,std_im";
pub const TV_HEADER: &str = "f_hz,t_s,re_ohm,im_ohm,std_re,std_im";
pub const SPECTRUM_HEADER: &str = "k,f,re,im";
pub const NLCOEFF_HEADER: &str = "h,f_hz,re,im,unit_exponent";
pub const TRAJECTORY_HEADER: &str = "t_s,R0,R1,C1,Rct,Cct,W,alpha,mre";

/// Time-series CSV `t_s,i_a,v_v`. A record without voltage writes zeros.
pub fn timeseries_csv(rec: &TimeSeriesRecord) -> String {
    let mut out = String::with_capacity(40 * rec.len() + 16);
    out.push_str(TIMESERIES_HEADER);
    out.push('\n');
    for (idx, &i) in rec.current.iter().enumerate() {
        let t = idx as f64 / rec.fs;
        let v = rec.voltage.get(idx).copied().unwrap_or(0.0);
        out.push_str(&fmt12(t));
        out.push(',');
        out.push_str(&fmt12(i));
        out.push(',');
        out.push_str(&fmt12(v));
        out.push('\n');
    }
    out
}

pub fn write_timeseries_csv(path: &Path, rec: &TimeSeriesRecord) -> Result<()> {
    atomic_write(path, &timeseries_csv(rec))
}

/// Read a time-series CSV back into a record. The sampling rate is inferred
/// from the first two timestamps; period bookkeeping is the caller's.
pub fn read_timeseries_csv(path: &Path) -> Result<TimeSeriesRecord> {
    let content = std::fs::read_to_string(path)?;
    let rows = read_rows(&content, TIMESERIES_HEADER, &path.display().to_string())?;
    if rows.len() < 2 {
        return Err(Error::Parse(format!(
            "{}: need at least 2 samples",
            path.display()
        )));
    }
    let dt = rows[1][0] - rows[0][0];
    if dt <= 0.0 {
        return Err(Error::Parse(format!(
            "{}: timestamps must be increasing",
            path.display()
        )));
    }
    Ok(TimeSeriesRecord {
        fs: 1.0 / dt,
        n_periods: 1,
        current: rows.iter().map(|r| r[1]).collect(),
        voltage: rows.iter().map(|r| r[2]).collect(),
        spec: None,
    })
}

/// Impedance CSV `f_hz,re_ohm,im_ohm,std_re,std_im` (zero std when unknown).
pub fn impedance_csv(curve: &ImpedanceCurve) -> String {
    let mut out = String::new();
    out.push_str(IMPEDANCE_HEADER);
    out.push('\n');
    for (idx, (&f, z)) in curve.frequencies.iter().zip(&curve.values).enumerate() {
        let s = curve.std.as_ref().map(|s| s[idx]).unwrap_or(0.0);
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt12(f),
            fmt12(z.re),
            fmt12(z.im),
            fmt12(s),
            fmt12(s)
        ));
    }
    out
}

pub fn write_impedance_csv(path: &Path, curve: &ImpedanceCurve) -> Result<()> {
    atomic_write(path, &impedance_csv(curve))
}

pub fn read_impedance_csv(path: &Path) -> Result<ImpedanceCurve> {
    let content = std::fs::read_to_string(path)?;
    let rows = read_rows(&content, IMPEDANCE_HEADER, &path.display().to_string())?;
    if rows.is_empty() {
        return Err(Error::Parse(format!("{}: no data rows", path.display())));
    }
    let curve = ImpedanceCurve {
        frequencies: rows.iter().map(|r| r[0]).collect(),
        values: rows.iter().map(|r| Complex64::new(r[1], r[2])).collect(),
        std: Some(rows.iter().map(|r| r[3]).collect()),
        meta: EstimatorMeta {
            estimator: "file".into(),
            periods: 0,
            source: Some(path.display().to_string()),
        },
    };
    curve.validate()?;
    Ok(curve)
}

/// Long-format CSV of a time-varying impedance surface; masked cells are
/// skipped.
pub fn tv_csv(tv: &TimeVaryingImpedance) -> String {
    let mut out = String::new();
    out.push_str(TV_HEADER);
    out.push('\n');
    for (m, &f) in tv.frequencies.iter().enumerate() {
        for (l, &t) in tv.times.iter().enumerate() {
            let Some(z) = tv.values[m][l] else { continue };
            let s = tv
                .std
                .as_ref()
                .and_then(|grid| grid[m][l])
                .unwrap_or(0.0);
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                fmt12(f),
                fmt12(t),
                fmt12(z.re),
                fmt12(z.im),
                fmt12(s),
                fmt12(s)
            ));
        }
    }
    out
}

pub fn write_tv_csv(path: &Path, tv: &TimeVaryingImpedance) -> Result<()> {
    atomic_write(path, &tv_csv(tv))
}

/// Read a long-format time-varying impedance CSV.
pub fn read_tv_csv(path: &Path) -> Result<TimeVaryingImpedance> {
    let content = std::fs::read_to_string(path)?;
    let rows = read_rows(&content, TV_HEADER, &path.display().to_string())?;
    if rows.is_empty() {
        return Err(Error::Parse(format!("{}: no data rows", path.display())));
    }
    let mut frequencies: Vec<f64> = Vec::new();
    let mut times: Vec<f64> = Vec::new();
    for r in &rows {
        if !frequencies.iter().any(|&f| f == r[0]) {
            frequencies.push(r[0]);
        }
        if !times.iter().any(|&t| t == r[1]) {
            times.push(r[1]);
        }
    }
    frequencies.sort_by(|a, b| a.partial_cmp(b).unwrap());
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut values = vec![vec![None; times.len()]; frequencies.len()];
    let mut std = vec![vec![None; times.len()]; frequencies.len()];
    for r in &rows {
        let m = frequencies.iter().position(|&f| f == r[0]).unwrap();
        let l = times.iter().position(|&t| t == r[1]).unwrap();
        values[m][l] = Some(Complex64::new(r[2], r[3]));
        std[m][l] = Some(r[4]);
    }
    Ok(TimeVaryingImpedance {
        frequencies,
        times,
        values,
        std: Some(std),
        method: "file".into(),
        basis_order: None,
    })
}

/// Spectrum CSV `k,f,re,im` over the non-negative frequency bins.
pub fn spectrum_csv(spec: &Spectrum) -> String {
    let mut out = String::new();
    out.push_str(SPECTRUM_HEADER);
    out.push('\n');
    for k in 0..=spec.nyquist_bin() {
        out.push_str(&format!(
            "{k},{},{},{}\n",
            fmt12(spec.freq_hz(k)),
            fmt12(spec.bins[k].re),
            fmt12(spec.bins[k].im)
        ));
    }
    out
}

/// Nonlinear coefficient CSV `h,f_hz,re,im,unit_exponent`; the unit of
/// `Z_(h,h)` is ohm / ampere^(h-1).
pub fn nlcoeffs_csv(nl: &NonlinearCoefficients) -> String {
    let mut out = String::new();
    out.push_str(NLCOEFF_HEADER);
    out.push('\n');
    let f_hz = nl.omega / (2.0 * std::f64::consts::PI);
    for (&h, z) in &nl.coeffs {
        out.push_str(&format!(
            "{h},{},{},{},{}\n",
            fmt12(f_hz),
            fmt12(z.re),
            fmt12(z.im),
            h.saturating_sub(1)
        ));
    }
    out
}

/// Trajectory CSV `t_s,R0,R1,C1,Rct,Cct,W,alpha,mre`.
pub fn trajectory_csv(fits: &[TrajectoryFit]) -> String {
    let mut out = String::new();
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for tf in fits {
        let p = tf.fit.params;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            fmt12(tf.t),
            fmt12(p.r0),
            fmt12(p.r1),
            fmt12(p.c1),
            fmt12(p.rct),
            fmt12(p.cct),
            fmt12(p.w),
            fmt12(p.alpha),
            fmt12(tf.fit.mean_rel_error)
        ));
    }
    out
}

/// Pretty JSON for any serializable artifact (specs, cell models, reports),
/// with a trailing newline.
pub fn to_json_pretty<T: serde::Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Parse(format!("json encode: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    atomic_write(path, &to_json_pretty(value)?)
}

pub fn read_json<T: for<'de> serde::Deserialize<'de>>(path: &Path) -> Result<T> {
    let content = std::fs::read_to_string(path)?;
    serde_json::from_str(&content)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// Fitted parameters as a JSON document with the mean relative error.
pub fn theta_json(params: &EcmParams, mean_rel_error: f64) -> Result<String> {
    #[derive(serde::Serialize)]
    struct ThetaDoc<'a> {
        #[serde(flatten)]
        params: &'a EcmParams,
        mre: f64,
    }
    to_json_pretty(&ThetaDoc {
        params,
        mre: mean_rel_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::{design_multisine, render_multisine, AmplitudeProfile};
    use proptest::prelude::*;

    #[test]
    fn timeseries_round_trip_preserves_12_digits() {
        let spec = design_multisine(
            1.0,
            10.0,
            4,
            1.0,
            64.0,
            AmplitudeProfile::Flat { rms: 1.0 },
            true,
            1,
        )
        .unwrap();
        let mut rec = render_multisine(&spec, 2, None).unwrap();
        rec.voltage = rec.current.iter().map(|&i| 0.05 * i + 3.7).collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rec.csv");
        write_timeseries_csv(&path, &rec).unwrap();
        let back = read_timeseries_csv(&path).unwrap();
        assert_eq!(back.len(), rec.len());
        assert!((back.fs - rec.fs).abs() / rec.fs < 1e-9);
        for (a, b) in rec.current.iter().zip(&back.current) {
            let scale = a.abs().max(1e-30);
            assert!((a - b).abs() / scale < 1e-11, "{a} vs {b}");
        }
    }

    #[test]
    fn csv_contract_is_lf_and_dot_decimal() {
        let rec = TimeSeriesRecord {
            fs: 2.0,
            n_periods: 1,
            current: vec![1.5, -2.25],
            voltage: vec![3.75, 0.0],
            spec: None,
        };
        let csv = timeseries_csv(&rec);
        assert!(csv.starts_with("t_s,i_a,v_v\n"));
        assert!(!csv.contains('\r'));
        assert!(csv.lines().count() == 3);
    }

    #[test]
    fn impedance_round_trip() {
        let curve = ImpedanceCurve {
            frequencies: vec![0.1, 1.0, 10.0],
            values: vec![
                Complex64::new(0.05, -0.01),
                Complex64::new(0.04, -0.02),
                Complex64::new(0.021, -0.0005),
            ],
            std: Some(vec![1e-5, 2e-5, 3e-5]),
            meta: EstimatorMeta::default(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("z.csv");
        write_impedance_csv(&path, &curve).unwrap();
        let back = read_impedance_csv(&path).unwrap();
        for ((a, b), (sa, sb)) in curve
            .values
            .iter()
            .zip(&back.values)
            .zip(curve.std.as_ref().unwrap().iter().zip(back.std.as_ref().unwrap()))
        {
            assert!((a - b).norm() < 1e-12 * a.norm());
            assert!((sa - sb).abs() < 1e-15);
        }
    }

    #[test]
    fn tv_round_trip_skips_masked_cells() {
        let tv = TimeVaryingImpedance {
            frequencies: vec![1.0, 2.0],
            times: vec![0.0, 10.0],
            values: vec![
                vec![Some(Complex64::new(0.5, -0.1)), None],
                vec![Some(Complex64::new(0.4, -0.2)), Some(Complex64::new(0.3, -0.3))],
            ],
            std: None,
            method: "test".into(),
            basis_order: None,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tv.csv");
        write_tv_csv(&path, &tv).unwrap();
        let back = read_tv_csv(&path).unwrap();
        assert_eq!(back.frequencies, vec![1.0, 2.0]);
        assert!(back.values[0][1].is_none());
        assert!((back.values[1][1].unwrap() - Complex64::new(0.3, -0.3)).norm() < 1e-12);
    }

    #[test]
    fn json_is_deterministic() {
        let spec = design_multisine(
            1.0,
            10.0,
            4,
            1.0,
            64.0,
            AmplitudeProfile::Flat { rms: 1.0 },
            true,
            7,
        )
        .unwrap();
        let a = to_json_pretty(&spec).unwrap();
        let b = to_json_pretty(&spec).unwrap();
        assert_eq!(a, b);
        let back: crate::signals::MultisineSpec = serde_json::from_str(&a).unwrap();
        assert_eq!(back.excited_harmonics, spec.excited_harmonics);
        assert_eq!(back.phases, spec.phases);
    }

    proptest! {
        #[test]
        fn fmt12_round_trips(x in -1e12f64..1e12) {
            let s = fmt12(x);
            let back: f64 = s.parse().unwrap();
            let scale = x.abs().max(1e-30);
            prop_assert!((x - back).abs() / scale < 1e-11);
        }
    }
}
