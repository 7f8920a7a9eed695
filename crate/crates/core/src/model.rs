//! Regression models for wheel slip and sinkage, and the least-squares
//! calibration that recovers their coefficients from run data.
//!
//! Units at this boundary: wheel speed in m/s, slope angle in degrees,
//! vertical load in N, sinkage in mm (negative is downward).

use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lsq;
use crate::vehicle;

/// Slope angles accepted by the slip model, in degrees either side of level.
pub const ALPHA_WINDOW_DEG: f64 = 25.0;

/// Coefficients of the flat-terrain and slope slip regressions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlipModelParams {
    /// Slip per m/s of wheel speed.
    pub a_v: f64,
    /// Flat-terrain slip at zero wheel speed.
    pub b_v: f64,
    /// Slope coefficient, per (deg² · m/s).
    pub a_alpha: f64,
    /// Slope coefficient, per deg².
    pub b_alpha: f64,
    /// Upper clamp on model output.
    pub s_max: f64,
}

impl Default for SlipModelParams {
    fn default() -> Self {
        Self {
            a_v: 0.0265,
            b_v: 0.0256,
            a_alpha: 0.00522,
            b_alpha: 0.00105,
            s_max: 0.95,
        }
    }
}

impl SlipModelParams {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        for (name, v) in [
            ("a_v", self.a_v),
            ("b_v", self.b_v),
            ("a_alpha", self.a_alpha),
            ("b_alpha", self.b_alpha),
            ("s_max", self.s_max),
        ] {
            if !v.is_finite() {
                return Err(Error::config(format!("{prefix}{name}"), "must be finite"));
            }
        }
        if !(self.s_max > 0.0 && self.s_max < 1.0) {
            return Err(Error::config(
                format!("{prefix}s_max"),
                format!("must lie in (0, 1), got {}", self.s_max),
            ));
        }
        Ok(())
    }
}

/// Coefficients of the sinkage regression `z = c_s·s + c_F·(F_z − F_ref) + c_0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SinkageModelParams {
    /// mm per unit slip.
    pub c_s: f64,
    /// mm per N of load above the reference.
    #[serde(rename = "c_F")]
    pub c_f: f64,
    /// Static sinkage at nominal load, mm.
    pub c_0: f64,
    /// Nominal per-wheel load, N.
    #[serde(rename = "F_ref")]
    pub f_ref: f64,
}

impl Default for SinkageModelParams {
    fn default() -> Self {
        Self {
            c_s: -33.56,
            c_f: -0.9291,
            c_0: -3.11,
            f_ref: 8.72,
        }
    }
}

impl SinkageModelParams {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        for (name, v) in [
            ("c_s", self.c_s),
            ("c_F", self.c_f),
            ("c_0", self.c_0),
            ("F_ref", self.f_ref),
        ] {
            if !v.is_finite() {
                return Err(Error::config(format!("{prefix}{name}"), "must be finite"));
            }
        }
        if self.f_ref <= 0.0 {
            return Err(Error::config(
                format!("{prefix}F_ref"),
                format!("must be positive, got {}", self.f_ref),
            ));
        }
        Ok(())
    }
}

/// The full calibrated model: slip and sinkage regressions together.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    #[serde(default)]
    pub slip: SlipModelParams,
    #[serde(default)]
    pub sinkage: SinkageModelParams,
}

impl ModelParams {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        self.slip.validate(&format!("{prefix}slip."))?;
        self.sinkage.validate(&format!("{prefix}sinkage."))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let params: ModelParams = serde_path_to_error::deserialize(de)
            .map_err(|e| Error::config(e.path().to_string(), e.inner().to_string()))?;
        params.validate("")?;
        Ok(params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("params serialize");
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

fn check_speed(v_w: f64) -> Result<()> {
    if v_w.is_nan() || v_w < 0.0 {
        return Err(Error::domain(format!(
            "wheel speed must be >= 0, got {v_w}"
        )));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha.abs() <= ALPHA_WINDOW_DEG) {
        return Err(Error::domain(format!(
            "slope {alpha} deg outside model window [-{ALPHA_WINDOW_DEG}, {ALPHA_WINDOW_DEG}]"
        )));
    }
    Ok(())
}

fn clamp_slip(s: f64, p: &SlipModelParams) -> f64 {
    s.clamp(0.0, p.s_max)
}

/// Flat-terrain regression before clamping.
pub fn slip_flat_raw(v_w: f64, p: &SlipModelParams) -> f64 {
    p.a_v * v_w + p.b_v
}

/// Slope regression before clamping.
pub fn slip_slope_raw(v_w: f64, alpha: f64, p: &SlipModelParams) -> f64 {
    (p.a_alpha * v_w + p.b_alpha) * alpha * alpha + slip_flat_raw(v_w, p)
}

/// Steady-state slip on level ground at wheel surface speed `v_w`.
pub fn slip_flat(v_w: f64, p: &SlipModelParams) -> Result<f64> {
    check_speed(v_w)?;
    Ok(clamp_slip(slip_flat_raw(v_w, p), p))
}

/// Steady-state slip at wheel speed `v_w` on a slope of `alpha` degrees.
///
/// The slope term is even in `alpha`, so downhill and uphill slopes of the
/// same magnitude produce the same slip.
pub fn slip_slope(v_w: f64, alpha: f64, p: &SlipModelParams) -> Result<f64> {
    check_speed(v_w)?;
    check_alpha(alpha)?;
    if alpha == 0.0 {
        return slip_flat(v_w, p);
    }
    Ok(clamp_slip(slip_slope_raw(v_w, alpha, p), p))
}

/// Sinkage of the wheel's base radius in mm, negative downward.
pub fn sinkage(s: f64, f_z: f64, p: &SinkageModelParams) -> Result<f64> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::domain(format!("slip must lie in [0, 1], got {s}")));
    }
    if f_z.is_nan() || f_z < 0.0 {
        return Err(Error::domain(format!(
            "vertical load must be >= 0, got {f_z}"
        )));
    }
    Ok(p.c_s * s + p.c_f * (f_z - p.f_ref) + p.c_0)
}

/// Coefficients from a least-squares fit together with the fit residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fitted<P> {
    pub params: P,
    pub residual_rms: f64,
}

fn distinct_count(values: impl Iterator<Item = f64>) -> usize {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.len()
}

/// Fits `s = a_v·v_w + b_v` to `(v_w, s)` pairs.
///
/// Slope coefficients in the result are zero and `s_max` keeps its default.
pub fn fit_slip_flat(samples: &[(f64, f64)]) -> Result<Fitted<SlipModelParams>> {
    if distinct_count(samples.iter().map(|s| s.0)) < 2 {
        return Err(Error::fit(
            "flat slip fit needs at least two distinct wheel speeds",
        ));
    }
    let rows: Vec<Vec<f64>> = samples.iter().map(|&(v, _)| vec![v, 1.0]).collect();
    let y: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let fit = lsq::solve(&rows, &y)?;
    Ok(Fitted {
        params: SlipModelParams {
            a_v: fit.coefficients[0],
            b_v: fit.coefficients[1],
            a_alpha: 0.0,
            b_alpha: 0.0,
            ..SlipModelParams::default()
        },
        residual_rms: fit.residual_rms,
    })
}

/// Two-stage fit of the slope model from `(v_w, alpha, s)` triples.
///
/// The level-ground samples fix `a_v`, `b_v`; the slope coefficients are then
/// fitted to what the flat model leaves unexplained, with regressors
/// `v_w·alpha²` and `alpha²`. The reported residual covers all samples.
pub fn fit_slip_slope(samples: &[(f64, f64, f64)]) -> Result<Fitted<SlipModelParams>> {
    if samples.len() < 4 {
        return Err(Error::fit(format!(
            "slope slip fit needs at least 4 samples, got {}",
            samples.len()
        )));
    }
    let flat: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.1 == 0.0)
        .map(|&(v, _, s)| (v, s))
        .collect();
    if flat.is_empty() {
        return Err(Error::fit("slope slip fit needs samples at alpha = 0"));
    }
    let flat_fit = fit_slip_flat(&flat)?.params;

    let sloped: Vec<&(f64, f64, f64)> = samples.iter().filter(|s| s.1 != 0.0).collect();
    if distinct_count(sloped.iter().map(|s| s.1)) < 2 {
        return Err(Error::fit(
            "slope slip fit needs at least two nonzero slopes",
        ));
    }
    if distinct_count(sloped.iter().map(|s| s.0)) < 2 {
        return Err(Error::fit(
            "slope slip fit needs sloped samples at two or more wheel speeds",
        ));
    }
    let rows: Vec<Vec<f64>> = sloped
        .iter()
        .map(|&&(v, a, _)| vec![v * a * a, a * a])
        .collect();
    let y: Vec<f64> = sloped
        .iter()
        .map(|&&(v, _, s)| s - slip_flat_raw(v, &flat_fit))
        .collect();
    let fit = lsq::solve(&rows, &y)?;

    let params = SlipModelParams {
        a_alpha: fit.coefficients[0],
        b_alpha: fit.coefficients[1],
        ..flat_fit
    };
    let ss: f64 = samples
        .iter()
        .map(|&(v, a, s)| (s - slip_slope_raw(v, a, &params)).powi(2))
        .sum();
    Ok(Fitted {
        params,
        residual_rms: (ss / samples.len() as f64).sqrt(),
    })
}

/// Fits the sinkage plane to `(s, F_z, z)` triples with `f_ref` held fixed.
pub fn fit_sinkage(samples: &[(f64, f64, f64)], f_ref: f64) -> Result<Fitted<SinkageModelParams>> {
    if !(f_ref > 0.0) {
        return Err(Error::fit(format!(
            "reference load must be positive, got {f_ref}"
        )));
    }
    if samples.len() < 3 {
        return Err(Error::fit(format!(
            "sinkage fit needs at least 3 samples, got {}",
            samples.len()
        )));
    }
    let rows: Vec<Vec<f64>> = samples
        .iter()
        .map(|&(s, f, _)| vec![s, f - f_ref, 1.0])
        .collect();
    let y: Vec<f64> = samples.iter().map(|s| s.2).collect();
    let fit = lsq::solve(&rows, &y)?;
    Ok(Fitted {
        params: SinkageModelParams {
            c_s: fit.coefficients[0],
            c_f: fit.coefficients[1],
            c_0: fit.coefficients[2],
            f_ref,
        },
        residual_rms: fit.residual_rms,
    })
}

/// One time-aligned sample of a calibration run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSample {
    /// s
    pub t: f64,
    /// Translational velocity, m/s.
    pub v: f64,
    /// Wheel angular velocity, rad/s.
    pub omega: f64,
    /// Slope, degrees.
    pub alpha: f64,
    /// Vertical wheel load, N.
    pub f_z: Option<f64>,
    /// Measured sinkage, mm.
    pub z: Option<f64>,
}

/// Slip ratio of every sample in a run, as `(t, s)` pairs.
pub fn slip_from_run(samples: &[RunSample], r_eff: f64) -> Result<Vec<(f64, f64)>> {
    if !(r_eff > 0.0) {
        return Err(Error::domain(format!(
            "effective radius must be positive, got {r_eff}"
        )));
    }
    for w in samples.windows(2) {
        if !(w[1].t > w[0].t) {
            return Err(Error::domain(format!(
                "run timestamps must increase strictly ({} then {})",
                w[0].t, w[1].t
            )));
        }
    }
    samples
        .iter()
        .map(|s| vehicle::slip_ratio(s.v, s.omega, r_eff).map(|slip| (s.t, slip)))
        .collect()
}

/// A raw run-log row. Motion-capture rows carry `v`, encoder rows carry
/// `omega`; a row may carry both.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunLogRow {
    pub t: f64,
    pub v: Option<f64>,
    pub omega: Option<f64>,
    pub alpha: Option<f64>,
    #[serde(rename = "F_z")]
    pub f_z: Option<f64>,
    pub z: Option<f64>,
}

pub const RUN_LOG_HEADER: &str = "t,v,omega,alpha,F_z,z";

/// Reads a run-log CSV and aligns its encoder stream onto the velocity stream.
pub fn read_run_log(path: &Path) -> Result<Vec<RunSample>> {
    let parse_err = |message: String| Error::Parse {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| parse_err(e.to_string()))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| parse_err(e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    if header.join(",") != RUN_LOG_HEADER {
        return Err(parse_err(format!(
            "expected header `{RUN_LOG_HEADER}`, found `{}`",
            header.join(",")
        )));
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.deserialize::<RunLogRow>().enumerate() {
        rows.push(rec.map_err(|e| parse_err(format!("row {}: {e}", i + 2)))?);
    }
    align_run_log(&rows).map_err(|e| match e {
        Error::Domain(m) => parse_err(m),
        other => other,
    })
}

/// Linearly interpolates encoder `omega` onto the timestamps of rows that
/// carry a velocity. Outside the encoder span the nearest value is held.
pub fn align_run_log(rows: &[RunLogRow]) -> Result<Vec<RunSample>> {
    let encoder: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.omega.map(|w| (r.t, w)))
        .collect();
    if encoder.is_empty() {
        return Err(Error::domain("run log has no omega samples"));
    }
    for w in encoder.windows(2) {
        if !(w[1].0 > w[0].0) {
            return Err(Error::domain("encoder timestamps must increase strictly"));
        }
    }
    let omega_at = |t: f64| -> f64 {
        let idx = encoder.partition_point(|&(te, _)| te <= t);
        if idx == 0 {
            return encoder[0].1;
        }
        if idx == encoder.len() {
            return encoder[idx - 1].1;
        }
        let (t0, w0) = encoder[idx - 1];
        let (t1, w1) = encoder[idx];
        w0 + (w1 - w0) * (t - t0) / (t1 - t0)
    };
    let samples: Vec<RunSample> = rows
        .iter()
        .filter_map(|r| {
            r.v.map(|v| RunSample {
                t: r.t,
                v,
                omega: r.omega.unwrap_or_else(|| omega_at(r.t)),
                alpha: r.alpha.unwrap_or(0.0),
                f_z: r.f_z,
                z: r.z,
            })
        })
        .collect();
    if samples.is_empty() {
        return Err(Error::domain("run log has no velocity samples"));
    }
    Ok(samples)
}

/// Writes run-log rows with empty cells for absent values.
pub fn write_run_log(path: &Path, rows: &[RunLogRow]) -> Result<()> {
    let mut out = String::from(RUN_LOG_HEADER);
    out.push('\n');
    let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.t,
            cell(r.v),
            cell(r.omega),
            cell(r.alpha),
            cell(r.f_z),
            cell(r.z)
        ));
    }
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}
