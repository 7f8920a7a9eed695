//! Longitudinal rover kinematics: slip ratio, slip-adjusted actuation,
//! Coulomb deceleration and the piecewise acceleration limiter.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this surface speed (m/s) slip is reported as zero.
pub const SLIP_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WheelGeometry {
    /// Base radius, m.
    pub r: f64,
    /// Grouser height, m.
    pub h: f64,
    pub n_grousers: u32,
    /// Tread width, m. Sets the rut width when imprinting.
    #[serde(default = "default_wheel_width")]
    pub width: f64,
}

fn default_wheel_width() -> f64 {
    0.12
}

impl Default for WheelGeometry {
    fn default() -> Self {
        Self {
            r: 0.09,
            h: 0.01,
            n_grousers: 18,
            width: default_wheel_width(),
        }
    }
}

impl WheelGeometry {
    /// Radius including grousers.
    pub fn effective_radius(&self) -> f64 {
        self.r + self.h
    }

    pub fn validate(&self, prefix: &str) -> Result<()> {
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::config(format!("{prefix}r"), "must be positive"));
        }
        if !(self.h >= 0.0 && self.h.is_finite()) {
            return Err(Error::config(format!("{prefix}h"), "must be non-negative"));
        }
        if self.n_grousers < 1 {
            return Err(Error::config(
                format!("{prefix}n_grousers"),
                "must be at least 1",
            ));
        }
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(Error::config(format!("{prefix}width"), "must be positive"));
        }
        Ok(())
    }
}

/// One row of the acceleration limiter: `a_max` applies up to `v_upper`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Breakpoint {
    /// Upper speed bound, m/s. `None` marks the open-ended last row.
    pub v_upper: Option<f64>,
    /// m/s²
    pub a_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimiterParams {
    pub breakpoints: Vec<Breakpoint>,
}

impl Default for LimiterParams {
    fn default() -> Self {
        Self {
            breakpoints: vec![
                Breakpoint {
                    v_upper: Some(0.75),
                    a_max: 3.476,
                },
                Breakpoint {
                    v_upper: Some(1.02),
                    a_max: 0.612,
                },
                Breakpoint {
                    v_upper: None,
                    a_max: 0.114,
                },
            ],
        }
    }
}

impl LimiterParams {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        let key = format!("{prefix}breakpoints");
        let Some(last) = self.breakpoints.last() else {
            return Err(Error::config(key, "needs at least one entry"));
        };
        if last.v_upper.is_some() {
            return Err(Error::config(
                key,
                "last entry must be open-ended (v_upper = null)",
            ));
        }
        let mut prev = f64::NEG_INFINITY;
        for (i, bp) in self.breakpoints.iter().enumerate() {
            if !(bp.a_max > 0.0 && bp.a_max.is_finite()) {
                return Err(Error::config(
                    format!("{key}[{i}].a_max"),
                    "must be positive",
                ));
            }
            if i + 1 < self.breakpoints.len() {
                match bp.v_upper {
                    Some(v) if v.is_finite() && v > prev => prev = v,
                    Some(_) => {
                        return Err(Error::config(
                            format!("{key}[{i}].v_upper"),
                            "must be finite and strictly increasing",
                        ))
                    }
                    None => {
                        return Err(Error::config(
                            format!("{key}[{i}].v_upper"),
                            "only the last entry may be open-ended",
                        ))
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrictionParams {
    pub mu_s: f64,
    pub mu_d: f64,
}

impl Default for FrictionParams {
    fn default() -> Self {
        Self {
            mu_s: 1.0,
            mu_d: 0.8,
        }
    }
}

impl FrictionParams {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        if !(self.mu_d > 0.0 && self.mu_d.is_finite()) {
            return Err(Error::config(format!("{prefix}mu_d"), "must be positive"));
        }
        if !(self.mu_s >= self.mu_d && self.mu_s.is_finite()) {
            return Err(Error::config(format!("{prefix}mu_s"), "must be >= mu_d"));
        }
        Ok(())
    }
}

/// Kinematic state of the rover. Wheel arrays are ordered FL, FR, RL, RR.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RoverState {
    pub x: f64,
    pub y: f64,
    /// rad
    pub heading: f64,
    /// Translational speed along the heading, m/s.
    pub v: f64,
    /// Wheel angle driven at the commanded speed (what the wheel visibly does).
    pub theta_cmd: [f64; 4],
    /// Wheel angle driven at the slip-adjusted speed (what moves the body).
    pub theta_phys: [f64; 4],
    /// N
    pub f_z: [f64; 4],
    /// mm, negative down
    pub z: [f64; 4],
}

/// Slip ratio from translational speed `v` and wheel rate `omega` at radius `r_eff`.
///
/// Positive while the wheel surface outruns the body, negative in a skid.
pub fn slip_ratio(v: f64, omega: f64, r_eff: f64) -> Result<f64> {
    if !(v >= 0.0 && omega >= 0.0) {
        return Err(Error::domain(format!(
            "slip ratio needs v >= 0 and omega >= 0 (v = {v}, omega = {omega})"
        )));
    }
    if !(r_eff > 0.0) {
        return Err(Error::domain(format!(
            "radius must be positive, got {r_eff}"
        )));
    }
    let surface = omega * r_eff;
    if v < SLIP_EPS && surface < SLIP_EPS {
        return Ok(0.0);
    }
    Ok(if surface >= v {
        1.0 - v / surface
    } else {
        surface / v - 1.0
    })
}

/// Translational speed that reproduces slip `s` at wheel speed `v_w`.
pub fn target_velocity(v_w: f64, s: f64) -> f64 {
    (1.0 - s) * v_w
}

pub fn accel_limit(v: f64, lim: &LimiterParams) -> f64 {
    lim.breakpoints
        .iter()
        .find(|bp| bp.v_upper.is_none_or(|vu| v <= vu))
        .or(lim.breakpoints.last())
        .map_or(0.0, |bp| bp.a_max)
}

/// Advances the longitudinal state by `dt`.
///
/// The body speed approaches the slip-adjusted target no faster than the
/// limiter allows when speeding up, and no faster than `mu_d·g` when slowing.
/// Position integrates the within-step linear speed ramp.
#[allow(clippy::too_many_arguments)]
pub fn step_longitudinal(
    state: &RoverState,
    v_w_cmd: f64,
    s: f64,
    fric: &FrictionParams,
    lim: &LimiterParams,
    geom: &WheelGeometry,
    g: f64,
    dt: f64,
) -> Result<RoverState> {
    if !(dt > 0.0 && g > 0.0) {
        return Err(Error::domain(format!(
            "need dt > 0 and g > 0 (dt = {dt}, g = {g})"
        )));
    }
    if !(v_w_cmd >= 0.0) {
        return Err(Error::domain(format!(
            "commanded wheel speed must be >= 0, got {v_w_cmd}"
        )));
    }
    let v = state.v;
    let v_t = target_velocity(v_w_cmd, s);
    let v_next = if v < v_t {
        v_t.min(v + accel_limit(v, lim) * dt)
    } else if v > v_t {
        v_t.max(v - fric.mu_d * g * dt)
    } else {
        v
    };

    let r_eff = geom.effective_radius();
    let ds = 0.5 * (v + v_next) * dt;
    let mut next = *state;
    next.v = v_next;
    next.x += ds * state.heading.cos();
    next.y += ds * state.heading.sin();
    for i in 0..4 {
        next.theta_cmd[i] += v_w_cmd / r_eff * dt;
        next.theta_phys[i] += v_next / r_eff * dt;
    }
    Ok(next)
}

/// Closed-form stop time and distance under constant deceleration `mu_d·g`.
pub fn stopping_profile(v0: f64, fric: &FrictionParams, g: f64) -> (f64, f64) {
    if v0 <= 0.0 {
        return (0.0, 0.0);
    }
    let a = fric.mu_d * g;
    (v0 / a, v0 * v0 / (2.0 * a))
}
