//! Compliant vertical wheel contact.
//!
//! Each wheel rests on a spring-damper whose stiffness is chosen every step so
//! that the static penetration under the current load equals the sinkage the
//! regression predicts. Sinkage here is in mm (negative down) at the model
//! boundary and penetration in m (positive) inside the contact.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, SinkageModelParams};
use crate::vehicle::WheelGeometry;

/// Largest integration substep for the vertical ODE, s.
pub const MAX_SUBSTEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactMode {
    #[default]
    QuasiStatic,
    Ode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactParams {
    /// Contact points sharing a wheel's load.
    pub n_points: u32,
    /// Floor on the load used for stiffness, N.
    pub fz_min: f64,
    /// Floor on the stiffness denominator, m.
    pub denom_min: f64,
    /// Speed at or below which sinkage may only deepen, m/s.
    pub v_min: f64,
    #[serde(default)]
    pub mode: ContactMode,
}

impl Default for ContactParams {
    fn default() -> Self {
        Self {
            n_points: 1,
            fz_min: 0.5,
            denom_min: 0.001,
            v_min: 0.1,
            mode: ContactMode::QuasiStatic,
        }
    }
}

impl ContactParams {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        if self.n_points < 1 {
            return Err(Error::config(
                format!("{prefix}n_points"),
                "must be at least 1",
            ));
        }
        if !(self.fz_min > 0.0 && self.fz_min.is_finite()) {
            return Err(Error::config(format!("{prefix}fz_min"), "must be positive"));
        }
        if !(self.denom_min > 0.0 && self.denom_min.is_finite()) {
            return Err(Error::config(
                format!("{prefix}denom_min"),
                "must be positive",
            ));
        }
        if !(self.v_min >= 0.0 && self.v_min.is_finite()) {
            return Err(Error::config(
                format!("{prefix}v_min"),
                "must be non-negative",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactState {
    /// Stiffness per contact point, N/m.
    pub k: f64,
    /// Damping, N·s/m.
    pub c: f64,
    /// Penetration of the physics geometry, m.
    pub p: f64,
    /// Last committed sinkage target, mm.
    pub z_latched: f64,
    /// Vertical displacement of the wheel relative to the surface, m
    /// (negative in contact). Only evolves in ODE mode.
    pub z: f64,
    /// Vertical velocity, m/s.
    pub zdot: f64,
    /// Normal force from the contact, N.
    pub force: f64,
    /// Reported sinkage of the base radius, mm.
    pub sinkage: f64,
}

impl Default for ContactState {
    fn default() -> Self {
        Self {
            k: 1.0,
            c: 0.0,
            p: 0.0,
            z_latched: 0.0,
            z: 0.0,
            zdot: 0.0,
            force: 0.0,
            sinkage: 0.0,
        }
    }
}

/// Stiffness that yields a penetration of `h − z_target` under load `f_z`.
///
/// With `z_target` negative this is `F/(N·(|z| + h))`; a positive target
/// (wheel base riding above the surface on its grousers) shortens the
/// penetration accordingly. Both the load and the denominator are floored.
pub fn stiffness(f_z: f64, z_target_mm: f64, h: f64, params: &ContactParams) -> f64 {
    let force = f_z.max(params.fz_min);
    let denom = (h - z_target_mm / 1000.0).max(params.denom_min);
    force / (params.n_points as f64 * denom)
}

pub fn critical_damping(k: f64, m: f64) -> f64 {
    2.0 * (k * m).sqrt()
}

/// Static penetration of a spring of stiffness `k` under load `f_z`, m.
pub fn quasi_static_penetration(f_z: f64, k: f64) -> f64 {
    f_z / k
}

/// Converts a physics-geometry penetration to base-radius sinkage in mm.
pub fn base_sinkage_mm(p: f64, h: f64) -> f64 {
    -(p - h) * 1000.0
}

/// Integrates `z'' = −g − (k/m)·z − (c/m)·z'` over `dt` with semi-implicit
/// Euler. The spring and damper act only while `z < 0`.
///
/// The substep is at most [`MAX_SUBSTEP`] and is shortened further for stiff
/// springs so that `sqrt(k/m)·h ≤ 0.1`.
pub fn step_vertical_ode(state: &ContactState, m: f64, g: f64, dt: f64) -> Result<ContactState> {
    if !(dt > 0.0 && m > 0.0) {
        return Err(Error::domain(format!(
            "need dt > 0 and m > 0 (dt = {dt}, m = {m})"
        )));
    }
    let omega_n = (state.k / m).sqrt();
    let h_max = if omega_n > 0.0 {
        MAX_SUBSTEP.min(0.1 / omega_n)
    } else {
        MAX_SUBSTEP
    };
    let n = (dt / h_max).ceil().max(1.0) as usize;
    let h = dt / n as f64;

    let (k_m, c_m) = (state.k / m, state.c / m);
    let (mut z, mut zdot) = (state.z, state.zdot);
    for _ in 0..n {
        let acc = if z < 0.0 {
            -g - k_m * z - c_m * zdot
        } else {
            -g
        };
        zdot += acc * h;
        z += zdot * h;
    }
    if !(z.is_finite() && zdot.is_finite()) {
        return Err(Error::Numeric(format!(
            "vertical contact diverged (z = {z}, zdot = {zdot})"
        )));
    }
    let p = (-z).max(0.0);
    Ok(ContactState {
        z,
        zdot,
        p,
        force: if p > 0.0 {
            state.k * p + state.c * (-zdot).max(0.0)
        } else {
            0.0
        },
        ..*state
    })
}

/// Below `v_min` sinkage can only deepen.
pub fn latch_sinkage(z_prev: f64, z_new: f64, v: f64, v_min: f64) -> f64 {
    if v <= v_min {
        z_prev.min(z_new)
    } else {
        z_new
    }
}

/// Inputs that describe one wheel's situation for a contact update.
#[derive(Debug, Clone, Copy)]
pub struct WheelLoad {
    /// N
    pub f_z: f64,
    /// Slip magnitude fed to the sinkage model, in [0, 1].
    pub s: f64,
    /// Body speed used by the latch, m/s.
    pub v: f64,
    /// Effective mass carried by the wheel, kg.
    pub m: f64,
    /// Stiffness of a rigid obstacle under the wheel, if any.
    pub k_override: Option<f64>,
}

/// Runs the per-step contact pipeline for one wheel: sinkage target, latch,
/// stiffness, damping, penetration, commit.
///
/// In ODE mode the spring is driven by the wheel's own load (`F_z/m` stands in
/// for gravity) so that its equilibrium matches the quasi-static answer.
pub fn update_contact(
    load: &WheelLoad,
    geom: &WheelGeometry,
    sink_model: &SinkageModelParams,
    params: &ContactParams,
    state: &ContactState,
    dt: f64,
) -> Result<ContactState> {
    let WheelLoad {
        f_z,
        s,
        v,
        m,
        k_override,
    } = *load;
    if ![f_z, s, v, m, dt].iter().all(|x| x.is_finite()) {
        return Err(Error::Numeric("non-finite contact input".into()));
    }
    let n = params.n_points as f64;

    let (k, z_committed) = match k_override {
        Some(k_rigid) => (k_rigid / n, state.z_latched),
        None => {
            let z_model = model::sinkage(s, f_z, sink_model)?;
            let z_target = latch_sinkage(state.z_latched, z_model, v, params.v_min);
            (stiffness(f_z, z_target, geom.h, params), z_target)
        }
    };
    let k_total = n * k;
    let c = critical_damping(k_total, m);

    let mut next = ContactState {
        k,
        c,
        z_latched: z_committed,
        ..*state
    };
    match params.mode {
        ContactMode::QuasiStatic => {
            let p = quasi_static_penetration(f_z / n, k);
            next.p = p;
            next.z = -p;
            next.zdot = 0.0;
            next.force = f_z;
        }
        ContactMode::Ode => {
            let g_eff = f_z / m;
            let stepped = step_vertical_ode(&ContactState { k: k_total, ..next }, m, g_eff, dt)?;
            next.p = stepped.p;
            next.z = stepped.z;
            next.zdot = stepped.zdot;
            next.force = stepped.force;
        }
    }
    next.sinkage = base_sinkage_mm(next.p, geom.h);
    Ok(next)
}
