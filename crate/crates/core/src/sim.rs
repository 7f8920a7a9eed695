//! Fixed-timestep orchestration of slip, longitudinal motion, wheel loads,
//! compliant contact and terrain deformation, plus steady-state analysis.

use std::fmt::Write as _;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contact::{self, ContactParams, ContactState, WheelLoad};
use crate::error::{Error, Result};
use crate::model::{self, ModelParams, ALPHA_WINDOW_DEG};
use crate::terrain::{self, Pose, TerrainGrid, TracePatternParams};
use crate::vehicle::{self, FrictionParams, LimiterParams, RoverState, WheelGeometry};

pub const WHEEL_NAMES: [&str; 4] = ["fl", "fr", "rl", "rr"];

pub const TELEMETRY_HEADER: &str = "t,v_cmd,v,s,alpha,z_fl,z_fr,z_rl,z_rr,Fz_fl,Fz_fr,Fz_rl,Fz_rr,k_fl,k_fr,k_rl,k_rr,x,y,theta_cmd,theta_phys";

pub const SWEEP_HEADER: &str = "v_w,alpha,s_steady,z_steady_mm";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialPose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Default for InitialPose {
    fn default() -> Self {
        Self {
            x: 0.0,
            y: 0.0,
            heading: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RoverParams {
    /// kg
    pub mass: f64,
    pub wheel: WheelGeometry,
    /// Front-to-rear axle distance, m.
    pub wheelbase: f64,
    /// Left-to-right wheel distance, m.
    pub track: f64,
    /// Centre-of-gravity height used for pitch load transfer, m.
    pub cg_height: f64,
    pub initial_pose: InitialPose,
    /// Fixed per-wheel loads (FL, FR, RL, RR) replacing the computed ones.
    pub wheel_loads: Option<[Option<f64>; 4]>,
    /// Per-wheel effective contact masses; defaults to an even split.
    pub wheel_masses: Option<[f64; 4]>,
    /// Fraction of the outer front wheel's load added to it while turning,
    /// taken from the inner front wheel.
    pub turn_load_boost: f64,
}

impl Default for RoverParams {
    fn default() -> Self {
        Self {
            mass: 21.63,
            wheel: WheelGeometry::default(),
            wheelbase: 0.55,
            track: 0.4,
            cg_height: 0.2,
            initial_pose: InitialPose::default(),
            wheel_loads: None,
            wheel_masses: None,
            turn_load_boost: 0.25,
        }
    }
}

impl RoverParams {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(
                    format!("{prefix}{name}"),
                    format!("must be positive, got {v}"),
                ))
            }
        };
        positive("mass", self.mass)?;
        positive("wheelbase", self.wheelbase)?;
        positive("track", self.track)?;
        if !(self.cg_height >= 0.0 && self.cg_height.is_finite()) {
            return Err(Error::config(
                format!("{prefix}cg_height"),
                "must be non-negative",
            ));
        }
        if !(0.0..=1.0).contains(&self.turn_load_boost) {
            return Err(Error::config(
                format!("{prefix}turn_load_boost"),
                "must lie in [0, 1]",
            ));
        }
        self.wheel.validate(&format!("{prefix}wheel."))?;
        let p = self.initial_pose;
        if ![p.x, p.y, p.heading].iter().all(|v| v.is_finite()) {
            return Err(Error::config(
                format!("{prefix}initial_pose"),
                "must be finite",
            ));
        }
        if let Some(loads) = &self.wheel_loads {
            for (i, l) in loads.iter().enumerate() {
                if let Some(f) = l {
                    if !(*f >= 0.0 && f.is_finite()) {
                        return Err(Error::config(
                            format!("{prefix}wheel_loads[{i}]"),
                            "must be a non-negative load",
                        ));
                    }
                }
            }
        }
        if let Some(masses) = &self.wheel_masses {
            for (i, &m) in masses.iter().enumerate() {
                positive(&format!("wheel_masses[{i}]"), m)?;
            }
        }
        Ok(())
    }

    pub fn wheel_mass(&self, wheel: usize) -> f64 {
        self.wheel_masses.map_or(self.mass / 4.0, |m| m[wheel])
    }

    /// Body-frame contact point of each wheel (forward, left).
    pub fn wheel_offsets(&self) -> [(f64, f64); 4] {
        let (a, b) = (0.5 * self.wheelbase, 0.5 * self.track);
        [(a, b), (a, -b), (-a, b), (-a, -b)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TerrainShape {
    Flat,
    /// Plane rising along the rover's initial heading.
    ConstantSlope {
        deg: f64,
    },
    Heightmap {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rock {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
    /// N/m
    pub stiffness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TerrainParams {
    pub shape: TerrainShape,
    /// m per cell; ignored for heightmaps, which carry their own.
    pub resolution: f64,
    pub deformation: bool,
    pub trace: TracePatternParams,
    pub rocks: Vec<Rock>,
}

impl Default for TerrainParams {
    fn default() -> Self {
        Self {
            shape: TerrainShape::Flat,
            resolution: 0.025,
            deformation: true,
            trace: TracePatternParams::default(),
            rocks: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    /// s
    pub t: f64,
    /// Commanded wheel surface speed, m/s.
    pub v_w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PathKind {
    #[default]
    Straight,
    /// Constant-radius arc; positive radius turns left.
    Arc { radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CommandParams {
    pub waypoints: Vec<Waypoint>,
    pub path: PathKind,
}

impl Default for CommandParams {
    fn default() -> Self {
        Self {
            waypoints: vec![Waypoint { t: 0.0, v_w: 0.0 }],
            path: PathKind::Straight,
        }
    }
}

/// What to do when the terrain slope leaves the slip model's window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaPolicy {
    #[default]
    Reject,
    Clamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimParams {
    pub dt_hz: f64,
    pub duration_s: f64,
    /// m/s²
    pub gravity: f64,
    /// Time after each command change excluded from steady-state analysis, s.
    pub settle_s: f64,
    pub alpha_policy: AlphaPolicy,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            dt_hz: 30.0,
            duration_s: 10.0,
            gravity: 1.62,
            settle_s: 3.0,
            alpha_policy: AlphaPolicy::Reject,
        }
    }
}

/// Everything needed to run one simulation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scenario {
    pub rover: RoverParams,
    pub models: ModelParams,
    pub friction: FrictionParams,
    pub limiter: LimiterParams,
    pub contact: ContactParams,
    pub terrain: TerrainParams,
    pub command: CommandParams,
    pub sim: SimParams,
}

impl Scenario {
    pub fn dt(&self) -> f64 {
        1.0 / self.sim.dt_hz
    }

    pub fn step_count(&self) -> usize {
        (self.sim.duration_s * self.sim.dt_hz - 1e-9)
            .ceil()
            .max(0.0) as usize
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.sim;
        if !(s.dt_hz > 0.0 && s.dt_hz.is_finite()) {
            return Err(Error::config(
                "sim.dt_hz",
                format!("must be positive, got {}", s.dt_hz),
            ));
        }
        if !(s.duration_s > 0.0 && s.duration_s.is_finite()) {
            return Err(Error::config("sim.duration_s", "must be positive"));
        }
        if !(s.gravity > 0.0 && s.gravity.is_finite()) {
            return Err(Error::config("sim.gravity", "must be positive"));
        }
        if !(s.settle_s >= 0.0 && s.settle_s.is_finite()) {
            return Err(Error::config("sim.settle_s", "must be non-negative"));
        }
        self.rover.validate("rover.")?;
        self.models.validate("model.")?;
        self.friction.validate("friction.")?;
        self.limiter.validate("limiter.")?;
        self.contact.validate("contact.")?;
        self.terrain.trace.validate("terrain.trace.")?;
        if !(self.terrain.resolution > 0.0 && self.terrain.resolution.is_finite()) {
            return Err(Error::config("terrain.resolution", "must be positive"));
        }
        if let TerrainShape::ConstantSlope { deg } = self.terrain.shape {
            if !(deg.abs() < 90.0) {
                return Err(Error::config(
                    "terrain.shape.constant_slope.deg",
                    "must lie in (-90, 90)",
                ));
            }
        }
        for (i, r) in self.terrain.rocks.iter().enumerate() {
            if !(r.radius > 0.0 && r.stiffness > 0.0) {
                return Err(Error::config(
                    format!("terrain.rocks[{i}]"),
                    "radius and stiffness must be positive",
                ));
            }
        }
        let wps = &self.command.waypoints;
        match wps.first() {
            None => {
                return Err(Error::config(
                    "command.waypoints",
                    "needs at least one waypoint",
                ))
            }
            Some(w) if w.t != 0.0 => {
                return Err(Error::config(
                    "command.waypoints[0].t",
                    "first waypoint must be at t = 0",
                ))
            }
            _ => {}
        }
        for (i, w) in wps.iter().enumerate() {
            if !(w.v_w >= 0.0 && w.v_w.is_finite()) {
                return Err(Error::config(
                    format!("command.waypoints[{i}].v_w"),
                    "must be >= 0",
                ));
            }
            if i > 0 && !(w.t >= wps[i - 1].t) {
                return Err(Error::config(
                    format!("command.waypoints[{i}].t"),
                    "waypoint times must be non-decreasing",
                ));
            }
        }
        if let PathKind::Arc { radius } = self.command.path {
            if !(radius.is_finite() && radius.abs() > 0.5 * self.rover.track) {
                return Err(Error::config(
                    "command.path.arc.radius",
                    "must be finite and wider than half the track",
                ));
            }
        }
        Ok(())
    }

    /// Step-hold command: the last waypoint at or before `t`.
    pub fn command_at(&self, t: f64) -> f64 {
        let wps = &self.command.waypoints;
        let idx = wps.partition_point(|w| w.t <= t + 1e-9);
        wps[idx.saturating_sub(1)].v_w
    }

    /// Upper bound on the distance the rover can cover.
    fn max_travel(&self) -> f64 {
        let wps = &self.command.waypoints;
        let end = self.sim.duration_s;
        wps.iter()
            .enumerate()
            .map(|(i, w)| {
                let t1 = wps.get(i + 1).map_or(end, |n| n.t.min(end));
                w.v_w * (t1 - w.t).max(0.0)
            })
            .sum()
    }

    /// Builds the terrain the scenario runs on.
    pub fn build_terrain(&self) -> Result<TerrainGrid> {
        let pose = self.rover.initial_pose;
        let mut grid = match &self.terrain.shape {
            TerrainShape::Heightmap { path } => terrain::read_asc(path)?,
            shape => {
                let res = self.terrain.resolution;
                let travel = self.max_travel();
                let margin = 1.0 + 0.5 * self.rover.wheelbase.max(self.rover.track);
                let (c, s) = (pose.heading.cos(), pose.heading.sin());
                let (mut x0, mut x1, mut y0, mut y1) = match self.command.path {
                    PathKind::Straight => {
                        let (ex, ey) = (pose.x + travel * c, pose.y + travel * s);
                        (
                            pose.x.min(ex),
                            pose.x.max(ex),
                            pose.y.min(ey),
                            pose.y.max(ey),
                        )
                    }
                    PathKind::Arc { radius } => {
                        let (cx, cy) = (pose.x - radius * s, pose.y + radius * c);
                        let r = radius.abs();
                        (
                            (cx - r).max(pose.x - travel),
                            (cx + r).min(pose.x + travel),
                            (cy - r).max(pose.y - travel),
                            (cy + r).min(pose.y + travel),
                        )
                    }
                };
                x0 -= margin;
                x1 += margin;
                y0 -= margin;
                y1 += margin;
                let nx = ((x1 - x0) / res).ceil() as usize + 1;
                let ny = ((y1 - y0) / res).ceil() as usize + 1;
                let tan = match shape {
                    TerrainShape::ConstantSlope { deg } => deg.to_radians().tan(),
                    _ => 0.0,
                };
                TerrainGrid::from_fn(nx, ny, res, (x0, y0), |x, y| {
                    tan * ((x - pose.x) * c + (y - pose.y) * s)
                })?
            }
        };
        for r in &self.terrain.rocks {
            grid.add_rock(r.x, r.y, r.radius, r.stiffness);
        }
        Ok(grid)
    }
}

/// One row of telemetry, emitted after every step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TelemetryRecord {
    /// s, at the end of the step
    pub t: f64,
    /// Commanded wheel surface speed ω_cmd·R, m/s.
    pub v_cmd: f64,
    /// m/s
    pub v: f64,
    /// Slip ratio of body speed against the commanded wheel speed.
    pub s: f64,
    /// deg
    pub alpha: f64,
    /// mm
    pub z: [f64; 4],
    /// N
    pub f_z: [f64; 4],
    /// N/m
    pub k: [f64; 4],
    pub x: f64,
    pub y: f64,
    pub theta_cmd: f64,
    pub theta_phys: f64,
}

/// Mutable simulation state.
#[derive(Debug, Clone)]
pub struct World {
    pub rover: RoverState,
    pub contacts: [ContactState; 4],
    pub terrain: TerrainGrid,
    /// Distance travelled by the chassis, m.
    pub odometer: f64,
    pub steps: usize,
}

impl World {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        scenario.validate()?;
        let p = scenario.rover.initial_pose;
        Ok(Self {
            rover: RoverState {
                x: p.x,
                y: p.y,
                heading: p.heading,
                ..Default::default()
            },
            contacts: [ContactState::default(); 4],
            terrain: scenario.build_terrain()?,
            odometer: 0.0,
            steps: 0,
        })
    }

    fn wheel_pose(&self, offset: (f64, f64)) -> Pose {
        let h = self.rover.heading;
        let (c, s) = (h.cos(), h.sin());
        Pose {
            x: self.rover.x + offset.0 * c - offset.1 * s,
            y: self.rover.y + offset.0 * s + offset.1 * c,
            heading: h,
        }
    }

    /// Advances one fixed step and reports the resulting state.
    pub fn step(&mut self, sc: &Scenario) -> Result<TelemetryRecord> {
        let dt = sc.dt();
        let g = sc.sim.gravity;
        let geom = sc.rover.wheel;
        let r_eff = geom.effective_radius();
        let t0 = self.steps as f64 * dt;

        let v_w = sc.command_at(t0);

        let mut alpha = self
            .terrain
            .slope_at(self.rover.x, self.rover.y, self.rover.heading)?;
        if alpha.abs() > ALPHA_WINDOW_DEG && sc.sim.alpha_policy == AlphaPolicy::Clamp {
            alpha = alpha.clamp(-ALPHA_WINDOW_DEG, ALPHA_WINDOW_DEG);
        }
        let s_model = model::slip_slope(v_w, alpha, &sc.models.slip)?;

        let v_prev = self.rover.v;
        let mut rover = vehicle::step_longitudinal(
            &self.rover,
            v_w,
            s_model,
            &sc.friction,
            &sc.limiter,
            &geom,
            g,
            dt,
        )?;
        let ds = 0.5 * (v_prev + rover.v) * dt;
        if let PathKind::Arc { radius } = sc.command.path {
            rover.heading += ds / radius;
        }
        self.odometer += ds;

        let s = vehicle::slip_ratio(rover.v, v_w / r_eff, r_eff)?;
        let loads = wheel_loads(sc, alpha);
        self.rover = rover;

        let offsets = sc.rover.wheel_offsets();
        for w in 0..4 {
            let pose = self.wheel_pose(offsets[w]);
            let load = WheelLoad {
                f_z: loads[w],
                s: s.abs().min(1.0),
                v: rover.v,
                m: sc.rover.wheel_mass(w),
                k_override: self.terrain.k_override_at(pose.x, pose.y),
            };
            self.contacts[w] = contact::update_contact(
                &load,
                &geom,
                &sc.models.sinkage,
                &sc.contact,
                &self.contacts[w],
                dt,
            )?;
            self.rover.f_z[w] = loads[w];
            self.rover.z[w] = self.contacts[w].sinkage;

            if sc.terrain.deformation {
                self.terrain.imprint_wheel(
                    pose,
                    self.contacts[w].sinkage,
                    s,
                    loads[w],
                    sc.models.sinkage.f_ref,
                    &geom,
                    &sc.terrain.trace,
                    self.odometer + offsets[w].0,
                )?;
            }
        }

        self.steps += 1;
        Ok(TelemetryRecord {
            t: self.steps as f64 * dt,
            v_cmd: v_w,
            v: self.rover.v,
            s,
            alpha,
            z: self.rover.z,
            f_z: self.rover.f_z,
            k: self.contacts.map(|c| c.k),
            x: self.rover.x,
            y: self.rover.y,
            theta_cmd: self.rover.theta_cmd[0],
            theta_phys: self.rover.theta_phys[0],
        })
    }
}

/// Static per-wheel loads (FL, FR, RL, RR) on a pitch of `alpha` degrees.
///
/// The normal weight `m·g·cos α` is split evenly, shifted rearward uphill by
/// `h_cg/L·tan α`, and on arcs part of the inner front load moves to the
/// outer front wheel. Configured per-wheel loads replace computed ones.
pub fn wheel_loads(sc: &Scenario, alpha: f64) -> [f64; 4] {
    let rv = &sc.rover;
    let a = alpha.to_radians();
    let quarter = rv.mass * sc.sim.gravity * a.cos() / 4.0;
    let shift = rv.cg_height / rv.wheelbase * a.tan();
    let front = (quarter * (1.0 - shift)).max(0.0);
    let rear = (quarter * (1.0 + shift)).max(0.0);
    let mut loads = [front, front, rear, rear];
    if let PathKind::Arc { radius } = sc.command.path {
        let (outer, inner) = if radius > 0.0 { (1, 0) } else { (0, 1) };
        let transfer = (rv.turn_load_boost * loads[outer]).min(loads[inner]);
        loads[outer] += transfer;
        loads[inner] -= transfer;
    }
    if let Some(over) = rv.wheel_loads {
        for (l, o) in loads.iter_mut().zip(over) {
            if let Some(f) = o {
                *l = f;
            }
        }
    }
    loads
}

/// Runs a scenario to completion and returns the telemetry and final world.
pub fn simulate(sc: &Scenario) -> Result<(Vec<TelemetryRecord>, World)> {
    let mut world = World::new(sc)?;
    let n = sc.step_count();
    let mut records = Vec::with_capacity(n);
    for _ in 0..n {
        records.push(world.step(sc)?);
    }
    Ok((records, world))
}

pub fn run_scenario(sc: &Scenario) -> Result<Vec<TelemetryRecord>> {
    simulate(sc).map(|(records, _)| records)
}

fn f6(v: f64) -> String {
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        "0.000000".to_owned()
    } else {
        s
    }
}

/// Renders telemetry as CSV with six decimals and LF line endings.
pub fn telemetry_csv(records: &[TelemetryRecord]) -> String {
    let mut out = String::with_capacity(records.len() * 200);
    out.push_str(TELEMETRY_HEADER);
    out.push('\n');
    for r in records {
        let mut fields = vec![f6(r.t), f6(r.v_cmd), f6(r.v), f6(r.s), f6(r.alpha)];
        fields.extend(r.z.iter().map(|&v| f6(v)));
        fields.extend(r.f_z.iter().map(|&v| f6(v)));
        fields.extend(r.k.iter().map(|&v| f6(v)));
        fields.extend([f6(r.x), f6(r.y), f6(r.theta_cmd), f6(r.theta_phys)]);
        let _ = writeln!(out, "{}", fields.join(","));
    }
    out
}

/// Steady-state deviation of simulated slip and sinkage from the regressions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    /// Mean absolute slip error, percentage points.
    pub slip_mae: f64,
    /// Largest absolute slip error, percentage points.
    pub slip_max: f64,
    /// Mean absolute sinkage error over all wheels, mm.
    pub sinkage_mae: f64,
    pub sinkage_max: f64,
    /// Number of telemetry rows analysed.
    pub samples: usize,
}

/// Indices of rows that are at least `settle` seconds past the most recent
/// command change (the run start counts as one) and have a nonzero command.
pub fn steady_indices(telemetry: &[TelemetryRecord], dt: f64, settle: f64) -> Vec<usize> {
    let mut out = Vec::new();
    let mut last_change = 0.0;
    let mut prev_cmd = None;
    for (i, r) in telemetry.iter().enumerate() {
        let t_start = r.t - dt;
        if prev_cmd.is_some_and(|p: f64| p != r.v_cmd) {
            last_change = t_start;
        }
        prev_cmd = Some(r.v_cmd);
        if r.v_cmd > 0.0 && t_start - last_change >= settle - 1e-9 {
            out.push(i);
        }
    }
    out
}

/// Compares steady-state telemetry against direct evaluation of the slip and
/// sinkage regressions at each row's command, slope and loads.
pub fn error_report(
    telemetry: &[TelemetryRecord],
    models: &ModelParams,
    dt: f64,
    settle: f64,
) -> Result<ErrorStats> {
    let idx = steady_indices(telemetry, dt, settle);
    if idx.is_empty() {
        return Err(Error::Analysis(format!(
            "no steady-state samples after a {settle} s settle window"
        )));
    }
    let (mut slip_sum, mut slip_max, mut sink_sum, mut sink_max) = (0.0, 0.0f64, 0.0, 0.0f64);
    for &i in &idx {
        let r = &telemetry[i];
        let alpha = r.alpha.clamp(-ALPHA_WINDOW_DEG, ALPHA_WINDOW_DEG);
        let s_ref = model::slip_slope(r.v_cmd, alpha, &models.slip)?;
        let e = (r.s - s_ref).abs();
        slip_sum += e;
        slip_max = slip_max.max(e);
        for w in 0..4 {
            let z_ref = model::sinkage(s_ref, r.f_z[w], &models.sinkage)?;
            let e = (r.z[w] - z_ref).abs();
            sink_sum += e;
            sink_max = sink_max.max(e);
        }
    }
    let n = idx.len() as f64;
    Ok(ErrorStats {
        slip_mae: 100.0 * slip_sum / n,
        slip_max: 100.0 * slip_max,
        sinkage_mae: sink_sum / (4.0 * n),
        sinkage_max: sink_max,
        samples: idx.len(),
    })
}

/// Steady-state outcome of one sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub v_w: f64,
    pub alpha: f64,
    pub s_steady: f64,
    /// Mean over wheels and steady rows, mm.
    pub z_steady_mm: f64,
}

/// Scenario for one sweep point: constant command on a constant slope.
pub fn sweep_point_scenario(template: &Scenario, v_w: f64, alpha: f64) -> Scenario {
    let mut sc = template.clone();
    sc.terrain.shape = if alpha == 0.0 {
        TerrainShape::Flat
    } else {
        TerrainShape::ConstantSlope { deg: alpha }
    };
    sc.command = CommandParams {
        waypoints: vec![Waypoint { t: 0.0, v_w }],
        path: PathKind::Straight,
    };
    sc
}

/// Runs a steady-state slip map over every `(v_w, alpha)` pair, fanned out on
/// at most `threads` workers. Rows come back sorted by `(v_w, alpha)`.
pub fn sweep(
    template: &Scenario,
    v_list: &[f64],
    alpha_list: &[f64],
    threads: usize,
) -> Result<Vec<SweepRow>> {
    if v_list.is_empty() || alpha_list.is_empty() {
        return Err(Error::domain(
            "sweep needs at least one speed and one slope",
        ));
    }
    if let Some(v) = v_list.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::domain(format!("sweep speed {v} must be positive")));
    }
    if let Some(a) = alpha_list.iter().find(|a| !(a.abs() <= ALPHA_WINDOW_DEG)) {
        return Err(Error::domain(format!(
            "sweep slope {a} outside [-{ALPHA_WINDOW_DEG}, {ALPHA_WINDOW_DEG}] deg"
        )));
    }
    let mut grid: Vec<(f64, f64)> = v_list
        .iter()
        .flat_map(|&v| alpha_list.iter().map(move |&a| (v, a)))
        .collect();
    grid.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    grid.dedup();

    let run_point = |&(v_w, alpha): &(f64, f64)| -> Result<SweepRow> {
        let sc = sweep_point_scenario(template, v_w, alpha);
        let records = run_scenario(&sc)?;
        let idx = steady_indices(&records, sc.dt(), sc.sim.settle_s);
        if idx.is_empty() {
            return Err(Error::Analysis(format!(
                "sweep point v_w = {v_w}, alpha = {alpha} never reached steady state"
            )));
        }
        let n = idx.len() as f64;
        let s_steady = idx.iter().map(|&i| records[i].s).sum::<f64>() / n;
        let z_steady_mm = idx
            .iter()
            .map(|&i| records[i].z.iter().sum::<f64>() / 4.0)
            .sum::<f64>()
            / n;
        Ok(SweepRow {
            v_w,
            alpha,
            s_steady,
            z_steady_mm,
        })
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Analysis(format!("thread pool: {e}")))?;
    pool.install(|| grid.par_iter().map(run_point).collect())
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            f6(r.v_w),
            f6(r.alpha),
            f6(r.s_steady),
            f6(r.z_steady_mm)
        );
    }
    out
}
