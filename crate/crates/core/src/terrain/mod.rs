//! Deformable heightmap terrain.
//!
//! Elevation is kept as three channels: the undeformed `base`, a permanent
//! `depth` that only ever deepens, and a transient grouser `trace` that is
//! regenerated on every pass. What is rendered is their sum.

mod dem;

pub use dem::{read_asc, write_asc, write_mask, Channel};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vehicle::WheelGeometry;

/// Parameters of the sinusoidal grouser trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TracePatternParams {
    /// Base amplitude, m.
    pub a0: f64,
    /// Slip at which the pattern is fully smeared out.
    pub s_clamp: f64,
    /// Wavelength as a multiple of the grouser pitch.
    pub lambda_scale: f64,
}

impl Default for TracePatternParams {
    fn default() -> Self {
        Self {
            a0: 0.002,
            s_clamp: 0.8,
            lambda_scale: 1.0,
        }
    }
}

impl TracePatternParams {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        if !(self.a0 >= 0.0 && self.a0.is_finite()) {
            return Err(Error::config(format!("{prefix}a0"), "must be non-negative"));
        }
        if !(self.s_clamp > 0.0 && self.s_clamp <= 1.0) {
            return Err(Error::config(
                format!("{prefix}s_clamp"),
                "must lie in (0, 1]",
            ));
        }
        if !(self.lambda_scale > 0.0 && self.lambda_scale.is_finite()) {
            return Err(Error::config(
                format!("{prefix}lambda_scale"),
                "must be positive",
            ));
        }
        Ok(())
    }
}

/// Planar pose of a wheel contact point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

/// Regular grid; cell `(i, j)` is centred at `origin + (i, j)·resolution`.
#[derive(Debug, Clone, PartialEq)]
pub struct TerrainGrid {
    nx: usize,
    ny: usize,
    resolution: f64,
    origin: (f64, f64),
    base: Vec<f64>,
    depth: Vec<f64>,
    trace: Vec<f64>,
    k_override: Vec<Option<f64>>,
}

impl TerrainGrid {
    pub fn flat(nx: usize, ny: usize, resolution: f64, origin: (f64, f64)) -> Result<Self> {
        Self::from_fn(nx, ny, resolution, origin, |_, _| 0.0)
    }

    /// Builds a grid whose base elevation at each cell centre is `f(x, y)`.
    pub fn from_fn(
        nx: usize,
        ny: usize,
        resolution: f64,
        origin: (f64, f64),
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::domain(format!(
                "grid must be at least 2x2, got {nx}x{ny}"
            )));
        }
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(Error::domain(format!(
                "resolution must be positive, got {resolution}"
            )));
        }
        let n = nx * ny;
        let mut base = Vec::with_capacity(n);
        for j in 0..ny {
            for i in 0..nx {
                base.push(f(
                    origin.0 + i as f64 * resolution,
                    origin.1 + j as f64 * resolution,
                ));
            }
        }
        Ok(Self {
            nx,
            ny,
            resolution,
            origin,
            base,
            depth: vec![0.0; n],
            trace: vec![0.0; n],
            k_override: vec![None; n],
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> (f64, f64) {
        self.origin
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    fn check_cell(&self, i: usize, j: usize) -> Result<usize> {
        if i >= self.nx || j >= self.ny {
            return Err(Error::Bounds(format!(
                "cell ({i}, {j}) outside {}x{} grid",
                self.nx, self.ny
            )));
        }
        Ok(self.idx(i, j))
    }

    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.origin.0 + i as f64 * self.resolution,
            self.origin.1 + j as f64 * self.resolution,
        )
    }

    pub fn base(&self, i: usize, j: usize) -> f64 {
        self.base[self.idx(i, j)]
    }

    pub fn depth(&self, i: usize, j: usize) -> f64 {
        self.depth[self.idx(i, j)]
    }

    pub fn trace(&self, i: usize, j: usize) -> f64 {
        self.trace[self.idx(i, j)]
    }

    pub fn rendered(&self, i: usize, j: usize) -> f64 {
        let k = self.idx(i, j);
        self.base[k] + self.depth[k] + self.trace[k]
    }

    pub fn channel(&self, ch: Channel, i: usize, j: usize) -> f64 {
        match ch {
            Channel::Base => self.base(i, j),
            Channel::Depth => self.depth(i, j),
            Channel::Trace => self.trace(i, j),
            Channel::Rendered => self.rendered(i, j),
        }
    }

    pub fn set_base(&mut self, i: usize, j: usize, value: f64) -> Result<()> {
        let k = self.check_cell(i, j)?;
        self.base[k] = value;
        Ok(())
    }

    pub fn set_k_override(&mut self, i: usize, j: usize, k: Option<f64>) -> Result<()> {
        let idx = self.check_cell(i, j)?;
        self.k_override[idx] = k;
        Ok(())
    }

    /// Marks every cell whose centre lies within `radius` of `(cx, cy)` as a
    /// rigid obstacle with stiffness `k`.
    pub fn add_rock(&mut self, cx: f64, cy: f64, radius: f64, k: f64) {
        for j in 0..self.ny {
            for i in 0..self.nx {
                let (x, y) = self.cell_center(i, j);
                if (x - cx).hypot(y - cy) <= radius {
                    let idx = self.idx(i, j);
                    self.k_override[idx] = Some(k);
                }
            }
        }
    }

    /// Fractional cell coordinates of a point.
    fn locate(&self, x: f64, y: f64) -> (f64, f64) {
        (
            (x - self.origin.0) / self.resolution,
            (y - self.origin.1) / self.resolution,
        )
    }

    fn nearest_cell(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let (fx, fy) = self.locate(x, y);
        let (i, j) = (fx.round(), fy.round());
        if i < 0.0 || j < 0.0 || i >= self.nx as f64 || j >= self.ny as f64 {
            return None;
        }
        Some((i as usize, j as usize))
    }

    /// Obstacle stiffness of the cell nearest to `(x, y)`.
    pub fn k_override_at(&self, x: f64, y: f64) -> Option<f64> {
        self.nearest_cell(x, y)
            .and_then(|(i, j)| self.k_override[self.idx(i, j)])
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (fx, fy) = self.locate(x, y);
        (0.0..=(self.nx - 1) as f64).contains(&fx) && (0.0..=(self.ny - 1) as f64).contains(&fy)
    }

    /// Bilinearly interpolated rendered elevation, m.
    pub fn height_at(&self, x: f64, y: f64) -> Result<f64> {
        if !self.contains(x, y) {
            return Err(Error::Bounds(format!("point ({x}, {y}) outside terrain")));
        }
        let (fx, fy) = self.locate(x, y);
        let i0 = (fx.floor() as usize).min(self.nx - 2);
        let j0 = (fy.floor() as usize).min(self.ny - 2);
        let tx = fx - i0 as f64;
        let ty = fy - j0 as f64;
        let h00 = self.rendered(i0, j0);
        let h10 = self.rendered(i0 + 1, j0);
        let h01 = self.rendered(i0, j0 + 1);
        let h11 = self.rendered(i0 + 1, j0 + 1);
        let lo = h00 + (h10 - h00) * tx;
        let hi = h01 + (h11 - h01) * tx;
        Ok(lo + (hi - lo) * ty)
    }

    /// Slope angle along `heading` in degrees, positive uphill, from central
    /// differences one cell either side of the query point.
    pub fn slope_at(&self, x: f64, y: f64, heading: f64) -> Result<f64> {
        let d = self.resolution;
        let (fx, fy) = self.locate(x, y);
        if fx < 1.0 || fy < 1.0 || fx > (self.nx - 2) as f64 || fy > (self.ny - 2) as f64 {
            return Err(Error::Bounds(format!(
                "slope query ({x}, {y}) needs a one-cell margin inside the terrain"
            )));
        }
        let gx = (self.height_at(x + d, y)? - self.height_at(x - d, y)?) / (2.0 * d);
        let gy = (self.height_at(x, y + d)? - self.height_at(x, y - d)?) / (2.0 * d);
        let along = gx * heading.cos() + gy * heading.sin();
        Ok(along.atan().to_degrees())
    }

    /// Applies one deformation to a cell and returns the change in rendered
    /// elevation. Depth only moves deeper; the trace is replaced outright.
    pub fn deform(&mut self, i: usize, j: usize, d_new: f64, w_new: f64) -> Result<f64> {
        let k = self.check_cell(i, j)?;
        if !(d_new <= 0.0) {
            return Err(Error::domain(format!("depth must be <= 0, got {d_new}")));
        }
        let d_old = self.depth[k];
        self.depth[k] = d_old.min(d_new);
        let dd = self.depth[k] - d_old;
        let dw = w_new - self.trace[k];
        self.trace[k] = w_new;
        Ok(dd + dw)
    }

    /// Stamps a wheel footprint: uniform depth `z_sink_mm` and a grouser trace
    /// phased by each cell's along-track position. Rigid cells are skipped.
    ///
    /// The footprint is the wheel width across track times the chord of the
    /// wheel circle at the sinkage depth along track.
    #[allow(clippy::too_many_arguments)]
    pub fn imprint_wheel(
        &mut self,
        pose: Pose,
        z_sink_mm: f64,
        s: f64,
        f_z: f64,
        f_ref: f64,
        geom: &WheelGeometry,
        trace: &TracePatternParams,
        arc_pos: f64,
    ) -> Result<usize> {
        let sink = (-z_sink_mm / 1000.0).max(0.0);
        let r_eff = geom.effective_radius();
        let half_len = (2.0 * r_eff * sink - sink * sink).max(0.0).sqrt();
        let half_wid = 0.5 * geom.width;
        if half_len == 0.0 {
            return Ok(0);
        }
        let (c, sn) = (pose.heading.cos(), pose.heading.sin());
        let corners = [(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)].map(|(a, b)| {
            (
                pose.x + a * half_len * c - b * half_wid * sn,
                pose.y + a * half_len * sn + b * half_wid * c,
            )
        });
        if corners.iter().any(|&(x, y)| !self.contains(x, y)) {
            return Err(Error::Bounds(format!(
                "wheel footprint at ({:.3}, {:.3}) leaves the terrain",
                pose.x, pose.y
            )));
        }
        let (mut fx0, mut fx1, mut fy0, mut fy1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for &(x, y) in &corners {
            let (fx, fy) = self.locate(x, y);
            fx0 = fx0.min(fx);
            fx1 = fx1.max(fx);
            fy0 = fy0.min(fy);
            fy1 = fy1.max(fy);
        }
        let d_new = -sink;
        let s_mag = s.abs().min(1.0);
        let eps = 1e-9;
        let mut touched = 0;
        for j in fy0.ceil() as usize..=fy1.floor() as usize {
            for i in fx0.ceil() as usize..=fx1.floor() as usize {
                if self.k_override[self.idx(i, j)].is_some() {
                    continue;
                }
                let (x, y) = self.cell_center(i, j);
                let (dx, dy) = (x - pose.x, y - pose.y);
                let along = dx * c + dy * sn;
                let across = -dx * sn + dy * c;
                if along.abs() > half_len + eps || across.abs() > half_wid + eps {
                    continue;
                }
                let w = trace_pattern(s_mag, f_z, f_ref, arc_pos + along, geom, trace);
                self.deform(i, j, d_new, w)?;
                touched += 1;
            }
        }
        Ok(touched)
    }
}

/// Grouser trace height at along-track position `arc_pos`, m.
///
/// Amplitude fades linearly to zero as slip approaches `s_clamp` and scales
/// with load relative to `f_ref`, capped at twice the base amplitude.
pub fn trace_pattern(
    s: f64,
    f_z: f64,
    f_ref: f64,
    arc_pos: f64,
    geom: &WheelGeometry,
    p: &TracePatternParams,
) -> f64 {
    let lambda =
        p.lambda_scale * std::f64::consts::TAU * geom.effective_radius() / geom.n_grousers as f64;
    let slip_factor = (1.0 - s / p.s_clamp).max(0.0);
    let load_factor = (f_z / f_ref).min(2.0);
    p.a0 * slip_factor * load_factor * (std::f64::consts::TAU * arc_pos / lambda).sin()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grouser_wavelength(geom: &WheelGeometry) -> f64 {
        std::f64::consts::TAU * geom.effective_radius() / geom.n_grousers as f64
    }

    #[test]
    fn height_at_cell_centre_and_midpoint() {
        let mut g = TerrainGrid::flat(3, 3, 1.0, (0.0, 0.0)).unwrap();
        g.set_base(1, 1, 1.0).unwrap();
        assert_eq!(g.height_at(1.0, 1.0).unwrap(), 1.0);
        assert!((g.height_at(0.5, 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(g.height_at(2.5, 0.0), Err(Error::Bounds(_))));
    }

    #[test]
    fn height_on_inclined_plane() {
        let t = 10f64.to_radians().tan();
        let g = TerrainGrid::from_fn(80, 20, 0.025, (0.0, 0.0), |x, _| x * t).unwrap();
        let dh = g.height_at(1.5, 0.2).unwrap() - g.height_at(0.5, 0.2).unwrap();
        assert!((dh - t).abs() < 1e-9);
    }

    #[test]
    fn slope_queries() {
        let flat = TerrainGrid::flat(10, 10, 0.05, (0.0, 0.0)).unwrap();
        assert_eq!(flat.slope_at(0.2, 0.2, 1.0).unwrap(), 0.0);

        let t = 15f64.to_radians().tan();
        let g = TerrainGrid::from_fn(40, 40, 0.05, (0.0, 0.0), |x, _| x * t).unwrap();
        assert!((g.slope_at(1.0, 1.0, 0.0).unwrap() - 15.0).abs() < 0.01);
        assert!((g.slope_at(1.0, 1.0, std::f64::consts::PI).unwrap() + 15.0).abs() < 0.01);
        assert!(
            g.slope_at(1.0, 1.0, std::f64::consts::FRAC_PI_2)
                .unwrap()
                .abs()
                < 0.01
        );
        assert!(g.slope_at(0.01, 1.0, 0.0).is_err());
    }

    #[test]
    fn trace_pattern_examples() {
        let geom = WheelGeometry::default();
        let p = TracePatternParams::default();
        let quarter = grouser_wavelength(&geom) / 4.0;
        assert_eq!(
            trace_pattern(p.s_clamp, 8.72, 8.72, quarter, &geom, &p),
            0.0
        );
        assert!((trace_pattern(0.0, 8.72, 8.72, quarter, &geom, &p) - p.a0).abs() < 1e-15);
        let half = TracePatternParams { s_clamp: 1.0, ..p };
        assert!((trace_pattern(0.5, 8.72, 8.72, quarter, &geom, &half) - 0.5 * p.a0).abs() < 1e-15);
        assert!((trace_pattern(0.0, 100.0, 8.72, quarter, &geom, &p) - 2.0 * p.a0).abs() < 1e-15);
    }

    #[test]
    fn deform_examples() {
        let mut g = TerrainGrid::flat(2, 2, 1.0, (0.0, 0.0)).unwrap();
        g.deform(0, 0, -0.005, 0.0).unwrap();
        let delta = g.deform(0, 0, -0.008, 0.0).unwrap();
        assert!((delta + 0.003).abs() < 1e-15);
        assert_eq!(g.depth(0, 0), -0.008);

        let delta = g.deform(0, 0, -0.004, 0.0).unwrap();
        assert_eq!(delta, 0.0);
        assert_eq!(g.depth(0, 0), -0.008);

        g.deform(1, 1, 0.0, 0.001).unwrap();
        let delta = g.deform(1, 1, 0.0, -0.002).unwrap();
        assert!((delta + 0.003).abs() < 1e-15);
        assert_eq!(g.trace(1, 1), -0.002);

        assert!(matches!(g.deform(2, 0, -0.001, 0.0), Err(Error::Bounds(_))));
        assert!(matches!(g.deform(0, 0, 0.001, 0.0), Err(Error::Domain(_))));
    }

    fn straight_pass(g: &mut TerrainGrid, z_mm: f64, a0: f64) {
        let geom = WheelGeometry::default();
        let trace = TracePatternParams {
            a0,
            ..Default::default()
        };
        let mut x = 0.2;
        while x <= 1.8 {
            let pose = Pose {
                x,
                y: 0.5,
                heading: 0.0,
            };
            g.imprint_wheel(pose, z_mm, 0.05, 8.72, 8.72, &geom, &trace, x)
                .unwrap();
            x += 0.01;
        }
    }

    #[test]
    fn straight_pass_cuts_uniform_rut() {
        let mut g = TerrainGrid::flat(81, 41, 0.025, (0.0, 0.0)).unwrap();
        straight_pass(&mut g, -5.0, 0.002);
        let j = 20;
        for i in 16..=64 {
            assert!(
                (g.depth(i, j) + 0.005).abs() < 1e-9,
                "cell {i}: {}",
                g.depth(i, j)
            );
        }
        assert_eq!(g.depth(40, 0), 0.0);

        let before: Vec<f64> = (0..81).map(|i| g.depth(i, j)).collect();
        straight_pass(&mut g, -5.0, 0.002);
        let after: Vec<f64> = (0..81).map(|i| g.depth(i, j)).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn trace_follows_ground_position() {
        let mut g = TerrainGrid::flat(81, 41, 0.025, (0.0, 0.0)).unwrap();
        straight_pass(&mut g, -5.0, 0.002);
        let geom = WheelGeometry::default();
        let trace = TracePatternParams::default();
        for i in 16..=64 {
            let (x, _) = g.cell_center(i, 20);
            let expected = trace_pattern(0.05, 8.72, 8.72, x, &geom, &trace);
            assert!((g.trace(i, 20) - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_sinkage_leaves_grid_untouched() {
        let mut g = TerrainGrid::flat(81, 41, 0.025, (0.0, 0.0)).unwrap();
        let before = g.clone();
        straight_pass(&mut g, 0.0, 0.0);
        assert_eq!(g, before);
    }

    #[test]
    fn rigid_cells_are_not_deformed() {
        let mut g = TerrainGrid::flat(81, 41, 0.025, (0.0, 0.0)).unwrap();
        g.add_rock(1.0, 0.5, 0.06, 1e9);
        assert_eq!(g.k_override_at(1.0, 0.5), Some(1e9));
        straight_pass(&mut g, -5.0, 0.002);
        assert_eq!(g.depth(40, 20), 0.0);
        assert!(g.depth(20, 20) < 0.0);
    }

    #[test]
    fn footprint_outside_grid_rejected() {
        let mut g = TerrainGrid::flat(10, 10, 0.025, (0.0, 0.0)).unwrap();
        let r = g.imprint_wheel(
            Pose {
                x: 0.0,
                y: 0.0,
                heading: 0.0,
            },
            -5.0,
            0.0,
            8.72,
            8.72,
            &WheelGeometry::default(),
            &TracePatternParams::default(),
            0.0,
        );
        assert!(matches!(r, Err(Error::Bounds(_))));
    }
}
