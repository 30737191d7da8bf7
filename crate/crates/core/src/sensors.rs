//! The 21-value controller input: IR proximity, LiDAR sectors, ground
//! area encodings, quantized light bearing and the grasp flag.
//!
//! Random draws happen in a fixed order (IR, then LiDAR, then ground) so a
//! frame is a pure function of the world, the robot and the RNG state.
//! Zero-sigma noise sources draw nothing.

use std::f64::consts::{FRAC_PI_4, PI};
use std::sync::LazyLock;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ray_box_exit, ray_circle, wrap_pi, Vec2};
use crate::world::{AreaKind, WorldState};

pub const IR_COUNT: usize = 7;
pub const LIDAR_SECTORS: usize = 8;
pub const GROUND_COUNT: usize = 4;
pub const FRAME_LEN: usize = IR_COUNT + LIDAR_SECTORS + GROUND_COUNT + 2;

const LIDAR_RAYS: usize = 360;
const RAYS_PER_SECTOR: usize = LIDAR_RAYS / LIDAR_SECTORS;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    /// Standard deviation of the additive IR noise (unitless).
    pub ir_sigma: f64,
    /// Standard deviation of the per-ray LiDAR range noise, meters.
    pub lidar_sigma: f64,
    pub ground_correct_prob: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            ir_sigma: 0.05,
            lidar_sigma: 0.02,
            ground_correct_prob: 0.85,
        }
    }
}

impl NoiseSpec {
    pub fn noiseless() -> Self {
        NoiseSpec {
            ir_sigma: 0.0,
            lidar_sigma: 0.0,
            ground_correct_prob: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ir_sigma.is_finite() && self.ir_sigma >= 0.0) {
            return Err(Error::config("noise.ir_sigma", "must be non-negative"));
        }
        if !(self.lidar_sigma.is_finite() && self.lidar_sigma >= 0.0) {
            return Err(Error::config("noise.lidar_sigma", "must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.ground_correct_prob) {
            return Err(Error::config("noise.ground_correct_prob", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Controller input in the fixed order s₁…s₂₁.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SensorFrame {
    pub ir: [f64; IR_COUNT],
    pub lidar: [f64; LIDAR_SECTORS],
    pub ground: [f64; GROUND_COUNT],
    pub light: f64,
    pub grasp: f64,
}

impl SensorFrame {
    pub fn to_array(&self) -> [f64; FRAME_LEN] {
        let mut out = [0.0; FRAME_LEN];
        out[..7].copy_from_slice(&self.ir);
        out[7..15].copy_from_slice(&self.lidar);
        out[15..19].copy_from_slice(&self.ground);
        out[19] = self.light;
        out[20] = self.grasp;
        out
    }

    pub fn from_array(a: &[f64; FRAME_LEN]) -> Self {
        let mut f = SensorFrame::default();
        f.ir.copy_from_slice(&a[..7]);
        f.lidar.copy_from_slice(&a[7..15]);
        f.ground.copy_from_slice(&a[15..19]);
        f.light = a[19];
        f.grasp = a[20];
        f
    }

    /// Checks every value against its declared range.
    pub fn in_range(&self) -> bool {
        let unit = |v: &f64| (0.0..=1.0).contains(v);
        let code = |v: &f64| [0.2, 0.4, 0.6, 0.8].contains(v);
        self.ir.iter().all(unit)
            && self.lidar.iter().all(unit)
            && self.ground.iter().all(code)
            && code(&self.light)
            && (self.grasp == 0.0 || self.grasp == 1.0)
    }
}

struct Circle {
    center: Vec2,
    radius: f64,
}

/// Obstacles visible to `robot`: other robots and every object except the
/// one it carries.
fn obstacles(world: &WorldState, robot: usize) -> Vec<Circle> {
    let carried = world.robots[robot].carrying;
    let r = world.robot_spec.radius;
    world
        .robots
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != robot)
        .map(|(_, rb)| Circle {
            center: rb.pose.position(),
            radius: r,
        })
        .chain(world.objects.iter().filter(|o| Some(o.id) != carried).map(|o| Circle {
            center: o.position,
            radius: o.radius,
        }))
        .collect()
}

fn cast(world: &WorldState, circles: &[Circle], origin: Vec2, dir: Vec2) -> f64 {
    let wall = ray_box_exit(origin, dir, world.arena.width, world.arena.length);
    circles
        .iter()
        .filter_map(|c| ray_circle(origin, dir, c.center, c.radius))
        .fold(wall, f64::min)
}

fn normal(sigma: f64) -> Normal<f64> {
    Normal::new(0.0, sigma).expect("sigma validated as finite and non-negative")
}

/// IR proximity readings: `1 - min(d, range) / range`, with `d` measured
/// from the rim of the robot along each ray.
pub fn sense_ir(world: &WorldState, robot: usize, noise: &NoiseSpec, rng: &mut impl Rng) -> [f64; IR_COUNT] {
    let spec = &world.robot_spec;
    let pose = &world.robots[robot].pose;
    let circles = obstacles(world, robot);
    let dist = normal(noise.ir_sigma);
    let mut out = [0.0; IR_COUNT];
    for (slot, angle) in out.iter_mut().zip(spec.ir_angles_deg) {
        let dir = Vec2::from_angle(pose.heading + angle.to_radians());
        let origin = pose.position() + dir * spec.radius;
        let d = cast(world, &circles, origin, dir);
        let mut v = 1.0 - d.min(spec.ir_range) / spec.ir_range;
        if noise.ir_sigma > 0.0 {
            v += dist.sample(rng);
        }
        *slot = v.clamp(0.0, 1.0);
    }
    out
}

static LIDAR_DIRS: LazyLock<[(f64, f64); LIDAR_RAYS]> = LazyLock::new(|| {
    let mut t = [(0.0, 0.0); LIDAR_RAYS];
    for (j, slot) in t.iter_mut().enumerate() {
        *slot = (j as f64).to_radians().sin_cos();
    }
    t
});

/// Sector of a LiDAR ray at `deg` degrees counter-clockwise from the
/// heading. Sector 0 is centred on the heading: rays −22°…+22°.
pub fn lidar_sector(deg: usize) -> usize {
    ((deg + RAYS_PER_SECTOR / 2) % LIDAR_RAYS) / RAYS_PER_SECTOR
}

/// Raw (noiseless, uncapped) distances of the 360 LiDAR rays from the
/// robot center, ray j at j degrees counter-clockwise from the heading.
pub fn lidar_ranges(world: &WorldState, robot: usize) -> [f64; LIDAR_RAYS] {
    let pose = &world.robots[robot].pose;
    let origin = pose.position();
    let (sh, ch) = pose.heading.sin_cos();
    let dirs: Vec<Vec2> = LIDAR_DIRS
        .iter()
        .map(|&(s, c)| Vec2::new(ch * c - sh * s, sh * c + ch * s))
        .collect();
    let mut out = [0.0; LIDAR_RAYS];
    for (slot, d) in out.iter_mut().zip(&dirs) {
        *slot = ray_box_exit(origin, *d, world.arena.width, world.arena.length);
    }
    // Only rays inside a circle's angular shadow can hit it.
    for c in obstacles(world, robot) {
        let oc = c.center - origin;
        let dist = oc.norm();
        if dist <= c.radius {
            out.iter_mut().for_each(|v| *v = 0.0);
            break;
        }
        let half = (c.radius / dist).asin().to_degrees() + 1.0;
        let bearing = wrap_pi(oc.y.atan2(oc.x) - pose.heading).to_degrees();
        let lo = (bearing - half).floor() as i64;
        let hi = (bearing + half).ceil() as i64;
        for k in lo..=hi {
            let j = k.rem_euclid(LIDAR_RAYS as i64) as usize;
            if let Some(t) = ray_circle(origin, dirs[j], c.center, c.radius) {
                if t < out[j] {
                    out[j] = t;
                }
            }
        }
    }
    out
}

/// Eight LiDAR sectors, each the minimum of its 45 noisy, capped rays,
/// normalized by the cap. Noise is added per ray before capping.
pub fn sense_lidar(world: &WorldState, robot: usize, noise: &NoiseSpec, rng: &mut impl Rng) -> [f64; LIDAR_SECTORS] {
    let cap = world.robot_spec.lidar_cap;
    let ranges = lidar_ranges(world, robot);
    let dist = normal(noise.lidar_sigma);
    let mut out = [1.0; LIDAR_SECTORS];
    for (deg, raw) in ranges.iter().enumerate() {
        let mut d = *raw;
        if noise.lidar_sigma > 0.0 {
            d += dist.sample(rng);
        }
        let v = d.clamp(0.0, cap) / cap;
        let s = lidar_sector(deg);
        if v < out[s] {
            out[s] = v;
        }
    }
    out
}

/// Probability of each wrong reading given the true area. Wrong areas are
/// weighted by the inverse of their rank distance to the true area.
pub fn ground_confusion(truth: AreaKind, correct_prob: f64) -> [f64; 4] {
    let mut w = [0.0; 4];
    for a in AreaKind::ALL {
        if a != truth {
            w[a.index()] = 1.0 / (a.rank() as f64 - truth.rank() as f64).abs();
        }
    }
    let total: f64 = w.iter().sum();
    let mut p = w.map(|x| (1.0 - correct_prob) * x / total);
    p[truth.index()] = correct_prob;
    p
}

fn read_ground(truth: AreaKind, correct_prob: f64, rng: &mut impl Rng) -> AreaKind {
    if correct_prob >= 1.0 {
        return truth;
    }
    if rng.random::<f64>() < correct_prob {
        return truth;
    }
    let others: Vec<(AreaKind, f64)> = AreaKind::ALL
        .iter()
        .filter(|&&a| a != truth)
        .map(|&a| (a, 1.0 / (a.rank() as f64 - truth.rank() as f64).abs()))
        .collect();
    let total: f64 = others.iter().map(|(_, w)| w).sum();
    let mut u = rng.random::<f64>() * total;
    for &(a, w) in &others {
        if u < w {
            return a;
        }
        u -= w;
    }
    others[others.len() - 1].0
}

pub fn sense_ground(world: &WorldState, robot: usize, noise: &NoiseSpec, rng: &mut impl Rng) -> [f64; GROUND_COUNT] {
    let spec = &world.robot_spec;
    let pose = &world.robots[robot].pose;
    let mut out = [0.0; GROUND_COUNT];
    for (slot, angle) in out.iter_mut().zip(spec.ground_mount_angles_deg) {
        let mount = pose.position() + Vec2::from_angle(pose.heading + angle.to_radians()) * spec.radius;
        let mount = world.arena.clamp_inside(mount, 0.0);
        let truth = world.arena.area_of_y(mount.y);
        *slot = read_ground(truth, noise.ground_correct_prob, rng).encoding();
    }
    out
}

/// Quantizes a bearing (radians, counter-clockwise positive) to the light
/// encoding: front 0.2, right 0.4, left 0.6, back 0.8.
pub fn quantize_bearing(bearing: f64) -> f64 {
    let b = wrap_pi(bearing);
    if b.abs() <= FRAC_PI_4 {
        0.2
    } else if b > FRAC_PI_4 && b <= 3.0 * FRAC_PI_4 {
        0.6
    } else if (-3.0 * FRAC_PI_4..-FRAC_PI_4).contains(&b) {
        0.4
    } else {
        debug_assert!(b.abs() > 3.0 * FRAC_PI_4 && b.abs() <= PI);
        0.8
    }
}

/// Direction to the nearest light, quantized relative to the heading.
pub fn sense_light(world: &WorldState, robot: usize) -> f64 {
    let pose = &world.robots[robot].pose;
    let p = pose.position();
    let light = world
        .arena
        .lights
        .iter()
        .min_by(|a, b| a.distance(p).total_cmp(&b.distance(p)))
        .expect("arena has three lights");
    let d = *light - p;
    quantize_bearing(d.y.atan2(d.x) - pose.heading)
}

pub fn sense_frame(world: &WorldState, robot: usize, noise: &NoiseSpec, rng: &mut impl Rng) -> SensorFrame {
    let ir = sense_ir(world, robot, noise, rng);
    let lidar = sense_lidar(world, robot, noise, rng);
    let ground = sense_ground(world, robot, noise, rng);
    SensorFrame {
        ir,
        lidar,
        ground,
        light: sense_light(world, robot),
        grasp: if world.robots[robot].carrying.is_some() {
            1.0
        } else {
            0.0
        },
    }
}
