//! One control step of the world, and the episode loop built on it.
//!
//! A step runs in a fixed order: integrate robot poses, resolve overlaps,
//! slide free objects down the slope, apply grasp/release rules, move
//! carried objects to their carrier's gripper, advance time. Robots are
//! always visited in id order.

use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::controller::Controller;
use crate::error::{Error, Result};
use crate::geometry::{normalize_heading, Vec2};
use crate::rng::SimRng;
use crate::sensors::{sense_frame, SensorFrame};
use crate::world::{AreaCounts, AreaKind, RobotSpec, WorldState};

const EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlCommand {
    pub v: f64,
    pub omega: f64,
}

impl ControlCommand {
    /// Clamps to the robot's velocity limits. NaN maps to zero.
    pub fn new(v: f64, omega: f64, spec: &RobotSpec) -> Self {
        let clamp = |x: f64, m: f64| if x.is_nan() { 0.0 } else { x.clamp(-m, m) };
        ControlCommand {
            v: clamp(v, spec.v_max),
            omega: clamp(omega, spec.omega_max),
        }
    }

    pub fn stop() -> Self {
        ControlCommand::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepConfig {
    /// Control period in seconds; sensing, control and physics share it.
    pub dt: f64,
    pub max_resolution_passes: usize,
}

impl Default for StepConfig {
    fn default() -> Self {
        StepConfig {
            dt: 0.1,
            max_resolution_passes: 8,
        }
    }
}

impl StepConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::config("step.dt", format!("must be positive, got {}", self.dt)));
        }
        Ok(())
    }
}

/// Number of control steps covering `horizon` seconds.
pub fn horizon_steps(horizon: f64, dt: f64) -> usize {
    ((horizon / dt) - 1e-9).ceil().max(0.0) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraspKind {
    Attach,
    Release,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraspEvent {
    pub time: f64,
    pub robot: usize,
    pub object: usize,
    pub kind: GraspKind,
    /// Area of the robot center when the event fired.
    pub robot_area: AreaKind,
    /// Area of the object center when the event fired.
    pub object_area: AreaKind,
}

fn integrate(world: &mut WorldState, commands: &[ControlCommand], dt: f64) {
    for (robot, cmd) in world.robots.iter_mut().zip(commands) {
        let p = &mut robot.pose;
        let (s, c) = p.heading.sin_cos();
        p.x += cmd.v * c * dt;
        p.y += cmd.v * s * dt;
        p.heading = normalize_heading(p.heading + cmd.omega * dt);
    }
}

fn unit_or_x(d: Vec2, len: f64) -> Vec2 {
    if len > EPS {
        d * (1.0 / len)
    } else {
        Vec2::new(1.0, 0.0)
    }
}

fn clamp_all(world: &mut WorldState) {
    let r = world.robot_spec.radius;
    let arena = world.arena;
    for robot in &mut world.robots {
        let p = arena.clamp_inside(robot.pose.position(), r);
        robot.pose.x = p.x;
        robot.pose.y = p.y;
    }
    for o in &mut world.objects {
        o.position = arena.clamp_inside(o.position, o.radius);
    }
}

/// Positional overlap resolution, at most `passes` sweeps. Robots push each
/// other apart symmetrically and push free objects out of their body; an
/// object pinned against a wall, or held by another robot, pushes the robot
/// back instead. Walls are enforced last so containment always holds.
fn resolve_overlaps(world: &mut WorldState, passes: usize) {
    let r = world.robot_spec.radius;
    let arena = world.arena;
    for _ in 0..passes {
        let mut moved = false;
        clamp_all(world);

        let n = world.robots.len();
        for i in 0..n {
            for j in i + 1..n {
                let d = world.robots[j].pose.position() - world.robots[i].pose.position();
                let dist = d.norm();
                let overlap = 2.0 * r - dist;
                if overlap > EPS {
                    let u = unit_or_x(d, dist) * (overlap / 2.0);
                    world.robots[i].pose.x -= u.x;
                    world.robots[i].pose.y -= u.y;
                    world.robots[j].pose.x += u.x;
                    world.robots[j].pose.y += u.y;
                    moved = true;
                }
            }
        }

        for i in 0..n {
            for k in 0..world.objects.len() {
                let carrier = world.objects[k].carried_by;
                if carrier == Some(i) {
                    continue;
                }
                let center = world.robots[i].pose.position();
                let obj = &mut world.objects[k];
                let reach = r + obj.radius;
                let d = obj.position - center;
                let dist = d.norm();
                if reach - dist <= EPS {
                    continue;
                }
                moved = true;
                let u = unit_or_x(d, dist);
                let residual = if carrier.is_none() {
                    let pushed = arena.clamp_inside(center + u * reach, obj.radius);
                    obj.position = pushed;
                    reach - (pushed - center).norm()
                } else {
                    reach - dist
                };
                if residual > EPS {
                    let back = unit_or_x(obj.position - center, (obj.position - center).norm()) * residual;
                    world.robots[i].pose.x -= back.x;
                    world.robots[i].pose.y -= back.y;
                }
            }
        }

        if !moved {
            break;
        }
    }
    clamp_all(world);
}

fn slide(world: &mut WorldState, dt: f64) {
    let arena = world.arena;
    let step = arena.slide_speed * dt;
    for o in world.objects.iter_mut().filter(|o| o.carried_by.is_none()) {
        if arena.area_of_y(o.position.y) == AreaKind::Slope {
            o.position.y -= step;
            o.sliding = arena.area_of_y(o.position.y) == AreaKind::Slope;
        } else {
            o.sliding = false;
        }
    }
}

/// Automatic gripper. Release fires when the carried object's center is in
/// the role's release area. Attach fires when robot and object centers are
/// both in the pickup area and the object is within grasp radius of the
/// robot's front point; the nearest candidate wins, ties by lower id.
pub fn apply_grasp_release(world: &mut WorldState) -> Vec<GraspEvent> {
    let mut events = Vec::new();
    let arena = world.arena;
    for i in 0..world.robots.len() {
        let role = world.robots[i].role;
        let robot_area = arena.area_of_y(world.robots[i].pose.y);

        if let Some(k) = world.robots[i].carrying {
            let object_area = arena.area_of_y(world.objects[k].position.y);
            if object_area == role.release_area() {
                world.robots[i].carrying = None;
                let obj = &mut world.objects[k];
                obj.carried_by = None;
                obj.sliding = object_area == AreaKind::Slope;
                events.push(GraspEvent {
                    time: world.time,
                    robot: i,
                    object: k,
                    kind: GraspKind::Release,
                    robot_area,
                    object_area,
                });
            }
            continue;
        }

        if robot_area != role.pickup_area() {
            continue;
        }
        let front = world.front_point(i);
        let grasp = world.robot_spec.grasp_radius;
        let best = world
            .objects
            .iter()
            .filter(|o| o.carried_by.is_none() && arena.area_of_y(o.position.y) == role.pickup_area())
            .map(|o| (o.position.distance(front), o.id))
            .filter(|(d, _)| *d <= grasp)
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        if let Some((_, k)) = best {
            world.robots[i].carrying = Some(k);
            let obj = &mut world.objects[k];
            obj.carried_by = Some(i);
            obj.sliding = false;
            events.push(GraspEvent {
                time: world.time,
                robot: i,
                object: k,
                kind: GraspKind::Attach,
                robot_area,
                object_area: arena.area_of_y(obj.position.y),
            });
        }
    }
    events
}

fn reposition_carried(world: &mut WorldState) {
    let offset = world.robot_spec.radius + world.arena.object.radius;
    let arena = world.arena;
    for robot in &world.robots {
        if let Some(k) = robot.carrying {
            let obj = &mut world.objects[k];
            let p = robot.pose.position() + robot.pose.forward() * offset;
            obj.position = arena.clamp_inside(p, obj.radius);
        }
    }
}

/// Advances the world by one step of `cfg.dt`. `commands[i]` drives robot i.
pub fn step_world(world: &mut WorldState, commands: &[ControlCommand], cfg: &StepConfig) -> Vec<GraspEvent> {
    assert_eq!(commands.len(), world.robots.len(), "one command per robot");
    let spec = world.robot_spec;
    let clamped: Vec<ControlCommand> = commands
        .iter()
        .map(|c| ControlCommand::new(c.v, c.omega, &spec))
        .collect();
    integrate(world, &clamped, cfg.dt);
    resolve_overlaps(world, cfg.max_resolution_passes);
    slide(world, cfg.dt);
    let events = apply_grasp_release(world);
    reposition_carried(world);
    world.time += cfg.dt;
    events
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotSnapshot {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub carrying: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSnapshot {
    pub x: f64,
    pub y: f64,
    pub sliding: bool,
}

/// State after one step, as written to trace files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    pub time: f64,
    pub robots: Vec<RobotSnapshot>,
    pub objects: Vec<ObjectSnapshot>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames: Option<Vec<[f64; 21]>>,
}

impl TraceRecord {
    fn capture(step: usize, world: &WorldState, frames: Option<&[SensorFrame]>) -> Self {
        TraceRecord {
            step,
            time: world.time,
            robots: world
                .robots
                .iter()
                .map(|r| RobotSnapshot {
                    x: r.pose.x,
                    y: r.pose.y,
                    heading: r.pose.heading,
                    carrying: r.carrying.is_some(),
                })
                .collect(),
            objects: world
                .objects
                .iter()
                .map(|o| ObjectSnapshot {
                    x: o.position.x,
                    y: o.position.y,
                    sliding: o.sliding,
                })
                .collect(),
            frames: frames.map(|fs| fs.iter().map(SensorFrame::to_array).collect()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TraceMode {
    #[default]
    Off,
    Poses,
    PosesAndFrames,
}

#[derive(Debug, Clone)]
pub struct EpisodeResult {
    pub world: WorldState,
    pub counts: AreaCounts,
    pub steps: usize,
    pub events: Vec<GraspEvent>,
    pub trace: Option<Vec<TraceRecord>>,
}

/// Runs `horizon` seconds of closed-loop control from `world`: each step
/// senses every robot, queries its controller, then advances the world.
/// Sensor noise is drawn from `rng` in robot-id order.
pub fn run_episode(
    mut world: WorldState,
    horizon: f64,
    controllers: &mut [&mut dyn Controller],
    cfg: &SimConfig,
    rng: &mut SimRng,
    trace: TraceMode,
) -> EpisodeResult {
    assert_eq!(controllers.len(), world.robots.len(), "one controller per robot");
    let steps = horizon_steps(horizon, cfg.step.dt);
    let mut events = Vec::new();
    let mut records = (trace != TraceMode::Off).then(|| Vec::with_capacity(steps));
    let mut frames = Vec::with_capacity(world.robots.len());
    let mut commands = Vec::with_capacity(world.robots.len());

    for step in 0..steps {
        frames.clear();
        commands.clear();
        for i in 0..world.robots.len() {
            frames.push(sense_frame(&world, i, &cfg.noise, rng));
        }
        for (i, ctrl) in controllers.iter_mut().enumerate() {
            commands.push(ctrl.act(&frames[i], &world, i));
        }
        events.extend(step_world(&mut world, &commands, &cfg.step));
        if let Some(r) = records.as_mut() {
            let f = (trace == TraceMode::PosesAndFrames).then_some(frames.as_slice());
            r.push(TraceRecord::capture(step, &world, f));
        }
    }

    EpisodeResult {
        counts: world.area_counts(),
        world,
        steps,
        events,
        trace: records,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{ArenaSpec, Pose, Role};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn world() -> WorldState {
        WorldState::empty(ArenaSpec::default(), RobotSpec::default())
    }

    fn cmd(v: f64, omega: f64) -> ControlCommand {
        ControlCommand { v, omega }
    }

    #[test]
    fn command_clamps() {
        let c = ControlCommand::new(5.0, -9.0, &RobotSpec::default());
        assert_eq!((c.v, c.omega), (0.31, -1.9));
        let c = ControlCommand::new(f64::NAN, 0.5, &RobotSpec::default());
        assert_eq!((c.v, c.omega), (0.0, 0.5));
    }

    #[test]
    fn euler_step_forward() {
        let mut w = world();
        w.add_robot(Role::Generalist, Pose::new(2.0, 4.0, FRAC_PI_2));
        step_world(&mut w, &[cmd(0.31, 0.0)], &StepConfig::default());
        assert!((w.robots[0].pose.y - 4.031).abs() < 1e-12);
        assert!((w.robots[0].pose.x - 2.0).abs() < 1e-12);
        assert!((w.time - 0.1).abs() < 1e-15);
    }

    #[test]
    fn turning_wraps_heading() {
        let mut w = world();
        w.add_robot(Role::Generalist, Pose::new(2.0, 4.0, 0.05));
        step_world(&mut w, &[cmd(0.0, -1.0)], &StepConfig::default());
        assert!((w.robots[0].pose.heading - (2.0 * PI - 0.05)).abs() < 1e-12);
    }

    #[test]
    fn horizon_arithmetic() {
        assert_eq!(horizon_steps(240.0, 0.1), 2400);
        assert_eq!(horizon_steps(60.0, 0.1), 600);
        assert_eq!(horizon_steps(300.0, 0.1), 3000);
        assert_eq!(horizon_steps(0.25, 0.1), 3);
        assert_eq!(horizon_steps(0.0, 0.1), 0);
    }

    #[test]
    fn wall_clamps_robot() {
        let mut w = world();
        w.add_robot(Role::Generalist, Pose::new(3.8, 4.0, 0.0));
        for _ in 0..20 {
            step_world(&mut w, &[cmd(0.31, 0.0)], &StepConfig::default());
        }
        assert!((w.robots[0].pose.x - (4.0 - 0.17)).abs() < 1e-12);
    }

    #[test]
    fn object_slides_to_cache() {
        let mut w = world();
        w.add_robot(Role::Generalist, Pose::new(0.5, 0.5, 0.0));
        w.add_object(Vec2::new(2.0, 4.0));
        let cfg = StepConfig::default();
        let mut prev = 4.0;
        for _ in 0..30 {
            step_world(&mut w, &[cmd(0.0, 0.0)], &cfg);
            let y = w.objects[0].position.y;
            assert!(y < prev);
            prev = y;
        }
        // closed form: 4.0 - 30 * 0.5 * 0.1 = 2.5
        assert!((w.objects[0].position.y - 2.5).abs() < 1e-9);
        step_world(&mut w, &[cmd(0.0, 0.0)], &cfg);
        assert_eq!(w.arena.area_of_y(w.objects[0].position.y), AreaKind::Cache);
        assert!(!w.objects[0].sliding);
        let y = w.objects[0].position.y;
        step_world(&mut w, &[cmd(0.0, 0.0)], &cfg);
        assert_eq!(w.objects[0].position.y, y);
    }

    #[test]
    fn robot_pushes_object() {
        let mut w = world();
        w.add_robot(Role::Collector, Pose::new(2.0, 4.0, 0.0));
        w.add_object(Vec2::new(2.3, 4.0));
        w.arena.slide_speed = 0.0;
        for _ in 0..5 {
            step_world(&mut w, &[cmd(0.31, 0.0)], &StepConfig::default());
        }
        let gap = w.objects[0].position.distance(w.robots[0].pose.position());
        assert!(gap >= 0.27 - 1e-9);
        assert!(w.objects[0].position.x > 2.3);
    }

    #[test]
    fn robots_separate_symmetrically() {
        let mut w = world();
        w.add_robot(Role::Generalist, Pose::new(2.0, 4.0, 0.0));
        w.add_robot(Role::Generalist, Pose::new(2.3, 4.0, PI));
        step_world(&mut w, &[cmd(0.0, 0.0), cmd(0.0, 0.0)], &StepConfig::default());
        assert!((w.robots[0].pose.x - 1.98).abs() < 1e-9);
        assert!((w.robots[1].pose.x - 2.32).abs() < 1e-9);
    }

    #[test]
    fn generalist_attaches_in_source() {
        let mut w = world();
        w.add_robot(Role::Generalist, Pose::new(2.0, 7.0, 0.0));
        // 0.1 m beyond the front point (2.17, 7.0)
        w.add_object(Vec2::new(2.37, 7.1));
        let ev = step_world(&mut w, &[cmd(0.0, 0.0)], &StepConfig::default());
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].kind, GraspKind::Attach);
        assert_eq!(w.robots[0].carrying, Some(0));
        assert_eq!(w.objects[0].carried_by, Some(0));
        assert!((w.objects[0].position.x - 2.27).abs() < 1e-12);
    }

    #[test]
    fn collector_does_not_attach_in_source() {
        let mut w = world();
        w.add_robot(Role::Collector, Pose::new(2.0, 7.0, 0.0));
        w.add_object(Vec2::new(2.37, 7.0));
        let ev = step_world(&mut w, &[cmd(0.0, 0.0)], &StepConfig::default());
        assert!(ev.is_empty());
        assert_eq!(w.robots[0].carrying, None);
    }

    #[test]
    fn nearest_object_wins_ties_by_id() {
        let mut w = world();
        w.add_robot(Role::Dropper, Pose::new(2.0, 7.0, 0.0));
        w.add_object(Vec2::new(2.17, 7.2));
        w.add_object(Vec2::new(2.17, 6.8));
        w.add_object(Vec2::new(2.37, 7.0));
        apply_grasp_release(&mut w);
        assert_eq!(w.robots[0].carrying, Some(0));
    }

    #[test]
    fn dropper_releases_on_slope() {
        let mut w = world();
        w.add_robot(Role::Dropper, Pose::new(2.0, 6.9, -FRAC_PI_2));
        w.add_object(Vec2::new(2.0, 6.63));
        w.robots[0].carrying = Some(0);
        w.objects[0].carried_by = Some(0);
        let cfg = StepConfig::default();
        let mut released = None;
        for step in 0..10 {
            let ev = step_world(&mut w, &[cmd(0.31, 0.0)], &cfg);
            if let Some(e) = ev.iter().find(|e| e.kind == GraspKind::Release) {
                released = Some((step, *e));
                break;
            }
        }
        let (_, e) = released.expect("dropper should release on the slope");
        assert_eq!(e.object_area, AreaKind::Slope);
        assert!(w.objects[0].sliding);
        assert_eq!(w.robots[0].carrying, None);
        // the robot is still in the source but the object is not: no re-grasp
        step_world(&mut w, &[cmd(0.0, 0.0)], &cfg);
        assert_eq!(w.robots[0].carrying, None);
    }

    #[test]
    fn generalist_releases_in_nest() {
        let mut w = world();
        w.add_robot(Role::Generalist, Pose::new(2.0, 1.8, -FRAC_PI_2));
        w.add_object(Vec2::new(2.0, 1.53));
        w.robots[0].carrying = Some(0);
        w.objects[0].carried_by = Some(0);
        let mut released = false;
        for _ in 0..5 {
            let ev = step_world(&mut w, &[cmd(0.31, 0.0)], &StepConfig::default());
            released |= ev.iter().any(|e| e.kind == GraspKind::Release);
        }
        assert!(released);
        assert_eq!(w.objects_in_area(AreaKind::Nest), 1);
    }

    #[test]
    fn carried_object_stays_in_walls() {
        let mut w = world();
        w.add_robot(Role::Generalist, Pose::new(3.83, 7.0, 0.0));
        w.add_object(Vec2::new(3.9, 7.0));
        w.robots[0].carrying = Some(0);
        w.objects[0].carried_by = Some(0);
        step_world(&mut w, &[cmd(0.31, 0.0)], &StepConfig::default());
        assert!(w.objects[0].position.x <= 4.0 - 0.1 + 1e-12);
    }
}
