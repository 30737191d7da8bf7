//! Arena geometry, areas, robots, objects and scenario construction.
//!
//! The arena spans x ∈ [0, width] and y ∈ [0, length]. The nest sits at
//! y = 0 and the source at the far end, so "downhill" on the slope means
//! decreasing y. Area membership uses half-open y-intervals; a point exactly
//! on a boundary belongs to the higher-y area.

use std::f64::consts::TAU;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::geometry::{normalize_heading, Vec2};
use crate::rng::{self, tag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AreaKind {
    Nest,
    Cache,
    Slope,
    Source,
}

impl AreaKind {
    /// Ordered by rank, i.e. by increasing y.
    pub const ALL: [AreaKind; 4] = [AreaKind::Nest, AreaKind::Cache, AreaKind::Slope, AreaKind::Source];

    /// Ground-sensor encoding of the area.
    pub fn encoding(self) -> f64 {
        match self {
            AreaKind::Nest => 0.2,
            AreaKind::Cache => 0.4,
            AreaKind::Slope => 0.6,
            AreaKind::Source => 0.8,
        }
    }

    /// Position along the arena's long axis, 1 (nest) to 4 (source).
    pub fn rank(self) -> u8 {
        match self {
            AreaKind::Nest => 1,
            AreaKind::Cache => 2,
            AreaKind::Slope => 3,
            AreaKind::Source => 4,
        }
    }

    pub fn index(self) -> usize {
        self.rank() as usize - 1
    }
}

impl fmt::Display for AreaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AreaKind::Nest => "nest",
            AreaKind::Cache => "cache",
            AreaKind::Slope => "slope",
            AreaKind::Source => "source",
        };
        f.write_str(s)
    }
}

/// Physical properties of the transported cylinders. Height and mass are
/// metadata; the kinematic model only uses the radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObjectSpec {
    pub radius: f64,
    pub height: f64,
    pub mass: f64,
}

impl Default for ObjectSpec {
    fn default() -> Self {
        ObjectSpec {
            radius: 0.1,
            height: 0.06,
            mass: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArenaSpec {
    pub width: f64,
    pub length: f64,
    pub nest_length: f64,
    pub cache_length: f64,
    pub slope_length: f64,
    pub source_length: f64,
    pub lights: [Vec2; 3],
    /// Speed at which free objects slide down the slope, m/s.
    pub slide_speed: f64,
    pub object: ObjectSpec,
}

impl Default for ArenaSpec {
    fn default() -> Self {
        ArenaSpec {
            width: 4.0,
            length: 7.5,
            nest_length: 1.5,
            cache_length: 1.0,
            slope_length: 4.0,
            source_length: 1.0,
            lights: [Vec2::new(1.0, 0.05), Vec2::new(2.0, 0.05), Vec2::new(3.0, 0.05)],
            slide_speed: 0.5,
            object: ObjectSpec::default(),
        }
    }
}

impl ArenaSpec {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("arena.width", self.width),
            ("arena.length", self.length),
            ("arena.nest_length", self.nest_length),
            ("arena.cache_length", self.cache_length),
            ("arena.slope_length", self.slope_length),
            ("arena.source_length", self.source_length),
            ("arena.object.radius", self.object.radius),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(field, format!("must be positive, got {v}")));
            }
        }
        if !(self.slide_speed.is_finite() && self.slide_speed >= 0.0) {
            return Err(Error::config("arena.slide_speed", "must be non-negative"));
        }
        let total = self.nest_length + self.cache_length + self.slope_length + self.source_length;
        if (total - self.length).abs() > 1e-9 {
            return Err(Error::config(
                "arena.length",
                format!("area lengths sum to {total}, not {}", self.length),
            ));
        }
        for (i, l) in self.lights.iter().enumerate() {
            let inside = (0.0..=self.width).contains(&l.x) && (0.0..=self.nest_length).contains(&l.y);
            if !inside {
                return Err(Error::config(format!("arena.lights[{i}]"), "must lie in the nest"));
            }
        }
        Ok(())
    }

    /// Lower y bound of each area, in rank order.
    fn lower_bounds(&self) -> [f64; 4] {
        let cache = self.nest_length;
        let slope = cache + self.cache_length;
        let source = slope + self.slope_length;
        [0.0, cache, slope, source]
    }

    /// The y-interval of an area: [lo, hi), closed at the top for the source.
    pub fn extent(&self, area: AreaKind) -> (f64, f64) {
        let lb = self.lower_bounds();
        let i = area.index();
        let hi = if i == 3 { self.length } else { lb[i + 1] };
        (lb[i], hi)
    }

    /// Area of a y coordinate, assuming it is inside the arena.
    pub fn area_of_y(&self, y: f64) -> AreaKind {
        let lb = self.lower_bounds();
        if y >= lb[3] {
            AreaKind::Source
        } else if y >= lb[2] {
            AreaKind::Slope
        } else if y >= lb[1] {
            AreaKind::Cache
        } else {
            AreaKind::Nest
        }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        (0.0..=self.width).contains(&p.x) && (0.0..=self.length).contains(&p.y)
    }

    pub fn area_at(&self, p: Vec2) -> Result<AreaKind> {
        if !self.contains(p) {
            return Err(Error::OutOfBounds { x: p.x, y: p.y });
        }
        Ok(self.area_of_y(p.y))
    }

    /// Clamps a disc center so the disc lies inside the walls.
    pub fn clamp_inside(&self, p: Vec2, radius: f64) -> Vec2 {
        Vec2::new(
            p.x.clamp(radius, self.width - radius),
            p.y.clamp(radius, self.length - radius),
        )
    }
}

/// Free-function form of [`ArenaSpec::area_at`].
pub fn area_at(arena: &ArenaSpec, p: Vec2) -> Result<AreaKind> {
    arena.area_at(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Generalist,
    Dropper,
    Collector,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::Generalist, Role::Dropper, Role::Collector];

    pub fn pickup_area(self) -> AreaKind {
        match self {
            Role::Generalist | Role::Dropper => AreaKind::Source,
            Role::Collector => AreaKind::Cache,
        }
    }

    pub fn release_area(self) -> AreaKind {
        match self {
            Role::Generalist | Role::Collector => AreaKind::Nest,
            Role::Dropper => AreaKind::Slope,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Role::Generalist => 'G',
            Role::Dropper => 'D',
            Role::Collector => 'C',
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Role::Generalist => "generalist",
            Role::Dropper => "dropper",
            Role::Collector => "collector",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "generalist" | "g" => Ok(Role::Generalist),
            "dropper" | "d" => Ok(Role::Dropper),
            "collector" | "c" => Ok(Role::Collector),
            other => Err(format!("unknown role `{other}`")),
        }
    }
}

/// Robot body and sensor geometry. Angles are in degrees in the robot frame,
/// counter-clockwise from the heading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotSpec {
    pub radius: f64,
    pub v_max: f64,
    pub omega_max: f64,
    pub grasp_radius: f64,
    pub ir_angles_deg: [f64; 7],
    pub ir_range: f64,
    pub lidar_cap: f64,
    /// Rim positions of the ground sensors: front, right, back, left.
    pub ground_mount_angles_deg: [f64; 4],
}

impl Default for RobotSpec {
    fn default() -> Self {
        RobotSpec {
            radius: 0.17,
            v_max: 0.31,
            omega_max: 1.9,
            grasp_radius: 0.3,
            ir_angles_deg: [-60.0, -40.0, -20.0, 0.0, 20.0, 40.0, 60.0],
            ir_range: 0.2,
            lidar_cap: 1.0,
            ground_mount_angles_deg: [0.0, -90.0, 180.0, 90.0],
        }
    }
}

impl RobotSpec {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("robot.radius", self.radius),
            ("robot.v_max", self.v_max),
            ("robot.omega_max", self.omega_max),
            ("robot.grasp_radius", self.grasp_radius),
            ("robot.ir_range", self.ir_range),
            ("robot.lidar_cap", self.lidar_cap),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(field, format!("must be positive, got {v}")));
            }
        }
        let mut sorted = self.ir_angles_deg;
        sorted.sort_by(f64::total_cmp);
        for (a, b) in sorted.iter().zip(sorted.iter().rev()) {
            if (a + b).abs() > 1e-9 {
                return Err(Error::config(
                    "robot.ir_angles_deg",
                    "angles must be symmetric about the heading",
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    /// Radians in [0, 2π), counter-clockwise from +x.
    pub heading: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Pose {
            x,
            y,
            heading: normalize_heading(heading),
        }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn forward(&self) -> Vec2 {
        Vec2::from_angle(self.heading)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub pose: Pose,
    pub role: Role,
    pub carrying: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectState {
    pub id: usize,
    pub position: Vec2,
    pub radius: f64,
    pub carried_by: Option<usize>,
    pub sliding: bool,
}

impl ObjectState {
    pub fn is_free(&self) -> bool {
        self.carried_by.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AreaCounts {
    pub nest: usize,
    pub cache: usize,
    pub slope: usize,
    pub source: usize,
}

impl AreaCounts {
    pub fn get(&self, area: AreaKind) -> usize {
        match area {
            AreaKind::Nest => self.nest,
            AreaKind::Cache => self.cache,
            AreaKind::Slope => self.slope,
            AreaKind::Source => self.source,
        }
    }

    pub fn total(&self) -> usize {
        self.nest + self.cache + self.slope + self.source
    }
}

/// Complete simulation state. Random streams are held by the caller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub arena: ArenaSpec,
    pub robot_spec: RobotSpec,
    pub robots: Vec<RobotState>,
    pub objects: Vec<ObjectState>,
    pub time: f64,
}

impl WorldState {
    pub fn empty(arena: ArenaSpec, robot_spec: RobotSpec) -> Self {
        WorldState {
            arena,
            robot_spec,
            robots: Vec::new(),
            objects: Vec::new(),
            time: 0.0,
        }
    }

    pub fn add_robot(&mut self, role: Role, pose: Pose) -> usize {
        self.robots.push(RobotState {
            pose,
            role,
            carrying: None,
        });
        self.robots.len() - 1
    }

    pub fn add_object(&mut self, position: Vec2) -> usize {
        let id = self.objects.len();
        self.objects.push(ObjectState {
            id,
            position,
            radius: self.arena.object.radius,
            carried_by: None,
            sliding: false,
        });
        id
    }

    /// Number of objects whose center lies in `area`.
    pub fn objects_in_area(&self, area: AreaKind) -> usize {
        self.objects
            .iter()
            .filter(|o| self.arena.area_of_y(o.position.y) == area)
            .count()
    }

    pub fn area_counts(&self) -> AreaCounts {
        let mut c = AreaCounts::default();
        for o in &self.objects {
            match self.arena.area_of_y(o.position.y) {
                AreaKind::Nest => c.nest += 1,
                AreaKind::Cache => c.cache += 1,
                AreaKind::Slope => c.slope += 1,
                AreaKind::Source => c.source += 1,
            }
        }
        c
    }

    /// Rim point straight ahead of a robot, the reference for grasping.
    pub fn front_point(&self, robot: usize) -> Vec2 {
        let pose = &self.robots[robot].pose;
        pose.position() + pose.forward() * self.robot_spec.radius
    }
}

/// Free-function form of [`WorldState::objects_in_area`].
pub fn objects_in_area(world: &WorldState, area: AreaKind) -> usize {
    world.objects_in_area(area)
}

/// Object count and horizons of the training and post-evaluation scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskConfig {
    pub objects: usize,
    pub generalist_horizon: f64,
    pub specialist_horizon: f64,
    pub posteval_horizon: f64,
}

impl Default for TaskConfig {
    fn default() -> Self {
        TaskConfig {
            objects: 7,
            generalist_horizon: 240.0,
            specialist_horizon: 60.0,
            posteval_horizon: 300.0,
        }
    }
}

impl TaskConfig {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("task.generalist_horizon", self.generalist_horizon),
            ("task.specialist_horizon", self.specialist_horizon),
            ("task.posteval_horizon", self.posteval_horizon),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(field, "must be a non-negative number of seconds"));
            }
        }
        Ok(())
    }
}

/// The five episode setups used for training and post-evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    GeneralistTrain,
    DropperTrain,
    CollectorTrain,
    PostevalGg,
    PostevalDc,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 5] = [
        ScenarioKind::GeneralistTrain,
        ScenarioKind::DropperTrain,
        ScenarioKind::CollectorTrain,
        ScenarioKind::PostevalGg,
        ScenarioKind::PostevalDc,
    ];

    pub fn training(role: Role) -> Self {
        match role {
            Role::Generalist => ScenarioKind::GeneralistTrain,
            Role::Dropper => ScenarioKind::DropperTrain,
            Role::Collector => ScenarioKind::CollectorTrain,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotInit {
    pub role: Role,
    /// Candidate spawn areas; one is picked uniformly at random.
    pub areas: Vec<AreaKind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectPlacement {
    pub count: usize,
    pub area: AreaKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub robots: Vec<RobotInit>,
    pub objects: ObjectPlacement,
    /// Evaluation horizon in seconds.
    pub horizon: f64,
    pub seed: u64,
}

const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

impl Scenario {
    pub fn new(kind: ScenarioKind, seed: u64, task: &TaskConfig) -> Self {
        use AreaKind::*;
        let robot = |role, areas: &[AreaKind]| RobotInit {
            role,
            areas: areas.to_vec(),
        };
        let (robots, object_area, horizon) = match kind {
            ScenarioKind::GeneralistTrain => (
                vec![robot(Role::Generalist, &[Nest, Cache])],
                Source,
                task.generalist_horizon,
            ),
            ScenarioKind::DropperTrain => (vec![robot(Role::Dropper, &[Source])], Source, task.specialist_horizon),
            ScenarioKind::CollectorTrain => (
                vec![robot(Role::Collector, &[Nest, Cache])],
                Cache,
                task.specialist_horizon,
            ),
            ScenarioKind::PostevalGg => (
                vec![robot(Role::Generalist, &[Nest]), robot(Role::Generalist, &[Source])],
                Source,
                task.posteval_horizon,
            ),
            ScenarioKind::PostevalDc => (
                vec![robot(Role::Collector, &[Nest]), robot(Role::Dropper, &[Source])],
                Source,
                task.posteval_horizon,
            ),
        };
        Scenario {
            kind,
            robots,
            objects: ObjectPlacement {
                count: task.objects,
                area: object_area,
            },
            horizon,
            seed,
        }
    }

    /// Builds the initial world. Objects are placed first, then robots in
    /// index order; everything is rejection-sampled so that discs lie fully
    /// inside their area, do not overlap, and no object starts within reach
    /// of a robot's gripper.
    pub fn spawn(&self, arena: &ArenaSpec, robot_spec: &RobotSpec) -> Result<WorldState> {
        let mut rng = rng::stream(self.seed, &[tag::SPAWN]);
        let mut world = WorldState::empty(*arena, *robot_spec);
        let r_obj = arena.object.radius;

        for _ in 0..self.objects.count {
            let p = (0..MAX_PLACEMENT_ATTEMPTS)
                .map(|_| sample_in_area(&mut rng, arena, self.objects.area, r_obj))
                .find(|p| {
                    world
                        .objects
                        .iter()
                        .all(|o| o.position.distance(*p) >= o.radius + r_obj)
                })
                .ok_or(Error::Placement {
                    what: "object",
                    attempts: MAX_PLACEMENT_ATTEMPTS,
                })?;
            world.add_object(p);
        }

        let r_rob = robot_spec.radius;
        for init in &self.robots {
            let area = init.areas[rng.random_range(0..init.areas.len())];
            let pose = (0..MAX_PLACEMENT_ATTEMPTS)
                .map(|_| {
                    let p = sample_in_area(&mut rng, arena, area, r_rob);
                    Pose::new(p.x, p.y, rng.random::<f64>() * TAU)
                })
                .find(|pose| {
                    let c = pose.position();
                    let front = c + pose.forward() * r_rob;
                    world.objects.iter().all(|o| {
                        c.distance(o.position) >= r_rob + o.radius
                            && front.distance(o.position) > robot_spec.grasp_radius
                    }) && world
                        .robots
                        .iter()
                        .all(|r| r.pose.position().distance(c) >= 2.0 * r_rob)
                })
                .ok_or(Error::Placement {
                    what: "robot",
                    attempts: MAX_PLACEMENT_ATTEMPTS,
                })?;
            world.add_robot(init.role, pose);
        }
        Ok(world)
    }
}

fn sample_in_area(rng: &mut impl Rng, arena: &ArenaSpec, area: AreaKind, margin: f64) -> Vec2 {
    let (lo, hi) = arena.extent(area);
    let x = margin + rng.random::<f64>() * (arena.width - 2.0 * margin);
    let y = lo + margin + rng.random::<f64>() * (hi - lo - 2.0 * margin);
    Vec2::new(x, y)
}

/// Builds the scenario of `kind` for `seed` and spawns its initial world.
/// The result is a pure function of `(kind, seed, cfg)`.
pub fn spawn_scenario(kind: ScenarioKind, seed: u64, cfg: &SimConfig) -> Result<(WorldState, Scenario)> {
    let scenario = Scenario::new(kind, seed, &cfg.task);
    let world = scenario.spawn(&cfg.arena, &cfg.robot)?;
    Ok((world, scenario))
}
