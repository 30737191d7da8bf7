//! Hand-written baseline that reads the true world state instead of its
//! sensors: drive to the nearest free object in the pickup area, let the
//! gripper attach it, then drive toward the release area. Used to check the
//! grasp/release/slide mechanics end to end.

use crate::controller::Controller;
use crate::dynamics::ControlCommand;
use crate::geometry::{wrap_pi, Vec2};
use crate::sensors::SensorFrame;
use crate::world::{AreaKind, WorldState};

#[derive(Debug, Clone, Copy, Default)]
pub struct WaypointController;

const TURN_GAIN: f64 = 3.0;

impl WaypointController {
    fn target(world: &WorldState, robot: usize) -> Vec2 {
        let state = &world.robots[robot];
        let arena = &world.arena;
        let here = state.pose.position();
        let area_center = |area: AreaKind| {
            let (lo, hi) = arena.extent(area);
            Vec2::new(here.x, (lo + hi) / 2.0)
        };
        if state.carrying.is_some() {
            let release = state.role.release_area();
            if release == AreaKind::Slope {
                // just over the edge; the object is released as soon as it crosses
                let (_, hi) = arena.extent(AreaKind::Slope);
                return Vec2::new(here.x, hi - 1.0);
            }
            return area_center(release);
        }
        let pickup = state.role.pickup_area();
        world
            .objects
            .iter()
            .filter(|o| o.is_free() && arena.area_of_y(o.position.y) == pickup)
            .min_by(|a, b| {
                a.position
                    .distance(here)
                    .total_cmp(&b.position.distance(here))
                    .then(a.id.cmp(&b.id))
            })
            .map(|o| o.position)
            .unwrap_or_else(|| area_center(pickup))
    }
}

impl Controller for WaypointController {
    fn act(&mut self, _frame: &SensorFrame, world: &WorldState, robot: usize) -> ControlCommand {
        let pose = world.robots[robot].pose;
        let to = Self::target(world, robot) - pose.position();
        let err = wrap_pi(to.y.atan2(to.x) - pose.heading);
        let spec = &world.robot_spec;
        ControlCommand::new(spec.v_max * err.cos().max(0.0), TURN_GAIN * err, spec)
    }
}
