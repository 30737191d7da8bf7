use proptest::prelude::*;
use rand::{Rng, SeedableRng};

use slopeforage::controller::{random_genome, Controller, NeuralController};
use slopeforage::dynamics::{run_episode, step_world, ControlCommand, GraspKind, TraceMode};
use slopeforage::evaluation::{evaluate_individual, fitness_for};
use slopeforage::rng::{stream, SimRng};
use slopeforage::scripted::WaypointController;
use slopeforage::sensors::{quantize_bearing, sense_frame, sense_light, SensorFrame};
use slopeforage::world::{Pose, RobotSpec};
use slopeforage::{spawn_scenario, AreaKind, ArenaSpec, Genome, Role, ScenarioKind, SimConfig, Vec2, WorldState};

const KINDS: [ScenarioKind; 5] = ScenarioKind::ALL;

fn check_spawn(world: &WorldState, kind: ScenarioKind, seed: u64) {
    let arena = &world.arena;
    let r = world.robot_spec.radius;
    let scenario = slopeforage::Scenario::new(kind, seed, &SimConfig::default().task);
    assert_eq!(world.objects.len(), scenario.objects.count);
    assert_eq!(world.robots.len(), scenario.robots.len());
    for o in &world.objects {
        let (lo, hi) = arena.extent(scenario.objects.area);
        let p = o.position;
        assert!(
            p.x >= o.radius && p.x <= arena.width - o.radius,
            "{kind:?}/{seed}: object x {}",
            p.x
        );
        assert!(
            p.y >= lo + o.radius && p.y <= hi - o.radius,
            "{kind:?}/{seed}: object y {}",
            p.y
        );
        for q in &world.objects {
            if q.id != o.id {
                assert!(p.distance(q.position) >= o.radius + q.radius - 1e-12);
            }
        }
    }
    for (i, robot) in world.robots.iter().enumerate() {
        let p = robot.pose.position();
        let area = arena.area_of_y(p.y);
        assert!(
            scenario.robots[i].areas.contains(&area),
            "{kind:?}/{seed}: robot {i} in {area}"
        );
        let (lo, hi) = arena.extent(area);
        assert!(p.x >= r && p.x <= arena.width - r);
        assert!(p.y >= lo + r && p.y <= hi - r);
        assert_eq!(robot.role, scenario.robots[i].role);
        assert!(robot.carrying.is_none());
        for o in &world.objects {
            assert!(p.distance(o.position) >= r + o.radius - 1e-12);
        }
        for (j, other) in world.robots.iter().enumerate() {
            if j != i {
                assert!(p.distance(other.pose.position()) >= 2.0 * r - 1e-12);
            }
        }
    }
}

#[test]
fn spawn_validity_over_a_thousand_seeds_per_config() {
    let sim = SimConfig::default();
    for kind in KINDS {
        for seed in 0..1000 {
            let (world, _) = spawn_scenario(kind, seed, &sim).unwrap();
            check_spawn(&world, kind, seed);
        }
    }
}

#[test]
fn spawn_is_deterministic() {
    let sim = SimConfig::default();
    for kind in KINDS {
        for seed in [0, 1, u64::MAX, 0xdead_beef] {
            let a = spawn_scenario(kind, seed, &sim).unwrap().0;
            let b = spawn_scenario(kind, seed, &sim).unwrap().0;
            assert_eq!(format!("{a:?}"), format!("{b:?}"));
        }
    }
}

#[test]
fn area_partition_over_random_points() {
    let arena = ArenaSpec::default();
    let mut rng = SimRng::seed_from_u64(5);
    for _ in 0..100_000 {
        let p = Vec2::new(rng.random::<f64>() * arena.width, rng.random::<f64>() * arena.length);
        let area = arena.area_at(p).unwrap();
        let hits = AreaKind::ALL
            .iter()
            .filter(|&&a| {
                let (lo, hi) = arena.extent(a);
                p.y >= lo && (p.y < hi || (a == AreaKind::Source && p.y <= hi))
            })
            .count();
        assert_eq!(hits, 1, "{p:?}");
        let (lo, hi) = arena.extent(area);
        assert!(p.y >= lo && p.y <= hi);
    }
    assert!(arena.area_at(Vec2::new(-0.1, 1.0)).is_err());
    assert!(arena.area_at(Vec2::new(1.0, 7.6)).is_err());
}

/// Random commands held for a random number of steps.
struct Wander {
    rng: SimRng,
    hold: u32,
    cmd: ControlCommand,
}

impl Wander {
    fn new(seed: u64) -> Self {
        Wander {
            rng: SimRng::seed_from_u64(seed),
            hold: 0,
            cmd: ControlCommand::stop(),
        }
    }
}

impl Controller for Wander {
    fn act(&mut self, _: &SensorFrame, world: &WorldState, _: usize) -> ControlCommand {
        if self.hold == 0 {
            let s = &world.robot_spec;
            // deliberately exceeds the limits so clamping is exercised too
            self.cmd = ControlCommand {
                v: self.rng.random_range(-1.5..1.5) * s.v_max,
                omega: self.rng.random_range(-1.5..1.5) * s.omega_max,
            };
            self.hold = self.rng.random_range(1..40);
        }
        self.hold -= 1;
        self.cmd
    }
}

#[derive(Debug, Clone, Copy)]
enum Driver {
    Wander,
    Scripted,
    Neural,
}

fn driver() -> impl Strategy<Value = Driver> {
    prop_oneof![Just(Driver::Wander), Just(Driver::Scripted), Just(Driver::Neural)]
}

fn kind() -> impl Strategy<Value = ScenarioKind> {
    prop::sample::select(KINDS.to_vec())
}

fn controllers(driver: Driver, n: usize, seed: u64, genome: &Genome) -> Vec<Box<dyn Controller + '_>> {
    (0..n)
        .map(|i| -> Box<dyn Controller + '_> {
            match driver {
                Driver::Wander => Box::new(Wander::new(seed.wrapping_add(i as u64))),
                Driver::Scripted => Box::new(WaypointController),
                Driver::Neural => Box::new(NeuralController::new(genome)),
            }
        })
        .collect()
}

fn check_step_invariants(before: &WorldState, after: &WorldState) {
    let arena = &after.arena;
    let r = after.robot_spec.radius;
    assert_eq!(after.objects.len(), before.objects.len(), "conservation");
    assert_eq!(after.area_counts().total(), after.objects.len());
    for robot in &after.robots {
        let p = robot.pose.position();
        assert!(p.x >= r - 1e-9 && p.x <= arena.width - r + 1e-9, "robot x {}", p.x);
        assert!(p.y >= r - 1e-9 && p.y <= arena.length - r + 1e-9, "robot y {}", p.y);
    }
    for o in &after.objects {
        let p = o.position;
        assert!(p.x >= o.radius - 1e-9 && p.x <= arena.width - o.radius + 1e-9);
        assert!(p.y >= o.radius - 1e-9 && p.y <= arena.length - o.radius + 1e-9);
    }
    for (i, robot) in after.robots.iter().enumerate() {
        if let Some(k) = robot.carrying {
            assert_eq!(after.objects[k].carried_by, Some(i), "exclusivity");
        }
    }
    for o in &after.objects {
        if let Some(i) = o.carried_by {
            assert_eq!(after.robots[i].carrying, Some(o.id), "exclusivity");
        }
    }
    // A robot may push a sliding object uphill, so only untouched objects
    // are held to the downhill rule.
    let touched = |w: &WorldState, p: Vec2, radius: f64| {
        w.robots
            .iter()
            .any(|rb| rb.pose.position().distance(p) <= r + radius + 1e-9)
    };
    for (a, b) in before.objects.iter().zip(&after.objects) {
        if a.is_free()
            && b.is_free()
            && arena.area_of_y(a.position.y) == AreaKind::Slope
            && !touched(before, a.position, a.radius)
            && !touched(after, b.position, b.radius)
        {
            assert!(
                b.position.y < a.position.y,
                "free object {} on the slope went from y={} to y={}",
                a.id,
                a.position.y,
                b.position.y
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 96, ..ProptestConfig::default() })]

    #[test]
    fn dynamics_invariants_under_fuzzed_control(
        kind in kind(),
        seed in any::<u64>(),
        driver in driver(),
        steps in 100usize..900,
    ) {
        let sim = SimConfig::default();
        let (mut world, _) = spawn_scenario(kind, seed, &sim).unwrap();
        let genome = random_genome(&mut stream(seed, &[1]));
        let mut ctrls = controllers(driver, world.robots.len(), seed, &genome);
        let mut noise = stream(seed, &[2]);
        for _ in 0..steps {
            let frames: Vec<_> = (0..world.robots.len())
                .map(|i| sense_frame(&world, i, &sim.noise, &mut noise))
                .collect();
            for f in &frames {
                prop_assert!(f.in_range(), "{f:?}");
            }
            let cmds: Vec<_> = ctrls
                .iter_mut()
                .enumerate()
                .map(|(i, c)| c.act(&frames[i], &world, i))
                .collect();
            let before = world.clone();
            let events = step_world(&mut world, &cmds, &sim.step);
            check_step_invariants(&before, &world);
            for e in events {
                if e.kind == GraspKind::Attach {
                    let role = world.robots[e.robot].role;
                    prop_assert_eq!(e.robot_area, role.pickup_area());
                    prop_assert_eq!(e.object_area, role.pickup_area());
                    if role == Role::Dropper {
                        prop_assert_eq!(e.object_area, AreaKind::Source);
                    }
                }
            }
        }
    }

    #[test]
    fn episodes_are_reproducible(kind in kind(), seed in any::<u64>(), driver in driver()) {
        let sim = SimConfig::default();
        let run = || {
            let (world, scenario) = spawn_scenario(kind, seed, &sim).unwrap();
            let genome = random_genome(&mut stream(seed, &[1]));
            let mut ctrls = controllers(driver, world.robots.len(), seed, &genome);
            let mut refs: Vec<&mut dyn Controller> = ctrls.iter_mut().map(|c| c.as_mut() as &mut dyn Controller).collect();
            let mut noise = stream(seed, &[2]);
            let horizon = scenario.horizon.min(30.0);
            run_episode(world, horizon, &mut refs, &sim, &mut noise, TraceMode::PosesAndFrames)
        };
        let (a, b) = (run(), run());
        prop_assert_eq!(serde_json::to_string(&a.trace).unwrap(), serde_json::to_string(&b.trace).unwrap());
        prop_assert_eq!(a.counts, b.counts);
    }

    #[test]
    fn light_reading_rotates_with_the_robot(x in 0.2f64..3.8, y in 0.2f64..7.3, heading in 0.0f64..std::f64::consts::TAU) {
        let mut world = WorldState::empty(ArenaSpec::default(), RobotSpec::default());
        world.add_robot(Role::Generalist, Pose::new(x, y, heading));
        let light = world.arena.lights.iter().copied()
            .min_by(|a, b| a.distance(Vec2::new(x, y)).total_cmp(&b.distance(Vec2::new(x, y))))
            .unwrap();
        let bearing = (light.y - y).atan2(light.x - x) - heading;
        // keep clear of the quadrant edges, where rounding decides the reading
        let rel = slopeforage::geometry::wrap_pi(bearing);
        let edge = [1.0, 3.0, -1.0, -3.0].iter().map(|k| (rel - k * std::f64::consts::FRAC_PI_4).abs()).fold(f64::MAX, f64::min);
        prop_assume!(edge > 1e-6);

        // front -> right -> back -> left as the robot turns left by 90 degrees
        let cycle = [0.2, 0.4, 0.8, 0.6];
        let start = cycle.iter().position(|&c| c == sense_light(&world, 0)).unwrap();
        prop_assert_eq!(sense_light(&world, 0), quantize_bearing(bearing));
        for k in 1..4 {
            world.robots[0].pose = Pose::new(x, y, heading + k as f64 * std::f64::consts::FRAC_PI_2);
            prop_assert_eq!(sense_light(&world, 0), cycle[(start + k) % 4]);
        }
    }

    #[test]
    fn fitness_is_bounded_and_deterministic(seed in any::<u64>(), role in prop::sample::select(Role::ALL.to_vec())) {
        let sim = SimConfig::default();
        let genome = random_genome(&mut stream(seed, &[3]));
        let a = evaluate_individual(&genome, role, seed, &sim).unwrap();
        let b = evaluate_individual(&genome, role, seed, &sim).unwrap();
        prop_assert_eq!(a, b);
        prop_assert!(a.0 <= 7);
    }
}

#[test]
fn zero_genome_scores_zero_in_every_role() {
    let sim = SimConfig::default();
    for role in Role::ALL {
        for seed in 0..20 {
            assert_eq!(evaluate_individual(&Genome::zeros(), role, seed, &sim).unwrap().0, 0);
        }
    }
}

#[test]
fn fitness_matches_the_final_world_recount() {
    let sim = SimConfig::default();
    for role in Role::ALL {
        let (world, scenario) = spawn_scenario(ScenarioKind::training(role), 77, &sim).unwrap();
        let mut c = WaypointController;
        let result = run_episode(
            world,
            scenario.horizon,
            &mut [&mut c],
            &sim,
            &mut stream(77, &[]),
            TraceMode::Off,
        );
        let area = if role == Role::Dropper {
            AreaKind::Cache
        } else {
            AreaKind::Nest
        };
        let recount = result
            .world
            .objects
            .iter()
            .filter(|o| {
                let (lo, hi) = result.world.arena.extent(area);
                o.position.y >= lo && o.position.y < hi
            })
            .count();
        assert_eq!(fitness_for(role, &result.world).0 as usize, recount);
    }
}
