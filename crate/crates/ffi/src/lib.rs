//! C ABI over the `slopeforage` simulator.
//!
//! Handles are opaque and owned by the caller; free them with the matching
//! `*_free` function. Every fallible call returns an [`SfStatus`]; on failure
//! [`sf_last_error_message`] describes the error on the calling thread.
//! Panics never cross the boundary and are reported as `SF_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use slopeforage::controller::{forward_raw, random_genome};
use slopeforage::dynamics::{step_world, ControlCommand};
use slopeforage::io::GenomeFile;
use slopeforage::rng::{self, tag, SimRng};
use slopeforage::sensors::{sense_frame, FRAME_LEN};
use slopeforage::{
    evaluate_individual, AreaKind, Error, Genome, Role, ScenarioKind, SimConfig, WorldState, GENOME_LEN,
};

pub const SF_FRAME_LEN: usize = 21;
pub const SF_GENOME_LEN: usize = 194;

pub const SF_ROLE_GENERALIST: u32 = 0;
pub const SF_ROLE_DROPPER: u32 = 1;
pub const SF_ROLE_COLLECTOR: u32 = 2;

pub const SF_AREA_NEST: u32 = 0;
pub const SF_AREA_CACHE: u32 = 1;
pub const SF_AREA_SLOPE: u32 = 2;
pub const SF_AREA_SOURCE: u32 = 3;

pub const SF_SCENARIO_GENERALIST_TRAIN: u32 = 0;
pub const SF_SCENARIO_DROPPER_TRAIN: u32 = 1;
pub const SF_SCENARIO_COLLECTOR_TRAIN: u32 = 2;
pub const SF_SCENARIO_POSTEVAL_GG: u32 = 3;
pub const SF_SCENARIO_POSTEVAL_DC: u32 = 4;

const _: () = assert!(SF_FRAME_LEN == FRAME_LEN && SF_GENOME_LEN == GENOME_LEN);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    OutOfBounds = 3,
    Placement = 4,
    Dimension = 5,
    Io = 6,
    Parse = 7,
    RoleMismatch = 8,
    Panic = 9,
}

/// A simulated arena with its robots, objects and sensor-noise stream.
pub struct SfWorld {
    world: WorldState,
    sim: SimConfig,
    noise: SimRng,
}

/// A 21-8-2 controller weight vector.
pub struct SfGenome {
    genome: Genome,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Fail(SfStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::OutOfBounds { .. } => SfStatus::OutOfBounds,
            Error::Placement { .. } => SfStatus::Placement,
            Error::Dimension { .. } | Error::NonFinite { .. } => SfStatus::Dimension,
            Error::Config { .. } | Error::GenomeCount { .. } => SfStatus::InvalidArgument,
            Error::RoleMismatch { .. } => SfStatus::RoleMismatch,
            Error::Io { .. } => SfStatus::Io,
            Error::Parse { .. } | Error::Csv(_) => SfStatus::Parse,
        };
        Fail(status, e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(SfStatus::InvalidArgument, msg.into())
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SfStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SfStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            SfStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, Fail> {
    p.as_ref()
        .ok_or_else(|| Fail(SfStatus::NullPointer, format!("`{name}` is null")))
}

unsafe fn deref_mut<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Fail> {
    p.as_mut()
        .ok_or_else(|| Fail(SfStatus::NullPointer, format!("`{name}` is null")))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(Fail(SfStatus::NullPointer, "`path` is null".into()));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid("path is not valid UTF-8"))?;
    Ok(PathBuf::from(s))
}

fn role_from(code: u32) -> Result<Role, Fail> {
    match code {
        SF_ROLE_GENERALIST => Ok(Role::Generalist),
        SF_ROLE_DROPPER => Ok(Role::Dropper),
        SF_ROLE_COLLECTOR => Ok(Role::Collector),
        _ => Err(invalid(format!("unknown role code {code}"))),
    }
}

fn role_code(role: Role) -> u32 {
    match role {
        Role::Generalist => SF_ROLE_GENERALIST,
        Role::Dropper => SF_ROLE_DROPPER,
        Role::Collector => SF_ROLE_COLLECTOR,
    }
}

fn sim_config(noiseless: bool) -> SimConfig {
    if noiseless {
        SimConfig::noiseless()
    } else {
        SimConfig::default()
    }
}

fn robot_index(world: &SfWorld, robot: usize) -> Result<usize, Fail> {
    if robot < world.world.robots.len() {
        Ok(robot)
    } else {
        Err(invalid(format!(
            "robot {robot} out of range ({} robots)",
            world.world.robots.len()
        )))
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn sf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Draws a genome with weights uniform in [-0.5, 0.5] from `seed`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn sf_genome_random(seed: u64, out: *mut *mut SfGenome) -> SfStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        let genome = random_genome(&mut rng::stream(seed, &[tag::INIT]));
        *out = Box::into_raw(Box::new(SfGenome { genome }));
        Ok(())
    })
}

/// Copies `len` weights into a new genome. `len` must be `SF_GENOME_LEN`.
///
/// # Safety
/// `weights` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sf_genome_from_weights(weights: *const f64, len: usize, out: *mut *mut SfGenome) -> SfStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        deref(weights, "weights")?;
        let w = std::slice::from_raw_parts(weights, len).to_vec();
        let genome = Genome::new(w)?;
        *out = Box::into_raw(Box::new(SfGenome { genome }));
        Ok(())
    })
}

/// Loads a genome file. `out_role` may be null.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sf_genome_load(path: *const c_char, out: *mut *mut SfGenome, out_role: *mut u32) -> SfStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        let file = GenomeFile::load(&path_arg(path)?)?;
        if let Some(r) = out_role.as_mut() {
            *r = role_code(file.role);
        }
        *out = Box::into_raw(Box::new(SfGenome { genome: file.weights }));
        Ok(())
    })
}

/// Writes a genome file tagged with `role`, `seed` and `generation`.
///
/// # Safety
/// `genome` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sf_genome_save(
    genome: *const SfGenome,
    path: *const c_char,
    role: u32,
    seed: u64,
    generation: u64,
) -> SfStatus {
    guard(|| {
        let g = deref(genome, "genome")?;
        let role = role_from(role)?;
        let file = GenomeFile::new(g.genome.clone(), role, seed, generation as usize);
        file.save(&path_arg(path)?)?;
        Ok(())
    })
}

/// Copies the weights into `out`, which must hold at least `SF_GENOME_LEN`.
///
/// # Safety
/// `genome` must be a live handle; `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn sf_genome_weights(genome: *const SfGenome, out: *mut f64, len: usize) -> SfStatus {
    guard(|| {
        let g = deref(genome, "genome")?;
        deref_mut(out, "out")?;
        if len < GENOME_LEN {
            return Err(Fail(
                SfStatus::Dimension,
                format!("buffer holds {len} weights, need {GENOME_LEN}"),
            ));
        }
        std::slice::from_raw_parts_mut(out, GENOME_LEN).copy_from_slice(g.genome.weights());
        Ok(())
    })
}

/// # Safety
/// `genome` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sf_genome_free(genome: *mut SfGenome) {
    if !genome.is_null() {
        drop(Box::from_raw(genome));
    }
}

/// Runs the network on a 21-value sensor frame, giving wheel commands
/// already scaled to the robot's speed limits.
///
/// # Safety
/// `frame` must point to `SF_FRAME_LEN` doubles; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn sf_forward(
    genome: *const SfGenome,
    frame: *const f64,
    out_v: *mut f64,
    out_omega: *mut f64,
) -> SfStatus {
    guard(|| {
        let g = deref(genome, "genome")?;
        deref(frame, "frame")?;
        let v = deref_mut(out_v, "out_v")?;
        let omega = deref_mut(out_omega, "out_omega")?;
        let mut inputs = [0.0; FRAME_LEN];
        inputs.copy_from_slice(std::slice::from_raw_parts(frame, FRAME_LEN));
        let [a, b] = forward_raw(g.genome.weights(), &inputs)?;
        let spec = slopeforage::RobotSpec::default();
        *v = a * spec.v_max;
        *omega = b * spec.omega_max;
        Ok(())
    })
}

/// Spawns one of the `SF_SCENARIO_*` setups from `seed`. Sensor noise is
/// drawn from a stream derived from the same seed, matching single-robot
/// evaluation.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sf_world_spawn(scenario: u32, seed: u64, noiseless: bool, out: *mut *mut SfWorld) -> SfStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        let kind = *ScenarioKind::ALL
            .get(scenario as usize)
            .ok_or_else(|| invalid(format!("unknown scenario code {scenario}")))?;
        let sim = sim_config(noiseless);
        let (world, _) = slopeforage::spawn_scenario(kind, seed, &sim)?;
        *out = Box::into_raw(Box::new(SfWorld {
            world,
            sim,
            noise: rng::stream(seed, &[tag::NOISE]),
        }));
        Ok(())
    })
}

/// # Safety
/// `world` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sf_world_free(world: *mut SfWorld) {
    if !world.is_null() {
        drop(Box::from_raw(world));
    }
}

/// Number of robots, or 0 for a null handle.
///
/// # Safety
/// `world` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sf_world_robot_count(world: *const SfWorld) -> usize {
    world.as_ref().map_or(0, |w| w.world.robots.len())
}

/// # Safety
/// `world` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sf_world_time(world: *const SfWorld, out: *mut f64) -> SfStatus {
    guard(|| {
        *deref_mut(out, "out")? = deref(world, "world")?.world.time;
        Ok(())
    })
}

/// Reads robot `robot`'s sensors into `out` (`SF_FRAME_LEN` doubles),
/// advancing the world's noise stream.
///
/// # Safety
/// `world` must be a live handle; `out` must point to `SF_FRAME_LEN` doubles.
#[no_mangle]
pub unsafe extern "C" fn sf_world_sense(world: *mut SfWorld, robot: usize, out: *mut f64) -> SfStatus {
    guard(|| {
        let w = deref_mut(world, "world")?;
        deref_mut(out, "out")?;
        let robot = robot_index(w, robot)?;
        let frame = sense_frame(&w.world, robot, &w.sim.noise, &mut w.noise);
        std::slice::from_raw_parts_mut(out, FRAME_LEN).copy_from_slice(&frame.to_array());
        Ok(())
    })
}

/// Advances one time step. `commands` holds `(v, omega)` pairs, one per
/// robot, so `len` must be twice the robot count. Commands are clamped to
/// the robot's limits.
///
/// # Safety
/// `world` must be a live handle; `commands` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sf_world_step(world: *mut SfWorld, commands: *const f64, len: usize) -> SfStatus {
    guard(|| {
        let w = deref_mut(world, "world")?;
        let n = w.world.robots.len();
        if len != 2 * n {
            return Err(invalid(format!("expected {} command values, got {len}", 2 * n)));
        }
        let cmds: Vec<ControlCommand> = if n == 0 {
            Vec::new()
        } else {
            deref(commands, "commands")?;
            std::slice::from_raw_parts(commands, len)
                .chunks_exact(2)
                .map(|c| ControlCommand::new(c[0], c[1], &w.world.robot_spec))
                .collect()
        };
        step_world(&mut w.world, &cmds, &w.sim.step);
        Ok(())
    })
}

/// Counts objects whose centre lies in `SF_AREA_*` area `area`.
///
/// # Safety
/// `world` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sf_world_objects_in_area(world: *const SfWorld, area: u32, out: *mut usize) -> SfStatus {
    guard(|| {
        let w = deref(world, "world")?;
        let out = deref_mut(out, "out")?;
        let area = *AreaKind::ALL
            .get(area as usize)
            .ok_or_else(|| invalid(format!("unknown area code {area}")))?;
        *out = w.world.objects_in_area(area);
        Ok(())
    })
}

/// # Safety
/// `world` must be a live handle; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn sf_world_robot_pose(
    world: *const SfWorld,
    robot: usize,
    out_x: *mut f64,
    out_y: *mut f64,
    out_heading: *mut f64,
) -> SfStatus {
    guard(|| {
        let w = deref(world, "world")?;
        let robot = robot_index(w, robot)?;
        let pose = w.world.robots[robot].pose;
        *deref_mut(out_x, "out_x")? = pose.x;
        *deref_mut(out_y, "out_y")? = pose.y;
        *deref_mut(out_heading, "out_heading")? = pose.heading;
        Ok(())
    })
}

/// Evaluates a genome once in `role`'s single-robot training scenario.
///
/// # Safety
/// `genome` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sf_evaluate_individual(
    genome: *const SfGenome,
    role: u32,
    seed: u64,
    noiseless: bool,
    out: *mut u32,
) -> SfStatus {
    guard(|| {
        let g = deref(genome, "genome")?;
        let out = deref_mut(out, "out")?;
        let role = role_from(role)?;
        *out = evaluate_individual(&g.genome, role, seed, &sim_config(noiseless))?.0;
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_match_core_ordering() {
        assert_eq!(AreaKind::ALL[SF_AREA_SLOPE as usize], AreaKind::Slope);
        assert_eq!(
            ScenarioKind::ALL[SF_SCENARIO_POSTEVAL_DC as usize],
            ScenarioKind::PostevalDc
        );
        for role in Role::ALL {
            assert_eq!(role_from(role_code(role)).ok(), Some(role));
        }
    }

    #[test]
    fn panic_is_contained() {
        let status = guard(|| panic!("boom"));
        assert_eq!(status, SfStatus::Panic);
        let msg = unsafe { CStr::from_ptr(sf_last_error_message()) };
        assert!(msg.to_str().unwrap().contains("boom"));
    }
}
