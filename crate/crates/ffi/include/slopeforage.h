#ifndef SLOPEFORAGE_H
#define SLOPEFORAGE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define SF_FRAME_LEN 21

#define SF_GENOME_LEN 194

#define SF_ROLE_GENERALIST 0

#define SF_ROLE_DROPPER 1

#define SF_ROLE_COLLECTOR 2

#define SF_AREA_NEST 0

#define SF_AREA_CACHE 1

#define SF_AREA_SLOPE 2

#define SF_AREA_SOURCE 3

#define SF_SCENARIO_GENERALIST_TRAIN 0

#define SF_SCENARIO_DROPPER_TRAIN 1

#define SF_SCENARIO_COLLECTOR_TRAIN 2

#define SF_SCENARIO_POSTEVAL_GG 3

#define SF_SCENARIO_POSTEVAL_DC 4

typedef enum SfStatus {
  SF_STATUS_OK = 0,
  SF_STATUS_NULL_POINTER = 1,
  SF_STATUS_INVALID_ARGUMENT = 2,
  SF_STATUS_OUT_OF_BOUNDS = 3,
  SF_STATUS_PLACEMENT = 4,
  SF_STATUS_DIMENSION = 5,
  SF_STATUS_IO = 6,
  SF_STATUS_PARSE = 7,
  SF_STATUS_ROLE_MISMATCH = 8,
  SF_STATUS_PANIC = 9,
} SfStatus;

/**
 * A 21-8-2 controller weight vector.
 */
typedef struct SfGenome SfGenome;

/**
 * A simulated arena with its robots, objects and sensor-noise stream.
 */
typedef struct SfWorld SfWorld;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *sf_version(void);

/**
 * Message for the last failed call on this thread, or null. The pointer is
 * valid until the next call into this library on the same thread.
 */
const char *sf_last_error_message(void);

/**
 * Draws a genome with weights uniform in [-0.5, 0.5] from `seed`.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for a handle.
 */
enum SfStatus sf_genome_random(uint64_t seed, struct SfGenome **out);

/**
 * Copies `len` weights into a new genome. `len` must be `SF_GENOME_LEN`.
 *
 * # Safety
 * `weights` must point to `len` readable doubles; `out` must be writable.
 */
enum SfStatus sf_genome_from_weights(const double *weights, size_t len, struct SfGenome **out);

/**
 * Loads a genome file. `out_role` may be null.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum SfStatus sf_genome_load(const char *path, struct SfGenome **out, uint32_t *out_role);

/**
 * Writes a genome file tagged with `role`, `seed` and `generation`.
 *
 * # Safety
 * `genome` must be a live handle; `path` a NUL-terminated string.
 */
enum SfStatus sf_genome_save(const struct SfGenome *genome,
                             const char *path,
                             uint32_t role,
                             uint64_t seed,
                             uint64_t generation);

/**
 * Copies the weights into `out`, which must hold at least `SF_GENOME_LEN`.
 *
 * # Safety
 * `genome` must be a live handle; `out` must point to `len` writable doubles.
 */
enum SfStatus sf_genome_weights(const struct SfGenome *genome, double *out, size_t len);

/**
 * # Safety
 * `genome` must be null or a handle not yet freed.
 */
void sf_genome_free(struct SfGenome *genome);

/**
 * Runs the network on a 21-value sensor frame, giving wheel commands
 * already scaled to the robot's speed limits.
 *
 * # Safety
 * `frame` must point to `SF_FRAME_LEN` doubles; outputs must be writable.
 */
enum SfStatus sf_forward(const struct SfGenome *genome,
                         const double *frame,
                         double *out_v,
                         double *out_omega);

/**
 * Spawns one of the `SF_SCENARIO_*` setups from `seed`. Sensor noise is
 * drawn from a stream derived from the same seed, matching single-robot
 * evaluation.
 *
 * # Safety
 * `out` must be writable.
 */
enum SfStatus sf_world_spawn(uint32_t scenario,
                             uint64_t seed,
                             bool noiseless,
                             struct SfWorld **out);

/**
 * # Safety
 * `world` must be null or a handle not yet freed.
 */
void sf_world_free(struct SfWorld *world);

/**
 * Number of robots, or 0 for a null handle.
 *
 * # Safety
 * `world` must be null or a live handle.
 */
size_t sf_world_robot_count(const struct SfWorld *world);

/**
 * # Safety
 * `world` must be a live handle; `out` writable.
 */
enum SfStatus sf_world_time(const struct SfWorld *world, double *out);

/**
 * Reads robot `robot`'s sensors into `out` (`SF_FRAME_LEN` doubles),
 * advancing the world's noise stream.
 *
 * # Safety
 * `world` must be a live handle; `out` must point to `SF_FRAME_LEN` doubles.
 */
enum SfStatus sf_world_sense(struct SfWorld *world, size_t robot, double *out);

/**
 * Advances one time step. `commands` holds `(v, omega)` pairs, one per
 * robot, so `len` must be twice the robot count. Commands are clamped to
 * the robot's limits.
 *
 * # Safety
 * `world` must be a live handle; `commands` must point to `len` doubles.
 */
enum SfStatus sf_world_step(struct SfWorld *world, const double *commands, size_t len);

/**
 * Counts objects whose centre lies in `SF_AREA_*` area `area`.
 *
 * # Safety
 * `world` must be a live handle; `out` writable.
 */
enum SfStatus sf_world_objects_in_area(const struct SfWorld *world, uint32_t area, size_t *out);

/**
 * # Safety
 * `world` must be a live handle; outputs writable.
 */
enum SfStatus sf_world_robot_pose(const struct SfWorld *world,
                                  size_t robot,
                                  double *out_x,
                                  double *out_y,
                                  double *out_heading);

/**
 * Evaluates a genome once in `role`'s single-robot training scenario.
 *
 * # Safety
 * `genome` must be a live handle; `out` writable.
 */
enum SfStatus sf_evaluate_individual(const struct SfGenome *genome,
                                     uint32_t role,
                                     uint64_t seed,
                                     bool noiseless,
                                     uint32_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SLOPEFORAGE_H */
