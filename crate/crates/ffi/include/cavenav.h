#ifndef CAVENAV_H
#define CAVENAV_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CavenavNodeKind {
  CAVENAV_NODE_KIND_LANDED_ROBOT = 1,
  CAVENAV_NODE_KIND_DEPLOYED_BEACON = 2,
  CAVENAV_NODE_KIND_POSE = 3,
} CavenavNodeKind;

typedef enum CavenavStatus {
  CAVENAV_STATUS_OK = 0,
  CAVENAV_STATUS_NULL_POINTER = 1,
  /**
   * Malformed text, parameters out of range or an unknown index.
   */
  CAVENAV_STATUS_INVALID_ARGUMENT = 2,
  CAVENAV_STATUS_IO = 3,
  /**
   * The simulation itself failed.
   */
  CAVENAV_STATUS_RUNTIME = 4,
  CAVENAV_STATUS_PANIC = 5,
} CavenavStatus;

/**
 * Finished mission: metrics, trajectories, merged map and homing tree.
 */
typedef struct CavenavOutcome CavenavOutcome;

/**
 * Homing tree of pose and communication nodes.
 */
typedef struct CavenavTree CavenavTree;

/**
 * Ground-truth voxel world.
 */
typedef struct CavenavWorld CavenavWorld;

typedef struct CavenavVec3 {
  double x;
  double y;
  double z;
} CavenavVec3;

typedef struct CavenavHomingParams {
  /**
   * Minimum spacing of pose nodes (m).
   */
  double d_e;
  /**
   * Radio range (m).
   */
  double d_c;
  /**
   * Speed used for flight-time estimates (m/s).
   */
  double v_nominal;
  /**
   * Safety margin added to the homing estimate (s).
   */
  double reserve_time;
} CavenavHomingParams;

/**
 * Line-of-flight test between `a` and `b`; return true when free.
 */
typedef bool (*CavenavFreeRayFn)(void *ctx, struct CavenavVec3 a, struct CavenavVec3 b);

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len - 1` bytes) and returns the full message length plus
 * one. Passing a null `buf` only queries the length.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t cavenav_last_error(char *buf, size_t len);

/**
 * Generates a cave. `params_toml` may be null for the default parameters.
 *
 * # Safety
 * `params_toml` must be null or a NUL-terminated string; `out` must be
 * writable.
 */
enum CavenavStatus cavenav_world_generate(uint64_t seed,
                                          const char *params_toml,
                                          struct CavenavWorld **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum CavenavStatus cavenav_world_load(const char *path, struct CavenavWorld **out);

/**
 * # Safety
 * `world` must come from this library; `path` must be a NUL-terminated string.
 */
enum CavenavStatus cavenav_world_save(const struct CavenavWorld *world, const char *path);

/**
 * Free volume in cubic metres.
 *
 * # Safety
 * `world` must come from this library; `out` must be writable.
 */
enum CavenavStatus cavenav_world_free_volume(const struct CavenavWorld *world, double *out);

/**
 * Points outside the world count as occupied.
 *
 * # Safety
 * `world` must come from this library; `out` must be writable.
 */
enum CavenavStatus cavenav_world_is_occupied(const struct CavenavWorld *world,
                                             struct CavenavVec3 p,
                                             bool *out);

/**
 * # Safety
 * `world` must be null or come from this library, and is invalid afterwards.
 */
void cavenav_world_free(struct CavenavWorld *world);

/**
 * Runs the mission described by `scenario_toml`. With a non-null `world`
 * the scenario's world section is ignored; otherwise the world is built
 * from it, relative file paths resolving against `base_dir` (may be null).
 *
 * # Safety
 * Strings must be NUL-terminated; `world` null or from this library; `out`
 * writable.
 */
enum CavenavStatus cavenav_mission_run(const char *scenario_toml,
                                       const struct CavenavWorld *world,
                                       const char *base_dir,
                                       struct CavenavOutcome **out);

/**
 * # Safety
 * `outcome` must come from this library; `out` must be writable.
 */
enum CavenavStatus cavenav_outcome_robot_count(const struct CavenavOutcome *outcome, size_t *out);

/**
 * Seconds from launch to the start of homing for `robot`.
 *
 * # Safety
 * `outcome` must come from this library; `out` must be writable.
 */
enum CavenavStatus cavenav_outcome_exploration_time(const struct CavenavOutcome *outcome,
                                                    size_t robot,
                                                    double *out);

/**
 * # Safety
 * `outcome` must come from this library; `out` must be writable.
 */
enum CavenavStatus cavenav_outcome_collisions(const struct CavenavOutcome *outcome, size_t *out);

/**
 * Writes the metrics as TOML into `buf`. `*needed` receives the size
 * including the NUL; call with a null `buf` and `len` 0 to query it.
 *
 * # Safety
 * `outcome` must come from this library; `buf` null or `len` writable
 * bytes; `needed` null or writable.
 */
enum CavenavStatus cavenav_outcome_metrics_toml(const struct CavenavOutcome *outcome,
                                                char *buf,
                                                size_t len,
                                                size_t *needed);

/**
 * Writes metrics, trajectories, events, map and tree files into `dir`.
 *
 * # Safety
 * `outcome` must come from this library; `dir` must be a NUL-terminated string.
 */
enum CavenavStatus cavenav_outcome_write_artifacts(const struct CavenavOutcome *outcome,
                                                   const char *dir);

/**
 * # Safety
 * `outcome` must be null or come from this library, and is invalid afterwards.
 */
void cavenav_outcome_free(struct CavenavOutcome *outcome);

/**
 * # Safety
 * `out` must be writable.
 */
enum CavenavStatus cavenav_tree_new(uint64_t base_id,
                                    struct CavenavVec3 base,
                                    struct CavenavHomingParams params,
                                    struct CavenavTree **out);

/**
 * Inserts a node. A null `ray` treats every line of flight as free.
 * `*inserted` is false when the tree rejected the node (too close to
 * another pose, not visible, duplicate id).
 *
 * # Safety
 * `tree` must come from this library; `ray` is called with `ctx` during
 * the call only; `inserted` must be writable.
 */
enum CavenavStatus cavenav_tree_insert(struct CavenavTree *tree,
                                       uint64_t id,
                                       enum CavenavNodeKind kind,
                                       struct CavenavVec3 position,
                                       CavenavFreeRayFn ray,
                                       void *ctx,
                                       bool *inserted);

/**
 * # Safety
 * `tree` must come from this library; `out` must be writable.
 */
enum CavenavStatus cavenav_tree_len(const struct CavenavTree *tree, size_t *out);

/**
 * Estimated flight time from node `id` to its communication node.
 *
 * # Safety
 * `tree` must come from this library; `out` must be writable.
 */
enum CavenavStatus cavenav_tree_accumulated_cost(const struct CavenavTree *tree,
                                                 uint64_t id,
                                                 double *out);

/**
 * Parent of node `id`; `*has_parent` is false for the base station.
 *
 * # Safety
 * `tree` must come from this library; `parent` and `has_parent` writable.
 */
enum CavenavStatus cavenav_tree_parent(const struct CavenavTree *tree,
                                       uint64_t id,
                                       uint64_t *parent,
                                       bool *has_parent);

/**
 * Homing route from `current`: landing spot in radio range of a
 * communication node and its flight-time cost.
 *
 * # Safety
 * `tree` must come from this library; `ray` as for [`cavenav_tree_insert`];
 * `landing` and `cost` writable.
 */
enum CavenavStatus cavenav_tree_homing_route(const struct CavenavTree *tree,
                                             struct CavenavVec3 current,
                                             CavenavFreeRayFn ray,
                                             void *ctx,
                                             struct CavenavVec3 *landing,
                                             double *cost);

/**
 * # Safety
 * `tree` must be null or come from this library, and is invalid afterwards.
 */
void cavenav_tree_free(struct CavenavTree *tree);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CAVENAV_H */
