#ifndef TWINKIT_H
#define TWINKIT_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum TkStatus {
  TK_STATUS_OK = 0,
  TK_STATUS_NULL_ARGUMENT = 1,
  TK_STATUS_INVALID_ARGUMENT = 2,
  TK_STATUS_IO = 3,
  TK_STATUS_PARSE = 4,
  TK_STATUS_INFEASIBLE = 5,
  TK_STATUS_INTERNAL = 6,
  TK_STATUS_PANIC = 7,
} TkStatus;

/**
 * Outcome of a single grasp check.
 */
typedef enum TkFailureReason {
  TK_FAILURE_REASON_NONE = 0,
  TK_FAILURE_REASON_PENETRATION = 1,
  TK_FAILURE_REASON_NO_CONTACT = 2,
  TK_FAILURE_REASON_NOT_FORCE_CLOSURE = 3,
  TK_FAILURE_REASON_SLIDE_FAILURE = 4,
} TkFailureReason;

/**
 * Opaque triangle mesh.
 */
typedef struct TkMesh TkMesh;

/**
 * Opaque point cloud with normals.
 */
typedef struct TkPointCloud TkPointCloud;

/**
 * Opaque consolidated asset record.
 */
typedef struct TkRecord TkRecord;

/**
 * Oriented bounding box; `axes` holds the three box axes as consecutive
 * unit vectors.
 */
typedef struct TkObb {
  double center[3];
  double axes[9];
  double half_extents[3];
} TkObb;

typedef struct TkVerifyResult {
  bool passed;
  enum TkFailureReason failure_reason;
  uint32_t stable_frames;
  double max_displacement;
} TkVerifyResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. The pointer
 * stays valid until the next call into this library on the same thread.
 */
const char *tk_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *tk_version(void);

/**
 * Releases a string returned by this library. NULL is ignored.
 */
void tk_string_free(char *s);

/**
 * Reads a Wavefront OBJ file.
 */
enum TkStatus tk_mesh_load_obj(const char *path, struct TkMesh **out);

/**
 * Builds a mesh from `vertex_count` xyz triples and `face_count` index triples.
 */
enum TkStatus tk_mesh_new(const double *vertices,
                          size_t vertex_count,
                          const uint32_t *faces,
                          size_t face_count,
                          struct TkMesh **out);

void tk_mesh_free(struct TkMesh *mesh);

enum TkStatus tk_mesh_counts(const struct TkMesh *mesh, size_t *vertices, size_t *faces);

enum TkStatus tk_mesh_obb(const struct TkMesh *mesh, struct TkObb *out);

/**
 * Area-weighted surface samples with face normals.
 */
enum TkStatus tk_surface_sample(const struct TkMesh *mesh,
                                size_t count,
                                uint64_t seed,
                                struct TkPointCloud **out);

void tk_cloud_free(struct TkPointCloud *cloud);

enum TkStatus tk_cloud_len(const struct TkPointCloud *cloud, size_t *out);

/**
 * Copies the points as xyz triples into `xyz`, which holds `capacity` doubles.
 */
enum TkStatus tk_cloud_points(const struct TkPointCloud *cloud, double *xyz, size_t capacity);

/**
 * Farthest point sampling of `k` indices, seeded at the point farthest from
 * the centroid. Indices are written to `indices` in selection order.
 */
enum TkStatus tk_fps(const struct TkPointCloud *cloud, size_t k, size_t *indices);

/**
 * Checks one grasp with the default gripper. `orientation` is a unit
 * quaternion in w, x, y, z order.
 */
enum TkStatus tk_verify_grasp(const struct TkMesh *mesh,
                              double mass,
                              double friction,
                              const double (*position)[3],
                              const double (*orientation)[4],
                              struct TkVerifyResult *out);

/**
 * Places `count` circles of the given radii on a `width` × `depth` table.
 * Writes x, y, yaw per object into `placements` (3 × `count` doubles).
 * Returns `TK_STATUS_INFEASIBLE` when some object cannot be placed.
 */
enum TkStatus tk_layout_sample(const double *radii,
                               size_t count,
                               double width,
                               double depth,
                               uint64_t seed,
                               size_t max_attempts,
                               double *placements);

/**
 * Loads and validates a manifest.
 */
enum TkStatus tk_record_load(const char *path, struct TkRecord **out);

void tk_record_free(struct TkRecord *record);

/**
 * Number of verified grasps in the record.
 */
enum TkStatus tk_record_verified_count(const struct TkRecord *record, size_t *out);

/**
 * Serializes the record as JSON. Free the result with `tk_string_free`.
 */
enum TkStatus tk_record_to_json(const struct TkRecord *record, char **out);

/**
 * Runs the pipeline with mock clients over an ingested store and returns the
 * statistics as JSON. Free the result with `tk_string_free`.
 */
enum TkStatus tk_pipeline_run(const char *store, uint64_t seed, char **out_stats);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TWINKIT_H */
