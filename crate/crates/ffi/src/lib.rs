//! C ABI over the twinkit pipeline.
//!
//! Objects cross the boundary as opaque handles created by `tk_*_new`/`load`
//! functions and released with the matching `tk_*_free`. Every fallible call
//! returns a [`TkStatus`]; on failure [`tk_last_error`] describes the problem
//! for the calling thread. Panics never unwind into C.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use nalgebra::{Point3, Quaternion, UnitQuaternion};
use twinkit::geometry::{farthest_from_centroid, farthest_point_sampling, load_mesh, mesh_obb, surface_sample};
use twinkit::grasp::{verify_grasp, VerifyConfig};
use twinkit::layout::{sample_layout, LayoutError, LayoutItem, Table};
use twinkit::model::{load_manifest, AssetRecord, FailureReason, GraspPose, GripperModel, PhysicalProperties, PointCloud, TriMesh};
use twinkit::pipeline::{run_pipeline, PipelineConfig};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TkStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Infeasible = 5,
    Internal = 6,
    Panic = 7,
}

/// Outcome of a single grasp check.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TkFailureReason {
    None = 0,
    Penetration = 1,
    NoContact = 2,
    NotForceClosure = 3,
    SlideFailure = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TkVerifyResult {
    pub passed: bool,
    pub failure_reason: TkFailureReason,
    pub stable_frames: u32,
    pub max_displacement: f64,
}

/// Oriented bounding box; `axes` holds the three box axes as consecutive
/// unit vectors.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TkObb {
    pub center: [f64; 3],
    pub axes: [f64; 9],
    pub half_extents: [f64; 3],
}

/// Opaque triangle mesh.
pub struct TkMesh(TriMesh);
/// Opaque point cloud with normals.
pub struct TkPointCloud(PointCloud);
/// Opaque consolidated asset record.
pub struct TkRecord(AssetRecord);

struct Failure(TkStatus, String);

impl Failure {
    fn new(status: TkStatus, msg: impl std::fmt::Display) -> Self {
        Failure(status, msg.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> TkStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TkStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("panic: {msg}"));
            TkStatus::Panic
        }
    }
}

fn nonnull<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    unsafe { p.as_ref() }.ok_or_else(|| Failure::new(TkStatus::NullArgument, format!("`{name}` is null")))
}

fn out_ptr<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    unsafe { p.as_mut() }.ok_or_else(|| Failure::new(TkStatus::NullArgument, format!("`{name}` is null")))
}

fn slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    nonnull(p, name)?;
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

fn slice_mut<'a, T>(p: *mut T, len: usize, name: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    out_ptr(p, name)?;
    Ok(unsafe { std::slice::from_raw_parts_mut(p, len) })
}

fn path_arg(p: *const c_char, name: &str) -> Result<PathBuf, Failure> {
    nonnull(p, name)?;
    let s = unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|e| Failure::new(TkStatus::InvalidArgument, format!("`{name}` is not UTF-8: {e}")))?;
    Ok(PathBuf::from(s))
}

fn give<T>(out: *mut *mut T, value: T, name: &str) -> Result<(), Failure> {
    *out_ptr(out, name)? = Box::into_raw(Box::new(value));
    Ok(())
}

fn give_string(out: *mut *mut c_char, text: String) -> Result<(), Failure> {
    let c = CString::new(text).map_err(|e| Failure::new(TkStatus::Internal, e))?;
    *out_ptr(out, "out")? = c.into_raw();
    Ok(())
}

fn invalid(e: impl std::fmt::Display) -> Failure {
    Failure::new(TkStatus::InvalidArgument, e)
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn tk_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn tk_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Reads a Wavefront OBJ file.
#[no_mangle]
pub unsafe extern "C" fn tk_mesh_load_obj(path: *const c_char, out: *mut *mut TkMesh) -> TkStatus {
    guard(|| {
        let path = path_arg(path, "path")?;
        let bytes = std::fs::read(&path).map_err(|e| Failure::new(TkStatus::Io, format!("{}: {e}", path.display())))?;
        let mesh = load_mesh(&bytes).map_err(|e| Failure::new(TkStatus::Parse, e))?;
        give(out, TkMesh(mesh), "out")
    })
}

/// Builds a mesh from `vertex_count` xyz triples and `face_count` index triples.
#[no_mangle]
pub unsafe extern "C" fn tk_mesh_new(
    vertices: *const f64,
    vertex_count: usize,
    faces: *const u32,
    face_count: usize,
    out: *mut *mut TkMesh,
) -> TkStatus {
    guard(|| {
        let v = slice(vertices, vertex_count * 3, "vertices")?;
        let f = slice(faces, face_count * 3, "faces")?;
        let mesh = TriMesh::new(
            v.chunks_exact(3).map(|c| Point3::new(c[0], c[1], c[2])).collect(),
            f.chunks_exact(3).map(|c| [c[0] as usize, c[1] as usize, c[2] as usize]).collect(),
        )
        .map_err(invalid)?;
        give(out, TkMesh(mesh), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn tk_mesh_free(mesh: *mut TkMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

#[no_mangle]
pub unsafe extern "C" fn tk_mesh_counts(mesh: *const TkMesh, vertices: *mut usize, faces: *mut usize) -> TkStatus {
    guard(|| {
        let m = &nonnull(mesh, "mesh")?.0;
        *out_ptr(vertices, "vertices")? = m.vertices().len();
        *out_ptr(faces, "faces")? = m.faces().len();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn tk_mesh_obb(mesh: *const TkMesh, out: *mut TkObb) -> TkStatus {
    guard(|| {
        let obb = mesh_obb(&nonnull(mesh, "mesh")?.0).map_err(invalid)?;
        let mut axes = [0.0; 9];
        for k in 0..3 {
            for (i, v) in obb.rotation.column(k).iter().enumerate() {
                axes[3 * k + i] = *v;
            }
        }
        *out_ptr(out, "out")? = TkObb {
            center: [obb.center.x, obb.center.y, obb.center.z],
            axes,
            half_extents: obb.half_extents,
        };
        Ok(())
    })
}

/// Area-weighted surface samples with face normals.
#[no_mangle]
pub unsafe extern "C" fn tk_surface_sample(
    mesh: *const TkMesh,
    count: usize,
    seed: u64,
    out: *mut *mut TkPointCloud,
) -> TkStatus {
    guard(|| {
        let cloud = surface_sample(&nonnull(mesh, "mesh")?.0, count, seed).map_err(invalid)?;
        give(out, TkPointCloud(cloud), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn tk_cloud_free(cloud: *mut TkPointCloud) {
    if !cloud.is_null() {
        drop(Box::from_raw(cloud));
    }
}

#[no_mangle]
pub unsafe extern "C" fn tk_cloud_len(cloud: *const TkPointCloud, out: *mut usize) -> TkStatus {
    guard(|| {
        *out_ptr(out, "out")? = nonnull(cloud, "cloud")?.0.len();
        Ok(())
    })
}

/// Copies the points as xyz triples into `xyz`, which holds `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn tk_cloud_points(cloud: *const TkPointCloud, xyz: *mut f64, capacity: usize) -> TkStatus {
    guard(|| {
        let pts = nonnull(cloud, "cloud")?.0.points();
        if capacity < pts.len() * 3 {
            return Err(invalid(format!("capacity {capacity} below {}", pts.len() * 3)));
        }
        let dst = slice_mut(xyz, pts.len() * 3, "xyz")?;
        for (d, p) in dst.chunks_exact_mut(3).zip(pts) {
            d.copy_from_slice(&[p.x, p.y, p.z]);
        }
        Ok(())
    })
}

/// Farthest point sampling of `k` indices, seeded at the point farthest from
/// the centroid. Indices are written to `indices` in selection order.
#[no_mangle]
pub unsafe extern "C" fn tk_fps(cloud: *const TkPointCloud, k: usize, indices: *mut usize) -> TkStatus {
    guard(|| {
        let cloud = &nonnull(cloud, "cloud")?.0;
        let start = farthest_from_centroid(cloud.points()).ok_or_else(|| invalid("cloud is empty"))?;
        let picked = farthest_point_sampling(cloud, k, start).map_err(invalid)?;
        slice_mut(indices, k, "indices")?.copy_from_slice(&picked);
        Ok(())
    })
}

fn failure_code(reason: FailureReason) -> TkFailureReason {
    match reason {
        FailureReason::None => TkFailureReason::None,
        FailureReason::Penetration => TkFailureReason::Penetration,
        FailureReason::NoContact => TkFailureReason::NoContact,
        FailureReason::NotForceClosure => TkFailureReason::NotForceClosure,
        FailureReason::SlideFailure => TkFailureReason::SlideFailure,
    }
}

/// Checks one grasp with the default gripper. `orientation` is a unit
/// quaternion in w, x, y, z order.
#[no_mangle]
pub unsafe extern "C" fn tk_verify_grasp(
    mesh: *const TkMesh,
    mass: f64,
    friction: f64,
    position: *const [f64; 3],
    orientation: *const [f64; 4],
    out: *mut TkVerifyResult,
) -> TkStatus {
    guard(|| {
        let mesh = &nonnull(mesh, "mesh")?.0;
        let p = nonnull(position, "position")?;
        let [w, x, y, z] = *nonnull(orientation, "orientation")?;
        let obb = mesh_obb(mesh).map_err(invalid)?;
        let physical = PhysicalProperties {
            obb_dims: obb.dims(),
            mass,
            friction,
            obb,
        };
        physical.validate().map_err(invalid)?;
        let q = Quaternion::new(w, x, y, z);
        if !((q.norm() - 1.0).abs() <= 1e-6) {
            return Err(invalid(format!("orientation norm {} is not 1", q.norm())));
        }
        let pose = GraspPose::new(Point3::new(p[0], p[1], p[2]), UnitQuaternion::from_quaternion(q), 1.0);
        let outcome = verify_grasp(mesh, &physical, &pose, &GripperModel::default(), &VerifyConfig::default())
            .map_err(invalid)?;
        *out_ptr(out, "out")? = TkVerifyResult {
            passed: outcome.passed,
            failure_reason: failure_code(outcome.failure_reason),
            stable_frames: outcome.stable_frames,
            max_displacement: outcome.max_displacement,
        };
        Ok(())
    })
}

/// Places `count` circles of the given radii on a `width` × `depth` table.
/// Writes x, y, yaw per object into `placements` (3 × `count` doubles).
/// Returns `TK_STATUS_INFEASIBLE` when some object cannot be placed.
#[no_mangle]
pub unsafe extern "C" fn tk_layout_sample(
    radii: *const f64,
    count: usize,
    width: f64,
    depth: f64,
    seed: u64,
    max_attempts: usize,
    placements: *mut f64,
) -> TkStatus {
    guard(|| {
        let radii = slice(radii, count, "radii")?;
        let table = Table::new(width, depth).map_err(invalid)?;
        let items: Vec<LayoutItem> = radii
            .iter()
            .enumerate()
            .map(|(i, &radius)| LayoutItem {
                asset_id: format!("object_{i}"),
                radius,
            })
            .collect();
        let layout = sample_layout("ffi", &items, table, seed, max_attempts).map_err(|e| match e {
            LayoutError::Infeasible { .. } => Failure::new(TkStatus::Infeasible, e),
            other => invalid(other),
        })?;
        let dst = slice_mut(placements, count * 3, "placements")?;
        for (d, p) in dst.chunks_exact_mut(3).zip(&layout.placements) {
            d.copy_from_slice(&[p.position[0], p.position[1], p.yaw]);
        }
        Ok(())
    })
}

/// Loads and validates a manifest.
#[no_mangle]
pub unsafe extern "C" fn tk_record_load(path: *const c_char, out: *mut *mut TkRecord) -> TkStatus {
    guard(|| {
        let path = path_arg(path, "path")?;
        let record = load_manifest(&path).map_err(|e| match e {
            twinkit::model::ManifestError::Io { .. } => Failure::new(TkStatus::Io, e),
            _ => Failure::new(TkStatus::Parse, e),
        })?;
        give(out, TkRecord(record), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn tk_record_free(record: *mut TkRecord) {
    if !record.is_null() {
        drop(Box::from_raw(record));
    }
}

/// Number of verified grasps in the record.
#[no_mangle]
pub unsafe extern "C" fn tk_record_verified_count(record: *const TkRecord, out: *mut usize) -> TkStatus {
    guard(|| {
        *out_ptr(out, "out")? = nonnull(record, "record")?.0.verified_grasps.len();
        Ok(())
    })
}

/// Serializes the record as JSON. Free the result with `tk_string_free`.
#[no_mangle]
pub unsafe extern "C" fn tk_record_to_json(record: *const TkRecord, out: *mut *mut c_char) -> TkStatus {
    guard(|| {
        let text = serde_json::to_string(&nonnull(record, "record")?.0).map_err(|e| Failure::new(TkStatus::Internal, e))?;
        give_string(out, text)
    })
}

/// Runs the pipeline with mock clients over an ingested store and returns the
/// statistics as JSON. Free the result with `tk_string_free`.
#[no_mangle]
pub unsafe extern "C" fn tk_pipeline_run(store: *const c_char, seed: u64, out_stats: *mut *mut c_char) -> TkStatus {
    guard(|| {
        let mut config = PipelineConfig::new(path_arg(store, "store")?);
        config.seed = seed;
        let report = run_pipeline(&config).map_err(|e| match e {
            twinkit::pipeline::PipelineError::Io { .. } => Failure::new(TkStatus::Io, e),
            twinkit::pipeline::PipelineError::Config(_) => invalid(e),
            other => Failure::new(TkStatus::Internal, other),
        })?;
        let text = serde_json::to_string(&report.stats).map_err(|e| Failure::new(TkStatus::Internal, e))?;
        give_string(out_stats, text)
    })
}
