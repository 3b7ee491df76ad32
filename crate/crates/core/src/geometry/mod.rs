//! Deterministic geometry on triangle meshes and point clouds.
//!
//! Frame convention: z is up, and an asset rests on the plane below its lowest
//! vertex with its placement origin at the projected vertex centroid.

mod analysis;
mod fps;
mod obb;
mod obj;
pub mod primitives;
mod render;
mod sampling;
mod scale;

pub use analysis::{
    connected_components, degenerate_face_ratio, enclosed_volume, signed_volume, volume_centroid,
    DEGENERATE_FACE_AREA,
};
pub use fps::{farthest_from_centroid, farthest_point_sampling, greedy_farthest, DEFAULT_FPS_CANDIDATES};
pub use obb::{compute_obb, mesh_obb, obb_of_points};
pub use obj::{load_mesh, write_obj};
pub use render::{render_view, render_views, ring_cameras, Camera, RenderView, RING_ELEVATION_DEG};
pub use sampling::{surface_sample, DEFAULT_SURFACE_SAMPLES};
pub use scale::{collision_radius, placement_annotation, rescale_to_dims, UpAxis};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("OBJ line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("degenerate mesh: {0}")]
    Degenerate(String),
    #[error("invalid argument: {0}")]
    Argument(String),
}
