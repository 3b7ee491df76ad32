use std::io::Cursor;
use std::path::Path;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::GeometryError;
use crate::model::TriMesh;

/// Elevation of the camera ring above the horizon, in degrees.
pub const RING_ELEVATION_DEG: f64 = 30.0;

const BACKGROUND: [u8; 3] = [0, 0, 0];
const BASE_SHADE: f64 = 220.0;
/// Fraction of the frame left empty around the bounding sphere.
const FRAME_MARGIN: f64 = 1.1;

/// Orthographic camera: `direction` points from the object toward the camera.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub direction: Vector3<f64>,
    pub up: Vector3<f64>,
}

impl Camera {
    /// Screen right and screen up vectors.
    fn screen_axes(&self) -> (Vector3<f64>, Vector3<f64>) {
        let right = self.up.cross(&self.direction).normalize();
        let up = self.direction.cross(&right);
        (right, up)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderView {
    pub width: u32,
    pub height: u32,
    pub view_index: usize,
    /// Row-major RGB, top row first.
    pub pixels: Vec<[u8; 3]>,
    pub camera: Camera,
}

impl RenderView {
    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        self.pixels[(y * self.width + x) as usize]
    }

    pub fn is_background(&self, x: u32, y: u32) -> bool {
        self.pixel(x, y) == BACKGROUND
    }

    /// Inclusive pixel bounding box `(x0, y0, x1, y1)` of everything drawn.
    pub fn silhouette_bounds(&self) -> Option<(u32, u32, u32, u32)> {
        let mut bounds: Option<(u32, u32, u32, u32)> = None;
        for y in 0..self.height {
            for x in 0..self.width {
                if !self.is_background(x, y) {
                    bounds = Some(match bounds {
                        None => (x, y, x, y),
                        Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
                    });
                }
            }
        }
        bounds
    }

    pub fn to_png(&self) -> Vec<u8> {
        let raw: Vec<u8> = self.pixels.iter().flatten().copied().collect();
        let img = image::RgbImage::from_raw(self.width, self.height, raw).expect("buffer matches dimensions");
        let mut out = Cursor::new(Vec::new());
        img.write_to(&mut out, image::ImageFormat::Png).expect("in-memory PNG encoding");
        out.into_inner()
    }

    pub fn save_png(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_png())
    }
}

/// `n` cameras evenly spaced in azimuth on a ring tilted above the horizon, z up.
pub fn ring_cameras(n: usize) -> Vec<Camera> {
    let elevation = RING_ELEVATION_DEG.to_radians();
    (0..n)
        .map(|k| {
            let azimuth = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            Camera {
                direction: Vector3::new(
                    elevation.cos() * azimuth.cos(),
                    elevation.cos() * azimuth.sin(),
                    elevation.sin(),
                ),
                up: Vector3::z(),
            }
        })
        .collect()
}

pub fn render_views(mesh: &TriMesh, n_views: usize, width: u32, height: u32) -> Result<Vec<RenderView>, GeometryError> {
    if n_views == 0 {
        return Err(GeometryError::Argument("at least one view is required".into()));
    }
    ring_cameras(n_views)
        .into_iter()
        .enumerate()
        .map(|(i, camera)| render_view(mesh, camera, width, height, i))
        .collect()
}

/// Frame shared by all views: center of the vertex AABB and the radius of the
/// sphere around it that holds every vertex.
fn framing(mesh: &TriMesh) -> (Point3<f64>, f64) {
    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    for v in mesh.vertices() {
        lo = lo.inf(&v.coords);
        hi = hi.sup(&v.coords);
    }
    let center = Point3::from((lo + hi) / 2.0);
    let radius = mesh
        .vertices()
        .iter()
        .map(|v| (v - center).norm())
        .fold(0.0, f64::max);
    (center, radius)
}

/// Pixels per meter for a mesh of bounding radius `radius` in a `width × height` frame.
pub(crate) fn pixel_scale(radius: f64, width: u32, height: u32) -> f64 {
    width.min(height) as f64 / (2.0 * FRAME_MARGIN * radius.max(1e-12))
}

/// Flat-shaded orthographic rasterization with a depth buffer.
pub fn render_view(
    mesh: &TriMesh,
    camera: Camera,
    width: u32,
    height: u32,
    view_index: usize,
) -> Result<RenderView, GeometryError> {
    if mesh.is_empty() {
        return Err(GeometryError::Degenerate("cannot render a mesh without faces".into()));
    }
    if width == 0 || height == 0 {
        return Err(GeometryError::Argument("image dimensions must be positive".into()));
    }
    let (center, radius) = framing(mesh);
    let scale = pixel_scale(radius, width, height);
    let (right, up) = camera.screen_axes();
    let dir = camera.direction.normalize();

    let project = |p: &Point3<f64>| {
        let d = p - center;
        (
            width as f64 / 2.0 + right.dot(&d) * scale,
            height as f64 / 2.0 - up.dot(&d) * scale,
            dir.dot(&d),
        )
    };

    let mut pixels = vec![BACKGROUND; (width * height) as usize];
    let mut depth = vec![f64::NEG_INFINITY; (width * height) as usize];
    for f in 0..mesh.faces().len() {
        let normal = mesh.face_cross(f);
        if normal.norm() == 0.0 {
            continue;
        }
        let shade = BASE_SHADE * (0.3 + 0.7 * normal.normalize().dot(&dir).abs());
        let color = [shade.round() as u8; 3];
        let [a, b, c] = mesh.triangle(f).map(|p| project(&p));
        let area = (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0);
        if area == 0.0 {
            continue;
        }
        let x0 = a.0.min(b.0).min(c.0).floor().max(0.0) as u32;
        let x1 = (a.0.max(b.0).max(c.0).ceil() as i64).clamp(0, width as i64) as u32;
        let y0 = a.1.min(b.1).min(c.1).floor().max(0.0) as u32;
        let y1 = (a.1.max(b.1).max(c.1).ceil() as i64).clamp(0, height as i64) as u32;
        for y in y0..y1 {
            for x in x0..x1 {
                let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
                let w0 = ((b.0 - px) * (c.1 - py) - (b.1 - py) * (c.0 - px)) / area;
                let w1 = ((c.0 - px) * (a.1 - py) - (c.1 - py) * (a.0 - px)) / area;
                let w2 = 1.0 - w0 - w1;
                if w0 < 0.0 || w1 < 0.0 || w2 < 0.0 {
                    continue;
                }
                let z = w0 * a.2 + w1 * b.2 + w2 * c.2;
                let idx = (y * width + x) as usize;
                if z > depth[idx] {
                    depth[idx] = z;
                    pixels[idx] = color;
                }
            }
        }
    }
    Ok(RenderView {
        width,
        height,
        view_index,
        pixels,
        camera,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives::cuboid;

    #[test]
    fn eight_views_on_a_tilted_ring() {
        let views = render_views(&cuboid(0.1, 0.1, 0.1), 8, 32, 32).unwrap();
        assert_eq!(views.len(), 8);
        for (i, v) in views.iter().enumerate() {
            assert_eq!(v.view_index, i);
            assert_eq!(v.pixels.len(), 32 * 32);
            let elevation = v.camera.direction.z.asin().to_degrees();
            assert!((elevation - 30.0).abs() < 1e-9);
        }
    }

    #[test]
    fn face_on_cube_matches_analytic_projection() {
        let (w, h) = (128u32, 96u32);
        let mesh = cuboid(1.0, 1.0, 1.0);
        let camera = Camera {
            direction: Vector3::x(),
            up: Vector3::z(),
        };
        let view = render_view(&mesh, camera, w, h, 0).unwrap();
        // the visible face spans [-0.5, 0.5] in both screen axes around the frame center
        let radius = 0.75f64.sqrt();
        let s = h as f64 / (2.0 * 1.1 * radius);
        let expected = (
            w as f64 / 2.0 - 0.5 * s,
            h as f64 / 2.0 - 0.5 * s,
            w as f64 / 2.0 + 0.5 * s,
            h as f64 / 2.0 + 0.5 * s,
        );
        let (x0, y0, x1, y1) = view.silhouette_bounds().unwrap();
        // pixel i covers [i, i + 1)
        assert!((x0 as f64 - expected.0).abs() <= 1.0);
        assert!((y0 as f64 - expected.1).abs() <= 1.0);
        assert!(((x1 + 1) as f64 - expected.2).abs() <= 1.0);
        assert!(((y1 + 1) as f64 - expected.3).abs() <= 1.0);
        // filled square
        for y in y0..=y1 {
            for x in x0..=x1 {
                assert!(!view.is_background(x, y));
            }
        }
    }

    #[test]
    fn deterministic_png() {
        let mesh = cuboid(0.2, 0.1, 0.05);
        let a = render_views(&mesh, 2, 40, 30).unwrap();
        let b = render_views(&mesh, 2, 40, 30).unwrap();
        assert_eq!(a, b);
        let png = a[0].to_png();
        assert_eq!(&png[1..4], b"PNG");
    }

    #[test]
    fn empty_mesh_is_an_error() {
        let mesh = TriMesh::new(vec![], vec![]).unwrap();
        assert!(render_views(&mesh, 1, 8, 8).is_err());
        assert!(render_views(&cuboid(1.0, 1.0, 1.0), 0, 8, 8).is_err());
    }
}
