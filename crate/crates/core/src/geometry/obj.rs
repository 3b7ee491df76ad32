use std::fmt::Write;

use nalgebra::Point3;

use super::GeometryError;
use crate::model::TriMesh;

/// Parses ASCII OBJ `v` and `f` records. Polygons are fan-triangulated;
/// texture/normal references and all other record types are ignored.
pub fn load_mesh(bytes: &[u8]) -> Result<TriMesh, GeometryError> {
    let text = std::str::from_utf8(bytes).map_err(|e| GeometryError::Parse {
        line: 0,
        message: format!("not UTF-8 text: {e}"),
    })?;
    let mut vertices = Vec::new();
    let mut polygons: Vec<(usize, Vec<i64>)> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = content.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let coords: Vec<&str> = tokens.collect();
                if coords.len() < 3 {
                    return Err(GeometryError::Parse {
                        line,
                        message: format!("vertex needs 3 coordinates, found {}", coords.len()),
                    });
                }
                let mut xyz = [0.0; 3];
                for (slot, token) in xyz.iter_mut().zip(&coords) {
                    *slot = token.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                        GeometryError::Parse {
                            line,
                            message: format!("invalid coordinate `{token}`"),
                        }
                    })?;
                }
                vertices.push(Point3::from(xyz));
            }
            Some("f") => {
                let mut corners = Vec::new();
                for token in tokens {
                    let index = token.split('/').next().unwrap_or("");
                    let value = index.parse::<i64>().map_err(|_| GeometryError::Parse {
                        line,
                        message: format!("invalid face index `{token}`"),
                    })?;
                    corners.push(value);
                }
                if corners.len() < 3 {
                    return Err(GeometryError::Parse {
                        line,
                        message: format!("face needs at least 3 vertices, found {}", corners.len()),
                    });
                }
                // relative indices refer to vertices read so far
                let resolved = corners
                    .into_iter()
                    .map(|c| if c < 0 { vertices.len() as i64 + c + 1 } else { c })
                    .collect();
                polygons.push((line, resolved));
            }
            _ => {}
        }
    }

    let mut faces = Vec::new();
    for (line, polygon) in polygons {
        let mut idx = Vec::with_capacity(polygon.len());
        for c in polygon {
            if c < 1 || c as usize > vertices.len() {
                return Err(GeometryError::Parse {
                    line,
                    message: format!("vertex index {c} out of range 1..={}", vertices.len()),
                });
            }
            idx.push(c as usize - 1);
        }
        for k in 1..idx.len() - 1 {
            let face = [idx[0], idx[k], idx[k + 1]];
            if face[0] == face[1] || face[1] == face[2] || face[0] == face[2] {
                return Err(GeometryError::Parse {
                    line,
                    message: format!("face repeats a vertex: {:?}", face.map(|i| i + 1)),
                });
            }
            faces.push(face);
        }
    }

    TriMesh::new(vertices, faces).map_err(|e| GeometryError::Parse {
        line: 0,
        message: e.to_string(),
    })
}

/// Writes `v`/`f` records with 1-based indices and round-trip float formatting.
pub fn write_obj(mesh: &TriMesh) -> String {
    let mut out = String::new();
    for v in mesh.vertices() {
        let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
    }
    for f in mesh.faces() {
        let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    out
}
