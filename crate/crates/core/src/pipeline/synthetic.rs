//! Seeded demo batch of primitive objects with matching fixture entries.
//! About one in ten is deliberately broken so the quality gate has work to do.

use nalgebra::Point3;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{PipelineError, Store};
use crate::clients::FixtureEntry;
use crate::geometry::{primitives, write_obj};
use crate::model::TriMesh;

const COLORS: [&str; 6] = ["red", "blue", "green", "white", "black", "yellow"];

#[derive(Debug, Clone)]
pub struct SyntheticAsset {
    pub asset_id: String,
    pub mesh: TriMesh,
    pub fixture: FixtureEntry,
}

fn entry(category: &str, color: &str, material: &str, shape: &str, function: &str, size: f64) -> FixtureEntry {
    FixtureEntry {
        category: category.into(),
        color: color.into(),
        material: material.into(),
        shape: shape.into(),
        function: function.into(),
        longest_axis_m: Some(size),
    }
}

/// Cube with a fan of zero-area triangles attached, 40% of all faces.
fn debris() -> TriMesh {
    let cube = primitives::cuboid(1.0, 1.0, 1.0);
    let mut vertices = cube.vertices().to_vec();
    let mut faces = cube.faces().to_vec();
    for k in 0..8 {
        let base = vertices.len();
        let p = Point3::new(0.6 + 0.01 * k as f64, 0.0, 0.0);
        vertices.extend([p, p, p]);
        faces.push([base, base + 1, base + 2]);
    }
    TriMesh::new(vertices, faces).expect("debris mesh indices are in range")
}

fn one(rng: &mut ChaCha8Rng, index: usize) -> SyntheticAsset {
    let color = *COLORS.choose(rng).expect("non-empty");
    let kind = if index % 10 == 9 { rng.gen_range(5..7) } else { rng.gen_range(0..5) };
    let (name, mesh, fixture) = match kind {
        0 => {
            let (a, b) = (rng.gen_range(0.3..0.5), rng.gen_range(0.3..0.5));
            let material = *["cardboard", "wood", "plastic"].choose(rng).expect("non-empty");
            (
                "box",
                primitives::cuboid(1.0, a, b),
                entry("box", color, material, "rectangular", "storage", rng.gen_range(0.08..0.16)),
            )
        }
        1 => {
            let ratio = rng.gen_range(0.3..0.5);
            let material = *["metal", "plastic"].choose(rng).expect("non-empty");
            (
                "can",
                primitives::cylinder(ratio / 2.0, 1.0, 24),
                entry("can", color, material, "cylindrical", "holding liquid", rng.gen_range(0.08..0.15)),
            )
        }
        2 => (
            "ball",
            primitives::uv_sphere(0.5, 24, 12),
            entry("ball", color, "rubber", "spherical", "play", rng.gen_range(0.035..0.07)),
        ),
        3 => (
            "doorstop",
            primitives::wedge(1.0, 0.5),
            entry("doorstop", color, "rubber", "wedge", "holding doors open", rng.gen_range(0.08..0.12)),
        ),
        4 => (
            "bracket",
            primitives::l_shape(1.0, 0.6, 0.25, 0.25),
            entry("bracket", color, "metal", "l-shaped", "joining parts", rng.gen_range(0.08..0.14)),
        ),
        5 => {
            let cube = primitives::cuboid(0.4, 0.4, 0.4);
            let pair = cube.merged(&primitives::translated(&cube, 1.0, 0.0, 0.0));
            ("pair", pair, entry("block set", color, "wood", "cubic", "stacking", 0.12))
        }
        _ => ("debris", debris(), entry("fragment", color, "plastic", "irregular", "none", 0.1)),
    };
    SyntheticAsset {
        asset_id: format!("{name}_{index:03}"),
        mesh,
        fixture,
    }
}

pub fn synthetic_assets(n: usize, seed: u64) -> Vec<SyntheticAsset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|i| one(&mut rng, i)).collect()
}

/// Writes a synthetic batch into the store and returns the new ids.
pub fn ingest_synthetic(store: &Store, n: usize, seed: u64) -> Result<Vec<String>, PipelineError> {
    let assets = synthetic_assets(n, seed);
    let mut table = store.load_fixtures()?;
    let mut ids = Vec::with_capacity(n);
    for a in assets {
        store.add_source(&a.asset_id, write_obj(&a.mesh).as_bytes())?;
        table.0.insert(a.asset_id.clone(), a.fixture);
        ids.push(a.asset_id);
    }
    store.save_fixtures(&table)?;
    Ok(ids)
}
