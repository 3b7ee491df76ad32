mod common;

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{check_pair, vqa_pool, vqa_scenes as scenes, VqaCheck};
use twinkit::layout::SceneLayout;
use twinkit::model::AssetRecord;
use twinkit::vqa::{generate_vqa, VqaCategory, VqaPair};

fn all_pairs(pool: &[AssetRecord], layouts: &[SceneLayout]) -> Vec<(usize, VqaPair)> {
    layouts
        .iter()
        .enumerate()
        .flat_map(|(i, l)| generate_vqa(l, pool, 8, i as u64).unwrap().into_iter().map(move |p| (i, p)))
        .collect()
}

#[test]
fn every_pair_survives_geometric_recheck() {
    let pool = vqa_pool(&mut ChaCha8Rng::seed_from_u64(9), 24);
    let layouts = scenes(&pool, 9);
    let pairs = all_pairs(&pool, &layouts);
    let mut check = VqaCheck::default();
    let mut categories = BTreeSet::new();
    for (i, p) in &pairs {
        check_pair(p, &layouts[*i], &pool, &mut check);
        categories.insert(p.category);
    }
    assert!(check.failures.is_empty(), "{} of {} failed:\n{}", check.failures.len(), check.checked, check.failures.join("\n"));
    assert_eq!(categories.len(), VqaCategory::ALL.len());
    assert!(check.checked > 1000, "{} pairs", check.checked);
    // both answers occur for the yes/no templates
    for cat in [VqaCategory::FunctionalPlanning, VqaCategory::TaskPlanning] {
        let answers: BTreeSet<bool> = pairs
            .iter()
            .filter(|(_, p)| p.category == cat)
            .map(|(_, p)| p.answer.starts_with("yes"))
            .collect();
        assert_eq!(answers.len(), 2, "{cat:?} answers all alike");
    }
}

#[test]
fn generation_is_deterministic_per_seed() {
    let pool = vqa_pool(&mut ChaCha8Rng::seed_from_u64(3), 12);
    let layouts = scenes(&pool, 3);
    for l in layouts.iter().take(10) {
        let a = generate_vqa(l, &pool, 5, 77).unwrap();
        assert_eq!(a, generate_vqa(l, &pool, 5, 77).unwrap());
        assert!(a.len() <= 5 * VqaCategory::ALL.len());
    }
}

#[test]
fn oracle_rejects_tampered_answers() {
    let pool = vqa_pool(&mut ChaCha8Rng::seed_from_u64(4), 12);
    let layouts = scenes(&pool, 4);
    let pairs = all_pairs(&pool, &layouts[..5]);
    for (i, p) in pairs.iter().take(40) {
        let mut bad = p.clone();
        bad.answer.push_str(" (edited)");
        let mut check = VqaCheck::default();
        check_pair(&bad, &layouts[*i], &pool, &mut check);
        assert!(!check.failures.is_empty(), "tampered answer accepted: {}", bad.question);
    }
}

#[test]
fn unknown_scene_object_is_an_error() {
    let pool = vqa_pool(&mut ChaCha8Rng::seed_from_u64(5), 6);
    let mut layouts = scenes(&pool, 5);
    layouts[0].placements[0].asset_id = "ghost".into();
    assert!(generate_vqa(&layouts[0], &pool, 5, 0).is_err());
}
