use nalgebra::Point3;

use super::GeometryError;
use crate::model::PointCloud;

/// Number of spatially spread candidates offered to point selection.
pub const DEFAULT_FPS_CANDIDATES: usize = 42;

/// Greedy k-center selection under an arbitrary symmetric distance.
///
/// Starts from `seed`; every following pick is the unselected item whose
/// minimum distance to the selected set is largest, lowest index on ties.
/// Returns `min(k, n)` distinct indices in selection order.
pub fn greedy_farthest(n: usize, k: usize, seed: usize, dist: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    if n == 0 || k == 0 {
        return Vec::new();
    }
    let k = k.min(n);
    let mut selected = Vec::with_capacity(k);
    let mut taken = vec![false; n];
    let mut min_dist: Vec<f64> = (0..n).map(|i| dist(seed, i)).collect();
    selected.push(seed);
    taken[seed] = true;

    while selected.len() < k {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..n {
            if taken[i] {
                continue;
            }
            if best.map_or(true, |(_, d)| min_dist[i] > d) {
                best = Some((i, min_dist[i]));
            }
        }
        let (next, _) = best.expect("fewer than n items selected");
        selected.push(next);
        taken[next] = true;
        for i in 0..n {
            if !taken[i] {
                min_dist[i] = min_dist[i].min(dist(next, i));
            }
        }
    }
    selected
}

/// Euclidean farthest point sampling over the cloud.
pub fn farthest_point_sampling(cloud: &PointCloud, k: usize, seed_index: usize) -> Result<Vec<usize>, GeometryError> {
    let n = cloud.len();
    if k == 0 || k > n {
        return Err(GeometryError::Argument(format!("k = {k} must be within 1..={n}")));
    }
    if seed_index >= n {
        return Err(GeometryError::Argument(format!("seed index {seed_index} out of range for {n} points")));
    }
    let pts = cloud.points();
    Ok(greedy_farthest(n, k, seed_index, |a, b| (pts[a] - pts[b]).norm()))
}

/// Index of the point farthest from the centroid, lowest index on ties.
pub fn farthest_from_centroid(points: &[Point3<f64>]) -> Option<usize> {
    let cloud_centroid = {
        let n = points.len();
        if n == 0 {
            return None;
        }
        points.iter().fold(nalgebra::Vector3::zeros(), |acc, p| acc + p.coords) / n as f64
    };
    let mut best = (0, f64::NEG_INFINITY);
    for (i, p) in points.iter().enumerate() {
        let d = (p.coords - cloud_centroid).norm();
        if d > best.1 {
            best = (i, d);
        }
    }
    Some(best.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize) -> PointCloud {
        PointCloud::from_points((0..n).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect()).unwrap()
    }

    #[test]
    fn default_candidate_count() {
        assert_eq!(DEFAULT_FPS_CANDIDATES, 42);
    }

    #[test]
    fn single_pick_is_the_seed() {
        assert_eq!(farthest_point_sampling(&line(11), 1, 4).unwrap(), vec![4]);
    }

    #[test]
    fn collinear_points() {
        // x = 0..10: after 0 comes 10, then 5 (lowest index among the tie at distance 5)
        assert_eq!(farthest_point_sampling(&line(11), 3, 0).unwrap(), vec![0, 10, 5]);
    }

    #[test]
    fn argument_errors() {
        assert!(farthest_point_sampling(&line(3), 4, 0).is_err());
        assert!(farthest_point_sampling(&line(3), 0, 0).is_err());
        assert!(farthest_point_sampling(&line(3), 2, 3).is_err());
    }

    #[test]
    fn duplicates_are_still_distinct_indices() {
        let cloud = PointCloud::from_points(vec![Point3::origin(); 4]).unwrap();
        assert_eq!(farthest_point_sampling(&cloud, 4, 2).unwrap(), vec![2, 0, 1, 3]);
    }

    #[test]
    fn seed_is_farthest_from_centroid() {
        let pts = vec![Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0), Point3::new(5.0, 0.0, 0.0)];
        assert_eq!(farthest_from_centroid(&pts), Some(2));
        assert_eq!(farthest_from_centroid(&[]), None);
    }
}
