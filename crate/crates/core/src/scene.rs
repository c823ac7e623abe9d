//! Tabletop scene decomposition: dominant-plane removal and object
//! clustering.
//!
//! The plane is found by RANSAC over random minimal samples, refined by a
//! least-squares fit on the inliers, and its normal is oriented toward the
//! side holding the off-plane points (the objects), falling back to "up"
//! when there are none. Objects are then single-linkage Euclidean clusters
//! of the above-plane points.

use crate::cloud::{CloudError, PlaneFrame, PointCloud, SpatialGrid};
use nalgebra::Vector3;
use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no dominant plane: best candidate covers {found:.0}% of the cloud, need {need:.0}%")]
    NoPlane { found: f64, need: f64 },
    #[error(transparent)]
    Cloud(#[from] CloudError),
}

/// A fitted plane `n . p + d = 0` with unit normal and its inlier indices.
#[derive(Debug, Clone)]
pub struct PlaneModel {
    pub normal: Vector3<f64>,
    pub d: f64,
    pub inliers: Vec<usize>,
}

impl PlaneModel {
    pub fn signed_distance(&self, p: &Vector3<f64>) -> f64 {
        self.normal.dot(p) + self.d
    }

    pub fn frame(&self) -> PlaneFrame {
        PlaneFrame::from_normal_offset(self.normal, self.d)
    }
}

/// One object hypothesis: a connected cluster of above-plane points.
#[derive(Debug, Clone)]
pub struct Cluster {
    pub cloud: PointCloud,
    pub label: usize,
}

/// Minimum inlier fraction for a candidate plane to count as dominant.
const MIN_INLIER_FRACTION: f64 = 0.30;

/// RANSAC plane fit: the plane with maximal inlier count over `max_iters`
/// random minimal samples, least-squares refined on its inliers.
/// Deterministic for a fixed seed.
pub fn fit_table_plane(
    cloud: &PointCloud,
    dist_thresh: f64,
    max_iters: usize,
    seed: u64,
) -> Result<PlaneModel, SceneError> {
    if cloud.len() < 3 {
        return Err(SceneError::InvalidParameter(
            "plane fit needs at least 3 points".into(),
        ));
    }
    if !(dist_thresh > 0.0) || max_iters == 0 {
        return Err(SceneError::InvalidParameter(
            "dist_thresh must be > 0 and max_iters > 0".into(),
        ));
    }

    let pts = cloud.points();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best_count = 0usize;
    let mut best: Option<(Vector3<f64>, f64)> = None;

    for _ in 0..max_iters {
        let idx = sample_indices(&mut rng, pts.len(), 3);
        let (a, b, c) = (pts[idx.index(0)], pts[idx.index(1)], pts[idx.index(2)]);
        let n = (b - a).cross(&(c - a));
        let norm = n.norm();
        if norm < 1e-12 {
            continue; // collinear sample
        }
        let n = n / norm;
        let d = -n.dot(&a);
        let count = pts
            .iter()
            .filter(|p| (n.dot(p) + d).abs() <= dist_thresh)
            .count();
        if count > best_count {
            best_count = count;
            best = Some((n, d));
        }
    }

    let need = MIN_INLIER_FRACTION * pts.len() as f64;
    let (n0, d0) = best.ok_or(SceneError::NoPlane {
        found: 0.0,
        need: 100.0 * MIN_INLIER_FRACTION,
    })?;
    if (best_count as f64) < need {
        return Err(SceneError::NoPlane {
            found: 100.0 * best_count as f64 / pts.len() as f64,
            need: 100.0 * MIN_INLIER_FRACTION,
        });
    }

    // Least-squares refinement: plane through the inlier centroid, normal =
    // smallest covariance eigenvector. Then recompute the inlier set once.
    let inlier_idx: Vec<usize> = (0..pts.len())
        .filter(|&i| (n0.dot(&pts[i]) + d0).abs() <= dist_thresh)
        .collect();
    let inlier_cloud = cloud.select(&inlier_idx);
    let pairs = inlier_cloud.covariance_eigenpairs()?;
    let mut normal = pairs[2].1.normalize();
    let centroid = inlier_cloud.centroid()?;
    let mut d = -normal.dot(&centroid);

    let inliers: Vec<usize> = (0..pts.len())
        .filter(|&i| (normal.dot(&pts[i]) + d).abs() <= dist_thresh)
        .collect();

    // Orient the normal toward the object side: the majority of clearly
    // off-plane points. With nothing off the plane, point it "up".
    let mut above = 0i64;
    for p in pts {
        let s = normal.dot(p) + d;
        if s > dist_thresh {
            above += 1;
        } else if s < -dist_thresh {
            above -= 1;
        }
    }
    let flip = if above != 0 {
        above < 0
    } else {
        normal.z < 0.0 || (normal.z == 0.0 && normal.x + normal.y < 0.0)
    };
    if flip {
        normal = -normal;
        d = -d;
    }

    Ok(PlaneModel { normal, d, inliers })
}

/// Split a cloud by the plane: (inliers, above, below), where "above" is
/// the positive normal side beyond `dist_thresh`.
pub fn partition_by_plane(
    cloud: &PointCloud,
    plane: &PlaneModel,
    dist_thresh: f64,
) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let mut on = Vec::new();
    let mut above = Vec::new();
    let mut below = Vec::new();
    for (i, p) in cloud.points().iter().enumerate() {
        let s = plane.signed_distance(p);
        if s.abs() <= dist_thresh {
            on.push(i);
        } else if s > 0.0 {
            above.push(i);
        } else {
            below.push(i);
        }
    }
    (on, above, below)
}

/// Single-linkage Euclidean clustering: connected components of the
/// "distance <= cluster_dist" graph, keeping components with at least
/// `min_size` points, sorted by size descending (ties by first index).
pub fn cluster_objects(
    cloud: &PointCloud,
    cluster_dist: f64,
    min_size: usize,
) -> Result<Vec<Cluster>, SceneError> {
    if !(cluster_dist > 0.0) {
        return Err(SceneError::InvalidParameter(
            "cluster_dist must be > 0".into(),
        ));
    }
    let pts = cloud.points();
    let grid = SpatialGrid::build(pts, cluster_dist);
    let mut component = vec![usize::MAX; pts.len()];
    let mut components: Vec<Vec<usize>> = Vec::new();

    for start in 0..pts.len() {
        if component[start] != usize::MAX {
            continue;
        }
        let id = components.len();
        let mut members = Vec::new();
        let mut stack = vec![start];
        component[start] = id;
        while let Some(i) = stack.pop() {
            members.push(i);
            for j in grid.within_radius(&pts[i], cluster_dist) {
                if component[j] == usize::MAX {
                    component[j] = id;
                    stack.push(j);
                }
            }
        }
        members.sort_unstable();
        components.push(members);
    }

    components.retain(|m| m.len() >= min_size);
    components.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    Ok(components
        .into_iter()
        .enumerate()
        .map(|(label, members)| Cluster {
            cloud: cloud.select(&members),
            label,
        })
        .collect())
}
