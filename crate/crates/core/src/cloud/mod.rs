//! Point-cloud value type, rigid transforms, statistics, outlier removal,
//! and planar projection/convex hull. File I/O lives in [`pcd`].

mod hull;
mod knn;
mod pcd;

pub use hull::{convex_hull_2d, hull_contains, polygon_area, project_to_plane, PlaneFrame};
pub use knn::SpatialGrid;
pub use pcd::{load_pcd, save_pcd, PcdLoad};

use nalgebra::{Matrix3, Matrix4, Vector3};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CloudError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("PCD parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("empty point cloud")]
    Empty,
    #[error("non-finite coordinate at point {0}")]
    NonFinite(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

/// An unordered list of 3D points (meters) in a named frame.
///
/// Clouds are immutable after construction; every operation returns a new
/// cloud. All coordinates are guaranteed finite.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Vector3<f64>>,
    frame_id: String,
}

impl PointCloud {
    pub fn new(points: Vec<Vector3<f64>>, frame_id: impl Into<String>) -> Result<Self, CloudError> {
        for (i, p) in points.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                return Err(CloudError::NonFinite(i));
            }
        }
        Ok(PointCloud {
            points,
            frame_id: frame_id.into(),
        })
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    pub fn frame_id(&self) -> &str {
        &self.frame_id
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Subset of the cloud by point indices (indices must be in range).
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            frame_id: self.frame_id.clone(),
        }
    }

    /// Apply a rigid transform `p -> R p + t` and relabel the frame.
    ///
    /// The upper-left 3x3 block must be orthonormal with determinant +1;
    /// anything else is rejected.
    pub fn transform(
        &self,
        t: &Matrix4<f64>,
        target_frame: impl Into<String>,
    ) -> Result<PointCloud, CloudError> {
        let r = t.fixed_view::<3, 3>(0, 0).into_owned();
        let ortho_err = (r.transpose() * r - Matrix3::identity()).norm();
        if ortho_err > 1e-7 || (r.determinant() - 1.0).abs() > 1e-7 {
            return Err(CloudError::InvalidParameter(format!(
                "transform is not rigid (orthonormality residual {ortho_err:.2e})"
            )));
        }
        let offset = t.fixed_view::<3, 1>(0, 3).into_owned();
        Ok(PointCloud {
            points: self.points.iter().map(|p| r * p + offset).collect(),
            frame_id: target_frame.into(),
        })
    }

    /// Arithmetic mean of the points.
    pub fn centroid(&self) -> Result<Vector3<f64>, CloudError> {
        if self.points.is_empty() {
            return Err(CloudError::Empty);
        }
        let sum: Vector3<f64> = self.points.iter().sum();
        Ok(sum / self.points.len() as f64)
    }

    pub fn aabb(&self) -> Result<Aabb, CloudError> {
        if self.points.is_empty() {
            return Err(CloudError::Empty);
        }
        let mut min = self.points[0];
        let mut max = self.points[0];
        for p in &self.points {
            min = min.inf(p);
            max = max.sup(p);
        }
        Ok(Aabb { min, max })
    }

    /// Sample covariance (divisor n-1) of the points.
    pub fn covariance(&self) -> Result<Matrix3<f64>, CloudError> {
        if self.points.len() < 2 {
            return Err(CloudError::Degenerate(
                "covariance needs at least 2 points".into(),
            ));
        }
        let c = self.centroid()?;
        let mut cov = Matrix3::zeros();
        for p in &self.points {
            let d = p - c;
            cov += d * d.transpose();
        }
        Ok(cov / (self.points.len() as f64 - 1.0))
    }

    /// Eigenvalues of the sample covariance, sorted descending and clamped
    /// to be non-negative. Rank-deficient clouds simply return (near-)zero
    /// trailing eigenvalues; the caller decides how to floor them.
    pub fn covariance_eigenvalues(&self) -> Result<[f64; 3], CloudError> {
        let cov = self.covariance()?;
        let eig = nalgebra::SymmetricEigen::new(cov);
        let mut vals = [eig.eigenvalues[0], eig.eigenvalues[1], eig.eigenvalues[2]];
        vals.sort_by(|a, b| b.total_cmp(a));
        Ok(vals.map(|v| v.max(0.0)))
    }

    /// Eigen decomposition of the sample covariance: (eigenvalue, eigenvector)
    /// pairs sorted by descending eigenvalue.
    pub fn covariance_eigenpairs(&self) -> Result<[(f64, Vector3<f64>); 3], CloudError> {
        let cov = self.covariance()?;
        let eig = nalgebra::SymmetricEigen::new(cov);
        let mut pairs: Vec<(f64, Vector3<f64>)> = (0..3)
            .map(|i| (eig.eigenvalues[i], eig.eigenvectors.column(i).into_owned()))
            .collect();
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        Ok([pairs[0], pairs[1], pairs[2]])
    }

    /// Remove points whose mean distance to their `k` nearest neighbors
    /// exceeds mean + `m` * std-dev of that statistic over the cloud.
    ///
    /// Deterministic; the output preserves input order and is always a
    /// subset of the input.
    pub fn remove_statistical_outliers(&self, k: usize, m: f64) -> Result<PointCloud, CloudError> {
        if k == 0 {
            return Err(CloudError::InvalidParameter("k must be positive".into()));
        }
        if k >= self.points.len() {
            return Err(CloudError::InvalidParameter(format!(
                "k = {k} must be smaller than the cloud size {}",
                self.points.len()
            )));
        }
        let grid = SpatialGrid::build(&self.points, SpatialGrid::heuristic_cell(&self.points));
        let mean_dists: Vec<f64> = (0..self.points.len())
            .map(|i| {
                let nn = grid.k_nearest(i, k);
                nn.iter().map(|(d, _)| d).sum::<f64>() / nn.len() as f64
            })
            .collect();
        let n = mean_dists.len() as f64;
        let mu = mean_dists.iter().sum::<f64>() / n;
        let var = mean_dists.iter().map(|d| (d - mu).powi(2)).sum::<f64>() / (n - 1.0);
        let threshold = mu + m * var.sqrt();
        let points: Vec<Vector3<f64>> = self
            .points
            .iter()
            .zip(&mean_dists)
            .filter(|(_, &d)| d <= threshold)
            .map(|(p, _)| *p)
            .collect();
        Ok(PointCloud {
            points,
            frame_id: self.frame_id.clone(),
        })
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl Aabb {
    pub fn extents(&self) -> Vector3<f64> {
        self.max - self.min
    }

    pub fn volume(&self) -> f64 {
        let e = self.extents();
        e.x * e.y * e.z
    }

    pub fn overlaps(&self, other: &Aabb) -> bool {
        (0..3).all(|i| self.min[i] <= other.max[i] && other.min[i] <= self.max[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(points: Vec<Vector3<f64>>) -> PointCloud {
        PointCloud::new(points, "camera").unwrap()
    }

    #[test]
    fn rejects_non_finite_points() {
        let err = PointCloud::new(vec![Vector3::new(0.0, f64::NAN, 0.0)], "camera");
        assert!(matches!(err, Err(CloudError::NonFinite(0))));
    }

    #[test]
    fn identity_transform_is_noop() {
        let c = cloud(vec![Vector3::new(0.1, 0.2, 0.3)]);
        let out = c.transform(&Matrix4::identity(), "camera").unwrap();
        assert_eq!(out.points(), c.points());
    }

    #[test]
    fn pure_translation_moves_origin() {
        let c = cloud(vec![Vector3::zeros()]);
        let mut t = Matrix4::identity();
        t.fixed_view_mut::<3, 1>(0, 3)
            .copy_from(&Vector3::new(1.0, 2.0, 3.0));
        let out = c.transform(&t, "world").unwrap();
        assert_eq!(out.points()[0], Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(out.frame_id(), "world");
    }

    #[test]
    fn inverse_composition_recovers_cloud() {
        use crate::sq::RigidPose;
        let pose = RigidPose::new(Vector3::new(0.3, -0.1, 0.8), 0.4, 0.2, -1.1);
        let t = pose.homogeneous();
        let t_inv = t.try_inverse().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = cloud(
            (0..200)
                .map(|_| {
                    Vector3::new(
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                    )
                })
                .collect(),
        );
        let round = c
            .transform(&t, "world")
            .unwrap()
            .transform(&t_inv, "camera")
            .unwrap();
        for (a, b) in c.points().iter().zip(round.points()) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn transforms_preserve_pairwise_distances_and_centroid() {
        use crate::sq::RigidPose;
        let pose = RigidPose::new(Vector3::new(1.0, 2.0, -0.5), -0.3, 0.7, 2.0);
        let t = pose.homogeneous();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let c = cloud(
            (0..100)
                .map(|_| {
                    Vector3::new(
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                    )
                })
                .collect(),
        );
        let out = c.transform(&t, "world").unwrap();
        for i in (0..100).step_by(13) {
            for j in (1..100).step_by(17) {
                let d0 = (c.points()[i] - c.points()[j]).norm();
                let d1 = (out.points()[i] - out.points()[j]).norm();
                assert!((d0 - d1).abs() < 1e-9);
            }
        }
        let expected = pose.to_parent(&c.centroid().unwrap());
        assert!((out.centroid().unwrap() - expected).norm() < 1e-9);
    }

    #[test]
    fn non_rigid_transform_rejected() {
        let c = cloud(vec![Vector3::zeros()]);
        let mut t = Matrix4::identity();
        t[(0, 0)] = 2.0; // scaling
        assert!(c.transform(&t, "world").is_err());
        let mut refl = Matrix4::identity();
        refl[(0, 0)] = -1.0; // reflection, det -1
        assert!(c.transform(&refl, "world").is_err());
    }

    #[test]
    fn centroid_of_two_points() {
        let c = cloud(vec![Vector3::zeros(), Vector3::new(2.0, 0.0, 0.0)]);
        assert_eq!(c.centroid().unwrap(), Vector3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn centroid_invariant_under_point_reflection() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<Vector3<f64>> = (0..50)
            .map(|_| {
                Vector3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                )
            })
            .collect();
        let c0 = cloud(pts.clone()).centroid().unwrap();
        let mut doubled = pts.clone();
        doubled.extend(pts.iter().map(|p| 2.0 * c0 - p));
        let c1 = cloud(doubled).centroid().unwrap();
        assert!((c1 - c0).norm() < 1e-12);
    }

    #[test]
    fn centroid_of_uniform_sphere_sample_is_origin() {
        // Monte-Carlo oracle: 10k isotropic unit directions per run,
        // averaged over a few seeds so the check is not a coin flip
        // (the per-run expectation of |centroid| is ~0.009).
        let mut norms = Vec::new();
        for seed in 0..4 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<Vector3<f64>> = (0..10_000)
                .map(|_| {
                    let v = Vector3::new(
                        rng.sample::<f64, _>(rand_distr::StandardNormal),
                        rng.sample::<f64, _>(rand_distr::StandardNormal),
                        rng.sample::<f64, _>(rand_distr::StandardNormal),
                    );
                    v.normalize()
                })
                .collect();
            norms.push(cloud(pts).centroid().unwrap().norm());
        }
        let mean = norms.iter().sum::<f64>() / norms.len() as f64;
        assert!(mean < 0.01, "mean centroid norm {mean}");
    }

    #[test]
    fn empty_centroid_is_error() {
        let c = cloud(vec![]);
        assert!(matches!(c.centroid(), Err(CloudError::Empty)));
    }

    #[test]
    fn gross_outlier_removed_box_kept() {
        let mut pts = Vec::new();
        for i in 0..6 {
            for j in 0..6 {
                for l in 0..6 {
                    pts.push(Vector3::new(i as f64 * 0.1, j as f64 * 0.1, l as f64 * 0.1));
                }
            }
        }
        let n_box = pts.len();
        pts.push(Vector3::new(100.0, 100.0, 100.0));
        let c = cloud(pts);
        let out = c.remove_statistical_outliers(8, 1.0).unwrap();
        assert_eq!(out.len(), n_box);
        assert!(out.points().iter().all(|p| p.norm() < 10.0));
    }

    #[test]
    fn equidistant_simplex_has_no_removals() {
        // Regular tetrahedron: every pairwise distance equal, so the
        // per-point statistic has zero spread.
        let pts = vec![
            Vector3::new(1.0, 1.0, 1.0),
            Vector3::new(1.0, -1.0, -1.0),
            Vector3::new(-1.0, 1.0, -1.0),
            Vector3::new(-1.0, -1.0, 1.0),
        ];
        let c = cloud(pts);
        let out = c.remove_statistical_outliers(3, 1.0).unwrap();
        assert_eq!(out.len(), 4);
    }

    #[test]
    fn outlier_removal_is_subset_and_deterministic() {
        let mut pts = Vec::new();
        for i in 0..12 {
            for j in 0..12 {
                pts.push(Vector3::new(i as f64 * 0.01, j as f64 * 0.01, 0.0));
            }
        }
        pts.push(Vector3::new(0.05, 0.05, 0.5));
        pts.push(Vector3::new(-0.4, 0.0, 0.1));
        pts.push(Vector3::new(0.3, 0.3, -0.3));
        let c = cloud(pts);
        let once = c.remove_statistical_outliers(8, 1.0).unwrap();
        for p in once.points() {
            assert!(c.points().contains(p));
        }
        assert_eq!(once.len(), 144, "strays must be removed");
        let again = c.remove_statistical_outliers(8, 1.0).unwrap();
        assert_eq!(once.points(), again.points());
    }

    #[test]
    fn outlier_removal_fixed_point_when_statistic_is_flat() {
        // A zero-spread neighbor statistic is the case where re-running is
        // a no-op: the regular simplex below, and any cloud the threshold
        // already clears.
        let pts = vec![
            Vector3::new(1.0, 1.0, 1.0),
            Vector3::new(1.0, -1.0, -1.0),
            Vector3::new(-1.0, 1.0, -1.0),
            Vector3::new(-1.0, -1.0, 1.0),
        ];
        let c = cloud(pts);
        let once = c.remove_statistical_outliers(3, 1.0).unwrap();
        let twice = once.remove_statistical_outliers(3, 1.0).unwrap();
        assert_eq!(once.points(), c.points());
        assert_eq!(twice.points(), once.points());
    }

    #[test]
    fn contaminated_sq_sample_mostly_cleaned() {
        use crate::sq::{RigidPose, Superquadric};
        let sq = Superquadric::new(0.05, 0.05, 0.1, 1.0, 1.0, RigidPose::identity()).unwrap();
        let mut pts: Vec<Vector3<f64>> = sq
            .sample_surface(0.005)
            .unwrap()
            .iter()
            .map(|s| s.point)
            .collect();
        let n_clean = pts.len();
        let n_noise = n_clean / 20; // 5% contamination
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..n_noise {
            pts.push(Vector3::new(
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
                rng.random_range(0.15..0.6),
            ));
        }
        let c = cloud(pts);
        let out = c.remove_statistical_outliers(30, 1.0).unwrap();
        let survivors = out
            .points()
            .iter()
            .filter(|p| p.z > 0.14 || p.norm() > 0.14)
            .count();
        assert!(
            survivors as f64 <= 0.1 * n_noise as f64,
            "{survivors} of {n_noise} injected outliers survived"
        );
    }

    #[test]
    fn k_out_of_range_is_error() {
        let c = cloud(vec![Vector3::zeros(), Vector3::new(1.0, 0.0, 0.0)]);
        assert!(c.remove_statistical_outliers(2, 1.0).is_err());
    }

    #[test]
    fn collinear_points_have_rank_one_covariance() {
        let pts: Vec<Vector3<f64>> = (0..20)
            .map(|i| Vector3::new(i as f64, 2.0 * i as f64, 0.0))
            .collect();
        let vals = cloud(pts).covariance_eigenvalues().unwrap();
        assert!(vals[0] > 1.0);
        assert!(vals[1].abs() < 1e-9);
        assert!(vals[2].abs() < 1e-9);
    }

    #[test]
    fn isotropic_gaussian_eigenvalues_near_unit() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let pts: Vec<Vector3<f64>> = (0..10_000)
            .map(|_| {
                Vector3::new(
                    rng.sample::<f64, _>(rand_distr::StandardNormal),
                    rng.sample::<f64, _>(rand_distr::StandardNormal),
                    rng.sample::<f64, _>(rand_distr::StandardNormal),
                )
            })
            .collect();
        let vals = cloud(pts).covariance_eigenvalues().unwrap();
        for v in vals {
            assert_relative_eq!(v, 1.0, max_relative = 0.05);
        }
    }

    #[test]
    fn scaled_box_eigenvalue_ratios() {
        // Uniform box scaled by (2, 1, 0.5): variances scale as squares.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let pts: Vec<Vector3<f64>> = (0..20_000)
            .map(|_| {
                Vector3::new(
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-0.5..0.5),
                )
            })
            .collect();
        let vals = cloud(pts).covariance_eigenvalues().unwrap();
        assert_relative_eq!(vals[0] / vals[1], 4.0, max_relative = 0.1);
        assert_relative_eq!(vals[2] / vals[1], 0.25, max_relative = 0.1);
    }
}
