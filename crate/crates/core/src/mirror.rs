//! Partial-view completion.
//!
//! The object pose is assumed z-up relative to the table: only a center and
//! the rotation about the plane normal (yaw) are estimated. Yaw comes from
//! sweeping the projected convex hull through [0, pi/2) and minimizing the
//! gap between the hull's bounding-rectangle volume and the cloud's own
//! axis-aligned volume in the rotated frame; since the height term is
//! shared, this reduces to the minimum-area bounding rectangle over the
//! sweep. The cloud is then completed by reflecting every point through
//! the center, which maps visible surface to the occluded side for
//! centrally symmetric objects.
//!
//! A single view only sees the camera-facing side, so the raw point mean
//! is pulled toward the camera by up to half the object depth, and a
//! reflection through it visibly squashes the completion. The default
//! [`CenterMode::BoundingBox`] instead centers the object at the midpoint
//! of the yaw-aligned silhouette rectangle and at half its height above
//! the plane, which is exact for z-up symmetric objects resting on the
//! table; [`CenterMode::ClusterCentroid`] keeps the plain mean.

use crate::cloud::{convex_hull_2d, CloudError, PlaneFrame, PointCloud};
use crate::scene::{Cluster, PlaneModel};
use crate::sq::RigidPose;
use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MirrorError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate cluster: {0}")]
    Degenerate(String),
    #[error(transparent)]
    Cloud(#[from] CloudError),
}

/// Estimated object pose: a center plus yaw about the plane normal.
/// Roll and pitch are zero by the z-up assumption. The center comes from
/// the selected [`CenterMode`]; see its variants for the trade-off.
#[derive(Debug, Clone, Copy)]
pub struct ObjectPoseEstimate {
    pub center: Vector3<f64>,
    /// Yaw in [0, pi/2), measured in the plane basis. The bounding box of
    /// a box-symmetric object repeats every quarter turn, so this range is
    /// canonical.
    pub yaw: f64,
    /// Gap between the rotated bounding-rectangle volume and the cloud's
    /// axis-aligned volume at the chosen yaw; infinite for degenerate hulls.
    pub yaw_residual: f64,
    /// Full rigid pose of the object-local frame in the cloud's frame.
    pub pose: RigidPose,
}

/// Result of completing one cluster.
#[derive(Debug, Clone)]
pub struct CompletedObject {
    pub pose: ObjectPoseEstimate,
    /// Cleaned cluster plus its reflection, exactly twice the cleaned size.
    pub completed: PointCloud,
    /// Cleaned (outlier-removed) cluster the completion was built from.
    pub cleaned: PointCloud,
}

/// How the object center is estimated before mirroring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CenterMode {
    /// Horizontal center from the yaw-aligned bounding rectangle of the
    /// projected silhouette, vertical center at half the height above the
    /// plane. Exact for z-up symmetric objects resting on the table, and
    /// much less view-biased than the raw centroid.
    #[default]
    BoundingBox,
    /// Mean of the visible points. Biased toward the camera for deep
    /// objects (the visible side dominates the average).
    ClusterCentroid,
}

struct YawSweep {
    theta: f64,
    residual: f64,
    /// Midpoint of the bounding rectangle at theta, in plane coordinates.
    rect_center: [f64; 2],
    /// Max height of the cluster above the plane.
    h_max: f64,
}

fn sweep_bounding_rect(
    cluster: &PointCloud,
    frame: &PlaneFrame,
    angle_step: f64,
) -> Result<Option<YawSweep>, MirrorError> {
    if !(angle_step > 0.0) {
        return Err(MirrorError::InvalidParameter(
            "angle_step must be > 0".into(),
        ));
    }
    if cluster.is_empty() {
        return Err(MirrorError::Degenerate("empty cluster".into()));
    }
    let projected: Vec<[f64; 2]> = cluster.points().iter().map(|p| frame.project(p)).collect();
    let hull = match convex_hull_2d(&projected) {
        Ok(h) => h,
        Err(_) => return Ok(None),
    };

    let heights: Vec<f64> = cluster.points().iter().map(|p| frame.height(p)).collect();
    let h_max = heights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let h_min = heights.iter().cloned().fold(f64::INFINITY, f64::min);

    let mut best = (0.0, f64::INFINITY, [0.0, 0.0]);
    let mut theta = 0.0;
    while theta < std::f64::consts::FRAC_PI_2 {
        let (c, s) = (theta.cos(), theta.sin());
        let mut min_u = f64::INFINITY;
        let mut max_u = f64::NEG_INFINITY;
        let mut min_v = f64::INFINITY;
        let mut max_v = f64::NEG_INFINITY;
        for q in &hull {
            // rotate by -theta: coordinates in the candidate object frame
            let u = q[0] * c + q[1] * s;
            let v = -q[0] * s + q[1] * c;
            min_u = min_u.min(u);
            max_u = max_u.max(u);
            min_v = min_v.min(v);
            max_v = max_v.max(v);
        }
        let area = (max_u - min_u) * (max_v - min_v);
        if area < best.1 - 1e-15 {
            let mid_u = 0.5 * (min_u + max_u);
            let mid_v = 0.5 * (min_v + max_v);
            // rotate the rectangle midpoint back into plane coordinates
            best = (theta, area, [mid_u * c - mid_v * s, mid_u * s + mid_v * c]);
        }
        theta += angle_step;
    }

    // Volume gap at the chosen angle: rect volume l*w*h minus the cloud's
    // own AABB volume l*w*(h_max - h_min) in the same rotated frame.
    let residual = best.1 * (h_max - (h_max - h_min));
    Ok(Some(YawSweep {
        theta: best.0,
        residual,
        rect_center: best.2,
        h_max,
    }))
}

/// Sweep yaw angles and return `(yaw, residual)`.
///
/// At each angle the projected hull is rotated into the candidate object
/// frame; the tracked objective is the bounding-rectangle area (the shared
/// height factors out of the volume gap). Ties break toward smaller yaw.
/// A degenerate (collinear) projection yields yaw 0 with infinite residual.
pub fn estimate_yaw(
    cluster: &PointCloud,
    plane: &PlaneModel,
    angle_step: f64,
) -> Result<(f64, f64), MirrorError> {
    match sweep_bounding_rect(cluster, &plane.frame(), angle_step)? {
        Some(sweep) => Ok((sweep.theta, sweep.residual)),
        None => Ok((0.0, f64::INFINITY)),
    }
}

/// Center + yaw pose for a cluster, with the composed rigid pose whose
/// z axis is the plane normal.
pub fn estimate_pose(
    cluster: &PointCloud,
    plane: &PlaneModel,
    angle_step: f64,
    center_mode: CenterMode,
) -> Result<ObjectPoseEstimate, MirrorError> {
    let frame = plane.frame();
    let sweep = sweep_bounding_rect(cluster, &frame, angle_step)?;
    let centroid = cluster.centroid()?;
    let (center, yaw, yaw_residual) = match (&sweep, center_mode) {
        (Some(s), CenterMode::BoundingBox) => (
            frame.unproject(s.rect_center, 0.5 * s.h_max),
            s.theta,
            s.residual,
        ),
        (Some(s), CenterMode::ClusterCentroid) => (centroid, s.theta, s.residual),
        (None, _) => (centroid, 0.0, f64::INFINITY),
    };
    let pose = compose_pose(center, yaw, &frame);
    Ok(ObjectPoseEstimate {
        center,
        yaw,
        yaw_residual,
        pose,
    })
}

/// Build the object-local frame: x at `yaw` within the plane, z along the
/// plane normal.
pub fn compose_pose(center: Vector3<f64>, yaw: f64, frame: &PlaneFrame) -> RigidPose {
    let x_local = frame.u * yaw.cos() + frame.v * yaw.sin();
    let y_local = -frame.u * yaw.sin() + frame.v * yaw.cos();
    let rotation = Matrix3::from_columns(&[x_local, y_local, frame.normal]);
    RigidPose::from_rotation(&rotation, center)
}

/// Complete a cluster by point reflection through `pose.center`.
///
/// Output is the input followed by the reflected copies, so point `i` pairs
/// with point `i + n` and the centroid is preserved.
pub fn mirror_cloud(cluster: &PointCloud, pose: &ObjectPoseEstimate) -> PointCloud {
    let c = pose.center;
    let mut points = Vec::with_capacity(cluster.len() * 2);
    points.extend_from_slice(cluster.points());
    points.extend(cluster.points().iter().map(|p| 2.0 * c - p));
    PointCloud::new(points, cluster.frame_id()).expect("reflection preserves finiteness")
}

/// Per-cluster completion parameters.
#[derive(Debug, Clone, Copy)]
pub struct CompletionParams {
    pub angle_step: f64,
    pub outlier_k: usize,
    pub outlier_m: f64,
    pub center_mode: CenterMode,
}

impl Default for CompletionParams {
    fn default() -> Self {
        CompletionParams {
            angle_step: 1.0_f64.to_radians(),
            outlier_k: 12,
            outlier_m: 2.5,
            center_mode: CenterMode::default(),
        }
    }
}

/// Outlier removal, pose estimation, and mirroring for every cluster, in
/// order. Clusters fail individually without aborting the batch.
pub fn complete_all(
    clusters: &[Cluster],
    plane: &PlaneModel,
    params: &CompletionParams,
) -> Vec<Result<CompletedObject, MirrorError>> {
    clusters
        .iter()
        .map(|cluster| {
            let cleaned = if cluster.cloud.len() > params.outlier_k {
                cluster
                    .cloud
                    .remove_statistical_outliers(params.outlier_k, params.outlier_m)?
            } else {
                cluster.cloud.clone()
            };
            if cleaned.is_empty() {
                return Err(MirrorError::Degenerate(
                    "cluster empty after outlier removal".into(),
                ));
            }
            let pose = estimate_pose(&cleaned, plane, params.angle_step, params.center_mode)?;
            let completed = mirror_cloud(&cleaned, &pose);
            Ok(CompletedObject {
                pose,
                completed,
                cleaned,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Points on the surface of a box with half-extents (hx, hy, hz),
    /// rotated about z by `yaw` and shifted by `center`. Independent of the
    /// superquadric code on purpose.
    fn box_cloud(hx: f64, hy: f64, hz: f64, yaw: f64, center: Vector3<f64>) -> PointCloud {
        let n = 14;
        let mut pts = Vec::new();
        for i in 0..=n {
            for j in 0..=n {
                let a = -1.0 + 2.0 * i as f64 / n as f64;
                let b = -1.0 + 2.0 * j as f64 / n as f64;
                pts.push(Vector3::new(a * hx, b * hy, hz));
                pts.push(Vector3::new(a * hx, b * hy, -hz));
                pts.push(Vector3::new(a * hx, hy, b * hz));
                pts.push(Vector3::new(a * hx, -hy, b * hz));
                pts.push(Vector3::new(hx, a * hy, b * hz));
                pts.push(Vector3::new(-hx, a * hy, b * hz));
            }
        }
        let (c, s) = (yaw.cos(), yaw.sin());
        let rotated: Vec<Vector3<f64>> = pts
            .iter()
            .map(|p| Vector3::new(c * p.x - s * p.y, s * p.x + c * p.y, p.z) + center)
            .collect();
        PointCloud::new(rotated, "camera").unwrap()
    }

    fn z_plane() -> PlaneModel {
        PlaneModel {
            normal: Vector3::z(),
            d: 0.0,
            inliers: vec![],
        }
    }

    #[test]
    fn aligned_box_yaw_is_zero() {
        let cloud = box_cloud(0.06, 0.03, 0.04, 0.0, Vector3::new(0.0, 0.0, 0.1));
        let step = 1.0_f64.to_radians();
        let (yaw, _) = estimate_yaw(&cloud, &z_plane(), step).unwrap();
        assert!(yaw <= step + 1e-12, "expected 0, got {}", yaw.to_degrees());
    }

    #[test]
    fn rotated_box_yaw_recovered() {
        // Brute-force oracle: the same sweep at 0.1 degree resolution.
        let step = 1.0_f64.to_radians();
        let fine = 0.1_f64.to_radians();
        for deg in [10.0, 30.0, 55.0, 80.0] {
            let truth = (deg as f64).to_radians();
            let cloud = box_cloud(0.06, 0.03, 0.04, truth, Vector3::new(0.0, 0.0, 0.1));
            let (coarse, _) = estimate_yaw(&cloud, &z_plane(), step).unwrap();
            let (oracle, _) = estimate_yaw(&cloud, &z_plane(), fine).unwrap();
            let wrap = |x: f64| {
                let m = x.rem_euclid(std::f64::consts::FRAC_PI_2);
                m.min(std::f64::consts::FRAC_PI_2 - m)
            };
            assert!(
                wrap(coarse - truth) <= step + 1e-9,
                "coarse {deg}: got {}",
                coarse.to_degrees()
            );
            assert!(
                wrap(oracle - truth) <= fine + 1e-9,
                "oracle {deg}: got {}",
                oracle.to_degrees()
            );
        }
    }

    #[test]
    fn yaw_invariant_to_translation_and_shifts_with_rotation() {
        let step = 1.0_f64.to_radians();
        let base = box_cloud(0.05, 0.02, 0.03, 0.3, Vector3::new(0.0, 0.0, 0.2));
        let (yaw0, _) = estimate_yaw(&base, &z_plane(), step).unwrap();

        let shifted = box_cloud(0.05, 0.02, 0.03, 0.3, Vector3::new(0.4, -0.7, 0.2));
        let (yaw1, _) = estimate_yaw(&shifted, &z_plane(), step).unwrap();
        assert!((yaw0 - yaw1).abs() < 1e-9, "translation changed yaw");

        let extra = 20.0_f64.to_radians();
        let rotated = box_cloud(0.05, 0.02, 0.03, 0.3 + extra, Vector3::new(0.0, 0.0, 0.2));
        let (yaw2, _) = estimate_yaw(&rotated, &z_plane(), step).unwrap();
        let diff = (yaw2 - yaw0).rem_euclid(std::f64::consts::FRAC_PI_2);
        let diff = diff.min(std::f64::consts::FRAC_PI_2 - diff);
        assert!(
            (diff - extra).abs() <= step + 1e-9,
            "rotation shift: expected {} got {}",
            extra.to_degrees(),
            diff.to_degrees()
        );
    }

    #[test]
    fn degenerate_hull_flags_infinite_residual() {
        let pts: Vec<Vector3<f64>> = (0..20)
            .map(|i| Vector3::new(i as f64 * 0.01, 0.0, 0.05))
            .collect();
        let cloud = PointCloud::new(pts, "camera").unwrap();
        let (yaw, res) = estimate_yaw(&cloud, &z_plane(), 0.01).unwrap();
        assert_eq!(yaw, 0.0);
        assert!(res.is_infinite());
    }

    #[test]
    fn mirror_single_point() {
        let center = Vector3::new(0.2, 0.1, 0.3);
        let cloud = PointCloud::new(vec![center + Vector3::x()], "camera").unwrap();
        let pose = ObjectPoseEstimate {
            center,
            yaw: 0.0,
            yaw_residual: 0.0,
            pose: RigidPose::new(center, 0.0, 0.0, 0.0),
        };
        let mirrored = mirror_cloud(&cloud, &pose);
        assert_eq!(mirrored.len(), 2);
        assert!((mirrored.points()[1] - (center - Vector3::x())).norm() < 1e-15);
    }

    #[test]
    fn mirror_preserves_centroid_and_doubles_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pts: Vec<Vector3<f64>> = (0..333)
            .map(|_| {
                Vector3::new(
                    rng.random_range(-0.1..0.1),
                    rng.random_range(-0.1..0.1),
                    rng.random_range(0.0..0.2),
                )
            })
            .collect();
        let cloud = PointCloud::new(pts, "camera").unwrap();
        let center = cloud.centroid().unwrap();
        let pose = ObjectPoseEstimate {
            center,
            yaw: 0.0,
            yaw_residual: 0.0,
            pose: RigidPose::new(center, 0.0, 0.0, 0.0),
        };
        let mirrored = mirror_cloud(&cloud, &pose);
        assert_eq!(mirrored.len(), 2 * cloud.len());
        assert!((mirrored.centroid().unwrap() - center).norm() < 1e-12);

        // reflection pairing: p_i + p_{i+n} = 2c
        let n = cloud.len();
        for i in 0..n {
            let sum = mirrored.points()[i] + mirrored.points()[i + n];
            assert!((sum - 2.0 * center).norm() < 1e-12);
        }
    }

    #[test]
    fn mirroring_is_involutive() {
        let cloud = box_cloud(0.05, 0.03, 0.02, 0.4, Vector3::new(0.0, 0.0, 0.1));
        let center = cloud.centroid().unwrap();
        let pose = ObjectPoseEstimate {
            center,
            yaw: 0.0,
            yaw_residual: 0.0,
            pose: RigidPose::new(center, 0.0, 0.0, 0.0),
        };
        let once = mirror_cloud(&cloud, &pose);
        let twice = mirror_cloud(&once, &pose);
        for p in twice.points() {
            let found = once.points().iter().any(|q| (p - q).norm() < 1e-12);
            assert!(found, "double mirroring introduced a new point");
        }
    }

    #[test]
    fn complete_all_doubles_each_cleaned_cluster() {
        let mut clusters = Vec::new();
        for (i, c) in [
            Vector3::new(0.0, 0.0, 0.05),
            Vector3::new(0.5, 0.0, 0.05),
            Vector3::new(0.0, 0.5, 0.05),
        ]
        .iter()
        .enumerate()
        {
            clusters.push(Cluster {
                cloud: box_cloud(0.04, 0.03, 0.05, 0.2 * i as f64, *c),
                label: i,
            });
        }
        let results = complete_all(&clusters, &z_plane(), &CompletionParams::default());
        assert_eq!(results.len(), 3);
        for r in results {
            let done = r.unwrap();
            assert_eq!(done.completed.len(), 2 * done.cleaned.len());
        }
    }

    #[test]
    fn complete_all_empty_input() {
        let results = complete_all(&[], &z_plane(), &CompletionParams::default());
        assert!(results.is_empty());
    }

    #[test]
    fn half_view_mirroring_covers_full_angular_range() {
        // Half cylinder (x > 0 only), mirrored through the true center:
        // the completion covers the occluded half.
        let mut pts = Vec::new();
        for i in 0..60 {
            let ang = -std::f64::consts::FRAC_PI_2 + std::f64::consts::PI * i as f64 / 59.0;
            for j in 0..20 {
                let z = 0.1 * j as f64 / 19.0;
                pts.push(Vector3::new(0.04 * ang.cos(), 0.04 * ang.sin(), z));
            }
        }
        let cloud = PointCloud::new(pts, "camera").unwrap();
        let true_center = Vector3::new(0.0, 0.0, 0.05);
        let pose = ObjectPoseEstimate {
            center: true_center,
            yaw: 0.0,
            yaw_residual: 0.0,
            pose: RigidPose::new(true_center, 0.0, 0.0, 0.0),
        };
        let completed = mirror_cloud(&cloud, &pose);
        let has_negative_x = completed.points().iter().any(|p| p.x < -0.03);
        assert!(has_negative_x, "occluded side not reconstructed");
        let min_angle_gap = {
            let mut angles: Vec<f64> = completed.points().iter().map(|p| p.y.atan2(p.x)).collect();
            angles.sort_by(f64::total_cmp);
            let mut max_gap: f64 = 0.0;
            for w in angles.windows(2) {
                max_gap = max_gap.max(w[1] - w[0]);
            }
            max_gap = max_gap.max(angles[0] + std::f64::consts::TAU - angles[angles.len() - 1]);
            max_gap
        };
        assert!(
            min_angle_gap < 0.2,
            "angular coverage has a {min_angle_gap} rad hole"
        );
    }

    /// Keep only points visible from a camera direction: crude front-face
    /// culling for the box generator (normal known per face is overkill;
    /// half-space on the two lit faces is enough for these tests).
    fn partial_view(cloud: &PointCloud, keep: impl Fn(&Vector3<f64>) -> bool) -> PointCloud {
        let pts: Vec<Vector3<f64>> = cloud.points().iter().filter(|p| keep(p)).cloned().collect();
        PointCloud::new(pts, cloud.frame_id()).unwrap()
    }

    #[test]
    fn bounding_center_recovers_true_center_from_partial_view() {
        // Two visible faces of a box (front x+ and top z+): the point mean
        // is pulled toward them, the silhouette rectangle is not.
        let true_center = Vector3::new(0.1, -0.05, 0.06);
        let full = box_cloud(0.05, 0.03, 0.06, 0.0, true_center);
        let visible = partial_view(&full, |p| {
            (p.x - true_center.x) > 0.049 || (p.z - true_center.z) > 0.059
        });
        let pose = estimate_pose(
            &visible,
            &z_plane(),
            1.0_f64.to_radians(),
            CenterMode::BoundingBox,
        )
        .unwrap();
        assert!(
            (pose.center - true_center).norm() < 0.005,
            "bounding center off by {}",
            (pose.center - true_center).norm()
        );
        let centroid_pose = estimate_pose(
            &visible,
            &z_plane(),
            1.0_f64.to_radians(),
            CenterMode::ClusterCentroid,
        )
        .unwrap();
        assert!(
            (centroid_pose.center - true_center).norm() > 0.015,
            "the raw centroid should be visibly biased for this view"
        );
        assert_eq!(centroid_pose.center, visible.centroid().unwrap());
    }

    #[test]
    fn mirrored_aabb_volume_close_to_truth_for_partial_views() {
        // Box, cylinder and ball partial views completed through the
        // bounding-box center: AABB volume within 25% of the full object.
        let cases: Vec<(PointCloud, f64)> = vec![
            {
                let c = Vector3::new(0.0, 0.0, 0.05);
                let yaw: f64 = 0.3;
                let full = box_cloud(0.04, 0.03, 0.05, yaw, c);
                // world-frame AABB of the rotated ground-truth box
                let (cos, sin) = (yaw.cos(), yaw.sin());
                let v = (0.08 * cos + 0.06 * sin) * (0.08 * sin + 0.06 * cos) * 0.10;
                (
                    partial_view(&full, |p| {
                        let l = p - c;
                        cos * l.x + sin * l.y > 0.039 || l.z > 0.049
                    }),
                    v,
                )
            },
            {
                // half cylinder side + top disk
                let mut pts = Vec::new();
                for i in 0..40 {
                    let ang = -std::f64::consts::FRAC_PI_2 + std::f64::consts::PI * i as f64 / 39.0;
                    for j in 0..=20 {
                        let z = 0.12 * j as f64 / 20.0;
                        pts.push(Vector3::new(0.03 * ang.cos(), 0.03 * ang.sin(), z));
                    }
                }
                for i in 0..12 {
                    for j in 0..12 {
                        let x = -0.03 + 0.06 * i as f64 / 11.0;
                        let y = -0.03 + 0.06 * j as f64 / 11.0;
                        if (x * x + y * y).sqrt() <= 0.03 {
                            pts.push(Vector3::new(x, y, 0.12));
                        }
                    }
                }
                (PointCloud::new(pts, "camera").unwrap(), 0.06 * 0.06 * 0.12)
            },
            {
                // upper-front half of a ball resting on the plane
                let sq = crate::sq::Superquadric::new(
                    0.04,
                    0.04,
                    0.04,
                    1.0,
                    1.0,
                    RigidPose::new(Vector3::new(0.0, 0.0, 0.04), 0.0, 0.0, 0.0),
                )
                .unwrap();
                let pts: Vec<Vector3<f64>> = sq
                    .sample_surface(0.005)
                    .unwrap()
                    .iter()
                    .map(|s| sq.pose.to_parent(&s.point))
                    .filter(|p| {
                        let view = Vector3::new(1.0, 0.0, 1.0).normalize();
                        (p - Vector3::new(0.0, 0.0, 0.04)).dot(&view) > 0.0
                    })
                    .collect();
                (PointCloud::new(pts, "camera").unwrap(), 0.08_f64.powi(3))
            },
        ];
        for (i, (view, truth_volume)) in cases.iter().enumerate() {
            let pose = estimate_pose(
                view,
                &z_plane(),
                1.0_f64.to_radians(),
                CenterMode::BoundingBox,
            )
            .unwrap();
            let mirrored = mirror_cloud(view, &pose);
            let vol = mirrored.aabb().unwrap().volume();
            let ratio = vol / truth_volume;
            assert!(
                (0.75..=1.25).contains(&ratio),
                "case {i}: mirrored AABB volume ratio {ratio}"
            );
        }
    }

    #[test]
    fn plane_partition_feeds_clustering() {
        // End-to-end sanity at module scale: plane + two boxes.
        let mut pts = Vec::new();
        for i in 0..40 {
            for j in 0..40 {
                pts.push(Vector3::new(
                    -0.5 + i as f64 * 0.025,
                    -0.5 + j as f64 * 0.025,
                    0.0,
                ));
            }
        }
        let b1 = box_cloud(0.04, 0.03, 0.05, 0.0, Vector3::new(-0.2, 0.0, 0.06));
        let b2 = box_cloud(0.03, 0.03, 0.04, 0.5, Vector3::new(0.25, 0.1, 0.05));
        pts.extend_from_slice(b1.points());
        pts.extend_from_slice(b2.points());
        let cloud = PointCloud::new(pts, "camera").unwrap();
        let plane = scene::fit_table_plane(&cloud, 0.005, 400, 2).unwrap();
        let (_, above, _) = scene::partition_by_plane(&cloud, &plane, 0.005);
        let above_cloud = cloud.select(&above);
        let clusters = scene::cluster_objects(&above_cloud, 0.03, 50).unwrap();
        assert_eq!(clusters.len(), 2);
        let results = complete_all(&clusters, &plane, &CompletionParams::default());
        for r in results {
            assert!(r.is_ok());
        }
    }
}
