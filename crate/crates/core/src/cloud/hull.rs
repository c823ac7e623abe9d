//! Planar projection and 2D convex hull (monotone chain).

use super::{CloudError, PointCloud};
use nalgebra::Vector3;

/// An orthonormal in-plane basis (u, v) plus the plane normal, anchored at
/// a point on the plane. Gives deterministic 2D coordinates for projection.
#[derive(Debug, Clone, Copy)]
pub struct PlaneFrame {
    pub origin: Vector3<f64>,
    pub u: Vector3<f64>,
    pub v: Vector3<f64>,
    pub normal: Vector3<f64>,
}

impl PlaneFrame {
    /// Build a frame for the plane `n . p + d = 0`. The u axis is chosen
    /// from the world axis least aligned with the normal, so the basis is
    /// reproducible for a given plane.
    pub fn from_normal_offset(normal: Vector3<f64>, d: f64) -> PlaneFrame {
        let n = normal.normalize();
        let mut seed = Vector3::zeros();
        let least = (0..3)
            .min_by(|&i, &j| n[i].abs().total_cmp(&n[j].abs()))
            .unwrap();
        seed[least] = 1.0;
        let u = (seed - n * seed.dot(&n)).normalize();
        let v = n.cross(&u);
        PlaneFrame {
            origin: -d * n,
            u,
            v,
            normal: n,
        }
    }

    pub fn project(&self, p: &Vector3<f64>) -> [f64; 2] {
        let rel = p - self.origin;
        [rel.dot(&self.u), rel.dot(&self.v)]
    }

    /// Signed distance of a point above (+) or below (-) the plane.
    pub fn height(&self, p: &Vector3<f64>) -> f64 {
        (p - self.origin).dot(&self.normal)
    }

    /// Lift plane coordinates and height back to 3D.
    pub fn unproject(&self, xy: [f64; 2], height: f64) -> Vector3<f64> {
        self.origin + self.u * xy[0] + self.v * xy[1] + self.normal * height
    }
}

/// Project every point of the cloud onto the plane, in plane coordinates.
pub fn project_to_plane(cloud: &PointCloud, frame: &PlaneFrame) -> Vec<[f64; 2]> {
    cloud.points().iter().map(|p| frame.project(p)).collect()
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Convex hull by monotone chain: counter-clockwise, minimal (collinear
/// points dropped), containing every input point.
pub fn convex_hull_2d(points: &[[f64; 2]]) -> Result<Vec<[f64; 2]>, CloudError> {
    let mut pts: Vec<[f64; 2]> = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return Err(CloudError::Degenerate(
            "convex hull needs at least 3 distinct points".into(),
        ));
    }

    let mut lower: Vec<[f64; 2]> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    if lower.len() < 3 {
        return Err(CloudError::Degenerate("all points are collinear".into()));
    }
    Ok(lower)
}

/// Area of a simple polygon (shoelace, absolute value).
pub fn polygon_area(polygon: &[[f64; 2]]) -> f64 {
    let n = polygon.len();
    let mut acc = 0.0;
    for i in 0..n {
        let [x0, y0] = polygon[i];
        let [x1, y1] = polygon[(i + 1) % n];
        acc += x0 * y1 - x1 * y0;
    }
    (acc / 2.0).abs()
}

/// Whether `p` lies inside or on the CCW hull, up to `tol` on the
/// signed-area test of each edge.
pub fn hull_contains(hull: &[[f64; 2]], p: [f64; 2], tol: f64) -> bool {
    let n = hull.len();
    (0..n).all(|i| cross(hull[i], hull[(i + 1) % n], p) >= -tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unit_square_hull() {
        let pts = vec![
            [0.0, 0.0],
            [1.0, 0.0],
            [1.0, 1.0],
            [0.0, 1.0],
            [0.5, 0.5],
            [0.25, 0.75],
            [0.5, 0.0], // collinear with the bottom edge, must be dropped
        ];
        let hull = convex_hull_2d(&pts).unwrap();
        assert_eq!(hull.len(), 4);
        assert_relative_eq!(polygon_area(&hull), 1.0, max_relative = 1e-12);
        for p in &pts {
            assert!(hull_contains(&hull, *p, 1e-12));
        }
    }

    #[test]
    fn hull_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts: Vec<[f64; 2]> = (0..200)
            .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        let hull = convex_hull_2d(&pts).unwrap();
        let again = convex_hull_2d(&hull).unwrap();
        assert_eq!(hull.len(), again.len());
    }

    #[test]
    fn hull_is_counter_clockwise() {
        let pts = vec![[0.0, 0.0], [2.0, 0.0], [1.0, 1.5], [0.3, 0.2]];
        let hull = convex_hull_2d(&pts).unwrap();
        let mut signed = 0.0;
        for i in 0..hull.len() {
            let [x0, y0] = hull[i];
            let [x1, y1] = hull[(i + 1) % hull.len()];
            signed += x0 * y1 - x1 * y0;
        }
        assert!(signed > 0.0, "hull must be CCW");
    }

    #[test]
    fn disc_sample_hull_area_near_circle_area() {
        // Monte-Carlo oracle: dense disc sample's hull approaches the disc.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = 0.8;
        let pts: Vec<[f64; 2]> = (0..1000)
            .map(|_| {
                let rad: f64 = r * rng.random_range(0.0_f64..1.0).sqrt();
                let ang: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                [rad * ang.cos(), rad * ang.sin()]
            })
            .collect();
        let hull = convex_hull_2d(&pts).unwrap();
        let r_est = pts
            .iter()
            .map(|p| (p[0] * p[0] + p[1] * p[1]).sqrt())
            .fold(0.0, f64::max);
        let expect = std::f64::consts::PI * r_est * r_est;
        assert_relative_eq!(polygon_area(&hull), expect, max_relative = 0.05);
    }

    #[test]
    fn collinear_points_are_degenerate() {
        let pts: Vec<[f64; 2]> = (0..10).map(|i| [i as f64, 2.0 * i as f64]).collect();
        assert!(convex_hull_2d(&pts).is_err());
    }

    #[test]
    fn plane_frame_round_trip() {
        let frame = PlaneFrame::from_normal_offset(Vector3::new(0.1, -0.2, 0.97), 0.3);
        let p = Vector3::new(0.4, 0.5, -0.2);
        let xy = frame.project(&p);
        let h = frame.height(&p);
        let back = frame.unproject(xy, h);
        assert!((back - p).norm() < 1e-12);
        // basis orthonormality
        assert!(frame.u.dot(&frame.v).abs() < 1e-12);
        assert!(frame.u.dot(&frame.normal).abs() < 1e-12);
        assert_relative_eq!(frame.u.norm(), 1.0, max_relative = 1e-12);
    }
}
