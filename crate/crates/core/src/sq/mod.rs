//! Superquadric geometry kernel.
//!
//! Everything in this module is closed-form geometry on superellipsoids:
//! implicit/parametric evaluation, uniform-arclength surface sampling,
//! and planar cross-section curvature/normals. No dependence on sensing,
//! fitting, or grasping.
//!
//! A superellipsoid in its local frame is the surface
//!
//! ```text
//! ( |x/a1|^(2/e2) + |y/a2|^(2/e2) )^(e2/e1) + |z/a3|^(2/e1) = 1
//! ```
//!
//! parametrized by latitude `eta` in [-pi/2, pi/2] and longitude `omega`
//! in [-pi, pi] through the spherical product of two superellipses.
//! Powers of cosines/sines use the signed convention `sgn(u)|u|^e` so the
//! parametrization covers all octants.

mod sampling;

use nalgebra::{Matrix3, Matrix4, Rotation3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use sampling::SurfaceSample;

#[derive(Debug, Error)]
pub enum GeomError {
    #[error("non-finite input in {0}")]
    NonFinite(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("cross-section evaluation at a parametrization singularity (eta={eta}, eps={eps})")]
    Singularity { eta: f64, eps: f64 },
}

/// Signed power: `sgn(u) * |u|^e`, with `spow(0, e) = 0`.
///
/// The plain power of the parametric equation is undefined for negative
/// bases and fractional exponents; the signed form is the standard
/// completion that reproduces all four quadrants of a superellipse.
#[inline]
pub fn spow(u: f64, e: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else {
        u.signum() * u.abs().powf(e)
    }
}

/// Snap floating-point `sin`/`cos` residue (e.g. `cos(pi/2) ~ 6e-17`) to
/// exact zero so axis intercepts and poles come out exact.
#[inline]
fn snap(u: f64) -> f64 {
    if u.abs() < 1e-12 {
        0.0
    } else {
        u
    }
}

// ---------------------------------------------------------------------------
// Rigid pose
// ---------------------------------------------------------------------------

/// A rigid motion given as a position and roll-pitch-yaw angles.
///
/// Convention (used everywhere in this crate): roll about the fixed world
/// x axis, then pitch about world y, then yaw about world z, i.e.
/// `R = Rz(yaw) * Ry(pitch) * Rx(roll)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidPose {
    pub position: Vector3<f64>,
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl Default for RigidPose {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidPose {
    pub fn identity() -> Self {
        RigidPose {
            position: Vector3::zeros(),
            roll: 0.0,
            pitch: 0.0,
            yaw: 0.0,
        }
    }

    pub fn new(position: Vector3<f64>, roll: f64, pitch: f64, yaw: f64) -> Self {
        RigidPose {
            position,
            roll,
            pitch,
            yaw,
        }
    }

    /// Derived 3x3 rotation matrix (orthonormal, det +1).
    pub fn rotation(&self) -> Matrix3<f64> {
        *Rotation3::from_euler_angles(self.roll, self.pitch, self.yaw).matrix()
    }

    /// Derived 4x4 homogeneous transform mapping local coordinates to the
    /// parent frame.
    pub fn homogeneous(&self) -> Matrix4<f64> {
        let mut t = Matrix4::identity();
        t.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation());
        t.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.position);
        t
    }

    /// Recover a pose from a rotation matrix and translation. Away from the
    /// pitch singularity (|pitch| near pi/2) this inverts [`Self::rotation`].
    pub fn from_rotation(rotation: &Matrix3<f64>, position: Vector3<f64>) -> Self {
        let rot = Rotation3::from_matrix_unchecked(*rotation);
        let (roll, pitch, yaw) = rot.euler_angles();
        RigidPose {
            position,
            roll,
            pitch,
            yaw,
        }
    }

    /// Map a point from the local frame to the parent frame.
    pub fn to_parent(&self, p_local: &Vector3<f64>) -> Vector3<f64> {
        self.rotation() * p_local + self.position
    }

    /// Map a point from the parent frame into the local frame.
    pub fn to_local(&self, p_parent: &Vector3<f64>) -> Vector3<f64> {
        self.rotation().transpose() * (p_parent - self.position)
    }
}

// ---------------------------------------------------------------------------
// Superquadric
// ---------------------------------------------------------------------------

/// An 11-parameter superellipsoid: three semi-axes, two shape exponents,
/// and a 6-DoF pose.
///
/// The fitter constrains the exponents to [0.1, 1.9]; the type itself
/// accepts any positive exponent so that concave cross-sections
/// (`eps >= 2`) can be analyzed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Superquadric {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub pose: RigidPose,
}

/// Selects one of the three principal cross-sections through the center.
///
/// `Xz` and `Yz` are governed by `eps1` (latitude exponent), `Xy` by
/// `eps2` (longitude exponent).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrincipalPlane {
    /// x-z section at omega = 0: superellipse (a1, a3, eps1).
    Xz,
    /// y-z section at omega = pi/2: superellipse (a2, a3, eps1).
    Yz,
    /// x-y section at eta = 0: superellipse (a1, a2, eps2).
    Xy,
}

impl Superquadric {
    pub fn new(
        a1: f64,
        a2: f64,
        a3: f64,
        eps1: f64,
        eps2: f64,
        pose: RigidPose,
    ) -> Result<Self, GeomError> {
        for (name, v) in [
            ("a1", a1),
            ("a2", a2),
            ("a3", a3),
            ("eps1", eps1),
            ("eps2", eps2),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(GeomError::InvalidParameter(format!(
                    "{name} must be finite and > 0, got {v}"
                )));
            }
        }
        Ok(Superquadric {
            a1,
            a2,
            a3,
            eps1,
            eps2,
            pose,
        })
    }

    pub fn semi_axes(&self) -> [f64; 3] {
        [self.a1, self.a2, self.a3]
    }

    pub fn min_semi_axis(&self) -> f64 {
        self.a1.min(self.a2).min(self.a3)
    }

    /// The superellipse (planar semi-axes and exponent) of a principal
    /// cross-section.
    pub fn section(&self, plane: PrincipalPlane) -> (f64, f64, f64) {
        match plane {
            PrincipalPlane::Xz => (self.a1, self.a3, self.eps1),
            PrincipalPlane::Yz => (self.a2, self.a3, self.eps1),
            PrincipalPlane::Xy => (self.a1, self.a2, self.eps2),
        }
    }

    /// Implicit inside-outside function in the local frame.
    ///
    /// Returns `f < 1` strictly inside, `f = 1` on the surface and `f > 1`
    /// outside.
    pub fn implicit_value(&self, p_local: &Vector3<f64>) -> Result<f64, GeomError> {
        if !p_local.iter().all(|c| c.is_finite()) {
            return Err(GeomError::NonFinite("implicit_value"));
        }
        let xy = (p_local.x / self.a1).abs().powf(2.0 / self.eps2)
            + (p_local.y / self.a2).abs().powf(2.0 / self.eps2);
        Ok(xy.powf(self.eps2 / self.eps1) + (p_local.z / self.a3).abs().powf(2.0 / self.eps1))
    }

    /// Surface point at latitude `eta` and longitude `omega`, local frame.
    pub fn parametric_point(&self, eta: f64, omega: f64) -> Result<Vector3<f64>, GeomError> {
        if !eta.is_finite() || !omega.is_finite() {
            return Err(GeomError::NonFinite("parametric_point"));
        }
        let ce = snap(eta.cos());
        let se = snap(eta.sin());
        let co = snap(omega.cos());
        let so = snap(omega.sin());
        let lat = spow(ce, self.eps1);
        Ok(Vector3::new(
            self.a1 * lat * spow(co, self.eps2),
            self.a2 * lat * spow(so, self.eps2),
            self.a3 * spow(se, self.eps1),
        ))
    }

    /// Scale factor `s` such that `s * v` lies on the surface, for any
    /// nonzero local direction `v`. Uses the identity
    /// `f(t*v) = t^(2/eps1) * f(v)`, so `s = f(v)^(-eps1/2)`.
    pub fn ray_scale_to_surface(&self, v_local: &Vector3<f64>) -> Result<f64, GeomError> {
        let f = self.implicit_value(v_local)?;
        if f <= 0.0 {
            return Err(GeomError::InvalidParameter(
                "ray_scale_to_surface needs a nonzero direction".into(),
            ));
        }
        Ok(f.powf(-self.eps1 / 2.0))
    }

    /// Gradient of the implicit function by central finite differences
    /// (step `1e-6 * min semi-axis`). Normalizing it gives the outward
    /// surface normal; the printed closed forms for the normal are not
    /// trusted.
    pub fn implicit_gradient(&self, p_local: &Vector3<f64>) -> Result<Vector3<f64>, GeomError> {
        let h = 1e-6 * self.min_semi_axis();
        let mut g = Vector3::zeros();
        for i in 0..3 {
            let mut hi = *p_local;
            let mut lo = *p_local;
            hi[i] += h;
            lo[i] -= h;
            g[i] = (self.implicit_value(&hi)? - self.implicit_value(&lo)?) / (2.0 * h);
        }
        Ok(g)
    }

    /// Outward unit normal of the surface near `p_local` (gradient based).
    pub fn outward_normal(&self, p_local: &Vector3<f64>) -> Result<Vector3<f64>, GeomError> {
        let g = self.implicit_gradient(p_local)?;
        let n = g.norm();
        if n < 1e-30 {
            return Err(GeomError::InvalidParameter(
                "degenerate implicit gradient".into(),
            ));
        }
        Ok(g / n)
    }

    /// Uniform-arclength surface sampling at target spacing `d` (meters).
    ///
    /// Adjacent samples along each parametric sweep are kept within
    /// `[0.5 d, 2 d]`. Requires `0 < d < min(a1, a2, a3)`.
    pub fn sample_surface(&self, d: f64) -> Result<Vec<SurfaceSample>, GeomError> {
        sampling::sample_surface(self, d)
    }

    /// Planar curvature of a principal cross-section at angular parameter
    /// `eta` in [0, pi/2].
    ///
    /// Computed from the parametric curve `(a cos^e t, b sin^e t)` as
    /// `k = (x'y'' - y'x'') / (x'^2 + y'^2)^(3/2)`; positive for convex
    /// sections (`e < 2`), negative for concave ones (`e > 2`).
    pub fn curvature_at(&self, eta: f64, plane: PrincipalPlane) -> Result<f64, GeomError> {
        let (a, b, eps) = self.section(plane);
        section_curvature(a, b, eps, eta)
    }

    /// Outward unit normal of a principal cross-section curve at `eta`,
    /// expressed in the 2D section plane. Endpoints return the axis-aligned
    /// limits, which hold for every exponent.
    pub fn normal_at(&self, eta: f64, plane: PrincipalPlane) -> Result<[f64; 2], GeomError> {
        let (a, b, eps) = self.section(plane);
        section_normal(a, b, eps, eta)
    }

    /// Axis-aligned bounding box of the surface in the local frame
    /// (the bounding-plane property: |x| <= a1, |y| <= a2, |z| <= a3).
    pub fn local_half_extents(&self) -> Vector3<f64> {
        Vector3::new(self.a1, self.a2, self.a3)
    }
}

/// First and second derivatives of the superellipse `(a cos^e t, b sin^e t)`
/// for t strictly inside (0, pi/2).
fn section_derivatives(a: f64, b: f64, eps: f64, t: f64) -> ((f64, f64), (f64, f64)) {
    let c = t.cos();
    let s = t.sin();
    let xp = -a * eps * s * c.powf(eps - 1.0);
    let yp = b * eps * c * s.powf(eps - 1.0);
    let xpp = -a * eps * (c.powf(eps) - (eps - 1.0) * s * s * c.powf(eps - 2.0));
    let ypp = b * eps * ((eps - 1.0) * c * c * s.powf(eps - 2.0) - s.powf(eps));
    ((xp, yp), (xpp, ypp))
}

fn check_section_domain(eps: f64, t: f64) -> Result<(), GeomError> {
    if !t.is_finite() {
        return Err(GeomError::NonFinite("section parameter"));
    }
    if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&t) {
        return Err(GeomError::InvalidParameter(format!(
            "section parameter must lie in [0, pi/2], got {t}"
        )));
    }
    // The axis points are parametrization singularities for every exponent
    // other than 1: cusp-like for eps < 1, vanishing derivative for eps > 1.
    let endpoint = t < 1e-9 || t > std::f64::consts::FRAC_PI_2 - 1e-9;
    if endpoint && (eps - 1.0).abs() > 1e-12 {
        return Err(GeomError::Singularity { eta: t, eps });
    }
    Ok(())
}

fn section_curvature(a: f64, b: f64, eps: f64, t: f64) -> Result<f64, GeomError> {
    check_section_domain(eps, t)?;
    let ((xp, yp), (xpp, ypp)) = section_derivatives(a, b, eps, t);
    let speed_sq = xp * xp + yp * yp;
    if speed_sq < 1e-300 {
        return Err(GeomError::Singularity { eta: t, eps });
    }
    Ok((xp * ypp - yp * xpp) / speed_sq.powf(1.5))
}

fn section_normal(a: f64, b: f64, eps: f64, t: f64) -> Result<[f64; 2], GeomError> {
    if !t.is_finite() {
        return Err(GeomError::NonFinite("section parameter"));
    }
    if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&t) {
        return Err(GeomError::InvalidParameter(format!(
            "section parameter must lie in [0, pi/2], got {t}"
        )));
    }
    // Axis intercepts: the outward normal aligns with the axis by symmetry,
    // for any exponent.
    if t < 1e-9 {
        return Ok([1.0, 0.0]);
    }
    if t > std::f64::consts::FRAC_PI_2 - 1e-9 {
        return Ok([0.0, 1.0]);
    }
    let ((xp, yp), _) = section_derivatives(a, b, eps, t);
    // Rotate the tangent by -90 degrees; for the CCW first-quadrant sweep
    // this points outward.
    let (nx, ny) = (yp, -xp);
    let norm = (nx * nx + ny * ny).sqrt();
    if norm < 1e-300 {
        return Err(GeomError::Singularity { eta: t, eps });
    }
    Ok([nx / norm, ny / norm])
}
