//! Antipodal grasp synthesis for a two-finger gripper on a fitted
//! superquadric.
//!
//! Conventions: `s_W` is the unit direction from the object toward the side
//! the gripper approaches from (the gripper travels along `-s_W`), and the
//! world +z axis points up. The filters, in order:
//!
//! 1. through-table: `s_W` points below the horizon, the gripper would sit
//!    under the table;
//! 2. verticality: the angle between `s_W` and world up exceeds the
//!    gripper's tilt budget `alpha`;
//! 3. depth: the semi-axis along the approach exceeds the finger depth, so
//!    the fingers cannot reach the contact plane through the center;
//! 4. width: the contact separation exceeds the maximum opening.
//!
//! Contacts come from the closed-form table on the grasping-plane
//! cross-section; the `eps > 1`, unequal-axes cell is solved by a seeded
//! golden-section search for the point whose normal line passes through
//! the center.

use crate::fit::PoseJson;
use crate::sq::{GeomError, PrincipalPlane, RigidPose, Superquadric};
use nalgebra::{Matrix3, Matrix4, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraspError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Geom(#[from] GeomError),
}

/// Two-finger gripper constraints.
#[derive(Debug, Clone, Copy)]
pub struct GripperSpec {
    /// Maximum opening between the fingers, meters.
    pub width: f64,
    /// Finger length along the approach, meters.
    pub depth: f64,
    /// Maximum allowed angle between the approach and the vertical, radians.
    pub alpha: f64,
}

impl GripperSpec {
    pub fn new(width: f64, depth: f64, alpha: f64) -> Result<Self, GraspError> {
        if !(width > 0.0) || !(depth > 0.0) {
            return Err(GraspError::InvalidParameter(
                "gripper width and depth must be > 0".into(),
            ));
        }
        if !(alpha > 0.0 && alpha <= FRAC_PI_2) {
            return Err(GraspError::InvalidParameter(
                "alpha must lie in (0, pi/2]".into(),
            ));
        }
        Ok(GripperSpec {
            width,
            depth,
            alpha,
        })
    }
}

/// On-disk gripper config: `{width_m, depth_m, alpha_deg}`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GripperSpecJson {
    pub width_m: f64,
    pub depth_m: f64,
    pub alpha_deg: f64,
}

impl TryFrom<&GripperSpecJson> for GripperSpec {
    type Error = GraspError;
    fn try_from(j: &GripperSpecJson) -> Result<Self, GraspError> {
        GripperSpec::new(j.width_m, j.depth_m, j.alpha_deg.to_radians())
    }
}

impl From<&GripperSpec> for GripperSpecJson {
    fn from(g: &GripperSpec) -> Self {
        GripperSpecJson {
            width_m: g.width,
            depth_m: g.depth,
            alpha_deg: g.alpha.to_degrees(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiscardReason {
    ThroughTable,
    Verticality,
    Depth,
    Width,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraspStatus {
    Accepted,
    Discarded(DiscardReason),
}

/// Contact pair on the grasping-plane cross-section, in the SQ local frame.
#[derive(Debug, Clone, Copy)]
pub struct ContactInfo {
    /// The symmetric pair +p_a / -p_a.
    pub local: [Vector3<f64>; 2],
    /// Distance between the two contacts.
    pub span: f64,
    /// Unit closing direction (from -p_a toward +p_a).
    pub closing_local: Vector3<f64>,
    /// Antipodality residual of the eps > 1 search; 0 for table cells.
    pub residual: f64,
    /// True when the search residual exceeded the threshold and the
    /// short-axis contacts were substituted.
    pub fallback: bool,
}

/// Evaluation of one candidate approach axis.
#[derive(Debug, Clone)]
pub struct ApproachEval {
    /// Approach direction in the SQ local frame (unit).
    pub s_local: Vector3<f64>,
    /// World direction from the object toward the gripper station.
    pub s_world: Vector3<f64>,
    /// Angle between `s_world` and world up.
    pub tilt: f64,
    pub status: GraspStatus,
    /// Contacts for this approach's grasping plane (present for accepted).
    pub contact: Option<ContactInfo>,
}

/// A ranked (or discarded) grasp.
#[derive(Debug, Clone)]
pub struct GraspCandidate {
    pub approach_world: Vector3<f64>,
    pub contacts_world: [Vector3<f64>; 2],
    pub contacts_local: [Vector3<f64>; 2],
    pub closing_world: Vector3<f64>,
    pub frame: RigidPose,
    pub status: GraspStatus,
    /// 1-based rank among accepted candidates; discarded ones carry none.
    pub rank: Option<usize>,
    pub closing_span: f64,
    pub tilt: f64,
}

/// Residual threshold above which an eps > 1 search result is considered
/// non-antipodal and the short-axis fallback applies.
pub const ANTIPODAL_RESIDUAL_MAX: f64 = 0.5;

/// Solution of the antipodal-contact search on a cross-section.
#[derive(Debug, Clone, Copy)]
pub struct AntipodalSolution {
    /// Minimizing angular parameter in (0, pi/2).
    pub eta: f64,
    /// The mirrored pair on the other diagonal (z -> -z image).
    pub mirror_eta: f64,
    /// sin of the angle between the contact position vector and the
    /// surface normal; 0 means the normal line passes through the center.
    pub residual: f64,
}

/// Antipodality measure at angle `eta` on the superellipse
/// `(a_u cos^e t, a_v sin^e t)`: the sine of the angle between the position
/// vector and the (unnormalized, second-derivative form) surface normal.
/// Zero exactly when the normal line passes through the origin.
pub fn antipodal_residual(a_u: f64, a_v: f64, eps: f64, eta: f64) -> f64 {
    let c = eta.cos();
    let s = eta.sin();
    let px = a_u * c.powf(eps);
    let py = a_v * s.powf(eps);
    let nx = a_v * c.powf(eps + 2.0) * s.powf(2.0 * eps);
    let ny = a_u * c.powf(2.0 * eps) * s.powf(eps + 2.0);
    let cross = (px * ny - py * nx).abs();
    let denom = (px * px + py * py).sqrt() * (nx * nx + ny * ny).sqrt();
    if denom < 1e-300 {
        return 0.0;
    }
    cross / denom
}

/// Find the contact angle whose normal line passes (closest to) through
/// the origin: a 1000-point grid scan seeds a golden-section refinement.
///
/// Requires `eps > 1`; for equal semi-axes every angle is antipodal and the
/// tie breaks to pi/4.
pub fn antipodal_eta_search(a_u: f64, a_v: f64, eps: f64) -> Result<AntipodalSolution, GraspError> {
    if !(eps > 1.0) {
        return Err(GraspError::InvalidParameter(format!(
            "antipodal search applies to eps > 1, got {eps}"
        )));
    }
    if !(a_u > 0.0 && a_v > 0.0) {
        return Err(GraspError::InvalidParameter(
            "semi-axes must be positive".into(),
        ));
    }
    if ((a_u - a_v) / a_u.max(a_v)).abs() < 1e-12 {
        return Ok(AntipodalSolution {
            eta: FRAC_PI_4,
            mirror_eta: -FRAC_PI_4,
            residual: antipodal_residual(a_u, a_v, eps, FRAC_PI_4),
        });
    }

    const GRID: usize = 1000;
    let step = FRAC_PI_2 / GRID as f64;
    let mut best_i = 0;
    let mut best_val = f64::INFINITY;
    for i in 0..GRID {
        let eta = (i as f64 + 0.5) * step;
        let v = antipodal_residual(a_u, a_v, eps, eta);
        if v < best_val {
            best_val = v;
            best_i = i;
        }
    }
    let lo = (best_i as f64 - 0.5) * step;
    let hi = (best_i as f64 + 1.5) * step;
    let lo = lo.max(1e-9);
    let hi = hi.min(FRAC_PI_2 - 1e-9);

    let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let mut fc = antipodal_residual(a_u, a_v, eps, c);
    let mut fd = antipodal_residual(a_u, a_v, eps, d);
    while b - a > 1e-10 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = antipodal_residual(a_u, a_v, eps, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = antipodal_residual(a_u, a_v, eps, d);
        }
    }
    let eta = 0.5 * (a + b);
    Ok(AntipodalSolution {
        eta,
        mirror_eta: -eta,
        residual: antipodal_residual(a_u, a_v, eps, eta),
    })
}

/// Contact pair for the cross-section selected by `plane`, from the
/// closed-form table keyed on the section exponent and semi-axes.
pub fn contact_points(sq: &Superquadric, plane: PrincipalPlane) -> Result<ContactInfo, GraspError> {
    let (a_u, a_v, eps) = sq.section(plane);
    let rel = ((a_u - a_v) / a_u.max(a_v)).abs();
    let equal = rel < 1e-9;

    let mut residual = 0.0;
    let mut fallback = false;
    let p2d: [f64; 2] = if eps <= 1.0 + 1e-9 {
        // Convex-to-elliptic sections: grasp across the shorter semi-axis;
        // equal axes pick the canonical omega = 0 contact.
        if equal || a_u < a_v {
            [a_u, 0.0]
        } else {
            [0.0, a_v]
        }
    } else if equal {
        [
            a_u / std::f64::consts::SQRT_2,
            a_u / std::f64::consts::SQRT_2,
        ]
    } else {
        let sol = antipodal_eta_search(a_u, a_v, eps)?;
        residual = sol.residual;
        if sol.residual > ANTIPODAL_RESIDUAL_MAX {
            fallback = true;
            if a_u < a_v {
                [a_u, 0.0]
            } else {
                [0.0, a_v]
            }
        } else {
            [a_u * sol.eta.cos().powf(eps), a_v * sol.eta.sin().powf(eps)]
        }
    };

    let local = embed(plane, p2d);
    let span = 2.0 * local.norm();
    let closing_local = local / local.norm();
    Ok(ContactInfo {
        local: [local, -local],
        span,
        closing_local,
        residual,
        fallback,
    })
}

fn embed(plane: PrincipalPlane, p: [f64; 2]) -> Vector3<f64> {
    match plane {
        PrincipalPlane::Xy => Vector3::new(p[0], p[1], 0.0),
        PrincipalPlane::Xz => Vector3::new(p[0], 0.0, p[1]),
        PrincipalPlane::Yz => Vector3::new(0.0, p[0], p[1]),
    }
}

fn plane_for_approach(axis: usize) -> PrincipalPlane {
    match axis {
        0 => PrincipalPlane::Yz,
        1 => PrincipalPlane::Xz,
        _ => PrincipalPlane::Xy,
    }
}

fn rotation_of(t: &Matrix4<f64>) -> Matrix3<f64> {
    t.fixed_view::<3, 3>(0, 0).into_owned()
}

/// Evaluate the six principal approach axes against the gripper filters.
///
/// `t_wk` maps the cloud (camera) frame into the world frame whose +z is
/// up; the superquadric pose lives in the cloud frame.
pub fn approach_directions(
    sq: &Superquadric,
    gripper: &GripperSpec,
    t_wk: &Matrix4<f64>,
) -> Result<Vec<ApproachEval>, GraspError> {
    let r_ws = rotation_of(t_wk) * sq.pose.rotation();
    let axes = sq.semi_axes();
    let mut out = Vec::with_capacity(6);
    for axis in 0..3 {
        for sign in [1.0, -1.0] {
            let mut s_local = Vector3::zeros();
            s_local[axis] = sign;
            let s_world = (r_ws * s_local).normalize();
            let tilt = s_world.z.clamp(-1.0, 1.0).acos();
            let plane = plane_for_approach(axis);

            let status = if s_world.z < -1e-9 {
                GraspStatus::Discarded(DiscardReason::ThroughTable)
            } else if tilt > gripper.alpha + 1e-12 {
                GraspStatus::Discarded(DiscardReason::Verticality)
            } else if axes[axis] > gripper.depth {
                GraspStatus::Discarded(DiscardReason::Depth)
            } else {
                GraspStatus::Accepted
            };

            // Width is checked on the closing axis the contact table picks.
            let (status, contact) = match status {
                GraspStatus::Accepted => {
                    let info = contact_points(sq, plane)?;
                    if info.span > gripper.width {
                        (GraspStatus::Discarded(DiscardReason::Width), Some(info))
                    } else {
                        (GraspStatus::Accepted, Some(info))
                    }
                }
                other => (other, None),
            };
            out.push(ApproachEval {
                s_local,
                s_world,
                tilt,
                status,
                contact,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
pub struct SynthesisOptions {
    /// Angular spacing of same-direction grasp-frame rotations.
    pub rotation_step: f64,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        SynthesisOptions {
            rotation_step: 15.0_f64.to_radians(),
        }
    }
}

/// Full grasp synthesis: principal-approach filtering, contact selection,
/// world transforms, tilted same-closing-axis variants, and ranking.
///
/// Ranking: approaches grouped by closing span ascending (the min(a_i)
/// group first); within a group the principal approaches come before their
/// tilted variants; ties break on smaller tilt, then smaller span.
/// Discarded principal approaches are retained (unranked) for diagnostics.
pub fn synthesize(
    sq: &Superquadric,
    gripper: &GripperSpec,
    t_wk: &Matrix4<f64>,
    opts: &SynthesisOptions,
) -> Result<Vec<GraspCandidate>, GraspError> {
    let evals = approach_directions(sq, gripper, t_wk)?;
    let r_ws = rotation_of(t_wk) * sq.pose.rotation();
    let full = t_wk * sq.pose.homogeneous();

    // Support samples for depth checks of tilted approaches.
    let support: Vec<Vector3<f64>> = sq
        .sample_surface(sq.min_semi_axis() / 6.0)?
        .iter()
        .map(|s| s.point)
        .collect();
    let support_extent =
        |dir: &Vector3<f64>| -> f64 { support.iter().map(|p| dir.dot(p)).fold(0.0_f64, f64::max) };

    let accepted: Vec<&ApproachEval> = evals
        .iter()
        .filter(|e| e.status == GraspStatus::Accepted)
        .collect();

    // Group accepted principals by closing span.
    let mut groups: Vec<(f64, Vec<&ApproachEval>)> = Vec::new();
    for e in &accepted {
        let span = e.contact.as_ref().unwrap().span;
        match groups.iter_mut().find(|(s, _)| (*s - span).abs() < 1e-12) {
            Some((_, v)) => v.push(e),
            None => groups.push((span, vec![e])),
        }
    }
    groups.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (_, members) in groups.iter_mut() {
        members.sort_by(|a, b| a.tilt.total_cmp(&b.tilt));
    }

    let make_candidate = |s_local: &Vector3<f64>,
                          info: &ContactInfo,
                          status: GraspStatus,
                          rank: Option<usize>|
     -> GraspCandidate {
        let s_world = (r_ws * s_local).normalize();
        let closing_world = (r_ws * info.closing_local).normalize();
        let to_world = |p: &Vector3<f64>| {
            let h = full * p.push(1.0);
            Vector3::new(h.x, h.y, h.z)
        };
        let contacts_world = [to_world(&info.local[0]), to_world(&info.local[1])];
        // Grasp frame: x along closing, z along travel (into the object).
        let z_axis = -s_world;
        let x_axis = closing_world;
        let y_axis = z_axis.cross(&x_axis).normalize();
        let rotation = Matrix3::from_columns(&[x_axis, y_axis, z_axis]);
        let center = 0.5 * (contacts_world[0] + contacts_world[1]);
        GraspCandidate {
            approach_world: s_world,
            contacts_world,
            contacts_local: info.local,
            closing_world,
            frame: RigidPose::from_rotation(&rotation, center),
            status,
            rank,
            closing_span: info.span,
            tilt: s_world.z.clamp(-1.0, 1.0).acos(),
        }
    };

    let mut ranked: Vec<GraspCandidate> = Vec::new();
    let mut rank = 0usize;
    for (_, members) in &groups {
        for e in members {
            rank += 1;
            ranked.push(make_candidate(
                &e.s_local,
                e.contact.as_ref().unwrap(),
                GraspStatus::Accepted,
                Some(rank),
            ));
        }
        // Tilted variants: rotate each member's approach about its closing
        // axis, re-running every filter.
        let max_k = (FRAC_PI_2 / opts.rotation_step).floor() as i32;
        for k in 1..=max_k {
            for sign in [1.0, -1.0] {
                for e in members {
                    let info = e.contact.as_ref().unwrap();
                    let angle = sign * k as f64 * opts.rotation_step;
                    let rot =
                        Rotation3::from_axis_angle(&Unit::new_normalize(info.closing_local), angle);
                    let s_local = rot * e.s_local;
                    let s_world = (r_ws * s_local).normalize();
                    let tilt = s_world.z.clamp(-1.0, 1.0).acos();
                    if s_world.z < -1e-9 || tilt > gripper.alpha + 1e-12 {
                        continue;
                    }
                    if support_extent(&s_local) > gripper.depth {
                        continue;
                    }
                    rank += 1;
                    ranked.push(make_candidate(
                        &s_local,
                        info,
                        GraspStatus::Accepted,
                        Some(rank),
                    ));
                }
            }
        }
    }

    // Discarded principals, unranked, for diagnostics.
    for e in &evals {
        if e.status != GraspStatus::Accepted {
            let info = match &e.contact {
                Some(i) => *i,
                None => contact_points(sq, plane_for_approach(principal_axis(&e.s_local)))?,
            };
            ranked.push(make_candidate(&e.s_local, &info, e.status, None));
        }
    }
    Ok(ranked)
}

fn principal_axis(v: &Vector3<f64>) -> usize {
    let mut best = 0;
    for i in 1..3 {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    best
}

// --- serialized form --------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraspCandidateJson {
    pub approach: [f64; 3],
    pub contacts: [[f64; 3]; 2],
    pub frame: PoseJson,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<DiscardReason>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
    pub closing_span_m: f64,
}

impl From<&GraspCandidate> for GraspCandidateJson {
    fn from(g: &GraspCandidate) -> Self {
        let (status, reason) = match g.status {
            GraspStatus::Accepted => ("accepted".to_string(), None),
            GraspStatus::Discarded(r) => ("discarded".to_string(), Some(r)),
        };
        GraspCandidateJson {
            approach: [g.approach_world.x, g.approach_world.y, g.approach_world.z],
            contacts: [
                [
                    g.contacts_world[0].x,
                    g.contacts_world[0].y,
                    g.contacts_world[0].z,
                ],
                [
                    g.contacts_world[1].x,
                    g.contacts_world[1].y,
                    g.contacts_world[1].z,
                ],
            ],
            frame: PoseJson::from(&g.frame),
            status,
            reason,
            rank: g.rank,
            closing_span_m: g.closing_span,
        }
    }
}
