//! Bounded Levenberg-Marquardt recovery of the five shape parameters
//! (a1, a2, a3, eps1, eps2) from a completed cloud. The pose is estimated
//! upstream and held fixed here.
//!
//! The per-point residual is the size-normalized algebraic distance
//! `sqrt(a1 a2 a3) * (f(p)^eps1 - 1)`, zero exactly on the surface. An
//! optional `||OP||` weighting (distance of the point from the center) can
//! be enabled, which reproduces the radial-distance weighting of the cost
//! it derives from; it is off by default.

use crate::cloud::{CloudError, PointCloud};
use crate::sq::{GeomError, RigidPose, Superquadric};
use nalgebra::{Matrix5, Vector3, Vector5};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("too few points for fitting: {0} (need at least 10)")]
    TooFewPoints(usize),
    #[error(transparent)]
    Cloud(#[from] CloudError),
    #[error(transparent)]
    Geom(#[from] GeomError),
}

pub const EPS_MIN: f64 = 0.1;
pub const EPS_MAX: f64 = 1.9;
pub const AXIS_MIN: f64 = 1e-3;
pub const AXIS_MAX: f64 = 1.0;

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    /// Weight each residual by sqrt(||OP||) so squared costs carry the
    /// radial distance of the point from the center.
    pub op_weight: bool,
    pub max_iterations: usize,
    /// Relative cost-change convergence threshold.
    pub cost_tol: f64,
    /// Parameter-step convergence threshold.
    pub step_tol: f64,
    pub lambda_init: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            op_weight: false,
            max_iterations: 100,
            cost_tol: 1e-8,
            step_tol: 1e-10,
            lambda_init: 1e-3,
        }
    }
}

/// One accepted LM iterate: parameters after the step and the cost there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitTrace {
    pub params: [f64; 5],
    pub cost: f64,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub sq: Superquadric,
    pub cost: f64,
    pub iterations: usize,
    pub time_s: f64,
    pub converged: bool,
    /// Accepted iterates, starting with the initialization.
    pub trace: Vec<FitTrace>,
}

/// Size-normalized algebraic distance of a local-frame point.
pub fn residual(sq: &Superquadric, p_local: &Vector3<f64>, op_weight: bool) -> f64 {
    let f = (p_local.x / sq.a1).abs().powf(2.0 / sq.eps2);
    let f = f + (p_local.y / sq.a2).abs().powf(2.0 / sq.eps2);
    let f = f.powf(sq.eps2 / sq.eps1) + (p_local.z / sq.a3).abs().powf(2.0 / sq.eps1);
    let base = (sq.a1 * sq.a2 * sq.a3).sqrt() * (f.powf(sq.eps1) - 1.0);
    if op_weight {
        base * p_local.norm().sqrt()
    } else {
        base
    }
}

fn residual_params(params: &[f64; 5], p: &Vector3<f64>, op_weight: bool) -> f64 {
    let [a1, a2, a3, e1, e2] = *params;
    let f = (p.x / a1).abs().powf(2.0 / e2) + (p.y / a2).abs().powf(2.0 / e2);
    let f = f.powf(e2 / e1) + (p.z / a3).abs().powf(2.0 / e1);
    let base = (a1 * a2 * a3).sqrt() * (f.powf(e1) - 1.0);
    if op_weight {
        base * p.norm().sqrt()
    } else {
        base
    }
}

/// Initial shape estimate from the covariance of the local-frame cloud.
///
/// Eigenvalues map to semi-axes as `a = sqrt(3 * lambda)` (exact for a
/// spherical shell and for a uniform solid box), assigned to the local axis
/// their eigenvector aligns with best, floored at 1 mm. Exponents always
/// start at (1.0, 1.0).
pub fn initialize(cloud_local: &PointCloud) -> Result<[f64; 5], FitError> {
    let pairs = cloud_local.covariance_eigenpairs()?;
    let mut axes = [0.0f64; 3];
    let mut taken = [false; 3];
    for (value, vector) in pairs {
        let mut best_axis = usize::MAX;
        let mut best_dot = -1.0;
        for (i, taken_flag) in taken.iter().enumerate() {
            if !taken_flag && vector[i].abs() > best_dot {
                best_dot = vector[i].abs();
                best_axis = i;
            }
        }
        taken[best_axis] = true;
        axes[best_axis] = (3.0 * value).sqrt().clamp(AXIS_MIN, AXIS_MAX);
    }
    Ok([axes[0], axes[1], axes[2], 1.0, 1.0])
}

fn project(params: &mut [f64; 5]) {
    for a in params.iter_mut().take(3) {
        *a = a.clamp(AXIS_MIN, AXIS_MAX);
    }
    for e in params.iter_mut().skip(3) {
        *e = e.clamp(EPS_MIN, EPS_MAX);
    }
}

fn cost_of(residuals: &[f64]) -> f64 {
    residuals.iter().map(|r| r * r).sum()
}

fn residuals_at(params: &[f64; 5], pts: &[Vector3<f64>], op_weight: bool, out: &mut Vec<f64>) {
    out.clear();
    out.extend(pts.iter().map(|p| residual_params(params, p, op_weight)));
}

/// Forward-difference Jacobian column step: 1e-6 relative to the parameter.
fn fd_step(x: f64) -> f64 {
    (1e-6 * x.abs()).max(1e-9)
}

/// Fit the five shape parameters with pose held fixed.
///
/// Levenberg-Marquardt with identity damping: lambda starts at 1e-3,
/// divides by 10 on accepted steps and multiplies by 10 on rejected ones;
/// box bounds are enforced by projection after every step. Terminates on
/// relative cost change, step norm, or the iteration cap; never fails on
/// non-convergence (the result carries `converged = false`).
pub fn fit_lm(
    cloud: &PointCloud,
    pose: &RigidPose,
    opts: &FitOptions,
) -> Result<FitResult, FitError> {
    let start = std::time::Instant::now();
    if cloud.len() < 10 {
        return Err(FitError::TooFewPoints(cloud.len()));
    }
    let local: Vec<Vector3<f64>> = cloud.points().iter().map(|p| pose.to_local(p)).collect();
    let local_cloud = PointCloud::new(local.clone(), "object")?;

    let mut x = initialize(&local_cloud)?;
    project(&mut x);

    let mut r = Vec::new();
    residuals_at(&x, &local, opts.op_weight, &mut r);
    let mut cost = cost_of(&r);
    let mut trace = vec![FitTrace { params: x, cost }];

    let mut lambda = opts.lambda_init;
    let mut converged = false;
    let mut iterations = 0;
    let mut r_pert = Vec::new();
    let mut r_new = Vec::new();

    'outer: for _ in 0..opts.max_iterations {
        iterations += 1;

        // J^T J and J^T r from forward differences, column by column.
        let mut h = Matrix5::<f64>::zeros();
        let mut g = Vector5::<f64>::zeros();
        let mut cols: [Vec<f64>; 5] = Default::default();
        for (j, col) in cols.iter_mut().enumerate() {
            let step = fd_step(x[j]);
            let mut xp = x;
            xp[j] += step;
            residuals_at(&xp, &local, opts.op_weight, &mut r_pert);
            *col = r_pert
                .iter()
                .zip(&r)
                .map(|(rp, r0)| (rp - r0) / step)
                .collect();
        }
        for i in 0..r.len() {
            let ji = Vector5::from_fn(|j, _| cols[j][i]);
            h += ji * ji.transpose();
            g += ji * r[i];
        }

        loop {
            let damped = h + Matrix5::identity() * lambda;
            let delta = match damped.cholesky() {
                Some(ch) => ch.solve(&(-g)),
                None => {
                    lambda *= 10.0;
                    if lambda > 1e12 {
                        break 'outer;
                    }
                    continue;
                }
            };
            let mut x_new = [0.0f64; 5];
            for i in 0..5 {
                x_new[i] = x[i] + delta[i];
            }
            project(&mut x_new);
            residuals_at(&x_new, &local, opts.op_weight, &mut r_new);
            let cost_new = cost_of(&r_new);

            if cost_new < cost {
                let step_norm = (0..5)
                    .map(|i| (x_new[i] - x[i]).powi(2))
                    .sum::<f64>()
                    .sqrt();
                let delta_cost = cost - cost_new;
                x = x_new;
                std::mem::swap(&mut r, &mut r_new);
                cost = cost_new;
                trace.push(FitTrace { params: x, cost });
                lambda = (lambda / 10.0).max(1e-12);
                if cost == 0.0
                    || delta_cost / cost.max(1e-300) < opts.cost_tol
                    || step_norm < opts.step_tol
                {
                    converged = true;
                    break 'outer;
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e12 {
                break 'outer;
            }
        }
    }

    let sq = Superquadric::new(x[0], x[1], x[2], x[3], x[4], *pose)?;
    Ok(FitResult {
        sq,
        cost,
        iterations,
        time_s: start.elapsed().as_secs_f64(),
        converged,
        trace,
    })
}

/// Mean radial-distance error between two superquadric surfaces, percent.
///
/// Both surfaces are sampled at spacing `d_sample`; each sample is carried
/// to the other surface's frame and compared along the ray from that
/// surface's center, symmetrically in both directions.
pub fn radial_error(
    sq_truth: &Superquadric,
    sq_fit: &Superquadric,
    d_sample: f64,
) -> Result<f64, GeomError> {
    let directional = |from: &Superquadric, onto: &Superquadric| -> Result<f64, GeomError> {
        let samples = from.sample_surface(d_sample)?;
        let mut total = 0.0;
        let mut n = 0usize;
        for s in &samples {
            let world = from.pose.to_parent(&s.point);
            let v = onto.pose.to_local(&world);
            if v.norm() < 1e-12 {
                continue;
            }
            let scale = onto.ray_scale_to_surface(&v)?;
            total += (1.0 - scale).abs();
            n += 1;
        }
        Ok(total / n.max(1) as f64)
    };
    let a = directional(sq_truth, sq_fit)?;
    let b = directional(sq_fit, sq_truth)?;
    Ok(100.0 * 0.5 * (a + b))
}

// --- serialized forms ------------------------------------------------------

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PoseJson {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl From<&RigidPose> for PoseJson {
    fn from(p: &RigidPose) -> Self {
        PoseJson {
            x: p.position.x,
            y: p.position.y,
            z: p.position.z,
            roll: p.roll,
            pitch: p.pitch,
            yaw: p.yaw,
        }
    }
}

impl From<&PoseJson> for RigidPose {
    fn from(p: &PoseJson) -> Self {
        RigidPose::new(Vector3::new(p.x, p.y, p.z), p.roll, p.pitch, p.yaw)
    }
}

/// The documented JSON form of a fit result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResultJson {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub pose: PoseJson,
    pub cost: f64,
    pub iterations: usize,
    pub time_s: f64,
    pub converged: bool,
}

impl From<&FitResult> for FitResultJson {
    fn from(r: &FitResult) -> Self {
        FitResultJson {
            a1: r.sq.a1,
            a2: r.sq.a2,
            a3: r.sq.a3,
            eps1: r.sq.eps1,
            eps2: r.sq.eps2,
            pose: PoseJson::from(&r.sq.pose),
            cost: r.cost,
            iterations: r.iterations,
            time_s: r.time_s,
            converged: r.converged,
        }
    }
}

impl FitResultJson {
    pub fn to_superquadric(&self) -> Result<Superquadric, GeomError> {
        Superquadric::new(
            self.a1,
            self.a2,
            self.a3,
            self.eps1,
            self.eps2,
            RigidPose::from(&self.pose),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn shape(a1: f64, a2: f64, a3: f64, e1: f64, e2: f64) -> Superquadric {
        Superquadric::new(a1, a2, a3, e1, e2, RigidPose::identity()).unwrap()
    }

    fn surface_cloud(sq: &Superquadric, d: f64) -> PointCloud {
        let pts: Vec<Vector3<f64>> = sq
            .sample_surface(d)
            .unwrap()
            .iter()
            .map(|s| s.point)
            .collect();
        PointCloud::new(pts, "object").unwrap()
    }

    #[test]
    fn residual_on_surface_is_zero() {
        let sq = shape(0.05, 0.08, 0.12, 0.4, 1.3);
        for s in sq.sample_surface(0.02).unwrap() {
            assert!(residual(&sq, &s.point, false).abs() < 1e-9);
        }
    }

    #[test]
    fn residual_unit_sphere_outside_point() {
        // eps=1 makes f = |p|^2, so r = sqrt(1)*(4 - 1) = 3 at p=(2,0,0).
        let sq = shape(1.0, 1.0, 1.0, 1.0, 1.0);
        assert_relative_eq!(
            residual(&sq, &Vector3::new(2.0, 0.0, 0.0), false),
            3.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn op_weight_multiplies_by_sqrt_radial_distance() {
        let sq = shape(0.05, 0.07, 0.1, 0.7, 1.2);
        let p = Vector3::new(0.06, -0.03, 0.11);
        let plain = residual(&sq, &p, false);
        let weighted = residual(&sq, &p, true);
        assert_relative_eq!(weighted, plain * p.norm().sqrt(), max_relative = 1e-12);

        // weighting must not break recovery on clean data
        let truth = shape(0.04, 0.06, 0.09, 0.5, 1.1);
        let cloud = surface_cloud(&truth, 0.01);
        let opts = FitOptions {
            op_weight: true,
            ..FitOptions::default()
        };
        let result = fit_lm(&cloud, &RigidPose::identity(), &opts).unwrap();
        assert_relative_eq!(result.sq.a1, 0.04, max_relative = 0.02);
        assert_relative_eq!(result.sq.eps1, 0.5, max_relative = 0.05);
    }

    #[test]
    fn residual_scales_with_three_halves_power() {
        let sq = shape(0.05, 0.07, 0.1, 0.7, 1.2);
        let p = Vector3::new(0.06, -0.03, 0.11);
        let r0 = residual(&sq, &p, false);
        let s = 2.5;
        let scaled = shape(s * 0.05, s * 0.07, s * 0.1, 0.7, 1.2);
        let r1 = residual(&scaled, &(p * s), false);
        assert_relative_eq!(r1, s.powf(1.5) * r0, max_relative = 1e-12);
    }

    #[test]
    fn initialize_sphere_shell() {
        // Shell variance is r^2/3 per axis, so sqrt(3*lambda) recovers r.
        let sq = shape(1.0, 1.0, 1.0, 1.0, 1.0);
        let cloud = surface_cloud(&sq, 0.05);
        let p = initialize(&cloud).unwrap();
        for a in &p[..3] {
            assert_relative_eq!(*a, 1.0, max_relative = 0.2);
        }
        assert_eq!(p[3], 1.0);
        assert_eq!(p[4], 1.0);
    }

    #[test]
    fn initialize_floors_flat_cloud() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let pts: Vec<Vector3<f64>> = (0..200)
            .map(|_| {
                Vector3::new(
                    rng.random_range(-0.05..0.05),
                    rng.random_range(-0.05..0.05),
                    0.0,
                )
            })
            .collect();
        let cloud = PointCloud::new(pts, "object").unwrap();
        let p = initialize(&cloud).unwrap();
        assert_eq!(p[2], AXIS_MIN);
        assert!(p.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn initialize_assigns_eigenvalues_to_aligned_axes() {
        let sq = shape(0.15, 0.04, 0.08, 1.0, 1.0);
        let cloud = surface_cloud(&sq, 0.01);
        let p = initialize(&cloud).unwrap();
        assert!(p[0] > p[2] && p[2] > p[1], "axis mapping broken: {p:?}");
    }

    #[test]
    fn fit_recovers_noiseless_full_view() {
        let truth = shape(0.05, 0.05, 0.15, 0.3, 1.0);
        let cloud = surface_cloud(&truth, 0.008);
        let result = fit_lm(&cloud, &RigidPose::identity(), &FitOptions::default()).unwrap();
        assert!(result.converged);
        let got = [
            result.sq.a1,
            result.sq.a2,
            result.sq.a3,
            result.sq.eps1,
            result.sq.eps2,
        ];
        let want = [0.05, 0.05, 0.15, 0.3, 1.0];
        for (g, w) in got.iter().zip(&want) {
            assert_relative_eq!(g, w, max_relative = 0.02);
        }
    }

    #[test]
    fn fit_box_like_exponent_well_below_one() {
        // Cheese-box class: flat faces drive eps1 far below 1.
        let truth = shape(0.07, 0.13, 0.1, 0.16, 0.32);
        let cloud = surface_cloud(&truth, 0.01);
        let result = fit_lm(&cloud, &RigidPose::identity(), &FitOptions::default()).unwrap();
        assert!(result.sq.eps1 < 0.5, "eps1 = {}", result.sq.eps1);
    }

    #[test]
    fn fit_cylinder_like_round_section() {
        // Toy-cylinder class: small eps1 (flat caps), eps2 near 1.
        let truth = shape(0.023, 0.024, 0.15, 0.389, 1.031);
        let cloud = surface_cloud(&truth, 0.006);
        let result = fit_lm(&cloud, &RigidPose::identity(), &FitOptions::default()).unwrap();
        assert!(result.sq.eps1 < 0.7, "eps1 = {}", result.sq.eps1);
        assert_relative_eq!(result.sq.eps2, 1.0, max_relative = 0.25);
    }

    #[test]
    fn accepted_cost_sequence_is_non_increasing_and_bounded() {
        let truth = shape(0.04, 0.09, 0.06, 0.5, 1.5);
        let cloud = surface_cloud(&truth, 0.008);
        let result = fit_lm(&cloud, &RigidPose::identity(), &FitOptions::default()).unwrap();
        for w in result.trace.windows(2) {
            assert!(w[1].cost <= w[0].cost, "cost increased on accepted step");
        }
        for t in &result.trace {
            let [a1, a2, a3, e1, e2] = t.params;
            for a in [a1, a2, a3] {
                assert!((AXIS_MIN..=AXIS_MAX).contains(&a));
            }
            for e in [e1, e2] {
                assert!((EPS_MIN..=EPS_MAX).contains(&e));
            }
        }
    }

    #[test]
    fn jacobian_forward_diff_matches_central_diff() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..20 {
            let params = [
                rng.random_range(0.02..0.2),
                rng.random_range(0.02..0.2),
                rng.random_range(0.02..0.2),
                rng.random_range(0.2..1.8),
                rng.random_range(0.2..1.8),
            ];
            let p = Vector3::new(
                rng.random_range(0.01..0.25),
                rng.random_range(0.01..0.25),
                rng.random_range(0.01..0.25),
            );
            for j in 0..5 {
                let h_fwd = fd_step(params[j]);
                let mut xp = params;
                xp[j] += h_fwd;
                let fwd =
                    (residual_params(&xp, &p, false) - residual_params(&params, &p, false)) / h_fwd;

                let h = 1e-7 * params[j].abs().max(1e-3);
                let mut hi = params;
                let mut lo = params;
                hi[j] += h;
                lo[j] -= h;
                let central =
                    (residual_params(&hi, &p, false) - residual_params(&lo, &p, false)) / (2.0 * h);
                if central.abs() > 1e-8 {
                    assert_relative_eq!(fwd, central, max_relative = 1e-3);
                }
            }
        }
    }

    #[test]
    fn fit_is_permutation_invariant_and_deterministic() {
        let truth = shape(0.06, 0.04, 0.09, 0.8, 1.2);
        let cloud = surface_cloud(&truth, 0.01);
        let a = fit_lm(&cloud, &RigidPose::identity(), &FitOptions::default()).unwrap();
        let b = fit_lm(&cloud, &RigidPose::identity(), &FitOptions::default()).unwrap();
        assert_eq!(a.trace.len(), b.trace.len());
        for (ta, tb) in a.trace.iter().zip(&b.trace) {
            assert_eq!(ta.params, tb.params, "trajectory must be bit-identical");
        }

        let mut shuffled: Vec<Vector3<f64>> = cloud.points().to_vec();
        shuffled.reverse();
        shuffled.swap(1, 101);
        let cloud_shuffled = PointCloud::new(shuffled, "object").unwrap();
        let c = fit_lm(
            &cloud_shuffled,
            &RigidPose::identity(),
            &FitOptions::default(),
        )
        .unwrap();
        assert!(
            (a.cost - c.cost).abs() < 1e-10,
            "cost differs under permutation: {} vs {}",
            a.cost,
            c.cost
        );
    }

    #[test]
    fn too_few_points_is_an_error() {
        let pts: Vec<Vector3<f64>> = (0..5).map(|i| Vector3::new(i as f64, 0.0, 0.0)).collect();
        let cloud = PointCloud::new(pts, "object").unwrap();
        assert!(matches!(
            fit_lm(&cloud, &RigidPose::identity(), &FitOptions::default()),
            Err(FitError::TooFewPoints(5))
        ));
    }

    #[test]
    fn radial_error_identical_is_zero() {
        let sq = shape(0.05, 0.07, 0.1, 0.6, 1.1);
        let err = radial_error(&sq, &sq, 0.01).unwrap();
        assert!(err < 1e-9);
    }

    #[test]
    fn radial_error_uniform_scaling_is_ten_percent() {
        let truth = shape(0.05, 0.07, 0.1, 0.6, 1.1);
        let fit = shape(0.055, 0.077, 0.11, 0.6, 1.1);
        let err = radial_error(&truth, &fit, 0.01).unwrap();
        assert!((err - 10.0).abs() <= 0.5, "got {err}%");
    }

    #[test]
    fn fit_result_json_round_trip() {
        let truth = shape(0.05, 0.05, 0.15, 0.3, 1.0);
        let cloud = surface_cloud(&truth, 0.01);
        let result = fit_lm(&cloud, &RigidPose::identity(), &FitOptions::default()).unwrap();
        let json = serde_json::to_string(&FitResultJson::from(&result)).unwrap();
        let back: FitResultJson = serde_json::from_str(&json).unwrap();
        assert_eq!(back.a1, result.sq.a1);
        assert_eq!(back.converged, result.converged);
        assert!(back.to_superquadric().is_ok());
    }
}
