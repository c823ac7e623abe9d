//! Uniform spatial sampling of the superquadric surface.
//!
//! Angular parameters are advanced so that consecutive points are roughly a
//! target arclength `d` apart. The first-order update for a superellipse
//! `(a cos^e t, b sin^e t)` is
//!
//! ```text
//! dt = (D / e) * sqrt( cos^2 t sin^2 t /
//!        (a^2 cos^(2e) t sin^4 t + b^2 sin^(2e) t cos^4 t) )
//! ```
//!
//! which degenerates at the ends of the quadrant; there the limit forms
//! `dt = (t^e + D/b)^(1/e) - t` (near 0) and the mirrored expression in
//! `pi/2 - t` (near pi/2) are used instead. Since all three are first-order
//! estimates, each step is corrected against the actual chord until it lands
//! in a fixed window around `d`, which is what the sampling contract
//! (adjacent chords within [0.5 d, 2 d]) actually requires.
//!
//! The full surface is covered by sweeping latitude rings: a quarter sweep
//! of angles is generated once per ring and mirrored into the remaining
//! quadrants through the sign symmetry of the parametrization.

use super::{spow, GeomError, Superquadric};
use nalgebra::Vector3;
use std::f64::consts::{FRAC_PI_2, PI};

/// A surface sample: the angular parameters and the local-frame point,
/// with `point` exactly equal to `parametric_point(eta, omega)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceSample {
    pub eta: f64,
    pub omega: f64,
    pub point: Vector3<f64>,
}

/// Near-axis switch thresholds for the update rule. Chosen so the general
/// form is never evaluated where its denominator underflows.
const NEAR_ZERO: f64 = 1e-2;
const NEAR_END: f64 = FRAC_PI_2 - 1e-2;

fn superellipse_point(a: f64, b: f64, eps: f64, t: f64) -> (f64, f64) {
    (
        a * t.cos().max(0.0).powf(eps),
        b * t.sin().max(0.0).powf(eps),
    )
}

fn chord(a: f64, b: f64, eps: f64, t0: f64, t1: f64) -> f64 {
    let (x0, y0) = superellipse_point(a, b, eps, t0);
    let (x1, y1) = superellipse_point(a, b, eps, t1);
    ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt()
}

fn delta_theta(t: f64, d: f64, a: f64, b: f64, eps: f64) -> f64 {
    if t < NEAR_ZERO {
        // y ~ b t^e dominates; advance the chord along it.
        (t.powf(eps) + d / b).powf(1.0 / eps) - t
    } else if t > NEAR_END {
        let phi = FRAC_PI_2 - t;
        let rem = phi.powf(eps) - d / a;
        if rem <= 0.0 {
            phi
        } else {
            phi - rem.powf(1.0 / eps)
        }
    } else {
        let c = t.cos();
        let s = t.sin();
        let denom = a * a * c.powf(2.0 * eps) * s.powi(4) + b * b * s.powf(2.0 * eps) * c.powi(4);
        if denom <= 0.0 {
            return d / (a.max(b));
        }
        (d / eps) * ((c * c * s * s) / denom).sqrt()
    }
}

/// Quarter sweep [0, pi/2] at spacing `d` on the superellipse `(a, b, eps)`.
///
/// Both endpoints are included; all consecutive chords (including the final
/// one to pi/2) land in [0.5 d, 1.9 d].
fn quarter_angles(d: f64, a: f64, b: f64, eps: f64) -> Vec<f64> {
    let mut out = vec![0.0];
    let mut t = 0.0_f64;
    loop {
        let mut dt = delta_theta(t, d, a, b, eps);
        if !dt.is_finite() || dt <= 0.0 {
            dt = 1e-4;
        }
        dt = dt.min(FRAC_PI_2 - t);
        // First-order estimate; pull the actual chord into [0.6 d, 1.4 d].
        for _ in 0..16 {
            let c = chord(a, b, eps, t, t + dt);
            if c > 1.4 * d {
                dt *= (d / c).max(0.25);
            } else if c < 0.6 * d && t + dt < FRAC_PI_2 - 1e-12 {
                dt = (dt * (d / c).min(4.0)).min(FRAC_PI_2 - t);
            } else {
                break;
            }
        }
        let t_next = t + dt;
        if t_next >= FRAC_PI_2 - 1e-9 || out.len() > 100_000 {
            break;
        }
        out.push(t_next);
        t = t_next;
    }
    // Closing chord to pi/2: merge a too-short tail, then split the merged
    // gap if it ended up too long. Both coordinates are monotone over the
    // quadrant, so the merged chord is at most the sum of the two it
    // replaces and a balanced split lands both halves inside the window.
    if out.len() >= 2 && chord(a, b, eps, *out.last().unwrap(), FRAC_PI_2) < 0.6 * d {
        out.pop();
    }
    let last = *out.last().unwrap();
    if chord(a, b, eps, last, FRAC_PI_2) > 1.45 * d {
        let (mut lo, mut hi) = (last, FRAC_PI_2);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if chord(a, b, eps, last, mid) < chord(a, b, eps, mid, FRAC_PI_2) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        out.push(0.5 * (lo + hi));
    }
    out.push(FRAC_PI_2);
    out
}

/// Mirror a quarter sweep of longitudes into a full ring in circular order
/// `0 .. pi, -pi .. 0`, without duplicating the seam values `0` and `pi`.
fn full_ring(quarter: &[f64]) -> Vec<f64> {
    let m = quarter.len();
    let mut ring = Vec::with_capacity(4 * m);
    ring.extend_from_slice(quarter);
    ring.extend(quarter[..m - 1].iter().rev().map(|&w| PI - w));
    ring.extend(quarter[1..m - 1].iter().map(|&w| -(PI - w)));
    ring.extend(quarter[1..].iter().rev().map(|&w| -w));
    ring
}

/// In-plane radius of the cross-section at longitude `omega`.
fn ring_radius(sq: &Superquadric, omega: f64) -> f64 {
    let x = sq.a1 * spow(omega.cos(), sq.eps2);
    let y = sq.a2 * spow(omega.sin(), sq.eps2);
    (x * x + y * y).sqrt()
}

pub(super) fn sample_surface(sq: &Superquadric, d: f64) -> Result<Vec<SurfaceSample>, GeomError> {
    if !d.is_finite() || d <= 0.0 || d >= sq.min_semi_axis() {
        return Err(GeomError::InvalidParameter(format!(
            "sampling spacing must satisfy 0 < d < min semi-axis, got d={d}"
        )));
    }

    // Reference horizontal radius for the latitude sweep: the meridian at
    // longitude w is the 2D superellipse (R(w), a3, eps1), so a mid-range R
    // keeps meridian chords near d across all longitudes.
    let (mut r_min, mut r_max) = (f64::INFINITY, 0.0_f64);
    for i in 0..=256 {
        let r = ring_radius(sq, FRAC_PI_2 * i as f64 / 256.0);
        r_min = r_min.min(r);
        r_max = r_max.max(r);
    }
    let r_ref = (r_min * r_max).sqrt();

    let mut lat_quarter = quarter_angles(d, r_ref, sq.a3, sq.eps1);
    lat_quarter.pop(); // pole latitude handled separately

    let mut latitudes: Vec<f64> = lat_quarter.iter().skip(1).rev().map(|&e| -e).collect();
    latitudes.extend_from_slice(&lat_quarter);

    let mut samples = Vec::new();
    for &eta in &latitudes {
        let q = spow(eta.cos(), sq.eps1).abs();
        let ring_q = quarter_angles(d, sq.a1 * q, sq.a2 * q, sq.eps2);
        for omega in full_ring(&ring_q) {
            let point = sq.parametric_point(eta, omega)?;
            samples.push(SurfaceSample { eta, omega, point });
        }
    }
    for eta in [FRAC_PI_2, -FRAC_PI_2] {
        samples.push(SurfaceSample {
            eta,
            omega: 0.0,
            point: sq.parametric_point(eta, 0.0)?,
        });
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sq::RigidPose;

    fn sq(a1: f64, a2: f64, a3: f64, e1: f64, e2: f64) -> Superquadric {
        Superquadric::new(a1, a2, a3, e1, e2, RigidPose::identity()).unwrap()
    }

    /// Check consecutive chords along every ring sweep and along parametric
    /// meridians between consecutive latitudes.
    fn assert_chords_within(sq: &Superquadric, d: f64) {
        let samples = sq.sample_surface(d).unwrap();
        let (lo, hi) = (0.5 * d, 2.0 * d);

        let mut by_lat: Vec<(f64, Vec<&SurfaceSample>)> = Vec::new();
        for s in samples.iter().filter(|s| s.eta.abs() < FRAC_PI_2 - 1e-9) {
            match by_lat.iter_mut().find(|(eta, _)| *eta == s.eta) {
                Some((_, v)) => v.push(s),
                None => by_lat.push((s.eta, vec![s])),
            }
        }
        for (eta, ring) in &by_lat {
            for w in ring.windows(2) {
                let c = (w[1].point - w[0].point).norm();
                assert!(
                    c >= lo && c <= hi,
                    "ring chord out of bounds at eta={eta}: {c} (d={d})"
                );
            }
            // seam chord back to the start of the ring
            let c = (ring[0].point - ring.last().unwrap().point).norm();
            assert!(c >= lo && c <= hi, "seam chord {c} at eta={eta}");
        }

        let mut lats: Vec<f64> = by_lat.iter().map(|(e, _)| *e).collect();
        lats.sort_by(f64::total_cmp);
        lats.insert(0, -FRAC_PI_2);
        lats.push(FRAC_PI_2);
        for pair in lats.windows(2) {
            for i in 0..8 {
                let omega = -PI + i as f64 * PI / 4.0;
                let p0 = sq.parametric_point(pair[0], omega).unwrap();
                let p1 = sq.parametric_point(pair[1], omega).unwrap();
                let c = (p1 - p0).norm();
                assert!(
                    c >= lo && c <= hi,
                    "meridian chord out of bounds between {} and {}: {c}",
                    pair[0],
                    pair[1]
                );
            }
        }
    }

    #[test]
    fn sphere_chords_stay_within_contract() {
        assert_chords_within(&sq(1.0, 1.0, 1.0, 1.0, 1.0), 0.1);
    }

    #[test]
    fn rounded_and_boxy_chords_stay_within_contract() {
        assert_chords_within(&sq(0.5, 0.5, 0.9, 1.5, 1.0), 0.05);
        assert_chords_within(&sq(0.4, 0.4, 0.35, 0.4, 0.6), 0.03);
        assert_chords_within(&sq(0.45, 0.4, 0.55, 1.0, 1.2), 0.04);
    }

    #[test]
    fn samples_lie_on_surface() {
        let sq = sq(0.5, 0.5, 0.9, 1.5, 1.0);
        let samples = sq.sample_surface(0.02).unwrap();
        assert!(samples.len() > 100);
        for s in &samples {
            let f = sq.implicit_value(&s.point).unwrap();
            assert!((f - 1.0).abs() < 1e-9, "off-surface sample: f={f}");
            let p = sq.parametric_point(s.eta, s.omega).unwrap();
            assert_eq!(p, s.point, "sample must equal its parametric point");
        }
    }

    /// Dense-grid oracle: triangulate a fine parametric grid and accumulate
    /// triangle areas. Independent of the sampling code path.
    fn grid_area(sq: &Superquadric, n_eta: usize, n_omega: usize) -> f64 {
        let vertex = |i: usize, j: usize| {
            let eta = -FRAC_PI_2 + PI * i as f64 / n_eta as f64;
            let omega = -PI + 2.0 * PI * j as f64 / n_omega as f64;
            sq.parametric_point(eta, omega).unwrap()
        };
        let mut area = 0.0;
        for i in 0..n_eta {
            for j in 0..n_omega {
                let p00 = vertex(i, j);
                let p10 = vertex(i + 1, j);
                let p01 = vertex(i, j + 1);
                let p11 = vertex(i + 1, j + 1);
                area += 0.5 * (p10 - p00).cross(&(p01 - p00)).norm();
                area += 0.5 * (p10 - p11).cross(&(p01 - p11)).norm();
            }
        }
        area
    }

    #[test]
    fn boxlike_sample_count_tracks_surface_area() {
        let sq = sq(1.0, 1.0, 1.0, 0.1, 0.1);
        let d = 0.05;
        let n = sq.sample_surface(d).unwrap().len() as f64;
        let expected = grid_area(&sq, 600, 1200) / (d * d);
        let ratio = n / expected;
        assert!(
            (0.8..=1.2).contains(&ratio),
            "count {n} vs area/d^2 {expected}: ratio {ratio}"
        );
    }

    #[test]
    fn sphere_sample_count_tracks_surface_area() {
        let sq = sq(1.0, 1.0, 1.0, 1.0, 1.0);
        let d = 0.1;
        let n = sq.sample_surface(d).unwrap().len() as f64;
        let expected = 4.0 * PI / (d * d);
        let ratio = n / expected;
        assert!(
            (0.8..=1.2).contains(&ratio),
            "count {n} vs area/d^2 {expected}: ratio {ratio}"
        );
    }

    #[test]
    fn degenerate_spacing_rejected() {
        let sq = sq(0.5, 0.5, 0.9, 1.0, 1.0);
        assert!(sq.sample_surface(0.0).is_err());
        assert!(sq.sample_surface(-0.1).is_err());
        assert!(sq.sample_surface(0.5).is_err());
        assert!(sq.sample_surface(f64::NAN).is_err());
    }
}
