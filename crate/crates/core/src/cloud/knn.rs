//! Uniform-grid spatial index for exact neighbor queries.
//!
//! The contract is exactness, not asymptotics: radius queries scan every
//! cell overlapping the ball, k-NN expands cell shells until the remaining
//! shells provably cannot beat the current k-th distance.

use nalgebra::Vector3;
use std::collections::HashMap;

pub struct SpatialGrid<'a> {
    points: &'a [Vector3<f64>],
    cell: f64,
    map: HashMap<(i64, i64, i64), Vec<usize>>,
}

impl<'a> SpatialGrid<'a> {
    pub fn build(points: &'a [Vector3<f64>], cell: f64) -> Self {
        let cell = if cell.is_finite() && cell > 0.0 {
            cell
        } else {
            1.0
        };
        let mut map: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            map.entry(Self::key_for(p, cell)).or_default().push(i);
        }
        SpatialGrid { points, cell, map }
    }

    /// Cell size from the bounding box so that cells hold a handful of
    /// points on average.
    pub fn heuristic_cell(points: &[Vector3<f64>]) -> f64 {
        if points.is_empty() {
            return 1.0;
        }
        let mut min = points[0];
        let mut max = points[0];
        for p in points {
            min = min.inf(p);
            max = max.sup(p);
        }
        let diag = (max - min).norm();
        let est = diag / (points.len() as f64).cbrt();
        if est.is_finite() && est > 1e-12 {
            est
        } else {
            1.0
        }
    }

    fn key_for(p: &Vector3<f64>, cell: f64) -> (i64, i64, i64) {
        (
            (p.x / cell).floor() as i64,
            (p.y / cell).floor() as i64,
            (p.z / cell).floor() as i64,
        )
    }

    /// Indices of all points within `radius` of `center` (inclusive),
    /// ascending.
    pub fn within_radius(&self, center: &Vector3<f64>, radius: f64) -> Vec<usize> {
        let k = Self::key_for(center, self.cell);
        let reach = (radius / self.cell).ceil() as i64 + 1;
        let r2 = radius * radius;
        let mut out = Vec::new();
        for dx in -reach..=reach {
            for dy in -reach..=reach {
                for dz in -reach..=reach {
                    if let Some(cell) = self.map.get(&(k.0 + dx, k.1 + dy, k.2 + dz)) {
                        for &i in cell {
                            if (self.points[i] - center).norm_squared() <= r2 {
                                out.push(i);
                            }
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// The `k` nearest neighbors of point `query` (excluded itself),
    /// sorted by (distance, index).
    pub fn k_nearest(&self, query: usize, k: usize) -> Vec<(f64, usize)> {
        let center = &self.points[query];
        let ck = Self::key_for(center, self.cell);
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        let mut shell: i64 = 0;
        loop {
            // Points in shell m are at least (m-1)*cell away; once that
            // bound exceeds the current k-th distance the search is exact.
            if best.len() == k {
                let kth = best.last().unwrap().0;
                if (shell - 1).max(0) as f64 * self.cell > kth {
                    break;
                }
            }
            let mut visited_any = false;
            for dx in -shell..=shell {
                for dy in -shell..=shell {
                    for dz in -shell..=shell {
                        if dx.abs().max(dy.abs()).max(dz.abs()) != shell {
                            continue;
                        }
                        let Some(cell) = self.map.get(&(ck.0 + dx, ck.1 + dy, ck.2 + dz)) else {
                            continue;
                        };
                        visited_any = true;
                        for &i in cell {
                            if i == query {
                                continue;
                            }
                            let d = (self.points[i] - center).norm();
                            let entry = (d, i);
                            let pos = best
                                .binary_search_by(|probe| {
                                    probe.0.total_cmp(&entry.0).then(probe.1.cmp(&entry.1))
                                })
                                .unwrap_or_else(|e| e);
                            if pos < k {
                                best.insert(pos, entry);
                                best.truncate(k);
                            }
                        }
                    }
                }
            }
            // Ran past every occupied cell: nothing more to find.
            if !visited_any && shell as f64 * self.cell > self.extent_bound() {
                break;
            }
            shell += 1;
        }
        best
    }

    fn extent_bound(&self) -> f64 {
        let mut min = (i64::MAX, i64::MAX, i64::MAX);
        let mut max = (i64::MIN, i64::MIN, i64::MIN);
        for key in self.map.keys() {
            min = (min.0.min(key.0), min.1.min(key.1), min.2.min(key.2));
            max = (max.0.max(key.0), max.1.max(key.1), max.2.max(key.2));
        }
        let span = (max.0 - min.0).max(max.1 - min.1).max(max.2 - min.2);
        (span.max(1) as f64 + 2.0) * self.cell
    }
}
