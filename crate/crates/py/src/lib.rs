//! Python bindings: the geometry kernel, the pipeline stages, and the
//! scene tools, exposed as plain classes and functions. Deeply nested
//! results (grasp lists, pipeline reports) cross the boundary as JSON
//! strings; everything else is tuples and lists.

use nalgebra::Vector3;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use supergrasp_core::cloud;
use supergrasp_core::fit::{self, FitOptions, FitResultJson};
use supergrasp_core::grasp::{self, GraspCandidateJson, GraspStatus, GripperSpec};
use supergrasp_core::mirror::{self, CompletionParams};
use supergrasp_core::pipeline::{self, PipelineConfig, PlaneJson, SceneSpec};
use supergrasp_core::scene;
use supergrasp_core::sq::{PrincipalPlane, RigidPose};

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_plane(plane: Option<[f64; 4]>) -> scene::PlaneModel {
    match plane {
        Some([nx, ny, nz, d]) => scene::PlaneModel {
            normal: Vector3::new(nx, ny, nz).normalize(),
            d,
            inliers: vec![],
        },
        None => scene::PlaneModel {
            normal: Vector3::z(),
            d: 0.0,
            inliers: vec![],
        },
    }
}

fn section_plane(name: &str) -> PyResult<PrincipalPlane> {
    match name {
        "xz" => Ok(PrincipalPlane::Xz),
        "yz" => Ok(PrincipalPlane::Yz),
        "xy" => Ok(PrincipalPlane::Xy),
        other => Err(PyValueError::new_err(format!(
            "unknown section plane {other:?}, expected one of: xz, yz, xy"
        ))),
    }
}

/// An 11-parameter superquadric: semi-axes, shape exponents, rigid pose.
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
struct Superquadric {
    inner: supergrasp_core::Superquadric,
}

#[pymethods]
impl Superquadric {
    #[new]
    #[pyo3(signature = (a1, a2, a3, eps1, eps2, position=(0.0, 0.0, 0.0), rpy=(0.0, 0.0, 0.0)))]
    fn new(
        a1: f64,
        a2: f64,
        a3: f64,
        eps1: f64,
        eps2: f64,
        position: (f64, f64, f64),
        rpy: (f64, f64, f64),
    ) -> PyResult<Self> {
        let pose = RigidPose::new(
            Vector3::new(position.0, position.1, position.2),
            rpy.0,
            rpy.1,
            rpy.2,
        );
        Ok(Superquadric {
            inner: supergrasp_core::Superquadric::new(a1, a2, a3, eps1, eps2, pose).map_err(err)?,
        })
    }

    /// (a1, a2, a3, eps1, eps2)
    #[getter]
    fn params(&self) -> (f64, f64, f64, f64, f64) {
        let s = &self.inner;
        (s.a1, s.a2, s.a3, s.eps1, s.eps2)
    }

    /// (x, y, z, roll, pitch, yaw)
    #[getter]
    fn pose(&self) -> (f64, f64, f64, f64, f64, f64) {
        let p = &self.inner.pose;
        (
            p.position.x,
            p.position.y,
            p.position.z,
            p.roll,
            p.pitch,
            p.yaw,
        )
    }

    /// Inside-outside function of a local-frame point: 1 on the surface.
    fn implicit_value(&self, p: (f64, f64, f64)) -> PyResult<f64> {
        self.inner
            .implicit_value(&Vector3::new(p.0, p.1, p.2))
            .map_err(err)
    }

    /// Local-frame surface point at angular parameters (eta, omega).
    fn parametric_point(&self, eta: f64, omega: f64) -> PyResult<(f64, f64, f64)> {
        let p = self.inner.parametric_point(eta, omega).map_err(err)?;
        Ok((p.x, p.y, p.z))
    }

    /// Uniform-arclength surface samples at spacing `d`, local frame.
    fn sample_surface(&self, d: f64) -> PyResult<Vec<(f64, f64, f64)>> {
        Ok(self
            .inner
            .sample_surface(d)
            .map_err(err)?
            .iter()
            .map(|s| (s.point.x, s.point.y, s.point.z))
            .collect())
    }

    /// Cross-section curvature at `eta` for plane "xz", "yz", or "xy".
    fn curvature(&self, eta: f64, plane: &str) -> PyResult<f64> {
        self.inner
            .curvature_at(eta, section_plane(plane)?)
            .map_err(err)
    }

    /// Cross-section outward unit normal at `eta`.
    fn normal(&self, eta: f64, plane: &str) -> PyResult<(f64, f64)> {
        let n = self
            .inner
            .normal_at(eta, section_plane(plane)?)
            .map_err(err)?;
        Ok((n[0], n[1]))
    }

    /// Symmetric mean radial-distance error against another superquadric,
    /// percent.
    fn radial_error(&self, other: &Superquadric, d_sample: f64) -> PyResult<f64> {
        fit::radial_error(&self.inner, &other.inner, d_sample).map_err(err)
    }

    fn __repr__(&self) -> String {
        let s = &self.inner;
        format!(
            "Superquadric(a=[{:.4}, {:.4}, {:.4}], eps=[{:.3}, {:.3}])",
            s.a1, s.a2, s.a3, s.eps1, s.eps2
        )
    }
}

/// An immutable list of 3D points in a named frame.
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
struct PointCloud {
    inner: cloud::PointCloud,
}

#[pymethods]
impl PointCloud {
    #[new]
    #[pyo3(signature = (points, frame_id="camera"))]
    fn new(points: Vec<(f64, f64, f64)>, frame_id: &str) -> PyResult<Self> {
        let pts = points
            .iter()
            .map(|&(x, y, z)| Vector3::new(x, y, z))
            .collect();
        Ok(PointCloud {
            inner: cloud::PointCloud::new(pts, frame_id).map_err(err)?,
        })
    }

    /// Load an ASCII PCD file; returns (cloud, dropped_count).
    #[staticmethod]
    fn load_pcd(path: &str) -> PyResult<(PointCloud, usize)> {
        let loaded = cloud::load_pcd(path).map_err(err)?;
        Ok((
            PointCloud {
                inner: loaded.cloud,
            },
            loaded.dropped,
        ))
    }

    fn save_pcd(&self, path: &str) -> PyResult<()> {
        cloud::save_pcd(&self.inner, path).map_err(err)
    }

    fn points(&self) -> Vec<(f64, f64, f64)> {
        self.inner
            .points()
            .iter()
            .map(|p| (p.x, p.y, p.z))
            .collect()
    }

    #[getter]
    fn frame_id(&self) -> &str {
        self.inner.frame_id()
    }

    fn centroid(&self) -> PyResult<(f64, f64, f64)> {
        let c = self.inner.centroid().map_err(err)?;
        Ok((c.x, c.y, c.z))
    }

    fn remove_statistical_outliers(&self, k: usize, m: f64) -> PyResult<PointCloud> {
        Ok(PointCloud {
            inner: self.inner.remove_statistical_outliers(k, m).map_err(err)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "PointCloud({} points, frame={:?})",
            self.inner.len(),
            self.inner.frame_id()
        )
    }
}

/// RANSAC table-plane fit plus Euclidean clustering.
/// Returns ((nx, ny, nz, d), [cluster clouds]).
#[pyfunction]
#[pyo3(signature = (cloud, dist_thresh=0.005, max_iters=500, cluster_dist=0.02, min_size=100, seed=0))]
fn segment_scene(
    cloud: &PointCloud,
    dist_thresh: f64,
    max_iters: usize,
    cluster_dist: f64,
    min_size: usize,
    seed: u64,
) -> PyResult<((f64, f64, f64, f64), Vec<PointCloud>)> {
    let plane = scene::fit_table_plane(&cloud.inner, dist_thresh, max_iters, seed).map_err(err)?;
    let (_, above_idx, _) = scene::partition_by_plane(&cloud.inner, &plane, dist_thresh);
    let above = cloud.inner.select(&above_idx);
    let clusters = if above.is_empty() {
        Vec::new()
    } else {
        scene::cluster_objects(&above, cluster_dist, min_size).map_err(err)?
    };
    Ok((
        (plane.normal.x, plane.normal.y, plane.normal.z, plane.d),
        clusters
            .into_iter()
            .map(|c| PointCloud { inner: c.cloud })
            .collect(),
    ))
}

/// Outlier removal, pose estimation, and mirroring for one cluster.
/// Returns (completed cloud, (x, y, z, roll, pitch, yaw)).
#[pyfunction]
#[pyo3(signature = (cluster, plane=None, angle_step_deg=1.0, outlier_k=12, outlier_m=2.5, center_mode="bounding-box"))]
fn complete_cluster(
    cluster: &PointCloud,
    plane: Option<[f64; 4]>,
    angle_step_deg: f64,
    outlier_k: usize,
    outlier_m: f64,
    center_mode: &str,
) -> PyResult<(PointCloud, (f64, f64, f64, f64, f64, f64))> {
    let plane = parse_plane(plane);
    let center_mode = match center_mode {
        "bounding-box" => mirror::CenterMode::BoundingBox,
        "cluster-centroid" => mirror::CenterMode::ClusterCentroid,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown center mode {other:?}"
            )))
        }
    };
    let params = CompletionParams {
        angle_step: angle_step_deg.to_radians(),
        outlier_k,
        outlier_m,
        center_mode,
    };
    let c = scene::Cluster {
        cloud: cluster.inner.clone(),
        label: 0,
    };
    let completed = mirror::complete_all(std::slice::from_ref(&c), &plane, &params)
        .into_iter()
        .next()
        .unwrap()
        .map_err(err)?;
    let p = &completed.pose.pose;
    Ok((
        PointCloud {
            inner: completed.completed,
        },
        (
            p.position.x,
            p.position.y,
            p.position.z,
            p.roll,
            p.pitch,
            p.yaw,
        ),
    ))
}

/// Bounded Levenberg-Marquardt shape fit with the pose held fixed.
/// Returns (Superquadric, diagnostics JSON string).
#[pyfunction]
#[pyo3(signature = (cloud, pose, op_weight=false))]
fn fit_superquadric(
    cloud: &PointCloud,
    pose: (f64, f64, f64, f64, f64, f64),
    op_weight: bool,
) -> PyResult<(Superquadric, String)> {
    let pose = RigidPose::new(Vector3::new(pose.0, pose.1, pose.2), pose.3, pose.4, pose.5);
    let opts = FitOptions {
        op_weight,
        ..FitOptions::default()
    };
    let result = fit::fit_lm(&cloud.inner, &pose, &opts).map_err(err)?;
    let json = serde_json::to_string(&FitResultJson::from(&result))
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok((Superquadric { inner: result.sq }, json))
}

/// Ranked antipodal grasps for a two-finger gripper.
/// Returns (accepted_count, grasp list JSON string).
#[pyfunction]
#[pyo3(signature = (sq, width_m, depth_m, alpha_deg, plane=None, rotation_step_deg=15.0))]
fn synthesize_grasps(
    sq: &Superquadric,
    width_m: f64,
    depth_m: f64,
    alpha_deg: f64,
    plane: Option<[f64; 4]>,
    rotation_step_deg: f64,
) -> PyResult<(usize, String)> {
    let gripper = GripperSpec::new(width_m, depth_m, alpha_deg.to_radians()).map_err(err)?;
    let plane = parse_plane(plane);
    let t_wk = pipeline::plane_aligned_world(&plane);
    let opts = grasp::SynthesisOptions {
        rotation_step: rotation_step_deg.to_radians(),
    };
    let grasps = grasp::synthesize(&sq.inner, &gripper, &t_wk, &opts).map_err(err)?;
    let accepted = grasps
        .iter()
        .filter(|g| g.status == GraspStatus::Accepted)
        .count();
    let json: Vec<GraspCandidateJson> = grasps.iter().map(GraspCandidateJson::from).collect();
    Ok((
        accepted,
        serde_json::to_string(&json).map_err(|e| PyRuntimeError::new_err(e.to_string()))?,
    ))
}

/// Generate a synthetic single-view scene from a spec JSON string.
/// Returns (cloud, truth JSON string).
#[pyfunction]
#[pyo3(signature = (spec_json, sigma=0.002, seed=0))]
fn synth_scene(spec_json: &str, sigma: f64, seed: u64) -> PyResult<(PointCloud, String)> {
    let spec: SceneSpec = serde_json::from_str(spec_json).map_err(err)?;
    let out = pipeline::synth_scene(&spec, sigma, seed).map_err(err)?;
    let truth =
        serde_json::to_string(&out.truth).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok((PointCloud { inner: out.cloud }, truth))
}

/// Run the full pipeline from a config JSON file; returns the scene
/// summary as a JSON string. Raises on pipeline-level failure.
#[pyfunction]
fn run_pipeline(config_path: &str) -> PyResult<String> {
    let config: PipelineConfig =
        pipeline::read_json(std::path::Path::new(config_path)).map_err(err)?;
    let report = pipeline::run_pipeline(&config).map_err(err)?;
    serde_json::to_string(&report.summary).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Plane of a segment stage result as the `[nx, ny, nz, d]` array the
/// other functions accept.
#[pyfunction]
fn plane_from_json(plane_json: &str) -> PyResult<[f64; 4]> {
    let p: PlaneJson = serde_json::from_str(plane_json).map_err(err)?;
    Ok([p.normal[0], p.normal[1], p.normal[2], p.d])
}

#[pymodule]
fn supergrasp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<Superquadric>()?;
    m.add_class::<PointCloud>()?;
    m.add_function(wrap_pyfunction!(segment_scene, m)?)?;
    m.add_function(wrap_pyfunction!(complete_cluster, m)?)?;
    m.add_function(wrap_pyfunction!(fit_superquadric, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize_grasps, m)?)?;
    m.add_function(wrap_pyfunction!(synth_scene, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    m.add_function(wrap_pyfunction!(plane_from_json, m)?)?;
    Ok(())
}
