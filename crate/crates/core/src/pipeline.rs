//! Pipeline orchestration: scene files in, per-object fits and grasps out.
//! Also the synthetic-scene generator and the fitting-accuracy evaluation
//! harness used to reproduce the desk-scale experiments.

use crate::cloud::{self, CloudError, PointCloud};
use crate::fit::{self, FitError, FitOptions, FitResultJson, PoseJson};
use crate::grasp::{
    self, GraspCandidateJson, GraspError, GraspStatus, GripperSpec, GripperSpecJson,
    SynthesisOptions,
};
use crate::mirror::{self, CompletionParams, MirrorError};
use crate::scene::{self, PlaneModel, SceneError};
use crate::sq::{GeomError, RigidPose, Superquadric};
use nalgebra::{Matrix3, Matrix4, Vector3};
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("JSON error in {path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error(transparent)]
    Cloud(#[from] CloudError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Mirror(#[from] MirrorError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Grasp(#[from] GraspError),
    #[error(transparent)]
    Geom(#[from] GeomError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| PipelineError::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let text = serde_json::to_string_pretty(value).map_err(|source| PipelineError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    std::fs::write(path, text).map_err(io_err(path))
}

// --- shared serialized forms -------------------------------------------------

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PlaneJson {
    pub normal: [f64; 3],
    pub d: f64,
    pub inlier_count: usize,
}

impl From<&PlaneModel> for PlaneJson {
    fn from(p: &PlaneModel) -> Self {
        PlaneJson {
            normal: [p.normal.x, p.normal.y, p.normal.z],
            d: p.d,
            inlier_count: p.inliers.len(),
        }
    }
}

impl From<&PlaneJson> for PlaneModel {
    fn from(j: &PlaneJson) -> Self {
        PlaneModel {
            normal: Vector3::new(j.normal[0], j.normal[1], j.normal[2]).normalize(),
            d: j.d,
            inliers: Vec::new(),
        }
    }
}

/// Superquadric parameters plus pose, as stored in scene specs and truth
/// files.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SqJson {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub pose: PoseJson,
}

impl SqJson {
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

impl From<&Superquadric> for SqJson {
    fn from(sq: &Superquadric) -> Self {
        SqJson {
            a1: sq.a1,
            a2: sq.a2,
            a3: sq.a3,
            eps1: sq.eps1,
            eps2: sq.eps2,
            pose: PoseJson::from(&sq.pose),
        }
    }
}

// --- segmentation / completion parameters ------------------------------------

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SegmentationParams {
    #[serde(default = "default_dist_thresh")]
    pub dist_thresh: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_cluster_dist")]
    pub cluster_dist: f64,
    #[serde(default = "default_min_size")]
    pub min_size: usize,
}

fn default_dist_thresh() -> f64 {
    0.005
}
fn default_max_iters() -> usize {
    500
}
fn default_cluster_dist() -> f64 {
    0.02
}
fn default_min_size() -> usize {
    100
}

impl Default for SegmentationParams {
    fn default() -> Self {
        SegmentationParams {
            dist_thresh: default_dist_thresh(),
            max_iters: default_max_iters(),
            cluster_dist: default_cluster_dist(),
            min_size: default_min_size(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct FitParams {
    #[serde(default)]
    pub op_weight: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub input: PathBuf,
    pub output_dir: PathBuf,
    pub gripper: GripperSpecJson,
    #[serde(default)]
    pub segmentation: SegmentationParams,
    #[serde(default = "default_angle_step_deg")]
    pub angle_step_deg: f64,
    #[serde(default = "default_outlier_k")]
    pub outlier_k: usize,
    #[serde(default = "default_outlier_m")]
    pub outlier_m: f64,
    /// "bounding-box" (default) or "cluster-centroid".
    #[serde(default)]
    pub center_mode: crate::mirror::CenterMode,
    #[serde(default)]
    pub fit: FitParams,
    #[serde(default = "default_rotation_step_deg")]
    pub rotation_step_deg: f64,
    /// Optional camera-to-world transform override. When absent, the world
    /// frame is aligned to the fitted table plane (z up along its normal).
    #[serde(default)]
    pub camera_pose: Option<PoseJson>,
    pub seed: u64,
    /// Set false to zero every timing field, making outputs byte-identical
    /// across runs.
    #[serde(default = "default_true")]
    pub record_timings: bool,
}

fn default_angle_step_deg() -> f64 {
    1.0
}
fn default_outlier_k() -> usize {
    12
}
fn default_outlier_m() -> f64 {
    2.5
}
fn default_rotation_step_deg() -> f64 {
    15.0
}
fn default_true() -> bool {
    true
}

// --- pipeline outputs ---------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageTimings {
    pub segment_s: f64,
    pub mirror_s: f64,
    pub fit_s: f64,
    pub grasp_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObjectResultJson {
    pub object_id: usize,
    pub cluster_size: usize,
    pub cleaned_size: usize,
    pub completed_size: usize,
    pub pose: PoseJson,
    pub yaw: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub yaw_residual: Option<f64>,
    pub fit: FitResultJson,
    pub accepted_grasps: usize,
    pub discarded_grasps: usize,
    pub grasps: Vec<GraspCandidateJson>,
    pub timings: StageTimings,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneSummaryJson {
    pub input: PathBuf,
    pub dropped_points: usize,
    pub plane: PlaneJson,
    pub cluster_count: usize,
    pub objects_ok: usize,
    pub objects_failed: usize,
    pub warnings: Vec<String>,
    pub failures: Vec<String>,
}

#[derive(Debug)]
pub struct PipelineReport {
    pub summary: SceneSummaryJson,
    pub objects: Vec<ObjectResultJson>,
}

impl PipelineReport {
    /// Exit contract: success iff every cluster produced a fit (empty
    /// grasp lists are fine).
    pub fn all_fits_ok(&self) -> bool {
        self.summary.objects_failed == 0
    }
}

/// Rigid camera-to-world transform aligning +z with the plane normal and
/// placing the origin on the plane.
pub fn plane_aligned_world(plane: &PlaneModel) -> Matrix4<f64> {
    let f = plane.frame();
    let r = Matrix3::from_rows(&[f.u.transpose(), f.v.transpose(), f.normal.transpose()]);
    let mut t = Matrix4::identity();
    t.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
    t.fixed_view_mut::<3, 1>(0, 3).copy_from(&(-(r * f.origin)));
    t
}

/// Run load -> plane -> cluster -> mirror -> fit -> grasp, writing
/// per-object artifacts (result JSON, mirrored-cloud PCD, fitted-surface
/// PCD) and a scene summary into `config.output_dir`.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineReport, PipelineError> {
    std::fs::create_dir_all(&config.output_dir).map_err(io_err(&config.output_dir))?;
    let mut warnings = Vec::new();
    let mut failures = Vec::new();

    let t0 = std::time::Instant::now();
    let loaded = cloud::load_pcd(&config.input)?;
    if loaded.dropped > 0 {
        warnings.push(format!(
            "dropped {} non-finite points on load",
            loaded.dropped
        ));
    }
    let cloud = loaded.cloud;

    let plane = scene::fit_table_plane(
        &cloud,
        config.segmentation.dist_thresh,
        config.segmentation.max_iters,
        config.seed,
    )?;
    let (_, above_idx, below_idx) =
        scene::partition_by_plane(&cloud, &plane, config.segmentation.dist_thresh);
    if !below_idx.is_empty() {
        warnings.push(format!(
            "{} points below the table plane were discarded",
            below_idx.len()
        ));
    }
    let above = cloud.select(&above_idx);
    let clusters = if above.is_empty() {
        Vec::new()
    } else {
        scene::cluster_objects(
            &above,
            config.segmentation.cluster_dist,
            config.segmentation.min_size,
        )?
    };
    if clusters.is_empty() {
        warnings.push("no object clusters above the table plane".into());
    }
    let segment_s = t0.elapsed().as_secs_f64();

    let t_wk = match &config.camera_pose {
        Some(p) => RigidPose::from(p).homogeneous(),
        None => plane_aligned_world(&plane),
    };
    let completion = CompletionParams {
        angle_step: config.angle_step_deg.to_radians(),
        outlier_k: config.outlier_k,
        outlier_m: config.outlier_m,
        center_mode: config.center_mode,
    };
    let fit_opts = FitOptions {
        op_weight: config.fit.op_weight,
        ..FitOptions::default()
    };
    let synth_opts = SynthesisOptions {
        rotation_step: config.rotation_step_deg.to_radians(),
    };
    let gripper = GripperSpec::try_from(&config.gripper)?;

    let outcomes: Vec<Result<ProcessedObject, String>> = clusters
        .par_iter()
        .map(|cluster| {
            process_object(
                cluster,
                &plane,
                &t_wk,
                &completion,
                &fit_opts,
                &synth_opts,
                &gripper,
                segment_s,
                config.record_timings,
            )
            .map_err(|e| format!("object {}: {e}", cluster.label))
        })
        .collect();

    let mut objects = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(processed) => {
                let stem = config
                    .output_dir
                    .join(format!("obj_{:03}", processed.json.object_id));
                write_json(&stem.with_extension("json"), &processed.json)?;
                cloud::save_pcd(&processed.completed, stem.with_extension("mirrored.pcd"))?;
                let sq = processed.json.fit.to_superquadric()?;
                let d = (sq.min_semi_axis() / 8.0).max(1e-4);
                let samples = sq.sample_surface(d)?;
                let surf = PointCloud::new(
                    samples
                        .iter()
                        .map(|s| sq.pose.to_parent(&s.point))
                        .collect(),
                    cloud.frame_id(),
                )?;
                cloud::save_pcd(&surf, stem.with_extension("sq.pcd"))?;
                objects.push(processed.json);
            }
            Err(msg) => failures.push(msg),
        }
    }

    let summary = SceneSummaryJson {
        input: config.input.clone(),
        dropped_points: loaded.dropped,
        plane: PlaneJson::from(&plane),
        cluster_count: clusters.len(),
        objects_ok: objects.len(),
        objects_failed: failures.len(),
        warnings,
        failures,
    };
    write_json(&config.output_dir.join("scene_summary.json"), &summary)?;
    Ok(PipelineReport { summary, objects })
}

struct ProcessedObject {
    json: ObjectResultJson,
    completed: PointCloud,
}

#[allow(clippy::too_many_arguments)]
fn process_object(
    cluster: &scene::Cluster,
    plane: &PlaneModel,
    t_wk: &Matrix4<f64>,
    completion: &CompletionParams,
    fit_opts: &FitOptions,
    synth_opts: &SynthesisOptions,
    gripper: &GripperSpec,
    segment_s: f64,
    record_timings: bool,
) -> Result<ProcessedObject, PipelineError> {
    let t0 = std::time::Instant::now();
    let batch = mirror::complete_all(std::slice::from_ref(cluster), plane, completion);
    let completed = batch.into_iter().next().expect("one cluster in, one out")?;
    let mirror_s = t0.elapsed().as_secs_f64();

    let t1 = std::time::Instant::now();
    let mut fit_result = fit::fit_lm(&completed.completed, &completed.pose.pose, fit_opts)?;
    let fit_s = t1.elapsed().as_secs_f64();

    let t2 = std::time::Instant::now();
    let grasps = grasp::synthesize(&fit_result.sq, gripper, t_wk, synth_opts)?;
    let grasp_s = t2.elapsed().as_secs_f64();

    let accepted = grasps
        .iter()
        .filter(|g| g.status == GraspStatus::Accepted)
        .count();
    if !record_timings {
        fit_result.time_s = 0.0;
    }
    let timings = if record_timings {
        StageTimings {
            segment_s,
            mirror_s,
            fit_s,
            grasp_s,
        }
    } else {
        StageTimings {
            segment_s: 0.0,
            mirror_s: 0.0,
            fit_s: 0.0,
            grasp_s: 0.0,
        }
    };
    let json = ObjectResultJson {
        object_id: cluster.label,
        cluster_size: cluster.cloud.len(),
        cleaned_size: completed.cleaned.len(),
        completed_size: completed.completed.len(),
        pose: PoseJson::from(&completed.pose.pose),
        yaw: completed.pose.yaw,
        yaw_residual: completed
            .pose
            .yaw_residual
            .is_finite()
            .then_some(completed.pose.yaw_residual),
        fit: FitResultJson::from(&fit_result),
        accepted_grasps: accepted,
        discarded_grasps: grasps.len() - accepted,
        grasps: grasps.iter().map(GraspCandidateJson::from).collect(),
        timings,
    };
    Ok(ProcessedObject {
        json,
        completed: completed.completed,
    })
}

// --- synthetic scenes ---------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanePatchSpec {
    #[serde(default = "default_patch_half_extent")]
    pub half_extent: f64,
    #[serde(default = "default_patch_spacing")]
    pub spacing: f64,
}

fn default_patch_half_extent() -> f64 {
    0.5
}
fn default_patch_spacing() -> f64 {
    0.01
}

impl Default for PlanePatchSpec {
    fn default() -> Self {
        PlanePatchSpec {
            half_extent: default_patch_half_extent(),
            spacing: default_patch_spacing(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneSpec {
    pub objects: Vec<SqJson>,
    #[serde(default = "default_camera")]
    pub camera_position: [f64; 3],
    #[serde(default = "default_sample_spacing")]
    pub sample_spacing: f64,
    /// Back-face culling against the camera (single-view simulation).
    #[serde(default = "default_true")]
    pub cull: bool,
    /// Table-plane patch at z = 0; `None` omits the table entirely.
    #[serde(default = "default_patch")]
    pub plane: Option<PlanePatchSpec>,
}

fn default_camera() -> [f64; 3] {
    // Elevated oblique viewpoint: a near-vertical rig keeps the whole
    // silhouette visible, which the center estimate relies on.
    [0.45, 0.35, 1.8]
}
fn default_sample_spacing() -> f64 {
    0.005
}
fn default_patch() -> Option<PlanePatchSpec> {
    Some(PlanePatchSpec::default())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneTruth {
    pub objects: Vec<SqJson>,
    pub camera_position: [f64; 3],
    pub sigma: f64,
    pub seed: u64,
}

#[derive(Debug)]
pub struct SynthOutput {
    pub cloud: PointCloud,
    pub truth: SceneTruth,
    /// Number of object surface samples removed by back-face culling.
    pub culled: usize,
    /// Number of object samples before culling.
    pub object_samples: usize,
}

/// Generate a single-view synthetic capture: sampled object surfaces with
/// back-facing points culled, isotropic Gaussian noise, and an optional
/// table patch. Deterministic per seed.
pub fn synth_scene(spec: &SceneSpec, sigma: f64, seed: u64) -> Result<SynthOutput, PipelineError> {
    if spec.objects.is_empty() {
        return Err(PipelineError::InvalidScene("no objects in scene".into()));
    }
    let sqs: Vec<Superquadric> = spec
        .objects
        .iter()
        .map(|o| o.to_superquadric())
        .collect::<Result<_, _>>()?;

    // Overlap check on conservative world AABBs of the local bounding boxes.
    let boxes: Vec<crate::cloud::Aabb> = sqs.iter().map(world_box).collect();
    for i in 0..boxes.len() {
        for j in (i + 1)..boxes.len() {
            if boxes[i].overlaps(&boxes[j]) {
                return Err(PipelineError::InvalidScene(format!(
                    "objects {i} and {j} overlap"
                )));
            }
        }
    }

    let cam = Vector3::new(
        spec.camera_position[0],
        spec.camera_position[1],
        spec.camera_position[2],
    );
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma.max(0.0))
        .map_err(|e| PipelineError::InvalidScene(format!("bad noise sigma {sigma}: {e}")))?;
    let noise = |rng: &mut rand_chacha::ChaCha8Rng| {
        if sigma > 0.0 {
            Vector3::new(normal.sample(rng), normal.sample(rng), normal.sample(rng))
        } else {
            Vector3::zeros()
        }
    };

    let mut points = Vec::new();
    let mut culled = 0usize;
    let mut object_samples = 0usize;
    for sq in &sqs {
        let rot = sq.pose.rotation();
        for s in sq.sample_surface(spec.sample_spacing)? {
            object_samples += 1;
            let world = sq.pose.to_parent(&s.point);
            if spec.cull {
                let n_world = rot * sq.outward_normal(&s.point)?;
                let view = world - cam;
                if n_world.dot(&view) >= 0.0 {
                    culled += 1;
                    continue;
                }
            }
            points.push(world + noise(&mut rng));
        }
    }

    if let Some(patch) = &spec.plane {
        let n = (2.0 * patch.half_extent / patch.spacing).round() as i64;
        for i in 0..=n {
            for j in 0..=n {
                let p = Vector3::new(
                    -patch.half_extent + i as f64 * patch.spacing,
                    -patch.half_extent + j as f64 * patch.spacing,
                    0.0,
                );
                // keep the table clear under each object footprint
                let occluded = boxes
                    .iter()
                    .any(|b| p.x >= b.min.x && p.x <= b.max.x && p.y >= b.min.y && p.y <= b.max.y);
                if !occluded {
                    points.push(p + noise(&mut rng));
                }
            }
        }
    }

    Ok(SynthOutput {
        cloud: PointCloud::new(points, "camera")?,
        truth: SceneTruth {
            objects: spec.objects.clone(),
            camera_position: spec.camera_position,
            sigma,
            seed,
        },
        culled,
        object_samples,
    })
}

fn world_box(sq: &Superquadric) -> crate::cloud::Aabb {
    let h = sq.local_half_extents();
    let mut min = Vector3::repeat(f64::INFINITY);
    let mut max = Vector3::repeat(f64::NEG_INFINITY);
    for sx in [-1.0, 1.0] {
        for sy in [-1.0, 1.0] {
            for sz in [-1.0, 1.0] {
                let corner = sq
                    .pose
                    .to_parent(&Vector3::new(sx * h.x, sy * h.y, sz * h.z));
                min = min.inf(&corner);
                max = max.sup(&corner);
            }
        }
    }
    crate::cloud::Aabb { min, max }
}

// --- evaluation harness --------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalObject {
    pub label: String,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub eps1: f64,
    pub eps2: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EvalPose {
    pub x: f64,
    pub y: f64,
    pub yaw_deg: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalSuite {
    pub objects: Vec<EvalObject>,
    pub poses: Vec<EvalPose>,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    pub seed: u64,
    #[serde(default = "default_camera")]
    pub camera_position: [f64; 3],
    #[serde(default = "default_sample_spacing")]
    pub sample_spacing: f64,
    #[serde(default = "default_true")]
    pub cull: bool,
    #[serde(default = "default_eval_gripper")]
    pub gripper: GripperSpecJson,
    #[serde(default)]
    pub segmentation: SegmentationParams,
    /// Median-of-N repeated fits for the reported time (the fit itself is
    /// deterministic).
    #[serde(default = "default_timing_runs")]
    pub timing_runs: usize,
}

fn default_sigma() -> f64 {
    0.002
}
fn default_eval_gripper() -> GripperSpecJson {
    GripperSpecJson {
        width_m: 0.08,
        depth_m: 0.07,
        alpha_deg: 45.0,
    }
}
fn default_timing_runs() -> usize {
    3
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalRecord {
    pub label: String,
    pub pose_index: usize,
    pub truth: SqJson,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recovered: Option<FitResultJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radial_error_pct: Option<f64>,
    pub fit_time_s: f64,
    pub accepted_grasps: usize,
    pub discarded_grasps: usize,
    pub failed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalSummaryRow {
    pub label: String,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub avg_time_s: f64,
    pub avg_error_pct: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub records: Vec<EvalRecord>,
    pub summary: Vec<EvalSummaryRow>,
}

/// Fit accuracy over every (object, pose) cell: synthesize a single-object
/// scene, push it through the pipeline stages in-process, and compare the
/// recovered superquadric against the ground truth by radial error.
pub fn eval_fitting(suite: &EvalSuite) -> Result<EvalReport, PipelineError> {
    let cells: Vec<(usize, usize)> = (0..suite.objects.len())
        .flat_map(|o| (0..suite.poses.len()).map(move |p| (o, p)))
        .collect();

    let records: Vec<EvalRecord> = cells
        .par_iter()
        .map(|&(oi, pi)| eval_cell(suite, oi, pi))
        .collect();

    let mut summary = Vec::new();
    for (oi, obj) in suite.objects.iter().enumerate() {
        let rows: Vec<&EvalRecord> = records.iter().filter(|r| r.label == obj.label).collect();
        let ok: Vec<&&EvalRecord> = rows.iter().filter(|r| !r.failed).collect();
        let n = ok.len().max(1) as f64;
        let mean_params = |f: fn(&FitResultJson) -> f64| -> f64 {
            ok.iter()
                .filter_map(|r| r.recovered.as_ref().map(f))
                .sum::<f64>()
                / n
        };
        summary.push(EvalSummaryRow {
            label: obj.label.clone(),
            a1: mean_params(|r| r.a1),
            a2: mean_params(|r| r.a2),
            a3: mean_params(|r| r.a3),
            eps1: mean_params(|r| r.eps1),
            eps2: mean_params(|r| r.eps2),
            avg_time_s: ok.iter().map(|r| r.fit_time_s).sum::<f64>() / n,
            avg_error_pct: ok.iter().filter_map(|r| r.radial_error_pct).sum::<f64>() / n,
            failures: rows.len() - ok.len(),
        });
        let _ = oi;
    }
    Ok(EvalReport { records, summary })
}

fn eval_cell(suite: &EvalSuite, oi: usize, pi: usize) -> EvalRecord {
    let obj = &suite.objects[oi];
    let pose = &suite.poses[pi];
    let truth = SqJson {
        a1: obj.a1,
        a2: obj.a2,
        a3: obj.a3,
        eps1: obj.eps1,
        eps2: obj.eps2,
        pose: PoseJson {
            x: pose.x,
            y: pose.y,
            z: obj.a3, // resting on the table plane
            roll: 0.0,
            pitch: 0.0,
            yaw: pose.yaw_deg.to_radians(),
        },
    };
    let fail = |msg: String| EvalRecord {
        label: obj.label.clone(),
        pose_index: pi,
        truth,
        recovered: None,
        radial_error_pct: None,
        fit_time_s: 0.0,
        accepted_grasps: 0,
        discarded_grasps: 0,
        failed: true,
        failure: Some(msg),
    };

    let spec = SceneSpec {
        objects: vec![truth],
        camera_position: suite.camera_position,
        sample_spacing: suite.sample_spacing,
        cull: suite.cull,
        plane: Some(PlanePatchSpec::default()),
    };
    let seed = suite
        .seed
        .wrapping_mul(1_000_003)
        .wrapping_add((oi * 1000 + pi) as u64);
    let synth = match synth_scene(&spec, suite.sigma, seed) {
        Ok(s) => s,
        Err(e) => return fail(format!("synth: {e}")),
    };

    let run = || -> Result<(FitResultJson, f64, usize, usize), PipelineError> {
        let plane = scene::fit_table_plane(
            &synth.cloud,
            suite.segmentation.dist_thresh,
            suite.segmentation.max_iters,
            seed,
        )?;
        let (_, above_idx, _) =
            scene::partition_by_plane(&synth.cloud, &plane, suite.segmentation.dist_thresh);
        let above = synth.cloud.select(&above_idx);
        let clusters = scene::cluster_objects(
            &above,
            suite.segmentation.cluster_dist,
            suite.segmentation.min_size,
        )?;
        let cluster = clusters.first().ok_or_else(|| {
            PipelineError::InvalidScene("no cluster recovered from synthetic scene".into())
        })?;
        let completed = mirror::complete_all(
            std::slice::from_ref(cluster),
            &plane,
            &CompletionParams::default(),
        )
        .into_iter()
        .next()
        .unwrap()?;

        let mut times = Vec::new();
        let mut fit_result = None;
        for _ in 0..suite.timing_runs.max(1) {
            let r = fit::fit_lm(
                &completed.completed,
                &completed.pose.pose,
                &FitOptions::default(),
            )?;
            times.push(r.time_s);
            fit_result = Some(r);
        }
        times.sort_by(f64::total_cmp);
        let mut fit_result = fit_result.unwrap();
        fit_result.time_s = times[times.len() / 2];

        let truth_sq = truth.to_superquadric()?;
        let err = fit::radial_error(&truth_sq, &fit_result.sq, suite.sample_spacing * 2.0)?;

        let gripper = GripperSpec::try_from(&suite.gripper)?;
        let t_wk = plane_aligned_world(&plane);
        let grasps = grasp::synthesize(
            &fit_result.sq,
            &gripper,
            &t_wk,
            &SynthesisOptions::default(),
        )?;
        let accepted = grasps
            .iter()
            .filter(|g| g.status == GraspStatus::Accepted)
            .count();
        Ok((
            FitResultJson::from(&fit_result),
            err,
            accepted,
            grasps.len() - accepted,
        ))
    };

    match run() {
        Ok((recovered, err, accepted, discarded)) => EvalRecord {
            label: obj.label.clone(),
            pose_index: pi,
            truth,
            fit_time_s: recovered.time_s,
            recovered: Some(recovered),
            radial_error_pct: Some(err),
            accepted_grasps: accepted,
            discarded_grasps: discarded,
            failed: false,
            failure: None,
        },
        Err(e) => fail(e.to_string()),
    }
}
