//! Command-line front end: each subcommand wraps one pipeline stage and
//! speaks the documented file formats (ASCII PCD, JSON), so chaining
//! `segment -> mirror -> fit -> grasp` reproduces `pipeline`.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};

use supergrasp_core::cloud::{self, PointCloud};
use supergrasp_core::fit::{self, FitOptions, FitResultJson, PoseJson};
use supergrasp_core::grasp::{self, GraspCandidateJson, GraspStatus, GripperSpec, GripperSpecJson};
use supergrasp_core::mirror::{self, CompletionParams};
use supergrasp_core::pipeline::{
    self, plane_aligned_world, read_json, write_json, EvalSuite, PipelineConfig, PlaneJson,
    SceneSpec,
};
use supergrasp_core::scene::{self, PlaneModel};
use supergrasp_core::sq::RigidPose;

#[derive(Parser)]
#[command(
    name = "supergrasp",
    about = "Superquadric recovery and antipodal grasp synthesis for tabletop point clouds",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the dominant table plane and cluster the objects above it.
    Segment(SegmentArgs),
    /// Estimate an object's pose and complete its cloud by mirroring.
    Mirror(MirrorArgs),
    /// Fit superquadric shape parameters to a completed cloud.
    Fit(FitArgs),
    /// Synthesize ranked antipodal grasps for a fitted superquadric.
    Grasp(GraspArgs),
    /// Run the full pipeline from a config file.
    Pipeline(PipelineArgs),
    /// Generate a synthetic single-view scene from a spec file.
    Synth(SynthArgs),
    /// Run the fitting-accuracy evaluation suite.
    Eval(EvalArgs),
}

#[derive(Args)]
struct SegmentArgs {
    /// Input scene (ASCII PCD).
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 0.005)]
    dist_thresh: f64,
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
    #[arg(long, default_value_t = 0.02)]
    cluster_dist: f64,
    #[arg(long, default_value_t = 100)]
    min_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Where plane.json and cluster_XXX.pcd are written.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct MirrorArgs {
    /// Input cluster (ASCII PCD).
    #[arg(long = "in")]
    input: PathBuf,
    /// Yaw sweep step, degrees.
    #[arg(long, default_value_t = 1.0)]
    angle_step: f64,
    /// Table plane from the segment stage; defaults to z = 0.
    #[arg(long)]
    plane: Option<PathBuf>,
    #[arg(long, default_value_t = 12)]
    outlier_k: usize,
    #[arg(long, default_value_t = 2.5)]
    outlier_m: f64,
    /// Center estimate: bounding-box (default) or cluster-centroid.
    #[arg(long, default_value = "bounding-box")]
    center_mode: String,
    /// Output completed cloud; defaults to <in>_completed.pcd.
    #[arg(long)]
    out_cloud: Option<PathBuf>,
    /// Output pose JSON; defaults to <in>_pose.json.
    #[arg(long)]
    out_pose: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    /// Completed cloud (ASCII PCD).
    #[arg(long = "in")]
    input: PathBuf,
    /// Object pose JSON from the mirror stage.
    #[arg(long)]
    pose: PathBuf,
    /// Weight residuals by the point's radial distance.
    #[arg(long)]
    op_weight: bool,
    /// Output fit JSON; defaults to <in>_sq.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GraspArgs {
    /// Fitted superquadric JSON from the fit stage.
    #[arg(long)]
    sq: PathBuf,
    /// Gripper config JSON: {width_m, depth_m, alpha_deg}.
    #[arg(long)]
    gripper: PathBuf,
    /// Table plane for the world-up direction; defaults to z = 0.
    #[arg(long)]
    plane: Option<PathBuf>,
    /// Grasp-frame rotation sampling step, degrees.
    #[arg(long, default_value_t = 15.0)]
    rotation_step: f64,
    /// Output grasp list; defaults to <sq>_grasps.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    /// Pipeline config JSON.
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// Scene spec JSON.
    #[arg(long)]
    spec: PathBuf,
    /// Isotropic Gaussian noise, meters.
    #[arg(long, default_value_t = 0.002)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output cloud; defaults to scene.pcd next to the spec.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output ground-truth JSON; defaults to truth.json next to the spec.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Evaluation suite JSON.
    #[arg(long)]
    suite: PathBuf,
    /// Output report JSON; defaults to eval_report.json next to the suite.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    };
    std::process::exit(code);
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Segment(args) => segment(args),
        Command::Mirror(args) => mirror_cmd(args),
        Command::Fit(args) => fit_cmd(args),
        Command::Grasp(args) => grasp_cmd(args),
        Command::Pipeline(args) => pipeline_cmd(args),
        Command::Synth(args) => synth_cmd(args),
        Command::Eval(args) => eval_cmd(args),
    }
}

fn load_cloud(path: &Path) -> Result<PointCloud> {
    let loaded = cloud::load_pcd(path).with_context(|| format!("loading {}", path.display()))?;
    if loaded.dropped > 0 {
        eprintln!("note: dropped {} non-finite points", loaded.dropped);
    }
    Ok(loaded.cloud)
}

fn load_plane(path: &Option<PathBuf>) -> Result<PlaneModel> {
    Ok(match path {
        Some(p) => PlaneModel::from(&read_json::<PlaneJson>(p)?),
        None => PlaneModel {
            normal: nalgebra::Vector3::z(),
            d: 0.0,
            inliers: vec![],
        },
    })
}

fn with_suffix(input: &Path, suffix: &str) -> PathBuf {
    let stem = input.file_stem().unwrap_or_default().to_string_lossy();
    input.with_file_name(format!("{stem}{suffix}"))
}

fn segment(args: SegmentArgs) -> Result<i32> {
    std::fs::create_dir_all(&args.out_dir)?;
    let cloud_in = load_cloud(&args.input)?;
    let plane = scene::fit_table_plane(&cloud_in, args.dist_thresh, args.max_iters, args.seed)?;
    let (_, above_idx, _) = scene::partition_by_plane(&cloud_in, &plane, args.dist_thresh);
    let above = cloud_in.select(&above_idx);
    let clusters = if above.is_empty() {
        Vec::new()
    } else {
        scene::cluster_objects(&above, args.cluster_dist, args.min_size)?
    };

    write_json(&args.out_dir.join("plane.json"), &PlaneJson::from(&plane))?;
    for c in &clusters {
        let path = args.out_dir.join(format!("cluster_{:03}.pcd", c.label));
        cloud::save_pcd(&c.cloud, &path)?;
    }
    println!(
        "plane normal [{:.4} {:.4} {:.4}] d {:.4}, {} inliers; {} cluster(s)",
        plane.normal.x,
        plane.normal.y,
        plane.normal.z,
        plane.d,
        plane.inliers.len(),
        clusters.len()
    );
    for c in &clusters {
        println!("  cluster_{:03}: {} points", c.label, c.cloud.len());
    }
    Ok(0)
}

fn mirror_cmd(args: MirrorArgs) -> Result<i32> {
    let cluster_cloud = load_cloud(&args.input)?;
    let plane = load_plane(&args.plane)?;
    let center_mode = match args.center_mode.as_str() {
        "bounding-box" => mirror::CenterMode::BoundingBox,
        "cluster-centroid" => mirror::CenterMode::ClusterCentroid,
        other => bail!("unknown center mode {other:?}"),
    };
    let params = CompletionParams {
        angle_step: args.angle_step.to_radians(),
        outlier_k: args.outlier_k,
        outlier_m: args.outlier_m,
        center_mode,
    };
    let cluster = scene::Cluster {
        cloud: cluster_cloud,
        label: 0,
    };
    let completed = mirror::complete_all(std::slice::from_ref(&cluster), &plane, &params)
        .into_iter()
        .next()
        .expect("one cluster in, one out")?;

    let out_cloud = args
        .out_cloud
        .unwrap_or_else(|| with_suffix(&args.input, "_completed.pcd"));
    let out_pose = args
        .out_pose
        .unwrap_or_else(|| with_suffix(&args.input, "_pose.json"));
    cloud::save_pcd(&completed.completed, &out_cloud)?;
    write_json(&out_pose, &PoseJson::from(&completed.pose.pose))?;
    println!(
        "completed {} -> {} points, yaw {:.2} deg -> {}",
        completed.cleaned.len(),
        completed.completed.len(),
        completed.pose.yaw.to_degrees(),
        out_cloud.display()
    );
    Ok(0)
}

fn fit_cmd(args: FitArgs) -> Result<i32> {
    let cloud_in = load_cloud(&args.input)?;
    let pose_json: PoseJson = read_json(&args.pose)?;
    let pose = RigidPose::from(&pose_json);
    let opts = FitOptions {
        op_weight: args.op_weight,
        ..FitOptions::default()
    };
    let result = fit::fit_lm(&cloud_in, &pose, &opts)?;
    let out = args
        .out
        .unwrap_or_else(|| with_suffix(&args.input, "_sq.json"));
    write_json(&out, &FitResultJson::from(&result))?;
    println!(
        "a = [{:.4} {:.4} {:.4}], eps = [{:.3} {:.3}], cost {:.3e}, {} iters, converged: {} -> {}",
        result.sq.a1,
        result.sq.a2,
        result.sq.a3,
        result.sq.eps1,
        result.sq.eps2,
        result.cost,
        result.iterations,
        result.converged,
        out.display()
    );
    Ok(0)
}

fn grasp_cmd(args: GraspArgs) -> Result<i32> {
    let fit_json: FitResultJson = read_json(&args.sq)?;
    let sq = fit_json.to_superquadric()?;
    let gripper_json: GripperSpecJson = read_json(&args.gripper)?;
    let gripper = GripperSpec::try_from(&gripper_json)?;
    let plane = load_plane(&args.plane)?;
    let t_wk = plane_aligned_world(&plane);
    let opts = grasp::SynthesisOptions {
        rotation_step: args.rotation_step.to_radians(),
    };
    let grasps = grasp::synthesize(&sq, &gripper, &t_wk, &opts)?;
    let accepted = grasps
        .iter()
        .filter(|g| g.status == GraspStatus::Accepted)
        .count();
    let out = args
        .out
        .unwrap_or_else(|| with_suffix(&args.sq, "_grasps.json"));
    let json: Vec<GraspCandidateJson> = grasps.iter().map(GraspCandidateJson::from).collect();
    write_json(&out, &json)?;
    println!(
        "{} accepted / {} discarded grasps -> {}",
        accepted,
        grasps.len() - accepted,
        out.display()
    );
    Ok(0)
}

fn pipeline_cmd(args: PipelineArgs) -> Result<i32> {
    let config: PipelineConfig = read_json(&args.config)?;
    let report = pipeline::run_pipeline(&config)?;
    for w in &report.summary.warnings {
        eprintln!("warning: {w}");
    }
    for f in &report.summary.failures {
        eprintln!("failure: {f}");
    }
    println!(
        "{} cluster(s), {} fit(s) ok, {} failed; outputs in {}",
        report.summary.cluster_count,
        report.summary.objects_ok,
        report.summary.objects_failed,
        config.output_dir.display()
    );
    for obj in &report.objects {
        println!(
            "  obj_{:03}: a=[{:.4} {:.4} {:.4}] eps=[{:.2} {:.2}] grasps {}/{}",
            obj.object_id,
            obj.fit.a1,
            obj.fit.a2,
            obj.fit.a3,
            obj.fit.eps1,
            obj.fit.eps2,
            obj.accepted_grasps,
            obj.accepted_grasps + obj.discarded_grasps
        );
    }
    Ok(if report.all_fits_ok() { 0 } else { 1 })
}

fn synth_cmd(args: SynthArgs) -> Result<i32> {
    let spec: SceneSpec = read_json(&args.spec)?;
    let out = args
        .out
        .unwrap_or_else(|| args.spec.with_file_name("scene.pcd"));
    let truth_path = args
        .truth
        .unwrap_or_else(|| args.spec.with_file_name("truth.json"));
    let synth = pipeline::synth_scene(&spec, args.sigma, args.seed)?;
    cloud::save_pcd(&synth.cloud, &out)?;
    write_json(&truth_path, &synth.truth)?;
    println!(
        "{} points ({} object samples, {} culled) -> {}",
        synth.cloud.len(),
        synth.object_samples,
        synth.culled,
        out.display()
    );
    Ok(0)
}

fn eval_cmd(args: EvalArgs) -> Result<i32> {
    let suite: EvalSuite = read_json(&args.suite)?;
    if suite.objects.is_empty() || suite.poses.is_empty() {
        bail!("evaluation suite needs at least one object and one pose");
    }
    let report = pipeline::eval_fitting(&suite)?;
    let out = args
        .out
        .unwrap_or_else(|| args.suite.with_file_name("eval_report.json"));
    write_json(&out, &report)?;

    println!(
        "{:<14} {:>7} {:>7} {:>7} {:>6} {:>6} {:>9} {:>9} {:>5}",
        "object", "a1", "a2", "a3", "e1", "e2", "avg time", "avg err", "fail"
    );
    for row in &report.summary {
        println!(
            "{:<14} {:>7.4} {:>7.4} {:>7.4} {:>6.3} {:>6.3} {:>8.3}s {:>8.2}% {:>5}",
            row.label,
            row.a1,
            row.a2,
            row.a3,
            row.eps1,
            row.eps2,
            row.avg_time_s,
            row.avg_error_pct,
            row.failures
        );
    }
    println!("report -> {}", out.display());
    Ok(0)
}
