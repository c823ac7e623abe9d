//! Superquadric recovery and grasp synthesis for tabletop scenes.
//!
//! The crate implements a complete single-view pipeline:
//!
//! 1. [`scene`] — dominant-plane removal (RANSAC) and Euclidean clustering.
//! 2. [`mirror`] — per-object pose estimation (centroid + yaw under a z-up
//!    assumption) and point-cloud completion by reflection through the
//!    estimated center.
//! 3. [`fit`] — bounded Levenberg–Marquardt recovery of the five superquadric
//!    shape parameters from the completed cloud, pose held fixed.
//! 4. [`grasp`] — closed-form antipodal grasp synthesis for a two-finger
//!    gripper on the fitted superquadric, with approach filtering and ranking.
//!
//! [`sq`] is the standalone geometry kernel (implicit/parametric evaluation,
//! uniform surface sampling, cross-section curvature and normals) and
//! [`cloud`] the point-cloud value type with ASCII PCD I/O. [`pipeline`]
//! orchestrates the stages, generates synthetic scenes, and runs the
//! fitting-accuracy evaluation harness.

pub mod cloud;
pub mod fit;
pub mod grasp;
pub mod mirror;
pub mod pipeline;
pub mod scene;
pub mod sq;

pub use cloud::{Aabb, PointCloud};
pub use fit::{FitOptions, FitResult};
pub use grasp::{GraspCandidate, GraspStatus, GripperSpec};
pub use mirror::ObjectPoseEstimate;
pub use scene::{Cluster, PlaneModel};
pub use sq::{RigidPose, Superquadric, SurfaceSample};
