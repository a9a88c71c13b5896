//! SE(3) operations, point clouds, nearest-neighbor association, normal
//! estimation, perturbation sampling, and the ICP pipeline.

mod cloud;
mod icp;
mod kdtree;
mod normals;
mod perturb;
mod scene;
mod se3;

pub use cloud::{read_ply, read_xyz, voxel_downsample, write_pose, write_xyz, PointCloud};
pub use icp::{
    icp, perturbed_init, point_to_plane_residual, point_to_point_error, pose_error,
    Correspondence, IcpMethod, IcpOptions, IcpResult,
};
pub use kdtree::KdTree;
pub use normals::estimate_normals;
pub use perturb::{sample_perturbation, DifficultyPreset};
pub use scene::{generate_scene_pair, SceneConfig, ScenePair};
pub use se3::{se3_exp, se3_log, Pose, Twist};

pub(crate) use se3::hat;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeomError {
    #[error("rotation angle within 1e-6 of pi; logarithm is not unique there")]
    AngleAtPi,
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("fixed cloud carries no normals; run normal estimation first")]
    MissingNormals,
    #[error("cloud has {points} points but {normals} normals")]
    NormalCountMismatch { points: usize, normals: usize },
    #[error("normal estimation needs more than {k} points, cloud has {size}")]
    TooFewPoints { k: usize, size: usize },
    #[error("rotation matrix is not orthonormal (drift {drift:.2e})")]
    NotOrthonormal { drift: f64 },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
