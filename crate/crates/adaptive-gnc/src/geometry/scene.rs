//! Synthetic room-corner scenes for the alignment benchmark: a floor, two
//! walls, and clutter spheres, sampled independently for the fixed and
//! moving clouds and cropped to a configurable overlap fraction.

use super::{Pose, PointCloud, Twist};
use crate::stats::standard_normal;
use nalgebra::Vector3;
use rand::Rng;

#[derive(Debug, Clone)]
pub struct SceneConfig {
    /// Room extent along x, y, z in meters.
    pub length: f64,
    pub width: f64,
    pub height: f64,
    /// Scan overlap ratio in (0, 1]: the probability that a point of one
    /// cloud has a counterpart region visible in the other. Each cloud
    /// independently keeps this fraction of the scene, losing randomly
    /// placed occlusion patches; scattered patches mimic viewpoint
    /// occlusion rather than a coherent crop.
    pub overlap: f64,
    /// Mean surface sample spacing before voxel downsampling.
    pub spacing: f64,
    /// Gaussian noise added to every sampled point.
    pub noise_sigma: f64,
    /// Measurement-noise scale stored on the clouds (the covariance model,
    /// not necessarily equal to the injected noise).
    pub sigma_point: f64,
    pub sphere_count: usize,
    pub sphere_radius: f64,
    /// Radius of the occlusion patches.
    pub occlusion_radius: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            length: 4.0,
            width: 3.0,
            height: 2.0,
            overlap: 0.7,
            spacing: 0.05,
            noise_sigma: 0.01,
            sigma_point: 0.03,
            sphere_count: 8,
            sphere_radius: 0.25,
            occlusion_radius: 0.55,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScenePair {
    /// Fixed cloud in the reference frame.
    pub fixed: PointCloud,
    /// Moving cloud in its own frame.
    pub moving: PointCloud,
    /// Ground truth: maps moving-frame points into the reference frame.
    pub truth: Pose,
}

struct Sphere {
    center: Vector3<f64>,
    radius: f64,
}

fn sample_scene<R: Rng + ?Sized>(
    cfg: &SceneConfig,
    spheres: &[Sphere],
    rng: &mut R,
) -> Vec<Vector3<f64>> {
    let density = 1.0 / (cfg.spacing * cfg.spacing);
    let mut points = Vec::new();
    let mut patch = |count: usize, f: &mut dyn FnMut(&mut R) -> Vector3<f64>| {
        for _ in 0..count {
            let p = f(rng);
            points.push(Vector3::new(
                p.x + cfg.noise_sigma * standard_normal(rng),
                p.y + cfg.noise_sigma * standard_normal(rng),
                p.z + cfg.noise_sigma * standard_normal(rng),
            ));
        }
    };

    // Floor z = 0.
    let floor_count = (cfg.length * cfg.width * density) as usize;
    patch(floor_count, &mut |rng| {
        Vector3::new(
            rng.random::<f64>() * cfg.length,
            rng.random::<f64>() * cfg.width,
            0.0,
        )
    });
    // Four walls. Opposing pairs pin each horizontal translation from both
    // sides, so a slide along one wall direction cannot stay
    // plane-consistent by sacrificing a single minority patch.
    let wall_y_count = (cfg.length * cfg.height * density) as usize;
    for y in [0.0, cfg.width] {
        patch(wall_y_count, &mut |rng| {
            Vector3::new(
                rng.random::<f64>() * cfg.length,
                y,
                rng.random::<f64>() * cfg.height,
            )
        });
    }
    let wall_x_count = (cfg.width * cfg.height * density) as usize;
    for x in [0.0, cfg.length] {
        patch(wall_x_count, &mut |rng| {
            Vector3::new(
                x,
                rng.random::<f64>() * cfg.width,
                rng.random::<f64>() * cfg.height,
            )
        });
    }
    // Clutter spheres resting on the floor.
    for sphere in spheres {
        let count =
            (4.0 * std::f64::consts::PI * sphere.radius * sphere.radius * density) as usize;
        patch(count, &mut |rng| {
            let dir = Vector3::new(
                standard_normal(rng),
                standard_normal(rng),
                standard_normal(rng),
            )
            .normalize();
            sphere.center + dir * sphere.radius
        });
    }
    points
}

/// Delete points inside randomly placed balls until at most `keep`
/// fraction of the cloud survives.
fn occlude<R: Rng + ?Sized>(
    points: Vec<Vector3<f64>>,
    cfg: &SceneConfig,
    keep: f64,
    rng: &mut R,
) -> Vec<Vector3<f64>> {
    let target = (points.len() as f64 * keep) as usize;
    let mut kept = points;
    for _ in 0..200 {
        if kept.len() <= target {
            break;
        }
        let center = Vector3::new(
            rng.random::<f64>() * cfg.length,
            rng.random::<f64>() * cfg.width,
            rng.random::<f64>() * cfg.height,
        );
        let r2 = cfg.occlusion_radius * cfg.occlusion_radius;
        kept.retain(|p| (p - center).norm_squared() > r2);
    }
    kept
}

/// Generate a fixed/moving cloud pair of the same scene with independent
/// samplings, the requested overlap fraction, and a randomized ground
/// truth transform between the frames.
pub fn generate_scene_pair<R: Rng + ?Sized>(cfg: &SceneConfig, rng: &mut R) -> ScenePair {
    assert!(cfg.overlap > 0.0 && cfg.overlap <= 1.0);

    let spheres: Vec<Sphere> = (0..cfg.sphere_count)
        .map(|_| {
            let radius = cfg.sphere_radius * (0.7 + 0.6 * rng.random::<f64>());
            Sphere {
                center: Vector3::new(
                    (0.15 + 0.7 * rng.random::<f64>()) * cfg.length,
                    (0.2 + 0.6 * rng.random::<f64>()) * cfg.width,
                    radius,
                ),
                radius,
            }
        })
        .collect();

    // Modest ground-truth motion between the two sensor frames.
    let truth = {
        let yaw = (rng.random::<f64>() - 0.5) * 50.0_f64.to_radians();
        let pitch = (rng.random::<f64>() - 0.5) * 10.0_f64.to_radians();
        let roll = (rng.random::<f64>() - 0.5) * 10.0_f64.to_radians();
        let t = Vector3::new(
            (rng.random::<f64>() - 0.5) * 1.0,
            (rng.random::<f64>() - 0.5) * 1.0,
            (rng.random::<f64>() - 0.5) * 0.4,
        );
        let r_yaw = super::se3_exp(&Twist::new(Vector3::new(0.0, 0.0, yaw), Vector3::zeros()));
        let r_pitch = super::se3_exp(&Twist::new(Vector3::new(0.0, pitch, 0.0), Vector3::zeros()));
        let r_roll = super::se3_exp(&Twist::new(Vector3::new(roll, 0.0, 0.0), Vector3::zeros()));
        let mut pose = r_yaw.compose(&r_pitch).compose(&r_roll);
        pose.translation = t;
        pose
    };

    let keep = cfg.overlap;
    let fixed_points = occlude(sample_scene(cfg, &spheres, rng), cfg, keep, rng);
    let moving_world = occlude(sample_scene(cfg, &spheres, rng), cfg, keep, rng);
    let inv = truth.inverse();
    let moving_points = moving_world
        .iter()
        .map(|p| inv.transform_point(p))
        .collect();

    ScenePair {
        fixed: PointCloud::with_sigma(fixed_points, cfg.sigma_point),
        moving: PointCloud::with_sigma(moving_points, cfg.sigma_point),
        truth,
    }
}
