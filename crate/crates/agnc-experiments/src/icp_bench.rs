//! Point-cloud alignment benchmark over synthetic scene pairs (or
//! user-supplied clouds), difficulty presets, and the method roster.

use crate::config::IcpBenchConfig;
use crate::methods::Method;
use crate::report::{IcpReport, IcpRow, StageLogRow};
use crate::rng::{stream_id, stream_rng};
use adaptive_gnc::geometry::{
    estimate_normals, generate_scene_pair, icp, perturbed_init, pose_error, read_ply, read_xyz,
    sample_perturbation, voxel_downsample, DifficultyPreset, IcpOptions, PointCloud, Pose,
    SceneConfig,
};
use nalgebra::Vector3;
use rayon::prelude::*;
use std::path::Path;
use std::time::Instant;

pub struct IcpRun {
    pub report: IcpReport,
    pub stages: Vec<StageLogRow>,
    /// Final pose per trial row, in the same order as `report.rows`.
    pub poses: Vec<Pose>,
}

/// Stream salts keeping scene generation and perturbation draws
/// independent per (difficulty, trial) cell.
const SCENE_SALT: u64 = 0x5CE7E;
const PERTURB_SALT: u64 = 0x9E27;

/// A prepared trial: downsampled fixed cloud with normals, downsampled
/// moving cloud, and the ground-truth transform.
struct TrialScene {
    fixed: PointCloud,
    moving: PointCloud,
    truth: Pose,
}

fn load_cloud(path: &Path) -> Result<PointCloud, String> {
    let result = match path.extension().and_then(|e| e.to_str()) {
        Some("ply") => read_ply(path),
        _ => read_xyz(path),
    };
    result.map_err(|e| e.to_string())
}

fn prepare_scene(cfg: &IcpBenchConfig, preset_key: u64, trial: usize) -> Result<TrialScene, String> {
    let (fixed_raw, moving_raw, truth) = match (&cfg.cloud_fixed, &cfg.cloud_moving) {
        (Some(p_path), Some(q_path)) => {
            let mut fixed = load_cloud(p_path)?;
            let mut moving = load_cloud(q_path)?;
            fixed.sigma_point = cfg.sigma_point;
            moving.sigma_point = cfg.sigma_point;
            (fixed, moving, Pose::identity())
        }
        _ => {
            let scene_cfg = SceneConfig {
                overlap: cfg.overlap,
                noise_sigma: cfg.noise_sigma,
                sigma_point: cfg.sigma_point,
                ..Default::default()
            };
            let mut rng = stream_rng(
                cfg.seed,
                stream_id(&[SCENE_SALT, preset_key, trial as u64]),
            );
            let pair = generate_scene_pair(&scene_cfg, &mut rng);
            (pair.fixed, pair.moving, pair.truth)
        }
    };
    let fixed_down = voxel_downsample(&fixed_raw, cfg.voxel_size);
    let moving = voxel_downsample(&moving_raw, cfg.voxel_size);
    // Orient normals toward an interior viewpoint (the cloud centroid).
    let centroid = fixed_down
        .points
        .iter()
        .fold(Vector3::zeros(), |acc, p| acc + p)
        / fixed_down.len().max(1) as f64;
    let fixed = estimate_normals(&fixed_down, cfg.normals_k, centroid).map_err(|e| e.to_string())?;
    Ok(TrialScene {
        fixed,
        moving,
        truth,
    })
}

/// Run the alignment sweep: every (difficulty, trial) cell generates a
/// scene pair and a perturbation, then runs every method from the same
/// perturbed initial pose.
pub fn run_icp_bench(cfg: &IcpBenchConfig) -> Result<IcpRun, String> {
    cfg.validate()?;
    let methods = cfg.methods()?;
    let presets = cfg.difficulty_presets()?;

    let cells: Vec<(usize, usize)> = (0..presets.len())
        .flat_map(|p| (0..cfg.trials).map(move |t| (p, t)))
        .collect();

    let results: Vec<Result<(Vec<(IcpRow, Pose)>, Vec<StageLogRow>), String>> = cells
        .par_iter()
        .map(|&(preset_idx, trial)| run_trial(cfg, &methods, presets[preset_idx], trial))
        .collect();

    let mut entries: Vec<(IcpRow, Pose)> = Vec::new();
    let mut stages = Vec::new();
    for result in results {
        let (trial_rows, trial_stages) = result?;
        entries.extend(trial_rows);
        stages.extend(trial_stages);
    }
    entries.sort_by(|a, b| {
        a.0.method
            .cmp(&b.0.method)
            .then(a.0.difficulty.cmp(&b.0.difficulty))
            .then(a.0.trial.cmp(&b.0.trial))
    });
    let (rows, poses): (Vec<IcpRow>, Vec<Pose>) = entries.into_iter().unzip();
    stages.sort_by(|a, b| {
        a.method
            .cmp(&b.method)
            .then(a.condition.cmp(&b.condition))
            .then(a.trial.cmp(&b.trial))
            .then(a.outer_iter.cmp(&b.outer_iter))
            .then(a.stage.stage.cmp(&b.stage.stage))
    });
    Ok(IcpRun {
        report: IcpReport { rows },
        stages,
        poses,
    })
}

fn run_trial(
    cfg: &IcpBenchConfig,
    methods: &[Method],
    preset: DifficultyPreset,
    trial: usize,
) -> Result<(Vec<(IcpRow, Pose)>, Vec<StageLogRow>), String> {
    let scene = prepare_scene(cfg, preset.stream_key(), trial)?;
    let (phi_max, rho_max) = preset.caps();
    let (sigma_phi, sigma_rho) = preset.sigmas();
    let mut perturb_rng = stream_rng(
        cfg.seed,
        stream_id(&[PERTURB_SALT, preset.stream_key(), trial as u64]),
    );
    let xi = sample_perturbation(sigma_phi, sigma_rho, phi_max, rho_max, &mut perturb_rng);
    let init = perturbed_init(&scene.truth, &xi);
    let init_rot = xi.phi.norm();
    let init_trans = xi.rho.norm();
    let degenerate = init_rot == 0.0 && init_trans == 0.0;

    let opts = IcpOptions {
        max_iterations: cfg.max_iterations,
        ..Default::default()
    };

    let mut rows = Vec::with_capacity(methods.len());
    let mut stage_rows = Vec::new();
    for &method in methods {
        let start = Instant::now();
        let result = icp(&scene.fixed, &scene.moving, &init, method.icp_method(), &opts);
        let time_s = start.elapsed().as_secs_f64();
        match result {
            Ok(outcome) => {
                let (rot_err, trans_err) = pose_error(&scene.truth, &outcome.pose);
                let success = !degenerate
                    && outcome.converged
                    && !outcome.solver_failed
                    && rot_err < init_rot
                    && trans_err < init_trans
                    && outcome.iterations < cfg.max_iterations;
                for (outer, stage) in &outcome.stage_log {
                    stage_rows.push(StageLogRow {
                        method: method.name().into(),
                        condition: preset.name().into(),
                        trial,
                        outer_iter: *outer,
                        stage: *stage,
                    });
                }
                rows.push((
                    IcpRow {
                        method: method.name().into(),
                        difficulty: preset.name().into(),
                        overlap: cfg.overlap,
                        trial,
                        rot_err_deg: rot_err.to_degrees(),
                        trans_err_cm: trans_err * 100.0,
                        init_rot_deg: init_rot.to_degrees(),
                        init_trans_cm: init_trans * 100.0,
                        iterations: outcome.iterations,
                        converged: outcome.converged && !outcome.solver_failed,
                        success,
                        degenerate,
                        time_s,
                        time_per_iter_s: time_s / outcome.iterations.max(1) as f64,
                    },
                    outcome.pose,
                ));
            }
            Err(err) => {
                // Degenerate input contract: report, never crash the run.
                let _ = err;
                rows.push((
                    IcpRow {
                        method: method.name().into(),
                        difficulty: preset.name().into(),
                        overlap: cfg.overlap,
                        trial,
                        rot_err_deg: f64::NAN,
                        trans_err_cm: f64::NAN,
                        init_rot_deg: init_rot.to_degrees(),
                        init_trans_cm: init_trans * 100.0,
                        iterations: 0,
                        converged: false,
                        success: false,
                        degenerate,
                        time_s,
                        time_per_iter_s: f64::NAN,
                    },
                    init,
                ));
            }
        }
    }
    Ok((rows, stage_rows))
}
