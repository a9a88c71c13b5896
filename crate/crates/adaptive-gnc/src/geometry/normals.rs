//! Per-point normal estimation from k-nearest-neighbor scatter matrices.

use super::{GeomError, KdTree, PointCloud};
use nalgebra::{Matrix3, Vector3};

/// Estimate a unit normal per point as the smallest-eigenvalue eigenvector
/// of the k-nearest-neighbor scatter matrix, sign-oriented toward
/// `viewpoint` (the sensor origin by default in the callers).
///
/// Neighborhoods whose scatter is rank deficient (collinear points: the
/// two smallest eigenvalues both vanish) get `None`; those points are
/// skipped by point-to-plane residuals.
pub fn estimate_normals(
    cloud: &PointCloud,
    k: usize,
    viewpoint: Vector3<f64>,
) -> Result<PointCloud, GeomError> {
    assert!(k >= 3, "a plane fit needs at least 3 neighbors");
    if cloud.len() <= k {
        return Err(GeomError::TooFewPoints {
            k,
            size: cloud.len(),
        });
    }
    let tree = KdTree::build(&cloud.points)?;
    let normals = cloud
        .points
        .iter()
        .map(|p| {
            let neighbors = tree.k_nearest(p, k);
            let mut centroid = Vector3::zeros();
            for &j in &neighbors {
                centroid += cloud.points[j];
            }
            centroid /= neighbors.len() as f64;
            let mut scatter = Matrix3::zeros();
            for &j in &neighbors {
                let d = cloud.points[j] - centroid;
                scatter += d * d.transpose();
            }
            let eigen = scatter.symmetric_eigen();
            // Sort eigenpairs ascending by eigenvalue.
            let mut order = [0, 1, 2];
            order.sort_by(|&a, &b| eigen.eigenvalues[a].total_cmp(&eigen.eigenvalues[b]));
            let lambda = [
                eigen.eigenvalues[order[0]].max(0.0),
                eigen.eigenvalues[order[1]].max(0.0),
                eigen.eigenvalues[order[2]].max(0.0),
            ];
            // Rank < 2 neighborhood: no plane is defined.
            if lambda[2] <= 0.0 || lambda[1] / lambda[2] < 1e-9 {
                return None;
            }
            let mut normal: Vector3<f64> = eigen.eigenvectors.column(order[0]).into();
            normal.normalize_mut();
            if normal.dot(&(viewpoint - p)) < 0.0 {
                normal = -normal;
            }
            Some(normal)
        })
        .collect();
    Ok(PointCloud {
        points: cloud.points.clone(),
        normals: Some(normals),
        sigma_point: cloud.sigma_point,
    })
}
