//! Point-cloud container, voxel downsampling, and ASCII I/O.

use super::{GeomError, Pose};
use nalgebra::Vector3;
use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

/// Points in meters, optional per-point unit normals (entries are `None`
/// where estimation was degenerate), and the isotropic per-point
/// measurement noise scale used to build error covariances.
#[derive(Debug, Clone)]
pub struct PointCloud {
    pub points: Vec<Vector3<f64>>,
    pub normals: Option<Vec<Option<Vector3<f64>>>>,
    /// Standard deviation of the point measurement noise (default 3 cm).
    pub sigma_point: f64,
}

impl PointCloud {
    pub fn new(points: Vec<Vector3<f64>>) -> Self {
        PointCloud {
            points,
            normals: None,
            sigma_point: 0.03,
        }
    }

    pub fn with_sigma(points: Vec<Vector3<f64>>, sigma_point: f64) -> Self {
        PointCloud {
            points,
            normals: None,
            sigma_point,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Check the normal invariants: aligned count and unit length.
    pub fn validate_normals(&self) -> Result<(), GeomError> {
        if let Some(normals) = &self.normals {
            if normals.len() != self.points.len() {
                return Err(GeomError::NormalCountMismatch {
                    points: self.points.len(),
                    normals: normals.len(),
                });
            }
            for n in normals.iter().flatten() {
                let drift = (n.norm() - 1.0).abs();
                if drift > 1e-6 {
                    return Err(GeomError::NotOrthonormal { drift });
                }
            }
        }
        Ok(())
    }
}

/// Centroid-per-voxel downsampling on a regular grid. Deterministic output
/// order (lexicographic voxel key), which keeps downstream pipelines
/// reproducible run to run.
pub fn voxel_downsample(cloud: &PointCloud, voxel_size: f64) -> PointCloud {
    assert!(voxel_size > 0.0);
    let mut cells: BTreeMap<(i64, i64, i64), (Vector3<f64>, usize)> = BTreeMap::new();
    for p in &cloud.points {
        let key = (
            (p.x / voxel_size).floor() as i64,
            (p.y / voxel_size).floor() as i64,
            (p.z / voxel_size).floor() as i64,
        );
        let entry = cells.entry(key).or_insert((Vector3::zeros(), 0));
        entry.0 += p;
        entry.1 += 1;
    }
    let points = cells
        .into_values()
        .map(|(sum, count)| sum / count as f64)
        .collect();
    PointCloud {
        points,
        normals: None,
        sigma_point: cloud.sigma_point,
    }
}

/// Read an ASCII XYZ file: one `x y z` triple per line, meters. Blank
/// lines and `#` comments are skipped.
pub fn read_xyz(path: &Path) -> Result<PointCloud, GeomError> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut points = Vec::new();
    for (line_no, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() < 3 {
            return Err(GeomError::Parse {
                path: path.display().to_string(),
                line: line_no + 1,
                message: format!("expected 3 coordinates, found {}", fields.len()),
            });
        }
        let mut coords = [0.0; 3];
        for (k, field) in fields.iter().take(3).enumerate() {
            let value: f64 = field.parse().map_err(|_| GeomError::Parse {
                path: path.display().to_string(),
                line: line_no + 1,
                message: format!("not a number: {field:?}"),
            })?;
            if !value.is_finite() {
                return Err(GeomError::Parse {
                    path: path.display().to_string(),
                    line: line_no + 1,
                    message: format!("non-finite coordinate: {field:?}"),
                });
            }
            coords[k] = value;
        }
        points.push(Vector3::new(coords[0], coords[1], coords[2]));
    }
    if points.is_empty() {
        return Err(GeomError::EmptyCloud);
    }
    Ok(PointCloud::new(points))
}

/// Read an ASCII PLY file, using only the vertex x/y/z properties.
pub fn read_ply(path: &Path) -> Result<PointCloud, GeomError> {
    let parse_err = |line: usize, message: String| GeomError::Parse {
        path: path.display().to_string(),
        line,
        message,
    };
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines().enumerate();

    let mut vertex_count: Option<usize> = None;
    let mut property_names: Vec<String> = Vec::new();
    let mut in_vertex_element = false;
    let mut header_end = 0;

    // Header pass.
    for (line_no, line) in &mut lines {
        let line = line?;
        let trimmed = line.trim();
        if line_no == 0 && trimmed != "ply" {
            return Err(parse_err(1, "missing 'ply' magic".into()));
        }
        if trimmed.starts_with("format") && !trimmed.contains("ascii") {
            return Err(parse_err(line_no + 1, "only ascii PLY is supported".into()));
        }
        if let Some(rest) = trimmed.strip_prefix("element ") {
            let mut parts = rest.split_whitespace();
            let name = parts.next().unwrap_or_default();
            in_vertex_element = name == "vertex";
            if in_vertex_element {
                let count = parts
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| parse_err(line_no + 1, "bad vertex count".into()))?;
                vertex_count = Some(count);
            }
        } else if let Some(rest) = trimmed.strip_prefix("property ") {
            if in_vertex_element {
                let name = rest.split_whitespace().last().unwrap_or_default();
                property_names.push(name.to_string());
            }
        } else if trimmed == "end_header" {
            header_end = line_no + 1;
            break;
        }
    }

    let vertex_count =
        vertex_count.ok_or_else(|| parse_err(header_end, "no vertex element".into()))?;
    let coord_idx: Vec<usize> = ["x", "y", "z"]
        .iter()
        .map(|axis| {
            property_names
                .iter()
                .position(|p| p == axis)
                .ok_or_else(|| parse_err(header_end, format!("vertex has no '{axis}' property")))
        })
        .collect::<Result<_, _>>()?;

    let mut points = Vec::with_capacity(vertex_count);
    for (line_no, line) in &mut lines {
        if points.len() == vertex_count {
            break;
        }
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        let mut coords = [0.0; 3];
        for (k, &idx) in coord_idx.iter().enumerate() {
            let field = fields.get(idx).ok_or_else(|| {
                parse_err(line_no + 1, format!("vertex line has {} fields", fields.len()))
            })?;
            let value: f64 = field.parse().map_err(|_| {
                parse_err(line_no + 1, format!("not a number: {field:?}"))
            })?;
            if !value.is_finite() {
                return Err(parse_err(
                    line_no + 1,
                    format!("non-finite coordinate: {field:?}"),
                ));
            }
            coords[k] = value;
        }
        points.push(Vector3::new(coords[0], coords[1], coords[2]));
    }
    if points.len() != vertex_count {
        return Err(parse_err(
            header_end,
            format!("expected {vertex_count} vertices, found {}", points.len()),
        ));
    }
    if points.is_empty() {
        return Err(GeomError::EmptyCloud);
    }
    Ok(PointCloud::new(points))
}

/// Write a cloud as ASCII XYZ.
pub fn write_xyz(path: &Path, cloud: &PointCloud) -> Result<(), GeomError> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    for p in &cloud.points {
        writeln!(file, "{} {} {}", p.x, p.y, p.z)?;
    }
    Ok(())
}

/// Append one pose as 12 numbers, row-major `(C | r)`.
pub fn write_pose<W: Write>(writer: &mut W, pose: &Pose) -> std::io::Result<()> {
    let c = &pose.rotation;
    let r = &pose.translation;
    writeln!(
        writer,
        "{} {} {} {} {} {} {} {} {} {} {} {}",
        c[(0, 0)],
        c[(0, 1)],
        c[(0, 2)],
        r.x,
        c[(1, 0)],
        c[(1, 1)],
        c[(1, 2)],
        r.y,
        c[(2, 0)],
        c[(2, 1)],
        c[(2, 2)],
        r.z
    )
}
