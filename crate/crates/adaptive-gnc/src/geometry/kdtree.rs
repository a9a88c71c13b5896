//! Exact 3-D nearest-neighbor search over a static point set.
//!
//! Median-split kd-tree. Queries return exactly what a linear scan would,
//! including the tie rule (smallest index wins), which is what the
//! brute-force oracle tests rely on.

use super::GeomError;
use nalgebra::Vector3;

#[derive(Debug, Clone)]
struct Node {
    /// Index into the original point array.
    index: usize,
    axis: usize,
    left: Option<Box<Node>>,
    right: Option<Box<Node>>,
}

#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Vector3<f64>>,
    root: Option<Box<Node>>,
}

impl KdTree {
    pub fn build(points: &[Vector3<f64>]) -> Result<Self, GeomError> {
        if points.is_empty() {
            return Err(GeomError::EmptyCloud);
        }
        let mut indices: Vec<usize> = (0..points.len()).collect();
        let root = build_node(points, &mut indices, 0);
        Ok(KdTree {
            points: points.to_vec(),
            root,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index of the exact nearest neighbor. Ties resolve to the smallest
    /// index, matching a first-wins linear scan.
    pub fn nearest(&self, query: &Vector3<f64>) -> usize {
        let mut best = Best {
            dist_sq: f64::INFINITY,
            index: usize::MAX,
        };
        search(self.root.as_deref(), &self.points, query, &mut best);
        best.index
    }

    /// Indices of the k nearest neighbors, closest first.
    pub fn k_nearest(&self, query: &Vector3<f64>, k: usize) -> Vec<usize> {
        let k = k.min(self.points.len());
        let mut heap: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        search_k(self.root.as_deref(), &self.points, query, k, &mut heap);
        heap.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        heap.into_iter().map(|(_, i)| i).collect()
    }
}

struct Best {
    dist_sq: f64,
    index: usize,
}

fn build_node(points: &[Vector3<f64>], indices: &mut [usize], depth: usize) -> Option<Box<Node>> {
    if indices.is_empty() {
        return None;
    }
    let axis = depth % 3;
    let mid = indices.len() / 2;
    // Ties on the coordinate are broken by index so the tree layout is a
    // deterministic function of the input order.
    indices.select_nth_unstable_by(mid, |&a, &b| {
        points[a][axis].total_cmp(&points[b][axis]).then(a.cmp(&b))
    });
    let index = indices[mid];
    let (left_slice, rest) = indices.split_at_mut(mid);
    let right_slice = &mut rest[1..];
    Some(Box::new(Node {
        index,
        axis,
        left: build_node(points, left_slice, depth + 1),
        right: build_node(points, right_slice, depth + 1),
    }))
}

fn consider(points: &[Vector3<f64>], query: &Vector3<f64>, index: usize, best: &mut Best) {
    let d = points[index] - query;
    let dist_sq = d.norm_squared();
    if dist_sq < best.dist_sq || (dist_sq == best.dist_sq && index < best.index) {
        best.dist_sq = dist_sq;
        best.index = index;
    }
}

fn search(node: Option<&Node>, points: &[Vector3<f64>], query: &Vector3<f64>, best: &mut Best) {
    let Some(node) = node else { return };
    consider(points, query, node.index, best);
    let diff = query[node.axis] - points[node.index][node.axis];
    let (near, far) = if diff < 0.0 {
        (node.left.as_deref(), node.right.as_deref())
    } else {
        (node.right.as_deref(), node.left.as_deref())
    };
    search(near, points, query, best);
    // The far side can only help if the splitting plane is closer than the
    // best distance (<= keeps equidistant smaller indices reachable).
    if diff * diff <= best.dist_sq {
        search(far, points, query, best);
    }
}

fn search_k(
    node: Option<&Node>,
    points: &[Vector3<f64>],
    query: &Vector3<f64>,
    k: usize,
    heap: &mut Vec<(f64, usize)>,
) {
    let Some(node) = node else { return };
    let d = points[node.index] - query;
    let dist_sq = d.norm_squared();
    if heap.len() < k {
        heap.push((dist_sq, node.index));
        heap.sort_by(|a, b| b.0.total_cmp(&a.0));
    } else if dist_sq < heap[0].0 {
        heap[0] = (dist_sq, node.index);
        heap.sort_by(|a, b| b.0.total_cmp(&a.0));
    }
    let diff = query[node.axis] - points[node.index][node.axis];
    let (near, far) = if diff < 0.0 {
        (node.left.as_deref(), node.right.as_deref())
    } else {
        (node.right.as_deref(), node.left.as_deref())
    };
    search_k(near, points, query, k, heap);
    if heap.len() < k || diff * diff <= heap[0].0 {
        search_k(far, points, query, k, heap);
    }
}
