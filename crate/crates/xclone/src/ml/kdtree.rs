//! kd-tree for exact k-nearest-neighbour queries.
//!
//! The tree is an accelerator, not an approximation: queries return exactly
//! what a brute-force scan returns, including tie handling. Candidates are
//! ordered by `(distance, insertion index)` and a subtree is pruned only
//! when the splitting plane is *strictly* farther than the current k-th
//! best — an equal-distance subtree may still hold a lower-index point.

use super::similarity::euclidean_sq;

#[derive(Debug, Clone)]
struct Node {
    point: usize,
    axis: usize,
    left: Option<usize>,
    right: Option<usize>,
}

/// Static kd-tree over owned points.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Vec<f64>>,
    nodes: Vec<Node>,
    root: Option<usize>,
}

impl KdTree {
    /// Build a balanced tree (median split, axis cycling by depth).
    pub fn build(points: &[Vec<f64>]) -> Self {
        let dim = points.first().map_or(0, Vec::len);
        let mut tree = KdTree { points: points.to_vec(), nodes: Vec::new(), root: None };
        let mut indices: Vec<usize> = (0..points.len()).collect();
        tree.root = tree.build_node(&mut indices, 0, dim.max(1));
        tree
    }

    fn build_node(&mut self, indices: &mut [usize], depth: usize, dim: usize) -> Option<usize> {
        if indices.is_empty() {
            return None;
        }
        let axis = depth % dim;
        indices.sort_by(|&a, &b| {
            self.points[a][axis]
                .partial_cmp(&self.points[b][axis])
                .expect("finite coordinates")
                .then(a.cmp(&b))
        });
        let mid = indices.len() / 2;
        let point = indices[mid];
        let node_id = self.nodes.len();
        self.nodes.push(Node { point, axis, left: None, right: None });
        let (lo, rest) = indices.split_at_mut(mid);
        let hi = &mut rest[1..];
        let left = self.build_node(lo, depth + 1, dim);
        let right = self.build_node(hi, depth + 1, dim);
        self.nodes[node_id].left = left;
        self.nodes[node_id].right = right;
        Some(node_id)
    }

    /// The `k` nearest points to `query`, as `(point index, distance)`
    /// sorted by `(distance, index)` ascending.
    pub fn nearest(&self, query: &[f64], k: usize) -> Vec<(usize, f64)> {
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        if k > 0 {
            if let Some(root) = self.root {
                self.visit(root, query, k, &mut best);
            }
        }
        best.into_iter().map(|(d_sq, i)| (i, d_sq.sqrt())).collect()
    }

    fn visit(&self, node_id: usize, query: &[f64], k: usize, best: &mut Vec<(f64, usize)>) {
        let node = &self.nodes[node_id];
        let point = &self.points[node.point];
        let candidate = (euclidean_sq(point, query), node.point);
        let pos = best.partition_point(|&entry| entry < candidate);
        if pos < k {
            best.insert(pos, candidate);
            best.truncate(k);
        }
        let diff = query[node.axis] - point[node.axis];
        let (near, far) = if diff < 0.0 {
            (node.left, node.right)
        } else {
            (node.right, node.left)
        };
        if let Some(n) = near {
            self.visit(n, query, k, best);
        }
        // Visit the far side unless the plane is strictly beyond the k-th
        // best distance.
        let prune = best.len() == k && diff * diff > best[k - 1].0;
        if !prune {
            if let Some(f) = far {
                self.visit(f, query, k, best);
            }
        }
    }

    /// Number of indexed points.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Whether the tree holds no points.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}
