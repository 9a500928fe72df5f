//! Exact nearest-neighbour queries over 3-D points.

/// Static 3-d tree over a borrowed point set.
pub struct KdTree<'a> {
    points: &'a [[f64; 3]],
    nodes: Vec<Node>,
    root: Option<usize>,
}

struct Node {
    point: usize,
    axis: usize,
    left: Option<usize>,
    right: Option<usize>,
}

#[inline]
pub fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

impl<'a> KdTree<'a> {
    pub fn new(points: &'a [[f64; 3]]) -> Self {
        let mut indices: Vec<usize> = (0..points.len()).collect();
        let mut nodes = Vec::with_capacity(points.len());
        let root = Self::build(points, &mut indices, 0, &mut nodes);
        KdTree {
            points,
            nodes,
            root,
        }
    }

    fn build(
        points: &[[f64; 3]],
        indices: &mut [usize],
        depth: usize,
        nodes: &mut Vec<Node>,
    ) -> Option<usize> {
        if indices.is_empty() {
            return None;
        }
        let axis = depth % 3;
        let mid = indices.len() / 2;
        indices.select_nth_unstable_by(mid, |&a, &b| {
            points[a][axis]
                .total_cmp(&points[b][axis])
                .then(a.cmp(&b))
        });
        let point = indices[mid];
        let (left, rest) = indices.split_at_mut(mid);
        let right = &mut rest[1..];
        let left = Self::build(points, left, depth + 1, nodes);
        let right = Self::build(points, right, depth + 1, nodes);
        nodes.push(Node {
            point,
            axis,
            left,
            right,
        });
        Some(nodes.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index of and squared distance to the closest point.
    pub fn nearest(&self, query: &[f64; 3]) -> Option<(usize, f64)> {
        let mut best = (usize::MAX, f64::INFINITY);
        let mut stack = Vec::with_capacity(64);
        if let Some(root) = self.root {
            stack.push(root);
        }
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            let p = &self.points[node.point];
            let d = dist2(p, query);
            if d < best.1 {
                best = (node.point, d);
            }
            let diff = query[node.axis] - p[node.axis];
            let (near, far) = if diff < 0.0 {
                (node.left, node.right)
            } else {
                (node.right, node.left)
            };
            if let Some(f) = far {
                if diff * diff < best.1 {
                    stack.push(f);
                }
            }
            if let Some(nn) = near {
                stack.push(nn);
            }
        }
        (best.0 != usize::MAX).then_some(best)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<[f64; 3]> = (0..500)
            .map(|_| [rng.gen(), rng.gen(), rng.gen::<f64>() * 0.1])
            .collect();
        let tree = KdTree::new(&pts);
        for _ in 0..300 {
            let q = [rng.gen(), rng.gen(), rng.gen()];
            let brute = pts.iter().map(|p| dist2(p, &q)).fold(f64::INFINITY, f64::min);
            assert_eq!(tree.nearest(&q).unwrap().1, brute);
        }
    }

    #[test]
    fn empty_tree() {
        let tree = KdTree::new(&[]);
        assert!(tree.nearest(&[0.0; 3]).is_none());
    }
}
