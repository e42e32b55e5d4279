//! Static 3-d tree for nearest-neighbour queries.

use alloc::vec::Vec;

use crate::geometry::Vec3;

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: u32, end: u32 },
    Split { axis: u8, value: f64, left: u32, right: u32 },
}

/// Balanced k-d tree over a borrowed point set.
#[derive(Debug, Clone)]
pub struct KdTree<'a> {
    points: &'a [Vec3],
    index: Vec<u32>,
    nodes: Vec<Node>,
}

impl<'a> KdTree<'a> {
    pub fn build(points: &'a [Vec3]) -> Self {
        let mut tree = Self {
            points,
            index: (0..points.len() as u32).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            tree.build_node(0, points.len());
        }
        tree
    }

    fn build_node(&mut self, start: usize, end: usize) -> u32 {
        let id = self.nodes.len() as u32;
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start: start as u32, end: end as u32 });
            return id;
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in &self.index[start..end] {
            let p = &self.points[i as usize];
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).partial_cmp(&(hi[b] - lo[b])).unwrap())
            .unwrap();
        let mid = start + (end - start) / 2;
        let pts = self.points;
        self.index[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            pts[a as usize][axis]
                .partial_cmp(&pts[b as usize][axis])
                .unwrap_or(core::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        let value = pts[self.index[mid] as usize][axis];
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id as usize] = Node::Split { axis: axis as u8, value, left, right };
        id
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index and squared distance of the nearest point; ties go to the
    /// lowest index.
    pub fn nearest(&self, q: &Vec3) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(0, q, &mut best);
        Some(best)
    }

    fn search(&self, node: u32, q: &Vec3, best: &mut (usize, f64)) {
        match self.nodes[node as usize] {
            Node::Leaf { start, end } => {
                for &i in &self.index[start as usize..end as usize] {
                    let p = &self.points[i as usize];
                    let d = (p[0] - q[0]) * (p[0] - q[0])
                        + (p[1] - q[1]) * (p[1] - q[1])
                        + (p[2] - q[2]) * (p[2] - q[2]);
                    let i = i as usize;
                    if d < best.1 || (d == best.1 && i < best.0) {
                        *best = (i, d);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[axis as usize] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, best);
                if diff * diff <= best.1 {
                    self.search(far, q, best);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn matches_linear_scan(
            pts in prop::collection::vec(prop::array::uniform3(-10.0..10.0f64), 1..200),
            qs in prop::collection::vec(prop::array::uniform3(-12.0..12.0f64), 1..20),
        ) {
            let tree = KdTree::build(&pts);
            for q in &qs {
                let (i, d) = tree.nearest(q).unwrap();
                let brute = pts
                    .iter()
                    .enumerate()
                    .map(|(k, p)| (k, (p[0]-q[0]).powi(2) + (p[1]-q[1]).powi(2) + (p[2]-q[2]).powi(2)))
                    .fold((usize::MAX, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });
                prop_assert_eq!(d, brute.1);
                prop_assert_eq!(i, brute.0);
            }
        }
    }

    #[test]
    fn empty_tree() {
        let pts: Vec<Vec3> = Vec::new();
        assert!(KdTree::build(&pts).nearest(&[0.0; 3]).is_none());
    }
}
