//! Exact k-nearest-neighbour search.
//!
//! Results are ordered lexicographically by `(squared distance, id)`, so ties
//! are always broken toward the smaller id.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::geometry::{dist2, Point};

const LEAF_SIZE: usize = 12;
const NONE: usize = usize::MAX;

#[derive(Clone, Debug)]
struct Node {
    start: usize,
    end: usize,
    axis: usize,
    split: f64,
    left: usize,
    right: usize,
}

#[derive(Clone, Debug)]
pub struct KdTree {
    dim: usize,
    points: Vec<Point>,
    ids: Vec<usize>,
    nodes: Vec<Node>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Candidate {
    d2: f64,
    id: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2.total_cmp(&other.d2).then(self.id.cmp(&other.id))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl KdTree {
    /// Builds a tree over all points, using their positions as ids.
    pub fn new(points: &[Point], dim: usize) -> Self {
        Self::from_iter(points.iter().copied().enumerate(), dim)
    }

    /// Builds a tree over `(id, point)` pairs.
    pub fn from_iter(items: impl IntoIterator<Item = (usize, Point)>, dim: usize) -> Self {
        let (ids, points): (Vec<usize>, Vec<Point>) = items.into_iter().unzip();
        let mut tree = KdTree {
            dim: dim.clamp(1, 3),
            points,
            ids,
            nodes: Vec::new(),
        };
        let mut order: Vec<usize> = (0..tree.points.len()).collect();
        if !order.is_empty() {
            tree.build(&mut order, 0, tree.points.len());
        }
        tree.points = order.iter().map(|&i| tree.points[i]).collect();
        tree.ids = order.iter().map(|&i| tree.ids[i]).collect();
        tree
    }

    fn build(&mut self, order: &mut [usize], start: usize, end: usize) -> usize {
        let me = self.nodes.len();
        self.nodes.push(Node {
            start,
            end,
            axis: 0,
            split: 0.0,
            left: NONE,
            right: NONE,
        });
        if end - start <= LEAF_SIZE {
            return me;
        }
        let slice = &mut order[start..end];
        let mut axis = 0;
        let mut widest = -1.0;
        for k in 0..self.dim {
            let (lo, hi) = slice
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                    let v = self.points[i][k];
                    (lo.min(v), hi.max(v))
                });
            if hi - lo > widest {
                widest = hi - lo;
                axis = k;
            }
        }
        let mid = slice.len() / 2;
        let pts = &self.points;
        slice.select_nth_unstable_by(mid, |&a, &b| pts[a][axis].total_cmp(&pts[b][axis]));
        let split = self.points[slice[mid]][axis];
        let left = self.build(order, start, start + mid);
        let right = self.build(order, start + mid, end);
        let node = &mut self.nodes[me];
        node.axis = axis;
        node.split = split;
        node.left = left;
        node.right = right;
        me
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The `k` nearest ids with their squared distances, closest first.
    pub fn knn(&self, query: &Point, count: usize) -> Vec<(usize, f64)> {
        let count = count.min(self.len());
        if count == 0 {
            return Vec::new();
        }
        let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(count + 1);
        self.knn_rec(0, query, count, &mut heap);
        let mut out: Vec<Candidate> = heap.into_vec();
        out.sort();
        out.into_iter().map(|c| (c.id, c.d2)).collect()
    }

    fn knn_rec(&self, node: usize, query: &Point, count: usize, heap: &mut BinaryHeap<Candidate>) {
        let n = &self.nodes[node];
        if n.left == NONE {
            for i in n.start..n.end {
                let c = Candidate {
                    d2: dist2(&self.points[i], query),
                    id: self.ids[i],
                };
                if heap.len() < count {
                    heap.push(c);
                } else if c < *heap.peek().unwrap() {
                    heap.pop();
                    heap.push(c);
                }
            }
            return;
        }
        let diff = query[n.axis] - n.split;
        let (near, far) = if diff < 0.0 {
            (n.left, n.right)
        } else {
            (n.right, n.left)
        };
        self.knn_rec(near, query, count, heap);
        // `<=` keeps equal-distance candidates with smaller ids reachable
        if heap.len() < count || diff * diff <= heap.peek().unwrap().d2 {
            self.knn_rec(far, query, count, heap);
        }
    }

    /// Nearest id and its squared distance.
    pub fn nearest(&self, query: &Point) -> Option<(usize, f64)> {
        self.knn(query, 1).into_iter().next()
    }

    /// All ids within distance `radius` (inclusive), in no particular order.
    pub fn within_radius(&self, query: &Point, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if !self.is_empty() {
            self.radius_rec(0, query, radius * radius, &mut out);
        }
        out
    }

    fn radius_rec(&self, node: usize, query: &Point, r2: f64, out: &mut Vec<usize>) {
        let n = &self.nodes[node];
        if n.left == NONE {
            for i in n.start..n.end {
                if dist2(&self.points[i], query) <= r2 {
                    out.push(self.ids[i]);
                }
            }
            return;
        }
        let diff = query[n.axis] - n.split;
        let (near, far) = if diff < 0.0 {
            (n.left, n.right)
        } else {
            (n.right, n.left)
        };
        self.radius_rec(near, query, r2, out);
        if diff * diff <= r2 {
            self.radius_rec(far, query, r2, out);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(points: &[Point], query: &Point, count: usize) -> Vec<(usize, f64)> {
        let mut all: Vec<(usize, f64)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| (i, dist2(p, query)))
            .collect();
        all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        all.truncate(count);
        all
    }

    #[test]
    fn ties_go_to_smaller_id() {
        let pts = vec![
            [1.0, 0.0, 0.0],
            [-1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, -1.0, 0.0],
        ];
        let t = KdTree::new(&pts, 2);
        let r = t.knn(&[0.0; 3], 2);
        assert_eq!(r.iter().map(|x| x.0).collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn grid_ties_match_brute_force() {
        let mut pts = Vec::new();
        for i in 0..20 {
            for j in 0..20 {
                pts.push([i as f64, j as f64, 0.0]);
            }
        }
        let t = KdTree::new(&pts, 2);
        for q in [[5.5, 5.5, 0.0], [0.0, 0.0, 0.0], [10.0, 3.5, 0.0]] {
            assert_eq!(t.knn(&q, 9), brute(&pts, &q, 9));
        }
    }

    proptest! {
        #[test]
        fn knn_matches_brute_force(
            raw in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 1..300),
            q in (-1.2f64..1.2, -1.2f64..1.2, -1.2f64..1.2),
            k in 1usize..40,
            dim in 1usize..4,
        ) {
            let pts: Vec<Point> = raw.iter().map(|&(a, b, c)| {
                let mut p = [a, b, c];
                for v in p.iter_mut().skip(dim) { *v = 0.0; }
                p
            }).collect();
            let mut q = [q.0, q.1, q.2];
            for v in q.iter_mut().skip(dim) { *v = 0.0; }
            let t = KdTree::new(&pts, dim);
            prop_assert_eq!(t.knn(&q, k), brute(&pts, &q, k));
            let r = 0.5;
            let mut got = t.within_radius(&q, r);
            got.sort();
            let want: Vec<usize> = (0..pts.len()).filter(|&i| dist2(&pts[i], &q) <= r * r).collect();
            prop_assert_eq!(got, want);
        }
    }
}
