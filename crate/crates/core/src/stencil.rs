//! Stencil selection (n nearest nodes per center) and nearest-center
//! assignment of evaluation points.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::kdtree::KdTree;
use crate::nodes::{NodeKind, NodeSet};

/// One row of `size` node indices per center; entry 0 is the center itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StencilTable {
    pub size: usize,
    neighbors: Vec<usize>,
}

impl StencilTable {
    pub fn num_stencils(&self) -> usize {
        self.neighbors.len() / self.size.max(1)
    }

    pub fn row(&self, index: usize) -> &[usize] {
        &self.neighbors[index * self.size..(index + 1) * self.size]
    }
}

/// Exact `size`-nearest-neighbour stencils for every node, ghosts included.
pub fn build_stencils(nodes: &NodeSet, size: usize) -> Result<StencilTable> {
    if size > nodes.len() || size == 0 {
        return Err(Error::StencilTooLarge {
            size,
            available: nodes.len(),
        });
    }
    let tree = KdTree::new(&nodes.points, nodes.dim);
    let rows: Vec<Vec<usize>> = (0..nodes.len())
        .into_par_iter()
        .map(|k| {
            let mut row = Vec::with_capacity(size);
            row.push(k);
            row.extend(
                tree.knn(&nodes.points[k], size)
                    .into_iter()
                    .map(|(j, _)| j)
                    .filter(|&j| j != k)
                    .take(size - 1),
            );
            row
        })
        .collect();
    Ok(StencilTable {
        size,
        neighbors: rows.concat(),
    })
}

/// Assigns every evaluation point to its nearest non-ghost center, ties going
/// to the smallest index.
pub fn assign_evaluation_points(points: &[Point], nodes: &NodeSet) -> Vec<usize> {
    let tree = KdTree::from_iter(
        (0..nodes.len())
            .filter(|&i| nodes.kinds[i] != NodeKind::Ghost)
            .map(|i| (i, nodes.points[i])),
        nodes.dim,
    );
    points
        .par_iter()
        .map(|p| tree.nearest(p).map(|(i, _)| i).unwrap_or(0))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{dist2, Domain};
    use crate::nodes::generate_nodes;
    use proptest::prelude::*;

    fn line(count: usize, spacing: f64) -> NodeSet {
        let mut s = NodeSet {
            dim: 1,
            points: Vec::new(),
            kinds: Vec::new(),
            normals: Vec::new(),
            target_spacing: spacing,
            seed: 0,
        };
        for i in 0..count {
            s.push([i as f64 * spacing, 0.0, 0.0], NodeKind::Interior, None);
        }
        s
    }

    #[test]
    fn one_dimensional_stencil() {
        let x = line(11, 0.1);
        let t = build_stencils(&x, 3).unwrap();
        let mut row = t.row(5).to_vec();
        assert_eq!(row[0], 5);
        row.sort();
        assert_eq!(row, vec![4, 5, 6]);
        assert!(matches!(
            build_stencils(&x, 12),
            Err(Error::StencilTooLarge { .. })
        ));
    }

    #[test]
    fn stencils_match_brute_force() {
        let d = Domain::unit_box(2);
        let x = generate_nodes(&d, 0.1, 0).unwrap();
        let n = 20;
        let t = build_stencils(&x, n).unwrap();
        for k in [0, 1, 5, x.len() - 1] {
            let mut all: Vec<(f64, usize)> = (0..x.len())
                .map(|j| (dist2(&x.points[k], &x.points[j]), j))
                .collect();
            all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut want: Vec<usize> = all.iter().take(n).map(|a| a.1).collect();
            let mut got = t.row(k).to_vec();
            want.sort();
            got.sort();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn ties_and_identity_assignment() {
        let x = line(3, 1.0);
        assert_eq!(assign_evaluation_points(&[[0.5, 0.0, 0.0]], &x), vec![0]);
        assert_eq!(assign_evaluation_points(&x.points, &x), vec![0, 1, 2]);
        let d = Domain::star();
        let nodes = generate_nodes(&d, 0.1, 0).unwrap();
        let a = assign_evaluation_points(&nodes.points, &nodes);
        assert!(a.iter().enumerate().all(|(i, &k)| i == k));
    }

    #[test]
    fn ghosts_are_never_assigned() {
        let mut x = line(3, 1.0);
        x.push([3.0, 0.0, 0.0], NodeKind::Ghost, None);
        assert_eq!(assign_evaluation_points(&[[2.9, 0.0, 0.0]], &x), vec![2]);
    }

    proptest! {
        #[test]
        fn assignment_is_voronoi(
            ys in prop::collection::vec((-1.2f64..1.2, -1.2f64..1.2), 1..60),
            seed in 0u64..5,
        ) {
            let d = Domain::unit_disk();
            let x = generate_nodes(&d, 0.25, seed).unwrap();
            let ys: Vec<Point> = ys.iter().map(|&(a, b)| [a, b, 0.0]).collect();
            let a = assign_evaluation_points(&ys, &x);
            for (y, &k) in ys.iter().zip(&a) {
                let best = dist2(y, &x.points[k]);
                for (j, p) in x.points.iter().enumerate() {
                    let dj = dist2(y, p);
                    prop_assert!(best < dj || (best == dj && k <= j));
                }
            }
        }
    }
}
