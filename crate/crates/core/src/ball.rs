//! Truncated neighborhoods: the depth-`h` ball around a vertex.
//!
//! `ball(G, v, h)` is the subgraph induced by the vertices within graph
//! distance `h` of `v`, rooted at `v`. Induced means *all* edges between
//! retained vertices are kept, including edges joining two vertices at
//! distance exactly `h` (these can close cycles inside the ball).

use crate::error::{GraphLdpError, Result};
use crate::graph::MarkedGraph;
use crate::mark::Mark;
use crate::tree::MarkedTree;
use std::collections::BTreeMap;

/// A rooted, depth-truncated ball. Vertices are relabeled in BFS
/// discovery order, so the root is 0 and `dist` is nondecreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct RootedBall {
    pub graph: MarkedGraph,
    /// Truncation depth that was requested (the content may end earlier).
    pub depth: u32,
    /// Distance from the root, per (relabeled) vertex.
    pub dist: Vec<u32>,
    /// Original vertex ids in the host graph.
    pub orig: Vec<u32>,
    /// True iff the ball exhausts its connected component: no retained
    /// vertex has a neighbor outside the ball. Only then does the ball
    /// describe its component without truncation.
    pub complete: bool,
}

impl RootedBall {
    pub fn root(&self) -> u32 {
        0
    }

    pub fn vertex_count(&self) -> usize {
        self.graph.n()
    }

    /// Number of vertices within distance `r` of the root. Because
    /// labels follow BFS order this is a prefix length.
    pub fn prefix_len(&self, r: u32) -> usize {
        self.dist.partition_point(|&d| d <= r)
    }

    /// True iff the ball is a tree (it is connected by construction).
    pub fn is_tree(&self) -> bool {
        self.graph.edge_count() == self.graph.n() - 1
    }

    /// Convert a tree ball into a parent-arena tree. Requires finite
    /// marks. In a tree ball every non-root vertex has exactly one
    /// neighbor closer to the root.
    pub fn to_tree(&self) -> Result<MarkedTree> {
        if !self.is_tree() {
            return Err(GraphLdpError::validation("ball contains a cycle, not a tree"));
        }
        let g = &self.graph;
        let mut t = MarkedTree::new_root(g.tau(0).as_sym()?);
        // BFS labels guarantee parents precede children.
        let mut new_id = vec![0u32; g.n()];
        for v in 1..g.n() as u32 {
            let p = *g
                .neighbors(v)
                .iter()
                .find(|&&u| self.dist[u as usize] + 1 == self.dist[v as usize])
                .expect("tree ball vertex with no parent");
            let nid = t.add_child(
                new_id[p as usize],
                g.tau(v).as_sym()?,
                g.xi(p, v)?.as_sym()?,
                g.xi(v, p)?.as_sym()?,
            );
            new_id[v as usize] = nid;
        }
        Ok(t)
    }
}

/// Extract the depth-`h` ball around `v` by breadth-first search.
pub fn ball(g: &MarkedGraph, v: u32, h: u32) -> RootedBall {
    let n = g.n();
    assert!((v as usize) < n, "root out of range");
    let mut dist_of = vec![u32::MAX; n];
    let mut order: Vec<u32> = Vec::new();
    dist_of[v as usize] = 0;
    order.push(v);
    let mut head = 0usize;
    while head < order.len() {
        let u = order[head];
        head += 1;
        let du = dist_of[u as usize];
        if du == h {
            continue;
        }
        for &w in g.neighbors(u) {
            if dist_of[w as usize] == u32::MAX {
                dist_of[w as usize] = du + 1;
                order.push(w);
            }
        }
    }

    let mut new_id = vec![u32::MAX; n];
    for (i, &u) in order.iter().enumerate() {
        new_id[u as usize] = i as u32;
    }

    let mut complete = true;
    let mut edges = Vec::new();
    let mut xi = BTreeMap::new();
    let mut tau: Vec<Mark> = Vec::with_capacity(order.len());
    for (i, &u) in order.iter().enumerate() {
        tau.push(*g.tau(u));
        for &w in g.neighbors(u) {
            let j = new_id[w as usize];
            if j == u32::MAX {
                complete = false;
                continue;
            }
            if (i as u32) < j {
                edges.push((i as u32, j));
                xi.insert((i as u32, j), *g.xi(u, w).unwrap());
                xi.insert((j, i as u32), *g.xi(w, u).unwrap());
            }
        }
    }

    let dist: Vec<u32> = order.iter().map(|&u| dist_of[u as usize]).collect();
    let graph = MarkedGraph::new(
        order.len(),
        edges,
        tau,
        xi,
        g.theta_space().clone(),
        g.xi_space().clone(),
    )
    .expect("induced subgraph of a valid graph is valid");
    RootedBall {
        graph,
        depth: h,
        dist,
        orig: order,
        complete,
    }
}

/// Rebuild a ball from a parent-arena tree (used for sampled trees and
/// seed atoms). `complete` should be true only when the tree is known to
/// be the entire object rather than a depth-truncated view.
pub fn tree_to_ball(
    t: &MarkedTree,
    theta_space: crate::mark::MarkSpace,
    xi_space: crate::mark::MarkSpace,
    depth: u32,
    complete: bool,
) -> Result<RootedBall> {
    let tc = t.compact(depth);
    let n = tc.len();
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    let mut xi = BTreeMap::new();
    for v in 1..n as u32 {
        let p = tc.parent[v as usize];
        let (a, b) = if p < v { (p, v) } else { (v, p) };
        edges.push((a, b));
        xi.insert((p, v), Mark::Sym(tc.xi_down[v as usize]));
        xi.insert((v, p), Mark::Sym(tc.xi_up[v as usize]));
    }
    let tau = tc.mark.iter().map(|&s| Mark::Sym(s)).collect();
    let graph = MarkedGraph::new(n, edges, tau, xi, theta_space, xi_space)?;
    let dist = tc.depths();
    Ok(RootedBall {
        graph,
        depth,
        dist,
        orig: (0..n as u32).collect(),
        complete,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mark::MarkSpace;

    /// Path 0-1-2-3-4.
    fn path5() -> MarkedGraph {
        MarkedGraph::unmarked(5, vec![(0, 1), (1, 2), (2, 3), (3, 4)]).unwrap()
    }

    #[test]
    fn depth_zero_is_the_root_alone() {
        let b = ball(&path5(), 2, 0);
        assert_eq!(b.vertex_count(), 1);
        assert!(!b.complete);
        assert_eq!(b.dist, vec![0]);
    }

    #[test]
    fn path_ball_depth_one() {
        let b = ball(&path5(), 2, 1);
        assert_eq!(b.vertex_count(), 3);
        assert_eq!(b.graph.edge_count(), 2);
        assert!(!b.complete);
        assert!(b.is_tree());
    }

    #[test]
    fn exhausted_component_is_complete() {
        let b = ball(&path5(), 2, 4);
        assert_eq!(b.vertex_count(), 5);
        assert!(b.complete);
        let b2 = ball(&path5(), 0, 4);
        assert!(b2.complete);
        assert_eq!(b2.dist, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn triangle_ball_keeps_depth_edge() {
        // Triangle: at depth 1 from any root, the far edge joins the two
        // distance-1 vertices and must be retained (induced subgraph).
        let g = MarkedGraph::unmarked(3, vec![(0, 1), (1, 2), (0, 2)]).unwrap();
        let b = ball(&g, 0, 1);
        assert_eq!(b.vertex_count(), 3);
        assert_eq!(b.graph.edge_count(), 3);
        assert!(!b.is_tree());
        assert!(b.complete);
    }

    #[test]
    fn bfs_distances_match_oracle() {
        // Deterministic sparse graph; compare with Floyd-Warshall.
        let n = 40usize;
        let mut edges = Vec::new();
        for i in 0..n as u32 {
            edges.push((i, (i * 7 + 3) as u32 % n as u32));
            edges.push((i, (i * 5 + 11) as u32 % n as u32));
        }
        edges.retain(|&(a, b)| a != b);
        let mut seen = std::collections::BTreeSet::new();
        edges.retain(|&(a, b)| seen.insert((a.min(b), a.max(b))));
        let g = MarkedGraph::unmarked(n, edges.clone()).unwrap();

        let mut d = vec![vec![u32::MAX / 4; n]; n];
        for i in 0..n {
            d[i][i] = 0;
        }
        for &(a, b) in g.edges() {
            d[a as usize][b as usize] = 1;
            d[b as usize][a as usize] = 1;
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    d[i][j] = d[i][j].min(d[i][k] + d[k][j]);
                }
            }
        }
        for h in 0..4u32 {
            for v in 0..n as u32 {
                let b = ball(&g, v, h);
                let mut expect: Vec<u32> = (0..n as u32)
                    .filter(|&u| d[v as usize][u as usize] <= h)
                    .collect();
                expect.sort_unstable();
                let mut got = b.orig.clone();
                got.sort_unstable();
                assert_eq!(got, expect, "vertex set at v={v}, h={h}");
                for (i, &u) in b.orig.iter().enumerate() {
                    assert_eq!(b.dist[i], d[v as usize][u as usize]);
                }
            }
        }
    }

    #[test]
    fn tree_round_trip() {
        let g = MarkedGraph::unmarked(4, vec![(0, 1), (1, 2), (1, 3)]).unwrap();
        let b = ball(&g, 0, 3);
        let t = b.to_tree().unwrap();
        assert_eq!(t.len(), 4);
        let b2 = tree_to_ball(&t, MarkSpace::unit(), MarkSpace::unit(), 3, true).unwrap();
        assert_eq!(b2.vertex_count(), 4);
        assert!(b2.is_tree());
    }
}
