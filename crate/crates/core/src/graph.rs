//! Finite simple graphs with vertex marks and oriented-edge marks.
//!
//! A marked graph carries a mark `τ_v ∈ Θ` on every vertex and a mark
//! `ξ_(u,v) ∈ Ξ` on every *oriented* edge: each undirected edge `{u,v}`
//! has two marks, one per direction. Loops and parallel edges are
//! rejected at construction.

use crate::error::{GraphLdpError, Result};
use crate::mark::{Mark, MarkSpace};
use std::collections::BTreeMap;

/// A simple graph on `{0, …, n−1}` with vertex and oriented-edge marks.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkedGraph {
    n: usize,
    /// Undirected edges as `(u, v)` with `u < v`, sorted.
    edges: Vec<(u32, u32)>,
    adj: Vec<Vec<u32>>,
    tau: Vec<Mark>,
    /// Oriented-edge marks; both orientations of every edge are present.
    xi: BTreeMap<(u32, u32), Mark>,
    theta_space: MarkSpace,
    xi_space: MarkSpace,
}

impl MarkedGraph {
    pub fn new(
        n: usize,
        mut edges: Vec<(u32, u32)>,
        tau: Vec<Mark>,
        xi: BTreeMap<(u32, u32), Mark>,
        theta_space: MarkSpace,
        xi_space: MarkSpace,
    ) -> Result<Self> {
        for e in edges.iter_mut() {
            if e.0 == e.1 {
                return Err(GraphLdpError::validation(format!("loop at vertex {}", e.0)));
            }
            if e.0 > e.1 {
                *e = (e.1, e.0);
            }
            if e.1 as usize >= n {
                return Err(GraphLdpError::validation(format!(
                    "edge ({}, {}) out of range for n = {}",
                    e.0, e.1, n
                )));
            }
        }
        edges.sort_unstable();
        if edges.windows(2).any(|w| w[0] == w[1]) {
            return Err(GraphLdpError::validation("duplicate edge"));
        }
        if tau.len() != n {
            return Err(GraphLdpError::validation(format!(
                "{} vertex marks for {} vertices",
                tau.len(),
                n
            )));
        }
        for m in &tau {
            theta_space.check_mark(m)?;
        }
        if xi.len() != 2 * edges.len() {
            return Err(GraphLdpError::validation(format!(
                "{} oriented edge marks for {} edges (need both orientations)",
                xi.len(),
                edges.len()
            )));
        }
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in &edges {
            for (a, b) in [(u, v), (v, u)] {
                match xi.get(&(a, b)) {
                    Some(m) => xi_space.check_mark(m)?,
                    None => {
                        return Err(GraphLdpError::validation(format!(
                            "missing mark for oriented edge ({a}, {b})"
                        )))
                    }
                }
            }
            adj[u as usize].push(v);
            adj[v as usize].push(u);
        }
        for l in adj.iter_mut() {
            l.sort_unstable();
        }
        Ok(MarkedGraph {
            n,
            edges,
            adj,
            tau,
            xi,
            theta_space,
            xi_space,
        })
    }

    /// Skeleton-only graph over singleton mark alphabets.
    pub fn unmarked(n: usize, edges: Vec<(u32, u32)>) -> Result<Self> {
        let mut xi = BTreeMap::new();
        for &(u, v) in &edges {
            xi.insert((u, v), Mark::Sym(0));
            xi.insert((v, u), Mark::Sym(0));
        }
        MarkedGraph::new(
            n,
            edges,
            vec![Mark::Sym(0); n],
            xi,
            MarkSpace::unit(),
            MarkSpace::unit(),
        )
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Undirected edges `(u, v)` with `u < v`, in sorted order.
    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn neighbors(&self, v: u32) -> &[u32] {
        &self.adj[v as usize]
    }

    pub fn degree(&self, v: u32) -> usize {
        self.adj[v as usize].len()
    }

    pub fn has_edge(&self, u: u32, v: u32) -> bool {
        self.adj[u as usize].binary_search(&v).is_ok()
    }

    pub fn tau(&self, v: u32) -> &Mark {
        &self.tau[v as usize]
    }

    pub fn vertex_marks(&self) -> &[Mark] {
        &self.tau
    }

    /// Mark of the oriented edge `(u, v)`.
    pub fn xi(&self, u: u32, v: u32) -> Result<&Mark> {
        self.xi.get(&(u, v)).ok_or_else(|| {
            GraphLdpError::validation(format!("no oriented edge ({u}, {v})"))
        })
    }

    pub fn theta_space(&self) -> &MarkSpace {
        &self.theta_space
    }

    pub fn xi_space(&self) -> &MarkSpace {
        &self.xi_space
    }

    /// Mean degree `2|E|/n`.
    pub fn mean_degree(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            2.0 * self.edges.len() as f64 / self.n as f64
        }
    }
}

// ---------------------------------------------------------------------------
// JSON interchange
// ---------------------------------------------------------------------------

/// Serialize to the interchange schema:
/// `{"n", "edges", "vertex_marks", "edge_marks": [{"from","to","mark"}, …],
///   "theta_space", "xi_space"}`.
/// Finite marks appear as symbol strings, real marks as numbers.
pub fn graph_to_json(g: &MarkedGraph) -> serde_json::Value {
    let mark_value = |space: &MarkSpace, m: &Mark| -> serde_json::Value {
        match (space, m) {
            (MarkSpace::Finite { symbols, .. }, Mark::Sym(s)) => {
                serde_json::Value::String(symbols[*s as usize].clone())
            }
            (_, Mark::Real(x)) => serde_json::json!(x),
            (_, Mark::Sym(s)) => serde_json::json!(s),
        }
    };
    let mut edge_marks = Vec::with_capacity(2 * g.edges.len());
    for &(u, v) in &g.edges {
        for (a, b) in [(u, v), (v, u)] {
            edge_marks.push(serde_json::json!({
                "from": a,
                "to": b,
                "mark": mark_value(&g.xi_space, &g.xi[&(a, b)]),
            }));
        }
    }
    serde_json::json!({
        "n": g.n,
        "edges": g.edges.iter().map(|&(u, v)| vec![u, v]).collect::<Vec<_>>(),
        "vertex_marks": g.tau.iter().map(|m| mark_value(&g.theta_space, m)).collect::<Vec<_>>(),
        "edge_marks": edge_marks,
        "theta_space": serde_json::to_value(&g.theta_space).unwrap(),
        "xi_space": serde_json::to_value(&g.xi_space).unwrap(),
    })
}

/// Parse the interchange schema. Space headers are optional; without
/// them, numeric marks are taken as real-valued. The loader rejects
/// loops, duplicate edges, missing orientations, and out-of-range ids.
pub fn graph_from_json(v: &serde_json::Value) -> Result<MarkedGraph> {
    let obj = v
        .as_object()
        .ok_or_else(|| GraphLdpError::validation("graph JSON must be an object"))?;
    let n = obj
        .get("n")
        .and_then(|x| x.as_u64())
        .ok_or_else(|| GraphLdpError::validation("missing integer field 'n'"))? as usize;

    let parse_space = |key: &str| -> Result<Option<MarkSpace>> {
        match obj.get(key) {
            None | Some(serde_json::Value::Null) => Ok(None),
            Some(val) => serde_json::from_value(val.clone())
                .map(Some)
                .map_err(|e| GraphLdpError::validation(format!("bad {key}: {e}"))),
        }
    };
    let theta_space = parse_space("theta_space")?.unwrap_or(MarkSpace::Real);
    let xi_space = parse_space("xi_space")?.unwrap_or(MarkSpace::Real);

    let edges_v = obj
        .get("edges")
        .and_then(|x| x.as_array())
        .ok_or_else(|| GraphLdpError::validation("missing array field 'edges'"))?;
    let mut edges = Vec::with_capacity(edges_v.len());
    for e in edges_v {
        let pair = e
            .as_array()
            .filter(|a| a.len() == 2)
            .ok_or_else(|| GraphLdpError::validation("each edge must be a pair [u, v]"))?;
        let u = pair[0]
            .as_u64()
            .ok_or_else(|| GraphLdpError::validation("edge endpoint must be an integer"))?;
        let v = pair[1]
            .as_u64()
            .ok_or_else(|| GraphLdpError::validation("edge endpoint must be an integer"))?;
        edges.push((u as u32, v as u32));
    }

    let parse_mark = |space: &MarkSpace, val: &serde_json::Value| -> Result<Mark> {
        match space {
            MarkSpace::Finite { symbols, .. } => match val {
                serde_json::Value::String(s) => symbols
                    .iter()
                    .position(|sym| sym == s)
                    .map(|i| Mark::Sym(i as u16))
                    .ok_or_else(|| GraphLdpError::validation(format!("unknown symbol '{s}'"))),
                serde_json::Value::Number(num) => {
                    let i = num
                        .as_u64()
                        .ok_or_else(|| GraphLdpError::validation("symbol index must be a nonnegative integer"))?;
                    if (i as usize) < symbols.len() {
                        Ok(Mark::Sym(i as u16))
                    } else {
                        Err(GraphLdpError::validation(format!("symbol index {i} out of range")))
                    }
                }
                _ => Err(GraphLdpError::validation("finite mark must be a string or index")),
            },
            MarkSpace::Real => val
                .as_f64()
                .map(Mark::Real)
                .ok_or_else(|| GraphLdpError::validation("real mark must be a number")),
        }
    };

    let unit_theta = theta_space.size() == Some(1);
    let tau: Vec<Mark> = match obj.get("vertex_marks") {
        Some(serde_json::Value::Array(arr)) if !arr.is_empty() => arr
            .iter()
            .map(|m| parse_mark(&theta_space, m))
            .collect::<Result<_>>()?,
        _ if unit_theta => vec![Mark::Sym(0); n],
        _ => {
            return Err(GraphLdpError::validation(
                "missing 'vertex_marks' (only omissible for a singleton vertex alphabet)",
            ))
        }
    };

    let unit_xi = xi_space.size() == Some(1);
    let mut xi = BTreeMap::new();
    match obj.get("edge_marks") {
        Some(serde_json::Value::Array(arr)) if !arr.is_empty() => {
            for entry in arr {
                let from = entry
                    .get("from")
                    .and_then(|x| x.as_u64())
                    .ok_or_else(|| GraphLdpError::validation("edge mark needs integer 'from'"))?;
                let to = entry
                    .get("to")
                    .and_then(|x| x.as_u64())
                    .ok_or_else(|| GraphLdpError::validation("edge mark needs integer 'to'"))?;
                let mark = entry
                    .get("mark")
                    .ok_or_else(|| GraphLdpError::validation("edge mark needs 'mark'"))?;
                let key = (from as u32, to as u32);
                if xi.insert(key, parse_mark(&xi_space, mark)?).is_some() {
                    return Err(GraphLdpError::validation(format!(
                        "duplicate mark for oriented edge ({from}, {to})"
                    )));
                }
            }
        }
        _ if unit_xi => {
            for &(u, v) in &edges {
                xi.insert((u, v), Mark::Sym(0));
                xi.insert((v, u), Mark::Sym(0));
            }
        }
        _ => {
            return Err(GraphLdpError::validation(
                "missing 'edge_marks' (only omissible for a singleton edge alphabet)",
            ))
        }
    }

    MarkedGraph::new(n, edges, tau, xi, theta_space, xi_space)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_triangle_marks() -> MarkedGraph {
        let edges = vec![(0, 1), (1, 2), (0, 2)];
        let mut xi = BTreeMap::new();
        for &(u, v) in &edges {
            xi.insert((u, v), Mark::Sym(0));
            xi.insert((v, u), Mark::Sym(1));
        }
        MarkedGraph::new(
            3,
            edges,
            vec![Mark::Sym(0), Mark::Sym(1), Mark::Sym(0)],
            xi,
            MarkSpace::finite_discrete(2),
            MarkSpace::finite_discrete(2),
        )
        .unwrap()
    }

    #[test]
    fn rejects_loop() {
        assert!(MarkedGraph::unmarked(3, vec![(1, 1)]).is_err());
    }

    #[test]
    fn rejects_duplicate_edge_in_either_orientation() {
        assert!(MarkedGraph::unmarked(3, vec![(0, 1), (1, 0)]).is_err());
        assert!(MarkedGraph::unmarked(3, vec![(0, 1), (0, 1)]).is_err());
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(MarkedGraph::unmarked(3, vec![(0, 3)]).is_err());
    }

    #[test]
    fn adjacency_is_sorted_and_symmetric() {
        let g = MarkedGraph::unmarked(4, vec![(2, 0), (0, 1), (3, 0)]).unwrap();
        assert_eq!(g.neighbors(0), &[1, 2, 3]);
        assert_eq!(g.degree(0), 3);
        assert_eq!(g.degree(3), 1);
        assert!(g.has_edge(3, 0));
        assert!(!g.has_edge(1, 2));
    }

    #[test]
    fn oriented_marks_are_independent() {
        let g = two_triangle_marks();
        assert_eq!(g.xi(0, 1).unwrap(), &Mark::Sym(0));
        assert_eq!(g.xi(1, 0).unwrap(), &Mark::Sym(1));
    }

    #[test]
    fn json_round_trip() {
        let g = two_triangle_marks();
        let v = graph_to_json(&g);
        let g2 = graph_from_json(&v).unwrap();
        assert_eq!(g, g2);
    }

    #[test]
    fn json_rejects_missing_orientation() {
        let v = serde_json::json!({
            "n": 2,
            "edges": [[0, 1]],
            "vertex_marks": [0.5, -0.5],
            "edge_marks": [{"from": 0, "to": 1, "mark": 1.0}],
        });
        assert!(graph_from_json(&v).is_err());
    }

    #[test]
    fn json_unit_alphabet_defaults() {
        let v = serde_json::json!({
            "n": 3,
            "edges": [[0, 1], [1, 2]],
            "theta_space": {"kind": "finite", "symbols": ["0"], "dist": [0.0]},
            "xi_space": {"kind": "finite", "symbols": ["0"], "dist": [0.0]},
        });
        let g = graph_from_json(&v).unwrap();
        assert_eq!(g, MarkedGraph::unmarked(3, vec![(0, 1), (1, 2)]).unwrap());
    }
}
