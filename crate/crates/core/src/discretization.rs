//! Tagged partitions of mark spaces, mark projection, and the certified
//! approximation bound between a graph and its projection.
//!
//! A partition covers the mark space by cells of diameter at most ε plus
//! one designated remainder cell whose mass under the reference law is
//! certified below δ. Projection replaces every mark by the tag of its
//! cell; the bound compares empirical neighborhood distributions before
//! and after projection.

use crate::ball::ball;
use crate::empirical::coupled_bl_bound;
use crate::error::{GraphLdpError, Result};
use crate::graph::MarkedGraph;
use crate::mark::{EdgePairLaw, Mark, MarkSpace, RealLaw, Sym, VertexLaw};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum PartitionKind {
    /// Half-open cells `[lo + i·width, lo + (i+1)·width)` with center
    /// tags; the remainder cell is the complement of the covered range,
    /// tagged by the right endpoint of the range.
    Grid { lo: f64, width: f64, cells: usize },
    /// Groups of symbols with pairwise distance ≤ ε, tagged by their
    /// first symbol; the remainder cell is empty.
    Finite { groups: Vec<Vec<Sym>>, alphabet: usize },
}

/// A finite tagged partition of a mark space. The last cell index is the
/// remainder cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggedPartition {
    kind: PartitionKind,
    /// Maximum diameter of the non-remainder cells.
    pub epsilon: f64,
    /// Certified upper bound on the reference-law mass of the remainder.
    pub remainder_mass: f64,
}

impl TaggedPartition {
    /// Number of cells including the remainder cell.
    pub fn cell_count(&self) -> usize {
        match &self.kind {
            PartitionKind::Grid { cells, .. } => cells + 1,
            PartitionKind::Finite { groups, .. } => groups.len() + 1,
        }
    }

    pub fn remainder_index(&self) -> usize {
        self.cell_count() - 1
    }

    /// Cell index of a mark; the remainder index when it falls outside
    /// every proper cell.
    pub fn classify(&self, m: &Mark) -> Result<usize> {
        match (&self.kind, m) {
            (PartitionKind::Grid { lo, width, cells }, Mark::Real(x)) => {
                if !x.is_finite() {
                    return Err(GraphLdpError::validation("mark must be finite"));
                }
                let i = ((x - lo) / width).floor();
                if i >= 0.0 && (i as usize) < *cells {
                    Ok(i as usize)
                } else {
                    Ok(*cells)
                }
            }
            (PartitionKind::Finite { groups, alphabet }, Mark::Sym(s)) => {
                if (*s as usize) >= *alphabet {
                    return Err(GraphLdpError::validation(format!(
                        "symbol {s} outside the partitioned alphabet"
                    )));
                }
                groups
                    .iter()
                    .position(|g| g.contains(s))
                    .ok_or_else(|| GraphLdpError::validation("mark outside all cells"))
            }
            _ => Err(GraphLdpError::validation(
                "mark kind does not match partition kind",
            )),
        }
    }

    /// Tag point of a cell. The empty finite remainder has no tag.
    pub fn tag(&self, cell: usize) -> Result<Mark> {
        match &self.kind {
            PartitionKind::Grid { lo, width, cells } => {
                if cell < *cells {
                    Ok(Mark::Real(lo + (cell as f64 + 0.5) * width))
                } else if cell == *cells {
                    Ok(Mark::Real(lo + *cells as f64 * width))
                } else {
                    Err(GraphLdpError::validation("cell index out of range"))
                }
            }
            PartitionKind::Finite { groups, .. } => groups
                .get(cell)
                .map(|g| Mark::Sym(g[0]))
                .ok_or_else(|| GraphLdpError::validation("finite remainder cell has no tag")),
        }
    }

    /// Replace a mark by the tag of its cell.
    pub fn project(&self, m: &Mark) -> Result<Mark> {
        self.tag(self.classify(m)?)
    }

    pub fn is_remainder(&self, m: &Mark) -> Result<bool> {
        Ok(self.classify(m)? == self.remainder_index())
    }

    /// Cell masses of a vertex-mark law, remainder last.
    pub fn pushforward_vertex(&self, law: &VertexLaw) -> Result<Vec<f64>> {
        match (&self.kind, law) {
            (PartitionKind::Grid { lo, width, cells }, VertexLaw::Real(rl)) => {
                let mut out = Vec::with_capacity(cells + 1);
                for i in 0..*cells {
                    let a = lo + i as f64 * width;
                    out.push((rl.cdf(a + width) - rl.cdf(a)).max(0.0));
                }
                let covered: f64 = out.iter().sum();
                out.push((1.0 - covered).max(0.0));
                Ok(out)
            }
            (PartitionKind::Finite { groups, alphabet }, VertexLaw::Finite(p)) => {
                if p.len() != *alphabet {
                    return Err(GraphLdpError::validation(
                        "law dimension does not match the partitioned alphabet",
                    ));
                }
                let mut out: Vec<f64> = groups
                    .iter()
                    .map(|g| g.iter().map(|&s| p[s as usize]).sum())
                    .collect();
                out.push(0.0);
                Ok(out)
            }
            _ => Err(GraphLdpError::validation(
                "law kind does not match partition kind",
            )),
        }
    }

    /// Cell-pair masses of an edge-pair law, remainder row/column last.
    pub fn pushforward_pair(&self, law: &EdgePairLaw) -> Result<Vec<Vec<f64>>> {
        let k = self.cell_count();
        match (&self.kind, law) {
            (PartitionKind::Grid { .. }, EdgePairLaw::RealIid(rl)) => {
                let p = self.pushforward_vertex(&VertexLaw::Real(*rl))?;
                Ok((0..k)
                    .map(|i| (0..k).map(|j| p[i] * p[j]).collect())
                    .collect())
            }
            (PartitionKind::Finite { groups, alphabet }, EdgePairLaw::Finite(rows)) => {
                if rows.len() != *alphabet {
                    return Err(GraphLdpError::validation(
                        "law dimension does not match the partitioned alphabet",
                    ));
                }
                let mut out = vec![vec![0.0; k]; k];
                for (i, gi) in groups.iter().enumerate() {
                    for (j, gj) in groups.iter().enumerate() {
                        out[i][j] = gi
                            .iter()
                            .map(|&x| {
                                gj.iter().map(|&y| rows[x as usize][y as usize]).sum::<f64>()
                            })
                            .sum();
                    }
                }
                Ok(out)
            }
            _ => Err(GraphLdpError::validation(
                "law kind does not match partition kind",
            )),
        }
    }
}

/// Partition a finite alphabet into cells of pairwise distance ≤ ε by
/// greedy grouping. The remainder cell is empty, so any δ is certified.
pub fn good_partition_finite(space: &MarkSpace, epsilon: f64) -> Result<TaggedPartition> {
    if epsilon <= 0.0 {
        return Err(GraphLdpError::validation("epsilon must be positive"));
    }
    let k = space
        .size()
        .ok_or_else(|| GraphLdpError::validation("need a finite alphabet"))?;
    let mut groups: Vec<Vec<Sym>> = Vec::new();
    for s in 0..k as Sym {
        let home = groups.iter().position(|g| {
            g.iter().all(|&t| {
                space
                    .mark_dist(&Mark::Sym(s), &Mark::Sym(t))
                    .map(|d| d <= epsilon)
                    .unwrap_or(false)
            })
        });
        match home {
            Some(i) => groups[i].push(s),
            None => groups.push(vec![s]),
        }
    }
    Ok(TaggedPartition {
        kind: PartitionKind::Finite { groups, alphabet: k },
        epsilon,
        remainder_mass: 0.0,
    })
}

/// Grid partition of the real line adapted to `law`: equal-width ε cells
/// over a quantile core, remainder mass certified below δ through the
/// law's distribution function.
pub fn good_partition_real(law: &RealLaw, epsilon: f64, delta: f64) -> Result<TaggedPartition> {
    law.validate()?;
    if epsilon <= 0.0 || delta <= 0.0 {
        return Err(GraphLdpError::validation("epsilon and delta must be positive"));
    }
    let (mut lo, mut hi) = match *law {
        RealLaw::Uniform { lo, hi } => (lo, hi),
        RealLaw::Gaussian { .. } => (law.quantile(delta / 2.0), law.quantile(1.0 - delta / 2.0)),
    };
    for _ in 0..4 {
        let cells = (((hi - lo) / epsilon) - 1e-12).ceil().max(1.0) as usize;
        let covered_hi = lo + cells as f64 * epsilon;
        let mass = (law.cdf(lo) + (1.0 - law.cdf(covered_hi))).max(0.0);
        if mass < delta {
            return Ok(TaggedPartition {
                kind: PartitionKind::Grid {
                    lo,
                    width: epsilon,
                    cells,
                },
                epsilon,
                remainder_mass: mass,
            });
        }
        // Widen the core by one cell on each side and recertify.
        lo -= epsilon;
        hi += epsilon;
    }
    Err(GraphLdpError::certification(format!(
        "cannot certify remainder mass below {delta}"
    )))
}

/// Grid partition covering an observed sample of real marks; the
/// remainder has zero empirical mass.
pub fn good_partition_empirical(values: &[f64], epsilon: f64) -> Result<TaggedPartition> {
    if epsilon <= 0.0 {
        return Err(GraphLdpError::validation("epsilon must be positive"));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(GraphLdpError::validation("need a nonempty finite sample"));
    }
    // One spare cell keeps the maximum strictly inside the covered range.
    let cells = (((hi - lo) / epsilon) - 1e-12).ceil().max(1.0) as usize + 1;
    Ok(TaggedPartition {
        kind: PartitionKind::Grid {
            lo,
            width: epsilon,
            cells,
        },
        epsilon,
        remainder_mass: 0.0,
    })
}

/// The k-indexed partition refinement schedule: `(ε, δ) = (1/(2k), e^{−k²})`.
pub fn schedule(k: u32) -> Result<(f64, f64)> {
    if k == 0 {
        return Err(GraphLdpError::validation("schedule index must be positive"));
    }
    let kf = k as f64;
    Ok((1.0 / (2.0 * kf), (-kf * kf).exp()))
}

/// Replace every mark of `g` by its cell tag: vertex marks through `a`,
/// both orientations of every edge mark through `b`. The skeleton and the
/// mark spaces are unchanged.
pub fn project_graph(
    g: &MarkedGraph,
    a: &TaggedPartition,
    b: &TaggedPartition,
) -> Result<MarkedGraph> {
    let tau = g
        .vertex_marks()
        .iter()
        .map(|m| a.project(m))
        .collect::<Result<Vec<_>>>()?;
    let mut xi = BTreeMap::new();
    for &(u, v) in g.edges() {
        xi.insert((u, v), b.project(g.xi(u, v)?)?);
        xi.insert((v, u), b.project(g.xi(v, u)?)?);
    }
    MarkedGraph::new(
        g.n(),
        g.edges().to_vec(),
        tau,
        xi,
        g.theta_space().clone(),
        g.xi_space().clone(),
    )
}

/// Finite alphabet carrying a partition's cells: one symbol per cell
/// (remainder included), distances inherited from the tag points.
pub fn partition_alphabet(p: &TaggedPartition, source: &MarkSpace) -> Result<MarkSpace> {
    let k = p.cell_count();
    let mut symbols = Vec::with_capacity(k);
    let mut tags: Vec<Option<Mark>> = Vec::with_capacity(k);
    for i in 0..k {
        match p.tag(i) {
            Ok(m) => {
                symbols.push(match m {
                    Mark::Real(x) => format!("{x}"),
                    Mark::Sym(s) => format!("{s}"),
                });
                tags.push(Some(m));
            }
            Err(_) => {
                symbols.push("remainder".into());
                tags.push(None);
            }
        }
    }
    let mut dist = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            if i == j {
                continue;
            }
            dist[i * k + j] = match (&tags[i], &tags[j]) {
                (Some(a), Some(b)) => match (a, b) {
                    (Mark::Real(x), Mark::Real(y)) => (x - y).abs(),
                    _ => source.mark_dist(a, b)?,
                },
                // An empty cell never holds a mark; keep it maximally far.
                _ => 1.0,
            };
        }
    }
    MarkSpace::finite_with_table(symbols, dist)
}

/// Project `g` onto the finite cell alphabets of the two partitions:
/// every mark becomes the symbol of its cell. Unlike `project_graph`
/// this changes the mark spaces, enabling code-based statistics.
pub fn project_to_alphabet(
    g: &MarkedGraph,
    a: &TaggedPartition,
    b: &TaggedPartition,
) -> Result<MarkedGraph> {
    let theta_space = partition_alphabet(a, g.theta_space())?;
    let xi_space = partition_alphabet(b, g.xi_space())?;
    let tau = g
        .vertex_marks()
        .iter()
        .map(|m| a.classify(m).map(|c| Mark::Sym(c as Sym)))
        .collect::<Result<Vec<_>>>()?;
    let mut xi = BTreeMap::new();
    for &(u, v) in g.edges() {
        xi.insert((u, v), Mark::Sym(b.classify(g.xi(u, v)?)? as Sym));
        xi.insert((v, u), Mark::Sym(b.classify(g.xi(v, u)?)? as Sym));
    }
    MarkedGraph::new(g.n(), g.edges().to_vec(), tau, xi, theta_space, xi_space)
}

/// Both sides of the projection approximation bound.
#[derive(Debug, Clone, Serialize)]
pub struct LemmaBoundReport {
    /// Certified distance bound through the identity coupling.
    pub lhs: f64,
    /// Structural bound assembled from the terms below.
    pub rhs: f64,
    pub base: f64,
    pub epsilon: f64,
    pub oversize_term: f64,
    pub remainder_term: f64,
    pub vertex_remainder_fraction: f64,
    pub edge_remainder_fraction: f64,
}

/// Evaluate the approximation bound for projecting `g` through `(a, b)`:
///
/// rhs = 1/(1+h) + ε + (2/n)·#{v : |ball(v, 2h)| > S}
///       + 2S·( frac of vertices with remainder marks
///             + frac of edges with exactly one remainder coordinate )
///
/// lhs = average truncated ball distance between `g` and its projection.
pub fn lemma_bound(
    g: &MarkedGraph,
    a: &TaggedPartition,
    b: &TaggedPartition,
    h: u32,
    s: usize,
) -> Result<LemmaBoundReport> {
    if h < 1 || s < 1 {
        return Err(GraphLdpError::validation("need h ≥ 1 and S ≥ 1"));
    }
    let n = g.n();
    if n == 0 {
        return Err(GraphLdpError::validation("empty graph"));
    }
    let projected = project_graph(g, a, b)?;
    let lhs = coupled_bl_bound(g, &projected, h)?;

    let oversize = (0..n as u32)
        .into_par_iter()
        .filter(|&v| ball(g, v, 2 * h).vertex_count() > s)
        .count();
    let mut vertex_rem = 0usize;
    for m in g.vertex_marks() {
        if a.is_remainder(m)? {
            vertex_rem += 1;
        }
    }
    // The remainder band of the pair space: exactly one coordinate in the
    // remainder cell.
    let mut edge_rem = 0usize;
    for &(u, v) in g.edges() {
        let r1 = b.is_remainder(g.xi(u, v)?)?;
        let r2 = b.is_remainder(g.xi(v, u)?)?;
        if r1 != r2 {
            edge_rem += 1;
        }
    }

    let base = 1.0 / (1.0 + h as f64);
    let epsilon = a.epsilon.max(b.epsilon);
    let oversize_term = 2.0 * oversize as f64 / n as f64;
    let vertex_remainder_fraction = vertex_rem as f64 / n as f64;
    let edge_remainder_fraction = edge_rem as f64 / n as f64;
    let remainder_term =
        2.0 * s as f64 * (vertex_remainder_fraction + edge_remainder_fraction);
    Ok(LemmaBoundReport {
        lhs,
        rhs: base + epsilon + oversize_term + remainder_term,
        base,
        epsilon,
        oversize_term,
        remainder_term,
        vertex_remainder_fraction,
        edge_remainder_fraction,
    })
}

/// Fraction of vertices whose depth-`h` ball exceeds `S` vertices.
pub fn sparsity_diagnostic(g: &MarkedGraph, h: u32, s: usize) -> f64 {
    if g.n() == 0 {
        return 0.0;
    }
    let over = (0..g.n() as u32)
        .into_par_iter()
        .filter(|&v| ball(g, v, h).vertex_count() > s)
        .count();
    over as f64 / g.n() as f64
}
